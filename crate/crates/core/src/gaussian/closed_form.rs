use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{ensure_finite, Error, Result};
use crate::gaussian::model::GaussianModel;
use crate::numerics::{norm_cdf, norm_pdf};
use crate::priors::ParamRegion;
use crate::valuation::Direction;

/// `R_1 = v_0 (β1 − 1) C_{0,1} + √v_0 σ1 c` under the base parameters.
pub fn r1_closed_form(c01: f64, model: &GaussianModel, c: f64) -> f64 {
    let v0 = model.v(0);
    v0 * (model.beta1 - 1.0) * c01 + v0.sqrt() * model.sigma1 * c
}

/// `E[(a − b ε)^+] = a Φ(a/b) + b φ(a/b)` for standard normal ε and `b > 0`.
pub fn expected_positive_part(a: f64, b: f64) -> f64 {
    let z = a / b;
    (a * norm_cdf(z) + b * norm_pdf(z)).max(0.0)
}

/// Time-1 continuation value `E^θ_1[(R_1 − X_2)^+]` for `θ1 = (β1, σ1)`.
pub fn closed_form_g(theta1: (f64, f64), c01: f64, model: &GaussianModel, c: f64) -> Result<f64> {
    let (beta1, sigma1) = theta1;
    if !(sigma1 > 0.0) {
        return Err(Error::OutsideDomain(vec![beta1, sigma1]));
    }
    let v0 = model.v(0);
    let a = v0 * (model.beta1 - beta1) * c01 + v0.sqrt() * model.sigma1 * c;
    ensure_finite(
        expected_positive_part(a, v0.sqrt() * sigma1),
        "continuation value",
    )
}

/// Piecewise-linear interpolant on increasing knots, constant beyond the ends.
/// Evaluations outside the knot range are counted.
#[derive(Debug)]
pub struct PiecewiseLinear {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    clamped: AtomicUsize,
}

impl Clone for PiecewiseLinear {
    fn clone(&self) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.clone(),
            clamped: AtomicUsize::new(self.clamped()),
        }
    }
}

impl PiecewiseLinear {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() {
            return Err(Error::Invalid(
                "interpolant needs at least two knots and matching values".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("knots must be strictly increasing".into()));
        }
        Ok(Self {
            x,
            y,
            clamped: AtomicUsize::new(0),
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] || t >= self.x[n - 1] {
            if t < self.x[0] || t > self.x[n - 1] {
                self.clamped.fetch_add(1, Ordering::Relaxed);
            }
            return if t <= self.x[0] {
                self.y[0]
            } else {
                self.y[n - 1]
            };
        }
        let i = self.x.partition_point(|&k| k <= t) - 1;
        let w = (t - self.x[i]) / (self.x[i + 1] - self.x[i]);
        self.y[i] + w * (self.y[i + 1] - self.y[i])
    }

    /// Number of evaluations outside the knot range so far.
    pub fn clamped(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }
}

/// Fits `h(C_{0,1}) ≈ opt_{θ1 ∈ grid} g(θ1, C_{0,1})` on `knots` equidistant
/// points spanning ±6 conditional standard deviations of `C_{0,1}`.
/// `region` is the (β1, σ1) projection; grid points with β1 ≤ 1 or σ1 ≤ 0 are dropped.
pub fn fit_h(
    model: &GaussianModel,
    region: &ParamRegion,
    m: usize,
    knots: usize,
    c: f64,
    direction: Direction,
) -> Result<PiecewiseLinear> {
    if knots < 16 {
        return Err(Error::Invalid(format!(
            "need at least 16 knots, got {knots}"
        )));
    }
    if region.dim != 2 {
        return Err(Error::Invalid(
            "h is fitted over a two-dimensional region".into(),
        ));
    }
    let grid = region.admissible_boundary_grid(m, |z| z[0] > 1.0 && z[1] > 0.0)?;
    let sd = model.sigma0 / model.v(0).sqrt();
    let (lo, hi) = (model.beta0 - 6.0 * sd, model.beta0 + 6.0 * sd);
    let x: Vec<f64> = (0..knots)
        .map(|k| lo + (hi - lo) * k as f64 / (knots - 1) as f64)
        .collect();
    let y = x
        .iter()
        .map(|&c01| {
            let vals = grid
                .points
                .iter()
                .map(|z| closed_form_g((z[0], z[1]), c01, model, c));
            let mut best = match direction {
                Direction::Inf => f64::INFINITY,
                Direction::Sup => f64::NEG_INFINITY,
            };
            for v in vals {
                let v = v?;
                best = match direction {
                    Direction::Inf => best.min(v),
                    Direction::Sup => best.max(v),
                };
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    PiecewiseLinear::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::norm_inv;

    #[test]
    fn r1_examples() {
        let m = GaussianModel::default();
        assert_eq!(r1_closed_form(0.0, &m, 0.0), 0.0);
        let c = norm_inv(0.95);
        assert!((r1_closed_form(2.0 / 3.0, &m, c) - (1.0 / 3.0 + 0.2 * c)).abs() < 1e-15);
        assert!((r1_closed_form(2.0 / 3.0, &m, c) - 0.66231).abs() < 1e-5);
    }

    #[test]
    fn g_limits() {
        assert!((expected_positive_part(0.0, 2.0) - 2.0 * 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((expected_positive_part(5.0, 0.01) - 5.0).abs() < 1e-6);
        assert_eq!(expected_positive_part(-5.0, 0.01), 0.0);
        let m = GaussianModel::default();
        assert!(closed_form_g((1.5, 0.0), 1.0, &m, 1.0).is_err());
    }

    #[test]
    fn interpolant_knots_and_clamping() {
        let h = PiecewiseLinear::new(vec![0.0, 1.0, 3.0], vec![1.0, 2.0, 0.0]).unwrap();
        assert_eq!(h.eval(1.0), 2.0);
        assert_eq!(h.eval(2.0), 1.0);
        assert_eq!(h.clamped(), 0);
        assert_eq!(h.eval(-1.0), 1.0);
        assert_eq!(h.eval(4.0), 0.0);
        assert_eq!(h.clamped(), 2);
        assert!(PiecewiseLinear::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn h_with_degenerate_region() {
        let m = GaussianModel::default();
        let r = ParamRegion::with_radius_sq(vec![1.5, 0.2], vec![1.0, 0.0, 0.0, 1.0], 0.0).unwrap();
        let c = norm_inv(0.99);
        let h = fit_h(&m, &r, 360, 64, c, Direction::Inf).unwrap();
        for (&x, &y) in h.x.iter().zip(&h.y) {
            assert!((y - closed_form_g((1.5, 0.2), x, &m, c).unwrap()).abs() < 1e-15);
            assert_eq!(h.eval(x), y);
        }
        assert!(fit_h(&m, &r, 360, 8, c, Direction::Inf).is_err());
    }
}
