use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::cholesky;
use crate::priors::{normal_ratio, DensityFamily};
use crate::scenario::paths::substream;

/// Chain-ladder style model for exposure-adjusted cumulative payments:
///
/// C_{i,1} = β0 + σ0/√v_i ε_{i,1},   C_{i,2} = β1 C_{i,1} + σ1/√v_i ε_{i,2}.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    pub beta0: f64,
    pub sigma0: f64,
    pub beta1: f64,
    pub sigma1: f64,
    /// First accident year `i0 < 0`; years run `i0..=0`.
    pub first_year: i32,
    /// Exposures `v_{i0}, …, v_0`.
    pub exposures: Vec<f64>,
    /// Known first-development amount `C_{−1,1}`.
    pub c_prev: f64,
}

impl Default for GaussianModel {
    fn default() -> Self {
        let beta0 = 2.0 / 3.0;
        Self {
            beta0,
            sigma0: 0.2,
            beta1: 1.5,
            sigma1: 0.2,
            first_year: -10,
            exposures: vec![1.0; 11],
            c_prev: beta0,
        }
    }
}

impl GaussianModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0 && self.sigma1 > 0.0) {
            return Err(Error::Invalid(
                "standard deviations must be positive".into(),
            ));
        }
        if self.first_year > -3 {
            return Err(Error::Invalid(format!(
                "first year must be at most -3, got {}",
                self.first_year
            )));
        }
        if self.exposures.len() != (1 - self.first_year) as usize {
            return Err(Error::Invalid(format!(
                "need {} exposures for years {}..=0, got {}",
                1 - self.first_year,
                self.first_year,
                self.exposures.len()
            )));
        }
        if self.exposures.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Invalid("exposures must be positive".into()));
        }
        for x in [self.beta0, self.beta1, self.c_prev] {
            if !x.is_finite() {
                return Err(Error::NonFinite("model parameter".into()));
            }
        }
        Ok(())
    }

    /// Exposure of accident year `i`.
    pub fn v(&self, i: i32) -> f64 {
        self.exposures[(i - self.first_year) as usize]
    }

    /// `(β0, σ0, β1, σ1)` of the base measure.
    pub fn theta_p(&self) -> [f64; 4] {
        [self.beta0, self.sigma0, self.beta1, self.sigma1]
    }

    /// `E[X_1 + X_2]` under parameters `(β0, β1)`.
    pub fn expected_total(&self, beta0: f64, beta1: f64) -> f64 {
        self.v(-1) * (beta1 - 1.0) * self.c_prev + self.v(0) * beta0 * beta1
    }
}

/// Development data for accident years `i0..i0+n`. Both columns are simulated
/// for every year; the estimators use `c2` of all but the latest year.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    pub exposures: Vec<f64>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
}

/// Simulates `n_years` accident years with exposures from the model (recycled if short).
pub fn simulate_triangle(model: &GaussianModel, n_years: usize, seed: u64) -> Result<Triangle> {
    let mut rng = substream(seed, "triangle", 0);
    triangle_from(model, n_years, &mut rng)
}

fn triangle_from<R: rand::Rng>(
    model: &GaussianModel,
    n_years: usize,
    rng: &mut R,
) -> Result<Triangle> {
    if n_years < 3 {
        return Err(Error::Invalid(format!(
            "need at least 3 accident years, got {n_years}"
        )));
    }
    let s0 = model.sigma0.max(1e-12);
    let s1 = model.sigma1.max(1e-12);
    let mut tri = Triangle {
        exposures: Vec::with_capacity(n_years),
        c1: Vec::new(),
        c2: Vec::new(),
    };
    for k in 0..n_years {
        let v = model.exposures[k % model.exposures.len()];
        let e1: f64 = StandardNormal.sample(rng);
        let e2: f64 = StandardNormal.sample(rng);
        let c1 = model.beta0 + s0 / v.sqrt() * e1;
        tri.exposures.push(v);
        tri.c1.push(c1);
        tri.c2.push(model.beta1 * c1 + s1 / v.sqrt() * e2);
    }
    Ok(tri)
}

/// Unbiased regression estimates `(β̂0, σ̂0², β̂1, σ̂1²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub beta0: f64,
    pub sigma0_sq: f64,
    pub beta1: f64,
    pub sigma1_sq: f64,
}

pub fn fit_params(tri: &Triangle) -> Result<Estimates> {
    let n = tri.c1.len();
    if n < 3 || tri.c2.len() < n - 1 || tri.exposures.len() != n {
        return Err(Error::Invalid(
            "need at least 3 years with both developments".into(),
        ));
    }
    let v = &tri.exposures;
    let sv: f64 = v.iter().sum();
    let beta0 = v.iter().zip(&tri.c1).map(|(v, c)| v * c).sum::<f64>() / sv;
    let sigma0_sq = v
        .iter()
        .zip(&tri.c1)
        .map(|(v, c)| v * (c - beta0) * (c - beta0))
        .sum::<f64>()
        / (n - 1) as f64;
    let m = n - 1;
    let den: f64 = (0..m).map(|i| v[i] * tri.c1[i] * tri.c1[i]).sum();
    if den == 0.0 {
        return Err(Error::Invalid(
            "degenerate first-development amounts".into(),
        ));
    }
    let beta1 = (0..m).map(|i| v[i] * tri.c1[i] * tri.c2[i]).sum::<f64>() / den;
    let sigma1_sq = (0..m)
        .map(|i| {
            let r = tri.c2[i] - beta1 * tri.c1[i];
            v[i] * r * r
        })
        .sum::<f64>()
        / (m - 1) as f64;
    Ok(Estimates {
        beta0,
        sigma0_sq,
        beta1,
        sigma1_sq,
    })
}

/// Repeated estimates `(β̂0, σ̂0, β̂1, σ̂1)` with their sample mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorCloud {
    pub mu: Vec<f64>,
    /// Row-major 4×4 sample covariance.
    pub sigma: Vec<f64>,
    pub rows: Vec<[f64; 4]>,
}

/// Estimates the parameters from `n_rep` independent triangles over the years
/// `i0..=−1`, one generator substream per triangle.
pub fn estimator_cloud(model: &GaussianModel, n_rep: usize, seed: u64) -> Result<EstimatorCloud> {
    model.validate()?;
    if n_rep < 100 {
        return Err(Error::Invalid(format!(
            "estimator cloud needs at least 100 replications, got {n_rep}"
        )));
    }
    let years = (-model.first_year) as usize;
    let history = GaussianModel {
        exposures: model.exposures[..years].to_vec(),
        ..model.clone()
    };
    let rows = (0..n_rep)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, "triangle", k as u64);
            let e = fit_params(&triangle_from(&history, years, &mut rng)?)?;
            Ok([e.beta0, e.sigma0_sq.sqrt(), e.beta1, e.sigma1_sq.sqrt()])
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    let mut mu = vec![0.0; 4];
    for r in &rows {
        for j in 0..4 {
            mu[j] += r[j] / n;
        }
    }
    let mut sigma = vec![0.0; 16];
    for r in &rows {
        for i in 0..4 {
            for j in 0..4 {
                sigma[i * 4 + j] += (r[i] - mu[i]) * (r[j] - mu[j]) / (n - 1.0);
            }
        }
    }
    cholesky(&sigma, 4)?;
    Ok(EstimatorCloud { mu, sigma, rows })
}

/// One-step likelihood ratios of `Q_θ` against the base measure. The context
/// holds the innovations revealed at `t` under the base measure:
/// `[ε_{−1,2}, ε_{0,1}]` at t = 1 and `[ε_{0,2}, C_{0,1}]` at t = 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainLadderFamily {
    pub model: GaussianModel,
}

impl ChainLadderFamily {
    /// Mean and scale of each innovation of step `t` under `Q_θ`.
    pub fn shifts(&self, t: usize, theta: &[f64], c01: f64) -> Vec<(f64, f64)> {
        let m = &self.model;
        let [b0, s0, b1, s1] = [theta[0], theta[1], theta[2], theta[3]];
        let prev = (b1 - m.beta1) / (m.sigma1 / m.v(-1).sqrt()) * m.c_prev;
        match t {
            1 => vec![
                (prev, s1 / m.sigma1),
                ((b0 - m.beta0) / (m.sigma0 / m.v(0).sqrt()), s0 / m.sigma0),
            ],
            _ => vec![(
                (b1 - m.beta1) / (m.sigma1 / m.v(0).sqrt()) * c01,
                s1 / m.sigma1,
            )],
        }
    }
}

impl DensityFamily<[f64]> for ChainLadderFamily {
    fn dim(&self) -> usize {
        4
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == 4 && theta.iter().all(|v| v.is_finite()) && theta[1] > 0.0 && theta[3] > 0.0
    }

    fn density_step(&self, t: usize, theta: &[f64], ctx: &[f64]) -> Result<f64> {
        if !self.in_domain(theta) {
            return Err(Error::OutsideDomain(theta.to_vec()));
        }
        if ctx.len() != 2 || !(t == 1 || t == 2) {
            return Err(Error::Invalid(format!(
                "step {t} needs a context of two values"
            )));
        }
        Ok(match t {
            1 => self
                .shifts(1, theta, 0.0)
                .iter()
                .zip(ctx)
                .map(|(&(mu, s), &e)| normal_ratio(e, mu, s))
                .product(),
            _ => {
                let (mu, s) = self.shifts(2, theta, ctx[1])[0];
                normal_ratio(ctx[0], mu, s)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_limit() {
        let m = GaussianModel {
            sigma0: 0.0,
            sigma1: 0.0,
            ..Default::default()
        };
        let t = simulate_triangle(&m, 5, 3).unwrap();
        for (c1, c2) in t.c1.iter().zip(&t.c2) {
            assert!((c1 - 2.0 / 3.0).abs() < 1e-10);
            assert!((c2 - 1.0).abs() < 1e-10);
        }
        assert!(simulate_triangle(&m, 2, 3).is_err());
    }

    #[test]
    fn exact_fits() {
        let tri = Triangle {
            exposures: vec![1.0; 4],
            c1: vec![0.5; 4],
            c2: vec![0.9; 4],
        };
        let e = fit_params(&tri).unwrap();
        assert_eq!(e.beta0, 0.5);
        assert_eq!(e.sigma0_sq, 0.0);
        let tri = Triangle {
            exposures: vec![1.0; 4],
            c1: vec![1.0, 2.0, 3.0, 4.0],
            c2: vec![1.5, 3.0, 4.5, 0.0],
        };
        let e = fit_params(&tri).unwrap();
        assert!((e.beta1 - 1.5).abs() < 1e-15);
        assert!(e.sigma1_sq.abs() < 1e-28);
        let zero = Triangle {
            exposures: vec![1.0; 3],
            c1: vec![0.0; 3],
            c2: vec![1.0; 3],
        };
        assert!(fit_params(&zero).is_err());
    }

    #[test]
    fn cloud_shape() {
        let c = estimator_cloud(&GaussianModel::default(), 200, 1).unwrap();
        assert_eq!(c.rows.len(), 200);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c.sigma[i * 4 + j], c.sigma[j * 4 + i]);
            }
        }
        assert!(estimator_cloud(&GaussianModel::default(), 50, 1).is_err());
    }

    #[test]
    fn identity_at_base() {
        let f = ChainLadderFamily {
            model: GaussianModel::default(),
        };
        let th = GaussianModel::default().theta_p();
        assert!((f.density_step(1, &th, &[0.3, -1.1]).unwrap() - 1.0).abs() < 1e-14);
        assert!((f.density_step(2, &th, &[0.3, 0.7]).unwrap() - 1.0).abs() < 1e-14);
        assert!(f
            .density_step(1, &[0.6, -0.2, 1.5, 0.2], &[0.0, 0.0])
            .is_err());
    }
}
