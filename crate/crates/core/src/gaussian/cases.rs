use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::closed_form::{expected_positive_part, fit_h, PiecewiseLinear};
use crate::gaussian::model::GaussianModel;
use crate::numerics::{norm_cdf, norm_pdf};
use crate::priors::{interior_grid, maximize_on_boundary, BoundaryGrid, ParamRegion, Theta};
use crate::riskmeasures::{gaussian_c, RiskMeasureSpec};
use crate::scenario::{simulate_paths, InnovationSpec};
use crate::valuation::{value_root, ClosedFormLayer, Direction, RootValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Constant-parameter priors: bounds only.
    One,
    /// Rectangular closure: value by backward recursion plus an upper bound.
    Two,
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Case::One => "1",
            Case::Two => "2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub case: Case,
    pub rm: RiskMeasureSpec,
    /// Confidence level of the parameter region.
    pub p: f64,
    /// Monte Carlo sample size per measure.
    pub n: usize,
    pub seed: u64,
    /// Boundary points for two-dimensional regions.
    pub m: usize,
    /// Boundary points for three- and four-dimensional regions.
    pub m4: usize,
    pub knots: usize,
    /// Optimization direction of the time-1 continuation value in Case 2.
    pub c1_direction: Direction,
    /// Local search on the boundary after the grid.
    pub refine: bool,
    /// Directions per interior shell for the Case-1 interior cross-check (0 disables it).
    pub interior: usize,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            case: Case::One,
            rm: RiskMeasureSpec::var(0.005).expect("valid level"),
            p: 0.5,
            n: 100_000,
            seed: 0,
            m: 360,
            m4: 128,
            knots: 64,
            c1_direction: Direction::Inf,
            refine: true,
            interior: 0,
        }
    }
}

impl CaseConfig {
    pub fn validate(&self) -> Result<()> {
        crate::riskmeasures::check_level(self.p)?;
        crate::riskmeasures::check_level(self.rm.level)?;
        if self.n < 1000 {
            return Err(Error::Invalid(format!(
                "sample size must be at least 1000, got {}",
                self.n
            )));
        }
        if self.m < 8 || self.m4 < 8 {
            return Err(Error::Invalid(
                "boundary resolution must be at least 8".into(),
            ));
        }
        if self.knots < 16 {
            return Err(Error::Invalid(format!(
                "need at least 16 knots, got {}",
                self.knots
            )));
        }
        Ok(())
    }
}

/// Innovations for the root step: base-measure draws and antithetic draws used
/// for every `Q_θ` (common random numbers across θ).
#[derive(Debug, Clone, PartialEq)]
pub struct McDraws {
    pub p_prev: Vec<f64>,
    pub p_new: Vec<f64>,
    pub q_prev: Vec<f64>,
    pub q_new: Vec<f64>,
}

impl McDraws {
    pub fn simulate(n: usize, seed: u64) -> Result<Self> {
        let spec = InnovationSpec::new(2)
            .column("eps_prev", 1)
            .column("eps_new", 1)
            .antithetic_column("q_eps_prev", 1)
            .antithetic_column("q_eps_new", 1);
        let s = simulate_paths(&spec, n, seed)?;
        let col = |name: &str| s.column(name).expect("simulated column").to_vec();
        Ok(Self {
            p_prev: col("eps_prev"),
            p_new: col("eps_new"),
            q_prev: col("q_eps_prev"),
            q_new: col("q_eps_new"),
        })
    }

    pub fn len(&self) -> usize {
        self.p_prev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_prev.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
enum Continuation<'a> {
    /// Closed-form `g` for one `(β1, σ1)`.
    G(f64, f64),
    H(&'a PiecewiseLinear),
}

/// `X_1 + V_1` as a function of the root innovations.
pub struct RootLayer<'a> {
    model: &'a GaussianModel,
    draws: &'a McDraws,
    c: f64,
    cont: Continuation<'a>,
}

impl<'a> RootLayer<'a> {
    /// Case 1: the time-1 layer of the single prior `θ`.
    pub fn single_prior(
        model: &'a GaussianModel,
        draws: &'a McDraws,
        c: f64,
        theta: &[f64],
    ) -> Result<Self> {
        if !(theta.len() == 4 && theta[1] > 0.0 && theta[3] > 0.0) {
            return Err(Error::OutsideDomain(theta.to_vec()));
        }
        Ok(Self {
            model,
            draws,
            c,
            cont: Continuation::G(theta[2], theta[3]),
        })
    }

    /// Case 2: the time-1 continuation value is given by `h`.
    pub fn with_h(
        model: &'a GaussianModel,
        draws: &'a McDraws,
        c: f64,
        h: &'a PiecewiseLinear,
    ) -> Self {
        Self {
            model,
            draws,
            c,
            cont: Continuation::H(h),
        }
    }

    fn values(&self, theta: &[f64], e_prev: &[f64], e_new: &[f64]) -> Result<Vec<f64>> {
        let m = self.model;
        let [b0, s0, b1, s1] = [theta[0], theta[1], theta[2], theta[3]];
        if !(s0 > 0.0 && s1 > 0.0) {
            return Err(Error::OutsideDomain(theta.to_vec()));
        }
        let (vm1, v0) = (m.v(-1), m.v(0));
        let base = vm1 * (b1 - 1.0) * m.c_prev + v0.sqrt() * m.sigma1 * self.c;
        let (sp, sn) = (vm1.sqrt() * s1, s0 / v0.sqrt());
        let cont = self.cont;
        let w: Vec<f64> = e_prev
            .par_iter()
            .zip(e_new.par_iter())
            .map(|(&ep, &en)| {
                let c01 = b0 + sn * en;
                let c1 = match cont {
                    Continuation::G(gb1, gs1) => expected_positive_part(
                        v0 * (m.beta1 - gb1) * c01 + v0.sqrt() * m.sigma1 * self.c,
                        v0.sqrt() * gs1,
                    ),
                    Continuation::H(h) => h.eval(c01),
                };
                base + sp * ep + v0 * m.beta1 * c01 - c1
            })
            .collect();
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("X_1 + V_1 at θ = {theta:?}")));
        }
        Ok(w)
    }
}

impl ClosedFormLayer for RootLayer<'_> {
    fn continuation_reference(&self) -> Result<Vec<f64>> {
        self.values(&self.model.theta_p(), &self.draws.p_prev, &self.draws.p_new)
    }

    fn continuation_under(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.values(theta, &self.draws.q_prev, &self.draws.q_new)
    }
}

/// `V_0^θ` for a single prior.
pub fn value_single_prior(
    model: &GaussianModel,
    draws: &McDraws,
    rm: &RiskMeasureSpec,
    theta: &[f64],
) -> Result<RootValue> {
    let layer = RootLayer::single_prior(model, draws, gaussian_c(rm), theta)?;
    value_root(Some(&layer), rm, &[theta.to_vec()])
}

fn admissible(z: &[f64]) -> bool {
    z[1] > 0.0 && z[2] > 1.0 && z[3] > 0.0
}

/// Admissible boundary points, or just the center of a degenerate region.
fn search_grid(region: &ParamRegion, m: usize) -> Result<BoundaryGrid> {
    if region.radius_sq == 0.0 {
        let mut s = vec![0.0; region.dim];
        s[0] = 1.0;
        return Ok(BoundaryGrid {
            points: vec![region.mu.clone()],
            directions: vec![s],
            dropped: 0,
        });
    }
    region.admissible_boundary_grid(m, admissible)
}

fn top_directions(
    values: &[f64],
    directions: &[Vec<f64>],
    k: usize,
    largest: bool,
) -> Vec<Vec<f64>> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let o = values[a].total_cmp(&values[b]);
        if largest { o.reverse() } else { o }.then(a.cmp(&b))
    });
    idx.into_iter()
        .take(k)
        .map(|i| directions[i].clone())
        .collect()
}

const REFINE_STARTS: usize = 2;
const REFINE_STEP: f64 = 0.2;
const REFINE_MIN_STEP: f64 = 2e-3;
const REFINE_EVALS: usize = 60;

/// Maximum of `E^θ[X_1 + X_2]` over the (β0, β1) projection of Θ.
pub fn case1_upper(
    model: &GaussianModel,
    region: &ParamRegion,
    m: usize,
) -> Result<(f64, Vec<f64>)> {
    let proj = region.project(&[0, 2])?;
    let f = |z: &[f64]| Some(model.expected_total(z[0], z[1]));
    let dirs = crate::priors::sphere_directions(2, m)?;
    let vals: Vec<f64> = dirs
        .iter()
        .map(|s| {
            let z = proj.boundary_point(s);
            model.expected_total(z[0], z[1])
        })
        .collect();
    let starts = top_directions(&vals, &dirs, 1, true);
    let best = maximize_on_boundary(
        &proj,
        &starts,
        0.5 * std::f64::consts::TAU / m as f64,
        1e-9,
        400,
        f,
    )
    .ok_or(Error::EmptyGrid)?;
    Ok((best.value, best.theta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case1Result {
    pub lower: f64,
    pub upper: f64,
    /// Boundary point attaining the lower bound.
    pub argmax: Theta,
    /// (β0, β1) attaining the upper bound.
    pub upper_argmax: Vec<f64>,
    pub grid_points: usize,
    pub dropped: usize,
    pub evaluations: usize,
    /// Largest excess of an interior value over the boundary optimum (0 if none).
    pub interior_excess: Option<f64>,
}

/// Lower bound `sup_{θ ∈ ∂Θ} V_0^θ` and upper bound `sup_{θ ∈ Θ} E^θ[X_1 + X_2]`.
pub fn case1_bounds(
    cfg: &CaseConfig,
    model: &GaussianModel,
    region: &ParamRegion,
    draws: &McDraws,
) -> Result<Case1Result> {
    cfg.validate()?;
    model.validate()?;
    let (upper, upper_argmax) = case1_upper(model, region, cfg.m)?;
    let grid = search_grid(region, cfg.m4)?;
    let vals = grid
        .points
        .par_iter()
        .map(|th| Ok(value_single_prior(model, draws, &cfg.rm, th)?.v0))
        .collect::<Result<Vec<f64>>>()?;
    let mut best_i = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v > vals[best_i] {
            best_i = i;
        }
    }
    let (mut lower, mut argmax) = (vals[best_i], grid.points[best_i].clone());
    let mut evaluations = vals.len();
    if cfg.refine && region.radius_sq > 0.0 {
        let starts = top_directions(&vals, &grid.directions, REFINE_STARTS, true);
        let f = |th: &[f64]| {
            if !admissible(th) {
                return None;
            }
            value_single_prior(model, draws, &cfg.rm, th)
                .ok()
                .map(|r| r.v0)
        };
        if let Some(opt) = maximize_on_boundary(
            region,
            &starts,
            REFINE_STEP,
            REFINE_MIN_STEP,
            REFINE_EVALS,
            f,
        ) {
            evaluations += opt.evaluations;
            if opt.value > lower {
                lower = opt.value;
                argmax = opt.theta;
            }
        }
    }
    let interior_excess = if cfg.interior > 0 && region.radius_sq > 0.0 {
        let pts = interior_grid(region, cfg.interior.max(2), &[0.5])?;
        let mut excess: f64 = 0.0;
        for th in pts.iter().filter(|z| admissible(z)) {
            excess = excess.max(value_single_prior(model, draws, &cfg.rm, th)?.v0 - lower);
            evaluations += 1;
        }
        Some(excess)
    } else {
        None
    };
    Ok(Case1Result {
        lower,
        upper,
        argmax,
        upper_argmax,
        grid_points: grid.points.len(),
        dropped: grid.dropped,
        evaluations,
        interior_excess,
    })
}

/// `sup_Θ (v_{−1}(β1 − 1)C_{−1,1} + v_0 β0 + v_0(β1,max − 1)E[C⁺] + v_0(β1,min − 1)E[C⁻])`
/// with `C ~ N(β0, σ0²/v_0)`, where `E[C⁻] = E[C 1{C < 0}]`.
pub fn case2_upper(
    model: &GaussianModel,
    region: &ParamRegion,
    m: usize,
) -> Result<(f64, Vec<f64>)> {
    let r = region.radius();
    let sd_b1 = region.sigma[2 * 4 + 2].sqrt();
    let (b1_min, b1_max) = (region.mu[2] - r * sd_b1, region.mu[2] + r * sd_b1);
    if b1_min <= 1.0 {
        return Err(Error::Invalid(format!(
            "smallest development factor in the region is {b1_min}; the upper bound requires it to exceed 1"
        )));
    }
    let (vm1, v0) = (model.v(-1), model.v(0));
    let f = |z: &[f64]| {
        let (b0, s0, b1) = (z[0], z[1], z[2]);
        if !(s0 > 0.0) {
            return None;
        }
        let s = s0 / v0.sqrt();
        let d = b0 / s;
        let pos = b0 * norm_cdf(d) + s * norm_pdf(d);
        let neg = b0 * norm_cdf(-d) - s * norm_pdf(d);
        Some(
            vm1 * (b1 - 1.0) * model.c_prev
                + v0 * b0
                + v0 * (b1_max - 1.0) * pos
                + v0 * (b1_min - 1.0) * neg,
        )
    };
    let proj = region.project(&[0, 1, 2])?;
    if proj.radius_sq == 0.0 {
        return f(&proj.mu)
            .map(|v| (v, proj.mu.clone()))
            .ok_or(Error::OutsideDomain(proj.mu.clone()));
    }
    let grid = proj.admissible_boundary_grid(m, |z| z[1] > 0.0 && z[2] > 1.0)?;
    let vals: Vec<f64> = grid
        .points
        .iter()
        .map(|z| f(z).expect("admissible"))
        .collect();
    let starts = top_directions(&vals, &grid.directions, REFINE_STARTS, true);
    let best =
        maximize_on_boundary(&proj, &starts, REFINE_STEP, 1e-9, 2000, f).ok_or(Error::EmptyGrid)?;
    Ok((best.value, best.theta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case2Result {
    pub v0: f64,
    pub upper: f64,
    pub r0: f64,
    pub c0: f64,
    /// Boundary point attaining `C_0`.
    pub argmin: Theta,
    pub upper_argmax: Vec<f64>,
    /// Evaluations of `h` outside its knot range.
    pub clamped: usize,
    pub dropped: usize,
}

/// `V_0` for the rectangular closure and its upper bound.
pub fn case2_value(
    cfg: &CaseConfig,
    model: &GaussianModel,
    region: &ParamRegion,
    draws: &McDraws,
) -> Result<Case2Result> {
    cfg.validate()?;
    model.validate()?;
    let (upper, upper_argmax) = case2_upper(model, region, cfg.m4)?;
    let c = gaussian_c(&cfg.rm);
    let h = fit_h(
        model,
        &region.project(&[2, 3])?,
        cfg.m,
        cfg.knots,
        c,
        cfg.c1_direction,
    )?;
    let layer = RootLayer::with_h(model, draws, c, &h);
    let grid = search_grid(region, cfg.m4)?;
    let root = value_root(Some(&layer), &cfg.rm, &grid.points)?;
    let (r0, mut c0, mut argmin) = (root.r0, root.c0, grid.points[root.argmin].clone());
    if cfg.refine && region.radius_sq > 0.0 {
        let starts = top_directions(&root.per_theta, &grid.directions, REFINE_STARTS, false);
        let f = |th: &[f64]| {
            if !admissible(th) {
                return None;
            }
            let w = layer.continuation_under(th).ok()?;
            Some(-(w.iter().map(|&y| (r0 - y).max(0.0)).sum::<f64>() / w.len() as f64))
        };
        if let Some(opt) = maximize_on_boundary(
            region,
            &starts,
            REFINE_STEP,
            REFINE_MIN_STEP,
            REFINE_EVALS,
            f,
        ) {
            if -opt.value < c0 {
                c0 = -opt.value;
                argmin = opt.theta;
            }
        }
    }
    Ok(Case2Result {
        v0: r0 - c0,
        upper,
        r0,
        c0,
        argmin,
        upper_argmax,
        clamped: h.clamped(),
        dropped: grid.dropped,
    })
}
