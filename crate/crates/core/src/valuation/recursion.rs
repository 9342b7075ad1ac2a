use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::priors::{DensityFamily, Theta};
use crate::riskmeasures::RiskMeasureSpec;
use crate::scenario::{check_density_steps, NodeId, ScenarioLattice, StoppingTime};
use crate::valuation::bounds::{rectangular_upper, UpperBoundMode};
use crate::valuation::diagnostics::fill_diagnostics;
use crate::valuation::output::{BoundPair, ValuationOutput};
use crate::valuation::CashFlowSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Inf,
    Sup,
}

/// One-step factors `f(θ_g)` for every grid point and node.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    pub grid: Vec<Theta>,
    /// `factors[g][node]`; the root entry is 1.
    pub factors: Vec<Vec<f64>>,
}

impl FactorTable {
    pub fn new<F: DensityFamily<NodeId> + ?Sized>(
        lattice: &ScenarioLattice,
        family: &F,
        grid: &[Theta],
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let factors = grid
            .par_iter()
            .map(|theta| -> Result<Vec<f64>> {
                let mut f = vec![1.0; lattice.len()];
                for (id, n) in lattice.nodes().iter().enumerate().skip(1) {
                    f[id] = family.density_step(n.time, theta, &id)?;
                }
                check_density_steps(lattice, &f).map_err(|e| match e {
                    Error::InvalidDensity { node, reason } => Error::InvalidDensity {
                        node,
                        reason: format!("θ = {theta:?}: {reason}"),
                    },
                    other => other,
                })?;
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.to_vec(),
            factors,
        })
    }

    /// Table restricted to a single grid point.
    pub fn single(&self, g: usize) -> Self {
        Self {
            grid: vec![self.grid[g].clone()],
            factors: vec![self.factors[g].clone()],
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Optimum over the grid of `E^P_t[f_{t+1}(θ) Y]` at each node of layer `t`.
/// `y` holds the values of `Y` on layer `t + 1`. Ties go to the lowest index.
pub fn worst_case_cond_exp(
    lattice: &ScenarioLattice,
    y: &[f64],
    table: &FactorTable,
    t: usize,
    direction: Direction,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut vals = Vec::with_capacity(lattice.layer(t).len());
    let mut args = Vec::with_capacity(lattice.layer(t).len());
    for &id in lattice.layer(t) {
        let (v, g) = node_opt(lattice, id, |c| y[lattice.slot(c)], table, direction)?;
        vals.push(v);
        args.push(g);
    }
    Ok((vals, args))
}

fn node_opt<Y: Fn(NodeId) -> f64>(
    lattice: &ScenarioLattice,
    id: NodeId,
    y: Y,
    table: &FactorTable,
    direction: Direction,
) -> Result<(f64, usize)> {
    let mut best = f64::NAN;
    let mut arg = 0;
    for (g, f) in table.factors.iter().enumerate() {
        let e: f64 = lattice
            .children(id)
            .iter()
            .map(|&c| lattice.node(c).prob * f[c] * y(c))
            .sum();
        if !e.is_finite() {
            return Err(Error::NonFinite(format!(
                "reweighted expectation at node {id} for θ = {:?}",
                table.grid[g]
            )));
        }
        let better = match direction {
            Direction::Inf => e < best,
            Direction::Sup => e > best,
        };
        if g == 0 || better {
            best = e;
            arg = g;
        }
    }
    Ok((best, arg))
}

/// One backward step on layer `t`: given `R_t` (layer `t`), `X_{t+1}` and
/// `V_{t+1}` (layer `t + 1`), returns `C_t`, `V_t = R_t − C_t` and the minimizing grid index.
pub fn recursion_step(
    lattice: &ScenarioLattice,
    r_t: &[f64],
    x_next: &[f64],
    v_next: &[f64],
    table: &FactorTable,
    t: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>)> {
    step_layer(lattice, r_t, x_next, v_next, |_| table, t)
}

fn step_layer<'a, T>(
    lattice: &ScenarioLattice,
    r_t: &[f64],
    x_next: &[f64],
    v_next: &[f64],
    table_for: T,
    t: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>)>
where
    T: Fn(NodeId) -> &'a FactorTable,
{
    let layer = lattice.layer(t);
    let mut c = Vec::with_capacity(layer.len());
    let mut v = Vec::with_capacity(layer.len());
    let mut arg = Vec::with_capacity(layer.len());
    for (slot, &id) in layer.iter().enumerate() {
        let r = r_t[slot];
        let w = |ch: NodeId| {
            let s = lattice.slot(ch);
            (r - x_next[s] - v_next[s]).max(0.0)
        };
        let (ct, g) = node_opt(lattice, id, w, table_for(id), Direction::Inf)?;
        c.push(ct);
        v.push(r - ct);
        arg.push(g);
    }
    Ok((c, v, arg))
}

/// Backward recursion with the rectangular set generated by `table`.
pub fn value_with_table(
    lattice: &ScenarioLattice,
    cf: &CashFlowSpec,
    rm: &RiskMeasureSpec,
    table: &FactorTable,
) -> Result<ValuationOutput> {
    run(lattice, cf, rm, |_| table)
}

fn run<'a, T>(
    lattice: &ScenarioLattice,
    cf: &CashFlowSpec,
    rm: &RiskMeasureSpec,
    table_for: T,
) -> Result<ValuationOutput>
where
    T: Fn(NodeId) -> &'a FactorTable,
{
    let horizon = lattice.horizon();
    if cf.residual.horizon() != horizon {
        return Err(Error::HorizonMismatch {
            expected: horizon,
            found: cf.residual.horizon(),
        });
    }
    let x = &cf.residual;
    let zeros = |t: usize| vec![0.0; lattice.layer(t).len()];
    let mut r: Vec<Vec<f64>> = (0..=horizon).map(zeros).collect();
    let mut c = r.clone();
    let mut v = r.clone();
    let mut theta_star = vec![Vec::new(); horizon];
    for t in (0..horizon).rev() {
        let x_next = x.layer(t + 1)?;
        let layer = lattice.layer(t);
        let mut rt = Vec::with_capacity(layer.len());
        for &id in layer {
            let kids = lattice.children(id);
            let z: Vec<f64> = kids
                .iter()
                .map(|&ch| -(x_next[lattice.slot(ch)] + v[t + 1][lattice.slot(ch)]))
                .collect();
            let p: Vec<f64> = kids.iter().map(|&ch| lattice.node(ch).prob).collect();
            rt.push(rm.apply_weighted(&z, &p)?);
        }
        let (ct, vt, at) = step_layer(lattice, &rt, x_next, &v[t + 1], &table_for, t)?;
        r[t] = rt;
        c[t] = ct;
        v[t] = vt;
        theta_star[t] = at;
    }
    let default = (0..=horizon)
        .map(|t| {
            if t == 0 {
                return Vec::new();
            }
            lattice
                .layer(t)
                .iter()
                .map(|&id| {
                    let p = lattice.parent(id).expect("non-root");
                    let s = lattice.slot(id);
                    r[t - 1][lattice.slot(p)] - x.at(lattice, id) - v[t][s] < 0.0
                })
                .collect()
        })
        .collect();
    let mut out = ValuationOutput {
        horizon,
        r,
        c,
        v,
        theta_star,
        default,
        bounds: None,
        supermartingale: Vec::new(),
        risk_margin: Vec::new(),
    };
    fill_diagnostics(lattice, cf, &mut out);
    Ok(out)
}

/// Single-prior valuation where the prior picks grid index `selection[node]`
/// for the step out of each non-leaf `node`.
pub fn value_with_selection(
    lattice: &ScenarioLattice,
    cf: &CashFlowSpec,
    rm: &RiskMeasureSpec,
    table: &FactorTable,
    selection: &[usize],
) -> Result<ValuationOutput> {
    if selection.len() != lattice.len() {
        return Err(Error::Invalid(format!(
            "selection needs {} entries",
            lattice.len()
        )));
    }
    if let Some(&g) = selection.iter().find(|&&g| g >= table.len()) {
        return Err(Error::Invalid(format!(
            "selection index {g} outside the grid"
        )));
    }
    let singles: Vec<FactorTable> = (0..table.len()).map(|g| table.single(g)).collect();
    run(lattice, cf, rm, |id| &singles[selection[id]])
}

/// The multiple-prior value with bounds and diagnostics.
/// Lower bound: best constant-θ single-prior value; upper bound: worst-case
/// expected cash flow over the rectangular set.
pub fn value_multiprior<F: DensityFamily<NodeId> + ?Sized>(
    lattice: &ScenarioLattice,
    cf: &CashFlowSpec,
    rm: &RiskMeasureSpec,
    family: &F,
    grid: &[Theta],
) -> Result<ValuationOutput> {
    let table = FactorTable::new(lattice, family, grid)?;
    let mut out = value_with_table(lattice, cf, rm, &table)?;
    let lower = (0..table.len())
        .map(|g| value_with_table(lattice, cf, rm, &table.single(g)).map(|o| o.v0()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let upper = rectangular_upper(lattice, cf, &table, UpperBoundMode::Rectangular)?;
    out.bounds = Some(BoundPair { lower, upper });
    Ok(out)
}

/// Valuation under the single prior `Q_θ`.
pub fn value_singleprior<F: DensityFamily<NodeId> + ?Sized>(
    lattice: &ScenarioLattice,
    cf: &CashFlowSpec,
    rm: &RiskMeasureSpec,
    family: &F,
    theta: &[f64],
) -> Result<ValuationOutput> {
    let table = FactorTable::new(lattice, family, &[theta.to_vec()])?;
    let mut out = value_with_table(lattice, cf, rm, &table)?;
    let upper = rectangular_upper(lattice, cf, &table, UpperBoundMode::Rectangular)?;
    out.bounds = Some(BoundPair {
        lower: out.v0(),
        upper,
    });
    Ok(out)
}

/// τ*_t = inf{s ∈ t+1..T : R_{s−1} − X_s − V_s < 0} ∧ (T+1), for t = 0..T−1.
pub fn optimal_default_times(
    lattice: &ScenarioLattice,
    out: &ValuationOutput,
) -> Vec<StoppingTime> {
    let horizon = lattice.horizon();
    (0..horizon)
        .map(|t| {
            let per_leaf = lattice
                .leaves()
                .iter()
                .map(|&leaf| {
                    (t + 1..=horizon)
                        .find(|&s| {
                            let n = lattice.ancestor(leaf, s);
                            out.default[s][lattice.slot(n)]
                        })
                        .unwrap_or(horizon + 1)
                })
                .collect();
            StoppingTime { per_leaf }
        })
        .collect()
}
