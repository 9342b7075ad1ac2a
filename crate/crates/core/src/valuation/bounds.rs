use crate::error::{Error, Result};
use crate::priors::{DensityFamily, Theta};
use crate::riskmeasures::RiskMeasureSpec;
use crate::scenario::{NodeId, ScenarioLattice};
use crate::valuation::recursion::{value_with_table, FactorTable};
use crate::valuation::CashFlowSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperBoundMode {
    /// max over the grid of E^{Q_θ}[X_1 + … + X_T] with θ constant in time.
    ConstantPrior,
    /// sup over the rectangular set, by backward recursion.
    Rectangular,
}

pub(crate) fn rectangular_upper(
    lattice: &ScenarioLattice,
    cf: &CashFlowSpec,
    table: &FactorTable,
    mode: UpperBoundMode,
) -> Result<f64> {
    match mode {
        UpperBoundMode::Rectangular => {
            // U_t = max_g E^g_t[X_{t+1} + U_{t+1}]
            let mut u = vec![0.0; lattice.len()];
            for t in (0..lattice.horizon()).rev() {
                for &id in lattice.layer(t) {
                    u[id] = table
                        .factors
                        .iter()
                        .map(|f| {
                            lattice
                                .children(id)
                                .iter()
                                .map(|&c| lattice.node(c).prob * f[c] * (cf.x(lattice, c) + u[c]))
                                .sum::<f64>()
                        })
                        .fold(f64::NEG_INFINITY, f64::max);
                }
            }
            Ok(u[0])
        }
        UpperBoundMode::ConstantPrior => Ok(table
            .factors
            .iter()
            .map(|f| {
                let mut e = vec![0.0; lattice.len()];
                for t in (0..lattice.horizon()).rev() {
                    for &id in lattice.layer(t) {
                        e[id] = lattice
                            .children(id)
                            .iter()
                            .map(|&c| lattice.node(c).prob * f[c] * (cf.x(lattice, c) + e[c]))
                            .sum();
                    }
                }
                e[0]
            })
            .fold(f64::NEG_INFINITY, f64::max)),
    }
}

/// Worst-case expected total cash flow.
pub fn upper_bound<F: DensityFamily<NodeId> + ?Sized>(
    lattice: &ScenarioLattice,
    cf: &CashFlowSpec,
    family: &F,
    grid: &[Theta],
    mode: UpperBoundMode,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let table = FactorTable::new(lattice, family, grid)?;
    rectangular_upper(lattice, cf, &table, mode)
}

/// Best single-prior value over the grid and the grid point attaining it (lowest index on ties).
pub fn lower_bound<F: DensityFamily<NodeId> + ?Sized>(
    lattice: &ScenarioLattice,
    cf: &CashFlowSpec,
    rm: &RiskMeasureSpec,
    family: &F,
    grid: &[Theta],
) -> Result<(f64, Theta)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let table = FactorTable::new(lattice, family, grid)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for g in 0..table.len() {
        let v = value_with_table(lattice, cf, rm, &table.single(g))?.v0();
        if v > best.0 {
            best = (v, g);
        }
    }
    Ok((best.0, grid[best.1].clone()))
}
