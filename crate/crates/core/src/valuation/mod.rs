//! Multiple-prior valuation of a residual liability cash flow `X`.
//!
//! With capital requirements `R_t` and the payoff process
//! `H_t = Σ_{s<t} (R_{s-1} − R_s − X_s)`, the owners' value is
//!
//! C_t = esssup_{τ ≥ t+1} essinf_Q E_t^Q[H_τ − H_{t+1}],   V_t = R_t − C_t,
//!
//! which solves the backward recursion
//!
//! R_t = ρ_t(−X_{t+1} − V_{t+1}),
//! C_t = essinf_Q E_t^Q[(R_t − X_{t+1} − V_{t+1})^+],
//!
//! from `R_T = C_T = V_T = 0`. For rectangular sets generated by one-step
//! factors `f_t(θ)`, the infimum over measures is a minimum over the θ-grid
//! at every state. `R_t` is always computed under the base measure.
//!
//! Exact on lattices; on path samples only the root layer is empirical and the
//! inner layer must come from a [`sample::ClosedFormLayer`].

pub mod bounds;
pub mod diagnostics;
pub mod output;
pub mod recursion;
pub mod sample;

pub use bounds::{lower_bound, upper_bound, UpperBoundMode};
pub use diagnostics::{liability_value, supermartingale_diagnostic, SupermartingaleReport};
pub use output::{bound_csv_row, BoundPair, ValuationOutput};
pub use recursion::{
    optimal_default_times, recursion_step, value_multiprior, value_singleprior,
    value_with_selection, value_with_table, worst_case_cond_exp, Direction, FactorTable,
};
pub use sample::{value_root, ClosedFormLayer, RootValue};

use crate::error::{Error, Result};
use crate::scenario::{AdaptedProcess, ScenarioLattice};

/// Liability cash flow `X^o`, replicating cash flow `X^r` and residual `X = X^o − X^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CashFlowSpec {
    pub liability: AdaptedProcess,
    pub replicating: AdaptedProcess,
    pub residual: AdaptedProcess,
}

impl CashFlowSpec {
    pub fn new(
        lattice: &ScenarioLattice,
        liability: AdaptedProcess,
        replicating: AdaptedProcess,
    ) -> Result<Self> {
        for p in [&liability, &replicating] {
            if p.horizon() != lattice.horizon() {
                return Err(Error::HorizonMismatch {
                    expected: lattice.horizon(),
                    found: p.horizon(),
                });
            }
            if !p.is_adapted(lattice) {
                return Err(Error::Invalid(format!(
                    "cash flow {} is not adapted",
                    p.name
                )));
            }
        }
        let residual = AdaptedProcess::from_fn(lattice, "X", |id| {
            if id == 0 {
                0.0
            } else {
                liability.at(lattice, id) - replicating.at(lattice, id)
            }
        });
        Ok(Self {
            liability,
            replicating,
            residual,
        })
    }

    /// No replicating portfolio.
    pub fn unhedged(lattice: &ScenarioLattice, liability: AdaptedProcess) -> Result<Self> {
        Self::new(lattice, liability, AdaptedProcess::zeros(lattice, "Xr"))
    }

    pub fn from_payload(lattice: &ScenarioLattice, key: &str) -> Result<Self> {
        Self::unhedged(lattice, AdaptedProcess::from_payload(lattice, key)?)
    }

    /// Residual cash flow at a node (0 at the root).
    pub fn x(&self, lattice: &ScenarioLattice, id: usize) -> f64 {
        if id == 0 {
            0.0
        } else {
            self.residual.at(lattice, id)
        }
    }
}

/// Predictable payoff process: `values[t]` holds `H_t` on the nodes of layer
/// `t − 1`, for `t = 1..=T+1` (`values[0]` is empty).
#[derive(Debug, Clone, PartialEq)]
pub struct Payoff {
    pub values: Vec<Vec<f64>>,
}

impl Payoff {
    /// `H_t` seen from a node at time `t − 1`.
    pub fn at(&self, lattice: &ScenarioLattice, t: usize, node: usize) -> f64 {
        debug_assert_eq!(lattice.node(node).time + 1, t);
        self.values[t][lattice.slot(node)]
    }
}

/// `H_1 = 0`, `H_t = Σ_{s ≤ t−1} (R_{s−1} − R_s − X_s)`.
pub fn payoff_process(
    lattice: &ScenarioLattice,
    r: &AdaptedProcess,
    x: &AdaptedProcess,
) -> Result<Payoff> {
    let horizon = lattice.horizon();
    for p in [r, x] {
        if p.horizon() != horizon {
            return Err(Error::HorizonMismatch {
                expected: horizon,
                found: p.horizon(),
            });
        }
    }
    if r.layer(horizon)?.iter().any(|&v| v != 0.0) {
        return Err(Error::Invalid(
            "capital requirement must vanish at the horizon".into(),
        ));
    }
    let mut values = vec![Vec::new(); horizon + 2];
    values[1] = vec![0.0];
    for t in 2..=horizon + 1 {
        // H_t at node n (time t−1) = H_{t−1}(parent) + R_{t−2}(parent) − R_{t−1}(n) − X_{t−1}(n)
        let layer = lattice
            .layer(t - 1)
            .iter()
            .map(|&n| {
                let p = lattice.parent(n).expect("non-root");
                values[t - 1][lattice.slot(p)] + r.at(lattice, p)
                    - r.at(lattice, n)
                    - x.at(lattice, n)
            })
            .collect();
        values[t] = layer;
    }
    Ok(Payoff { values })
}
