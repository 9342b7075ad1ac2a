use crate::scenario::ScenarioLattice;
use crate::valuation::output::ValuationOutput;
use crate::valuation::CashFlowSpec;

const SLACK_TOL: f64 = 1e-12;

/// Per-time check of `V_t ≥ E^P_t[X_{t+1} + V_{t+1}]` and the risk margins.
#[derive(Debug, Clone, PartialEq)]
pub struct SupermartingaleReport {
    /// Smallest `V_t − E^P_t[X_{t+1} + V_{t+1}]` over the states of each layer `t < T`.
    pub min_slack: Vec<f64>,
    /// Number of states with negative slack beyond rounding, per layer.
    pub violations: Vec<usize>,
    /// Smallest risk margin `V_t − E^P_t[Σ_{s>t} X_s]` per layer.
    pub min_margin: Vec<f64>,
}

impl SupermartingaleReport {
    pub fn holds(&self) -> bool {
        self.violations.iter().all(|&v| v == 0)
    }
}

pub(crate) fn fill_diagnostics(
    lattice: &ScenarioLattice,
    cf: &CashFlowSpec,
    out: &mut ValuationOutput,
) {
    let horizon = lattice.horizon();
    let mut cum = vec![0.0; lattice.len()];
    let mut rest = vec![0.0; lattice.len()];
    for t in 1..=horizon {
        for &id in lattice.layer(t) {
            cum[id] = cum[lattice.parent(id).expect("non-root")] + cf.x(lattice, id);
        }
    }
    for t in (0..horizon).rev() {
        for &id in lattice.layer(t) {
            rest[id] = lattice
                .children(id)
                .iter()
                .map(|&c| lattice.node(c).prob * (cf.x(lattice, c) + rest[c]))
                .sum();
        }
    }
    out.supermartingale = (0..=horizon)
        .map(|t| {
            lattice
                .layer(t)
                .iter()
                .enumerate()
                .map(|(s, &id)| cum[id] + out.v[t][s])
                .collect()
        })
        .collect();
    out.risk_margin = (0..=horizon)
        .map(|t| {
            lattice
                .layer(t)
                .iter()
                .enumerate()
                .map(|(s, &id)| out.v[t][s] - rest[id])
                .collect()
        })
        .collect();
}

pub fn supermartingale_diagnostic(
    lattice: &ScenarioLattice,
    out: &ValuationOutput,
    cf: &CashFlowSpec,
) -> SupermartingaleReport {
    let horizon = lattice.horizon();
    let mut min_slack = Vec::with_capacity(horizon);
    let mut violations = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut worst = f64::INFINITY;
        let mut bad = 0;
        for (s, &id) in lattice.layer(t).iter().enumerate() {
            let e: f64 = lattice
                .children(id)
                .iter()
                .map(|&c| lattice.node(c).prob * (cf.x(lattice, c) + out.v[t + 1][lattice.slot(c)]))
                .sum();
            let slack = out.v[t][s] - e;
            worst = worst.min(slack);
            if slack < -SLACK_TOL * e.abs().max(1.0) {
                bad += 1;
            }
        }
        min_slack.push(worst);
        violations.push(bad);
    }
    let min_margin = (0..horizon)
        .map(|t| {
            out.risk_margin[t]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    SupermartingaleReport {
        min_slack,
        violations,
        min_margin,
    }
}

/// Liability value: market value of the replicating portfolio plus `V_0`.
pub fn liability_value(v0: f64, replicating_market_value: f64) -> f64 {
    replicating_market_value + v0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn liability_value_adds() {
        assert_eq!(liability_value(1.5, 0.0), 1.5);
        assert_eq!(liability_value(0.0, 7.0), 7.0);
        assert!((liability_value(1.491, 2.0) - 3.491).abs() < 1e-15);
    }
}
