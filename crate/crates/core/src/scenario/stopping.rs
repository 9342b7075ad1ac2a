use crate::error::{Error, Result};
use crate::scenario::lattice::ScenarioLattice;

/// Stopping time on a lattice, stored by leaf (in layer order). Values range
/// over `0..=T+1`; `T+1` means the liability runs off completely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoppingTime {
    pub per_leaf: Vec<usize>,
}

impl StoppingTime {
    pub fn constant(lattice: &ScenarioLattice, t: usize) -> Self {
        Self {
            per_leaf: vec![t; lattice.leaves().len()],
        }
    }

    /// Checks `{τ ≤ t}` is decided by the time-`t` node for every `t`.
    pub fn new(lattice: &ScenarioLattice, per_leaf: Vec<usize>) -> Result<Self> {
        let horizon = lattice.horizon();
        if per_leaf.len() != lattice.leaves().len() {
            return Err(Error::Invalid(format!(
                "stopping time needs {} leaf values, got {}",
                lattice.leaves().len(),
                per_leaf.len()
            )));
        }
        if let Some(&bad) = per_leaf.iter().find(|&&v| v > horizon + 1) {
            return Err(Error::Invalid(format!("stopping value {bad} beyond T+1")));
        }
        let leaf_base = lattice.leaves()[0];
        for t in 0..horizon {
            for &n in lattice.layer(t) {
                let under = lattice.leaves_under(n);
                let first = per_leaf[under[0] - leaf_base] <= t;
                if under
                    .iter()
                    .any(|&l| (per_leaf[l - leaf_base] <= t) != first)
                {
                    return Err(Error::NotStoppingTime { time: t });
                }
            }
        }
        Ok(Self { per_leaf })
    }

    /// τ evaluated on the leaves below `node`; all must agree whenever the
    /// value is already decided at the node's time.
    pub fn at_leaf(&self, lattice: &ScenarioLattice, leaf: usize) -> usize {
        self.per_leaf[leaf - lattice.leaves()[0]]
    }

    /// Whether `τ ≥ s` on the path through `node` (needs `s ≤ time(node) + 1`).
    pub fn reaches(&self, lattice: &ScenarioLattice, node: usize, s: usize) -> bool {
        let leaf = lattice.leaves_under(node)[0];
        self.at_leaf(lattice, leaf) >= s
    }
}
