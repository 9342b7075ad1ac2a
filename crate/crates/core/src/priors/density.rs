use crate::error::{Error, Result};
use crate::priors::family::{DensityFamily, Theta};
use crate::scenario::{NodeId, ScenarioLattice, StoppingTime};

const MARTINGALE_TOL: f64 = 1e-10;

/// How θ is chosen for each step of a lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    /// Same θ at every step and state.
    Constant(Theta),
    /// `thetas[t - 1]` drives the step from `t - 1` to `t`.
    PerTime(Vec<Theta>),
    /// `thetas[node]` drives the step into `node`; siblings must agree.
    PerNode(Vec<Theta>),
}

impl Selection {
    /// θ used for the step into `node`.
    pub fn theta_for<'a>(&'a self, lattice: &ScenarioLattice, node: NodeId) -> &'a [f64] {
        match self {
            Selection::Constant(th) => th,
            Selection::PerTime(ths) => &ths[lattice.node(node).time - 1],
            Selection::PerNode(ths) => &ths[node],
        }
    }

    /// Rejects per-node selections whose choice differs between siblings.
    pub fn check_measurable(&self, lattice: &ScenarioLattice) -> Result<()> {
        match self {
            Selection::Constant(_) => Ok(()),
            Selection::PerTime(ths) => {
                if ths.len() < lattice.horizon() {
                    Err(Error::Invalid(format!(
                        "need {} per-time parameters",
                        lattice.horizon()
                    )))
                } else {
                    Ok(())
                }
            }
            Selection::PerNode(ths) => {
                if ths.len() != lattice.len() {
                    return Err(Error::Invalid(format!(
                        "need {} per-node parameters",
                        lattice.len()
                    )));
                }
                for n in lattice.nodes() {
                    if let Some(&first) = n.children.first() {
                        if n.children.iter().any(|&c| ths[c] != ths[first]) {
                            return Err(Error::FutureInformation { time: n.time });
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// Density process `D_t` on a lattice, stored per node with `D_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProcess {
    pub values: Vec<f64>,
}

impl DensityProcess {
    pub fn identity(lattice: &ScenarioLattice) -> Self {
        Self {
            values: vec![1.0; lattice.len()],
        }
    }

    pub fn at(&self, node: NodeId) -> f64 {
        self.values[node]
    }

    /// One-step ratio `D_t / D_{t-1}` into `node`.
    pub fn step(&self, lattice: &ScenarioLattice, node: NodeId) -> f64 {
        match lattice.parent(node) {
            Some(p) => self.values[node] / self.values[p],
            None => 1.0,
        }
    }

    /// E^P[D_t].
    pub fn expectation(&self, lattice: &ScenarioLattice, t: usize) -> f64 {
        lattice
            .layer(t)
            .iter()
            .map(|&id| lattice.path_prob(id) * self.values[id])
            .sum()
    }

    /// Positivity, `D_0 = 1` and the one-step martingale property.
    pub fn validate(&self, lattice: &ScenarioLattice) -> Result<()> {
        if self.values.len() != lattice.len() {
            return Err(Error::Invalid("density process size mismatch".into()));
        }
        if (self.values[0] - 1.0).abs() > MARTINGALE_TOL {
            return Err(Error::InvalidDensity {
                node: 0,
                reason: format!("D_0 = {}", self.values[0]),
            });
        }
        for (id, n) in lattice.nodes().iter().enumerate() {
            let d = self.values[id];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidDensity {
                    node: id,
                    reason: format!("value {d} not positive"),
                });
            }
            if n.children.is_empty() {
                continue;
            }
            let e: f64 = n
                .children
                .iter()
                .map(|&c| lattice.node(c).prob * self.values[c])
                .sum();
            if (e - d).abs() > MARTINGALE_TOL * d.max(1.0) {
                return Err(Error::InvalidDensity {
                    node: id,
                    reason: format!("E_t[D_t+1] = {e} but D_t = {d}"),
                });
            }
        }
        Ok(())
    }

    /// `c·D1 + (1 − c)·D2`.
    pub fn mix(c: f64, d1: &Self, d2: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) || d1.values.len() != d2.values.len() {
            return Err(Error::Invalid(
                "mixture weight must lie in [0,1] and sizes must agree".into(),
            ));
        }
        Ok(Self {
            values: d1
                .values
                .iter()
                .zip(&d2.values)
                .map(|(a, b)| c * a + (1.0 - c) * b)
                .collect(),
        })
    }
}

/// `D_t = ∏_{s ≤ t} f_s(θ_s)` along each path.
pub fn density_process<F: DensityFamily<NodeId> + ?Sized>(
    lattice: &ScenarioLattice,
    family: &F,
    selection: &Selection,
) -> Result<DensityProcess> {
    selection.check_measurable(lattice)?;
    let mut values = vec![1.0; lattice.len()];
    for t in 1..=lattice.horizon() {
        for &id in lattice.layer(t) {
            let theta = selection.theta_for(lattice, id);
            let f = family.density_step(t, theta, &id)?;
            let parent = lattice.parent(id).expect("non-root");
            values[id] = values[parent] * f;
        }
    }
    let d = DensityProcess { values };
    d.validate(lattice)?;
    Ok(d)
}

/// Pasting at τ: steps up to τ follow `d1`, later steps follow `d2`.
pub fn paste(
    lattice: &ScenarioLattice,
    d1: &DensityProcess,
    d2: &DensityProcess,
    tau: &StoppingTime,
) -> Result<DensityProcess> {
    if tau.per_leaf.len() != lattice.leaves().len() {
        return Err(Error::Invalid(
            "stopping time does not match the lattice".into(),
        ));
    }
    StoppingTime::new(lattice, tau.per_leaf.clone())?;
    let mut values = vec![1.0; lattice.len()];
    for t in 1..=lattice.horizon() {
        for &id in lattice.layer(t) {
            let parent = lattice.parent(id).expect("non-root");
            // {τ ≥ t} is known at t − 1
            let from_first = tau.reaches(lattice, id, t);
            let ratio = if from_first {
                d1.step(lattice, id)
            } else {
                d2.step(lattice, id)
            };
            values[id] = values[parent] * ratio;
        }
    }
    Ok(DensityProcess { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::family::TableFamily;

    fn binomial() -> ScenarioLattice {
        ScenarioLattice::uniform(2, &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn hand_factors_multiply() {
        let l = binomial();
        // time-1 factors {1.2, 0.8}, time-2 factors {0.9, 1.1} under both time-1 nodes
        let table = vec![1.0, 1.2, 0.8, 0.9, 1.1, 0.9, 1.1];
        let fam = TableFamily::new(&l, vec![table]).unwrap();
        let d = density_process(&l, &fam, &Selection::Constant(vec![0.0])).unwrap();
        let leaves: Vec<f64> = l.leaves().iter().map(|&id| d.at(id)).collect();
        let expect = [1.08, 1.32, 0.72, 0.88];
        for (a, b) in leaves.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((d.expectation(&l, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn future_information_rejected() {
        let l = binomial();
        let fam = TableFamily::new(
            &l,
            vec![vec![1.0; 7], vec![1.0, 1.2, 0.8, 0.9, 1.1, 0.9, 1.1]],
        )
        .unwrap();
        let mut per_node = vec![vec![0.0]; 7];
        per_node[3] = vec![1.0];
        assert_eq!(
            density_process(&l, &fam, &Selection::PerNode(per_node)),
            Err(Error::FutureInformation { time: 1 })
        );
    }

    #[test]
    fn paste_extremes() {
        let l = binomial();
        let fam = TableFamily::new(
            &l,
            vec![
                vec![1.0, 1.4, 0.6, 0.5, 1.5, 1.1, 0.9],
                vec![1.0, 1.2, 0.8, 0.9, 1.1, 0.9, 1.1],
            ],
        )
        .unwrap();
        let d1 = density_process(&l, &fam, &Selection::Constant(vec![0.0])).unwrap();
        let d2 = density_process(&l, &fam, &Selection::Constant(vec![1.0])).unwrap();
        assert_eq!(
            paste(&l, &d1, &d2, &StoppingTime::constant(&l, 0)).unwrap(),
            d2
        );
        assert_eq!(
            paste(&l, &d1, &d2, &StoppingTime::constant(&l, 2)).unwrap(),
            d1
        );
        let at_one = paste(&l, &d1, &d2, &StoppingTime::constant(&l, 1)).unwrap();
        let spliced =
            density_process(&l, &fam, &Selection::PerTime(vec![vec![0.0], vec![1.0]])).unwrap();
        for (a, b) in at_one.values.iter().zip(&spliced.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
