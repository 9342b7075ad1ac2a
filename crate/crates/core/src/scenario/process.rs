use crate::error::{Error, Result};
use crate::scenario::lattice::{NodeId, ScenarioLattice};

const WEIGHT_TOL: f64 = 1e-10;

/// Real-valued process on a lattice: `values[t][slot]` for the nodes of layer `t`.
/// An empty layer means the process is not defined at that time.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    pub name: String,
    values: Vec<Vec<f64>>,
    /// Time from which each layer's value is known (`t` for adapted, `t - 1` for predictable).
    known_at: Vec<usize>,
}

impl AdaptedProcess {
    pub fn from_fn<F: FnMut(NodeId) -> f64>(
        lattice: &ScenarioLattice,
        name: &str,
        mut f: F,
    ) -> Self {
        let values = (0..=lattice.horizon())
            .map(|t| lattice.layer(t).iter().map(|&id| f(id)).collect())
            .collect();
        Self {
            name: name.to_string(),
            values,
            known_at: (0..=lattice.horizon()).collect(),
        }
    }

    pub fn zeros(lattice: &ScenarioLattice, name: &str) -> Self {
        Self::from_fn(lattice, name, |_| 0.0)
    }

    /// Reads the payload entry `key`; the root may omit it (taken as 0).
    pub fn from_payload(lattice: &ScenarioLattice, key: &str) -> Result<Self> {
        let mut missing = None;
        let p = Self::from_fn(lattice, key, |id| match lattice.payload(id, key) {
            Some(v) => v,
            None => {
                if id != 0 && missing.is_none() {
                    missing = Some(id);
                }
                0.0
            }
        });
        match missing {
            Some(id) => Err(Error::Invalid(format!(
                "payload {key} missing at node {id}"
            ))),
            None => Ok(p),
        }
    }

    /// Process defined only at time `t`.
    pub fn single_layer(
        lattice: &ScenarioLattice,
        name: &str,
        t: usize,
        layer: Vec<f64>,
    ) -> Result<Self> {
        if layer.len() != lattice.layer(t).len() {
            return Err(Error::Invalid(format!(
                "layer {t} has {} states, got {} values",
                lattice.layer(t).len(),
                layer.len()
            )));
        }
        let mut values = vec![Vec::new(); lattice.horizon() + 1];
        values[t] = layer;
        Ok(Self {
            name: name.to_string(),
            values,
            known_at: (0..=lattice.horizon()).collect(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_defined(&self, t: usize) -> bool {
        t < self.values.len() && !self.values[t].is_empty()
    }

    pub fn layer(&self, t: usize) -> Result<&[f64]> {
        if !self.is_defined(t) {
            return Err(Error::Invalid(format!(
                "process {} undefined at time {t}",
                self.name
            )));
        }
        Ok(&self.values[t])
    }

    pub fn set_layer(&mut self, t: usize, layer: Vec<f64>) {
        self.values[t] = layer;
    }

    pub fn at(&self, lattice: &ScenarioLattice, id: NodeId) -> f64 {
        self.values[lattice.node(id).time][lattice.slot(id)]
    }

    pub fn known_at(&self, t: usize) -> usize {
        self.known_at[t]
    }

    /// Marks layer `t` as known from `time` onwards.
    pub fn with_known_at(mut self, t: usize, time: usize) -> Self {
        self.known_at[t] = time;
        self
    }

    /// Value at time `t` must agree on states sharing the same history up to its measurability time.
    pub fn is_adapted(&self, lattice: &ScenarioLattice) -> bool {
        if self.values.len() != lattice.horizon() + 1 {
            return false;
        }
        for t in 0..=lattice.horizon() {
            if self.values[t].is_empty() {
                continue;
            }
            if self.values[t].len() != lattice.layer(t).len() || self.known_at[t] > t {
                return false;
            }
            let k = self.known_at[t];
            let mut seen: std::collections::HashMap<NodeId, f64> = std::collections::HashMap::new();
            for (slot, &id) in lattice.layer(t).iter().enumerate() {
                let a = lattice.ancestor(id, k);
                let v = self.values[t][slot];
                match seen.get(&a) {
                    Some(&w) if w.to_bits() != v.to_bits() => return false,
                    Some(_) => {}
                    None => {
                        seen.insert(a, v);
                    }
                }
            }
        }
        true
    }
}

/// Checks that one-step factors (indexed by node) are positive with conditional mean 1
/// under the base transition probabilities.
pub fn check_density_steps(lattice: &ScenarioLattice, factors: &[f64]) -> Result<()> {
    if factors.len() != lattice.len() {
        return Err(Error::Invalid(format!(
            "expected {} factors, got {}",
            lattice.len(),
            factors.len()
        )));
    }
    for (id, n) in lattice.nodes().iter().enumerate() {
        if n.children.is_empty() {
            continue;
        }
        let mut mean = 0.0;
        for &c in &n.children {
            let f = factors[c];
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::InvalidDensity {
                    node: c,
                    reason: format!("factor {f} not positive"),
                });
            }
            mean += lattice.node(c).prob * f;
        }
        if (mean - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidDensity {
                node: id,
                reason: format!("conditional mean {mean} differs from 1"),
            });
        }
    }
    Ok(())
}

/// E_t[Y_s] per node of layer `t`, optionally under the measure whose one-step
/// factors (per node, relative to the parent) are `weights`.
pub fn cond_expectation(
    lattice: &ScenarioLattice,
    y: &AdaptedProcess,
    s: usize,
    t: usize,
    weights: Option<&[f64]>,
) -> Result<AdaptedProcess> {
    if s <= t || s > lattice.horizon() {
        return Err(Error::Invalid(format!("need t < s <= T, got t={t}, s={s}")));
    }
    let ys = y.layer(s)?;
    if let Some(w) = weights {
        check_density_steps(lattice, w)?;
    }
    // roll back one layer at a time
    let mut cur: Vec<f64> = ys.to_vec();
    for u in (t..s).rev() {
        let next: Vec<f64> = lattice
            .layer(u)
            .iter()
            .map(|&id| {
                lattice
                    .children(id)
                    .iter()
                    .map(|&c| {
                        let p = lattice.node(c).prob;
                        let v = cur[lattice.slot(c)];
                        match weights {
                            Some(w) => p * w[c] * v,
                            None => p * v,
                        }
                    })
                    .sum()
            })
            .collect();
        cur = next;
    }
    AdaptedProcess::single_layer(lattice, &format!("E_{t}[{}]", y.name), t, cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_branch() -> ScenarioLattice {
        ScenarioLattice::build(
            1,
            |_| vec![0.5, 0.5],
            |n| vec![("Y".into(), if n.path == [0] { 1.0 } else { 3.0 })],
        )
        .unwrap()
    }

    #[test]
    fn plain_mean() {
        let l = two_branch();
        let y = AdaptedProcess::from_payload(&l, "Y").unwrap();
        let e = cond_expectation(&l, &y, 1, 0, None).unwrap();
        assert_eq!(e.layer(0).unwrap(), &[2.0]);
    }

    #[test]
    fn reweighted_mean() {
        let l = two_branch();
        let y = AdaptedProcess::from_payload(&l, "Y").unwrap();
        let w = [1.0, 0.5, 1.5];
        let e = cond_expectation(&l, &y, 1, 0, Some(&w)).unwrap();
        assert!((e.layer(0).unwrap()[0] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn bad_weights_rejected() {
        let l = two_branch();
        let y = AdaptedProcess::from_payload(&l, "Y").unwrap();
        let w = [1.0, 0.5, 1.0];
        assert!(matches!(
            cond_expectation(&l, &y, 1, 0, Some(&w)),
            Err(Error::InvalidDensity { .. })
        ));
    }

    #[test]
    fn constant_process_is_preserved() {
        let l = ScenarioLattice::uniform(2, &[0.3, 0.7]).unwrap();
        let y = AdaptedProcess::from_fn(&l, "c", |_| 4.25);
        let w: Vec<f64> = (0..l.len())
            .map(|id| match l.node(id).prob {
                p if (p - 0.3).abs() < 1e-12 => 2.0,
                _ => 0.4 / 0.7,
            })
            .collect();
        let e = cond_expectation(&l, &y, 2, 0, Some(&w)).unwrap();
        assert!((e.layer(0).unwrap()[0] - 4.25).abs() < 1e-12);
    }

    #[test]
    fn predictable_tag_checked() {
        let l = ScenarioLattice::uniform(1, &[0.5, 0.5]).unwrap();
        let p = AdaptedProcess::from_fn(&l, "h", |id| id as f64).with_known_at(1, 0);
        assert!(!p.is_adapted(&l));
        let q = AdaptedProcess::from_fn(&l, "h", |id| if id == 0 { 0.0 } else { 1.0 })
            .with_known_at(1, 0);
        assert!(q.is_adapted(&l));
    }

    #[test]
    fn missing_payload_reported() {
        let l = ScenarioLattice::uniform(1, &[1.0]).unwrap();
        assert!(AdaptedProcess::from_payload(&l, "X").is_err());
    }
}
