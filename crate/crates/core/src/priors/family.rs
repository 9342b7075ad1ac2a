use crate::error::{Error, Result};
use crate::scenario::{check_density_steps, NodeId, ScenarioLattice};

pub type Theta = Vec<f64>;

/// Parametric one-step likelihood ratios `f_t(θ)` relative to the base measure.
/// `C` is whatever the factor reads: a lattice node, or a path's innovations.
pub trait DensityFamily<C: ?Sized>: Sync {
    fn dim(&self) -> usize;

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && theta.iter().all(|v| v.is_finite())
    }

    fn density_step(&self, t: usize, theta: &[f64], ctx: &C) -> Result<f64>;
}

/// Ratio φ(ε; μ, σ²) / φ(ε; 0, 1) of normal densities.
pub fn normal_ratio(eps: f64, mu: f64, sigma: f64) -> f64 {
    let z = (eps - mu) / sigma;
    (0.5 * (eps * eps - z * z) - sigma.ln()).exp()
}

/// Exponential tilt of the base transition probabilities on a lattice:
/// `f(θ)(c) = exp(θ·ξ_c) / Σ_siblings p_s exp(θ·ξ_s)`. θ = 0 is the base measure.
#[derive(Debug, Clone)]
pub struct TiltFamily {
    dim: usize,
    features: Vec<Vec<f64>>,
    parent: Vec<Option<NodeId>>,
    time: Vec<usize>,
    siblings: Vec<Vec<(NodeId, f64)>>,
}

impl TiltFamily {
    /// `features[node]` is the tilt direction of the step into `node` (ignored at the root).
    pub fn new(lattice: &ScenarioLattice, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != lattice.len() {
            return Err(Error::Invalid(format!(
                "need {} feature vectors, got {}",
                lattice.len(),
                features.len()
            )));
        }
        let dim = features.first().map_or(0, |f| f.len());
        if dim == 0
            || features
                .iter()
                .any(|f| f.len() != dim || f.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Invalid(
                "features must share a positive dimension and be finite".into(),
            ));
        }
        let siblings = lattice
            .nodes()
            .iter()
            .map(|n| {
                n.children
                    .iter()
                    .map(|&c| (c, lattice.node(c).prob))
                    .collect()
            })
            .collect();
        Ok(Self {
            dim,
            features,
            parent: lattice.nodes().iter().map(|n| n.parent).collect(),
            time: lattice.nodes().iter().map(|n| n.time).collect(),
            siblings,
        })
    }

    /// One-dimensional tilt reading the payload entry `key` of each node.
    pub fn from_payload(lattice: &ScenarioLattice, key: &str) -> Result<Self> {
        let features = (0..lattice.len())
            .map(|id| vec![lattice.payload(id, key).unwrap_or(0.0)])
            .collect();
        Self::new(lattice, features)
    }

    fn score(&self, theta: &[f64], node: NodeId) -> f64 {
        theta
            .iter()
            .zip(&self.features[node])
            .map(|(a, b)| a * b)
            .sum()
    }
}

impl DensityFamily<NodeId> for TiltFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density_step(&self, t: usize, theta: &[f64], node: &NodeId) -> Result<f64> {
        if !self.in_domain(theta) {
            return Err(Error::OutsideDomain(theta.to_vec()));
        }
        let node = *node;
        let parent = self.parent[node]
            .ok_or_else(|| Error::Invalid("no density step into the root".into()))?;
        if self.time[node] != t {
            return Err(Error::Invalid(format!("node {node} is not at time {t}")));
        }
        // shift scores for stability
        let sib = &self.siblings[parent];
        let m = sib
            .iter()
            .map(|&(c, _)| self.score(theta, c))
            .fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = sib
            .iter()
            .map(|&(c, p)| p * (self.score(theta, c) - m).exp())
            .sum();
        let f = (self.score(theta, node) - m).exp() / norm;
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::InvalidDensity {
                node,
                reason: format!("factor {f}"),
            });
        }
        Ok(f)
    }
}

/// Explicit factor tables; θ = `[k]` selects table `k`.
#[derive(Debug, Clone)]
pub struct TableFamily {
    tables: Vec<Vec<f64>>,
    time: Vec<usize>,
}

impl TableFamily {
    pub fn new(lattice: &ScenarioLattice, tables: Vec<Vec<f64>>) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for t in &tables {
            check_density_steps(lattice, t)?;
        }
        Ok(Self {
            tables,
            time: lattice.nodes().iter().map(|n| n.time).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// The parameter grid `[[0], [1], ...]`.
    pub fn grid(&self) -> Vec<Theta> {
        (0..self.tables.len()).map(|k| vec![k as f64]).collect()
    }
}

impl DensityFamily<NodeId> for TableFamily {
    fn dim(&self) -> usize {
        1
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == 1
            && theta[0] >= 0.0
            && theta[0].fract() == 0.0
            && (theta[0] as usize) < self.tables.len()
    }

    fn density_step(&self, t: usize, theta: &[f64], node: &NodeId) -> Result<f64> {
        if !self.in_domain(theta) {
            return Err(Error::OutsideDomain(theta.to_vec()));
        }
        if self.time[*node] != t || t == 0 {
            return Err(Error::Invalid(format!(
                "node {node} is not a time-{t} step"
            )));
        }
        Ok(self.tables[theta[0] as usize][*node])
    }
}
