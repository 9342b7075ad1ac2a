use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type NodeId = usize;

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub time: usize,
    pub parent: Option<NodeId>,
    /// One-step transition probability from the parent (1 at the root).
    pub prob: f64,
    pub children: Vec<NodeId>,
    pub payload: BTreeMap<String, f64>,
}

/// Finite filtered probability tree. Nodes are stored breadth first, so every
/// layer is a contiguous id range and parents precede children.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLattice {
    horizon: usize,
    nodes: Vec<Node>,
    layers: Vec<Vec<NodeId>>,
    slot: Vec<usize>,
}

/// Where a node sits while the lattice is being generated.
#[derive(Debug, Clone)]
pub struct NodeInfo<'a> {
    pub id: NodeId,
    pub time: usize,
    /// Branch indices taken from the root.
    pub path: &'a [usize],
}

impl ScenarioLattice {
    /// Generates a tree by expanding every node with `transition` (probabilities
    /// of its children, empty only at the horizon) and filling payloads with `payload`.
    pub fn build<F, G>(horizon: usize, mut transition: F, mut payload: G) -> Result<Self>
    where
        F: FnMut(&NodeInfo) -> Vec<f64>,
        G: FnMut(&NodeInfo) -> Vec<(String, f64)>,
    {
        if horizon == 0 {
            return Err(Error::Invalid("lattice depth must be at least 1".into()));
        }
        let mut nodes: Vec<Node> = Vec::new();
        let mut paths: Vec<Vec<usize>> = Vec::new();
        let root_info = NodeInfo {
            id: 0,
            time: 0,
            path: &[],
        };
        nodes.push(Node {
            time: 0,
            parent: None,
            prob: 1.0,
            children: Vec::new(),
            payload: payload(&root_info).into_iter().collect(),
        });
        paths.push(Vec::new());
        let mut frontier = vec![0usize];
        for t in 0..horizon {
            let mut next = Vec::new();
            for &id in &frontier {
                let path = paths[id].clone();
                let probs = transition(&NodeInfo {
                    id,
                    time: t,
                    path: &path,
                });
                check_row(id, &probs)?;
                for (b, &p) in probs.iter().enumerate() {
                    let cid = nodes.len();
                    let mut cpath = path.clone();
                    cpath.push(b);
                    let info = NodeInfo {
                        id: cid,
                        time: t + 1,
                        path: &cpath,
                    };
                    let pl = payload(&info).into_iter().collect();
                    nodes.push(Node {
                        time: t + 1,
                        parent: Some(id),
                        prob: p,
                        children: Vec::new(),
                        payload: pl,
                    });
                    paths.push(cpath);
                    nodes[id].children.push(cid);
                    next.push(cid);
                }
            }
            frontier = next;
        }
        Self::from_nodes(horizon, nodes)
    }

    /// Tree where every node branches with the same probability row.
    pub fn uniform(horizon: usize, row: &[f64]) -> Result<Self> {
        Self::build(horizon, |_| row.to_vec(), |_| Vec::new())
    }

    /// Validates and indexes a breadth-first node list.
    pub fn from_nodes(horizon: usize, nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() || nodes[0].parent.is_some() || nodes[0].time != 0 {
            return Err(Error::Invalid(
                "lattice needs a single root at time 0".into(),
            ));
        }
        let mut layers = vec![Vec::new(); horizon + 1];
        let mut slot = vec![0; nodes.len()];
        for (id, n) in nodes.iter().enumerate() {
            if n.time > horizon {
                return Err(Error::Invalid(format!(
                    "node {id} at time {} beyond horizon {horizon}",
                    n.time
                )));
            }
            match n.parent {
                None if id != 0 => return Err(Error::Invalid(format!("node {id} has no parent"))),
                Some(p) if p >= id || nodes[p].time + 1 != n.time => {
                    return Err(Error::Invalid(format!(
                        "node {id} has an inconsistent parent link"
                    )))
                }
                _ => {}
            }
            if id > 0 && n.time < nodes[id - 1].time {
                return Err(Error::Invalid(
                    "nodes are not in breadth-first order".into(),
                ));
            }
            for (k, v) in &n.payload {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("payload {k} at node {id}")));
                }
            }
            slot[id] = layers[n.time].len();
            layers[n.time].push(id);
        }
        let mut listed = vec![Vec::new(); nodes.len()];
        for (id, n) in nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                listed[p].push(id);
            }
        }
        for (id, n) in nodes.iter().enumerate() {
            if listed[id] != n.children {
                return Err(Error::Invalid(format!(
                    "node {id}: children list does not match parent links"
                )));
            }
            if n.time < horizon {
                let probs: Vec<f64> = n.children.iter().map(|&c| nodes[c].prob).collect();
                check_row(id, &probs)?;
            } else if !n.children.is_empty() {
                return Err(Error::Invalid(format!(
                    "node {id} at the horizon has children"
                )));
            }
        }
        Ok(Self {
            horizon,
            nodes,
            layers,
            slot,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn layer(&self, t: usize) -> &[NodeId] {
        &self.layers[t]
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.layers[self.horizon]
    }

    /// Position of a node inside its time layer.
    pub fn slot(&self, id: NodeId) -> usize {
        self.slot[id]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    /// Ancestor of `id` living at time `t` (the node itself when `t` equals its time).
    pub fn ancestor(&self, mut id: NodeId, t: usize) -> NodeId {
        assert!(t <= self.nodes[id].time);
        while self.nodes[id].time > t {
            id = self.nodes[id].parent.expect("non-root node has a parent");
        }
        id
    }

    /// Unconditional probability of reaching `id`.
    pub fn path_prob(&self, mut id: NodeId) -> f64 {
        let mut p = 1.0;
        while let Some(par) = self.nodes[id].parent {
            p *= self.nodes[id].prob;
            id = par;
        }
        p
    }

    /// Leaves below `id`, in layer order.
    pub fn leaves_under(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        for _ in self.nodes[id].time..self.horizon {
            out = out
                .iter()
                .flat_map(|&n| self.nodes[n].children.iter().copied())
                .collect();
        }
        out
    }

    pub fn payload(&self, id: NodeId, name: &str) -> Option<f64> {
        self.nodes[id].payload.get(name).copied()
    }
}

fn check_row(node: NodeId, probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Invalid(format!(
            "node {node}: no children before the horizon"
        )));
    }
    for &p in probs {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::NonPositiveProbability { node, prob: p });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::ProbabilitySum { node, sum });
    }
    Ok(())
}
