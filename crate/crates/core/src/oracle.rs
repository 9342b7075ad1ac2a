//! Brute-force evaluation of the multiple-prior stopping problem on small
//! lattices. Every adapted stopping rule and every adapted choice of θ per
//! state is enumerated, and
//!
//! sup_τ inf_Q E^Q_t[H_τ − H_{t+1}]   and   inf_Q sup_τ E^Q_t[H_τ − H_{t+1}]
//!
//! are computed from the full payoff matrix. The multiple-prior Snell envelope
//! `U_t = max(H_t, min_θ E^θ_t[U_{t+1}])` is evaluated alongside as a
//! cross-check. Instances beyond the caps are refused, never sampled.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::priors::{Selection, Theta, TiltFamily};
use crate::riskmeasures::{RiskKind, RiskMeasureSpec};
use crate::scenario::{AdaptedProcess, NodeId, ScenarioLattice};
use crate::valuation::{payoff_process, value_with_table, CashFlowSpec, FactorTable, Payoff};

pub const DEFAULT_CAP: u128 = 1_000_000;

/// A stopping rule started at `start`: the stopping date on each leaf below it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumeratedStoppingTime {
    pub start: NodeId,
    /// Indexed like `lattice.leaves_under(start)`.
    pub per_leaf: Vec<u8>,
}

/// A grid index for the step out of every non-leaf node below `start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasureSelection {
    pub start: NodeId,
    /// Decision nodes, breadth first.
    pub nodes: Vec<NodeId>,
    pub choice: Vec<usize>,
}

impl MeasureSelection {
    /// Grid index per node id (0 outside the subtree).
    pub fn node_map(&self, lattice: &ScenarioLattice) -> Vec<usize> {
        let mut m = vec![0; lattice.len()];
        for (&n, &g) in self.nodes.iter().zip(&self.choice) {
            m[n] = g;
        }
        m
    }

    /// The selection as per-node parameters (θ for the step into each node).
    pub fn as_selection(&self, lattice: &ScenarioLattice, grid: &[Theta]) -> Selection {
        let map = self.node_map(lattice);
        Selection::PerNode(
            (0..lattice.len())
                .map(|id| match lattice.parent(id) {
                    Some(p) => grid[map[p]].clone(),
                    None => grid[0].clone(),
                })
                .collect(),
        )
    }
}

fn count_rules(lattice: &ScenarioLattice, n: NodeId, allow_stop: bool) -> u128 {
    let cont = if lattice.children(n).is_empty() {
        1
    } else {
        lattice.children(n).iter().fold(1u128, |acc, &c| {
            acc.saturating_mul(count_rules(lattice, c, true))
        })
    };
    cont.saturating_add(allow_stop as u128)
}

/// Number of adapted stopping rules from `node` taking values in `t_start..=T+1`.
pub fn count_stopping_times(
    lattice: &ScenarioLattice,
    node: NodeId,
    t_start: usize,
) -> Result<u128> {
    let time = lattice.node(node).time;
    if t_start != time && t_start != time + 1 {
        return Err(Error::Invalid(format!(
            "start time must be {time} or {}",
            time + 1
        )));
    }
    Ok(count_rules(lattice, node, t_start == time))
}

fn rules(lattice: &ScenarioLattice, n: NodeId, allow_stop: bool) -> Vec<Vec<u8>> {
    let horizon = lattice.horizon();
    let mut out = Vec::new();
    let width = lattice.leaves_under(n).len();
    if allow_stop {
        out.push(vec![lattice.node(n).time as u8; width]);
    }
    if lattice.children(n).is_empty() {
        out.push(vec![(horizon + 1) as u8]);
        return out;
    }
    let mut acc: Vec<Vec<u8>> = vec![Vec::new()];
    for &c in lattice.children(n) {
        let sub = rules(lattice, c, true);
        let mut next = Vec::with_capacity(acc.len() * sub.len());
        for a in &acc {
            for s in &sub {
                let mut v = a.clone();
                v.extend_from_slice(s);
                next.push(v);
            }
        }
        acc = next;
    }
    out.extend(acc);
    out
}

/// All adapted stopping rules from `node` with values in `t_start..=T+1`.
pub fn enumerate_stopping_times(
    lattice: &ScenarioLattice,
    node: NodeId,
    t_start: usize,
    cap: u128,
) -> Result<Vec<EnumeratedStoppingTime>> {
    let count = count_stopping_times(lattice, node, t_start)?;
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let time = lattice.node(node).time;
    Ok(rules(lattice, node, t_start == time)
        .into_iter()
        .map(|per_leaf| EnumeratedStoppingTime {
            start: node,
            per_leaf,
        })
        .collect())
}

fn decision_nodes(lattice: &ScenarioLattice, node: NodeId) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut frontier = vec![node];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &n in &frontier {
            if !lattice.children(n).is_empty() {
                out.push(n);
                next.extend_from_slice(lattice.children(n));
            }
        }
        frontier = next;
    }
    out
}

pub fn count_selections(lattice: &ScenarioLattice, node: NodeId, grid_len: usize) -> u128 {
    let d = decision_nodes(lattice, node).len();
    (0..d).fold(1u128, |acc, _| acc.saturating_mul(grid_len as u128))
}

/// All adapted θ-assignments below `node`.
pub fn enumerate_selections(
    lattice: &ScenarioLattice,
    node: NodeId,
    grid_len: usize,
    cap: u128,
) -> Result<Vec<MeasureSelection>> {
    if grid_len == 0 {
        return Err(Error::EmptyGrid);
    }
    let count = count_selections(lattice, node, grid_len);
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let nodes = decision_nodes(lattice, node);
    let mut out = Vec::with_capacity(count as usize);
    let mut choice = vec![0usize; nodes.len()];
    loop {
        out.push(MeasureSelection {
            start: node,
            nodes: nodes.clone(),
            choice: choice.clone(),
        });
        // odometer
        let mut i = 0;
        loop {
            if i == choice.len() {
                return Ok(out);
            }
            choice[i] += 1;
            if choice[i] < grid_len {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Brute-force values at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleValue {
    pub node: NodeId,
    /// sup over rules of inf over selections.
    pub sup_inf: f64,
    /// inf over selections of sup over rules.
    pub inf_sup: f64,
    /// Multiple-prior Snell envelope minus `H_{t+1}`.
    pub envelope: f64,
    pub rules: usize,
    pub selections: usize,
}

/// Payoff matrix rows (rules) against columns (selections) at `node`.
struct Game {
    hv: Vec<Vec<f64>>,
    qp: Vec<Vec<f64>>,
}

impl Game {
    fn entry(&self, i: usize, j: usize) -> f64 {
        self.hv[i].iter().zip(&self.qp[j]).map(|(h, q)| h * q).sum()
    }

    fn sup_inf(&self) -> f64 {
        (0..self.hv.len())
            .into_par_iter()
            .map(|i| {
                (0..self.qp.len())
                    .map(|j| self.entry(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn inf_sup(&self) -> f64 {
        (0..self.qp.len())
            .into_par_iter()
            .map(|j| {
                (0..self.hv.len())
                    .map(|i| self.entry(i, j))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// max over selections of `base − sup_τ E^Q[…]`.
    fn best_selection_value(&self, base: f64) -> f64 {
        base - self.inf_sup()
    }
}

fn build_game(
    lattice: &ScenarioLattice,
    h: &Payoff,
    table: &FactorTable,
    node: NodeId,
    cap: u128,
) -> Result<Game> {
    let t = lattice.node(node).time;
    let n_rules = count_stopping_times(lattice, node, t + 1)?;
    let n_sel = count_selections(lattice, node, table.len());
    let pairs = n_rules.saturating_mul(n_sel);
    if pairs > cap {
        return Err(Error::CapExceeded { count: pairs, cap });
    }
    let leaves = lattice.leaves_under(node);
    let base = h.at(lattice, t + 1, node);
    let hv: Vec<Vec<f64>> = enumerate_stopping_times(lattice, node, t + 1, cap)?
        .into_iter()
        .map(|r| {
            leaves
                .iter()
                .zip(&r.per_leaf)
                .map(|(&leaf, &tau)| {
                    let tau = tau as usize;
                    // H_τ lives on the ancestor at time τ − 1
                    let anc = lattice.ancestor(leaf, tau - 1);
                    h.at(lattice, tau, anc) - base
                })
                .collect()
        })
        .collect();
    let qp: Vec<Vec<f64>> = enumerate_selections(lattice, node, table.len(), cap)?
        .into_iter()
        .map(|sel| {
            debug_assert!(sel
                .as_selection(lattice, &table.grid)
                .check_measurable(lattice)
                .is_ok());
            let map = sel.node_map(lattice);
            leaves
                .iter()
                .map(|&leaf| {
                    let mut p = 1.0;
                    let mut c = leaf;
                    while c != node {
                        let par = lattice.parent(c).expect("below start");
                        p *= lattice.node(c).prob * table.factors[map[par]][c];
                        c = par;
                    }
                    p
                })
                .collect()
        })
        .collect();
    Ok(Game { hv, qp })
}

/// Multiple-prior Snell envelope below each node: `Ũ(n) = min_θ E^θ[U_{s+1} | n]`
/// with `U_{s+1}(c) = max(H_{s+1}, Ũ(c))` and `Ũ(leaf) = H_{T+1}(leaf)`.
pub fn snell_envelope(lattice: &ScenarioLattice, h: &Payoff, table: &FactorTable) -> Vec<f64> {
    let horizon = lattice.horizon();
    let mut u_tilde = vec![0.0; lattice.len()];
    for &leaf in lattice.leaves() {
        u_tilde[leaf] = h.at(lattice, horizon + 1, leaf);
    }
    for t in (0..horizon).rev() {
        for &n in lattice.layer(t) {
            let stop_next = h.at(lattice, t + 1, n);
            u_tilde[n] = table
                .factors
                .iter()
                .map(|f| {
                    lattice
                        .children(n)
                        .iter()
                        .map(|&c| lattice.node(c).prob * f[c] * stop_next.max(u_tilde[c]))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
        }
    }
    u_tilde
}

/// Brute-force `C_t` at every node of layer `t` for the given capital requirements.
pub fn snell_bruteforce(
    lattice: &ScenarioLattice,
    cf: &CashFlowSpec,
    r: &AdaptedProcess,
    table: &FactorTable,
    t: usize,
    cap: u128,
) -> Result<Vec<OracleValue>> {
    if t >= lattice.horizon() {
        return Err(Error::Invalid(format!("no stopping problem at time {t}")));
    }
    let h = payoff_process(lattice, r, &cf.residual)?;
    let env = snell_envelope(lattice, &h, table);
    lattice
        .layer(t)
        .iter()
        .map(|&n| {
            let g = build_game(lattice, &h, table, n, cap)?;
            Ok(OracleValue {
                node: n,
                sup_inf: g.sup_inf(),
                inf_sup: g.inf_sup(),
                envelope: env[n] - h.at(lattice, t + 1, n),
                rules: g.hv.len(),
                selections: g.qp.len(),
            })
        })
        .collect()
}

/// Size limits for random instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceLimits {
    pub max_horizon: usize,
    pub max_branching: usize,
    pub max_grid: usize,
    /// Largest (rules × selections) accepted; larger draws are redrawn.
    pub pair_cap: u128,
}

impl Default for InstanceLimits {
    fn default() -> Self {
        Self {
            max_horizon: 3,
            max_branching: 3,
            max_grid: 3,
            pair_cap: 200_000,
        }
    }
}

/// Small lattice with cash flows in [−1, 1], an exponential-tilt family and a θ-grid.
#[derive(Debug, Clone)]
pub struct Instance {
    pub lattice: ScenarioLattice,
    pub cf: CashFlowSpec,
    pub family: TiltFamily,
    pub grid: Vec<Theta>,
    pub table: FactorTable,
    pub rm: RiskMeasureSpec,
}

pub fn random_instance<R: Rng>(rng: &mut R, limits: &InstanceLimits) -> Result<Instance> {
    loop {
        let horizon = rng.random_range(1..=limits.max_horizon);
        let max_b = limits.max_branching;
        let lattice = ScenarioLattice::build(
            horizon,
            |_| {
                let b = rng.random_range(1..=max_b);
                let u: Vec<f64> = (0..b).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = u.iter().sum();
                let mut p: Vec<f64> = u.iter().map(|v| v / s).collect();
                // put the rounding residue on the last branch
                let head: f64 = p[..b - 1].iter().sum();
                p[b - 1] = 1.0 - head;
                p
            },
            |_| Vec::new(),
        )?;
        let mut nodes = lattice.nodes().to_vec();
        for (id, n) in nodes.iter_mut().enumerate() {
            if id > 0 {
                n.payload.insert("X".into(), rng.random_range(-1.0..=1.0));
            }
            n.payload.insert("xi".into(), rng.random_range(-1.0..=1.0));
        }
        let lattice = ScenarioLattice::from_nodes(horizon, nodes)?;
        let g = rng.random_range(1..=limits.max_grid);
        let grid: Vec<Theta> = (0..g).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
        let kind = if rng.random_bool(0.5) {
            RiskKind::Var
        } else {
            RiskKind::Avar
        };
        let rm = RiskMeasureSpec::new(kind, rng.random_range(0.05..0.6))?;
        let rules = count_stopping_times(&lattice, 0, 1)?;
        let sels = count_selections(&lattice, 0, g);
        if rules.saturating_mul(sels) > limits.pair_cap {
            continue;
        }
        let cf = CashFlowSpec::from_payload(&lattice, "X")?;
        let family = TiltFamily::from_payload(&lattice, "xi")?;
        let table = FactorTable::new(&lattice, &family, &grid)?;
        return Ok(Instance {
            lattice,
            cf,
            family,
            grid,
            table,
            rm,
        });
    }
}

/// Engine against brute force at the root of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceCheck {
    pub c0_engine: f64,
    pub c0_oracle: f64,
    pub v0_engine: f64,
    /// max over selections of `R_0 − sup_τ E^Q[H_τ]`.
    pub v0_minimax: f64,
    pub envelope: f64,
    pub inf_sup: f64,
}

impl InstanceCheck {
    pub fn c0_error(&self) -> f64 {
        (self.c0_engine - self.c0_oracle).abs()
    }

    pub fn minimax_error(&self) -> f64 {
        (self.v0_engine - self.v0_minimax).abs()
    }
}

pub fn check_instance(inst: &Instance, cap: u128) -> Result<InstanceCheck> {
    let out = value_with_table(&inst.lattice, &inst.cf, &inst.rm, &inst.table)?;
    let r = out.r_process(&inst.lattice);
    let h = payoff_process(&inst.lattice, &r, &inst.cf.residual)?;
    let game = build_game(&inst.lattice, &h, &inst.table, 0, cap)?;
    let env = snell_envelope(&inst.lattice, &h, &inst.table);
    Ok(InstanceCheck {
        c0_engine: out.c0(),
        c0_oracle: game.sup_inf(),
        v0_engine: out.v0(),
        v0_minimax: game.best_selection_value(out.r0()),
        envelope: env[0],
        inf_sup: game.inf_sup(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub trees: usize,
    pub max_c0_error: f64,
    pub max_minimax_error: f64,
    pub max_envelope_error: f64,
}

/// Runs [`check_instance`] on `trees` random instances drawn from `seed`.
pub fn run_suite(
    trees: usize,
    seed: u64,
    limits: &InstanceLimits,
    cap: u128,
) -> Result<OracleReport> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..trees)
        .map(|_| random_instance(&mut rng, limits))
        .collect::<Result<Vec<_>>>()?;
    let checks = instances
        .iter()
        .map(|i| check_instance(i, cap))
        .collect::<Result<Vec<_>>>()?;
    let max = |f: &dyn Fn(&InstanceCheck) -> f64| checks.iter().map(f).fold(0.0, f64::max);
    Ok(OracleReport {
        trees,
        max_c0_error: max(&|c| c.c0_error()),
        max_minimax_error: max(&|c| c.minimax_error()),
        max_envelope_error: max(&|c| (c.envelope - c.c0_engine).abs()),
    })
}
