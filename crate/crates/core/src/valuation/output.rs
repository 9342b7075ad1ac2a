use std::fmt::Write as _;

use crate::scenario::{AdaptedProcess, ScenarioLattice};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
}

/// Per-layer results of the backward recursion on a lattice.
/// All per-time vectors are indexed `[t][slot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationOutput {
    pub horizon: usize,
    pub r: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Grid index attaining the infimum at each state of layers `0..T`.
    pub theta_star: Vec<Vec<usize>>,
    /// For nodes at time `t ≥ 1`: `R_{t−1} − X_t − V_t < 0`.
    pub default: Vec<Vec<bool>>,
    pub bounds: Option<BoundPair>,
    /// `Σ_{u ≤ t} X_u + V_t`.
    pub supermartingale: Vec<Vec<f64>>,
    /// `V_t − E^P_t[X_{t+1} + … + X_T]`.
    pub risk_margin: Vec<Vec<f64>>,
}

impl ValuationOutput {
    pub fn v0(&self) -> f64 {
        self.v[0][0]
    }

    pub fn r0(&self) -> f64 {
        self.r[0][0]
    }

    pub fn c0(&self) -> f64 {
        self.c[0][0]
    }

    /// Capital requirements as an adapted process.
    pub fn r_process(&self, lattice: &ScenarioLattice) -> AdaptedProcess {
        AdaptedProcess::from_fn(lattice, "R", |id| {
            self.r[lattice.node(id).time][lattice.slot(id)]
        })
    }

    pub fn at(&self, lattice: &ScenarioLattice, id: usize) -> (f64, f64, f64) {
        let t = lattice.node(id).time;
        let s = lattice.slot(id);
        (self.r[t][s], self.c[t][s], self.v[t][s])
    }

    /// Key-value text: one `name.t = v,v,...` line per time and quantity.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "horizon = {}", self.horizon);
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        for (name, data) in [
            ("R", &self.r),
            ("C", &self.c),
            ("V", &self.v),
            ("margin", &self.risk_margin),
        ] {
            for (t, layer) in data.iter().enumerate() {
                let _ = writeln!(out, "{name}.{t} = {}", join(layer));
            }
        }
        for (t, layer) in self.theta_star.iter().enumerate() {
            let ids: Vec<String> = layer.iter().map(|g| g.to_string()).collect();
            let _ = writeln!(out, "theta_star.{t} = {}", ids.join(","));
        }
        if let Some(b) = self.bounds {
            let _ = writeln!(out, "lower = {:?}", b.lower);
            let _ = writeln!(out, "upper = {:?}", b.upper);
        }
        out
    }
}

/// CSV row `case,p,q,lower,upper`.
pub fn bound_csv_row(case: u8, p: f64, q: f64, b: BoundPair) -> String {
    format!("{case},{p},{q},{:?},{:?}", b.lower, b.upper)
}
