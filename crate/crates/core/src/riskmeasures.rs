//! Value-at-risk and average value-at-risk as monetary risk measures of a
//! future position `Z`:
//!
//! V@R_q(Z) = F⁻¹_{−Z}(1 − q),    AV@R_q(Z) = (1/q) ∫₀^q V@R_v(Z) dv.
//!
//! All functions take the position `Z` and handle the sign internally. On an
//! equally weighted sample of size `n`, V@R is the `⌈(1−q)n⌉`-th smallest loss
//! and AV@R is the exact tail mean of the empirical law, with a fractional
//! weight on the marginal observation.
//!
//! The integrability bound `|ρ(Z)| ≤ K E|Z|` sometimes imposed on risk measures
//! is not checked; V@R does not satisfy it uniformly.

use crate::error::{Error, Result};
use crate::numerics::{kth_largest, norm_inv, norm_pdf};

/// Slack for `q·n` landing on an integer.
const INDEX_EPS: f64 = 1e-9;
/// Slack when comparing cumulative probabilities on discrete laws.
const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RiskKind {
    Var,
    Avar,
}

impl std::fmt::Display for RiskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RiskKind::Var => "var",
            RiskKind::Avar => "avar",
        })
    }
}

impl std::str::FromStr for RiskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "var" => Ok(RiskKind::Var),
            "avar" | "es" | "cvar" => Ok(RiskKind::Avar),
            other => Err(Error::Invalid(format!(
                "unknown risk measure {other:?} (expected var or avar)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskMeasureSpec {
    pub kind: RiskKind,
    pub level: f64,
}

pub fn check_level(q: f64) -> Result<f64> {
    if q > 0.0 && q < 1.0 {
        Ok(q)
    } else {
        Err(Error::InvalidLevel(q))
    }
}

impl RiskMeasureSpec {
    pub fn new(kind: RiskKind, level: f64) -> Result<Self> {
        check_level(level)?;
        Ok(Self { kind, level })
    }

    pub fn var(level: f64) -> Result<Self> {
        Self::new(RiskKind::Var, level)
    }

    pub fn avar(level: f64) -> Result<Self> {
        Self::new(RiskKind::Avar, level)
    }

    /// ρ(Z) on an equally weighted sample of `Z`.
    pub fn apply(&self, z: &[f64]) -> Result<f64> {
        let mut losses: Vec<f64> = z.iter().map(|v| -v).collect();
        self.apply_to_losses(&mut losses)
    }

    /// ρ on an equally weighted sample given as losses `−Z`. Reorders the buffer.
    pub fn apply_to_losses(&self, losses: &mut [f64]) -> Result<f64> {
        if losses.is_empty() {
            return Err(Error::EmptySample);
        }
        if losses.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("risk-measure sample".into()));
        }
        let n = losses.len();
        let qn = self.level * n as f64;
        let k = ((qn + INDEX_EPS).floor() as usize).min(n - 1);
        match self.kind {
            RiskKind::Var => Ok(kth_largest(losses, k + 1)),
            RiskKind::Avar => {
                let marginal = kth_largest(losses, k + 1);
                // after selection the k largest sit in front
                let top: f64 = losses[..k].iter().sum();
                let frac = (qn - k as f64).max(0.0);
                Ok((top + frac * marginal) / qn)
            }
        }
    }

    /// ρ(Z) for a discrete law with atoms `z` and probabilities `probs`.
    pub fn apply_weighted(&self, z: &[f64], probs: &[f64]) -> Result<f64> {
        if z.is_empty() || z.len() != probs.len() {
            return Err(Error::EmptySample);
        }
        let mut atoms: Vec<(f64, f64)> = z.iter().zip(probs).map(|(&v, &p)| (-v, p)).collect();
        // descending losses
        atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
        let q = self.level;
        match self.kind {
            RiskKind::Var => {
                let mut cum = 0.0;
                for &(l, p) in &atoms {
                    cum += p;
                    if cum > q + PROB_EPS {
                        return Ok(l);
                    }
                }
                Ok(atoms.last().unwrap().0)
            }
            RiskKind::Avar => {
                let mut cum = 0.0;
                let mut acc = 0.0;
                for &(l, p) in &atoms {
                    let take = p.min((q - cum).max(0.0));
                    acc += take * l;
                    cum += p;
                    if cum >= q {
                        break;
                    }
                }
                Ok(acc / q)
            }
        }
    }
}

/// V@R_q on an equally weighted sample of `Z`.
pub fn var_empirical(z: &[f64], q: f64) -> Result<f64> {
    RiskMeasureSpec::var(q)?.apply(z)
}

/// AV@R_q on an equally weighted sample of `Z`.
pub fn avar_empirical(z: &[f64], q: f64) -> Result<f64> {
    RiskMeasureSpec::avar(q)?.apply(z)
}

/// ρ(ε) for a standard normal position ε.
pub fn gaussian_c(spec: &RiskMeasureSpec) -> f64 {
    let x = norm_inv(1.0 - spec.level);
    match spec.kind {
        RiskKind::Var => x,
        RiskKind::Avar => norm_pdf(x) / spec.level,
    }
}
