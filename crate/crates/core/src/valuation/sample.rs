use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::priors::Theta;
use crate::riskmeasures::RiskMeasureSpec;

/// Exact time-1 layer of a two-period model: supplies draws of `X_1 + V_1`.
pub trait ClosedFormLayer: Sync {
    /// `X_1 + V_1` on paths drawn under the base measure.
    fn continuation_reference(&self) -> Result<Vec<f64>>;

    /// `X_1 + V_1` on paths drawn under `Q_θ`.
    fn continuation_under(&self, theta: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootValue {
    pub r0: f64,
    pub c0: f64,
    pub v0: f64,
    /// Grid index attaining `C_0` (lowest on ties).
    pub argmin: usize,
    /// `E^{Q_θ}[(R_0 − X_1 − V_1)^+]` per grid point.
    pub per_theta: Vec<f64>,
}

/// Root step on samples: `R_0` is the empirical risk measure of `−(X_1 + V_1)`
/// under the base measure and `C_0` the smallest empirical mean of
/// `(R_0 − X_1 − V_1)^+` over the grid.
pub fn value_root(
    layer: Option<&dyn ClosedFormLayer>,
    rm: &RiskMeasureSpec,
    grid: &[Theta],
) -> Result<RootValue> {
    let layer = layer.ok_or(Error::ConditionalLayerUnavailable(1))?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut losses = layer.continuation_reference()?;
    let r0 = rm.apply_to_losses(&mut losses)?;
    let per_theta = grid
        .par_iter()
        .map(|theta| -> Result<f64> {
            let w = layer.continuation_under(theta)?;
            if w.is_empty() {
                return Err(Error::EmptySample);
            }
            let m = w.iter().map(|&y| (r0 - y).max(0.0)).sum::<f64>() / w.len() as f64;
            if !m.is_finite() {
                return Err(Error::NonFinite(format!(
                    "root expectation for θ = {theta:?}"
                )));
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut argmin = 0;
    for (g, &v) in per_theta.iter().enumerate() {
        if v < per_theta[argmin] {
            argmin = g;
        }
    }
    let c0 = per_theta[argmin];
    Ok(RootValue {
        r0,
        c0,
        v0: r0 - c0,
        argmin,
        per_theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Shifted(Vec<f64>);

    impl ClosedFormLayer for Shifted {
        fn continuation_reference(&self) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
        fn continuation_under(&self, theta: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.iter().map(|v| v + theta[0]).collect())
        }
    }

    #[test]
    fn missing_layer_rejected() {
        let rm = RiskMeasureSpec::var(0.1).unwrap();
        let err = value_root(None, &rm, &[vec![0.0]]).unwrap_err();
        assert!(err.to_string().contains("conditional layer unavailable"));
    }

    #[test]
    fn root_on_small_sample() {
        let layer = Shifted(vec![0.0, 1.0, 2.0, 3.0]);
        let rm = RiskMeasureSpec::var(0.25).unwrap();
        let out = value_root(Some(&layer), &rm, &[vec![0.0], vec![1.0], vec![-1.0]]).unwrap();
        // R_0 = 2nd largest of {0,1,2,3} = 2; shifts up lower the shortfall
        assert_eq!(out.r0, 2.0);
        assert_eq!(out.argmin, 1);
        assert!((out.c0 - 0.25).abs() < 1e-15);
        assert!((out.v0 - 1.75).abs() < 1e-15);
    }
}
