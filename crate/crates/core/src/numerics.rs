//! Small numerical helpers shared across modules: the standard normal
//! distribution, chi-square quantiles, Cholesky factors and Halton points.

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc_inv;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn norm_inv(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against the accurate distribution function
    let d = norm_pdf(x);
    if d > 0.0 {
        x -= (norm_cdf(x) - p) / d;
    }
    x
}

/// Quantile of the chi-square law with `k` degrees of freedom, polished by Newton steps.
pub fn chi2_inv(p: f64, k: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidLevel(p));
    }
    let dist = ChiSquared::new(k as f64).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut x = dist.inverse_cdf(p);
    use statrs::distribution::Continuous;
    for _ in 0..8 {
        let d = dist.pdf(x);
        if d <= 0.0 || !d.is_finite() {
            break;
        }
        let step = (dist.cdf(x) - p) / d;
        x -= step;
        if step.abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Lower Cholesky factor of a symmetric matrix given row-major.
/// Fails with the index (1-based) of the first non-positive leading minor.
pub fn cholesky(a: &[f64], k: usize) -> Result<Vec<f64>> {
    if a.len() != k * k {
        return Err(Error::Invalid(format!(
            "matrix must have {} entries, got {}",
            k * k,
            a.len()
        )));
    }
    let mut l = vec![0.0; k * k];
    for j in 0..k {
        let mut d = a[j * k + j];
        for m in 0..j {
            d -= l[j * k + m] * l[j * k + m];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { minor: j + 1 });
        }
        let djj = d.sqrt();
        l[j * k + j] = djj;
        for i in (j + 1)..k {
            let mut s = a[i * k + j];
            for m in 0..j {
                s -= l[i * k + m] * l[j * k + m];
            }
            l[i * k + j] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L y = b` for lower-triangular `L` (row-major).
pub fn forward_solve(l: &[f64], k: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for m in 0..i {
            s -= l[i * k + m] * y[m];
        }
        y[i] = s / l[i * k + i];
    }
    y
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton point with index `i` (starting at 1) in dimension `dim`.
pub fn halton(i: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton dimension too large");
    (0..dim).map(|d| radical_inverse(i, PRIMES[d])).collect()
}

/// Upper order statistic helper: the `k`-th largest (1-based) of `xs`, reordering in place.
pub fn kth_largest(xs: &mut [f64], k: usize) -> f64 {
    debug_assert!(k >= 1 && k <= xs.len());
    let idx = k - 1;
    let (_, v, _) = xs.select_nth_unstable_by(idx, |a, b| b.total_cmp(a));
    *v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        let d = norm_cdf(1.959963984540054) - 0.975;
        assert!(d.abs() < 1e-15, "{d}");
        assert!((norm_inv(0.975) - 1.959963984540054).abs() < 1e-10);
        assert!((norm_inv(0.005) + 2.5758293035489).abs() < 1e-9);
    }

    #[test]
    fn chi2_four_dof_matches_closed_form() {
        // F(x) = 1 - exp(-x/2)(1 + x/2) for four degrees of freedom
        for &p in &[0.1, 0.5, 0.9, 0.99] {
            let (mut lo, mut hi) = (0.0f64, 100.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let f = 1.0 - (-mid / 2.0).exp() * (1.0 + mid / 2.0);
                if f < p {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            let x = chi2_inv(p, 4).unwrap();
            assert!((x - lo).abs() < 1e-9, "p={p}: {x} vs {lo}");
        }
        assert!((chi2_inv(0.9, 4).unwrap() - 7.779440339734858).abs() < 1e-9);
    }

    #[test]
    fn cholesky_reports_failing_minor() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert_eq!(
            cholesky(&a, 2),
            Err(Error::NotPositiveDefinite { minor: 2 })
        );
        let l = cholesky(&[4.0, 2.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(l, vec![2.0, 0.0, 1.0, 2.0f64.sqrt()]);
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(1, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(2, 2), vec![0.25, 2.0 / 3.0]);
    }

    #[test]
    fn kth_largest_picks_upper_statistic() {
        let mut v = vec![3.0, 1.0, 4.0, 1.5, 9.0];
        assert_eq!(kth_largest(&mut v, 2), 4.0);
    }
}
