//! Ellipsoidal parameter regions
//! Θ = {z : (z − μ)ᵀ Σ⁻¹ (z − μ) ≤ r²} = {μ + ρ L s : ρ ≤ r, |s| = 1},
//! with `L` the lower Cholesky factor of Σ and r² a chi-square quantile.

use crate::error::{Error, Result};
use crate::numerics::{chi2_inv, cholesky, forward_solve, halton, norm_inv};

const BOUNDARY_TOL: f64 = 1e-10;
/// Largest share of boundary points that may be dropped as inadmissible.
pub const MAX_DROPPED_SHARE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRegion {
    pub mu: Vec<f64>,
    /// Covariance, row-major.
    pub sigma: Vec<f64>,
    /// Lower Cholesky factor, row-major.
    pub chol: Vec<f64>,
    pub radius_sq: f64,
    pub dim: usize,
}

impl ParamRegion {
    /// Confidence ellipsoid at level `p`: radius² = F⁻¹_{χ²(k)}(p).
    pub fn ellipsoid(mu: Vec<f64>, sigma: Vec<f64>, p: f64) -> Result<Self> {
        let k = mu.len();
        let r2 = chi2_inv(p, k)?;
        Self::with_radius_sq(mu, sigma, r2)
    }

    pub fn with_radius_sq(mu: Vec<f64>, sigma: Vec<f64>, radius_sq: f64) -> Result<Self> {
        let dim = mu.len();
        if dim == 0 {
            return Err(Error::Invalid(
                "region needs at least one coordinate".into(),
            ));
        }
        if !(radius_sq >= 0.0) || !radius_sq.is_finite() {
            return Err(Error::Invalid(format!(
                "radius² must be finite and nonnegative, got {radius_sq}"
            )));
        }
        if sigma.len() != dim * dim {
            return Err(Error::Invalid(format!("covariance must be {dim}x{dim}")));
        }
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (sigma[i * dim + j], sigma[j * dim + i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1e-300) {
                    return Err(Error::Invalid("covariance is not symmetric".into()));
                }
            }
        }
        let chol = cholesky(&sigma, dim)?;
        Ok(Self {
            mu,
            sigma,
            chol,
            radius_sq,
            dim,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius_sq.sqrt()
    }

    pub fn mahalanobis_sq(&self, z: &[f64]) -> f64 {
        let d: Vec<f64> = z.iter().zip(&self.mu).map(|(a, b)| a - b).collect();
        forward_solve(&self.chol, self.dim, &d)
            .iter()
            .map(|v| v * v)
            .sum()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim && self.mahalanobis_sq(z) <= self.radius_sq * (1.0 + 1e-12) + 1e-300
    }

    /// μ + ρ L s.
    pub fn point(&self, s: &[f64], rho: f64) -> Vec<f64> {
        let k = self.dim;
        (0..k)
            .map(|i| self.mu[i] + rho * (0..=i).map(|j| self.chol[i * k + j] * s[j]).sum::<f64>())
            .collect()
    }

    /// Boundary point in direction `s` (unit vector in whitened coordinates).
    pub fn boundary_point(&self, s: &[f64]) -> Vec<f64> {
        self.point(s, self.radius())
    }

    /// Sub-region over `indices`, keeping the radius.
    pub fn project(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Invalid(
                "projection needs a nonempty coordinate subset".into(),
            ));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= self.dim) {
            return Err(Error::Invalid(format!(
                "coordinate {i} outside dimension {}",
                self.dim
            )));
        }
        let mu = indices.iter().map(|&i| self.mu[i]).collect();
        let mut sigma = Vec::with_capacity(indices.len() * indices.len());
        for &i in indices {
            for &j in indices {
                sigma.push(self.sigma[i * self.dim + j]);
            }
        }
        Self::with_radius_sq(mu, sigma, self.radius_sq)
    }

    /// `m` points on ∂Θ: equal angles for k = 2, ± for k = 1, Halton directions otherwise.
    pub fn boundary_grid(&self, m: usize) -> Result<Vec<Vec<f64>>> {
        Ok(sphere_directions(self.dim, m)?
            .iter()
            .map(|s| self.boundary_point(s))
            .collect())
    }

    /// Boundary grid with inadmissible points dropped. Fails if more than
    /// [`MAX_DROPPED_SHARE`] of the points are dropped.
    pub fn admissible_boundary_grid<F: Fn(&[f64]) -> bool>(
        &self,
        m: usize,
        admissible: F,
    ) -> Result<BoundaryGrid> {
        let dirs = sphere_directions(self.dim, m)?;
        let mut points = Vec::with_capacity(m);
        let mut kept_dirs = Vec::with_capacity(m);
        for s in dirs {
            let z = self.boundary_point(&s);
            if admissible(&z) {
                points.push(z);
                kept_dirs.push(s);
            }
        }
        let dropped = m - points.len();
        if dropped as f64 > MAX_DROPPED_SHARE * m as f64 || points.is_empty() {
            return Err(Error::TooManyDropped { dropped, total: m });
        }
        Ok(BoundaryGrid {
            points,
            directions: kept_dirs,
            dropped,
        })
    }

    /// Flat record: k, μ, L (row-major), radius².
    pub fn to_record(&self) -> Vec<f64> {
        let mut r = vec![self.dim as f64];
        r.extend(&self.mu);
        r.extend(&self.chol);
        r.push(self.radius_sq);
        r
    }

    pub fn from_record(rec: &[f64]) -> Result<Self> {
        let k = *rec
            .first()
            .ok_or_else(|| Error::Invalid("empty region record".into()))? as usize;
        if rec.len() != 2 + k + k * k {
            return Err(Error::Invalid("region record has the wrong length".into()));
        }
        let mu = rec[1..1 + k].to_vec();
        let l = &rec[1 + k..1 + k + k * k];
        let mut sigma = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                sigma[i * k + j] = (0..k).map(|m| l[i * k + m] * l[j * k + m]).sum();
            }
        }
        let mut out = Self::with_radius_sq(mu, sigma, rec[1 + k + k * k])?;
        // keep the recorded factor bit-exactly
        out.chol = l.to_vec();
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGrid {
    pub points: Vec<Vec<f64>>,
    /// Unit directions (whitened coordinates) of the kept points.
    pub directions: Vec<Vec<f64>>,
    pub dropped: usize,
}

/// Unit vectors covering the sphere in R^k. Prefixes are nested for k ≥ 3 and
/// the set for `m` is contained in the set for `2m` when k = 2.
pub fn sphere_directions(k: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    if m < 2 {
        return Err(Error::Invalid(format!(
            "boundary resolution must be at least 2, got {m}"
        )));
    }
    match k {
        0 => Err(Error::Invalid("dimension must be positive".into())),
        1 => Ok((0..m)
            .map(|j| vec![if j % 2 == 0 { 1.0 } else { -1.0 }])
            .collect()),
        2 => Ok((0..m)
            .map(|j| {
                let a = 2.0 * std::f64::consts::PI * (j as f64 / m as f64);
                vec![a.cos(), a.sin()]
            })
            .collect()),
        _ => {
            let mut out = Vec::with_capacity(m);
            let mut i = 1u64;
            while out.len() < m {
                let u = halton(i, k);
                i += 1;
                let g: Vec<f64> = u.iter().map(|&x| norm_inv(x)).collect();
                let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 1e-12 && n.is_finite() {
                    out.push(g.iter().map(|v| v / n).collect());
                }
            }
            Ok(out)
        }
    }
}

/// Points strictly inside Θ at the given radius fractions along the first `m` directions, plus μ.
pub fn interior_grid(region: &ParamRegion, m: usize, fractions: &[f64]) -> Result<Vec<Vec<f64>>> {
    let dirs = sphere_directions(region.dim, m.max(2))?;
    let mut out = vec![region.mu.clone()];
    for &f in fractions {
        for s in &dirs {
            out.push(region.point(s, f * region.radius()));
        }
    }
    Ok(out)
}

/// Result of a local search on the boundary sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOptimum {
    pub theta: Vec<f64>,
    pub direction: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Compass search over the boundary, started at each direction in `starts`.
/// `f` returns `None` at inadmissible points. Maximizes `f`.
pub fn maximize_on_boundary<F>(
    region: &ParamRegion,
    starts: &[Vec<f64>],
    initial_step: f64,
    min_step: f64,
    max_evals: usize,
    f: F,
) -> Option<BoundaryOptimum>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let k = region.dim;
    let mut best: Option<BoundaryOptimum> = None;
    let mut total = 0;
    for s0 in starts {
        let theta0 = region.boundary_point(s0);
        let Some(v0) = f(&theta0) else { continue };
        let mut cur = BoundaryOptimum {
            theta: theta0,
            direction: s0.clone(),
            value: v0,
            evaluations: 1,
        };
        if k > 1 && region.radius_sq > 0.0 {
            let mut step = initial_step;
            while step >= min_step && cur.evaluations < max_evals {
                let basis = tangent_basis(&cur.direction);
                let mut improved = false;
                'dirs: for e in &basis {
                    for sign in [1.0, -1.0] {
                        let mut s: Vec<f64> = cur
                            .direction
                            .iter()
                            .zip(e)
                            .map(|(a, b)| a + sign * step * b)
                            .collect();
                        let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
                        s.iter_mut().for_each(|v| *v /= n);
                        let th = region.boundary_point(&s);
                        cur.evaluations += 1;
                        if let Some(v) = f(&th) {
                            if v > cur.value {
                                cur = BoundaryOptimum {
                                    theta: th,
                                    direction: s,
                                    value: v,
                                    evaluations: cur.evaluations,
                                };
                                improved = true;
                                break 'dirs;
                            }
                        }
                        if cur.evaluations >= max_evals {
                            break 'dirs;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
        }
        total += cur.evaluations;
        if best.as_ref().is_none_or(|b| cur.value > b.value) {
            best = Some(cur);
        }
    }
    if let Some(b) = best.as_mut() {
        b.evaluations = total;
    }
    best
}

/// Orthonormal basis of the tangent space of the unit sphere at `s`.
fn tangent_basis(s: &[f64]) -> Vec<Vec<f64>> {
    let k = s.len();
    let mut basis: Vec<Vec<f64>> = vec![s.to_vec()];
    for i in 0..k {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
        if basis.len() == k {
            break;
        }
    }
    basis.remove(0);
    basis
}

pub fn check_boundary(region: &ParamRegion, points: &[Vec<f64>]) -> bool {
    points.iter().all(|z| {
        (region.mahalanobis_sq(z) - region.radius_sq).abs()
            < BOUNDARY_TOL * region.radius_sq.max(1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(k: usize) -> Vec<f64> {
        (0..k * k)
            .map(|i| if i % (k + 1) == 0 { 1.0 } else { 0.0 })
            .collect()
    }

    #[test]
    fn radius_from_chi2() {
        let r = ParamRegion::ellipsoid(vec![0.0; 4], eye(4), 0.9).unwrap();
        assert!((r.radius_sq - 7.7794).abs() < 1e-4);
        assert!(r.contains(&r.mu));
    }

    #[test]
    fn unit_sphere_boundary() {
        let r = ParamRegion::with_radius_sq(vec![0.0; 4], eye(4), 1.0).unwrap();
        assert!((r.mahalanobis_sq(&[1.0, 0.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn four_axis_points_in_two_dims() {
        let r = ParamRegion::with_radius_sq(vec![0.0, 0.0], eye(2), 4.0).unwrap();
        let g = r.boundary_grid(4).unwrap();
        let expect = [[2.0, 0.0], [0.0, 2.0], [-2.0, 0.0], [0.0, -2.0]];
        for (p, e) in g.iter().zip(expect) {
            assert!((p[0] - e[0]).abs() < 1e-12 && (p[1] - e[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn non_pd_names_minor() {
        let sigma = vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        assert_eq!(
            ParamRegion::ellipsoid(vec![0.0; 3], sigma, 0.5),
            Err(Error::NotPositiveDefinite { minor: 3 })
        );
    }

    #[test]
    fn projection_keeps_radius() {
        let sigma = vec![2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5];
        let r = ParamRegion::ellipsoid(vec![1.0, 2.0, 3.0], sigma, 0.7).unwrap();
        let p = r.project(&[0, 2]).unwrap();
        assert_eq!(p.radius_sq, r.radius_sq);
        assert_eq!(p.sigma, vec![2.0, 0.0, 0.0, 0.5]);
        assert_eq!(r.project(&[0, 1, 2]).unwrap(), r);
        assert!(r.project(&[]).is_err());
    }

    #[test]
    fn record_round_trip() {
        let sigma = vec![2.0, 0.3, 0.3, 1.0];
        let r = ParamRegion::ellipsoid(vec![1.0, -1.0], sigma, 0.5).unwrap();
        let back = ParamRegion::from_record(&r.to_record()).unwrap();
        assert_eq!(back.chol, r.chol);
        assert_eq!(back.mu, r.mu);
        assert_eq!(back.radius_sq, r.radius_sq);
    }

    #[test]
    fn clipping_counts_and_fails() {
        let r = ParamRegion::with_radius_sq(vec![0.0, 1.0], eye(2), 1.0).unwrap();
        let g = r.admissible_boundary_grid(360, |z| z[1] > 0.01).unwrap();
        assert!(g.dropped > 0 && g.dropped <= 36);
        assert!(matches!(
            r.admissible_boundary_grid(360, |z| z[1] > 1.0),
            Err(Error::TooManyDropped { .. })
        ));
    }

    #[test]
    fn compass_search_finds_linear_maximum() {
        let sigma = vec![1.0, 0.5, 0.5, 2.0];
        let r = ParamRegion::with_radius_sq(vec![0.0, 0.0], sigma.clone(), 3.0).unwrap();
        let c = [1.0, 2.0];
        let f = |z: &[f64]| Some(c[0] * z[0] + c[1] * z[1]);
        let starts = sphere_directions(2, 8).unwrap();
        let best = maximize_on_boundary(&r, &starts, 0.4, 1e-9, 10_000, f).unwrap();
        // max of cᵀz over the ellipse is r·sqrt(cᵀΣc)
        let exact = 3f64.sqrt() * (1.0 + 2.0 * 0.5 * 2.0 + 4.0 * 2.0f64).sqrt();
        assert!(
            (best.value - exact).abs() < 1e-8,
            "{} vs {exact}",
            best.value
        );
    }
}
