use std::fmt::Write as _;

use crate::error::Result;
use crate::gaussian::cases::{case1_bounds, case2_value, Case, CaseConfig, McDraws};
use crate::gaussian::model::{estimator_cloud, EstimatorCloud, GaussianModel};
use crate::priors::{sphere_directions, ParamRegion};
use crate::riskmeasures::RiskMeasureSpec;
use crate::scenario::paths::derive_seed;

pub const TABLE_P: [f64; 3] = [0.1, 0.5, 0.9];
pub const TABLE_Q: [f64; 4] = [0.10, 0.05, 0.01, 0.005];
pub const FIGURE_P: [f64; 2] = [0.1, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub case: Case,
    pub p: f64,
    pub q: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1 {
    pub rows: Vec<TableRow>,
    pub cloud: EstimatorCloud,
    pub n: usize,
    pub seed: u64,
}

impl Table1 {
    pub fn get(&self, case: Case, p: f64, q: f64) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.case == case && r.p == p && r.q == q)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("case,p,q,lower,upper,n,seed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:?},{:?},{},{}",
                r.case, r.p, r.q, r.lower, r.upper, self.n, self.seed
            );
        }
        out
    }

    /// Bounds rounded to three decimals, one block per case.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for case in [Case::One, Case::Two] {
            let _ = writeln!(out, "Case {case}");
            let _ = write!(out, "{:<8}", "");
            for p in TABLE_P {
                let _ = write!(out, "{:^17}", format!("p={p}"));
            }
            out.push('\n');
            for q in TABLE_Q {
                let _ = write!(out, "{:<8}", format!("q={q}"));
                for p in TABLE_P {
                    if let Some(r) = self.get(case, p, q) {
                        let _ = write!(out, "{:^17}", format!("({:.3},{:.3})", r.lower, r.upper));
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Parameter region at confidence level `p` from the cloud's mean and covariance.
pub fn cloud_region(cloud: &EstimatorCloud, p: f64) -> Result<ParamRegion> {
    ParamRegion::ellipsoid(cloud.mu.clone(), cloud.sigma.clone(), p)
}

/// All cells for `ps × qs × {Case 1, Case 2}`. The estimator cloud and the
/// Monte Carlo draws are derived from `base.seed` and shared by every cell.
pub fn table1(
    model: &GaussianModel,
    base: &CaseConfig,
    cloud_size: usize,
    ps: &[f64],
    qs: &[f64],
) -> Result<Table1> {
    let cloud = estimator_cloud(model, cloud_size, derive_seed(base.seed, "cloud"))?;
    let draws = McDraws::simulate(base.n, derive_seed(base.seed, "draws"))?;
    let mut rows = Vec::with_capacity(2 * ps.len() * qs.len());
    for case in [Case::One, Case::Two] {
        for &q in qs {
            for &p in ps {
                let cfg = CaseConfig {
                    case,
                    p,
                    rm: RiskMeasureSpec::new(base.rm.kind, q)?,
                    ..base.clone()
                };
                let region = cloud_region(&cloud, p)?;
                let (lower, upper) = match case {
                    Case::One => {
                        let r = case1_bounds(&cfg, model, &region, &draws)?;
                        (r.lower, r.upper)
                    }
                    Case::Two => {
                        let r = case2_value(&cfg, model, &region, &draws)?;
                        (r.v0, r.upper)
                    }
                };
                rows.push(TableRow {
                    case,
                    p,
                    q,
                    lower,
                    upper,
                });
            }
        }
    }
    Ok(Table1 {
        rows,
        cloud,
        n: base.n,
        seed: base.seed,
    })
}

/// Closed polygon in a two-parameter section.
pub type Ellipse = Vec<[f64; 2]>;

/// Scatter and boundary data for the (β0, β1) and (β1, σ1) projections.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure1 {
    pub scatter_b0b1: Vec<[f64; 2]>,
    pub scatter_b1s1: Vec<[f64; 2]>,
    /// Per level: `(p, boundary of Θ_{β0,β1}, boundary of Θ_{β1,σ1})`.
    pub ellipses: Vec<(f64, Ellipse, Ellipse)>,
}

pub fn figure1_data(cloud: &EstimatorCloud, ps: &[f64], m: usize) -> Result<Figure1> {
    let dirs = sphere_directions(2, m)?;
    let mut ellipses = Vec::with_capacity(ps.len());
    for &p in ps {
        let region = cloud_region(cloud, p)?;
        let poly = |idx: [usize; 2]| -> Result<Vec<[f64; 2]>> {
            let proj = region.project(&idx)?;
            Ok(dirs
                .iter()
                .map(|s| {
                    let z = proj.boundary_point(s);
                    [z[0], z[1]]
                })
                .collect())
        };
        ellipses.push((p, poly([0, 2])?, poly([2, 3])?));
    }
    Ok(Figure1 {
        scatter_b0b1: cloud.rows.iter().map(|r| [r[0], r[2]]).collect(),
        scatter_b1s1: cloud.rows.iter().map(|r| [r[2], r[3]]).collect(),
        ellipses,
    })
}

impl Figure1 {
    /// `(file name, contents)` pairs.
    pub fn to_csv_files(&self) -> Vec<(String, String)> {
        let pairs = |header: &str, pts: &[[f64; 2]]| {
            let mut out = format!("{header}\n");
            for p in pts {
                let _ = writeln!(out, "{:?},{:?}", p[0], p[1]);
            }
            out
        };
        let mut files = vec![
            (
                "figure1_scatter_b0b1.csv".to_string(),
                pairs("beta0,beta1", &self.scatter_b0b1),
            ),
            (
                "figure1_scatter_b1s1.csv".to_string(),
                pairs("beta1,sigma1", &self.scatter_b1s1),
            ),
        ];
        for (p, a, b) in &self.ellipses {
            let mut out = String::from("projection,x,y\n");
            for (name, pts) in [("beta0_beta1", a), ("beta1_sigma1", b)] {
                for z in pts.iter() {
                    let _ = writeln!(out, "{name},{:?},{:?}", z[0], z[1]);
                }
            }
            files.push((format!("figure1_ellipse_p{p}.csv"), out));
        }
        files
    }
}

/// Share of cloud rows inside the four-dimensional region at level `p`.
pub fn coverage(cloud: &EstimatorCloud, p: f64) -> Result<f64> {
    let region = cloud_region(cloud, p)?;
    let inside = cloud
        .rows
        .iter()
        .filter(|r| region.contains(&r[..]))
        .count();
    Ok(inside as f64 / cloud.rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_files_and_boundaries() {
        let cloud = estimator_cloud(&GaussianModel::default(), 1000, 4).unwrap();
        let fig = figure1_data(&cloud, &FIGURE_P, 90).unwrap();
        let files = fig.to_csv_files();
        assert_eq!(files.len(), 4);
        assert_eq!(files[0].1.lines().count(), 1001);
        assert_eq!(files[3].0, "figure1_ellipse_p0.9.csv");
        let region = cloud_region(&cloud, 0.9).unwrap().project(&[2, 3]).unwrap();
        for z in &fig.ellipses[1].2 {
            assert!((region.mahalanobis_sq(z) - region.radius_sq).abs() < 1e-10);
        }
    }
}
