use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::cli::config::{Command, RunConfig};
use crate::error::{Error, Result};
use crate::gaussian::{
    case1_bounds, case2_value, cloud_region, coverage, estimator_cloud, figure1_data, table1, Case,
    EstimatorCloud, McDraws, FIGURE_P, TABLE_P, TABLE_Q,
};
use crate::oracle::{self, InstanceLimits};
use crate::priors::{density_process, Selection, TiltFamily};
use crate::scenario::io::read_lattice;
use crate::scenario::paths::derive_seed;
use crate::scenario::ScenarioLattice;
use crate::valuation::{supermartingale_diagnostic, value_multiprior, CashFlowSpec, FactorTable};

const ORACLE_TOL: f64 = 1e-12;

/// Outcome of a run that did not error: written files and whether all checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub message: String,
    /// Exit status: 0 success, 1 a validation check failed, 2 a numerical check failed.
    pub status: i32,
}

impl Error {
    /// 1 for invalid input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite(_)
            | Error::NotPositiveDefinite { .. }
            | Error::CapExceeded { .. }
            | Error::ConditionalLayerUnavailable(_)
            | Error::TooManyDropped { .. } => 2,
            _ => 1,
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn derived(cloud: &EstimatorCloud) -> String {
    let join = |xs: &[f64]| {
        xs.iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "# mu = [{}]\n# sigma = [{}]\n",
        join(&cloud.mu),
        join(&cloud.sigma)
    )
}

/// Small trinomial example with cash flows and a one-dimensional tilt.
pub fn example_lattice() -> Result<ScenarioLattice> {
    ScenarioLattice::build(
        2,
        |_| vec![0.3, 0.4, 0.3],
        |n| {
            let last = n.path.last().map_or(1.0, |&k| k as f64);
            let level = n.path.iter().sum::<usize>() as f64;
            vec![
                (
                    "X".into(),
                    0.5 + 0.3 * level - 0.2 * n.time as f64 * (2.0 - last),
                ),
                ("xi".into(), last - 1.0),
            ]
        },
    )
}

pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    if let Some(t) = cfg.threads {
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    fs::create_dir_all(&cfg.out).map_err(|e| Error::Io(format!("{}: {e}", cfg.out.display())))?;
    let dir = cfg.out.as_path();
    let mut files = Vec::new();
    let mut manifest = cfg.manifest();
    let mut status = 0;
    let message = match cfg.command {
        Command::Table1 => {
            let tab = table1(&cfg.model, &cfg.case, cfg.cloud_size, &TABLE_P, &TABLE_Q)?;
            write(dir, "table1.csv", &tab.to_csv(), &mut files)?;
            let text = tab.to_text();
            write(dir, "table1.txt", &text, &mut files)?;
            manifest += &derived(&tab.cloud);
            text
        }
        Command::Figure1 => {
            let cloud = estimator_cloud(
                &cfg.model,
                cfg.cloud_size,
                derive_seed(cfg.case.seed, "cloud"),
            )?;
            let fig = figure1_data(&cloud, &FIGURE_P, cfg.case.m)?;
            for (name, body) in fig.to_csv_files() {
                write(dir, &name, &body, &mut files)?;
            }
            manifest += &derived(&cloud);
            let mut msg = String::new();
            for p in FIGURE_P {
                let _ = writeln!(msg, "coverage p={p}: {:.3}", coverage(&cloud, p)?);
            }
            msg
        }
        Command::Value => {
            let cloud = estimator_cloud(
                &cfg.model,
                cfg.cloud_size,
                derive_seed(cfg.case.seed, "cloud"),
            )?;
            let draws = McDraws::simulate(cfg.case.n, derive_seed(cfg.case.seed, "draws"))?;
            let region = cloud_region(&cloud, cfg.case.p)?;
            let mut out = String::new();
            let _ = writeln!(out, "case = {}", cfg.case.case);
            match cfg.case.case {
                Case::One => {
                    let r = case1_bounds(&cfg.case, &cfg.model, &region, &draws)?;
                    let _ = writeln!(out, "lower = {:?}\nupper = {:?}", r.lower, r.upper);
                    let _ = writeln!(
                        out,
                        "argmax = {:?}\nupper_argmax = {:?}",
                        r.argmax, r.upper_argmax
                    );
                    let _ = writeln!(
                        out,
                        "grid_points = {}\ndropped = {}\nevaluations = {}",
                        r.grid_points, r.dropped, r.evaluations
                    );
                    if let Some(e) = r.interior_excess {
                        let _ = writeln!(out, "interior_excess = {e:?}");
                    }
                }
                Case::Two => {
                    let r = case2_value(&cfg.case, &cfg.model, &region, &draws)?;
                    let _ = writeln!(
                        out,
                        "v0 = {:?}\nupper = {:?}\nr0 = {:?}\nc0 = {:?}",
                        r.v0, r.upper, r.r0, r.c0
                    );
                    let _ = writeln!(
                        out,
                        "argmin = {:?}\nupper_argmax = {:?}",
                        r.argmin, r.upper_argmax
                    );
                    let _ = writeln!(out, "clamped = {}\ndropped = {}", r.clamped, r.dropped);
                }
            }
            manifest += &derived(&cloud);
            write(dir, "value.txt", &out, &mut files)?;
            out
        }
        Command::OracleCheck => {
            let rep = oracle::run_suite(
                cfg.oracle_trees,
                cfg.case.seed,
                &InstanceLimits::default(),
                cfg.oracle_cap,
            )?;
            let ok = rep.max_c0_error < ORACLE_TOL
                && rep.max_minimax_error < ORACLE_TOL
                && rep.max_envelope_error < ORACLE_TOL;
            if !ok {
                status = 2;
            }
            let out = format!(
                "trees = {}\nmax_c0_error = {:e}\nmax_minimax_error = {:e}\nmax_envelope_error = {:e}\ntolerance = {:e}\nresult = {}\n",
                rep.trees,
                rep.max_c0_error,
                rep.max_minimax_error,
                rep.max_envelope_error,
                ORACLE_TOL,
                if ok { "PASS" } else { "FAIL" }
            );
            write(dir, "oracle_report.txt", &out, &mut files)?;
            out
        }
        Command::Validate => {
            let (out, ok) = validate_lattice(cfg)?;
            if !ok {
                status = 1;
            }
            write(dir, "validate_report.txt", &out, &mut files)?;
            out
        }
    };
    write(dir, "manifest.txt", &manifest, &mut files)?;
    Ok(RunSummary {
        files,
        message,
        status,
    })
}

fn validate_lattice(cfg: &RunConfig) -> Result<(String, bool)> {
    let lattice = match &cfg.lattice {
        Some(p) => read_lattice(
            &fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )?,
        None => example_lattice()?,
    };
    let cf = CashFlowSpec::from_payload(&lattice, "X")?;
    let family = TiltFamily::from_payload(&lattice, "xi")?;
    let grid: Vec<Vec<f64>> = cfg.lattice_grid.iter().map(|&t| vec![t]).collect();
    let mut out = String::new();
    let mut ok = true;
    let mut check = |name: &str, pass: bool, detail: String, out: &mut String| {
        ok &= pass;
        let _ = writeln!(
            out,
            "{} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    };
    let _ = writeln!(
        out,
        "nodes = {}\nhorizon = {}",
        lattice.len(),
        lattice.horizon()
    );
    for th in &grid {
        let d = density_process(&lattice, &family, &Selection::Constant(th.clone()))?;
        let res = d.validate(&lattice);
        check(
            "density",
            res.is_ok(),
            format!(
                "theta = {th:?} {}",
                res.err().map_or(String::new(), |e| e.to_string())
            ),
            &mut out,
        );
    }
    let val = value_multiprior(&lattice, &cf, &cfg.case.rm, &family, &grid)?;
    let _ = writeln!(
        out,
        "R0 = {:?}\nC0 = {:?}\nV0 = {:?}",
        val.r0(),
        val.c0(),
        val.v0()
    );
    if let Some(b) = val.bounds {
        check(
            "bounds",
            b.lower <= val.v0() + 1e-12 && val.v0() <= b.upper + 1e-12,
            format!("{:?} <= {:?} <= {:?}", b.lower, val.v0(), b.upper),
            &mut out,
        );
    }
    let sm = supermartingale_diagnostic(&lattice, &val, &cf);
    check(
        "supermartingale",
        sm.holds(),
        format!("min slack per time {:?}", sm.min_slack),
        &mut out,
    );
    let table = FactorTable::new(&lattice, &family, &grid)?;
    match oracle::snell_bruteforce(
        &lattice,
        &cf,
        &val.r_process(&lattice),
        &table,
        0,
        cfg.oracle_cap,
    ) {
        Ok(v) => {
            let err = (v[0].sup_inf - val.c0()).abs();
            check(
                "oracle",
                err < ORACLE_TOL,
                format!("|C0 - brute force| = {err:e}"),
                &mut out,
            );
        }
        Err(Error::CapExceeded { count, cap }) => {
            let _ = writeln!(
                out,
                "SKIP oracle: {count} rule/selection pairs exceed cap {cap}"
            );
        }
        Err(e) => return Err(e),
    }
    Ok((out, ok))
}
