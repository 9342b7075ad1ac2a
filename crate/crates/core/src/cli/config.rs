use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::gaussian::{Case, CaseConfig, GaussianModel};
use crate::riskmeasures::{check_level, RiskKind, RiskMeasureSpec};
use crate::valuation::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Table1,
    Figure1,
    Value,
    OracleCheck,
}

impl std::str::FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "validate" => Ok(Command::Validate),
            "table1" => Ok(Command::Table1),
            "figure1" => Ok(Command::Figure1),
            "value" => Ok(Command::Value),
            "oracle-check" => Ok(Command::OracleCheck),
            other => Err(Error::Invalid(format!(
                "unknown command {other:?} (expected validate, table1, figure1, value or oracle-check)"
            ))),
        }
    }
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Command::Validate => "validate",
            Command::Table1 => "table1",
            Command::Figure1 => "figure1",
            Command::Value => "value",
            Command::OracleCheck => "oracle-check",
        })
    }
}

/// Effective configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: GaussianModel,
    pub case: CaseConfig,
    pub cloud_size: usize,
    pub oracle_trees: usize,
    pub oracle_cap: u128,
    /// Lattice file for `validate`; a built-in example when absent.
    pub lattice: Option<PathBuf>,
    /// One-dimensional tilt grid used on lattices.
    pub lattice_grid: Vec<f64>,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Defaults; the output directory comes from `AMBIVAL_OUT` when set.
    pub fn new(command: Command) -> Self {
        Self {
            command,
            model: GaussianModel::default(),
            case: CaseConfig::default(),
            cloud_size: 1000,
            oracle_trees: 200,
            oracle_cap: crate::oracle::DEFAULT_CAP,
            lattice: None,
            lattice_grid: vec![-0.5, 0.0, 0.5],
            out: std::env::var_os("AMBIVAL_OUT")
                .map_or_else(|| PathBuf::from("out"), PathBuf::from),
            threads: None,
        }
    }
}

/// Every accepted key, in manifest order.
pub const KEYS: &[&str] = &[
    "command",
    "seed",
    "out",
    "threads",
    "model.beta0",
    "model.sigma0",
    "model.beta1",
    "model.sigma1",
    "model.first_year",
    "model.exposure",
    "model.c_prev",
    "case.case",
    "case.risk",
    "case.q",
    "case.p",
    "case.n",
    "case.m",
    "case.m4",
    "case.knots",
    "case.c1_direction",
    "case.refine",
    "case.interior",
    "case.cloud_size",
    "oracle.trees",
    "oracle.cap",
    "lattice.path",
    "lattice.grid",
];

fn float(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        toml::Value::String(s) => s.trim().parse().map_err(|_| bad(key, v, "a number")),
        _ => Err(bad(key, v, "a number")),
    }
}

fn int(key: &str, v: &toml::Value) -> Result<i64> {
    match v {
        toml::Value::Integer(i) => Ok(*i),
        toml::Value::String(s) => s.trim().parse().map_err(|_| bad(key, v, "an integer")),
        _ => Err(bad(key, v, "an integer")),
    }
}

fn count(key: &str, v: &toml::Value) -> Result<usize> {
    let i = int(key, v)?;
    usize::try_from(i).map_err(|_| bad(key, v, "a nonnegative integer"))
}

fn text(key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        _ => Err(bad(key, v, "a string")),
    }
}

fn boolean(key: &str, v: &toml::Value) -> Result<bool> {
    match v {
        toml::Value::Boolean(b) => Ok(*b),
        toml::Value::String(s) if s == "true" || s == "false" => Ok(s == "true"),
        _ => Err(bad(key, v, "true or false")),
    }
}

fn bad(key: &str, v: &toml::Value, what: &str) -> Error {
    Error::Invalid(format!("{key}: expected {what}, got {v}"))
}

fn positive(key: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Invalid(format!("{key} must be positive, got {x}")))
    }
}

impl RunConfig {
    /// Sets one dotted key.
    pub fn set(&mut self, key: &str, v: &toml::Value) -> Result<()> {
        match key {
            "command" => self.command = text(key, v)?.parse()?,
            "seed" => {
                self.case.seed =
                    u64::try_from(int(key, v)?).map_err(|_| bad(key, v, "a nonnegative integer"))?
            }
            "out" => self.out = PathBuf::from(text(key, v)?),
            "threads" => {
                let n = count(key, v)?;
                self.threads = if n == 0 { None } else { Some(n) };
            }
            "model.beta0" => self.model.beta0 = float(key, v)?,
            "model.sigma0" => self.model.sigma0 = positive(key, float(key, v)?)?,
            "model.beta1" => self.model.beta1 = float(key, v)?,
            "model.sigma1" => self.model.sigma1 = positive(key, float(key, v)?)?,
            "model.first_year" => {
                let i0 = int(key, v)?;
                if !(-10_000..=-3).contains(&i0) {
                    return Err(Error::Invalid(format!(
                        "{key} must lie in [-10000, -3], got {i0}"
                    )));
                }
                let v0 = self.model.exposures[0];
                self.model.first_year = i0 as i32;
                self.model.exposures = vec![v0; (1 - i0) as usize];
            }
            "model.exposure" => {
                let e = positive(key, float(key, v)?)?;
                self.model.exposures.iter_mut().for_each(|x| *x = e);
            }
            "model.c_prev" => self.model.c_prev = float(key, v)?,
            "case.case" => {
                self.case.case = match int(key, v)? {
                    1 => Case::One,
                    2 => Case::Two,
                    c => return Err(Error::Invalid(format!("{key} must be 1 or 2, got {c}"))),
                }
            }
            "case.risk" => {
                self.case.rm =
                    RiskMeasureSpec::new(text(key, v)?.parse::<RiskKind>()?, self.case.rm.level)?
            }
            "case.q" => self.case.rm = RiskMeasureSpec::new(self.case.rm.kind, float(key, v)?)?,
            "case.p" => self.case.p = check_level(float(key, v)?)?,
            "case.n" => self.case.n = count(key, v)?,
            "case.m" => self.case.m = count(key, v)?,
            "case.m4" => self.case.m4 = count(key, v)?,
            "case.knots" => self.case.knots = count(key, v)?,
            "case.c1_direction" => {
                self.case.c1_direction = match text(key, v)?.as_str() {
                    "inf" => Direction::Inf,
                    "sup" => Direction::Sup,
                    other => {
                        return Err(Error::Invalid(format!(
                            "{key} must be inf or sup, got {other:?}"
                        )))
                    }
                }
            }
            "case.refine" => self.case.refine = boolean(key, v)?,
            "case.interior" => self.case.interior = count(key, v)?,
            "case.cloud_size" => self.cloud_size = count(key, v)?,
            "oracle.trees" => self.oracle_trees = count(key, v)?,
            "oracle.cap" => self.oracle_cap = count(key, v)? as u128,
            "lattice.path" => {
                let t = text(key, v)?;
                self.lattice = if t.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(t))
                };
            }
            "lattice.grid" => match v {
                toml::Value::Array(a) if !a.is_empty() => {
                    self.lattice_grid = a.iter().map(|x| float(key, x)).collect::<Result<_>>()?
                }
                _ => return Err(bad(key, v, "a non-empty array of numbers")),
            },
            other => {
                return Err(Error::Invalid(format!(
                    "unknown key {other:?}; valid keys: {}",
                    KEYS.join(", ")
                )));
            }
        }
        Ok(())
    }

    /// Current value of a key as it would be written in a config file.
    pub fn get(&self, key: &str) -> String {
        let f = |x: f64| format!("{x:?}");
        match key {
            "command" => format!("\"{}\"", self.command),
            "seed" => self.case.seed.to_string(),
            "out" => format!("{:?}", self.out.display().to_string()),
            "threads" => self.threads.unwrap_or(0).to_string(),
            "model.beta0" => f(self.model.beta0),
            "model.sigma0" => f(self.model.sigma0),
            "model.beta1" => f(self.model.beta1),
            "model.sigma1" => f(self.model.sigma1),
            "model.first_year" => self.model.first_year.to_string(),
            "model.exposure" => f(self.model.exposures[0]),
            "model.c_prev" => f(self.model.c_prev),
            "case.case" => self.case.case.to_string(),
            "case.risk" => format!("\"{}\"", self.case.rm.kind),
            "case.q" => f(self.case.rm.level),
            "case.p" => f(self.case.p),
            "case.n" => self.case.n.to_string(),
            "case.m" => self.case.m.to_string(),
            "case.m4" => self.case.m4.to_string(),
            "case.knots" => self.case.knots.to_string(),
            "case.c1_direction" => match self.case.c1_direction {
                Direction::Inf => "\"inf\"".into(),
                Direction::Sup => "\"sup\"".into(),
            },
            "case.refine" => self.case.refine.to_string(),
            "case.interior" => self.case.interior.to_string(),
            "case.cloud_size" => self.cloud_size.to_string(),
            "oracle.trees" => self.oracle_trees.to_string(),
            "oracle.cap" => self.oracle_cap.to_string(),
            "lattice.path" => self
                .lattice
                .as_ref()
                .map_or("\"\"".into(), |p| format!("{:?}", p.display().to_string())),
            "lattice.grid" => format!(
                "[{}]",
                self.lattice_grid
                    .iter()
                    .map(|&x| f(x))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            _ => String::new(),
        }
    }

    /// One `key = value` line per key.
    pub fn manifest(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.case.validate()?;
        if self.cloud_size < 100 {
            return Err(Error::Invalid(format!(
                "case.cloud_size must be at least 100, got {}",
                self.cloud_size
            )));
        }
        if self.oracle_trees == 0 {
            return Err(Error::Invalid("oracle.trees must be positive".into()));
        }
        Ok(())
    }
}

/// Flattens a TOML document into `(dotted key, value)` pairs in document order.
pub fn flatten(text: &str) -> Result<Vec<(String, toml::Value)>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map_or(0, |s| text[..s.start].lines().count().max(1));
        Error::Parse {
            line,
            msg: e.message().to_string(),
        }
    })?;
    let mut out = Vec::new();
    fn walk(prefix: &str, t: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
        for (k, v) in t {
            let key = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            match v {
                toml::Value::Table(sub) => walk(&key, sub, out),
                _ => out.push((key, v.clone())),
            }
        }
    }
    walk("", &table, &mut out);
    Ok(out)
}

/// Parses a `key=value` override; the value is read as TOML, else as a string.
pub fn parse_assignment(s: &str) -> Result<(String, toml::Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Invalid(format!("expected key=value, got {s:?}")))?;
    let v = v.trim();
    let value = format!("x = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Builds the configuration: defaults, then the file, then `overrides` in order.
pub fn parse_config(file: Option<&str>, overrides: &[(String, toml::Value)]) -> Result<RunConfig> {
    let entries = match file {
        Some(text) => flatten(text)?,
        None => Vec::new(),
    };
    let command = entries
        .iter()
        .chain(overrides)
        .rfind(|(k, _)| k == "command")
        .map(|(k, v)| text(k, v).and_then(|s| s.parse()))
        .transpose()?
        .ok_or_else(|| Error::Invalid("no command given (set command or pass --command)".into()))?;
    let mut cfg = RunConfig::new(command);
    // exposures are resized by first_year, so apply it first
    for (k, v) in entries
        .iter()
        .chain(overrides)
        .filter(|(k, _)| k == "model.first_year")
    {
        cfg.set(k, v)?;
    }
    for (k, v) in entries
        .iter()
        .chain(overrides)
        .filter(|(k, _)| k != "model.first_year")
    {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
