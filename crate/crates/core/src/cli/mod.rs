//! Command-line front end: configuration and dispatch.

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::Parser;

pub use config::{flatten, parse_assignment, parse_config, Command, RunConfig, KEYS};
pub use run::{example_lattice, run, RunSummary};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "ambival",
    version,
    about = "Liability valuation under model ambiguity"
)]
pub struct Cli {
    /// TOML configuration file with dotted keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// validate, table1, figure1, value or oracle-check.
    #[arg(long)]
    pub command: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo sample size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Confidence level of the parameter region.
    #[arg(long)]
    pub p: Option<f64>,
    /// Risk-measure level.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub case: Option<u8>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Any configuration key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Cli {
    /// Flags as overrides, applied after the file; `--set` comes last.
    pub fn overrides(&self) -> Result<Vec<(String, toml::Value)>> {
        use toml::Value;
        let mut o = Vec::new();
        if let Some(c) = &self.command {
            o.push(("command".into(), Value::String(c.clone())));
        }
        if let Some(s) = self.seed {
            o.push((
                "seed".into(),
                Value::Integer(
                    i64::try_from(s).map_err(|_| Error::Invalid("seed too large".into()))?,
                ),
            ));
        }
        if let Some(n) = self.n {
            o.push(("case.n".into(), Value::Integer(n as i64)));
        }
        if let Some(p) = self.p {
            o.push(("case.p".into(), Value::Float(p)));
        }
        if let Some(q) = self.q {
            o.push(("case.q".into(), Value::Float(q)));
        }
        if let Some(c) = self.case {
            o.push(("case.case".into(), Value::Integer(c as i64)));
        }
        if let Some(d) = &self.out {
            o.push(("out".into(), Value::String(d.display().to_string())));
        }
        if let Some(t) = self.threads {
            o.push(("threads".into(), Value::Integer(t as i64)));
        }
        for s in &self.set {
            o.push(parse_assignment(s)?);
        }
        Ok(o)
    }

    pub fn to_config(&self) -> Result<RunConfig> {
        let text = match &self.config {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
            ),
            None => None,
        };
        parse_config(text.as_deref(), &self.overrides()?)
    }
}

/// Parses, runs, reports; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cfg = match cli.to_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match run(&cfg) {
        Ok(s) => {
            print!("{}", s.message);
            for f in &s.files {
                println!("wrote {}", f.display());
            }
            s.status
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
