mod report;

use clap::{Args, Parser, Subcommand};
use finitype::config::AnalysisConfig;
use finitype::expr::parse_rational;
use finitype::poly::Rat;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "finitype", version, about = "Finite-type analysis of self-similar measures")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Transition graph, loop classes, dimension bounds and the positivity certificate.
    Analyze(Common),
    /// L^q-spectrum estimates as CSV.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// root, omega, essential or class:<index>
        #[arg(long, default_value = "root")]
        scope: String,
        /// Append the composed min-formula value as a last column.
        #[arg(long)]
        composed: bool,
    },
    /// Local dimensions: per-class bounds and optionally one point.
    Dims {
        #[command(flatten)]
        common: Common,
        /// A point of [0,1], in the coefficient field.
        #[arg(long)]
        point: Option<String>,
    },
    /// Positivity of transition paths, with repairs, and the composed spectrum.
    CertifyMinFormula(Common),
    /// Verify a cone-containment certificate.
    CertifyCones {
        #[command(flatten)]
        common: Common,
        /// Smallest contraction ratio when no --ifs is given.
        #[arg(long)]
        rho_min: Option<String>,
    },
    /// Graphviz rendering of the transition graph.
    ExportDot(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    ifs: Option<PathBuf>,
    /// Write results into this directory instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_cv: Option<usize>,
    #[arg(long)]
    max_level: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    q_from: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    q_to: Option<String>,
    #[arg(long)]
    q_step: Option<String>,
    /// Node budget for path enumeration.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    cones: Option<PathBuf>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Analysis(String),
}

fn rational(flag: &str, s: &str) -> Result<Rat, Failure> {
    parse_rational(s).map_err(|e| Failure::Usage(format!("--{flag}: {e}")))
}

impl Common {
    fn config(&self) -> Result<AnalysisConfig, Failure> {
        let path = self
            .ifs
            .as_ref()
            .ok_or_else(|| Failure::Usage("--ifs <file> is required".into()))?;
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let mut c = AnalysisConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        if let Some(v) = self.max_cv {
            c.caps.max_vertices = v;
        }
        if let Some(v) = self.max_level {
            c.caps.max_level = v;
        }
        if let Some(k) = self.kmax {
            if k == 0 {
                return Err(Failure::Usage("--kmax must be at least 1".into()));
            }
            c.spectra.k_max = k;
        }
        if let Some(s) = &self.q_from {
            c.spectra.q_from = rational("q-from", s)?;
        }
        if let Some(s) = &self.q_to {
            c.spectra.q_to = rational("q-to", s)?;
        }
        if let Some(s) = &self.q_step {
            c.spectra.q_step = rational("q-step", s)?;
            if c.spectra.q_step <= Rat::from_integer(0.into()) {
                return Err(Failure::Usage("--q-step must be positive".into()));
            }
        }
        if c.spectra.q_from > c.spectra.q_to {
            return Err(Failure::Usage("q-from exceeds q-to".into()));
        }
        if let Some(b) = self.budget {
            c.spectra.node_budget = b;
        }
        Ok(c)
    }
}

/// Writes `(file name, contents)` pairs into `--out`, or prints them.
fn emit(out: Option<&Path>, files: Vec<(&str, String)>) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
            for (name, body) in files {
                let p = dir.join(name);
                std::fs::write(&p, body).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            }
        }
        None => {
            for (_, body) in files {
                print!("{body}");
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Analyze(c) => {
            let cfg = c.config()?;
            let (json, dot) = report::analyze(&cfg)?;
            let mut files = vec![("report.json", json)];
            if let (Some(d), Some(_)) = (dot, &c.out) {
                files.push(("graph.dot", d));
            }
            emit(c.out.as_deref(), files)
        }
        Cmd::Spectrum {
            common,
            scope,
            composed,
        } => {
            let cfg = common.config()?;
            let csv = report::spectrum(&cfg, &scope, composed)?;
            emit(common.out.as_deref(), vec![("spectrum.csv", csv)])
        }
        Cmd::Dims { common, point } => {
            let cfg = common.config()?;
            let json = report::dims(&cfg, point.as_deref())?;
            emit(common.out.as_deref(), vec![("dims.json", json)])
        }
        Cmd::CertifyMinFormula(c) => {
            let cfg = c.config()?;
            let json = report::min_formula(&cfg)?;
            emit(c.out.as_deref(), vec![("min_formula.json", json)])
        }
        Cmd::CertifyCones { common, rho_min } => {
            let path = common
                .cones
                .as_ref()
                .ok_or_else(|| Failure::Usage("--cones <file> is required".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let cfg = match &common.ifs {
                Some(_) => Some(common.config()?),
                None => None,
            };
            let rho = rho_min.as_deref().map(|s| rational("rho-min", s)).transpose()?;
            let json = report::cones(&text, path, cfg.as_ref(), rho.as_ref())?;
            emit(common.out.as_deref(), vec![("cones.json", json)])
        }
        Cmd::ExportDot(c) => {
            let cfg = c.config()?;
            let dot = report::dot(&cfg)?;
            emit(c.out.as_deref(), vec![("graph.dot", dot)])
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Analysis(m)) => {
            eprintln!("analysis failed: {m}");
            ExitCode::from(1)
        }
    }
}
