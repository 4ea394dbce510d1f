//! Command-line sweeps over the IRWA library, written as CSV.
//!
//! Settings are layered: built-in defaults, then a preset, then a
//! `key = value` config file, then command-line flags.

pub mod commands;
pub mod config;
pub mod presets;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

use crate::commands::{execute, Report};
use crate::config::{Command, ConfigError, Settings, SweepConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_FLAGGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "irwa",
    version,
    about = "Qubit-resonator spectra and dispersive shifts under the intermediate RWA"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// fig1, fig2, fig3a, fig3b, fig4a, fig4b, fig5a, fig5b or sqrt-iswap
    #[arg(long)]
    pub preset: Option<String>,
    /// Flat key = value file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega_r: Option<String>,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "delta_policy")]
    pub omega_a: Option<String>,
    /// fixed:DELTA or factor:C (Delta = C g)
    #[arg(long, allow_hyphen_values = true)]
    pub delta_policy: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub g_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub g_max: Option<String>,
    /// Number of grid points
    #[arg(long)]
    pub g_steps: Option<String>,
    /// factor_of_g:C, factor_of_detuning:C or fixed:OMEGA_K
    #[arg(long)]
    pub cutoff_policy: Option<String>,
    /// auto or a photon cutoff
    #[arg(long)]
    pub fock: Option<String>,
    #[arg(long)]
    pub levels: Option<String>,
    /// Output file; standard output when absent
    #[arg(long)]
    pub out: Option<String>,
    /// Sweep variable of the dispersive command: g or delta
    #[arg(long)]
    pub x: Option<String>,
    /// Fixed coupling for detuning sweeps and evolve
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_max: Option<String>,
    #[arg(long)]
    pub delta_steps: Option<String>,
    /// rwa, nonrwa or irwa
    #[arg(long)]
    pub variant: Option<String>,
    /// auto or a time
    #[arg(long)]
    pub t_max: Option<String>,
    #[arg(long)]
    pub t_steps: Option<String>,
    /// Exit with success even when rows are flagged
    #[arg(long)]
    pub allow_flagged: bool,
    /// Worker threads; all cores when absent
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Cli {
    fn flag_settings(&self) -> Result<Settings, ConfigError> {
        let mut s = Settings::default();
        let pairs = [
            ("omega_r", &self.omega_r),
            ("omega_a", &self.omega_a),
            ("delta_policy", &self.delta_policy),
            ("g_min", &self.g_min),
            ("g_max", &self.g_max),
            ("g_steps", &self.g_steps),
            ("cutoff_policy", &self.cutoff_policy),
            ("fock", &self.fock),
            ("levels", &self.levels),
            ("out", &self.out),
            ("x", &self.x),
            ("g", &self.g),
            ("delta_min", &self.delta_min),
            ("delta_max", &self.delta_max),
            ("delta_steps", &self.delta_steps),
            ("variant", &self.variant),
            ("t_max", &self.t_max),
            ("t_steps", &self.t_steps),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                s.set(k, v.clone())?;
            }
        }
        if self.allow_flagged {
            s.set("allow_flagged", "true")?;
        }
        Ok(s)
    }

    /// Defaults, preset, config file and flags, in increasing precedence.
    pub fn resolve(&self) -> Result<SweepConfig, ConfigError> {
        let mut s = presets::layered(self.command, self.preset.as_deref())?;
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            s.merge(&Settings::parse(&text, &path.display().to_string())?);
        }
        s.merge(&self.flag_settings()?);
        SweepConfig::from_settings(self.command, &s)
    }
}

/// Outcome of one invocation: the report (if computed) and the exit code.
pub struct Outcome {
    pub report: Option<Report>,
    pub code: i32,
}

fn exit_code_for(e: &irwa_core::Error) -> i32 {
    match e {
        irwa_core::Error::InvalidParameter(_) | irwa_core::Error::UnresolvablePolicy(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Computes the report for an already resolved configuration.
pub fn compute(cfg: &SweepConfig) -> Result<Report, (i32, String)> {
    execute(cfg).map_err(|e| (exit_code_for(&e), e.to_string()))
}

fn write_output(cfg: &SweepConfig, csv: &str) -> std::io::Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, csv),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(csv.as_bytes())?;
            out.flush()
        }
    }
}

fn run_resolved(cli: &Cli) -> Outcome {
    let cfg = match cli.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Outcome {
                report: None,
                code: EXIT_CONFIG,
            };
        }
    };
    let report = match compute(&cfg) {
        Ok(r) => r,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return Outcome { report: None, code };
        }
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Err(e) = write_output(&cfg, &report.table.to_csv()) {
        eprintln!("error: cannot write output: {e}");
        return Outcome {
            report: Some(report),
            code: EXIT_CONFIG,
        };
    }
    let flagged = report.table.flagged();
    let code = if flagged > 0 && !cfg.allow_flagged {
        eprintln!("{flagged} flagged rows (pass --allow-flagged to accept)");
        EXIT_FLAGGED
    } else {
        EXIT_OK
    };
    Outcome {
        report: Some(report),
        code,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run_resolved(&cli)).code,
            Err(e) => {
                eprintln!("error: cannot start {n} threads: {e}");
                EXIT_CONFIG
            }
        },
        None => run_resolved(&cli).code,
    }
}

/// Defaults overlaid with a named preset, for programmatic use.
pub fn preset_config(command: Command, preset: &str) -> Result<SweepConfig, ConfigError> {
    let s = presets::layered(command, Some(preset))?;
    SweepConfig::from_settings(command, &s)
}
