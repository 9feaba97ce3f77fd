//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::experiments::{self, Scenario};
use crate::gate::calibrate;

/// Overrides the output directory of `run` unless `--out` is given.
pub const OUT_DIR_ENV: &str = "CAVITY_CNOT_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "cavity-cnot", version, about = "Simulate and characterize a cavity-cavity CNOT gate")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log filled-in defaults and progress.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured scenario and write `<scenario>_<hash>.{json,csv}`.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate gate timings and print them as JSON.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List the available scenarios.
    ListScenarios,
    /// Validate a config and print the effective configuration.
    ValidateConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::from_file(p),
        None => {
            let cfg = Config::default();
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn out_dir(flag: Option<PathBuf>, cfg: &Config) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.experiment.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn set_threads(n: usize) {
    #[cfg(feature = "parallel")]
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::warn!("thread pool already initialized: {e}");
    }
    #[cfg(not(feature = "parallel"))]
    log::warn!("built without parallelism; ignoring --threads {n}");
}

fn execute<W: Write>(cli: Cli, out: &mut W) -> Result<()> {
    let io = Error::Io;
    if let Some(n) = cli.threads {
        set_threads(n.max(1));
    }
    match cli.command {
        Command::Run { config, out: dir } => {
            let cfg = Config::from_file(&config)?;
            let dir = out_dir(dir, &cfg);
            let result = experiments::run(&cfg)?;
            for path in result.write(&dir)? {
                writeln!(out, "wrote {}", path.display()).map_err(io)?;
            }
            for (name, m) in &result.metrics {
                writeln!(out, "{name} = {:.6e} {}", m.value, m.unit).map_err(io)?;
            }
        }
        Command::Calibrate { config } => {
            let cfg = load(config.as_deref())?;
            let report = calibrate(&cfg.device, &cfg.pump, cfg.experiment.encoding())?;
            let mut v = serde_json::to_value(&report).map_err(|e| Error::Numeric(e.to_string()))?;
            v["encoding"] = serde_json::json!(cfg.experiment.encoding());
            v["t_p_ns"] = serde_json::json!(report.timings.t_p * 1e9);
            v["t_w_ns"] = serde_json::json!(report.timings.t_w * 1e9);
            v["total_ns"] = serde_json::json!(report.timings.total() * 1e9);
            writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("value serializes")).map_err(io)?;
        }
        Command::ListScenarios => {
            for s in Scenario::ALL {
                writeln!(out, "{:<22} {}", s.name(), s.description()).map_err(io)?;
            }
        }
        Command::ValidateConfig { config } => {
            let cfg = load(config.as_deref())?;
            writeln!(out, "{}", cfg.effective_json()).map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code: 0 success, 1 I/O, 2 usage or config, 3 numeric or calibration.
pub fn main_with_args<I, T, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(if code == 0 { out as &mut dyn Write } else { err as &mut dyn Write }, "{e}");
            return code;
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
