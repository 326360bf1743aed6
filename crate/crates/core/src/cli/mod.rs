//! Command-line front end: one binary, one subcommand per pipeline stage.

mod commands;
mod config;

use std::net::Ipv4Addr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::classifiers::Family;
use crate::error::{Error, ErrorKind, Result};
use crate::sim::Scheduler;

pub use config::{provenance_header, RunConfig, HEADER_CONFIG_PREFIX, TIMESTAMP_PREFIX};

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_CONTRACT: i32 = 4;
pub const EXIT_IO: i32 = 5;

pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Parse => EXIT_PARSE,
        ErrorKind::Contract => EXIT_CONTRACT,
        ErrorKind::Io => EXIT_IO,
    }
}

#[derive(Debug, Parser)]
#[command(name = "vrqos", version, about = "VR traffic identification and downlink priority simulation")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand; each overrides its config key.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// Flat `key = value` config file (an artifact header also works).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sample duration ω in milliseconds.
    #[arg(long, global = true)]
    pub omega_ms: Option<u32>,
    /// Sub-samples per sample (N).
    #[arg(long, global = true)]
    pub subsamples: Option<usize>,
    #[arg(long, global = true)]
    pub family: Option<Family>,
    #[arg(long, global = true)]
    pub scheduler: Option<Scheduler>,
    /// Background load in Mbit/s; replaces the configured sweep loads.
    #[arg(long, global = true)]
    pub bg_load: Option<f64>,
    /// Trigger prioritization without a classifier.
    #[arg(long, global = true)]
    pub oracle: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a pcap capture or canonical CSV into a canonical CSV trace.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        client_ip: Ipv4Addr,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Generate the labeled synthetic corpus (traces + manifest).
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        duration_ms: Option<u64>,
    },
    /// Window traces into a feature dataset.
    Extract {
        /// Corpus manifest; its labels are used.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        vr: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        nonvr: Vec<PathBuf>,
        /// Traces to extract without labels (prediction mode).
        #[arg(long, num_args = 1..)]
        unlabeled: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fit one model on the training split with fixed hyperparameters.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Cross-validated grid search on the training split.
    Gridsearch {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cv_table: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a model on the validation split (or the whole dataset).
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        all: bool,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Trace used for the per-sample latency measurement.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Permutation importance on the validation split and feature selection.
    Importance {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Refit on the selected features and write that model here.
        #[arg(long)]
        refit: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the downlink simulator over the configured loads.
    Simulate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Per-packet delay dump.
        #[arg(long)]
        delays: Option<PathBuf>,
        #[arg(long)]
        duration_s: Option<f64>,
    },
}

impl Common {
    /// Config file first, then flags on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
                RunConfig::parse(&text).map_err(|e| Error::in_file(path.display().to_string(), e))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.omega_ms {
            config.omega_ms = v;
        }
        if let Some(v) = self.subsamples {
            config.subsamples = v;
        }
        if let Some(v) = self.family {
            config.family = v;
        }
        if let Some(v) = self.scheduler {
            config.sim.scheduler = v;
        }
        if let Some(v) = self.bg_load {
            config.bg_loads_mbps = vec![v];
            config.sim.bg_load_mbps = v;
        }
        config.validate()?;
        Ok(config)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = cli.common.resolve()?;
    let scheduler_given = cli.common.scheduler.is_some();
    match cli.command {
        Command::Ingest { input, client_ip, out } => commands::ingest(&config, &input, client_ip, &out),
        Command::Synth { out_dir, duration_ms } => {
            if let Some(d) = duration_ms {
                config.synth_duration_ms = d;
            }
            commands::synth(&config, &out_dir)
        }
        Command::Extract {
            manifest,
            vr,
            nonvr,
            unlabeled,
            out,
        } => commands::extract(&config, manifest.as_deref(), &vr, &nonvr, &unlabeled, &out),
        Command::Train { dataset, model, report } => commands::train(&config, &dataset, &model, report.as_deref()),
        Command::Gridsearch {
            dataset,
            model,
            cv_table,
            report,
        } => commands::gridsearch(&config, &dataset, &model, cv_table.as_deref(), report.as_deref()),
        Command::Eval {
            dataset,
            model,
            all,
            report,
            trace,
        } => commands::eval(&config, &dataset, &model, all, report.as_deref(), trace.as_deref()),
        Command::Importance {
            dataset,
            model,
            out,
            refit,
            report,
        } => commands::importance(&config, &dataset, &model, out.as_deref(), refit.as_deref(), report.as_deref()),
        Command::Simulate {
            model,
            out,
            summary,
            delays,
            duration_s,
        } => {
            if let Some(d) = duration_s {
                config.sim.duration_s = d;
            }
            if model.is_some() {
                config.model = model;
            }
            if cli.common.oracle {
                config.model = None;
            }
            let only = scheduler_given.then_some(config.sim.scheduler);
            commands::simulate(&config, only, &out, summary.as_deref(), delays.as_deref())
        }
    }
}

/// Usage errors exit through clap with code 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "seed = 5\nomega_ms = 250\nfamily = dt\n").unwrap();
        let common = Common {
            config: Some(path),
            seed: Some(9),
            bg_load: Some(123.0),
            ..Common::default()
        };
        let c = common.resolve().unwrap();
        assert_eq!((c.seed, c.omega_ms, c.family), (9, 250, Family::Dt));
        assert_eq!(c.bg_loads_mbps, vec![123.0]);
    }

    #[test]
    fn exit_codes_are_distinct() {
        let io = Error::io("x", std::io::Error::other("boom"));
        let parse = Error::Config("bad".into());
        let contract = Error::Select(crate::select::SelectError::EmptyGrid);
        let codes = [exit_code(&io), exit_code(&parse), exit_code(&contract)];
        assert_eq!(codes, [EXIT_IO, EXIT_PARSE, EXIT_CONTRACT]);
        assert_ne!(EXIT_OTHER, 0);
    }
}
