use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ordinalkit::data::DataFormat;
use ordinalkit::evaluation::ReportFormat;
use ordinalkit::synth::SynthParams;
use ordinalkit_cli::{
    cmd_evaluate, cmd_ingest, cmd_replay, cmd_report, cmd_round_fit, cmd_synth, cmd_tune, registry_help,
    resolve_output_dir, strategy_from_name, CliError, CliResult, RunConfig,
};

#[derive(Parser)]
#[command(name = "ordinalkit", version, about = "Ordinal regression toolkit", after_help = registry_help())]
struct Cli {
    /// Output directory (overrides the config and ORDINALKIT_OUTPUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert JSON stat blocks or CSV into the canonical CSV and print a level histogram.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// csv or json; inferred from the extension when omitted.
        #[arg(long)]
        format: Option<DataFormat>,
        /// Defaults to <out-dir>/dataset.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a split plan over the configured models and write reports.
    #[command(after_help = registry_help())]
    Evaluate {
        #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
        config: Option<PathBuf>,
        /// Rerun a previous evaluation from its manifest.json.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-validate each model grid on the whole dataset and save the winners.
    #[command(after_help = registry_help())]
    Tune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit rounding thresholds on a CSV with columns raw,true_level.
    #[command(after_help = registry_help())]
    RoundFit {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        strategy: String,
        /// Preset name or comma-separated offsets.
        #[arg(long)]
        grid: Option<String>,
        /// Graph strategy only: require strictly increasing offsets.
        #[arg(long)]
        monotone: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to <out-dir>/thresholds.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render the summary table of a finished run.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
    },
    /// Write a seeded synthetic dataset (latent linear model with cutpoints).
    Synth {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 6)]
        k: usize,
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Defaults to <out-dir>/synth.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<String> {
    let flag_dir = cli.out_dir.as_deref();
    match cli.command {
        Command::Ingest { input, format, out } => {
            let dir = resolve_output_dir(flag_dir, None);
            let out = out.unwrap_or_else(|| dir.join("dataset.csv"));
            cmd_ingest(&input, format, &out, &dir)
        }
        Command::Evaluate {
            config,
            manifest,
            seed,
        } => match (config, manifest) {
            (_, Some(m)) => cmd_replay(&m, flag_dir),
            (Some(c), None) => {
                let cfg = load_config(&c, seed)?;
                let dir = resolve_output_dir(flag_dir, cfg.output_dir.as_deref());
                cmd_evaluate(&cfg, &dir)
            }
            (None, None) => Err(CliError::usage("pass --config or --manifest")),
        },
        Command::Tune { config, seed } => {
            let cfg = load_config(&config, seed)?;
            let dir = resolve_output_dir(flag_dir, cfg.output_dir.as_deref());
            cmd_tune(&cfg, &dir)
        }
        Command::RoundFit {
            predictions,
            strategy,
            grid,
            monotone,
            seed,
            out,
        } => {
            let strategy = strategy_from_name(&strategy, grid.as_deref(), monotone)?;
            let dir = resolve_output_dir(flag_dir, None);
            let out = out.unwrap_or_else(|| dir.join("thresholds.json"));
            cmd_round_fit(&predictions, &strategy, seed, &out, &dir)
        }
        Command::Report { run_dir, format } => cmd_report(&run_dir, format),
        Command::Synth {
            n,
            seed,
            d,
            k,
            spacing,
            sigma,
            out,
        } => {
            let mut p = SynthParams::new(n, seed);
            p.d = d;
            p.k = k;
            if let Some(s) = spacing {
                p.spacing = s;
            }
            if let Some(s) = sigma {
                p.sigma = s;
            }
            let dir = resolve_output_dir(flag_dir, None);
            let out = out.unwrap_or_else(|| dir.join("synth.csv"));
            cmd_synth(&p, &out, &dir)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.into()
        }
    }
}
