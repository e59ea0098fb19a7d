mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fluxloss_core::synth::RNG_ALGORITHM;

use commands::OxideQ;
use config::{RunConfig, OUTPUT_DIR_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Data(_) => 1,
            Self::Usage(_) => 2,
        }
    }
}

/// Trapped-vortex loss modelling, extraction and fitting for superconducting
/// cavities.
#[derive(Parser)]
#[command(name = "fluxloss", disable_version_flag = true, arg_required_else_help = true)]
struct Cli {
    /// JSON run configuration; omitted keys take the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for reading independent input files (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Only print warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    /// Print version and the model constants in effect.
    #[arg(long)]
    version: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate S(T) and S'(T) on a temperature grid.
    Model {
        /// Pinning parameters: a JSON object or a fit report.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Dataset index when --params is a fit report.
        #[arg(long, default_value_t = 0)]
        dataset: usize,
        /// Override the reactive scale factor F.
        #[arg(long)]
        f: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        t_min: f64,
        #[arg(long, default_value_t = 1.3)]
        t_max: f64,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value = "model.csv")]
        out: PathBuf,
    },
    /// Reduce a directory of decay traces to a Q0 table.
    Extract {
        #[arg(long)]
        decays: PathBuf,
        /// Antenna quality factor (overrides the config).
        #[arg(long)]
        q1: Option<f64>,
        /// Defaults to the directory name.
        #[arg(long)]
        cooldown_id: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        b_trap_mg: f64,
        #[arg(long, default_value_t = 0.0)]
        b_trap_err_mg: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Subtract a field-free reference cooldown from a flux cooldown.
    Sensitivity {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        flux: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simultaneous fit of sensitivity curves.
    Fit {
        #[arg(long, num_args = 1.., required = true)]
        curves: Vec<PathBuf>,
        #[arg(long, default_value = "fit.json")]
        out: PathBuf,
    },
    /// T1 upper bounds versus trapped field.
    PredictT1 {
        /// Oxide quality factor, or `absent`.
        #[arg(long)]
        q_ox0: Option<OxideQ>,
        /// Trapped fields in mG.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true, allow_negative_numbers = true)]
        b_trap: Vec<f64>,
        /// Derive S from pinning parameters instead of the configured value.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Temperature at which S is evaluated with --params.
        #[arg(long)]
        temperature: Option<f64>,
        /// Sensitivity in nΩ/mG.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, default_value = "t1.csv")]
        out: PathBuf,
    },
    /// Generate synthetic datasets from a JSON spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "synth")]
        out: PathBuf,
    },
}

fn print_version(cfg: &RunConfig) {
    let m = &cfg.material;
    println!("fluxloss {}", env!("CARGO_PKG_VERSION"));
    println!("rho_n        {:e} Ω·m", m.rho_n);
    println!("bc2_0        {} T", m.bc2_0);
    println!("tc           {} K", m.tc);
    println!("lambda_l     {:e} m", m.lambda_l);
    println!("g            {} Ω", m.g);
    println!("f0           {:e} Hz", m.f0);
    println!("q1           {:e}", cfg.pipeline.q1);
    println!("calibration  {} (V/m)/√W", cfg.pipeline.calibration);
    println!("q_ox0        {:e}", cfg.t1.q_ox0);
    println!("s            {} nΩ/mG", cfg.t1.s_nohm_per_mg);
    println!("output_dir   {} (env {OUTPUT_DIR_ENV})", cfg.output_dir().display());
    println!("rng          {RNG_ALGORITHM}");
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    if cli.version {
        print_version(&cfg);
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage("no subcommand given; see --help".into()));
    };
    match command {
        Command::Model { params, dataset, f, t_min, t_max, n, out } => commands::model(
            &cfg,
            commands::ModelArgs {
                params: params.as_deref(),
                dataset,
                f,
                t_min,
                t_max,
                n,
                out: &out,
            },
        ),
        Command::Extract { decays, q1, cooldown_id, b_trap_mg, b_trap_err_mg, out } => commands::extract(
            &cfg,
            commands::ExtractArgs {
                decays: &decays,
                q1,
                cooldown_id,
                b_trap_mg,
                b_trap_err_mg,
                out: &out,
                jobs: cli.jobs,
            },
        ),
        Command::Sensitivity { reference, flux, out } => commands::sensitivity(&cfg, &reference, &flux, &out),
        Command::Fit { curves, out } => commands::fit(&cfg, &curves, &out, cli.jobs),
        Command::PredictT1 { q_ox0, b_trap, params, temperature, s, out } => commands::predict_t1(
            &cfg,
            commands::T1Args {
                q_ox0,
                b_trap_mg: &b_trap,
                params: params.as_deref(),
                temperature_k: temperature,
                s_nohm_per_mg: s,
                out: &out,
            },
        ),
        Command::Synth { spec, out } => commands::synth(&cfg, &spec, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
