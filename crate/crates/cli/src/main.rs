//! `pc`: pair-correlation experiments from the command line.

mod commands;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::output::{Artifact, Failure};

#[derive(Debug, Parser, Serialize, Deserialize)]
#[command(
    name = "pc",
    version,
    about = "Pair correlation of ({a_n α}) sequences"
)]
pub struct Cli {
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Continued-fraction digits, convergents and the scale location of M.
    Cf(CfArgs),
    /// R_N(s) for a sequence and α.
    R2(R2Args),
    /// Additive energy of sequence prefixes.
    Energy(EnergyArgs),
    /// Bundle decomposition and gap lengths of ({jα})_{j ≤ M}.
    Gaps(GapsArgs),
    /// Search for a degree-one quasi-arithmetic certificate.
    Detect(DetectArgs),
    /// Case analysis and measured deviation at the predicted scales.
    Witness(WitnessArgs),
    /// Preset experiments.
    Experiment {
        #[command(subcommand)]
        preset: Preset,
    },
    /// Re-run the configuration embedded in an artifact's header.
    Replay {
        /// A CSV or JSON artifact written by `pc`.
        artifact: PathBuf,
    },
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct CfArgs {
    #[arg(long)]
    pub alpha: String,
    #[arg(long, default_value_t = 20)]
    pub terms: usize,
    /// Also report the convergent denominator bracketing this M.
    #[arg(long = "M")]
    pub m: Option<u64>,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct R2Args {
    #[arg(long)]
    pub alpha: String,
    #[arg(long)]
    pub seq: String,
    /// Prefix lengths: `1000,5000` or `geom:1000:1000000:7`.
    #[arg(long = "N")]
    pub n: String,
    /// Comma-separated values of s (`1/2`, `0.5`, ...).
    #[arg(long = "s", default_value = "1")]
    pub s: String,
    /// Also run the quadratic oracle and fail on any mismatch.
    #[arg(long)]
    pub naive: bool,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct EnergyArgs {
    #[arg(long)]
    pub seq: String,
    #[arg(long = "N")]
    pub n: String,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct GapsArgs {
    #[arg(long)]
    pub alpha: String,
    #[arg(long = "M")]
    pub m: u64,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct DetectArgs {
    #[arg(long)]
    pub seq: String,
    #[arg(long = "N")]
    pub n: String,
    #[arg(long = "c")]
    pub c: String,
    #[arg(long = "K")]
    pub k: String,
    #[arg(long, default_value_t = 10)]
    pub k_max: u64,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct WitnessArgs {
    #[arg(long)]
    pub seq: String,
    #[arg(long)]
    pub alpha: String,
    #[arg(long = "c")]
    pub c: String,
    #[arg(long = "K")]
    pub k: String,
    #[arg(long = "N")]
    pub n: String,
    #[arg(long, default_value_t = 0.2)]
    pub margin: f64,
    /// Candidate thresholds measured per N.
    #[arg(long, default_value_t = 4)]
    pub s_budget: usize,
    #[arg(long, default_value_t = 10)]
    pub k_max: u64,
}

#[derive(Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Preset {
    /// Identity sequence against golden and √2 − 1 across an N grid.
    KroneckerNull {
        #[arg(long = "N", default_value = "geom:1000:1000000:7")]
        n: String,
        /// Repeatable; defaults to golden and √2 − 1.
        #[arg(long = "alpha")]
        alpha: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        margin: f64,
    },
    /// Density-ρ sequences against random quadratic α.
    DensityCorollary {
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 10)]
        alphas: usize,
        #[arg(long = "N", default_value = "10000,100000,1000000")]
        n: String,
        #[arg(long = "c", default_value = "1/2")]
        c: String,
        #[arg(long = "K", default_value = "3")]
        k: String,
        #[arg(long, default_value_t = 0.2)]
        margin: f64,
    },
    /// R_N(s) curves of sequences expected to behave like random points.
    PoissonControl {
        #[arg(long = "N", default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value = "squares")]
        seq: String,
        /// Fixed α; by default one random quadratic α drawn from the seed.
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long = "s", default_value = "0.25,0.5,0.75,1,1.5,2,3,4")]
        s: String,
    },
    /// Randomized bound checks for the three gap-counting lemmas.
    LemmaSuite {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
    },
    /// Three-gap and bundle invariants on random quadratic α.
    GapAudit {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long = "max-M", default_value_t = 100_000)]
        max_m: u64,
        /// Column step samples per α.
        #[arg(long, default_value_t = 50)]
        triples: usize,
    },
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("PC_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Usage(format!("PC_THREADS must be a positive integer, got `{v}`"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot size the thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<Artifact, Failure> {
    configure_threads()?;
    match &cli.command {
        Command::Cf(a) => commands::cf(a),
        Command::R2(a) => commands::r2(a, cli.seed),
        Command::Energy(a) => commands::energy(a, cli.seed),
        Command::Gaps(a) => commands::gaps(a),
        Command::Detect(a) => commands::detect(a, cli.seed),
        Command::Witness(a) => commands::witness(a, cli.seed),
        Command::Experiment { preset } => experiments::run(preset, cli.seed),
        Command::Replay { .. } => unreachable!("replay is resolved before dispatch"),
    }
}

/// The configuration stored in a CSV header or JSON envelope, with the
/// output target taken from the replaying invocation.
fn replayed(path: &std::path::Path, output: Option<PathBuf>) -> Result<Cli, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let config = match text.lines().next().and_then(|l| l.strip_prefix("# pc ")) {
        Some(rest) => {
            let (_, json) = rest
                .split_once(" config=")
                .ok_or_else(|| Failure::Usage("malformed artifact header".into()))?;
            serde_json::from_str::<serde_json::Value>(json)
        }
        None => serde_json::from_str::<serde_json::Value>(&text).map(|v| v["config"].clone()),
    }
    .map_err(|e| Failure::Usage(format!("unreadable artifact config: {e}")))?;
    let mut cli: Cli =
        serde_json::from_value(config).map_err(|e| Failure::Usage(format!("bad config: {e}")))?;
    if matches!(cli.command, Command::Replay { .. }) {
        return Err(Failure::Usage("an artifact cannot replay a replay".into()));
    }
    cli.output = output;
    Ok(cli)
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    if let Command::Replay { artifact } = &cli.command {
        match replayed(artifact, cli.output.clone()) {
            Ok(c) => cli = c,
            Err(f) => {
                eprintln!("{f}");
                return ExitCode::from(f.exit_code());
            }
        }
    }
    let result = run(&cli).and_then(|artifact| {
        output::emit(&cli, &artifact)?;
        Ok(artifact.status)
    });
    match result {
        Ok(status) => ExitCode::from(status),
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
