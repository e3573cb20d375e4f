//! idclean: clean weakly labeled identity datasets by per-identity match
//! graphs, train the embedding head on the cleaned subset, and iterate.
//!
//! Exit codes: 0 success, 2 config/usage error, 3 data integrity error,
//! 4 numerical failure (training collapse, degenerate embedding,
//! unreachable calibration target).

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError { code: 2, message }
    }

    pub fn io(message: String) -> Self {
        CliError { code: 1, message }
    }

    pub fn numerical(message: String) -> Self {
        CliError { code: 4, message }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.message.fmt(f)
    }
}

impl From<idclean_core::Error> for CliError {
    fn from(err: idclean_core::Error) -> Self {
        use idclean_core::Error as E;
        let code = match &err {
            E::InvalidConfig(_) => 2,
            E::Io { .. } => 1,
            E::Parse { .. }
            | E::FileDimension { .. }
            | E::Dimension { .. }
            | E::DuplicateRecord(_)
            | E::NoRecords(_)
            | E::UnknownLabel(_)
            | E::InsufficientData(_)
            | E::InsufficientPairs { .. } => 3,
            E::ZeroVariance
            | E::DegenerateEmbedding { .. }
            | E::TrainingCollapse { .. }
            | E::CalibrationFailed { .. } => 4,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum RuleArg {
    #[default]
    Anchor,
    Largest,
}

impl From<RuleArg> for idclean_core::ComponentRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Anchor => idclean_core::ComponentRule::Anchor,
            RuleArg::Largest => idclean_core::ComponentRule::Largest,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "idclean", version, about = "Clean weakly labeled identity datasets")]
pub struct Cli {
    /// Root seed; all randomness in a run derives from it.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Worker threads for filtering parallelism (0 = all cores). Outputs
    /// are identical for any worker count.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic ground-truthed weakly labeled dataset.
    Gen {
        /// TOML generation config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// One-shot cleaning pass at a fixed threshold.
    Clean {
        /// Input dataset (JSONL by default, CSV by extension or --format).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Match-graph distance threshold, in (0, 2].
        #[arg(long)]
        threshold: f64,
        /// Groups smaller than this keep nothing.
        #[arg(long, default_value_t = 2)]
        min_group_size: usize,
        /// Which component becomes the kept set.
        #[arg(long, value_enum, default_value_t)]
        rule: RuleArg,
        /// Trained head matrix (JSON); identity head otherwise.
        #[arg(long)]
        head: Option<PathBuf>,
        /// Precomputed embeddings (JSONL) replacing raw features.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the embedding head on a (cleaned) dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// TOML training config.
        #[arg(long)]
        config: PathBuf,
        /// Cleaned subset (JSONL); training restricts to its kept records.
        #[arg(long)]
        cleaned: Option<PathBuf>,
        #[arg(long)]
        head: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate the largest threshold reaching a target precision on a
    /// ground-truthed dataset.
    Calibrate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        target_precision: f64,
        #[arg(long, default_value_t = 2)]
        min_group_size: usize,
        #[arg(long, value_enum, default_value_t)]
        rule: RuleArg,
        /// Candidate thresholds in the sweep.
        #[arg(long, default_value_t = 64)]
        sweep_points: usize,
        #[arg(long)]
        head: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the iterative clean → train → re-clean pipeline.
    Iterate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// TOML pipeline config (holdout, cleaning, training).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit a precision-recall curve over a threshold sweep.
    EvalPr {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        t_min: f64,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, default_value_t = 2)]
        min_group_size: usize,
        #[arg(long, value_enum, default_value_t)]
        rule: RuleArg,
        #[arg(long)]
        head: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair-verification accuracy with cross-validated thresholds.
    EvalVerify {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Same-identity pairs to sample.
        #[arg(long)]
        n_pos: usize,
        /// Different-identity pairs to sample.
        #[arg(long)]
        n_neg: usize,
        #[arg(long)]
        head: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code)
        }
    }
}
