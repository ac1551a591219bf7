use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "densep",
    version,
    about = "Seeded experiments on learning the distributions of a DDH-style PRF collection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance; prints the public file and writes the secret file.
    GenInstance(GenInstanceArgs),
    /// Draw parameter-appended records from an instance and key, as NDJSON.
    Sample(SampleArgs),
    /// Fit a learner to a sample file and report its metrics.
    Learn(LearnArgs),
    /// Estimate the strong inference exam pass rate of a learner.
    Exam(ExamArgs),
    /// Run the randomized lemma suites; exits nonzero on any failure.
    VerifyLemmas(VerifyArgs),
    /// Compare key recovery with the classical baselines on one instance.
    SeparationReport(SeparationArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LearnerName {
    KeyRecovery,
    Histogram,
    Uniform,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed; every random choice derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Render a human-readable table instead of JSON.
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct GenInstanceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Bit length of the safe prime p.
    #[arg(long, default_value_t = 16)]
    pub bits: u32,
    /// Input length n.
    #[arg(long = "n-in", default_value_t = 8)]
    pub n_in: u32,
    /// Public instance file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Secret file holding the instance, a and k.
    #[arg(long)]
    pub secret: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Secret file from gen-instance.
    #[arg(long)]
    pub secret: PathBuf,
    /// Public instance file; checked against the secret file when given.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Number of records.
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    /// NDJSON output file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub common: Common,
    /// NDJSON sample file.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = LearnerName::KeyRecovery)]
    pub learner: LearnerName,
    /// Read at most this many records.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Confidence parameter recorded with the metrics.
    #[arg(long, default_value = "1/10")]
    pub delta: String,
    /// Secret file, used only to measure the distance of the model.
    #[arg(long)]
    pub secret: Option<PathBuf>,
    /// Model output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include wall-clock time in the metrics.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct ExamArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 16)]
    pub bits: u32,
    #[arg(long = "n-in", default_value_t = 8)]
    pub n_in: u32,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = LearnerName::KeyRecovery)]
    pub learner: LearnerName,
    /// Accuracy promise handed to the threshold strategy; below 1/9.
    #[arg(long, default_value = "1/10")]
    pub epsilon: String,
    /// Confidence parameter; must lie in (0, 1).
    #[arg(long, default_value = "1/10")]
    pub delta: String,
    /// Training records per exam; also the histogram sample count.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Degree d of Q(n) = n^d in the inference threshold 1/2 + 1/Q(n).
    #[arg(long = "q-degree", default_value_t = 1)]
    pub q_degree: u32,
    /// Print wall-clock time to stderr.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "loss-cases", default_value_t = 200)]
    pub loss_cases: u64,
    #[arg(long = "argmax-cases", default_value_t = 50)]
    pub argmax_cases: u64,
    #[arg(long = "counting-cases", default_value_t = 1000)]
    pub counting_cases: u64,
    #[arg(long, default_value = "1/10")]
    pub epsilon: String,
    /// Corrupt one fixture so the run must fail.
    #[arg(long = "inject-fault", hide = true)]
    pub inject_fault: bool,
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct SeparationArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 20)]
    pub bits: u32,
    #[arg(long = "n-in", default_value_t = 20)]
    pub n_in: u32,
    /// Samples given to the histogram baseline.
    #[arg(long, default_value_t = 100_000)]
    pub budget: u64,
    /// Report file; the report is printed either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include wall-clock times in the report.
    #[arg(long)]
    pub timings: bool,
}
