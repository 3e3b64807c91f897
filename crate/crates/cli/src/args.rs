//! Command-line grammar.

use std::path::PathBuf;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dmpart_core::campaign::FitKind;
use dmpart_core::rational;
use dmpart_core::{DeadlineClass, Rational, SchedTest};

#[derive(Debug, Parser)]
#[command(
    name = "dmpart",
    version,
    about = "Partitioned deadline-monotonic scheduling of sporadic tasks"
)]
pub struct Cli {
    /// Log verbosity: -v for info, -vv for debug. RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition a task set and report the result, with a failure certificate
    /// when the partition fails.
    Partition(PartitionArgs),
    /// Build one of the tight instances and reproduce its failure.
    Tight(TightArgs),
    /// Emit demand curves as CSV.
    Curves(CurvesArgs),
    /// Run a seeded random partitioning campaign.
    Random(RandomArgs),
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    /// Task-set document (JSON).
    pub input: PathBuf,

    /// Number of processors; defaults to the document's `m`.
    #[arg(long)]
    pub m: Option<usize>,

    /// Uniprocessor test applied on each processor.
    #[arg(long, value_parser = test_parser())]
    pub test: SchedTest,

    /// Fitting strategy; `scripted` needs --script and is implied by it.
    #[arg(long, value_enum)]
    pub fit: Option<FitArg>,

    /// Seed for arbitrary fit.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Scripted assignment file: {"<task id>": <processor>, ...}.
    #[arg(long)]
    pub script: Option<PathBuf>,

    /// Write a simulated schedule of every processor as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,

    /// Simulation horizon for --trace; defaults per processor to twice the
    /// largest deadline plus twice the largest period.
    #[arg(long, value_parser = parse_rational)]
    pub horizon: Option<Rational>,

    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitArg {
    FirstFit,
    ArbitraryFit,
    BestFit,
    WorstFit,
    Scripted,
}

#[derive(Debug, Args)]
pub struct TightArgs {
    /// Which tight instance to build.
    #[arg(long, value_enum, alias = "theorem")]
    pub instance: Instance,

    /// Number of processors.
    #[arg(long)]
    pub m: usize,

    /// Perturbation ε; defaults to 1/100, or 1/1000000 for the constrained
    /// instance.
    #[arg(long, value_parser = parse_rational)]
    pub epsilon: Option<Rational>,

    /// Directory receiving instance.json, script.json and report.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Instance {
    /// Arbitrary deadlines, linear test, first fit.
    #[value(alias = "3")]
    FirstFit,
    /// Arbitrary deadlines, exact test, adversarial scripted fit.
    #[value(alias = "4")]
    AdversarialFit,
    /// Constrained deadlines, exact test, scripted fit.
    #[value(alias = "9")]
    Constrained,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Curve to emit.
    #[arg(long, value_enum)]
    pub what: Curve,

    /// Task-set document, for --what dbf.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Range start (dbf-sharp default 1, ratio default 1).
    #[arg(long, value_parser = parse_rational)]
    pub from: Option<Rational>,

    /// Range end (dbf-sharp default 6, ratio default 4000); the horizon for
    /// dbf.
    #[arg(long, value_parser = parse_rational)]
    pub to: Option<Rational>,

    /// Grid step for dbf-sharp (default 1/100).
    #[arg(long, value_parser = parse_rational)]
    pub step: Option<Rational>,

    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Curve {
    /// Σdbf(t) of a task file at its step points, exact.
    Dbf,
    /// dbf♯(t) on a grid.
    DbfSharp,
    /// dbf♯(t)/t on a grid.
    DbfSharpRatio,
    /// dbf♯(ℓ)/ℓ at integers.
    Ratio,
}

#[derive(Debug, Args)]
pub struct RandomArgs {
    /// Tasks per set.
    #[arg(long)]
    pub n: usize,

    /// Number of processors.
    #[arg(long)]
    pub m: usize,

    /// Deadline class of the generated sets.
    #[arg(long, value_enum, default_value_t = ClassArg::Constrained)]
    pub class: ClassArg,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 100)]
    pub trials: u64,

    #[arg(long, value_parser = test_parser())]
    pub test: SchedTest,

    #[arg(long, value_parser = fit_kind_parser(), default_value = "first-fit")]
    pub fit: FitKind,

    /// Lower end of the total-utilization range (default a quarter of the
    /// upper end).
    #[arg(long)]
    pub util_min: Option<f64>,

    /// Upper end of the total-utilization range (default min(M, 0.95 n)).
    #[arg(long)]
    pub util_max: Option<f64>,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    Implicit,
    Constrained,
    Arbitrary,
}

impl From<ClassArg> for DeadlineClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Implicit => DeadlineClass::Implicit,
            ClassArg::Constrained => DeadlineClass::Constrained,
            ClassArg::Arbitrary => DeadlineClass::Arbitrary,
        }
    }
}

fn test_parser() -> impl TypedValueParser<Value = SchedTest> {
    PossibleValuesParser::new(SchedTest::ALL.map(SchedTest::name))
        .map(|s| s.parse::<SchedTest>().expect("listed names parse"))
}

fn fit_kind_parser() -> impl TypedValueParser<Value = FitKind> {
    PossibleValuesParser::new(FitKind::ALL.map(FitKind::name))
        .map(|s| s.parse::<FitKind>().expect("listed names parse"))
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    rational::parse(s).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn grammar_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_partition_flags() {
        let cli = Cli::try_parse_from([
            "dmpart", "partition", "ts.json", "--m", "2", "--test", "fbb-arb", "--fit", "best-fit",
        ])
        .unwrap();
        let Command::Partition(a) = cli.command else { panic!() };
        assert_eq!(a.test, SchedTest::FbbArbitrary);
        assert_eq!(a.fit, Some(FitArg::BestFit));
        assert_eq!(a.m, Some(2));
    }

    #[test]
    fn unknown_names_are_usage_errors() {
        for argv in [
            vec!["dmpart", "partition", "x", "--test", "edf"],
            vec!["dmpart", "partition", "x", "--test", "tda", "--fit", "next-fit"],
            vec!["dmpart", "random", "--n", "3", "--m", "2", "--test", "tda", "--fit", "x"],
        ] {
            assert!(Cli::try_parse_from(argv).is_err());
        }
    }

    #[test]
    fn instance_aliases() {
        let cli = Cli::try_parse_from(["dmpart", "tight", "--theorem", "9", "--m", "10"]).unwrap();
        let Command::Tight(a) = cli.command else { panic!() };
        assert_eq!(a.instance, Instance::Constrained);
        let cli = Cli::try_parse_from(["dmpart", "tight", "--instance", "first-fit", "--m", "2", "--epsilon", "1/100"])
            .unwrap();
        let Command::Tight(a) = cli.command else { panic!() };
        assert_eq!(a.epsilon, Some(rational::ratio(1, 100)));
    }
}
