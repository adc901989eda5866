mod commands;
mod report;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::Report;
use spec::{Pair, StatSpec};

#[derive(Parser, Debug)]
#[command(name = "ginibre", version, about = "Exact and Monte Carlo fluctuation statistics of Ginibre eigenvalues")]
pub struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here (atomically) instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "GINIBRE_THREADS")]
    threads: Option<usize>,
    /// Include wall-clock seconds in the report.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Covariance of two linear statistics.
    #[command(subcommand)]
    Cov(CovCmd),
    /// Counting statistics of a modulus or argument window.
    #[command(subcommand)]
    Count(CountCmd),
    /// Asymptotic predictions and crossover profiles.
    #[command(subcommand)]
    Asymptotics(AsymptoticsCmd),
    /// Cumulants of a counting statistic.
    Cumulants(CumulantsArgs),
    /// Monte Carlo sampling.
    #[command(subcommand)]
    Mc(McCmd),
    /// Gaussian-limit checks.
    #[command(subcommand)]
    Clt(CltCmd),
    /// The angular smoothing kernel.
    #[command(subcommand)]
    Kernel(KernelCmd),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EnsembleArg {
    Complex,
    Quaternion,
}

impl From<EnsembleArg> for ginibre::radial::Ensemble {
    fn from(e: EnsembleArg) -> Self {
        match e {
            EnsembleArg::Complex => Self::Complex,
            EnsembleArg::Quaternion => Self::Quaternion,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Radial,
    Angular,
}

#[derive(Subcommand, Debug)]
pub enum CovCmd {
    /// Radial statistics Σ f(|z|).
    Radial {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long)]
        f: StatSpec,
        /// Defaults to f.
        #[arg(long)]
        g: Option<StatSpec>,
        #[arg(long, value_enum, default_value_t = EnsembleArg::Complex)]
        ensemble: EnsembleArg,
        /// Also report the large-N limit.
        #[arg(long)]
        compare_asymptotic: bool,
    },
    /// Angular statistics Σ f(arg z), complex ensemble.
    Angular {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long)]
        f: StatSpec,
        #[arg(long)]
        g: Option<StatSpec>,
        /// Also report the kernel-smoothing main term and the triangle correction.
        #[arg(long)]
        decompose: bool,
        /// Also report the (ln N) law and its offset.
        #[arg(long)]
        compare_asymptotic: bool,
    },
}

/// A counting window: `--window a,b` (moduli), `--arc lo,hi` or `--arc-frac x` (arguments).
#[derive(Args, Debug, Clone)]
pub struct WindowArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Modulus window a,b.
    #[arg(long)]
    pub window: Option<Pair>,
    /// Argument window lo,hi in radians.
    #[arg(long)]
    pub arc: Option<Pair>,
    /// Symmetric arc covering this fraction of the circle.
    #[arg(long)]
    pub arc_frac: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum CountCmd {
    /// Variance (and mean) of the number of eigenvalues in a window.
    Var {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, value_enum, default_value_t = EnsembleArg::Complex)]
        ensemble: EnsembleArg,
        /// Also report the regime, the predicted variance and the ratio.
        #[arg(long)]
        compare_asymptotic: bool,
    },
    /// Covariance of the counts of two windows.
    Cov {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[command(flatten)]
        window: WindowArgs,
        /// Second modulus window.
        #[arg(long)]
        window2: Option<Pair>,
        /// Second argument window.
        #[arg(long)]
        arc2: Option<Pair>,
        #[arg(long, value_enum, default_value_t = EnsembleArg::Complex)]
        ensemble: EnsembleArg,
    },
}

#[derive(Subcommand, Debug)]
pub enum AsymptoticsCmd {
    /// Exact count variance against the regime prediction over a list of N.
    Table {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[command(flatten)]
        window: WindowArgs,
        /// Rescale the window at each N so that √N · width equals this value.
        #[arg(long)]
        scaled_width: Option<f64>,
        /// Inner radius of rescaled modulus windows.
        #[arg(long, default_value_t = 0.5)]
        center: f64,
    },
    /// Tabulate a crossover profile.
    Profile {
        #[arg(long, value_enum)]
        which: Profile,
        #[arg(long, default_value_t = 0.1)]
        from: f64,
        #[arg(long, default_value_t = 10.0)]
        to: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
    /// Sup error of the one-term Edgeworth density against the standardized gamma density.
    Edgeworth {
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value_t = 8.0)]
        range: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    IArg,
    IMod,
}

#[derive(Args, Debug)]
pub struct CumulantsArgs {
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Count window; omit and pass --probs for an independent Bernoulli sum.
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    #[arg(long)]
    pub window: Option<Pair>,
    #[arg(long)]
    pub arc: Option<Pair>,
    #[arg(long)]
    pub arc_frac: Option<f64>,
    /// Eigenvalues of a diagonal operator.
    #[arg(long, value_delimiter = ',')]
    pub probs: Option<Vec<f64>>,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = EnsembleArg::Complex)]
    pub ensemble: EnsembleArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Auto,
    Gamma,
    Matrix,
}

impl From<SamplerArg> for ginibre::mc::Sampler {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Auto => Self::Auto,
            SamplerArg::Gamma => Self::Gamma,
            SamplerArg::Matrix => Self::Matrix,
        }
    }
}

#[derive(Args, Debug)]
pub struct McArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = EnsembleArg::Complex)]
    pub ensemble: EnsembleArg,
    #[arg(long, value_enum, default_value_t = SamplerArg::Auto)]
    pub sampler: SamplerArg,
}

#[derive(Subcommand, Debug)]
pub enum McCmd {
    /// Sample replicas and estimate means, variances and covariances.
    Run {
        #[command(flatten)]
        mc: McArgs,
        /// Repeat for several statistics on the same replicas.
        #[arg(long = "statistic", required = true)]
        statistics: Vec<StatSpec>,
        /// Compare with exact values and report z-scores.
        #[arg(long)]
        check_exact: bool,
        /// Keep the per-replica values in a binary batch file.
        #[arg(long)]
        save_batch: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum CltCmd {
    /// Cumulant certificate (counts) and a KS normality test on samples.
    Test {
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        statistic: StatSpec,
        /// Highest cumulant order in the certificate.
        #[arg(long, default_value_t = 8)]
        order: usize,
        /// Bound on the normalized cumulants.
        #[arg(long, default_value_t = 0.1)]
        tol: f64,
        /// Do not add uniform(−1/2, 1/2) jitter to integer counts before the KS test.
        #[arg(long)]
        no_jitter: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum KernelCmd {
    /// Fourier coefficients Ĉ_ℓ(k) and optionally values C_ℓ(θ).
    Dump {
        #[arg(long, value_delimiter = ',', required = true)]
        l: Vec<usize>,
        /// Also tabulate C_ℓ on this many equispaced angles in [−π, π).
        #[arg(long, default_value_t = 0)]
        theta_points: usize,
    },
    /// Error of (C_ℓ ∗ φ)(0) against φ(0), for φ = f ∗ g̃ or the tent of an arc.
    Smoothing {
        #[arg(long, value_delimiter = ',', required = true)]
        l: Vec<usize>,
        #[arg(long)]
        f: Option<StatSpec>,
        #[arg(long)]
        g: Option<StatSpec>,
        /// Self-convolution of the arc lo,hi.
        #[arg(long)]
        tent: Option<Pair>,
    },
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("ginibre: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("ginibre: {e}");
            return ExitCode::from(1);
        }
    }
    let start = Instant::now();
    let mut report = Report::new(argv[1..].to_vec());
    if let Err(e) = commands::run(&cli.command, &mut report) {
        eprintln!("ginibre: {e}");
        return ExitCode::from(e.exit_code());
    }
    let seconds = start.elapsed().as_secs_f64();
    eprintln!("ginibre: {} output rows in {seconds:.3} s", report.outputs.len());
    if cli.timing {
        report.seconds = Some(seconds);
    }
    let text = match cli.format {
        Format::Json => report.to_json(),
        Format::Csv => match report.to_csv() {
            Ok(s) => s,
            Err(e) => {
                eprintln!("ginibre: {e}");
                return ExitCode::from(1);
            }
        },
    };
    let written = match &cli.out {
        Some(path) => report::write_atomic(path, &text),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())
        }
    };
    if let Err(e) = written {
        eprintln!("ginibre: cannot write report: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
