//! `nspcert`: certify the probabilistic nullspace property of a matrix and
//! run the reproducibility experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nspcert::certify::LogForm;
use nspcert::experiments::{
    certify_matrix, fig1_residuals, recovery_curve, scaling, trials_csv, CertifyConfig,
    CurveConfig, MatrixKind, ResidualConfig, ScalingConfig,
};
use nspcert::kdense::SigmaMethod;
use nspcert::linalg::read_matrix;
use nspcert::sampling::SampleModel;
use nspcert::Error;

#[derive(Parser, Debug)]
#[command(name = "nspcert", version, about = "Tractable certificates for sparse recovery")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bound sigma_k and L for a matrix and evaluate the recovery certificate.
    Certify(CertifyArgs),
    /// Run one of the experiments and write its data files.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Gaussian,
    Uniform,
    Rademacher,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LogFormArg {
    Standard,
    Shifted,
    Plain,
}

impl From<LogFormArg> for LogForm {
    fn from(f: LogFormArg) -> Self {
        match f {
            LogFormArg::Standard => LogForm::Standard,
            LogFormArg::Shifted => LogForm::Shifted,
            LogFormArg::Plain => LogForm::Plain,
        }
    }
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// CSV file holding the coding matrix A (or F with --is-nullspace).
    #[arg(long)]
    matrix: PathBuf,
    /// Treat the matrix as a nullspace basis F instead of A.
    #[arg(long)]
    is_nullspace: bool,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.49)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Comma-separated sigma_k methods: sqk2,sqk2+,sqk3,feige,sdpk,exact,maxcut.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModelArg::Gaussian)]
    model: ModelArg,
    /// Coordinate bound for the bounded models.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Concentration constant for the bounded models.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Monte-Carlo draws for bounded-model expectations.
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
    #[arg(long, value_enum, default_value_t = LogFormArg::Standard)]
    log_form: LogFormArg,
    /// Output JSON file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExperimentKind {
    Fig1Residuals,
    Scaling,
    RecoveryCurve,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(value_enum)]
    experiment: ExperimentKind,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Signal dimension (fig1-residuals, recovery-curve).
    #[arg(long)]
    n: Option<usize>,
    /// Measurements (fig1-residuals).
    #[arg(long)]
    q: Option<usize>,
    /// Nullspace dimension (recovery-curve).
    #[arg(long)]
    m: Option<usize>,
    /// Signal sparsity (fig1-residuals) or largest k (recovery-curve).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated grid of n (scaling).
    #[arg(long)]
    n_grid: Option<String>,
    /// Skip the MaxCut relaxation and use closed-form bounds on L (scaling).
    #[arg(long)]
    no_maxcut: bool,
    /// Extra sigma_k relaxations (recovery-curve).
    #[arg(long, default_value = "")]
    methods: String,
    #[arg(long, default_value_t = 0.49)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Parse { .. } | Error::Json(_) => 4,
        Error::FullRank => 5,
        Error::NoConvergence(_) | Error::Infeasible(_) | Error::NoIdentityDirection => 6,
        Error::BadK { .. }
        | Error::BadAlpha(_)
        | Error::NonFinite
        | Error::ZeroInput
        | Error::NonSymmetric(_)
        | Error::Dimension(_)
        | Error::InvalidArgument(_)
        | Error::OutOfRegime(_)
        | Error::TooLarge { .. } => 7,
        Error::BadX(_) | Error::DegenerateX => 8,
    }
}

fn parse_methods(s: &str) -> Result<Vec<SigmaMethod>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(SigmaMethod::parse)
        .collect()
}

fn sample_model(model: ModelArg, delta: f64) -> SampleModel {
    match model {
        ModelArg::Gaussian => SampleModel::Gaussian,
        ModelArg::Uniform => SampleModel::Uniform { delta },
        ModelArg::Rademacher => SampleModel::Rademacher { delta },
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents)?;
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn run_certify(a: &CertifyArgs) -> Result<(), Error> {
    let matrix = read_matrix(&a.matrix)?;
    let kind = if a.is_nullspace {
        MatrixKind::Nullspace
    } else {
        MatrixKind::Coding
    };
    let mut cfg = CertifyConfig::new(kind, a.k);
    cfg.alpha = a.alpha;
    cfg.beta = a.beta;
    if let Some(m) = &a.methods {
        cfg.methods = parse_methods(m)?;
    }
    cfg.samples = a.samples;
    cfg.seed = a.seed;
    cfg.model = sample_model(a.model, a.delta);
    cfg.c = a.c;
    cfg.mc_samples = a.mc_samples;
    cfg.log_form = a.log_form.into();
    let report = certify_matrix(matrix, &cfg)?;
    let text = json(&report)?;
    match &a.out {
        Some(p) => write_file(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_experiment(a: &ExperimentArgs) -> Result<(), Error> {
    fs::create_dir_all(&a.out)?;
    match a.experiment {
        ExperimentKind::Fig1Residuals => {
            let d = ResidualConfig::default();
            let cfg = ResidualConfig {
                n: a.n.unwrap_or(d.n),
                q: a.q.unwrap_or(d.q),
                nonzeros: a.k.unwrap_or(d.nonzeros),
                trials: a.trials.unwrap_or(d.trials),
                seed: a.seed,
                ..d
            };
            let r = fig1_residuals(&cfg)?;
            write_file(&a.out.join("residuals.csv"), &trials_csv(&r.rows))?;
            write_file(&a.out.join("histogram.csv"), &r.histogram_csv())?;
            write_file(&a.out.join("residuals.json"), &json(&r)?)?;
        }
        ExperimentKind::Scaling => {
            let d = ScalingConfig::default();
            let n_grid = match &a.n_grid {
                Some(s) => s
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse()
                            .map_err(|_| Error::InvalidArgument(format!("bad grid value {v:?}")))
                    })
                    .collect::<Result<Vec<usize>, Error>>()?,
                None => d.n_grid.clone(),
            };
            let cfg = ScalingConfig {
                n_grid,
                trials: a.trials.unwrap_or(d.trials),
                seed: a.seed,
                maxcut: !a.no_maxcut,
                ..d
            };
            let r = scaling(&cfg)?;
            write_file(&a.out.join("scaling.csv"), &r.to_csv())?;
            write_file(&a.out.join("scaling.json"), &json(&r)?)?;
        }
        ExperimentKind::RecoveryCurve => {
            let d = CurveConfig::default();
            let cfg = CurveConfig {
                n: a.n.unwrap_or(d.n),
                m: a.m.unwrap_or(d.m),
                k_max: a.k.unwrap_or(d.k_max),
                trials: a.trials.unwrap_or(d.trials),
                seed: a.seed,
                alpha: a.alpha,
                methods: parse_methods(&a.methods)?,
                samples: a.samples,
                ..d
            };
            let r = recovery_curve(&cfg)?;
            write_file(&a.out.join("recovery_curve.csv"), &r.to_csv())?;
            write_file(&a.out.join("recovery_curve.json"), &json(&r)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(7);
        }
    }
    let result = match &cli.command {
        Command::Certify(a) => run_certify(a),
        Command::Experiment(a) => run_experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
