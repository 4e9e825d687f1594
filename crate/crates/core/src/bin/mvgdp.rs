use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Deserialize;

use mvgdp::budget::{precision_budget_equimodal, precision_budget_unimodal, BudgetMode};
use mvgdp::harness::csv_io::{load_csv_matrix, load_dense_matrix, write_matrix};
use mvgdp::harness::{
    emit_reports, perturb_query, run_experiment, BaseExperiment, DirectionsSource, Experiment,
    ExperimentConfig, Mechanism, ReportFormat, ThetaSpec,
};
use mvgdp::sampler::{sample_mvg, NoiseDesign, RandomStream};
use mvgdp::{MvgError, PrivacyParams, QueryKind, QuerySpec, Result};

#[derive(Parser)]
#[command(
    name = "mvgdp",
    version,
    about = "Matrix-variate Gaussian mechanism for matrix-valued queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the privacy-budget quantities for a query.
    Budget(BudgetArgs),
    /// Draw samples from MVG(0, Σ, Ψ).
    Sample(SampleArgs),
    /// Release one perturbed query answer.
    Perturb(PerturbArgs),
    /// Run an experiment and print mean ± 95% CI.
    Bench(BenchArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct BudgetArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    sensitivity: f64,
    #[arg(long, default_value = "unimodal")]
    mode: String,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SampleArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    /// Dense m×m row covariance.
    #[arg(long)]
    sigma: PathBuf,
    /// Dense n×n column covariance.
    #[arg(long)]
    psi: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Output CSV, one sample per row as vec(Z) (column-major). Stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct PerturbArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "identity")]
    query: String,
    #[arg(long, default_value = "mvg-uni")]
    mechanism: Mechanism,
    #[arg(long)]
    epsilon: f64,
    /// Defaults to 1/N.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    lo: f64,
    #[arg(long)]
    hi: f64,
    #[arg(long, default_value = "uniform")]
    theta: ThetaSpec,
    #[arg(long, default_value = "standard")]
    directions: DirectionsSource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_header: bool,
    /// Stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct BenchArgs {
    /// TOML file with any of the flags below; flags on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// regression | firstpc | covest | ablation
    #[arg(long)]
    experiment: Option<String>,
    /// Experiment swept by `ablation`.
    #[arg(long)]
    base: Option<String>,
    /// `;`-separated θ specs for `ablation`.
    #[arg(long)]
    variants: Option<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    mechanism: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    /// Binary allocation share for `--favored`.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    favored: Option<String>,
    /// Full θ spec; overrides `--tau`/`--favored`.
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    directions: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reg: Option<f64>,
    #[arg(long)]
    no_header: bool,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    experiment: Option<String>,
    base: Option<String>,
    variants: Option<Vec<String>>,
    input: Option<PathBuf>,
    mechanism: Option<String>,
    trials: Option<usize>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    tau: Option<f64>,
    favored: Option<Vec<usize>>,
    theta: Option<String>,
    directions: Option<String>,
    seed: Option<u64>,
    reg: Option<f64>,
    header: Option<bool>,
    format: Option<String>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn budget(a: BudgetArgs) -> Result<()> {
    let p = PrivacyParams::new(a.epsilon, a.delta)?;
    let q = QuerySpec::new(a.m, a.n, a.sensitivity, a.gamma, QueryKind::Custom)?;
    let r = match a.mode.as_str() {
        "unimodal" => precision_budget_unimodal(&q, &p)?,
        "equimodal" => precision_budget_equimodal(&q, &p)?,
        other => return Err(MvgError::Config(format!("unknown mode {other:?}"))),
    };
    let mode = match r.mode {
        BudgetMode::Unimodal => "unimodal",
        BudgetMode::EquiModal => "equimodal",
    };
    println!("mode={mode}");
    for (k, v) in [
        ("H_r", r.h_r),
        ("H_r_half", r.h_r_half),
        ("zeta", r.zeta),
        ("alpha", r.alpha),
        ("beta", r.beta),
        ("phi_max", r.phi_max),
        ("precision_budget", r.precision_budget),
    ] {
        println!("{k}={v:e}");
    }
    Ok(())
}

fn sample(a: SampleArgs) -> Result<()> {
    let sigma = load_dense_matrix(&a.sigma)?;
    let psi = load_dense_matrix(&a.psi)?;
    if sigma.shape() != (a.m, a.m) || psi.shape() != (a.n, a.n) {
        return Err(MvgError::Shape(format!(
            "sigma is {:?} and psi is {:?}, expected {}x{} and {}x{}",
            sigma.shape(),
            psi.shape(),
            a.m,
            a.m,
            a.n,
            a.n
        )));
    }
    let design = NoiseDesign::from_dense(&sigma, &psi)?;
    let mut stream = RandomStream::new(a.seed);
    let mut rows = DMatrix::zeros(a.count, a.m * a.n);
    for k in 0..a.count {
        let z = sample_mvg(&mut stream, &design)?;
        rows.row_mut(k).copy_from_slice(z.as_slice());
    }
    let header: Vec<String> = (0..a.n)
        .flat_map(|j| (0..a.m).map(move |i| format!("z_{i}_{j}")))
        .collect();
    write_matrix(output(a.out.as_deref())?, &rows, Some(&header))
}

fn perturb(a: PerturbArgs) -> Result<()> {
    let kind = match a.query.as_str() {
        "identity" => QueryKind::Identity,
        "covariance" => QueryKind::Covariance,
        other => return Err(MvgError::Config(format!("unknown query {other:?}"))),
    };
    let loaded = load_csv_matrix(&a.input, !a.no_header)?;
    let mut cfg = ExperimentConfig::new(
        Experiment::Single(BaseExperiment::CovarianceEstimation),
        a.mechanism,
        a.lo,
        a.hi,
        a.epsilon,
    );
    cfg.delta = a.delta;
    cfg.theta = a.theta;
    cfg.directions = a.directions;
    cfg.seed = a.seed;
    let released = perturb_query(&cfg, &loaded.matrix, kind)?;
    let out = output(a.out.as_deref())?;
    match kind {
        // back to rows-as-records
        QueryKind::Identity => write_matrix(out, &released.transpose(), loaded.names.as_deref()),
        _ => write_matrix(out, &released, None),
    }
}

fn parse<T: std::str::FromStr<Err = MvgError>>(s: Option<String>) -> Result<Option<T>> {
    s.map(|s| s.parse()).transpose()
}

fn bench_config(a: BenchArgs) -> Result<(ExperimentConfig, ReportFormat)> {
    let file: BenchFile = match &a.config {
        Some(p) => toml::from_str(&fs::read_to_string(p)?)
            .map_err(|e| MvgError::Config(format!("{}: {e}", p.display())))?,
        None => BenchFile::default(),
    };
    let need = |name: &str| MvgError::Config(format!("--{name} is required"));

    let base = |s: Option<String>| -> Result<BaseExperiment> {
        Ok(parse(s)?.unwrap_or(BaseExperiment::FirstPc))
    };
    let experiment = match a
        .experiment
        .or(file.experiment)
        .ok_or_else(|| need("experiment"))?
        .as_str()
    {
        "ablation" => {
            let variants: Vec<ThetaSpec> = match a.variants {
                Some(v) => v.split(';').map(str::parse).collect::<Result<_>>()?,
                None => file
                    .variants
                    .ok_or_else(|| need("variants"))?
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<_>>()?,
            };
            Experiment::DirectionAblation {
                base: base(a.base.or(file.base))?,
                variants,
            }
        }
        other => Experiment::Single(other.parse()?),
    };
    let mechanism: Mechanism =
        parse(a.mechanism.or(file.mechanism))?.ok_or_else(|| need("mechanism"))?;
    let theta = match a.theta.or(file.theta) {
        Some(t) => t.parse()?,
        None => {
            let favored = match a.favored {
                Some(f) => Some(
                    f.split(',')
                        .map(|t| {
                            t.trim()
                                .parse()
                                .map_err(|_| MvgError::Config(format!("bad index {t:?}")))
                        })
                        .collect::<Result<Vec<usize>>>()?,
                ),
                None => file.favored,
            };
            match favored {
                Some(favored) => {
                    let tau = a.tau.or(file.tau).unwrap_or(0.9);
                    format!(
                        "binary:{tau}:{}",
                        favored
                            .iter()
                            .map(|i| i.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                    .parse()?
                }
                None => ThetaSpec::Uniform,
            }
        }
    };

    let mut cfg = ExperimentConfig::new(
        experiment,
        mechanism,
        a.lo.or(file.lo).ok_or_else(|| need("lo"))?,
        a.hi.or(file.hi).ok_or_else(|| need("hi"))?,
        a.epsilon.or(file.epsilon).ok_or_else(|| need("epsilon"))?,
    );
    cfg.dataset_path = a.input.or(file.input).ok_or_else(|| need("input"))?;
    cfg.has_header = !a.no_header && file.header.unwrap_or(true);
    cfg.delta = a.delta.or(file.delta);
    cfg.theta = theta;
    if let Some(d) = parse(a.directions.or(file.directions))? {
        cfg.directions = d;
    }
    if let Some(t) = a.trials.or(file.trials) {
        cfg.trials = t;
    }
    if let Some(s) = a.seed.or(file.seed) {
        cfg.seed = s;
    }
    if let Some(r) = a.reg.or(file.reg) {
        cfg.ridge = r;
    }
    let format = parse(a.format.or(file.format))?.unwrap_or_default();
    Ok((cfg, format))
}

fn bench(a: BenchArgs) -> Result<()> {
    let (cfg, format) = bench_config(a)?;
    log::info!(
        "running {:?} with {:?}, {} trials",
        cfg.experiment,
        cfg.mechanism,
        cfg.trials
    );
    let reports = run_experiment(&cfg)?;
    print!("{}", emit_reports(&reports, format));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Budget(a) => budget(a),
        Command::Sample(a) => sample(a),
        Command::Perturb(a) => perturb(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
