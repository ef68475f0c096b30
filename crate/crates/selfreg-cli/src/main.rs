//! Command-line surface: bound calculators, distribution-constant
//! estimators, ball-net builders, trainers, verification campaigns, and the
//! signed cancellation demo.
//!
//! Exit codes: 0 success, 1 hypothesis-violation flags under --strict,
//! 2 configuration errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use selfreg::activations::ActivationKind;
use selfreg::bounds::{self, BoundInput, ThetaConstants};
use selfreg::counterexample::{build_inflated_student, verify_invariance, CounterexampleSpec};
use selfreg::data::{self, DistributionParams, DistributionSpec, InputDist, LabelDist};
use selfreg::epsnet;
use selfreg::experiments::{self, ExperimentConfig};
use selfreg::network::{sample_teacher, TwoLayerNet};
use selfreg::trainer::{self, TrainConfig};

#[derive(Parser)]
#[command(
    name = "selfreg",
    about = "Outer-norm self-regularity of two-layer networks with non-negative output weights: \
             bound formulas, seeded estimators, and Monte-Carlo verification campaigns",
    version
)]
struct Cli {
    /// Thread count for parallel campaigns; outputs are identical for any
    /// value.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Exit with code 1 when a bound hypothesis flag fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a closed-form bound (outer norm, failure probability,
    /// fat-shattering, xi, zeta, generalization, covering) as JSON
    Bounds(BoundsArgs),
    /// Print the sample-complexity scaling table as CSV
    Scaling(ScalingArgs),
    /// Estimate distribution constants (C, mu*, eta, MGF caps, lambda) by
    /// seeded Monte Carlo
    EstimateParams(EstimateArgs),
    /// Build a greedy packing net of a Euclidean ball and verify covering
    Net(NetArgs),
    /// Sample a dataset and fit a non-negative-output two-layer network
    Train(TrainArgs),
    /// Campaign: fitted outer norms against the theoretical cap
    VerifyNorm(CampaignArgs),
    /// Campaign: population risk against the generalization cap
    VerifyGen(VerifyGenArgs),
    /// Truncated-second-moment curve lambda(d) over a dimension grid
    LambdaDecay(LambdaArgs),
    /// Build the signed cancellation student and report risk/norm growth
    Counterexample(CounterexampleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Sigmoid,
    Relu,
    Step,
    Srelu,
    Softplus,
    Gaussian,
}

impl From<ActivationArg> for ActivationKind {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Sigmoid => ActivationKind::Sigmoid,
            ActivationArg::Relu => ActivationKind::ReLU,
            ActivationArg::Step => ActivationKind::Step,
            ActivationArg::Srelu => ActivationKind::SaturatedReLU,
            ActivationArg::Softplus => ActivationKind::Softplus,
            ActivationArg::Gaussian => ActivationKind::Gaussian,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Formula {
    OuterNorm,
    FailureProb,
    Fsd,
    Xi,
    Zeta,
    Generalization,
    Covering,
    Haussler,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_enum, default_value = "outer-norm")]
    formula: Formula,
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    /// Training-error scale delta (risk <= delta^2)
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Label scale M
    #[arg(long = "M", default_value_t = 0.0)]
    label_bound: f64,
    /// Input norm-tail constant C
    #[arg(long = "C", default_value_t = 0.0)]
    tail_c: f64,
    /// Inner-weight radius R (sigmoid)
    #[arg(long = "R", default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    mu_star: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long = "N", default_value_t = 1)]
    n: u64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Activation range bound (sigma maps into [-mcal/2, mcal/2])
    #[arg(long, default_value_t = 2.0)]
    mcal: f64,
    /// Outer-norm cap A
    #[arg(long = "A", default_value_t = 0.0)]
    outer_cap: f64,
    /// Stand-in for the unspecified universal constant
    #[arg(long, default_value_t = 1.0)]
    c_universal: f64,
    /// Theta(N) tail exponent stand-in
    #[arg(long, default_value_t = 0.01)]
    theta_n: f64,
    /// Theta(d) tail exponent stand-in
    #[arg(long, default_value_t = 0.1)]
    theta_d: f64,
    /// epsilon for the covering formula
    #[arg(long)]
    eps: Option<f64>,
    /// log cover size for the concentration formula
    #[arg(long, default_value_t = 0.0)]
    cover_log: f64,
    /// Range bound T for the concentration formula
    #[arg(long = "T", default_value_t = 1.0)]
    t_range: f64,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    /// Restrict to one activation (default: sigmoid, relu, step rows)
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
    d_grid: Vec<usize>,
    /// Inner-weight radius R for the sigmoid regime split
    #[arg(long = "R", default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Config file {"schema":1,"spec":<distribution>}
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in input family when no config is given
    #[arg(long, default_value = "gaussian-iso")]
    dist: String,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, default_value_t = 100_000)]
    n_mc: usize,
    #[arg(long, default_value_t = 256)]
    n_directions: usize,
    /// MGF evaluation point s
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Norm-tail target; default exp(-d/2)
    #[arg(long)]
    target_tail: Option<f64>,
    /// Tail constant for the lambda estimate; default: the estimated C
    #[arg(long = "C")]
    tail_c: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NetArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    max_points: usize,
    /// Covering-verification probe count
    #[arg(long, default_value_t = 100_000)]
    probes: usize,
    /// Write net points as CSV
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Config file {"schema":1,"spec":...,"activation":...,"n":...,"trainer":...}
    #[arg(long)]
    config: PathBuf,
    /// Override the trainer seed
    #[arg(long)]
    seed: Option<u64>,
    /// Write the fitted net as JSON
    #[arg(long)]
    out_net: Option<PathBuf>,
    /// Write the sampled dataset as CSV (header x_1..x_d,y)
    #[arg(long)]
    out_data: Option<PathBuf>,
}

#[derive(Args)]
struct CampaignArgs {
    /// Config file {"schema":1,"experiment":<campaign>}
    #[arg(long)]
    config: PathBuf,
    /// Override the campaign master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Write one trial per row as CSV
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Write the aggregate summary as JSON
    #[arg(long)]
    out_summary: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyGenArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Generalization-gap target; falls back to the config's "alpha"
    #[arg(long)]
    alpha: Option<f64>,
    /// Population-risk sample count; falls back to the config's "n_mc"
    #[arg(long)]
    n_mc: Option<usize>,
}

#[derive(Args)]
struct LambdaArgs {
    #[arg(long, default_value = "gaussian-iso")]
    dist: String,
    #[arg(long = "C", default_value_t = 2.0)]
    tail_c: f64,
    #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
    d_grid: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    n_directions: usize,
    #[arg(long, default_value_t = 100_000)]
    n_mc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CounterexampleArgs {
    /// Number of cancelling pairs
    #[arg(long)]
    z: usize,
    /// Magnitude of the signed extra weights
    #[arg(long)]
    nu: f64,
    /// Teacher net JSON file; omitted: a random teacher is sampled
    #[arg(long)]
    teacher: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    d: usize,
    #[arg(long, default_value_t = 4)]
    m_star: usize,
    #[arg(long, value_enum, default_value = "sigmoid")]
    activation: ActivationArg,
    /// Evaluation dataset size
    #[arg(long, default_value_t = 200)]
    n_data: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Config(String),
    StrictViolation(String),
}

impl From<selfreg::Error> for CliError {
    fn from(e: selfreg::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
}

fn check_schema(schema: u32, path: &Path) -> Result<(), CliError> {
    if schema != 1 {
        return Err(CliError::Config(format!(
            "{}: unsupported schema {schema} (expected 1)",
            path.display()
        )));
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, content: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, content).map_err(config_err),
        None => {
            println!("{}", content.trim_end());
            Ok(())
        }
    }
}

fn builtin_spec(dist: &str, d: usize) -> Result<DistributionSpec, CliError> {
    let input = match dist {
        "gaussian-iso" | "gaussian_iso" => InputDist::GaussianIso,
        "zero" | "rademacher" => InputDist::Custom { id: dist.into() },
        other => {
            return Err(CliError::Config(format!(
                "unknown distribution '{other}' (gaussian-iso, zero, rademacher)"
            )))
        }
    };
    DistributionSpec::new(input, LabelDist::Custom { id: "zero".into() }, d).map_err(Into::into)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(config_err)
}

fn run_bounds(args: &BoundsArgs, strict: bool) -> CliResult {
    let input = BoundInput {
        delta: args.delta,
        label_bound: args.label_bound,
        tail_c: args.tail_c,
        radius: args.radius,
        mu_star: args.mu_star,
        eta: args.eta,
        dim: args.d,
        n_samples: args.n,
        alpha: args.alpha,
        gamma: args.gamma,
        range_bound: args.mcal,
        outer_cap: args.outer_cap,
        c_universal: args.c_universal,
        theta: ThetaConstants {
            tail_n: args.theta_n,
            tail_d: args.theta_d,
        },
    };
    let need_activation = || -> Result<ActivationKind, CliError> {
        args.activation
            .map(Into::into)
            .ok_or_else(|| CliError::Config("this formula needs --activation".into()))
    };
    let (json, valid) = match args.formula {
        Formula::OuterNorm => {
            let rep = bounds::outer_norm_bound(need_activation()?, &input)?;
            let valid = rep.valid;
            (to_json(&rep)?, valid)
        }
        Formula::FailureProb => {
            let rep = bounds::outer_norm_failure_prob(need_activation()?, &input)?;
            let valid = rep.valid;
            (to_json(&rep)?, valid)
        }
        Formula::Fsd => {
            let rep = bounds::fsd_bound(&input)?;
            let valid = rep.valid;
            (to_json(&rep)?, valid)
        }
        Formula::Xi => {
            let rep = bounds::xi(&input)?;
            let valid = rep.valid;
            (to_json(&rep)?, valid)
        }
        Formula::Zeta => {
            let rep = bounds::zeta(&input)?;
            let valid = rep.valid;
            (to_json(&rep)?, valid)
        }
        Formula::Generalization => {
            let rep = bounds::generalization_bound(need_activation()?, &input)?;
            let valid = rep.valid;
            (to_json(&rep)?, valid)
        }
        Formula::Covering => {
            let eps = args
                .eps
                .ok_or_else(|| CliError::Config("covering needs --eps".into()))?;
            let rep = epsnet::covering_bound(args.radius, eps, args.d)?;
            (to_json(&rep)?, true)
        }
        Formula::Haussler => {
            let log = bounds::haussler_prob(args.cover_log, args.alpha, args.t_range, args.n)?;
            (
                to_json(&serde_json::json!({
                    "formula": "uniform_convergence_failure",
                    "log_value": log,
                    "value": log.exp().clamp(0.0, 1.0),
                }))?,
                true,
            )
        }
    };
    emit(&args.out, &json)?;
    if strict && !valid {
        return Err(CliError::StrictViolation(
            "bound hypothesis flags failed".into(),
        ));
    }
    Ok(())
}

fn run_scaling(args: &ScalingArgs, _strict: bool) -> CliResult {
    let activations: Vec<ActivationKind> = match args.activation {
        Some(a) => vec![a.into()],
        None => vec![
            ActivationKind::Sigmoid,
            ActivationKind::ReLU,
            ActivationKind::Step,
        ],
    };
    let mut csv = String::from("activation,d,regime,min_n_formula,min_n\n");
    for &activation in &activations {
        for &d in &args.d_grid {
            let input = BoundInput {
                dim: d,
                radius: args.radius,
                ..BoundInput::default()
            };
            let rep = bounds::scaling_report(activation, &input)?;
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                rep.activation, rep.dim, rep.regime, rep.min_n_formula, rep.min_n_at_d
            ));
        }
    }
    emit(&args.out, &csv)
}

#[derive(Deserialize)]
struct EstimateFile {
    schema: u32,
    spec: DistributionSpec,
}

fn run_estimate(args: &EstimateArgs, _strict: bool) -> CliResult {
    let spec = match &args.config {
        Some(path) => {
            let file: EstimateFile = load_config(path)?;
            check_schema(file.schema, path)?;
            file.spec
        }
        None => builtin_spec(&args.dist, args.d)?,
    };
    let d = spec.dim();
    let tail = args
        .target_tail
        .unwrap_or_else(|| (-(d as f64) / 2.0).exp());
    let c_est = data::estimate_c(&spec, args.n_mc, tail, args.seed)?;
    let c_for_lambda = args.tail_c.unwrap_or(c_est.value);
    let params = DistributionParams {
        c_tail: Some(c_est),
        label_bound: spec.label.bound().map(|m| data::Estimate {
            value: m,
            std_error: 0.0,
        }),
        mu_star: Some(data::estimate_mu_star(
            &spec,
            args.n_directions,
            args.n_mc,
            args.seed,
        )?),
        eta: Some(data::estimate_eta(
            &spec,
            args.n_directions,
            args.n_mc,
            args.seed,
        )?),
        mgf: Some(data::estimate_mgf_bounds(
            &spec,
            args.s,
            args.n_directions,
            args.n_mc,
            args.seed,
        )?),
        lambda_d: Some(data::estimate_lambda(
            &spec,
            c_for_lambda,
            args.n_directions,
            args.n_mc,
            args.seed,
        )?),
    };
    emit(&args.out, &to_json(&params)?)
}

fn run_net(args: &NetArgs, _strict: bool) -> CliResult {
    let net = epsnet::build_greedy_net(args.radius, args.eps, args.d, args.seed, args.max_points)?;
    let cover = epsnet::verify_covering(&net, args.probes, args.seed.wrapping_add(1))?;
    let bound = if args.radius >= 1.0 {
        Some(epsnet::covering_bound(args.radius, args.eps, args.d)?)
    } else {
        None
    };
    if let Some(path) = &args.out_csv {
        let mut buf = Vec::new();
        net.write_csv(&mut buf)?;
        fs::write(path, buf).map_err(config_err)?;
    }
    let report = serde_json::json!({
        "points": net.len(),
        "complete": net.complete,
        "packing_eps": net.eps,
        "covering_scale": net.scale,
        "min_pairwise_distance": net.min_pairwise_distance(),
        "covering_check": cover,
        "size_bound": bound,
    });
    emit(&None, &to_json(&report)?)
}

#[derive(Deserialize)]
struct TrainFile {
    schema: u32,
    spec: DistributionSpec,
    activation: ActivationKind,
    n: usize,
    trainer: TrainConfig,
}

fn run_train(args: &TrainArgs, _strict: bool) -> CliResult {
    let file: TrainFile = load_config(&args.config)?;
    check_schema(file.schema, &args.config)?;
    let mut tcfg = file.trainer;
    if let Some(seed) = args.seed {
        tcfg.seed = seed;
    }
    let data = data::sample_dataset(&file.spec, file.n, tcfg.seed.wrapping_add(0x0da7a))?;
    if let Some(path) = &args.out_data {
        let mut buf = Vec::new();
        data.write_csv(&mut buf)?;
        fs::write(path, buf).map_err(config_err)?;
    }
    let fit = trainer::fit(&data, file.activation, &tcfg)?;
    if let Some(path) = &args.out_net {
        fs::write(path, serde_json::to_string(&fit.net).map_err(config_err)?)
            .map_err(config_err)?;
    }
    let report = serde_json::json!({
        "final_risk": fit.final_risk,
        "outer_norm": fit.net.outer_norm(),
        "units": fit.net.units(),
        "iterations": fit.iterations,
        "converged": fit.converged,
        "diverged": fit.diverged,
        "kkt_residual": fit.kkt_residual,
    });
    emit(&None, &to_json(&report)?)
}

#[derive(Deserialize)]
struct CampaignFile {
    schema: u32,
    experiment: ExperimentConfig,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    n_mc: Option<usize>,
}

fn load_campaign(args: &CampaignArgs) -> Result<CampaignFile, CliError> {
    let mut file: CampaignFile = load_config(&args.config)?;
    check_schema(file.schema, &args.config)?;
    if let Some(seed) = args.seed {
        file.experiment.master_seed = seed;
    }
    Ok(file)
}

fn write_campaign_outputs(
    args: &CampaignArgs,
    results: &[experiments::TrialResult],
    strict: bool,
) -> CliResult {
    let summary = experiments::summarize(results)?;
    if let Some(path) = &args.out_csv {
        let mut buf = Vec::new();
        experiments::write_trials_csv(results, &mut buf)?;
        fs::write(path, buf).map_err(config_err)?;
    }
    let json = to_json(&summary)?;
    match &args.out_summary {
        Some(path) => fs::write(path, &json).map_err(config_err)?,
        None => println!("{json}"),
    }
    if strict && summary.violations > 0 {
        return Err(CliError::StrictViolation(format!(
            "{} of {} applicable trials violated a cap",
            summary.violations, summary.applicable
        )));
    }
    Ok(())
}

fn run_verify_norm(args: &CampaignArgs, strict: bool) -> CliResult {
    let file = load_campaign(args)?;
    let results = experiments::run_norm_verification(&file.experiment)?;
    write_campaign_outputs(args, &results, strict)
}

fn run_verify_gen(args: &VerifyGenArgs, strict: bool) -> CliResult {
    let file = load_campaign(&args.campaign)?;
    let alpha = args.alpha.or(file.alpha).ok_or_else(|| {
        CliError::Config("verify-gen needs --alpha (or \"alpha\" in the config)".into())
    })?;
    let n_mc = args.n_mc.or(file.n_mc).unwrap_or(100_000);
    let results = experiments::run_generalization_gap(&file.experiment, alpha, n_mc)?;
    write_campaign_outputs(&args.campaign, &results, strict)
}

fn run_lambda(args: &LambdaArgs, _strict: bool) -> CliResult {
    let spec = builtin_spec(&args.dist, *args.d_grid.first().unwrap_or(&10))?;
    let table = experiments::run_lambda_decay(
        &spec,
        args.tail_c,
        &args.d_grid,
        args.n_directions,
        args.n_mc,
        args.seed,
    )?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    let csv = String::from_utf8(buf).map_err(config_err)?;
    match &args.out {
        Some(path) => fs::write(path, &csv).map_err(config_err)?,
        None => print!("{csv}"),
    }
    if let Some(slope) = table.ln_slope {
        eprintln!("ln-slope: {slope}");
    }
    Ok(())
}

fn run_counterexample(args: &CounterexampleArgs, _strict: bool) -> CliResult {
    let teacher: TwoLayerNet<f64> = match &args.teacher {
        Some(path) => load_config(path)?,
        None => sample_teacher(args.activation.into(), args.m_star, args.d, 1.0, args.seed)?,
    };
    let d = teacher.dim();
    let mut rng = selfreg::util::seeded_rng(args.seed, &[0xcec]);
    let v = selfreg::util::sample_unit_vector(&mut rng, d);
    let spec = CounterexampleSpec::new(teacher.clone(), args.z, args.nu, v)?;
    let inflated = build_inflated_student(&spec)?;

    let dist = DistributionSpec::new(
        InputDist::GaussianIso,
        LabelDist::Teacher {
            net: teacher,
            clip: None,
        },
        d,
    )?;
    let dataset = data::sample_dataset(&dist, args.n_data, args.seed.wrapping_add(1))?;
    let report = verify_invariance(&spec, &dataset)?;
    let json = serde_json::json!({
        "teacher_units": spec.teacher.units(),
        "inflated_units": inflated.units(),
        "inflated_is_nonneg": inflated.is_nonneg(),
        "report": report,
    });
    emit(&args.out, &to_json(&json)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized; --jobs ignored");
        }
    }
    let strict = cli.strict;
    let outcome = match &cli.command {
        Command::Bounds(args) => run_bounds(args, strict),
        Command::Scaling(args) => run_scaling(args, strict),
        Command::EstimateParams(args) => run_estimate(args, strict),
        Command::Net(args) => run_net(args, strict),
        Command::Train(args) => run_train(args, strict),
        Command::VerifyNorm(args) => run_verify_norm(args, strict),
        Command::VerifyGen(args) => run_verify_gen(args, strict),
        Command::LambdaDecay(args) => run_lambda(args, strict),
        Command::Counterexample(args) => run_counterexample(args, strict),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::StrictViolation(msg)) => {
            eprintln!("strict: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
