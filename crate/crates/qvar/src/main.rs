use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qvar::config::{Format, Overrides, StudyConfig, OUT_DIR_ENV};
use qvar::io::{self, EstimateOutput, McLevel, MomentLevel, RealizedOutput};
use qvar::parallel::sample_v;
use qvar::spec::{parse_kernel, parse_levels, parse_scheme, PartitionSpec};
use qvar::study::{self, render, write_all};
use qvar::{AppError, AppResult};
use qvar_core::estimators::{hurst_estimate, realized_stat};
use qvar_core::kernels::KernelSpec;
use qvar_core::montecarlo::{empirical_stats, factorize, sample_path, DEFAULT_JITTER};
use qvar_core::partitions::Partition;
use qvar_core::schemes::{build_gamma, DifferenceScheme};
use qvar_core::spectral::norms_and_moments;
use qvar_core::CovMatrix;

#[derive(Parser)]
#[command(name = "qvar", version, about = "Quadratic variations of Gaussian processes: covariance matrices, limit conditions, Monte Carlo and Hurst estimation")]
#[command(after_help = "Kernels:    bm | fbm:H | subfbm:H | bifbm:H:K | tab:<file>
Schemes:    first | first:phi=one | first:phi=pow:<g> | first:phi=auto | first:phi=tab:<file>
            begyn2 | gen-a:<a0,a1,...>[:<step>]
Partitions: uniform[:n] | perturbed[:n]:<cap>:<seed> | file:<file>
Levels:     4,16,64 | 2^6..2^12

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the covariance matrix of the differenced vector.
    Gamma(ModelArgs),
    /// Norms and moments of the quadratic variation.
    Moments(ModelArgs),
    /// Condition report over a schedule of levels.
    Check(ScheduleArgs),
    /// Monte Carlo sample of the quadratic variation at one partition.
    Mc(McArgs),
    /// Full study from a config file; flags override the file.
    Study(StudyArgs),
    /// Realized variation and Hurst estimate of an observed path.
    Estimate(EstimateArgs),
    /// Simulate one path of a kernel along a partition (time,value CSV).
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long, default_value = "first:phi=auto")]
    scheme: String,
    #[arg(long)]
    partition: String,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long, default_value = "first:phi=auto")]
    scheme: String,
    #[arg(long, default_value = "uniform")]
    partition: String,
    #[arg(long)]
    levels: String,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 10_000)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the raw replicate values to this CSV file.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct StudyArgs {
    /// TOML study configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Restrict the condition table to one format.
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Observed path, CSV with header `time,value`.
    #[arg(long)]
    path: PathBuf,
    #[arg(long, default_value = "first")]
    scheme: String,
    /// Dyadic or explicit levels for the Hurst regression.
    #[arg(long)]
    levels: Option<String>,
    /// Partition for the realized variation (defaults to the path's own times).
    #[arg(long)]
    partition: Option<String>,
    /// Exponent of the realized variation.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Kernel for schemes normalized by exact variances.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long)]
    partition: String,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cwd() -> &'static Path {
    Path::new("")
}

fn emit(out: Option<&Path>, text: &str) -> AppResult<()> {
    match out {
        Some(path) => io::write_file(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn model(kernel: &str, scheme: &str, partition: &str, horizon: f64, n: Option<usize>) -> AppResult<(KernelSpec, DifferenceScheme, Partition)> {
    let kernel = parse_kernel(kernel, horizon, cwd())?;
    let scheme = parse_scheme(scheme, Some(&kernel), cwd())?;
    let partition = PartitionSpec::parse(partition, cwd())?.build(n, kernel.horizon())?;
    Ok((kernel, scheme, partition))
}

fn gamma_of(a: &ModelArgs) -> AppResult<(CovMatrix, usize)> {
    let (kernel, scheme, p) = model(&a.kernel, &a.scheme, &a.partition, a.horizon, None)?;
    let n = p.steps();
    let g = build_gamma(&scheme, &p, &kernel).map_err(AppError::at_level(n))?;
    Ok((g, n))
}

fn cmd_gamma(a: &ModelArgs) -> AppResult<()> {
    let (g, _) = gamma_of(a)?;
    let text = match a.format {
        OutFormat::Csv => io::matrix_csv(&g),
        OutFormat::Json => io::matrix_json(&g),
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_moments(a: &ModelArgs) -> AppResult<()> {
    let (g, n) = gamma_of(a)?;
    let (norms, m) = norms_and_moments(&g).map_err(AppError::at_level(n))?;
    let level = MomentLevel::new(n, &norms, &m);
    let text = match a.format {
        OutFormat::Json => io::pretty(&level),
        OutFormat::Csv => format!(
            "n,trace,frobenius,spectral,one_norm,var_vn,fourth_central,kurtosis_excess,lambda_star\n{},{},{},{},{},{},{},{},{}\n",
            level.n,
            level.trace,
            level.frobenius,
            level.spectral,
            level.one_norm,
            level.var_vn,
            level.fourth_central,
            level.kurtosis_excess,
            level.lambda_star
        ),
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_check(a: &ScheduleArgs) -> AppResult<()> {
    let mut cfg = StudyConfig::from_overrides(&Overrides {
        kernel: Some(a.kernel.clone()),
        scheme: Some(a.scheme.clone()),
        partition: Some(a.partition.clone()),
        levels: Some(a.levels.clone()),
        horizon: Some(a.horizon),
        ..Default::default()
    })?;
    cfg.base_dir = cwd().to_path_buf();
    let result = study::compute(&cfg, None)?;
    let text = match a.format {
        OutFormat::Csv => io::conditions_csv(&result.conditions),
        OutFormat::Json => io::pretty(&serde_json::json!({
            "conditions": result.conditions,
            "summary": result.summary,
        })),
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_mc(a: &McArgs) -> AppResult<()> {
    if a.replicates < 2 {
        return Err(AppError::config("--replicates must be at least 2"));
    }
    let (g, n) = gamma_of(&a.model)?;
    let (_, m) = norms_and_moments(&g).map_err(AppError::at_level(n))?;
    let factor = factorize(&g, DEFAULT_JITTER).map_err(AppError::at_level(n))?;
    let vs = sample_v(&factor, a.seed, a.replicates, a.threads)?;
    if let Some(dump) = &a.dump {
        io::write_file(dump, io::replicates_csv(&vs).as_bytes())?;
    }
    let (center, scale) = (m.mean_vn, m.var_vn.sqrt());
    let result = empirical_stats(&vs, center, scale).map_err(AppError::at_level(n))?;
    emit(a.model.out.as_deref(), &io::pretty(&McLevel { n, seed: a.seed, center, scale, result }))
}

fn cmd_study(a: &StudyArgs) -> AppResult<()> {
    let overrides = Overrides {
        kernel: a.kernel.clone(),
        horizon: a.horizon,
        scheme: a.scheme.clone(),
        partition: a.partition.clone(),
        levels: a.levels.clone(),
        replicates: a.replicates,
        seed: a.seed,
        out: a.out.clone(),
        formats: a.format.map(|f| {
            vec![match f {
                OutFormat::Csv => Format::Csv,
                OutFormat::Json => Format::Json,
            }]
        }),
    };
    let cfg = match &a.config {
        Some(path) => {
            let mut cfg = StudyConfig::load(path)?;
            cfg.apply(&overrides);
            cfg
        }
        None => StudyConfig::from_overrides(&overrides)?,
    };
    let result = study::compute(&cfg, a.threads)?;
    let files = render(&cfg, &result);
    for path in write_all(&cfg.out_dir(), &files)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_estimate(a: &EstimateArgs) -> AppResult<()> {
    let path = io::read_path(&a.path)?;
    let kernel = a.kernel.as_deref().map(|k| parse_kernel(k, path.horizon(), cwd())).transpose()?;
    let scheme = parse_scheme(&a.scheme, kernel.as_ref(), cwd())?;
    let partition = match &a.partition {
        Some(spec) => PartitionSpec::parse(spec, cwd())?.build(None, path.horizon())?,
        None => Partition::from_points(path.times().to_vec()).map_err(|e| AppError::config(e.to_string()))?,
    };
    let value = realized_stat(&path, &scheme, &partition, a.alpha, kernel.as_ref())?;
    let estimate = match &a.levels {
        Some(levels) => Some(hurst_estimate(&path, &parse_levels(levels)?, &scheme)?),
        None => None,
    };
    let report = EstimateOutput {
        observations: path.len(),
        realized: Some(RealizedOutput { alpha: a.alpha, steps: partition.steps(), value }),
        estimate,
    };
    emit(a.out.as_deref(), &io::pretty(&report))
}

fn cmd_simulate(a: &SimulateArgs) -> AppResult<()> {
    let (kernel, _, p) = model(&a.kernel, "first", &a.partition, a.horizon, None)?;
    let path = sample_path(&kernel, &p, a.seed).map_err(AppError::at_level(p.steps()))?;
    emit(a.out.as_deref(), &io::path_csv(&path))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gamma(a) => cmd_gamma(a),
        Command::Moments(a) => cmd_moments(a),
        Command::Check(a) => cmd_check(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Study(a) => cmd_study(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qvar: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
