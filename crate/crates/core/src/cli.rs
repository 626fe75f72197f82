//! `gpc-mc` command line: orthant estimation, classification, tuning and
//! experiment tables.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::experiments::{
    rank_one_problem, run_experiment1, run_experiment2, write_experiment1, write_experiment2, Experiment1Config,
    Experiment2Config,
};
use crate::gpc::{tune, GpcModel, OrderingMode};
use crate::kernels::{Dataset, KernelSpec};
use crate::oracles::{
    brute_force_orthant, dense_orthant_quadrature, linear_kernel_posteriors_1d, orthant_rank_one, recover_rank_one,
    QuadratureConfig, BRUTE_FORCE_SAMPLES,
};
use crate::orthant::{chunked_estimate, EstimatorConfig, OrthantProblem, Region};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "gpc-mc",
    version,
    about = "Gaussian orthant probabilities and probit GP classification by sequential Monte Carlo"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the log orthant probability of a covariance matrix.
    Orthant(OrthantArgs),
    /// Write a random rank-one structured covariance matrix.
    MakeRankone(MakeRankOneArgs),
    /// Fit on a training CSV and predict class +1 posteriors for a test CSV.
    FitPredict(FitPredictArgs),
    /// Rank an (alpha, beta) grid of RBF kernels by log marginal likelihood.
    Tune(TuneArgs),
    /// Reproduce a benchmark table.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct OrthantArgs {
    /// Comma-separated square matrix, one row per line, no header.
    #[arg(long)]
    covariance: PathBuf,
    /// One character per dimension: `+` for v ≥ 0, `*` for unconstrained.
    /// Defaults to all `+`.
    #[arg(long)]
    region: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    /// Split each replicate into passes of at most this many samples.
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Also evaluate an exact or brute-force reference value.
    #[arg(long)]
    oracle: bool,
    /// Write a one-row summary CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MakeRankOneArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelArg {
    Rbf,
    Linear,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrderingArg {
    Interleave,
    Shuffle,
    AsGiven,
}

impl From<OrderingArg> for OrderingMode {
    fn from(o: OrderingArg) -> Self {
        match o {
            OrderingArg::Interleave => OrderingMode::Interleave,
            OrderingArg::Shuffle => OrderingMode::SeededShuffle,
            OrderingArg::AsGiven => OrderingMode::AsGiven,
        }
    }
}

#[derive(Debug, Args)]
struct FitPredictArgs {
    /// Header row, feature columns, final `label` column of ±1.
    #[arg(long)]
    train: PathBuf,
    /// Header row and feature columns only.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value_t = KernelArg::Rbf)]
    kernel: KernelArg,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OrderingArg::Interleave)]
    ordering: OrderingArg,
    /// Predictions CSV.
    #[arg(long)]
    out: PathBuf,
    /// Single-feature linear kernel only: append quadrature posteriors.
    #[arg(long)]
    oracle: bool,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    betas: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OrderingArg::Interleave)]
    ordering: OrderingArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentName {
    Exp1,
    Exp2,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    /// Reduced cell counts and sample sizes.
    #[arg(long)]
    desk_scale: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Override the list of samples per dimension.
    #[arg(long, value_delimiter = ',')]
    samples: Option<Vec<usize>>,
    /// Override problems per cell (exp1) or runs per cell (exp2).
    #[arg(long)]
    repeats: Option<usize>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Contract(_) | Error::Io(_) | Error::Csv(_) => EXIT_INPUT,
        Error::DegenerateCovariance { .. }
        | Error::EmptyEnsemble
        | Error::DimensionFailure { .. }
        | Error::AllFitsFailed(_) => EXIT_NUMERICAL,
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_INPUT;
        }
        builder = builder.num_threads(k);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_INPUT;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Orthant(a) => cmd_orthant(a),
        Command::MakeRankone(a) => cmd_make_rankone(a),
        Command::FitPredict(a) => cmd_fit_predict(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

fn parse_real(field: &str, what: impl Fn() -> String) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("{}: cannot parse {field:?} as a number", what())))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, f)| parse_real(f, || format!("{} row {} column {}", path.display(), i + 1, j + 1)))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::invalid(format!(
            "{} does not hold a non-empty square matrix",
            path.display()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn read_features(path: &Path, with_labels: bool) -> Result<(DMatrix<f64>, Vec<i8>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    if with_labels && headers.iter().next_back() != Some("label") {
        return Err(Error::invalid(format!(
            "{}: last column must be named `label`",
            path.display()
        )));
    }
    let width = headers.len() - usize::from(with_labels);
    if width == 0 {
        return Err(Error::invalid(format!("{}: no feature columns", path.display())));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        for j in 0..width {
            values.push(parse_real(&record[j], || format!("{} line {line}", path.display()))?);
        }
        if with_labels {
            let y = parse_real(&record[width], || format!("{} line {line}", path.display()))?;
            if y == 1.0 {
                labels.push(1);
            } else if y == -1.0 {
                labels.push(-1);
            } else {
                return Err(Error::invalid(format!(
                    "{} line {line}: label {y} is not -1 or +1",
                    path.display()
                )));
            }
        }
    }
    let rows = values.len() / width;
    Ok((DMatrix::from_row_slice(rows, width, &values), labels))
}

fn parse_region(spec: Option<&str>, n: usize) -> Result<Vec<Region>> {
    let Some(s) = spec else {
        return Ok(vec![Region::HalfLinePositive; n]);
    };
    let region = s
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ',')
        .map(|c| match c {
            '+' => Ok(Region::HalfLinePositive),
            '*' => Ok(Region::FullLine),
            _ => Err(Error::invalid(format!("region character {c:?} is not `+` or `*`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if region.len() != n {
        return Err(Error::invalid(format!(
            "region has {} entries for a {n}-dimensional covariance",
            region.len()
        )));
    }
    Ok(region)
}

struct OracleValue {
    method: &'static str,
    log_integral: f64,
    log_std_error: f64,
}

fn orthant_oracle(r: &DMatrix<f64>, region: &[Region], seed: u64) -> Result<OracleValue> {
    let all_positive = region.iter().all(|&g| g == Region::HalfLinePositive);
    if all_positive {
        if let Some(spec) = recover_rank_one(r, 1e-9) {
            return Ok(OracleValue {
                method: "rank_one_quadrature",
                log_integral: orthant_rank_one(&spec, &QuadratureConfig::default())?,
                log_std_error: 0.0,
            });
        }
    }
    match r.nrows() {
        0..=5 => Ok(OracleValue {
            method: "dense_quadrature",
            log_integral: dense_orthant_quadrature(r, region, 40)?.ln(),
            log_std_error: 0.0,
        }),
        6 => {
            let b = brute_force_orthant(r, region, BRUTE_FORCE_SAMPLES, seed)?;
            Ok(OracleValue {
                method: "brute_force",
                log_integral: b.probability.ln(),
                log_std_error: b.std_error / b.probability,
            })
        }
        n => Err(Error::invalid(format!(
            "no oracle for a {n}-dimensional covariance that is not rank-one structured"
        ))),
    }
}

fn cmd_orthant(a: OrthantArgs) -> Result<i32> {
    let r = read_matrix(&a.covariance)?;
    let region = parse_region(a.region.as_deref(), r.nrows())?;
    let cfg = EstimatorConfig::new(a.samples, a.seed)
        .with_replicates(a.replicates)
        .with_chunk_size(a.chunk_size.unwrap_or(a.samples));
    cfg.validate()?;
    let problem = OrthantProblem::new(r.clone(), region.clone())?;
    let oracle = if a.oracle {
        Some(orthant_oracle(&r, &region, a.seed)?)
    } else {
        None
    };
    let est = chunked_estimate(&problem, &cfg)?;

    let ok: Vec<_> = est.passes.iter().filter(|p| !p.is_failed()).collect();
    let mean = |f: &dyn Fn(&crate::orthant::EstimateReport) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|p| f(p)).sum::<f64>() / ok.len() as f64
        }
    };
    let bias = mean(&|p| p.bias_estimate);
    let variance = mean(&|p| p.variance_estimate);
    let accept: Vec<f64> = ok.iter().flat_map(|p| p.per_dim_accept.iter().copied()).collect();

    println!("dimension           {}", problem.dim());
    println!(
        "passes              {} x {} samples ({} failed)",
        est.passes.len(),
        est.samples_per_pass,
        est.failures
    );
    println!("log integral        {:.10e}", est.log_integral);
    println!("integral            {:.10e}", est.log_integral.exp());
    println!("plug-in std error   {:.4e}", est.plug_in_std_error);
    match est.log_std_error {
        Some(s) => println!("replicate std error {s:.4e}"),
        None => println!("replicate std error n/a (single pass)"),
    }
    println!("bias estimate       {bias:.4e}");
    println!("variance estimate   {variance:.4e}");
    if !accept.is_empty() {
        let min = accept.iter().copied().fold(f64::INFINITY, f64::min);
        let avg = accept.iter().sum::<f64>() / accept.len() as f64;
        println!("acceptance          min {min:.4} mean {avg:.4}");
    }
    if let Some(o) = &oracle {
        println!("oracle ({})  {:.10e}", o.method, o.log_integral);
        println!("difference          {:.4e}", est.log_integral - o.log_integral);
    }

    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![
            "log_integral",
            "log_std_error",
            "plug_in_std_error",
            "bias_estimate",
            "variance_estimate",
            "samples_per_pass",
            "passes",
            "failures",
        ];
        let mut row = vec![
            format!("{:e}", est.log_integral),
            est.log_std_error.map(|s| format!("{s:e}")).unwrap_or_default(),
            format!("{:e}", est.plug_in_std_error),
            format!("{bias:e}"),
            format!("{variance:e}"),
            est.samples_per_pass.to_string(),
            est.passes.len().to_string(),
            est.failures.to_string(),
        ];
        if let Some(o) = &oracle {
            header.extend(["oracle_method", "oracle_log_integral", "oracle_log_std_error"]);
            row.extend([
                o.method.to_string(),
                format!("{:e}", o.log_integral),
                format!("{:e}", o.log_std_error),
            ]);
        }
        w.write_record(&header)?;
        w.write_record(&row)?;
        w.flush()?;
    }

    if est.successes() == 0 {
        let dim = est.passes.iter().filter_map(|p| p.failed_dim).min().unwrap_or(0);
        eprintln!("error: every pass failed; first failure at dimension {dim}. Increase --samples.");
        return Ok(EXIT_NUMERICAL);
    }
    if est.failures > 0 {
        eprintln!(
            "warning: {} of {} passes failed and were excluded",
            est.failures,
            est.passes.len()
        );
    }
    Ok(EXIT_OK)
}

fn cmd_make_rankone(a: MakeRankOneArgs) -> Result<i32> {
    if a.dim == 0 {
        return Err(Error::invalid("--dim must be positive"));
    }
    let r = rank_one_problem(a.seed, a.dim, 0).covariance();
    let mut w = csv::Writer::from_path(&a.out)?;
    for i in 0..a.dim {
        w.write_record(r.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    println!("wrote {}x{} rank-one covariance to {}", a.dim, a.dim, a.out.display());
    Ok(EXIT_OK)
}

fn kernel_spec(kind: KernelArg, alpha: f64, beta: f64) -> Result<KernelSpec> {
    match kind {
        KernelArg::Rbf => KernelSpec::rbf(alpha, beta),
        KernelArg::Linear => Ok(KernelSpec::linear()),
    }
}

fn cmd_fit_predict(a: FitPredictArgs) -> Result<i32> {
    let (x, y) = read_features(&a.train, true)?;
    let train = Dataset::new(x, y)?;
    let (test, _) = read_features(&a.test, false)?;
    if test.ncols() != train.dim() {
        return Err(Error::invalid(format!(
            "test CSV has {} feature columns, training CSV {}",
            test.ncols(),
            train.dim()
        )));
    }
    let spec = kernel_spec(a.kernel, a.alpha, a.beta)?;
    if a.oracle && !(matches!(a.kernel, KernelArg::Linear) && train.dim() == 1) {
        return Err(Error::invalid("--oracle needs the linear kernel and a single feature"));
    }
    let cfg = EstimatorConfig::new(a.samples, a.seed);
    cfg.validate()?;
    let model = GpcModel::fit(&train, spec, &cfg, a.ordering.into())?;
    let bundle = model.test_covariance(&test)?;
    let predictions = model.predict_all(&bundle)?;

    let oracle = if a.oracle {
        let xs: Vec<f64> = train.features().column(0).iter().copied().collect();
        let xt: Vec<f64> = test.column(0).iter().copied().collect();
        Some(linear_kernel_posteriors_1d(
            &xs,
            train.labels(),
            &xt,
            &QuadratureConfig::default(),
        )?)
    } else {
        None
    };

    let mut w = csv::Writer::from_path(&a.out)?;
    let mut header = vec!["index", "posterior", "predicted_class"];
    if oracle.is_some() {
        header.push("oracle_posterior");
    }
    w.write_record(&header)?;
    for (t, p) in predictions.iter().enumerate() {
        let mut row = vec![
            t.to_string(),
            format!("{:e}", p.posterior),
            p.predicted_class.to_string(),
        ];
        if let Some(o) = &oracle {
            row.push(format!("{:e}", o.posteriors[t]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let n = train.len() as f64;
    println!("training patterns        {}", train.len());
    println!("test patterns            {}", predictions.len());
    println!("log marginal likelihood  {:.10e}", model.log_marginal());
    println!(
        "  per pattern            {:.6}  (-log 2 = {:.6})",
        model.log_marginal() / n,
        -(2f64.ln())
    );
    println!("  plug-in std error      {:.4e}", model.report().std_error());
    if let Some(o) = &oracle {
        let mae = if predictions.is_empty() {
            0.0
        } else {
            predictions
                .iter()
                .zip(&o.posteriors)
                .map(|(p, q)| (p.posterior - q).abs())
                .sum::<f64>()
                / predictions.len() as f64
        };
        println!("oracle log marginal      {:.10e}", o.log_marginal);
        println!("oracle posterior MAE     {mae:.6e}");
    }
    println!("predictions written to {}", a.out.display());
    Ok(EXIT_OK)
}

fn cmd_tune(a: TuneArgs) -> Result<i32> {
    let (x, y) = read_features(&a.train, true)?;
    let train = Dataset::new(x, y)?;
    let grid = a
        .alphas
        .iter()
        .flat_map(|&alpha| a.betas.iter().map(move |&beta| KernelSpec::rbf(alpha, beta)))
        .collect::<Result<Vec<_>>>()?;
    let cfg = EstimatorConfig::new(a.samples, a.seed);
    let ranked = tune(&train, &grid, &cfg, a.ordering.into())?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["rank", "alpha", "beta", "log_marginal", "status"])?;
    for (k, e) in ranked.iter().enumerate() {
        if let Some(reason) = &e.failure {
            eprintln!(
                "alpha = {}, beta = {}: log L = -inf ({reason})",
                e.spec.alpha, e.spec.beta
            );
        }
        w.write_record([
            (k + 1).to_string(),
            format!("{:e}", e.spec.alpha),
            format!("{:e}", e.spec.beta),
            format!("{:e}", e.log_marginal),
            if e.failure.is_some() { "failed" } else { "ok" }.to_string(),
        ])?;
    }
    w.flush()?;
    let best = &ranked[0];
    println!(
        "best of {}: alpha = {}, beta = {}, log L = {:.6e}",
        ranked.len(),
        best.spec.alpha,
        best.spec.beta,
        best.log_marginal
    );
    Ok(EXIT_OK)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<i32> {
    fs::create_dir_all(&a.out_dir)?;
    match a.name {
        ExperimentName::Exp1 => {
            let mut cfg = if a.desk_scale {
                Experiment1Config::desk_scale(a.seed)
            } else {
                Experiment1Config::full(a.seed)
            };
            if let Some(m) = a.samples {
                cfg.m_values = m;
            }
            if let Some(k) = a.repeats {
                cfg.problems_per_cell = k;
            }
            let cells = run_experiment1(&cfg)?;
            for c in &cells {
                println!(
                    "N = {:4}  M = {:8}  MAPE = {:.4}% ({:.4})  failures {}  {:.1}s",
                    c.key, c.samples, c.report.value, c.report.std_error, c.report.failures, c.seconds
                );
            }
            let path = write_experiment1(&a.out_dir, &cells)?;
            println!("table written to {}", path.display());
        }
        ExperimentName::Exp2 => {
            let mut cfg = if a.desk_scale {
                Experiment2Config::desk_scale(a.seed)
            } else {
                Experiment2Config::full(a.seed)
            };
            if let Some(m) = a.samples {
                cfg.m_values = m;
            }
            if let Some(k) = a.repeats {
                cfg.runs = k;
            }
            let tables = run_experiment2(&cfg)?;
            for (mae, mape) in tables.posterior_mae.iter().zip(&tables.log_marginal_mape) {
                println!(
                    "problem {}  M = {:8}  MAE = {:.5} ({:.5})  log-L MAPE = {:.4}% ({:.4})  {:.1}s",
                    mae.key,
                    mae.samples,
                    mae.report.value,
                    mae.report.std_error,
                    mape.report.value,
                    mape.report.std_error,
                    mae.seconds
                );
            }
            let (p1, p2) = write_experiment2(&a.out_dir, &tables)?;
            println!("tables written to {} and {}", p1.display(), p2.display());
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_parsing() {
        assert_eq!(parse_region(None, 2).unwrap(), vec![Region::HalfLinePositive; 2]);
        assert_eq!(
            parse_region(Some("+,*"), 2).unwrap(),
            vec![Region::HalfLinePositive, Region::FullLine]
        );
        assert!(parse_region(Some("+-"), 2).is_err());
        assert!(parse_region(Some("+++"), 2).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::invalid("x")), EXIT_INPUT);
        assert_eq!(
            exit_code(&Error::DimensionFailure { dim: 1, samples: 100 }),
            EXIT_NUMERICAL
        );
        assert_eq!(exit_code(&Error::AllFitsFailed(2)), EXIT_NUMERICAL);
        assert_eq!(run(["gpc-mc", "experiment", "exp9"]), EXIT_INPUT);
        assert_eq!(run(["gpc-mc", "--help"]), EXIT_OK);
    }

    #[test]
    fn matrix_and_feature_readers() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.csv");
        fs::write(&m, "1, 0.5\n0.5, 2\n").unwrap();
        assert_eq!(
            read_matrix(&m).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0])
        );
        fs::write(&m, "1,0\n0\n").unwrap();
        assert!(read_matrix(&m).is_err());

        let t = dir.path().join("t.csv");
        fs::write(&t, "x1,x2,label\n0.1,0.2,1\n0.3,0.4,-1\n").unwrap();
        let (x, y) = read_features(&t, true).unwrap();
        assert_eq!((x.nrows(), x.ncols()), (2, 2));
        assert_eq!(y, vec![1, -1]);
        fs::write(&t, "x1,label\n0.1,1\n0.3,0\n").unwrap();
        let err = read_features(&t, true).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        fs::write(&t, "x1\n").unwrap();
        assert_eq!(read_features(&t, false).unwrap().0.nrows(), 0);
    }
}
