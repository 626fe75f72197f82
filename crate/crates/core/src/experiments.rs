//! Reproduction of the rank-one orthant benchmark and the one-feature
//! linear-kernel classification benchmark, with CSV table output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gpc::{GpcModel, OrderingMode};
use crate::kernels::{Dataset, KernelSpec};
use crate::oracles::{linear_kernel_posteriors_1d, orthant_rank_one, QuadratureConfig, RankOneCovarianceSpec};
use crate::orthant::{estimate_log_orthant, EstimatorConfig, OrthantProblem};
use crate::rng::{derive_seed, StreamKey};

/// Monte Carlo sample counts of the full-scale tables.
pub const FULL_M_VALUES: [usize; 6] = [3_000_000, 1_000_000, 300_000, 100_000, 30_000, 10_000];

/// Two Gaussian classes on one feature. Class +1 gets `⌈n/2⌉` patterns of
/// each set and class -1 the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticProblemSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub class_means: [f64; 2],
    pub class_stds: [f64; 2],
    pub seed: u64,
}

impl SyntheticProblemSpec {
    /// Problems 1 to 4 of the classification benchmark.
    pub fn preset(index: usize, seed: u64) -> Result<Self> {
        let (n_train, n_test, means, stds) = match index {
            1 => (100, 50, [0.0, 1.0], [0.2, 0.3]),
            2 => (200, 100, [0.0, 1.0], [2.0, 1.0]),
            3 => (400, 200, [0.0, 1.5], [0.5, 0.75]),
            4 => (800, 400, [0.0, 1.0], [1.0, 0.75]),
            _ => return Err(Error::invalid(format!("no preset problem {index}; choose 1 to 4"))),
        };
        Ok(Self {
            n_train,
            n_test,
            class_means: means,
            class_stds: stds,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 {
            return Err(Error::invalid("synthetic problem needs training patterns"));
        }
        if self.class_stds.iter().any(|s| !(*s > 0.0 && s.is_finite()))
            || self.class_means.iter().any(|m| !m.is_finite())
        {
            return Err(Error::invalid(
                "class means must be finite and class deviations positive",
            ));
        }
        Ok(())
    }

    /// Training set and test set (with their true labels).
    pub fn generate(&self) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        let key = StreamKey::new(self.seed, 0);
        let train = self.sample(self.n_train, &mut key.data(0))?;
        let test = self.sample(self.n_test, &mut key.data(1))?;
        Ok((train, test))
    }

    fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        let first = n.div_ceil(2);
        let class =
            |c: usize| Normal::new(self.class_means[c], self.class_stds[c]).map_err(|e| Error::invalid(e.to_string()));
        let (c1, c2) = (class(0)?, class(1)?);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            if i < first {
                x.push(c1.sample(rng));
                y.push(1);
            } else {
                x.push(c2.sample(rng));
                y.push(-1);
            }
        }
        if n == 0 {
            return Dataset::new(DMatrix::zeros(0, 1), y);
        }
        Dataset::from_column(&x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    MapeLogIntegral,
    MaePosterior,
    MapeLogMarginal,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::MapeLogIntegral => "mape_log_integral",
            Metric::MaePosterior => "mae_posterior",
            Metric::MapeLogMarginal => "mape_log_marginal",
        }
    }
}

/// Mean of per-run errors with its standard error (sample deviation over
/// `√runs`). MAPE values are in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metric: Metric,
    pub value: f64,
    pub std_error: f64,
    pub runs: usize,
    pub per_run: Vec<f64>,
    /// Runs that ended in a dimension failure; they carry no value.
    pub failures: usize,
}

impl MetricReport {
    pub fn from_runs(metric: Metric, per_run: Vec<f64>, failures: usize) -> Self {
        let runs = per_run.len();
        let value = if runs == 0 {
            f64::NAN
        } else {
            per_run.iter().sum::<f64>() / runs as f64
        };
        let std_error = if runs < 2 {
            0.0
        } else {
            let ss: f64 = per_run.iter().map(|v| (v - value) * (v - value)).sum();
            (ss / (runs - 1) as f64).sqrt() / (runs as f64).sqrt()
        };
        Self {
            metric,
            value,
            std_error,
            runs,
            per_run,
            failures,
        }
    }
}

pub fn absolute_percentage_error(truth: f64, estimate: f64) -> f64 {
    100.0 * (truth - estimate).abs() / truth.abs()
}

/// One table cell: a dimension (or problem number) crossed with a sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: usize,
    pub samples: usize,
    pub report: MetricReport,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment1Config {
    pub dims: Vec<usize>,
    pub m_values: Vec<usize>,
    pub problems_per_cell: usize,
    pub seed: u64,
    pub quadrature: QuadratureConfig,
}

impl Experiment1Config {
    pub fn full(seed: u64) -> Self {
        Self {
            dims: vec![50, 200, 500],
            m_values: FULL_M_VALUES.to_vec(),
            problems_per_cell: 50,
            seed,
            quadrature: QuadratureConfig::default(),
        }
    }

    pub fn desk_scale(seed: u64) -> Self {
        Self {
            dims: vec![50],
            m_values: vec![100_000, 10_000],
            problems_per_cell: 50,
            seed,
            quadrature: QuadratureConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.m_values.is_empty() || self.problems_per_cell == 0 {
            return Err(Error::invalid(
                "experiment needs dimensions, sample counts and at least one problem",
            ));
        }
        if self.dims.contains(&0) {
            return Err(Error::invalid("dimension must be positive"));
        }
        for &m in &self.m_values {
            EstimatorConfig::new(m, 0).validate()?;
        }
        self.quadrature.validate()
    }
}

/// Rank-one vector of problem `index` in dimension `n`, entries uniform on
/// (-1, 1).
pub fn rank_one_problem(seed: u64, n: usize, index: usize) -> RankOneCovarianceSpec {
    let mut rng = StreamKey::new(derive_seed(seed, n as u64), index as u64).data(2);
    let d = (0..n)
        .map(|_| loop {
            let v: f64 = rng.random_range(-1.0..1.0);
            if v.abs() < 1.0 {
                break v;
            }
        })
        .collect();
    RankOneCovarianceSpec::new(d).expect("entries drawn inside (-1, 1)")
}

fn cell_seed(seed: u64, key: usize, m: usize, run: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(seed, key as u64), m as u64), run as u64)
}

/// Estimator against the rank-one quadrature oracle: one cell per
/// `(N, M)`, MAPE of the log integral over the problems of the cell.
pub fn run_experiment1(cfg: &Experiment1Config) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &n in &cfg.dims {
        let problems: Vec<RankOneCovarianceSpec> = (0..cfg.problems_per_cell)
            .map(|k| rank_one_problem(cfg.seed, n, k))
            .collect();
        let truths = problems
            .iter()
            .map(|p| orthant_rank_one(p, &cfg.quadrature))
            .collect::<Result<Vec<f64>>>()?;
        for &m in &cfg.m_values {
            let start = Instant::now();
            let mut errors = Vec::with_capacity(problems.len());
            let mut failures = 0;
            for (k, (spec, &truth)) in problems.iter().zip(&truths).enumerate() {
                let problem = OrthantProblem::positive(spec.covariance())?;
                let report = estimate_log_orthant(&problem, &EstimatorConfig::new(m, cell_seed(cfg.seed, n, m, k)))?;
                if report.is_failed() {
                    failures += 1;
                } else {
                    errors.push(absolute_percentage_error(truth, report.log_integral));
                }
            }
            cells.push(CellResult {
                key: n,
                samples: m,
                report: MetricReport::from_runs(Metric::MapeLogIntegral, errors, failures),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment2Config {
    /// Problem number (as used in table keys) with its specification.
    pub problems: Vec<(usize, SyntheticProblemSpec)>,
    pub m_values: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub quadrature: QuadratureConfig,
}

impl Experiment2Config {
    pub fn full(seed: u64) -> Self {
        Self {
            problems: (1..=4)
                .map(|k| {
                    (
                        k,
                        SyntheticProblemSpec::preset(k, derive_seed(seed, 100 + k as u64)).unwrap(),
                    )
                })
                .collect(),
            m_values: FULL_M_VALUES.to_vec(),
            runs: 20,
            seed,
            quadrature: QuadratureConfig::default(),
        }
    }

    pub fn desk_scale(seed: u64) -> Self {
        Self {
            problems: vec![(1, SyntheticProblemSpec::preset(1, derive_seed(seed, 101)).unwrap())],
            m_values: vec![100_000, 10_000],
            ..Self::full(seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.problems.is_empty() || self.m_values.is_empty() || self.runs == 0 {
            return Err(Error::invalid(
                "experiment needs problems, sample counts and at least one run",
            ));
        }
        for (_, p) in &self.problems {
            p.validate()?;
        }
        for &m in &self.m_values {
            EstimatorConfig::new(m, 0).validate()?;
        }
        self.quadrature.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment2Tables {
    pub posterior_mae: Vec<CellResult>,
    pub log_marginal_mape: Vec<CellResult>,
}

/// Linear-kernel classifier against the one-feature quadrature oracle. Each
/// problem's data set is drawn once; runs differ in the Monte Carlo seed.
pub fn run_experiment2(cfg: &Experiment2Config) -> Result<Experiment2Tables> {
    cfg.validate()?;
    let mut tables = Experiment2Tables {
        posterior_mae: Vec::new(),
        log_marginal_mape: Vec::new(),
    };
    for &(key, spec) in &cfg.problems {
        let (train, test) = spec.generate()?;
        let x_train: Vec<f64> = train.features().column(0).iter().copied().collect();
        let x_test: Vec<f64> = test.features().column(0).iter().copied().collect();
        let oracle = linear_kernel_posteriors_1d(&x_train, train.labels(), &x_test, &cfg.quadrature)?;
        for &m in &cfg.m_values {
            let start = Instant::now();
            let (mut mae, mut mape, mut failures) = (Vec::new(), Vec::new(), 0);
            for run in 0..cfg.runs {
                let est = EstimatorConfig::new(m, cell_seed(cfg.seed, key, m, run));
                let model = match GpcModel::fit(&train, KernelSpec::linear(), &est, OrderingMode::Interleave) {
                    Ok(model) => model,
                    Err(Error::DimensionFailure { .. }) => {
                        failures += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let bundle = model.test_covariance(test.features())?;
                let predictions = model.predict_all(&bundle)?;
                let abs: f64 = predictions
                    .iter()
                    .zip(&oracle.posteriors)
                    .map(|(p, truth)| (p.posterior - truth).abs())
                    .sum();
                mae.push(if x_test.is_empty() {
                    0.0
                } else {
                    abs / x_test.len() as f64
                });
                mape.push(absolute_percentage_error(oracle.log_marginal, model.log_marginal()));
            }
            let seconds = start.elapsed().as_secs_f64();
            tables.posterior_mae.push(CellResult {
                key,
                samples: m,
                report: MetricReport::from_runs(Metric::MaePosterior, mae, failures),
                seconds,
            });
            tables.log_marginal_mape.push(CellResult {
                key,
                samples: m,
                report: MetricReport::from_runs(Metric::MapeLogMarginal, mape, failures),
                seconds,
            });
        }
    }
    Ok(tables)
}

/// Metric table: `key_column, samples, metric, value, std_error, runs, failures`,
/// reals in shortest round-trip scientific notation. Timing is kept out of it
/// so that reruns compare byte for byte.
pub fn write_table(path: &Path, key_column: &str, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        key_column,
        "samples",
        "metric",
        "value",
        "std_error",
        "runs",
        "failures",
    ])?;
    for c in cells {
        w.write_record([
            c.key.to_string(),
            c.samples.to_string(),
            c.report.metric.name().to_string(),
            format!("{:e}", c.report.value),
            format!("{:e}", c.report.std_error),
            c.report.runs.to_string(),
            c.report.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock seconds per cell, written next to the metric table.
pub fn write_timing(path: &Path, key_column: &str, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([key_column, "samples", "metric", "seconds"])?;
    for c in cells {
        w.write_record([
            c.key.to_string(),
            c.samples.to_string(),
            c.report.metric.name().to_string(),
            format!("{:e}", c.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes `exp1.csv` and `exp1_timing.csv`; returns the table path.
pub fn write_experiment1(dir: &Path, cells: &[CellResult]) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let table = dir.join("exp1.csv");
    write_table(&table, "dimension", cells)?;
    write_timing(&dir.join("exp1_timing.csv"), "dimension", cells)?;
    Ok(table)
}

/// Writes `exp2_mae.csv`, `exp2_mape.csv` and `exp2_timing.csv`; returns the
/// two table paths.
pub fn write_experiment2(dir: &Path, tables: &Experiment2Tables) -> Result<(PathBuf, PathBuf)> {
    ensure_dir(dir)?;
    let mae = dir.join("exp2_mae.csv");
    let mape = dir.join("exp2_mape.csv");
    write_table(&mae, "problem", &tables.posterior_mae)?;
    write_table(&mape, "problem", &tables.log_marginal_mape)?;
    let timing: Vec<CellResult> = tables
        .posterior_mae
        .iter()
        .chain(&tables.log_marginal_mape)
        .cloned()
        .collect();
    write_timing(&dir.join("exp2_timing.csv"), "problem", &timing)?;
    Ok((mae, mape))
}
