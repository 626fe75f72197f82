//! Probit Gaussian process classification on top of the orthant estimator.
//!
//! With labels folded into the covariance, the marginal likelihood is the
//! positive-orthant probability of `C'(I + Σ)C'` and the class +1 posterior of
//! a test pattern is the acceptance rate of one more conditional dimension
//! appended to the training particles.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{build_covariance, kernel_matrix, training_fingerprint, CovarianceBundle, Dataset, KernelSpec};
use crate::linalg::VARIANCE_FLOOR;
use crate::orthant::{dot, run_pass, EstimateReport, EstimatorConfig, OrthantProblem, ParticleEnsemble};
use crate::rng::{StreamKey, BLOCK_ROWS};

/// Order in which training patterns enter the sequential estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderingMode {
    /// Alternate class +1 and class -1 patterns, leftovers appended.
    #[default]
    Interleave,
    SeededShuffle,
    AsGiven,
}

/// Diagonal of `C'` after reordering, with the permutation that produced it:
/// position `k` of the reordered set holds original pattern `permutation[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSigns {
    pub signs: Vec<i8>,
    pub permutation: Vec<usize>,
}

pub fn reorder(train: &Dataset, mode: OrderingMode, seed: u64) -> (Dataset, LabelSigns) {
    let n = train.len();
    let permutation: Vec<usize> = match mode {
        OrderingMode::AsGiven => (0..n).collect(),
        OrderingMode::SeededShuffle => {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut StreamKey::new(seed, 0).shuffle());
            p
        }
        OrderingMode::Interleave => {
            let labels = train.labels();
            let pos: Vec<usize> = (0..n).filter(|&i| labels[i] > 0).collect();
            let neg: Vec<usize> = (0..n).filter(|&i| labels[i] < 0).collect();
            let mut p = Vec::with_capacity(n);
            for k in 0..pos.len().max(neg.len()) {
                p.extend(pos.get(k));
                p.extend(neg.get(k));
            }
            p
        }
    };
    let ordered = train.permuted(&permutation);
    let signs = ordered.labels().to_vec();
    (ordered, LabelSigns { signs, permutation })
}

/// `C'(I + Σ)C'`.
pub fn training_covariance(sigma: &DMatrix<f64>, signs: &[i8]) -> DMatrix<f64> {
    let n = sigma.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let s = f64::from(signs[i] * signs[j]);
        s * (sigma[(i, j)] + if i == j { 1.0 } else { 0.0 })
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Estimated class +1 probability, `accepted / samples`.
    pub posterior: f64,
    pub predicted_class: i8,
    pub test_cond_var: f64,
    pub accepted: usize,
    pub samples: usize,
}

impl Prediction {
    /// Binomial standard error of the posterior.
    pub fn std_error(&self) -> f64 {
        (self.posterior * (1.0 - self.posterior) / self.samples as f64).sqrt()
    }
}

/// A fitted classifier. Immutable; predictions only read it.
#[derive(Debug, Clone)]
pub struct GpcModel {
    r_train: DMatrix<f64>,
    q_final: DMatrix<f64>,
    particles: ParticleEnsemble,
    report: EstimateReport,
    kernel: KernelSpec,
    ordering: LabelSigns,
    train: Dataset,
    fingerprint: u64,
    cfg: EstimatorConfig,
}

impl GpcModel {
    pub fn fit(train: &Dataset, kernel: KernelSpec, cfg: &EstimatorConfig, mode: OrderingMode) -> Result<Self> {
        cfg.validate()?;
        kernel.validate()?;
        if train.is_empty() {
            return Err(Error::invalid("training set is empty"));
        }
        let (ordered, ordering) = reorder(train, mode, cfg.seed);
        let sigma = kernel_matrix(&kernel, ordered.features());
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("training covariance has non-finite entries"));
        }
        let r_train = training_covariance(&sigma, &ordering.signs);
        let problem = OrthantProblem::positive(r_train.clone())?;
        let outcome = run_pass(&problem, cfg.samples_per_dim, StreamKey::new(cfg.seed, 0))?;
        if let Some(dim) = outcome.report.failed_dim {
            return Err(Error::DimensionFailure {
                dim,
                samples: cfg.samples_per_dim,
            });
        }
        let q_final = outcome.moments.extended_inverse();
        let fingerprint = training_fingerprint(&kernel, ordered.features());
        Ok(Self {
            r_train,
            q_final,
            particles: outcome.ensemble,
            report: outcome.report,
            kernel,
            ordering,
            train: ordered,
            fingerprint,
            cfg: *cfg,
        })
    }

    pub fn log_marginal(&self) -> f64 {
        self.report.log_integral
    }

    pub fn per_dim_p(&self) -> &[f64] {
        &self.report.per_dim_accept
    }

    pub fn report(&self) -> &EstimateReport {
        &self.report
    }

    pub fn r_train(&self) -> &DMatrix<f64> {
        &self.r_train
    }

    /// Inverse of `r_train` assembled by the conditioning recursion.
    pub fn q_final(&self) -> &DMatrix<f64> {
        &self.q_final
    }

    pub fn particles(&self) -> &ParticleEnsemble {
        &self.particles
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn ordering(&self) -> &LabelSigns {
        &self.ordering
    }

    /// Training set in the order used by the fit.
    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    /// Covariance blocks for `test_features` against the ordered training set.
    pub fn test_covariance(&self, test_features: &DMatrix<f64>) -> Result<CovarianceBundle> {
        build_covariance(&self.kernel, &self.train, test_features)
    }

    pub fn predict(&self, bundle: &CovarianceBundle, test_index: usize) -> Result<Prediction> {
        if bundle.fingerprint != self.fingerprint || bundle.n_train() != self.train.len() {
            return Err(Error::Contract(
                "covariance bundle was not built from this model's ordered training set and kernel".into(),
            ));
        }
        if test_index >= bundle.n_test() {
            return Err(Error::invalid(format!(
                "test index {test_index} out of range for {} test patterns",
                bundle.n_test()
            )));
        }
        let signs = &self.ordering.signs;
        let r = DVector::from_fn(signs.len(), |i, _| f64::from(signs[i]) * bundle.cross[(i, test_index)]);
        let b = &self.q_final * &r;
        let diag = 1.0 + bundle.test[(test_index, test_index)];
        let var = diag - r.dot(&b);
        if !(var > VARIANCE_FLOOR * diag) || !var.is_finite() {
            return Err(Error::degenerate(
                Some(self.train.len()),
                format!("test conditional variance {var:e} is not above the floor"),
            ));
        }
        let sd = var.sqrt();
        let samples = self.particles.rows();
        let key = StreamKey::new(self.cfg.seed, 0);
        let b = b.as_slice();
        let accepted: usize = (0..samples.div_ceil(BLOCK_ROWS))
            .into_par_iter()
            .map(|block| {
                let mut rng = key.prediction(test_index, block);
                let end = samples.min((block + 1) * BLOCK_ROWS);
                (block * BLOCK_ROWS..end)
                    .filter(|&m| {
                        let z: f64 = rng.sample(StandardNormal);
                        dot(b, self.particles.row(m)) + sd * z >= 0.0
                    })
                    .count()
            })
            .sum();
        let posterior = accepted as f64 / samples as f64;
        Ok(Prediction {
            posterior,
            predicted_class: if posterior >= 0.5 { 1 } else { -1 },
            test_cond_var: var,
            accepted,
            samples,
        })
    }

    pub fn predict_all(&self, bundle: &CovarianceBundle) -> Result<Vec<Prediction>> {
        (0..bundle.n_test()).map(|t| self.predict(bundle, t)).collect()
    }
}

pub fn fit(train: &Dataset, kernel: KernelSpec, cfg: &EstimatorConfig, mode: OrderingMode) -> Result<GpcModel> {
    GpcModel::fit(train, kernel, cfg, mode)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneEntry {
    pub spec: KernelSpec,
    /// `-inf` when the fit failed.
    pub log_marginal: f64,
    pub failure: Option<String>,
    pub grid_index: usize,
}

/// Fits every grid entry and ranks by log marginal likelihood, best first.
/// Ties keep grid order; failed fits go last.
pub fn tune(train: &Dataset, grid: &[KernelSpec], cfg: &EstimatorConfig, mode: OrderingMode) -> Result<Vec<TuneEntry>> {
    if grid.is_empty() {
        return Err(Error::invalid("hyperparameter grid is empty"));
    }
    cfg.validate()?;
    let entries: Vec<TuneEntry> = grid
        .iter()
        .enumerate()
        .map(|(grid_index, &spec)| match GpcModel::fit(train, spec, cfg, mode) {
            Ok(model) => TuneEntry {
                spec,
                log_marginal: model.log_marginal(),
                failure: None,
                grid_index,
            },
            Err(e) => TuneEntry {
                spec,
                log_marginal: f64::NEG_INFINITY,
                failure: Some(e.to_string()),
                grid_index,
            },
        })
        .collect();
    if entries.iter().all(|e| e.failure.is_some()) {
        return Err(Error::AllFitsFailed(entries.len()));
    }
    Ok(rank(entries))
}

fn rank(mut entries: Vec<TuneEntry>) -> Vec<TuneEntry> {
    entries.sort_by(|a, b| {
        a.failure
            .is_some()
            .cmp(&b.failure.is_some())
            .then_with(|| b.log_marginal.total_cmp(&a.log_marginal))
            .then_with(|| a.grid_index.cmp(&b.grid_index))
    });
    entries
}
