//! Covariance construction from feature data.

use std::hash::{DefaultHasher, Hash, Hasher};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `β·exp(-‖x_i - x_j‖² / α²)`
    Rbf,
    /// `x_iᵀ x_j`
    Linear,
}

/// Kernel family plus hyperparameters. `alpha` is the length scale and `beta`
/// the latent function scale; both are ignored by the linear kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub alpha: f64,
    pub beta: f64,
}

impl KernelSpec {
    pub fn rbf(alpha: f64, beta: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::Rbf,
            alpha,
            beta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear() -> Self {
        Self {
            family: KernelFamily::Linear,
            alpha: f64::NAN,
            beta: f64::NAN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Rbf => {
                if !(self.alpha.is_finite() && self.alpha > 0.0) {
                    return Err(Error::invalid(format!(
                        "RBF alpha must be positive and finite, got {}",
                        self.alpha
                    )));
                }
                if !(self.beta.is_finite() && self.beta > 0.0) {
                    return Err(Error::invalid(format!(
                        "RBF beta must be positive and finite, got {}",
                        self.beta
                    )));
                }
                Ok(())
            }
            KernelFamily::Linear => Ok(()),
        }
    }

    /// Kernel value between two feature rows.
    #[inline]
    pub fn eval<'a>(&self, a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
        match self.family {
            KernelFamily::Rbf => {
                // explicit squared differences, no ‖a‖²+‖b‖²-2aᵀb expansion
                let dist2: f64 = a.into_iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                self.beta * (-dist2 / (self.alpha * self.alpha)).exp()
            }
            KernelFamily::Linear => a.into_iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }

    fn hash_into(&self, h: &mut DefaultHasher) {
        self.family.hash(h);
        if self.family == KernelFamily::Rbf {
            self.alpha.to_bits().hash(h);
            self.beta.to_bits().hash(h);
        }
    }
}

/// Training patterns as rows of `features` with labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<i8>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<i8>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::invalid("dataset has no patterns"));
        }
        if features.ncols() == 0 {
            return Err(Error::invalid("dataset has no feature columns"));
        }
        if labels.len() != features.nrows() {
            return Err(Error::invalid(format!(
                "{} labels for {} patterns",
                labels.len(),
                features.nrows()
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1 && y != -1) {
            return Err(Error::invalid(format!(
                "label {} of pattern {i} is not -1 or +1",
                labels[i]
            )));
        }
        check_finite(&features, "training features")?;
        Ok(Self { features, labels })
    }

    /// Single-feature dataset.
    pub fn from_column(x: &[f64], labels: Vec<i8>) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(x.len(), 1, x), labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    /// Patterns rearranged so that row `k` of the result is row `order[k]` here.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let features = DMatrix::from_fn(order.len(), self.dim(), |k, j| self.features[(order[k], j)]);
        let labels = order.iter().map(|&i| self.labels[i]).collect();
        Self { features, labels }
    }
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    match m.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::invalid(format!(
            "{what} contain a non-finite value at row {}, column {}",
            k % m.nrows(),
            k / m.nrows()
        ))),
        None => Ok(()),
    }
}

/// Hash of a kernel specification together with the training features in
/// their current row order. Models and covariance bundles built from the same
/// ordered training set share it.
pub fn training_fingerprint(spec: &KernelSpec, features: &DMatrix<f64>) -> u64 {
    let mut h = DefaultHasher::new();
    spec.hash_into(&mut h);
    features.nrows().hash(&mut h);
    features.ncols().hash(&mut h);
    for v in features.iter() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Training covariance `Σ` (N×N), training/test cross covariance (N×T, one
/// column per test pattern) and the test block (T×T).
#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    pub sigma: DMatrix<f64>,
    pub cross: DMatrix<f64>,
    pub test: DMatrix<f64>,
    pub fingerprint: u64,
}

impl CovarianceBundle {
    pub fn n_train(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn n_test(&self) -> usize {
        self.test.nrows()
    }

    pub fn test_diag(&self) -> Vec<f64> {
        self.test.diagonal().iter().copied().collect()
    }

    /// Composite covariance of one test pattern followed by the training set:
    /// `[[Σ_**, Σ_X*ᵀ], [Σ_X*, Σ]]`.
    pub fn composite(&self, test_index: usize) -> DMatrix<f64> {
        let n = self.n_train();
        let mut out = DMatrix::zeros(n + 1, n + 1);
        out[(0, 0)] = self.test[(test_index, test_index)];
        for i in 0..n {
            out[(0, i + 1)] = self.cross[(i, test_index)];
            out[(i + 1, 0)] = self.cross[(i, test_index)];
        }
        out.view_mut((1, 1), (n, n)).copy_from(&self.sigma);
        out
    }
}

/// Symmetric kernel matrix of the rows of `x`, upper triangle mirrored.
pub fn kernel_matrix(spec: &KernelSpec, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval(x.row(i).iter(), x.row(j).iter());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Kernel values between the rows of `a` (rows of the result) and the rows of `b`.
pub fn cross_kernel(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| spec.eval(a.row(i).iter(), b.row(j).iter()))
}

pub fn build_covariance(spec: &KernelSpec, train: &Dataset, test_features: &DMatrix<f64>) -> Result<CovarianceBundle> {
    spec.validate()?;
    if test_features.nrows() > 0 && test_features.ncols() != train.dim() {
        return Err(Error::invalid(format!(
            "test features have {} columns, training features {}",
            test_features.ncols(),
            train.dim()
        )));
    }
    check_finite(test_features, "test features")?;
    let sigma = kernel_matrix(spec, train.features());
    let cross = cross_kernel(spec, train.features(), test_features);
    let test = kernel_matrix(spec, test_features);
    for (m, what) in [
        (&sigma, "training covariance"),
        (&cross, "cross covariance"),
        (&test, "test covariance"),
    ] {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "{what} has non-finite entries (feature overflow)"
            )));
        }
    }
    Ok(CovarianceBundle {
        sigma,
        cross,
        test,
        fingerprint: training_fingerprint(spec, train.features()),
    })
}
