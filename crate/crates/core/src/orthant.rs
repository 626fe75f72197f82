//! Sequential rejection/bootstrap estimator of Gaussian orthant probabilities.
//!
//! One pass visits the coordinates in index order. At coordinate `i` every
//! particle (a string `v_0..v_{i-1}` that survived so far) draws `v_i` from the
//! conditional law given its own history. For a constrained coordinate the
//! acceptance fraction `P̂_i = M₁(i)/M` is recorded, negative draws are
//! dropped and the ensemble is refilled to `M` rows by sampling the survivors
//! with replacement. The log probability estimate is `Σ_i log P̂_i`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::ConditionalMoments;
use crate::rng::{StreamKey, BLOCK_ROWS};

/// Smallest accepted number of particles per coordinate.
pub const MIN_SAMPLES: usize = 100;

/// Integration range of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// `v_i ≥ 0`
    HalfLinePositive,
    /// unrestricted; contributes a factor of exactly one
    FullLine,
}

#[derive(Debug, Clone)]
pub struct OrthantProblem {
    covariance: DMatrix<f64>,
    region: Vec<Region>,
}

impl OrthantProblem {
    pub fn new(covariance: DMatrix<f64>, region: Vec<Region>) -> Result<Self> {
        let n = covariance.nrows();
        if n == 0 || !covariance.is_square() {
            return Err(Error::invalid(format!(
                "covariance must be square and non-empty, got {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if region.len() != n {
            return Err(Error::invalid(format!(
                "region has {} entries for dimension {n}",
                region.len()
            )));
        }
        if !region.contains(&Region::HalfLinePositive) {
            return Err(Error::invalid("region has no constrained coordinate"));
        }
        if covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariance has non-finite entries"));
        }
        for j in 0..n {
            for i in 0..j {
                let (a, b) = (covariance[(i, j)], covariance[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::invalid(format!(
                        "covariance is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { covariance, region })
    }

    /// All coordinates constrained to `v ≥ 0`.
    pub fn positive(covariance: DMatrix<f64>) -> Result<Self> {
        let n = covariance.nrows();
        Self::new(covariance, vec![Region::HalfLinePositive; n])
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn region(&self) -> &[Region] {
        &self.region
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorConfig {
    /// Particles `M` propagated through every coordinate.
    pub samples_per_dim: usize,
    pub seed: u64,
    /// Largest ensemble held in memory by [`chunked_estimate`].
    pub chunk_size: usize,
    pub replicates: usize,
}

impl EstimatorConfig {
    pub fn new(samples_per_dim: usize, seed: u64) -> Self {
        Self {
            samples_per_dim,
            seed,
            chunk_size: samples_per_dim,
            replicates: 1,
        }
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_dim < MIN_SAMPLES {
            return Err(Error::invalid(format!(
                "samples per dimension must be at least {MIN_SAMPLES}, got {}",
                self.samples_per_dim
            )));
        }
        if self.chunk_size < MIN_SAMPLES || self.chunk_size > self.samples_per_dim {
            return Err(Error::invalid(format!(
                "chunk size must lie in {MIN_SAMPLES}..={}, got {}",
                self.samples_per_dim, self.chunk_size
            )));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        Ok(())
    }
}

/// `M` particle strings stored row-major with a fixed stride, so appending a
/// coordinate never moves data.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    values: Vec<f64>,
    rows: usize,
    stride: usize,
    current_dim: usize,
}

impl ParticleEnsemble {
    /// Empty strings for `rows` particles with room for `capacity` coordinates.
    pub fn with_capacity(rows: usize, capacity: usize) -> Self {
        Self {
            values: vec![0.0; rows * capacity],
            rows,
            stride: capacity,
            current_dim: 0,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::invalid("particle rows have different lengths"));
        }
        Ok(Self {
            values: rows.iter().flatten().copied().collect(),
            rows: rows.len(),
            stride: width,
            current_dim: width,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn current_dim(&self) -> usize {
        self.current_dim
    }

    pub fn row(&self, m: usize) -> &[f64] {
        let start = m * self.stride;
        &self.values[start..start + self.current_dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        assert!(j < self.current_dim, "column {j} not yet sampled");
        (0..self.rows).map(|m| self.values[m * self.stride + j]).collect()
    }

    /// Draws coordinate `current_dim` for every row as `bᵀ row + sd·z`, with
    /// `z` from the block streams of `lane`. Returns how many draws are `≥ 0`.
    fn draw_next<F>(&mut self, b: &[f64], sd: f64, lane: F) -> usize
    where
        F: Fn(usize) -> rand_chacha::ChaCha8Rng + Sync,
    {
        let d = self.current_dim;
        assert!(d < self.stride, "ensemble is full");
        assert_eq!(b.len(), d);
        let stride = self.stride;
        let accepted = self
            .values
            .par_chunks_mut(BLOCK_ROWS * stride)
            .enumerate()
            .map(|(block, chunk)| {
                let mut rng = lane(block);
                let mut acc = 0usize;
                for row in chunk.chunks_exact_mut(stride) {
                    let z: f64 = rng.sample(StandardNormal);
                    let v = dot(b, &row[..d]) + sd * z;
                    row[d] = v;
                    acc += usize::from(v >= 0.0);
                }
                acc
            })
            .sum();
        self.current_dim += 1;
        accepted
    }

    /// Drops rejected rows keeping the survivors' order, then refills the
    /// tail with uniform draws (with replacement) among the survivors.
    fn resample_in_place<R: Rng + ?Sized>(&mut self, accepted: &[bool], rng: &mut R) -> Result<usize> {
        assert_eq!(accepted.len(), self.rows, "mask length must equal the number of rows");
        let (stride, width) = (self.stride, self.current_dim);
        let mut kept = 0;
        for (m, _) in accepted.iter().enumerate().filter(|(_, &a)| a) {
            if kept != m {
                self.values.copy_within(m * stride..m * stride + width, kept * stride);
            }
            kept += 1;
        }
        if kept == 0 {
            return Err(Error::EmptyEnsemble);
        }
        for m in kept..self.rows {
            let src = rng.random_range(0..kept);
            self.values.copy_within(src * stride..src * stride + width, m * stride);
        }
        Ok(kept)
    }
}

/// Bootstrap replenishment: rejected rows are replaced by uniform draws with
/// replacement from the accepted rows. Accepted rows keep their values and
/// relative order and come first.
pub fn resample<R: Rng + ?Sized>(
    ensemble: &ParticleEnsemble,
    accepted_mask: &[bool],
    rng: &mut R,
) -> Result<ParticleEnsemble> {
    let mut out = ensemble.clone();
    out.resample_in_place(accepted_mask, rng)?;
    Ok(out)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Outcome of one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// `Σ_i log(M₁(i)/M)`; `-∞` when some coordinate accepted nothing.
    pub log_integral: f64,
    /// `P̂_i` per visited coordinate (1 for unconstrained ones).
    pub per_dim_accept: Vec<f64>,
    /// `M₁(i)` per visited coordinate (`M` for unconstrained ones).
    pub accepted_counts: Vec<usize>,
    pub samples: usize,
    /// Plug-in leading bias term `-(1/M) Σ (1-P̂_i)/(2P̂_i)` of the log estimate.
    pub bias_estimate: f64,
    /// Plug-in leading variance term `(1/M) Σ (1-P̂_i)/P̂_i` of the log estimate,
    /// ignoring the dependence the bootstrap introduces between particles.
    pub variance_estimate: f64,
    /// First coordinate with no accepted draw, if any. The pass stops there.
    pub failed_dim: Option<usize>,
}

impl EstimateReport {
    fn from_counts(accepted_counts: Vec<usize>, samples: usize) -> Self {
        let m = samples as f64;
        let per_dim_accept: Vec<f64> = accepted_counts.iter().map(|&c| c as f64 / m).collect();
        let failed_dim = accepted_counts.iter().position(|&c| c == 0);
        let log_integral = accepted_counts.iter().map(|&c| (c as f64 / m).ln()).sum();
        let (bias_estimate, variance_estimate) = if failed_dim.is_some() {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            let s: f64 = per_dim_accept.iter().map(|&p| (1.0 - p) / p).sum();
            (-s / (2.0 * m), s / m)
        };
        Self {
            log_integral,
            per_dim_accept,
            accepted_counts,
            samples,
            bias_estimate,
            variance_estimate,
            failed_dim,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.failed_dim.is_some()
    }

    pub fn integral(&self) -> f64 {
        self.log_integral.exp()
    }

    /// Plug-in standard error of `log_integral`.
    pub fn std_error(&self) -> f64 {
        self.variance_estimate.sqrt()
    }
}

/// Everything a pass leaves behind: the report, the surviving particles and
/// the conditional moments of the last coordinate.
#[derive(Debug, Clone)]
pub(crate) struct PassOutcome {
    pub report: EstimateReport,
    pub ensemble: ParticleEnsemble,
    pub moments: ConditionalMoments,
}

pub(crate) fn run_pass(problem: &OrthantProblem, samples: usize, key: StreamKey) -> Result<PassOutcome> {
    let r = problem.covariance();
    let n = problem.dim();
    let mut ensemble = ParticleEnsemble::with_capacity(samples, n);
    let mut counts = Vec::with_capacity(n);
    let mut moments = ConditionalMoments::start(r)?;
    let mut mask = vec![false; samples];
    for dim in 0..n {
        if dim > 0 {
            moments = moments.advance(r)?;
        }
        let sd = moments.cond_var().sqrt();
        let accepted = ensemble.draw_next(moments.b().as_slice(), sd, |block| key.sampling(dim, block));
        match problem.region()[dim] {
            Region::FullLine => counts.push(samples),
            Region::HalfLinePositive => {
                counts.push(accepted);
                if accepted == 0 {
                    break;
                }
                if accepted < samples {
                    for (m, slot) in mask.iter_mut().enumerate() {
                        *slot = ensemble.values[m * ensemble.stride + dim] >= 0.0;
                    }
                    ensemble.resample_in_place(&mask, &mut key.resampling(dim))?;
                }
            }
        }
    }
    Ok(PassOutcome {
        report: EstimateReport::from_counts(counts, samples),
        ensemble,
        moments,
    })
}

/// One pass with `cfg.samples_per_dim` particles on replicate stream 0.
pub fn estimate_log_orthant(problem: &OrthantProblem, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    if cfg.samples_per_dim < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "samples per dimension must be at least {MIN_SAMPLES}, got {}",
            cfg.samples_per_dim
        )));
    }
    Ok(run_pass(problem, cfg.samples_per_dim, StreamKey::new(cfg.seed, 0))?.report)
}

/// Several independent passes averaged in the probability domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedEstimate {
    /// `log(mean_r exp(log Î_r))` over successful passes.
    pub log_integral: f64,
    /// Spread of the successful passes, as a standard error of
    /// `log_integral` (delta method). `None` with fewer than two successes.
    pub log_std_error: Option<f64>,
    /// Plug-in standard error of `log_integral` from the per-pass variance terms.
    pub plug_in_std_error: f64,
    pub samples_per_pass: usize,
    pub passes: Vec<EstimateReport>,
    pub failures: usize,
}

impl CombinedEstimate {
    pub fn successes(&self) -> usize {
        self.passes.len() - self.failures
    }
}

/// `replicates` independent passes. A replicate whose `M` exceeds
/// `chunk_size` is itself split into equal passes of at most `chunk_size`
/// particles; all passes are then pooled with equal weight.
pub fn chunked_estimate(problem: &OrthantProblem, cfg: &EstimatorConfig) -> Result<CombinedEstimate> {
    cfg.validate()?;
    let per_replicate = cfg.samples_per_dim.div_ceil(cfg.chunk_size);
    let samples_per_pass = cfg.samples_per_dim.div_ceil(per_replicate);
    let total = cfg.replicates * per_replicate;
    let mut passes = Vec::with_capacity(total);
    for pass in 0..total {
        passes.push(run_pass(problem, samples_per_pass, StreamKey::new(cfg.seed, pass as u64))?.report);
    }
    Ok(combine(passes, samples_per_pass))
}

fn combine(passes: Vec<EstimateReport>, samples_per_pass: usize) -> CombinedEstimate {
    let ok: Vec<&EstimateReport> = passes.iter().filter(|p| !p.is_failed()).collect();
    let failures = passes.len() - ok.len();
    let k = ok.len() as f64;
    let (log_integral, log_std_error, plug_in_std_error) = if ok.is_empty() {
        (f64::NEG_INFINITY, None, f64::INFINITY)
    } else {
        let max = ok.iter().map(|p| p.log_integral).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = ok.iter().map(|p| (p.log_integral - max).exp()).collect();
        let mean = w.iter().sum::<f64>() / k;
        let spread = (ok.len() > 1).then(|| {
            let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
            var.sqrt() / (k.sqrt() * mean)
        });
        let plug_in = (ok.iter().map(|p| p.variance_estimate).sum::<f64>() / (k * k)).sqrt();
        (max + mean.ln(), spread, plug_in)
    };
    CombinedEstimate {
        log_integral,
        log_std_error,
        plug_in_std_error,
        samples_per_pass,
        passes,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ensemble_1d(vals: &[f64]) -> ParticleEnsemble {
        let rows: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v, 10.0 * v]).collect();
        ParticleEnsemble::from_rows(&rows).unwrap()
    }

    #[test]
    fn resample_all_accepted_is_identity() {
        let e = ensemble_1d(&[1.0, 2.0, 3.0]);
        let out = resample(&e, &[true; 3], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(out, e);
    }

    #[test]
    fn resample_worked_example() {
        // Ten first-coordinate draws; four fall below the limit.
        let vals = [2.1, 0.2, 0.6, 1.8, 2.2, 0.8, 1.3, -0.3, 1.4, 1.6];
        let mask: Vec<bool> = vals.iter().map(|&v| v >= 1.2).collect();
        let e = ensemble_1d(&vals);
        let out = resample(&e, &mask, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(out.rows(), 10);
        let survivors = [2.1, 1.8, 2.2, 1.3, 1.4, 1.6];
        for (m, &v) in survivors.iter().enumerate() {
            assert_eq!(out.row(m), &[v, 10.0 * v]);
        }
        for m in 6..10 {
            let r = out.row(m);
            assert!(survivors.contains(&r[0]));
            assert_eq!(r[1], 10.0 * r[0]);
        }
    }

    #[test]
    fn resample_single_survivor() {
        let e = ensemble_1d(&[-1.0, -2.0, 0.5, -3.0, -0.1]);
        let mask = [false, false, true, false, false];
        let out = resample(&e, &mask, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for m in 0..5 {
            assert_eq!(out.row(m), &[0.5, 5.0]);
        }
    }

    #[test]
    fn resample_nothing_accepted() {
        let e = ensemble_1d(&[-1.0, -2.0]);
        let err = resample(&e, &[false, false], &mut ChaCha8Rng::seed_from_u64(3));
        assert!(matches!(err, Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..11).map(|i| (i as f64).sin()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-13);
        assert_eq!(dot(&[], &[]), 0.0);
    }

    #[test]
    fn bookkeeping_is_exact() {
        let r = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0]);
        let p = OrthantProblem::positive(r).unwrap();
        let rep = estimate_log_orthant(&p, &EstimatorConfig::new(5000, 11)).unwrap();
        let m = rep.samples as f64;
        let mut want = 0.0;
        for &c in &rep.accepted_counts {
            want += (c as f64 / m).ln();
        }
        assert_eq!(rep.log_integral.to_bits(), want.to_bits());
        assert!(rep.per_dim_accept.iter().all(|&p| p > 0.0 && p <= 1.0));
        assert!(rep.bias_estimate < 0.0);
        assert!((rep.bias_estimate + rep.variance_estimate / 2.0).abs() < 1e-18);
    }

    #[test]
    fn same_seed_same_report() {
        let r = DMatrix::from_fn(6, 6, |i, j| if i == j { 1.0 } else { 0.3 });
        let p = OrthantProblem::positive(r).unwrap();
        let cfg = EstimatorConfig::new(10_000, 5);
        assert_eq!(
            estimate_log_orthant(&p, &cfg).unwrap(),
            estimate_log_orthant(&p, &cfg).unwrap()
        );
        let other = estimate_log_orthant(&p, &EstimatorConfig::new(10_000, 6)).unwrap();
        assert_ne!(other.log_integral, estimate_log_orthant(&p, &cfg).unwrap().log_integral);
    }

    #[test]
    fn full_line_coordinates_count_one() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let p = OrthantProblem::new(r, vec![Region::FullLine, Region::HalfLinePositive]).unwrap();
        let rep = estimate_log_orthant(&p, &EstimatorConfig::new(200_000, 2)).unwrap();
        assert_eq!(rep.accepted_counts[0], 200_000);
        assert_eq!(rep.per_dim_accept[0], 1.0);
        assert!((rep.integral() - 0.5).abs() < 0.005);
    }

    #[test]
    fn failure_is_flagged_not_raised() {
        // Second coordinate is almost surely negative given the first.
        let r = DMatrix::from_row_slice(2, 2, &[1.0, -0.999_999, -0.999_999, 1.0]);
        let p = OrthantProblem::positive(r).unwrap();
        let rep = estimate_log_orthant(&p, &EstimatorConfig::new(100, 1)).unwrap();
        assert_eq!(rep.failed_dim, Some(1));
        assert_eq!(rep.log_integral, f64::NEG_INFINITY);
        assert!(rep.is_failed());
    }

    #[test]
    fn problem_validation() {
        let r = DMatrix::<f64>::identity(2, 2);
        assert!(OrthantProblem::new(r.clone(), vec![Region::FullLine; 2]).is_err());
        assert!(OrthantProblem::new(r.clone(), vec![Region::HalfLinePositive]).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(OrthantProblem::positive(asym).is_err());
        assert!(EstimatorConfig::new(99, 0).validate().is_err());
        assert!(EstimatorConfig::new(1000, 0).with_chunk_size(2000).validate().is_err());
        assert!(EstimatorConfig::new(1000, 0).with_replicates(0).validate().is_err());
        assert!(EstimatorConfig::new(1000, 0).with_chunk_size(250).validate().is_ok());
    }

    #[test]
    fn single_replicate_matches_single_pass() {
        let r = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.2 });
        let p = OrthantProblem::positive(r).unwrap();
        let cfg = EstimatorConfig::new(20_000, 9);
        let single = estimate_log_orthant(&p, &cfg).unwrap();
        let combined = chunked_estimate(&p, &cfg).unwrap();
        assert_eq!(combined.passes, vec![single.clone()]);
        assert_eq!(combined.log_integral, single.log_integral);
        assert_eq!(combined.log_std_error, None);
    }

    #[test]
    fn chunking_splits_into_equal_passes() {
        let r = DMatrix::<f64>::identity(3, 3);
        let p = OrthantProblem::positive(r).unwrap();
        let cfg = EstimatorConfig::new(10_000, 1)
            .with_chunk_size(3_000)
            .with_replicates(2);
        let c = chunked_estimate(&p, &cfg).unwrap();
        assert_eq!(c.passes.len(), 8);
        assert_eq!(c.samples_per_pass, 2_500);
        assert!(c.log_std_error.is_some());
        assert_eq!(c.failures, 0);
        assert!((c.log_integral + 3.0 * 2f64.ln()).abs() < 0.05);
    }
}
