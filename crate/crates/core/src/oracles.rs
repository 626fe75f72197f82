//! Ground-truth evaluators for the Monte Carlo estimator.
//!
//! Two covariance families reduce the orthant probability to a single
//! integral over a standard normal `u`:
//!
//! - unit diagonal with off-diagonal `d_i d_j`: `E_u Π Φ(d_i u / √(1-d_i²))`;
//! - `I + x xᵀ` with signs folded in (the one-feature linear kernel):
//!   `E_u Π Φ(y_i x_i u)`.
//!
//! Both are evaluated on a fixed grid in log space so products of hundreds of
//! probit factors never underflow. Small general problems are checked with
//! naive Monte Carlo and with a deterministic tensor-product quadrature of the
//! sequentially conditioned integral.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::normal;
use crate::orthant::Region;
use crate::rng::{StreamKey, BLOCK_ROWS};

/// Largest dimension accepted by the brute-force and dense-quadrature oracles.
pub const SMALL_ORACLE_MAX_DIM: usize = 6;

/// Default sample count of [`brute_force_orthant`].
pub const BRUTE_FORCE_SAMPLES: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RankOneCovarianceSpec {
    d: Vec<f64>,
}

impl RankOneCovarianceSpec {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::invalid("rank-one vector is empty"));
        }
        if let Some(i) = d.iter().position(|v| !(v.abs() < 1.0)) {
            return Err(Error::invalid(format!("|d_{i}| = {} is not below 1", d[i].abs())));
        }
        Ok(Self { d })
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// Unit diagonal, `d_i d_j` off the diagonal.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.d.len();
        DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { self.d[i] * self.d[j] })
    }
}

/// Recognizes a unit-diagonal covariance with off-diagonal `d_i d_j` and
/// recovers `d` (up to a global sign). Entries must match to `tol`.
pub fn recover_rank_one(r: &DMatrix<f64>, tol: f64) -> Option<RankOneCovarianceSpec> {
    let n = r.nrows();
    if !r.is_square() || n == 0 || (0..n).any(|i| (r[(i, i)] - 1.0).abs() > tol) {
        return None;
    }
    let mut d = vec![0.0; n];
    let mut best = (0, 0, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            if r[(i, j)].abs() > best.2.abs() {
                best = (i, j, r[(i, j)]);
            }
        }
    }
    let (p, q, rpq) = best;
    if rpq != 0.0 {
        let third = (0..n)
            .filter(|&k| k != p && k != q)
            .max_by(|&a, &b| r[(q, a)].abs().total_cmp(&r[(q, b)].abs()));
        let dp2 = match third {
            Some(k) if r[(q, k)].abs() > tol => rpq * r[(p, k)] / r[(q, k)],
            _ => rpq.abs(),
        };
        if !(dp2 > 0.0) {
            return None;
        }
        let dp = dp2.sqrt();
        for (i, di) in d.iter_mut().enumerate() {
            *di = if i == p { dp } else { r[(i, p)] / dp };
        }
    }
    let fits = (0..n).all(|i| (0..n).all(|j| i == j || (r[(i, j)] - d[i] * d[j]).abs() <= tol));
    if fits {
        RankOneCovarianceSpec::new(d).ok()
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    Trapezoid,
    GaussLegendre,
}

/// Grid on `[-half_width, half_width]` in units of the standard normal `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub nodes: usize,
    pub half_width: f64,
    pub rule: QuadratureRule,
}

impl Default for QuadratureConfig {
    /// Outside ±10 the normal weight is below 1e-22 while every probit
    /// product is at most 1.
    fn default() -> Self {
        Self {
            nodes: 4001,
            half_width: 10.0,
            rule: QuadratureRule::Trapezoid,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 3 {
            return Err(Error::invalid(format!(
                "quadrature needs at least 3 nodes, got {}",
                self.nodes
            )));
        }
        if self.rule == QuadratureRule::Trapezoid && self.nodes.is_multiple_of(2) {
            return Err(Error::invalid(
                "trapezoid rule needs an odd node count (symmetric grid)",
            ));
        }
        if !(self.half_width >= 8.0) || !self.half_width.is_finite() {
            return Err(Error::invalid(format!(
                "half width must be at least 8, got {}",
                self.half_width
            )));
        }
        Ok(())
    }

    /// Nodes `u_k` and `log(w_k φ(u_k))`.
    fn weighted_nodes(&self) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let h = self.half_width;
        let raw: Vec<(f64, f64)> = match self.rule {
            QuadratureRule::Trapezoid => {
                let n = self.nodes;
                let step = 2.0 * h / (n - 1) as f64;
                (0..n)
                    .map(|k| {
                        // symmetric by construction: node k and n-1-k are exact negatives
                        let u = (k as f64 - ((n - 1) / 2) as f64) * step;
                        let w = if k == 0 || k == n - 1 { 0.5 * step } else { step };
                        (u, w)
                    })
                    .collect()
            }
            QuadratureRule::GaussLegendre => gauss_legendre(self.nodes)
                .into_iter()
                .map(|(x, w)| (h * x, h * w))
                .collect(),
        };
        let log_norm = 0.5 * (2.0 * PI).ln();
        Ok(raw
            .into_iter()
            .map(|(u, w)| (u, w.ln() - 0.5 * u * u - log_norm))
            .collect())
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre three-term recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (x, w);
        out[n - 1 - i] = (-x, w);
    }
    if n % 2 == 1 {
        out[n / 2].0 = 0.0;
    }
    out
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log Σ_k w_k φ(u_k) Π_i Φ(c_i u_k)^{m_i}` for `(c_i, m_i)` pairs, with the
/// node values collected in order before a sequential reduction.
fn log_node_terms(terms: &[(f64, f64)], nodes: &[(f64, f64)]) -> Vec<f64> {
    nodes
        .par_iter()
        .map(|&(u, lw)| lw + terms.iter().map(|&(c, m)| m * normal::log_cdf(c * u)).sum::<f64>())
        .collect()
}

/// `log E_u[Π_i Φ(c_i u)]` for standard normal `u`.
pub fn log_expected_probit_product(coefficients: &[f64], quad: &QuadratureConfig) -> Result<f64> {
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("non-finite probit coefficient"));
    }
    let nodes = quad.weighted_nodes()?;
    let terms: Vec<(f64, f64)> = coefficients.iter().map(|&c| (c, 1.0)).collect();
    Ok(log_sum_exp(&log_node_terms(&terms, &nodes)))
}

/// Log orthant probability of the rank-one structured covariance.
pub fn orthant_rank_one(spec: &RankOneCovarianceSpec, quad: &QuadratureConfig) -> Result<f64> {
    let coefficients: Vec<f64> = spec.d.iter().map(|&d| d / (1.0 - d * d).sqrt()).collect();
    log_expected_probit_product(&coefficients, quad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearKernelOracle {
    /// Class +1 posterior of each test value.
    pub posteriors: Vec<f64>,
    /// Log marginal likelihood of the training labels.
    pub log_marginal: f64,
}

/// Posteriors and marginal likelihood of the one-feature linear-kernel
/// classifier: numerator `E_u[Φ(x u) Π Φ(y_i x_i u)]`, denominator
/// `E_u[Π Φ(y_i x_i u)]`.
pub fn linear_kernel_posteriors_1d(
    x_train: &[f64],
    labels: &[i8],
    x_test: &[f64],
    quad: &QuadratureConfig,
) -> Result<LinearKernelOracle> {
    if x_train.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} patterns",
            labels.len(),
            x_train.len()
        )));
    }
    if x_train.iter().chain(x_test).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::invalid("labels must be -1 or +1"));
    }
    let nodes = quad.weighted_nodes()?;
    let terms: Vec<(f64, f64)> = x_train
        .iter()
        .zip(labels)
        .map(|(&x, &y)| (f64::from(y) * x, 1.0))
        .collect();
    let base = log_node_terms(&terms, &nodes);
    let log_marginal = log_sum_exp(&base);
    let posteriors = x_test
        .iter()
        .map(|&xt| {
            let num: Vec<f64> = base
                .iter()
                .zip(&nodes)
                .map(|(b, &(u, _))| b + normal::log_cdf(xt * u))
                .collect();
            (log_sum_exp(&num) - log_marginal).exp()
        })
        .collect();
    Ok(LinearKernelOracle {
        posteriors,
        log_marginal,
    })
}

/// Single test value version of [`linear_kernel_posteriors_1d`]; returns
/// `(posterior, log marginal likelihood)`.
pub fn linear_kernel_posterior_1d(
    x_train: &[f64],
    labels: &[i8],
    x_test: f64,
    quad: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let o = linear_kernel_posteriors_1d(x_train, labels, &[x_test], quad)?;
    Ok((o.posteriors[0], o.log_marginal))
}

/// Posterior in the infinite length-scale limit of the RBF kernel, where the
/// training covariance is `β 11ᵀ` and only class counts matter:
/// `E[Φ(√β u)^{n1+1} Φ(-√β u)^{n2}] / E[Φ(√β u)^{n1} Φ(-√β u)^{n2}]`.
pub fn soft_count_limit(n1: usize, n2: usize, beta: f64, quad: &QuadratureConfig) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let nodes = quad.weighted_nodes()?;
    let s = beta.sqrt();
    let num = log_node_terms(&[(s, n1 as f64 + 1.0), (-s, n2 as f64)], &nodes);
    let den = log_node_terms(&[(s, n1 as f64), (-s, n2 as f64)], &nodes);
    Ok((log_sum_exp(&num) - log_sum_exp(&den)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub samples: usize,
}

fn check_small(r: &DMatrix<f64>, region: &[Region]) -> Result<()> {
    if !r.is_square() || r.nrows() == 0 {
        return Err(Error::invalid("covariance must be square and non-empty"));
    }
    if r.nrows() > SMALL_ORACLE_MAX_DIM {
        return Err(Error::invalid(format!(
            "dimension {} exceeds the small-problem oracle limit {SMALL_ORACLE_MAX_DIM}",
            r.nrows()
        )));
    }
    if region.len() != r.nrows() {
        return Err(Error::invalid("region length does not match the covariance"));
    }
    Ok(())
}

/// Fraction of joint draws `v = L z` landing in the region.
pub fn brute_force_orthant(
    r: &DMatrix<f64>,
    region: &[Region],
    samples: usize,
    seed: u64,
) -> Result<BruteForceEstimate> {
    check_small(r, region)?;
    if samples == 0 {
        return Err(Error::invalid("brute force needs at least one sample"));
    }
    let n = r.nrows();
    let l = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::degenerate(None, "covariance is not positive definite"))?
        .unpack();
    let key = StreamKey::new(seed, 0);
    let blocks = samples.div_ceil(BLOCK_ROWS);
    let hits: usize = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = key.brute_force(block);
            let rows = BLOCK_ROWS.min(samples - block * BLOCK_ROWS);
            let mut z = [0.0f64; SMALL_ORACLE_MAX_DIM];
            let mut hits = 0usize;
            for _ in 0..rows {
                for zi in z.iter_mut().take(n) {
                    *zi = StandardNormal.sample(&mut rng);
                }
                let inside = (0..n)
                    .all(|i| region[i] == Region::FullLine || (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>() >= 0.0);
                hits += usize::from(inside);
            }
            hits
        })
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(BruteForceEstimate {
        probability: p,
        std_error: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
    })
}

/// Deterministic orthant probability for small problems. Unconstrained
/// coordinates are marginalized away; the rest is written as nested
/// conditional probabilities of the Cholesky factors, mapped to the unit
/// cube, and integrated on a Gauss-Legendre tensor grid.
pub fn dense_orthant_quadrature(r: &DMatrix<f64>, region: &[Region], nodes_per_dim: usize) -> Result<f64> {
    check_small(r, region)?;
    if nodes_per_dim == 0 {
        return Err(Error::invalid("quadrature needs at least one node per dimension"));
    }
    let keep: Vec<usize> = (0..r.nrows())
        .filter(|&i| region[i] == Region::HalfLinePositive)
        .collect();
    if keep.is_empty() {
        return Ok(1.0);
    }
    let k = keep.len();
    let marginal = DMatrix::from_fn(k, k, |i, j| r[(keep[i], keep[j])]);
    let l = marginal
        .cholesky()
        .ok_or_else(|| Error::degenerate(None, "covariance is not positive definite"))?
        .unpack();
    if k == 1 {
        return Ok(0.5);
    }
    // the integrand has power-type endpoint singularities in w; the quintic
    // map w = t³(10 − 15t + 6t²) flattens them
    let rule: Vec<(f64, f64)> = gauss_legendre(nodes_per_dim)
        .into_iter()
        .map(|(x, w)| {
            let t = 0.5 * (x + 1.0);
            let map = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
            let jac = 30.0 * t * t * (1.0 - t) * (1.0 - t);
            (map, 0.5 * w * jac)
        })
        .collect();
    let inner = k - 1;
    let points = nodes_per_dim.pow(inner as u32);
    let partial: Vec<f64> = (0..points)
        .into_par_iter()
        .with_min_len(4096)
        .map(|mut idx| {
            let mut z = [0.0f64; SMALL_ORACLE_MAX_DIM];
            let mut value = 1.0;
            for j in 0..k {
                let shift: f64 = (0..j).map(|t| l[(j, t)] * z[t]).sum();
                // need L_jj z_j + shift ≥ 0
                let e = normal::cdf(shift / l[(j, j)]);
                value *= e;
                if j == inner || value == 0.0 {
                    break;
                }
                let (w, weight) = rule[idx % nodes_per_dim];
                idx /= nodes_per_dim;
                value *= weight;
                // z_j uniform in probability over [−shift/L_jj, ∞)
                z[j] = -normal::inverse_cdf(e * (1.0 - w));
            }
            value
        })
        .collect();
    Ok(partial.iter().sum())
}
