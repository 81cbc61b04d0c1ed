use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// Sparse linear model `z = X b* + sigma e` with equicorrelated Gaussian rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModelSpec {
    pub n: usize,
    pub p: usize,
    /// Support size; `b*` is `-1, 1, -1, ...` on the first `m` coordinates.
    pub m: usize,
    pub sigma: f64,
    /// Off-diagonal entry of the row covariance.
    pub corr: f64,
    pub seed: u64,
    /// Substream of `seed`, so that repetitions never share draws.
    #[serde(default)]
    pub stream: u64,
}

impl LinearModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::Argument("n and p must be positive".into()));
        }
        if self.m > self.p {
            return Err(Error::Argument(format!(
                "support size {} exceeds p = {}",
                self.m, self.p
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Argument(format!(
                "sigma must be nonnegative, got {}",
                self.sigma
            )));
        }
        if !(0.0..1.0).contains(&self.corr) {
            return Err(Error::Argument(format!(
                "corr must lie in [0, 1), got {}",
                self.corr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LinearModel {
    pub x: Matrix,
    pub z: Vector,
    pub b_star: Vector,
}

pub fn alternating_signal(p: usize, m: usize) -> Vector {
    Vector::from_fn(p, |i, _| {
        if i >= m {
            0.0
        } else if i % 2 == 0 {
            -1.0
        } else {
            1.0
        }
    })
}

/// Rows are `sqrt(1 - rho) g + c (1^T g) 1` with `g` standard normal and
/// `c = (sqrt(1 - rho + p rho) - sqrt(1 - rho)) / p`, the symmetric square
/// root of the equicorrelation matrix. Columns are then rescaled to norm
/// `sqrt(n)`.
pub fn gen_linear_model(spec: &LinearModelSpec) -> Result<LinearModel> {
    spec.validate()?;
    let (n, p, rho) = (spec.n, spec.p, spec.corr);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.stream);
    let a = (1.0 - rho).sqrt();
    let c = ((1.0 - rho + p as f64 * rho).sqrt() - a) / p as f64;
    let mut x = Matrix::zeros(n, p);
    let mut g = vec![0.0; p];
    for i in 0..n {
        for gk in g.iter_mut() {
            *gk = StandardNormal.sample(&mut rng);
        }
        let common = c * g.iter().sum::<f64>();
        for (k, gk) in g.iter().enumerate() {
            x[(i, k)] = a * gk + common;
        }
    }
    let target = (n as f64).sqrt();
    for mut col in x.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col *= target / norm;
        }
    }
    let b_star = alternating_signal(p, spec.m);
    let mut z = &x * &b_star;
    if spec.sigma > 0.0 {
        for zi in z.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *zi += spec.sigma * e;
        }
    }
    Ok(LinearModel { x, z, b_star })
}

/// `theta = n / (2 m log(p - m))`.
pub fn rescaled_sample_size(n: usize, p: usize, m: usize) -> Result<f64> {
    Ok(n as f64 / theta_scale(p, m)?)
}

/// Sample size whose rescaled value is closest to `theta` (at least 1).
pub fn n_for_theta(theta: f64, p: usize, m: usize) -> Result<usize> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Argument(format!(
            "theta must be positive, got {theta}"
        )));
    }
    Ok(((theta * theta_scale(p, m)?).round() as usize).max(1))
}

fn theta_scale(p: usize, m: usize) -> Result<f64> {
    if m == 0 || p <= m {
        return Err(Error::Argument(format!(
            "need p > m >= 1, got p = {p}, m = {m}"
        )));
    }
    Ok(2.0 * m as f64 * ((p - m) as f64).ln())
}

/// `ceil(0.4 p^(3/4))`.
pub fn default_support_size(p: usize) -> usize {
    (0.4 * (p as f64).powf(0.75)).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    pub exact_recovery: bool,
    pub hamming: usize,
    /// `||b - b*||^2 / n`.
    pub est_err: f64,
    /// `||X b - X b*||^2 / n`.
    pub pred_err: f64,
}

/// Support of `b_hat` is `{j : |b_hat_j| > zero_threshold}`.
pub fn support_metrics(
    x: &Matrix,
    b_hat: &Vector,
    b_star: &Vector,
    zero_threshold: f64,
) -> Result<SupportMetrics> {
    if b_hat.len() != b_star.len() || x.ncols() != b_star.len() {
        return Err(Error::Argument(
            "support metrics need matching dimensions".into(),
        ));
    }
    let hamming = b_hat
        .iter()
        .zip(b_star.iter())
        .filter(|(a, b)| (a.abs() > zero_threshold) != (b.abs() > zero_threshold))
        .count();
    let n = x.nrows() as f64;
    let diff = b_hat - b_star;
    Ok(SupportMetrics {
        exact_recovery: hamming == 0,
        hamming,
        est_err: diff.norm_squared() / n,
        pred_err: (x * diff).norm_squared() / n,
    })
}
