//! The scaled-pair argument of a perspective function, standard proximity
//! operators, and the Moreau / threshold identities used to check them.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::numerics::Vector;

/// Point `(eta, y)` of `R x R^N`, the argument of a perspective function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledPair {
    pub eta: f64,
    pub y: Vec<f64>,
}

impl ScaledPair {
    pub fn new(eta: f64, y: impl Into<Vec<f64>>) -> Self {
        Self { eta, y: y.into() }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            eta: 0.0,
            y: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn y_vector(&self) -> Vector {
        Vector::from_column_slice(&self.y)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("eta", self.eta)?;
        for v in &self.y {
            ensure_finite("y", *v)?;
        }
        Ok(())
    }

    /// Flattens to `[eta, y_1, ..., y_N]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.y.len() + 1);
        out.push(self.eta);
        out.extend_from_slice(&self.y);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        Self {
            eta: flat[0],
            y: flat[1..].to_vec(),
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            eta: lambda * self.eta,
            y: self.y.iter().map(|v| lambda * v).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.eta * self.eta + self.y.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.eta * other.eta + self.y.iter().zip(&other.y).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            eta: self.eta - other.eta,
            y: self.y.iter().zip(&other.y).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).norm()
    }
}

/// Prox scaling `gamma > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxStep {
    gamma: f64,
}

impl ProxStep {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(Self { gamma })
        } else {
            Err(Error::Argument(format!(
                "prox step must be positive and finite, got {gamma}"
            )))
        }
    }

    #[inline]
    pub fn gamma(self) -> f64 {
        self.gamma
    }

    pub fn scaled(self, lambda: f64) -> Result<Self> {
        Self::new(self.gamma * lambda)
    }
}

/// Conjugate `phi*` of the base function; `+inf` outside its domain.
///
/// Its sublevel description `{(mu, u) : mu + phi*(u) <= 0}` is the set whose
/// scaled copy the perspective prox thresholds to zero.
pub struct ConjugateGate<'a> {
    pub conjugate_at: &'a dyn Fn(&[f64]) -> f64,
}

/// Componentwise `sign(x) max(|x| - gamma, 0)`.
pub fn soft_threshold(x: &[f64], gamma: f64) -> Vec<f64> {
    x.iter().map(|&v| soft_threshold_scalar(v, gamma)).collect()
}

#[inline]
pub fn soft_threshold_scalar(v: f64, gamma: f64) -> f64 {
    if v > gamma {
        v - gamma
    } else if v < -gamma {
        v + gamma
    } else {
        0.0
    }
}

/// Exact projection onto a nonempty closed convex set.
pub trait Projector: Sync {
    fn project(&self, x: &[f64]) -> Vec<f64>;

    /// `true` when the set is the singleton `{0}`.
    fn is_origin(&self) -> bool {
        false
    }
}

/// Nonnegative (`sign = +1`) or nonpositive (`sign = -1`) orthant.
#[derive(Debug, Clone, Copy)]
pub struct Orthant {
    pub sign: f64,
}

impl Orthant {
    pub const NONNEGATIVE: Orthant = Orthant { sign: 1.0 };
    pub const NONPOSITIVE: Orthant = Orthant { sign: -1.0 };
}

impl Projector for Orthant {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&v| if v * self.sign > 0.0 { v } else { 0.0 })
            .collect()
    }
}

/// The singleton `{0}`.
#[derive(Debug, Clone, Copy)]
pub struct Origin;

impl Projector for Origin {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }

    fn is_origin(&self) -> bool {
        true
    }
}

/// Closed interval `[lo, hi]` applied componentwise.
#[derive(Debug, Clone, Copy)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Projector for Interval {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.clamp(self.lo, self.hi)).collect()
    }

    fn is_origin(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }
}

/// Closed Euclidean ball.
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Projector for Ball {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let n = norm(&d);
        if n <= self.radius {
            x.to_vec()
        } else {
            let s = self.radius / n;
            self.center.iter().zip(&d).map(|(c, v)| c + s * v).collect()
        }
    }

    fn is_origin(&self) -> bool {
        self.radius == 0.0 && self.center.iter().all(|&c| c == 0.0)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Prox of `gamma (||.|| + sigma_D)` given the projector onto `C = gamma D`.
///
/// Returns `0` when `d_C(x) <= gamma`, otherwise `(1 - gamma / d_C(x)) (x - P_C x)`.
/// When `D` is a cone with polar `K`, `x - P_C x = P_K x` and this is the prox
/// of `gamma (||.|| + iota_K)`.
pub fn prox_norm_plus_support(
    x: &[f64],
    gamma: f64,
    projector_onto_c: &dyn Projector,
) -> Result<Vec<f64>> {
    ProxStep::new(gamma)?;
    if projector_onto_c.is_origin() {
        return Err(Error::Argument(
            "prox_norm_plus_support requires D != {0}".into(),
        ));
    }
    let pc = projector_onto_c.project(x);
    let residual: Vec<f64> = x.iter().zip(&pc).map(|(a, b)| a - b).collect();
    let dist = norm(&residual);
    if dist <= gamma {
        return Ok(vec![0.0; x.len()]);
    }
    let scale = 1.0 - gamma / dist;
    Ok(residual.into_iter().map(|v| scale * v).collect())
}

/// `true` iff `eta + gamma phi*(y / gamma) <= 0`, i.e. the perspective prox
/// maps `(eta, y)` to the origin.
pub fn threshold_gate(pair: &ScaledPair, step: ProxStep, gate: &ConjugateGate<'_>) -> Result<bool> {
    let gamma = step.gamma();
    let u: Vec<f64> = pair.y.iter().map(|v| v / gamma).collect();
    let conj = (gate.conjugate_at)(&u);
    if conj.is_nan() {
        return Err(Error::Domain("conjugate evaluated to NaN".into()));
    }
    if conj == f64::INFINITY {
        return Ok(false);
    }
    if conj == f64::NEG_INFINITY {
        return Ok(true);
    }
    Ok(pair.eta + gamma * conj <= 0.0)
}

/// `||prox_value - (input - P_{gamma C}(input))||`, which vanishes for an
/// exact prox of a perspective whose conjugate is `iota_C`.
pub fn moreau_residual(
    prox_value: &ScaledPair,
    projector_onto_gamma_c: &dyn Fn(&ScaledPair) -> ScaledPair,
    input: &ScaledPair,
) -> f64 {
    let proj = projector_onto_gamma_c(input);
    prox_value.distance(&input.sub(&proj))
}
