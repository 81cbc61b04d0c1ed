//! Proximity operators of perspective functions `eta * phi(y / eta)`.
//!
//! Radially symmetric bases reduce to a scalar root problem in the radius;
//! bases whose conjugate has a closed domain (cone, Huber, Vapnik) are
//! handled case by case.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    invert_monotone, solve_depressed_cubic, solve_power_polynomial, MonotoneRootProblem,
};
use crate::prox::{norm, Projector, ProxStep, ScaledPair};

/// Radial profile `s -> phi0*(s)` of an even conjugate, with two derivatives.
pub trait EvenConjugate: Sync {
    fn value(&self, s: f64) -> f64;
    fn derivative(&self, s: f64) -> f64;
    fn second_derivative(&self, s: f64) -> f64;
}

/// Built-in conjugate profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum Profile {
    /// `scale * |s|^exponent / exponent`, the conjugate of a power of the norm.
    Power { exponent: f64, scale: f64 },
    /// `cosh(s) - 1`, conjugate of `x asinh(x) - sqrt(1 + x^2) + 1`.
    Cosh,
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Profile::Power { exponent, scale } => {
                if exponent > 1.0 && exponent.is_finite() && scale > 0.0 && scale.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Argument(format!(
                        "power profile needs exponent > 1 and scale > 0, got {exponent}, {scale}"
                    )))
                }
            }
            Profile::Cosh => Ok(()),
        }
    }
}

impl EvenConjugate for Profile {
    fn value(&self, s: f64) -> f64 {
        match *self {
            Profile::Power { exponent, scale } => scale * s.abs().powf(exponent) / exponent,
            Profile::Cosh => 2.0 * (0.5 * s).sinh().powi(2),
        }
    }

    fn derivative(&self, s: f64) -> f64 {
        match *self {
            Profile::Power { exponent, scale } => scale * s.abs().powf(exponent - 1.0) * s.signum(),
            Profile::Cosh => s.sinh(),
        }
    }

    fn second_derivative(&self, s: f64) -> f64 {
        match *self {
            Profile::Power { exponent, scale } => {
                scale * (exponent - 1.0) * s.abs().powf(exponent - 2.0)
            }
            Profile::Cosh => s.cosh(),
        }
    }
}

/// `sqrt(1 + s^2)`: not normalized at the origin, used only by the sqrt kind.
struct SqrtConjugate;

impl EvenConjugate for SqrtConjugate {
    fn value(&self, s: f64) -> f64 {
        1.0f64.hypot(s)
    }
    fn derivative(&self, s: f64) -> f64 {
        s / 1.0f64.hypot(s)
    }
    fn second_derivative(&self, s: f64) -> f64 {
        1.0f64.hypot(s).powi(-3)
    }
}

/// Base `phi = phi0(||.||) + delta + <., v>` described through `phi0*`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSpec<C> {
    pub conjugate: C,
    pub delta: f64,
    pub v: Vec<f64>,
}

impl<C: EvenConjugate> RadialSpec<C> {
    pub fn new(conjugate: C, delta: f64, v: Vec<f64>) -> Result<Self> {
        check_normalized(&conjugate)?;
        check_finite_slice("v", &v)?;
        if !delta.is_finite() {
            return Err(Error::Argument(format!(
                "delta must be finite, got {delta}"
            )));
        }
        Ok(Self {
            conjugate,
            delta,
            v,
        })
    }
}

fn check_normalized(c: &dyn EvenConjugate) -> Result<()> {
    if c.value(0.0) != 0.0 || c.derivative(0.0) != 0.0 {
        return Err(Error::Argument(
            "radial conjugate profile must satisfy phi0*(0) = 0 and phi0*'(0) = 0".into(),
        ));
    }
    Ok(())
}

fn check_finite_slice(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be finite")))
    }
}

/// Power base `||.||^q / alpha + delta + <., v>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub q: f64,
    pub alpha: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub v: Vec<f64>,
}

impl PowerSpec {
    pub fn new(q: f64, alpha: f64, delta: f64, v: Vec<f64>) -> Result<Self> {
        let spec = Self { q, alpha, delta, v };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.0 && self.q.is_finite()) {
            return Err(Error::Argument(format!(
                "exponent q must exceed 1, got {}",
                self.q
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Argument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !self.delta.is_finite() {
            return Err(Error::Argument(format!(
                "delta must be finite, got {}",
                self.delta
            )));
        }
        check_finite_slice("v", &self.v)
    }

    /// Conjugate exponent `q / (q - 1)`.
    pub fn qstar(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    /// `(alpha (1 - 1/q*))^(q* - 1)`, so that `phi0* = rho s^q* / q*`.
    pub fn rho_const(&self) -> f64 {
        let qs = self.qstar();
        (self.alpha * (1.0 - 1.0 / qs)).powf(qs - 1.0)
    }

    pub fn profile(&self) -> Profile {
        Profile::Power {
            exponent: self.qstar(),
            scale: self.rho_const(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberSpec {
    pub rho: f64,
}

impl HuberSpec {
    pub fn new(rho: f64) -> Result<Self> {
        if rho > 0.0 && rho.is_finite() {
            Ok(Self { rho })
        } else {
            Err(Error::Argument(format!(
                "Huber knee must be positive, got {rho}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VapnikSpec {
    pub epsilon: f64,
}

impl VapnikSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Self { epsilon })
        } else {
            Err(Error::Argument(format!(
                "Vapnik width must be positive, got {epsilon}"
            )))
        }
    }
}

/// Residual `w = y - gamma v`, and whether it counts as zero relative to its parts.
fn offset_residual(y: &[f64], v: &[f64], gamma: f64) -> Result<(Vec<f64>, f64, bool)> {
    if !v.is_empty() && v.len() != y.len() {
        return Err(Error::Argument(format!(
            "linear term has dimension {} but y has {}",
            v.len(),
            y.len()
        )));
    }
    let w: Vec<f64> = if v.is_empty() {
        y.to_vec()
    } else {
        y.iter().zip(v).map(|(a, b)| a - gamma * b).collect()
    };
    let wn = norm(&w);
    let scale = norm(y) + gamma * norm(v);
    Ok((w, wn, wn <= 1e-12 * scale))
}

fn shrink(w: &[f64], factor: f64) -> Vec<f64> {
    w.iter().map(|v| factor * v).collect()
}

/// Shared radial engine; does not assume `phi0*(0) = 0`.
fn radial_engine(
    conj: &dyn EvenConjugate,
    delta: f64,
    v: &[f64],
    step: ProxStep,
    pair: &ScaledPair,
) -> Result<ScaledPair> {
    pair.validate()?;
    let gamma = step.gamma();
    let eta = pair.eta;
    let (w, wn, at_apex) = offset_residual(&pair.y, v, gamma)?;
    let r = wn / gamma;
    if eta + gamma * conj.value(r) <= gamma * delta {
        return Ok(ScaledPair::zero(pair.dim()));
    }
    if at_apex {
        return Ok(ScaledPair::new(
            (eta + gamma * (conj.value(0.0) - delta)).max(0.0),
            w,
        ));
    }
    let a = eta / gamma - delta;
    let psi = |s: f64| (conj.value(s) + a) * conj.derivative(s) + s;
    let dpsi = |s: f64| {
        let d = conj.derivative(s);
        d * d + (conj.value(s) + a) * conj.second_derivative(s) + 1.0
    };
    let t = invert_monotone(
        &MonotoneRootProblem::new(&psi, r)
            .with_derivative(&dpsi)
            .with_bracket_hi(r.max(f64::MIN_POSITIVE)),
    )?;
    Ok(ScaledPair::new(
        (eta + gamma * (conj.value(t) - delta)).max(0.0),
        shrink(&w, (1.0 - gamma * t / wn).max(0.0)),
    ))
}

/// Prox of the perspective of a radially symmetric base.
pub fn prox_perspective_radial<C: EvenConjugate>(
    spec: &RadialSpec<C>,
    step: ProxStep,
    pair: &ScaledPair,
) -> Result<ScaledPair> {
    radial_engine(&spec.conjugate, spec.delta, &spec.v, step, pair)
}

/// Prox of the perspective of `-sqrt(1 - ||.||^2)` (conjugate `sqrt(1 + ||.||^2)`).
pub fn prox_perspective_sqrt(step: ProxStep, pair: &ScaledPair) -> Result<ScaledPair> {
    radial_engine(&SqrtConjugate, 0.0, &[], step, pair)
}

/// Prox of the perspective of `||.||^q / alpha + delta + <., v>`.
pub fn prox_perspective_power(
    spec: &PowerSpec,
    step: ProxStep,
    pair: &ScaledPair,
) -> Result<ScaledPair> {
    spec.validate()?;
    pair.validate()?;
    let gamma = step.gamma();
    let eta = pair.eta;
    let (qs, rho) = (spec.qstar(), spec.rho_const());
    let (w, wn, at_apex) = offset_residual(&pair.y, &spec.v, gamma)?;
    let conj = |s: f64| rho * s.powf(qs) / qs;
    if eta + gamma * conj(wn / gamma) <= gamma * spec.delta {
        return Ok(ScaledPair::zero(pair.dim()));
    }
    if at_apex {
        return Ok(ScaledPair::new((eta - gamma * spec.delta).max(0.0), w));
    }
    let t = solve_power_polynomial(qs, eta - gamma * spec.delta, gamma, rho, wn)?;
    Ok(ScaledPair::new(
        (eta + gamma * (conj(t) - spec.delta)).max(0.0),
        shrink(&w, (1.0 - gamma * t / wn).max(0.0)),
    ))
}

/// Prox of the perspective of `||.||^2 / alpha + delta + <., v>` via Cardano.
pub fn prox_perspective_quadratic(
    alpha: f64,
    delta: f64,
    v: &[f64],
    step: ProxStep,
    pair: &ScaledPair,
) -> Result<ScaledPair> {
    if !(alpha > 0.0 && alpha.is_finite()) || !delta.is_finite() {
        return Err(Error::Argument(format!(
            "quadratic perspective needs alpha > 0 and finite delta, got {alpha}, {delta}"
        )));
    }
    check_finite_slice("v", v)?;
    pair.validate()?;
    let gamma = step.gamma();
    let eta = pair.eta;
    let (w, wn, at_apex) = offset_residual(&pair.y, v, gamma)?;
    if eta + alpha * wn * wn / (4.0 * gamma) <= gamma * delta {
        return Ok(ScaledPair::zero(pair.dim()));
    }
    if at_apex {
        return Ok(ScaledPair::new((eta - gamma * delta).max(0.0), w));
    }
    let a2g = alpha * alpha * gamma;
    let t = solve_depressed_cubic(
        (4.0 * alpha * (eta - gamma * delta) + 8.0 * gamma) / a2g,
        -8.0 * wn / a2g,
    )?;
    Ok(ScaledPair::new(
        (eta + gamma * (alpha * t * t / 4.0 - delta)).max(0.0),
        shrink(&w, (1.0 - gamma * t / wn).max(0.0)),
    ))
}

/// Prox of the perspective of `phi0(d_B(.))`, `B` the closed unit ball.
///
/// The perspective vanishes on the cone `{||y|| <= eta}`, where the prox is
/// the identity.
pub fn prox_perspective_distance_ball(
    conj: &dyn EvenConjugate,
    step: ProxStep,
    pair: &ScaledPair,
) -> Result<ScaledPair> {
    check_normalized(conj)?;
    pair.validate()?;
    let gamma = step.gamma();
    let eta = pair.eta;
    let yn = norm(&pair.y);
    if yn <= eta {
        return Ok(pair.clone());
    }
    if eta + yn + gamma * conj.value(yn / gamma) <= 0.0 {
        return Ok(ScaledPair::zero(pair.dim()));
    }
    let a = eta / gamma;
    let psi = |s: f64| s + (a + s + conj.value(s)) * (1.0 + conj.derivative(s));
    let dpsi = |s: f64| {
        let d = 1.0 + conj.derivative(s);
        1.0 + d * d + (a + s + conj.value(s)) * conj.second_derivative(s)
    };
    let r = yn / gamma;
    let t = invert_monotone(
        &MonotoneRootProblem::new(&psi, r)
            .with_derivative(&dpsi)
            .with_bracket_hi(r.max(f64::MIN_POSITIVE)),
    )?;
    Ok(ScaledPair::new(
        (eta + gamma * (t + conj.value(t))).max(0.0),
        shrink(&pair.y, (1.0 - gamma * t / yn).max(0.0)),
    ))
}

/// Projection onto `[0, inf[ x R^N_+`.
pub fn orthant_cone_projection(pair: &ScaledPair) -> ScaledPair {
    ScaledPair::new(
        pair.eta.max(0.0),
        pair.y.iter().map(|v| v.max(0.0)).collect::<Vec<_>>(),
    )
}

/// Prox of the perspective of `sqrt(1 + ||.||^2) + iota_D`, `D` a closed
/// convex cone, given the projector onto `K = [0, inf[ x D`.
pub fn prox_perspective_sqrt_cone(
    cone_projector: &dyn Fn(&ScaledPair) -> ScaledPair,
    step: ProxStep,
    pair: &ScaledPair,
) -> Result<ScaledPair> {
    pair.validate()?;
    let gamma = step.gamma();
    let p = cone_projector(pair);
    let n = p.norm();
    if n <= gamma {
        return Ok(ScaledPair::zero(pair.dim()));
    }
    Ok(p.scaled(1.0 - gamma / n))
}

fn check_scalar_pair(eta: f64, y: f64) -> Result<()> {
    if eta.is_finite() && y.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "eta and y must be finite, got {eta}, {y}"
        )))
    }
}

fn sign(y: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else if y < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Prox of the perspective of the Huber function with knee `rho`, scalar case.
pub fn prox_perspective_huber(
    spec: HuberSpec,
    step: ProxStep,
    eta: f64,
    y: f64,
) -> Result<(f64, f64)> {
    check_scalar_pair(eta, y)?;
    let gamma = step.gamma();
    let rho = spec.rho;
    let ay = y.abs();
    let knee = gamma * rho * rho / 2.0;
    if eta + y * y / (2.0 * gamma) <= 0.0 && ay <= gamma * rho {
        return Ok((0.0, 0.0));
    }
    if eta <= -knee && ay > gamma * rho {
        return Ok((0.0, y - gamma * rho * sign(y)));
    }
    if eta > -knee && ay > rho * eta + gamma * rho * (1.0 + rho * rho / 2.0) {
        return Ok((eta + knee, y - gamma * rho * sign(y)));
    }
    let p = prox_perspective_quadratic(2.0, 0.0, &[], step, &ScaledPair::new(eta, [y]))?;
    Ok((p.eta, p.y[0]))
}

/// Prox of the perspective of the Vapnik loss `max(|.| - epsilon, 0)`, scalar case.
pub fn prox_perspective_vapnik(
    spec: VapnikSpec,
    step: ProxStep,
    eta: f64,
    y: f64,
) -> Result<(f64, f64)> {
    check_scalar_pair(eta, y)?;
    let gamma = step.gamma();
    let eps = spec.epsilon;
    let ay = y.abs();
    let s = sign(y);
    let ramp = eps * eta + gamma * (1.0 + eps * eps);
    if eta + eps * ay <= 0.0 && ay <= gamma {
        return Ok((0.0, 0.0));
    }
    if eta <= -gamma * eps && ay > gamma {
        return Ok((0.0, y - gamma * s));
    }
    if eta > -gamma * eps && ay > ramp {
        return Ok((eta + gamma * eps, y - gamma * s));
    }
    if ay > -eta / eps && eps * eta <= ay && ay <= ramp {
        let c = (eta + eps * ay) / (1.0 + eps * eps);
        return Ok((c, eps * c * s));
    }
    if eta >= 0.0 && ay <= eps * eta {
        return Ok((eta, y));
    }
    Err(Error::Domain(format!(
        "no Vapnik case region contains ({eta}, {y})"
    )))
}

/// Applies a scalar perspective prox independently to each coordinate/block.
///
/// `steps` holds one step per coordinate, or a single step shared by all.
pub fn prox_separable_perspective<F>(
    scalar_prox: F,
    steps: &[ProxStep],
    x: &[f64],
    y: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: Fn(ProxStep, &ScaledPair) -> Result<ScaledPair> + Sync,
{
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "{} scale coordinates but {} blocks",
            x.len(),
            y.len()
        )));
    }
    if steps.len() != 1 && steps.len() != x.len() {
        return Err(Error::Argument(format!(
            "expected 1 or {} prox steps, got {}",
            x.len(),
            steps.len()
        )));
    }
    let parts: Vec<ScaledPair> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let step = if steps.len() == 1 { steps[0] } else { steps[i] };
            let out = scalar_prox(step, &ScaledPair::new(x[i], y[i].clone()))?;
            if out.dim() != y[i].len() {
                return Err(Error::Argument(format!("block {i} changed dimension")));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().map(|p| (p.eta, p.y)).unzip())
}

/// `(0, y - P_{gamma dom phi*}(y))`, the prox once the scale is known to vanish.
pub fn prox_closed_domain_ray(
    dom_projector: &dyn Projector,
    step: ProxStep,
    pair: &ScaledPair,
) -> ScaledPair {
    let gamma = step.gamma();
    let u: Vec<f64> = pair.y.iter().map(|v| v / gamma).collect();
    let p = dom_projector.project(&u);
    ScaledPair::new(
        0.0,
        pair.y
            .iter()
            .zip(&p)
            .map(|(a, b)| a - gamma * b)
            .collect::<Vec<_>>(),
    )
}

/// The perspective families with a built-in prox, addressed uniformly on
/// flat vectors `[eta, y_1, ..., y_N]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PerspectiveKind {
    Radial {
        #[serde(flatten)]
        profile: Profile,
        #[serde(default)]
        delta: f64,
        #[serde(default)]
        v: Vec<f64>,
    },
    Sqrt,
    Power(PowerSpec),
    Quadratic {
        alpha: f64,
        #[serde(default)]
        delta: f64,
        #[serde(default)]
        v: Vec<f64>,
    },
    DistanceBall {
        #[serde(flatten)]
        profile: Profile,
    },
    ConeOrthant,
    Huber(HuberSpec),
    Vapnik(VapnikSpec),
    /// Sum over blocks of `block` ambient coordinates `[eta_i, y_i]`.
    Separable {
        inner: Box<PerspectiveKind>,
        block: usize,
    },
}

impl PerspectiveKind {
    pub const NAMES: [&'static str; 9] = [
        "radial",
        "sqrt",
        "power",
        "quadratic",
        "distance-ball",
        "cone-orthant",
        "huber",
        "vapnik",
        "separable",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PerspectiveKind::Radial { .. } => "radial",
            PerspectiveKind::Sqrt => "sqrt",
            PerspectiveKind::Power(_) => "power",
            PerspectiveKind::Quadratic { .. } => "quadratic",
            PerspectiveKind::DistanceBall { .. } => "distance-ball",
            PerspectiveKind::ConeOrthant => "cone-orthant",
            PerspectiveKind::Huber(_) => "huber",
            PerspectiveKind::Vapnik(_) => "vapnik",
            PerspectiveKind::Separable { .. } => "separable",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PerspectiveKind::Radial { profile, delta, v } => {
                profile.validate()?;
                RadialSpec::new(*profile, *delta, v.clone()).map(|_| ())
            }
            PerspectiveKind::Power(spec) => spec.validate(),
            PerspectiveKind::Quadratic { alpha, delta, v } => {
                PowerSpec::new(2.0, *alpha, *delta, v.clone()).map(|_| ())
            }
            PerspectiveKind::DistanceBall { profile } => profile.validate(),
            PerspectiveKind::Huber(spec) => HuberSpec::new(spec.rho).map(|_| ()),
            PerspectiveKind::Vapnik(spec) => VapnikSpec::new(spec.epsilon).map(|_| ()),
            PerspectiveKind::Separable { inner, block } => {
                if *block < 2 {
                    return Err(Error::Argument(
                        "separable blocks need at least 2 coordinates".into(),
                    ));
                }
                if matches!(**inner, PerspectiveKind::Separable { .. }) {
                    return Err(Error::Argument("separable kinds cannot nest".into()));
                }
                inner.validate()?;
                inner.check_dim(*block)
            }
            PerspectiveKind::Sqrt | PerspectiveKind::ConeOrthant => Ok(()),
        }
    }

    /// Checks that a flat vector of length `len` is a valid argument.
    pub fn check_dim(&self, len: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Argument(msg));
        if len < 2 {
            return bad(format!(
                "{} needs eta and at least one y coordinate",
                self.name()
            ));
        }
        let n = len - 1;
        match self {
            PerspectiveKind::Huber(_) | PerspectiveKind::Vapnik(_) if n != 1 => bad(format!(
                "{} is defined for scalar y, got dimension {n}",
                self.name()
            )),
            PerspectiveKind::Radial { v, .. }
            | PerspectiveKind::Quadratic { v, .. }
            | PerspectiveKind::Power(PowerSpec { v, .. })
                if !v.is_empty() && v.len() != n =>
            {
                bad(format!(
                    "linear term has dimension {} but y has {n}",
                    v.len()
                ))
            }
            PerspectiveKind::Separable { block, .. } if len % block != 0 => bad(format!(
                "length {len} is not a multiple of the block size {block}"
            )),
            _ => Ok(()),
        }
    }

    /// Prox of `gamma` times the perspective at the flat point `x`.
    pub fn prox_flat(&self, step: ProxStep, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let pair = ScaledPair::from_flat(x);
        let out = match self {
            PerspectiveKind::Radial { profile, delta, v } => prox_perspective_radial(
                &RadialSpec::new(*profile, *delta, v.clone())?,
                step,
                &pair,
            )?,
            PerspectiveKind::Sqrt => prox_perspective_sqrt(step, &pair)?,
            PerspectiveKind::Power(spec) => prox_perspective_power(spec, step, &pair)?,
            PerspectiveKind::Quadratic { alpha, delta, v } => {
                prox_perspective_quadratic(*alpha, *delta, v, step, &pair)?
            }
            PerspectiveKind::DistanceBall { profile } => {
                profile.validate()?;
                prox_perspective_distance_ball(profile, step, &pair)?
            }
            PerspectiveKind::ConeOrthant => {
                prox_perspective_sqrt_cone(&orthant_cone_projection, step, &pair)?
            }
            PerspectiveKind::Huber(spec) => {
                let (e, y) = prox_perspective_huber(*spec, step, pair.eta, pair.y[0])?;
                ScaledPair::new(e, [y])
            }
            PerspectiveKind::Vapnik(spec) => {
                let (e, y) = prox_perspective_vapnik(*spec, step, pair.eta, pair.y[0])?;
                ScaledPair::new(e, [y])
            }
            PerspectiveKind::Separable { inner, block } => {
                self.validate()?;
                let etas: Vec<f64> = x.chunks(*block).map(|c| c[0]).collect();
                let ys: Vec<Vec<f64>> = x.chunks(*block).map(|c| c[1..].to_vec()).collect();
                let (e, y) = prox_separable_perspective(
                    |s, p| {
                        inner
                            .prox_flat(s, &p.to_flat())
                            .map(|f| ScaledPair::from_flat(&f))
                    },
                    &[step],
                    &etas,
                    &ys,
                )?;
                return Ok(e
                    .into_iter()
                    .zip(y)
                    .flat_map(|(e, y)| std::iter::once(e).chain(y))
                    .collect());
            }
        };
        Ok(out.to_flat())
    }

    /// `true` for kinds whose conjugate has an open domain, where the prox
    /// vanishes exactly on the threshold gate.
    pub fn has_open_conjugate_domain(&self) -> bool {
        match self {
            PerspectiveKind::ConeOrthant
            | PerspectiveKind::Huber(_)
            | PerspectiveKind::Vapnik(_) => false,
            PerspectiveKind::Separable { inner, .. } => inner.has_open_conjugate_domain(),
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(g: f64) -> ProxStep {
        ProxStep::new(g).unwrap()
    }

    fn close(a: &ScaledPair, b: &ScaledPair, tol: f64) -> bool {
        a.dim() == b.dim() && a.distance(b) <= tol
    }

    const HALF_SQUARE: Profile = Profile::Power {
        exponent: 2.0,
        scale: 1.0,
    };

    #[test]
    fn radial_apex_ray() {
        let spec = RadialSpec::new(Profile::Cosh, 0.0, vec![]).unwrap();
        let out =
            prox_perspective_radial(&spec, step(1.0), &ScaledPair::new(2.5, [0.0, 0.0])).unwrap();
        assert_eq!(out, ScaledPair::new(2.5, [0.0, 0.0]));
    }

    #[test]
    fn radial_half_square_matches_cardano_example() {
        let spec = RadialSpec::new(HALF_SQUARE, 0.0, vec![]).unwrap();
        let out =
            prox_perspective_radial(&spec, step(1.0), &ScaledPair::new(0.0, [2.0, 0.0])).unwrap();
        // Brute-force Moreau minimum: (t^2/2, 2 - t) with t^3 + 2t - 4 = 0.
        let expect = ScaledPair::new(0.695_620_77, [0.820_490_98, 0.0]);
        assert!(close(&out, &expect, 1e-7), "{out:?}");
        let q =
            prox_perspective_quadratic(2.0, 0.0, &[], step(1.0), &ScaledPair::new(0.0, [2.0, 0.0]))
                .unwrap();
        assert!(close(&out, &q, 1e-12));
    }

    #[test]
    fn radial_rejects_unnormalized_profile() {
        assert!(RadialSpec::new(SqrtConjugate, 0.0, vec![]).is_err());
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(
            prox_perspective_sqrt(step(1.0), &ScaledPair::new(-2.0, [0.0, 0.0])).unwrap(),
            ScaledPair::zero(2)
        );
        let out = prox_perspective_sqrt(step(1.0), &ScaledPair::new(0.0, [3.0, 0.0])).unwrap();
        assert!(
            close(&out, &ScaledPair::new(3.25f64.sqrt(), [1.5, 0.0]), 1e-10),
            "{out:?}"
        );
        let out = prox_perspective_sqrt(step(1.0), &ScaledPair::new(5.0, [0.0, 0.0])).unwrap();
        assert_eq!(out, ScaledPair::new(6.0, [0.0, 0.0]));
    }

    #[test]
    fn power_examples() {
        for q in [1.5, 2.0, 7.0 / 6.0, 9.0 / 8.0, 3.0] {
            let spec = PowerSpec::new(q, 0.7, 0.0, vec![]).unwrap();
            let out = prox_perspective_power(&spec, step(1.0), &ScaledPair::new(1.0, [0.0, 0.0]))
                .unwrap();
            assert_eq!(out, ScaledPair::new(1.0, [0.0, 0.0]));
        }
        let spec = PowerSpec::new(2.0, 2.0, 0.0, vec![]).unwrap();
        assert_eq!(spec.rho_const(), 1.0);
        let out =
            prox_perspective_power(&spec, step(1.0), &ScaledPair::new(0.0, [2.0, 0.0])).unwrap();
        assert!(close(
            &out,
            &ScaledPair::new(0.695_620_77, [0.820_490_98, 0.0]),
            1e-7
        ));
    }

    #[test]
    fn power_with_offsets_matches_brute_force() {
        // Frozen from a brute-force Moreau minimization with alpha=2,
        // delta=0.7, v=(0.3,-0.2), gamma=1.3 at (0.4, (1.5, 0.2)).
        let spec = PowerSpec::new(2.0, 2.0, 0.7, vec![0.3, -0.2]).unwrap();
        let out =
            prox_perspective_power(&spec, step(1.3), &ScaledPair::new(0.4, [1.5, 0.2])).unwrap();
        assert!((out.eta - 0.024_730_69).abs() < 1e-6, "{out:?}");
        let quad = prox_perspective_quadratic(
            2.0,
            0.7,
            &[0.3, -0.2],
            step(1.3),
            &ScaledPair::new(0.4, [1.5, 0.2]),
        )
        .unwrap();
        assert!(close(&out, &quad, 1e-12));
    }

    #[test]
    fn quadratic_examples() {
        let s = step(1.0);
        assert_eq!(
            prox_perspective_quadratic(2.0, 0.0, &[], s, &ScaledPair::new(-1.0, [0.0, 0.0]))
                .unwrap(),
            ScaledPair::zero(2)
        );
        assert_eq!(
            prox_perspective_quadratic(2.0, 0.0, &[], s, &ScaledPair::new(1.0, [0.0, 0.0]))
                .unwrap(),
            ScaledPair::new(1.0, [0.0, 0.0])
        );
    }

    #[test]
    fn distance_ball_examples() {
        let s = step(1.0);
        let p = &HALF_SQUARE;
        assert_eq!(
            prox_perspective_distance_ball(p, s, &ScaledPair::new(2.0, [1.0, 0.0])).unwrap(),
            ScaledPair::new(2.0, [1.0, 0.0])
        );
        assert_eq!(
            prox_perspective_distance_ball(p, s, &ScaledPair::new(-5.0, [0.5, 0.0])).unwrap(),
            ScaledPair::zero(2)
        );
        let out = prox_perspective_distance_ball(p, s, &ScaledPair::new(0.0, [4.0, 0.0])).unwrap();
        assert!(
            close(&out, &ScaledPair::new(1.5, [3.0, 0.0]), 1e-10),
            "{out:?}"
        );
    }

    #[test]
    fn cone_examples() {
        let s = step(1.0);
        let f = |e: f64, y: [f64; 2]| {
            prox_perspective_sqrt_cone(&orthant_cone_projection, s, &ScaledPair::new(e, y)).unwrap()
        };
        assert_eq!(f(-1.0, [-2.0, -3.0]), ScaledPair::zero(2));
        assert!(close(
            &f(3.0, [4.0, 0.0]),
            &ScaledPair::new(2.4, [3.2, 0.0]),
            1e-15
        ));
        assert_eq!(f(0.6, [0.0, 0.8]), ScaledPair::zero(2));
    }

    #[test]
    fn huber_examples() {
        let s = step(1.0);
        let h = HuberSpec::new(1.0).unwrap();
        assert_eq!(prox_perspective_huber(h, s, -1.0, 0.5).unwrap(), (0.0, 0.0));
        assert_eq!(prox_perspective_huber(h, s, -1.0, 2.0).unwrap(), (0.0, 1.0));
        assert_eq!(prox_perspective_huber(h, s, 0.0, 3.0).unwrap(), (0.5, 2.0));
        // Case-2 radius is gamma * rho: |y| = 1.5 lies inside it for rho = 2.
        let h2 = HuberSpec::new(2.0).unwrap();
        assert_eq!(
            prox_perspective_huber(h2, s, -3.0, 2.5).unwrap(),
            (0.0, 0.5)
        );
        assert_eq!(
            prox_perspective_huber(h2, s, -3.0, 1.5).unwrap(),
            (0.0, 0.0)
        );
    }

    #[test]
    fn vapnik_examples() {
        let s = step(1.0);
        let v = VapnikSpec::new(0.5).unwrap();
        assert_eq!(
            prox_perspective_vapnik(v, s, -1.0, 0.5).unwrap(),
            (0.0, 0.0)
        );
        assert_eq!(prox_perspective_vapnik(v, s, 1.0, 0.3).unwrap(), (1.0, 0.3));
        assert_eq!(prox_perspective_vapnik(v, s, 0.0, 2.0).unwrap(), (0.5, 1.0));
    }

    #[test]
    fn closed_domain_ray_examples() {
        use crate::prox::Interval;
        let s = step(1.0);
        let d = Interval { lo: -1.0, hi: 1.0 };
        assert_eq!(
            prox_closed_domain_ray(&d, s, &ScaledPair::new(-9.0, [2.0])),
            ScaledPair::new(0.0, [1.0])
        );
        assert_eq!(
            prox_closed_domain_ray(&d, s, &ScaledPair::new(-9.0, [0.5])),
            ScaledPair::new(0.0, [0.0])
        );
        assert_eq!(
            prox_closed_domain_ray(&d, s, &ScaledPair::new(-9.0, [-3.0])),
            ScaledPair::new(0.0, [-2.0])
        );
    }

    #[test]
    fn separable_examples() {
        let quad = |s: ProxStep, p: &ScaledPair| prox_perspective_quadratic(2.0, 0.0, &[], s, p);
        let (e, y) =
            prox_separable_perspective(quad, &[step(1.0)], &[1.0, -1.0], &[vec![0.0], vec![0.0]])
                .unwrap();
        assert_eq!(e, vec![1.0, 0.0]);
        assert_eq!(y, vec![vec![0.0], vec![0.0]]);

        let single = prox_separable_perspective(quad, &[step(0.8)], &[0.3], &[vec![1.7]]).unwrap();
        let direct = quad(step(0.8), &ScaledPair::new(0.3, [1.7])).unwrap();
        assert_eq!((single.0[0], single.1[0][0]), (direct.eta, direct.y[0]));

        assert!(
            prox_separable_perspective(quad, &[step(1.0)], &[1.0], &[vec![0.0], vec![1.0]])
                .is_err()
        );
        assert!(prox_separable_perspective(
            quad,
            &[step(1.0), step(2.0)],
            &[1.0; 3],
            &vec![vec![0.0]; 3]
        )
        .is_err());
    }

    #[test]
    fn separable_kind_matches_coordinatewise() {
        let inner = PerspectiveKind::Huber(HuberSpec::new(1.3).unwrap());
        let kind = PerspectiveKind::Separable {
            inner: Box::new(inner.clone()),
            block: 2,
        };
        let x = [0.2, 1.9, -0.4, -0.1, 1.0, 3.0];
        let out = kind.prox_flat(step(0.9), &x).unwrap();
        for (c, o) in x.chunks(2).zip(out.chunks(2)) {
            assert_eq!(inner.prox_flat(step(0.9), c).unwrap(), o.to_vec());
        }
    }

    #[test]
    fn kind_dimension_checks() {
        let h = PerspectiveKind::Huber(HuberSpec::new(1.0).unwrap());
        assert!(h.prox_flat(step(1.0), &[0.0, 1.0, 2.0]).is_err());
        let q = PerspectiveKind::Quadratic {
            alpha: 2.0,
            delta: 0.0,
            v: vec![1.0, 2.0],
        };
        assert!(q.prox_flat(step(1.0), &[0.0, 1.0]).is_err());
        assert!(PowerSpec::new(1.0, 1.0, 0.0, vec![]).is_err());
    }

    #[test]
    fn kind_serde_round_trip() {
        let kinds = vec![
            PerspectiveKind::Radial {
                profile: Profile::Cosh,
                delta: 0.1,
                v: vec![0.2],
            },
            PerspectiveKind::Power(PowerSpec::new(1.5, 0.5, 0.0, vec![]).unwrap()),
            PerspectiveKind::DistanceBall {
                profile: HALF_SQUARE,
            },
            PerspectiveKind::Separable {
                inner: Box::new(PerspectiveKind::Sqrt),
                block: 3,
            },
        ];
        for k in kinds {
            let s = serde_json::to_string(&k).unwrap();
            assert_eq!(
                serde_json::from_str::<PerspectiveKind>(&s).unwrap(),
                k,
                "{s}"
            );
        }
    }
}
