use crate::error::{ensure_finite, Error, Result};

use super::unit_scale;

const MAX_BRACKET: f64 = 1_152_921_504_606_846_976.0; // 2^60
const MAX_ROOT_ITERS: usize = 400;

/// Real polynomial stored with ascending-degree coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coefficients: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial, trimming trailing zero coefficients. The result
    /// must have degree at least one.
    pub fn new(mut coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument(
                "polynomial coefficients must be finite".into(),
            ));
        }
        while coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        if coefficients.len() < 2 {
            return Err(Error::Argument("polynomial must have degree >= 1".into()));
        }
        Ok(Self { coefficients })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * s + c)
    }

    /// Value and first derivative by a joint Horner pass.
    pub fn eval_with_derivative(&self, s: f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut deriv = 0.0;
        for &c in self.coefficients.iter().rev() {
            deriv = deriv * s + value;
            value = value * s + c;
        }
        (value, deriv)
    }

    /// Sum of the absolute values of the terms at `s`; the natural rounding
    /// scale of [`Polynomial::eval`].
    pub fn magnitude(&self, s: f64) -> f64 {
        let mut pow = 1.0;
        let mut total = 0.0;
        for &c in &self.coefficients {
            total += (c * pow).abs();
            pow *= s;
        }
        total
    }

    /// The root in `]0, +inf[` of a polynomial with `P(0) < 0` and a positive
    /// leading coefficient, assumed to cross zero exactly once there.
    ///
    /// Newton steps are kept inside a sign-change bracket whose upper end is
    /// the Cauchy bound; any step that leaves the bracket (for instance when
    /// Newton is attracted by a nearby complex pair) falls back to bisection.
    pub fn positive_root(&self) -> Result<f64> {
        let lead = *self.coefficients.last().unwrap();
        let c0 = self.coefficients[0];
        if !(c0 < 0.0 && lead > 0.0) {
            return Err(Error::Domain(format!(
                "positive_root needs P(0) < 0 < leading coefficient, got P(0)={c0}, lead={lead}"
            )));
        }
        let cauchy = 1.0
            + self.coefficients[..self.degree()]
                .iter()
                .map(|c| (c / lead).abs())
                .fold(0.0, f64::max);
        let f = |s: f64| {
            let (v, d) = self.eval_with_derivative(s);
            (v, Some(d))
        };
        let tol_scale = |s: f64| self.magnitude(s).max(1.0);
        let root = bracketed_root(f, 0.0, c0, cauchy, self.eval(cauchy), |s| {
            1e-12 * tol_scale(s)
        })?;
        Ok(root)
    }
}

/// Scalar equation `psi(s) = target` on `[0, +inf[` for an increasing `psi`.
///
/// The solver only relies on `psi(s) - target` changing sign once on the
/// half-line, which is what the perspective proxes guarantee even when their
/// `psi` dips below zero near the origin.
pub struct MonotoneRootProblem<'a> {
    pub function: &'a dyn Fn(f64) -> f64,
    pub derivative: Option<&'a dyn Fn(f64) -> f64>,
    pub target: f64,
    pub bracket_hi: f64,
}

impl<'a> MonotoneRootProblem<'a> {
    pub fn new(function: &'a dyn Fn(f64) -> f64, target: f64) -> Self {
        Self {
            function,
            derivative: None,
            target,
            bracket_hi: 1.0,
        }
    }

    pub fn with_derivative(mut self, derivative: &'a dyn Fn(f64) -> f64) -> Self {
        self.derivative = Some(derivative);
        self
    }

    pub fn with_bracket_hi(mut self, hi: f64) -> Self {
        self.bracket_hi = hi;
        self
    }
}

/// Inverts an increasing function: returns `t >= 0` with
/// `|psi(t) - target| <= 1e-10 * max(1, |target|)`.
pub fn invert_monotone(problem: &MonotoneRootProblem<'_>) -> Result<f64> {
    let psi = problem.function;
    let target = problem.target;
    ensure_finite("target", target)?;
    if !(problem.bracket_hi > 0.0 && problem.bracket_hi.is_finite()) {
        return Err(Error::Argument(format!(
            "bracket_hi must be positive, got {}",
            problem.bracket_hi
        )));
    }
    let tol = 1e-10 * unit_scale(target);
    let eval = |s: f64| -> Result<f64> {
        let v = psi(s);
        if v.is_finite() {
            Ok(v - target)
        } else {
            Err(Error::Domain(format!("psi({s}) = {v} is not finite")))
        }
    };

    let g0 = eval(0.0)?;
    if g0.abs() <= tol {
        return Ok(0.0);
    }
    if g0 > 0.0 {
        return Err(Error::Argument(format!(
            "psi(0) exceeds the target by {g0:e}; no nonnegative preimage"
        )));
    }

    let mut lo = 0.0;
    let mut glo = g0;
    let mut hi = problem.bracket_hi;
    let mut ghi = eval(hi)?;
    while ghi < 0.0 {
        lo = hi;
        glo = ghi;
        hi *= 2.0;
        if hi > MAX_BRACKET {
            return Err(Error::Convergence(
                "bracket expansion exceeded 2^60 without reaching the target".into(),
            ));
        }
        ghi = eval(hi)?;
    }
    if ghi.abs() <= tol {
        return Ok(hi);
    }

    let f = |s: f64| {
        let v = psi(s) - target;
        (v, problem.derivative.map(|d| d(s)))
    };
    bracketed_root(f, lo, glo, hi, ghi, |_| tol)
}

/// Safeguarded Newton (or regula falsi without a derivative) on a bracket
/// `[lo, hi]` with `g(lo) < 0 < g(hi)`.
fn bracketed_root<F, T>(
    f: F,
    mut lo: f64,
    mut glo: f64,
    mut hi: f64,
    mut ghi: f64,
    tol: T,
) -> Result<f64>
where
    F: Fn(f64) -> (f64, Option<f64>),
    T: Fn(f64) -> f64,
{
    if !(glo <= 0.0 && ghi >= 0.0) {
        return Err(Error::Domain(format!(
            "root bracket [{lo}, {hi}] has no sign change ({glo:e}, {ghi:e})"
        )));
    }
    let mut x = if glo.abs() < ghi.abs() { lo } else { hi };
    let mut gx = if x == lo { glo } else { ghi };
    let mut dgx = f(x).1;
    let mut last_side = 0i8;
    let mut same_side = 0u32;

    for _ in 0..MAX_ROOT_ITERS {
        // Newton candidate from the current point, else a regula-falsi point.
        let mut candidate = match dgx {
            Some(d) if d.is_finite() && d != 0.0 => x - gx / d,
            _ => (lo * ghi - hi * glo) / (ghi - glo),
        };
        // Two updates on the same side in a row: force a bisection so the
        // bracket always shrinks geometrically.
        if !(candidate > lo && candidate < hi) || same_side >= 2 {
            candidate = 0.5 * (lo + hi);
            same_side = 0;
        }
        if candidate <= lo || candidate >= hi {
            // Bracket collapsed to adjacent floats.
            return Ok(if glo.abs() <= ghi.abs() { lo } else { hi });
        }
        x = candidate;
        let (g, d) = f(x);
        if !g.is_finite() {
            return Err(Error::Domain(format!("root function is not finite at {x}")));
        }
        gx = g;
        dgx = d;
        if gx.abs() <= tol(x) {
            return Ok(x);
        }
        let side = if gx < 0.0 { -1 } else { 1 };
        if side == last_side {
            same_side += 1;
        } else {
            same_side = 0;
        }
        last_side = side;
        if gx < 0.0 {
            lo = x;
            glo = gx;
        } else {
            hi = x;
            ghi = gx;
        }
    }
    Err(Error::Convergence(format!(
        "root finder stalled on [{lo}, {hi}] with residual {gx:e}"
    )))
}

/// Positive root of the depressed cubic `s^3 + p s + q = 0`.
///
/// Cardano's closed form in the one-real-root regime, the trigonometric form
/// when all three roots are real, then Newton polish. The residual satisfies
/// `|t^3 + p t + q| <= 1e-12 * max(1, |p|, |q|)`.
pub fn solve_depressed_cubic(p: f64, q: f64) -> Result<f64> {
    ensure_finite("p", p)?;
    ensure_finite("q", q)?;
    let cubic = |t: f64| t * t * t + p * t + q;
    let tol = 1e-12 * p.abs().max(q.abs()).max(1.0);

    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;

    let mut t = if p < 0.0 && disc <= 0.0 {
        // Three real roots; the largest one.
        let m = 2.0 * (-third_p).sqrt();
        let arg = ((3.0 * q) / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        m * (arg.acos() / 3.0).cos()
    } else {
        let sq = disc.sqrt();
        // Pick the sign that avoids cancellation in -q/2 -/+ sqrt(disc).
        let a = if q > 0.0 { -half_q - sq } else { -half_q + sq };
        let u = a.cbrt();
        if u == 0.0 {
            0.0
        } else {
            let v = -third_p / u;
            if p > 0.0 {
                // t = -q / (t^2 + p) with t^2 + p = u^2 + v^2 + p/3: no cancellation.
                -q / (u * u + v * v + third_p)
            } else {
                u + v
            }
        }
    };

    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "cubic s^3 + ({p}) s + ({q}) has no positive root"
        )));
    }

    for _ in 0..4 {
        let r = cubic(t);
        if r.abs() <= tol * 1e-2 {
            break;
        }
        let d = 3.0 * t * t + p;
        if d <= 0.0 {
            break;
        }
        let next = t - r / d;
        if next > 0.0 && cubic(next).abs() <= r.abs() {
            t = next;
        } else {
            break;
        }
    }
    let r = cubic(t);
    if r.abs() > tol {
        return Err(Error::Convergence(format!(
            "cubic residual {r:e} exceeds tolerance {tol:e}"
        )));
    }
    Ok(t)
}

/// Positive root of
/// `s^(2q*-1) + (q* eta_shift / (gamma rho)) s^(q*-1) + (q* / rho^2) s - q* rhs_norm / (gamma rho^2) = 0`.
///
/// `q* = 2` goes through Cardano, other integer `q*` through a bracketed
/// polynomial Newton, and non-integer `q*` through [`invert_monotone`] on the
/// left-hand side.
pub fn solve_power_polynomial(
    qstar: f64,
    eta_shift: f64,
    gamma: f64,
    rho_const: f64,
    rhs_norm: f64,
) -> Result<f64> {
    for (name, v) in [
        ("qstar", qstar),
        ("eta_shift", eta_shift),
        ("gamma", gamma),
        ("rho_const", rho_const),
        ("rhs_norm", rhs_norm),
    ] {
        ensure_finite(name, v)?;
    }
    if qstar <= 1.0 || gamma <= 0.0 || rho_const <= 0.0 || rhs_norm <= 0.0 {
        return Err(Error::Argument(format!(
            "solve_power_polynomial needs qstar > 1, gamma > 0, rho > 0, rhs_norm > 0 \
             (got {qstar}, {gamma}, {rho_const}, {rhs_norm})"
        )));
    }
    let mid = qstar * eta_shift / (gamma * rho_const);
    let lin = qstar / (rho_const * rho_const);
    let rhs = qstar * rhs_norm / (gamma * rho_const * rho_const);

    if (qstar - 2.0).abs() <= 1e-12 {
        return solve_depressed_cubic(mid + lin, -rhs);
    }

    let rounded = qstar.round();
    if (qstar - rounded).abs() <= 1e-12 {
        let k = rounded as usize;
        let mut coeffs = vec![0.0; 2 * k];
        coeffs[0] = -rhs;
        coeffs[1] += lin;
        coeffs[k - 1] += mid;
        coeffs[2 * k - 1] = 1.0;
        return Polynomial::new(coeffs)?.positive_root();
    }

    let e_hi = 2.0 * qstar - 1.0;
    let e_mid = qstar - 1.0;
    let left = move |s: f64| s.powf(e_hi) + mid * s.powf(e_mid) + lin * s;
    let left_d = move |s: f64| e_hi * s.powf(e_hi - 1.0) + mid * e_mid * s.powf(e_mid - 1.0) + lin;
    // rhs / lin bounds the root whenever the middle term is nonnegative;
    // starting there avoids dozens of doublings for extreme coefficients.
    let hi = (rhs / lin).max(1e-300);
    invert_monotone(
        &MonotoneRootProblem::new(&left, rhs)
            .with_derivative(&left_d)
            .with_bracket_hi(hi),
    )
}
