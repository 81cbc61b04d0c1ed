//! Brute-force references for the proximity operators.
//!
//! Everything here is written from the definitions of the base functions and
//! their conjugates, never from the closed forms in [`crate::perspective`]:
//! perspective values are evaluated directly and the prox is found by
//! coarse-to-fine grid minimization of the Moreau objective.

use crate::perspective::{PerspectiveKind, Profile};
use crate::prox::norm;

/// Coarse-to-fine grid search for a convex function on `R^d`.
#[derive(Debug, Clone, Copy)]
pub struct GridMinimizer {
    /// Points per axis; odd so the current center is always evaluated.
    pub points: usize,
    /// Half-width multiplier applied after a pass whose best point is interior.
    pub shrink: f64,
    /// Stop once the half-width falls below this.
    pub resolution: f64,
    pub max_passes: usize,
}

impl Default for GridMinimizer {
    fn default() -> Self {
        Self {
            points: 7,
            shrink: 0.55,
            resolution: 1e-10,
            max_passes: 400,
        }
    }
}

impl GridMinimizer {
    /// Minimizes `f` starting from the box `center +- half_width`.
    pub fn minimize(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        center: &[f64],
        half_width: f64,
    ) -> (Vec<f64>, f64) {
        let d = center.len();
        let k = self.points | 1;
        let mid = (k / 2) as isize;
        let mut best = center.to_vec();
        let mut best_val = f(&best);
        let mut h = half_width;
        let mut point = vec![0.0; d];
        let mut idx = vec![0usize; d];
        for _ in 0..self.max_passes {
            if h < self.resolution {
                break;
            }
            let spacing = h / mid as f64;
            let base = best.clone();
            let mut arg = None;
            idx.iter_mut().for_each(|i| *i = 0);
            loop {
                for j in 0..d {
                    point[j] = base[j] + (idx[j] as isize - mid) as f64 * spacing;
                }
                let v = f(&point);
                if v < best_val {
                    best_val = v;
                    arg = Some(idx.clone());
                }
                // Odometer increment over the k^d grid.
                let mut j = 0;
                while j < d {
                    idx[j] += 1;
                    if idx[j] < k {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == d {
                    break;
                }
            }
            let on_edge = match &arg {
                Some(a) => {
                    for j in 0..d {
                        best[j] = base[j] + (a[j] as isize - mid) as f64 * spacing;
                    }
                    a.iter().any(|&i| i == 0 || i == k - 1)
                }
                None => false,
            };
            if !on_edge {
                h *= self.shrink;
            }
        }
        (best, best_val)
    }
}

/// Minimizes an extended-valued convex function of one variable on `[a, b]`.
///
/// A coarse scan brackets the minimizer between the neighbours of the best
/// sample (valid for any convex function); golden section then refines it,
/// resolving `+inf` ties toward the best finite point seen so far.
pub fn minimize_convex_1d(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const SCAN: usize = 11;
    let step = (b - a) / (SCAN - 1) as f64;
    let (mut bx, mut bf) = (0.5 * (a + b), f64::INFINITY);
    let mut best_i = SCAN / 2;
    for i in 0..SCAN {
        let x = a + i as f64 * step;
        let v = f(x);
        if v < bf {
            (bx, bf, best_i) = (x, v, i);
        }
    }
    if bf == f64::INFINITY {
        return (bx, bf);
    }
    let mut lo = a + best_i.saturating_sub(1) as f64 * step;
    let mut hi = a + (best_i + 1).min(SCAN - 1) as f64 * step;
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        for (x, v) in [(c, fc), (d, fd)] {
            if v < bf {
                (bx, bf) = (x, v);
            }
        }
        let keep_left = if fc == fd { bx <= c } else { fc < fd };
        if keep_left {
            hi = d;
            (d, fd) = (c, fc);
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            (c, fc) = (d, fd);
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < bf {
            (bx, bf) = (x, v);
        }
    }
    (bx, bf)
}

/// Exact-for-convex nested minimization: the partial minimum of a convex
/// function over trailing coordinates is convex in the leading ones, so each
/// level is a one-dimensional convex problem. Cost grows like `50^d`.
pub fn nested_minimize(
    f: &dyn Fn(&[f64]) -> f64,
    center: &[f64],
    half_width: f64,
    tol: f64,
) -> (Vec<f64>, f64) {
    fn level(
        f: &dyn Fn(&[f64]) -> f64,
        prefix: &mut Vec<f64>,
        center: &[f64],
        half: f64,
        tol: f64,
    ) -> (f64, Vec<f64>) {
        let depth = prefix.len();
        if depth == center.len() {
            return (f(prefix), Vec::new());
        }
        let mut best = (f64::INFINITY, center[depth..].to_vec());
        let mut g = |t: f64| {
            prefix.push(t);
            let (v, tail) = level(f, prefix, center, half, tol);
            prefix.pop();
            if v < best.0 {
                best.0 = v;
                best.1.clear();
                best.1.push(t);
                best.1.extend(tail);
            }
            v
        };
        minimize_convex_1d(&mut g, center[depth] - half, center[depth] + half, tol);
        best
    }
    let (v, arg) = level(
        f,
        &mut Vec::with_capacity(center.len()),
        center,
        half_width,
        tol,
    );
    (arg, v)
}

/// Block-coordinate descent over coordinate pairs, each pair minimized
/// exactly by [`nested_minimize`] in a box of `half_width` around the current
/// point; stops when a sweep moves no coordinate by more than `stop`.
pub fn pairwise_polish(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    half_width: f64,
    tol: f64,
    stop: f64,
    sweeps: usize,
) -> Vec<f64> {
    let d = start.len();
    let mut x = start.to_vec();
    for _ in 0..sweeps {
        let mut moved = 0.0f64;
        for i in 0..d {
            for j in i + 1..d {
                let pair = |u: &[f64]| {
                    let mut full = x.clone();
                    full[i] = u[0];
                    full[j] = u[1];
                    f(&full)
                };
                let (arg, _) = nested_minimize(&pair, &[x[i], x[j]], half_width, tol);
                moved = moved.max((arg[0] - x[i]).abs()).max((arg[1] - x[j]).abs());
                x[i] = arg[0];
                x[j] = arg[1];
            }
        }
        if moved <= stop {
            break;
        }
    }
    x
}

/// Search strategy for [`brute_force_prox`].
#[derive(Debug, Clone, Copy)]
pub enum Search {
    Grid(GridMinimizer),
    /// Nested one-dimensional convex minimization to the given width.
    Nested(f64),
    /// Grid search, then [`pairwise_polish`] to the given width.
    GridThenPairs(GridMinimizer, f64),
}

/// Minimizer of `f(u) + ||u - x||^2 / (2 gamma)` by brute-force search.
pub fn brute_force_prox(
    f: &dyn Fn(&[f64]) -> f64,
    gamma: f64,
    x: &[f64],
    search: &Search,
) -> Vec<f64> {
    let objective = |u: &[f64]| {
        let fu = f(u);
        if fu == f64::INFINITY {
            return f64::INFINITY;
        }
        let d2: f64 = u.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        fu + d2 / (2.0 * gamma)
    };
    let half = 1.0 + gamma + 2.0 * norm(x);
    match search {
        Search::Grid(grid) => grid.minimize(&objective, x, half).0,
        Search::Nested(tol) => nested_minimize(&objective, x, half, *tol).0,
        Search::GridThenPairs(grid, tol) => {
            let start = grid.minimize(&objective, x, half).0;
            pairwise_polish(&objective, &start, 0.05 * half, *tol, 1e-9, 200)
        }
    }
}

/// `phi0` for a built-in conjugate profile, from the Fenchel conjugate.
pub fn profile_primal(profile: &Profile, x: f64) -> f64 {
    let x = x.abs();
    match *profile {
        // (c s^e / e)* = c^(-1/(e-1)) x^e' / e' with e' = e / (e - 1).
        Profile::Power { exponent, scale } => {
            let e = exponent / (exponent - 1.0);
            scale.powf(-1.0 / (exponent - 1.0)) * x.powf(e) / e
        }
        Profile::Cosh => x * x.asinh() - (1.0 + x * x).sqrt() + 1.0,
    }
}

/// `phi0*` for a built-in profile, written from its definition.
pub fn profile_conjugate(profile: &Profile, s: f64) -> f64 {
    let s = s.abs();
    match *profile {
        Profile::Power { exponent, scale } => scale * s.powf(exponent) / exponent,
        Profile::Cosh => s.cosh() - 1.0,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Perspective of a superlinear radial base: `eta phi0(||y|| / eta)` for
/// `eta > 0`, `0` at the apex, `+inf` elsewhere.
fn superlinear_perspective(eta: f64, y: &[f64], phi0: impl Fn(f64) -> f64) -> f64 {
    let yn = norm(y);
    if eta > 0.0 {
        eta * phi0(yn / eta)
    } else if eta == 0.0 && yn == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Value of the perspective function at the flat point `[eta, y...]`.
pub fn perspective_value(kind: &PerspectiveKind, x: &[f64]) -> f64 {
    let (eta, y) = (x[0], &x[1..]);
    let linear = |delta: f64, v: &[f64]| delta * eta + if v.is_empty() { 0.0 } else { dot(y, v) };
    match kind {
        PerspectiveKind::Radial { profile, delta, v } => {
            superlinear_perspective(eta, y, |s| profile_primal(profile, s)) + linear(*delta, v)
        }
        PerspectiveKind::Sqrt => {
            // Base -sqrt(1 - ||.||^2) on the unit ball.
            let yn = norm(y);
            if eta >= 0.0 && yn <= eta {
                -((eta - yn) * (eta + yn)).sqrt()
            } else {
                f64::INFINITY
            }
        }
        PerspectiveKind::Power(spec) => {
            superlinear_perspective(eta, y, |s| s.powf(spec.q) / spec.alpha)
                + linear(spec.delta, &spec.v)
        }
        PerspectiveKind::Quadratic { alpha, delta, v } => {
            superlinear_perspective(eta, y, |s| s * s / alpha) + linear(*delta, v)
        }
        PerspectiveKind::DistanceBall { profile } => {
            // Base phi0(d_B(.)), B the unit ball: flat on the cone ||y|| <= eta.
            let yn = norm(y);
            if eta > 0.0 {
                eta * profile_primal(profile, (yn - eta).max(0.0) / eta)
            } else if eta == 0.0 && yn == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
        PerspectiveKind::ConeOrthant => {
            if eta >= 0.0 && y.iter().all(|&v| v >= 0.0) {
                norm(x)
            } else {
                f64::INFINITY
            }
        }
        PerspectiveKind::Huber(spec) => {
            let (rho, a) = (spec.rho, y[0].abs());
            if eta > 0.0 {
                if a <= rho * eta {
                    a * a / (2.0 * eta)
                } else {
                    rho * a - eta * rho * rho / 2.0
                }
            } else if eta == 0.0 {
                rho * a
            } else {
                f64::INFINITY
            }
        }
        PerspectiveKind::Vapnik(spec) => {
            if eta >= 0.0 {
                (y[0].abs() - spec.epsilon * eta).max(0.0)
            } else {
                f64::INFINITY
            }
        }
        PerspectiveKind::Separable { inner, block } => {
            x.chunks(*block).map(|c| perspective_value(inner, c)).sum()
        }
    }
}

/// Conjugate `phi*(u)` of the base function (not of its perspective).
///
/// Separable kinds have no single base; this returns `NaN` for them.
pub fn base_conjugate(kind: &PerspectiveKind, u: &[f64]) -> f64 {
    let shifted = |v: &[f64]| -> f64 {
        if v.is_empty() {
            norm(u)
        } else {
            norm(&u.iter().zip(v).map(|(a, b)| a - b).collect::<Vec<_>>())
        }
    };
    match kind {
        PerspectiveKind::Radial { profile, delta, v } => {
            profile_conjugate(profile, shifted(v)) - delta
        }
        PerspectiveKind::Sqrt => (1.0 + dot(u, u)).sqrt(),
        PerspectiveKind::Power(spec) => {
            // (||.||^q / alpha)* = (alpha / q)^(q*-1) ||.||^q* / q*.
            let qs = spec.q / (spec.q - 1.0);
            (spec.alpha / spec.q).powf(qs - 1.0) * shifted(&spec.v).powf(qs) / qs - spec.delta
        }
        PerspectiveKind::Quadratic { alpha, delta, v } => {
            let s = shifted(v);
            alpha * s * s / 4.0 - delta
        }
        PerspectiveKind::DistanceBall { profile } => {
            let s = norm(u);
            s + profile_conjugate(profile, s)
        }
        PerspectiveKind::ConeOrthant => {
            // sqrt(1 + ||.||^2) + iota_{R^N_+} has conjugate -sqrt(1 - ||u_+||^2).
            let pos: f64 = u.iter().map(|v| v.max(0.0).powi(2)).sum();
            if pos <= 1.0 {
                -(1.0 - pos).sqrt()
            } else {
                f64::INFINITY
            }
        }
        PerspectiveKind::Huber(spec) => {
            if u[0].abs() <= spec.rho {
                u[0] * u[0] / 2.0
            } else {
                f64::INFINITY
            }
        }
        PerspectiveKind::Vapnik(spec) => {
            if u[0].abs() <= 1.0 {
                spec.epsilon * u[0].abs()
            } else {
                f64::INFINITY
            }
        }
        PerspectiveKind::Separable { .. } => f64::NAN,
    }
}

/// `eta + gamma phi*(y / gamma) <= 0` per block, from [`base_conjugate`].
pub fn in_zero_region(kind: &PerspectiveKind, gamma: f64, x: &[f64]) -> bool {
    if let PerspectiveKind::Separable { inner, block } = kind {
        return x.chunks(*block).all(|c| in_zero_region(inner, gamma, c));
    }
    let u: Vec<f64> = x[1..].iter().map(|v| v / gamma).collect();
    let c = base_conjugate(kind, &u);
    c.is_finite() && x[0] + gamma * c <= 0.0
}

/// Projection of the scalar pair `(eta, y)` onto `gamma C`,
/// `C = {(mu, u) : mu + phi*(u) <= 0}`, for a scalar base whose conjugate
/// domain is the interval `[-radius, radius]`.
///
/// For fixed `u` the nearest admissible scale is `min(eta, -gamma phi*(u / gamma))`;
/// the remaining one-dimensional convex problem in `u` is solved by golden
/// section over `gamma [-radius, radius]`.
pub fn project_scalar_gamma_c(
    conj: &dyn Fn(f64) -> f64,
    radius: f64,
    gamma: f64,
    eta: f64,
    y: f64,
) -> (f64, f64) {
    let mu_of = |u: f64| eta.min(-gamma * conj(u / gamma));
    let g = |u: f64| {
        let mu = mu_of(u);
        (mu - eta).powi(2) + (u - y).powi(2)
    };
    let (mut a, mut b) = (-gamma * radius, gamma * radius);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..200 {
        if b - a <= 1e-15 * (1.0 + gamma * radius) {
            break;
        }
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    // The endpoints are admissible too and golden section never evaluates them.
    let mut u = 0.5 * (a + b);
    for cand in [-gamma * radius, gamma * radius] {
        if g(cand) < g(u) {
            u = cand;
        }
    }
    (mu_of(u), u)
}
