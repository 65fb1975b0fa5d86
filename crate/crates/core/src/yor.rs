//! Yor's conditional law of the integrated exponential Brownian motion and the
//! joint density of `(Z_t, A_t)` over a constant-regime stretch.
//!
//! The Hartman-Watson kernel
//!
//! ```text
//! theta_r(t) = r / sqrt(2 pi^3 t) * exp(pi^2 / 2t) * int_0^inf exp(-y^2/2t - r cosh y) sinh y sin(pi y / t) dy
//! ```
//!
//! cancels catastrophically on the real axis for small `t` (the prefactor is
//! `exp(pi^2/2t)` while the result is of order `exp(-c/t)`). Writing
//! `exp((pi^2 - y^2)/2t) sin(pi y/t) = Im exp(-(y - i pi)^2 / 2t)` turns the
//! integral into a contour integral of an entire function, which [`log_theta`]
//! evaluates along the steepest-descent path `eps / sin(eps) = r t sinh(u) / u`
//! (with `y = u + i(pi - eps)`). On that path the phase is constant and nothing
//! cancels, so `log theta` stays accurate down to `t ~ 1e-8`.
//! [`theta_real_axis`] keeps the direct formula as an independent check for
//! moderate `t`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{PricingError, Result};
use crate::model::{RegimeModel, RegimeScalars};
use crate::quadrature::{newton_increasing, ChebyshevInterpolant, GaussLegendre, KahanSum};

/// Density with respect to `dz' da'` (or `dw` for the conditional law).
pub type DensityValue = f64;

/// Nats below the peak at which the contour integrand is truncated.
const CONTOUR_TAIL: f64 = 46.0;
const CONTOUR_PANELS: usize = 2;
const CONTOUR_ORDER: usize = 16;
const CONTOUR_BISECTIONS: usize = 3;

fn contour_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(CONTOUR_ORDER))
}

/// `ln(sinh(u)/u)`.
fn log_sinhc(u: f64) -> f64 {
    if u < 1e-3 {
        let u2 = u * u;
        u2 / 6.0 - u2 * u2 / 180.0
    } else if u > 20.0 {
        u - (2.0 * u).ln() + (-(-2.0 * u).exp()).ln_1p()
    } else {
        (u.sinh() / u).ln()
    }
}

/// d/du `ln(sinh(u)/u)` = `coth u - 1/u`.
fn d_log_sinhc(u: f64) -> f64 {
    if u < 1e-3 {
        u / 3.0 - u * u * u / 45.0
    } else {
        1.0 / u.tanh() - 1.0 / u
    }
}

/// `ln(eps / sin eps)` for `eps` in `[0, pi)`.
fn log_sinc_inv(eps: f64) -> f64 {
    if eps < 1e-3 {
        let e2 = eps * eps;
        e2 / 6.0 + e2 * e2 / 180.0
    } else {
        (eps / eps.sin()).ln()
    }
}

/// d/deps `ln(eps / sin eps)` = `1/eps - cot eps`.
fn d_log_sinc_inv(eps: f64) -> f64 {
    if eps < 1e-3 {
        eps / 3.0 + eps * eps * eps / 45.0
    } else {
        1.0 / eps - eps.cos() / eps.sin()
    }
}

/// Solves `ln(sinh(u)/u) = target` for `u >= 0`, starting Newton from `guess` when given.
fn solve_u(target: f64, guess: Option<f64>) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    // sinh(u)/u <= exp(u^2/6), so the root is at least sqrt(6 target)
    let lo = (6.0 * target).sqrt() * (1.0 - 1e-12);
    let mut hi = (target + (2.0 * target + 2.0).ln() + 2.0).max(lo * 1.5 + 1e-3);
    while log_sinhc(hi) < target {
        hi *= 2.0;
    }
    newton_increasing(
        |u| (log_sinhc(u) - target, d_log_sinhc(u)),
        lo.min(hi),
        hi,
        guess.unwrap_or(hi),
        1e-14,
    )
}

/// Solves `ln(eps / sin eps) = target` for `eps` in `[0, pi)`, starting Newton from `guess` when given.
fn solve_eps(target: f64, guess: Option<f64>) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let guess = guess.unwrap_or_else(|| {
        let k = target.exp();
        if target < 0.5 {
            (6.0 * target).sqrt()
        } else {
            PI * k / (1.0 + k)
        }
    });
    let hi = PI * (1.0 - 1e-15);
    newton_increasing(
        |e| (log_sinc_inv(e) - target, d_log_sinc_inv(e)),
        0.0,
        hi,
        guess.min(hi),
        1e-14,
    )
}

/// Point on the steepest-descent path with the derivative of `(u, eps)` along
/// the path parameter.
#[derive(Debug, Clone, Copy)]
struct PathPoint {
    u: f64,
    eps: f64,
    du: f64,
    deps: f64,
}

#[derive(Debug, Clone, Copy)]
struct SteepestPath {
    r: f64,
    t: f64,
    log_rt: f64,
    /// `rt > 1`: parametrise by `u` (saddle on the imaginary axis); otherwise by `eps`.
    by_u: bool,
}

impl SteepestPath {
    fn new(r: f64, t: f64) -> Self {
        let log_rt = r.ln() + t.ln();
        Self {
            r,
            t,
            log_rt,
            by_u: log_rt > 0.0,
        }
    }

    /// Point at parameter `p`; `near` is a nearby point used to warm-start the root solve.
    fn point(&self, p: f64, near: Option<&PathPoint>) -> PathPoint {
        if self.by_u {
            let u = p;
            let guess = near.map(|q| q.eps + q.deps * (u - q.u));
            let eps = solve_eps(self.log_rt + log_sinhc(u), guess);
            let s = d_log_sinc_inv(eps);
            let deps = if s > 0.0 { d_log_sinhc(u) / s } else { 0.0 };
            PathPoint { u, eps, du: 1.0, deps }
        } else {
            let eps = p;
            let guess = near.map(|q| q.u + q.du * (eps - q.eps)).filter(|&u| u > 0.0);
            let u = solve_u(log_sinc_inv(eps) - self.log_rt, guess);
            let du_dl = d_log_sinhc(u);
            let s = d_log_sinc_inv(eps);
            let du = if du_dl > 0.0 { s / du_dl } else { 1.0 };
            PathPoint { u, eps, du, deps: 1.0 }
        }
    }

    /// Real part of `-(y - i pi)^2 / 2t - r cosh y`; the imaginary part vanishes on the path.
    fn phase(&self, pt: &PathPoint) -> f64 {
        (pt.eps * pt.eps - pt.u * pt.u) / (2.0 * self.t) + self.r * pt.u.cosh() * pt.eps.cos()
    }

    /// `Im[sinh(y) dy/dp]`.
    fn form(&self, pt: &PathPoint) -> f64 {
        pt.u.sinh() * pt.eps.cos() * pt.deps + pt.u.cosh() * pt.eps.sin() * pt.du
    }

    fn upper_limit(&self) -> f64 {
        if self.by_u {
            f64::INFINITY
        } else {
            PI * (1.0 - 1e-12)
        }
    }
}

/// `ln theta_r(t)` by steepest-descent contour integration.
pub fn log_theta(r: f64, t: f64) -> Result<f64> {
    if !(r > 0.0 && t > 0.0) || !r.is_finite() || !t.is_finite() {
        return Err(PricingError::accuracy("theta domain (r, t > 0)", r.min(t), 0.0, 0.0));
    }
    let path = SteepestPath::new(r, t);
    let start = path.point(0.0, None);
    let phi0 = path.phase(&start);

    // march out until the integrand has dropped by CONTOUR_TAIL nats
    let cap = path.upper_limit();
    let mut lo = 0.0;
    let mut step = 0.25 * t.sqrt().min(1.0);
    let mut hi;
    let mut last = start;
    loop {
        hi = (lo + step).min(cap);
        let pt = path.point(hi, Some(&last));
        if phi0 - path.phase(&pt) > CONTOUR_TAIL || hi >= cap {
            break;
        }
        last = pt;
        lo = hi;
        step *= 2.0;
        if step > 1e6 {
            return Err(PricingError::accuracy("theta contour bracket", step, 0.0, 0.0));
        }
    }
    for _ in 0..CONTOUR_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if phi0 - path.phase(&path.point(mid, Some(&last))) > CONTOUR_TAIL {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mut acc = KahanSum::default();
    let mut prev = start;
    for (p, w) in contour_rule().composite(0.0, hi, CONTOUR_PANELS) {
        let pt = path.point(p, Some(&prev));
        acc.add(w * (path.phase(&pt) - phi0).exp() * path.form(&pt));
        prev = pt;
    }
    let integral = acc.value();
    if !(integral > 0.0) || !integral.is_finite() {
        return Err(PricingError::accuracy("theta contour integral", integral, 1.0, 0.0));
    }
    Ok(r.ln() - 0.5 * (2.0 * PI.powi(3) * t).ln() + phi0 + integral.ln())
}

/// `theta_r(t)`; underflows to zero where [`log_theta`] is very negative.
pub fn theta(r: f64, t: f64) -> Result<f64> {
    log_theta(r, t).map(f64::exp)
}

/// The printed real-axis formula, integrated half-period by half-period with
/// compensated summation. Only trustworthy for moderate `t`: an
/// `AccuracyError` is raised when the panel contributions cancel by more
/// than `max_cancellation` (ratio of `sum |panel|` to `|sum panel|`).
pub fn theta_real_axis(r: f64, t: f64, max_cancellation: f64) -> Result<f64> {
    if !(r > 0.0 && t > 0.0) {
        return Err(PricingError::accuracy("theta domain (r, t > 0)", r.min(t), 0.0, 0.0));
    }
    let rule = GaussLegendre::new(16);
    let envelope = |y: f64| (-y * y / (2.0 * t) - r * y.cosh()).exp() * y.sinh();
    let mut acc = KahanSum::default();
    let mut abs_total = 0.0;
    let mut running_max: f64 = 0.0;
    let mut k = 0usize;
    loop {
        let a = k as f64 * t;
        let b = a + t;
        let panel = rule.integrate(a, b, |y| envelope(y) * (PI * y / t).sin());
        acc.add(panel);
        abs_total += panel.abs();
        let env = envelope(b);
        running_max = running_max.max(env);
        k += 1;
        if (env < 1e-30 * running_max && b > 1.0) || k > 2_000_000 {
            break;
        }
    }
    let integral = acc.value();
    let prefactor = r / (2.0 * PI.powi(3) * t).sqrt() * (PI * PI / (2.0 * t)).exp();
    let cancellation = abs_total / integral.abs();
    if !(integral > 0.0) || !(cancellation < max_cancellation) || !prefactor.is_finite() {
        return Err(PricingError::accuracy(
            "theta real-axis cancellation",
            cancellation,
            1.0,
            max_cancellation,
        ));
    }
    Ok(prefactor * integral)
}

/// `ln f(t, z, w)`, the log-density of `A_t^nu` given `B_t + nu t = z`.
pub fn log_f_cond(t: f64, z: f64, w: f64) -> Result<f64> {
    if !(t > 0.0 && w > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let lw = w.ln();
    let r = (z - lw).exp();
    let head = 0.5 * (2.0 * PI * t).ln() + z * z / (2.0 * t) - lw - (1.0 + (2.0 * z).exp()) / (2.0 * w);
    if head == f64::NEG_INFINITY || r == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if !r.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(head + log_theta(r, t)?)
}

/// Conditional density of `A_t^nu` given `B_t + nu t = z` (free of `nu`).
pub fn f_cond(t: f64, z: f64, w: f64) -> Result<DensityValue> {
    log_f_cond(t, z, w).map(f64::exp)
}

/// `E[A_t^0 | B_t = b] = int_0^t exp(2bu/t + 2u(t-u)/t) du`.
pub fn conditional_mean(t: f64, b: f64) -> f64 {
    let expo = |u: f64| 2.0 * b * u / t + 2.0 * u * (t - u) / t;
    let peak = expo(((b + t) / 2.0).clamp(0.0, t)).max(expo(0.0)).max(expo(t));
    let rule = GaussLegendre::new(24);
    let s: f64 = rule
        .composite(0.0, t, 2)
        .into_iter()
        .map(|(u, w)| w * (expo(u) - peak).exp())
        .sum();
    s * peak.exp()
}

/// Unconditional `E[A_t^nu] = (exp((2 nu + 2) t) - 1) / (2 nu + 2)`.
pub fn yor_mean(t: f64, nu: f64) -> f64 {
    let k = 2.0 * nu + 2.0;
    if k.abs() < 1e-12 {
        t
    } else {
        (k * t).exp_m1() / k
    }
}

/// Inputs of the joint density of `(Z_t, A_t)` given `X_s = e^z`, `A_s = a`,
/// `Y_s = i` and no jump before `t = s + dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiParams {
    pub scalars: RegimeScalars,
    pub z: f64,
    pub a: f64,
    pub dt: f64,
}

impl PsiParams {
    pub fn new(model: &RegimeModel, i: usize, z: f64, a: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(PricingError::accuracy("psi time step dt > 0", dt, 0.0, 0.0));
        }
        Ok(Self {
            scalars: model.scalars(i),
            z,
            a,
            dt,
        })
    }

    /// `t' = sigma^2 dt / 4`.
    pub fn t_prime(&self) -> f64 {
        self.scalars.time_scale(self.dt)
    }

    /// `nu = 2 nu(i) / sigma^2`.
    pub fn yor_nu(&self) -> f64 {
        self.scalars.yor_nu
    }

    /// `c = sigma^2 e^{-z} / 4`, so that `w(a') = c (a' - a)`.
    pub fn scale(&self) -> f64 {
        0.25 * self.scalars.sigma2 * (-self.z).exp()
    }

    pub fn w(&self, a_prime: f64) -> f64 {
        self.scale() * (a_prime - self.a)
    }
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Joint density of `(Z_t, A_t)` at `(z', a')`, re-derived through the change
/// of variables `Z_t = 2(B_t' + nu t')`, `A_t - a = e^z (4/sigma^2) A_t'^nu`:
///
/// `psi = c * f(t', z'/2, w(a')) * phi((z' - 2 nu t') / (2 sqrt t')) / (2 sqrt t')`.
pub fn psi(params: &PsiParams, z_prime: f64, a_prime: f64) -> Result<DensityValue> {
    if a_prime <= params.a {
        return Ok(0.0);
    }
    let tp = params.t_prime();
    let w = params.w(a_prime);
    let root = tp.sqrt();
    let marginal = std_normal_pdf((z_prime - 2.0 * params.yor_nu() * tp) / (2.0 * root)) / (2.0 * root);
    Ok(params.scale() * f_cond(tp, 0.5 * z_prime, w)? * marginal)
}

/// The joint density exactly as displayed alongside the change of variables
/// (conditional density at `z'` instead of `z'/2`, no `1/(2 sqrt t')`).
/// Kept only so the density check can show that it does not normalise.
pub fn psi_as_printed(params: &PsiParams, z_prime: f64, a_prime: f64) -> Result<DensityValue> {
    if a_prime <= params.a {
        return Ok(0.0);
    }
    let tp = params.t_prime();
    let w = params.w(a_prime);
    let marginal = std_normal_pdf((z_prime - 2.0 * params.yor_nu() * tp) / (2.0 * tp.sqrt()));
    Ok(params.scale() * f_cond(tp, z_prime, w)? * marginal)
}

/// `int int psi` and `int int e^{z'} psi` by brute-force quadrature of a pointwise density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectMoments {
    pub mass: f64,
    pub exp_moment: f64,
    /// `e^{(r - delta) dt}`.
    pub exp_target: f64,
}

/// Integrates `density` over `z'` in `2 nu t' +- 10 (2 sqrt t')` and over `ln w`
/// within `14 sqrt(t')` of the log conditional mean. Independent of the slice machinery.
pub fn direct_moments<D>(params: &PsiParams, density: D) -> Result<DirectMoments>
where
    D: Fn(&PsiParams, f64, f64) -> Result<f64>,
{
    let tp = params.t_prime();
    let centre = 2.0 * params.yor_nu() * tp;
    let half = 20.0 * tp.sqrt();
    let rule = GaussLegendre::new(12);
    let c = params.scale();
    // log-width of the conditional law of the area is of order sqrt(t')
    let spread = 14.0 * tp.sqrt();
    let (mut mass, mut exp_moment) = (0.0, 0.0);
    for (zp, wz) in rule.composite(centre - half, centre + half, 8) {
        let m = conditional_mean(tp, 0.5 * zp).ln();
        let mut inner = 0.0;
        for (u, wu) in rule.composite(m - spread, m + spread, 20) {
            let w = u.exp();
            // da' = dw / c and dw = w du
            inner += wu * w / c * density(params, zp, params.a + w / c)?;
        }
        mass += wz * inner;
        exp_moment += wz * zp.exp() * inner;
    }
    Ok(DirectMoments {
        mass,
        exp_moment,
        exp_target: (params.scalars.nu * params.dt + 0.5 * params.scalars.sigma2 * params.dt).exp(),
    })
}

/// Numerical layout of the `(z', w)` quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    /// Half-width of the `z'` window in standard deviations of `Z_t`.
    pub z_half_width: f64,
    pub z_panels: usize,
    pub z_order: usize,
    /// `z'` layout used for payoff integrals (kinked integrands need more nodes).
    pub payoff_z_panels: usize,
    pub payoff_z_order: usize,
    pub w_panels: usize,
    pub w_order: usize,
    /// Nats below the conditional peak spanned by the operator nodes in `ln w`.
    pub w_tail: f64,
    /// Nats below the peak spanned by the tabulated conditional density.
    pub slice_tail: f64,
    /// Chebyshev points used to tabulate each conditional log-density.
    pub cheb_points: usize,
    /// Gauss-Legendre order for partial (cut-off) integrals over a slice.
    pub cutoff_order: usize,
    /// Tolerance of every self-check (normalisation, moments).
    pub tolerance: f64,
    /// Below this `t'` the pair `(Z, A)` is treated as deterministic.
    pub t_prime_min: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            z_half_width: 8.0,
            z_panels: 2,
            z_order: 10,
            payoff_z_panels: 8,
            payoff_z_order: 12,
            w_panels: 2,
            w_order: 8,
            w_tail: 20.0,
            slice_tail: 36.0,
            cheb_points: 28,
            cutoff_order: 20,
            tolerance: 1e-4,
            t_prime_min: 1e-9,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let orders = [
            self.z_order,
            self.payoff_z_order,
            self.w_order,
            self.cheb_points,
            self.cutoff_order,
        ];
        if orders.iter().any(|&o| o < 2) {
            return Err("quadrature orders must be at least 2".into());
        }
        if self.z_panels == 0 || self.w_panels == 0 || self.payoff_z_panels == 0 {
            return Err("panel counts must be positive".into());
        }
        if !(self.tolerance > 0.0) || !(self.z_half_width > 0.0) {
            return Err("tolerance and z half-width must be positive".into());
        }
        if !(self.w_tail > 0.0 && self.slice_tail >= self.w_tail) {
            return Err("need 0 < w_tail <= slice_tail".into());
        }
        Ok(())
    }
}

/// Conditional law of Yor's `w` given `z'`, tabulated in `L = ln w`.
#[derive(Debug, Clone)]
pub struct ConditionalSlice {
    pub z_prime: f64,
    shape: SliceShape,
    /// Integral of the tabulated density (1 up to quadrature error).
    pub mass: f64,
    /// `E[w | z']` from the tabulated density.
    pub mean_w: f64,
    /// Operator nodes `(w, weight)`; weights sum to about `mass`.
    pub nodes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
enum SliceShape {
    Tabulated { log_density: ChebyshevInterpolant },
    /// All mass at one `w` (used when `t'` is below the supported minimum).
    Point { w: f64 },
}

impl ConditionalSlice {
    fn point(z_prime: f64, w: f64) -> Self {
        Self {
            z_prime,
            shape: SliceShape::Point { w },
            mass: 1.0,
            mean_w: w,
            nodes: vec![(w, 1.0)],
        }
    }

    fn tabulate(tp: f64, z_prime: f64, cfg: &QuadratureConfig) -> Result<Self> {
        let b = 0.5 * z_prime;
        let ell = |l: f64| -> Result<f64> { Ok(l + log_f_cond(tp, b, l.exp())?) };
        let anchor = conditional_mean(tp, b).ln();
        let first = ell(anchor)?;
        if !first.is_finite() {
            return Err(PricingError::accuracy("conditional density at its mean", first, 0.0, 0.0));
        }
        let mut peak = first;
        let base = (tp / 3.0).sqrt().max(1e-7);
        let mut edges = [0.0; 2];
        for (side, dir) in [(0usize, -1.0f64), (1, 1.0)] {
            let mut inner = anchor;
            let mut step = base;
            let mut outer;
            loop {
                outer = inner + dir * step;
                let v = ell(outer)?;
                peak = peak.max(v);
                if v < peak - cfg.slice_tail {
                    break;
                }
                inner = outer;
                step *= 2.0;
                if step > 200.0 {
                    return Err(PricingError::accuracy("conditional slice bracket", step, 0.0, 0.0));
                }
            }
            for _ in 0..6 {
                let mid = 0.5 * (inner + outer);
                if ell(mid)? < peak - cfg.slice_tail {
                    outer = mid;
                } else {
                    inner = mid;
                }
            }
            edges[side] = outer;
        }
        let (lo, hi) = (edges[0], edges[1]);
        let points = ChebyshevInterpolant::points(lo, hi, cfg.cheb_points);
        let mut values = Vec::with_capacity(points.len());
        for &l in &points {
            let v = ell(l)?;
            values.push(if v.is_finite() { v } else { peak - 700.0 });
        }
        let top = values.iter().copied().fold(f64::MIN, f64::max);
        let log_density = ChebyshevInterpolant::from_values(lo, hi, values);

        let rule = GaussLegendre::new(cfg.cutoff_order);
        let (mut mass, mut mean_w) = (0.0, 0.0);
        for (l, w) in rule.composite(lo, hi, 2) {
            let d = log_density.eval(l).exp();
            mass += w * d;
            mean_w += w * d * l.exp();
        }

        // operator nodes on the narrower window where the density is within w_tail of its peak
        let argmax = {
            let n = cfg.cheb_points;
            let pts = ChebyshevInterpolant::points(lo, hi, n);
            let vals: Vec<f64> = pts.iter().map(|&l| log_density.eval(l)).collect();
            let k = (0..n).max_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
            pts[k]
        };
        let level = top - cfg.w_tail;
        let find = |mut inside: f64, mut outside: f64| {
            if log_density.eval(outside) >= level {
                return outside;
            }
            for _ in 0..40 {
                let mid = 0.5 * (inside + outside);
                if log_density.eval(mid) >= level {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            outside
        };
        let f_lo = find(argmax, lo);
        let f_hi = find(argmax, hi);
        let wrule = GaussLegendre::new(cfg.w_order);
        let nodes = wrule
            .composite(f_lo, f_hi, cfg.w_panels)
            .into_iter()
            .map(|(l, w)| (l.exp(), w * log_density.eval(l).exp()))
            .collect();

        Ok(Self {
            z_prime,
            shape: SliceShape::Tabulated { log_density },
            mass,
            mean_w,
            nodes,
        })
    }

    /// `(P(w <= cut | z'), E[w 1{w <= cut} | z'])` from the tabulated density.
    pub fn partial_moments(&self, cut: f64, rule: &GaussLegendre) -> (f64, f64) {
        match &self.shape {
            SliceShape::Point { w } => {
                if cut >= *w {
                    (1.0, *w)
                } else {
                    (0.0, 0.0)
                }
            }
            SliceShape::Tabulated { log_density } => {
                if !(cut > 0.0) {
                    return (0.0, 0.0);
                }
                let (lo, hi) = log_density.interval();
                let lc = cut.ln();
                if lc <= lo {
                    return (0.0, 0.0);
                }
                if lc >= hi {
                    return (self.mass, self.mean_w);
                }
                let (mut m0, mut m1) = (0.0, 0.0);
                for (l, w) in rule.composite(lo, lc, 2) {
                    let d = w * log_density.eval(l).exp();
                    m0 += d;
                    m1 += d * l.exp();
                }
                (m0, m1)
            }
        }
    }

    /// Conditional density of `w` (per unit `w`).
    pub fn density_w(&self, w: f64) -> f64 {
        match &self.shape {
            SliceShape::Point { .. } => 0.0,
            SliceShape::Tabulated { log_density } => {
                let (lo, hi) = log_density.interval();
                let l = w.ln();
                if l < lo || l > hi {
                    0.0
                } else {
                    log_density.eval(l).exp() / w
                }
            }
        }
    }

    /// Window of `ln w` covered by the table.
    pub fn log_window(&self) -> (f64, f64) {
        match &self.shape {
            SliceShape::Point { w } => (w.ln(), w.ln()),
            SliceShape::Tabulated { log_density } => log_density.interval(),
        }
    }
}

/// Which `z'` layout a slice set uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceLayout {
    /// Light layout for the contraction operator.
    Operator,
    /// Dense layout for payoff integrals.
    Payoff,
}

/// Conditional slices of the joint law of `(Z_t, w)` for one regime and one `dt`.
#[derive(Debug, Clone)]
pub struct SliceSet {
    pub scalars: RegimeScalars,
    pub dt: f64,
    pub t_prime: f64,
    /// `(z', weight)` with the Gaussian density of `Z_t` folded into the weight.
    pub z_nodes: Vec<(f64, f64)>,
    pub slices: Vec<ConditionalSlice>,
    /// True when `t'` fell below the supported minimum and a point mass was used.
    pub degenerate: bool,
    cutoff_rule: GaussLegendre,
}

impl SliceSet {
    pub fn build(scalars: RegimeScalars, dt: f64, cfg: &QuadratureConfig, layout: SliceLayout) -> Result<Self> {
        let tp = scalars.time_scale(dt);
        let cutoff_rule = GaussLegendre::new(cfg.cutoff_order);
        if !(tp >= cfg.t_prime_min) {
            let z = scalars.nu * dt;
            return Ok(Self {
                scalars,
                dt,
                t_prime: tp,
                z_nodes: vec![(z, 1.0)],
                slices: vec![ConditionalSlice::point(z, tp.max(0.0))],
                degenerate: true,
                cutoff_rule,
            });
        }
        let mean = 2.0 * scalars.yor_nu * tp;
        let sd = 2.0 * tp.sqrt();
        let (panels, order) = match layout {
            SliceLayout::Operator => (cfg.z_panels, cfg.z_order),
            SliceLayout::Payoff => (cfg.payoff_z_panels, cfg.payoff_z_order),
        };
        let rule = GaussLegendre::new(order);
        let h = cfg.z_half_width;
        let z_nodes: Vec<(f64, f64)> = rule
            .composite(-h, h, panels)
            .into_iter()
            .map(|(x, w)| (mean + sd * x, w * std_normal_pdf(x)))
            .collect();
        let slices = z_nodes
            .iter()
            .map(|&(z, _)| ConditionalSlice::tabulate(tp, z, cfg))
            .collect::<Result<Vec<_>>>()?;
        let set = Self {
            scalars,
            dt,
            t_prime: tp,
            z_nodes,
            slices,
            degenerate: false,
            cutoff_rule,
        };
        set.self_check(cfg.tolerance)?;
        Ok(set)
    }

    /// Converts Yor's `w` into the running-integral increment per unit spot.
    pub fn increment(&self, w: f64) -> f64 {
        self.scalars.integral_scale() * w
    }

    pub fn cutoff_rule(&self) -> &GaussLegendre {
        &self.cutoff_rule
    }

    /// Normalisation and exponential-moment identities of the tabulated law.
    pub fn identities(&self) -> SliceIdentities {
        let (mut mass, mut exp_moment, mut node_mass, mut node_exp) = (0.0, 0.0, 0.0, 0.0);
        for ((z, wz), slice) in self.z_nodes.iter().zip(&self.slices) {
            mass += wz * slice.mass;
            exp_moment += wz * z.exp() * slice.mass;
            let nm: f64 = slice.nodes.iter().map(|n| n.1).sum();
            node_mass += wz * nm;
            node_exp += wz * z.exp() * nm;
        }
        SliceIdentities {
            mass,
            exp_moment,
            exp_target: ((self.scalars.nu + 0.5 * self.scalars.sigma2) * self.dt).exp(),
            node_mass,
            node_exp_moment: node_exp,
        }
    }

    fn self_check(&self, tol: f64) -> Result<()> {
        for ((_, wz), slice) in self.z_nodes.iter().zip(&self.slices) {
            if *wz < 1e-12 {
                continue;
            }
            if (slice.mass - 1.0).abs() > tol {
                return Err(PricingError::accuracy(
                    format!("conditional normalisation at z'={:.4}, t'={:.3e}", slice.z_prime, self.t_prime),
                    slice.mass,
                    1.0,
                    tol,
                ));
            }
            let target = conditional_mean(self.t_prime, 0.5 * slice.z_prime);
            if (slice.mean_w / target - 1.0).abs() > tol {
                return Err(PricingError::accuracy(
                    format!("conditional mean at z'={:.4}, t'={:.3e}", slice.z_prime, self.t_prime),
                    slice.mean_w,
                    target,
                    tol * target,
                ));
            }
        }
        let id = self.identities();
        if (id.node_mass - 1.0).abs() > tol {
            return Err(PricingError::accuracy("psi node normalisation", id.node_mass, 1.0, tol));
        }
        if (id.node_exp_moment - id.exp_target).abs() > tol {
            return Err(PricingError::accuracy(
                "psi node exponential moment",
                id.node_exp_moment,
                id.exp_target,
                tol,
            ));
        }
        Ok(())
    }

    /// `E[g(Z, w) 1{w <= cut(Z)}]`-type integrals: `f` receives the partial
    /// moments of each `z'` slice and the results are summed with the `z'` weights.
    pub fn integrate_cut<C, F>(&self, mut cut: C, mut f: F) -> f64
    where
        C: FnMut(f64) -> f64,
        F: FnMut(&CutMoments) -> f64,
    {
        let mut total = 0.0;
        for ((z, wz), slice) in self.z_nodes.iter().zip(&self.slices) {
            let (m0, m1) = slice.partial_moments(cut(*z), &self.cutoff_rule);
            total += wz * f(&CutMoments {
                z_prime: *z,
                m0,
                m1,
                mass: slice.mass,
                mean_w: slice.mean_w,
            });
        }
        total
    }
}

/// Partial and total moments of one conditional slice below a cut `w*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutMoments {
    pub z_prime: f64,
    /// `P(w <= w* | z')`.
    pub m0: f64,
    /// `E[w; w <= w* | z']`.
    pub m1: f64,
    pub mass: f64,
    pub mean_w: f64,
}

/// Integrals of the tabulated law used by the self-checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceIdentities {
    pub mass: f64,
    pub exp_moment: f64,
    pub exp_target: f64,
    pub node_mass: f64,
    pub node_exp_moment: f64,
}

/// Weighted nodes over `(z', a')` for one `(z, a)` state.
#[derive(Debug, Clone, Default)]
pub struct PsiNodeSet {
    pub z_prime: Vec<f64>,
    pub a_prime: Vec<f64>,
    pub weight: Vec<f64>,
}

impl PsiNodeSet {
    pub fn integrate<F: FnMut(f64, f64) -> f64>(&self, mut f: F) -> f64 {
        self.z_prime
            .iter()
            .zip(&self.a_prime)
            .zip(&self.weight)
            .map(|((&z, &a), &w)| w * f(z, a))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }
}

/// Tensor-product nodes for `int int h(z', a') psi(z', a') dz' da'` at the state in `params`.
/// Raises `AccuracyError` if integrating 1 or `e^{z'}` misses its target by more than the tolerance.
pub fn psi_nodes(params: &PsiParams, cfg: &QuadratureConfig) -> Result<PsiNodeSet> {
    let set = SliceSet::build(params.scalars, params.dt, cfg, SliceLayout::Operator)?;
    Ok(nodes_from_slices(&set, params.z, params.a))
}

pub(crate) fn nodes_from_slices(set: &SliceSet, z: f64, a: f64) -> PsiNodeSet {
    let spot = z.exp();
    let mut out = PsiNodeSet::default();
    for ((zp, wz), slice) in set.z_nodes.iter().zip(&set.slices) {
        for &(w, wq) in &slice.nodes {
            out.z_prime.push(*zp);
            out.a_prime.push(a + spot * set.increment(w));
            out.weight.push(wz * wq);
        }
    }
    out
}
