//! Successive approximations `g_{n+1} = F(g_n) + g_0` on a grid.
//!
//! For a node `(t_k, z, a, i)`,
//!
//! ```text
//! F(h) = sum_{j != i} q_ij int_{t_k}^T e^{-(q_i + r_i)(t - t_k)} E[e^{Z_t} h(t, z + Z_t, A_t, j) | no jump] dt
//! ```
//!
//! The time integral uses the grid's own time nodes: piecewise quadratic
//! interpolation of the inner expectation, integrated exactly against the
//! exponential factor. Every inner expectation therefore needs the law of
//! `(Z, A)` only at the grid spacings `d * (T - s) / K`, and `h` is always
//! read at a time node. The inner expectation is a tensor rule in `(z', w)`
//! built from the conditional slices of [`crate::yor`].

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::cache::SliceCache;
use crate::error::{PricingError, Result, SpecError};
use crate::grid::{Axis, GridFunction, ScaleInvariance, TailPolicy};
use crate::model::{OptionSpec, OptionStyle, RegimeModel};
use crate::noswitch::ConstantRegimeLaw;
use crate::quadrature::GaussLegendre;
use crate::yor::{QuadratureConfig, SliceLayout};

/// How the log-price axis is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridLayout {
    /// One log-price node at `ln x`; other log-prices are reached through the
    /// scale invariance of the option value.
    ScaleInvariant,
    /// Full `(t, z, a)` tensor with multilinear interpolation in `z`.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub quadrature: QuadratureConfig,
    pub layout: GridLayout,
    /// Uniform time nodes on `[s, T]`.
    pub time_nodes: usize,
    /// Log-price nodes (full layout only).
    pub z_nodes: usize,
    /// Log-price half-width in units of `sigma_max sqrt(T - s)` (full layout only).
    pub z_half_width: f64,
    pub a_nodes: usize,
    /// Width of the running-integral range in units of `sigma_max sqrt(T - s)`.
    pub a_width: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Fraction of clamped node values above which an iteration is rejected.
    pub max_clamp_fraction: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            quadrature: QuadratureConfig::default(),
            layout: GridLayout::ScaleInvariant,
            time_nodes: 21,
            z_nodes: 41,
            z_half_width: 6.0,
            a_nodes: 241,
            a_width: 6.0,
            epsilon: 1e-4,
            max_iterations: 200,
            max_clamp_fraction: 0.05,
        }
    }
}

impl EngineConfig {
    /// The full tensor grid: 21 x 41 x 31 nodes.
    pub fn full_tensor() -> Self {
        Self {
            layout: GridLayout::Full,
            a_nodes: 31,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        self.quadrature.validate().map_err(SpecError::Numerics)?;
        if self.time_nodes < 2 || self.a_nodes < 2 {
            return Err(SpecError::Numerics("need at least 2 time and 2 running-integral nodes".into()));
        }
        if self.layout == GridLayout::Full && self.z_nodes < 2 {
            return Err(SpecError::Numerics("full layout needs at least 2 log-price nodes".into()));
        }
        if !(self.epsilon > 0.0) || self.max_iterations == 0 {
            return Err(SpecError::Numerics("epsilon and the iteration cap must be positive".into()));
        }
        if !(self.z_half_width > 0.0 && self.a_width > 0.0) {
            return Err(SpecError::Numerics("grid widths must be positive".into()));
        }
        Ok(())
    }
}

/// `n(T) = 2 exp((max r - delta + max sigma^2 / 2)(T - t0))`, bounding `E[max X] / x`.
pub fn fixed_call_bound_factor(model: &RegimeModel, window: f64) -> f64 {
    let s2 = model.max_sigma().powi(2);
    2.0 * ((model.max_rate() - model.dividend() + 0.5 * s2) * window).exp()
}

/// Payoff-specific pieces of the iteration.
#[derive(Debug, Clone, Copy)]
struct Problem {
    spec: OptionSpec,
    /// Strike budget `K (T - t0)` (zero for the floating call).
    kappa: f64,
    /// `n(T)` for the fixed call, 1 otherwise.
    bound: f64,
}

impl Problem {
    fn new(model: &RegimeModel, spec: &OptionSpec) -> Result<Self> {
        spec.validate()?;
        if spec.horizon() <= 0.0 {
            return Err(SpecError::NoHorizon.into());
        }
        let (kappa, bound) = match spec.style {
            OptionStyle::FloatingCall => (0.0, 1.0),
            OptionStyle::FixedPut => (spec.strike_or_nan() * spec.window(), 1.0),
            OptionStyle::FixedCallStarting => (
                spec.strike_or_nan() * spec.window(),
                fixed_call_bound_factor(model, spec.window()),
            ),
        };
        Ok(Self {
            spec: *spec,
            kappa,
            bound,
        })
    }

    fn style(&self) -> OptionStyle {
        self.spec.style
    }

    /// Whether `F` carries the factor `e^{z'}` (functions scaled by `e^{-z}`).
    fn exp_weight(&self) -> bool {
        self.style() != OptionStyle::FixedPut
    }

    fn clamps(&self) -> bool {
        self.style() != OptionStyle::FixedCallStarting
    }

    fn invariance(&self) -> ScaleInvariance {
        ScaleInvariance {
            kappa: self.kappa,
            power: if self.exp_weight() { 0.0 } else { 1.0 },
        }
    }

    /// Currency value of one unit of `g` at the valuation state.
    fn price_scale(&self) -> f64 {
        match self.style() {
            OptionStyle::FloatingCall => self.spec.spot,
            OptionStyle::FixedPut => self.spec.strike_or_nan(),
            OptionStyle::FixedCallStarting => self.spec.spot * self.bound,
        }
    }

    /// No-jump value `g^0` at `(z, a)` from the law over the remaining horizon.
    fn g0_value(&self, law: &ConstantRegimeLaw, z: f64, a: f64) -> f64 {
        let w = self.spec.window();
        let x = z.exp();
        match self.style() {
            OptionStyle::FloatingCall => law.floating_call_unit(a / x, w),
            OptionStyle::FixedPut => {
                let k = self.spec.strike_or_nan();
                law.fixed_put(x, a, k, w) / k
            }
            OptionStyle::FixedCallStarting => law.fixed_call(x, a, self.spec.strike_or_nan(), w) / (x * self.bound),
        }
    }

    fn rho(&self, model: &RegimeModel) -> f64 {
        match self.style() {
            OptionStyle::FixedPut => model.fixed_strike_rho(self.spec.horizon()),
            _ => model.overall_rho(self.spec.horizon()),
        }
    }
}

fn build_template(model: &RegimeModel, problem: &Problem, cfg: &EngineConfig) -> Result<GridFunction> {
    let spec = &problem.spec;
    let (x, a, w, tau) = (spec.spot, spec.running, spec.window(), spec.horizon());
    let numerics = |e: String| PricingError::from(SpecError::Numerics(e));
    let times = Axis::uniform(spec.s, spec.maturity, cfg.time_nodes).map_err(numerics)?;
    let sig = model.max_sigma() * tau.sqrt();
    let nu_max = (0..model.regimes())
        .map(|i| model.scalars(i).nu.abs())
        .fold(0.0, f64::max);
    let spread = (nu_max * tau + cfg.a_width * sig).exp();
    let kappa = problem.kappa;
    let tol = 1e-9 * (x * w).max(1.0);

    let (z, a_axis, low, high) = match cfg.layout {
        GridLayout::ScaleInvariant => {
            let z = Axis::new(vec![x.ln()]).map_err(numerics)?;
            let scale = 0.5 * x * w;
            let (lo, hi, centre, low, high, extra) = match problem.style() {
                OptionStyle::FloatingCall => (
                    0.0,
                    a + x * w * spread,
                    a + 0.5 * x * tau,
                    TailPolicy::Clamp,
                    TailPolicy::Zero,
                    vec![a, x * w],
                ),
                OptionStyle::FixedPut => (
                    kappa - (kappa - a.min(kappa) + x * w) * spread,
                    kappa,
                    kappa - 0.5 * x * tau,
                    TailPolicy::Linear,
                    TailPolicy::Zero,
                    vec![a.min(kappa)],
                ),
                OptionStyle::FixedCallStarting => (
                    kappa - (kappa + x * w) * spread,
                    kappa + x * w * spread,
                    kappa - 0.5 * x * tau,
                    TailPolicy::Clamp,
                    TailPolicy::Linear,
                    vec![a, kappa],
                ),
            };
            let axis = Axis::stretched(lo, hi, cfg.a_nodes, centre, scale)
                .map_err(numerics)?
                .with_nodes(&extra, tol);
            (z, axis, low, high)
        }
        GridLayout::Full => {
            let half = cfg.z_half_width * sig.max(1e-8);
            let z = Axis::uniform(x.ln() - half, x.ln() + half, cfg.z_nodes)
                .map_err(numerics)?
                .with_nodes(&[x.ln()], 1e-12);
            let a_max = a + x * spread * tau;
            let (hi, high) = match problem.style() {
                OptionStyle::FloatingCall => (a_max, TailPolicy::Zero),
                OptionStyle::FixedPut => (kappa.max(a + tol), TailPolicy::Zero),
                OptionStyle::FixedCallStarting => (a_max, TailPolicy::Linear),
            };
            let axis = Axis::uniform(a, hi, cfg.a_nodes).map_err(numerics)?;
            (z, axis, TailPolicy::Clamp, high)
        }
    };
    let mut g = GridFunction::new(times, z, a_axis, model.regimes(), 0.0);
    g.a_low = low;
    g.a_high = high;
    if cfg.layout == GridLayout::ScaleInvariant {
        g.invariance = Some(problem.invariance());
    }
    Ok(g)
}

/// Weights of `int_{t_k}^{t_K} e^{-decay (t - t_k)} f(t) dt ~ sum_l w_l f(t_l)`
/// from piecewise quadratic interpolation of `f` on the time nodes.
pub fn time_weights(times: &[f64], k: usize, decay: f64) -> Vec<(usize, f64)> {
    let last = times.len() - 1;
    let mut w = vec![0.0; times.len()];
    let rule = GaussLegendre::new(8);
    let tk = times[k];
    let mut add = |nodes: &[usize], lo: f64, hi: f64| {
        for (t, q) in rule.mapped(lo, hi) {
            let damp = q * (-decay * (t - tk)).exp();
            for (m, &p) in nodes.iter().enumerate() {
                let mut basis = 1.0;
                for (n, &o) in nodes.iter().enumerate() {
                    if n != m {
                        basis *= (t - times[o]) / (times[p] - times[o]);
                    }
                }
                w[p] += damp * basis;
            }
        }
    };
    let mut c = k;
    while c + 2 <= last {
        add(&[c, c + 1, c + 2], times[c], times[c + 2]);
        c += 2;
    }
    if c < last {
        if c > k {
            add(&[c - 1, c, c + 1], times[c], times[c + 1]);
        } else {
            add(&[c, c + 1], times[c], times[c + 1]);
        }
    }
    (k..=last).map(|l| (l, w[l])).collect()
}

/// Weighted `(z', w)` nodes of the inner expectation for one regime and spacing.
#[derive(Debug, Clone, Default)]
struct OperatorNodes {
    /// `e^{-z'}`.
    inv_growth: Vec<f64>,
    /// Log-price increment `z'`.
    dz: Vec<f64>,
    /// Running-integral increment per unit spot.
    inc: Vec<f64>,
    /// Quadrature weight, including `e^{z'}` when the operator carries it.
    weight: Vec<f64>,
    /// Quadrature weight times `e^{z'}`: with one log-price node both payoff
    /// scalings reduce to this factor.
    invariant_weight: Vec<f64>,
}

/// One record of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub n: usize,
    /// `||g_n - g_{n-1}||`.
    pub increment: f64,
    /// `increment_n / increment_{n-1}`.
    pub ratio: Option<f64>,
    /// Seconds since the iteration started.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceResult {
    pub style: OptionStyle,
    pub regime: usize,
    pub price: f64,
    /// Price for every initial regime.
    pub prices: Vec<f64>,
    pub iterations: usize,
    pub last_increment: f64,
    /// `||g_1 - g_0||`.
    pub first_increment: f64,
    pub rho: f64,
    /// `rho ||g_{n+1} - g_n|| / (1 - rho)` on the scaled function.
    pub bound: f64,
    /// The same bound in currency.
    pub price_bound: f64,
    /// Currency value of one unit of the scaled function at the valuation state.
    pub price_scale: f64,
    pub clamp_events: usize,
    /// Slice sets that fell back to a deterministic point (tiny `t'`).
    pub degenerate_slices: usize,
    /// False when `F` vanishes identically (one regime or a frozen chain).
    pub f_active: bool,
    pub trace: Vec<TraceRecord>,
}

impl PriceResult {
    /// Ratios `||g_{n+1} - g_n|| / ||g_n - g_{n-1}||` (skipping zero denominators).
    pub fn ratios(&self) -> Vec<f64> {
        self.trace.iter().filter_map(|r| r.ratio).collect()
    }
}

/// Smallest `n` with `rho^n ||g_1 - g_0|| / (1 - rho) <= epsilon`.
pub fn a_priori_iterations(rho: f64, first_increment: f64, epsilon: f64) -> usize {
    if first_increment <= 0.0 || rho <= 0.0 {
        return 1;
    }
    let n = (epsilon * (1.0 - rho) / first_increment).ln() / rho.ln();
    n.ceil().max(1.0) as usize
}

/// Shift bound `eta / (1 - rho)` of the fixed point when `g_0` moves by `eta` in sup norm.
pub fn perturbation_bound(eta: f64, rho: f64) -> f64 {
    eta.abs() / (1.0 - rho)
}

/// The contraction operator and the initial function for one contract.
pub struct FixedPointEngine {
    model: RegimeModel,
    problem: Problem,
    cfg: EngineConfig,
    template: GridFunction,
    /// `[i][k]` -> time weights.
    weights: Vec<Vec<Vec<(usize, f64)>>>,
    /// `[i][d - 1]` -> inner nodes at spacing `d`.
    nodes: Vec<Vec<Arc<OperatorNodes>>>,
    degenerate: usize,
}

impl FixedPointEngine {
    pub fn new(model: &RegimeModel, spec: &OptionSpec, cfg: &EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let problem = Problem::new(model, spec)?;
        let template = build_template(model, &problem, cfg)?;
        let times = template.times().nodes().to_vec();
        let steps = times.len() - 1;
        let active = !(model.regimes() == 1 || model.is_frozen());
        let mut weights = Vec::new();
        let mut nodes = Vec::new();
        let mut degenerate = 0;
        for i in 0..model.regimes() {
            let decay = model.exit_rate(i) + model.rate(i);
            weights.push((0..times.len()).map(|k| time_weights(&times, k, decay)).collect());
            let mut per = Vec::new();
            if active && model.exit_rate(i) > 0.0 {
                for d in 1..=steps {
                    let set = SliceCache::global().get(
                        model.scalars(i),
                        spacing(spec, steps, d),
                        &cfg.quadrature,
                        SliceLayout::Operator,
                    )?;
                    degenerate += set.degenerate as usize;
                    let c = set.scalars.integral_scale();
                    let mut on = OperatorNodes::default();
                    for ((zp, wz), slice) in set.z_nodes.iter().zip(&set.slices) {
                        for &(w, wq) in &slice.nodes {
                            on.inv_growth.push((-zp).exp());
                            on.dz.push(*zp);
                            on.inc.push(c * w);
                            let tilt = if problem.exp_weight() { zp.exp() } else { 1.0 };
                            on.weight.push(wz * wq * tilt);
                            on.invariant_weight.push(wz * wq * zp.exp());
                        }
                    }
                    per.push(Arc::new(on));
                }
            }
            nodes.push(per);
        }
        Ok(Self {
            model: model.clone(),
            problem,
            cfg: cfg.clone(),
            template,
            weights,
            nodes,
            degenerate,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn template(&self) -> &GridFunction {
        &self.template
    }

    /// Sup-norm contraction factor used for the a-posteriori bound.
    pub fn rho(&self) -> f64 {
        self.problem.rho(&self.model)
    }

    pub fn f_active(&self) -> bool {
        self.nodes.iter().any(|n| !n.is_empty())
    }

    /// `g_0 = e^{-q_i (T - t)} g^0` on every node.
    pub fn build_g0(&self) -> Result<GridFunction> {
        let mut g = self.template.clone();
        let times = self.template.times().nodes().to_vec();
        let steps = times.len() - 1;
        let zs = self.template.z_axis().nodes().to_vec();
        let avals = self.template.a_axis().nodes().to_vec();
        let blocks: Vec<(usize, usize)> = (0..self.model.regimes())
            .flat_map(|i| (0..times.len()).map(move |k| (i, k)))
            .collect();
        let spec = &self.problem.spec;
        let results: Vec<Result<Vec<f64>>> = blocks
            .par_iter()
            .map(|&(i, k)| {
                let d = steps - k;
                let dt = if d == 0 { 0.0 } else { spacing(spec, steps, d) };
                let law = ConstantRegimeLaw::new(self.model.coefficients(i), dt, &self.cfg.quadrature, SliceLayout::Payoff)?;
                let survive = (-self.model.exit_rate(i) * dt).exp();
                let mut out = Vec::with_capacity(zs.len() * avals.len());
                for &z in &zs {
                    for &a in &avals {
                        out.push(survive * self.problem.g0_value(&law, z, a));
                    }
                }
                Ok(out)
            })
            .collect();
        for (&(i, k), block) in blocks.iter().zip(results) {
            g.block_mut(k, i).copy_from_slice(&block?);
        }
        Ok(g)
    }

    /// Applies `F` to a grid function with this engine's axes.
    pub fn apply_f(&self, h: &GridFunction) -> GridFunction {
        let mut out = self.template.like(0.0);
        if !self.f_active() {
            return out;
        }
        let m = self.model.regimes();
        // H_i = sum_{j != i} q_ij h_j, interpolated once instead of per target regime
        let mut combined = h.like(0.0);
        let times = h.times().len();
        for i in 0..m {
            for k in 0..times {
                let mut acc = vec![0.0; h.block(k, i).len()];
                for j in (0..m).filter(|&j| j != i) {
                    let q = self.model.q(i, j);
                    if q != 0.0 {
                        for (a, v) in acc.iter_mut().zip(h.block(k, j)) {
                            *a += q * v;
                        }
                    }
                }
                combined.block_mut(k, i).copy_from_slice(&acc);
            }
        }
        let blocks: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..times).map(move |k| (i, k))).collect();
        let zs = self.template.z_axis().nodes();
        let avals = self.template.a_axis().nodes();
        let invariant = self.template.invariance.is_some() && zs.len() == 1;
        let kappa = self.problem.kappa;
        let results: Vec<Vec<f64>> = blocks
            .par_iter()
            .map(|&(i, k)| {
                let mut out = Vec::with_capacity(zs.len() * avals.len());
                let per = &self.nodes[i];
                for &z in zs {
                    let x = z.exp();
                    for &a in avals {
                        if per.is_empty() {
                            out.push(0.0);
                            continue;
                        }
                        let mut acc = 0.0;
                        for &(l, w) in &self.weights[i][k] {
                            if l == k {
                                acc += w * combined.eval_at_time(k, z, a, i);
                                continue;
                            }
                            let on = &per[l - k - 1];
                            let mut inner = 0.0;
                            if invariant {
                                let row = combined.block(l, i);
                                for n in 0..on.weight.len() {
                                    let a_ref = kappa - (kappa - a - x * on.inc[n]) * on.inv_growth[n];
                                    inner += on.invariant_weight[n] * combined.eval_row(row, a_ref);
                                }
                            } else {
                                for n in 0..on.weight.len() {
                                    let v = combined.eval_at_time(l, z + on.dz[n], a + x * on.inc[n], i);
                                    inner += on.weight[n] * v;
                                }
                            }
                            acc += w * inner;
                        }
                        out.push(acc);
                    }
                }
                out
            })
            .collect();
        for (&(i, k), block) in blocks.iter().zip(results) {
            out.block_mut(k, i).copy_from_slice(&block);
        }
        out
    }

    /// Runs the iteration from `g_0` until the sup-norm increment drops below `epsilon`.
    pub fn iterate_from(&self, g0: &GridFunction, regime: usize) -> Result<(GridFunction, PriceResult)> {
        if regime >= self.model.regimes() {
            return Err(SpecError::RegimeOutOfRange {
                regime,
                regimes: self.model.regimes(),
            }
            .into());
        }
        let start = Instant::now();
        let mut g = g0.clone();
        let mut trace: Vec<TraceRecord> = Vec::new();
        let mut clamp_events = 0;
        let mut converged = false;
        for n in 1..=self.cfg.max_iterations {
            let mut next = self.apply_f(&g).add(g0);
            if self.problem.clamps() {
                let events = match self.problem.style() {
                    OptionStyle::FixedPut => {
                        let kappa = self.problem.kappa;
                        next.clamp_by(0.0, |a| (kappa - a) / kappa, 1e-12)
                    }
                    _ => next.clamp(0.0, 1.0, 1e-12),
                };
                clamp_events += events;
                let fraction = events as f64 / next.len() as f64;
                if fraction > self.cfg.max_clamp_fraction {
                    return Err(PricingError::accuracy(
                        "fraction of node values clamped to their a-priori range",
                        fraction,
                        0.0,
                        self.cfg.max_clamp_fraction,
                    ));
                }
            }
            let increment = next.sup_distance(&g);
            let ratio = trace
                .last()
                .filter(|r| r.increment > 0.0)
                .map(|r| increment / r.increment);
            trace.push(TraceRecord {
                n,
                increment,
                ratio,
                wall_time: start.elapsed().as_secs_f64(),
            });
            g = next;
            if increment < self.cfg.epsilon {
                converged = true;
                break;
            }
        }
        let last = trace.last().map_or(0.0, |r| r.increment);
        if !converged {
            return Err(PricingError::MaxIterations {
                iterations: self.cfg.max_iterations,
                increment: last,
            });
        }
        let spec = &self.problem.spec;
        let z = spec.spot.ln();
        let scale = self.problem.price_scale();
        let prices: Vec<f64> = (0..self.model.regimes())
            .map(|i| scale * g.eval(spec.s, z, spec.running, i))
            .collect();
        let rho = self.rho();
        let bound = if rho > 0.0 { rho * last / (1.0 - rho) } else { 0.0 };
        let result = PriceResult {
            style: spec.style,
            regime,
            price: prices[regime],
            prices,
            iterations: trace.len(),
            last_increment: last,
            first_increment: trace.first().map_or(0.0, |r| r.increment),
            rho,
            bound,
            price_bound: scale * bound,
            price_scale: scale,
            clamp_events,
            degenerate_slices: self.degenerate,
            f_active: self.f_active(),
            trace,
        };
        Ok((g, result))
    }

    pub fn iterate(&self, regime: usize) -> Result<(GridFunction, PriceResult)> {
        let g0 = self.build_g0()?;
        self.iterate_from(&g0, regime)
    }
}

/// `d` grid steps of the uniform time axis on `[s, T]` (exactly `T - s` for the full span).
fn spacing(spec: &OptionSpec, steps: usize, d: usize) -> f64 {
    if d == steps {
        spec.horizon()
    } else {
        spec.horizon() * d as f64 / steps as f64
    }
}

/// Tabulates `g_0` for the contract.
pub fn build_g0(model: &RegimeModel, spec: &OptionSpec, cfg: &EngineConfig) -> Result<GridFunction> {
    FixedPointEngine::new(model, spec, cfg)?.build_g0()
}

/// One application of `F` to `h` (which must live on the contract's grid).
pub fn apply_f(h: &GridFunction, model: &RegimeModel, spec: &OptionSpec, cfg: &EngineConfig) -> Result<GridFunction> {
    let engine = FixedPointEngine::new(model, spec, cfg)?;
    if h.len() != engine.template().len() {
        return Err(SpecError::Numerics("grid function does not match the contract's grid".into()).into());
    }
    Ok(engine.apply_f(h))
}

/// Successive approximations for any supported payoff; the price is read at regime `regime`.
pub fn iterate(
    model: &RegimeModel,
    spec: &OptionSpec,
    regime: usize,
    cfg: &EngineConfig,
) -> Result<(GridFunction, PriceResult)> {
    FixedPointEngine::new(model, spec, cfg)?.iterate(regime)
}

/// Observed increment ratios of the iteration.
pub fn measured_rate(model: &RegimeModel, spec: &OptionSpec, regime: usize, cfg: &EngineConfig) -> Result<Vec<f64>> {
    Ok(iterate(model, spec, regime, cfg)?.1.ratios())
}

/// Fixed-strike put with regime switching.
pub fn price_fixed_put(model: &RegimeModel, spec: &OptionSpec, regime: usize, cfg: &EngineConfig) -> Result<PriceResult> {
    if spec.style != OptionStyle::FixedPut {
        return Err(SpecError::WrongStyle("price_fixed_put needs a fixed-put contract").into());
    }
    Ok(iterate(model, spec, regime, cfg)?.1)
}

/// Starting fixed-strike call with regime switching. In-progress contracts are rejected.
pub fn price_fixed_call_starting(
    model: &RegimeModel,
    spec: &OptionSpec,
    regime: usize,
    cfg: &EngineConfig,
) -> Result<PriceResult> {
    if spec.style != OptionStyle::FixedCallStarting {
        return Err(SpecError::WrongStyle("price_fixed_call_starting needs a fixed-call contract").into());
    }
    if !spec.is_starting() {
        return Err(SpecError::InProgressFixedCall.into());
    }
    Ok(iterate(model, spec, regime, cfg)?.1)
}
