//! Constant-coefficient building blocks: the no-jump floating call `C^0`, the
//! fixed-strike put and call, the put/call symmetry between floating and fixed
//! strikes, the Black-Scholes leg and the vanilla-plus-Asian upper bound.
//!
//! All Asian prices here come from integrating the payoff against the joint
//! law of `(Z_t, A_t)`. For each `z'` node the payoff is a linear function of
//! Yor's `w` cut off at a threshold `w*(z')`, so a price is a weighted sum of
//! partial moments `P(w <= w*)` and `E[w; w <= w*]` of the conditional slices.

use std::sync::Arc;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::cache::SliceCache;
use crate::error::{Result, SpecError};
use crate::model::{ConstantCoefficients, OptionSpec, OptionStyle, RegimeModel};
use crate::quadrature::golden_section_min;
use crate::yor::{QuadratureConfig, SliceLayout, SliceSet};

/// Law of `(Z_dt, A_dt)` under constant coefficients, ready for payoff integrals.
#[derive(Debug, Clone)]
pub struct ConstantRegimeLaw {
    pub coefficients: ConstantCoefficients,
    pub dt: f64,
    slices: Option<Arc<SliceSet>>,
}

impl ConstantRegimeLaw {
    /// Builds (or fetches from the shared cache) the slices for `dt`.
    pub fn new(coefficients: ConstantCoefficients, dt: f64, cfg: &QuadratureConfig, layout: SliceLayout) -> Result<Self> {
        let slices = if dt > 0.0 {
            Some(SliceCache::global().get(coefficients.scalars(), dt, cfg, layout)?)
        } else {
            None
        };
        Ok(Self {
            coefficients,
            dt,
            slices,
        })
    }

    pub fn slices(&self) -> Option<&SliceSet> {
        self.slices.as_deref()
    }

    /// True when the slice set fell back to a point mass (tiny `t'`).
    pub fn is_degenerate(&self) -> bool {
        self.slices.as_ref().is_some_and(|s| s.degenerate)
    }

    pub fn discount_factor(&self) -> f64 {
        (-self.coefficients.discount * self.dt).exp()
    }

    /// `e^{-z} C^0` for the floating call as a function of `lambda = a e^{-z}`.
    pub fn floating_call_unit(&self, lambda: f64, window: f64) -> f64 {
        let Some(set) = &self.slices else {
            return (1.0 - lambda / window).max(0.0);
        };
        let c = set.scalars.integral_scale();
        let quarter = 0.25 * set.scalars.sigma2;
        let value = set.integrate_cut(
            |z| quarter * (z.exp() * window - lambda),
            |m| (m.z_prime.exp() - lambda / window) * m.m0 - c / window * m.m1,
        );
        self.discount_factor() * value.max(0.0)
    }

    /// Fixed-strike put `e^{-r dt} E[(K - A/window)^+]` from state `(x, a)`.
    pub fn fixed_put(&self, x: f64, a: f64, strike: f64, window: f64) -> f64 {
        let budget = strike * window - a;
        if budget <= 0.0 {
            return 0.0;
        }
        let Some(set) = &self.slices else {
            return budget / window;
        };
        let c = set.scalars.integral_scale();
        let cut = budget / (x * c);
        let value = set.integrate_cut(|_| cut, |m| budget * m.m0 - x * c * m.m1);
        self.discount_factor() * value.max(0.0) / window
    }

    /// Fixed-strike call `e^{-r dt} E[(A/window - K)^+]` from state `(x, a)`.
    pub fn fixed_call(&self, x: f64, a: f64, strike: f64, window: f64) -> f64 {
        let budget = strike * window - a;
        let Some(set) = &self.slices else {
            return (-budget / window).max(0.0);
        };
        let c = set.scalars.integral_scale();
        let cut = budget / (x * c);
        let value = set.integrate_cut(
            |_| cut,
            |m| -budget * (m.mass - m.m0) + x * c * (m.mean_w - m.m1),
        );
        self.discount_factor() * value.max(0.0) / window
    }
}

/// `E[A_{s+h}] = a + x (e^{(r-delta)h} - 1)/(r - delta)`, with the limit `a + x h` at `r = delta`.
pub fn expected_running_integral(coefficients: &ConstantCoefficients, horizon: f64, x: f64, a: f64) -> f64 {
    let g = coefficients.carry();
    if (g * horizon).abs() < 1e-12 {
        a + x * horizon
    } else {
        a + x * (g * horizon).exp_m1() / g
    }
}

/// Discounted fixed-strike put-call parity gap `e^{-rh} (E[A_T]/window - K)`.
pub fn fixed_parity_gap(coefficients: &ConstantCoefficients, spec: &OptionSpec) -> f64 {
    let h = spec.horizon();
    let mean = expected_running_integral(coefficients, h, spec.spot, spec.running);
    (-coefficients.discount * h).exp() * (mean / spec.window() - spec.strike_or_nan())
}

fn check_regime(model: &RegimeModel, i: usize) -> Result<()> {
    if i >= model.regimes() {
        return Err(SpecError::RegimeOutOfRange {
            regime: i,
            regimes: model.regimes(),
        }
        .into());
    }
    Ok(())
}

/// `C^0(s, x, a, i)`: floating-strike call conditional on no regime change before `T`.
pub fn c0_floating(model: &RegimeModel, spec: &OptionSpec, i: usize, cfg: &QuadratureConfig) -> Result<f64> {
    spec.validate()?;
    check_regime(model, i)?;
    let law = ConstantRegimeLaw::new(model.coefficients(i), spec.horizon(), cfg, SliceLayout::Payoff)?;
    Ok(spec.spot * law.floating_call_unit(spec.running / spec.spot, spec.window()))
}

fn strike_of(spec: &OptionSpec) -> Result<f64> {
    spec.strike.ok_or_else(|| SpecError::MissingStrike.into())
}

/// Fixed-strike put under the constant coefficients of regime `i`.
pub fn fixed_put_ns(model: &RegimeModel, spec: &OptionSpec, i: usize, cfg: &QuadratureConfig) -> Result<f64> {
    check_regime(model, i)?;
    fixed_put_with(&model.coefficients(i), spec, cfg)
}

/// Fixed-strike call under the constant coefficients of regime `i` (any state).
pub fn fixed_call_ns(model: &RegimeModel, spec: &OptionSpec, i: usize, cfg: &QuadratureConfig) -> Result<f64> {
    check_regime(model, i)?;
    let k = strike_of(spec)?;
    let law = ConstantRegimeLaw::new(model.coefficients(i), spec.horizon(), cfg, SliceLayout::Payoff)?;
    Ok(law.fixed_call(spec.spot, spec.running, k, spec.window()))
}

/// Fixed-strike put under arbitrary constant coefficients (used for transformed dynamics).
pub fn fixed_put_with(coefficients: &ConstantCoefficients, spec: &OptionSpec, cfg: &QuadratureConfig) -> Result<f64> {
    let k = strike_of(spec)?;
    if spec.spot <= 0.0 || spec.horizon() < 0.0 || spec.window() <= 0.0 {
        return Err(SpecError::TimeOrder {
            t0: spec.t0,
            s: spec.s,
            maturity: spec.maturity,
        }
        .into());
    }
    let law = ConstantRegimeLaw::new(*coefficients, spec.horizon(), cfg, SliceLayout::Payoff)?;
    Ok(law.fixed_put(spec.spot, spec.running, k, spec.window()))
}

/// Parameters of the floating/fixed symmetry for one regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetrySpec {
    /// `a / (x (T - t0))`.
    pub lambda: f64,
    /// `(T - s)/(T - t0)`.
    pub beta: f64,
    /// Transformed dynamics: drift `delta - r(i)`, same volatility, discounting at `delta`.
    pub coefficients: ConstantCoefficients,
    pub spot: f64,
    pub horizon: f64,
}

impl SymmetrySpec {
    /// Generalised payoff `(x - lambda X*_T - beta * average*)^+` before discounting.
    pub fn payoff(&self, terminal: f64, average: f64) -> f64 {
        (self.spot - self.lambda * terminal - self.beta * average).max(0.0)
    }

    pub fn discount_factor(&self) -> f64 {
        (-self.coefficients.discount * self.horizon).exp()
    }

    /// With `lambda = 0` the right-hand side is `beta` times a starting fixed put
    /// with strike `x / beta` on the average over `[s, T]`.
    pub fn is_fixed_put(&self) -> bool {
        self.lambda == 0.0
    }

    /// Price of the equivalent starting fixed put when `lambda = 0`.
    pub fn fixed_put_price(&self, cfg: &QuadratureConfig) -> Result<f64> {
        if !self.is_fixed_put() {
            return Err(SpecError::WrongStyle("in-progress symmetry (lambda > 0) has no fixed-put form").into());
        }
        let put = OptionSpec {
            t0: 0.0,
            s: 0.0,
            maturity: self.horizon,
            spot: self.spot,
            running: 0.0,
            strike: Some(self.spot / self.beta),
            style: OptionStyle::FixedPut,
        };
        Ok(self.beta * fixed_put_with(&self.coefficients, &put, cfg)?)
    }
}

pub fn symmetry_transform(model: &RegimeModel, spec: &OptionSpec, i: usize) -> Result<SymmetrySpec> {
    check_regime(model, i)?;
    Ok(SymmetrySpec {
        lambda: spec.running / (spec.spot * spec.window()),
        beta: spec.horizon() / spec.window(),
        coefficients: ConstantCoefficients {
            discount: model.dividend(),
            dividend: model.rate(i),
            sigma: model.sigma(i),
        },
        spot: spec.spot,
        horizon: spec.horizon(),
    })
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Black-Scholes call with continuous dividend yield `delta`.
pub fn bs_european_call(r: f64, sigma: f64, delta: f64, s: f64, maturity: f64, x: f64, strike: f64) -> f64 {
    let tau = (maturity - s).max(0.0);
    let df = (-r * tau).exp();
    let forward = x * ((r - delta) * tau).exp();
    if strike <= 0.0 {
        return x * (-delta * tau).exp();
    }
    let vol = sigma * tau.sqrt();
    if vol < 1e-12 {
        return df * (forward - strike).max(0.0);
    }
    let n = standard_normal();
    let d1 = ((forward / strike).ln() + 0.5 * vol * vol) / vol;
    let d2 = d1 - vol;
    df * (forward * n.cdf(d1) - strike * n.cdf(d2))
}

/// Upper bound on `C^0` from splitting the payoff into a vanilla call and a starting floating call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HendersonBound {
    pub bound: f64,
    pub alpha: f64,
}

/// Evaluates the split `B(alpha)`:
///
/// `B(alpha) = (1 - alpha) BS(x, K = a / ((1 - alpha)(T - t0))) + beta P*(K = x alpha / beta)`,
///
/// where `P*` is a starting fixed put on the average over `[s, T]` under the
/// transformed dynamics of [`symmetry_transform`].
pub struct HendersonObjective {
    coefficients: ConstantCoefficients,
    spec: OptionSpec,
    symmetry: SymmetrySpec,
    law: ConstantRegimeLaw,
}

impl HendersonObjective {
    pub fn new(model: &RegimeModel, spec: &OptionSpec, i: usize, cfg: &QuadratureConfig) -> Result<Self> {
        spec.validate()?;
        let symmetry = symmetry_transform(model, spec, i)?;
        let law = ConstantRegimeLaw::new(symmetry.coefficients, spec.horizon(), cfg, SliceLayout::Payoff)?;
        Ok(Self {
            coefficients: model.coefficients(i),
            spec: *spec,
            symmetry,
            law,
        })
    }

    pub fn value(&self, alpha: f64) -> f64 {
        let spec = &self.spec;
        let co = &self.coefficients;
        let vanilla = if alpha >= 1.0 {
            0.0
        } else {
            let k = spec.running / ((1.0 - alpha) * spec.window());
            (1.0 - alpha) * bs_european_call(co.discount, co.sigma, co.dividend, spec.s, spec.maturity, spec.spot, k)
        };
        let asian = if alpha <= 0.0 {
            0.0
        } else {
            let beta = self.symmetry.beta;
            let k = spec.spot * alpha / beta;
            beta * self.law.fixed_put(spec.spot, 0.0, k, spec.horizon())
        };
        vanilla + asian
    }
}

/// Minimises the split bound over `alpha` in `[0, 1]` by golden-section search.
pub fn henderson_upper_bound(
    model: &RegimeModel,
    spec: &OptionSpec,
    i: usize,
    cfg: &QuadratureConfig,
) -> Result<HendersonBound> {
    let objective = HendersonObjective::new(model, spec, i, cfg)?;
    if spec.horizon() <= 0.0 {
        let alpha = 0.0;
        return Ok(HendersonBound {
            bound: objective.value(alpha),
            alpha,
        });
    }
    let (alpha, bound) = golden_section_min(|a| objective.value(a), 0.0, 1.0, 40);
    Ok(HendersonBound { bound, alpha })
}
