//! Monte Carlo ground truth.
//!
//! Regime paths are simulated exactly (exponential holding times, embedded
//! jump chain). Within a constant-regime segment the asset is advanced with
//! exact lognormal steps, the running integral accumulates by the trapezoid
//! rule and the discount factor is exact. Every path draws from its own
//! ChaCha8 stream `(seed, path index)`, so results do not depend on how paths
//! are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Result, SpecError};
use crate::model::{ConstantCoefficients, OptionSpec, OptionStyle, RegimeModel};
use crate::noswitch::SymmetrySpec;
use crate::quadrature::{pairwise_sum, GaussLegendre};
use crate::yor::PsiParams;

/// Coefficients the simulator accepts. Unlike [`RegimeModel`] a zero
/// volatility is allowed, which gives deterministic paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationModel {
    pub generator: Vec<Vec<f64>>,
    pub coefficients: Vec<ConstantCoefficients>,
}

impl SimulationModel {
    /// One regime, no transitions.
    pub fn constant(coefficients: ConstantCoefficients) -> Self {
        Self {
            generator: vec![vec![0.0]],
            coefficients: vec![coefficients],
        }
    }

    pub fn regimes(&self) -> usize {
        self.coefficients.len()
    }

    fn exit_rate(&self, i: usize) -> f64 {
        -self.generator[i][i]
    }
}

impl From<&RegimeModel> for SimulationModel {
    fn from(model: &RegimeModel) -> Self {
        Self {
            generator: model.generator().to_vec(),
            coefficients: (0..model.regimes()).map(|i| model.coefficients(i)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    /// Sub-steps per unit time inside each constant-regime segment.
    pub substeps: usize,
    /// Average each path with its mirror (negated Gaussian draws, same regime path).
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            substeps: 256,
            antithetic: false,
        }
    }
}

/// Regime path on `[s, T]`: `states[0]` holds at `s`, and `states[n + 1]` starts at `jump_times[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSkeleton {
    pub jump_times: Vec<f64>,
    pub states: Vec<usize>,
}

impl JumpSkeleton {
    /// `(start, end, regime)` for each constant-regime segment.
    pub fn segments(&self, s: f64, maturity: f64) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.states.len());
        let mut start = s;
        for (n, &state) in self.states.iter().enumerate() {
            let end = self.jump_times.get(n).copied().unwrap_or(maturity);
            out.push((start, end, state));
            start = end;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub skeleton: JumpSkeleton,
    pub terminal: f64,
    /// `A_T`, including the running integral carried in from the `OptionSpec`.
    pub running: f64,
    /// `exp(-int_s^T r(Y_u) du)`.
    pub discount: f64,
    /// Largest simulated spot on the path.
    pub max_spot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub payoff: String,
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `|value - mean| / std_error` (infinite when the estimate is exact and differs).
    pub fn z_score(&self, value: f64) -> f64 {
        let gap = (value - self.mean).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }
}

/// The stream for path `path` under `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

pub fn simulate_chain<R: Rng>(model: &SimulationModel, i: usize, s: f64, maturity: f64, rng: &mut R) -> JumpSkeleton {
    let mut jump_times = Vec::new();
    let mut states = vec![i];
    let mut t = s;
    let mut state = i;
    loop {
        let q = model.exit_rate(state);
        if q <= 0.0 {
            break;
        }
        let hold: f64 = Exp::new(q).expect("positive exit rate").sample(rng);
        t += hold;
        if t >= maturity {
            break;
        }
        let u: f64 = rng.random::<f64>() * q;
        let mut acc = 0.0;
        let mut next = state;
        for (j, &qij) in model.generator[state].iter().enumerate() {
            if j == state || qij <= 0.0 {
                continue;
            }
            acc += qij;
            next = j;
            if u < acc {
                break;
            }
        }
        state = next;
        jump_times.push(t);
        states.push(state);
    }
    JumpSkeleton { jump_times, states }
}

fn simulate_signed<R: Rng>(
    model: &SimulationModel,
    spec: &OptionSpec,
    i: usize,
    rng: &mut R,
    substeps: usize,
    sign: f64,
) -> PathSample {
    let skeleton = simulate_chain(model, i, spec.s, spec.maturity, rng);
    let mut x = spec.spot;
    let mut integral = 0.0;
    let mut log_discount = 0.0;
    let mut max_spot = x;
    for (start, end, state) in skeleton.segments(spec.s, spec.maturity) {
        let len = end - start;
        if len <= 0.0 {
            continue;
        }
        let c = model.coefficients[state];
        log_discount -= c.discount * len;
        let steps = ((substeps as f64 * len).ceil() as usize).max(1);
        let h = len / steps as f64;
        let drift = (c.discount - c.dividend - 0.5 * c.sigma * c.sigma) * h;
        let vol = c.sigma * h.sqrt();
        for _ in 0..steps {
            let n: f64 = rng.sample(StandardNormal);
            let next = x * (drift + vol * sign * n).exp();
            integral += 0.5 * h * (x + next);
            x = next;
            max_spot = max_spot.max(x);
        }
    }
    PathSample {
        skeleton,
        terminal: x,
        running: spec.running + integral,
        discount: log_discount.exp(),
        max_spot,
    }
}

/// One path from `(s, spot, running, i)` to `T`.
pub fn simulate_path<R: Rng>(
    model: &SimulationModel,
    spec: &OptionSpec,
    i: usize,
    rng: &mut R,
    substeps: usize,
) -> PathSample {
    simulate_signed(model, spec, i, rng, substeps.max(1), 1.0)
}

/// Discounted payoffs the oracle can price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payoff {
    FloatingCall,
    FixedPut { strike: f64 },
    FixedCall { strike: f64 },
    /// `(x - lambda X_T - beta (A_T - a)/(T - s))^+`.
    Symmetry { spot: f64, lambda: f64, beta: f64 },
    /// `max_t X_t / x`, undiscounted.
    RunningMax,
}

impl Payoff {
    pub fn for_spec(spec: &OptionSpec) -> Self {
        match spec.style {
            OptionStyle::FloatingCall => Payoff::FloatingCall,
            OptionStyle::FixedPut => Payoff::FixedPut {
                strike: spec.strike_or_nan(),
            },
            OptionStyle::FixedCallStarting => Payoff::FixedCall {
                strike: spec.strike_or_nan(),
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Payoff::FloatingCall => "floating-call",
            Payoff::FixedPut { .. } => "fixed-put",
            Payoff::FixedCall { .. } => "fixed-call",
            Payoff::Symmetry { .. } => "symmetry",
            Payoff::RunningMax => "running-max",
        }
    }

    pub fn value(&self, spec: &OptionSpec, path: &PathSample) -> f64 {
        let average = path.running / spec.window();
        let disc = path.discount;
        match *self {
            Payoff::FloatingCall => disc * (path.terminal - average).max(0.0),
            Payoff::FixedPut { strike } => disc * (strike - average).max(0.0),
            Payoff::FixedCall { strike } => disc * (average - strike).max(0.0),
            Payoff::Symmetry { spot, lambda, beta } => {
                let mean = (path.running - spec.running) / spec.horizon();
                disc * (spot - lambda * path.terminal - beta * mean).max(0.0)
            }
            Payoff::RunningMax => path.max_spot / spec.spot,
        }
    }
}

/// Sample mean and standard error of `payoff` over `paths` independent paths.
pub fn mc_payoff<M: Into<SimulationModel>>(
    model: M,
    spec: &OptionSpec,
    i: usize,
    payoff: Payoff,
    paths: usize,
    seed: u64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let model = model.into();
    spec.validate()?;
    if i >= model.regimes() {
        return Err(SpecError::RegimeOutOfRange {
            regime: i,
            regimes: model.regimes(),
        }
        .into());
    }
    if paths < 2 {
        return Err(SpecError::Numerics("need at least 2 paths".into()).into());
    }
    let substeps = cfg.substeps.max(1);
    let samples: Vec<f64> = (0..paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            if cfg.antithetic {
                let mut mirror = rng.clone();
                let up = simulate_signed(&model, spec, i, &mut rng, substeps, 1.0);
                let down = simulate_signed(&model, spec, i, &mut mirror, substeps, -1.0);
                0.5 * (payoff.value(spec, &up) + payoff.value(spec, &down))
            } else {
                let path = simulate_signed(&model, spec, i, &mut rng, substeps, 1.0);
                payoff.value(spec, &path)
            }
        })
        .collect();
    let n = samples.len() as f64;
    let constant = samples.iter().all(|&v| v == samples[0]);
    let mean = if constant { samples[0] } else { pairwise_sum(&samples) / n };
    let squares: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = pairwise_sum(&squares) / (n - 1.0);
    Ok(McEstimate {
        payoff: payoff.name().to_string(),
        mean,
        std_error: (variance / n).sqrt(),
        paths,
        seed,
    })
}

/// Prices the contract's own payoff. Pass `model.frozen()` for the no-jump price.
pub fn mc_price<M: Into<SimulationModel>>(
    model: M,
    spec: &OptionSpec,
    i: usize,
    paths: usize,
    seed: u64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    mc_payoff(model, spec, i, Payoff::for_spec(spec), paths, seed, cfg)
}

/// Prices the right-hand side of the symmetry identity under the transformed dynamics.
pub fn mc_symmetry(sym: &SymmetrySpec, paths: usize, seed: u64, cfg: &McConfig) -> Result<McEstimate> {
    let spec = OptionSpec {
        t0: 0.0,
        s: 0.0,
        maturity: sym.horizon,
        spot: sym.spot,
        running: 0.0,
        strike: None,
        style: OptionStyle::FloatingCall,
    };
    let payoff = Payoff::Symmetry {
        spot: sym.spot,
        lambda: sym.lambda,
        beta: sym.beta,
    };
    mc_payoff(SimulationModel::constant(sym.coefficients), &spec, 0, payoff, paths, seed, cfg)
}

/// Draws of `(Z_t, A_t)` after `dt` in regime `i` without switching, from `X_s = e^z`, `A_s = a`.
pub fn sample_psi(
    model: &RegimeModel,
    i: usize,
    z: f64,
    a: f64,
    dt: f64,
    samples: usize,
    seed: u64,
    substeps: usize,
) -> Result<Vec<(f64, f64)>> {
    let spec = OptionSpec {
        t0: 0.0,
        s: 0.0,
        maturity: dt,
        spot: z.exp(),
        running: a,
        strike: None,
        style: OptionStyle::FloatingCall,
    };
    spec.validate()?;
    let frozen = SimulationModel::constant(model.coefficients(i));
    Ok((0..samples as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let path = simulate_path(&frozen, &spec, 0, &mut rng, substeps);
            ((path.terminal / spec.spot).ln(), path.running)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins: usize,
    /// Smallest expected bin count.
    pub min_expected: f64,
}

impl ChiSquareReport {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

/// Binned chi-square of `samples` against a joint density of `(Z_t, A_t)`.
///
/// `Z` bins are equiprobable under the exact Gaussian marginal; `A` bins are
/// sample quantiles, with an open last bin whose probability is the `Z`-bin
/// probability minus the closed bins.
pub fn psi_chi_square<D>(
    params: &PsiParams,
    samples: &[(f64, f64)],
    z_bins: usize,
    a_bins: usize,
    density: D,
) -> Result<ChiSquareReport>
where
    D: Fn(&PsiParams, f64, f64) -> Result<f64> + Sync,
{
    let n = samples.len() as f64;
    if z_bins < 2 || a_bins < 2 || samples.len() < z_bins * a_bins * 5 {
        return Err(SpecError::Numerics("too few samples or bins for a chi-square test".into()).into());
    }
    let t = params.dt;
    let mean = params.scalars.nu * t;
    let sd = params.scalars.sigma2.sqrt() * t.sqrt();
    let gauss = Normal::new(mean, sd).map_err(|e| SpecError::Numerics(e.to_string()))?;
    let mut z_edges = vec![f64::NEG_INFINITY];
    for k in 1..z_bins {
        z_edges.push(gauss.inverse_cdf(k as f64 / z_bins as f64));
    }
    z_edges.push(f64::INFINITY);

    let mut a_sorted: Vec<f64> = samples.iter().map(|s| s.1).collect();
    a_sorted.sort_by(f64::total_cmp);
    let mut a_edges = vec![params.a];
    for k in 1..a_bins {
        a_edges.push(a_sorted[(k * a_sorted.len()) / a_bins]);
    }

    let mut observed = vec![0usize; z_bins * a_bins];
    for &(zp, ap) in samples {
        let zb = z_edges[1..z_bins].partition_point(|&e| e <= zp);
        let ab = a_edges[1..].partition_point(|&e| e <= ap);
        observed[zb * a_bins + ab] += 1;
    }

    // z' integration on a clipped range for the infinite outer bins
    let lo_z = mean - 9.0 * sd;
    let hi_z = mean + 9.0 * sd;
    let rule = GaussLegendre::new(16);
    let cells: Vec<(usize, usize)> = (0..z_bins)
        .flat_map(|zb| (0..a_bins - 1).map(move |ab| (zb, ab)))
        .collect();
    let probs: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(zb, ab)| {
            let (z0, z1) = (z_edges[zb].max(lo_z), z_edges[zb + 1].min(hi_z));
            let (a0, a1) = (a_edges[ab], a_edges[ab + 1]);
            let mut total = 0.0;
            for (zc, wz) in rule.composite(z0, z1, 4) {
                for (ac, wa) in rule.composite(a0, a1, 4) {
                    total += wz * wa * density(params, zc, ac)?;
                }
            }
            Ok(total)
        })
        .collect();
    let mut expected = vec![0.0; z_bins * a_bins];
    for (&(zb, ab), p) in cells.iter().zip(probs) {
        expected[zb * a_bins + ab] = n * p?;
    }
    for zb in 0..z_bins {
        let closed: f64 = (0..a_bins - 1).map(|ab| expected[zb * a_bins + ab]).sum();
        expected[zb * a_bins + a_bins - 1] = n / z_bins as f64 - closed;
    }
    let min_expected = expected.iter().copied().fold(f64::INFINITY, f64::min);
    let statistic: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            if e > 0.0 {
                d * d / e
            } else {
                f64::INFINITY
            }
        })
        .sum();
    let dof = z_bins * a_bins - 1;
    let chi = ChiSquared::new(dof as f64).map_err(|e| SpecError::Numerics(e.to_string()))?;
    let p_value = if statistic.is_finite() { chi.sf(statistic) } else { 0.0 };
    Ok(ChiSquareReport {
        statistic,
        dof,
        p_value,
        bins: z_bins * a_bins,
        min_expected,
    })
}
