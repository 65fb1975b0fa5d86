//! Market model, option contracts and the closed-form scalars derived from them.
//!
//! Regimes are indexed from 0. The generator `Q` holds per-year transition
//! intensities; `q_i = -Q[i][i]` is the exit rate of regime `i`.

use crate::error::{ModelError, SpecError};

/// Row sums of the generator must vanish to this absolute tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Regime-switching geometric Brownian motion: `dX = X[(r(Y) - delta)dt + sigma(Y)dB]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeModel {
    generator: Vec<Vec<f64>>,
    rates: Vec<f64>,
    sigmas: Vec<f64>,
    dividend: f64,
}

/// Validates raw model inputs; the generator conditions are checked row by row.
pub fn validate_model(
    generator: Vec<Vec<f64>>,
    rates: Vec<f64>,
    sigmas: Vec<f64>,
    dividend: f64,
) -> Result<RegimeModel, ModelError> {
    let m = rates.len();
    if m == 0 {
        return Err(ModelError::Empty);
    }
    if sigmas.len() != m || generator.len() != m {
        return Err(ModelError::Shape {
            rows: generator.len(),
            cols: generator.first().map_or(0, Vec::len),
            regimes: m,
        });
    }
    for row in &generator {
        if row.len() != m {
            return Err(ModelError::Shape {
                rows: generator.len(),
                cols: row.len(),
                regimes: m,
            });
        }
    }
    if generator.iter().flatten().any(|q| !q.is_finite()) {
        return Err(ModelError::NonFinite("generator"));
    }
    if rates.iter().chain(&sigmas).any(|v| !v.is_finite()) || !dividend.is_finite() {
        return Err(ModelError::NonFinite("coefficients"));
    }
    for (i, row) in generator.iter().enumerate() {
        for (j, &q) in row.iter().enumerate() {
            if i != j && q < 0.0 {
                return Err(ModelError::NegativeOffDiagonal { row: i, col: j, value: q });
            }
        }
        let sum: f64 = row.iter().sum();
        if sum.abs() > ROW_SUM_TOLERANCE {
            return Err(ModelError::RowSumNonZero { row: i, sum });
        }
    }
    for (i, &s) in sigmas.iter().enumerate() {
        if s <= 0.0 {
            return Err(ModelError::NonPositiveVolatility { regime: i, value: s });
        }
    }
    for (i, &r) in rates.iter().enumerate() {
        if r <= 0.0 {
            return Err(ModelError::NonPositiveRate { regime: i, value: r });
        }
    }
    if dividend < 0.0 {
        return Err(ModelError::NegativeDividend(dividend));
    }
    Ok(RegimeModel {
        generator,
        rates,
        sigmas,
        dividend,
    })
}

impl RegimeModel {
    pub fn new(
        generator: Vec<Vec<f64>>,
        rates: Vec<f64>,
        sigmas: Vec<f64>,
        dividend: f64,
    ) -> Result<Self, ModelError> {
        validate_model(generator, rates, sigmas, dividend)
    }

    /// One regime, no switching.
    pub fn single(rate: f64, sigma: f64, dividend: f64) -> Result<Self, ModelError> {
        validate_model(vec![vec![0.0]], vec![rate], vec![sigma], dividend)
    }

    /// Two regimes with symmetric-free exit rates `q01`, `q10`.
    pub fn two_state(
        q01: f64,
        q10: f64,
        rates: [f64; 2],
        sigmas: [f64; 2],
        dividend: f64,
    ) -> Result<Self, ModelError> {
        validate_model(
            vec![vec![-q01, q01], vec![q10, -q10]],
            rates.to_vec(),
            sigmas.to_vec(),
            dividend,
        )
    }

    pub fn regimes(&self) -> usize {
        self.rates.len()
    }

    pub fn generator(&self) -> &[Vec<f64>] {
        &self.generator
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.generator[i][j]
    }

    /// `q_i = -q_ii`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.generator[i][i]
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.rates[i]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigmas[i]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn dividend(&self) -> f64 {
        self.dividend
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigmas.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(f64::MIN, f64::max)
    }

    /// True when no regime can be left.
    pub fn is_frozen(&self) -> bool {
        (0..self.regimes()).all(|i| self.exit_rate(i) == 0.0)
    }

    pub fn with_dividend(&self, dividend: f64) -> Result<Self, ModelError> {
        validate_model(
            self.generator.clone(),
            self.rates.clone(),
            self.sigmas.clone(),
            dividend,
        )
    }

    /// Same coefficients with every transition rate set to zero.
    pub fn frozen(&self) -> Self {
        let m = self.regimes();
        Self {
            generator: vec![vec![0.0; m]; m],
            ..self.clone()
        }
    }

    /// Relabels regimes: new regime `k` is old regime `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let m = self.regimes();
        assert_eq!(perm.len(), m);
        let generator = (0..m)
            .map(|a| (0..m).map(|b| self.generator[perm[a]][perm[b]]).collect())
            .collect();
        Self {
            generator,
            rates: perm.iter().map(|&k| self.rates[k]).collect(),
            sigmas: perm.iter().map(|&k| self.sigmas[k]).collect(),
            dividend: self.dividend,
        }
    }

    pub fn scalars(&self, i: usize) -> RegimeScalars {
        RegimeScalars::new(self.rates[i], self.sigmas[i], self.dividend)
    }

    pub fn coefficients(&self, i: usize) -> ConstantCoefficients {
        ConstantCoefficients {
            discount: self.rates[i],
            dividend: self.dividend,
            sigma: self.sigmas[i],
        }
    }

    /// Contraction factor of the floating-call operator for regime `i` over `horizon = T - s`:
    /// `sum_{j != i} q_ij / (q_i + delta) * (1 - exp(-(q_i + delta) * horizon))`.
    pub fn contraction_factor(&self, i: usize, horizon: f64) -> f64 {
        let qi = self.exit_rate(i);
        let kappa = qi + self.dividend;
        if qi == 0.0 {
            return 0.0;
        }
        if kappa == 0.0 {
            return qi * horizon;
        }
        qi / kappa * -(-kappa * horizon).exp_m1()
    }

    /// `max_i rho(i)`.
    pub fn overall_rho(&self, horizon: f64) -> f64 {
        (0..self.regimes())
            .map(|i| self.contraction_factor(i, horizon))
            .fold(0.0, f64::max)
    }

    /// Contraction factor of the fixed-strike operator (no `e^{z'}` weight):
    /// `sum_{j != i} (q_ij / q_i)(1 - exp(-q_i * horizon))`.
    pub fn fixed_strike_contraction_factor(&self, i: usize, horizon: f64) -> f64 {
        let qi = self.exit_rate(i);
        if qi == 0.0 {
            0.0
        } else {
            -(-qi * horizon).exp_m1()
        }
    }

    pub fn fixed_strike_rho(&self, horizon: f64) -> f64 {
        (0..self.regimes())
            .map(|i| self.fixed_strike_contraction_factor(i, horizon))
            .fold(0.0, f64::max)
    }
}

/// Constant coefficients of the asset within one regime. `discount` may be zero
/// here (the transformed dynamics of the symmetry relation discount at `delta`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCoefficients {
    pub discount: f64,
    pub dividend: f64,
    pub sigma: f64,
}

impl ConstantCoefficients {
    pub fn scalars(&self) -> RegimeScalars {
        RegimeScalars::new(self.discount, self.sigma, self.dividend)
    }

    /// Growth rate of the forward, `r - delta`.
    pub fn carry(&self) -> f64 {
        self.discount - self.dividend
    }
}

/// Per-regime quantities of the log-price and of Yor's time change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeScalars {
    pub sigma2: f64,
    /// `nu(i) = r(i) - delta - sigma^2(i)/2`, per year.
    pub nu: f64,
    /// `2 nu(i) / sigma^2(i)`.
    pub yor_nu: f64,
}

impl RegimeScalars {
    pub fn new(rate: f64, sigma: f64, dividend: f64) -> Self {
        let sigma2 = sigma * sigma;
        let nu = rate - dividend - 0.5 * sigma2;
        Self {
            sigma2,
            nu,
            yor_nu: 2.0 * nu / sigma2,
        }
    }

    /// `t' = sigma^2 dt / 4`.
    pub fn time_scale(&self, dt: f64) -> f64 {
        0.25 * self.sigma2 * dt
    }

    /// Factor turning Yor's `w` into an increment of the running integral per unit spot:
    /// `a' - a = e^z * (4/sigma^2) * w`.
    pub fn integral_scale(&self) -> f64 {
        4.0 / self.sigma2
    }
}

/// Natural log of the spot.
pub fn log_spot(x: f64) -> f64 {
    x.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptionStyle {
    /// Payoff `(X_T - A_T/(T - t0))^+`.
    FloatingCall,
    /// Payoff `(K - A_T/(T - t0))^+`.
    FixedPut,
    /// Payoff `(A_T/(T - t0) - K)^+`, starting options only.
    FixedCallStarting,
}

impl OptionStyle {
    pub fn name(&self) -> &'static str {
        match self {
            OptionStyle::FloatingCall => "floating-call",
            OptionStyle::FixedPut => "fixed-put",
            OptionStyle::FixedCallStarting => "fixed-call-starting",
        }
    }
}

impl std::str::FromStr for OptionStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "floating-call" => Ok(OptionStyle::FloatingCall),
            "fixed-put" => Ok(OptionStyle::FixedPut),
            "fixed-call-starting" | "fixed-call" => Ok(OptionStyle::FixedCallStarting),
            other => Err(format!("unknown option style '{other}'")),
        }
    }
}

/// An Asian option together with the state `(s, x, a)` it is valued at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub t0: f64,
    pub s: f64,
    pub maturity: f64,
    pub spot: f64,
    pub running: f64,
    pub strike: Option<f64>,
    pub style: OptionStyle,
}

impl OptionSpec {
    pub fn new(
        t0: f64,
        s: f64,
        maturity: f64,
        spot: f64,
        running: f64,
        strike: Option<f64>,
        style: OptionStyle,
    ) -> Result<Self, SpecError> {
        let spec = Self {
            t0,
            s,
            maturity,
            spot,
            running,
            strike,
            style,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Floating-strike call.
    pub fn floating(t0: f64, s: f64, maturity: f64, spot: f64, running: f64) -> Result<Self, SpecError> {
        Self::new(t0, s, maturity, spot, running, None, OptionStyle::FloatingCall)
    }

    pub fn fixed_put(
        t0: f64,
        s: f64,
        maturity: f64,
        spot: f64,
        running: f64,
        strike: f64,
    ) -> Result<Self, SpecError> {
        Self::new(t0, s, maturity, spot, running, Some(strike), OptionStyle::FixedPut)
    }

    pub fn fixed_call_starting(t0: f64, maturity: f64, spot: f64, strike: f64) -> Result<Self, SpecError> {
        Self::new(t0, t0, maturity, spot, 0.0, Some(strike), OptionStyle::FixedCallStarting)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let finite = [self.t0, self.s, self.maturity, self.spot, self.running]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.t0 <= self.s && self.s <= self.maturity) {
            return Err(SpecError::TimeOrder {
                t0: self.t0,
                s: self.s,
                maturity: self.maturity,
            });
        }
        if self.maturity <= self.t0 {
            return Err(SpecError::EmptyWindow);
        }
        if self.spot <= 0.0 {
            return Err(SpecError::NonPositiveSpot(self.spot));
        }
        if self.running < 0.0 {
            return Err(SpecError::NegativeRunningIntegral(self.running));
        }
        match (self.style, self.strike) {
            (OptionStyle::FloatingCall, _) => {}
            (_, None) => return Err(SpecError::MissingStrike),
            (_, Some(k)) if !(k > 0.0) => return Err(SpecError::NonPositiveStrike(k)),
            _ => {}
        }
        if self.style == OptionStyle::FixedCallStarting && !self.is_starting() {
            return Err(SpecError::InProgressFixedCall);
        }
        Ok(())
    }

    /// `T - s`.
    pub fn horizon(&self) -> f64 {
        self.maturity - self.s
    }

    /// `T - t0`.
    pub fn window(&self) -> f64 {
        self.maturity - self.t0
    }

    pub fn is_starting(&self) -> bool {
        self.s == self.t0 && self.running == 0.0
    }

    pub fn strike_or_nan(&self) -> f64 {
        self.strike.unwrap_or(f64::NAN)
    }

    /// Same contract valued at another state.
    pub fn at(&self, s: f64, spot: f64, running: f64) -> Self {
        Self {
            s,
            spot,
            running,
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn benchmark_pair() -> RegimeModel {
        RegimeModel::two_state(1.0, 1.0, [0.05, 0.08], [0.2, 0.4], 0.0).unwrap()
    }

    #[test]
    fn accepts_valid_two_regime_model() {
        let m = benchmark_pair();
        assert_eq!(m.regimes(), 2);
        assert_eq!(m.exit_rate(0), 1.0);
    }

    #[test]
    fn rejects_row_sum() {
        let err = validate_model(
            vec![vec![-1.0, 1.1], vec![1.0, -1.0]],
            vec![0.05, 0.08],
            vec![0.2, 0.4],
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::RowSumNonZero { row: 0, .. }));
    }

    #[test]
    fn rejects_zero_volatility() {
        let err = validate_model(
            vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
            vec![0.05, 0.08],
            vec![0.2, 0.0],
            0.0,
        )
        .unwrap_err();
        assert_eq!(err, ModelError::NonPositiveVolatility { regime: 1, value: 0.0 });
    }

    #[test]
    fn rejects_negative_off_diagonal_and_rate() {
        let err = validate_model(
            vec![vec![1.0, -1.0], vec![1.0, -1.0]],
            vec![0.05, 0.08],
            vec![0.2, 0.3],
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NegativeOffDiagonal { row: 0, col: 1, .. }));
        let err = RegimeModel::single(0.0, 0.2, 0.0).unwrap_err();
        assert!(matches!(err, ModelError::NonPositiveRate { .. }));
    }

    #[test]
    fn row_sum_tolerance_is_absolute() {
        let tiny = 5e-13;
        assert!(validate_model(
            vec![vec![-1.0, 1.0 + tiny], vec![1.0, -1.0]],
            vec![0.05, 0.08],
            vec![0.2, 0.4],
            0.0
        )
        .is_ok());
    }

    #[test]
    fn contraction_factor_examples() {
        let m = benchmark_pair();
        assert!((m.contraction_factor(0, 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((m.contraction_factor(0, 1.0) - 0.632121).abs() < 1e-6);

        let m = RegimeModel::two_state(2.0, 1.0, [0.05, 0.08], [0.2, 0.4], 1.0).unwrap();
        let expected = 2.0 / 3.0 * (1.0 - (-6.0f64).exp());
        assert!((m.contraction_factor(0, 2.0) - expected).abs() < 1e-15);
        assert!((m.contraction_factor(0, 2.0) - 0.665014).abs() < 1e-6);

        let absorbing = validate_model(
            vec![vec![0.0, 0.0], vec![1.0, -1.0]],
            vec![0.05, 0.08],
            vec![0.2, 0.4],
            0.0,
        )
        .unwrap();
        assert_eq!(absorbing.contraction_factor(0, 1.0), 0.0);
    }

    #[test]
    fn contraction_factor_limits() {
        let m = RegimeModel::two_state(1.5, 0.5, [0.05, 0.08], [0.2, 0.4], 0.03).unwrap();
        assert_eq!(m.contraction_factor(0, 0.0), 0.0);
        let limit = 1.5 / (1.5 + 0.03);
        assert!((m.contraction_factor(0, 1e4) - limit).abs() < 1e-12);
    }

    #[test]
    fn derived_scalars_match_substitution() {
        let m = benchmark_pair();
        let s = m.scalars(1);
        assert!((s.nu - (0.08 - 0.08)).abs() < 1e-15);
        assert_eq!(s.time_scale(0.0), 0.0);
        assert!((s.time_scale(1.0) - 0.04).abs() < 1e-15);
        let s0 = m.scalars(0);
        assert!((s0.yor_nu - 2.0 * 0.03 / 0.04).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(OptionSpec::floating(0.0, 0.5, 1.0, 100.0, 30.0).is_ok());
        assert!(matches!(
            OptionSpec::floating(0.0, 1.5, 1.0, 100.0, 0.0),
            Err(SpecError::TimeOrder { .. })
        ));
        assert!(matches!(
            OptionSpec::new(0.0, 0.5, 1.0, 100.0, 10.0, Some(100.0), OptionStyle::FixedCallStarting),
            Err(SpecError::InProgressFixedCall)
        ));
        assert!(OptionSpec::fixed_call_starting(0.0, 1.0, 100.0, 100.0).is_ok());
        assert!(matches!(
            OptionSpec::fixed_put(0.0, 0.0, 1.0, 100.0, 0.0, 0.0),
            Err(SpecError::NonPositiveStrike(_))
        ));
    }

    #[test]
    fn permutation_relabels_everything() {
        let m = RegimeModel::two_state(1.5, 0.5, [0.05, 0.08], [0.2, 0.4], 0.03).unwrap();
        let p = m.permuted(&[1, 0]);
        assert_eq!(p.exit_rate(0), 0.5);
        assert_eq!(p.rate(0), 0.08);
        assert_eq!(p.sigma(1), 0.2);
        assert_eq!(p.permuted(&[1, 0]), m);
    }
}
