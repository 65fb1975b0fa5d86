//! Quadrature and interpolation primitives shared by the density and pricing code.

use std::f64::consts::PI;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        self.mapped(lo, hi).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule: `panels` equal panels on `[lo, hi]`.
    pub fn composite(&self, lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
        let panels = panels.max(1);
        let width = (hi - lo) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.len());
        for p in 0..panels {
            let a = lo + width * p as f64;
            let b = if p + 1 == panels { hi } else { a + width };
            out.extend(self.mapped(a, b));
        }
        out
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Polynomial interpolant through Chebyshev points of the second kind,
/// evaluated with the barycentric formula.
#[derive(Debug, Clone)]
pub struct ChebyshevInterpolant {
    lo: f64,
    hi: f64,
    points: Vec<f64>,
    values: Vec<f64>,
}

impl ChebyshevInterpolant {
    /// Chebyshev points (second kind) on `[lo, hi]`, ascending.
    pub fn points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        assert!(n >= 2);
        let m = (n - 1) as f64;
        (0..n)
            .map(|j| {
                let x = -(PI * j as f64 / m).cos();
                0.5 * (lo + hi) + 0.5 * (hi - lo) * x
            })
            .collect()
    }

    pub fn from_values(lo: f64, hi: f64, values: Vec<f64>) -> Self {
        let points = Self::points(lo, hi, values.len());
        Self {
            lo,
            hi,
            points,
            values,
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.points.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..n {
            let diff = x - self.points[j];
            if diff == 0.0 {
                return self.values[j];
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                w *= 0.5;
            }
            let c = w / diff;
            num += c * self.values[j];
            den += c;
        }
        num / den
    }
}

/// Compensated (Kahan-Babuska) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Pairwise summation in fixed order; deterministic for a given slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    iterations: usize,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iterations {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // the endpoints can win for monotone objectives
    let fa = f(lo);
    let fb = f(hi);
    let (mut best_x, mut best_f) = if fc <= fd { (c, fc) } else { (d, fd) };
    if fa < best_f {
        best_x = lo;
        best_f = fa;
    }
    if fb < best_f {
        best_x = hi;
        best_f = fb;
    }
    (best_x, best_f)
}

/// Solves `f(x) = 0` on a bracket `[lo, hi]` by Newton steps, falling back to
/// bisection whenever a step leaves the bracket. `f` returns `(value, derivative)`.
pub fn safeguarded_newton<F: FnMut(f64) -> (f64, f64)>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    start: f64,
    tol: f64,
) -> f64 {
    let (flo, _) = f(lo);
    let increasing = flo < 0.0;
    let mut x = start.clamp(lo, hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == increasing {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / dfx;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= tol * (1.0 + x.abs()) || (hi - lo) <= tol * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// Newton iteration for an increasing `f` on `[lo, hi]`, with bisection whenever
/// a step leaves the current bracket. Stops when the step is below `tol * (1 + |x|)`.
pub fn newton_increasing<F: FnMut(f64) -> (f64, f64)>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    start: f64,
    tol: f64,
) -> f64 {
    let mut x = start.clamp(lo, hi);
    for _ in 0..100 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = fx / dfx;
        let mut next = x - step;
        if !next.is_finite() || next < lo || next > hi {
            next = 0.5 * (lo + hi);
        } else if step.abs() <= tol * (1.0 + x.abs()) {
            return next;
        }
        if hi - lo <= tol * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 10, 16, 31] {
            let rule = GaussLegendre::new(n);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
            assert!((got - exact).abs() < 1e-13, "n={n}: {got}");
            let w: f64 = rule.weights().iter().sum();
            assert!((w - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn chebyshev_reproduces_smooth_function() {
        let pts = ChebyshevInterpolant::points(-1.0, 3.0, 24);
        let vals = pts.iter().map(|x| (0.7 * x).sin() - x * x).collect();
        let cheb = ChebyshevInterpolant::from_values(-1.0, 3.0, vals);
        for x in [-0.95f64, 0.1, 1.37, 2.99] {
            let exact = (0.7 * x).sin() - x * x;
            assert!((cheb.eval(x) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section_min(|x| (x - 0.3).powi(2) + 1.0, 0.0, 1.0, 60);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn newton_solves_with_bracket() {
        let root = safeguarded_newton(|x| (x.exp() - 2.0, x.exp()), 0.0, 5.0, 4.9, 1e-15);
        assert!((root - 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::default();
        k.add(1e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 1000.0);
    }
}
