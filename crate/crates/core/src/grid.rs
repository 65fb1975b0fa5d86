//! Tabulated functions `h(t, z, a, i)` on a rectilinear grid.
//!
//! Values are interpolated multilinearly in `(t, z, a)`. A grid may instead
//! carry a single log-price node together with a [`ScaleInvariance`]: the
//! functions iterated by the engine satisfy `C(t, c x, c a) = c C(t, x, a)`
//! (after shifting `a` by a strike budget), so the value at any `z` is an
//! exact rescaling of the value on the reference slice.

/// Strictly increasing grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    nodes: Vec<f64>,
}

impl Axis {
    pub fn new(nodes: Vec<f64>) -> Result<Self, String> {
        if nodes.is_empty() {
            return Err("axis needs at least one node".into());
        }
        if nodes.iter().any(|v| !v.is_finite()) {
            return Err("axis nodes must be finite".into());
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err("axis nodes must be strictly increasing".into());
        }
        Ok(Self { nodes })
    }

    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self, String> {
        if n == 1 {
            return Self::new(vec![lo]);
        }
        if n == 0 || !(hi > lo) {
            return Err(format!("invalid uniform axis [{lo}, {hi}] with {n} nodes"));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|k| lo + step * k as f64).collect();
        nodes[n - 1] = hi;
        Self::new(nodes)
    }

    /// Nodes `centre + scale * sinh(y)` for `y` uniform, clipped to `[lo, hi]`:
    /// dense around `centre`, geometric far from it.
    pub fn stretched(lo: f64, hi: f64, n: usize, centre: f64, scale: f64) -> Result<Self, String> {
        if n < 2 || !(hi > lo) || !(scale > 0.0) {
            return Err(format!("invalid stretched axis [{lo}, {hi}] with {n} nodes"));
        }
        let ylo = ((lo - centre) / scale).asinh();
        let yhi = ((hi - centre) / scale).asinh();
        let step = (yhi - ylo) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n)
            .map(|k| centre + scale * (ylo + step * k as f64).sinh())
            .collect();
        nodes[0] = lo;
        nodes[n - 1] = hi;
        Self::new(nodes)
    }

    /// Adds nodes (merging any within `tol` of an existing node onto the new value).
    pub fn with_nodes(&self, extra: &[f64], tol: f64) -> Self {
        let mut nodes = self.nodes.clone();
        for &x in extra {
            if !x.is_finite() {
                continue;
            }
            match nodes.iter().position(|&v| (v - x).abs() <= tol) {
                Some(p) => nodes[p] = x,
                None => nodes.push(x),
            }
        }
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        Self { nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Index of `x` if it is (exactly) a node.
    pub fn position(&self, x: f64) -> Option<usize> {
        self.nodes.iter().position(|&v| v == x)
    }

    /// `(k, f)` with `x = (1 - f) nodes[k] + f nodes[k + 1]`; `f` falls outside
    /// `[0, 1]` when `x` is outside the axis. Single-node axes return `(0, 0)`.
    pub fn bracket(&self, x: f64) -> (usize, f64) {
        let n = self.nodes.len();
        if n == 1 {
            return (0, 0.0);
        }
        let k = match self.nodes.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(k) => k.min(n - 2),
            Err(0) => 0,
            Err(k) => (k - 1).min(n - 2),
        };
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        (k, (x - x0) / (x1 - x0))
    }
}

/// Evaluation rule outside the ends of an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailPolicy {
    /// Edge value.
    Clamp,
    /// Zero (the option is worthless beyond the edge).
    Zero,
    /// Linear continuation of the last interval.
    Linear,
}

/// `h(t, z, a) = e^{power (z - z_ref)} h(t, z_ref, kappa - (kappa - a) e^{z_ref - z})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleInvariance {
    pub kappa: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    times: Axis,
    z: Axis,
    a: Axis,
    regimes: usize,
    /// Layout `[i][k][j][l]` (regime, time, log-price, running integral).
    values: Vec<f64>,
    pub a_low: TailPolicy,
    pub a_high: TailPolicy,
    pub invariance: Option<ScaleInvariance>,
}

impl GridFunction {
    pub fn new(times: Axis, z: Axis, a: Axis, regimes: usize, fill: f64) -> Self {
        let size = regimes * times.len() * z.len() * a.len();
        Self {
            times,
            z,
            a,
            regimes,
            values: vec![fill; size],
            a_low: TailPolicy::Clamp,
            a_high: TailPolicy::Clamp,
            invariance: None,
        }
    }

    /// Same axes and policies, every value set to `fill`.
    pub fn like(&self, fill: f64) -> Self {
        Self {
            values: vec![fill; self.values.len()],
            ..self.clone()
        }
    }

    pub fn times(&self) -> &Axis {
        &self.times
    }

    pub fn z_axis(&self) -> &Axis {
        &self.z
    }

    pub fn a_axis(&self) -> &Axis {
        &self.a
    }

    pub fn regimes(&self) -> usize {
        self.regimes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, k: usize, j: usize, l: usize, i: usize) -> usize {
        ((i * self.times.len() + k) * self.z.len() + j) * self.a.len() + l
    }

    pub fn get(&self, k: usize, j: usize, l: usize, i: usize) -> f64 {
        self.values[self.index(k, j, l, i)]
    }

    pub fn set(&mut self, k: usize, j: usize, l: usize, i: usize, v: f64) {
        let idx = self.index(k, j, l, i);
        self.values[idx] = v;
    }

    /// Values of one `(regime, time)` block, ordered `[j][l]`.
    pub fn block(&self, k: usize, i: usize) -> &[f64] {
        let n = self.z.len() * self.a.len();
        let start = self.index(k, 0, 0, i);
        &self.values[start..start + n]
    }

    pub fn block_mut(&mut self, k: usize, i: usize) -> &mut [f64] {
        let n = self.z.len() * self.a.len();
        let start = self.index(k, 0, 0, i);
        &mut self.values[start..start + n]
    }

    /// Interpolates one `a`-row of values with the tail policies.
    pub fn eval_row(&self, row: &[f64], a: f64) -> f64 {
        let n = row.len();
        if n == 1 {
            return row[0];
        }
        let (l, f) = self.a.bracket(a);
        if f < 0.0 {
            return match self.a_low {
                TailPolicy::Clamp => row[0],
                TailPolicy::Zero => 0.0,
                TailPolicy::Linear => row[0] + f * (row[1] - row[0]),
            };
        }
        if f > 1.0 {
            return match self.a_high {
                TailPolicy::Clamp => row[n - 1],
                TailPolicy::Zero => 0.0,
                TailPolicy::Linear => row[n - 2] + f * (row[n - 1] - row[n - 2]),
            };
        }
        if f == 0.0 {
            return row[l];
        }
        row[l] + f * (row[l + 1] - row[l])
    }

    /// Value at time node `k`, interpolated in `(z, a)`.
    pub fn eval_at_time(&self, k: usize, z: f64, a: f64, i: usize) -> f64 {
        let block = self.block(k, i);
        let na = self.a.len();
        if self.z.len() == 1 {
            if let Some(inv) = self.invariance {
                let shift = z - self.z.first();
                let a_ref = inv.kappa - (inv.kappa - a) * (-shift).exp();
                let scale = if inv.power == 0.0 { 1.0 } else { (inv.power * shift).exp() };
                return scale * self.eval_row(block, a_ref);
            }
            return self.eval_row(block, a);
        }
        let (j, f) = self.z.bracket(z);
        let f = f.clamp(0.0, 1.0);
        let lo = self.eval_row(&block[j * na..(j + 1) * na], a);
        if f == 0.0 {
            return lo;
        }
        let hi = self.eval_row(&block[(j + 1) * na..(j + 2) * na], a);
        lo + f * (hi - lo)
    }

    /// Multilinear value at an arbitrary time (clamped to the time axis).
    pub fn eval(&self, t: f64, z: f64, a: f64, i: usize) -> f64 {
        let (k, f) = self.times.bracket(t);
        let f = f.clamp(0.0, 1.0);
        let v0 = self.eval_at_time(k, z, a, i);
        if f == 0.0 || self.times.len() == 1 {
            return v0;
        }
        let v1 = self.eval_at_time(k + 1, z, a, i);
        v0 + f * (v1 - v0)
    }

    /// `sup |self - other|` over all nodes.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Pointwise `self + other`.
    pub fn add(&self, other: &GridFunction) -> GridFunction {
        let mut out = self.clone();
        for (o, v) in out.values.iter_mut().zip(&other.values) {
            *o += v;
        }
        out
    }

    /// Adds a constant to every node.
    pub fn shifted(&self, eta: f64) -> GridFunction {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v += eta);
        out
    }

    /// Clamps every value into `[lo, hi]`; returns how many values moved by more than `slack`.
    pub fn clamp(&mut self, lo: f64, hi: f64, slack: f64) -> usize {
        let mut events = 0;
        for v in &mut self.values {
            if *v < lo - slack || *v > hi + slack {
                events += 1;
            }
            *v = v.clamp(lo, hi);
        }
        events
    }

    /// Clamps into `[lo, upper(a)]` where the ceiling depends on the running-integral node.
    pub fn clamp_by(&mut self, lo: f64, upper: impl Fn(f64) -> f64, slack: f64) -> usize {
        let ceilings: Vec<f64> = self.a.nodes().iter().map(|&a| upper(a).max(lo)).collect();
        let mut events = 0;
        for row in self.values.chunks_mut(ceilings.len()) {
            for (v, &hi) in row.iter_mut().zip(&ceilings) {
                if *v < lo - slack || *v > hi + slack {
                    events += 1;
                }
                *v = v.clamp(lo, hi);
            }
        }
        events
    }
}
