//! Càdlàg step paths on bounded windows and the metrics that compare them.

mod approx;
mod modulus;
mod skorokhod;

pub use approx::{
    check_uniform_bounded, l2_step_approximation, L2Approximation, L2Target, UniformBoundReport,
};
pub use modulus::{sparse_partition, w_prime, SparsePartition};
pub use skorokhod::{j1_distance, sup_distance};

use crate::error::{invalid, Error, Result};
use std::fmt::Write as _;

/// A finite-jump càdlàg path on `[0, window]`, values in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPath {
    dim: usize,
    window: f64,
    initial: Vec<f64>,
    times: Vec<f64>,
    // post-jump values, `dim` entries per jump
    values: Vec<f64>,
}

impl StepPath {
    /// Builds a path from its initial value and `(time, post-jump value)` pairs.
    ///
    /// A jump at time 0 is folded into the initial value, and jumps that do
    /// not change the value are dropped.
    pub fn new(initial: Vec<f64>, jumps: Vec<(f64, Vec<f64>)>, window: f64) -> Result<Self> {
        let dim = initial.len();
        if dim == 0 {
            return invalid("path dimension must be positive");
        }
        if !(window > 0.0 && window.is_finite()) {
            return invalid(format!("window must be positive and finite, got {window}"));
        }
        if initial.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite initial value");
        }
        let mut path = StepPath {
            dim,
            window,
            initial,
            times: Vec::with_capacity(jumps.len()),
            values: Vec::with_capacity(jumps.len() * dim),
        };
        let mut last = f64::NEG_INFINITY;
        for (t, v) in jumps {
            if v.len() != dim {
                return Err(Error::Dimension { expected: dim, got: v.len() });
            }
            if !(t >= 0.0 && t < window) {
                return invalid(format!("jump time {t} outside [0, {window})"));
            }
            if t <= last {
                return invalid("jump times must be strictly increasing");
            }
            if v.iter().any(|x| !x.is_finite()) {
                return invalid(format!("non-finite value at jump time {t}"));
            }
            last = t;
            if t == 0.0 {
                path.initial = v;
                continue;
            }
            if v.as_slice() == path.last_value() {
                continue;
            }
            path.times.push(t);
            path.values.extend_from_slice(&v);
        }
        Ok(path)
    }

    /// Scalar convenience constructor.
    pub fn scalar(initial: f64, jumps: &[(f64, f64)], window: f64) -> Result<Self> {
        Self::new(vec![initial], jumps.iter().map(|&(t, v)| (t, vec![v])).collect(), window)
    }

    pub fn constant(value: Vec<f64>, window: f64) -> Result<Self> {
        Self::new(value, Vec::new(), window)
    }

    /// `height · 1_{[at, ∞)}` restricted to the window.
    pub fn indicator(at: f64, height: f64, window: f64) -> Result<Self> {
        if at >= window {
            return Self::scalar(0.0, &[], window);
        }
        Self::scalar(0.0, &[(at, height)], window)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn jump_count(&self) -> usize {
        self.times.len()
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    /// Value after the `i`-th jump; index 0 is the initial value.
    pub fn level(&self, i: usize) -> &[f64] {
        if i == 0 {
            &self.initial
        } else {
            &self.values[(i - 1) * self.dim..i * self.dim]
        }
    }

    fn last_value(&self) -> &[f64] {
        self.level(self.times.len())
    }

    /// Number of jumps in `[0, t]`.
    pub fn jumps_up_to(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// Number of jumps in `[0, t)`.
    pub fn jumps_before(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    pub fn value_at(&self, t: f64) -> &[f64] {
        self.level(self.jumps_up_to(t))
    }

    pub fn left_limit(&self, t: f64) -> &[f64] {
        self.level(self.jumps_before(t))
    }

    /// Largest Euclidean norm attained on `[0, n]`.
    pub fn sup_norm(&self, n: f64) -> f64 {
        (0..=self.jumps_before(n)).map(|i| norm2(self.level(i))).fold(0.0, f64::max)
    }

    /// The path cut to the shorter window `[0, n]`.
    pub fn truncate(&self, n: f64) -> Result<Self> {
        if n > self.window {
            return Err(Error::Window { requested: n, available: self.window });
        }
        let keep = self.jumps_before(n);
        Ok(StepPath {
            dim: self.dim,
            window: n,
            initial: self.initial.clone(),
            times: self.times[..keep].to_vec(),
            values: self.values[..keep * self.dim].to_vec(),
        })
    }

    /// Extracts coordinate `c` as a scalar path.
    pub fn coordinate(&self, c: usize) -> Result<Self> {
        if c >= self.dim {
            return Err(Error::Dimension { expected: self.dim, got: c + 1 });
        }
        let jumps = (0..self.jump_count())
            .map(|i| (self.times[i], vec![self.level(i + 1)[c]]))
            .collect();
        Self::new(vec![self.initial[c]], jumps, self.window)
    }

    /// Text record: header `d T n_jumps`, a `0 v…` row for the initial value,
    /// then one `t v…` row per jump. Numbers carry 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.dim, fmt17(self.window), self.jump_count());
        let mut row = |t: f64, v: &[f64]| {
            out.push_str(&fmt17(t));
            for x in v {
                let _ = write!(out, " {}", fmt17(*x));
            }
            out.push('\n');
        };
        row(0.0, &self.initial);
        for i in 0..self.jump_count() {
            row(self.times[i], self.level(i + 1));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty path record".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 {
            return Err(Error::Parse(format!("bad path header `{header}`")));
        }
        let dim: usize = parse_num(head[0])?;
        let window: f64 = parse_num(head[1])?;
        let n: usize = parse_num(head[2])?;
        let mut rows = Vec::with_capacity(n + 1);
        for line in lines {
            let nums = line.split_whitespace().map(parse_num::<f64>).collect::<Result<Vec<_>>>()?;
            if nums.len() != dim + 1 {
                return Err(Error::Parse(format!("row `{line}` does not have {} fields", dim + 1)));
            }
            rows.push((nums[0], nums[1..].to_vec()));
        }
        if rows.len() != n + 1 {
            return Err(Error::Parse(format!("expected {} rows, found {}", n + 1, rows.len())));
        }
        let (t0, initial) = rows.remove(0);
        if t0 != 0.0 {
            return Err(Error::Parse("first row must be at time 0".into()));
        }
        Self::new(initial, rows, window)
    }
}

pub(crate) fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("invalid number `{s}`")))
}

/// Formats with 17 significant digits, enough for an exact f64 round trip.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Continuous piecewise-linear path, constant outside its knots.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    dim: usize,
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let Some(first) = knots.first() else {
            return invalid("piecewise-linear path needs at least one knot");
        };
        let dim = first.1.len();
        let mut times = Vec::with_capacity(knots.len());
        let mut values = Vec::with_capacity(knots.len() * dim);
        for (t, v) in knots {
            if v.len() != dim {
                return Err(Error::Dimension { expected: dim, got: v.len() });
            }
            if !t.is_finite() || times.last().is_some_and(|&s| t <= s) {
                return invalid("knots must be finite and strictly increasing");
            }
            times.push(t);
            values.extend(v);
        }
        Ok(PiecewiseLinear { dim, knots: times, values })
    }

    /// Scalar `t ↦ min(t, cap)` starting at 0.
    pub fn ramp(cap: f64) -> Result<Self> {
        Self::new(vec![(0.0, vec![0.0]), (cap, vec![cap])])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn knot_value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    fn value(&self, t: f64) -> Vec<f64> {
        let n = self.knots.len();
        let i = self.knots.partition_point(|&s| s <= t);
        if i == 0 {
            return self.knot_value(0).to_vec();
        }
        if i == n {
            return self.knot_value(n - 1).to_vec();
        }
        let (t0, t1) = (self.knots[i - 1], self.knots[i]);
        let w = (t - t0) / (t1 - t0);
        self.knot_value(i - 1)
            .iter()
            .zip(self.knot_value(i))
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

/// Integrands against finite measures: bounded right-continuous paths with
/// finitely many breakpoints.
pub trait Integrand: Sync {
    fn dim(&self) -> usize;
    /// Right-continuous value at `t`.
    fn eval(&self, t: f64) -> Vec<f64>;
    /// `∫_a^b α(x) dx` for `a ≤ b`.
    fn lebesgue_integral(&self, a: f64, b: f64) -> Vec<f64>;
    /// Times where the path may fail to be affine.
    fn breakpoints(&self) -> Vec<f64>;
    /// Oscillation (diameter of the range) on `[a, b)`.
    fn oscillation(&self, a: f64, b: f64) -> f64;
    /// Largest ℓ¹ norm of the value on `[0, ∞)`.
    fn sup_l1(&self) -> f64;

    /// A ζ-sparse partition of `[0, n]` with small cell oscillation. The
    /// default uses uniform cells; step paths override with the exact search.
    fn partition(&self, n: f64, zeta: f64, _eps: f64) -> Result<SparsePartition> {
        SparsePartition::uniform(n, zeta)
    }
}

impl Integrand for StepPath {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        self.value_at(t).to_vec()
    }

    fn lebesgue_integral(&self, a: f64, b: f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        if b <= a {
            return acc;
        }
        let mut i = self.jumps_up_to(a);
        let mut left = a;
        loop {
            let right = self.times.get(i).copied().unwrap_or(f64::INFINITY).min(b);
            for (s, v) in acc.iter_mut().zip(self.level(i)) {
                *s += v * (right - left);
            }
            if right >= b {
                return acc;
            }
            left = right;
            i += 1;
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.times.clone()
    }

    fn oscillation(&self, a: f64, b: f64) -> f64 {
        let lo = self.jumps_up_to(a);
        let hi = self.jumps_before(b).max(lo);
        level_diameter(self, lo, hi)
    }

    fn sup_l1(&self) -> f64 {
        (0..=self.jump_count())
            .map(|i| self.level(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn partition(&self, n: f64, zeta: f64, eps: f64) -> Result<SparsePartition> {
        sparse_partition(self, n, zeta, eps)
    }
}

pub(crate) fn level_diameter(a: &StepPath, lo: usize, hi: usize) -> f64 {
    let mut d: f64 = 0.0;
    for i in lo..=hi {
        for j in i + 1..=hi {
            d = d.max(dist2(a.level(i), a.level(j)));
        }
    }
    d
}

impl Integrand for PiecewiseLinear {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        self.value(t)
    }

    fn lebesgue_integral(&self, a: f64, b: f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        if b <= a {
            return acc;
        }
        let mut cuts = vec![a];
        cuts.extend(self.knots.iter().copied().filter(|&t| t > a && t < b));
        cuts.push(b);
        for w in cuts.windows(2) {
            let (va, vb) = (self.value(w[0]), self.value(w[1]));
            for c in 0..self.dim {
                acc[c] += 0.5 * (va[c] + vb[c]) * (w[1] - w[0]);
            }
        }
        acc
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knots.clone()
    }

    fn oscillation(&self, a: f64, b: f64) -> f64 {
        let mut pts = vec![self.value(a), self.value(b)];
        pts.extend(self.knots.iter().filter(|&&t| t > a && t < b).map(|&t| self.value(t)));
        let mut d: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d = d.max(dist2(&pts[i], &pts[j]));
            }
        }
        d
    }

    fn sup_l1(&self) -> f64 {
        (0..self.knots.len())
            .map(|i| self.knot_value(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_is_right_continuous() {
        let p = StepPath::scalar(0.0, &[(1.0, 2.0), (1.5, -1.0)], 3.0).unwrap();
        assert_eq!(p.value_at(0.99), &[0.0]);
        assert_eq!(p.value_at(1.0), &[2.0]);
        assert_eq!(p.left_limit(1.0), &[0.0]);
        assert_eq!(p.value_at(3.0), &[-1.0]);
    }

    #[test]
    fn jump_at_zero_becomes_initial_value() {
        let p = StepPath::scalar(1.0, &[(0.0, 4.0), (1.0, 4.0)], 2.0).unwrap();
        assert_eq!(p.initial(), &[4.0]);
        assert_eq!(p.jump_count(), 0);
    }

    #[test]
    fn rejects_unordered_or_outside_jumps() {
        assert!(StepPath::scalar(0.0, &[(1.0, 1.0), (0.5, 2.0)], 2.0).is_err());
        assert!(StepPath::scalar(0.0, &[(2.0, 1.0)], 2.0).is_err());
        assert!(StepPath::new(vec![0.0], vec![(1.0, vec![1.0, 2.0])], 2.0).is_err());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let p = StepPath::new(
            vec![0.1, -1.0 / 3.0],
            vec![(0.2, vec![std::f64::consts::PI, 1e-300]), (0.7, vec![2.0, -0.0])],
            1.0 / 7.0 + 1.0,
        )
        .unwrap();
        let back = StepPath::from_text(&p.to_text()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn lebesgue_integral_of_step() {
        let p = StepPath::scalar(1.0, &[(1.0, 3.0)], 4.0).unwrap();
        assert_eq!(p.lebesgue_integral(0.5, 2.0), vec![0.5 + 3.0]);
        assert_eq!(p.lebesgue_integral(0.0, 10.0), vec![1.0 + 27.0]);
    }

    #[test]
    fn ramp_integral_and_oscillation() {
        let r = PiecewiseLinear::ramp(1.0).unwrap();
        assert!((r.lebesgue_integral(0.0, 2.0)[0] - 1.5).abs() < 1e-15);
        assert!((r.oscillation(0.25, 0.5) - 0.25).abs() < 1e-15);
        assert_eq!(r.eval(7.0), vec![1.0]);
    }
}
