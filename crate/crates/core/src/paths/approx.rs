use super::{norm2, StepPath};
use crate::error::{invalid, Error, Result};
use crate::measures::FiniteMeasure;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct UniformBoundReport {
    /// (1) every path has a finite terminal value.
    pub finite_limits: bool,
    /// (2) largest sup-norm over the finite prefix.
    pub local_bound: f64,
    pub local_pass: bool,
    /// (3) the declared bound on the tail is finite.
    pub tail_pass: bool,
    pub pass: bool,
    /// Implied uniform bound when all conditions hold.
    pub bound: Option<f64>,
}

/// Checks that a family of paths is uniformly bounded from a finite prefix
/// plus a declared bound `tail_bound` on `limsup_k ‖α^k‖_∞`.
pub fn check_uniform_bounded(seq: &[StepPath], terminals: &[Vec<f64>], tail_bound: f64) -> Result<UniformBoundReport> {
    if let Some(first) = seq.first() {
        if let Some(p) = seq.iter().find(|p| p.dim() != first.dim()) {
            return Err(Error::Dimension { expected: first.dim(), got: p.dim() });
        }
    }
    let finite_limits = terminals.iter().all(|v| v.iter().all(|x| x.is_finite()))
        && terminals.len() == seq.len();
    let local_bound = seq.iter().map(|p| p.sup_norm(p.window())).fold(0.0, f64::max);
    let local_pass = local_bound.is_finite();
    let tail_pass = tail_bound.is_finite();
    let pass = finite_limits && local_pass && tail_pass;
    let terminal_bound = terminals.iter().map(|v| norm2(v)).fold(0.0, f64::max);
    Ok(UniformBoundReport {
        finite_limits,
        local_bound,
        local_pass,
        tail_pass,
        pass,
        bound: pass.then(|| local_bound.max(tail_bound).max(terminal_bound)),
    })
}

/// What to approximate: a step path, or a function sampled pointwise.
pub enum L2Target<'a> {
    Path(&'a StepPath),
    Function { f: &'a (dyn Fn(f64) -> Vec<f64> + Sync), dim: usize, window: f64 },
}

impl L2Target<'_> {
    fn dim(&self) -> usize {
        match self {
            L2Target::Path(p) => p.dim(),
            L2Target::Function { dim, .. } => *dim,
        }
    }

    fn window(&self) -> f64 {
        match self {
            L2Target::Path(p) => p.window(),
            L2Target::Function { window, .. } => *window,
        }
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        match self {
            L2Target::Path(p) => p.value_at(t).to_vec(),
            L2Target::Function { f, .. } => f(t),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            L2Target::Path(p) => p.jump_times().to_vec(),
            L2Target::Function { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct L2Approximation {
    pub path: StepPath,
    /// `∫ ‖target − path‖² dμ` as computed by the constructor.
    pub error_sq: f64,
    /// Refinement level: cells of length `2^{e−level}` and truncation at
    /// `2^level`.
    pub level: u32,
}

const DENOM_BITS: i32 = 40;

fn on_dyadic_grid(x: f64) -> bool {
    let scaled = x * f64::powi(2.0, DENOM_BITS);
    scaled.is_finite() && scaled.fract() == 0.0 && scaled.abs() < 2f64.powi(53)
}

// 5-point Gauss–Legendre on [-1, 1]
const GL_X: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// `∫_a^b g dx` by composite Gauss–Legendre.
fn quad(a: f64, b: f64, g: &mut dyn FnMut(f64) -> f64) -> f64 {
    const PANELS: usize = 4;
    let h = (b - a) / PANELS as f64;
    let mut s = 0.0;
    for p in 0..PANELS {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in GL_X.iter().zip(GL_W) {
            s += w * g(mid + 0.5 * h * x);
        }
    }
    0.5 * h * s
}

/// Pieces of `[lo, hi)` on which μ has constant density, split further at
/// the target's breakpoints.
fn dense_pieces(mu: &FiniteMeasure, extra: &[f64], lo: f64, hi: f64) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for w in mu.plinear().windows(2) {
        let (a, b) = (w[0].0.max(lo), w[1].0.min(hi));
        if b <= a {
            continue;
        }
        let density = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        if density == 0.0 {
            continue;
        }
        let mut cuts = vec![a];
        cuts.extend(extra.iter().copied().filter(|&t| t > a && t < b));
        cuts.push(b);
        for c in cuts.windows(2) {
            out.push((c[0], c[1], density));
        }
    }
    out
}

/// Step approximation with dyadic knots and dyadic values such that
/// `∫ ‖target − s‖₂² dμ < eps²`.
///
/// At level `j` the target is truncated to `{‖target‖ ≤ 2^j}`, averaged
/// against μ over dyadic cells of length `2^{e−j}` and rounded to the grid
/// `2^{−(j+20)}`; the level increases until the error budget is met.
pub fn l2_step_approximation(target: &L2Target, mu: &FiniteMeasure, eps: f64) -> Result<L2Approximation> {
    if !(eps > 0.0) {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    let (dim, window) = (target.dim(), target.window());
    if let L2Target::Path(p) = target {
        let rational = p.jump_times().iter().all(|&t| on_dyadic_grid(t))
            && (0..=p.jump_count()).all(|i| p.level(i).iter().all(|&v| on_dyadic_grid(v)));
        if rational {
            return Ok(L2Approximation { path: (*p).clone(), error_sq: 0.0, level: 0 });
        }
    }
    for &(t, _) in mu.atoms() {
        if t <= window && !target.eval(t).iter().all(|v| v.is_finite()) {
            return invalid(format!("target is unbounded on the atom at {t}"));
        }
    }
    let extra = target.breakpoints();
    let top = window.log2().ceil() as i32;
    for level in 0..=30u32 {
        let h = f64::powi(2.0, top - level as i32);
        let cap = f64::powi(2.0, level as i32);
        let quantum = f64::powi(2.0, -(level as i32 + 20));
        let truncated = |t: f64| {
            let v = target.eval(t);
            if norm2(&v) <= cap {
                v
            } else {
                vec![0.0; dim]
            }
        };
        let cells = ((window / h).ceil() as usize).max(1);
        let mut values = Vec::with_capacity(cells);
        for i in 0..cells {
            let (lo, hi) = (i as f64 * h, ((i + 1) as f64 * h).min(window));
            let mut mass = 0.0;
            let mut acc = vec![0.0; dim];
            for &(t, m) in mu.atoms().iter().filter(|a| a.0 >= lo && (a.0 < hi || (hi == window && a.0 == hi))) {
                mass += m;
                for (s, v) in acc.iter_mut().zip(truncated(t)) {
                    *s += m * v;
                }
            }
            for (a, b, rho) in dense_pieces(mu, &extra, lo, hi) {
                mass += rho * (b - a);
                for (c, s) in acc.iter_mut().enumerate() {
                    *s += rho * quad(a, b, &mut |t| truncated(t)[c]);
                }
            }
            let raw = if mass > 0.0 { acc.iter().map(|s| s / mass).collect() } else { truncated(lo) };
            values.push(raw.iter().map(|v| (v / quantum).round() * quantum).collect::<Vec<f64>>());
        }
        let jumps = (1..cells).map(|i| (i as f64 * h, values[i].clone())).collect();
        let path = StepPath::new(values[0].clone(), jumps, window)?;
        let error_sq = squared_error(target, &path, mu, &extra);
        if error_sq < eps * eps {
            return Ok(L2Approximation { path, error_sq, level });
        }
    }
    invalid("approximation did not reach the error budget within 30 refinements")
}

fn squared_error(target: &L2Target, s: &StepPath, mu: &FiniteMeasure, extra: &[f64]) -> f64 {
    let window = s.window();
    let gap = |t: f64| {
        let v = target.eval(t);
        v.iter().zip(s.value_at(t)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    };
    let mut err: f64 = mu.atoms().iter().filter(|a| a.0 <= window).map(|&(t, m)| m * gap(t)).sum();
    let mut cuts = extra.to_vec();
    cuts.extend(s.jump_times());
    for (a, b, rho) in dense_pieces(mu, &cuts, 0.0, window) {
        err += rho * quad(a, b, &mut |t| gap(t));
    }
    err
}
