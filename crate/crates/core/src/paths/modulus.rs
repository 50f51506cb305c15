use super::{dist2, Integrand, StepPath};
use crate::error::{invalid, Result};

/// Knots `0 = t_0 < … < t_κ = N` whose interior cells are longer than ζ.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePartition {
    knots: Vec<f64>,
    zeta: f64,
}

impl SparsePartition {
    pub fn new(knots: Vec<f64>, zeta: f64) -> Result<Self> {
        if knots.len() < 2 || knots[0] != 0.0 {
            return invalid("partition must start at 0 and contain its end point");
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("partition knots must be strictly increasing");
        }
        let k = knots.len() - 1;
        if (1..k).any(|i| knots[i] - knots[i - 1] <= zeta) {
            return invalid(format!("partition is not {zeta}-sparse"));
        }
        Ok(SparsePartition { knots, zeta })
    }

    /// Cells of equal length just above ζ (the last one absorbs the rest).
    pub fn uniform(n: f64, zeta: f64) -> Result<Self> {
        if !(zeta > 0.0 && zeta < n) {
            return invalid(format!("need 0 < zeta < N, got zeta={zeta}, N={n}"));
        }
        let cells = ((n / zeta).floor() as usize).max(1);
        let mut width = n / cells as f64;
        let cells = if width <= zeta { cells - 1 } else { cells }.max(1);
        width = n / cells as f64;
        let mut knots: Vec<f64> = (0..cells).map(|i| i as f64 * width).collect();
        knots.push(n);
        Self::new(knots, zeta)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Largest oscillation of `a` over the cells `[t_{i-1}, t_i)`.
    pub fn max_oscillation(&self, a: &dyn Integrand) -> f64 {
        self.knots.windows(2).map(|w| a.oscillation(w[0], w[1])).fold(0.0, f64::max)
    }
}

fn check(n: f64, zeta: f64, a: &StepPath) -> Result<()> {
    if !(zeta > 0.0) {
        return invalid(format!("zeta must be positive, got {zeta}"));
    }
    if !(zeta < n) {
        return invalid(format!("zeta {zeta} must be below the window {n}"));
    }
    if n > a.window() {
        return invalid(format!("window {n} exceeds path window {}", a.window()));
    }
    Ok(())
}

/// Modulus `w′_N(a, ζ)`: the least achievable maximal cell oscillation over
/// ζ-sparse partitions of `[0, N]`.
pub fn w_prime(a: &StepPath, n: f64, zeta: f64) -> Result<f64> {
    check(n, zeta, a)?;
    let m = a.jumps_before(n);
    let table = Diameters::new(a, m);
    let mut cand: Vec<f64> = table.values();
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    let (mut l, mut r) = (0, cand.len() - 1);
    while l < r {
        let mid = (l + r) / 2;
        if search(a, n, zeta, cand[mid], &table, false).is_some() {
            r = mid;
        } else {
            l = mid + 1;
        }
    }
    Ok(cand[l])
}

/// A ζ-sparse partition of `[0, N]` attaining `w′_N(a, ζ)`, hence within
/// any slack `eps` of it.
pub fn sparse_partition(a: &StepPath, n: f64, zeta: f64, eps: f64) -> Result<SparsePartition> {
    if !(eps > 0.0) {
        return invalid(format!("slack must be positive, got {eps}"));
    }
    let level = w_prime(a, n, zeta)?;
    let m = a.jumps_before(n);
    let table = Diameters::new(a, m);
    // the optimum places knots at infima `x + ζ`; a slightly larger gap turns
    // them into admissible knots
    let mut eta = zeta * 1e-6;
    for _ in 0..60 {
        if let Some(knots) = search(a, n, zeta + eta, level, &table, true) {
            if let Ok(p) = SparsePartition::new(knots, zeta) {
                return Ok(p);
            }
        }
        eta *= 0.5;
    }
    invalid("could not realise an optimal partition in floating point")
}

/// Diameters `D(p, q)` of the levels `p..=q` of the path.
struct Diameters {
    m: usize,
    d: Vec<f64>,
}

impl Diameters {
    fn new(a: &StepPath, m: usize) -> Self {
        let size = m + 1;
        let mut d = vec![0.0; size * size];
        for p in 0..size {
            let mut cur: f64 = 0.0;
            let (mut lo, mut hi) = (a.level(p)[0], a.level(p)[0]);
            for q in p + 1..size {
                if a.dim() == 1 {
                    let v = a.level(q)[0];
                    lo = lo.min(v);
                    hi = hi.max(v);
                    cur = hi - lo;
                } else {
                    for r in p..q {
                        cur = cur.max(dist2(a.level(q), a.level(r)));
                    }
                }
                d[p * size + q] = cur;
            }
        }
        Diameters { m, d }
    }

    fn get(&self, p: usize, q: usize) -> f64 {
        self.d[p * (self.m + 1) + q]
    }

    fn values(&self) -> Vec<f64> {
        let mut v = vec![0.0];
        for p in 0..=self.m {
            for q in p + 1..=self.m {
                v.push(self.get(p, q));
            }
        }
        v
    }
}

/// Forward sweep over the jump intervals: `start[p]` is the earliest
/// (infimal) start of a cell that begins in interval `p`, i.e. between jump
/// `p` and jump `p+1`. Returns knots when `reconstruct` is set.
fn search(
    a: &StepPath,
    n: f64,
    zeta: f64,
    theta: f64,
    table: &Diameters,
    reconstruct: bool,
) -> Option<Vec<f64>> {
    let m = table.m;
    let s = |i: usize| -> f64 {
        match i {
            0 => 0.0,
            i if i <= m => a.jump_times()[i - 1],
            _ => n,
        }
    };
    let slack = 1e-12 * theta.max(1.0);
    let mut start: Vec<Option<f64>> = vec![None; m + 1];
    let mut prev: Vec<usize> = vec![usize::MAX; m + 1];
    start[0] = Some(0.0);
    for p in 0..=m {
        let Some(x) = start[p] else { continue };
        let mut qmax = p;
        while qmax < m && table.get(p, qmax + 1) <= theta + slack {
            qmax += 1;
        }
        if qmax == m {
            if !reconstruct {
                return Some(Vec::new());
            }
            let mut knots = vec![n];
            let mut cur = p;
            while cur != 0 {
                knots.push(start[cur].unwrap());
                cur = prev[cur];
            }
            knots.push(0.0);
            knots.reverse();
            return Some(knots);
        }
        for p2 in p + 1..=qmax + 1 {
            let y = if s(p2) > x + zeta { s(p2) } else { x + zeta };
            let ok = if p2 == qmax + 1 { s(p2) > x + zeta } else { y < s(p2 + 1) };
            if ok && y < n && start[p2].is_none_or(|cur| y < cur) {
                start[p2] = Some(y);
                prev[p2] = p;
            }
        }
    }
    None
}
