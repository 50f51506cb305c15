use super::{dist2, StepPath};
use crate::error::{Error, Result};

fn check_pair(a: &StepPath, b: &StepPath, n: f64) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.dim(), got: b.dim() });
    }
    for p in [a, b] {
        if n > p.window() {
            return Err(Error::Window { requested: n, available: p.window() });
        }
    }
    if !(n > 0.0) {
        return Err(Error::Invalid(format!("window must be positive, got {n}")));
    }
    Ok(())
}

/// Supremum distance on `[0, n]`, exact over the merged jump skeleton.
pub fn sup_distance(a: &StepPath, b: &StepPath, n: f64) -> Result<f64> {
    check_pair(a, b, n)?;
    let (na, nb) = (a.jumps_before(n), b.jumps_before(n));
    let (sa, sb) = (a.jump_times(), b.jump_times());
    let (mut i, mut j) = (0, 0);
    let mut d = dist2(a.level(0), b.level(0));
    while i < na || j < nb {
        let ta = if i < na { sa[i] } else { f64::INFINITY };
        let tb = if j < nb { sb[j] } else { f64::INFINITY };
        if ta <= tb {
            i += 1;
        }
        if tb <= ta {
            j += 1;
        }
        d = d.max(dist2(a.level(i), b.level(j)));
    }
    Ok(d)
}

/// Skorokhod J1 distance on `[0, n]`.
///
/// The optimum is one of finitely many candidates (jump-time offsets and
/// level distances); each candidate is tested by a reachability sweep over
/// pairs `(i, j)` = (jumps of `a` seen, jumps of `b` seen).
pub fn j1_distance(a: &StepPath, b: &StepPath, n: f64) -> Result<f64> {
    let hi = sup_distance(a, b, n)?;
    let (na, nb) = (a.jumps_before(n), b.jumps_before(n));
    if na == 0 || nb == 0 || hi == 0.0 {
        return Ok(hi);
    }
    let lo = dist2(a.level(0), b.level(0)).max(dist2(a.level(na), b.level(nb)));
    if lo >= hi {
        return Ok(hi);
    }
    let grid = Grid::new(a, b, n, hi);

    let mut cand: Vec<f64> = grid.dist.iter().copied().filter(|&d| d > lo && d < hi).collect();
    let (s, u) = (grid.s, grid.u);
    let mut j0 = 0;
    for &si in s {
        while j0 < u.len() && u[j0] < si - hi {
            j0 += 1;
        }
        for &uj in &u[j0..] {
            if uj > si + hi {
                break;
            }
            let d = (si - uj).abs();
            if d > lo && d < hi {
                cand.push(d);
            }
        }
    }
    cand.push(lo);
    cand.push(hi);
    cand.sort_by(f64::total_cmp);
    cand.dedup();

    let mut reach = vec![false; grid.dist.len()];
    let (mut l, mut r) = (0, cand.len() - 1);
    while l < r {
        let mid = (l + r) / 2;
        if grid.feasible(cand[mid], &mut reach) {
            r = mid;
        } else {
            l = mid + 1;
        }
    }
    Ok(cand[l])
}

struct Grid<'a> {
    s: &'a [f64],
    u: &'a [f64],
    n: f64,
    // band of admissible j for each i, and the flat offset of each row
    lo: Vec<usize>,
    hi: Vec<usize>,
    offset: Vec<usize>,
    dist: Vec<f64>,
}

impl<'a> Grid<'a> {
    fn new(a: &'a StepPath, b: &'a StepPath, n: f64, width: f64) -> Self {
        let (na, nb) = (a.jumps_before(n), b.jumps_before(n));
        let s = &a.jump_times()[..na];
        let u = &b.jump_times()[..nb];
        let mut lo = Vec::with_capacity(na + 1);
        let mut hi = Vec::with_capacity(na + 1);
        let mut offset = Vec::with_capacity(na + 2);
        let mut dist = Vec::new();
        offset.push(0);
        for i in 0..=na {
            // state (i, j) requires a-jump i before b-jump j+1 and b-jump j
            // before a-jump i+1, each up to a time shift of `width`
            let jl = if i == 0 { 0 } else { u.partition_point(|&t| t < s[i - 1] - width) };
            let jh = if i == na { nb } else { u.partition_point(|&t| t <= s[i] + width) };
            let jh = jh.max(jl);
            for j in jl..=jh {
                dist.push(dist2(a.level(i), b.level(j)));
            }
            lo.push(jl);
            hi.push(jh);
            offset.push(dist.len());
        }
        Grid { s, u, n, lo, hi, offset, dist }
    }

    fn index(&self, i: usize, j: usize) -> Option<usize> {
        (j >= self.lo[i] && j <= self.hi[i]).then(|| self.offset[i] + j - self.lo[i])
    }

    fn gap(&self, j: usize) -> (f64, f64) {
        let left = if j == 0 { 0.0 } else { self.u[j - 1] };
        let right = if j == self.u.len() { self.n } else { self.u[j] };
        (left, right)
    }

    fn feasible(&self, eps: f64, reach: &mut [bool]) -> bool {
        let slack = 1e-12 * eps.max(1.0);
        let ev = eps + slack;
        let (na, nb) = (self.s.len(), self.u.len());
        for i in 0..=na {
            for j in self.lo[i]..=self.hi[i] {
                let k = self.offset[i] + j - self.lo[i];
                reach[k] = false;
                if self.dist[k] > ev {
                    continue;
                }
                if i == 0 && j == 0 {
                    reach[k] = true;
                    continue;
                }
                let from = |ii: usize, jj: usize| self.index(ii, jj).is_some_and(|x| reach[x]);
                if j > 0 && from(i, j - 1) {
                    reach[k] = true;
                    continue;
                }
                if i == 0 {
                    continue;
                }
                let si = self.s[i - 1];
                if from(i - 1, j) {
                    let (gl, gr) = self.gap(j);
                    if si - ev <= gr && si + ev >= gl {
                        reach[k] = true;
                        continue;
                    }
                }
                if j > 0 && from(i - 1, j - 1) && (si - self.u[j - 1]).abs() <= ev {
                    reach[k] = true;
                }
            }
        }
        self.index(na, nb).is_some_and(|x| reach[x])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force: enumerate every order-preserving placement of the jumps
    /// of `a` relative to those of `b`, build the piecewise-linear time change
    /// explicitly and evaluate both terms of the objective directly.
    fn oracle(a: &StepPath, b: &StepPath, n: f64) -> f64 {
        let s: Vec<f64> = a.jump_times().iter().copied().filter(|&t| t < n).collect();
        let u: Vec<f64> = b.jump_times().iter().copied().filter(|&t| t < n).collect();
        let (na, nb) = (s.len(), u.len());
        let mut best = f64::INFINITY;
        let mut codes = vec![0usize; na];
        let max_code = 2 * nb;
        let delta = 1e-9;
        loop {
            let ordered = (1..na).all(|i| {
                codes[i] > codes[i - 1] || (codes[i] == codes[i - 1] && codes[i] % 2 == 0)
            });
            if ordered {
                let mut t = vec![0.0; na];
                let mut ok = true;
                for i in 0..na {
                    let c = codes[i];
                    t[i] = if c % 2 == 1 {
                        u[c / 2]
                    } else {
                        let j = c / 2;
                        let gl = if j == 0 { 0.0 } else { u[j - 1] };
                        let gr = if j == nb { n } else { u[j] };
                        s[i].clamp(gl + (i + 1) as f64 * delta, gr - (na - i) as f64 * delta)
                    };
                    if i > 0 && t[i] <= t[i - 1] {
                        ok = false;
                    }
                    if c % 2 == 0 {
                        let j = c / 2;
                        let gr = if j == nb { n } else { u[j] };
                        ok &= t[i] < gr;
                    }
                    ok &= t[i] > 0.0 && t[i] < n;
                }
                if ok {
                    let time_term = (0..na).map(|i| (s[i] - t[i]).abs()).fold(0.0, f64::max);
                    let mut pts = vec![0.0];
                    pts.extend(&t);
                    pts.extend(&u);
                    let value_term = pts
                        .iter()
                        .map(|&x| {
                            let ka = t.iter().filter(|&&ti| ti <= x).count();
                            dist2(a.level(ka), b.value_at(x))
                        })
                        .fold(0.0, f64::max);
                    best = best.min(time_term.max(value_term));
                }
            }
            let mut i = na;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if codes[i] < max_code {
                    codes[i] += 1;
                    for c in codes.iter_mut().skip(i + 1) {
                        *c = 0;
                    }
                    break;
                }
            }
        }
    }

    fn ind(at: f64, h: f64) -> StepPath {
        StepPath::indicator(at, h, 2.0).unwrap()
    }

    #[test]
    fn shifted_indicator() {
        let (a, b) = (ind(1.0, 1.0), ind(1.1, 1.0));
        assert!((j1_distance(&a, &b, 2.0).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(sup_distance(&a, &b, 2.0).unwrap(), 1.0);
        assert!((oracle(&a, &b, 2.0) - 0.1).abs() < 1e-6);
    }

    #[test]
    fn height_mismatch_is_not_repaired() {
        let (a, b) = (ind(1.0, 1.0), ind(1.0, 0.5));
        assert_eq!(j1_distance(&a, &b, 2.0).unwrap(), 0.5);
        assert!((oracle(&a, &b, 2.0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn constants() {
        let a = StepPath::scalar(3.0, &[], 1.0).unwrap();
        let b = StepPath::scalar(1.0, &[], 1.0).unwrap();
        assert_eq!(sup_distance(&a, &b, 1.0).unwrap(), 2.0);
        assert_eq!(j1_distance(&a, &b, 1.0).unwrap(), 2.0);
        assert_eq!(j1_distance(&a, &a, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn jump_beyond_window_is_ignored() {
        let a = StepPath::scalar(0.0, &[(0.5, 1.0), (1.5, 5.0)], 2.0).unwrap();
        let b = StepPath::scalar(0.0, &[(0.6, 1.0)], 1.0).unwrap();
        assert!((j1_distance(&a, &b, 1.0).unwrap() - 0.1).abs() < 1e-12);
        assert!(j1_distance(&a, &b, 1.5).is_err());
    }

    #[test]
    fn errors() {
        let a = StepPath::scalar(0.0, &[], 1.0).unwrap();
        let b = StepPath::new(vec![0.0, 0.0], vec![], 1.0).unwrap();
        assert!(matches!(j1_distance(&a, &b, 1.0), Err(Error::Dimension { .. })));
        assert!(matches!(sup_distance(&a, &a, 2.0), Err(Error::Window { .. })));
    }

    fn arb_path(max_jumps: usize, dim: usize) -> impl Strategy<Value = StepPath> {
        (
            prop::collection::vec(-2.0f64..2.0, dim),
            prop::collection::vec((0.01f64..0.99, prop::collection::vec(-2.0f64..2.0, dim)), 0..=max_jumps),
        )
            .prop_map(|(init, mut jumps)| {
                jumps.sort_by(|x, y| x.0.total_cmp(&y.0));
                jumps.dedup_by(|x, y| (x.0 - y.0).abs() < 1e-6);
                // coarse values make ties (and hence exact matches) common
                for (_, v) in jumps.iter_mut() {
                    for x in v.iter_mut() {
                        *x = (*x * 4.0).round() / 4.0;
                    }
                }
                StepPath::new(init, jumps, 1.0).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn metric_axioms(a in arb_path(6, 2), b in arb_path(6, 2), c in arb_path(6, 2)) {
            let ab = j1_distance(&a, &b, 1.0).unwrap();
            let ba = j1_distance(&b, &a, 1.0).unwrap();
            let bc = j1_distance(&b, &c, 1.0).unwrap();
            let ac = j1_distance(&a, &c, 1.0).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-9);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!(ab <= sup_distance(&a, &b, 1.0).unwrap() + 1e-12);
            prop_assert_eq!(j1_distance(&a, &a, 1.0).unwrap(), 0.0);
            if ab == 0.0 {
                prop_assert_eq!(sup_distance(&a, &b, 1.0).unwrap(), 0.0);
            }
        }

        #[test]
        fn matches_brute_force(a in arb_path(4, 1), b in arb_path(4, 1)) {
            let exact = j1_distance(&a, &b, 1.0).unwrap();
            let brute = oracle(&a, &b, 1.0);
            prop_assert!((exact - brute).abs() <= 1e-3, "dp {} oracle {}", exact, brute);
        }
    }
}
