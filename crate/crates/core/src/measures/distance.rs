use super::{integral::integrate, FiniteMeasure};
use crate::error::{invalid, Result};
use crate::paths::{j1_distance, Integrand, PiecewiseLinear};
use serde::Serialize;

fn merged_points(mu: &FiniteMeasure, nu: &FiniteMeasure) -> Vec<f64> {
    let mut pts = mu.breakpoints();
    pts.extend(nu.breakpoints());
    pts.push(0.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Values of `G = F_μ − F_ν` and its left limits at every breakpoint up to
/// `n`, plus `G(n)`; `G` is affine between these points.
fn gap_values(mu: &FiniteMeasure, nu: &FiniteMeasure, n: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut pts = merged_points(mu, nu);
    pts.retain(|&t| t <= n);
    if n.is_finite() {
        pts.push(n);
    }
    for t in pts {
        out.push(mu.cdf(t) - nu.cdf(t));
        out.push(mu.cdf_left(t) - nu.cdf_left(t));
    }
    out
}

/// `sup_{t ∈ [0, ∞]} |F_μ(t) − F_ν(t)|`, including the point at infinity.
pub fn ks_distance(mu: &FiniteMeasure, nu: &FiniteMeasure) -> f64 {
    let tail = (mu.total_mass() - nu.total_mass()).abs();
    gap_values(mu, nu, f64::INFINITY).into_iter().map(f64::abs).fold(tail, f64::max)
}

/// `sup_{t ∈ [0, n]} |F_μ(t) − F_ν(t)|`.
pub fn ks_distance_on(mu: &FiniteMeasure, nu: &FiniteMeasure, n: f64) -> f64 {
    let mut pts = merged_points(mu, nu);
    pts.retain(|&t| t <= n);
    pts.push(n);
    let mut d: f64 = 0.0;
    for (i, &t) in pts.iter().enumerate() {
        d = d.max((mu.cdf(t) - nu.cdf(t)).abs());
        if i > 0 {
            d = d.max((mu.cdf_left(t) - nu.cdf_left(t)).abs());
        }
    }
    d
}

/// `sup_I |μ(I) − ν(I)|` over all subintervals `I ⊆ [0, n]`.
///
/// Every such difference is `G(b*) − G(a*)` with one-sided values of `G` at
/// the endpoints (and `G(0−) = 0`), so the supremum is the spread of those
/// values.
pub fn interval_sup_distance(mu: &FiniteMeasure, nu: &FiniteMeasure, n: f64) -> f64 {
    let vals = gap_values(mu, nu, n);
    let hi = vals.iter().copied().fold(0.0, f64::max);
    let lo = vals.iter().copied().fold(0.0, f64::min);
    hi - lo
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakConvergenceConfig {
    /// Window `N` for the local criteria.
    pub window: f64,
    /// Window `N_ε` outside of which mass counts against tightness.
    pub tightness_window: f64,
    pub tol: f64,
    /// Stair height used to turn continuous distribution functions into step
    /// paths for the J1 criterion.
    pub stair: f64,
}

impl WeakConvergenceConfig {
    pub fn new(window: f64, tol: f64) -> Self {
        WeakConvergenceConfig { window, tightness_window: window, tol, stair: (tol / 16.0).max(1e-4) }
    }
}

/// Per-index values of one criterion and the last index at which it exceeds
/// the tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionTrack {
    pub name: String,
    pub values: Vec<f64>,
    pub last_violation: Option<usize>,
}

impl CriterionTrack {
    fn new(name: &str, values: Vec<f64>, tol: f64) -> Self {
        let last_violation = values.iter().rposition(|&v| v > tol * (1.0 + 1e-9));
        CriterionTrack { name: name.into(), values, last_violation }
    }

    /// First index from which the criterion stays within tolerance.
    pub fn settles_at(&self) -> usize {
        self.last_violation.map_or(0, |i| i + 1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakConvergenceReport {
    pub atomless_limit: bool,
    /// (a) integral gap over the test functions `1` and `x ∧ N`.
    pub integrals: CriterionTrack,
    /// (b) distribution functions on a grid of breakpoints and midpoints.
    pub pointwise: CriterionTrack,
    /// (c) J1 distance of distribution functions on `[0, N]`.
    pub j1: CriterionTrack,
    /// (d) uniform distance on `[0, N]`.
    pub uniform: CriterionTrack,
    /// (e) interval supremum on `[0, N]`.
    pub interval: CriterionTrack,
    pub max_mass: f64,
    /// `sup_{j ≥ k} μ^j((N_ε, ∞))` for each `k`.
    pub tightness: CriterionTrack,
}

impl WeakConvergenceReport {
    pub fn criteria(&self) -> [&CriterionTrack; 5] {
        [&self.integrals, &self.pointwise, &self.j1, &self.uniform, &self.interval]
    }
}

/// Evaluates the equivalent characterisations of weak convergence along a
/// finite sequence. With an atomic limit only the criteria that stay
/// meaningful are evaluated; the J1 track is then left empty.
pub fn weak_convergence_report(
    seq: &[FiniteMeasure],
    limit: &FiniteMeasure,
    cfg: &WeakConvergenceConfig,
) -> Result<WeakConvergenceReport> {
    if seq.is_empty() {
        return invalid("empty measure sequence");
    }
    if !(cfg.window > 0.0 && cfg.tol > 0.0 && cfg.stair > 0.0) {
        return invalid("window, tolerance and stair height must be positive");
    }
    let n = cfg.window;
    let atomless = limit.is_atomless();

    let ramp = PiecewiseLinear::ramp(n)?;
    let one = PiecewiseLinear::new(vec![(0.0, vec![1.0])])?;
    let tests: [&dyn Integrand; 2] = [&one, &ramp];
    let integrals = seq
        .iter()
        .map(|mu| {
            tests
                .iter()
                .map(|a| {
                    let x = integrate(*a, mu, f64::INFINITY)[0];
                    let y = integrate(*a, limit, f64::INFINITY)[0];
                    (x - y).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();

    let mut grid: Vec<f64> = seq.iter().flat_map(|m| m.breakpoints()).collect();
    grid.extend(limit.breakpoints());
    grid.push(0.0);
    grid.push(n);
    grid.retain(|&t| t <= n);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mids: Vec<f64> = grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    grid.extend(mids);
    let pointwise = seq
        .iter()
        .map(|mu| {
            grid.iter()
                .map(|&t| {
                    let right = (mu.cdf(t) - limit.cdf(t)).abs();
                    let left = if t > 0.0 { (mu.cdf_left(t) - limit.cdf_left(t)).abs() } else { 0.0 };
                    right.max(left)
                })
                .fold(0.0, f64::max)
        })
        .collect();

    let j1 = if atomless {
        let lim_path = limit.distribution_path(n, cfg.stair)?;
        seq.iter()
            .map(|mu| {
                let p = mu.distribution_path(n, cfg.stair)?;
                j1_distance(&p, &lim_path, n)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let uniform = seq.iter().map(|mu| ks_distance_on(mu, limit, n)).collect();
    let interval = seq.iter().map(|mu| interval_sup_distance(mu, limit, n)).collect();
    let max_mass = seq.iter().map(FiniteMeasure::total_mass).fold(limit.total_mass(), f64::max);
    let outside: Vec<f64> = seq.iter().map(|mu| mu.mass_beyond(cfg.tightness_window)).collect();
    let tight = (0..outside.len()).map(|k| outside[k..].iter().copied().fold(0.0, f64::max)).collect();

    let tol = cfg.tol;
    Ok(WeakConvergenceReport {
        atomless_limit: atomless,
        integrals: CriterionTrack::new("integrals", integrals, tol),
        pointwise: CriterionTrack::new("pointwise", pointwise, tol),
        j1: CriterionTrack::new("j1", j1, tol),
        uniform: CriterionTrack::new("uniform", uniform, tol),
        interval: CriterionTrack::new("interval", interval, tol),
        max_mass,
        tightness: CriterionTrack::new("tightness", tight, tol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform(k: usize) -> FiniteMeasure {
        FiniteMeasure::uniform_atoms(k).unwrap()
    }

    fn leb() -> FiniteMeasure {
        FiniteMeasure::lebesgue(0.0, 1.0).unwrap()
    }

    /// Enumerates intervals with endpoints on a fine mesh plus all
    /// breakpoints, with every inclusion type, and measures them directly.
    fn interval_oracle(mu: &FiniteMeasure, nu: &FiniteMeasure, n: f64) -> f64 {
        let mut pts: Vec<f64> = (0..=200).map(|i| n * i as f64 / 200.0).collect();
        pts.extend(mu.breakpoints().into_iter().filter(|&t| t <= n));
        pts.extend(nu.breakpoints().into_iter().filter(|&t| t <= n));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let measure = |m: &FiniteMeasure, a: f64, b: f64, closed_a: bool, closed_b: bool| {
            let right = if closed_b { m.cdf(b) } else { m.cdf_left(b) };
            let left = if closed_a { m.cdf_left(a) } else { m.cdf(a) };
            (right - left).max(0.0)
        };
        let mut best: f64 = 0.0;
        for (i, &a) in pts.iter().enumerate() {
            for &b in &pts[i..] {
                for (ca, cb) in [(true, true), (true, false), (false, true), (false, false)] {
                    if a == b && !(ca && cb) {
                        continue;
                    }
                    let d = measure(mu, a, b, ca, cb) - measure(nu, a, b, ca, cb);
                    best = best.max(d.abs());
                }
            }
        }
        best
    }

    #[test]
    fn uniform_atoms_against_lebesgue() {
        let d = ks_distance(&uniform(10), &leb());
        assert!((d - 0.1).abs() < 1e-15);
        let d = interval_sup_distance(&uniform(10), &leb(), 1.0);
        assert!((d - 0.1).abs() < 1e-15);
        assert!((interval_oracle(&uniform(10), &leb(), 1.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn escaping_mass_is_seen_at_infinity() {
        let m = FiniteMeasure::atom(5.0, 1.0).unwrap();
        assert_eq!(ks_distance(&m, &FiniteMeasure::zero()), 1.0);
        assert_eq!(ks_distance_on(&m, &FiniteMeasure::zero(), 4.0), 0.0);
        assert_eq!(ks_distance(&m, &m), 0.0);
    }

    #[test]
    fn atoms_of_different_mass() {
        let a = FiniteMeasure::atom(1.0, 0.3).unwrap();
        let b = FiniteMeasure::atom(1.0, 0.5).unwrap();
        assert!((interval_sup_distance(&a, &b, 2.0) - 0.2).abs() < 1e-15);
        assert_eq!(interval_sup_distance(&a, &a, 2.0), 0.0);
    }

    #[test]
    fn report_on_repeated_limit() {
        let seq = vec![leb(); 4];
        let r = weak_convergence_report(&seq, &leb(), &WeakConvergenceConfig::new(1.0, 1e-6)).unwrap();
        for c in r.criteria() {
            assert_eq!(c.last_violation, None, "{}", c.name);
        }
    }

    #[test]
    fn report_on_uniform_atoms() {
        let ks = [5, 10, 15, 20, 40, 80];
        let seq: Vec<_> = ks.iter().map(|&k| uniform(k)).collect();
        let r = weak_convergence_report(&seq, &leb(), &WeakConvergenceConfig::new(1.0, 0.05)).unwrap();
        for c in [&r.pointwise, &r.uniform, &r.interval] {
            assert_eq!(ks[c.settles_at()], 20, "{}", c.name);
        }
        assert!(ks[r.j1.settles_at()] <= 20);
        assert!(ks[r.integrals.settles_at()] <= 20);
        assert_eq!(r.tightness.last_violation, None);
    }

    #[test]
    fn report_on_escaping_mass() {
        let seq: Vec<_> = (1..6).map(|k| FiniteMeasure::atom(k as f64 + 1.0, 1.0).unwrap()).collect();
        let cfg = WeakConvergenceConfig { window: 1.0, tightness_window: 1.0, tol: 0.1, stair: 0.01 };
        let r = weak_convergence_report(&seq, &FiniteMeasure::zero(), &cfg).unwrap();
        assert_eq!(r.tightness.last_violation, Some(4));
        assert!(r.tightness.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn atomic_limit_is_flagged() {
        let lim = FiniteMeasure::atom(0.5, 1.0).unwrap();
        let r = weak_convergence_report(&[lim.clone()], &lim, &WeakConvergenceConfig::new(1.0, 0.1)).unwrap();
        assert!(!r.atomless_limit);
        assert!(r.j1.values.is_empty());
    }

    fn arb_measure(atoms: bool) -> impl Strategy<Value = FiniteMeasure> {
        let atom_count = if atoms { 0..4usize } else { 0..1usize };
        (
            prop::collection::vec((0.05f64..0.95, 0.01f64..0.5), atom_count),
            prop::collection::vec((0.01f64..0.3, 0.0f64..1.0), 1..5),
        )
            .prop_map(|(atoms, segs)| {
                let mut pl = vec![(0.0, 0.0)];
                let (mut t, mut f) = (0.0, 0.0);
                for (dt, slope) in segs {
                    t += dt;
                    f += slope * dt;
                    pl.push((t, f));
                }
                FiniteMeasure::new(atoms, pl).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sandwich(mu in arb_measure(true), nu in arb_measure(true)) {
            let n = 1.0;
            let ks = ks_distance_on(&mu, &nu, n);
            let iv = interval_sup_distance(&mu, &nu, n);
            let jump = mu.max_atom().max(nu.max_atom());
            prop_assert!(ks <= iv + 1e-12);
            prop_assert!(iv <= 6.0 * ks + 3.0 * jump + 1e-12);
            prop_assert!((iv - interval_oracle(&mu, &nu, n)).abs() < 1e-12);
        }

        #[test]
        fn j1_and_mass_control_ks(mu in arb_measure(true), nu in arb_measure(false)) {
            // slopes are below 1, so the limit's modulus of continuity is
            // ω(δ) ≤ δ and the J1 distance δ forces ks ≤ 2δ up to staircases
            let n = 2.0;
            let stair = 1e-3;
            let a = mu.distribution_path(n, stair).unwrap();
            let b = nu.distribution_path(n, stair).unwrap();
            let j1 = j1_distance(&a, &b, n).unwrap();
            let mass = (mu.total_mass() - nu.total_mass()).abs();
            let delta = j1.max(mass);
            let ks = ks_distance(&mu, &nu);
            prop_assert!(ks <= 2.0 * delta + 3.0 * stair + 1e-12);
            prop_assert!(ks < 6.0 * delta + 3.0 * stair);
        }
    }
}
