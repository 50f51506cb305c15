//! Finite measures on the half-line via their distribution functions.

mod distance;
mod integral;

pub use distance::{
    interval_sup_distance, ks_distance, ks_distance_on, weak_convergence_report, CriterionTrack,
    WeakConvergenceConfig, WeakConvergenceReport,
};
pub use integral::{
    discretize_sparse, doubly_indexed_gap, integrate, integrate_before, running_integral,
    uniform_weak_gap, DoublyIndexedReport, GapCertificate, GapTerms,
};

use crate::error::{invalid, Error, Result};
use crate::paths::{fmt17, parse_num, StepPath};

/// Atomic part plus an absolutely continuous part whose distribution
/// function is piecewise linear.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasure {
    atoms: Vec<(f64, f64)>,
    // breakpoints (t, F_c(t)) of the continuous part, starting at (0, 0)
    plinear: Vec<(f64, f64)>,
}

impl FiniteMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, plinear: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|&(t, _)| t == 0.0) {
            return invalid("atoms at 0 are not allowed");
        }
        Self::build(atoms, plinear)
    }

    /// Like [`FiniteMeasure::new`] but admits an atom at 0, as produced by
    /// discretisation onto a partition's left knots.
    pub(crate) fn build(mut atoms: Vec<(f64, f64)>, plinear: Vec<(f64, f64)>) -> Result<Self> {
        for &(t, m) in &atoms {
            if !(t >= 0.0 && t.is_finite()) {
                return invalid(format!("atom location {t} must be finite and nonnegative"));
            }
            if !(m > 0.0 && m.is_finite()) {
                return invalid(format!("atom mass {m} must be positive and finite"));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (t, m) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == t => last.1 += m,
                _ => merged.push((t, m)),
            }
        }
        if let Some(&(t0, f0)) = plinear.first() {
            if t0 != 0.0 || f0 != 0.0 {
                return invalid("continuous part must start at (0, 0)");
            }
            for w in plinear.windows(2) {
                if !(w[1].0 > w[0].0) || !w[1].0.is_finite() {
                    return invalid("continuous breakpoints must be strictly increasing");
                }
                if !(w[1].1 >= w[0].1) || !w[1].1.is_finite() {
                    return invalid("continuous distribution function must be nondecreasing");
                }
            }
        }
        let plinear = if plinear.len() < 2 || plinear.last().unwrap().1 == 0.0 {
            Vec::new()
        } else {
            plinear
        };
        Ok(FiniteMeasure { atoms: merged, plinear })
    }

    pub fn zero() -> Self {
        FiniteMeasure { atoms: Vec::new(), plinear: Vec::new() }
    }

    pub fn atomic(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(atoms, Vec::new())
    }

    pub fn atom(t: f64, m: f64) -> Result<Self> {
        Self::atomic(vec![(t, m)])
    }

    /// Lebesgue measure restricted to `[a, b]`.
    pub fn lebesgue(a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a < b && b.is_finite()) {
            return invalid(format!("need 0 <= a < b < inf, got [{a}, {b}]"));
        }
        let mut pl = vec![(0.0, 0.0)];
        if a > 0.0 {
            pl.push((a, 0.0));
        }
        pl.push((b, b - a));
        Self::new(Vec::new(), pl)
    }

    /// Mass `1/k` at each of `1/k, 2/k, …, 1`.
    pub fn uniform_atoms(k: usize) -> Result<Self> {
        if k == 0 {
            return invalid("need at least one atom");
        }
        Self::atomic((1..=k).map(|j| (j as f64 / k as f64, 1.0 / k as f64)).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn plinear(&self) -> &[(f64, f64)] {
        &self.plinear
    }

    pub fn is_atomless(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).fold(0.0, f64::max)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.plinear.last().map_or(0.0, |p| p.1)
    }

    pub(crate) fn continuous_cdf(&self, t: f64) -> f64 {
        let pl = &self.plinear;
        if pl.is_empty() || t <= 0.0 {
            return 0.0;
        }
        let i = pl.partition_point(|p| p.0 <= t);
        if i == pl.len() {
            return pl[i - 1].1;
        }
        let (a, b) = (pl[i - 1], pl[i]);
        a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
    }

    /// `F(t) = μ([0, t])`; `t = ∞` gives the total mass.
    pub fn cdf(&self, t: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.0 <= t);
        self.atoms[..k].iter().map(|a| a.1).sum::<f64>() + self.continuous_cdf(t)
    }

    /// `F(t−) = μ([0, t))`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.0 < t);
        self.atoms[..k].iter().map(|a| a.1).sum::<f64>() + self.continuous_cdf(t)
    }

    /// `μ([t, ∞))`.
    pub fn mass_from(&self, t: f64) -> f64 {
        self.total_mass() - self.cdf_left(t)
    }

    /// `μ((t, ∞))`.
    pub fn mass_beyond(&self, t: f64) -> f64 {
        self.total_mass() - self.cdf(t)
    }

    /// All atoms and continuous breakpoints, sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.atoms.iter().map(|a| a.0).collect();
        v.extend(self.plinear.iter().map(|p| p.0));
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// The distribution function on `[0, n]` as a step path. Continuous
    /// stretches become staircases with increments at most `max_increment`,
    /// sitting below `F` and agreeing with it at every stair.
    pub fn distribution_path(&self, n: f64, max_increment: f64) -> Result<StepPath> {
        if !(max_increment > 0.0) {
            return invalid("staircase increment must be positive");
        }
        let mut times = self.breakpoints();
        for w in self.plinear.windows(2) {
            let (a, b) = (w[0], w[1].0.min(n));
            if b <= a.0 {
                continue;
            }
            let rise = self.continuous_cdf(b) - a.1;
            let pieces = (rise / max_increment).ceil() as usize;
            for i in 1..pieces {
                times.push(a.0 + (b - a.0) * i as f64 / pieces as f64);
            }
        }
        times.retain(|&t| t > 0.0 && t < n);
        times.sort_by(f64::total_cmp);
        times.dedup();
        let jumps = times.into_iter().map(|t| (t, vec![self.cdf(t)])).collect();
        StepPath::new(vec![self.cdf(0.0)], jumps, n)
    }

    /// Text form: an `atoms:` line and a `plinear:` line of `(t,m)` pairs.
    pub fn to_text(&self) -> String {
        let pairs = |v: &[(f64, f64)]| {
            v.iter().map(|(a, b)| format!("({},{})", fmt17(*a), fmt17(*b))).collect::<Vec<_>>().join(" ")
        };
        format!("atoms: {}\nplinear: {}\n", pairs(&self.atoms), pairs(&self.plinear))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut atoms = None;
        let mut plinear = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, rest) =
                line.split_once(':').ok_or_else(|| Error::Parse(format!("bad measure line `{line}`")))?;
            let pairs = parse_pairs(rest)?;
            match key.trim() {
                "atoms" => atoms = Some(pairs),
                "plinear" => plinear = Some(pairs),
                other => return Err(Error::Parse(format!("unknown measure field `{other}`"))),
            }
        }
        Self::build(atoms.unwrap_or_default(), plinear.unwrap_or_default())
    }
}

fn parse_pairs(s: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for tok in s.split_whitespace() {
        let inner = tok
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("expected `(t,m)`, got `{tok}`")))?;
        let (a, b) = inner.split_once(',').ok_or_else(|| Error::Parse(format!("bad pair `{tok}`")))?;
        out.push((parse_num(a.trim())?, parse_num(b.trim())?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_and_left_limits() {
        let m = FiniteMeasure::new(vec![(0.5, 0.25)], vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(m.cdf(0.5), 0.75);
        assert_eq!(m.cdf_left(0.5), 0.5);
        assert_eq!(m.cdf(f64::INFINITY), 1.25);
        assert_eq!(m.total_mass(), 1.25);
        assert_eq!(m.mass_from(0.5), 0.75);
        assert_eq!(m.mass_beyond(0.5), 0.5);
    }

    #[test]
    fn rejects_atom_at_zero_and_bad_parts() {
        assert!(FiniteMeasure::atom(0.0, 1.0).is_err());
        assert!(FiniteMeasure::atom(1.0, -1.0).is_err());
        assert!(FiniteMeasure::new(vec![], vec![(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)]).is_err());
        assert!(FiniteMeasure::new(vec![], vec![(0.5, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = FiniteMeasure::new(
            vec![(1.0 / 3.0, 0.1), (2.0, 0.7)],
            vec![(0.0, 0.0), (0.3, 0.2), (1.7, 1.0 / 7.0 + 0.2)],
        )
        .unwrap();
        assert_eq!(FiniteMeasure::from_text(&m.to_text()).unwrap(), m);
        assert_eq!(FiniteMeasure::from_text(&FiniteMeasure::zero().to_text()).unwrap(), FiniteMeasure::zero());
    }

    #[test]
    fn staircase_of_lebesgue() {
        let m = FiniteMeasure::lebesgue(0.0, 1.0).unwrap();
        let p = m.distribution_path(2.0, 0.1).unwrap();
        assert_eq!(p.jump_count(), 10);
        assert!((p.value_at(0.55)[0] - 0.5).abs() < 1e-12);
        assert_eq!(p.value_at(1.5)[0], 1.0);
    }
}
