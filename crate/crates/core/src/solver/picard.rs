//! Picard iteration for the discrete BSDE.

use super::gkw::gkw_decompose;
use super::norms::star_norm;
use super::{backward_project, AdaptedProcess, Components, Convention, PicardSolution};
use crate::constants::{picard_tail_bound, ContractionCertificate};
use crate::drivers::StandardData;
use crate::error::{Error, Result};

/// Generator value on the step `v → c`, reading the iterate `s`.
pub(crate) fn step_generator(data: &StandardData, s: &Components, conv: Convention, v: usize, c: usize, out: &mut [f64]) {
    let ctx = data.context(v);
    let y = match conv {
        Convention::YLeft => s.y(v),
        Convention::YRight => s.y(c),
    };
    data.generator().evaluate_into(&ctx, y, s.z(v), s.u(v), out);
}

/// `L_t = Σ_{t_j ≤ t} f(t_j, Y_{t_{j−1}}, Z_{t_j}, U_{t_j}) ΔC_j` along every
/// scenario (or `Y_{t_j}` under [`Convention::YRight`]).
pub fn lebesgue_integral_l(data: &StandardData, s: &Components, conv: Convention) -> Result<AdaptedProcess> {
    let tree = data.tree();
    let l = data.dim_y();
    let mut out = AdaptedProcess::zeros(l, tree.node_count());
    let mut f = vec![0.0; l];
    for v in 0..tree.node_count() {
        if tree.is_leaf(v) {
            continue;
        }
        let dc = data.dc(tree.level_of(v));
        for c in tree.children(v) {
            step_generator(data, s, conv, v, c, &mut f);
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::Node { node: v, reason: "generator returned a non-finite value".into() });
            }
            for a in 0..l {
                out.at_mut(c)[a] = out.at(v)[a] + f[a] * dc;
            }
        }
    }
    Ok(out)
}

/// `S^{(p)} ↦ S^{(p+1)}`: `M = E[ξ + L_T | ·]`, `Y = M − L`, then `(Z, U, N)`
/// from the decomposition of `M`.
pub fn picard_step(data: &StandardData, prev: &Components, conv: Convention, p: usize) -> Result<PicardSolution> {
    let tree = data.tree();
    let l = data.dim_y();
    let big_l = lebesgue_integral_l(data, prev, conv)?;
    let leaves = tree.leaves();
    let terminal: Vec<f64> =
        leaves.clone().flat_map(|v| data.xi(v).iter().zip(big_l.at(v)).map(|(x, a)| x + a).collect::<Vec<_>>()).collect();
    let m = backward_project(tree, l, &terminal)?;
    let dec = gkw_decompose(&m, data)?;
    let mut y: Vec<f64> = m.values().iter().zip(big_l.values()).map(|(a, b)| a - b).collect();
    for v in leaves {
        y[v * l..(v + 1) * l].copy_from_slice(data.xi(v));
    }
    let parts = Components {
        dim_y: l,
        dim_x: data.dim_x(),
        n_marks: data.n_marks(),
        y,
        z: dec.z,
        u: dec.u,
        dn: dec.dn,
    };
    Ok(PicardSolution { parts, l: big_l, m, p, residual: dec.residual })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Weight exponent of the ⋆-norm; replaced by `β̂` of the certificate
    /// when one is given.
    pub beta: f64,
    /// Stop once `‖S^{(p+1)} − S^{(p)}‖⋆ ≤ tol · ‖S^{(1)}‖⋆` (unsquared norms).
    pub tol: f64,
    pub max_p: usize,
    pub convention: Convention,
    /// Keep every iterate and report distances to the last one.
    pub keep_history: bool,
    pub certificate: Option<ContractionCertificate>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { beta: 0.0, tol: 1e-13, max_p: 200, convention: Convention::YLeft, keep_history: false, certificate: None }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: PicardSolution,
    /// `gaps[p] = ‖S^{(p+1)} − S^{(p)}‖²⋆`, so `gaps[0] = ‖S^{(1)}‖²⋆`.
    pub gaps: Vec<f64>,
    /// `envelope[p − 1] = 4^{1−p} ‖S^{(1)}‖²⋆` for `p = 1, 2, …`.
    pub envelope: Vec<f64>,
    pub beta: f64,
    pub converged: bool,
    /// Certificate present, passing, and issued for a `Φ` at least the data's.
    pub certified: bool,
    /// `S^{(0)}, …, S^{(P)}` when history is kept.
    pub history: Vec<Components>,
    /// `‖S^{(P)} − S^{(p)}‖²⋆` for `p = 0..=P` when history is kept.
    pub distances: Vec<f64>,
    /// Every measured quantity lies under the envelope: distances when the
    /// history is kept, otherwise the successive gaps.
    pub within_envelope: bool,
}

impl SolveOutcome {
    pub fn first_norm_sq(&self) -> f64 {
        self.gaps.first().copied().unwrap_or(0.0)
    }

    /// Largest `gaps[p] / gaps[p − 1]` over `p ≥ 2` (with `0/0 = 0`).
    pub fn max_gap_ratio(&self) -> f64 {
        self.gaps
            .windows(2)
            .skip(1)
            .map(|w| if w[1] == 0.0 { 0.0 } else { w[1] / w[0] })
            .fold(0.0, f64::max)
    }
}

/// Iterates [`picard_step`] from `S^{(0)} = 0`. Reaching `max_p` without
/// meeting the tolerance is reported through `converged`, keeping the last
/// iterate.
pub fn solve(data: &StandardData, opts: &SolveOptions) -> Result<SolveOutcome> {
    let beta = opts.certificate.map_or(opts.beta, |c| c.beta_hat);
    let certified = opts.certificate.is_some_and(|c| c.passes_quarter && data.chars().phi() <= c.phi * (1.0 + 1e-12) + 1e-300);
    let mut prev = Components::zeros(data);
    let mut history = Vec::new();
    if opts.keep_history {
        history.push(prev.clone());
    }
    let mut gaps = Vec::new();
    let mut converged = false;
    let mut last = None;
    for p in 1..=opts.max_p.max(1) {
        let sol = picard_step(data, &prev, opts.convention, p)?;
        let gap = star_norm(&sol.parts.diff(&prev), data, beta).total;
        if !gap.is_finite() {
            return Err(Error::Diverged { iterations: p });
        }
        gaps.push(gap);
        prev = sol.parts.clone();
        if opts.keep_history {
            history.push(prev.clone());
        }
        let first = gaps[0];
        last = Some(sol);
        if first == 0.0 || gap <= opts.tol * opts.tol * first {
            converged = true;
            break;
        }
    }
    let solution = last.expect("at least one step");
    let first = gaps[0];
    let envelope: Vec<f64> =
        (1..=gaps.len()).map(|p| picard_tail_bound(first, p as u32).expect("valid inputs")).collect();
    let distances: Vec<f64> =
        history.iter().map(|s| star_norm(&solution.parts.diff(s), data, beta).total).collect();
    let slack = |bound: f64| bound * (1.0 + 1e-9) + 1e-300;
    let within_envelope = if opts.keep_history {
        distances.iter().enumerate().skip(1).all(|(p, &d)| d <= slack(envelope[p - 1]))
    } else {
        gaps.iter().enumerate().skip(1).all(|(p, &g)| g <= slack(envelope[p - 1]))
    };
    Ok(SolveOutcome { solution, gaps, envelope, beta, converged, certified, history, distances, within_envelope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{build_deterministic_data, build_random_walk_data, Generator, Payoff, RandomWalkSpec, Terminal};

    fn det(n: usize, g: Generator) -> StandardData {
        build_deterministic_data(n, 1.0, g, vec![1.0]).unwrap()
    }

    #[test]
    fn lebesgue_integral_examples() {
        let d = build_deterministic_data(4, 1.0, Generator::Constant { value: 1.0 }, vec![0.0]).unwrap();
        let l = lebesgue_integral_l(&d, &Components::zeros(&d), Convention::YLeft).unwrap();
        assert!((l.at(4)[0] - 1.0).abs() < 1e-15);
        let d = det(2, Generator::LinearY { lambda: 0.5 });
        let mut s = Components::zeros(&d);
        s.y.fill(1.0);
        let l = lebesgue_integral_l(&d, &s, Convention::YLeft).unwrap();
        assert_eq!(l.at(2)[0], 0.5);
        let d = det(3, Generator::Zero);
        assert!(lebesgue_integral_l(&d, &s, Convention::YLeft).unwrap().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hand_picard_steps() {
        let d = det(2, Generator::LinearY { lambda: 0.5 });
        let s1 = picard_step(&d, &Components::zeros(&d), Convention::YLeft, 1).unwrap();
        assert_eq!(s1.parts.y, vec![1.0, 1.0, 1.0]);
        let s2 = picard_step(&d, &s1.parts, Convention::YLeft, 2).unwrap();
        assert_eq!(s2.parts.y[0], 1.5);
        assert_eq!(s2.parts.y[1], 1.25);
    }

    #[test]
    fn deterministic_fixed_point() {
        let d = det(2, Generator::LinearY { lambda: 0.5 });
        let out = solve(&d, &SolveOptions { max_p: 60, ..Default::default() }).unwrap();
        assert!(out.converged);
        assert!((out.solution.parts.y[0] - 16.0 / 9.0).abs() < 1e-10);
        assert!((out.solution.parts.y[1] - 4.0 / 3.0).abs() < 1e-10);
        let right = solve(&d, &SolveOptions { convention: Convention::YRight, ..Default::default() }).unwrap();
        assert!((right.solution.parts.y[0] - 1.5625).abs() < 1e-12);
    }

    #[test]
    fn zero_generator_converges_in_one_step() {
        let d = build_random_walk_data(&RandomWalkSpec {
            k: 3,
            horizon: 1.0,
            lambda: 0.0,
            marks: vec![],
            generator: Generator::Zero,
            terminal: Terminal::continuous(Payoff::Square),
        })
        .unwrap();
        let out = solve(&d, &SolveOptions::default()).unwrap();
        assert_eq!(out.gaps.len(), 2);
        assert_eq!(out.gaps[1], 0.0);
        let y = out.solution.parts.y_process();
        let want = backward_project(d.tree(), 1, &d.tree().leaves().map(|v| d.xi(v)[0]).collect::<Vec<_>>()).unwrap();
        assert_eq!(y, want);
    }

    #[test]
    fn odd_terminal_has_zero_start() {
        let d = build_random_walk_data(&RandomWalkSpec {
            k: 4,
            horizon: 1.0,
            lambda: 0.0,
            marks: vec![],
            generator: Generator::LinearY { lambda: 0.5 },
            terminal: Terminal::continuous(Payoff::Identity),
        })
        .unwrap();
        let out = solve(&d, &SolveOptions::default()).unwrap();
        assert!(out.converged);
        let parts = &out.solution.parts;
        assert!(parts.y[0].abs() < 1e-15);
        // Y_i = X_i (1 − λΔ)^{i−k}
        let want = (1.0f64 / (1.0 - 0.125)).powi(3);
        assert!((parts.z[0] - want).abs() < 1e-12, "{} vs {want}", parts.z[0]);
        assert!(out.solution.residual.max() < 1e-12);
    }
}
