//! Weighted ⋆-norms and Γ-functionals, computed exactly on the tree.

use super::picard::step_generator;
use super::{Components, Convention};
use crate::drivers::{tnorm_sq, StandardData};
use crate::error::{Error, Result};
use serde::Serialize;

/// Parts of `‖(Y, Z, U, N)‖²⋆,β`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NormRecord {
    /// `E[sup_t e^{βA_t} ‖Y_t‖²]`.
    pub y_sup: f64,
    /// `E[∫ e^{βA} α² ‖Y‖² dC]`, the non-sup variant.
    pub y_alpha: f64,
    /// `E[∫ e^{βA} d Tr⟨Z·X∘⟩]`.
    pub z: f64,
    /// `E[∫ e^{βA} ⦀U⦀² dC]`.
    pub u: f64,
    /// `E[∫ e^{βA} d Tr⟨N⟩]`.
    pub n: f64,
    /// `y_sup + z + u + n`.
    pub total: f64,
}

/// Exact ⋆-norm of `s` (a solution or a difference of two). Predictable
/// integrands at step `t_{j−1} → t_j` carry the weight `e^{βA_{t_j}}`.
pub fn star_norm(s: &Components, data: &StandardData, beta: f64) -> NormRecord {
    let tree = data.tree();
    let ch = data.chars();
    let (l, m) = (s.dim_y, s.dim_x);
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let mut sup = vec![0.0; tree.node_count()];
    sup[0] = sq(s.y(0));
    let mut rec = NormRecord::default();
    for v in 0..tree.node_count() {
        if tree.is_leaf(v) {
            rec.y_sup += tree.path_prob(v) * sup[v];
            continue;
        }
        let pv = tree.path_prob(v);
        let a_next = ch.a(v) + ch.d_a(v);
        let w = (beta * a_next).exp();
        let dc = data.dc(tree.level_of(v));
        let mut n_part = 0.0;
        let mut y_next = 0.0;
        for c in tree.children(v) {
            let q = tree.prob(c);
            n_part += q * sq(s.dn(c));
            y_next += q * sq(s.y(c));
            sup[c] = sup[v].max((beta * ch.a(c)).exp() * sq(s.y(c)));
        }
        let qv = ch.d_qv(v);
        let z = s.z(v);
        let mut z_part = 0.0;
        for a in 0..l {
            for b in 0..m {
                for e in 0..m {
                    z_part += z[a * m + b] * qv[b * m + e] * z[a * m + e];
                }
            }
        }
        let u_part = if s.n_marks > 0 { tnorm_sq(s.u(v), data, v) * dc } else { 0.0 };
        rec.z += pv * w * z_part;
        rec.u += pv * w * u_part;
        rec.n += pv * w * n_part;
        rec.y_alpha += pv * w * ch.alpha(v).powi(2) * y_next * dc;
    }
    rec.total = rec.y_sup + rec.z + rec.u + rec.n;
    rec
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaReport {
    /// `Γ` per leaf, in leaf order.
    pub per_leaf: Vec<f64>,
    pub mean: f64,
    /// `E[Γ^{1+δ}]`.
    pub moment: f64,
    pub delta: f64,
}

/// `Γ = ∫ ‖f(s, Y, Z, U)‖² / α_s² dC_s` per scenario, evaluating `f` on `s`
/// as the Picard step does. Steps with `f = 0` contribute nothing even when
/// `α = 0`.
pub fn gamma_functional(data: &StandardData, s: &Components, conv: Convention, delta: f64) -> Result<GammaReport> {
    let tree = data.tree();
    let l = data.dim_y();
    let mut acc = vec![0.0; tree.node_count()];
    let mut f = vec![0.0; l];
    for v in 0..tree.node_count() {
        if tree.is_leaf(v) {
            continue;
        }
        let alpha = data.chars().alpha(v);
        let dc = data.dc(tree.level_of(v));
        for c in tree.children(v) {
            step_generator(data, s, conv, v, c, &mut f);
            let norm: f64 = f.iter().map(|x| x * x).sum();
            let inc = if norm == 0.0 || dc == 0.0 {
                0.0
            } else if alpha > 0.0 {
                norm / (alpha * alpha) * dc
            } else {
                return Err(Error::Node { node: v, reason: "α = 0 where the generator is nonzero".into() });
            };
            acc[c] = acc[v] + inc;
        }
    }
    let per_leaf: Vec<f64> = tree.leaves().map(|v| acc[v]).collect();
    let probs = tree.leaves().map(|v| tree.path_prob(v));
    let (mut mean, mut moment) = (0.0, 0.0);
    for (g, p) in per_leaf.iter().zip(probs) {
        mean += p * g;
        moment += p * g.powf(1.0 + delta);
    }
    Ok(GammaReport { per_leaf, mean, moment, delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{build_deterministic_data, build_random_walk_data, Generator, Payoff, RandomWalkSpec, Terminal};
    use crate::solver::{solve, SolveOptions};

    fn walk(k: usize, lambda: f64, payoff: Payoff, generator: Generator) -> StandardData {
        let marks = if lambda > 0.0 { vec![1.0] } else { vec![] };
        build_random_walk_data(&RandomWalkSpec { k, horizon: 1.0, lambda, marks, generator, terminal: Terminal::continuous(payoff) })
            .unwrap()
    }

    #[test]
    fn zero_solution_has_zero_norm() {
        let d = walk(3, 1.0, Payoff::Identity, Generator::Zero);
        assert_eq!(star_norm(&Components::zeros(&d), &d, 2.0).total, 0.0);
    }

    #[test]
    fn deterministic_sup_part() {
        let d = build_deterministic_data(2, 1.0, Generator::LinearY { lambda: 0.5 }, vec![1.0]).unwrap();
        let out = solve(&d, &SolveOptions::default()).unwrap();
        let r = star_norm(&out.solution.parts, &d, 0.0);
        assert!((r.y_sup - (16.0f64 / 9.0).powi(2)).abs() < 1e-10);
        let g = gamma_functional(&d, &out.solution.parts, Convention::YLeft, 0.25).unwrap();
        let want = 0.5 * ((16.0f64 / 9.0).powi(2) + (4.0f64 / 3.0).powi(2));
        assert!((g.per_leaf[0] - want).abs() < 1e-10);
    }

    #[test]
    fn walk_z_part() {
        let d = walk(2, 0.0, Payoff::Identity, Generator::Zero);
        let out = solve(&d, &SolveOptions::default()).unwrap();
        let r = star_norm(&out.solution.parts, &d, 0.0);
        assert!((r.z - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gamma_examples() {
        let d = walk(2, 0.0, Payoff::Identity, Generator::Zero);
        let g = gamma_functional(&d, &Components::zeros(&d), Convention::YLeft, 0.25).unwrap();
        assert!(g.per_leaf.iter().all(|&x| x == 0.0));
        let d = build_deterministic_data(4, 1.0, Generator::Constant { value: 3.0 }, vec![0.0]).unwrap();
        assert!(gamma_functional(&d, &Components::zeros(&d), Convention::YLeft, 0.25).is_err());
        let d = d.with_alpha_floor(2.0).unwrap();
        let g = gamma_functional(&d, &Components::zeros(&d), Convention::YLeft, 0.25).unwrap();
        assert!((g.mean - 2.25).abs() < 1e-14);
    }

    #[test]
    fn u_part_matches_brute_force() {
        let spec = RandomWalkSpec {
            k: 4,
            horizon: 1.0,
            lambda: 1.0,
            marks: vec![1.0],
            generator: Generator::JumpLinear { eta: 0.3 },
            terminal: Terminal::jump(Payoff::Square),
        };
        let d = build_random_walk_data(&spec).unwrap();
        let out = solve(&d, &SolveOptions::default()).unwrap();
        let s = &out.solution.parts;
        let beta = 1.5;
        let r = star_norm(s, &d, beta);
        let t = d.tree();
        let mut brute = 0.0;
        for v in 0..t.node_count() {
            if t.is_leaf(v) {
                continue;
            }
            let w = (beta * (d.chars().a(v) + d.chars().d_a(v))).exp();
            let nu = d.chars().nu(v)[0];
            let var: f64 = t.children(v).map(|c| {
                let ind = f64::from(t.mark(c) == Some(0));
                t.prob(c) * (s.u(v)[0] * (ind - nu)).powi(2)
            }).sum();
            brute += t.path_prob(v) * w * var;
        }
        assert!((r.u - brute).abs() < 1e-10 * (1.0 + brute));
        assert!(r.u > 0.0);
    }
}
