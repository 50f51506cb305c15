//! Recombining state space of the scalar random walk with at most one jump
//! mark. The walk's tree has `branches^k` leaves; the lattice keeps one state
//! per `(level, ups, jumps)` and runs the same node projection on it.

use super::gkw::{project_node, NodeSystem};
use super::norms::NormRecord;
use super::scenario::{scalar_products, ScenarioRecord};
use super::Convention;
use crate::drivers::{build_random_walk_data, tnorm_sq, NodeContext, RandomWalkSpec, StandardData};
use crate::error::{invalid, Error, Result};
use rand::Rng;

/// Solution values on every lattice state. `z`, `u` live on non-terminal
/// states; `dn` holds one entry per (non-terminal state, branch).
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeIterate {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub dn: Vec<f64>,
}

impl LatticeIterate {
    pub fn diff(&self, other: &LatticeIterate) -> LatticeIterate {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        LatticeIterate { y: d(&self.y, &other.y), z: d(&self.z, &other.z), u: d(&self.u, &other.u), dn: d(&self.dn, &other.dn) }
    }

    /// Largest absolute entry over all components.
    pub fn sup(&self) -> f64 {
        self.y.iter().chain(&self.z).chain(&self.u).chain(&self.dn).fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn y0(&self) -> f64 {
        self.y[0]
    }
}

#[derive(Debug, Clone)]
pub struct LatticeRun {
    /// `S^{(0)} = 0, S^{(1)}, …`; the last one is the fixed point when
    /// `converged`.
    pub iterates: Vec<LatticeIterate>,
    /// `sup |S^{(p+1)} − S^{(p)}|` over all states.
    pub sup_gaps: Vec<f64>,
    pub converged: bool,
}

impl LatticeRun {
    pub fn fixed_point(&self) -> &LatticeIterate {
        self.iterates.last().expect("at least the zero iterate")
    }

    /// Iterate `p`, or the last one when the run stopped earlier.
    pub fn iterate(&self, p: usize) -> &LatticeIterate {
        &self.iterates[p.min(self.iterates.len() - 1)]
    }
}

#[derive(Debug, Clone)]
pub struct Lattice {
    spec: RandomWalkSpec,
    unit: StandardData,
    h: f64,
    p_jump: f64,
    mark: f64,
    jumps: bool,
    q: Vec<f64>,
    dx: Vec<f64>,
    marks: Vec<Option<usize>>,
    up: Vec<usize>,
    jump: Vec<usize>,
    offsets: Vec<usize>,
}

impl Lattice {
    pub fn new(spec: &RandomWalkSpec) -> Result<Self> {
        spec.check()?;
        if spec.marks.len() > 1 {
            return invalid("the lattice supports at most one jump mark");
        }
        let unit = build_random_walk_data(&RandomWalkSpec { k: 1, horizon: spec.step(), ..spec.clone() })?;
        let branches = spec.branches();
        let jumps = branches.iter().any(|b| b.mark.is_some());
        let k = spec.k;
        let width = |i: usize| if jumps { i + 1 } else { 1 };
        let mut offsets = Vec::with_capacity(k + 2);
        let mut total = 0usize;
        for i in 0..=k {
            offsets.push(total);
            total = (i + 1).checked_mul(width(i)).and_then(|n| total.checked_add(n)).ok_or(Error::Invalid("lattice too large".into()))?;
        }
        offsets.push(total);
        Ok(Lattice {
            h: spec.step().sqrt(),
            p_jump: spec.jump_prob(),
            mark: spec.marks.first().copied().unwrap_or(0.0),
            jumps,
            q: branches.iter().map(|b| b.prob).collect(),
            dx: branches.iter().map(|b| b.dx[0]).collect(),
            marks: branches.iter().map(|b| b.mark).collect(),
            up: branches.iter().map(|b| usize::from(b.dx[0] > 0.0)).collect(),
            jump: branches.iter().map(|b| usize::from(b.mark.is_some())).collect(),
            offsets,
            unit,
            spec: spec.clone(),
        })
    }

    pub fn spec(&self) -> &RandomWalkSpec {
        &self.spec
    }

    pub fn steps(&self) -> usize {
        self.spec.k
    }

    pub fn branch_count(&self) -> usize {
        self.q.len()
    }

    pub fn state_count(&self) -> usize {
        self.offsets[self.spec.k + 1]
    }

    /// `α` of every step (the walk is homogeneous).
    pub fn alpha(&self) -> f64 {
        self.unit.chars().alpha(0)
    }

    /// `ΔA = α² ΔC`, which is also `Φ`.
    pub fn d_a(&self) -> f64 {
        self.unit.chars().d_a(0)
    }

    fn width(&self, i: usize) -> usize {
        if self.jumps {
            i + 1
        } else {
            1
        }
    }

    fn index(&self, i: usize, ups: usize, n: usize) -> usize {
        self.offsets[i] + ups * self.width(i) + n
    }

    fn states(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width(i);
        (0..=i).flat_map(move |u| (0..w).map(move |n| (u, n)))
    }

    fn child(&self, i: usize, ups: usize, n: usize, b: usize) -> usize {
        self.index(i + 1, ups + self.up[b], n + self.jump[b])
    }

    pub fn x_circ(&self, i: usize, ups: usize) -> f64 {
        (2.0 * ups as f64 - i as f64) * self.h
    }

    pub fn x_nat(&self, i: usize, n: usize) -> f64 {
        self.mark * (n as f64 - i as f64 * self.p_jump)
    }

    fn context(&self, i: usize) -> NodeContext<'_> {
        NodeContext { t: (i + 1) as f64 * self.spec.step(), ..self.unit.context(0) }
    }

    fn nu(&self) -> &[f64] {
        self.unit.chars().nu(0)
    }

    fn system(&self) -> NodeSystem<'_> {
        NodeSystem { q: &self.q, dx: &self.dx, marks: &self.marks, nu: self.nu(), m: 1 }
    }

    pub fn zeros(&self) -> LatticeIterate {
        let inner = self.offsets[self.spec.k];
        let nj = self.nu().len();
        LatticeIterate {
            y: vec![0.0; self.state_count()],
            z: vec![0.0; inner],
            u: vec![0.0; inner * nj],
            dn: vec![0.0; inner * self.branch_count()],
        }
    }

    fn generator(&self, i: usize, s: usize, c: usize, it: &LatticeIterate, conv: Convention) -> f64 {
        let y = match conv {
            Convention::YLeft => it.y[s],
            Convention::YRight => it.y[c],
        };
        let nj = self.nu().len();
        let mut out = [0.0];
        self.spec.generator.evaluate_into(&self.context(i), &[y], &it.z[s..s + 1], &it.u[s * nj..(s + 1) * nj], &mut out);
        out[0]
    }

    /// One Picard step on the lattice.
    pub fn picard_step(&self, prev: &LatticeIterate, conv: Convention) -> Result<LatticeIterate> {
        let k = self.spec.k;
        let nb = self.branch_count();
        let nj = self.nu().len();
        let dc = self.spec.step();
        let mut next = self.zeros();
        for (u, n) in self.states(k) {
            let s = self.index(k, u, n);
            next.y[s] = self.spec.terminal.eval(self.x_circ(k, u), self.x_nat(k, n));
        }
        let sys = self.system();
        let mut dm = vec![0.0; nb];
        for i in (0..k).rev() {
            for (u, n) in self.states(i) {
                let s = self.index(i, u, n);
                let mut mean = 0.0;
                for b in 0..nb {
                    let c = self.child(i, u, n, b);
                    let f = self.generator(i, s, c, prev, conv);
                    if !f.is_finite() {
                        return Err(Error::Node { node: s, reason: "generator returned a non-finite value".into() });
                    }
                    dm[b] = next.y[c] + f * dc;
                    mean += self.q[b] * dm[b];
                }
                next.y[s] = mean;
                for x in dm.iter_mut() {
                    *x -= mean;
                }
                project_node(
                    &sys,
                    &dm,
                    1,
                    &mut next.z[s..s + 1],
                    &mut next.u[s * nj..(s + 1) * nj],
                    &mut next.dn[s * nb..(s + 1) * nb],
                );
            }
        }
        Ok(next)
    }

    /// Iterates from zero until the sup-norm gap falls to `tol` times the
    /// first one, keeping every iterate.
    pub fn run(&self, conv: Convention, tol: f64, max_p: usize) -> Result<LatticeRun> {
        let mut iterates = vec![self.zeros()];
        let mut sup_gaps = Vec::new();
        let mut converged = false;
        for p in 1..=max_p.max(1) {
            let next = self.picard_step(iterates.last().expect("nonempty"), conv)?;
            let gap = next.diff(iterates.last().expect("nonempty")).sup();
            if !gap.is_finite() {
                return Err(Error::Diverged { iterations: p });
            }
            sup_gaps.push(gap);
            iterates.push(next);
            if sup_gaps[0] == 0.0 || gap <= tol * sup_gaps[0] {
                converged = true;
                break;
            }
        }
        Ok(LatticeRun { iterates, sup_gaps, converged })
    }

    /// Branch indices of one sampled scenario.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.spec.k)
            .map(|_| {
                let x: f64 = rng.random();
                let mut acc = 0.0;
                for (b, &q) in self.q.iter().enumerate() {
                    acc += q;
                    if x < acc {
                        return b;
                    }
                }
                self.q.len() - 1
            })
            .collect()
    }

    /// `(level, ups, jumps)` visited by a branch sequence.
    fn walk(&self, branches: &[usize]) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(branches.len() + 1);
        let (mut u, mut n) = (0, 0);
        out.push((0, 0));
        for &b in branches {
            u += self.up[b];
            n += self.jump[b];
            out.push((u, n));
        }
        out
    }

    /// Scenario record of `it` along `branches`.
    pub fn record(&self, it: &LatticeIterate, conv: Convention, branches: &[usize], weight: f64) -> Result<ScenarioRecord> {
        let k = self.spec.k;
        if branches.len() != k || branches.iter().any(|&b| b >= self.branch_count()) {
            return invalid("branch sequence does not fit the lattice");
        }
        let nb = self.branch_count();
        let nj = self.nu().len();
        let nu = self.nu().to_vec();
        let dc = self.spec.step();
        let states = self.walk(branches);
        let idx: Vec<usize> = states.iter().enumerate().map(|(i, &(u, n))| self.index(i, u, n)).collect();
        let mut rec = ScenarioRecord {
            weight,
            times: (0..=k).map(|i| i as f64 * dc).collect(),
            x_circ: states.iter().enumerate().map(|(i, &(u, _))| self.x_circ(i, u)).collect(),
            x_nat: states.iter().enumerate().map(|(i, &(_, n))| self.x_nat(i, n)).collect(),
            y: idx.iter().map(|&s| it.y[s]).collect(),
            z: Vec::with_capacity(k),
            u: Vec::with_capacity(k),
            jump: Vec::with_capacity(k),
            zx: Vec::with_capacity(k),
            umu: Vec::with_capacity(k),
            dn: Vec::with_capacity(k),
            f: Vec::with_capacity(k),
            alpha: vec![self.alpha(); k],
            dc: vec![dc; k],
            square: [0.0; 8],
            angle: [0.0; 8],
        };
        for i in 0..k {
            let (u, n) = states[i];
            let s = idx[i];
            let us = &it.u[s * nj..(s + 1) * nj];
            let jumps_of = |b: usize| {
                let c = self.child(i, u, n, b);
                let dy = it.y[c] - it.y[s];
                let dzx = it.z[s] * self.dx[b];
                let dumu: f64 = (0..nj).map(|j| us[j] * (f64::from(self.marks[b] == Some(j)) - nu[j])).sum();
                let dxn = self.mark * (self.jump[b] as f64 - self.p_jump);
                (dy, dzx, dumu, it.dn[s * nb + b], self.dx[b], dxn)
            };
            let mut mean = [0.0; 8];
            for b in 0..nb {
                let (dy, dzx, dumu, dn, dx, dxn) = jumps_of(b);
                let prod = scalar_products(dy, dzx, dumu, dn, dx, dxn);
                for (m, p) in mean.iter_mut().zip(prod) {
                    *m += self.q[b] * p;
                }
            }
            let b = branches[i];
            let (dy, dzx, dumu, dn, dx, dxn) = jumps_of(b);
            let prod = scalar_products(dy, dzx, dumu, dn, dx, dxn);
            for t in 0..8 {
                rec.square[t] += prod[t];
                rec.angle[t] += mean[t];
            }
            rec.z.push(it.z[s]);
            rec.u.push(us.to_vec());
            rec.jump.push(self.marks[b]);
            rec.zx.push(dzx);
            rec.umu.push(dumu);
            rec.dn.push(dn);
            rec.f.push(self.generator(i, s, idx[i + 1], it, conv));
        }
        Ok(rec)
    }

    /// Probability of every state.
    pub fn state_probs(&self) -> Vec<f64> {
        let k = self.spec.k;
        let mut pr = vec![0.0; self.state_count()];
        pr[0] = 1.0;
        for i in 0..k {
            for (u, n) in self.states(i) {
                let s = self.index(i, u, n);
                for b in 0..self.branch_count() {
                    pr[self.child(i, u, n, b)] += pr[s] * self.q[b];
                }
            }
        }
        pr
    }

    /// ⋆-norm of `it` (typically a difference of iterates). The bracket
    /// parts and `y_alpha` are exact; `y_sup` is the mean over `paths`.
    pub fn star_norm(&self, it: &LatticeIterate, beta: f64, probs: &[f64], paths: &[Vec<usize>]) -> NormRecord {
        let k = self.spec.k;
        let nb = self.branch_count();
        let nj = self.nu().len();
        let d_a = self.d_a();
        let dc = self.spec.step();
        let qv = self.unit.chars().d_qv(0)[0];
        let alpha2 = self.alpha().powi(2);
        let mut rec = NormRecord::default();
        for i in 0..k {
            let w = (beta * (i + 1) as f64 * d_a).exp();
            for (u, n) in self.states(i) {
                let s = self.index(i, u, n);
                let pv = probs[s];
                if pv == 0.0 {
                    continue;
                }
                let mut n_part = 0.0;
                let mut y_next = 0.0;
                for b in 0..nb {
                    let c = self.child(i, u, n, b);
                    n_part += self.q[b] * it.dn[s * nb + b].powi(2);
                    y_next += self.q[b] * it.y[c].powi(2);
                }
                let u_part = if nj > 0 { tnorm_sq(&it.u[s * nj..(s + 1) * nj], &self.unit, 0) * dc } else { 0.0 };
                rec.z += pv * w * it.z[s].powi(2) * qv;
                rec.u += pv * w * u_part;
                rec.n += pv * w * n_part;
                rec.y_alpha += pv * w * alpha2 * y_next * dc;
            }
        }
        if !paths.is_empty() {
            let mut acc = 0.0;
            for path in paths {
                let mut sup: f64 = 0.0;
                for (i, &(u, n)) in self.walk(path).iter().enumerate() {
                    sup = sup.max((beta * i as f64 * d_a).exp() * it.y[self.index(i, u, n)].powi(2));
                }
                acc += sup;
            }
            rec.y_sup = acc / paths.len() as f64;
        }
        rec.total = rec.y_sup + rec.z + rec.u + rec.n;
        rec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{Generator, Payoff, Terminal};
    use crate::solver::{brackets, picard_step, star_norm, Components};
    use rand::SeedableRng;

    fn spec(k: usize, lambda: f64, generator: Generator, payoff: Payoff) -> RandomWalkSpec {
        let marks = if lambda > 0.0 { vec![0.7] } else { vec![] };
        RandomWalkSpec { k, horizon: 1.0, lambda, marks, generator, terminal: Terminal { payoff, driver: Default::default() } }
    }

    fn branch_path(data: &StandardData, leaf: usize) -> Vec<usize> {
        let t = data.tree();
        t.ancestry(leaf).windows(2).map(|w| t.children(w[0]).position(|c| c == w[1]).expect("child")).collect()
    }

    fn compare(spec: &RandomWalkSpec, conv: Convention) {
        let data = build_random_walk_data(spec).unwrap();
        let lat = Lattice::new(spec).unwrap();
        let run = lat.run(conv, 1e-300, 5).unwrap();
        let mut s = Components::zeros(&data);
        let probs = lat.state_probs();
        for p in 1..run.iterates.len() {
            s = picard_step(&data, &s, conv, p).unwrap().parts;
            let it = &run.iterates[p];
            let b = brackets(&s, &data);
            for leaf in data.tree().leaves() {
                let path = branch_path(&data, leaf);
                let a = ScenarioRecord::from_tree(&data, &s, &b, conv, leaf).unwrap();
                let l = lat.record(it, conv, &path, a.weight).unwrap();
                let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-12);
                assert!(close(&a.y, &l.y), "y {:?} {:?}", a.y, l.y);
                assert!(close(&a.z, &l.z) && close(&a.dn, &l.dn) && close(&a.umu, &l.umu) && close(&a.f, &l.f));
                assert!(close(&a.x_circ, &l.x_circ) && close(&a.x_nat, &l.x_nat));
                assert!(close(&a.square, &l.square) && close(&a.angle, &l.angle));
                assert_eq!(a.jump, l.jump);
            }
            let exact = star_norm(&s, &data, 0.7);
            let mine = lat.star_norm(it, 0.7, &probs, &[]);
            for (x, y) in [(exact.z, mine.z), (exact.u, mine.u), (exact.n, mine.n), (exact.y_alpha, mine.y_alpha)] {
                assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn matches_tree_without_jumps() {
        compare(&spec(5, 0.0, Generator::LinearY { lambda: 0.5 }, Payoff::PositivePart), Convention::YLeft);
        compare(&spec(4, 0.0, Generator::CallPayoff { kappa: 0.3, strike: 0.1, theta: 0.2 }, Payoff::Square), Convention::YRight);
    }

    #[test]
    fn matches_tree_with_jumps() {
        let mut sp = spec(4, 1.0, Generator::JumpLinear { eta: 0.4 }, Payoff::Square);
        compare(&sp, Convention::YLeft);
        sp.terminal = Terminal::jump(Payoff::Affine { slope: 2.0, intercept: 1.0 });
        sp.generator = Generator::LinearY { lambda: -0.3 };
        compare(&sp, Convention::YRight);
    }

    #[test]
    fn state_probabilities_sum_to_one() {
        let lat = Lattice::new(&spec(7, 2.0, Generator::Zero, Payoff::Identity)).unwrap();
        let pr = lat.state_probs();
        let k = lat.steps();
        let total: f64 = pr[lat.offsets[k]..].iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sampled_sup_matches_exact_for_martingale() {
        // f = 0 and ξ = X² gives Y_i = X_i² + T − t_i on every state
        let lat = Lattice::new(&spec(16, 0.0, Generator::Zero, Payoff::Square)).unwrap();
        let run = lat.run(Convention::YLeft, 1e-13, 10).unwrap();
        assert!(run.converged);
        assert_eq!(run.sup_gaps.len(), 2);
        let it = run.fixed_point();
        for i in 0..=16 {
            for u in 0..=i {
                let x = lat.x_circ(i, u);
                let want = x * x + 1.0 - i as f64 / 16.0;
                assert!((it.y[lat.index(i, u, 0)] - want).abs() < 1e-12);
            }
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let path = lat.sample(&mut rng);
        let rec = lat.record(it, Convention::YLeft, &path, 1.0).unwrap();
        for i in 0..16 {
            assert!((rec.z[i] - 2.0 * rec.x_circ[i]).abs() < 1e-12);
            assert!(rec.dn[i].abs() < 1e-12);
        }
    }
}
