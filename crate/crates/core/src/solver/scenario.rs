//! Scalar per-scenario view of a solution, shared by exact enumeration and
//! path sampling.

use super::brackets::{edge_jumps, BracketKind, Brackets};
use super::picard::step_generator;
use super::{Components, Convention};
use crate::drivers::StandardData;
use crate::error::{invalid, Result};
use crate::paths::StepPath;

/// One scenario of a scalar problem (`ℓ = m = d = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRecord {
    /// Probability (exact enumeration) or `1/n` (sampling).
    pub weight: f64,
    pub times: Vec<f64>,
    pub x_circ: Vec<f64>,
    pub x_nat: Vec<f64>,
    pub y: Vec<f64>,
    /// Predictable `Z` on step `i → i + 1`.
    pub z: Vec<f64>,
    /// Predictable `U(x_j)` on step `i → i + 1`, one row per step.
    pub u: Vec<Vec<f64>>,
    /// Mark of the jump on step `i → i + 1`, if any.
    pub jump: Vec<Option<usize>>,
    /// `Z ΔX∘` per step.
    pub zx: Vec<f64>,
    /// `Σ_j U_j (1_{x_j} − ν_j)` per step.
    pub umu: Vec<f64>,
    pub dn: Vec<f64>,
    /// Generator value per step.
    pub f: Vec<f64>,
    pub alpha: Vec<f64>,
    pub dc: Vec<f64>,
    /// Terminal square brackets, indexed like [`BracketKind::ALL`].
    pub square: [f64; 8],
    /// Terminal angle brackets, indexed like [`BracketKind::ALL`].
    pub angle: [f64; 8],
}

impl ScenarioRecord {
    pub fn steps(&self) -> usize {
        self.z.len()
    }

    pub fn square(&self, kind: BracketKind) -> f64 {
        self.square[kind.index()]
    }

    pub fn angle(&self, kind: BracketKind) -> f64 {
        self.angle[kind.index()]
    }

    /// `Y` as a step path on `[0, window)`.
    pub fn y_path(&self, window: f64) -> Result<StepPath> {
        StepPath::new(vec![self.y[0]], self.times[1..].iter().zip(&self.y[1..]).map(|(&t, &y)| (t, vec![y])).collect(), window)
    }

    /// `(Y, Z·X∘ + U⋆μ̃, N)` on `[0, window)`.
    pub fn triple_path(&self, window: f64) -> Result<StepPath> {
        let (mut m, mut n) = (0.0, 0.0);
        let mut jumps = Vec::with_capacity(self.steps());
        for i in 0..self.steps() {
            m += self.zx[i] + self.umu[i];
            n += self.dn[i];
            jumps.push((self.times[i + 1], vec![self.y[i + 1], m, n]));
        }
        StepPath::new(vec![self.y[0], 0.0, 0.0], jumps, window)
    }

    /// `Γ = Σ f² / α² ΔC` over the steps with `f ≠ 0`.
    pub fn gamma(&self) -> Result<f64> {
        let mut g = 0.0;
        for i in 0..self.steps() {
            if self.f[i] == 0.0 || self.dc[i] == 0.0 {
                continue;
            }
            if self.alpha[i] <= 0.0 {
                return invalid(format!("α = 0 on step {i} where the generator is nonzero"));
            }
            g += (self.f[i] / self.alpha[i]).powi(2) * self.dc[i];
        }
        Ok(g)
    }

    /// Scenario ending at `leaf` of a tree solution.
    pub fn from_tree(data: &StandardData, s: &Components, b: &Brackets, conv: Convention, leaf: usize) -> Result<Self> {
        if data.dim_y() != 1 || data.dim_x() != 1 || data.marks().dim() != 1 {
            return invalid("scenario records need scalar Y, X∘ and marks");
        }
        let tree = data.tree();
        let chain = tree.ancestry(leaf);
        let n = chain.len() - 1;
        let mut rec = ScenarioRecord {
            weight: tree.path_prob(leaf),
            times: tree.times().to_vec(),
            x_circ: chain.iter().map(|&v| data.x_circ(v)[0]).collect(),
            x_nat: chain.iter().map(|&v| data.x_nat(v)[0]).collect(),
            y: chain.iter().map(|&v| s.y(v)[0]).collect(),
            z: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            jump: Vec::with_capacity(n),
            zx: Vec::with_capacity(n),
            umu: Vec::with_capacity(n),
            dn: Vec::with_capacity(n),
            f: Vec::with_capacity(n),
            alpha: Vec::with_capacity(n),
            dc: data.dcs().to_vec(),
            square: [0.0; 8],
            angle: [0.0; 8],
        };
        let mut f = [0.0];
        for w in chain.windows(2) {
            let (v, c) = (w[0], w[1]);
            let j = edge_jumps(s, data, v, c);
            rec.z.push(s.z(v)[0]);
            rec.u.push(s.u(v).to_vec());
            rec.jump.push(tree.mark(c));
            rec.zx.push(j.dzx[0]);
            rec.umu.push(j.dumu[0]);
            rec.dn.push(j.dn[0]);
            step_generator(data, s, conv, v, c, &mut f);
            rec.f.push(f[0]);
            rec.alpha.push(data.chars().alpha(v));
        }
        for (i, &k) in BracketKind::ALL.iter().enumerate() {
            rec.square[i] = b.square(k).at(leaf)[0];
            rec.angle[i] = b.angle(k).at(leaf)[0];
        }
        Ok(rec)
    }
}

/// Scalar products of edge jumps, indexed like [`BracketKind::ALL`].
pub(crate) fn scalar_products(dy: f64, dzx: f64, dumu: f64, dn: f64, dx: f64, dxn: f64) -> [f64; 8] {
    let s = dzx + dumu;
    [dy * dy, dzx * dzx, dumu * dumu, s * s, dn * dn, dy * dx, dy * dxn, dy * dn]
}
