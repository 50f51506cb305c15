//! Exact conditional expectations on scenario trees, the orthogonal
//! martingale decomposition, Picard iteration and the derived norms,
//! Γ-functionals and bracket processes.

mod brackets;
mod gkw;
mod lattice;
mod norms;
mod picard;
mod scenario;

pub use brackets::{brackets, BracketKind, Brackets, ANGLE_KINDS, SQUARE_KINDS};
pub use gkw::{gkw_decompose, Decomposition, ResidualReport};
pub use lattice::{Lattice, LatticeIterate, LatticeRun};
pub use norms::{gamma_functional, star_norm, GammaReport, NormRecord};
pub use picard::{lebesgue_integral_l, picard_step, solve, SolveOptions, SolveOutcome};
pub use scenario::ScenarioRecord;

use crate::drivers::{ScenarioTree, StandardData};
use crate::error::{Error, Result};
use crate::paths::StepPath;
use serde::{Deserialize, Serialize};

/// Where the generator reads `Y` within a Picard step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Convention {
    /// `Y_{t_{j−1}}`, the predictable left limit.
    #[default]
    #[serde(rename = "Y_left")]
    YLeft,
    /// `Y_{t_j}`.
    #[serde(rename = "Y_right")]
    YRight,
}

/// One real vector per tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    dim: usize,
    values: Vec<f64>,
}

impl AdaptedProcess {
    pub fn zeros(dim: usize, nodes: usize) -> Self {
        AdaptedProcess { dim, values: vec![0.0; dim * nodes] }
    }

    pub fn from_values(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::Dimension { expected: dim, got: values.len() });
        }
        Ok(AdaptedProcess { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Path of the process along the scenario ending at `leaf`, with jumps at
    /// the grid times, on `[0, window)`.
    pub fn path(&self, tree: &ScenarioTree, leaf: usize, window: f64) -> Result<StepPath> {
        let chain = tree.ancestry(leaf);
        let times = tree.times();
        let jumps = chain.iter().enumerate().skip(1).map(|(i, &v)| (times[i], self.at(v).to_vec())).collect();
        StepPath::new(self.at(chain[0]).to_vec(), jumps, window)
    }
}

/// Exact conditional expectation: node value is the probability-weighted
/// average of its children, starting from `leaf_values` (leaf-major, in
/// leaf order).
pub fn backward_project(tree: &ScenarioTree, dim: usize, leaf_values: &[f64]) -> Result<AdaptedProcess> {
    let leaves = tree.leaves();
    if leaf_values.len() != leaves.len() * dim {
        return Err(Error::Dimension { expected: leaves.len() * dim, got: leaf_values.len() });
    }
    let mut out = AdaptedProcess::zeros(dim, tree.node_count());
    out.values[leaves.start * dim..].copy_from_slice(leaf_values);
    for level in (0..tree.steps()).rev() {
        for v in tree.level(level) {
            for c in tree.children(v) {
                let q = tree.prob(c);
                for a in 0..dim {
                    out.values[v * dim + a] += q * out.values[c * dim + a];
                }
            }
        }
    }
    Ok(out)
}

/// `(Y, Z, U, ΔN)` on a tree. `Z` and `U` are predictable and stored at the
/// node where the step starts; `ΔN` is stored at the node where it ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub dim_y: usize,
    pub dim_x: usize,
    pub n_marks: usize,
    /// `ℓ` per node.
    pub y: Vec<f64>,
    /// Row-major `ℓ × m` per node.
    pub z: Vec<f64>,
    /// Mark-major `J × ℓ` per node.
    pub u: Vec<f64>,
    /// `ℓ` per node; zero at the root.
    pub dn: Vec<f64>,
}

impl Components {
    pub fn zeros(data: &StandardData) -> Self {
        let nodes = data.tree().node_count();
        let (l, m, j) = (data.dim_y(), data.dim_x(), data.n_marks());
        Components {
            dim_y: l,
            dim_x: m,
            n_marks: j,
            y: vec![0.0; nodes * l],
            z: vec![0.0; nodes * l * m],
            u: vec![0.0; nodes * j * l],
            dn: vec![0.0; nodes * l],
        }
    }

    pub fn y(&self, node: usize) -> &[f64] {
        &self.y[node * self.dim_y..(node + 1) * self.dim_y]
    }

    pub fn z(&self, node: usize) -> &[f64] {
        let w = self.dim_y * self.dim_x;
        &self.z[node * w..(node + 1) * w]
    }

    pub fn u(&self, node: usize) -> &[f64] {
        let w = self.n_marks * self.dim_y;
        &self.u[node * w..(node + 1) * w]
    }

    pub fn dn(&self, node: usize) -> &[f64] {
        &self.dn[node * self.dim_y..(node + 1) * self.dim_y]
    }

    /// Componentwise `self − other`.
    pub fn diff(&self, other: &Components) -> Components {
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Components {
            dim_y: self.dim_y,
            dim_x: self.dim_x,
            n_marks: self.n_marks,
            y: sub(&self.y, &other.y),
            z: sub(&self.z, &other.z),
            u: sub(&self.u, &other.u),
            dn: sub(&self.dn, &other.dn),
        }
    }

    pub fn y_process(&self) -> AdaptedProcess {
        AdaptedProcess { dim: self.dim_y, values: self.y.clone() }
    }

    /// Running `Z·X∘ + U⋆μ̃` and running `N` (with `N_0 = 0`).
    pub fn integrals(&self, data: &StandardData) -> (AdaptedProcess, AdaptedProcess) {
        let tree = data.tree();
        let l = self.dim_y;
        let mut zu = AdaptedProcess::zeros(l, tree.node_count());
        let mut n = AdaptedProcess::zeros(l, tree.node_count());
        let mut inc = vec![0.0; l];
        for v in 0..tree.node_count() {
            for c in tree.children(v) {
                self.martingale_increment(data, v, c, &mut inc);
                for a in 0..l {
                    zu.values[c * l + a] = zu.values[v * l + a] + inc[a];
                    n.values[c * l + a] = n.values[v * l + a] + self.dn(c)[a];
                }
            }
        }
        (zu, n)
    }

    /// `Z ΔX∘ + Σ_j U_j (1_{x_j} − ν_j)` on the edge `v → c`.
    pub(crate) fn martingale_increment(&self, data: &StandardData, v: usize, c: usize, out: &mut [f64]) {
        let (l, m) = (self.dim_y, self.dim_x);
        let dx = data.tree().dx(c);
        let nu = data.chars().nu(v);
        let mark = data.tree().mark(c);
        let z = self.z(v);
        let u = self.u(v);
        for a in 0..l {
            let mut s = 0.0;
            for b in 0..m {
                s += z[a * m + b] * dx[b];
            }
            for (j, &nj) in nu.iter().enumerate() {
                let ind = if mark == Some(j) { 1.0 } else { 0.0 };
                s += u[j * l + a] * (ind - nj);
            }
            out[a] = s;
        }
    }

    /// Node table `node, level, Y…, Z…, U…, ΔN…` as CSV.
    pub fn to_csv(&self, data: &StandardData) -> String {
        let tree = data.tree();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["node".to_string(), "level".to_string()];
        header.extend((0..self.dim_y).map(|a| format!("y{a}")));
        for a in 0..self.dim_y {
            header.extend((0..self.dim_x).map(|b| format!("z{a}_{b}")));
        }
        for j in 0..self.n_marks {
            header.extend((0..self.dim_y).map(|a| format!("u{j}_{a}")));
        }
        header.extend((0..self.dim_y).map(|a| format!("dn{a}")));
        w.write_record(&header).expect("in-memory write");
        for v in 0..tree.node_count() {
            let mut row = vec![v.to_string(), tree.level_of(v).to_string()];
            let cells = self.y(v).iter().chain(self.z(v)).chain(self.u(v)).chain(self.dn(v));
            row.extend(cells.map(|&x| crate::paths::fmt17(x)));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

/// Output of one Picard step.
#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub parts: Components,
    /// Running Lebesgue–Stieltjes integral of the previous iterate.
    pub l: AdaptedProcess,
    /// `M = E[ξ + L_T | ·]`.
    pub m: AdaptedProcess,
    /// Iteration index.
    pub p: usize,
    pub residual: ResidualReport,
}
