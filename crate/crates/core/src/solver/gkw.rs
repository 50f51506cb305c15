//! Orthogonal decomposition `ΔM = Z ΔX∘ + Σ_j U_j (1_{x_j} − ν_j) + ΔN`.

use super::AdaptedProcess;
use crate::drivers::{tnorm_sq, StandardData};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;

/// Largest violations of the decomposition identities over all nodes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `|E[ΔN ΔX∘ | node]|` and `|E[ΔN 1_{x_j} | node]|`.
    pub orthogonality: f64,
    /// `|E[ΔN | node]|`.
    pub martingale: f64,
    /// `|E[ΔM²] − (Z-part + ⦀U⦀²ΔC + E[ΔN²])|`, relative to the largest term
    /// when that exceeds one.
    pub pythagoras: f64,
    /// `|M − (M_0 + Z·X∘ + U⋆μ̃ + N)|`.
    pub reconstruction: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.orthogonality.max(self.martingale).max(self.pythagoras).max(self.reconstruction)
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Row-major `ℓ × m` per node.
    pub z: Vec<f64>,
    /// Mark-major `J × ℓ` per node.
    pub u: Vec<f64>,
    /// `ℓ` per node, zero at the root.
    pub dn: Vec<f64>,
    pub residual: ResidualReport,
}

/// Children of one node as seen by the projection.
pub(crate) struct NodeSystem<'a> {
    pub q: &'a [f64],
    /// `children × m`.
    pub dx: &'a [f64],
    pub marks: &'a [Option<usize>],
    pub nu: &'a [f64],
    pub m: usize,
}

/// Projects the `children × ℓ` increments `dm` on the span of `ΔX∘` and the
/// compensated jump indicators, in the minimum-norm sense, so directions
/// without variance get zero loading.
pub(crate) fn project_node(sys: &NodeSystem, dm: &[f64], l: usize, z: &mut [f64], u: &mut [f64], dn: &mut [f64]) {
    let nc = sys.q.len();
    let (m, nj) = (sys.m, sys.nu.len());
    let r = m + nj;
    let reg = |c: usize, i: usize| -> f64 {
        if i < m {
            sys.dx[c * m + i]
        } else {
            let j = i - m;
            f64::from(sys.marks[c] == Some(j)) - sys.nu[j]
        }
    };
    let cross_of = |res: &[f64]| {
        let mut cross = DMatrix::<f64>::zeros(l, r);
        for c in 0..nc {
            for i in 0..r {
                let ri = reg(c, i);
                if ri != 0.0 {
                    for a in 0..l {
                        cross[(a, i)] += sys.q[c] * res[c * l + a] * ri;
                    }
                }
            }
        }
        cross
    };
    let mut gram = DMatrix::<f64>::zeros(r, r);
    for c in 0..nc {
        for i in 0..r {
            let ri = reg(c, i);
            if ri != 0.0 {
                for k in 0..r {
                    gram[(i, k)] += sys.q[c] * ri * reg(c, k);
                }
            }
        }
    }
    let inv = if r == 1 {
        let g = gram[(0, 0)];
        DMatrix::from_element(1, 1, if g > 0.0 { 1.0 / g } else { 0.0 })
    } else {
        let eig = gram.symmetric_eigen();
        let emax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
        let mut inv = DMatrix::<f64>::zeros(r, r);
        for (i, &e) in eig.eigenvalues.iter().enumerate() {
            if e > 1e-12 * emax {
                let v = eig.eigenvectors.column(i);
                inv += (v * v.transpose()) / e;
            }
        }
        inv
    };
    let fit = |coef: &DMatrix<f64>, out: &mut [f64]| {
        for c in 0..nc {
            for a in 0..l {
                let fitted: f64 = (0..r).map(|i| coef[(a, i)] * reg(c, i)).sum();
                out[c * l + a] = dm[c * l + a] - fitted;
            }
        }
    };
    let mut coef = cross_of(dm) * &inv;
    fit(&coef, dn);
    // one refinement pass on the residual
    coef += cross_of(dn) * &inv;
    fit(&coef, dn);
    for a in 0..l {
        for b in 0..m {
            z[a * m + b] = coef[(a, b)];
        }
        for j in 0..nj {
            u[j * l + a] = coef[(a, m + j)];
        }
    }
}

/// Decomposes a node-wise martingale into its `X∘`, jump and orthogonal parts.
pub fn gkw_decompose(mart: &AdaptedProcess, data: &StandardData) -> Result<Decomposition> {
    let tree = data.tree();
    let nodes = tree.node_count();
    let l = mart.dim();
    let (m, nj) = (data.dim_x(), data.n_marks());
    if mart.nodes() != nodes {
        return Err(Error::Dimension { expected: nodes, got: mart.nodes() });
    }
    let scale = mart.values().iter().fold(1.0f64, |s, x| s.max(x.abs()));
    let mut out = Decomposition { z: vec![0.0; nodes * l * m], u: vec![0.0; nodes * nj * l], dn: vec![0.0; nodes * l], residual: ResidualReport::default() };
    let mut q = Vec::new();
    let mut dx = Vec::new();
    let mut marks = Vec::new();
    let mut dm = Vec::new();
    let mut dn = Vec::new();
    for v in 0..nodes {
        if tree.is_leaf(v) {
            continue;
        }
        q.clear();
        dx.clear();
        marks.clear();
        dm.clear();
        for c in tree.children(v) {
            q.push(tree.prob(c));
            dx.extend_from_slice(tree.dx(c));
            marks.push(tree.mark(c));
            for a in 0..l {
                dm.push(mart.at(c)[a] - mart.at(v)[a]);
            }
        }
        for a in 0..l {
            let drift: f64 = (0..q.len()).map(|c| q[c] * dm[c * l + a]).sum();
            if drift.abs() > 1e-10 * scale {
                return Err(Error::NonMartingale { node: v, drift });
            }
        }
        dn.resize(dm.len(), 0.0);
        let sys = NodeSystem { q: &q, dx: &dx, marks: &marks, nu: data.chars().nu(v), m };
        project_node(
            &sys,
            &dm,
            l,
            &mut out.z[v * l * m..(v + 1) * l * m],
            &mut out.u[v * nj * l..(v + 1) * nj * l],
            &mut dn,
        );
        for (i, c) in tree.children(v).enumerate() {
            out.dn[c * l..(c + 1) * l].copy_from_slice(&dn[i * l..(i + 1) * l]);
        }
    }
    out.residual = residuals(mart, data, &out);
    Ok(out)
}

fn residuals(mart: &AdaptedProcess, data: &StandardData, d: &Decomposition) -> ResidualReport {
    let tree = data.tree();
    let l = mart.dim();
    let (m, nj) = (data.dim_x(), data.n_marks());
    let mut rep = ResidualReport::default();
    let mut rebuilt = mart.clone();
    for v in 0..tree.node_count() {
        if tree.is_leaf(v) {
            continue;
        }
        let z = &d.z[v * l * m..(v + 1) * l * m];
        let u = &d.u[v * nj * l..(v + 1) * nj * l];
        let nu = data.chars().nu(v);
        let mut second = 0.0;
        let mut n_second = 0.0;
        for a in 0..l {
            let mut mean = 0.0;
            let mut cov = vec![0.0; m];
            let mut by_mark = vec![0.0; nj];
            for c in tree.children(v) {
                let q = tree.prob(c);
                let dn = d.dn[c * l + a];
                mean += q * dn;
                for b in 0..m {
                    cov[b] += q * dn * tree.dx(c)[b];
                }
                if let Some(j) = tree.mark(c) {
                    by_mark[j] += q * dn;
                }
                second += q * (mart.at(c)[a] - mart.at(v)[a]).powi(2);
                n_second += q * dn * dn;
            }
            rep.martingale = rep.martingale.max(mean.abs());
            for x in cov.iter().chain(&by_mark) {
                rep.orthogonality = rep.orthogonality.max(x.abs());
            }
        }
        let qv = data.chars().d_qv(v);
        let (mut z_part, mut z_abs) = (0.0, 0.0);
        for a in 0..l {
            for b in 0..m {
                for e in 0..m {
                    let t = z[a * m + b] * qv[b * m + e] * z[a * m + e];
                    z_part += t;
                    z_abs += t.abs();
                }
            }
        }
        let dc = data.dc(tree.level_of(v));
        let u_part = tnorm_sq(u, data, v) * dc;
        // relative to the terms summed, which cancel when ΔX∘ is nearly degenerate
        let scale = 1.0f64.max(second).max(z_abs).max(u_part);
        rep.pythagoras = rep.pythagoras.max((second - z_part - u_part - n_second).abs() / scale);
        for c in tree.children(v) {
            for a in 0..l {
                let mut inc = d.dn[c * l + a];
                for b in 0..m {
                    inc += z[a * m + b] * tree.dx(c)[b];
                }
                for j in 0..nj {
                    inc += u[j * l + a] * (f64::from(tree.mark(c) == Some(j)) - nu[j]);
                }
                let value = rebuilt.at(v)[a] + inc;
                rebuilt.at_mut(c)[a] = value;
                rep.reconstruction = rep.reconstruction.max((value - mart.at(c)[a]).abs());
            }
        }
    }
    rep
}
