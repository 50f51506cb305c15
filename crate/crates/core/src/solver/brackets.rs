//! Square and angle brackets of the solution components.

use super::{AdaptedProcess, Components};
use crate::drivers::StandardData;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BracketKind {
    /// `[Y]`, `ℓ × ℓ`.
    Y,
    /// `[Z·X∘]`.
    ZX,
    /// `[U⋆μ̃]`.
    UMu,
    /// `[Z·X∘ + U⋆μ̃]`.
    ZXPlusUMu,
    /// `[N]`.
    N,
    /// `[Y, X∘]`, `ℓ × m`.
    YX,
    /// `[Y, X♮]`, `ℓ × d`.
    YXnat,
    /// `[Y, N]`, `ℓ × ℓ`.
    YN,
}

impl BracketKind {
    pub const ALL: [BracketKind; 8] = [
        BracketKind::Y,
        BracketKind::ZX,
        BracketKind::UMu,
        BracketKind::ZXPlusUMu,
        BracketKind::N,
        BracketKind::YX,
        BracketKind::YXnat,
        BracketKind::YN,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BracketKind::Y => "Y",
            BracketKind::ZX => "ZX",
            BracketKind::UMu => "UMu",
            BracketKind::ZXPlusUMu => "ZX+UMu",
            BracketKind::N => "N",
            BracketKind::YX => "Y,X",
            BracketKind::YXnat => "Y,Xnat",
            BracketKind::YN => "Y,N",
        }
    }

    pub(crate) fn index(self) -> usize {
        BracketKind::ALL.iter().position(|&k| k == self).expect("listed")
    }
}

/// The six square brackets that converge jointly with the paths.
pub const SQUARE_KINDS: [BracketKind; 6] =
    [BracketKind::Y, BracketKind::ZXPlusUMu, BracketKind::N, BracketKind::YX, BracketKind::YXnat, BracketKind::YN];

/// The seven angle brackets that converge jointly with the paths.
pub const ANGLE_KINDS: [BracketKind; 7] = [
    BracketKind::Y,
    BracketKind::ZX,
    BracketKind::UMu,
    BracketKind::N,
    BracketKind::YX,
    BracketKind::YXnat,
    BracketKind::YN,
];

/// Node-indexed running brackets for every [`BracketKind`].
#[derive(Debug, Clone)]
pub struct Brackets {
    square: Vec<AdaptedProcess>,
    angle: Vec<AdaptedProcess>,
}

impl Brackets {
    /// Pathwise `[·]`: running sum of products of jumps.
    pub fn square(&self, kind: BracketKind) -> &AdaptedProcess {
        &self.square[kind.index()]
    }

    /// Predictable `⟨·⟩`: running sum of node-conditional expectations of
    /// the same products.
    pub fn angle(&self, kind: BracketKind) -> &AdaptedProcess {
        &self.angle[kind.index()]
    }
}

/// Edge increments `(ΔY, ΔZX, ΔUMu, ΔN, ΔX∘, ΔX♮)` into `c` from its parent.
pub(crate) struct EdgeJumps {
    pub dy: Vec<f64>,
    pub dzx: Vec<f64>,
    pub dumu: Vec<f64>,
    pub dn: Vec<f64>,
    pub dx: Vec<f64>,
    pub dxn: Vec<f64>,
}

impl EdgeJumps {
    pub(crate) fn product(&self, kind: BracketKind) -> Vec<f64> {
        let outer = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect() };
        match kind {
            BracketKind::Y => outer(&self.dy, &self.dy),
            BracketKind::ZX => outer(&self.dzx, &self.dzx),
            BracketKind::UMu => outer(&self.dumu, &self.dumu),
            BracketKind::ZXPlusUMu => {
                let s: Vec<f64> = self.dzx.iter().zip(&self.dumu).map(|(a, b)| a + b).collect();
                outer(&s, &s)
            }
            BracketKind::N => outer(&self.dn, &self.dn),
            BracketKind::YX => outer(&self.dy, &self.dx),
            BracketKind::YXnat => outer(&self.dy, &self.dxn),
            BracketKind::YN => outer(&self.dy, &self.dn),
        }
    }
}

pub(crate) fn edge_jumps(s: &Components, data: &StandardData, v: usize, c: usize) -> EdgeJumps {
    let tree = data.tree();
    let (l, m) = (s.dim_y, s.dim_x);
    let z = s.z(v);
    let u = s.u(v);
    let nu = data.chars().nu(v);
    let dx = tree.dx(c).to_vec();
    let dzx = (0..l).map(|a| (0..m).map(|b| z[a * m + b] * dx[b]).sum()).collect();
    let dumu = (0..l)
        .map(|a| nu.iter().enumerate().map(|(j, nj)| u[j * l + a] * (f64::from(tree.mark(c) == Some(j)) - nj)).sum())
        .collect();
    EdgeJumps {
        dy: s.y(c).iter().zip(s.y(v)).map(|(a, b)| a - b).collect(),
        dzx,
        dumu,
        dn: s.dn(c).to_vec(),
        dx,
        dxn: data.dx_nat(c),
    }
}

pub fn brackets(s: &Components, data: &StandardData) -> Brackets {
    let tree = data.tree();
    let nodes = tree.node_count();
    let (l, m, d) = (s.dim_y, s.dim_x, data.marks().dim());
    let dims = |k: BracketKind| match k {
        BracketKind::YX => l * m,
        BracketKind::YXnat => l * d,
        _ => l * l,
    };
    let mut square: Vec<AdaptedProcess> = BracketKind::ALL.iter().map(|&k| AdaptedProcess::zeros(dims(k), nodes)).collect();
    let mut angle = square.clone();
    for v in 0..nodes {
        if tree.is_leaf(v) {
            continue;
        }
        let jumps: Vec<(usize, EdgeJumps)> = tree.children(v).map(|c| (c, edge_jumps(s, data, v, c))).collect();
        for (ki, &kind) in BracketKind::ALL.iter().enumerate() {
            let w = dims(kind);
            let mut mean = vec![0.0; w];
            let products: Vec<Vec<f64>> = jumps.iter().map(|(_, j)| j.product(kind)).collect();
            for ((c, _), prod) in jumps.iter().zip(&products) {
                let q = tree.prob(*c);
                for i in 0..w {
                    mean[i] += q * prod[i];
                }
            }
            for ((c, _), prod) in jumps.iter().zip(&products) {
                for i in 0..w {
                    square[ki].at_mut(*c)[i] = square[ki].at(v)[i] + prod[i];
                    angle[ki].at_mut(*c)[i] = angle[ki].at(v)[i] + mean[i];
                }
            }
        }
    }
    Brackets { square, angle }
}
