//! Discrete filtrations as finite scenario trees, the driver families built on
//! them, and the standard data tuples handed to the solver.

mod coupling;
mod data;
mod generator;

pub use coupling::{coupled_walks, path_rng, CoupledWalks};
pub use data::{
    build_deterministic_data, build_from_tree, build_random_walk_data, tnorm_sq, validate_conditions,
    Characteristics, ConditionConfig, ConditionReport, DataDiagnostics, DataDocument, DriverComponent,
    RandomWalkSpec, StandardData, Terminal,
};
pub use generator::{Generator, Lipschitz, NodeContext, Payoff};

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Marker for the root's missing parent.
pub const NO_PARENT: usize = usize::MAX;

/// One outgoing edge of a node, as produced by a tree builder.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub prob: f64,
    /// Increment of the continuous driver along the edge.
    pub dx: Vec<f64>,
    /// Index into the mark space, if the edge carries a jump.
    pub mark: Option<usize>,
}

/// Finite scenario tree; nodes are stored level by level and the children
/// of a node are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    dim_x: usize,
    times: Vec<f64>,
    level_start: Vec<usize>,
    parent: Vec<usize>,
    prob: Vec<f64>,
    path_prob: Vec<f64>,
    child_start: Vec<usize>,
    dx: Vec<f64>,
    mark: Vec<Option<usize>>,
}

impl ScenarioTree {
    /// Breadth-first construction; `branches(node, level)` lists the edges
    /// leaving a node at `level < n`, with `n = times.len() - 1`.
    pub fn build(
        times: Vec<f64>,
        dim_x: usize,
        mut branches: impl FnMut(usize, usize) -> Result<Vec<Branch>>,
    ) -> Result<Self> {
        if times.len() < 2 {
            return invalid("a tree needs at least one step");
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return invalid("time grid must start at 0 and increase strictly");
        }
        let n = times.len() - 1;
        let mut tree = ScenarioTree {
            dim_x,
            times,
            level_start: vec![0, 1],
            parent: vec![NO_PARENT],
            prob: vec![1.0],
            path_prob: vec![1.0],
            child_start: Vec::new(),
            dx: vec![0.0; dim_x],
            mark: vec![None],
        };
        for level in 0..n {
            let (lo, hi) = (tree.level_start[level], tree.level_start[level + 1]);
            for node in lo..hi {
                tree.child_start.push(tree.parent.len());
                let edges = branches(node, level)?;
                if edges.is_empty() {
                    return Err(Error::Node { node, reason: "interior node without children".into() });
                }
                let mut total = 0.0;
                for e in edges {
                    if !(e.prob > 0.0 && e.prob <= 1.0) {
                        return Err(Error::Node { node, reason: format!("transition probability {}", e.prob) });
                    }
                    if e.dx.len() != dim_x {
                        return Err(Error::Dimension { expected: dim_x, got: e.dx.len() });
                    }
                    total += e.prob;
                    tree.parent.push(node);
                    tree.prob.push(e.prob);
                    tree.path_prob.push(tree.path_prob[node] * e.prob);
                    tree.dx.extend_from_slice(&e.dx);
                    tree.mark.push(e.mark);
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Node { node, reason: format!("probabilities sum to {total}") });
                }
            }
            tree.level_start.push(tree.parent.len());
        }
        let nodes = tree.parent.len();
        tree.child_start.extend(std::iter::repeat(nodes).take(tree.level_start[n + 1] - tree.level_start[n] + 1));
        Ok(tree)
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    /// Node ids at level `i`.
    pub fn level(&self, i: usize) -> std::ops::Range<usize> {
        self.level_start[i]..self.level_start[i + 1]
    }

    pub fn leaves(&self) -> std::ops::Range<usize> {
        self.level(self.steps())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    pub fn level_of(&self, node: usize) -> usize {
        self.level_start.partition_point(|&s| s <= node) - 1
    }

    pub fn parent(&self, node: usize) -> usize {
        self.parent[node]
    }

    pub fn children(&self, node: usize) -> std::ops::Range<usize> {
        self.child_start[node]..self.child_start[node + 1]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children(node).is_empty()
    }

    /// Transition probability from the parent.
    pub fn prob(&self, node: usize) -> f64 {
        self.prob[node]
    }

    pub fn path_prob(&self, node: usize) -> f64 {
        self.path_prob[node]
    }

    /// Continuous-driver increment on the edge into `node`.
    pub fn dx(&self, node: usize) -> &[f64] {
        &self.dx[node * self.dim_x..(node + 1) * self.dim_x]
    }

    pub fn mark(&self, node: usize) -> Option<usize> {
        self.mark[node]
    }

    /// Root-to-node chain, root first.
    pub fn ancestry(&self, node: usize) -> Vec<usize> {
        let mut chain = vec![node];
        let mut v = node;
        while self.parent[v] != NO_PARENT {
            v = self.parent[v];
            chain.push(v);
        }
        chain.reverse();
        chain
    }

    pub fn leaf_prob_total(&self) -> f64 {
        self.leaves().map(|v| self.path_prob[v]).sum()
    }

    /// Largest mark index referenced by an edge, plus one.
    pub(crate) fn marks_used(&self) -> usize {
        self.mark.iter().flatten().map(|&j| j + 1).max().unwrap_or(0)
    }

    /// Serialisable edge list.
    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            dim_x: self.dim_x,
            times: self.times.clone(),
            edges: (1..self.node_count())
                .map(|v| EdgeDocument { parent: self.parent[v], prob: self.prob[v], dx: self.dx(v).to_vec(), mark: self.mark[v] })
                .collect(),
        }
    }

    pub fn from_document(doc: &TreeDocument) -> Result<Self> {
        let mut out: Vec<Vec<Branch>> = vec![Vec::new(); doc.edges.len() + 1];
        for (i, e) in doc.edges.iter().enumerate() {
            if e.parent >= i + 1 {
                return invalid(format!("edge {i} refers to parent {} not yet defined", e.parent));
            }
            out[e.parent].push(Branch { prob: e.prob, dx: e.dx.clone(), mark: e.mark });
        }
        let tree = Self::build(doc.times.clone(), doc.dim_x, |node, _| Ok(std::mem::take(&mut out[node])))?;
        let same = tree.node_count() == doc.edges.len() + 1
            && doc.edges.iter().enumerate().all(|(i, e)| tree.parent[i + 1] == e.parent);
        if !same {
            return invalid("edge list does not describe a layered tree");
        }
        Ok(tree)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDocument {
    pub parent: usize,
    pub prob: f64,
    pub dx: Vec<f64>,
    pub mark: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub dim_x: usize,
    pub times: Vec<f64>,
    pub edges: Vec<EdgeDocument>,
}

/// Finite set of nonzero, distinct jump marks in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkSpace {
    dim: usize,
    marks: Vec<Vec<f64>>,
}

impl MarkSpace {
    pub fn new(marks: Vec<Vec<f64>>) -> Result<Self> {
        let dim = marks.first().map_or(1, Vec::len);
        for (i, m) in marks.iter().enumerate() {
            if m.len() != dim {
                return Err(Error::Dimension { expected: dim, got: m.len() });
            }
            if m.iter().all(|&x| x == 0.0) {
                return invalid(format!("mark {i} is zero"));
            }
            if !m.iter().all(|x| x.is_finite()) {
                return invalid(format!("mark {i} is not finite"));
            }
            if marks[..i].contains(m) {
                return invalid(format!("mark {i} repeats an earlier mark"));
            }
        }
        Ok(MarkSpace { dim, marks })
    }

    pub fn scalar(marks: &[f64]) -> Result<Self> {
        Self::new(marks.iter().map(|&x| vec![x]).collect())
    }

    pub fn empty() -> Self {
        MarkSpace { dim: 1, marks: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn mark(&self, j: usize) -> &[f64] {
        &self.marks[j]
    }
}
