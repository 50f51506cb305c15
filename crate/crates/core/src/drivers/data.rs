//! Standard data tuples: tree, drivers, integrator, terminal value and generator.

use super::generator::{Generator, NodeContext, Payoff};
use super::{Branch, MarkSpace, ScenarioTree, TreeDocument};
use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Which driver the terminal payoff reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriverComponent {
    #[default]
    Continuous,
    Jump,
}

/// Terminal condition `ξ = g(X_T)` for scalar drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    pub payoff: Payoff,
    #[serde(default)]
    pub driver: DriverComponent,
}

impl Terminal {
    pub fn continuous(payoff: Payoff) -> Self {
        Terminal { payoff, driver: DriverComponent::Continuous }
    }

    pub fn jump(payoff: Payoff) -> Self {
        Terminal { payoff, driver: DriverComponent::Jump }
    }

    pub fn eval(&self, x_circ: f64, x_nat: f64) -> f64 {
        match self.driver {
            DriverComponent::Continuous => self.payoff.eval(x_circ),
            DriverComponent::Jump => self.payoff.eval(x_nat),
        }
    }
}

/// Scaled random walk `±√(T/k)` with an independent Bernoulli jump per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomWalkSpec {
    pub k: usize,
    pub horizon: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub marks: Vec<f64>,
    pub generator: Generator,
    pub terminal: Terminal,
}

impl RandomWalkSpec {
    pub fn step(&self) -> f64 {
        self.horizon / self.k as f64
    }

    /// Per-step probability of a jump (all marks together).
    pub fn jump_prob(&self) -> f64 {
        if self.marks.is_empty() {
            0.0
        } else {
            self.lambda * self.step()
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.k == 0 {
            return invalid("k must be at least 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return invalid("horizon must be positive");
        }
        if !(self.lambda >= 0.0) {
            return invalid("jump intensity must be nonnegative");
        }
        if self.lambda > 0.0 && self.marks.is_empty() {
            return invalid("positive jump intensity needs at least one mark");
        }
        if self.jump_prob() >= 1.0 {
            return invalid(format!("jump probability λT/k = {} must be below 1", self.jump_prob()));
        }
        MarkSpace::scalar(&self.marks)?;
        Ok(())
    }

    /// Edges leaving any node: for each jump option (none, then each mark)
    /// a down and an up move of the continuous walk.
    pub fn branches(&self) -> Vec<Branch> {
        let h = self.step().sqrt();
        let p = self.jump_prob();
        let mut out = Vec::with_capacity(2 * (self.marks.len() + 1));
        let options = std::iter::once((None, 1.0 - p))
            .chain((0..self.marks.len()).map(|j| (Some(j), p / self.marks.len() as f64)))
            .filter(|&(_, q)| q > 0.0);
        for (mark, q) in options {
            for s in [-1.0, 1.0] {
                out.push(Branch { prob: 0.5 * q, dx: vec![s * h], mark });
            }
        }
        out
    }
}

/// Node-indexed predictable characteristics of the step leaving each node.
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristics {
    dim_x: usize,
    n_marks: usize,
    d_qv: Vec<f64>,
    c2: Vec<f64>,
    nu: Vec<f64>,
    kernel: Vec<f64>,
    zeta: Vec<f64>,
    alpha: Vec<f64>,
    d_a: Vec<f64>,
    a: Vec<f64>,
    phi: f64,
    phi_node: usize,
}

impl Characteristics {
    /// `Δ⟨X∘⟩ = E[ΔX∘ ΔX∘ᵀ | node]`, row-major.
    pub fn d_qv(&self, node: usize) -> &[f64] {
        let m2 = self.dim_x * self.dim_x;
        &self.d_qv[node * m2..(node + 1) * m2]
    }

    /// `c² = Δ⟨X∘⟩/ΔC`.
    pub fn c2(&self, node: usize) -> &[f64] {
        let m2 = self.dim_x * self.dim_x;
        &self.c2[node * m2..(node + 1) * m2]
    }

    /// Compensator atoms `ν({t}, {x_j})`.
    pub fn nu(&self, node: usize) -> &[f64] {
        &self.nu[node * self.n_marks..(node + 1) * self.n_marks]
    }

    pub fn kernel(&self, node: usize) -> &[f64] {
        &self.kernel[node * self.n_marks..(node + 1) * self.n_marks]
    }

    /// `ζ♮ = ν({t} × E)`.
    pub fn zeta(&self, node: usize) -> f64 {
        self.zeta[node]
    }

    pub fn alpha(&self, node: usize) -> f64 {
        self.alpha[node]
    }

    /// `ΔA = α² ΔC` for the step leaving `node`.
    pub fn d_a(&self, node: usize) -> f64 {
        self.d_a[node]
    }

    /// `A` at the node's time.
    pub fn a(&self, node: usize) -> f64 {
        self.a[node]
    }

    /// `Φ = max ΔA`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Node where `Φ` is attained.
    pub fn phi_node(&self) -> usize {
        self.phi_node
    }
}

/// The tuple `(filtration, T, X∘, X♮, C, ξ, f)` on a finite tree.
#[derive(Debug, Clone)]
pub struct StandardData {
    tree: ScenarioTree,
    marks: MarkSpace,
    dc: Vec<f64>,
    xi: Vec<f64>,
    dim_y: usize,
    generator: Generator,
    alpha_floor: f64,
    x_circ: Vec<f64>,
    x_nat: Vec<f64>,
    chars: Characteristics,
    walk: Option<RandomWalkSpec>,
}

/// Assembles data from an explicit tree. `xi` lists the terminal vector of
/// every leaf in node order.
pub fn build_from_tree(
    tree: ScenarioTree,
    marks: MarkSpace,
    dc: Vec<f64>,
    xi: Vec<Vec<f64>>,
    generator: Generator,
) -> Result<StandardData> {
    let n = tree.steps();
    if dc.len() != n {
        return Err(Error::Dimension { expected: n, got: dc.len() });
    }
    if dc.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
        return invalid("increments of C must be finite and nonnegative");
    }
    if xi.len() != tree.leaf_count() {
        return Err(Error::Dimension { expected: tree.leaf_count(), got: xi.len() });
    }
    let dim_y = xi.first().map_or(1, Vec::len);
    if dim_y == 0 {
        return invalid("terminal value must have positive dimension");
    }
    if let Some(bad) = xi.iter().find(|v| v.len() != dim_y) {
        return Err(Error::Dimension { expected: dim_y, got: bad.len() });
    }
    if xi.iter().flatten().any(|x| !x.is_finite()) {
        return invalid("terminal value is not finite");
    }
    if tree.marks_used() > marks.len() {
        return invalid(format!("tree uses {} marks but the mark space has {}", tree.marks_used(), marks.len()));
    }
    check_driver(&tree)?;
    let m = tree.dim_x();
    let d = marks.dim();
    let mut x_circ = vec![0.0; tree.node_count() * m];
    let mut nu_tmp = vec![0.0; marks.len()];
    let mut x_nat = vec![0.0; tree.node_count() * d];
    for v in 0..tree.node_count() {
        for c in tree.children(v) {
            for a in 0..m {
                x_circ[c * m + a] = x_circ[v * m + a] + tree.dx(c)[a];
            }
        }
        if tree.is_leaf(v) {
            continue;
        }
        nu_tmp.fill(0.0);
        for c in tree.children(v) {
            if let Some(j) = tree.mark(c) {
                nu_tmp[j] += tree.prob(c);
            }
        }
        for c in tree.children(v) {
            for a in 0..d {
                let comp: f64 = (0..marks.len()).map(|j| nu_tmp[j] * marks.mark(j)[a]).sum();
                let jump = tree.mark(c).map_or(0.0, |j| marks.mark(j)[a]);
                x_nat[c * d + a] = x_nat[v * d + a] + jump - comp;
            }
        }
    }
    let placeholder = Characteristics {
        dim_x: m,
        n_marks: marks.len(),
        d_qv: Vec::new(),
        c2: Vec::new(),
        nu: Vec::new(),
        kernel: Vec::new(),
        zeta: Vec::new(),
        alpha: Vec::new(),
        d_a: Vec::new(),
        a: Vec::new(),
        phi: 0.0,
        phi_node: 0,
    };
    let mut data = StandardData {
        tree,
        marks,
        dc,
        xi: xi.into_iter().flatten().collect(),
        dim_y,
        generator,
        alpha_floor: 0.0,
        x_circ,
        x_nat,
        chars: placeholder,
        walk: None,
    };
    data.chars = data.predictable_brackets()?;
    Ok(data)
}

/// `X∘` must be a martingale orthogonal to every jump indicator.
fn check_driver(tree: &ScenarioTree) -> Result<()> {
    let m = tree.dim_x();
    let classes = tree.marks_used() + 1;
    let mut acc = vec![0.0; classes * m];
    for v in 0..tree.node_count() {
        if tree.is_leaf(v) {
            continue;
        }
        acc.fill(0.0);
        let mut scale: f64 = 0.0;
        for c in tree.children(v) {
            let class = tree.mark(c).map_or(0, |j| j + 1);
            for a in 0..m {
                acc[class * m + a] += tree.prob(c) * tree.dx(c)[a];
                scale = scale.max(tree.dx(c)[a].abs());
            }
        }
        if acc.iter().any(|x| x.abs() > 1e-12 * scale.max(1.0)) {
            return Err(Error::Node {
                node: v,
                reason: "continuous driver increment must have zero mean given each jump outcome".into(),
            });
        }
    }
    Ok(())
}

pub fn build_random_walk_data(spec: &RandomWalkSpec) -> Result<StandardData> {
    spec.check()?;
    let k = spec.k;
    let times: Vec<f64> = (0..=k).map(|i| i as f64 * spec.horizon / k as f64).collect();
    let edges = spec.branches();
    let tree = ScenarioTree::build(times, 1, |_, _| Ok(edges.clone()))?;
    let marks = MarkSpace::scalar(&spec.marks)?;
    let dc = vec![spec.step(); k];
    // terminal values need the driver paths, so assemble with a zero ξ first
    let zeros = vec![vec![0.0]; tree.leaf_count()];
    let mut data = build_from_tree(tree, marks, dc, zeros, spec.generator.clone())?;
    let leaves = data.tree.leaves();
    for (i, v) in leaves.clone().enumerate() {
        data.xi[i] = spec.terminal.eval(data.x_circ(v)[0], data.x_nat(v)[0]);
    }
    data.walk = Some(spec.clone());
    Ok(data)
}

/// Single-branch tree with trivial drivers: the deterministic scheme.
pub fn build_deterministic_data(n: usize, horizon: f64, generator: Generator, xi: Vec<f64>) -> Result<StandardData> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return invalid("horizon must be positive");
    }
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * horizon / n as f64).collect();
    let tree = ScenarioTree::build(times, 1, |_, _| Ok(vec![Branch { prob: 1.0, dx: vec![0.0], mark: None }]))?;
    build_from_tree(tree, MarkSpace::empty(), vec![horizon / n as f64; n], vec![xi], generator)
}

impl StandardData {
    pub fn tree(&self) -> &ScenarioTree {
        &self.tree
    }

    pub fn marks(&self) -> &MarkSpace {
        &self.marks
    }

    pub fn horizon(&self) -> f64 {
        *self.tree.times().last().expect("nonempty grid")
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn dim_x(&self) -> usize {
        self.tree.dim_x()
    }

    pub fn n_marks(&self) -> usize {
        self.marks.len()
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// Random-walk parameters, if the data came from that builder.
    pub fn walk(&self) -> Option<&RandomWalkSpec> {
        self.walk.as_ref()
    }

    /// Increment of `C` over step `i` (from level `i` to `i + 1`).
    pub fn dc(&self, step: usize) -> f64 {
        self.dc[step]
    }

    pub fn dcs(&self) -> &[f64] {
        &self.dc
    }

    /// Terminal value at a leaf node.
    pub fn xi(&self, leaf: usize) -> &[f64] {
        let i = leaf - self.tree.leaves().start;
        &self.xi[i * self.dim_y..(i + 1) * self.dim_y]
    }

    pub fn x_circ(&self, node: usize) -> &[f64] {
        let m = self.dim_x();
        &self.x_circ[node * m..(node + 1) * m]
    }

    pub fn x_nat(&self, node: usize) -> &[f64] {
        let d = self.marks.dim();
        &self.x_nat[node * d..(node + 1) * d]
    }

    /// `ΔX♮` on the edge into `node`.
    pub fn dx_nat(&self, node: usize) -> Vec<f64> {
        let p = self.tree.parent(node);
        self.x_nat(node).iter().zip(self.x_nat(p)).map(|(a, b)| a - b).collect()
    }

    pub fn chars(&self) -> &Characteristics {
        &self.chars
    }

    pub fn alpha_floor(&self) -> f64 {
        self.alpha_floor
    }

    /// Raises `α` to at least `floor` everywhere.
    pub fn with_alpha_floor(mut self, floor: f64) -> Result<Self> {
        if !(floor >= 0.0 && floor.is_finite()) {
            return invalid("alpha floor must be finite and nonnegative");
        }
        self.alpha_floor = floor;
        self.chars = self.predictable_brackets()?;
        Ok(self)
    }

    pub fn context(&self, node: usize) -> NodeContext<'_> {
        let level = self.tree.level_of(node);
        NodeContext {
            t: self.tree.times()[(level + 1).min(self.tree.steps())],
            dc: self.dc.get(level).copied().unwrap_or(0.0),
            c2: self.chars.c2(node),
            kernel: self.chars.kernel(node),
            nu: self.chars.nu(node),
            zeta: self.chars.zeta(node),
        }
    }

    /// Recomputes every derived predictable characteristic from the tree.
    pub fn predictable_brackets(&self) -> Result<Characteristics> {
        let tree = &self.tree;
        let nodes = tree.node_count();
        let m = tree.dim_x();
        let nm = self.marks.len();
        let mut ch = Characteristics {
            dim_x: m,
            n_marks: nm,
            d_qv: vec![0.0; nodes * m * m],
            c2: vec![0.0; nodes * m * m],
            nu: vec![0.0; nodes * nm],
            kernel: vec![0.0; nodes * nm],
            zeta: vec![0.0; nodes],
            alpha: vec![0.0; nodes],
            d_a: vec![0.0; nodes],
            a: vec![0.0; nodes],
            phi: 0.0,
            phi_node: 0,
        };
        for v in 0..nodes {
            if tree.is_leaf(v) {
                continue;
            }
            let dc = self.dc[tree.level_of(v)];
            for c in tree.children(v) {
                let q = tree.prob(c);
                let dx = tree.dx(c);
                for a in 0..m {
                    for b in 0..m {
                        ch.d_qv[v * m * m + a * m + b] += q * dx[a] * dx[b];
                    }
                }
                if let Some(j) = tree.mark(c) {
                    ch.nu[v * nm + j] += q;
                }
            }
            ch.zeta[v] = ch.nu[v * nm..(v + 1) * nm].iter().sum();
            if dc > 0.0 {
                for i in 0..m * m {
                    ch.c2[v * m * m + i] = ch.d_qv[v * m * m + i] / dc;
                }
                for j in 0..nm {
                    ch.kernel[v * nm + j] = ch.nu[v * nm + j] / dc;
                }
            } else if ch.zeta[v] > 0.0 || ch.d_qv[v * m * m..(v + 1) * m * m].iter().any(|&x| x != 0.0) {
                return Err(Error::DegenerateBracket { node: v });
            }
            let ctx = NodeContext {
                t: tree.times()[tree.level_of(v) + 1],
                dc,
                c2: &ch.c2[v * m * m..(v + 1) * m * m],
                kernel: &ch.kernel[v * nm..(v + 1) * nm],
                nu: &ch.nu[v * nm..(v + 1) * nm],
                zeta: ch.zeta[v],
            };
            let alpha = self.generator.lipschitz(&ctx).alpha().max(self.alpha_floor);
            ch.alpha[v] = alpha;
            ch.d_a[v] = alpha * alpha * dc;
            if ch.d_a[v] > ch.phi {
                ch.phi = ch.d_a[v];
                ch.phi_node = v;
            }
            for c in tree.children(v) {
                ch.a[c] = ch.a[v] + ch.d_a[v];
            }
        }
        Ok(ch)
    }

    pub fn to_document(&self) -> DataDocument {
        let leaves = self.tree.leaves();
        DataDocument {
            tree: self.tree.to_document(),
            marks: self.marks.clone(),
            dc: self.dc.clone(),
            xi: leaves.map(|v| self.xi(v).to_vec()).collect(),
            generator: self.generator.clone(),
            alpha_floor: self.alpha_floor,
        }
    }

    pub fn from_document(doc: &DataDocument) -> Result<Self> {
        let tree = ScenarioTree::from_document(&doc.tree)?;
        let data = build_from_tree(tree, doc.marks.clone(), doc.dc.clone(), doc.xi.clone(), doc.generator.clone())?;
        if doc.alpha_floor > 0.0 {
            return data.with_alpha_floor(doc.alpha_floor);
        }
        Ok(data)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("plain document serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

/// Serialised form of [`StandardData`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDocument {
    pub tree: TreeDocument,
    pub marks: MarkSpace,
    pub dc: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
    pub generator: Generator,
    #[serde(default)]
    pub alpha_floor: f64,
}

/// `⦀V⦀² = Σ_j K_j ‖V_j − ν̂(V)‖² + (1 − ζ) ΔC ‖Σ_j K_j V_j‖²` with
/// `ν̂(V) = Σ_j ν_j V_j`; `v` is mark-major `J × ℓ`.
pub fn tnorm_sq(v: &[f64], data: &StandardData, node: usize) -> f64 {
    let ch = data.chars();
    let dc = data.dc.get(data.tree.level_of(node)).copied().unwrap_or(0.0);
    tnorm_sq_raw(v, ch.nu(node), ch.kernel(node), dc, ch.zeta(node), data.dim_y)
}

pub(crate) fn tnorm_sq_raw(v: &[f64], nu: &[f64], kernel: &[f64], dc: f64, zeta: f64, l: usize) -> f64 {
    let mut out = 0.0;
    for i in 0..l {
        let hat: f64 = nu.iter().enumerate().map(|(j, n)| n * v[j * l + i]).sum();
        let kv: f64 = kernel.iter().enumerate().map(|(j, k)| k * v[j * l + i]).sum();
        let spread: f64 = kernel.iter().enumerate().map(|(j, k)| k * (v[j * l + i] - hat).powi(2)).sum();
        out += spread + (1.0 - zeta) * dc * kv * kv;
    }
    out
}

/// Diagnostics thresholds for [`validate_conditions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionConfig {
    pub a_bar: f64,
    /// Declared bound on the jumps of `A`; `None` accepts the data's own `Φ`.
    pub phi: Option<f64>,
    /// Exponent excess in the moment proxy `E‖ξ‖^{2+δ}`.
    pub delta: f64,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        ConditionConfig { a_bar: 1.0, phi: None, delta: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataDiagnostics {
    pub a_terminal: f64,
    pub a_pass: bool,
    pub phi: f64,
    /// Node where the largest `ΔA` sits, reported when the declared `Φ` fails.
    pub phi_violation_node: Option<usize>,
    pub phi_pass: bool,
    /// Largest deviation among node probability sums, `ζ♮ ≤ 1` and the
    /// compensator/brute-force agreement.
    pub consistency_residual: f64,
    pub consistency_pass: bool,
    pub xi_moment: f64,
    pub l2_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub items: Vec<DataDiagnostics>,
    pub xi_moment_max: f64,
    pub pass: bool,
}

/// Pure report on `A_T ≤ Ā`, `ΔA ≤ Φ`, node consistency, the `ξ` moment proxy
/// and, when `xi_limit` evaluates the limit terminal value on a leaf, the
/// terminal `L²` gap.
pub fn validate_conditions(
    seq: &[&StandardData],
    cfg: &ConditionConfig,
    xi_limit: Option<&dyn Fn(&StandardData, usize) -> Vec<f64>>,
) -> ConditionReport {
    let items: Vec<DataDiagnostics> = seq
        .iter()
        .map(|data| {
            let tree = data.tree();
            let ch = data.chars();
            let a_terminal = tree.leaves().map(|v| ch.a(v)).fold(0.0, f64::max);
            let phi = ch.phi();
            let phi_pass = cfg.phi.map_or(true, |declared| phi <= declared * (1.0 + 1e-12));
            let mut residual: f64 = 0.0;
            for v in 0..tree.node_count() {
                if tree.is_leaf(v) {
                    continue;
                }
                let total: f64 = tree.children(v).map(|c| tree.prob(c)).sum();
                residual = residual.max((total - 1.0).abs());
                residual = residual.max(ch.zeta(v) - 1.0);
                let jump_mass: f64 = tree.children(v).filter(|&c| tree.mark(c).is_some()).map(|c| tree.prob(c)).sum();
                residual = residual.max((jump_mass - ch.zeta(v)).abs());
            }
            let p = 2.0 + cfg.delta;
            let xi_moment: f64 = tree
                .leaves()
                .map(|v| tree.path_prob(v) * data.xi(v).iter().map(|x| x * x).sum::<f64>().powf(p / 2.0))
                .sum();
            let l2_gap = xi_limit.map(|lim| {
                tree.leaves()
                    .map(|v| {
                        let want = lim(data, v);
                        tree.path_prob(v) * data.xi(v).iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                    })
                    .sum::<f64>()
                    .sqrt()
            });
            DataDiagnostics {
                a_terminal,
                a_pass: a_terminal <= cfg.a_bar,
                phi,
                phi_violation_node: (!phi_pass).then(|| ch.phi_node()),
                phi_pass,
                consistency_residual: residual,
                consistency_pass: residual <= 1e-12,
                xi_moment,
                l2_gap,
            }
        })
        .collect();
    let xi_moment_max = items.iter().map(|d| d.xi_moment).fold(0.0, f64::max);
    let pass = items.iter().all(|d| d.a_pass && d.phi_pass && d.consistency_pass);
    ConditionReport { items, xi_moment_max, pass }
}
