//! The doubly-indexed experiment: rows are driver resolutions `k`, columns
//! Picard indices `p`, plus each row's fixed point.

use super::config::ExperimentConfig;
use super::estimators::{scenario_distances, summarize, DistanceReport, ScenarioDistances};
use super::reference::{Problem, Reference, ReferenceScenario};
use crate::constants::{default_beta_hat, m_star, picard_tail_bound, ContractionCertificate};
use crate::drivers::{build_random_walk_data, path_rng, RandomWalkSpec, StandardData};
use crate::error::{Error, Result};
use crate::limits::{moore_osgood_a, moore_osgood_b, DoubleTable, MooreOsgoodVerdict, TolSchedule};
use crate::solver::{
    brackets, picard_step, star_norm, BracketKind, Components, Convention, Lattice, LatticeIterate, ScenarioRecord,
    ANGLE_KINDS, SQUARE_KINDS,
};
use rayon::prelude::*;
use serde::Serialize;

/// Everything measured for one Picard iterate of one row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    /// `‖S^{(p)} − S^{(∞)}‖²⋆,β̂` against the row's fixed point.
    pub star_gap: f64,
    pub distances: DistanceReport,
    pub y0: f64,
    /// `E[Γ^{1+δ}]`.
    pub gamma_moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowResult {
    pub k: usize,
    /// Solved on the full tree with exact scenario weights, rather than on
    /// the lattice with sampled scenarios.
    pub exact: bool,
    pub scenarios: usize,
    pub phi: f64,
    pub a_terminal: f64,
    pub a_pass: bool,
    pub certificate: ContractionCertificate,
    pub converged: bool,
    /// Picard steps taken to reach the fixed point.
    pub iterations: usize,
    /// `‖S^{(1)}‖²⋆,β̂`.
    pub first_norm_sq: f64,
    /// `cell(k, p) ≤ 4^{1−p} ‖S^{(1)}‖²` for `p = 1..=p_max`.
    pub within_envelope: bool,
    /// Cells for `p = 0..=p_max`.
    pub cells: Vec<Cell>,
    pub fixed: Cell,
}

/// Quantities tabulated over `(k, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    StarGap,
    J1,
    TerminalL2,
    Y0Error,
    NResidual,
    Gamma,
    Square(BracketKind),
    Angle(BracketKind),
}

impl Quantity {
    pub fn all() -> Vec<Quantity> {
        let mut v = vec![Quantity::StarGap, Quantity::J1, Quantity::TerminalL2, Quantity::Y0Error, Quantity::NResidual, Quantity::Gamma];
        v.extend(SQUARE_KINDS.iter().map(|&k| Quantity::Square(k)));
        v.extend(ANGLE_KINDS.iter().map(|&k| Quantity::Angle(k)));
        v
    }

    /// File-name friendly identifier.
    pub fn slug(self) -> String {
        let kind = |k: BracketKind| match k {
            BracketKind::Y => "y",
            BracketKind::ZX => "zx",
            BracketKind::UMu => "umu",
            BracketKind::ZXPlusUMu => "zx_umu",
            BracketKind::N => "n",
            BracketKind::YX => "y_x",
            BracketKind::YXnat => "y_xnat",
            BracketKind::YN => "y_n",
        };
        match self {
            Quantity::StarGap => "star_gap".into(),
            Quantity::J1 => "j1".into(),
            Quantity::TerminalL2 => "terminal_l2".into(),
            Quantity::Y0Error => "y0_error".into(),
            Quantity::NResidual => "n_residual".into(),
            Quantity::Gamma => "gamma".into(),
            Quantity::Square(k) => format!("square_{}", kind(k)),
            Quantity::Angle(k) => format!("angle_{}", kind(k)),
        }
    }

    fn of(self, c: &Cell, y0_ref: f64) -> f64 {
        let d = &c.distances;
        match self {
            Quantity::StarGap => c.star_gap,
            Quantity::J1 => d.j1.mean,
            Quantity::TerminalL2 => d.terminal_l2.mean,
            Quantity::Y0Error => (c.y0 - y0_ref).abs(),
            Quantity::NResidual => d.n_residual.mean,
            Quantity::Gamma => c.gamma_moment,
            Quantity::Square(k) => d.square(k).map_or(0.0, |e| e.mean),
            Quantity::Angle(k) => d.angle(k).map_or(0.0, |e| e.mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub beta_hat: f64,
    /// `Y^∞_0`.
    pub y0_ref: f64,
    /// Window of the path distances, `2T`.
    pub window: f64,
    pub rows: Vec<RowResult>,
}

impl ConvergenceTable {
    pub fn ks(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.k).collect()
    }

    pub fn p_max(&self) -> usize {
        self.config.p_max
    }

    /// `q` over `(k, p)` with the fixed-point column as the row limits.
    pub fn table(&self, q: Quantity) -> DoubleTable {
        let ks: Vec<f64> = self.rows.iter().map(|r| r.k as f64).collect();
        let ps: Vec<f64> = (0..=self.p_max()).map(|p| p as f64).collect();
        let rows = self.rows.iter().map(|r| r.cells.iter().map(|c| q.of(c, self.y0_ref)).collect()).collect();
        let limits = self.rows.iter().map(|r| q.of(&r.fixed, self.y0_ref)).collect();
        DoubleTable::new(ks, ps, rows).and_then(|t| t.with_row_limits(limits)).expect("rows have p_max + 1 cells")
    }

    /// Moore–Osgood checks on the `J1` table, the row (Picard tail) property,
    /// the `N` residual and the `Γ` proxy.
    pub fn verdict(&self) -> Result<ExperimentVerdict> {
        let t = self.table(Quantity::J1);
        let tol = self.config.mo_tol;
        let mo_a = moore_osgood_a(&t, &TolSchedule::Constant(tol), false)?;
        let mo_b = moore_osgood_b(&t, tol)?;
        let joint_limit = mo_a.joint_limit;
        let n_worst = self.rows.iter().map(|r| r.fixed.distances.n_residual.mean).fold(0.0, f64::max);
        let scale = self.rows.iter().map(|r| r.fixed.y0.abs()).fold(1.0, f64::max);
        let n_residual_pass = n_worst <= self.config.tol * scale;
        let row_property = self.rows.iter().all(|r| !r.certificate.passes_quarter || r.within_envelope);
        let moments: Vec<f64> = self.rows.iter().map(|r| r.cells.iter().map(|c| c.gamma_moment).fold(r.fixed.gamma_moment, f64::max)).collect();
        let half = moments.len() / 2;
        let lead = moments[..half.max(1)].iter().copied().fold(0.0, f64::max);
        let trail = moments[half..].iter().copied().fold(0.0, f64::max);
        let gamma_bounded = moments.iter().all(|m| m.is_finite()) && trail <= 2.0 * lead + 1e-12;
        let a_pass = self.rows.iter().all(|r| r.a_pass);
        let joint_limit_pass = joint_limit.abs() <= tol;
        let pass = mo_a.pass && joint_limit_pass && n_residual_pass && row_property && gamma_bounded && a_pass;
        Ok(ExperimentVerdict {
            pass,
            mo_a,
            mo_b,
            joint_limit,
            joint_limit_pass,
            row_property,
            n_residual: n_worst,
            n_residual_pass,
            gamma_moments: moments,
            gamma_bounded,
            a_pass,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentVerdict {
    pub pass: bool,
    /// Moore–Osgood A on the `J1` table.
    pub mo_a: MooreOsgoodVerdict,
    /// Moore–Osgood B on the same table, reported only.
    pub mo_b: MooreOsgoodVerdict,
    pub joint_limit: f64,
    pub joint_limit_pass: bool,
    /// Certified rows stay under the `4^{1−p}` envelope.
    pub row_property: bool,
    /// Largest `E|N_T|` at the fixed points.
    pub n_residual: f64,
    pub n_residual_pass: bool,
    /// `max_p E[Γ^{(p) 1+δ}]` per row.
    pub gamma_moments: Vec<f64>,
    /// The trailing half of rows stays within twice the leading half.
    pub gamma_bounded: bool,
    pub a_pass: bool,
}

/// `Φ` at resolution `k`; the drivers are homogeneous, so one step decides.
fn row_phi(problem: &Problem, k: usize) -> Result<f64> {
    let step = problem.horizon / k as f64;
    let unit = match problem.walk_spec(k) {
        Some(spec) => build_random_walk_data(&RandomWalkSpec { k: 1, horizon: step, ..spec })?,
        None => crate::drivers::build_deterministic_data(1, step, problem.generator(), vec![0.0])?,
    };
    Ok(unit.chars().phi())
}

fn leaf_count(problem: &Problem, k: usize) -> f64 {
    match problem.walk_spec(k) {
        Some(spec) => (spec.branches().len() as f64).powi(k as i32),
        None => 1.0,
    }
}

fn gamma_moment(records: &[ScenarioRecord], delta: f64) -> Result<f64> {
    let mut m = 0.0;
    for r in records {
        m += r.weight * r.gamma()?.powf(1.0 + delta);
    }
    Ok(m)
}

/// Cells for a sequence of iterates sharing scenarios; an iterate equal to
/// its predecessor reuses the predecessor's distances.
struct CellBuilder<'a> {
    refs: &'a [ReferenceScenario],
    window: f64,
    sampled: bool,
    delta: f64,
}

impl CellBuilder<'_> {
    fn cell(&self, records: &[ScenarioRecord], star_gap: f64) -> Result<Cell> {
        let dists = records
            .par_iter()
            .zip(self.refs.par_iter())
            .map(|(rec, r)| scenario_distances(rec, r, self.window))
            .collect::<Result<Vec<ScenarioDistances>>>()?;
        Ok(Cell {
            star_gap,
            distances: summarize(records, &dists, self.sampled),
            y0: records[0].y[0],
            gamma_moment: gamma_moment(records, self.delta)?,
        })
    }
}

struct RowSetup<'a> {
    cfg: &'a ExperimentConfig,
    problem: &'a Problem,
    reference: &'a Reference,
    beta: f64,
    window: f64,
}

impl RowSetup<'_> {
    fn certificate(&self, k: usize) -> Result<(f64, ContractionCertificate)> {
        let phi = row_phi(self.problem, k)?;
        Ok((phi, m_star(self.beta, phi)?))
    }

    fn finish(&self, k: usize, exact: bool, scenarios: usize, parts: RowParts) -> Result<RowResult> {
        let (phi, certificate) = self.certificate(k)?;
        let a_terminal = phi * k as f64;
        let first = parts.first_norm_sq;
        let within_envelope = parts.cells.iter().enumerate().skip(1).all(|(p, c)| {
            c.star_gap <= picard_tail_bound(first, p as u32).expect("valid") * (1.0 + 1e-9) + 1e-300
        });
        Ok(RowResult {
            k,
            exact,
            scenarios,
            phi,
            a_terminal,
            a_pass: self.cfg.a_bar.is_none_or(|a| a_terminal <= a * (1.0 + 1e-12)),
            certificate,
            converged: parts.converged,
            iterations: parts.iterations,
            first_norm_sq: first,
            within_envelope,
            cells: parts.cells,
            fixed: parts.fixed,
        })
    }

    fn exact_row(&self, k: usize) -> Result<RowResult> {
        let data = self.problem.data(k)?;
        let conv = self.cfg.convention;
        let (kept, fixed, converged, iterations) = iterate_tree(&data, conv, self.cfg.tol, self.cfg.p_max, self.cfg.max_iter)?;
        let leaves: Vec<usize> = data.tree().leaves().collect();
        let recs_of = |s: &Components| -> Result<Vec<ScenarioRecord>> {
            let b = brackets(s, &data);
            leaves.iter().map(|&v| ScenarioRecord::from_tree(&data, s, &b, conv, v)).collect()
        };
        let first_recs = recs_of(&fixed)?;
        let refs: Vec<ReferenceScenario> = first_recs.iter().map(|r| self.reference.along(r, self.window)).collect::<Result<_>>()?;
        let builder = CellBuilder { refs: &refs, window: self.window, sampled: false, delta: self.cfg.delta };
        let fixed_cell = builder.cell(&first_recs, 0.0)?;
        let mut cells: Vec<Cell> = Vec::with_capacity(kept.len());
        for (p, s) in kept.iter().enumerate() {
            let gap = star_norm(&fixed.diff(s), &data, self.beta).total;
            let cell = if p > 0 && kept[p - 1] == *s {
                Cell { star_gap: gap, ..cells[p - 1].clone() }
            } else if *s == fixed {
                Cell { star_gap: gap, ..fixed_cell.clone() }
            } else {
                builder.cell(&recs_of(s)?, gap)?
            };
            cells.push(cell);
        }
        let first_norm_sq = star_norm(&kept[1].diff(&kept[0]), &data, self.beta).total;
        let parts = RowParts { cells, fixed: fixed_cell, first_norm_sq, converged, iterations };
        self.finish(k, true, leaves.len(), parts)
    }

    fn lattice_row(&self, k: usize) -> Result<RowResult> {
        let spec = self.problem.walk_spec(k).ok_or_else(|| Error::Invalid("sampling needs a random-walk driver".into()))?;
        let lat = Lattice::new(&spec)?;
        let conv = self.cfg.convention;
        let run = lat.run(conv, self.cfg.tol, self.cfg.max_iter.max(self.cfg.p_max))?;
        let n = self.cfg.n_paths;
        let paths: Vec<Vec<usize>> = (0..n).map(|i| lat.sample(&mut path_rng(self.cfg.seed, k as u64, i as u64))).collect();
        let weight = 1.0 / n as f64;
        let recs_of = |it: &LatticeIterate| -> Result<Vec<ScenarioRecord>> {
            paths.par_iter().map(|path| lat.record(it, conv, path, weight)).collect()
        };
        let fixed = run.fixed_point();
        let fixed_recs = recs_of(fixed)?;
        let refs: Vec<ReferenceScenario> = fixed_recs.iter().map(|r| self.reference.along(r, self.window)).collect::<Result<_>>()?;
        let builder = CellBuilder { refs: &refs, window: self.window, sampled: true, delta: self.cfg.delta };
        let fixed_cell = builder.cell(&fixed_recs, 0.0)?;
        let probs = lat.state_probs();
        let mut cells: Vec<Cell> = Vec::with_capacity(self.cfg.p_max + 1);
        for p in 0..=self.cfg.p_max {
            let it = run.iterate(p);
            let gap = lat.star_norm(&fixed.diff(it), self.beta, &probs, &paths).total;
            let cell = if p > 0 && run.iterate(p - 1) == it {
                Cell { star_gap: gap, ..cells[p - 1].clone() }
            } else if it == fixed {
                Cell { star_gap: gap, ..fixed_cell.clone() }
            } else {
                builder.cell(&recs_of(it)?, gap)?
            };
            cells.push(cell);
        }
        let first_norm_sq = lat.star_norm(&run.iterate(1).diff(run.iterate(0)), self.beta, &probs, &paths).total;
        let parts = RowParts { cells, fixed: fixed_cell, first_norm_sq, converged: run.converged, iterations: run.sup_gaps.len() };
        self.finish(k, false, n, parts)
    }
}

struct RowParts {
    cells: Vec<Cell>,
    fixed: Cell,
    first_norm_sq: f64,
    converged: bool,
    iterations: usize,
}

fn sup_abs(s: &Components) -> f64 {
    s.y.iter().chain(&s.z).chain(&s.u).chain(&s.dn).fold(0.0, |m, x| m.max(x.abs()))
}

/// Picard iterates `0..=p_max` and the fixed point, on the tree. Stops once
/// the sup-norm step falls to `tol` times the first step.
fn iterate_tree(
    data: &StandardData,
    conv: Convention,
    tol: f64,
    p_max: usize,
    max_iter: usize,
) -> Result<(Vec<Components>, Components, bool, usize)> {
    let mut kept = vec![Components::zeros(data)];
    let mut prev = kept[0].clone();
    let mut first = None;
    let mut converged = false;
    let mut steps = 0;
    for p in 1..=max_iter.max(p_max).max(1) {
        let next = picard_step(data, &prev, conv, p)?.parts;
        let gap = sup_abs(&next.diff(&prev));
        if !gap.is_finite() {
            return Err(Error::Diverged { iterations: p });
        }
        let first = *first.get_or_insert(gap);
        steps = p;
        prev = next;
        if p <= p_max {
            kept.push(prev.clone());
        }
        if first == 0.0 || gap <= tol * first {
            converged = true;
            if p >= p_max {
                break;
            }
        }
    }
    while kept.len() <= p_max {
        kept.push(prev.clone());
    }
    Ok((kept, prev, converged, steps))
}

/// Runs the experiment described by `cfg`.
pub fn stability_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let problem = cfg.to_problem()?;
    let reference = problem.reference()?;
    let phis = cfg.k_list.iter().map(|&k| row_phi(&problem, k)).collect::<Result<Vec<_>>>()?;
    // the finest row has the smallest Φ
    let phi_min = phis.iter().copied().fold(f64::INFINITY, f64::min);
    let beta = match cfg.beta_hat {
        Some(b) => b,
        None => default_beta_hat(phi_min).unwrap_or(1.0),
    };
    let window = 2.0 * problem.horizon;
    let setup = RowSetup { cfg, problem: &problem, reference: &reference, beta, window };
    let rows = cfg
        .k_list
        .par_iter()
        .map(|&k| {
            if leaf_count(&problem, k) <= cfg.exact_max_leaves as f64 {
                setup.exact_row(k)
            } else {
                setup.lattice_row(k)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let y0_ref = reference.y(0.0, 0.0, 0.0);
    Ok(ConvergenceTable { config: cfg.clone(), problem, beta_hat: beta, y0_ref, window, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::Payoff;
    use crate::harness::reference::{ProblemId, Scheme};

    fn cfg(problem: ProblemId, ks: Vec<usize>, p_max: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(problem, ks, p_max);
        c.n_paths = 400;
        c.seed = 11;
        c
    }

    #[test]
    fn square_payoff_cells_vanish() {
        let mut c = cfg(ProblemId::MartingaleG, vec![4, 8, 16], 2);
        c.payoff = Some(Payoff::Square);
        let t = stability_experiment(&c).unwrap();
        for row in &t.rows {
            assert!(row.exact);
            assert!(row.fixed.distances.terminal_l2.mean < 1e-20);
            assert!(row.fixed.distances.n_residual.mean < 1e-12);
            assert!((row.fixed.y0 - 1.0).abs() < 1e-12);
            assert_eq!(row.iterations, 2);
        }
        let v = t.verdict().unwrap();
        assert!(v.n_residual_pass && v.row_property);
    }

    #[test]
    fn zero_problem_has_zero_distances() {
        let mut c = cfg(ProblemId::MartingaleG, vec![2, 4, 6], 2);
        c.payoff = Some(Payoff::Constant { value: 0.0 });
        let t = stability_experiment(&c).unwrap();
        for q in Quantity::all() {
            let tab = t.table(q);
            for k in 0..tab.rows() {
                assert!(tab.row(k).iter().all(|&x| x == 0.0), "{q:?}");
            }
        }
        assert!(t.verdict().unwrap().pass);
    }

    #[test]
    fn deterministic_linear_column() {
        let mut c = cfg(ProblemId::LinearLambda, vec![10, 20, 100], 4);
        c.scheme = Some(Scheme::Deterministic);
        c.payoff = Some(Payoff::Constant { value: 1.0 });
        let t = stability_experiment(&c).unwrap();
        let last = t.rows.last().unwrap();
        let want = (1.0f64 - 0.5 / 100.0).powi(-100);
        assert!((last.fixed.y0 - want).abs() < 1e-9);
        assert!(((last.fixed.y0 - 0.5f64.exp()) - 2.07e-3).abs() < 1e-5);
        assert!(last.certificate.passes_quarter && last.within_envelope);
    }

    #[test]
    fn lattice_rows_follow_exact_rows() {
        let mut c = cfg(ProblemId::LinearLambda, vec![4, 8, 32], 3);
        c.exact_max_leaves = 256;
        let t = stability_experiment(&c).unwrap();
        assert!(t.rows[0].exact && t.rows[1].exact && !t.rows[2].exact);
        let j1 = t.table(Quantity::J1);
        assert!(j1.row_limits.as_ref().unwrap().iter().all(|&x| (0.0..=1.0).contains(&x)));
        let again = stability_experiment(&c).unwrap();
        assert_eq!(t, again);
    }
}
