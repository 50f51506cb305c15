//! Distances between discrete solutions and the limit, over coupled
//! scenarios.

use super::reference::ReferenceScenario;
use crate::error::{invalid, Result};
use crate::paths::j1_distance;
use crate::solver::{BracketKind, ScenarioRecord, ANGLE_KINDS, SQUARE_KINDS};
use rayon::prelude::*;
use serde::Serialize;

/// Weighted mean with its standard error (zero for exact enumeration).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// `values` weighted by `weights` (summing to one); `sampled` weights
    /// are `1/n` and get a Monte Carlo standard error.
    pub fn weighted(values: &[f64], weights: &[f64], sampled: bool) -> Self {
        let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
        let stderr = if sampled && values.len() > 1 {
            let n = values.len() as f64;
            let var: f64 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Estimate { mean, stderr }
    }
}

/// Per-scenario distances, before averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDistances {
    /// `(1 ∧ δ_J1)²` of the triple.
    pub j1_sq: f64,
    /// `‖triple_T − reference_T‖²`.
    pub terminal_sq: f64,
    /// `|[·]_T − [·]^∞_T|`, indexed like [`BracketKind::ALL`].
    pub square: [f64; 8],
    pub angle: [f64; 8],
    /// `|N_T|`.
    pub n_abs: f64,
}

/// Distances of one scenario against its reference.
pub fn scenario_distances(rec: &ScenarioRecord, r: &ReferenceScenario, window: f64) -> Result<ScenarioDistances> {
    let mut d = ScenarioDistances { j1_sq: 0.0, terminal_sq: 0.0, square: [0.0; 8], angle: [0.0; 8], n_abs: 0.0 };
    path_part(rec, r, window, &mut d)?;
    bracket_part(rec, r, &mut d);
    Ok(d)
}

fn path_part(rec: &ScenarioRecord, r: &ReferenceScenario, window: f64, d: &mut ScenarioDistances) -> Result<()> {
    let triple = rec.triple_path(window)?;
    d.j1_sq = j1_distance(&triple, &r.triple, window)?.min(1.0).powi(2);
    let end = triple.value_at(rec.times[rec.steps()]);
    d.terminal_sq = end.iter().zip(&r.terminal).map(|(a, b)| (a - b).powi(2)).sum();
    d.n_abs = end[2].abs();
    Ok(())
}

fn bracket_part(rec: &ScenarioRecord, r: &ReferenceScenario, d: &mut ScenarioDistances) {
    for i in 0..8 {
        d.square[i] = (rec.square[i] - r.square[i]).abs();
        d.angle[i] = (rec.angle[i] - r.angle[i]).abs();
    }
}

/// Averaged distances for one table cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    /// `E[(1 ∧ δ_J1(triple, reference))²]` on the window.
    pub j1: Estimate,
    pub terminal_l2: Estimate,
    /// `E|[·]_T − [·]^∞_T|` for the square-bracket kinds.
    pub square: Vec<(BracketKind, Estimate)>,
    /// `E|⟨·⟩_T − ⟨·⟩^∞_T|` for the angle-bracket kinds.
    pub angle: Vec<(BracketKind, Estimate)>,
    /// `E|N_T|`.
    pub n_residual: Estimate,
}

impl DistanceReport {
    pub fn square(&self, kind: BracketKind) -> Option<Estimate> {
        self.square.iter().find(|(k, _)| *k == kind).map(|(_, e)| *e)
    }

    pub fn angle(&self, kind: BracketKind) -> Option<Estimate> {
        self.angle.iter().find(|(k, _)| *k == kind).map(|(_, e)| *e)
    }
}

/// Averages [`ScenarioDistances`] with the record weights.
pub fn summarize(records: &[ScenarioRecord], dists: &[ScenarioDistances], sampled: bool) -> DistanceReport {
    let w: Vec<f64> = records.iter().map(|r| r.weight).collect();
    let est = |f: &dyn Fn(&ScenarioDistances) -> f64| {
        let v: Vec<f64> = dists.iter().map(f).collect();
        Estimate::weighted(&v, &w, sampled)
    };
    DistanceReport {
        j1: est(&|d| d.j1_sq),
        terminal_l2: est(&|d| d.terminal_sq),
        square: SQUARE_KINDS.iter().map(|&k| (k, est(&|d| d.square[k.index()]))).collect(),
        angle: ANGLE_KINDS.iter().map(|&k| (k, est(&|d| d.angle[k.index()]))).collect(),
        n_residual: est(&|d| d.n_abs),
    }
}

/// Monte Carlo (or exact, when `sampled` is false) distance estimates over
/// coupled scenarios: `records[i]` and `refs[i]` share a driver path.
pub fn distance_estimators(
    records: &[ScenarioRecord],
    refs: &[ReferenceScenario],
    window: f64,
    sampled: bool,
) -> Result<DistanceReport> {
    if records.len() != refs.len() || records.is_empty() {
        return invalid("scenario sets do not match");
    }
    let dists = records
        .par_iter()
        .zip(refs.par_iter())
        .map(|(rec, r)| scenario_distances(rec, r, window))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(records, &dists, sampled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::reference::{reference_solution, Problem, ProblemId};
    use crate::solver::{brackets, solve, SolveOptions};

    fn records(problem: &Problem, k: usize) -> Vec<ScenarioRecord> {
        let data = problem.data(k).unwrap();
        let out = solve(&data, &SolveOptions::default()).unwrap();
        let s = &out.solution.parts;
        let b = brackets(s, &data);
        data.tree().leaves().map(|v| ScenarioRecord::from_tree(&data, s, &b, Default::default(), v).unwrap()).collect()
    }

    #[test]
    fn square_payoff_is_exact_on_the_walk() {
        let mut p = Problem::new(ProblemId::MartingaleG);
        p.payoff = crate::drivers::Payoff::Square;
        for k in [4, 16] {
            let recs = records(&p, k);
            let refs = reference_solution(&p, &recs, 2.0).unwrap();
            for (rec, r) in recs.iter().zip(&refs) {
                for i in 0..=k {
                    let x = rec.x_circ[i];
                    assert!((rec.y[i] - (x * x + 1.0 - rec.times[i])).abs() < 1e-10);
                    assert!((r.triple.value_at(rec.times[i])[0] - rec.y[i]).abs() < 1e-12);
                }
                for i in 0..k {
                    assert!((rec.z[i] - 2.0 * rec.x_circ[i]).abs() < 1e-10);
                }
            }
            let rep = distance_estimators(&recs, &refs, 2.0, false).unwrap();
            assert!(rep.n_residual.mean < 1e-12);
            assert!(rep.terminal_l2.mean < 1e-20, "{}", rep.terminal_l2.mean);
        }
    }

    #[test]
    fn identical_paths_have_zero_distance() {
        let p = Problem::new(ProblemId::LinearLambda);
        let recs = records(&p, 4);
        let mut refs = reference_solution(&p, &recs, 2.0).unwrap();
        for (rec, r) in recs.iter().zip(refs.iter_mut()) {
            r.triple = rec.triple_path(2.0).unwrap();
            r.terminal.copy_from_slice(r.triple.value_at(1.0));
            r.square = rec.square;
            r.angle = rec.angle;
        }
        let rep = distance_estimators(&recs, &refs, 2.0, false).unwrap();
        assert_eq!(rep.j1.mean, 0.0);
        assert_eq!(rep.terminal_l2.mean, 0.0);
        assert!(rep.square.iter().chain(&rep.angle).all(|(_, e)| e.mean == 0.0));
    }

    #[test]
    fn mismatched_sets_are_rejected() {
        let p = Problem::new(ProblemId::MartingaleG);
        let recs = records(&p, 2);
        let refs = reference_solution(&p, &recs[..2], 2.0).unwrap();
        assert!(distance_estimators(&recs, &refs, 2.0, false).is_err());
    }
}
