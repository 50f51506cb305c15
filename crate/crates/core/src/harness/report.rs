//! Writes an experiment's tables, metadata and verdict to a directory.

use super::experiment::{ConvergenceTable, ExperimentVerdict, Quantity};
use crate::error::Result;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct RowMeta {
    k: usize,
    exact: bool,
    scenarios: usize,
    phi: f64,
    a_terminal: f64,
    m_star: f64,
    certified: bool,
    converged: bool,
    iterations: usize,
    first_norm_sq: f64,
    within_envelope: bool,
    y0_fixed: f64,
}

#[derive(Serialize)]
struct Metadata<'a> {
    config: &'a super::ExperimentConfig,
    beta_hat: f64,
    y0_ref: f64,
    window: f64,
    rows: Vec<RowMeta>,
    verdict: &'a ExperimentVerdict,
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub tables: Vec<PathBuf>,
    pub metadata: PathBuf,
    pub summary: PathBuf,
}

/// One CSV per [`Quantity`], `metadata.json` and `summary.txt`. Output is a
/// function of the inputs only.
pub fn emit_report(table: &ConvergenceTable, verdict: &ExperimentVerdict, dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir)?;
    let mut tables = Vec::new();
    for q in Quantity::all() {
        let path = dir.join(format!("{}.csv", q.slug()));
        std::fs::write(&path, table.table(q).to_csv())?;
        tables.push(path);
    }
    let meta = Metadata {
        config: &table.config,
        beta_hat: table.beta_hat,
        y0_ref: table.y0_ref,
        window: table.window,
        rows: table
            .rows
            .iter()
            .map(|r| RowMeta {
                k: r.k,
                exact: r.exact,
                scenarios: r.scenarios,
                phi: r.phi,
                a_terminal: r.a_terminal,
                m_star: r.certificate.m_star,
                certified: r.certificate.passes_quarter,
                converged: r.converged,
                iterations: r.iterations,
                first_norm_sq: r.first_norm_sq,
                within_envelope: r.within_envelope,
                y0_fixed: r.fixed.y0,
            })
            .collect(),
        verdict,
    };
    let metadata = dir.join("metadata.json");
    std::fs::write(&metadata, serde_json::to_string_pretty(&meta)? + "\n")?;
    let summary = dir.join("summary.txt");
    std::fs::write(&summary, summary_text(table, verdict))?;
    Ok(ReportFiles { tables, metadata, summary })
}

fn mark(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Human-readable digest of the run.
pub fn summary_text(table: &ConvergenceTable, v: &ExperimentVerdict) -> String {
    let mut s = String::new();
    let c = &table.config;
    let _ = writeln!(s, "problem {}  T={}  p_max={}  beta_hat={:.6e}", c.problem, c.horizon, c.p_max, table.beta_hat);
    let _ = writeln!(s, "Y0 reference {:.10}", table.y0_ref);
    let _ = writeln!(s, "{:>8} {:>6} {:>12} {:>12} {:>6} {:>6} {:>14} {:>12} {:>12}", "k", "exact", "phi", "M*", "cert", "iters", "Y0", "J1", "N_T");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{:>8} {:>6} {:>12.4e} {:>12.4e} {:>6} {:>6} {:>14.10} {:>12.4e} {:>12.4e}",
            r.k,
            r.exact,
            r.phi,
            r.certificate.m_star,
            r.certificate.passes_quarter,
            r.iterations,
            r.fixed.y0,
            r.fixed.distances.j1.mean,
            r.fixed.distances.n_residual.mean,
        );
    }
    let _ = writeln!(s, "moore-osgood A      {}  joint limit {:.4e}", mark(v.mo_a.pass), v.joint_limit);
    let _ = writeln!(s, "moore-osgood B      {}  (reported)", mark(v.mo_b.pass));
    let _ = writeln!(s, "joint limit         {}", mark(v.joint_limit_pass));
    let _ = writeln!(s, "row property        {}", mark(v.row_property));
    let _ = writeln!(s, "N residual          {}  {:.4e}", mark(v.n_residual_pass), v.n_residual);
    let _ = writeln!(s, "gamma bounded       {}", mark(v.gamma_bounded));
    let _ = writeln!(s, "A_T bound           {}", mark(v.a_pass));
    let _ = writeln!(s, "overall             {}", mark(v.pass));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::Payoff;
    use crate::harness::{stability_experiment, ExperimentConfig, ProblemId};

    #[test]
    fn reports_are_byte_identical() {
        let mut c = ExperimentConfig::new(ProblemId::MartingaleG, vec![2, 4, 6], 2);
        c.payoff = Some(Payoff::Square);
        let read_all = |dir: &Path| -> Vec<(String, Vec<u8>)> {
            let mut v: Vec<_> = std::fs::read_dir(dir)
                .unwrap()
                .map(|e| {
                    let p = e.unwrap().path();
                    (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
                })
                .collect();
            v.sort();
            v
        };
        let mut outs = Vec::new();
        for _ in 0..2 {
            let t = stability_experiment(&c).unwrap();
            let v = t.verdict().unwrap();
            let dir = tempfile::tempdir().unwrap();
            let files = emit_report(&t, &v, dir.path()).unwrap();
            assert_eq!(files.tables.len(), Quantity::all().len());
            outs.push(read_all(dir.path()));
        }
        assert_eq!(outs[0], outs[1]);
        let j1 = outs[0].iter().find(|(n, _)| n == "j1.csv").unwrap();
        assert!(String::from_utf8_lossy(&j1.1).starts_with(",p0,p1,p2,pinf\n"));
    }
}
