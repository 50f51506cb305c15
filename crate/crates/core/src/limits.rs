//! Moore–Osgood diagnostics for doubly-indexed tables `γ_{k,p}`.
//!
//! Rows are indexed by `k`, columns by `p`. Suprema over an index are taken
//! over the finite grid only; verdicts record the grid size.

use crate::error::{invalid, Error, Result};
use serde::Serialize;

/// A rectangular table of reals with optional declared limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubleTable {
    /// `k` value of each row.
    pub row_labels: Vec<f64>,
    /// `p` value of each column.
    pub col_labels: Vec<f64>,
    entries: Vec<f64>,
    /// `γ_{k,∞}` for each row.
    pub row_limits: Option<Vec<f64>>,
    /// `γ_{∞,p}` for each column.
    pub col_limits: Option<Vec<f64>>,
}

impl DoubleTable {
    pub fn new(row_labels: Vec<f64>, col_labels: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != row_labels.len() {
            return invalid("one label per row required");
        }
        let cols = col_labels.len();
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return invalid("table is not rectangular");
            }
            entries.extend(r);
        }
        Ok(DoubleTable { row_labels, col_labels, entries, row_limits: None, col_limits: None })
    }

    /// Tabulates `f(k, p)` on the grid.
    pub fn from_fn(ks: &[f64], ps: &[f64], f: impl Fn(f64, f64) -> f64) -> Self {
        let rows = ks.iter().map(|&k| ps.iter().map(|&p| f(k, p)).collect()).collect();
        Self::new(ks.to_vec(), ps.to_vec(), rows).expect("grid is rectangular")
    }

    pub fn with_row_limits(mut self, limits: Vec<f64>) -> Result<Self> {
        if limits.len() != self.rows() {
            return invalid("one row limit per row required");
        }
        self.row_limits = Some(limits);
        Ok(self)
    }

    pub fn with_col_limits(mut self, limits: Vec<f64>) -> Result<Self> {
        if limits.len() != self.cols() {
            return invalid("one column limit per column required");
        }
        self.col_limits = Some(limits);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn get(&self, k: usize, p: usize) -> f64 {
        self.entries[k * self.cols() + p]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.entries[k * self.cols()..(k + 1) * self.cols()]
    }

    pub fn transpose(&self) -> Self {
        let rows = (0..self.cols()).map(|p| (0..self.rows()).map(|k| self.get(k, p)).collect()).collect();
        DoubleTable {
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
            entries: DoubleTable::new(self.col_labels.clone(), self.row_labels.clone(), rows)
                .expect("transpose of a rectangular table")
                .entries,
            row_limits: self.col_limits.clone(),
            col_limits: self.row_limits.clone(),
        }
    }

    fn row_limit(&self, k: usize) -> f64 {
        match &self.row_limits {
            Some(l) => l[k],
            None => self.get(k, self.cols() - 1),
        }
    }

    fn col_limit(&self, p: usize) -> f64 {
        match &self.col_limits {
            Some(l) => l[p],
            None => self.get(self.rows() - 1, p),
        }
    }

    /// CSV with header `,p…` (plus `pinf` when row limits are declared) and
    /// rows labelled `k=…` (plus `k=inf` when column limits are declared).
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.col_labels.iter().map(|p| format!("p{p}")));
        if self.row_limits.is_some() {
            header.push("pinf".into());
        }
        w.write_record(&header).expect("in-memory write");
        for k in 0..self.rows() {
            let mut rec = vec![format!("k={}", self.row_labels[k])];
            rec.extend(self.row(k).iter().map(|v| v.to_string()));
            if let Some(l) = &self.row_limits {
                rec.push(l[k].to_string());
            }
            w.write_record(&rec).expect("in-memory write");
        }
        if let Some(l) = &self.col_limits {
            let mut rec = vec!["k=inf".to_string()];
            rec.extend(l.iter().map(|v| v.to_string()));
            if self.row_limits.is_some() {
                rec.push(String::new());
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let parse_err = |e: csv::Error| Error::Parse(e.to_string());
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(parse_err)?.clone();
        let mut col_labels = Vec::new();
        let mut has_row_limits = false;
        for h in header.iter().skip(1) {
            let h = h.trim();
            if h == "pinf" {
                has_row_limits = true;
                continue;
            }
            let v = h.strip_prefix('p').ok_or_else(|| Error::Parse(format!("bad column label `{h}`")))?;
            col_labels.push(crate::paths::parse_num::<f64>(v)?);
        }
        let mut row_labels = Vec::new();
        let mut rows = Vec::new();
        let mut row_limits = Vec::new();
        let mut col_limits = None;
        for rec in r.records() {
            let rec = rec.map_err(parse_err)?;
            let label = rec.get(0).unwrap_or("").trim();
            let k = label.strip_prefix("k=").ok_or_else(|| Error::Parse(format!("bad row label `{label}`")))?;
            let vals: Vec<&str> = rec.iter().skip(1).map(str::trim).collect();
            if vals.len() != col_labels.len() + usize::from(has_row_limits) {
                return Err(Error::Parse(format!("row `{label}` has the wrong number of cells")));
            }
            let nums = vals[..col_labels.len()]
                .iter()
                .map(|s| crate::paths::parse_num::<f64>(s))
                .collect::<Result<Vec<_>>>()?;
            if k == "inf" {
                col_limits = Some(nums);
                continue;
            }
            row_labels.push(crate::paths::parse_num::<f64>(k)?);
            if has_row_limits {
                row_limits.push(crate::paths::parse_num::<f64>(vals[col_labels.len()])?);
            }
            rows.push(nums);
        }
        let mut t = DoubleTable::new(row_labels, col_labels, rows)?;
        if has_row_limits {
            t = t.with_row_limits(row_limits)?;
        }
        if let Some(c) = col_limits {
            t = t.with_col_limits(c)?;
        }
        Ok(t)
    }
}

/// Tolerance per column, constant or given explicitly.
#[derive(Debug, Clone)]
pub enum TolSchedule {
    Constant(f64),
    PerColumn(Vec<f64>),
}

impl TolSchedule {
    fn at(&self, p: usize) -> f64 {
        match self {
            TolSchedule::Constant(t) => *t,
            TolSchedule::PerColumn(v) => v[p.min(v.len() - 1)],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub pass: bool,
    /// The monitored quantity along the trailing window.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MooreOsgoodVerdict {
    pub pass: bool,
    /// Condition (i): uniform convergence along `p`.
    pub uniform: ConditionCheck,
    /// Condition (ii): convergence along `k` (A), or vanishing
    /// limsup − liminf along `k` (B).
    pub columns: ConditionCheck,
    /// Transposed conditions, when requested.
    pub transposed: Option<Box<MooreOsgoodVerdict>>,
    /// Estimate of the joint limit.
    pub joint_limit: f64,
    /// `lim_k lim_p γ_{k,p}` estimate.
    pub row_first: f64,
    /// `lim_p lim_k γ_{k,p}` estimate.
    pub col_first: f64,
    pub iterated_discrepancy: f64,
    pub grid: (usize, usize),
}

fn check_size(t: &DoubleTable) -> Result<()> {
    if t.rows() < 3 || t.cols() < 3 {
        return invalid(format!("table too small: {}x{} (need at least 3x3)", t.rows(), t.cols()));
    }
    Ok(())
}

fn tail_start(n: usize) -> usize {
    n / 2
}

const SLACK: f64 = 1e-12;

/// Variant A: (i) `sup_k d(γ_{k,p}, γ_{k,∞}) → 0` along `p` and (ii) each
/// column converges along `k`. Missing limits are estimated from the last
/// column or row. With `symmetric`, the transposed conditions are checked too.
pub fn moore_osgood_a(t: &DoubleTable, tol: &TolSchedule, symmetric: bool) -> Result<MooreOsgoodVerdict> {
    check_size(t)?;
    let (rows, cols) = (t.rows(), t.cols());
    let uniform_trace: Vec<f64> = (tail_start(cols)..cols)
        .map(|p| (0..rows).map(|k| (t.get(k, p) - t.row_limit(k)).abs()).fold(0.0, f64::max))
        .collect();
    let uniform_pass = uniform_trace
        .iter()
        .enumerate()
        .all(|(i, &u)| u <= tol.at(tail_start(cols) + i) + SLACK);

    let col_trace: Vec<f64> = (0..cols)
        .map(|p| (tail_start(rows)..rows).map(|k| (t.get(k, p) - t.col_limit(p)).abs()).fold(0.0, f64::max))
        .collect();
    let col_pass = col_trace.iter().enumerate().all(|(p, &c)| c <= tol.at(p) + SLACK);

    let transposed = if symmetric {
        let tt = t.transpose();
        let tol_t = TolSchedule::Constant((0..cols).map(|p| tol.at(p)).fold(f64::INFINITY, f64::min));
        Some(Box::new(moore_osgood_a(&tt, &tol_t, false)?))
    } else {
        None
    };
    let row_first = t.row_limit(rows - 1);
    let col_first = t.col_limit(cols - 1);
    let pass = uniform_pass && col_pass && transposed.as_ref().is_none_or(|v| v.pass);
    Ok(MooreOsgoodVerdict {
        pass,
        uniform: ConditionCheck { pass: uniform_pass, trace: uniform_trace },
        columns: ConditionCheck { pass: col_pass, trace: col_trace },
        transposed,
        joint_limit: t.get(rows - 1, cols - 1),
        row_first,
        col_first,
        iterated_discrepancy: (row_first - col_first).abs(),
        grid: (rows, cols),
    })
}

/// Variant B: (i) uniform Cauchy tail along `p` and (ii) the spread
/// `limsup_k γ_{k,p} − liminf_k γ_{k,p}`, taken over the trailing half of
/// rows, falls below `tol` at the last column without growing over the
/// trailing half of columns.
pub fn moore_osgood_b(t: &DoubleTable, tol: f64) -> Result<MooreOsgoodVerdict> {
    check_size(t)?;
    let (rows, cols) = (t.rows(), t.cols());
    let p0 = tail_start(cols);
    let uniform_trace: Vec<f64> = (p0..cols)
        .map(|p| (0..rows).map(|k| (t.get(k, p) - t.row_limit(k)).abs()).fold(0.0, f64::max))
        .collect();
    let uniform_pass = uniform_trace.iter().all(|&u| u <= tol + SLACK);

    let k0 = tail_start(rows);
    let spread = |p: usize| {
        let vals = (k0..rows).map(|k| t.get(k, p));
        let hi = vals.clone().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.fold(f64::INFINITY, f64::min);
        (hi - lo, 0.5 * (hi + lo))
    };
    let spread_trace: Vec<f64> = (0..cols).map(|p| spread(p).0).collect();
    let tail = &spread_trace[p0..];
    let monotone = tail.windows(2).all(|w| w[1] <= w[0] + SLACK + 1e-9 * w[0].abs());
    let col_pass = tail.last().is_some_and(|&g| g <= tol + SLACK) && monotone;

    let row_first = t.row_limit(rows - 1);
    let col_first = match &t.col_limits {
        Some(l) => l[cols - 1],
        None => spread(cols - 1).1,
    };
    let joint_limit = spread(cols - 1).1;
    Ok(MooreOsgoodVerdict {
        pass: uniform_pass && col_pass,
        uniform: ConditionCheck { pass: uniform_pass, trace: uniform_trace },
        columns: ConditionCheck { pass: col_pass, trace: spread_trace },
        transposed: None,
        joint_limit,
        row_first,
        col_first,
        iterated_discrepancy: (row_first - col_first).abs(),
        grid: (rows, cols),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64).collect()
    }

    #[test]
    fn separable_decay_passes_a() {
        let g = grid(50);
        let t = DoubleTable::from_fn(&g, &g, |k, p| 1.0 / k + 1.0 / p);
        let v = moore_osgood_a(&t, &TolSchedule::Constant(0.05), false).unwrap();
        assert!(v.pass);
        assert!(v.joint_limit.abs() < 0.05);
    }

    #[test]
    fn ratio_table_fails_uniformity() {
        let g = grid(50);
        let t = DoubleTable::from_fn(&g, &g, |k, p| k / (k + p))
            .with_row_limits(vec![0.0; 50])
            .unwrap()
            .with_col_limits(vec![1.0; 50])
            .unwrap();
        let v = moore_osgood_a(&t, &TolSchedule::Constant(0.05), false).unwrap();
        assert!(!v.uniform.pass);
        assert!(!v.pass);
        assert_eq!(v.row_first, 0.0);
        assert_eq!(v.col_first, 1.0);
    }

    #[test]
    fn constant_table() {
        let g = grid(5);
        let t = DoubleTable::from_fn(&g, &g, |_, _| 2.5);
        let v = moore_osgood_a(&t, &TolSchedule::Constant(1e-9), true).unwrap();
        assert!(v.pass);
        assert_eq!(v.joint_limit, 2.5);
        assert!(moore_osgood_b(&t, 1e-9).unwrap().pass);
    }

    #[test]
    fn small_tables_are_rejected() {
        let t = DoubleTable::from_fn(&[1.0, 2.0], &[1.0, 2.0, 3.0], |k, p| k + p);
        assert!(moore_osgood_a(&t, &TolSchedule::Constant(0.1), false).is_err());
        assert!(moore_osgood_b(&t, 0.1).is_err());
    }

    #[test]
    fn b_examples() {
        let g = grid(50);
        let t = DoubleTable::from_fn(&g, &g, |k, p| 1.0 / k + 1.0 / p + 1.0 / (k * p));
        let v = moore_osgood_b(&t, 0.05).unwrap();
        assert!(v.pass);
        assert!(v.joint_limit.abs() < 0.06);

        let alt = DoubleTable::from_fn(&g, &g, |k, p| if k as usize % 2 == 0 { 1.0 } else { -1.0 } / p);
        let v = moore_osgood_b(&alt, 0.05).unwrap();
        assert!(v.pass);
        assert!(v.joint_limit.abs() < 1e-12);
        assert!((v.columns.trace[49] - 2.0 / 50.0).abs() < 1e-12);

        let osc = DoubleTable::from_fn(&g, &g, |k, _| if k as usize % 2 == 0 { 1.0 } else { -1.0 });
        let v = moore_osgood_b(&osc, 0.05).unwrap();
        assert!(!v.columns.pass);
        assert_eq!(v.columns.trace[49], 2.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = grid(4);
        let t = DoubleTable::from_fn(&g, &[0.0, 1.0, 2.0], |k, p| k / (p + 3.0))
            .with_row_limits(vec![0.0, 0.1, 0.2, 1.0 / 3.0])
            .unwrap()
            .with_col_limits(vec![1.0, 2.0, 3.0])
            .unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with(",p0,p1,p2,pinf\nk=1,"));
        assert_eq!(DoubleTable::from_csv(&csv).unwrap(), t);
        let bare = DoubleTable::from_fn(&g, &g, |k, p| k * p);
        assert_eq!(DoubleTable::from_csv(&bare.to_csv()).unwrap(), bare);
    }

    proptest! {
        #[test]
        fn separable_null_sequences_pass(ra in 0.3f64..0.8, rb in 0.3f64..0.8, ca in 0.0f64..1.0, cb in 0.0f64..1.0) {
            // a_k = ca·ra^k, b_p = cb·rb^p are monotone null sequences
            let g = grid(60);
            let t = DoubleTable::from_fn(&g, &g, |k, p| ca * ra.powf(k) + cb * rb.powf(p))
                .with_row_limits(g.iter().map(|&k| ca * ra.powf(k)).collect()).unwrap()
                .with_col_limits(g.iter().map(|&p| cb * rb.powf(p)).collect()).unwrap();
            let tol = 0.01;
            let a = moore_osgood_a(&t, &TolSchedule::Constant(tol), true).unwrap();
            let b = moore_osgood_b(&t, tol).unwrap();
            prop_assert!(a.pass && b.pass);
            prop_assert!(a.joint_limit.abs() < tol);
            prop_assert!((a.joint_limit - a.col_first).abs() < 3.0 * tol);
        }

        #[test]
        fn symmetric_verdict_is_transpose_invariant(c in 0.1f64..2.0, e in 0.5f64..2.0) {
            let g = grid(20);
            let f = move |k: f64, p: f64| c / k.powf(e) + 1.0 / (k + p);
            let t = DoubleTable::from_fn(&g, &g, f)
                .with_row_limits(g.iter().map(|&k| c / k.powf(e)).collect()).unwrap()
                .with_col_limits(vec![0.0; 20]).unwrap();
            let tol = TolSchedule::Constant(0.1);
            let v = moore_osgood_a(&t, &tol, true).unwrap();
            let w = moore_osgood_a(&t.transpose(), &tol, true).unwrap();
            prop_assert_eq!(v.pass, w.pass);
        }
    }
}
