//! Contraction constants of the Picard scheme and the a priori tail bounds.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Threshold below which the Picard map contracts by a factor 4 in the
/// squared ⋆-norm.
pub const QUARTER: f64 = 0.25;

/// `Π⋆(γ, δ, Φ) = 8/γ + 9/δ + 9δ e^{(δ−γ)Φ} / (γ(δ−γ))`.
pub fn pi_star(gamma: f64, delta: f64, phi: f64) -> Result<f64> {
    if !(gamma > 0.0 && delta > gamma) {
        return invalid(format!("need 0 < gamma < delta, got gamma={gamma}, delta={delta}"));
    }
    if !(phi >= 0.0) {
        return invalid(format!("phi must be nonnegative, got {phi}"));
    }
    Ok(8.0 / gamma + 9.0 / delta + 9.0 * delta * ((delta - gamma) * phi).exp() / (gamma * (delta - gamma)))
}

/// `Π̃(δ, Φ) = 17 + 9 e^{δΦ}`.
pub fn pi_tilde_star(delta: f64, phi: f64) -> f64 {
    17.0 + 9.0 * (delta * phi).exp()
}

/// Outcome of minimising `Π⋆` for a given `(β̂, Φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub beta_hat: f64,
    pub phi: f64,
    pub gamma: f64,
    pub m_star: f64,
    pub passes_quarter: bool,
}

impl ContractionCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serialises")
    }
}

const GRID: usize = 400;

/// `M⋆(β, Φ) = min_{0<γ<β} Π⋆(γ, β, Φ)`, located on a logarithmic grid and
/// refined by golden-section search.
pub fn m_star(beta: f64, phi: f64) -> Result<ContractionCertificate> {
    if !(beta > 0.0 && beta.is_finite()) {
        return invalid(format!("beta must be positive, got {beta}"));
    }
    if !(phi >= 0.0 && phi.is_finite()) {
        return invalid(format!("phi must be nonnegative, got {phi}"));
    }
    let f = |g: f64| pi_star(g, beta, phi).unwrap_or(f64::INFINITY);
    // γ_i = β·s_i, with s spread over (0, 1) on both log(s) and log(1−s)
    let grid: Vec<f64> = (1..GRID)
        .map(|i| {
            let u = i as f64 / GRID as f64;
            let s = 1.0 / (1.0 + (-(24.0 * (u - 0.5))).exp());
            beta * s
        })
        .collect();
    let (mut best, mut best_val) = (0, f64::INFINITY);
    for (i, &g) in grid.iter().enumerate() {
        let v = f(g);
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    if best == 0 || best == grid.len() - 1 {
        return invalid(format!("no interior minimiser bracketed for beta={beta}, phi={phi}"));
    }
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) <= 1e-14 * b {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let gamma = 0.5 * (a + b);
    let value = f(gamma).min(best_val);
    let gamma = if f(gamma) <= best_val { gamma } else { grid[best] };
    if !value.is_finite() {
        return invalid(format!("minimisation did not converge for beta={beta}, phi={phi}"));
    }
    Ok(ContractionCertificate { beta_hat: beta, phi, gamma, m_star: value, passes_quarter: value < QUARTER })
}

/// Minimum of `Π⋆` over an `n × n` grid of the full constraint set
/// `0 < γ < δ ≤ β`; used to confirm that `δ = β` is optimal.
pub fn m_star_grid_check(beta: f64, phi: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return invalid("grid needs at least two points per axis");
    }
    let mut best = f64::INFINITY;
    for j in 1..=n {
        let delta = beta * j as f64 / n as f64;
        for i in 1..n {
            let gamma = delta * i as f64 / n as f64;
            best = best.min(pi_star(gamma, delta, phi)?);
        }
    }
    Ok(best)
}

/// Smallest `β = 10^{i/20}` (`i ≥ 0`) with `M⋆(β, Φ) < 1/4`.
pub fn default_beta_hat(phi: f64) -> Result<f64> {
    for i in 0..=200 {
        let beta = 10f64.powf(i as f64 / 20.0);
        if m_star(beta, phi)?.passes_quarter {
            return Ok(beta);
        }
    }
    invalid(format!("no beta up to 1e10 certifies contraction for phi={phi}"))
}

#[derive(Debug, Clone, Serialize)]
pub struct KStar {
    /// First index from which every provided `Φ^k` passes.
    pub index: usize,
    pub certificates: Vec<ContractionCertificate>,
    /// The index before `index` fails (or `index` is 0).
    pub minimal: bool,
}

/// First index `k⋆` such that `M⋆(β̂, Φ^j) < 1/4` for all provided `j ≥ k⋆`.
pub fn select_k_star(phi_seq: &[f64], beta_hat: f64) -> Result<KStar> {
    let certificates = phi_seq.iter().map(|&phi| m_star(beta_hat, phi)).collect::<Result<Vec<_>>>()?;
    let index = match certificates.iter().rposition(|c| !c.passes_quarter) {
        None => 0,
        Some(i) if i + 1 < certificates.len() => i + 1,
        Some(_) => return invalid(format!("no index qualifies for beta_hat={beta_hat}")),
    };
    let minimal = index == 0 || !certificates[index - 1].passes_quarter;
    Ok(KStar { index, certificates, minimal })
}

/// `4^{1−p} · ‖𝒮^{(1)}‖²`.
pub fn picard_tail_bound(first_iterate_norm_sq: f64, p: u32) -> Result<f64> {
    if p < 1 {
        return invalid("the tail bound starts at p = 1");
    }
    if !(first_iterate_norm_sq >= 0.0) {
        return invalid("squared norm must be nonnegative");
    }
    Ok(first_iterate_norm_sq * 4f64.powi(1 - p as i32))
}

/// `Π̃(β̂, Φ)·‖ξ‖² + M⋆(β̂, Φ)·‖f(·,0,0,0)/α‖²`.
pub fn first_iterate_bound(beta_hat: f64, phi: f64, xi_norm_sq: f64, f0_norm_sq: f64) -> Result<f64> {
    if !(xi_norm_sq >= 0.0 && f0_norm_sq >= 0.0) {
        return invalid("squared norms must be nonnegative");
    }
    let mut out = pi_tilde_star(beta_hat, phi) * xi_norm_sq;
    if f0_norm_sq > 0.0 {
        out += m_star(beta_hat, phi)?.m_star * f0_norm_sq;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    #[test]
    fn pi_star_values() {
        assert_eq!(pi_star(1.0, 2.0, 0.0).unwrap(), 30.5);
        assert!((pi_star(1.0, 2.0, 1.0).unwrap() - (12.5 + 18.0 * E)).abs() < 1e-12);
        assert!((pi_star(122.0, 244.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(pi_star(2.0, 2.0, 0.0).is_err());
        assert!(pi_star(0.0, 2.0, 0.0).is_err());
        assert!(pi_star(1.0, 2.0, -1.0).is_err());
    }

    #[test]
    fn pi_tilde_values() {
        assert_eq!(pi_tilde_star(2.0, 0.0), 26.0);
        assert_eq!(pi_tilde_star(1e6, 0.0), 26.0);
        assert!((pi_tilde_star(1.0, 1.0) - (17.0 + 9.0 * E)).abs() < 1e-12);
    }

    /// 10⁴-point uniform grid in γ.
    fn grid_oracle(beta: f64, phi: f64) -> f64 {
        (1..10_000).map(|i| pi_star(beta * i as f64 / 10_000.0, beta, phi).unwrap()).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn m_star_at_300() {
        let c = m_star(300.0, 0.0).unwrap();
        assert!(c.m_star <= 61.0 / 300.0 && c.m_star < 0.25 && c.passes_quarter);
        assert!(c.gamma > 0.0 && c.gamma < 300.0);
        assert!((c.m_star - grid_oracle(300.0, 0.0)).abs() < 1e-4);
        assert!(c.m_star <= grid_oracle(300.0, 0.0));
        assert!(m_star_grid_check(300.0, 0.0, 300).unwrap() >= c.m_star - 1e-12);
    }

    #[test]
    fn m_star_blows_up_near_zero() {
        assert!(m_star(0.01, 0.0).unwrap().m_star > 800.0);
        assert!(m_star(1.0, 0.0).unwrap().m_star >= 8.0);
    }

    #[test]
    fn k_star_examples() {
        let phis: Vec<f64> = (1..=1000).map(|k| 1.0 / k as f64).collect();
        let k = select_k_star(&phis, 300.0).unwrap();
        assert!(k.index + 1 <= 600);
        assert!(k.minimal);
        let witness = 25.0 / 300.0 + 36.0 / 300.0 * (150.0f64 / 600.0).exp();
        assert!((witness - 0.2374).abs() < 1e-4);
        assert!(k.certificates[599].m_star <= witness);

        assert_eq!(select_k_star(&[0.0; 5], 300.0).unwrap().index, 0);
        assert!(select_k_star(&[0.0; 5], 1.0).is_err());
    }

    #[test]
    fn tail_and_first_iterate() {
        assert_eq!(picard_tail_bound(7.0, 1).unwrap(), 7.0);
        assert_eq!(picard_tail_bound(2.0, 3).unwrap(), 0.125);
        assert!(picard_tail_bound(1.0, 0).is_err());
        assert_eq!(first_iterate_bound(300.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(first_iterate_bound(300.0, 0.0, 1.0, 0.0).unwrap(), 26.0);
        let v = first_iterate_bound(300.0, 0.0, 0.0, 1.0).unwrap();
        assert!((v - grid_oracle(300.0, 0.0)).abs() < 1e-4);
    }

    #[test]
    fn default_beta_is_first_passing_grid_value() {
        let b = default_beta_hat(0.0).unwrap();
        assert!(m_star(b, 0.0).unwrap().passes_quarter);
        let prev = b / 10f64.powf(0.05);
        assert!(!m_star(prev, 0.0).unwrap().passes_quarter);
    }

    #[test]
    fn certificate_json_fields() {
        let j = m_star(300.0, 0.0).unwrap().to_json();
        for key in ["beta_hat", "phi", "gamma", "m_star", "passes_quarter"] {
            assert!(j.contains(key));
        }
    }

    proptest! {
        #[test]
        fn optimum_beats_random_candidates(beta in 1.0f64..1000.0, phi in 0.0f64..0.05, u in prop::collection::vec(0.0001f64..0.9999, 1000)) {
            let c = m_star(beta, phi).unwrap();
            for s in u {
                prop_assert!(c.m_star <= pi_star(s * beta, beta, phi).unwrap() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn nondecreasing_in_phi(beta in 10.0f64..1000.0, phis in prop::collection::vec(0.0f64..0.1, 2..8)) {
            let mut phis = phis;
            phis.sort_by(f64::total_cmp);
            let vals: Vec<f64> = phis.iter().map(|&p| m_star(beta, p).unwrap().m_star).collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
            }
        }
    }
}
