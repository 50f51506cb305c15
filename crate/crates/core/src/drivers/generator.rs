//! Registered generators and terminal payoffs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Predictable characteristics of one step, as seen by a generator.
#[derive(Debug, Clone, Copy)]
pub struct NodeContext<'a> {
    /// Time of the step's right end.
    pub t: f64,
    pub dc: f64,
    /// `d⟨X∘⟩/dC`, row-major `m × m`.
    pub c2: &'a [f64],
    /// `K({x_j}) = ν({x_j})/ΔC` per mark.
    pub kernel: &'a [f64],
    pub nu: &'a [f64],
    pub zeta: f64,
}

/// Stochastic-Lipschitz coefficients `(r, θ∘, θ♮)` at a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lipschitz {
    pub r: f64,
    pub theta_circ: f64,
    pub theta_nat: f64,
}

impl Lipschitz {
    /// `α = max{√r, θ∘, θ♮}`.
    pub fn alpha(&self) -> f64 {
        self.r.sqrt().max(self.theta_circ).max(self.theta_nat)
    }
}

/// Generator catalog. Every entry acts componentwise on `y ∈ R^ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Generator {
    Zero,
    Constant { value: f64 },
    /// `f = λ y`.
    LinearY { lambda: f64 },
    /// `f = κ (y − strike)⁺ + θ ‖c z‖`.
    CallPayoff { kappa: f64, strike: f64, theta: f64 },
    /// `f = η Σ_j K_j u_j`.
    JumpLinear { eta: f64 },
}

impl Generator {
    /// Writes `f(t, y, z, u)` into `out`; `z` is row-major `ℓ × m`, `u` is
    /// mark-major `J × ℓ`.
    pub fn evaluate_into(&self, ctx: &NodeContext, y: &[f64], z: &[f64], u: &[f64], out: &mut [f64]) {
        let l = y.len();
        match *self {
            Generator::Zero => out.fill(0.0),
            Generator::Constant { value } => out.fill(value),
            Generator::LinearY { lambda } => {
                for (o, &yi) in out.iter_mut().zip(y) {
                    *o = lambda * yi;
                }
            }
            Generator::CallPayoff { kappa, strike, theta } => {
                let m = if l == 0 { 0 } else { z.len() / l };
                for i in 0..l {
                    let mut q = 0.0;
                    if theta != 0.0 {
                        let zi = &z[i * m..(i + 1) * m];
                        for a in 0..m {
                            for b in 0..m {
                                q += zi[a] * ctx.c2[a * m + b] * zi[b];
                            }
                        }
                    }
                    out[i] = kappa * (y[i] - strike).max(0.0) + theta * q.max(0.0).sqrt();
                }
            }
            Generator::JumpLinear { eta } => {
                out.fill(0.0);
                for (j, &kj) in ctx.kernel.iter().enumerate() {
                    for i in 0..l {
                        out[i] += eta * kj * u[j * l + i];
                    }
                }
            }
        }
    }

    pub fn evaluate(&self, ctx: &NodeContext, y: &[f64], z: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.evaluate_into(ctx, y, z, u, &mut out);
        out
    }

    /// Coefficients such that
    /// `‖f(y,z,u) − f(y',z',u')‖² ≤ r‖Δy‖² + θ∘²‖cΔz‖² + θ♮²⦀Δu⦀²`.
    pub fn lipschitz(&self, ctx: &NodeContext) -> Lipschitz {
        let zero = Lipschitz { r: 0.0, theta_circ: 0.0, theta_nat: 0.0 };
        match *self {
            Generator::Zero | Generator::Constant { .. } => zero,
            Generator::LinearY { lambda } => Lipschitz { r: lambda * lambda, ..zero },
            Generator::CallPayoff { kappa, theta, .. } => {
                // (a + b)² ≤ 2a² + 2b² when both parts are present
                let w = if kappa != 0.0 && theta != 0.0 { 2.0 } else { 1.0 };
                Lipschitz { r: w * kappa * kappa, theta_circ: (w.sqrt() * theta).abs(), theta_nat: 0.0 }
            }
            Generator::JumpLinear { eta } => {
                let mass: f64 = ctx.kernel.iter().sum();
                let theta_nat = if mass == 0.0 || eta == 0.0 {
                    0.0
                } else if ctx.zeta < 1.0 {
                    eta.abs() * (mass / (1.0 - ctx.zeta)).sqrt()
                } else {
                    f64::INFINITY
                };
                Lipschitz { theta_nat, ..zero }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Generator::Zero)
            || matches!(self, Generator::Constant { value } if *value == 0.0)
            || matches!(self, Generator::LinearY { lambda } if *lambda == 0.0)
            || matches!(self, Generator::JumpLinear { eta } if *eta == 0.0)
    }
}

/// Scalar terminal maps `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payoff {
    Constant { value: f64 },
    Identity,
    Square,
    PositivePart,
    Call { strike: f64 },
    Affine { slope: f64, intercept: f64 },
    /// `Σ_i coeffs[i] x^i`.
    Polynomial { coeffs: Vec<f64> },
}

impl Payoff {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Payoff::Constant { value } => *value,
            Payoff::Identity => x,
            Payoff::Square => x * x,
            Payoff::PositivePart => x.max(0.0),
            Payoff::Call { strike } => (x - strike).max(0.0),
            Payoff::Affine { slope, intercept } => slope * x + intercept,
            Payoff::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
        }
    }

    /// Right derivative.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Payoff::Constant { .. } => 0.0,
            Payoff::Identity => 1.0,
            Payoff::Square => 2.0 * x,
            Payoff::PositivePart => f64::from(x >= 0.0),
            Payoff::Call { strike } => f64::from(x >= *strike),
            Payoff::Affine { slope, .. } => *slope,
            Payoff::Polynomial { coeffs } => {
                coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (i, c)| acc * x + i as f64 * c)
            }
        }
    }

    /// Heat semigroup `E[g(x + W_τ)]` and its `x`-derivative, in closed form
    /// except for polynomials, which use Gauss–Hermite quadrature.
    pub fn heat(&self, tau: f64, x: f64) -> (f64, f64) {
        if tau <= 0.0 {
            return (self.eval(x), self.derivative(x));
        }
        let s = tau.sqrt();
        let call = |k: f64| {
            let d = (x - k) / s;
            let n = Normal::standard();
            let phi = (-0.5 * d * d).exp() / (2.0 * std::f64::consts::PI).sqrt();
            ((x - k) * n.cdf(d) + s * phi, n.cdf(d))
        };
        match self {
            Payoff::Constant { value } => (*value, 0.0),
            Payoff::Identity => (x, 1.0),
            Payoff::Square => (x * x + tau, 2.0 * x),
            Payoff::PositivePart => call(0.0),
            Payoff::Call { strike } => call(*strike),
            Payoff::Affine { slope, intercept } => (slope * x + intercept, *slope),
            Payoff::Polynomial { coeffs } => {
                let (nodes, weights) = gauss_hermite(coeffs.len() / 2 + 2);
                let mut v = 0.0;
                let mut d = 0.0;
                for (z, w) in nodes.iter().zip(&weights) {
                    let y = x + s * std::f64::consts::SQRT_2 * z;
                    v += w * self.eval(y);
                    d += w * self.derivative(y);
                }
                let norm = std::f64::consts::PI.sqrt();
                (v / norm, d / norm)
            }
        }
    }
}

/// Physicists' Gauss–Hermite rule (weight `e^{−x²}`) by Golub–Welsch.
pub(crate) fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
