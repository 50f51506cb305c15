//! Catalog of problems with closed-form limits, evaluated along the
//! scenarios of the discrete solutions.

use crate::drivers::{
    build_deterministic_data, build_random_walk_data, Generator, Payoff, RandomWalkSpec, StandardData, Terminal,
};
use crate::error::{invalid, Error, Result};
use crate::paths::StepPath;
use crate::solver::{BracketKind, ScenarioRecord};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemId {
    /// `f = 0`, `ξ = g(X∘_T)`.
    MartingaleG,
    /// `f = λy`, `ξ = g(X∘_T)`.
    LinearLambda,
    /// `f = κ(y − K)⁺` on the deterministic scheme.
    OdeLimit,
    /// `f = η Σ K_j u_j`, `ξ = g(X♮_T)`.
    JumpLinear,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [ProblemId::MartingaleG, ProblemId::LinearLambda, ProblemId::OdeLimit, ProblemId::JumpLinear];

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::MartingaleG => "martingale-g",
            ProblemId::LinearLambda => "linear-lambda",
            ProblemId::OdeLimit => "ode-limit",
            ProblemId::JumpLinear => "jump-linear",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "martingale-g" => Ok(ProblemId::MartingaleG),
            "linear-lambda" | "linear-λ" => Ok(ProblemId::LinearLambda),
            "ode-limit" => Ok(ProblemId::OdeLimit),
            "jump-linear" => Ok(ProblemId::JumpLinear),
            other => invalid(format!("unknown problem `{other}`")),
        }
    }
}

/// Driver used at resolution `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Scaled random walk, with Bernoulli jumps when the problem has them.
    #[default]
    Walk,
    /// `k` deterministic steps, `X ≡ 0`.
    Deterministic,
}

/// A catalog problem with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Problem {
    pub id: ProblemId,
    pub horizon: f64,
    pub payoff: Payoff,
    pub scheme: Scheme,
    /// Generator coefficient for `linear-lambda`, jump intensity for
    /// `jump-linear`.
    pub lambda: f64,
    pub kappa: f64,
    pub strike: f64,
    pub eta: f64,
    /// Jump size of `X♮` for `jump-linear`.
    pub mark: f64,
}

impl Problem {
    /// Defaults for `id`: unit horizon, `g(x) = x⁺` (the constant 1.5 for
    /// `ode-limit`), `λ = 0.5` (unit intensity for `jump-linear`).
    pub fn new(id: ProblemId) -> Self {
        let (payoff, scheme, lambda) = match id {
            ProblemId::MartingaleG => (Payoff::PositivePart, Scheme::Walk, 0.0),
            ProblemId::LinearLambda => (Payoff::PositivePart, Scheme::Walk, 0.5),
            ProblemId::OdeLimit => (Payoff::Constant { value: 1.5 }, Scheme::Deterministic, 0.0),
            ProblemId::JumpLinear => (Payoff::Affine { slope: 1.0, intercept: 0.0 }, Scheme::Walk, 1.0),
        };
        Problem { id, horizon: 1.0, payoff, scheme, lambda, kappa: 0.5, strike: 1.0, eta: 0.1, mark: 1.0 }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return invalid("horizon must be positive");
        }
        match self.id {
            ProblemId::OdeLimit if self.scheme != Scheme::Deterministic => {
                invalid("ode-limit runs on the deterministic scheme")
            }
            ProblemId::JumpLinear => {
                if self.scheme != Scheme::Walk {
                    return invalid("jump-linear needs the random-walk scheme");
                }
                if !(self.lambda > 0.0) || self.mark == 0.0 || !self.mark.is_finite() {
                    return invalid("jump-linear needs a positive intensity and a nonzero mark");
                }
                if self.eta != 0.0 && !matches!(self.payoff, Payoff::Affine { .. } | Payoff::Identity | Payoff::Constant { .. }) {
                    return invalid("jump-linear with η ≠ 0 has a closed form only for affine payoffs");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn generator(&self) -> Generator {
        match self.id {
            ProblemId::MartingaleG => Generator::Zero,
            ProblemId::LinearLambda => Generator::LinearY { lambda: self.lambda },
            ProblemId::OdeLimit => Generator::CallPayoff { kappa: self.kappa, strike: self.strike, theta: 0.0 },
            ProblemId::JumpLinear => Generator::JumpLinear { eta: self.eta },
        }
    }

    pub fn terminal(&self) -> Terminal {
        match self.id {
            ProblemId::JumpLinear => Terminal::jump(self.payoff.clone()),
            _ => Terminal::continuous(self.payoff.clone()),
        }
    }

    /// Random-walk driver at resolution `k`, if the scheme is a walk.
    pub fn walk_spec(&self, k: usize) -> Option<RandomWalkSpec> {
        (self.scheme == Scheme::Walk).then(|| {
            let jumps = self.id == ProblemId::JumpLinear;
            RandomWalkSpec {
                k,
                horizon: self.horizon,
                lambda: if jumps { self.lambda } else { 0.0 },
                marks: if jumps { vec![self.mark] } else { vec![] },
                generator: self.generator(),
                terminal: self.terminal(),
            }
        })
    }

    pub fn data(&self, k: usize) -> Result<StandardData> {
        self.check()?;
        match self.walk_spec(k) {
            Some(spec) => build_random_walk_data(&spec),
            None => build_deterministic_data(k, self.horizon, self.generator(), vec![self.terminal().eval(0.0, 0.0)]),
        }
    }

    pub fn reference(&self) -> Result<Reference> {
        self.check()?;
        Ok(Reference { problem: self.clone(), variance: if self.scheme == Scheme::Walk { 1.0 } else { 0.0 } })
    }
}

/// Limit solution `(Y, Z, U)` as functions of `(t, x∘, x♮)`.
#[derive(Debug, Clone)]
pub struct Reference {
    problem: Problem,
    variance: f64,
}

/// The limit evaluated along one scenario of a discrete solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceScenario {
    /// `(Y, Z·X∘ + U⋆μ̃, N)`, with `Y` sampled on a grid four times finer.
    pub triple: StepPath,
    pub terminal: [f64; 3],
    pub square: [f64; 8],
    pub angle: [f64; 8],
}

impl Reference {
    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    fn tau(&self, t: f64) -> f64 {
        (self.problem.horizon - t).max(0.0)
    }

    /// Poisson semigroup `E[g(x + x̄(N_τ − Λτ))]`, summed until the
    /// terms are negligible.
    fn poisson(&self, tau: f64, x: f64) -> f64 {
        let p = &self.problem;
        let mean = p.lambda * tau;
        if mean == 0.0 {
            return p.payoff.eval(x);
        }
        let mut w = (-mean).exp();
        let mut acc = 0.0;
        let mut n = 0usize;
        loop {
            let term = w * p.payoff.eval(x + p.mark * (n as f64 - mean));
            acc += term;
            if (n as f64 > mean && w < 1e-18 && term.abs() < 1e-17 * acc.abs().max(1.0)) || n > 10_000 {
                break;
            }
            n += 1;
            w *= mean / n as f64;
        }
        acc
    }

    /// `Y^∞_t` at driver state `(x∘, x♮)`.
    pub fn y(&self, t: f64, x_circ: f64, x_nat: f64) -> f64 {
        let p = &self.problem;
        let tau = self.tau(t);
        match p.id {
            ProblemId::MartingaleG => p.payoff.heat(self.variance * tau, x_circ).0,
            ProblemId::LinearLambda => (p.lambda * tau).exp() * p.payoff.heat(self.variance * tau, x_circ).0,
            ProblemId::OdeLimit => {
                let xi = p.payoff.eval(x_circ);
                if xi > p.strike {
                    p.strike + (xi - p.strike) * (p.kappa * tau).exp()
                } else {
                    xi
                }
            }
            ProblemId::JumpLinear => {
                let slope = match p.payoff {
                    Payoff::Affine { slope, .. } => slope,
                    Payoff::Identity => 1.0,
                    _ => 0.0,
                };
                self.poisson(tau, x_nat) + p.eta * p.lambda * slope * p.mark * tau
            }
        }
    }

    /// `Z^∞_t`.
    pub fn z(&self, t: f64, x_circ: f64, _x_nat: f64) -> f64 {
        let p = &self.problem;
        if self.variance == 0.0 {
            return 0.0;
        }
        let tau = self.tau(t);
        match p.id {
            ProblemId::MartingaleG => p.payoff.heat(tau, x_circ).1,
            ProblemId::LinearLambda => (p.lambda * tau).exp() * p.payoff.heat(tau, x_circ).1,
            ProblemId::OdeLimit | ProblemId::JumpLinear => 0.0,
        }
    }

    /// `U^∞_t`, the jump of `Y^∞` when `X♮` jumps from `x♮`.
    pub fn u(&self, t: f64, x_circ: f64, x_nat: f64) -> f64 {
        if self.problem.id != ProblemId::JumpLinear {
            return 0.0;
        }
        self.y(t, x_circ, x_nat + self.problem.mark) - self.y(t, x_circ, x_nat)
    }

    /// Limit jump intensity.
    pub fn intensity(&self) -> f64 {
        if self.problem.id == ProblemId::JumpLinear {
            self.problem.lambda
        } else {
            0.0
        }
    }

    /// The limit along the driver path of `rec`, on `[0, window)`.
    pub fn along(&self, rec: &ScenarioRecord, window: f64) -> Result<ReferenceScenario> {
        let n = rec.steps();
        if rec.times.len() != n + 1 || rec.x_circ.len() != n + 1 || rec.x_nat.len() != n + 1 {
            return invalid("scenario record is inconsistent");
        }
        let times = &rec.times;
        let nu = |i: usize| self.intensity() * (times[i + 1] - times[i]);
        let mut ys = Vec::with_capacity(4 * n);
        for i in 0..n {
            for s in 1..=4 {
                // the fourth point lands exactly on the next grid time
                let t = if s == 4 { times[i + 1] } else { times[i] + (times[i + 1] - times[i]) * s as f64 / 4.0 };
                let (xc, xn) = if s == 4 { (rec.x_circ[i + 1], rec.x_nat[i + 1]) } else { (rec.x_circ[i], rec.x_nat[i]) };
                ys.push((t, self.y(t, xc, xn)));
            }
        }
        let mut mart = 0.0;
        let mut jumps = Vec::with_capacity(4 * n);
        let mut yi = 0;
        for i in 0..n {
            let z = self.z(times[i], rec.x_circ[i], rec.x_nat[i]);
            let u = self.u(times[i], rec.x_circ[i], rec.x_nat[i]);
            let ind = f64::from(rec.jump[i].is_some());
            for _ in 0..3 {
                let (t, y) = ys[yi];
                jumps.push((t, vec![y, mart, 0.0]));
                yi += 1;
            }
            mart += z * (rec.x_circ[i + 1] - rec.x_circ[i]) + u * (ind - nu(i));
            let (t, y) = ys[yi];
            jumps.push((t, vec![y, mart, 0.0]));
            yi += 1;
        }
        let y0 = self.y(times[0], rec.x_circ[0], rec.x_nat[0]);
        let triple = StepPath::new(vec![y0, 0.0, 0.0], jumps, window)?;
        let y_t = self.y(times[n], rec.x_circ[n], rec.x_nat[n]);
        let (square, angle) = self.brackets(rec);
        Ok(ReferenceScenario { triple, terminal: [y_t, mart, 0.0], square, angle })
    }

    fn brackets(&self, rec: &ScenarioRecord) -> ([f64; 8], [f64; 8]) {
        let (nodes, weights) = gauss_legendre(8);
        let lam = self.intensity();
        let xbar = self.problem.mark;
        let (mut cc, mut c1, mut uu, mut ux) = (0.0, 0.0, 0.0, 0.0);
        let (mut juu, mut jux) = (0.0, 0.0);
        for i in 0..rec.steps() {
            let (a, b) = (rec.times[i], rec.times[i + 1]);
            let (xc, xn) = (rec.x_circ[i], rec.x_nat[i]);
            let half = 0.5 * (b - a);
            for (s, w) in nodes.iter().zip(&weights) {
                let t = a + half * (s + 1.0);
                let z = self.z(t, xc, xn);
                cc += w * half * z * z;
                c1 += w * half * z;
                if lam > 0.0 {
                    let u = self.u(t, xc, xn);
                    uu += w * half * u * u * lam;
                    ux += w * half * u * xbar * lam;
                }
            }
            if rec.jump[i].is_some() {
                let u = self.u(b, xc, xn);
                juu += u * u;
                jux += u * xbar;
            }
        }
        let mut square = [0.0; 8];
        let mut angle = [0.0; 8];
        for (i, k) in BracketKind::ALL.iter().enumerate() {
            (square[i], angle[i]) = match k {
                BracketKind::Y | BracketKind::ZXPlusUMu => (cc + juu, cc + uu),
                BracketKind::ZX => (cc, cc),
                BracketKind::UMu => (juu, uu),
                BracketKind::YX => (c1, c1),
                BracketKind::YXnat => (jux, ux),
                BracketKind::N | BracketKind::YN => (0.0, 0.0),
            };
        }
        (square, angle)
    }
}

/// Evaluates the limit of `problem` along every scenario.
pub fn reference_solution(problem: &Problem, records: &[ScenarioRecord], window: f64) -> Result<Vec<ReferenceScenario>> {
    let r = problem.reference()?;
    records.iter().map(|rec| r.along(rec, window)).collect()
}

/// Gauss–Legendre rule on `[−1, 1]` by Golub–Welsch.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = i as f64 / ((4 * i * i) as f64 - 1.0).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
