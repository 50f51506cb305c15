//! Inputs shared by the `kernels` benchmarks.

use bsdelab::drivers::{Generator, Payoff, RandomWalkSpec, Terminal};
use bsdelab::paths::StepPath;

/// A scalar path with `n` unit-spaced jumps alternating in sign on `[0, 1)`.
pub fn zigzag(n: usize, shift: f64) -> StepPath {
    let jumps: Vec<(f64, f64)> =
        (1..=n).map(|i| ((i as f64 - 0.5 + shift) / n as f64, if i % 2 == 0 { 0.0 } else { 1.0 + shift })).collect();
    StepPath::scalar(0.0, &jumps, 1.0).expect("jump times are increasing and inside the window")
}

/// Walk with one jump mark and a linear generator.
pub fn jump_walk(k: usize) -> RandomWalkSpec {
    RandomWalkSpec {
        k,
        horizon: 1.0,
        lambda: 1.0,
        marks: vec![1.0],
        generator: Generator::LinearY { lambda: 0.5 },
        terminal: Terminal::jump(Payoff::PositivePart),
    }
}
