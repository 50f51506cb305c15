//! Coupled random walks at resolutions `k` and `4k`.

use crate::error::{invalid, Result};
use crate::paths::StepPath;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream for path `index` of resolution `k` under a master seed; the same
/// path is drawn regardless of how work is split across threads.
pub fn path_rng(seed: u64, k: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((k << 32) | (index & 0xffff_ffff));
    rng
}

#[derive(Debug, Clone)]
pub struct CoupledWalks {
    pub coarse: Vec<StepPath>,
    pub fine: Vec<StepPath>,
}

/// Scaled walks with `k` and `4k` steps on `[0, T]` built on one scenario.
///
/// The fine walk has step `h/2` with `h = √(T/k)`; the coarse walk records
/// its successive exits from intervals of half-width `h` around the last
/// coarse level, which is the Skorokhod embedding of a `±h` walk into a
/// `±h/2` walk (and through it into Brownian motion). Paths are constant
/// after `T` and returned on the window `2T`.
pub fn coupled_walks(k: usize, horizon: f64, n_paths: usize, seed: u64) -> Result<CoupledWalks> {
    if k == 0 || !(horizon > 0.0 && horizon.is_finite()) {
        return invalid("need k ≥ 1 and a positive horizon");
    }
    let hf = (horizon / (4 * k) as f64).sqrt();
    let window = 2.0 * horizon;
    let mut coarse = Vec::with_capacity(n_paths);
    let mut fine = Vec::with_capacity(n_paths);
    for index in 0..n_paths {
        let mut rng = path_rng(seed, k as u64, index as u64);
        let (mut pos, mut level) = (0i64, 0i64);
        let mut fine_jumps = Vec::with_capacity(4 * k);
        let mut coarse_jumps = Vec::with_capacity(k);
        let mut steps = 0usize;
        while steps < 4 * k || coarse_jumps.len() < k {
            pos += if rng.random::<bool>() { 1 } else { -1 };
            steps += 1;
            if steps <= 4 * k {
                fine_jumps.push((steps as f64 * horizon / (4 * k) as f64, vec![pos as f64 * hf]));
            }
            if (pos - level).abs() == 2 {
                level = pos;
                if coarse_jumps.len() < k {
                    let i = coarse_jumps.len() + 1;
                    coarse_jumps.push((i as f64 * horizon / k as f64, vec![level as f64 * hf]));
                }
            }
        }
        fine.push(StepPath::new(vec![0.0], fine_jumps, window)?);
        coarse.push(StepPath::new(vec![0.0], coarse_jumps, window)?);
    }
    Ok(CoupledWalks { coarse, fine })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::j1_distance;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn coarse_walk_has_binary_steps() {
        let w = coupled_walks(8, 1.0, 20, 7).unwrap();
        let h = (1.0f64 / 8.0).sqrt();
        for p in &w.coarse {
            let mut prev = 0.0;
            for i in 0..p.jump_count() {
                let v = p.level(i + 1)[0];
                assert!(((v - prev).abs() - h).abs() < 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let a = coupled_walks(4, 1.0, 5, 11).unwrap();
        let b = coupled_walks(4, 1.0, 5, 11).unwrap();
        assert_eq!(a.fine, b.fine);
        assert_eq!(a.coarse, b.coarse);
    }

    #[test]
    fn coupling_tightens_with_k() {
        let med: Vec<f64> = [4usize, 32, 256]
            .iter()
            .map(|&k| {
                let w = coupled_walks(k, 1.0, 200, 3).unwrap();
                median(w.coarse.iter().zip(&w.fine).map(|(a, b)| j1_distance(a, b, 2.0).unwrap()).collect())
            })
            .collect();
        assert!(med[0] > med[1] && med[1] > med[2], "{med:?}");
    }
}
