//! Shared helpers for unit tests: seeded random matrices and systems.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matops::spectral_radius;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let g: f64 = r.sample(StandardNormal);
        g * scale
    })
}

pub fn rand_spd(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = rand_matrix(r, n, n, 1.0);
    &g * g.transpose() + DMatrix::<f64>::identity(n, n) * 0.5
}

/// Random matrix rescaled to the requested spectral radius.
pub fn rand_stable(r: &mut ChaCha8Rng, n: usize, target_rho: f64) -> DMatrix<f64> {
    loop {
        let g = rand_matrix(r, n, n, 1.0);
        let rho = spectral_radius(&g).unwrap();
        if rho > 1e-8 {
            return g * (target_rho / rho);
        }
    }
}
