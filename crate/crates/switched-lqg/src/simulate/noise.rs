//! Seeded Gaussian noise streams.
//!
//! One stream deterministically produces the pair `(w(k), v(k))` per step,
//! with `w ~ N(0, W)` and `v ~ N(0, V)` via fixed Cholesky factors computed
//! once at construction. The same seed yields a bit-identical sequence, which
//! is what makes common-random-number pairing of switched and unswitched
//! rollouts possible. A running FNV-1a checksum over the emitted samples lets
//! callers verify that two rollouts consumed identical noise.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matops::cholesky_lower;
use crate::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// Deterministic source of `(w(k), v(k))` pairs.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    chol_w: DMatrix<f64>,
    chol_v: DMatrix<f64>,
    zero: bool,
    checksum: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, w: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Self> {
        let chol_w = cholesky_lower(w)
            .map_err(|e| Error::NotSpd(format!("process-noise covariance W: {e}")))?;
        let chol_v = cholesky_lower(v)
            .map_err(|e| Error::NotSpd(format!("measurement-noise covariance V: {e}")))?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            chol_w,
            chol_v,
            zero: false,
            checksum: FNV_OFFSET,
        })
    }

    /// Emits zero vectors instead of samples (the `W→0, V→0` limit). The
    /// underlying generator is not advanced.
    pub fn zero_noise(mut self, zero: bool) -> Self {
        self.zero = zero;
        self
    }

    fn gaussian(&mut self, dim: usize) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| self.rng.sample::<f64, _>(StandardNormal))
    }

    fn absorb(&mut self, v: &DVector<f64>) {
        for x in v.iter() {
            for byte in x.to_le_bytes() {
                self.checksum ^= byte as u64;
                self.checksum = self.checksum.wrapping_mul(FNV_PRIME);
            }
        }
    }

    /// The next `(w(k), v(k))` pair.
    pub fn next_pair(&mut self) -> (DVector<f64>, DVector<f64>) {
        let n = self.chol_w.nrows();
        let p = self.chol_v.nrows();
        if self.zero {
            return (DVector::zeros(n), DVector::zeros(p));
        }
        let gw = self.gaussian(n);
        let gv = self.gaussian(p);
        let w = &self.chol_w * gw;
        let v = &self.chol_v * gv;
        self.absorb(&w);
        self.absorb(&v);
        (w, v)
    }

    /// FNV-1a over every emitted sample so far.
    pub fn checksum(&self) -> u64 {
        self.checksum
    }
}
