//! Seeded random unitaries and symplectic matrices.
//!
//! Every generator is a `ChaCha8Rng` seeded from a `u64`, so a seed reproduces the
//! same matrix on every platform for a given build.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::phase_space::{embed_unitary, ModeCount, SymplecticMatrix, UnitaryMatrix};

pub type RngSeed = u64;

/// The pinned generator used everywhere a seed turns into randomness.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: RngSeed) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for sub-stream `stream` of `master`.
///
/// Used to give every (probe setting, repetition, trial) its own generator so that
/// results do not depend on execution order.
pub fn derive_seed(master: RngSeed, stream: u64) -> RngSeed {
    mix64(master ^ mix64(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Chains [`derive_seed`] over a path of stream indices.
pub fn derive_seed_path(master: RngSeed, path: &[u64]) -> RngSeed {
    path.iter().fold(master, |s, &k| derive_seed(s, k))
}

/// Bound on the squeezing parameters of [`random_symplectic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeSpec {
    r_max: f64,
}

impl SqueezeSpec {
    pub const DEFAULT_R_MAX: f64 = 0.5;

    pub fn new(r_max: f64) -> Result<Self> {
        if !(r_max >= 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "r_max must be finite and non-negative, got {r_max}"
            )));
        }
        Ok(Self { r_max })
    }

    pub fn r_max(self) -> f64 {
        self.r_max
    }
}

impl Default for SqueezeSpec {
    fn default() -> Self {
        Self {
            r_max: Self::DEFAULT_R_MAX,
        }
    }
}

/// Haar-distributed unitary drawn from an existing generator.
///
/// QR of a complex Ginibre matrix, with the phases of `diag(R)` moved into `Q`.
pub fn haar_unitary_with<R: Rng + ?Sized>(n: ModeCount, rng: &mut R) -> UnitaryMatrix {
    let k = n.get();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = DMatrix::from_fn(k, k, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for (col, mut q_col) in q.column_iter_mut().enumerate() {
        let d = r[(col, col)];
        let norm = d.norm();
        let phase = if norm > 0.0 {
            d / norm
        } else {
            Complex64::new(1.0, 0.0)
        };
        q_col *= phase;
    }
    UnitaryMatrix::from_matrix_unchecked(q)
}

pub fn haar_unitary(n: ModeCount, seed: RngSeed) -> UnitaryMatrix {
    haar_unitary_with(n, &mut rng_from_seed(seed))
}

/// Euler-form random symplectic `K₁·Z·K₂` from an existing generator.
///
/// `K₁`, `K₂` are embedded Haar unitaries and `Z = diag(e^{r}, e^{-r})` with each
/// `r_i` uniform on `[-r_max, r_max]`.
pub fn random_symplectic_with<R: Rng + ?Sized>(
    n: ModeCount,
    squeeze: SqueezeSpec,
    rng: &mut R,
) -> SymplecticMatrix {
    let k1 = embed_unitary(&haar_unitary_with(n, rng)).into_matrix();
    let k2 = embed_unitary(&haar_unitary_with(n, rng)).into_matrix();
    let r_max = squeeze.r_max();
    let rs: Vec<f64> = (0..n.get())
        .map(|_| {
            if r_max > 0.0 {
                rng.random_range(-r_max..=r_max)
            } else {
                0.0
            }
        })
        .collect();
    let diag = DVector::from_iterator(
        n.dim(),
        rs.iter().map(|r| r.exp()).chain(rs.iter().map(|r| (-r).exp())),
    );
    // K1 · diag · K2, scaling the columns of K1 instead of forming Z
    let mut k1z = k1;
    for (mut col, d) in k1z.column_iter_mut().zip(diag.iter()) {
        col *= *d;
    }
    SymplecticMatrix::from_matrix_unchecked(k1z * k2)
}

pub fn random_symplectic(n: ModeCount, squeeze: SqueezeSpec, seed: RngSeed) -> SymplecticMatrix {
    random_symplectic_with(n, squeeze, &mut rng_from_seed(seed))
}
