//! Phase-space conventions and exact Gaussian algebra.
//!
//! Quadratures use `X = (a + a†)/√2`, `P = (a - a†)/(√2 i)` in xxpp order, and the
//! covariance matrix is the anticommutator form, so the vacuum covariance is `I`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute entrywise tolerance for structural checks (symplectic, unitary, PSD).
pub const STRUCTURE_TOL: f64 = 1e-9;

/// Block asymmetry admitted by [`extract_unitary`] before it refuses the input.
pub const PASSIVE_BLOCK_TOL: f64 = 1e-6;

/// Number of optical modes, `N >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeCount(usize);

impl ModeCount {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModeCount);
        }
        Ok(Self(n))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Phase-space dimension `2N`.
    pub fn dim(self) -> usize {
        2 * self.0
    }

    /// Mode count of a `2N`-dimensional phase space.
    pub fn from_dim(dim: usize) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: "positive even dimension".into(),
                found: dim.to_string(),
            });
        }
        Ok(Self(dim / 2))
    }
}

impl std::fmt::Display for ModeCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Power transmissivity of the uniform-loss beam splitters, `0 < eta <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Transmissivity(f64);

impl Transmissivity {
    pub const LOSSLESS: Transmissivity = Transmissivity(1.0);

    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidTransmissivity(eta));
        }
        Ok(Self(eta))
    }

    /// Transmissivity for a loss fraction `L`, i.e. `eta = 1 - L`.
    pub fn from_loss(loss: f64) -> Result<Self> {
        Self::new(1.0 - loss)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Transmissivity {
    fn default() -> Self {
        Self::LOSSLESS
    }
}

/// A real `2N×2N` matrix satisfying `S J Sᵀ = J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix(DMatrix<f64>);

impl SymplecticMatrix {
    /// Validates the symplectic condition at [`STRUCTURE_TOL`].
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(m, STRUCTURE_TOL)
    }

    pub fn with_tolerance(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        let residual = symplectic_residual(&m)?;
        if residual > tol {
            return Err(Error::NotSymplectic { residual });
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn identity(n: ModeCount) -> Self {
        Self(DMatrix::identity(n.dim(), n.dim()))
    }

    pub fn modes(&self) -> ModeCount {
        ModeCount(self.0.nrows() / 2)
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Matrix product `self · rhs`, which is again symplectic.
    pub fn compose(&self, rhs: &SymplecticMatrix) -> Result<SymplecticMatrix> {
        check_same_shape(&self.0, &rhs.0)?;
        Ok(Self(&self.0 * &rhs.0))
    }
}

/// An `N×N` complex matrix with `U U† = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(DMatrix<Complex64>);

impl UnitaryMatrix {
    /// Validates unitarity at [`STRUCTURE_TOL`].
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        Self::with_tolerance(m, STRUCTURE_TOL)
    }

    pub fn with_tolerance(m: DMatrix<Complex64>, tol: f64) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: "non-empty square matrix".into(),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        let residual = unitarity_residual(&m);
        if residual > tol {
            return Err(Error::NotUnitary { residual });
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<Complex64>) -> Self {
        Self(m)
    }

    pub fn identity(n: ModeCount) -> Self {
        Self(DMatrix::identity(n.get(), n.get()))
    }

    pub fn modes(&self) -> ModeCount {
        ModeCount(self.0.nrows())
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn real_part(&self) -> DMatrix<f64> {
        self.0.map(|z| z.re)
    }

    pub fn imag_part(&self) -> DMatrix<f64> {
        self.0.map(|z| z.im)
    }
}

/// Max entrywise deviation of `U U†` from the identity.
pub fn unitarity_residual(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let prod = m * m.adjoint();
    let eye = DMatrix::<Complex64>::identity(n, n);
    (prod - eye).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// First and second moments of an N-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state, checking dimensions, covariance symmetry and positive
    /// semi-definiteness at [`STRUCTURE_TOL`].
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        ModeCount::from_dim(mean.len())?;
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} covariance", mean.len()),
                found: format!("{}x{}", cov.nrows(), cov.ncols()),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > STRUCTURE_TOL {
            return Err(Error::InvalidState(format!(
                "covariance not symmetric (deviation {asym:.3e})"
            )));
        }
        let min_eig = cov.clone().symmetric_eigenvalues().min();
        if min_eig < -STRUCTURE_TOL {
            return Err(Error::InvalidState(format!(
                "covariance not positive semi-definite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self { mean, cov })
    }

    pub(crate) fn from_parts_unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn modes(&self) -> ModeCount {
        ModeCount(self.mean.len() / 2)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn with_mean(self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("mean of length {}", self.mean.len()),
                found: mean.len().to_string(),
            });
        }
        Ok(Self { mean, ..self })
    }
}

/// The symplectic form `[[0, I], [-I, 0]]` for `n` modes.
pub fn symplectic_form(n: ModeCount) -> DMatrix<f64> {
    let k = n.get();
    DMatrix::from_fn(2 * k, 2 * k, |r, c| {
        if c == r + k {
            1.0
        } else if r == c + k {
            -1.0
        } else {
            0.0
        }
    })
}

/// Max entrywise `|S J Sᵀ - J|`.
pub fn symplectic_residual(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let n = ModeCount::from_dim(m.nrows())?;
    let j = symplectic_form(n);
    Ok((m * &j * m.transpose() - j).amax())
}

pub fn is_symplectic(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(symplectic_residual(m)? <= tol)
}

/// Passive (linear-optical) embedding `[[Re U, Im U], [-Im U, Re U]]`.
///
/// The result is both symplectic and orthogonal.
pub fn embed_unitary(u: &UnitaryMatrix) -> SymplecticMatrix {
    let n = u.modes().get();
    let m = u.as_matrix();
    let s = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = m[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => z.im,
            (false, true) => -z.im,
        }
    });
    SymplecticMatrix::from_matrix_unchecked(s)
}

/// Largest deviation of `m` from the passive block layout `[[A, B], [-B, A]]`.
pub fn passive_block_asymmetry(m: &DMatrix<f64>) -> Result<f64> {
    let n = ModeCount::from_dim(m.nrows())?.get();
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let a_diff = (m.view((0, 0), (n, n)) - m.view((n, n), (n, n))).amax();
    let b_diff = (m.view((0, n), (n, n)) + m.view((n, 0), (n, n))).amax();
    Ok(a_diff.max(b_diff))
}

/// `A + iB` read from the block-averaged layout of `m`, without any tolerance check.
pub(crate) fn symmetrized_blocks(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = m.nrows() / 2;
    DMatrix::from_fn(n, n, |r, c| {
        let re = 0.5 * (m[(r, c)] + m[(r + n, c + n)]);
        let im = 0.5 * (m[(r, c + n)] - m[(r + n, c)]);
        Complex64::new(re, im)
    })
}

/// Inverse of [`embed_unitary`].
///
/// Admits block asymmetry up to [`PASSIVE_BLOCK_TOL`] and averages the two
/// redundant copies of each block before reading off `U`.
pub fn extract_unitary(s: &SymplecticMatrix) -> Result<UnitaryMatrix> {
    let asymmetry = passive_block_asymmetry(s.as_matrix())?;
    if asymmetry > PASSIVE_BLOCK_TOL {
        return Err(Error::NotPassive { asymmetry });
    }
    UnitaryMatrix::with_tolerance(symmetrized_blocks(s.as_matrix()), PASSIVE_BLOCK_TOL)
}

pub fn vacuum_state(n: ModeCount) -> GaussianState {
    GaussianState::from_parts_unchecked(
        DVector::zeros(n.dim()),
        DMatrix::identity(n.dim(), n.dim()),
    )
}

/// Coherent state `|amplitude·e^{i phase}>` in `mode`, vacuum elsewhere.
///
/// `<X> = √2·amplitude·cos(phase)` and `<P> = √2·amplitude·sin(phase)`.
pub fn coherent_probe_state(
    n: ModeCount,
    mode: usize,
    amplitude: f64,
    phase: f64,
) -> Result<GaussianState> {
    if mode >= n.get() {
        return Err(Error::ModeOutOfRange {
            index: mode,
            modes: n.get(),
        });
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidAmplitude(amplitude));
    }
    let mut state = vacuum_state(n);
    let scale = std::f64::consts::SQRT_2 * amplitude;
    let (sin, cos) = quarter_turn_sin_cos(phase);
    state.mean[mode] = scale * cos;
    state.mean[n.get() + mode] = scale * sin;
    Ok(state)
}

/// `phase.sin_cos()`, except that multiples of π/2 give exact zeros and ones
/// (`cos(π/2)` is 6e-17 in floating point).
fn quarter_turn_sin_cos(phase: f64) -> (f64, f64) {
    use std::f64::consts::{FRAC_PI_2, PI};
    if phase == 0.0 {
        (0.0, 1.0)
    } else if phase == FRAC_PI_2 {
        (1.0, 0.0)
    } else if phase == PI || phase == -PI {
        (0.0, -1.0)
    } else if phase == -FRAC_PI_2 {
        (-1.0, 0.0)
    } else {
        phase.sin_cos()
    }
}

/// Gaussian unitary evolution: `r -> S r`, `σ -> S σ Sᵀ`.
pub fn apply_symplectic(s: &SymplecticMatrix, state: &GaussianState) -> Result<GaussianState> {
    let m = s.as_matrix();
    if m.nrows() != state.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}-dimensional state", m.nrows()),
            found: state.mean.len().to_string(),
        });
    }
    let mean = m * &state.mean;
    let cov = m * &state.cov * m.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianState::from_parts_unchecked(mean, cov))
}

/// Uniform loss on every mode: `r -> √η r`, `σ -> η σ + (1 - η) I`.
pub fn apply_uniform_loss(eta: Transmissivity, state: &GaussianState) -> GaussianState {
    let e = eta.get();
    if e == 1.0 {
        return state.clone();
    }
    let dim = state.mean.len();
    let mean = &state.mean * e.sqrt();
    let cov = &state.cov * e + DMatrix::identity(dim, dim) * (1.0 - e);
    GaussianState::from_parts_unchecked(mean, cov)
}

/// `(1/N)·‖A - B‖_F` for `2N×2N` matrices.
pub fn scaled_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(a, b)?;
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrices".into(),
            found: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let n = ModeCount::from_dim(a.nrows())?;
    Ok((a - b).norm() / n.get() as f64)
}

/// `(1/N)·‖A - B‖_F` for `N×N` complex matrices (unitary comparison).
pub fn scaled_frobenius_complex(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<f64> {
    if a.shape() != b.shape() || !a.is_square() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.nrows(), a.ncols()),
            found: format!("{}x{}", b.nrows(), b.ncols()),
        });
    }
    let sum: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
    Ok(sum.sqrt() / a.nrows() as f64)
}

fn check_same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.nrows(), a.ncols()),
            found: format!("{}x{}", b.nrows(), b.ncols()),
        });
    }
    Ok(())
}
