//! Reconstruction of a device's symplectic matrix from coherent-probe data.
//!
//! A real probe `|α>` in mode `j` produces output means `√2·α·√η·S[:, j]`; the
//! imaginary probe `|iα>` produces `√2·α·√η·S[:, N+j]`. Dividing the measured means
//! by `√2·α` therefore fills the raw estimate `S̃ = √η·S` column by column, with one
//! probe setting per column. Because `det S = 1`, `det S̃ = η^N`.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::device::{MeasurementConfig, ProbeSpec, QuadratureSampleMeans, Scheme, Shots};
use crate::error::{Error, Result};
use crate::phase_space::{scaled_frobenius, symmetrized_blocks, ModeCount};
use crate::randgen::derive_seed;

/// Anything that can be probed with a coherent state and read out with quadrature
/// detection. Implemented by the simulator; a hardware backend would implement it
/// the same way.
pub trait ProbeableDevice {
    fn n_modes(&self) -> ModeCount;

    fn probe_and_measure(
        &self,
        probe: &ProbeSpec,
        config: &MeasurementConfig,
    ) -> Result<QuadratureSampleMeans>;
}

impl<D: ProbeableDevice + ?Sized> ProbeableDevice for &D {
    fn n_modes(&self) -> ModeCount {
        (**self).n_modes()
    }

    fn probe_and_measure(
        &self,
        probe: &ProbeSpec,
        config: &MeasurementConfig,
    ) -> Result<QuadratureSampleMeans> {
        (**self).probe_and_measure(probe, config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    /// Raw, loss-attenuated estimate `S̃`.
    pub s_tilde: DMatrix<f64>,
    pub eta_hat: f64,
    /// `S̃ / √eta_hat`.
    pub s_recon: DMatrix<f64>,
    pub amplitude: f64,
    pub scheme: Scheme,
    pub shots: Shots,
}

impl ReconstructionResult {
    /// Recovers `eta` from `det(s_tilde)` and rescales.
    pub fn from_raw(s_tilde: DMatrix<f64>, amplitude: f64, scheme: Scheme, shots: Shots) -> Result<Self> {
        let eta_hat = estimate_eta(&s_tilde)?;
        let s_recon = &s_tilde / eta_hat.sqrt();
        Ok(Self {
            s_tilde,
            eta_hat,
            s_recon,
            amplitude,
            scheme,
            shots,
        })
    }

    /// Scaled Frobenius distance of `s_recon` from `truth`.
    pub fn frobenius_vs(&self, truth: &DMatrix<f64>) -> Result<f64> {
        scaled_frobenius(truth, &self.s_recon)
    }
}

fn check_amplitude(amplitude: f64) -> Result<()> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidAmplitude(amplitude));
    }
    Ok(())
}

/// `det(S̃)^{1/N}` for the positive real root.
pub fn estimate_eta(s_tilde: &DMatrix<f64>) -> Result<f64> {
    if !s_tilde.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", s_tilde.nrows(), s_tilde.ncols()),
        });
    }
    let n = ModeCount::from_dim(s_tilde.nrows())?;
    let det = s_tilde.clone().determinant();
    if !(det > 0.0) {
        return Err(Error::LossRecoveryFailure { det });
    }
    Ok(det.powf(1.0 / n.get() as f64))
}

/// Fills the raw estimate `S̃` with `2N` probe settings.
///
/// Setting `2j` is the real probe into mode `j` (column `j`), setting `2j + 1` the
/// imaginary probe (column `N + j`). Each setting measures with its own seed
/// derived from `config.seed`.
pub fn measure_raw_symplectic<D: ProbeableDevice + ?Sized>(
    device: &D,
    amplitude: f64,
    config: &MeasurementConfig,
) -> Result<DMatrix<f64>> {
    check_amplitude(amplitude)?;
    config.validate()?;
    let n = device.n_modes().get();
    let scale = SQRT_2 * amplitude;
    let mut s_tilde = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        let settings = [
            (ProbeSpec::real(j, amplitude), j),
            (ProbeSpec::imaginary(j, amplitude), n + j),
        ];
        for (k, (probe, col)) in settings.into_iter().enumerate() {
            let cfg = config.with_seed(derive_seed(config.seed, (2 * j + k) as u64));
            let means = device.probe_and_measure(&probe, &cfg)?;
            for i in 0..n {
                s_tilde[(i, col)] = means.x_means[i] / scale;
                s_tilde[(n + i, col)] = means.p_means[i] / scale;
            }
        }
    }
    Ok(s_tilde)
}

/// Full reconstruction: raw estimate, loss recovery, rescaling.
pub fn reconstruct_symplectic<D: ProbeableDevice + ?Sized>(
    device: &D,
    amplitude: f64,
    config: &MeasurementConfig,
) -> Result<ReconstructionResult> {
    let s_tilde = measure_raw_symplectic(device, amplitude, config)?;
    ReconstructionResult::from_raw(s_tilde, amplitude, config.scheme, config.shots)
}

/// Unitary read off a full symplectic reconstruction of a passive device, averaging
/// the two redundant copies of `Re U` and `Im U`.
pub fn symmetrized_unitary(s_recon: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
    if !s_recon.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", s_recon.nrows(), s_recon.ncols()),
        });
    }
    ModeCount::from_dim(s_recon.nrows())?;
    Ok(symmetrized_blocks(s_recon))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryReconstruction {
    /// Loss-corrected estimate of `U`.
    pub u_hat: DMatrix<Complex64>,
    pub eta_hat: f64,
    /// `‖Û Û† - I‖_F`.
    pub unitarity_residual: f64,
    /// Predicted RMS of the residual from shot noise alone.
    pub noise_scale: f64,
}

/// Passive-device shortcut: `N` real probes only.
///
/// Column `j` of `U` is read as `(x̄ - i·p̄)/(√2 α)` because the real probe sees
/// `[Re U; -Im U]`. Loss is recovered from `|det Û| = η^{N/2}`. Fails with
/// [`Error::NonPassiveDevice`] when the residual exceeds ten times the shot-noise
/// prediction.
pub fn reconstruct_unitary<D: ProbeableDevice + ?Sized>(
    device: &D,
    amplitude: f64,
    config: &MeasurementConfig,
) -> Result<UnitaryReconstruction> {
    check_amplitude(amplitude)?;
    config.validate()?;
    let n = device.n_modes().get();
    let scale = SQRT_2 * amplitude;
    let mut raw = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let cfg = config.with_seed(derive_seed(config.seed, j as u64));
        let means = device.probe_and_measure(&ProbeSpec::real(j, amplitude), &cfg)?;
        for i in 0..n {
            raw[(i, j)] = Complex64::new(means.x_means[i], -means.p_means[i]) / scale;
        }
    }

    let abs_det = raw.clone().determinant().norm();
    if !(abs_det > 0.0 && abs_det.is_finite()) {
        return Err(Error::LossRecoveryFailure { det: abs_det });
    }
    let eta_hat = abs_det.powf(2.0 / n as f64);
    let u_hat = raw / Complex64::new(eta_hat.sqrt(), 0.0);

    let eye = DMatrix::<Complex64>::identity(n, n);
    let unitarity_residual = (&u_hat * u_hat.adjoint() - eye).norm();
    // a coherent probe through a passive device stays coherent: unit quadrature variance
    let (vx, vp) = config.sample_mean_variances(1.0, 1.0);
    let noise_scale = n as f64 * ((vx + vp) / (amplitude * amplitude * eta_hat)).sqrt();
    let threshold = (10.0 * noise_scale).max(1e-8);
    if unitarity_residual > threshold {
        return Err(Error::NonPassiveDevice {
            residual: unitarity_residual,
            threshold,
        });
    }
    Ok(UnitaryReconstruction {
        u_hat,
        eta_hat,
        unitarity_residual,
        noise_scale,
    })
}

/// Estimate of `S[row, col]` from a real probe whose phase is off by `phi`.
///
/// Returns the measured output mean divided by `√2·amplitude`; with exact means
/// this is `S[row, col]·cos φ + S[row, N+col]·sin φ` for `row < N`.
pub fn reconstruct_element_with_phase_error<D: ProbeableDevice + ?Sized>(
    device: &D,
    row: usize,
    col: usize,
    amplitude: f64,
    phi: f64,
    config: &MeasurementConfig,
) -> Result<f64> {
    check_amplitude(amplitude)?;
    config.validate()?;
    if !(phi.abs() < std::f64::consts::FRAC_PI_4) {
        return Err(Error::InvalidArgument(format!(
            "phase error must satisfy |phi| < pi/4, got {phi}"
        )));
    }
    let n = device.n_modes().get();
    if col >= n {
        return Err(Error::ModeOutOfRange { index: col, modes: n });
    }
    if row >= 2 * n {
        return Err(Error::ModeOutOfRange { index: row, modes: n });
    }
    let means = device.probe_and_measure(&ProbeSpec::new(col, amplitude, phi), config)?;
    let out = if row < n {
        means.x_means[row]
    } else {
        means.p_means[row - n]
    };
    Ok(out / (SQRT_2 * amplitude))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub non_gaussian: bool,
    /// `<P_out> / <X_in>` per amplitude, in input order.
    pub ratios: Vec<f64>,
    /// Largest pairwise difference between ratios.
    pub max_spread: f64,
    pub tolerance: f64,
}

fn check_detection_amplitudes(amplitudes: &[f64]) -> Result<()> {
    if amplitudes.len() < 2 {
        return Err(Error::InvalidArgument(
            "non-Gaussianity detection needs at least two probe amplitudes".into(),
        ));
    }
    for &a in amplitudes {
        check_amplitude(a)?;
    }
    for (k, a) in amplitudes.iter().enumerate() {
        if amplitudes[k + 1..].contains(a) {
            return Err(Error::InvalidArgument(format!(
                "probe amplitudes must be distinct, {a} repeats"
            )));
        }
    }
    Ok(())
}

/// Shot-noise standard error of the ratio `p̄ / (√2 α)` for a vacuum-level output
/// momentum variance.
pub fn ratio_standard_error(amplitude: f64, config: &MeasurementConfig) -> f64 {
    let (_, vp) = config.sample_mean_variances(1.0, 1.0);
    vp.sqrt() / (SQRT_2 * amplitude)
}

/// Five standard errors of the difference between the two noisiest ratios.
pub fn default_detection_tolerance(amplitudes: &[f64], config: &MeasurementConfig) -> f64 {
    let mut se: Vec<f64> = amplitudes
        .iter()
        .map(|&a| ratio_standard_error(a, config))
        .collect();
    se.sort_by(|a, b| b.total_cmp(a));
    let combined = match se.as_slice() {
        [a, b, ..] => (a * a + b * b).sqrt(),
        [a] => *a,
        [] => 0.0,
    };
    (5.0 * combined).max(1e-9)
}

/// Probes a single-mode device with real coherent states of several amplitudes and
/// flags non-Gaussian dynamics when `<P_out>/<X_in>` depends on the amplitude by
/// more than `tol`.
pub fn detect_non_gaussian<D: ProbeableDevice + ?Sized>(
    device: &D,
    amplitudes: &[f64],
    config: &MeasurementConfig,
    tol: f64,
) -> Result<DetectionOutcome> {
    check_detection_amplitudes(amplitudes)?;
    config.validate()?;
    if device.n_modes().get() != 1 {
        return Err(Error::Unsupported(format!(
            "non-Gaussianity detection is defined for single-mode devices, got {}",
            device.n_modes()
        )));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be non-negative, got {tol}")));
    }
    let mut ratios = Vec::with_capacity(amplitudes.len());
    for (k, &a) in amplitudes.iter().enumerate() {
        let cfg = config.with_seed(derive_seed(config.seed, k as u64));
        let means = device.probe_and_measure(&ProbeSpec::real(0, a), &cfg)?;
        ratios.push(means.p_means[0] / (SQRT_2 * a));
    }
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_spread = max - min;
    Ok(DetectionOutcome {
        non_gaussian: max_spread > tol,
        ratios,
        max_spread,
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DeviceModel;
    use crate::phase_space::{
        embed_unitary, symplectic_form, SymplecticMatrix, Transmissivity, UnitaryMatrix,
    };
    use crate::randgen::{haar_unitary, random_symplectic, SqueezeSpec};

    fn modes(n: usize) -> ModeCount {
        ModeCount::new(n).unwrap()
    }

    fn exact() -> MeasurementConfig {
        MeasurementConfig::exact(Scheme::Heterodyne)
    }

    fn lossy(s: SymplecticMatrix, eta: f64) -> DeviceModel {
        DeviceModel::new(s, Transmissivity::new(eta).unwrap(), None).unwrap()
    }

    #[test]
    fn exact_inversion_lossless() {
        for seed in 0..10 {
            let s = random_symplectic(modes(3), SqueezeSpec::default(), seed);
            let res = reconstruct_symplectic(&DeviceModel::lossless(s.clone()), 1.3, &exact()).unwrap();
            assert!((res.s_recon - s.as_matrix()).amax() <= 1e-12);
        }
    }

    #[test]
    fn half_loss_two_modes() {
        let s = random_symplectic(modes(2), SqueezeSpec::default(), 3);
        let res = reconstruct_symplectic(&lossy(s.clone(), 0.5), 2.0, &exact()).unwrap();
        assert!((res.s_tilde.clone().determinant() - 0.25).abs() < 1e-12);
        assert!((res.eta_hat - 0.5).abs() < 1e-12);
        assert!((res.s_recon - s.as_matrix()).amax() < 1e-12);
    }

    #[test]
    fn estimate_eta_examples() {
        assert_eq!(estimate_eta(&DMatrix::identity(2, 2)).unwrap(), 1.0);
        assert!((estimate_eta(&(DMatrix::identity(2, 2) * 0.5)).unwrap() - 0.25).abs() < 1e-15);
        let s = random_symplectic(modes(3), SqueezeSpec::default(), 21);
        let eta = estimate_eta(&(s.as_matrix() * 0.5f64.sqrt())).unwrap();
        assert!((eta - 0.5).abs() < 1e-10);
    }

    #[test]
    fn estimate_eta_rejects_non_positive_det() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 0)] = -1.0;
        assert!(matches!(estimate_eta(&m), Err(Error::LossRecoveryFailure { .. })));
        assert!(matches!(
            estimate_eta(&DMatrix::zeros(4, 4)),
            Err(Error::LossRecoveryFailure { .. })
        ));
    }

    #[test]
    fn zero_amplitude_is_rejected() {
        let d = DeviceModel::lossless(SymplecticMatrix::identity(modes(1)));
        assert!(matches!(
            reconstruct_symplectic(&d, 0.0, &exact()),
            Err(Error::InvalidAmplitude(_))
        ));
    }

    #[test]
    fn unitary_identity_and_phase() {
        let d = DeviceModel::lossless(SymplecticMatrix::identity(modes(2)));
        let rec = reconstruct_unitary(&d, 1.0, &exact()).unwrap();
        assert!((rec.u_hat - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-15);

        let i = UnitaryMatrix::new(DMatrix::from_element(1, 1, Complex64::new(0.0, 1.0))).unwrap();
        let d = DeviceModel::lossless(embed_unitary(&i));
        // real probe: output mean (0, -√2α), read as (0 - i·(-√2α))/(√2α) = i
        let rec = reconstruct_unitary(&d, 1.0, &exact()).unwrap();
        assert!((rec.u_hat[(0, 0)] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn lossy_haar_unitary_is_recovered() {
        let u = haar_unitary(modes(4), 12);
        let d = lossy(embed_unitary(&u), 0.5);
        let rec = reconstruct_unitary(&d, 3.0, &exact()).unwrap();
        assert!((rec.eta_hat - 0.5).abs() < 1e-12);
        assert!((rec.u_hat - u.as_matrix()).camax() < 1e-10);
    }

    #[test]
    fn unitary_shortcut_rejects_active_device() {
        let s = random_symplectic(modes(3), SqueezeSpec::new(0.5).unwrap(), 2);
        let d = DeviceModel::lossless(s);
        let cfg = MeasurementConfig::new(Scheme::Heterodyne, Shots::Finite(100), 4);
        assert!(matches!(
            reconstruct_unitary(&d, 1000.0, &cfg),
            Err(Error::NonPassiveDevice { .. })
        ));
    }

    #[test]
    fn finite_shot_unitary_residual_within_noise() {
        let u = haar_unitary(modes(4), 5);
        let d = lossy(embed_unitary(&u), 0.7);
        for scheme in Scheme::ALL {
            let cfg = MeasurementConfig::new(scheme, Shots::Finite(100), 9);
            let rec = reconstruct_unitary(&d, 10.0, &cfg).unwrap();
            assert!(rec.unitarity_residual < 10.0 * rec.noise_scale);
            assert!(rec.noise_scale > 0.0);
        }
    }

    #[test]
    fn symmetrized_unitary_from_full_reconstruction() {
        let u = haar_unitary(modes(3), 44);
        let d = DeviceModel::lossless(embed_unitary(&u));
        let res = reconstruct_symplectic(&d, 1.0, &exact()).unwrap();
        let u_hat = symmetrized_unitary(&res.s_recon).unwrap();
        assert!((u_hat - u.as_matrix()).camax() < 1e-12);
    }

    #[test]
    fn phase_error_examples() {
        let j = SymplecticMatrix::new(symplectic_form(modes(1))).unwrap();
        let d = DeviceModel::lossless(j);
        // S[0,0] = 0, S[0,1] = 1
        let v = reconstruct_element_with_phase_error(&d, 0, 0, 1.0, 0.0, &exact()).unwrap();
        assert!(v.abs() < 1e-15);
        let v = reconstruct_element_with_phase_error(&d, 0, 0, 1.0, 0.05, &exact()).unwrap();
        assert!((v - 0.049_979_2).abs() < 1e-7);
        assert!((v - 0.05f64.sin()).abs() < 1e-15);
        assert!(reconstruct_element_with_phase_error(&d, 0, 0, 1.0, 0.8, &exact()).is_err());
    }

    #[test]
    fn phase_error_matches_trig_expansion() {
        let s = random_symplectic(modes(3), SqueezeSpec::default(), 61);
        let d = DeviceModel::lossless(s.clone());
        let m = s.as_matrix();
        for (i, j, phi) in [(0, 0, 0.03), (2, 1, -0.1), (1, 2, 0.2)] {
            let v = reconstruct_element_with_phase_error(&d, i, j, 2.0, phi, &exact()).unwrap();
            let expected = m[(i, j)] * phi.cos() + m[(i, 3 + j)] * phi.sin();
            assert!((v - expected).abs() < 1e-13);
        }
    }

    fn cubic_device(gamma: f64) -> DeviceModel {
        DeviceModel::new(SymplecticMatrix::identity(modes(1)), Transmissivity::LOSSLESS, Some(gamma)).unwrap()
    }

    #[test]
    fn detection_examples() {
        let out = detect_non_gaussian(&cubic_device(0.0), &[1.0, 2.0], &exact(), 1e-9).unwrap();
        assert!(!out.non_gaussian);
        assert_eq!(out.ratios[0], out.ratios[1]);

        let out = detect_non_gaussian(&cubic_device(0.1), &[1.0, 2.0], &exact(), 1e-9).unwrap();
        assert!(out.non_gaussian);
        assert!((out.ratios[0] - 0.424_26).abs() < 1e-5);
        assert!((out.ratios[1] - 0.848_53).abs() < 1e-5);

        assert!(detect_non_gaussian(&cubic_device(0.1), &[1.0, 1.0], &exact(), 1e-9).is_err());
        assert!(detect_non_gaussian(&cubic_device(0.1), &[1.0], &exact(), 1e-9).is_err());
    }

    #[test]
    fn detection_needs_single_mode() {
        let d = DeviceModel::lossless(SymplecticMatrix::identity(modes(2)));
        assert!(matches!(
            detect_non_gaussian(&d, &[1.0, 2.0], &exact(), 0.1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn default_tolerance_scales_with_shots() {
        let amps = [1.0, 2.0];
        let t100 = default_detection_tolerance(&amps, &MeasurementConfig::new(Scheme::Heterodyne, Shots::Finite(100), 0));
        let t400 = default_detection_tolerance(&amps, &MeasurementConfig::new(Scheme::Heterodyne, Shots::Finite(400), 0));
        assert!((t100 / t400 - 2.0).abs() < 1e-12);
        // σ_pp = 1: Var p̄ = 1/M for both schemes
        let expected = 5.0 * ((0.01f64 / 2.0) + (0.01 / 8.0)).sqrt();
        assert!((t100 - expected).abs() < 1e-15);
        assert_eq!(default_detection_tolerance(&amps, &exact()), 1e-9);
    }
}
