//! Scripted reconstruction studies.
//!
//! Each study sweeps a parameter grid, runs independent repetitions in parallel and
//! aggregates the scaled Frobenius error into one [`ExperimentRecord`] per grid
//! point. Every repetition draws its device and measurement noise from seeds
//! derived from the master seed and its grid coordinates, so output does not
//! depend on thread scheduling.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{CountingDevice, DeviceModel, MeasurementConfig, Scheme, Shots};
use crate::error::{Error, Result};
use crate::phase_space::{
    embed_unitary, scaled_frobenius, scaled_frobenius_complex, ModeCount, SymplecticMatrix,
    Transmissivity,
};
use crate::randgen::{
    derive_seed, derive_seed_path, haar_unitary, random_symplectic, rng_from_seed, RngSeed,
    SqueezeSpec,
};
use crate::tomography::{
    measure_raw_symplectic, reconstruct_element_with_phase_error, reconstruct_symplectic,
    reconstruct_unitary, ReconstructionResult,
};

const DEVICE_STREAM: u64 = 0;
const MEASURE_STREAM: u64 = 1;
const PHASE_STREAM: u64 = 2;

/// One aggregated grid point. `f_mean`/`f_stderr` are over the repetitions that
/// did not fail loss recovery; `dropped` counts those that did. `probes` is the
/// total number of coherent probes sent through the devices. `shots` of 0 means
/// exact means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment_id: String,
    pub n_modes: usize,
    pub scheme: String,
    pub eta: f64,
    pub amplitude: f64,
    pub shots: u64,
    pub trials: usize,
    pub repetitions: usize,
    pub f_mean: f64,
    pub f_stderr: f64,
    pub seed: RngSeed,
    pub dropped: usize,
    pub probes: u64,
}

/// Mean and standard error of the mean (sample standard deviation over `√n`).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

struct Outcome {
    error: Option<f64>,
    probes: u64,
}

/// Turns per-repetition outcomes into a record, treating numerical failures as
/// dropped repetitions and propagating anything else.
fn aggregate(
    outcomes: Vec<Result<Outcome>>,
    template: ExperimentRecord,
) -> Result<ExperimentRecord> {
    let mut errors = Vec::with_capacity(outcomes.len());
    let mut dropped = 0;
    let mut probes = 0;
    for o in outcomes {
        let o = o?;
        probes += o.probes;
        match o.error {
            Some(f) => errors.push(f),
            None => dropped += 1,
        }
    }
    let (f_mean, f_stderr) = mean_and_stderr(&errors);
    Ok(ExperimentRecord {
        f_mean,
        f_stderr,
        dropped,
        probes,
        ..template
    })
}

fn numerical_to_dropped(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(f) => Ok(Some(f)),
        Err(e) if e.is_numerical() => Ok(None),
        Err(e) => Err(e),
    }
}

fn check_common(amplitude: f64, repetitions: usize, schemes: &[Scheme], shots: Shots) -> Result<()> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidAmplitude(amplitude));
    }
    if repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
    }
    if schemes.is_empty() {
        return Err(Error::InvalidArgument("no detection scheme selected".into()));
    }
    for &scheme in schemes {
        MeasurementConfig::new(scheme, shots, 0).validate()?;
    }
    Ok(())
}

fn check_modes(modes: &[usize]) -> Result<Vec<ModeCount>> {
    if modes.is_empty() {
        return Err(Error::InvalidArgument("mode list is empty".into()));
    }
    modes.iter().map(|&n| ModeCount::new(n)).collect()
}

fn check_etas(etas: &[f64]) -> Result<Vec<Transmissivity>> {
    if etas.is_empty() {
        return Err(Error::InvalidArgument("transmissivity list is empty".into()));
    }
    etas.iter().map(|&e| Transmissivity::new(e)).collect()
}

fn scheme_index(s: Scheme) -> u64 {
    match s {
        Scheme::Homodyne => 0,
        Scheme::Heterodyne => 1,
    }
}

/// Random symplectic devices over a grid of mode counts, schemes and losses.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeScalingConfig {
    pub modes: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub etas: Vec<f64>,
    pub amplitude: f64,
    pub shots: Shots,
    pub repetitions: usize,
    pub squeeze: SqueezeSpec,
    pub seed: RngSeed,
}

impl Default for ModeScalingConfig {
    fn default() -> Self {
        Self {
            modes: vec![2, 4, 8],
            schemes: Scheme::ALL.to_vec(),
            etas: vec![1.0, 0.5],
            amplitude: 1000.0,
            shots: Shots::Finite(100),
            repetitions: 50,
            squeeze: SqueezeSpec::default(),
            seed: 0,
        }
    }
}

/// Every scheme and loss level at a given `(N, repetition)` sees the same device;
/// the probe budget per setting is the same shot count for both schemes.
pub fn run_mode_scaling(cfg: &ModeScalingConfig) -> Result<Vec<ExperimentRecord>> {
    let modes = check_modes(&cfg.modes)?;
    let etas = check_etas(&cfg.etas)?;
    check_common(cfg.amplitude, cfg.repetitions, &cfg.schemes, cfg.shots)?;

    let mut records = Vec::new();
    for &n in &modes {
        for &scheme in &cfg.schemes {
            for (ei, &eta) in etas.iter().enumerate() {
                let outcomes: Vec<Result<Outcome>> = (0..cfg.repetitions)
                    .into_par_iter()
                    .map(|rep| {
                        let rep = rep as u64;
                        let dev_seed = derive_seed_path(cfg.seed, &[DEVICE_STREAM, n.get() as u64, rep]);
                        let s = random_symplectic(n, cfg.squeeze, dev_seed);
                        let device = CountingDevice::new(DeviceModel::new(s, eta, None)?);
                        let meas_seed = derive_seed_path(
                            cfg.seed,
                            &[MEASURE_STREAM, n.get() as u64, scheme_index(scheme), ei as u64, rep],
                        );
                        let mcfg = MeasurementConfig::new(scheme, cfg.shots, meas_seed);
                        let error = numerical_to_dropped(
                            reconstruct_symplectic(&device, cfg.amplitude, &mcfg)
                                .and_then(|r| r.frobenius_vs(device.inner().symplectic().as_matrix())),
                        )?;
                        Ok(Outcome {
                            error,
                            probes: device.probes(),
                        })
                    })
                    .collect();
                records.push(aggregate(
                    outcomes,
                    template("mode-scaling", n.get(), scheme, eta.get(), cfg.amplitude, cfg.shots, 1, cfg.repetitions, cfg.seed),
                )?);
            }
        }
    }
    Ok(records)
}

#[allow(clippy::too_many_arguments)]
fn template(
    id: &str,
    n_modes: usize,
    scheme: Scheme,
    eta: f64,
    amplitude: f64,
    shots: Shots,
    trials: usize,
    repetitions: usize,
    seed: RngSeed,
) -> ExperimentRecord {
    ExperimentRecord {
        experiment_id: id.to_string(),
        n_modes,
        scheme: scheme.to_string(),
        eta,
        amplitude,
        shots: shots.as_count(),
        trials,
        repetitions,
        f_mean: 0.0,
        f_stderr: 0.0,
        seed,
        dropped: 0,
        probes: 0,
    }
}

/// Haar-random passive devices reconstructed with the `N`-setting shortcut.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryScalingConfig {
    pub modes: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub etas: Vec<f64>,
    pub amplitude: f64,
    pub shots: Shots,
    pub repetitions: usize,
    pub seed: RngSeed,
}

impl Default for UnitaryScalingConfig {
    fn default() -> Self {
        Self {
            modes: vec![2, 4, 8],
            schemes: Scheme::ALL.to_vec(),
            etas: vec![1.0, 0.5],
            amplitude: 1000.0,
            shots: Shots::Finite(100),
            repetitions: 50,
            seed: 0,
        }
    }
}

/// The error metric is `(1/N)·‖U - Û‖_F` on the complex `N×N` matrices.
pub fn run_unitary_scaling(cfg: &UnitaryScalingConfig) -> Result<Vec<ExperimentRecord>> {
    let modes = check_modes(&cfg.modes)?;
    let etas = check_etas(&cfg.etas)?;
    check_common(cfg.amplitude, cfg.repetitions, &cfg.schemes, cfg.shots)?;

    let mut records = Vec::new();
    for &n in &modes {
        for &scheme in &cfg.schemes {
            for (ei, &eta) in etas.iter().enumerate() {
                let outcomes: Vec<Result<Outcome>> = (0..cfg.repetitions)
                    .into_par_iter()
                    .map(|rep| {
                        let rep = rep as u64;
                        let u = haar_unitary(n, derive_seed_path(cfg.seed, &[DEVICE_STREAM, n.get() as u64, rep]));
                        let device = CountingDevice::new(DeviceModel::new(embed_unitary(&u), eta, None)?);
                        let meas_seed = derive_seed_path(
                            cfg.seed,
                            &[MEASURE_STREAM, n.get() as u64, scheme_index(scheme), ei as u64, rep],
                        );
                        let mcfg = MeasurementConfig::new(scheme, cfg.shots, meas_seed);
                        let error = numerical_to_dropped(
                            reconstruct_unitary(&device, cfg.amplitude, &mcfg)
                                .and_then(|r| scaled_frobenius_complex(u.as_matrix(), &r.u_hat)),
                        )?;
                        Ok(Outcome {
                            error,
                            probes: device.probes(),
                        })
                    })
                    .collect();
                records.push(aggregate(
                    outcomes,
                    template("unitary-scaling", n.get(), scheme, eta.get(), cfg.amplitude, cfg.shots, 1, cfg.repetitions, cfg.seed),
                )?);
            }
        }
    }
    Ok(records)
}

/// One fixed random device probed at several amplitudes, averaging `n` raw
/// reconstructions elementwise before loss recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityConfig {
    pub modes: usize,
    pub amplitudes: Vec<f64>,
    pub trials: Vec<usize>,
    pub scheme: Scheme,
    pub eta: f64,
    pub shots: Shots,
    pub repetitions: usize,
    pub squeeze: SqueezeSpec,
    pub seed: RngSeed,
}

impl Default for IntensityConfig {
    fn default() -> Self {
        Self {
            modes: 5,
            amplitudes: vec![10.0, 10f64.powf(1.5), 100.0],
            trials: vec![1, 10, 100],
            scheme: Scheme::Heterodyne,
            eta: 1.0,
            shots: Shots::Finite(10),
            repetitions: 50,
            squeeze: SqueezeSpec::default(),
            seed: 0,
        }
    }
}

/// The device used by [`run_intensity_scaling`] for a given configuration.
pub fn intensity_device(cfg: &IntensityConfig) -> Result<SymplecticMatrix> {
    let n = ModeCount::new(cfg.modes)?;
    Ok(random_symplectic(n, cfg.squeeze, derive_seed(cfg.seed, DEVICE_STREAM)))
}

pub fn run_intensity_scaling(cfg: &IntensityConfig) -> Result<Vec<ExperimentRecord>> {
    check_common(1.0, cfg.repetitions, &[cfg.scheme], cfg.shots)?;
    if cfg.amplitudes.is_empty() || cfg.trials.is_empty() {
        return Err(Error::InvalidArgument("amplitude and trial lists must be non-empty".into()));
    }
    if let Some(&a) = cfg.amplitudes.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidAmplitude(a));
    }
    if cfg.trials.contains(&0) {
        return Err(Error::InvalidArgument("trial counts must be at least 1".into()));
    }
    let eta = Transmissivity::new(cfg.eta)?;
    let s = intensity_device(cfg)?;
    let truth = s.as_matrix().clone();
    let device = DeviceModel::new(s, eta, None)?;

    let mut records = Vec::new();
    for (ai, &amplitude) in cfg.amplitudes.iter().enumerate() {
        for (ti, &n_trials) in cfg.trials.iter().enumerate() {
            let outcomes: Vec<Result<Outcome>> = (0..cfg.repetitions)
                .into_par_iter()
                .map(|rep| {
                    let counted = CountingDevice::new(&device);
                    let dim = truth.nrows();
                    let mut sum = DMatrix::<f64>::zeros(dim, dim);
                    for t in 0..n_trials {
                        let seed = derive_seed_path(
                            cfg.seed,
                            &[MEASURE_STREAM, ai as u64, ti as u64, rep as u64, t as u64],
                        );
                        let mcfg = MeasurementConfig::new(cfg.scheme, cfg.shots, seed);
                        sum += measure_raw_symplectic(&counted, amplitude, &mcfg)?;
                    }
                    let s_tilde = sum / n_trials as f64;
                    let error = numerical_to_dropped(
                        ReconstructionResult::from_raw(s_tilde, amplitude, cfg.scheme, cfg.shots)
                            .and_then(|r| scaled_frobenius(&truth, &r.s_recon)),
                    )?;
                    Ok(Outcome {
                        error,
                        probes: counted.probes(),
                    })
                })
                .collect();
            records.push(aggregate(
                outcomes,
                template("intensity", cfg.modes, cfg.scheme, cfg.eta, amplitude, cfg.shots, n_trials, cfg.repetitions, cfg.seed),
            )?);
        }
    }
    Ok(records)
}

/// Repeated single-element estimates with a random probe phase error
/// `φ ~ Uniform(-phi_max, phi_max)`, averaged over `n` trials.
///
/// `f_mean` is the mean absolute error `|avg - S[row, col]|` over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseErrorConfig {
    pub device: SymplecticMatrix,
    pub row: usize,
    pub col: usize,
    pub phi_max: f64,
    pub trials: Vec<usize>,
    pub repetitions: usize,
    pub amplitude: f64,
    pub scheme: Scheme,
    pub shots: Shots,
    pub seed: RngSeed,
}

impl PhaseErrorConfig {
    /// Study of element `(row, col)` of `device` with exact means and unit amplitude.
    pub fn exact(device: SymplecticMatrix, row: usize, col: usize, phi_max: f64, trials: Vec<usize>) -> Self {
        Self {
            device,
            row,
            col,
            phi_max,
            trials,
            repetitions: 200,
            amplitude: 1.0,
            scheme: Scheme::Heterodyne,
            shots: Shots::Exact,
            seed: 0,
        }
    }

    /// First-order prediction of the single-trial mean absolute error,
    /// `E|φ|·|S[row, N+col]| = (phi_max/2)·|S[row, N+col]|`.
    pub fn first_order_prediction(&self) -> f64 {
        let n = self.device.modes().get();
        0.5 * self.phi_max * self.device.as_matrix()[(self.row, n + self.col)].abs()
    }

    /// `sqrt(S[row, col]² + S[row, N+col]²)`, the size of the entries the phase
    /// error mixes.
    pub fn element_scale(&self) -> f64 {
        let n = self.device.modes().get();
        let m = self.device.as_matrix();
        m[(self.row, self.col)].hypot(m[(self.row, n + self.col)])
    }
}

pub fn run_phase_error_study(cfg: &PhaseErrorConfig) -> Result<Vec<ExperimentRecord>> {
    check_common(cfg.amplitude, cfg.repetitions, &[cfg.scheme], cfg.shots)?;
    if !(cfg.phi_max >= 0.0 && cfg.phi_max < std::f64::consts::FRAC_PI_4) {
        return Err(Error::InvalidArgument(format!(
            "phi_max must lie in [0, pi/4), got {}",
            cfg.phi_max
        )));
    }
    if cfg.trials.is_empty() || cfg.trials.contains(&0) {
        return Err(Error::InvalidArgument("trial counts must be at least 1".into()));
    }
    let n = cfg.device.modes().get();
    if cfg.col >= n || cfg.row >= 2 * n {
        return Err(Error::ModeOutOfRange {
            index: cfg.col.max(cfg.row),
            modes: n,
        });
    }
    let device = DeviceModel::lossless(cfg.device.clone());
    let target = cfg.device.as_matrix()[(cfg.row, cfg.col)];

    let mut records = Vec::new();
    for (ti, &n_trials) in cfg.trials.iter().enumerate() {
        let outcomes: Vec<Result<Outcome>> = (0..cfg.repetitions)
            .into_par_iter()
            .map(|rep| {
                let counted = CountingDevice::new(&device);
                let mut phases = rng_from_seed(derive_seed_path(cfg.seed, &[PHASE_STREAM, ti as u64, rep as u64]));
                let mut sum = 0.0;
                for t in 0..n_trials {
                    let phi = if cfg.phi_max > 0.0 {
                        phases.random_range(-cfg.phi_max..cfg.phi_max)
                    } else {
                        0.0
                    };
                    let seed = derive_seed_path(cfg.seed, &[MEASURE_STREAM, ti as u64, rep as u64, t as u64]);
                    let mcfg = MeasurementConfig::new(cfg.scheme, cfg.shots, seed);
                    sum += reconstruct_element_with_phase_error(&counted, cfg.row, cfg.col, cfg.amplitude, phi, &mcfg)?;
                }
                Ok(Outcome {
                    error: Some((sum / n_trials as f64 - target).abs()),
                    probes: counted.probes(),
                })
            })
            .collect();
        records.push(aggregate(
            outcomes,
            template("phase-error", n, cfg.scheme, 1.0, cfg.amplitude, cfg.shots, n_trials, cfg.repetitions, cfg.seed),
        )?);
    }
    Ok(records)
}

/// CSV with a header row, one record per line, columns in field order.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_to_csv(records: &[ExperimentRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::symplectic_form;

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_and_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        assert_eq!(mean_and_stderr(&[5.0]), (5.0, 0.0));
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exact_mode_scaling_is_zero() {
        let cfg = ModeScalingConfig {
            modes: vec![2],
            shots: Shots::Exact,
            repetitions: 5,
            ..Default::default()
        };
        let recs = run_mode_scaling(&cfg).unwrap();
        assert_eq!(recs.len(), 4);
        for r in &recs {
            assert!(r.f_mean <= 1e-12, "{r:?}");
            assert!(r.f_stderr <= 1e-12);
            assert_eq!(r.dropped, 0);
        }
    }

    #[test]
    fn rejects_zero_repetitions() {
        let cfg = ModeScalingConfig {
            repetitions: 0,
            ..Default::default()
        };
        assert!(run_mode_scaling(&cfg).is_err());
    }

    #[test]
    fn homodyne_rejects_single_shot() {
        let cfg = ModeScalingConfig {
            shots: Shots::Finite(1),
            ..Default::default()
        };
        assert!(matches!(run_mode_scaling(&cfg), Err(Error::InsufficientShots(1))));
    }

    #[test]
    fn budget_is_equal_across_schemes() {
        let cfg = ModeScalingConfig {
            modes: vec![3],
            etas: vec![1.0],
            shots: Shots::Finite(20),
            repetitions: 4,
            ..Default::default()
        };
        let recs = run_mode_scaling(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].probes, recs[1].probes);
        // 2N settings × 20 shots × 4 repetitions
        assert_eq!(recs[0].probes, 6 * 20 * 4);

        let ucfg = UnitaryScalingConfig {
            modes: vec![3],
            etas: vec![1.0],
            shots: Shots::Finite(20),
            repetitions: 4,
            ..Default::default()
        };
        let recs = run_unitary_scaling(&ucfg).unwrap();
        assert_eq!(recs[0].probes, recs[1].probes);
        assert_eq!(recs[0].probes, 3 * 20 * 4);
    }

    #[test]
    fn identity_unitary_exact_is_zero() {
        let cfg = UnitaryScalingConfig {
            modes: vec![1],
            shots: Shots::Exact,
            repetitions: 3,
            ..Default::default()
        };
        for r in run_unitary_scaling(&cfg).unwrap() {
            assert!(r.f_mean <= 1e-12);
        }
    }

    #[test]
    fn exact_intensity_is_zero() {
        let cfg = IntensityConfig {
            modes: 3,
            amplitudes: vec![0.5, 7.0],
            trials: vec![1, 3],
            shots: Shots::Exact,
            repetitions: 2,
            ..Default::default()
        };
        let recs = run_intensity_scaling(&cfg).unwrap();
        assert_eq!(recs.len(), 4);
        assert!(recs.iter().all(|r| r.f_mean <= 1e-12));
    }

    #[test]
    fn zero_phase_error_is_exact() {
        let j = SymplecticMatrix::new(symplectic_form(ModeCount::new(1).unwrap())).unwrap();
        let cfg = PhaseErrorConfig::exact(j, 0, 0, 0.0, vec![1, 10]);
        for r in run_phase_error_study(&cfg).unwrap() {
            assert_eq!(r.f_mean, 0.0);
        }
    }

    #[test]
    fn phase_error_bounds() {
        let j = SymplecticMatrix::new(symplectic_form(ModeCount::new(1).unwrap())).unwrap();
        let mut cfg = PhaseErrorConfig::exact(j, 0, 0, std::f64::consts::FRAC_PI_4, vec![1]);
        assert!(run_phase_error_study(&cfg).is_err());
        cfg.phi_max = 0.05;
        cfg.col = 1;
        assert!(run_phase_error_study(&cfg).is_err());
    }

    #[test]
    fn csv_header_and_order() {
        let cfg = ModeScalingConfig {
            modes: vec![1],
            schemes: vec![Scheme::Heterodyne],
            etas: vec![1.0],
            shots: Shots::Exact,
            repetitions: 1,
            seed: 9,
            ..Default::default()
        };
        let bytes = records_to_csv(&run_mode_scaling(&cfg).unwrap()).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "experiment_id,n_modes,scheme,eta,amplitude,shots,trials,repetitions,f_mean,f_stderr,seed,dropped,probes"
        );
        assert!(lines.next().unwrap().starts_with("mode-scaling,1,heterodyne,1.0,1000.0,0,1,1,"));
    }
}
