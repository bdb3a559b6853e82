//! Simulated Gaussian devices and quadrature detection.
//!
//! A device is uniform input loss followed by a symplectic map, optionally followed
//! by a mean-field cubic phase gate on a single mode. Detection draws finite-shot
//! homodyne or heterodyne outcomes from the output state and reduces them to
//! per-mode sample means, which is all the reconstruction ever sees.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{
    apply_symplectic, apply_uniform_loss, coherent_probe_state, GaussianState, ModeCount,
    SymplecticMatrix, Transmissivity,
};
use crate::randgen::{rng_from_seed, RngSeed};
use crate::tomography::ProbeableDevice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Homodyne,
    Heterodyne,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Homodyne, Scheme::Heterodyne];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Homodyne => "homodyne",
            Scheme::Heterodyne => "heterodyne",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "homodyne" => Ok(Scheme::Homodyne),
            "heterodyne" => Ok(Scheme::Heterodyne),
            other => Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Shots per probe setting. `Exact` returns the true output means (infinite shots).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shots {
    Exact,
    Finite(u64),
}

impl Shots {
    /// Integer form used in output records: 0 stands for `Exact`.
    pub fn as_count(self) -> u64 {
        match self {
            Shots::Exact => 0,
            Shots::Finite(m) => m,
        }
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => f.write_str("inf"),
            Shots::Finite(m) => write!(f, "{m}"),
        }
    }
}

impl FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinite" | "exact" => Ok(Shots::Exact),
            other => match other.parse::<u64>() {
                Ok(0) | Err(_) => Err(Error::InvalidArgument(format!(
                    "shots must be a positive integer or 'inf', got '{other}'"
                ))),
                Ok(m) => Ok(Shots::Finite(m)),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementConfig {
    pub scheme: Scheme,
    pub shots: Shots,
    pub seed: RngSeed,
}

impl MeasurementConfig {
    pub fn new(scheme: Scheme, shots: Shots, seed: RngSeed) -> Self {
        Self {
            scheme,
            shots,
            seed,
        }
    }

    pub fn exact(scheme: Scheme) -> Self {
        Self::new(scheme, Shots::Exact, 0)
    }

    pub fn with_seed(self, seed: RngSeed) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.scheme, self.shots) {
            (_, Shots::Finite(0)) => Err(Error::InsufficientShots(0)),
            (Scheme::Homodyne, Shots::Finite(m)) if m < 2 => Err(Error::InsufficientShots(m)),
            _ => Ok(()),
        }
    }

    /// Shots spent on `(X, P)` of every mode for one probe setting.
    ///
    /// Homodyne measures one quadrature per probe, so the budget is split, with the
    /// odd shot (if any) going to `X`. Heterodyne gets both from every probe.
    pub fn quadrature_shots(&self) -> (u64, u64) {
        match (self.scheme, self.shots) {
            (_, Shots::Exact) => (0, 0),
            (Scheme::Homodyne, Shots::Finite(m)) => (m.div_ceil(2), m / 2),
            (Scheme::Heterodyne, Shots::Finite(m)) => (m, m),
        }
    }

    /// Coherent probes consumed by one setting.
    pub fn probes_per_setting(&self) -> u64 {
        self.shots.as_count()
    }

    /// Variance of a single-shot outcome for a quadrature with state variance
    /// `quad_var` (diagonal covariance entry).
    pub fn single_shot_variance(&self, quad_var: f64) -> f64 {
        match self.scheme {
            Scheme::Homodyne => quad_var / 2.0,
            Scheme::Heterodyne => (quad_var + 1.0) / 2.0,
        }
    }

    /// Variances of the `X` and `P` sample means for quadrature variances
    /// `(var_x, var_p)`. Zero for exact measurement.
    pub fn sample_mean_variances(&self, var_x: f64, var_p: f64) -> (f64, f64) {
        let (nx, np) = self.quadrature_shots();
        if nx == 0 {
            return (0.0, 0.0);
        }
        (
            self.single_shot_variance(var_x) / nx as f64,
            self.single_shot_variance(var_p) / np as f64,
        )
    }
}

/// A coherent probe `|amplitude·e^{i phase}>` into input `mode`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec {
    pub mode: usize,
    pub amplitude: f64,
    pub phase: f64,
}

impl ProbeSpec {
    pub fn new(mode: usize, amplitude: f64, phase: f64) -> Self {
        Self {
            mode,
            amplitude,
            phase,
        }
    }

    /// Real probe `|α>`.
    pub fn real(mode: usize, amplitude: f64) -> Self {
        Self::new(mode, amplitude, 0.0)
    }

    /// Imaginary probe `|iα>`.
    pub fn imaginary(mode: usize, amplitude: f64) -> Self {
        Self::new(mode, amplitude, std::f64::consts::FRAC_PI_2)
    }
}

/// Simulated device: input loss `eta`, then `S`, then an optional cubic gate.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    s: SymplecticMatrix,
    eta: Transmissivity,
    cubic_gamma: Option<f64>,
}

impl DeviceModel {
    pub fn new(s: SymplecticMatrix, eta: Transmissivity, cubic_gamma: Option<f64>) -> Result<Self> {
        let device = Self { s, eta, cubic_gamma };
        device.check_cubic()?;
        Ok(device)
    }

    pub fn lossless(s: SymplecticMatrix) -> Self {
        Self {
            s,
            eta: Transmissivity::LOSSLESS,
            cubic_gamma: None,
        }
    }

    pub fn symplectic(&self) -> &SymplecticMatrix {
        &self.s
    }

    pub fn eta(&self) -> Transmissivity {
        self.eta
    }

    pub fn cubic_gamma(&self) -> Option<f64> {
        self.cubic_gamma
    }

    pub fn with_eta(self, eta: Transmissivity) -> Self {
        Self { eta, ..self }
    }

    pub fn modes(&self) -> ModeCount {
        self.s.modes()
    }

    fn check_cubic(&self) -> Result<()> {
        match self.cubic_gamma {
            Some(g) if !g.is_finite() => Err(Error::InvalidArgument(format!(
                "cubic gamma must be finite, got {g}"
            ))),
            Some(_) if self.modes().get() != 1 => Err(Error::Unsupported(format!(
                "cubic phase gate is modelled for a single mode only, device has {}",
                self.modes()
            ))),
            _ => Ok(()),
        }
    }
}

/// Output state of `device` for a coherent `probe`, with vacuum in all other modes.
pub fn evolve(device: &DeviceModel, probe: &ProbeSpec) -> Result<GaussianState> {
    device.check_cubic()?;
    let input = coherent_probe_state(device.modes(), probe.mode, probe.amplitude, probe.phase)?;
    let out = apply_symplectic(&device.s, &apply_uniform_loss(device.eta, &input))?;
    match device.cubic_gamma {
        Some(gamma) => {
            let mean = cubic_phase_mean_map(gamma, out.mean())?;
            out.with_mean(mean)
        }
        None => Ok(out),
    }
}

/// Mean-field cubic phase gate `e^{iγX³}`: `X -> X`, `P -> P + 3γX²`.
pub fn cubic_phase_mean_map(gamma: f64, mean: &DVector<f64>) -> Result<DVector<f64>> {
    if mean.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: "single-mode mean (length 2)".into(),
            found: mean.len().to_string(),
        });
    }
    let x = mean[0];
    Ok(DVector::from_vec(vec![x, mean[1] + 3.0 * gamma * x * x]))
}

/// Single-shot outcomes, indexed `[mode][shot]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuadratureOutcomes {
    pub x: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

/// Per-mode sample means of the measured quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSampleMeans {
    pub x_means: Vec<f64>,
    pub p_means: Vec<f64>,
    /// Smallest per-quadrature shot count behind the means; 0 for exact means.
    pub shots_per_quadrature: u64,
}

enum Sample {
    X(usize, f64),
    P(usize, f64),
}

/// Draws every shot of one setting in a fixed order and hands it to `sink`.
fn draw_shots(state: &GaussianState, config: &MeasurementConfig, mut sink: impl FnMut(Sample)) {
    let n = state.modes().get();
    let mean = state.mean();
    let cov = state.cov();
    let mut rng = rng_from_seed(config.seed);
    let (nx, np) = config.quadrature_shots();
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    match config.scheme {
        Scheme::Homodyne => {
            for i in 0..n {
                let sd_x = config.single_shot_variance(cov[(i, i)]).max(0.0).sqrt();
                let sd_p = config.single_shot_variance(cov[(n + i, n + i)]).max(0.0).sqrt();
                for _ in 0..nx {
                    sink(Sample::X(i, mean[i] + sd_x * normal()));
                }
                for _ in 0..np {
                    sink(Sample::P(i, mean[n + i] + sd_p * normal()));
                }
            }
        }
        Scheme::Heterodyne => {
            for i in 0..n {
                // Cholesky factor of the 2×2 block of (σ + I)/2
                let c_xx = (cov[(i, i)] + 1.0) / 2.0;
                let c_xp = (cov[(i, n + i)] + cov[(n + i, i)]) / 4.0;
                let c_pp = (cov[(n + i, n + i)] + 1.0) / 2.0;
                let l11 = c_xx.sqrt();
                let l21 = c_xp / l11;
                let l22 = (c_pp - l21 * l21).max(0.0).sqrt();
                for _ in 0..nx {
                    let z1 = normal();
                    let z2 = normal();
                    sink(Sample::X(i, mean[i] + l11 * z1));
                    sink(Sample::P(i, mean[n + i] + l21 * z1 + l22 * z2));
                }
            }
        }
    }
}

/// Raw single-shot outcomes for one setting. Requires a finite shot count.
pub fn sample_outcomes(state: &GaussianState, config: &MeasurementConfig) -> Result<QuadratureOutcomes> {
    config.validate()?;
    if config.shots == Shots::Exact {
        return Err(Error::InvalidArgument(
            "single-shot outcomes need a finite shot count".into(),
        ));
    }
    let n = state.modes().get();
    let mut out = QuadratureOutcomes {
        x: vec![Vec::new(); n],
        p: vec![Vec::new(); n],
    };
    draw_shots(state, config, |s| match s {
        Sample::X(i, v) => out.x[i].push(v),
        Sample::P(i, v) => out.p[i].push(v),
    });
    Ok(out)
}

/// Per-mode quadrature sample means of `state` under `config`.
pub fn measure(state: &GaussianState, config: &MeasurementConfig) -> Result<QuadratureSampleMeans> {
    config.validate()?;
    let n = state.modes().get();
    let mean = state.mean();
    if config.shots == Shots::Exact {
        return Ok(QuadratureSampleMeans {
            x_means: mean.rows(0, n).iter().copied().collect(),
            p_means: mean.rows(n, n).iter().copied().collect(),
            shots_per_quadrature: 0,
        });
    }
    let mut x_sum = vec![0.0; n];
    let mut p_sum = vec![0.0; n];
    draw_shots(state, config, |s| match s {
        Sample::X(i, v) => x_sum[i] += v,
        Sample::P(i, v) => p_sum[i] += v,
    });
    let (nx, np) = config.quadrature_shots();
    Ok(QuadratureSampleMeans {
        x_means: x_sum.into_iter().map(|s| s / nx as f64).collect(),
        p_means: p_sum.into_iter().map(|s| s / np as f64).collect(),
        shots_per_quadrature: nx.min(np),
    })
}

impl ProbeableDevice for DeviceModel {
    fn n_modes(&self) -> ModeCount {
        self.modes()
    }

    fn probe_and_measure(
        &self,
        probe: &ProbeSpec,
        config: &MeasurementConfig,
    ) -> Result<QuadratureSampleMeans> {
        measure(&evolve(self, probe)?, config)
    }
}

/// Wraps a device and counts settings and coherent probes that went through it.
#[derive(Debug)]
pub struct CountingDevice<D> {
    inner: D,
    settings: AtomicU64,
    probes: AtomicU64,
}

impl<D> CountingDevice<D> {
    pub fn new(inner: D) -> Self {
        Self {
            inner,
            settings: AtomicU64::new(0),
            probes: AtomicU64::new(0),
        }
    }

    pub fn settings(&self) -> u64 {
        self.settings.load(Ordering::Relaxed)
    }

    pub fn probes(&self) -> u64 {
        self.probes.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &D {
        &self.inner
    }
}

impl<D: ProbeableDevice> ProbeableDevice for CountingDevice<D> {
    fn n_modes(&self) -> ModeCount {
        self.inner.n_modes()
    }

    fn probe_and_measure(
        &self,
        probe: &ProbeSpec,
        config: &MeasurementConfig,
    ) -> Result<QuadratureSampleMeans> {
        let out = self.inner.probe_and_measure(probe, config)?;
        self.settings.fetch_add(1, Ordering::Relaxed);
        self.probes.fetch_add(config.probes_per_setting(), Ordering::Relaxed);
        Ok(out)
    }
}
