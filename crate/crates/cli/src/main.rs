//! `gtomo`: generate devices, reconstruct them from simulated coherent-probe
//! measurements, run the scaling studies and test for non-Gaussian dynamics.
//!
//! Exit status is 0 on success, 1 on usage or input errors and 2 when the
//! reconstruction itself fails numerically.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gtomo::experiments::{
    records_to_csv, run_intensity_scaling, run_mode_scaling, run_phase_error_study,
    run_unitary_scaling, ExperimentRecord, IntensityConfig, ModeScalingConfig, PhaseErrorConfig,
    UnitaryScalingConfig,
};
use gtomo::formats::{read_json, to_json_string, write_atomic, DeviceJson, MatrixJson, ReconstructionJson, UnitaryJson};
use gtomo::randgen::derive_seed;
use gtomo::tomography::default_detection_tolerance;
use gtomo::{
    detect_non_gaussian, embed_unitary, haar_unitary, random_symplectic, reconstruct_symplectic,
    DeviceModel, Error, MeasurementConfig, ModeCount, RngSeed, Scheme, Shots, SqueezeSpec,
    SymplecticMatrix, Transmissivity,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seed stream for devices the CLI draws itself (phase-error default device).
const CLI_DEVICE_STREAM: u64 = 0xC11;

#[derive(Debug, Parser)]
#[command(name = "gtomo", version, about = "Gaussian process tomography with coherent probes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random symplectic or Haar-unitary matrix and write it as JSON.
    Generate(GenerateArgs),
    /// Reconstruct a device from simulated probe measurements.
    Reconstruct(ReconstructArgs),
    /// Run one of the scaling studies and write a CSV of records.
    Experiment(ExperimentArgs),
    /// Probe a single-mode cubic-phase device and test for non-Gaussian dynamics.
    Detect(DetectArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MatrixChoice {
    Symplectic,
    Unitary,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: MatrixChoice,
    #[arg(long)]
    modes: usize,
    /// Largest single-mode squeezing parameter (symplectic only).
    #[arg(long, default_value_t = 0.5)]
    r_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: RngSeed,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    /// Device JSON, a bare symplectic matrix or a unitary document.
    #[arg(long)]
    device: PathBuf,
    #[arg(long, default_value = "heterodyne")]
    scheme: Scheme,
    /// Shots per probe setting, or `inf` for exact means.
    #[arg(long, default_value = "100")]
    shots: Shots,
    #[arg(long, default_value_t = 1000.0)]
    amplitude: f64,
    /// Loss fraction L (transmissivity 1 - L); overrides the device file.
    #[arg(long)]
    loss: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: RngSeed,
    /// Reconstruction JSON output; only the summary line is printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentName {
    ModeScaling,
    UnitaryScaling,
    Intensity,
    PhaseError,
}

impl ExperimentName {
    fn as_str(self) -> &'static str {
        match self {
            ExperimentName::ModeScaling => "mode-scaling",
            ExperimentName::UnitaryScaling => "unitary-scaling",
            ExperimentName::Intensity => "intensity",
            ExperimentName::PhaseError => "phase-error",
        }
    }
}

/// Flags left unset fall back to each study's defaults.
#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    /// Mode counts (the first entry is used by single-device studies).
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Loss fractions L; each becomes transmissivity 1 - L.
    #[arg(long, value_delimiter = ',')]
    losses: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    amplitudes: Option<Vec<f64>>,
    /// Trials averaged per repetition (intensity and phase-error).
    #[arg(long, value_delimiter = ',')]
    trials: Option<Vec<usize>>,
    #[arg(long)]
    shots: Option<Shots>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: RngSeed,
    /// Phase-error: largest probe phase error in radians.
    #[arg(long, default_value_t = 0.05)]
    phi_max: f64,
    /// Phase-error: matrix row of the studied element.
    #[arg(long, default_value_t = 0)]
    row: usize,
    /// Phase-error: matrix column of the studied element.
    #[arg(long, default_value_t = 0)]
    col: usize,
    /// Phase-error: device file; a random symplectic is drawn when omitted.
    #[arg(long)]
    device: Option<PathBuf>,
    /// CSV output; a `.meta.json` sibling is written next to it.
    /// The CSV goes to standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    amplitudes: Vec<f64>,
    #[arg(long, default_value = "100")]
    shots: Shots,
    #[arg(long, default_value = "heterodyne")]
    scheme: Scheme,
    #[arg(long, default_value_t = 0)]
    seed: RngSeed,
    /// Spread of the ratios above which the device is flagged; defaults to five
    /// shot-noise standard errors.
    #[arg(long)]
    tol: Option<f64>,
}

/// The forms accepted by `reconstruct --device`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DeviceInput {
    Device(DeviceJson),
    Unitary(UnitaryJson),
    Matrix(MatrixJson),
}

impl DeviceInput {
    fn into_device(self) -> gtomo::Result<DeviceModel> {
        match self {
            DeviceInput::Device(d) => d.to_device(),
            DeviceInput::Unitary(u) => Ok(DeviceModel::lossless(embed_unitary(&u.to_unitary()?))),
            DeviceInput::Matrix(m) => Ok(DeviceModel::lossless(m.to_symplectic()?)),
        }
    }
}

#[derive(Debug, Serialize)]
struct ExperimentMeta<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'static str,
    seed: RngSeed,
    invocation: &'a [String],
    records: usize,
}

fn load_device(path: &Path) -> gtomo::Result<DeviceModel> {
    read_json::<DeviceInput>(path)?.into_device()
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> gtomo::Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn cmd_generate(args: &GenerateArgs) -> gtomo::Result<()> {
    let n = ModeCount::new(args.modes)?;
    let text = match args.kind {
        MatrixChoice::Symplectic => {
            let s = random_symplectic(n, SqueezeSpec::new(args.r_max)?, args.seed);
            to_json_string(&MatrixJson::from_symplectic(&s))?
        }
        MatrixChoice::Unitary => to_json_string(&UnitaryJson::from_unitary(&haar_unitary(n, args.seed)))?,
    };
    emit(args.out.as_deref(), text.as_bytes())
}

fn cmd_reconstruct(args: &ReconstructArgs) -> gtomo::Result<()> {
    let mut device = load_device(&args.device)?;
    if let Some(loss) = args.loss {
        device = device.with_eta(Transmissivity::from_loss(loss)?);
    }
    let cfg = MeasurementConfig::new(args.scheme, args.shots, args.seed);
    let result = reconstruct_symplectic(&device, args.amplitude, &cfg)?;
    let f = result.frobenius_vs(device.symplectic().as_matrix())?;
    if let Some(out) = &args.out {
        let doc = ReconstructionJson::from_result(&result, Some(f))?;
        write_atomic(out, to_json_string(&doc)?.as_bytes())?;
    }
    println!("eta_hat={:.6} F={:.6e}", result.eta_hat, f);
    Ok(())
}

fn etas_from_losses(losses: &[f64]) -> gtomo::Result<Vec<f64>> {
    losses
        .iter()
        .map(|&l| Transmissivity::from_loss(l).map(Transmissivity::get))
        .collect()
}

fn single_mode_count(modes: &Option<Vec<usize>>) -> gtomo::Result<Option<usize>> {
    match modes.as_deref() {
        None => Ok(None),
        Some([n]) => Ok(Some(*n)),
        Some(_) => Err(Error::InvalidArgument(
            "this experiment uses a single device; pass one value to --modes".into(),
        )),
    }
}

fn single_loss(losses: &Option<Vec<f64>>) -> gtomo::Result<Option<f64>> {
    match losses.as_deref() {
        None => Ok(None),
        Some([l]) => Ok(Some(Transmissivity::from_loss(*l)?.get())),
        Some(_) => Err(Error::InvalidArgument(
            "this experiment takes a single loss value".into(),
        )),
    }
}

fn single_scheme(schemes: &Option<Vec<Scheme>>) -> gtomo::Result<Option<Scheme>> {
    match schemes.as_deref() {
        None => Ok(None),
        Some([s]) => Ok(Some(*s)),
        Some(_) => Err(Error::InvalidArgument(
            "this experiment takes a single scheme".into(),
        )),
    }
}

fn single_amplitude(amplitudes: &Option<Vec<f64>>) -> gtomo::Result<Option<f64>> {
    match amplitudes.as_deref() {
        None => Ok(None),
        Some([a]) => Ok(Some(*a)),
        Some(_) => Err(Error::InvalidArgument(
            "this experiment takes a single probe amplitude".into(),
        )),
    }
}

fn run_experiment(args: &ExperimentArgs) -> gtomo::Result<Vec<ExperimentRecord>> {
    match args.name {
        ExperimentName::ModeScaling => {
            let mut cfg = ModeScalingConfig { seed: args.seed, ..Default::default() };
            if let Some(m) = &args.modes {
                cfg.modes = m.clone();
            }
            if let Some(s) = &args.schemes {
                cfg.schemes = s.clone();
            }
            if let Some(l) = &args.losses {
                cfg.etas = etas_from_losses(l)?;
            }
            if let Some(a) = single_amplitude(&args.amplitudes)? {
                cfg.amplitude = a;
            }
            if let Some(s) = args.shots {
                cfg.shots = s;
            }
            if let Some(r) = args.reps {
                cfg.repetitions = r;
            }
            if let Some(r) = args.r_max {
                cfg.squeeze = SqueezeSpec::new(r)?;
            }
            run_mode_scaling(&cfg)
        }
        ExperimentName::UnitaryScaling => {
            let mut cfg = UnitaryScalingConfig { seed: args.seed, ..Default::default() };
            if let Some(m) = &args.modes {
                cfg.modes = m.clone();
            }
            if let Some(s) = &args.schemes {
                cfg.schemes = s.clone();
            }
            if let Some(l) = &args.losses {
                cfg.etas = etas_from_losses(l)?;
            }
            if let Some(a) = single_amplitude(&args.amplitudes)? {
                cfg.amplitude = a;
            }
            if let Some(s) = args.shots {
                cfg.shots = s;
            }
            if let Some(r) = args.reps {
                cfg.repetitions = r;
            }
            run_unitary_scaling(&cfg)
        }
        ExperimentName::Intensity => {
            let mut cfg = IntensityConfig { seed: args.seed, ..Default::default() };
            if let Some(n) = single_mode_count(&args.modes)? {
                cfg.modes = n;
            }
            if let Some(s) = single_scheme(&args.schemes)? {
                cfg.scheme = s;
            }
            if let Some(eta) = single_loss(&args.losses)? {
                cfg.eta = eta;
            }
            if let Some(a) = &args.amplitudes {
                cfg.amplitudes = a.clone();
            }
            if let Some(t) = &args.trials {
                cfg.trials = t.clone();
            }
            if let Some(s) = args.shots {
                cfg.shots = s;
            }
            if let Some(r) = args.reps {
                cfg.repetitions = r;
            }
            if let Some(r) = args.r_max {
                cfg.squeeze = SqueezeSpec::new(r)?;
            }
            run_intensity_scaling(&cfg)
        }
        ExperimentName::PhaseError => {
            if args.losses.is_some() {
                return Err(Error::InvalidArgument(
                    "the phase-error study runs on a lossless device; drop --losses".into(),
                ));
            }
            let device = match &args.device {
                Some(path) => load_device(path)?.symplectic().clone(),
                None => {
                    let n = ModeCount::new(single_mode_count(&args.modes)?.unwrap_or(1))?;
                    let squeeze = match args.r_max {
                        Some(r) => SqueezeSpec::new(r)?,
                        None => SqueezeSpec::default(),
                    };
                    random_symplectic(n, squeeze, derive_seed(args.seed, CLI_DEVICE_STREAM))
                }
            };
            let trials = args.trials.clone().unwrap_or_else(|| vec![1, 100, 10_000]);
            let mut cfg = PhaseErrorConfig::exact(device, args.row, args.col, args.phi_max, trials);
            cfg.seed = args.seed;
            if let Some(s) = single_scheme(&args.schemes)? {
                cfg.scheme = s;
            }
            if let Some(a) = single_amplitude(&args.amplitudes)? {
                cfg.amplitude = a;
            }
            if let Some(s) = args.shots {
                cfg.shots = s;
            }
            if let Some(r) = args.reps {
                cfg.repetitions = r;
            }
            run_phase_error_study(&cfg)
        }
    }
}

fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

fn cmd_experiment(args: &ExperimentArgs, invocation: &[String]) -> gtomo::Result<()> {
    let records = run_experiment(args)?;
    let csv = records_to_csv(&records)?;
    match &args.out {
        Some(out) => {
            let meta = ExperimentMeta {
                tool: "gtomo",
                version: VERSION,
                experiment: args.name.as_str(),
                seed: args.seed,
                invocation,
                records: records.len(),
            };
            let meta_text = to_json_string(&meta)?;
            write_atomic(out, &csv)?;
            write_atomic(&meta_path(out), meta_text.as_bytes())?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
            Ok(())
        }
        None => emit(None, &csv),
    }
}

fn cmd_detect(args: &DetectArgs) -> gtomo::Result<()> {
    let device = DeviceModel::new(
        SymplecticMatrix::identity(ModeCount::new(1)?),
        Transmissivity::LOSSLESS,
        Some(args.gamma),
    )?;
    let cfg = MeasurementConfig::new(args.scheme, args.shots, args.seed);
    let tol = match args.tol {
        Some(t) => t,
        None => default_detection_tolerance(&args.amplitudes, &cfg),
    };
    let outcome = detect_non_gaussian(&device, &args.amplitudes, &cfg, tol)?;
    let ratios: Vec<String> = outcome.ratios.iter().map(|r| format!("{r:.5}")).collect();
    println!("ratios: {}", ratios.join(" "));
    println!("spread: {:.3e} tolerance: {:.3e}", outcome.max_spread, outcome.tolerance);
    println!("{}", if outcome.non_gaussian { "non-gaussian" } else { "gaussian" });
    Ok(())
}

fn main() -> ExitCode {
    let invocation: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Experiment(a) => cmd_experiment(a, &invocation),
        Command::Detect(a) => cmd_detect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gtomo: error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
