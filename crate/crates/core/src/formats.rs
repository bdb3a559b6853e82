//! JSON documents exchanged with the command-line tool.
//!
//! Every matrix is written as
//! `{"kind": ..., "n_modes": N, "ordering": "xxpp", "data": [row-major]}`.
//! Complex unitaries are a pair of such documents under `"real"` and `"imag"`.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::phase_space::{SymplecticMatrix, Transmissivity, UnitaryMatrix};
use crate::tomography::ReconstructionResult;

pub const ORDERING_XXPP: &str = "xxpp";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    Symplectic,
    UnitaryReal,
    UnitaryImag,
    Covariance,
    Mean,
}

impl MatrixKind {
    /// Rows and columns for `n` modes; a mean vector is one column.
    fn shape(self, n: usize) -> (usize, usize) {
        match self {
            MatrixKind::Symplectic | MatrixKind::Covariance => (2 * n, 2 * n),
            MatrixKind::UnitaryReal | MatrixKind::UnitaryImag => (n, n),
            MatrixKind::Mean => (2 * n, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub kind: MatrixKind,
    pub n_modes: usize,
    pub ordering: String,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(kind: MatrixKind, m: &DMatrix<f64>) -> Result<Self> {
        let n = match kind {
            MatrixKind::UnitaryReal | MatrixKind::UnitaryImag => m.nrows(),
            _ => m.nrows() / 2,
        };
        if n == 0 || kind.shape(n) != m.shape() {
            return Err(Error::Format(format!(
                "{}x{} matrix does not fit kind {kind:?}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self {
            kind,
            n_modes: n,
            ordering: ORDERING_XXPP.to_string(),
            data: m.transpose().iter().copied().collect(),
        })
    }

    pub fn from_mean(mean: &DVector<f64>) -> Result<Self> {
        Self::from_matrix(MatrixKind::Mean, &DMatrix::from_column_slice(mean.len(), 1, mean.as_slice()))
    }

    /// Validates ordering and size, then returns the matrix.
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.ordering != ORDERING_XXPP {
            return Err(Error::Format(format!(
                "unsupported quadrature ordering '{}'",
                self.ordering
            )));
        }
        if self.n_modes == 0 {
            return Err(Error::Format("n_modes must be at least 1".into()));
        }
        let (rows, cols) = self.kind.shape(self.n_modes);
        if self.data.len() != rows * cols {
            return Err(Error::Format(format!(
                "{:?} with {} modes needs {} entries, found {}",
                self.kind,
                self.n_modes,
                rows * cols,
                self.data.len()
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite matrix entry".into()));
        }
        Ok(DMatrix::from_row_slice(rows, cols, &self.data))
    }

    fn expect_kind(&self, kind: MatrixKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!(
                "expected a {kind:?} document, found {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn from_symplectic(s: &SymplecticMatrix) -> Self {
        Self::from_matrix(MatrixKind::Symplectic, s.as_matrix()).expect("symplectic shape")
    }

    pub fn to_symplectic(&self) -> Result<SymplecticMatrix> {
        self.expect_kind(MatrixKind::Symplectic)?;
        SymplecticMatrix::new(self.to_matrix()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryJson {
    pub real: MatrixJson,
    pub imag: MatrixJson,
}

impl UnitaryJson {
    pub fn from_unitary(u: &UnitaryMatrix) -> Self {
        Self::from_complex(u.as_matrix()).expect("unitary shape")
    }

    pub fn from_complex(m: &DMatrix<Complex64>) -> Result<Self> {
        Ok(Self {
            real: MatrixJson::from_matrix(MatrixKind::UnitaryReal, &m.map(|z| z.re))?,
            imag: MatrixJson::from_matrix(MatrixKind::UnitaryImag, &m.map(|z| z.im))?,
        })
    }

    pub fn to_complex(&self) -> Result<DMatrix<Complex64>> {
        self.real.expect_kind(MatrixKind::UnitaryReal)?;
        self.imag.expect_kind(MatrixKind::UnitaryImag)?;
        let re = self.real.to_matrix()?;
        let im = self.imag.to_matrix()?;
        if re.shape() != im.shape() {
            return Err(Error::Format("real and imaginary parts differ in size".into()));
        }
        Ok(re.zip_map(&im, Complex64::new))
    }

    pub fn to_unitary(&self) -> Result<UnitaryMatrix> {
        UnitaryMatrix::new(self.to_complex()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceJson {
    #[serde(rename = "S")]
    pub s: MatrixJson,
    pub eta: f64,
    #[serde(default)]
    pub cubic_gamma: Option<f64>,
}

impl DeviceJson {
    pub fn from_device(d: &DeviceModel) -> Self {
        Self {
            s: MatrixJson::from_symplectic(d.symplectic()),
            eta: d.eta().get(),
            cubic_gamma: d.cubic_gamma(),
        }
    }

    pub fn to_device(&self) -> Result<DeviceModel> {
        DeviceModel::new(
            self.s.to_symplectic()?,
            Transmissivity::new(self.eta)?,
            self.cubic_gamma,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionJson {
    pub s_tilde: MatrixJson,
    pub eta_hat: f64,
    pub s_recon: MatrixJson,
    pub scheme: String,
    /// Shots per probe setting; 0 means exact (infinite-shot) means.
    pub shots: u64,
    pub amplitude: f64,
    pub frobenius_vs_truth: Option<f64>,
}

impl ReconstructionJson {
    pub fn from_result(r: &ReconstructionResult, frobenius_vs_truth: Option<f64>) -> Result<Self> {
        Ok(Self {
            s_tilde: MatrixJson::from_matrix(MatrixKind::Symplectic, &r.s_tilde)?,
            eta_hat: r.eta_hat,
            s_recon: MatrixJson::from_matrix(MatrixKind::Symplectic, &r.s_recon)?,
            scheme: r.scheme.to_string(),
            shots: r.shots.as_count(),
            amplitude: r.amplitude,
            frobenius_vs_truth,
        })
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes through a temporary sibling and renames, so a failed write leaves no
/// partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("'{}' is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{is_symplectic, ModeCount};
    use crate::randgen::{haar_unitary, random_symplectic, SqueezeSpec};
    use proptest::prelude::*;

    #[test]
    fn symplectic_document_layout() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let doc = MatrixJson::from_matrix(MatrixKind::Symplectic, &m).unwrap();
        let text = serde_json::to_string(&doc).unwrap();
        assert_eq!(
            text,
            r#"{"kind":"symplectic","n_modes":1,"ordering":"xxpp","data":[0.0,1.0,-1.0,0.0]}"#
        );
    }

    #[test]
    fn rejects_wrong_ordering_and_size() {
        let mut doc = MatrixJson::from_symplectic(&SymplecticMatrix::identity(ModeCount::new(2).unwrap()));
        doc.ordering = "xpxp".into();
        assert!(doc.to_matrix().is_err());
        doc.ordering = "xxpp".into();
        doc.data.pop();
        assert!(doc.to_matrix().is_err());
        assert!(serde_json::from_str::<MatrixJson>(r#"{"kind":"bogus","n_modes":1,"ordering":"xxpp","data":[]}"#).is_err());
    }

    #[test]
    fn mean_document() {
        let doc = MatrixJson::from_mean(&DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(doc.n_modes, 2);
        assert_eq!(doc.to_matrix().unwrap().column(0).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn device_document_uses_null_gamma() {
        let d = DeviceModel::lossless(SymplecticMatrix::identity(ModeCount::new(1).unwrap()));
        let text = serde_json::to_string(&DeviceJson::from_device(&d)).unwrap();
        assert!(text.contains(r#""S":{"#));
        assert!(text.contains(r#""cubic_gamma":null"#));
        let back: DeviceJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_device().unwrap(), d);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/out.json"), b"x").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn symplectic_round_trip(n in 1usize..6, seed in any::<u64>()) {
            let s = random_symplectic(ModeCount::new(n).unwrap(), SqueezeSpec::default(), seed);
            let text = serde_json::to_string(&MatrixJson::from_symplectic(&s)).unwrap();
            let back: MatrixJson = serde_json::from_str(&text).unwrap();
            let s2 = back.to_symplectic().unwrap();
            prop_assert_eq!(&s2, &s);
            prop_assert!(is_symplectic(s2.as_matrix(), 1e-9).unwrap());
        }

        #[test]
        fn unitary_round_trip(n in 1usize..6, seed in any::<u64>()) {
            let u = haar_unitary(ModeCount::new(n).unwrap(), seed);
            let text = serde_json::to_string(&UnitaryJson::from_unitary(&u)).unwrap();
            let back: UnitaryJson = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_unitary().unwrap(), u);
        }
    }
}
