//! JSON certificate documents, including the printed ones shipped in `data/`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nl_verify::NonlinearCertificate;
use crate::numkernel::{from_rows, symmetrize, to_rows, DenseMatrix};
use crate::report::Slack;

pub const SYNCHRONVERTER_PRINTED: &str = include_str!("../data/synchronverter_printed.json");
pub const ROSSLER_MOD_PRINTED: &str = include_str!("../data/rossler_mod_printed.json");
pub const EXAMPLE25_PRINTED: &str = include_str!("../data/example25_printed.json");

/// Relative slack used for certificates printed with a few significant digits.
pub const PRINTED_SLACK: f64 = 1e-2;

const SYMMETRY_TOL: f64 = 1e-12;

type Rows = Vec<Vec<f64>>;

/// Either a metric certificate (`P0`, `P1`) or a design certificate
/// (`W0`, `W1`, optionally with the printed gain and a compound-condition
/// witness `Q`, `eta`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub printed_precision: bool,
    pub k: usize,
    pub mu0: f64,
    pub mu1: f64,
    #[serde(rename = "P0", default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Rows>,
    #[serde(rename = "P1", default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<Rows>,
    #[serde(rename = "W0", default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<Rows>,
    #[serde(rename = "W1", default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<Rows>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

/// A matrix read from a certificate, with its asymmetry before symmetrizing.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedMatrix {
    pub matrix: DenseMatrix,
    pub asymmetry: f64,
}

impl CertificateFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_nl(cert: &NonlinearCertificate) -> Self {
        Self {
            source: "search".into(),
            printed_precision: false,
            k: cert.k,
            mu0: cert.mu0,
            mu1: cert.mu1,
            p0: Some(to_rows(&cert.p0)),
            p1: Some(to_rows(&cert.p1)),
            w0: None,
            w1: None,
            gain: None,
            omega: None,
            q: None,
            eta: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    /// Slack implied by the precision flag when none is given explicitly.
    pub fn default_slack(&self) -> Slack {
        if self.printed_precision {
            Slack::Relative(PRINTED_SLACK)
        } else {
            Slack::Absolute(0.0)
        }
    }

    /// Printed matrices are symmetrized; full-precision ones must already be
    /// symmetric.
    pub fn matrix(&self, label: &str) -> Result<LoadedMatrix> {
        let rows = match label {
            "P0" => &self.p0,
            "P1" => &self.p1,
            "W0" => &self.w0,
            "W1" => &self.w1,
            "Q" => &self.q,
            _ => &None,
        }
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("certificate has no {label}")))?;
        let m = from_rows(rows)?;
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let asymmetry = (&m - m.transpose()).amax();
        if asymmetry > SYMMETRY_TOL * (1.0 + m.amax()) && !self.printed_precision {
            return Err(Error::Asymmetric(asymmetry));
        }
        Ok(LoadedMatrix {
            matrix: symmetrize(&m),
            asymmetry,
        })
    }

    pub fn nl_certificate(&self) -> Result<NonlinearCertificate> {
        Ok(NonlinearCertificate {
            p0: self.matrix("P0")?.matrix,
            p1: self.matrix("P1")?.matrix,
            mu0: self.mu0,
            mu1: self.mu1,
            k: self.k,
        })
    }

    pub fn printed_gain(&self) -> Option<DenseMatrix> {
        self.gain.as_ref().map(|g| DenseMatrix::from_row_slice(1, g.len(), g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_files_parse() {
        let s = CertificateFile::parse(SYNCHRONVERTER_PRINTED).unwrap();
        assert_eq!(s.nl_certificate().unwrap().p0.nrows(), 4);
        assert_eq!(s.default_slack(), Slack::Relative(PRINTED_SLACK));
        let r = CertificateFile::parse(ROSSLER_MOD_PRINTED).unwrap();
        assert_eq!(r.k, 3);
        let e = CertificateFile::parse(EXAMPLE25_PRINTED).unwrap();
        let w1 = e.matrix("W1").unwrap();
        assert!((w1.asymmetry - 0.03).abs() < 1e-12);
        assert!((w1.matrix[(1, 2)] + 5.175).abs() < 1e-12);
    }

    #[test]
    fn full_precision_must_be_symmetric() {
        let text = r#"{"k":2,"mu0":1,"mu1":-2,"P0":[[1,0.5],[0,1]],"P1":[[1,0],[0,-1]]}"#;
        let c = CertificateFile::parse(text).unwrap();
        assert!(matches!(c.nl_certificate(), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn round_trip() {
        let c = CertificateFile::parse(ROSSLER_MOD_PRINTED).unwrap();
        assert_eq!(CertificateFile::parse(&c.to_json()).unwrap(), c);
    }
}
