//! On-disk formats: problem files, relaxation row indexes, solve results, and
//! comparison reports.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::cpop::{Constraint, ConstraintKind, Cpop};
use crate::error::{Error, Result};
use crate::monomial::Exponent;
use crate::polynomial::CPolynomial;
use crate::program::{Residuals, SolveStatus};
use crate::relaxation::{RelaxationArtifact, RowLabel};
use crate::solver::SolverOptions;
use crate::validation::Comparison;

pub const PROBLEM_VERSION: u32 = 1;
pub const RESULT_VERSION: u32 = 1;
pub const REPORT_VERSION: u32 = 1;
pub const ROW_INDEX_VERSION: u32 = 1;

/// `1.2345678901234567e0`: 17 significant digits, enough to round-trip any `f64`.
pub fn format_17(v: f64) -> String {
    format!("{v:.16e}")
}

fn ser_17<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if !v.is_finite() {
        return Err(serde::ser::Error::custom("non-finite number"));
    }
    let raw = RawValue::from_string(format_17(*v)).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

/// One term `re + i im` times `z^beta conj(z)^gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub beta: Vec<u32>,
    pub gamma: Vec<u32>,
    #[serde(serialize_with = "ser_17")]
    pub re: f64,
    #[serde(serialize_with = "ser_17")]
    pub im: f64,
}

/// `ge` for `g >= 0`, `eq` for `g = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindRecord {
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub kind: KindRecord,
    pub terms: Vec<TermRecord>,
}

/// JSON carrier of a [`Cpop`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub s: usize,
    pub objective: Vec<TermRecord>,
    pub constraints: Vec<ConstraintRecord>,
}

fn records(p: &CPolynomial) -> Vec<TermRecord> {
    p.terms()
        .map(|(b, g, c)| TermRecord {
            beta: b.entries().to_vec(),
            gamma: g.entries().to_vec(),
            re: c.re,
            im: c.im,
        })
        .collect()
}

impl ProblemFile {
    pub fn from_cpop(p: &Cpop) -> Self {
        Self {
            version: PROBLEM_VERSION,
            family: None,
            seed: None,
            s: p.s(),
            objective: records(p.objective()),
            constraints: p
                .constraints()
                .iter()
                .map(|c| ConstraintRecord {
                    kind: match c.kind {
                        ConstraintKind::Inequality => KindRecord::Ge,
                        ConstraintKind::Equality => KindRecord::Eq,
                    },
                    terms: records(&c.g),
                })
                .collect(),
        }
    }

    /// Builds the problem. Polynomials stored with only one of each mirrored
    /// pair of terms are completed; each completion adds a warning.
    pub fn to_cpop(&self) -> Result<(Cpop, Vec<String>)> {
        if self.version != PROBLEM_VERSION {
            return Err(Error::Invalid(format!(
                "problem file version {} is not supported (expected {PROBLEM_VERSION})",
                self.version
            )));
        }
        let mut warnings = Vec::new();
        let mut poly = |terms: &[TermRecord], what: &str| -> Result<CPolynomial> {
            let mut p = CPolynomial::from_terms(
                self.s,
                terms.iter().map(|t| {
                    (
                        Exponent::new(t.beta.clone()),
                        Exponent::new(t.gamma.clone()),
                        Complex64::new(t.re, t.im),
                    )
                }),
            )?;
            if !p.is_hermitian() {
                let n = p.complete_hermitian()?;
                warnings.push(format!("{what}: completed {n} mirrored term(s) for Hermitian symmetry"));
            }
            Ok(p)
        };
        let f = poly(&self.objective, "objective")?;
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for (i, c) in self.constraints.iter().enumerate() {
            let g = poly(&c.terms, &format!("constraint {i}"))?;
            let kind = match c.kind {
                KindRecord::Ge => ConstraintKind::Inequality,
                KindRecord::Eq => ConstraintKind::Equality,
            };
            constraints.push(Constraint { g, kind });
        }
        Ok((Cpop::new(f, constraints)?, warnings))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Invalid(format!("cannot serialize problem: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

/// Tab-separated index of an assembled program's rows, numbered from 1 as in
/// SDPA files: `row`, `kind`, then the moment key and part or the block.
pub fn row_index_text(art: &RelaxationArtifact) -> String {
    let mut out = format!("# cxsdp row index v{ROW_INDEX_VERSION}\n# row\tkind\tkey\tpart\n");
    for (r, label) in art.row_labels().iter().enumerate() {
        let _ = match label {
            RowLabel::Moment { key, part } => {
                let part = match part {
                    crate::relaxation::Part::Real => "re",
                    crate::relaxation::Part::Imaginary => "im",
                };
                writeln!(out, "{}\tmoment\t{key}\t{part}", r + 1)
            }
            RowLabel::Structural { block } => writeln!(out, "{}\tstructural\tblock {block}\t-", r + 1),
        };
    }
    out
}

/// Machine-readable record of one `solve` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultFile {
    pub version: u32,
    pub input: String,
    pub d: usize,
    pub form: String,
    pub options: SolverOptions,
    pub status: SolveStatus,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub residuals: Residuals,
    pub n_sdp: usize,
    pub m: usize,
    pub solve_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_check: Option<SampleCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleCheck {
    pub best_value: f64,
    pub samples: usize,
    pub seed: u64,
    pub bound_holds: bool,
}

impl ResultFile {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Invalid(format!("cannot serialize result: {e}")))?;
        s.push('\n');
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

pub const REPORT_COLUMNS: &str =
    "s,d,n_sdp,m_naive,m_dualview,opt_naive,opt_dualview,time_naive,time_dualview,seed";

/// One line of the comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub s: usize,
    pub d: usize,
    pub n_sdp: usize,
    pub m_naive: usize,
    pub m_dualview: usize,
    pub opt_naive: f64,
    pub opt_dualview: f64,
    pub time_naive: f64,
    pub time_dualview: f64,
    pub seed: u64,
}

impl ReportRow {
    pub fn from_comparison(s: usize, d: usize, seed: u64, c: &Comparison) -> Self {
        Self {
            s,
            d,
            n_sdp: c.n_sdp,
            m_naive: c.m_naive,
            m_dualview: c.m_dualview,
            opt_naive: c.opt_naive,
            opt_dualview: c.opt_dualview,
            time_naive: c.time_naive,
            time_dualview: c.time_dualview,
            seed,
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6},{:.6},{}",
            self.s,
            self.d,
            self.n_sdp,
            self.m_naive,
            self.m_dualview,
            format_17(self.opt_naive),
            format_17(self.opt_dualview),
            self.time_naive,
            self.time_dualview,
            self.seed
        )
    }
}

/// Header lines every report file starts with.
pub fn report_header() -> String {
    format!("# cxsdp report v{REPORT_VERSION}\n{REPORT_COLUMNS}\n")
}

/// Appends `row` to `path`, writing the header first if the file is new or
/// empty. An existing file with a different header is rejected.
pub fn append_report_row(path: impl AsRef<Path>, row: &ReportRow) -> Result<()> {
    let path = path.as_ref();
    let existing = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut text = String::new();
    if existing.is_empty() {
        text.push_str(&report_header());
    } else if !existing.starts_with(&report_header()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("report header does not match `{REPORT_COLUMNS}` (v{REPORT_VERSION})"),
        });
    } else if !existing.ends_with('\n') {
        text.push('\n');
    }
    text.push_str(&row.to_csv_line());
    text.push('\n');
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpop::{gen_sphere_instance, gen_unitnorm_instance};

    #[test]
    fn problem_round_trip_is_exact() {
        for p in [gen_sphere_instance(3, 11).unwrap(), gen_unitnorm_instance(2, 4).unwrap()] {
            let file = ProblemFile::from_cpop(&p);
            let text = file.to_json().unwrap();
            let back = ProblemFile::from_json(&text, Path::new("p.json")).unwrap();
            assert_eq!(back, file);
            let (q, warnings) = back.to_cpop().unwrap();
            assert!(warnings.is_empty());
            assert_eq!(q, p);
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_17(0.1), "1.0000000000000001e-1");
        assert_eq!(format_17(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn half_stored_polynomial_is_completed() {
        let text = r#"{"version":1,"s":1,
            "objective":[{"beta":[1],"gamma":[0],"re":1.0,"im":2.0},
                         {"beta":[1],"gamma":[1],"re":1.0,"im":0.0}],
            "constraints":[{"kind":"eq","terms":[{"beta":[0],"gamma":[0],"re":1,"im":0},
                                                 {"beta":[1],"gamma":[1],"re":-1,"im":0}]}]}"#;
        let (p, warnings) = ProblemFile::from_json(text, Path::new("x")).unwrap().to_cpop().unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(p.objective().n_terms(), 3);
    }

    #[test]
    fn bad_version_and_dimension() {
        let mut f = ProblemFile::from_cpop(&gen_sphere_instance(1, 0).unwrap());
        f.version = 9;
        assert!(f.to_cpop().is_err());
        f.version = PROBLEM_VERSION;
        f.objective[0].beta.push(0);
        assert!(f.to_cpop().is_err());
    }

    #[test]
    fn csv_line_layout() {
        let row = ReportRow {
            s: 2,
            d: 3,
            n_sdp: 20,
            m_naive: 251,
            m_dualview: 100,
            opt_naive: -1.5,
            opt_dualview: -1.5,
            time_naive: 0.25,
            time_dualview: 0.125,
            seed: 7,
        };
        assert_eq!(
            row.to_csv_line(),
            "2,3,20,251,100,-1.5000000000000000e0,-1.5000000000000000e0,0.250000,0.125000,7"
        );
        assert_eq!(REPORT_COLUMNS.split(',').count(), row.to_csv_line().split(',').count());
    }
}
