//! Input files: parsing with field paths, shape validation, digesting.

use std::fmt;
use std::io::Read;
use std::path::Path;

use dchar_core::checker::{HeisenbergOperatorSpec, PointSymbolSpec, StructureConstants, TwoStepGroupSpec};
use dchar_core::{SymmetricForm, SymplecticStructure};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

/// Asymmetry above which symmetrization is reported as a warning.
pub const ASYMMETRY_WARN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct InputError {
    /// Field path inside the document, `"."` for the document itself.
    pub path: String,
    pub message: String,
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn err(path: impl Into<String>, message: impl Into<String>) -> InputError {
    InputError {
        path: path.into(),
        message: message.into(),
    }
}

pub type Rows = Vec<Vec<f64>>;

/// Raw bytes of an input file plus their SHA-256.
pub struct Source {
    pub bytes: Vec<u8>,
    pub digest: String,
}

/// Reads the input file, or standard input when the path is `-`.
pub fn read_source(path: &Path) -> Result<Source, InputError> {
    let bytes = if path == Path::new("-") {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| err(".", format!("cannot read standard input: {e}")))?;
        buf
    } else {
        std::fs::read(path).map_err(|e| err(".", format!("cannot read {}: {e}", path.display())))?
    };
    let digest = format!("sha256:{}", hex::encode(Sha256::digest(&bytes)));
    Ok(Source { bytes, digest })
}

pub fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, InputError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        err(path, e.into_inner().to_string())
    })
}

/// Collects symmetrization warnings while converting matrices.
#[derive(Default)]
pub struct Loader {
    pub warnings: Vec<String>,
}

impl Loader {
    pub fn matrix(&self, field: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<DMatrix<f64>, InputError> {
        if rows.len() != nrows {
            return Err(err(field, format!("expected {nrows} rows, found {}", rows.len())));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(err(
                    format!("{field}[{i}]"),
                    format!("expected {ncols} entries, found {}", row.len()),
                ));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(err(format!("{field}[{i}][{j}]"), "entry is not finite"));
            }
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn form(&mut self, field: &str, rows: &Rows, n: usize) -> Result<SymmetricForm, InputError> {
        let m = self.matrix(field, rows, n, n)?;
        let asym = SymmetricForm::asymmetry(&m);
        if asym > ASYMMETRY_WARN {
            self.warnings.push(format!(
                "{field}: asymmetry {asym:e} exceeds {ASYMMETRY_WARN:e}; symmetric part used"
            ));
        }
        SymmetricForm::new(m).map_err(|e| err(field, e.to_string()))
    }
}

fn positive(field: &str, v: usize) -> Result<(), InputError> {
    if v == 0 {
        Err(err(field, "must be positive"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForms {
    n: usize,
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "B")]
    b: Rows,
    #[serde(rename = "C", default)]
    c: Option<Rows>,
    #[serde(rename = "J", default)]
    j: Option<Rows>,
}

pub struct Forms {
    pub a: SymmetricForm,
    pub b: SymmetricForm,
    pub c: Option<SymmetricForm>,
    /// Poisson tensor; `None` means canonical (or unavailable in odd dimension).
    pub structure: Option<SymplecticStructure>,
}

impl Forms {
    /// The structure to bracket in: the given one, else canonical.
    pub fn structure_or_canonical(&self) -> Result<SymplecticStructure, InputError> {
        match &self.structure {
            Some(s) => Ok(s.clone()),
            None if self.a.dim().is_multiple_of(2) => Ok(SymplecticStructure::canonical(self.a.dim() / 2)),
            None => Err(err(
                "n",
                format!("odd dimension {} has no symplectic structure", self.a.dim()),
            )),
        }
    }
}

pub fn forms(bytes: &[u8], loader: &mut Loader) -> Result<Forms, InputError> {
    let raw: RawForms = parse(bytes)?;
    positive("n", raw.n)?;
    let a = loader.form("A", &raw.a, raw.n)?;
    let b = loader.form("B", &raw.b, raw.n)?;
    let c = raw.c.as_ref().map(|c| loader.form("C", c, raw.n)).transpose()?;
    let structure = match &raw.j {
        Some(j) => {
            let m = loader.matrix("J", j, raw.n, raw.n)?;
            Some(SymplecticStructure::from_structure_matrix(m).map_err(|e| err("J", e.to_string()))?)
        }
        None => None,
    };
    Ok(Forms { a, b, c, structure })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeisenberg {
    d: usize,
    #[serde(rename = "A_re")]
    a_re: Rows,
    #[serde(rename = "A_im")]
    a_im: Rows,
}

pub fn heisenberg(bytes: &[u8], loader: &mut Loader) -> Result<HeisenbergOperatorSpec, InputError> {
    let raw: RawHeisenberg = parse(bytes)?;
    positive("d", raw.d)?;
    let a_re = loader.form("A_re", &raw.a_re, 2 * raw.d)?;
    let a_im = loader.form("A_im", &raw.a_im, 2 * raw.d)?;
    HeisenbergOperatorSpec::new(raw.d, a_re, a_im).map_err(|e| err(".", e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTwoStep {
    m: usize,
    #[serde(rename = "J_list")]
    j_list: Vec<Rows>,
    #[serde(rename = "A_re")]
    a_re: Rows,
    #[serde(rename = "A_im")]
    a_im: Rows,
    #[serde(default)]
    mu0: Option<Vec<f64>>,
    #[serde(default)]
    note: Option<String>,
}

/// A `reduce-step` report wrapping the spec in its `result` field.
#[derive(Debug, Deserialize)]
struct Envelope {
    command: String,
    result: serde_json::Value,
}

pub fn two_step(bytes: &[u8], loader: &mut Loader) -> Result<TwoStepGroupSpec, InputError> {
    let raw: RawTwoStep = match serde_json::from_slice::<Envelope>(bytes) {
        Ok(env) if env.command == "reduce-step" => {
            let inner = serde_json::to_vec(&env.result).map_err(|e| err("result", e.to_string()))?;
            parse(&inner).map_err(|e| err(format!("result.{}", e.path), e.message))?
        }
        _ => parse(bytes)?,
    };
    positive("m", raw.m)?;
    if raw.j_list.is_empty() {
        return Err(err("J_list", "must contain at least one matrix"));
    }
    let j_list = raw
        .j_list
        .iter()
        .enumerate()
        .map(|(i, j)| loader.matrix(&format!("J_list[{i}]"), j, raw.m, raw.m))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(mu) = &raw.mu0 {
        if mu.len() != j_list.len() {
            return Err(err(
                "mu0",
                format!("expected {} entries, found {}", j_list.len(), mu.len()),
            ));
        }
    }
    let a_re = loader.form("A_re", &raw.a_re, raw.m)?;
    let a_im = loader.form("A_im", &raw.a_im, raw.m)?;
    let mut spec =
        TwoStepGroupSpec::new(raw.m, j_list, a_re, a_im, raw.mu0).map_err(|e| err("J_list", e.to_string()))?;
    spec.note = raw.note;
    Ok(spec)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    n: usize,
    m: usize,
    #[serde(rename = "T")]
    t: Rows,
    #[serde(rename = "A_re")]
    a_re: Rows,
    #[serde(rename = "A_im")]
    a_im: Rows,
}

pub fn point(bytes: &[u8], loader: &mut Loader) -> Result<PointSymbolSpec, InputError> {
    let raw: RawPoint = parse(bytes)?;
    positive("n", raw.n)?;
    positive("m", raw.m)?;
    let t = loader.matrix("T", &raw.t, raw.m, 2 * raw.n)?;
    let a_re = loader.form("A_re", &raw.a_re, raw.m)?;
    let a_im = loader.form("A_im", &raw.a_im, raw.m)?;
    PointSymbolSpec::new(raw.n, raw.m, t, a_re, a_im).map_err(|e| err(".", e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLie {
    dim: usize,
    c: Vec<(usize, usize, usize, f64)>,
    grading: Vec<usize>,
    #[serde(rename = "A_re")]
    a_re: Rows,
    #[serde(rename = "A_im")]
    a_im: Rows,
}

pub struct Lie {
    pub constants: StructureConstants,
    pub a_re: SymmetricForm,
    pub a_im: SymmetricForm,
}

pub fn lie(bytes: &[u8], loader: &mut Loader) -> Result<Lie, InputError> {
    let raw: RawLie = parse(bytes)?;
    positive("dim", raw.dim)?;
    if raw.grading.len() != raw.dim {
        return Err(err(
            "grading",
            format!("expected {} entries, found {}", raw.dim, raw.grading.len()),
        ));
    }
    for (t, &(i, j, k, _)) in raw.c.iter().enumerate() {
        if let Some(bad) = [i, j, k].into_iter().find(|&x| x >= raw.dim) {
            return Err(err(
                format!("c[{t}]"),
                format!("index {bad} out of range for dim {}", raw.dim),
            ));
        }
    }
    let constants =
        StructureConstants::from_triplets(raw.dim, &raw.c, raw.grading).map_err(|e| err("c", e.to_string()))?;
    let m = constants.grading().iter().filter(|&&g| g == 1).count();
    let a_re = loader.form("A_re", &raw.a_re, m)?;
    let a_im = loader.form("A_im", &raw.a_im, m)?;
    Ok(Lie { constants, a_re, a_im })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_paths_point_at_the_offending_entry() {
        let bad = br#"{"n": 2, "A": [[1, 0], [0, "x"]], "B": [[0, 1], [1, 0]]}"#;
        let e = forms(bad, &mut Loader::default()).err().unwrap();
        assert_eq!(e.path, "A[1][1]");
        let short = br#"{"n": 2, "A": [[1, 0], [0]], "B": [[0, 1], [1, 0]]}"#;
        assert_eq!(forms(short, &mut Loader::default()).err().unwrap().path, "A[1]");
        let typo = br#"{"n": 2, "A": [[1, 0], [0, 1]], "b": [[0, 1], [1, 0]]}"#;
        assert!(forms(typo, &mut Loader::default()).is_err());
    }

    #[test]
    fn asymmetric_input_is_symmetrized_with_warning() {
        let doc = br#"{"n": 2, "A": [[1, 0.5], [0, 1]], "B": [[0, 1], [1, 0]]}"#;
        let mut loader = Loader::default();
        let f = forms(doc, &mut loader).unwrap();
        assert_eq!(f.a.matrix()[(0, 1)], 0.25);
        assert_eq!(loader.warnings.len(), 1);
        assert!(loader.warnings[0].starts_with("A:"));
    }

    #[test]
    fn lie_indices_checked() {
        let doc = br#"{"dim": 3, "c": [[0, 1, 3, 1.0]], "grading": [1, 1, 2], "A_re": [[1, 0], [0, 1]], "A_im": [[0, 0], [0, 0]]}"#;
        assert_eq!(lie(doc, &mut Loader::default()).err().unwrap().path, "c[0]");
    }
}
