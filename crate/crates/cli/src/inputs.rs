//! On-disk JSON schemas and their validation.
//!
//! Operators are stored as `{"rows": r, "cols": c, "data": [[[re, im], …],
//! …]}`.  Representations are stored as `{"group": "<name>", "dim": n,
//! "generators": {"<name>": rows}}` with each matrix given as bare rows of
//! `[re, im]` entries; derivation files extend that with a `"derivation"`
//! object of the same shape.  Group names are `Z^d` and `N^d` with `d` from
//! 1 to 4, `heisenberg3`, and `finite:<file>` where the file holds a
//! multiplication table as a JSON array of arrays of 0-based indices
//! (resolved relative to the referencing file's directory).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use isometrize_core::folner::{FolnerError, GroupDescriptor};
use isometrize_core::linalg::{Complex64, ComplexMatrix};

/// Errors from reading and validating input files.
#[derive(Debug, Error)]
pub enum InputError {
    /// The file could not be read.
    #[error("cannot read {path}: {source}")]
    Io {
        /// File that failed.
        path: PathBuf,
        /// Underlying I/O error.
        #[source]
        source: std::io::Error,
    },
    /// The file is not valid JSON for the expected schema; the message
    /// carries the line and column.
    #[error("cannot parse {path}: {source}")]
    Parse {
        /// File that failed.
        path: PathBuf,
        /// Underlying JSON error with position information.
        #[source]
        source: serde_json::Error,
    },
    /// The JSON parsed but violates a structural rule of the schema.
    #[error("schema violation in {path}: {detail}")]
    Schema {
        /// File that failed.
        path: PathBuf,
        /// Which field broke which rule.
        detail: String,
    },
    /// An entry is NaN or infinite.
    #[error("non-finite entry in {path}: {detail}")]
    NonFinite {
        /// File that failed.
        path: PathBuf,
        /// Which entry is non-finite.
        detail: String,
    },
    /// The group name is not one of the recognized descriptors.
    #[error("unknown group {0:?} (expected Z^d or N^d with d 1..=4, heisenberg3, or finite:<file>)")]
    UnknownGroup(String),
    /// A recognized group name failed descriptor validation.
    #[error("invalid group {name:?}: {source}")]
    Group {
        /// The offending name.
        name: String,
        /// Underlying descriptor error.
        #[source]
        source: FolnerError,
    },
}

/// Convenient alias for results in this module.
pub type Result<T> = std::result::Result<T, InputError>;

/// Operator file schema: `{"rows": r, "cols": c, "data": [[[re, im], …], …]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    /// Number of rows.
    pub rows: usize,
    /// Number of columns.
    pub cols: usize,
    /// Row-major entries as `[re, im]` pairs.
    pub data: Vec<Vec<(f64, f64)>>,
}

impl MatrixFile {
    /// Captures a matrix for serialization.
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        MatrixFile {
            rows: m.rows(),
            cols: m.cols(),
            data: (0..m.rows())
                .map(|i| (0..m.cols()).map(|j| (m[(i, j)].re, m[(i, j)].im)).collect())
                .collect(),
        }
    }

    /// Validates the declared shape and finiteness and builds the matrix;
    /// the error names the offending row or entry.
    pub fn to_matrix(&self) -> std::result::Result<ComplexMatrix, EntryError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(EntryError::Shape(format!(
                "matrix dimensions must be positive, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.data.len() != self.rows {
            return Err(EntryError::Shape(format!(
                "data holds {} rows, header declares {}",
                self.data.len(),
                self.rows
            )));
        }
        rows_to_matrix(&self.data, self.rows, self.cols)
    }
}

/// How a block of matrix entries failed validation.
#[derive(Debug)]
pub enum EntryError {
    /// Wrong row count or a ragged row; the message names the row.
    Shape(String),
    /// A NaN or infinite entry; the message names the entry.
    NonFinite(String),
}

impl EntryError {
    fn into_input(self, path: &Path, section: &str) -> InputError {
        let prefix = if section.is_empty() {
            String::new()
        } else {
            format!("{section}: ")
        };
        match self {
            EntryError::Shape(detail) => schema(path, format!("{prefix}{detail}")),
            EntryError::NonFinite(detail) => InputError::NonFinite {
                path: path.to_path_buf(),
                detail: format!("{prefix}{detail}"),
            },
        }
    }
}

/// Validates a bare rows-of-`[re, im]` block against an expected shape and
/// builds the matrix.
fn rows_to_matrix(
    data: &[Vec<(f64, f64)>],
    rows: usize,
    cols: usize,
) -> std::result::Result<ComplexMatrix, EntryError> {
    if data.len() != rows {
        return Err(EntryError::Shape(format!(
            "matrix holds {} rows, expected {rows}",
            data.len()
        )));
    }
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(rows);
    for (i, row) in data.iter().enumerate() {
        if row.len() != cols {
            return Err(EntryError::Shape(format!(
                "row {i} holds {} entries, expected {cols}",
                row.len()
            )));
        }
        for (j, &(re, im)) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(EntryError::NonFinite(format!(
                    "entry ({i}, {j}) is [{re}, {im}]"
                )));
            }
        }
        out.push(row.iter().map(|&(re, im)| Complex64::new(re, im)).collect());
    }
    ComplexMatrix::from_rows(&out).map_err(|err| EntryError::Shape(err.to_string()))
}

/// A matrix as stored in representation files: bare rows of `[re, im]`
/// entries.
pub type RawRows = Vec<Vec<(f64, f64)>>;

/// Representation file schema; the optional `derivation` object makes the
/// same file usable for derivation reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepFile {
    /// Group descriptor name.
    pub group: String,
    /// Dimension of every image.
    pub dim: usize,
    /// Generator images.
    pub generators: BTreeMap<String, RawRows>,
    /// Derivation values on the generators, present in derivation files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivation: Option<BTreeMap<String, RawRows>>,
}

/// A parsed representation file: descriptor plus validated image matrices
/// (and derivation matrices when the file carries them).
#[derive(Clone, Debug)]
pub struct ParsedRep {
    /// The group the images represent.
    pub descriptor: GroupDescriptor,
    /// Declared image dimension.
    pub dim: usize,
    /// Generator images.
    pub images: BTreeMap<String, ComplexMatrix>,
    /// Derivation values, when the file has a `derivation` object.
    pub derivation: Option<BTreeMap<String, ComplexMatrix>>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn schema(path: &Path, detail: String) -> InputError {
    InputError::Schema {
        path: path.to_path_buf(),
        detail,
    }
}

/// Reads and validates an operator file.
pub fn parse_matrix_file(path: &Path) -> Result<ComplexMatrix> {
    let text = read_to_string(path)?;
    let file: MatrixFile = serde_json::from_str(&text).map_err(|source| InputError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    file.to_matrix().map_err(|err| err.into_input(path, ""))
}

/// Resolves a group name to a descriptor; `finite:<file>` tables are loaded
/// relative to `base` when the path is relative.
pub fn parse_group(name: &str, base: &Path) -> Result<GroupDescriptor> {
    let wrap = |source| InputError::Group {
        name: name.to_string(),
        source,
    };
    if let Some(d) = name.strip_prefix("Z^") {
        let d: usize = d.parse().map_err(|_| InputError::UnknownGroup(name.into()))?;
        return GroupDescriptor::int_lattice(d).map_err(wrap);
    }
    if let Some(d) = name.strip_prefix("N^") {
        let d: usize = d.parse().map_err(|_| InputError::UnknownGroup(name.into()))?;
        return GroupDescriptor::nat_lattice(d).map_err(wrap);
    }
    if name == "heisenberg3" {
        return Ok(GroupDescriptor::Heisenberg3);
    }
    if let Some(table_ref) = name.strip_prefix("finite:") {
        let mut table_path = PathBuf::from(table_ref);
        if table_path.is_relative() {
            table_path = base.join(table_path);
        }
        let text = read_to_string(&table_path)?;
        let table: Vec<Vec<usize>> =
            serde_json::from_str(&text).map_err(|source| InputError::Parse {
                path: table_path.clone(),
                source,
            })?;
        return GroupDescriptor::finite_group_table(table).map_err(wrap);
    }
    Err(InputError::UnknownGroup(name.into()))
}

fn parse_images(
    path: &Path,
    section: &str,
    dim: usize,
    raw: &BTreeMap<String, RawRows>,
) -> Result<BTreeMap<String, ComplexMatrix>> {
    let mut images = BTreeMap::new();
    for (name, rows) in raw {
        let matrix = rows_to_matrix(rows, dim, dim)
            .map_err(|err| err.into_input(path, &format!("{section} {name}")))?;
        images.insert(name.clone(), matrix);
    }
    Ok(images)
}

/// Reads and validates a representation file (derivation object included
/// when present).
pub fn parse_rep_file(path: &Path) -> Result<ParsedRep> {
    let text = read_to_string(path)?;
    let file: RepFile = serde_json::from_str(&text).map_err(|source| InputError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    if file.dim == 0 {
        return Err(schema(path, "dim must be positive".into()));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let descriptor = parse_group(&file.group, base)?;
    let images = parse_images(path, "generator", file.dim, &file.generators)?;
    let derivation = file
        .derivation
        .as_ref()
        .map(|raw| parse_images(path, "derivation image", file.dim, raw))
        .transpose()?;
    Ok(ParsedRep {
        descriptor,
        dim: file.dim,
        images,
        derivation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).expect("create test file");
        f.write_all(contents.as_bytes()).expect("write test file");
        path
    }

    #[test]
    fn one_by_one_identity_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "m.json",
            r#"{"rows":1,"cols":1,"data":[[[1,0]]]}"#,
        );
        let m = parse_matrix_file(&path).unwrap();
        assert_eq!(m.rows(), 1);
        assert_eq!(m[(0, 0)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn ragged_rows_are_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "m.json",
            r#"{"rows":2,"cols":2,"data":[[[1,0],[0,0]],[[0,0]]]}"#,
        );
        let err = parse_matrix_file(&path).unwrap_err();
        assert!(
            matches!(err, InputError::Schema { .. }),
            "ragged rows must be schema violations, got {err}"
        );
        assert!(err.to_string().contains("row 1"), "got {err}");
    }

    #[test]
    fn shape_mismatch_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "m.json",
            r#"{"rows":3,"cols":2,"data":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#,
        );
        assert!(matches!(
            parse_matrix_file(&path).unwrap_err(),
            InputError::Schema { .. }
        ));
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        // 1e999 overflows to infinity when read as f64.
        let path = write_file(
            dir.path(),
            "m.json",
            r#"{"rows":1,"cols":1,"data":[[[1e999,0]]]}"#,
        );
        let err = parse_matrix_file(&path).unwrap_err();
        assert!(
            matches!(err, InputError::NonFinite { .. } | InputError::Parse { .. }),
            "overflowing entries must be rejected, got {err}"
        );
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "m.json",
            r#"{"rows":1,"cols":1,"data":[[[1,0]]],"extra":1}"#,
        );
        assert!(matches!(
            parse_matrix_file(&path).unwrap_err(),
            InputError::Parse { .. }
        ));
    }

    #[test]
    fn group_names_resolve() {
        let base = Path::new(".");
        assert_eq!(
            parse_group("Z^3", base).unwrap(),
            GroupDescriptor::int_lattice(3).unwrap()
        );
        assert_eq!(
            parse_group("N^1", base).unwrap(),
            GroupDescriptor::nat_lattice(1).unwrap()
        );
        assert_eq!(parse_group("heisenberg3", base).unwrap(), GroupDescriptor::Heisenberg3);
        assert!(matches!(
            parse_group("Z^5", base).unwrap_err(),
            InputError::Group { .. }
        ));
        assert!(matches!(
            parse_group("F_2", base).unwrap_err(),
            InputError::UnknownGroup(_)
        ));
    }

    #[test]
    fn finite_tables_resolve_relative_to_the_referencing_file() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "table.json", "[[0,1],[1,0]]");
        let rep = write_file(
            dir.path(),
            "rep.json",
            r#"{"group":"finite:table.json","dim":1,"generators":{"g0":[[[1,0]]],"g1":[[[-1,0]]]}}"#,
        );
        let parsed = parse_rep_file(&rep).unwrap();
        assert_eq!(parsed.dim, 1);
        assert_eq!(parsed.images.len(), 2);
        assert!(parsed.derivation.is_none());
    }

    #[test]
    fn rep_files_validate_image_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "rep.json",
            r#"{"group":"Z^1","dim":2,"generators":{"e1":[[[1,0]]]}}"#,
        );
        let err = parse_rep_file(&path).unwrap_err();
        assert!(matches!(err, InputError::Schema { .. }), "got {err}");
        assert!(err.to_string().contains("e1"), "got {err}");
    }

    #[test]
    fn derivation_files_carry_both_sections() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "d.json",
            r#"{"group":"Z^1","dim":1,"generators":{"e1":[[[1,0]]]},"derivation":{"e1":[[[0,0]]]}}"#,
        );
        let parsed = parse_rep_file(&path).unwrap();
        let derivation = parsed.derivation.expect("derivation object present");
        assert_eq!(derivation.len(), 1);
    }

    #[test]
    fn matrix_round_trip_preserves_entries() {
        let m = ComplexMatrix::from_rows(&[
            vec![Complex64::new(0.1, -0.2), Complex64::new(2.0, 0.0)],
            vec![Complex64::new(1.0 / 3.0, 0.0), Complex64::new(0.0, 5e-324)],
        ])
        .unwrap();
        let file = MatrixFile::from_matrix(&m);
        let text = serde_json::to_string(&file).unwrap();
        let back: MatrixFile = serde_json::from_str(&text).unwrap();
        let restored = back.to_matrix().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(
                    m[(i, j)].re.to_bits(),
                    restored[(i, j)].re.to_bits(),
                    "real part ({i}, {j}) must round-trip bit-exactly"
                );
                assert_eq!(m[(i, j)].im.to_bits(), restored[(i, j)].im.to_bits());
            }
        }
    }
}
