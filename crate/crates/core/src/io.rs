//! File formats: operator JSON, cellwise field JSON (inline or with a
//! little-endian `f64` sidecar) and the jump ledger CSV.
//!
//! Floats are written in shortest round-trip form so every file re-reads to
//! the same bits.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{MultiIndex, OperatorSpec};
use crate::construct::{AffineValue, FaceKind, JumpFace, MeasureDecomposition};
use crate::{Error, Result};

/// The only supported field layout: cells in row-major order (axis 0
/// slowest), all components of a cell contiguous.
pub const FIELD_LAYOUT: &str = "cell-major-rowmajor";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub alpha: Vec<usize>,
    /// Row-major `dimF × dimE`.
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorFile {
    #[serde(rename = "N")]
    pub space_dim: usize,
    #[serde(rename = "dimE")]
    pub dim_e: usize,
    #[serde(rename = "dimF")]
    pub dim_f: usize,
    pub k: usize,
    pub coeffs: Vec<CoeffEntry>,
}

impl From<&OperatorSpec> for OperatorFile {
    fn from(op: &OperatorSpec) -> Self {
        Self {
            space_dim: op.space_dim(),
            dim_e: op.dim_e(),
            dim_f: op.dim_f(),
            k: op.order(),
            coeffs: op
                .coeffs()
                .iter()
                .map(|(alpha, m)| CoeffEntry {
                    alpha: alpha.0.clone(),
                    matrix: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<OperatorFile> for OperatorSpec {
    type Error = Error;

    fn try_from(file: OperatorFile) -> Result<Self> {
        let coeffs = file
            .coeffs
            .into_iter()
            .map(|entry| {
                if entry.matrix.len() != file.dim_f
                    || entry.matrix.iter().any(|r| r.len() != file.dim_e)
                {
                    return Err(Error::InvalidOperator(format!(
                        "coefficient for {:?} is not {} × {}",
                        entry.alpha, file.dim_f, file.dim_e
                    )));
                }
                let flat: Vec<f64> = entry.matrix.into_iter().flatten().collect();
                Ok((
                    MultiIndex(entry.alpha),
                    DMatrix::from_row_slice(file.dim_f, file.dim_e, &flat),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        OperatorSpec::new(file.space_dim, file.dim_e, file.dim_f, file.k, coeffs)
    }
}

pub fn operator_from_json(text: &str) -> Result<OperatorSpec> {
    let file: OperatorFile =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("operator JSON: {e}")))?;
    file.try_into()
}

pub fn operator_to_json(op: &OperatorSpec) -> String {
    serde_json::to_string_pretty(&OperatorFile::from(op)).expect("operator serializes")
}

pub fn read_operator(path: &Path) -> Result<OperatorSpec> {
    operator_from_json(&read_text(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    #[serde(rename = "N")]
    pub space_dim: usize,
    pub r: usize,
    #[serde(rename = "dimF")]
    pub dim_f: usize,
    pub layout: String,
    /// Inline values, `r^N · dimF` floats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<f64>>,
    /// Sidecar file of little-endian `f64`, relative to the header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<String>,
}

/// A cellwise field as read from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldData {
    pub space_dim: usize,
    pub r: usize,
    pub dim_f: usize,
    pub cells: Vec<DVector<f64>>,
}

impl FieldData {
    fn from_flat(header: &FieldHeader, flat: Vec<f64>) -> Result<Self> {
        if header.layout != FIELD_LAYOUT {
            return Err(Error::Format(format!(
                "unsupported layout {:?}, expected {FIELD_LAYOUT:?}",
                header.layout
            )));
        }
        if header.space_dim == 0 || header.r == 0 || header.dim_f == 0 {
            return Err(Error::Format("N, r and dimF must be positive".into()));
        }
        let cells = header
            .r
            .checked_pow(header.space_dim as u32)
            .ok_or_else(|| Error::Format("r^N overflows".into()))?;
        if flat.len() != cells * header.dim_f {
            return Err(Error::Format(format!(
                "field has {} values, expected r^N · dimF = {}",
                flat.len(),
                cells * header.dim_f
            )));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("field contains non-finite values".into()));
        }
        Ok(Self {
            space_dim: header.space_dim,
            r: header.r,
            dim_f: header.dim_f,
            cells: flat
                .chunks(header.dim_f)
                .map(DVector::from_column_slice)
                .collect(),
        })
    }

    pub fn flat(&self) -> Vec<f64> {
        self.cells.iter().flat_map(|c| c.iter().copied()).collect()
    }
}

/// Reads a field header, resolving a sidecar binary relative to `path`.
pub fn read_field(path: &Path) -> Result<FieldData> {
    let header: FieldHeader = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::Format(format!("field JSON {}: {e}", path.display())))?;
    let flat = match (&header.data, &header.binary) {
        (Some(data), None) => data.clone(),
        (None, Some(bin)) => {
            let bin_path = path.parent().unwrap_or(Path::new(".")).join(bin);
            let bytes = fs::read(&bin_path)
                .map_err(|e| Error::Format(format!("cannot read {}: {e}", bin_path.display())))?;
            decode_f64_le(&bytes)?
        }
        _ => {
            return Err(Error::Format(
                "field header needs exactly one of \"data\" or \"binary\"".into(),
            ))
        }
    };
    FieldData::from_flat(&header, flat)
}

pub fn field_from_json(text: &str) -> Result<FieldData> {
    let header: FieldHeader =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("field JSON: {e}")))?;
    let data = header
        .data
        .clone()
        .ok_or_else(|| Error::Format("inline field JSON needs \"data\"".into()))?;
    FieldData::from_flat(&header, data)
}

pub fn field_to_json(field: &FieldData) -> String {
    let header = FieldHeader {
        space_dim: field.space_dim,
        r: field.r,
        dim_f: field.dim_f,
        layout: FIELD_LAYOUT.to_string(),
        data: Some(field.flat()),
        binary: None,
    };
    serde_json::to_string(&header).expect("field serializes")
}

/// Writes `header.json` plus a sidecar `<stem>.bin`.
pub fn write_field_binary(field: &FieldData, json_path: &Path) -> Result<()> {
    let stem = json_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Format(format!("bad field path {}", json_path.display())))?;
    let bin_name = format!("{stem}.bin");
    let header = FieldHeader {
        space_dim: field.space_dim,
        r: field.r,
        dim_f: field.dim_f,
        layout: FIELD_LAYOUT.to_string(),
        data: None,
        binary: Some(bin_name.clone()),
    };
    let bytes: Vec<u8> = field.flat().iter().flat_map(|v| v.to_le_bytes()).collect();
    let dir = json_path.parent().unwrap_or(Path::new("."));
    write_bytes(&dir.join(bin_name), &bytes)?;
    write_bytes(
        json_path,
        serde_json::to_string(&header)
            .expect("header serializes")
            .as_bytes(),
    )
}

fn decode_f64_le(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Format(format!(
            "binary field has {} bytes, not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)
        .map_err(|e| Error::Format(format!("cannot write {}: {e}", path.display())))
}

/// One ledger row as re-read from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerRow {
    pub face_id: usize,
    pub face: JumpFace,
    pub density: AffineValue,
    pub mass: f64,
}

fn column_names(n: usize, dim_e: usize, dim_f: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["faceId", "cellIndex", "axis", "planeOffset", "area", "kind"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((0..n).map(|i| format!("lower{i}")));
    cols.extend((0..n).map(|i| format!("upper{i}")));
    cols.extend((0..dim_e).map(|a| format!("jump{a}")));
    for i in 0..n {
        cols.extend((0..dim_e).map(|a| format!("jumpSlope{a}_{i}")));
    }
    cols.extend((0..dim_f).map(|a| format!("density{a}")));
    for i in 0..n {
        cols.extend((0..dim_f).map(|a| format!("densitySlope{a}_{i}")));
    }
    cols.push("mass".into());
    cols
}

/// The jump ledger as CSV: face geometry, the jump at the face centroid with
/// its slopes along the face, the density `𝔸(ν)[u⁺ − u⁻]` likewise, and the
/// face mass `∫|u⁺ − u⁻|`. Values at a point `y` of the face are
/// `jump + Σ_i jumpSlope_i · (y_i − centroid_i)`.
pub fn ledger_to_csv(med: &MeasureDecomposition, dim_e: usize) -> Result<String> {
    let n = med.grid.space_dim();
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format(format!("ledger CSV: {e}"));
    writer
        .write_record(column_names(n, dim_e, med.dim_f))
        .map_err(csv_err)?;
    for (id, (face, g)) in med.faces.iter().zip(&med.jump_density).enumerate() {
        let mut row = vec![
            id.to_string(),
            face.cell_index.to_string(),
            face.axis.to_string(),
            face.plane_offset.to_string(),
            face.area.to_string(),
            face.kind.as_str().to_string(),
        ];
        let floats = face
            .lower
            .iter()
            .chain(&face.upper)
            .chain(face.jump.value.iter())
            .chain(face.jump.slopes.iter())
            .chain(g.value.iter())
            .chain(g.slopes.iter());
        row.extend(floats.map(f64::to_string));
        row.push(face.mass().to_string());
        writer.write_record(&row).map_err(csv_err)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Format(format!("ledger CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}

/// Parses a ledger written by [`ledger_to_csv`]. Dimensions are recovered
/// from the header.
pub fn ledger_from_csv(text: &str) -> Result<Vec<LedgerRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("ledger CSV header: {e}")))?
        .clone();
    let count = |prefix: &str| {
        headers
            .iter()
            .filter(|h| {
                h.strip_prefix(prefix)
                    .is_some_and(|rest| rest.chars().all(|c| c.is_ascii_digit()))
            })
            .count()
    };
    let (n, dim_e, dim_f) = (count("lower"), count("jump"), count("density"));
    if n == 0 || headers.len() != column_names(n, dim_e, dim_f).len() {
        return Err(Error::Format(
            "ledger CSV header does not match the ledger layout".into(),
        ));
    }

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("ledger CSV row {line}: {e}")))?;
        let bad = |what: &str| Error::Format(format!("ledger CSV row {line}: bad {what}"));
        let int = |i: usize| record[i].parse::<usize>().map_err(|_| bad(&headers[i]));
        let float = |i: usize| record[i].parse::<f64>().map_err(|_| bad(&headers[i]));
        let floats = |start: usize, len: usize| {
            (start..start + len)
                .map(float)
                .collect::<Result<Vec<f64>>>()
        };

        let kind = match &record[5] {
            "Internal" => FaceKind::Internal,
            "CellBoundary" => FaceKind::CellBoundary,
            _ => return Err(bad("kind")),
        };
        let mut at = 6;
        let lower = floats(at, n)?;
        at += n;
        let upper = floats(at, n)?;
        at += n;
        let jump_value = floats(at, dim_e)?;
        at += dim_e;
        let jump_slopes = floats(at, dim_e * n)?;
        at += dim_e * n;
        let density_value = floats(at, dim_f)?;
        at += dim_f;
        let density_slopes = floats(at, dim_f * n)?;
        at += dim_f * n;
        let axis = int(2)?;
        if axis >= n {
            return Err(bad("axis"));
        }
        rows.push(LedgerRow {
            face_id: int(0)?,
            face: JumpFace {
                cell_index: int(1)?,
                axis,
                plane_offset: float(3)?,
                lower,
                upper,
                area: float(4)?,
                kind,
                jump: AffineValue {
                    value: DVector::from_vec(jump_value),
                    slopes: DMatrix::from_vec(dim_e, n, jump_slopes),
                },
            },
            density: AffineValue {
                value: DVector::from_vec(density_value),
                slopes: DMatrix::from_vec(dim_f, n, density_slopes),
            },
            mass: float(at)?,
        });
    }
    Ok(rows)
}

/// `Σ ∫|u⁺ − u⁻|` recomputed from re-read faces.
pub fn ledger_jump_mass(rows: &[LedgerRow]) -> f64 {
    rows.iter().map(|r| r.face.mass()).sum()
}
