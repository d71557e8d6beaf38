//! Self-describing artifact files.
//!
//! Binary container (`rawbin`):
//!
//! ```text
//! "ROTSENSE"            8-byte magic
//! version: u32 LE       currently 1
//! meta_len: u64 LE
//! meta: JSON            {kind, dtype, fields: [{name, shape}], crc32, attrs}
//! payload               f64 LE, row-major, fields concatenated in order
//! ```
//!
//! JSON artifacts (reports, metrics, interpretations) are wrapped in an
//! envelope carrying the tool version, config hash and a CRC32 of the
//! serialized body.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::concepts::ConceptModel;
use crate::embedding_io::{EmbeddingMatrix, NormMode, ScalingRecord};
use crate::hypotest::TestReport;
use crate::linalg::Matrix;
use crate::{Error, Result, TOOL_VERSION};

pub const MAGIC: &[u8; 8] = b"ROTSENSE";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FieldMeta {
    name: String,
    shape: [usize; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    kind: String,
    dtype: String,
    fields: Vec<FieldMeta>,
    crc32: u32,
    attrs: Value,
}

/// Where an artifact came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl Provenance {
    pub fn new(config_hash: Option<String>) -> Self {
        Provenance {
            tool_version: TOOL_VERSION.to_string(),
            config_hash,
        }
    }
}

fn err(reason: impl Into<String>) -> Error {
    Error::format("rawbin", reason)
}

fn encode(kind: &str, fields: &[(&str, &Matrix)], attrs: Value) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    for (_, m) in fields {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                payload.extend_from_slice(&m[(i, j)].to_le_bytes());
            }
        }
    }
    let meta = Meta {
        kind: kind.to_string(),
        dtype: "f64".to_string(),
        fields: fields
            .iter()
            .map(|(name, m)| FieldMeta {
                name: name.to_string(),
                shape: [m.nrows(), m.ncols()],
            })
            .collect(),
        crc32: crc32fast::hash(&payload),
        attrs,
    };
    let meta_bytes = serde_json::to_vec(&meta)?;
    let mut out = Vec::with_capacity(20 + meta_bytes.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    out.extend_from_slice(&payload);
    Ok(out)
}

fn decode(bytes: &[u8], expected_kind: &str) -> Result<(Value, BTreeMap<String, Matrix>)> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(err("missing ROTSENSE magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let meta_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let meta_end = 20usize.checked_add(meta_len).ok_or_else(|| err("bad metadata length"))?;
    if bytes.len() < meta_end {
        return Err(err("truncated metadata"));
    }
    let meta: Meta = serde_json::from_slice(&bytes[20..meta_end])?;
    if meta.kind != expected_kind {
        return Err(err(format!("expected a {expected_kind} container, found {}", meta.kind)));
    }
    if meta.dtype != "f64" {
        return Err(err(format!("unsupported dtype {}", meta.dtype)));
    }
    let payload = &bytes[meta_end..];
    let computed = crc32fast::hash(payload);
    if computed != meta.crc32 {
        return Err(Error::Checksum {
            stored: meta.crc32,
            computed,
        });
    }
    let expected_len: usize = meta.fields.iter().map(|f| f.shape[0] * f.shape[1] * 8).sum();
    if payload.len() != expected_len {
        return Err(err(format!("payload has {} bytes, expected {expected_len}", payload.len())));
    }
    let mut offset = 0;
    let mut fields = BTreeMap::new();
    for f in meta.fields {
        let [r, c] = f.shape;
        let values: Vec<f64> = payload[offset..offset + r * c * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        offset += r * c * 8;
        fields.insert(f.name, Matrix::from_row_slice(r, c, &values));
    }
    Ok((meta.attrs, fields))
}

fn take(fields: &mut BTreeMap<String, Matrix>, name: &str) -> Result<Matrix> {
    fields.remove(name).ok_or_else(|| err(format!("missing field {name:?}")))
}

fn column(m: Vec<f64>) -> Matrix {
    let n = m.len();
    Matrix::from_vec(n, 1, m)
}

#[derive(Serialize, Deserialize)]
struct MatrixAttrs {
    ids: Vec<String>,
    labels: Option<Vec<usize>>,
    groups: Option<Vec<String>>,
    source: String,
}

pub(crate) fn encode_matrix(m: &EmbeddingMatrix) -> Result<Vec<u8>> {
    let attrs = MatrixAttrs {
        ids: m.ids().to_vec(),
        labels: m.labels().map(<[usize]>::to_vec),
        groups: m.groups().map(<[String]>::to_vec),
        source: m.source().to_string(),
    };
    encode("matrix", &[("data", m.data())], serde_json::to_value(attrs)?)
}

pub(crate) fn decode_matrix(bytes: &[u8], path: String) -> Result<EmbeddingMatrix> {
    let (attrs, mut fields) = decode(bytes, "matrix")?;
    let attrs: MatrixAttrs = serde_json::from_value(attrs)?;
    let data = take(&mut fields, "data")?;
    let source = if attrs.source.is_empty() { path } else { attrs.source };
    let mut m = EmbeddingMatrix::new(data, Some(attrs.ids), source)?;
    if let Some(labels) = attrs.labels {
        m = m.with_labels(labels)?;
    }
    if let Some(groups) = attrs.groups {
        m = m.with_groups(groups)?;
    }
    Ok(m)
}

#[derive(Serialize, Deserialize)]
struct ModelAttrs {
    k: usize,
    seed: u64,
    canonical: bool,
    mode: NormMode,
    tau_r: f64,
    tau_c: f64,
    ids: Vec<String>,
    provenance: Provenance,
}

pub fn encode_model(model: &ConceptModel, provenance: &Provenance) -> Result<Vec<u8>> {
    model.validate()?;
    let attrs = ModelAttrs {
        k: model.k(),
        seed: model.seed,
        canonical: model.canonical,
        mode: model.scaling.mode,
        tau_r: model.scaling.tau_r,
        tau_c: model.scaling.tau_c,
        ids: model.ids.clone(),
        provenance: provenance.clone(),
    };
    let rows = column(model.scaling.row_factors.clone());
    let cols = column(model.scaling.col_factors.clone());
    let sv = column(model.singular_values.clone());
    encode(
        "concept_model",
        &[
            ("y", &model.y),
            ("z", &model.z),
            ("row_factors", &rows),
            ("col_factors", &cols),
            ("singular_values", &sv),
        ],
        serde_json::to_value(attrs)?,
    )
}

pub fn decode_model(bytes: &[u8]) -> Result<(ConceptModel, Provenance)> {
    let (attrs, mut fields) = decode(bytes, "concept_model")?;
    let attrs: ModelAttrs = serde_json::from_value(attrs)?;
    let model = ConceptModel {
        y: take(&mut fields, "y")?,
        z: take(&mut fields, "z")?,
        scaling: ScalingRecord {
            mode: attrs.mode,
            row_factors: take(&mut fields, "row_factors")?.iter().copied().collect(),
            col_factors: take(&mut fields, "col_factors")?.iter().copied().collect(),
            tau_r: attrs.tau_r,
            tau_c: attrs.tau_c,
        },
        ids: attrs.ids,
        seed: attrs.seed,
        canonical: attrs.canonical,
        singular_values: take(&mut fields, "singular_values")?.iter().copied().collect(),
    };
    if model.k() != attrs.k {
        return Err(err(format!("k attribute {} disagrees with dictionary width {}", attrs.k, model.k())));
    }
    model.validate()?;
    Ok((model, attrs.provenance))
}

pub fn save_model(path: &Path, model: &ConceptModel) -> Result<()> {
    save_model_with(path, model, &Provenance::new(None))
}

pub fn save_model_with(path: &Path, model: &ConceptModel, provenance: &Provenance) -> Result<()> {
    let bytes = encode_model(model, provenance)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ConceptModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_model(&bytes)?.0)
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    provenance: Provenance,
    crc32: u32,
    body: T,
}

/// Serialize `body` inside a checksummed JSON envelope.
pub fn encode_json<T: Serialize>(kind: &str, body: &T, provenance: &Provenance) -> Result<Vec<u8>> {
    let value = serde_json::to_value(body)?;
    let crc32 = crc32fast::hash(&serde_json::to_vec(&value)?);
    let envelope = Envelope {
        format: "rotsense".to_string(),
        version: VERSION,
        kind: kind.to_string(),
        provenance: provenance.clone(),
        crc32,
        body: value,
    };
    let mut out = serde_json::to_vec_pretty(&envelope)?;
    out.push(b'\n');
    Ok(out)
}

/// Parse and verify a JSON envelope written by [`encode_json`].
pub fn decode_json<T: DeserializeOwned>(kind: &str, bytes: &[u8]) -> Result<(T, Provenance)> {
    let envelope: Envelope<Value> = serde_json::from_slice(bytes)?;
    if envelope.format != "rotsense" {
        return Err(Error::format("json", format!("unknown format {:?}", envelope.format)));
    }
    if envelope.version != VERSION {
        return Err(Error::VersionMismatch {
            found: envelope.version,
            expected: VERSION,
        });
    }
    if envelope.kind != kind {
        return Err(Error::format("json", format!("expected {kind}, found {}", envelope.kind)));
    }
    let computed = crc32fast::hash(&serde_json::to_vec(&envelope.body)?);
    if computed != envelope.crc32 {
        return Err(Error::Checksum {
            stored: envelope.crc32,
            computed,
        });
    }
    Ok((serde_json::from_value(envelope.body)?, envelope.provenance))
}

pub fn save_report(path: &Path, report: &TestReport) -> Result<()> {
    save_report_with(path, report, &Provenance::new(None))
}

pub fn save_report_with(path: &Path, report: &TestReport, provenance: &Provenance) -> Result<()> {
    report.validate()?;
    let bytes = encode_json("test_report", report, provenance)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_report(path: &Path) -> Result<TestReport> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (report, _): (TestReport, _) = decode_json("test_report", &bytes)?;
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;
    use crate::rng::substream;

    #[test]
    fn matrix_round_trip_bit_exact() {
        let mut rng = substream(41, 0, 0);
        let data = gaussian_matrix(7, 3, &mut rng);
        let m = EmbeddingMatrix::new(data, None, "x")
            .unwrap()
            .with_labels(vec![0, 1, 0, 1, 1, 0, 2])
            .unwrap();
        let bytes = encode_matrix(&m).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        let back = decode_matrix(&bytes, String::new()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let m = EmbeddingMatrix::new(Matrix::identity(3, 3), None, "x").unwrap();
        let mut bytes = encode_matrix(&m).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x40;
        assert!(matches!(decode_matrix(&bytes, String::new()), Err(Error::Checksum { .. })));
    }

    #[test]
    fn wrong_version_rejected() {
        let m = EmbeddingMatrix::new(Matrix::identity(2, 2), None, "x").unwrap();
        let mut bytes = encode_matrix(&m).unwrap();
        bytes[8] = 2;
        assert!(matches!(
            decode_matrix(&bytes, String::new()),
            Err(Error::VersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn json_envelope_round_trip_and_tamper() {
        let body = vec![0.1f64, 1.0 / 3.0, 2.5e-300];
        let bytes = encode_json("numbers", &body, &Provenance::new(Some("abc".into()))).unwrap();
        let (back, prov): (Vec<f64>, _) = decode_json("numbers", &bytes).unwrap();
        assert_eq!(back, body);
        assert_eq!(prov.config_hash.as_deref(), Some("abc"));
        let tampered = String::from_utf8(bytes).unwrap().replace("0.1", "0.2");
        assert!(matches!(
            decode_json::<Vec<f64>>("numbers", tampered.as_bytes()),
            Err(Error::Checksum { .. })
        ));
    }
}
