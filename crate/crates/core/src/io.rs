//! Field files: one JSON header line, then little-endian `f64` samples in
//! row-major order. Writes go through a temporary file and an atomic rename.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{AnisotropicGrid, SampledField};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub version: u32,
    pub n: usize,
    pub shape: Vec<usize>,
    pub box_len: Vec<f64>,
    pub time_len: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

impl FieldHeader {
    pub fn for_grid(grid: &AnisotropicGrid) -> Self {
        let origin = grid
            .origin()
            .iter()
            .any(|&o| o != 0.0)
            .then(|| grid.origin().to_vec());
        Self {
            version: FORMAT_VERSION,
            n: grid.n(),
            shape: grid.shape().to_vec(),
            box_len: grid.box_len().to_vec(),
            time_len: grid.time_len(),
            origin,
            periodic: (!grid.is_periodic()).then_some(false),
            manifest: None,
        }
    }

    pub fn grid(&self) -> Result<AnisotropicGrid> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported version {}",
                self.version
            )));
        }
        let origin = self.origin.clone().unwrap_or_else(|| vec![0.0; self.n + 1]);
        let g = AnisotropicGrid::with_origin(
            self.n,
            self.box_len.clone(),
            self.time_len,
            self.shape.clone(),
            origin,
        )?;
        Ok(if self.periodic == Some(false) {
            g.bounded()
        } else {
            g
        })
    }
}

pub fn encode_field(field: &SampledField, manifest: Option<&serde_json::Value>) -> Result<Vec<u8>> {
    let mut header = FieldHeader::for_grid(field.grid());
    header.manifest = manifest.cloned();
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(field.values().len() * 8);
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_field<R: Read>(reader: R) -> Result<(FieldHeader, SampledField)> {
    let mut reader = BufReader::new(reader);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("missing header terminator".into()));
    }
    let header: FieldHeader = serde_json::from_slice(&line[..line.len() - 1])?;
    let grid = header.grid()?;
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    if body.len() != grid.len() * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            grid.len() * 8,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let field = SampledField::new(grid, values)?;
    Ok((header, field))
}

pub fn read_field(path: &Path) -> Result<(FieldHeader, SampledField)> {
    decode_field(fs::File::open(path)?)
}

pub fn write_field(
    path: &Path,
    field: &SampledField,
    manifest: Option<&serde_json::Value>,
) -> Result<()> {
    write_atomic(path, &encode_field(field, manifest)?)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits_and_origin() {
        let g = AnisotropicGrid::with_origin(1, vec![3.0], 2.0, vec![6, 4], vec![-1.0, -0.5])
            .unwrap()
            .bounded();
        let f = SampledField::from_fn(g, |z| z[0].sin() * 1e-300 + z[1]).unwrap();
        let bytes = encode_field(&f, Some(&serde_json::json!({"command": "test"}))).unwrap();
        let (h, back) = decode_field(&bytes[..]).unwrap();
        assert_eq!(back, f);
        assert_eq!(h.manifest.unwrap()["command"], "test");
        assert!(!back.grid().is_periodic());
    }

    #[test]
    fn header_is_one_json_line() {
        let g = AnisotropicGrid::new(1, vec![1.0], 1.0, vec![4, 4]).unwrap();
        let bytes = encode_field(&SampledField::constant(g, 5.0), None).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let v: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["shape"], serde_json::json!([4, 4]));
        assert!(v.get("origin").is_none());
        assert_eq!(bytes.len(), nl + 1 + 16 * 8);
        assert_eq!(
            f64::from_le_bytes(bytes[nl + 1..nl + 9].try_into().unwrap()),
            5.0
        );
    }

    #[test]
    fn truncated_payload_rejected() {
        let g = AnisotropicGrid::new(1, vec![1.0], 1.0, vec![4, 4]).unwrap();
        let mut bytes = encode_field(&SampledField::zeros(g), None).unwrap();
        bytes.pop();
        assert!(matches!(decode_field(&bytes[..]), Err(Error::Format(_))));
    }
}
