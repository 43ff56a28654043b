//! Model file layout:
//!
//! ```text
//! b"CYENTSMD"  u32-le header length  header JSON  f64-le weights...
//! ```
//!
//! The header names every weight section with its length; sections follow in
//! header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ModelDims, Params, TaggerModel, CONV_LAYERS, CONV_WINDOW, NUM_SEEDS};
use super::train::TrainingMeta;
use super::{LabelSet, NerError};
use crate::schema::VersionId;

const MAGIC: &[u8; 8] = b"CYENTSMD";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    schema_version: VersionId,
    dims: HeaderDims,
    seeds: Vec<u64>,
    label_list: Vec<String>,
    training_meta: Option<TrainingMeta>,
    sections: Vec<Section>,
}

#[derive(Serialize, Deserialize)]
struct HeaderDims {
    rows: usize,
    dim: usize,
    conv_layers: usize,
    conv_window: usize,
}

#[derive(Serialize, Deserialize)]
struct Section {
    name: String,
    len: usize,
}

fn format_err(msg: impl Into<String>) -> NerError {
    NerError::ModelFormat(msg.into())
}

impl TaggerModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let groups = self.params.groups();
        let header = Header {
            format_version: FORMAT_VERSION,
            schema_version: self.schema_version,
            dims: HeaderDims {
                rows: self.dims.rows,
                dim: self.dims.dim,
                conv_layers: CONV_LAYERS,
                conv_window: CONV_WINDOW,
            },
            seeds: self.seeds.to_vec(),
            label_list: self.labels.names(),
            training_meta: self.meta.clone(),
            sections: Params::group_names()
                .into_iter()
                .zip(&groups)
                .map(|(name, g)| Section { name, len: g.len() })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serialises");
        let n_weights: usize = groups.iter().map(|g| g.len()).sum();
        let mut out = Vec::with_capacity(12 + json.len() + 8 * n_weights);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for g in groups {
            for x in g {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NerError> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(format_err("missing magic"));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes.get(12..12 + hlen).ok_or_else(|| format_err("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| format_err(format!("header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(format_err(format!("unsupported format version {}", header.format_version)));
        }
        if header.dims.conv_layers != CONV_LAYERS || header.dims.conv_window != CONV_WINDOW {
            return Err(format_err("unsupported encoder shape"));
        }
        let seeds: [u64; NUM_SEEDS] =
            header.seeds.try_into().map_err(|_| format_err(format!("expected {NUM_SEEDS} seeds")))?;
        let labels = LabelSet::from_names(&header.label_list)?;
        let dims = ModelDims { rows: header.dims.rows, dim: header.dims.dim };
        let mut params = Params::zeros(dims, labels.len());
        let names = Params::group_names();
        if header.sections.len() != names.len() {
            return Err(format_err("wrong number of weight sections"));
        }
        let mut data = &bytes[12 + hlen..];
        for ((sec, name), group) in header.sections.iter().zip(&names).zip(params.groups_mut()) {
            if &sec.name != name || sec.len != group.len() {
                return Err(format_err(format!("section `{}` does not match the declared dims", sec.name)));
            }
            let need = 8 * sec.len;
            if data.len() < need {
                return Err(format_err(format!("section `{}` truncated", sec.name)));
            }
            for (x, chunk) in group.iter_mut().zip(data[..need].chunks_exact(8)) {
                *x = f64::from_le_bytes(chunk.try_into().unwrap());
            }
            data = &data[need..];
        }
        if !data.is_empty() {
            return Err(format_err("trailing bytes after weights"));
        }
        let model = TaggerModel {
            schema_version: header.schema_version,
            labels,
            dims,
            seeds,
            params,
            meta: header.training_meta,
        };
        if !model.is_finite() {
            return Err(format_err("non-finite weight"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), NerError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NerError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = TaggerModel::new(VersionId::Round2, ModelDims { rows: 31, dim: 4 }, 9);
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        let back = TaggerModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_files_rejected() {
        let m = TaggerModel::new(VersionId::Round1, ModelDims { rows: 7, dim: 3 }, 1);
        let bytes = m.to_bytes();
        assert!(TaggerModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(TaggerModel::from_bytes(b"NOTMODEL").is_err());
        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(TaggerModel::from_bytes(&nan), Err(NerError::ModelFormat(_))));
    }
}
