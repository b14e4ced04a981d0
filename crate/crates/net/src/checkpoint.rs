//! Versioned JSON checkpoints: named tensors with shapes and flat data.

use crate::{NetError, Params};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const FORMAT: &str = "occsim-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// `policy` or `predictor`.
    pub kind: String,
    pub hidden: usize,
    pub tensors: Vec<NamedTensor>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn capture<P: Params>(params: &P, kind: &str, hidden: usize, meta: serde_json::Value) -> Self {
        let tensors = params
            .tensors()
            .into_iter()
            .zip(params.tensor_names())
            .map(|(t, name)| NamedTensor { name, rows: t.rows(), cols: t.cols(), data: t.data().to_vec() })
            .collect();
        Self { format: FORMAT.into(), version: VERSION, kind: kind.into(), hidden, tensors, meta }
    }

    /// Copies the stored tensors into `params`, which must have the same
    /// names and shapes.
    pub fn restore<P: Params>(&self, kind: &str, params: &mut P) -> Result<(), NetError> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(NetError::Checkpoint(format!("unsupported format {} v{}", self.format, self.version)));
        }
        if self.kind != kind {
            return Err(NetError::Checkpoint(format!("expected a {kind} checkpoint, found {}", self.kind)));
        }
        let names = params.tensor_names();
        if names.len() != self.tensors.len() {
            return Err(NetError::Checkpoint(format!("{} tensors, expected {}", self.tensors.len(), names.len())));
        }
        for ((dst, name), src) in params.tensors_mut().into_iter().zip(names).zip(&self.tensors) {
            if src.name != name || (src.rows, src.cols) != dst.shape() || src.data.len() != src.rows * src.cols {
                return Err(NetError::Checkpoint(format!(
                    "tensor {} {}x{} does not fit {name} {:?}",
                    src.name,
                    src.rows,
                    src.cols,
                    dst.shape()
                )));
            }
            dst.data_mut().copy_from_slice(&src.data);
        }
        params.ensure_finite()
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
