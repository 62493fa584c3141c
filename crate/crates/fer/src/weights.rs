//! `FERW1` weights container.
//!
//! Layout: the 5-byte magic `FERW1`, a little-endian `u32` manifest length,
//! the JSON manifest, then every tensor as raw little-endian `f32` in
//! manifest order.

use std::path::Path;

use fer_core::model::{arch_specs, ModelGraph};
use fer_core::ops::BatchNormConfig;
use fer_core::{Arch, LayerSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, WeightsError};

pub const MAGIC: &[u8; 5] = b"FERW1";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    arch: Arch,
    input_shape: [usize; 3],
    layers: Vec<LayerSpec>,
    bn_momentum: f64,
    bn_epsilon: f64,
    tensors: Vec<TensorEntry>,
    meta: TrainingMeta,
}

pub fn to_bytes(model: &ModelGraph<f32>, meta: TrainingMeta) -> Vec<u8> {
    let named = model.named_tensors();
    let bn = model.bn_config();
    let manifest = Manifest {
        arch: model.arch(),
        input_shape: model.input_shape(),
        layers: model.specs().to_vec(),
        bn_momentum: bn.momentum,
        bn_epsilon: bn.epsilon,
        tensors: named
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        meta,
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let payload: usize = named.iter().map(|(_, t)| t.len() * 4).sum();
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len() + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in &named {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<(ModelGraph<f32>, TrainingMeta), WeightsError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(WeightsError::BadMagic);
    }
    let rest = &bytes[MAGIC.len()..];
    let len_bytes: [u8; 4] = rest
        .get(..4)
        .and_then(|s| s.try_into().ok())
        .ok_or_else(|| WeightsError::Truncated("missing manifest length".into()))?;
    let len = u32::from_le_bytes(len_bytes) as usize;
    let json = rest
        .get(4..4 + len)
        .ok_or_else(|| WeightsError::Truncated(format!("manifest needs {len} bytes")))?;
    let manifest: Manifest = serde_json::from_slice(json).map_err(|e| WeightsError::Manifest(e.to_string()))?;
    if manifest.arch != Arch::Custom {
        let canonical = arch_specs(manifest.arch).map_err(|e| WeightsError::Manifest(e.to_string()))?;
        if canonical != manifest.layers || manifest.input_shape != [1, 48, 48] {
            return Err(WeightsError::ArchMismatch(manifest.arch.to_string()));
        }
    }
    let mut model = ModelGraph::<f32>::from_specs(manifest.arch, &manifest.layers, manifest.input_shape, 0)
        .map_err(|e| WeightsError::Manifest(e.to_string()))?;
    model.set_bn_config(BatchNormConfig {
        momentum: manifest.bn_momentum,
        epsilon: manifest.bn_epsilon,
    });
    let mut payload = &rest[4 + len..];
    let mut targets = model.named_tensors_mut();
    if targets.len() != manifest.tensors.len() {
        return Err(WeightsError::Manifest(format!(
            "{} tensors listed, layer stack has {}",
            manifest.tensors.len(),
            targets.len()
        )));
    }
    for (entry, (name, tensor)) in manifest.tensors.iter().zip(targets.iter_mut()) {
        if entry.name != *name || entry.shape != tensor.shape() {
            return Err(WeightsError::ShapeMismatch {
                name: entry.name.clone(),
                expected: tensor.shape().to_vec(),
                found: entry.shape.clone(),
            });
        }
        let n = tensor.len() * 4;
        if payload.len() < n {
            return Err(WeightsError::Truncated(format!("payload of {name} is incomplete")));
        }
        for (dst, chunk) in tensor.data_mut().iter_mut().zip(payload[..n].chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        }
        payload = &payload[n..];
    }
    if !payload.is_empty() {
        return Err(WeightsError::Manifest(format!("{} trailing bytes after payload", payload.len())));
    }
    drop(targets);
    Ok((model, manifest.meta))
}

pub fn save(path: &Path, model: &ModelGraph<f32>, meta: TrainingMeta) -> Result<()> {
    std::fs::write(path, to_bytes(model, meta)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(ModelGraph<f32>, TrainingMeta)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(from_bytes(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fer_core::{Padding, Tensor};

    fn small() -> ModelGraph<f32> {
        let specs = [
            LayerSpec::Conv { filters: 2, kernel: 3, stride: 2, padding: Padding::Same },
            LayerSpec::BatchNorm,
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 7 },
            LayerSpec::SoftmaxHead,
        ];
        ModelGraph::from_specs(Arch::Custom, &specs, [1, 48, 48], 1).unwrap()
    }

    #[test]
    fn round_trip() {
        let mut m = small();
        m.forward_train(&Tensor::full(&[2, 1, 48, 48], 0.3), 0).unwrap();
        let meta = TrainingMeta { epochs: 4, val_accuracy: Some(0.25) };
        let (back, meta2) = from_bytes(&to_bytes(&m, meta)).unwrap();
        assert_eq!(meta2, meta);
        assert_eq!(back.named_tensors(), m.named_tensors());
        assert_eq!(back.specs(), m.specs());
    }

    #[test]
    fn corrupt_files() {
        let bytes = to_bytes(&small(), TrainingMeta::default());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(WeightsError::BadMagic)));
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 1]), Err(WeightsError::Truncated(_))));
        assert!(matches!(from_bytes(&bytes[..7]), Err(WeightsError::Truncated(_))));
        assert!(matches!(from_bytes(b""), Err(WeightsError::BadMagic)));
    }
}
