//! Weight files: `weights.bin` holds little-endian `f64` tensors back to back,
//! `manifest.json` names each tensor with its shape and offset, and
//! `vocab.json` is the tokenizer vocabulary as a JSON list.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::Matrix;
use super::{Model, ModelError, ModelSpec};

pub const WEIGHTS_FILE: &str = "weights.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const VOCAB_FILE: &str = "vocab.json";
const FORMAT: &str = "equilens-weights/1";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset in `f64` elements from the start of the weight file.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    n_layers: usize,
    d_model: usize,
    n_heads: usize,
    d_mlp: usize,
    max_context: usize,
    tensors: Vec<TensorEntry>,
}

fn mat(name: String, m: &Matrix) -> (String, Vec<usize>, &[f64]) {
    (name, vec![m.rows, m.cols], m.data.as_slice())
}

fn tensors(model: &Model) -> Vec<(String, Vec<usize>, &[f64])> {
    let mut out: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
    out.push(mat("embed".into(), &model.embed));
    out.push(mat("pos_embed".into(), &model.pos_embed));
    for (i, layer) in model.layers.iter().enumerate() {
        let l = i + 1;
        out.push((format!("layers.{l}.attn_norm"), vec![layer.attn_norm.len()], &layer.attn_norm));
        for (h, head) in layer.heads.iter().enumerate() {
            out.push(mat(format!("layers.{l}.heads.{h}.w_q"), &head.w_q));
            out.push(mat(format!("layers.{l}.heads.{h}.w_k"), &head.w_k));
            out.push(mat(format!("layers.{l}.heads.{h}.w_v"), &head.w_v));
            out.push(mat(format!("layers.{l}.heads.{h}.w_o"), &head.w_o));
        }
        out.push((format!("layers.{l}.mlp_norm"), vec![layer.mlp_norm.len()], &layer.mlp_norm));
        out.push(mat(format!("layers.{l}.mlp_in"), &layer.mlp_in));
        out.push(mat(format!("layers.{l}.mlp_out"), &layer.mlp_out));
    }
    out.push(mat("unembed".into(), &model.unembed));
    out
}

pub fn save_model(model: &Model, dir: &Path) -> Result<(), ModelError> {
    fs::create_dir_all(dir)?;
    let mut bytes = Vec::new();
    let mut entries = Vec::new();
    let mut offset = 0;
    for (name, shape, data) in tensors(model) {
        entries.push(TensorEntry {
            name,
            shape,
            offset,
        });
        offset += data.len();
        for v in data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let spec = &model.spec;
    let manifest = Manifest {
        format: FORMAT.into(),
        n_layers: spec.n_layers,
        d_model: spec.d_model,
        n_heads: spec.n_heads,
        d_mlp: spec.d_mlp,
        max_context: spec.max_context,
        tensors: entries,
    };
    fs::write(dir.join(WEIGHTS_FILE), bytes)?;
    let manifest = serde_json::to_string_pretty(&manifest).map_err(|e| ModelError::Format(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    let vocab = serde_json::to_string(&spec.vocab).map_err(|e| ModelError::Format(e.to_string()))?;
    fs::write(dir.join(VOCAB_FILE), vocab)?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<Model, ModelError> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)
        .map_err(|e| ModelError::Format(format!("manifest: {e}")))?;
    if manifest.format != FORMAT {
        return Err(ModelError::Format(format!("unsupported format '{}'", manifest.format)));
    }
    let vocab: Vec<String> = serde_json::from_slice(&fs::read(dir.join(VOCAB_FILE))?)
        .map_err(|e| ModelError::Format(format!("vocab: {e}")))?;
    let raw = fs::read(dir.join(WEIGHTS_FILE))?;
    if raw.len() % 8 != 0 {
        return Err(ModelError::Format("weight file length is not a multiple of 8".into()));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let spec = ModelSpec {
        n_layers: manifest.n_layers,
        d_model: manifest.d_model,
        n_heads: manifest.n_heads,
        d_mlp: manifest.d_mlp,
        vocab,
        max_context: manifest.max_context,
    };
    let mut model = Model::zeros(spec)?;
    let expected = tensors(&model)
        .into_iter()
        .map(|(name, shape, _)| (name, shape))
        .collect::<Vec<_>>();
    if expected.len() != manifest.tensors.len() {
        return Err(ModelError::Format(format!(
            "expected {} tensors, manifest lists {}",
            expected.len(),
            manifest.tensors.len()
        )));
    }
    let mut slices = Vec::with_capacity(expected.len());
    for ((name, shape), entry) in expected.iter().zip(&manifest.tensors) {
        if *name != entry.name || *shape != entry.shape {
            return Err(ModelError::Format(format!(
                "tensor '{}' {:?} does not match expected '{}' {:?}",
                entry.name, entry.shape, name, shape
            )));
        }
        let len: usize = shape.iter().product();
        let end = entry.offset + len;
        if end > values.len() {
            return Err(ModelError::Format(format!("tensor '{name}' runs past the end of the file")));
        }
        slices.push(values[entry.offset..end].to_vec());
    }
    let mut it = slices.into_iter();
    let mut next = || it.next().expect("tensor count checked");
    model.embed.data = next();
    model.pos_embed.data = next();
    for layer in model.layers.iter_mut() {
        layer.attn_norm = next();
        for head in layer.heads.iter_mut() {
            head.w_q.data = next();
            head.w_k.data = next();
            head.w_v.data = next();
            head.w_o.data = next();
        }
        layer.mlp_norm = next();
        layer.mlp_in.data = next();
        layer.mlp_out.data = next();
    }
    model.unembed.data = next();
    Ok(model)
}
