use std::path::Path;

use ndarray::{Array1, Array2, ArrayViewD};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::KernelError;
use crate::syntax::special;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    /// Width of the feed-forward block.
    pub ffn: usize,
    /// Rows of the position table; longer inputs are truncated.
    pub max_len: usize,
    pub code_vocab: usize,
    pub type_vocab: usize,
    pub use_positions: bool,
    /// Add type embeddings to the input.
    pub use_types: bool,
}

impl ModelConfig {
    /// d=64, two layers, four heads.
    pub fn desk(code_vocab: usize, type_vocab: usize) -> Self {
        Self {
            dim: 64,
            layers: 2,
            heads: 4,
            ffn: 128,
            max_len: 512,
            code_vocab,
            type_vocab,
            use_positions: true,
            use_types: true,
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |m: &str| Err(KernelError::Config(m.to_owned()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.layers > 0 && (self.heads == 0 || self.dim % self.heads != 0) {
            return bad("dim must be a multiple of heads");
        }
        if self.max_len < 2 {
            return bad("max_len must leave room for [CLS] and [SEP]");
        }
        if self.code_vocab <= special::COUNT as usize || self.type_vocab <= special::COUNT as usize {
            return bad("vocabularies must extend past the special tokens");
        }
        Ok(())
    }
}

/// One pre-norm encoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

const LAYER_NAMES: [&str; 16] = [
    "ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln2_g", "ln2_b", "w1",
    "b1", "w2", "b2",
];

impl LayerParams {
    fn zeros(d: usize, f: usize) -> Self {
        Self {
            ln1_g: Array1::zeros(d),
            ln1_b: Array1::zeros(d),
            wq: Array2::zeros((d, d)),
            bq: Array1::zeros(d),
            wk: Array2::zeros((d, d)),
            bk: Array1::zeros(d),
            wv: Array2::zeros((d, d)),
            bv: Array1::zeros(d),
            wo: Array2::zeros((d, d)),
            bo: Array1::zeros(d),
            ln2_g: Array1::zeros(d),
            ln2_b: Array1::zeros(d),
            w1: Array2::zeros((d, f)),
            b1: Array1::zeros(f),
            w2: Array2::zeros((f, d)),
            b2: Array1::zeros(d),
        }
    }

    fn views(&self) -> [ArrayViewD<'_, f64>; 16] {
        [
            self.ln1_g.view().into_dyn(),
            self.ln1_b.view().into_dyn(),
            self.wq.view().into_dyn(),
            self.bq.view().into_dyn(),
            self.wk.view().into_dyn(),
            self.bk.view().into_dyn(),
            self.wv.view().into_dyn(),
            self.bv.view().into_dyn(),
            self.wo.view().into_dyn(),
            self.bo.view().into_dyn(),
            self.ln2_g.view().into_dyn(),
            self.ln2_b.view().into_dyn(),
            self.w1.view().into_dyn(),
            self.b1.view().into_dyn(),
            self.w2.view().into_dyn(),
            self.b2.view().into_dyn(),
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 16] {
        let LayerParams {
            ln1_g,
            ln1_b,
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
            ln2_g,
            ln2_b,
            w1,
            b1,
            w2,
            b2,
        } = self;
        [
            ln1_g.as_slice_mut().unwrap(),
            ln1_b.as_slice_mut().unwrap(),
            wq.as_slice_mut().unwrap(),
            bq.as_slice_mut().unwrap(),
            wk.as_slice_mut().unwrap(),
            bk.as_slice_mut().unwrap(),
            wv.as_slice_mut().unwrap(),
            bv.as_slice_mut().unwrap(),
            wo.as_slice_mut().unwrap(),
            bo.as_slice_mut().unwrap(),
            ln2_g.as_slice_mut().unwrap(),
            ln2_b.as_slice_mut().unwrap(),
            w1.as_slice_mut().unwrap(),
            b1.as_slice_mut().unwrap(),
            w2.as_slice_mut().unwrap(),
            b2.as_slice_mut().unwrap(),
        ]
    }
}

/// All trainable tensors. The same set encodes x, x⁺ and x⁻.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub config: ModelConfig,
    pub code_emb: Array2<f64>,
    pub type_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub mlm_w: Array2<f64>,
    pub mlm_b: Array1<f64>,
    pub nt_w: Array2<f64>,
    pub nt_b: Array1<f64>,
}

fn normal(rng: &mut impl Rng, shape: (usize, usize), std: f64) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("positive std");
    Array2::from_shape_simple_fn(shape, || dist.sample(rng))
}

impl Params {
    /// Zero tensors of the right shapes (also the gradient buffer).
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.dim;
        Self {
            config: config.clone(),
            code_emb: Array2::zeros((config.code_vocab, d)),
            type_emb: Array2::zeros((config.type_vocab, d)),
            pos_emb: Array2::zeros((config.max_len, d)),
            layers: (0..config.layers)
                .map(|_| LayerParams::zeros(d, config.ffn))
                .collect(),
            mlm_w: Array2::zeros((d, config.code_vocab)),
            mlm_b: Array1::zeros(config.code_vocab),
            nt_w: Array2::zeros((d, config.type_vocab)),
            nt_b: Array1::zeros(config.type_vocab),
        }
    }

    /// Gaussian weights scaled by fan-in, unit layer-norm gains, zero biases.
    pub fn init(config: &ModelConfig, rng: &mut impl Rng) -> Result<Self, KernelError> {
        config.validate()?;
        let d = config.dim;
        let f = config.ffn;
        let mut p = Self::zeros(config);
        let emb = 1.0 / (d as f64).sqrt();
        p.code_emb = normal(rng, (config.code_vocab, d), emb);
        p.type_emb = normal(rng, (config.type_vocab, d), emb);
        p.pos_emb = normal(rng, (config.max_len, d), emb);
        let wd = 1.0 / (d as f64).sqrt();
        let wf = 1.0 / (f as f64).sqrt();
        for l in &mut p.layers {
            l.ln1_g.fill(1.0);
            l.ln2_g.fill(1.0);
            l.wq = normal(rng, (d, d), wd);
            l.wk = normal(rng, (d, d), wd);
            l.wv = normal(rng, (d, d), wd);
            l.wo = normal(rng, (d, d), wd);
            l.w1 = normal(rng, (d, f), wd);
            l.w2 = normal(rng, (f, d), wf);
        }
        p.mlm_w = normal(rng, (d, config.code_vocab), wd);
        p.nt_w = normal(rng, (d, config.type_vocab), wd);
        Ok(p)
    }

    /// `(name, view)` of every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![
            ("code_emb".to_owned(), self.code_emb.view().into_dyn()),
            ("type_emb".to_owned(), self.type_emb.view().into_dyn()),
            ("pos_emb".to_owned(), self.pos_emb.view().into_dyn()),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (name, v) in LAYER_NAMES.iter().zip(l.views()) {
                out.push((format!("layers.{i}.{name}"), v));
            }
        }
        out.push(("mlm_w".to_owned(), self.mlm_w.view().into_dyn()));
        out.push(("mlm_b".to_owned(), self.mlm_b.view().into_dyn()));
        out.push(("nt_w".to_owned(), self.nt_w.view().into_dyn()));
        out.push(("nt_b".to_owned(), self.nt_b.view().into_dyn()));
        out
    }

    /// Mutable storage of every tensor, in the order of [`Params::tensors`].
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.code_emb.as_slice_mut().unwrap(),
            self.type_emb.as_slice_mut().unwrap(),
            self.pos_emb.as_slice_mut().unwrap(),
        ];
        for l in &mut self.layers {
            out.extend(l.slices_mut());
        }
        out.push(self.mlm_w.as_slice_mut().unwrap());
        out.push(self.mlm_b.as_slice_mut().unwrap());
        out.push(self.nt_w.as_slice_mut().unwrap());
        out.push(self.nt_b.as_slice_mut().unwrap());
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|(_, v)| v.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|(_, v)| v.iter().copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "flat parameter length");
        let mut at = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&flat[at..at + s.len()]);
            at += s.len();
        }
    }

    pub fn fill(&mut self, value: f64) {
        for s in self.slices_mut() {
            s.fill(value);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), KernelError> {
        let ckpt = Checkpoint::from_params(self);
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &ckpt)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KernelError> {
        let file = std::fs::File::open(path)?;
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        ckpt.into_params()
    }
}

pub const CHECKPOINT_FORMAT: &str = "codetriplet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

/// JSON checkpoint: config, a shape manifest and the tensor data in
/// manifest order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub manifest: Vec<TensorInfo>,
    pub data: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn from_params(p: &Params) -> Self {
        let tensors = p.tensors();
        Self {
            format: CHECKPOINT_FORMAT.to_owned(),
            version: CHECKPOINT_VERSION,
            config: p.config.clone(),
            manifest: tensors
                .iter()
                .map(|(name, v)| TensorInfo {
                    name: name.clone(),
                    shape: v.shape().to_vec(),
                })
                .collect(),
            data: tensors.iter().map(|(_, v)| v.iter().copied().collect()).collect(),
        }
    }

    pub fn into_params(self) -> Result<Params, KernelError> {
        let bad = |m: String| KernelError::Checkpoint(m);
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported format {} v{}", self.format, self.version)));
        }
        self.config.validate()?;
        let mut p = Params::zeros(&self.config);
        let expected: Vec<TensorInfo> = p
            .tensors()
            .iter()
            .map(|(name, v)| TensorInfo {
                name: name.clone(),
                shape: v.shape().to_vec(),
            })
            .collect();
        if expected != self.manifest {
            return Err(bad("manifest does not match the config".into()));
        }
        if self.data.len() != expected.len() {
            return Err(bad("tensor count does not match the manifest".into()));
        }
        for ((slot, data), info) in p.slices_mut().into_iter().zip(&self.data).zip(&expected) {
            if data.len() != slot.len() {
                return Err(bad(format!("{} holds {} values", info.name, data.len())));
            }
            slot.copy_from_slice(data);
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> ModelConfig {
        ModelConfig {
            dim: 8,
            layers: 2,
            heads: 2,
            ffn: 16,
            max_len: 12,
            code_vocab: 20,
            type_vocab: 11,
            use_positions: true,
            use_types: true,
        }
    }

    #[test]
    fn flat_views_follow_tensor_order() {
        let mut p = Params::init(&tiny(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let flat = p.to_flat();
        assert_eq!(flat.len(), p.len());
        assert_eq!(flat[0], p.code_emb[[0, 0]]);
        let mut shifted = flat.clone();
        shifted.iter_mut().for_each(|x| *x += 1.0);
        p.set_flat(&shifted);
        assert_eq!(p.to_flat(), shifted);
        assert_eq!(p.tensors().len(), 3 + 2 * 16 + 4);
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = Params::init(&tiny(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        p.save(&path).unwrap();
        assert_eq!(Params::load(&path).unwrap(), p);
        let mut ckpt = Checkpoint::from_params(&p);
        ckpt.manifest[3].shape = vec![1];
        assert!(matches!(ckpt.into_params(), Err(KernelError::Checkpoint(_))));
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"manifest\""));
    }

    #[test]
    fn bad_configs() {
        let mut c = tiny();
        c.heads = 3;
        assert!(c.validate().is_err());
        c = tiny();
        c.code_vocab = 5;
        assert!(c.validate().is_err());
    }
}
