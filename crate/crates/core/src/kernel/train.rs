use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{backward, encode, Forward};
use super::loss::{clr_loss, cosine_sim, head_loss, ClrVariant, ContrastBatch, Head, LossReport};
use super::params::{ModelConfig, Params};
use crate::error::{DatasetError, KernelError};
use crate::pipeline::{apply_masks, DatasetRecord};
use crate::syntax::special;

/// The four pre-training variations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "mlm")]
    Mlm,
    #[serde(rename = "mlm+clr+")]
    MlmClrPos,
    #[serde(rename = "mlm+clr±")]
    MlmClrHard,
    #[serde(rename = "mlm+clr±+ntmlm")]
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Mlm,
        Variant::MlmClrPos,
        Variant::MlmClrHard,
        Variant::Full,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Mlm => "mlm",
            Variant::MlmClrPos => "mlm+clr+",
            Variant::MlmClrHard => "mlm+clr±",
            Variant::Full => "mlm+clr±+ntmlm",
        }
    }

    pub fn clr(self) -> Option<ClrVariant> {
        match self {
            Variant::Mlm => None,
            Variant::MlmClrPos => Some(ClrVariant::PositiveOnly),
            Variant::MlmClrHard | Variant::Full => Some(ClrVariant::HardNegative),
        }
    }

    /// Node-type prediction and type embeddings on the input.
    pub fn uses_types(self) -> bool {
        self == Variant::Full
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = String;

    /// Accepts the labels, with `+-` or `pm` in place of `±`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let canonical = s.replace("+-", "±").replace("pm", "±");
        Variant::ALL
            .into_iter()
            .find(|v| v.label() == canonical)
            .ok_or_else(|| format!("unknown variant `{s}` (expected mlm, mlm+clr+, mlm+clr±, mlm+clr±+ntmlm)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub tau: f64,
    pub seed: u64,
    /// Global gradient-norm clip.
    pub clip: Option<f64>,
    /// Positives also act as anchors.
    pub bidirectional: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Full,
            epochs: 1,
            batch_size: 16,
            lr: 1e-4,
            tau: 0.05,
            seed: 0,
            clip: Some(1.0),
            bidirectional: false,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Model-ready sequences of one dataset record.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub code: Vec<u32>,
    pub types: Vec<u32>,
    pub masked_code: Vec<u32>,
    pub masked_types: Vec<u32>,
    /// Predicted positions, sorted.
    pub positions: Vec<usize>,
    pub pos_code: Vec<u32>,
    pub pos_types: Vec<u32>,
    pub neg_code: Vec<u32>,
    pub neg_types: Vec<u32>,
}

/// Keep `[CLS]`, the first `max_len - 2` positions and a closing `[SEP]`.
fn truncate(ids: &[u32], max_len: usize) -> Vec<u32> {
    if ids.len() <= max_len {
        return ids.to_vec();
    }
    let mut out = ids[..max_len - 1].to_vec();
    out.push(special::SEP);
    out
}

impl Example {
    pub fn from_record(r: &DatasetRecord, max_len: usize) -> Result<Self, DatasetError> {
        let (mc, mt) = apply_masks(&r.x.code_ids, &r.x.type_ids, &r.mask)?;
        let t = |ids: &[u32]| truncate(ids, max_len);
        let code = t(&r.x.code_ids);
        let positions = r
            .mask
            .positions()
            .into_iter()
            .filter(|&p| p + 1 < code.len())
            .collect();
        Ok(Self {
            id: r.id.clone(),
            types: t(&r.x.type_ids),
            masked_code: t(&mc),
            masked_types: t(&mt),
            positions,
            pos_code: t(&r.x_pos.code_ids),
            pos_types: t(&r.x_pos.type_ids),
            neg_code: t(&r.x_neg.code_ids),
            neg_types: t(&r.x_neg.type_ids),
            code,
        })
    }

    fn targets(&self, head: Head) -> Vec<u32> {
        let src = match head {
            Head::Code => &self.code,
            Head::Type => &self.types,
        };
        self.positions.iter().map(|&p| src[p]).collect()
    }
}

/// Per-step losses and per-epoch summaries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub steps: Vec<LossReport>,
    pub epochs: Vec<EpochStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the step reports.
    pub train: LossReport,
    pub heldout_perplexity: Option<f64>,
    pub heldout_margin_accuracy: Option<f64>,
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            m: Params::zeros(config),
            v: Params::zeros(config),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &mut Params, cfg: &TrainConfig) {
        if let Some(max) = cfg.clip {
            let norm = grads
                .tensors()
                .iter()
                .map(|(_, g)| g.iter().map(|x| x * x).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            if norm > max {
                let s = max / norm;
                for g in grads.slices_mut() {
                    g.iter_mut().for_each(|x| *x *= s);
                }
            }
        }
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let slots = params
            .slices_mut()
            .into_iter()
            .zip(grads.slices_mut())
            .zip(self.m.slices_mut())
            .zip(self.v.slices_mut());
        for (((p, g), m), v) in slots {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                p[i] -= cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.eps);
            }
        }
    }
}

fn pooled_rows(fs: &[&Forward]) -> Array2<f64> {
    let d = fs[0].hidden.ncols();
    let mut m = Array2::zeros((fs.len(), d));
    for (i, f) in fs.iter().enumerate() {
        m.row_mut(i).assign(&f.hidden.row(0));
    }
    m
}

fn backward_pooled(params: &Params, f: &Forward, d: ndarray::ArrayView1<f64>, grads: &mut Params) {
    let mut dh = Array2::zeros(f.hidden.dim());
    dh.row_mut(0).assign(&d);
    backward(params, f, &dh, grads);
}

/// Loss of one batch; its gradient is accumulated into `grads`. Token and
/// node-type losses are averaged over the batch's predicted positions, the
/// contrastive loss over anchors.
pub fn batch_loss(
    params: &Params,
    batch: &[&Example],
    cfg: &TrainConfig,
    mut grads: Option<&mut Params>,
) -> Result<LossReport, KernelError> {
    let total_m = batch.iter().map(|e| e.positions.len()).sum::<usize>().max(1);
    let scale = 1.0 / total_m as f64;
    let (mut l_mlm, mut l_nt) = (0.0, 0.0);
    for e in batch {
        let f = encode(params, &e.masked_code, &e.masked_types)?;
        let code = head_loss(params, Head::Code, &f.hidden, &e.positions, &e.targets(Head::Code), scale, grads.as_deref_mut())?;
        l_mlm += code.loss * scale;
        let mut dh = code.d_hidden;
        if cfg.variant.uses_types() {
            let ty = head_loss(params, Head::Type, &f.hidden, &e.positions, &e.targets(Head::Type), scale, grads.as_deref_mut())?;
            l_nt += ty.loss * scale;
            dh += &ty.d_hidden;
        }
        if let Some(g) = grads.as_deref_mut() {
            backward(params, &f, &dh, g);
        }
    }
    let mut l_clr = 0.0;
    if let Some(variant) = cfg.variant.clr() {
        let mut fx = Vec::with_capacity(batch.len());
        let mut fp = Vec::with_capacity(batch.len());
        let mut fn_ = Vec::with_capacity(batch.len());
        for e in batch {
            fx.push(encode(params, &e.code, &e.types)?);
            fp.push(encode(params, &e.pos_code, &e.pos_types)?);
            if variant == ClrVariant::HardNegative {
                fn_.push(encode(params, &e.neg_code, &e.neg_types)?);
            }
        }
        let rows = |fs: &[Forward]| pooled_rows(&fs.iter().collect::<Vec<_>>());
        let h = rows(&fx);
        let pos = rows(&fp);
        let neg = if fn_.is_empty() { pos.clone() } else { rows(&fn_) };
        let out = clr_loss(&ContrastBatch { h, pos, neg }, cfg.tau, variant, cfg.bidirectional)?;
        l_clr = out.loss;
        if let Some(g) = grads.as_deref_mut() {
            for (i, f) in fx.iter().enumerate() {
                backward_pooled(params, f, out.d_h.row(i), g);
            }
            for (i, f) in fp.iter().enumerate() {
                backward_pooled(params, f, out.d_pos.row(i), g);
            }
            for (i, f) in fn_.iter().enumerate() {
                backward_pooled(params, f, out.d_neg.row(i), g);
            }
        }
    }
    Ok(LossReport::new(l_mlm, l_nt, l_clr))
}

/// Train fresh parameters. The variant decides whether type embeddings
/// are used, overriding `model.use_types`.
pub fn train_loop(
    train: &[Example],
    heldout: &[Example],
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(Params, Curves), KernelError> {
    let mut model = model.clone();
    model.use_types = cfg.variant.uses_types();
    let mut params = Params::init(&model, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let curves = train_params(&mut params, train, heldout, cfg)?;
    Ok((params, curves))
}

/// Continue training existing parameters.
pub fn train_params(
    params: &mut Params,
    train: &[Example],
    heldout: &[Example],
    cfg: &TrainConfig,
) -> Result<Curves, KernelError> {
    if train.is_empty() {
        return Err(KernelError::Config("empty training set".into()));
    }
    if cfg.batch_size == 0 || !(cfg.tau > 0.0) {
        return Err(KernelError::Config("batch size and temperature must be positive".into()));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut adam = Adam::new(&params.config);
    let mut grads = Params::zeros(&params.config);
    let mut curves = Curves::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = LossReport::default();
        let mut steps = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            grads.fill(0.0);
            let report = batch_loss(params, &batch, cfg, Some(&mut grads))?;
            if !report.l_total.is_finite() {
                return Err(KernelError::Divergence {
                    step: curves.steps.len(),
                });
            }
            adam.step(params, &mut grads, cfg);
            if !params.is_finite() {
                return Err(KernelError::Divergence {
                    step: curves.steps.len(),
                });
            }
            curves.steps.push(report);
            sum.l_mlm += report.l_mlm;
            sum.l_ntmlm += report.l_ntmlm;
            sum.l_clr += report.l_clr;
            steps += 1;
        }
        let n = steps as f64;
        let (ppl, margin) = if heldout.is_empty() {
            (None, None)
        } else {
            (
                Some(perplexity(params, heldout)?),
                Some(triplet_eval(params, heldout)?),
            )
        };
        curves.epochs.push(EpochStats {
            epoch,
            train: LossReport::new(sum.l_mlm / n, sum.l_ntmlm / n, sum.l_clr / n),
            heldout_perplexity: ppl,
            heldout_margin_accuracy: margin,
        });
    }
    Ok(curves)
}

const SHUFFLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// `exp` of the mean token NLL over all predicted positions.
pub fn perplexity(params: &Params, heldout: &[Example]) -> Result<f64, KernelError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for e in heldout {
        let f = encode(params, &e.masked_code, &e.masked_types)?;
        let l = head_loss(params, Head::Code, &f.hidden, &e.positions, &e.targets(Head::Code), 1.0, None)?;
        total += l.loss;
        count += e.positions.len();
    }
    if count == 0 {
        return Err(KernelError::Config("no predicted positions in the held-out set".into()));
    }
    Ok((total / count as f64).exp())
}

/// Pooled vectors of the original, positive and negative of one example.
pub fn embed_triplet(params: &Params, e: &Example) -> Result<[Array1<f64>; 3], KernelError> {
    Ok([
        encode(params, &e.code, &e.types)?.pooled(),
        encode(params, &e.pos_code, &e.pos_types)?.pooled(),
        encode(params, &e.neg_code, &e.neg_types)?.pooled(),
    ])
}

/// Fraction of triplets whose positive is strictly closer to the original
/// than the negative.
pub fn triplet_eval(params: &Params, examples: &[Example]) -> Result<f64, KernelError> {
    if examples.is_empty() {
        return Err(KernelError::Config("no triplets to evaluate".into()));
    }
    let mut wins = 0usize;
    for e in examples {
        let [h, p, n] = embed_triplet(params, e)?;
        if cosine_sim(h.view(), p.view())? > cosine_sim(h.view(), n.view())? {
            wins += 1;
        }
    }
    Ok(wins as f64 / examples.len() as f64)
}

/// Whether a record id falls in the held-out fraction. Depends on the id
/// only, so the split is stable across runs and record orders.
pub fn is_heldout(id: &str, fraction: f64) -> bool {
    (crate::pipeline::fnv1a(id) % 1000) < (fraction * 1000.0).round() as u64
}

/// Partition examples into (train, held-out) by [`is_heldout`].
pub fn split_heldout(examples: Vec<Example>, fraction: f64) -> (Vec<Example>, Vec<Example>) {
    examples.into_iter().partition(|e| !is_heldout(&e.id, fraction))
}
