use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::params::Params;
use crate::error::KernelError;

/// Which output projection a token-prediction loss uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Code,
    Type,
}

/// Summed negative log-likelihood over predicted positions.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadLoss {
    pub loss: f64,
    /// One entry per position, in the order given.
    pub nll: Vec<f64>,
    /// Gradient of `scale * loss` with respect to the hidden states.
    pub d_hidden: Array2<f64>,
}

fn log_sum_exp(row: ArrayView1<f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `Σ_{i∈positions} −log P(target_i | h_i)` through the chosen head. When
/// `grads` is given, `scale` times the head gradient is accumulated there.
pub fn head_loss(
    params: &Params,
    head: Head,
    hidden: &Array2<f64>,
    positions: &[usize],
    targets: &[u32],
    scale: f64,
    grads: Option<&mut Params>,
) -> Result<HeadLoss, KernelError> {
    assert_eq!(positions.len(), targets.len(), "one target per position");
    let (w, b) = match head {
        Head::Code => (&params.mlm_w, &params.mlm_b),
        Head::Type => (&params.nt_w, &params.nt_b),
    };
    let vocab = b.len();
    for &p in positions {
        if p >= hidden.nrows() {
            return Err(KernelError::Index {
                index: p,
                len: hidden.nrows(),
            });
        }
    }
    if let Some(&t) = targets.iter().find(|&&t| t as usize >= vocab) {
        return Err(KernelError::Index {
            index: t as usize,
            len: vocab,
        });
    }
    let hm = hidden.select(Axis(0), positions);
    let mut z = hm.dot(w) + b;
    let mut nll = Vec::with_capacity(positions.len());
    for (mut row, &t) in z.rows_mut().into_iter().zip(targets) {
        let lse = log_sum_exp(row.view());
        nll.push(lse - row[t as usize]);
        row.mapv_inplace(|v| (v - lse).exp());
        row[t as usize] -= 1.0;
    }
    let dz = z * scale;
    let dhm = dz.dot(&w.t());
    let mut d_hidden = Array2::zeros(hidden.dim());
    for (k, &p) in positions.iter().enumerate() {
        let mut r = d_hidden.row_mut(p);
        r += &dhm.row(k);
    }
    if let Some(g) = grads {
        let (gw, gb) = match head {
            Head::Code => (&mut g.mlm_w, &mut g.mlm_b),
            Head::Type => (&mut g.nt_w, &mut g.nt_b),
        };
        ndarray::linalg::general_mat_mul(1.0, &hm.t(), &dz, 1.0, gw);
        *gb += &dz.sum_axis(Axis(0));
    }
    Ok(HeadLoss {
        loss: nll.iter().sum(),
        nll,
        d_hidden,
    })
}

/// Token cloze loss over the predicted positions.
pub fn mlm_loss(
    params: &Params,
    hidden: &Array2<f64>,
    positions: &[usize],
    original_code: &[u32],
    grads: Option<&mut Params>,
) -> Result<HeadLoss, KernelError> {
    let targets: Vec<u32> = positions.iter().map(|&p| original_code[p]).collect();
    head_loss(params, Head::Code, hidden, positions, &targets, 1.0, grads)
}

/// Node-type cloze loss over the same positions.
pub fn ntmlm_loss(
    params: &Params,
    hidden: &Array2<f64>,
    positions: &[usize],
    original_types: &[u32],
    grads: Option<&mut Params>,
) -> Result<HeadLoss, KernelError> {
    let targets: Vec<u32> = positions.iter().map(|&p| original_types[p]).collect();
    head_loss(params, Head::Type, hidden, positions, &targets, 1.0, grads)
}

fn norm(a: ArrayView1<f64>) -> Result<f64, KernelError> {
    let n = a.dot(&a).sqrt();
    if n > 0.0 && n.is_finite() {
        Ok(n)
    } else {
        Err(KernelError::DegenerateVector)
    }
}

pub fn cosine_sim(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64, KernelError> {
    Ok((a.dot(&b) / (norm(a)? * norm(b)?)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClrVariant {
    HardNegative,
    PositiveOnly,
}

/// Pooled vectors of N triplets, one row each.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastBatch {
    pub h: Array2<f64>,
    pub pos: Array2<f64>,
    pub neg: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClrLoss {
    pub loss: f64,
    pub d_h: Array2<f64>,
    pub d_pos: Array2<f64>,
    pub d_neg: Array2<f64>,
}

/// Unit rows and norms.
fn normalized(m: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>), KernelError> {
    let norms = m
        .rows()
        .into_iter()
        .map(norm)
        .collect::<Result<Array1<f64>, _>>()?;
    Ok((m / &norms.view().insert_axis(Axis(1)), norms))
}

/// One direction of the loss: every anchor row against the positives of
/// all rows (and the negatives of all rows when given).
fn directional(
    anchors: &(Array2<f64>, Array1<f64>),
    pos: &(Array2<f64>, Array1<f64>),
    neg: Option<&(Array2<f64>, Array1<f64>)>,
    tau: f64,
    weight: f64,
    grads: [&mut Array2<f64>; 3],
) -> f64 {
    let [ga, gp, gn] = grads;
    let n = anchors.0.nrows();
    let sp = anchors.0.dot(&pos.0.t());
    let sn = neg.map(|q| anchors.0.dot(&q.0.t()));
    let mut total = 0.0;
    // gradient of the loss with respect to each similarity
    let mut dsp = Array2::<f64>::zeros((n, n));
    let mut dsn = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut logits: Vec<f64> = sp.row(i).iter().map(|s| s / tau).collect();
        if let Some(sn) = &sn {
            logits.extend(sn.row(i).iter().map(|s| s / tau));
        }
        let lse = log_sum_exp(ArrayView1::from(&logits));
        total += lse - logits[i];
        for (j, l) in logits.iter().enumerate() {
            let mut g = (l - lse).exp();
            if j == i {
                g -= 1.0;
            }
            let g = g * weight / tau;
            if j < n {
                dsp[[i, j]] = g;
            } else {
                dsn[[i, j - n]] = g;
            }
        }
    }
    // s = u·v with u = a/|a|: ds/da = (v − s u)/|a|
    let back = |ds: &Array2<f64>, s: &Array2<f64>, other: &(Array2<f64>, Array1<f64>), ga: &mut Array2<f64>, go: &mut Array2<f64>| {
        let (ua, na) = anchors;
        let (uo, no) = other;
        let row_s = (ds * s).sum_axis(Axis(1));
        let da = (ds.dot(uo) - ua * &row_s.view().insert_axis(Axis(1))) / &na.view().insert_axis(Axis(1));
        let col_s = (ds * s).sum_axis(Axis(0));
        let dot = ds.t().dot(ua) - uo * &col_s.view().insert_axis(Axis(1));
        *ga += &da;
        *go += &(dot / &no.view().insert_axis(Axis(1)));
    };
    back(&dsp, &sp, pos, ga, gp);
    if let (Some(q), Some(sn)) = (neg, &sn) {
        back(&dsn, sn, q, ga, gn);
    }
    total * weight
}

/// In-batch contrastive loss with cosine similarity and temperature `tau`,
/// averaged over anchors. Hard negatives of every row join each anchor's
/// denominator unless the variant is positive-only. With `bidirectional`
/// the positives also act as anchors and the two directions are averaged.
pub fn clr_loss(
    batch: &ContrastBatch,
    tau: f64,
    variant: ClrVariant,
    bidirectional: bool,
) -> Result<ClrLoss, KernelError> {
    let n = batch.h.nrows();
    assert!(n >= 1 && tau > 0.0, "clr needs a batch and a positive temperature");
    let h = normalized(&batch.h)?;
    let p = normalized(&batch.pos)?;
    let q = match variant {
        ClrVariant::HardNegative => Some(normalized(&batch.neg)?),
        ClrVariant::PositiveOnly => None,
    };
    let mut d_h = Array2::zeros(batch.h.dim());
    let mut d_pos = Array2::zeros(batch.pos.dim());
    let mut d_neg = Array2::zeros(batch.neg.dim());
    let directions = if bidirectional { 2.0 } else { 1.0 };
    let weight = 1.0 / (n as f64 * directions);
    let mut loss = directional(&h, &p, q.as_ref(), tau, weight, [&mut d_h, &mut d_pos, &mut d_neg]);
    if bidirectional {
        loss += directional(&p, &h, q.as_ref(), tau, weight, [&mut d_pos, &mut d_h, &mut d_neg]);
    }
    Ok(ClrLoss {
        loss,
        d_h,
        d_pos,
        d_neg,
    })
}

/// The three loss components of one batch and their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_mlm: f64,
    pub l_ntmlm: f64,
    pub l_clr: f64,
    pub l_total: f64,
}

impl LossReport {
    pub fn new(l_mlm: f64, l_ntmlm: f64, l_clr: f64) -> Self {
        Self {
            l_mlm,
            l_ntmlm,
            l_clr,
            l_total: total_loss(l_mlm, l_ntmlm, l_clr),
        }
    }
}

/// Unweighted sum of the three objectives.
pub fn total_loss(l_mlm: f64, l_ntmlm: f64, l_clr: f64) -> f64 {
    l_mlm + l_ntmlm + l_clr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::params::ModelConfig;
    use ndarray::arr2;

    #[test]
    fn cosine_examples() {
        let c = |a: &[f64], b: &[f64]| cosine_sim(ArrayView1::from(a), ArrayView1::from(b));
        assert!((c(&[1.0, 0.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(c(&[1.0, 0.0], &[0.0, 1.0]).unwrap().abs() < 1e-15);
        assert!((c(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(c(&[0.0, 0.0], &[1.0, 0.0]), Err(KernelError::DegenerateVector)));
    }

    #[test]
    fn clr_closed_forms() {
        let one = |h: [f64; 2], p: [f64; 2], q: [f64; 2]| ContrastBatch {
            h: arr2(&[h]),
            pos: arr2(&[p]),
            neg: arr2(&[q]),
        };
        let b = one([0.3, -1.2], [2.0, 0.5], [1.0, 1.0]);
        assert!(clr_loss(&b, 0.05, ClrVariant::PositiveOnly, false).unwrap().loss.abs() < 1e-12);
        let sym = one([1.0, 0.0], [1.0, 1.0], [1.0, -1.0]);
        let l = clr_loss(&sym, 0.05, ClrVariant::HardNegative, false).unwrap().loss;
        assert!((l - 2f64.ln()).abs() < 1e-9);
        let far = one([1.0, 0.0], [3.0, 0.0], [0.0, 2.0]);
        let l = clr_loss(&far, 0.05, ClrVariant::HardNegative, false).unwrap().loss;
        assert!((l - (-20f64).exp().ln_1p()).abs() < 1e-9);
        let zero = one([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        assert!(clr_loss(&zero, 0.05, ClrVariant::HardNegative, false).is_err());
    }

    #[test]
    fn head_loss_uniform_logits() {
        let mut cfg = ModelConfig::desk(2000, 300);
        cfg.dim = 4;
        cfg.heads = 1;
        cfg.layers = 0;
        let p = Params::zeros(&cfg);
        let hidden = Array2::from_elem((5, 4), 0.7);
        let l = mlm_loss(&p, &hidden, &[2], &[0, 0, 17, 0, 0], None).unwrap();
        assert!((l.loss - 2000f64.ln()).abs() < 1e-9);
        let t = ntmlm_loss(&p, &hidden, &[1, 3], &[0, 9, 0, 250, 0], None).unwrap();
        assert!((t.loss - 2.0 * 300f64.ln()).abs() < 1e-9);
        assert!(mlm_loss(&p, &hidden, &[7], &[0; 8], None).is_err());
    }

    #[test]
    fn reports_add_up() {
        assert_eq!(total_loss(1.0, 2.0, 3.0), 6.0);
        assert_eq!(LossReport::new(0.0, 0.0, 0.0).l_total, 0.0);
        let r = LossReport::new(0.25, 1.5, 0.125);
        assert_eq!(r.l_total, r.l_mlm + r.l_ntmlm + r.l_clr);
    }
}
