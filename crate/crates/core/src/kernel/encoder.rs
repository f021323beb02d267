use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::params::{LayerParams, Params};
use crate::error::KernelError;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4;
const GELU_A: f64 = 0.044_715;

/// Input vectors: code embedding plus, when enabled, type and position
/// embeddings.
pub fn embed(params: &Params, code: &[u32], types: &[u32]) -> Result<Array2<f64>, KernelError> {
    let cfg = &params.config;
    if code.len() != types.len() {
        return Err(KernelError::Index {
            index: types.len(),
            len: code.len(),
        });
    }
    if cfg.use_positions && code.len() > cfg.max_len {
        return Err(KernelError::Index {
            index: code.len() - 1,
            len: cfg.max_len,
        });
    }
    let mut v = Array2::zeros((code.len(), cfg.dim));
    for (i, (&c, &t)) in code.iter().zip(types).enumerate() {
        let check = |id: u32, len: usize| {
            if (id as usize) < len {
                Ok(id as usize)
            } else {
                Err(KernelError::Index {
                    index: id as usize,
                    len,
                })
            }
        };
        let mut row = v.row_mut(i);
        row += &params.code_emb.row(check(c, cfg.code_vocab)?);
        if cfg.use_types {
            row += &params.type_emb.row(check(t, cfg.type_vocab)?);
        }
        if cfg.use_positions {
            row += &params.pos_emb.row(i);
        }
    }
    Ok(v)
}

#[derive(Debug, Clone)]
struct NormCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array1<f64>, b: &Array1<f64>) -> (Array2<f64>, NormCache) {
    let d = x.ncols() as f64;
    let mean = x.sum_axis(Axis(1)) / d;
    let centered = x - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / d;
    let rstd = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = centered * &rstd.view().insert_axis(Axis(1));
    let y = &xhat * g + b;
    (y, NormCache { xhat, rstd })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &NormCache,
    g: &Array1<f64>,
    dg: &mut Array1<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    let d = dy.ncols() as f64;
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let dxhat = dy * g;
    let m1 = dxhat.sum_axis(Axis(1)) / d;
    let m2 = (&dxhat * &cache.xhat).sum_axis(Axis(1)) / d;
    let inner = dxhat - &m1.view().insert_axis(Axis(1))
        - &cache.xhat * &m2.view().insert_axis(Axis(1));
    inner * &cache.rstd.view().insert_axis(Axis(1))
}

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + GELU_A * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + GELU_A * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * u * u)
}

fn softmax_rows(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    norm1: NormCache,
    a: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    o: Array2<f64>,
    norm2: NormCache,
    b: Array2<f64>,
    u: Array2<f64>,
    g: Array2<f64>,
}

/// Hidden states of one sequence plus what the backward pass needs.
#[derive(Debug, Clone)]
pub struct Forward {
    pub hidden: Array2<f64>,
    code: Vec<u32>,
    types: Vec<u32>,
    caches: Vec<LayerCache>,
}

impl Forward {
    /// Pooled sequence vector: the hidden state at `[CLS]`.
    pub fn pooled(&self) -> Array1<f64> {
        self.hidden.row(0).to_owned()
    }
}

fn layer_forward(l: &LayerParams, heads: usize, x: &Array2<f64>) -> (Array2<f64>, LayerCache) {
    let (n, d) = x.dim();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let (a, norm1) = layer_norm(x, &l.ln1_g, &l.ln1_b);
    let q = a.dot(&l.wq) + &l.bq;
    let k = a.dot(&l.wk) + &l.bk;
    let v = a.dot(&l.wv) + &l.bv;
    let mut o = Array2::zeros((n, d));
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut p = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        softmax_rows(&mut p);
        o.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
        probs.push(p);
    }
    let x1 = x + &(o.dot(&l.wo) + &l.bo);
    let (b, norm2) = layer_norm(&x1, &l.ln2_g, &l.ln2_b);
    let u = b.dot(&l.w1) + &l.b1;
    let g = u.mapv(gelu);
    let x2 = &x1 + &(g.dot(&l.w2) + &l.b2);
    let cache = LayerCache {
        norm1,
        a,
        q,
        k,
        v,
        probs,
        o,
        norm2,
        b,
        u,
        g,
    };
    (x2, cache)
}

/// Run the encoder over one sequence. With zero layers the hidden states
/// are the input vectors.
pub fn encode(params: &Params, code: &[u32], types: &[u32]) -> Result<Forward, KernelError> {
    let mut x = embed(params, code, types)?;
    let mut caches = Vec::with_capacity(params.layers.len());
    for l in &params.layers {
        let (next, cache) = layer_forward(l, params.config.heads, &x);
        caches.push(cache);
        x = next;
    }
    Ok(Forward {
        hidden: x,
        code: code.to_vec(),
        types: types.to_vec(),
        caches,
    })
}

fn add_outer(acc: &mut Array2<f64>, a: ArrayView2<f64>, b: ArrayView2<f64>) {
    ndarray::linalg::general_mat_mul(1.0, &a.t(), &b, 1.0, acc);
}

fn layer_backward(
    l: &LayerParams,
    gl: &mut LayerParams,
    heads: usize,
    c: &LayerCache,
    dx2: &Array2<f64>,
) -> Array2<f64> {
    let d = dx2.ncols();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    // feed-forward branch
    let dx1_res = dx2.clone();
    add_outer(&mut gl.w2, c.g.view(), dx2.view());
    gl.b2 += &dx2.sum_axis(Axis(0));
    let dg = dx2.dot(&l.w2.t());
    let du = dg * &c.u.mapv(gelu_grad);
    add_outer(&mut gl.w1, c.b.view(), du.view());
    gl.b1 += &du.sum_axis(Axis(0));
    let db = du.dot(&l.w1.t());
    let dx1 = dx1_res + layer_norm_backward(&db, &c.norm2, &l.ln2_g, &mut gl.ln2_g, &mut gl.ln2_b);
    // attention branch
    add_outer(&mut gl.wo, c.o.view(), dx1.view());
    gl.bo += &dx1.sum_axis(Axis(0));
    let do_ = dx1.dot(&l.wo.t());
    let mut dq = Array2::zeros(c.q.dim());
    let mut dk = Array2::zeros(c.k.dim());
    let mut dv = Array2::zeros(c.v.dim());
    for (h, p) in c.probs.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let doh = do_.slice(cols);
        dv.slice_mut(cols).assign(&p.t().dot(&doh));
        let dp = doh.dot(&c.v.slice(cols).t());
        let rowdot = (&dp * p).sum_axis(Axis(1));
        let ds = (dp - &rowdot.insert_axis(Axis(1))) * p * scale;
        dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
    }
    add_outer(&mut gl.wq, c.a.view(), dq.view());
    add_outer(&mut gl.wk, c.a.view(), dk.view());
    add_outer(&mut gl.wv, c.a.view(), dv.view());
    gl.bq += &dq.sum_axis(Axis(0));
    gl.bk += &dk.sum_axis(Axis(0));
    gl.bv += &dv.sum_axis(Axis(0));
    let da = dq.dot(&l.wq.t()) + dk.dot(&l.wk.t()) + dv.dot(&l.wv.t());
    dx1 + layer_norm_backward(&da, &c.norm1, &l.ln1_g, &mut gl.ln1_g, &mut gl.ln1_b)
}

/// Accumulate into `grads` the gradient of a loss whose gradient with
/// respect to the hidden states is `d_hidden`.
pub fn backward(params: &Params, f: &Forward, d_hidden: &Array2<f64>, grads: &mut Params) {
    let mut dx = d_hidden.clone();
    for ((l, gl), c) in params
        .layers
        .iter()
        .zip(grads.layers.iter_mut())
        .zip(&f.caches)
        .rev()
    {
        dx = layer_backward(l, gl, params.config.heads, c, &dx);
    }
    let cfg = &params.config;
    for (i, row) in dx.rows().into_iter().enumerate() {
        let mut r = grads.code_emb.row_mut(f.code[i] as usize);
        r += &row;
        if cfg.use_types {
            let mut r = grads.type_emb.row_mut(f.types[i] as usize);
            r += &row;
        }
        if cfg.use_positions {
            let mut r = grads.pos_emb.row_mut(i);
            r += &row;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::params::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(layers: usize) -> ModelConfig {
        ModelConfig {
            dim: 4,
            layers,
            heads: 2,
            ffn: 6,
            max_len: 8,
            code_vocab: 9,
            type_vocab: 7,
            use_positions: true,
            use_types: true,
        }
    }

    #[test]
    fn embedding_is_a_sum() {
        let mut cfg = config(0);
        cfg.dim = 2;
        cfg.heads = 1;
        let mut p = Params::zeros(&cfg);
        p.code_emb.row_mut(6).assign(&ndarray::arr1(&[1.0, 2.0]));
        p.type_emb.row_mut(5).assign(&ndarray::arr1(&[3.0, 4.0]));
        let v = embed(&p, &[6], &[5]).unwrap();
        assert_eq!(v.row(0).to_vec(), vec![4.0, 6.0]);
        p.type_emb.fill(0.0);
        assert_eq!(embed(&p, &[6], &[5]).unwrap().row(0).to_vec(), vec![1.0, 2.0]);
        assert!(matches!(embed(&p, &[9], &[5]), Err(KernelError::Index { index: 9, len: 9 })));
        assert!(embed(&p, &[6], &[7]).is_err());
    }

    #[test]
    fn embedding_is_linear_in_the_tables() {
        let cfg = config(0);
        let p = Params::init(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut scaled = p.clone();
        for s in scaled.slices_mut() {
            s.iter_mut().for_each(|x| *x *= 2.5);
        }
        let a = embed(&p, &[2, 7, 5, 3], &[2, 6, 6, 3]).unwrap();
        let b = embed(&scaled, &[2, 7, 5, 3], &[2, 6, 6, 3]).unwrap();
        assert!((b - a * 2.5).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn zero_layers_is_identity() {
        let p = Params::init(&config(0), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let code = [2, 5, 6, 3];
        let types = [2, 5, 6, 3];
        let f = encode(&p, &code, &types).unwrap();
        assert_eq!(f.hidden, embed(&p, &code, &types).unwrap());
    }

    #[test]
    fn pooled_output_ignores_order_without_positions() {
        let mut cfg = config(2);
        cfg.use_positions = false;
        let p = Params::init(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let a = encode(&p, &[2, 5, 6, 7, 3], &[2, 5, 6, 5, 3]).unwrap().pooled();
        let b = encode(&p, &[2, 7, 6, 5, 3], &[2, 5, 6, 5, 3]).unwrap().pooled();
        assert!((a - b).iter().all(|d| d.abs() < 1e-12));
    }
}
