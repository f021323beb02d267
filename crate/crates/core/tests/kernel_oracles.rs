use codetriplet::kernel::*;
use codetriplet::pipeline::{AugmentConfig, Augmenter, Corpus};
use codetriplet::syntax::{special, SourceUnit};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny(layers: usize) -> ModelConfig {
    ModelConfig {
        dim: 4,
        layers,
        heads: 2,
        ffn: 6,
        max_len: 10,
        code_vocab: 12,
        type_vocab: 9,
        use_positions: true,
        use_types: true,
    }
}

/// Random parameters everywhere, gains and biases included.
fn jittered(cfg: &ModelConfig, seed: u64) -> Params {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Params::init(cfg, &mut rng).unwrap();
    for s in p.slices_mut() {
        for x in s.iter_mut() {
            *x += rng.gen_range(-0.3..0.3);
        }
    }
    p
}

// ---- scalar oracle ----------------------------------------------------

type M = Vec<Vec<f64>>;

fn mat(a: &Array2<f64>) -> M {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matmul(a: &M, b: &M) -> M {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn add_bias(a: &mut M, b: &Array1<f64>) {
    for row in a.iter_mut() {
        for (x, y) in row.iter_mut().zip(b.iter()) {
            *x += y;
        }
    }
}

fn norm_rows(x: &M, g: &Array1<f64>, b: &Array1<f64>) -> M {
    x.iter()
        .map(|r| {
            let d = r.len() as f64;
            let mean = r.iter().sum::<f64>() / d;
            let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            r.iter()
                .enumerate()
                .map(|(j, v)| (v - mean) / (var + 1e-5).sqrt() * g[j] + b[j])
                .collect()
        })
        .collect()
}

fn gelu(u: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * u * (1.0 + (c * (u + 0.044715 * u.powi(3))).tanh())
}

fn scalar_encoder(p: &Params, code: &[u32], types: &[u32]) -> M {
    let cfg = &p.config;
    let mut x: M = (0..code.len())
        .map(|i| {
            (0..cfg.dim)
                .map(|j| {
                    p.code_emb[[code[i] as usize, j]]
                        + p.type_emb[[types[i] as usize, j]]
                        + p.pos_emb[[i, j]]
                })
                .collect()
        })
        .collect();
    let n = code.len();
    let dh = cfg.dim / cfg.heads;
    for l in &p.layers {
        let a = norm_rows(&x, &l.ln1_g, &l.ln1_b);
        let mut q = matmul(&a, &mat(&l.wq));
        add_bias(&mut q, &l.bq);
        let mut k = matmul(&a, &mat(&l.wk));
        add_bias(&mut k, &l.bk);
        let mut v = matmul(&a, &mat(&l.wv));
        add_bias(&mut v, &l.bv);
        let mut o = vec![vec![0.0; cfg.dim]; n];
        for h in 0..cfg.heads {
            let cols = h * dh..(h + 1) * dh;
            for i in 0..n {
                let scores: Vec<f64> = (0..n)
                    .map(|j| cols.clone().map(|c| q[i][c] * k[j][c]).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let z: f64 = e.iter().sum();
                for c in cols.clone() {
                    o[i][c] = (0..n).map(|j| e[j] / z * v[j][c]).sum();
                }
            }
        }
        let mut proj = matmul(&o, &mat(&l.wo));
        add_bias(&mut proj, &l.bo);
        let x1: M = x.iter().zip(&proj).map(|(a, b)| a.iter().zip(b).map(|(a, b)| a + b).collect()).collect();
        let b = norm_rows(&x1, &l.ln2_g, &l.ln2_b);
        let mut u = matmul(&b, &mat(&l.w1));
        add_bias(&mut u, &l.b1);
        let g: M = u.iter().map(|r| r.iter().map(|&v| gelu(v)).collect()).collect();
        let mut f = matmul(&g, &mat(&l.w2));
        add_bias(&mut f, &l.b2);
        x = x1.iter().zip(&f).map(|(a, b)| a.iter().zip(b).map(|(a, b)| a + b).collect()).collect();
    }
    x
}

#[test]
fn one_layer_forward_matches_scalar_oracle() {
    for seed in 0..5 {
        let p = jittered(&tiny(1), seed);
        let code = [2, 7, 11, 5, 9, 3];
        let types = [2, 6, 8, 6, 7, 3];
        let fast = encode(&p, &code, &types).unwrap().hidden;
        let slow = scalar_encoder(&p, &code, &types);
        for (r, s) in fast.rows().into_iter().zip(&slow) {
            for (a, b) in r.iter().zip(s) {
                assert!((a - b).abs() < 1e-10, "seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn two_layer_forward_matches_scalar_oracle() {
    let p = jittered(&tiny(2), 9);
    let code = [2, 6, 6, 10, 3];
    let types = [2, 5, 5, 7, 3];
    let fast = encode(&p, &code, &types).unwrap().hidden;
    let slow = scalar_encoder(&p, &code, &types);
    let worst = fast
        .iter()
        .zip(slow.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
}

// ---- closed forms -----------------------------------------------------

fn hidden(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0))
}

#[test]
fn uniform_heads_give_log_vocab() {
    let mut cfg = tiny(0);
    cfg.code_vocab = 2000;
    cfg.type_vocab = 300;
    let p = Params::zeros(&cfg);
    let h = hidden(6, 4, 1);
    let code = [2, 17, 1999, 40, 5, 3];
    let l = mlm_loss(&p, &h, &[1], &code, None).unwrap();
    assert!((l.loss - 2000f64.ln()).abs() < 1e-9);
    let types = [2, 8, 299, 12, 6, 3];
    let l = ntmlm_loss(&p, &h, &[2, 4], &types, None).unwrap();
    assert!((l.loss - 2.0 * 300f64.ln()).abs() < 1e-9);
}

fn example(code: Vec<u32>, types: Vec<u32>, positions: Vec<usize>) -> Example {
    let mut masked_code = code.clone();
    for &p in &positions {
        masked_code[p] = special::MASK;
    }
    Example {
        id: "t".into(),
        masked_types: types.clone(),
        masked_code,
        positions,
        pos_code: code.clone(),
        pos_types: types.clone(),
        neg_code: code.clone(),
        neg_types: types.clone(),
        code,
        types,
    }
}

#[test]
fn perplexity_of_perfect_and_uniform_predictors() {
    let mut cfg = tiny(0);
    cfg.code_vocab = 2000;
    let mut p = Params::zeros(&cfg);
    let data = vec![
        example(vec![2, 9, 9, 3], vec![2, 6, 6, 3], vec![1, 2]),
        example(vec![2, 9, 7, 9, 3], vec![2, 6, 6, 6, 3], vec![1, 3]),
    ];
    assert!((perplexity(&p, &data).unwrap() - 2000.0).abs() < 1e-6);
    p.mlm_b[9] = 1e3;
    assert!((perplexity(&p, &data).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn contrastive_loss_ignores_positive_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut m = || Array2::from_shape_fn((5, 6), |_| rng.gen_range(-1.0..1.0));
    let b = ContrastBatch { h: m(), pos: m(), neg: m() };
    let scaled = ContrastBatch {
        h: &b.h * 3.5,
        pos: &b.pos * 0.01,
        neg: &b.neg * 40.0,
    };
    for v in [ClrVariant::HardNegative, ClrVariant::PositiveOnly] {
        let a = clr_loss(&b, 0.05, v, false).unwrap().loss;
        let c = clr_loss(&scaled, 0.05, v, false).unwrap().loss;
        assert!((a - c).abs() < 1e-9);
    }
}

// ---- gradient checks --------------------------------------------------

fn check_params(
    cfg: &ModelConfig,
    seed: u64,
    count: usize,
    loss: impl Fn(&Params, Option<&mut Params>) -> f64,
) -> GradCheckReport {
    let base = jittered(cfg, seed);
    let x = base.to_flat();
    let coords = sample_coordinates(x.len(), count, &mut ChaCha8Rng::seed_from_u64(seed + 100));
    let mut probe = base.clone();
    let mut grads = Params::zeros(cfg);
    grad_check(
        |flat| {
            probe.set_flat(flat);
            grads.fill(0.0);
            let v = loss(&probe, Some(&mut grads));
            (v, grads.to_flat())
        },
        &x,
        &coords,
        1e-6,
        1e-5,
    )
}

#[test]
fn token_cloze_gradients() {
    let cfg = tiny(2);
    let code = [2, 7, 4, 11, 4, 5, 3];
    let types = [2, 6, 7, 8, 6, 7, 3];
    let targets = [2, 7, 10, 11, 6, 5, 3];
    let r = check_params(&cfg, 1, 150, |p, g| {
        let f = encode(p, &code, &types).unwrap();
        let l = mlm_loss(p, &f.hidden, &[2, 4], &targets, None).unwrap();
        if let Some(g) = g {
            let l = mlm_loss(p, &f.hidden, &[2, 4], &targets, Some(g)).unwrap();
            backward(p, &f, &l.d_hidden, g);
        }
        l.loss
    });
    assert!(r.passed && r.checked >= 100, "{r:?}");
}

#[test]
fn type_cloze_gradients() {
    let cfg = tiny(2);
    let code = [2, 7, 4, 11, 4, 5, 3];
    let types = [2, 6, 5, 8, 5, 7, 3];
    let targets = [2, 6, 7, 8, 8, 7, 3];
    let r = check_params(&cfg, 2, 150, |p, g| {
        let f = encode(p, &code, &types).unwrap();
        let l = ntmlm_loss(p, &f.hidden, &[2, 4], &targets, None).unwrap();
        if let Some(g) = g {
            let l = ntmlm_loss(p, &f.hidden, &[2, 4], &targets, Some(g)).unwrap();
            backward(p, &f, &l.d_hidden, g);
        }
        l.loss
    });
    assert!(r.passed && r.checked >= 100, "{r:?}");
}

fn contrast_examples() -> Vec<Example> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..4 {
        let n = rng.gen_range(4..8);
        let mut seq = |vocab: u32| {
            let mut s = vec![special::CLS];
            s.extend((0..n - 2).map(|_| rng.gen_range(special::COUNT..vocab)));
            s.push(special::SEP);
            s
        };
        let (c, t, pc, pt, nc, nt) = (seq(12), seq(9), seq(12), seq(9), seq(12), seq(9));
        let mut e = example(c, t, vec![1]);
        e.pos_code = pc;
        e.pos_types = pt;
        e.neg_code = nc;
        e.neg_types = nt;
        out.push(e);
    }
    out
}

#[test]
fn contrastive_gradients_through_the_encoder() {
    let cfg = tiny(2);
    let data = contrast_examples();
    let batch: Vec<&Example> = data.iter().collect();
    for bidirectional in [false, true] {
        let tc = TrainConfig {
            variant: Variant::MlmClrHard,
            tau: 0.5,
            bidirectional,
            ..TrainConfig::default()
        };
        let r = check_params(&cfg, 3, 150, |p, g| {
            let total = batch_loss(p, &batch, &tc, None).unwrap().l_total;
            if let Some(g) = g {
                batch_loss(p, &batch, &tc, Some(g)).unwrap();
            }
            total
        });
        assert!(r.passed && r.checked >= 100, "bidirectional={bidirectional}: {r:?}");
    }
}

#[test]
fn full_objective_gradients() {
    let cfg = tiny(1);
    let data = contrast_examples();
    let batch: Vec<&Example> = data.iter().collect();
    let tc = TrainConfig {
        variant: Variant::Full,
        tau: 0.3,
        ..TrainConfig::default()
    };
    let r = check_params(&cfg, 5, 200, |p, g| {
        let v = batch_loss(p, &batch, &tc, None).unwrap().l_total;
        if let Some(g) = g {
            batch_loss(p, &batch, &tc, Some(g)).unwrap();
        }
        v
    });
    assert!(r.passed, "{r:?}");
}

// ---- training ---------------------------------------------------------

const FUNCTIONS: [&str; 6] = [
    "int sum(int *a, int n) {\n    int s = 0;\n    for (int i = 0; i < n; i++) {\n        s += a[i];\n    }\n    return s;\n}\n",
    "int clamp(int v, int lo, int hi) {\n    if (v < lo) {\n        return lo;\n    }\n    if (v > hi) {\n        return hi;\n    }\n    return v;\n}\n",
    "long scale(long total, int parts) {\n    long each = total / parts;\n    long rest = total - each * parts;\n    return each + rest;\n}\n",
    "int find(int *items, int count, int key) {\n    int pos = -1;\n    for (int k = 0; k < count; k++) {\n        if (items[k] == key) {\n            pos = k;\n        }\n    }\n    return pos;\n}\n",
    "void fill(char *buf, int len, char c) {\n    int i = 0;\n    while (i < len) {\n        buf[i] = c;\n        i++;\n    }\n}\n",
    "int maxof(int a, int b) {\n    int m = a;\n    if (b > m) {\n        m = b;\n    }\n    return m;\n}\n",
];

fn records() -> (Vec<Example>, ModelConfig) {
    let corpus = Corpus::analyze(
        FUNCTIONS
            .iter()
            .enumerate()
            .map(|(i, t)| SourceUnit::new(format!("f{i}"), t))
            .collect(),
    );
    let aug = Augmenter::new(
        corpus.train_tokenizer(300).unwrap(),
        corpus.type_vocab(),
        &corpus,
        AugmentConfig {
            seed: 11,
            ..AugmentConfig::default()
        },
    );
    let (results, _) = aug.run(&corpus);
    let mut cfg = ModelConfig::desk(aug.tokenizer.len(), aug.types.len());
    cfg.dim = 16;
    cfg.ffn = 32;
    cfg.heads = 2;
    cfg.max_len = 128;
    let ex = results
        .iter()
        .flatten()
        .map(|r| Example::from_record(r, cfg.max_len).unwrap())
        .collect::<Vec<_>>();
    assert!(ex.len() >= 4, "only {} records", ex.len());
    (ex, cfg)
}

#[test]
fn single_record_loss_decreases() {
    let (ex, cfg) = records();
    let tc = TrainConfig {
        variant: Variant::Full,
        epochs: 50,
        batch_size: 1,
        lr: 3e-3,
        clip: None,
        ..TrainConfig::default()
    };
    let (_, curves) = train_loop(&ex[..1], &[], &cfg, &tc).unwrap();
    let losses: Vec<f64> = curves.steps.iter().map(|r| r.l_total).collect();
    assert_eq!(losses.len(), 50);
    let down = losses.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(down as f64 >= 0.9 * 49.0, "{down}/49 decreasing: {losses:?}");
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let (ex, cfg) = records();
    let tc = TrainConfig {
        lr: 0.0,
        epochs: 2,
        batch_size: 2,
        ..TrainConfig::default()
    };
    let mut model = cfg.clone();
    model.use_types = tc.variant.uses_types();
    let init = Params::init(&model, &mut ChaCha8Rng::seed_from_u64(tc.seed)).unwrap();
    let (trained, _) = train_loop(&ex, &[], &cfg, &tc).unwrap();
    assert_eq!(trained, init);
}

#[test]
fn seeded_training_repeats_and_lowers_perplexity() {
    let (ex, cfg) = records();
    let tc = TrainConfig {
        variant: Variant::Full,
        epochs: 30,
        batch_size: 4,
        lr: 3e-3,
        seed: 5,
        ..TrainConfig::default()
    };
    let (a, ca) = train_loop(&ex, &ex, &cfg, &tc).unwrap();
    let (b, cb) = train_loop(&ex, &ex, &cfg, &tc).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(a, b);
    let mut model = cfg.clone();
    model.use_types = true;
    let untrained = Params::init(&model, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert!(perplexity(&a, &ex).unwrap() < perplexity(&untrained, &ex).unwrap());
}

#[test]
fn triplet_ties_count_as_failures() {
    let cfg = tiny(1);
    let p = jittered(&cfg, 0);
    let e = example(vec![2, 7, 8, 3], vec![2, 6, 6, 3], vec![1]);
    assert_eq!(triplet_eval(&p, &[e]).unwrap(), 0.0);
}

#[test]
fn random_encoder_margin_accuracy_is_measured() {
    // Not asserted against chance: x⁺ and x⁻ share most tokens with x, so an
    // untrained encoder is already biased.
    let (ex, cfg) = records();
    let mut model = cfg.clone();
    model.use_types = false;
    let mut accs = Vec::new();
    for seed in 0..20 {
        let p = Params::init(&model, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        accs.push(triplet_eval(&p, &ex).unwrap());
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    println!("random-init margin accuracy: mean {mean:.3} over {} triplets x 20 seeds", ex.len());
    assert!((0.0..=1.0).contains(&mean));
}
