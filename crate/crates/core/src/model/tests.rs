use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::matrix::log_sum_exp;
use crate::rng::rng_from;
use crate::tape::{softplus, Tape, Var};

fn micro() -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_layers: 2,
        n_fused: 1,
        n_heads: 2,
        d_ff: 6,
        vocab_size: 11,
        max_text_len: 6,
        n_patches: 3,
        patch_dim: 5,
        proj_dims: [6, 5, 4],
        ..ModelConfig::default()
    }
}

fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = rng_from(seed, &[]);
    Matrix::from_fn(rows, cols, |_, _| standard_normal(&mut rng))
}

struct Batch {
    patches: Vec<Matrix>,
    tokens: Vec<Vec<usize>>,
}

impl Batch {
    fn random(cfg: &ModelConfig, b: usize, seed: u64) -> Self {
        let mut rng = rng_from(seed, &[]);
        let patches = (0..b)
            .map(|i| random(cfg.n_patches, cfg.patch_dim, seed * 100 + i as u64))
            .collect();
        let tokens = (0..b)
            .map(|_| {
                let len = 1 + (rand::Rng::random_range(&mut rng, 0..cfg.max_text_len));
                (0..len)
                    .map(|_| rand::Rng::random_range(&mut rng, 1..cfg.vocab_size))
                    .collect()
            })
            .collect();
        Self { patches, tokens }
    }

    fn inputs(&self) -> Vec<Input<'_>> {
        self.patches
            .iter()
            .zip(&self.tokens)
            .map(|(p, t)| Input { patches: p, tokens: t })
            .collect()
    }
}

fn values(tape: &Tape, vars: &[Var]) -> Vec<Matrix> {
    vars.iter().map(|&v| tape.value(v).clone()).collect()
}

#[test]
fn gates_start_closed() {
    let params = ModelParams::init(&ModelConfig::default(), 1).unwrap();
    let alphas = params.alpha_indices();
    assert_eq!(alphas.len(), 2 * 2);
    assert!(alphas.iter().all(|&k| params.params[k].value.item() == 0.0));
    let names: Vec<&str> = params.params.iter().map(|p| p.name.as_str()).collect();
    let mut unique = names.clone();
    unique.sort_unstable();
    unique.dedup();
    assert_eq!(unique.len(), names.len());
}

#[test]
fn closed_gates_reproduce_dual_encoder_exactly() {
    let cfg = ModelConfig::default();
    let params = ModelParams::init(&cfg, 2).unwrap();
    for trial in 0..10 {
        let batch = Batch::random(&cfg, 4, 10 + trial);
        let drop = Some(Dropout {
            seed: trial,
            rate: cfg.dropout,
        });
        let mut t1 = Tape::new();
        let b1 = Bound::new(&mut t1, &params);
        let dual = forward_dual(&mut t1, &b1, &params, &batch.inputs(), drop).unwrap();
        let mut t2 = Tape::new();
        let b2 = Bound::new(&mut t2, &params);
        let fusion = forward_fusion(&mut t2, &b2, &params, &batch.inputs(), drop).unwrap();
        assert_eq!(values(&t1, &dual.local_image), values(&t2, &fusion.local_image));
        assert_eq!(values(&t1, &dual.local_text), values(&t2, &fusion.local_text));
        assert_eq!(t1.value(dual.global_text), t2.value(fusion.global_text));
        assert!(dual.itm_logit.is_none() && dual.mlm_logits.is_empty());
        assert_eq!(fusion.mlm_logits.len(), 4);
    }
}

#[test]
fn open_gates_change_fusion_output() {
    let cfg = micro();
    let mut params = ModelParams::init(&cfg, 3).unwrap();
    params.set_alphas(0.5);
    let batch = Batch::random(&cfg, 2, 4);
    let mut t1 = Tape::new();
    let b1 = Bound::new(&mut t1, &params);
    let dual = forward_dual(&mut t1, &b1, &params, &batch.inputs(), None).unwrap();
    let mut t2 = Tape::new();
    let b2 = Bound::new(&mut t2, &params);
    let fusion = forward_fusion(&mut t2, &b2, &params, &batch.inputs(), None).unwrap();
    assert_ne!(values(&t1, &dual.local_text), values(&t2, &fusion.local_text));

    // no fused layers: α has nothing to act on
    let cfg0 = ModelConfig { n_fused: 0, ..cfg };
    let p0 = ModelParams::init(&cfg0, 3).unwrap();
    assert!(p0.alpha_indices().is_empty());
    let mut t1 = Tape::new();
    let b1 = Bound::new(&mut t1, &p0);
    let dual = forward_dual(&mut t1, &b1, &p0, &batch.inputs(), None).unwrap();
    let mut t2 = Tape::new();
    let b2 = Bound::new(&mut t2, &p0);
    let fusion = forward_fusion(&mut t2, &b2, &p0, &batch.inputs(), None).unwrap();
    assert_eq!(values(&t1, &dual.local_image), values(&t2, &fusion.local_image));
}

#[test]
fn garbage_counter_modality_is_ignored_when_gate_is_closed() {
    let cfg = micro();
    let params = ModelParams::init(&cfg, 5).unwrap();
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, &params);
    let x = tape.leaf(random(3, 8, 6));
    let y = tape.leaf(random(4, 8, 7).scale(1e6));
    let top = cfg.n_layers - 1;
    let plain = fused_block(&mut tape, &b, &params, EncoderSide::Image, top, x, None, None, 0).unwrap();
    let gated = fused_block(&mut tape, &b, &params, EncoderSide::Image, top, x, Some(y), None, 0).unwrap();
    assert_eq!(tape.value(plain), tape.value(gated));
    // the bottom layer has no cross-attention to route through
    assert!(fused_block(&mut tape, &b, &params, EncoderSide::Image, 0, x, Some(y), None, 0).is_err());
    let narrow = tape.leaf(random(3, 4, 8));
    assert!(matches!(
        fused_block(
            &mut tape,
            &b,
            &params,
            EncoderSide::Image,
            top,
            x,
            Some(narrow),
            None,
            0
        ),
        Err(Error::Dimension { .. })
    ));
}

fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..m.rows() {
        let lse = log_sum_exp(m.row(r));
        out.row_mut(r).iter_mut().for_each(|v| *v = libm::exp(*v - lse));
    }
    out
}

#[test]
fn block_matches_hand_computation() {
    let cfg = ModelConfig {
        d_model: 3,
        n_heads: 1,
        n_layers: 1,
        n_fused: 1,
        d_ff: 4,
        ..micro()
    };
    let mut params = ModelParams::init(&cfg, 9).unwrap();
    params.set_alphas(1.0);
    // nonzero biases so they are exercised
    for p in params.params.iter_mut().filter(|p| p.name.ends_with(".b")) {
        let (r, c) = p.value.shape();
        p.value = random(r, c, 77);
    }
    let get = |name: &str| params.params[params.index_of(name).unwrap()].value.clone();
    let x = random(2, 3, 10);

    let att = |q_src: &Matrix, kv: &Matrix, pre: &str| {
        let q = q_src.matmul(&get(&format!("{pre}.head0.wq"))).unwrap();
        let k = kv.matmul(&get(&format!("{pre}.head0.wk"))).unwrap();
        let v = kv.matmul(&get(&format!("{pre}.head0.wv"))).unwrap();
        let a = softmax_rows(&q.matmul_t(&k).unwrap().scale(1.0 / libm::sqrt(3.0)));
        a.matmul(&v).unwrap().matmul(&get(&format!("{pre}.head0.wo"))).unwrap()
    };
    let x_hat = att(&x, &x, "txt.layer0.self");
    let cross = att(&x_hat, &x, "txt.layer0.cross");
    let r = x.add(&x_hat).unwrap().add(&cross).unwrap();
    let add_b = |m: Matrix, b: Matrix| Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] + b[(0, j)]);
    let h = add_b(r.matmul(&get("txt.layer0.ff1.w")).unwrap(), get("txt.layer0.ff1.b")).map(|v| v.max(0.0));
    let f = add_b(h.matmul(&get("txt.layer0.ff2.w")).unwrap(), get("txt.layer0.ff2.b"));
    let expected = r.add(&f).unwrap();

    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, &params);
    let xv = tape.leaf(x.clone());
    let out = fused_block(&mut tape, &b, &params, EncoderSide::Text, 0, xv, Some(xv), None, 0).unwrap();
    assert!(tape.value(out).max_abs_diff(&expected).unwrap() < 1e-12);
}

#[test]
fn identity_micro_model_doubles_per_layer() {
    let cfg = ModelConfig {
        d_model: 4,
        n_heads: 1,
        n_layers: 2,
        n_fused: 0,
        d_ff: 3,
        n_patches: 1,
        patch_dim: 4,
        ..micro()
    };
    let mut params = ModelParams::init(&cfg, 11).unwrap();
    for p in params.params.iter_mut() {
        let (r, c) = p.value.shape();
        let is_attn = [".wq", ".wk", ".wv", ".wo"].iter().any(|s| p.name.ends_with(s));
        if is_attn || p.name == "img.embed.w" {
            p.value = Matrix::identity(r);
        } else if p.name.contains(".ff") || p.name == "img.embed.b" || p.name == "txt.pos" {
            p.value = Matrix::zeros(r, c);
        }
    }
    let patch = random(1, 4, 12);
    let tokens = [3usize];
    let embed = params.params[params.index_of("txt.embed").unwrap()]
        .value
        .row(3)
        .to_vec();
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, &params);
    let out = forward_dual(
        &mut tape,
        &b,
        &params,
        &[Input {
            patches: &patch,
            tokens: &tokens,
        }],
        None,
    )
    .unwrap();
    // one key: attention returns x; residual doubles; zero FFN adds nothing
    let img = tape.value(out.local_image[0]);
    let txt = tape.value(out.local_text[0]);
    for c in 0..4 {
        assert!((img[(0, c)] - 4.0 * patch[(0, c)]).abs() < 1e-14);
        assert!((txt[(0, c)] - 4.0 * embed[c]).abs() < 1e-14);
    }
}

#[test]
fn forward_is_deterministic_and_pools_by_mean() {
    let cfg = micro();
    let params = ModelParams::init(&cfg, 13).unwrap();
    let batch = Batch::random(&cfg, 3, 14);
    let drop = Some(Dropout { seed: 5, rate: 0.3 });
    let run = || {
        let mut tape = Tape::new();
        let b = Bound::new(&mut tape, &params);
        let out = forward_fusion(&mut tape, &b, &params, &batch.inputs(), drop).unwrap();
        (tape, out)
    };
    let (t1, o1) = run();
    let (t2, o2) = run();
    assert_eq!(values(&t1, &o1.local_text), values(&t2, &o2.local_text));
    assert_eq!(t1.value(o1.itm_logit.unwrap()), t2.value(o2.itm_logit.unwrap()));
    let g = t1.value(o1.global_image);
    for (s, &l) in o1.local_image.iter().enumerate() {
        let local = t1.value(l);
        for c in 0..cfg.d_model {
            let mean = local.col(c).iter().sum::<f64>() / local.rows() as f64;
            assert!((g[(s, c)] - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let cfg = micro();
    let params = ModelParams::init(&cfg, 15).unwrap();
    let patches = random(3, 5, 16);
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, &params);
    let bad_token = [1usize, 11];
    assert_eq!(
        forward_dual(
            &mut tape,
            &b,
            &params,
            &[Input {
                patches: &patches,
                tokens: &bad_token
            }],
            None
        )
        .unwrap_err(),
        Error::TokenOutOfRange { id: 11, vocab: 11 }
    );
    let long = [1usize; 7];
    assert!(forward_dual(
        &mut tape,
        &b,
        &params,
        &[Input {
            patches: &patches,
            tokens: &long
        }],
        None
    )
    .is_err());
    let wrong = random(4, 5, 17);
    assert!(forward_dual(
        &mut tape,
        &b,
        &params,
        &[Input {
            patches: &wrong,
            tokens: &[1]
        }],
        None
    )
    .is_err());
    assert!(ModelConfig { n_fused: 3, ..cfg }.validate().is_err());
    assert!(ModelConfig { mlm_prob: 1.0, ..cfg }.validate().is_err());
    assert!(ModelConfig { n_heads: 3, ..cfg }.validate().is_err());
}

#[test]
fn projector_contracts() {
    let cfg = ModelConfig {
        proj_dims: [64, 64, 32],
        ..ModelConfig::default()
    };
    let mut params = ModelParams::init(&cfg, 18).unwrap();
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, &params);
    let x = tape.leaf(random(5, 32, 19));
    let y = project(&mut tape, &b, &params, Projector::GlobalText, x).unwrap();
    assert_eq!(tape.shape(y), (5, 32));
    let one = tape.leaf(random(1, 32, 20));
    assert!(project(&mut tape, &b, &params, Projector::GlobalText, one).is_err());

    for p in params
        .params
        .iter_mut()
        .filter(|p| p.name.starts_with("proj.") && p.name.ends_with(".b"))
    {
        p.value = Matrix::zeros(p.value.rows(), p.value.cols());
    }
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, &params);
    let z = tape.leaf(Matrix::zeros(4, 32));
    let out = project(&mut tape, &b, &params, Projector::LocalImage, z).unwrap();
    assert_eq!(tape.value(out).max_abs(), 0.0);
}

/// Central differences of `loss` over every entry of the listed parameters,
/// compared with the tape gradient.
fn fd_params(params: &ModelParams, indices: &[usize], tol: f64, loss: impl Fn(&mut Tape, &Bound, &ModelParams) -> Var) {
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, params);
    let l = loss(&mut tape, &b, params);
    let grads = b.gradients(&tape.backward(l).unwrap(), params);
    let eval = |p: &ModelParams| {
        let mut t = Tape::new();
        let b = Bound::new(&mut t, p);
        let l = loss(&mut t, &b, p);
        t.value(l).item()
    };
    let h = 1e-5;
    for &k in indices {
        for e in 0..params.params[k].value.len() {
            let mut plus = params.clone();
            plus.params[k].value.data_mut()[e] += h;
            let mut minus = params.clone();
            minus.params[k].value.data_mut()[e] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let an = grads[k].data()[e];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-4);
            assert!(
                rel < tol,
                "{} entry {e}: analytic {an} vs fd {fd}",
                params.params[k].name
            );
        }
    }
}

fn weighted_sum(tape: &mut Tape, v: Var, seed: u64) -> Var {
    let (r, c) = tape.shape(v);
    let w = tape.leaf(random(r, c, seed));
    let p = tape.mul(v, w).unwrap();
    tape.sum_all(p).unwrap()
}

#[test]
fn projector_gradient() {
    let cfg = micro();
    let params = ModelParams::init(&cfg, 21).unwrap();
    let x = random(5, cfg.d_model, 22);
    let idx: Vec<usize> = params
        .params
        .iter()
        .enumerate()
        .filter(|(_, p)| p.name.starts_with("proj.local.txt"))
        .map(|(k, _)| k)
        .collect();
    fd_params(&params, &idx, 1e-5, |t, b, p| {
        let xv = t.leaf(x.clone());
        let y = project(t, b, p, Projector::LocalText, xv).unwrap();
        weighted_sum(t, y, 23)
    });
}

#[test]
fn fused_block_gradient() {
    let cfg = micro();
    let mut params = ModelParams::init(&cfg, 24).unwrap();
    params.set_alphas(0.3);
    let x = random(3, cfg.d_model, 25);
    let y = random(4, cfg.d_model, 26);
    let idx: Vec<usize> = params
        .params
        .iter()
        .enumerate()
        .filter(|(_, p)| p.name.starts_with("img.layer1"))
        .map(|(k, _)| k)
        .collect();
    fd_params(&params, &idx, 1e-5, |t, b, p| {
        let xv = t.leaf(x.clone());
        let yv = t.leaf(y.clone());
        let o = fused_block(t, b, p, EncoderSide::Image, 1, xv, Some(yv), None, 0).unwrap();
        weighted_sum(t, o, 27)
    });
}

#[test]
fn itm_gradient_reaches_open_gates() {
    let cfg = micro();
    let mut params = ModelParams::init(&cfg, 28).unwrap();
    params.set_alphas(0.1);
    let batch = Batch::random(&cfg, 3, 29);
    let labels = [1.0, 0.0, 1.0];
    let loss = |t: &mut Tape, b: &Bound, p: &ModelParams| {
        let out = forward_fusion(t, b, p, &batch.inputs(), None).unwrap();
        itm_loss(t, out.itm_logit.unwrap(), &labels).unwrap()
    };
    let alphas = params.alpha_indices();
    fd_params(&params, &alphas, 1e-5, loss);
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, &params);
    let l = loss(&mut tape, &b, &params);
    let grads = b.gradients(&tape.backward(l).unwrap(), &params);
    assert!(alphas.iter().all(|&k| grads[k].item().abs() > 1e-8));
}

#[test]
fn mask_rate_and_determinism() {
    let ids: Vec<usize> = (0..100_000).map(|i| 1 + i % 50).collect();
    let (masked, pos) = mlm_mask(&ids, 0.15, 3).unwrap();
    let frac = pos.len() as f64 / ids.len() as f64;
    assert!((0.14..=0.16).contains(&frac), "{frac}");
    assert!(pos.iter().all(|&p| masked[p] == crate::data::MASK_ID));
    assert_eq!(mlm_mask(&ids, 0.15, 3).unwrap().1, pos);
    assert_ne!(mlm_mask(&ids, 0.15, 4).unwrap().1, pos);
    assert!(mlm_mask(&ids, 0.0, 3).is_err());
    assert!(mlm_mask(&ids, 1.0, 3).is_err());
    // already-masked positions are never selected again
    let (_, again) = mlm_mask(&masked, 0.5, 9).unwrap();
    assert!(again.iter().all(|p| pos.binary_search(p).is_err()));
}

#[test]
fn mlm_loss_examples() {
    let v = 6;
    let ids = [2usize, 4, 1, 5];
    let positions = vec![vec![1, 3]];
    let mut tape = Tape::new();
    let perfect = Matrix::from_fn(4, v, |r, c| if c == ids[r] { 60.0 } else { 0.0 });
    let pv = tape.leaf(perfect);
    let l = mlm_loss(&mut tape, &[pv], &[&ids], &positions).unwrap();
    assert!(tape.value(l.loss).item() < 1e-20);
    assert_eq!(l.n_masked, 2);
    let uniform = tape.leaf(Matrix::zeros(4, v));
    let l = mlm_loss(&mut tape, &[uniform], &[&ids], &positions).unwrap();
    assert!((tape.value(l.loss).item() - libm::log(v as f64)).abs() < 1e-15);
    let none = mlm_loss(&mut tape, &[uniform], &[&ids], &[vec![]]).unwrap();
    assert_eq!((tape.value(none.loss).item(), none.n_masked), (0.0, 0));

    // two samples against a per-position recomputation
    let (a, b) = (random(4, v, 30), random(3, v, 31));
    let ids_b = [0usize, 3, 3];
    let pos = vec![vec![0, 2], vec![1]];
    let (av, bv) = (tape.leaf(a.clone()), tape.leaf(b.clone()));
    let l = mlm_loss(&mut tape, &[av, bv], &[&ids, &ids_b], &pos).unwrap();
    let direct = [(&a, 0usize, ids[0]), (&a, 2, ids[2]), (&b, 1, ids_b[1])]
        .iter()
        .map(|(m, r, t)| log_sum_exp(m.row(*r)) - m[(*r, *t)])
        .sum::<f64>()
        / 3.0;
    assert!((tape.value(l.loss).item() - direct).abs() < 1e-12);
}

#[test]
fn itm_loss_examples() {
    let mut tape = Tape::new();
    let sure = tape.leaf(Matrix::scalar(30.0));
    let l = itm_loss(&mut tape, sure, &[1.0]).unwrap();
    assert!(tape.value(l).item() < 1e-10);
    let zero = tape.leaf(Matrix::col_vector(&[0.0, 0.0]));
    let l = itm_loss(&mut tape, zero, &[1.0, 0.0]).unwrap();
    assert!((tape.value(l).item() - core::f64::consts::LN_2).abs() < 1e-15);
    let z = random(5, 1, 32);
    let labels = [1.0, 0.0, 0.0, 1.0, 1.0];
    let zv = tape.leaf(z.clone());
    let l = itm_loss(&mut tape, zv, &labels).unwrap();
    let direct: f64 = z
        .data()
        .iter()
        .zip(&labels)
        .map(|(&x, &y)| {
            let p = 1.0 / (1.0 + libm::exp(-x));
            -(y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p))
        })
        .sum::<f64>()
        / 5.0;
    assert!((tape.value(l).item() - direct).abs() < 1e-12);
    assert!(softplus(0.0) > 0.0);
    assert!(itm_loss(&mut tape, zv, &[0.5; 5]).is_err());
}

#[test]
fn named_reload_roundtrip() {
    let cfg = micro();
    let params = ModelParams::init(&cfg, 33).unwrap();
    let named: Vec<(alloc::string::String, Matrix)> = params
        .params
        .iter()
        .map(|p| (p.name.clone(), p.value.clone()))
        .collect();
    assert_eq!(ModelParams::from_named(&cfg, named.clone()).unwrap(), params);
    let mut broken = named;
    broken.swap(0, 1);
    assert!(ModelParams::from_named(&cfg, broken).is_err());
    assert_ne!(ModelParams::init(&cfg, 34).unwrap(), params);
}
