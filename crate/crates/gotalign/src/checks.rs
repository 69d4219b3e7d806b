//! The acceptance criteria as runnable checks. Shared by the `selftest`
//! subcommand and the acceptance test target.

use std::time::{Duration, Instant};

use gotalign_core::bt::{
    bt_loss, bt_terms, cross_correlation, multimodal_bt, multimodal_bt_on, BtConfig, EmbeddingBatch, View,
};
use gotalign_core::graph::{build_graph, DEFAULT_TAU};
use gotalign_core::model::{
    forward_dual, forward_fusion, fused_block, mlm_mask, project, Bound, EncoderSide, Input, ModelParams, Projector,
};
use gotalign_core::optim::{lr_at, OptimConfig, ParamKind};
use gotalign_core::ot::{
    cosine_cost_matrix, got, got_grad_features, got_objective, solve_gwd, solve_wd, uniform_weights, GammaConvention,
    GotConfig, GwInit, OtSolverConfig, StructuralCost, WdSolver,
};
use gotalign_core::rng::{rng_from, standard_normal, Rng};
use gotalign_core::train::{step_graph, TrainConfig, Trainer};
use gotalign_core::{Matrix, Tape, Var};
use rand::Rng as _;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::Result;
use crate::run;

/// Result of one criterion.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    limit: Option<Duration>,
    check: fn() -> Result<(bool, String)>,
}

impl Criterion {
    pub fn run(&self) -> Outcome {
        let start = Instant::now();
        let result = (self.check)();
        let elapsed = start.elapsed();
        let (mut passed, mut detail) = match result {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(limit) = self.limit.filter(|&l| elapsed > l) {
            passed = false;
            detail.push_str(&format!("; over the {} s budget", limit.as_secs()));
        }
        Outcome {
            id: self.id,
            title: self.title,
            passed,
            detail,
            elapsed,
        }
    }
}

const fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

pub const CRITERIA: [Criterion; 12] = [
    Criterion {
        id: 1,
        title: "marginal feasibility",
        limit: secs(30),
        check: marginal_feasibility,
    },
    Criterion {
        id: 2,
        title: "WD exactness",
        limit: secs(30),
        check: wd_exactness,
    },
    Criterion {
        id: 3,
        title: "GWD self-distance and isomorphism",
        limit: None,
        check: gwd_isomorphism,
    },
    Criterion {
        id: 4,
        title: "GWD isometry and scale invariance",
        limit: None,
        check: gwd_invariance,
    },
    Criterion {
        id: 5,
        title: "gradient suite",
        limit: secs(120),
        check: gradient_suite,
    },
    Criterion {
        id: 6,
        title: "gate-closed equivalence",
        limit: None,
        check: gate_equivalence,
    },
    Criterion {
        id: 7,
        title: "BT sanity",
        limit: None,
        check: bt_sanity,
    },
    Criterion {
        id: 8,
        title: "MLM mask rate",
        limit: None,
        check: mask_rate,
    },
    Criterion {
        id: 9,
        title: "end-to-end alignment",
        limit: secs(300),
        check: end_to_end,
    },
    Criterion {
        id: 10,
        title: "GOT vs WD-only",
        limit: None,
        check: got_vs_wd,
    },
    Criterion {
        id: 11,
        title: "determinism and persistence",
        limit: None,
        check: determinism,
    },
    Criterion {
        id: 12,
        title: "schedule endpoints",
        limit: None,
        check: schedule,
    },
];

pub fn criterion(id: usize) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

fn gaussian(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| standard_normal(rng))
}

fn positive_weights(n: usize, rng: &mut Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn marginal_feasibility() -> Result<(bool, String)> {
    let sinkhorn = OtSolverConfig::default();
    let ipot = OtSolverConfig {
        wd_solver: WdSolver::Ipot,
        ..sinkhorn
    };
    let mut worst = 0.0f64;
    for k in 0..1000u64 {
        let mut rng = rng_from(1, &[k]);
        let n = rng.random_range(1..=16);
        let m = rng.random_range(1..=16);
        let cost = Matrix::from_fn(n, m, |_, _| rng.random_range(0.0..2.0));
        let u = positive_weights(n, &mut rng);
        let v = positive_weights(m, &mut rng);
        let cfg = if k % 2 == 0 { &sinkhorn } else { &ipot };
        let (plan, _) = solve_wd(&cost, &u, &v, cfg)?;
        worst = worst.max(plan.marginal_violation());
    }
    Ok((worst < 1e-6, format!("worst violation {worst:.2e} over 1000 plans")))
}

/// Minimum of `Σ_i c[i, σ(i)] / n` over all permutations (Heap's algorithm).
fn assignment_oracle(c: &Matrix) -> f64 {
    let n = c.rows();
    let mut perm: Vec<usize> = (0..n).collect();
    let value = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum::<f64>() / n as f64;
    let mut best = value(&perm);
    let mut counters = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            let j = if i % 2 == 0 { 0 } else { counters[i] };
            perm.swap(j, i);
            best = best.min(value(&perm));
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    best
}

fn wd_exactness() -> Result<(bool, String)> {
    let ipot = OtSolverConfig {
        wd_solver: WdSolver::Ipot,
        ..OtSolverConfig::default()
    };
    let sinkhorn = OtSolverConfig::default();
    let (mut worst, mut worst_sinkhorn) = (0.0f64, 0.0f64);
    for k in 0..200u64 {
        let mut rng = rng_from(2, &[k]);
        let n = rng.random_range(1..=6);
        let cost = cosine_cost_matrix(&gaussian(n, 4, &mut rng), &gaussian(n, 4, &mut rng))?;
        let u = uniform_weights(n);
        let oracle = assignment_oracle(&cost);
        let (_, wd) = solve_wd(&cost, &u, &u, &ipot)?;
        worst = worst.max((wd - oracle).abs());
        let (_, wd) = solve_wd(&cost, &u, &u, &sinkhorn)?;
        worst_sinkhorn = worst_sinkhorn.max((wd - oracle).abs());
    }
    Ok((
        worst <= 1e-3,
        format!("IPOT worst gap {worst:.2e}; entropic Sinkhorn at the same epsilon {worst_sinkhorn:.2e}"),
    ))
}

fn gw_config() -> OtSolverConfig {
    OtSolverConfig {
        wd_solver: WdSolver::Ipot,
        gw_init: GwInit::Jittered { seed: 0 },
        ..OtSolverConfig::default()
    }
}

fn shuffled(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    p
}

fn gwd_isomorphism() -> Result<(bool, String)> {
    let cfg = gw_config();
    let (mut self_worst, mut perm_worst) = (0.0f64, 0.0f64);
    for k in 0..100u64 {
        let mut rng = rng_from(3, &[k]);
        let n = rng.random_range(2..=8);
        let x = gaussian(n, 6, &mut rng);
        let perm = shuffled(n, &mut rng);
        let px = x.select_rows(&perm);
        let g = build_graph(&x, DEFAULT_TAU)?;
        let pg = build_graph(&px, DEFAULT_TAU)?;
        let u = uniform_weights(n);
        let (_, d) = solve_gwd(&g.similarity, &g.similarity, &u, &u, &cfg)?;
        self_worst = self_worst.max(d);
        let (_, d) = solve_gwd(&g.similarity, &pg.similarity, &u, &u, &cfg)?;
        perm_worst = perm_worst.max(d);
    }
    Ok((
        self_worst <= 1e-3 && perm_worst <= 1e-3,
        format!("worst GWD(G,G) {self_worst:.2e}, worst GWD(G,πG) {perm_worst:.2e}"),
    ))
}

/// Random orthogonal matrix by Gram-Schmidt on Gaussian columns.
fn orthogonal(d: usize, rng: &mut Rng) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
        for q in &cols {
            let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    Matrix::from_fn(d, d, |r, c| cols[c][r])
}

fn gwd_invariance() -> Result<(bool, String)> {
    let cfg = OtSolverConfig::default();
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let mut rng = rng_from(4, &[k]);
        let (n, m, d) = (rng.random_range(2..=8), rng.random_range(2..=8), 5);
        let x = gaussian(n, d, &mut rng);
        let y = gaussian(m, d, &mut rng);
        let moved = if k % 2 == 0 {
            x.matmul(&orthogonal(d, &mut rng))?
        } else {
            x.scale(rng.random_range(0.1..10.0))
        };
        let (u, v) = (uniform_weights(n), uniform_weights(m));
        let sy = build_graph(&y, DEFAULT_TAU)?.similarity;
        let (_, before) = solve_gwd(&build_graph(&x, DEFAULT_TAU)?.similarity, &sy, &u, &v, &cfg)?;
        let (_, after) = solve_gwd(&build_graph(&moved, DEFAULT_TAU)?.similarity, &sy, &u, &v, &cfg)?;
        worst = worst.max((before - after).abs());
    }
    Ok((worst < 1e-8, format!("worst change {worst:.2e} over 100 trials")))
}

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;

fn rel_err(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / fd.abs().max(an.abs()).max(1e-4)
}

/// Worst relative error of `grad` against central differences of `f` at `x`.
fn fd_matrix(x: &Matrix, grad: &Matrix, f: impl Fn(&Matrix) -> Result<f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for e in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[e] += FD_STEP;
        let mut minus = x.clone();
        minus.data_mut()[e] -= FD_STEP;
        let fd = (f(&plus)? - f(&minus)?) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(fd, grad.data()[e]));
    }
    Ok(worst)
}

/// Worst relative error over every entry of the parameters in `indices`.
fn fd_params(
    params: &ModelParams,
    indices: &[usize],
    loss: impl Fn(&mut Tape, &Bound, &ModelParams) -> Result<Var>,
) -> Result<f64> {
    let mut tape = Tape::new();
    let b = Bound::new(&mut tape, params);
    let l = loss(&mut tape, &b, params)?;
    let grads = b.gradients(&tape.backward(l)?, params);
    let eval = |p: &ModelParams| -> Result<f64> {
        let mut t = Tape::new();
        let b = Bound::new(&mut t, p);
        let l = loss(&mut t, &b, p)?;
        Ok(t.value(l).item())
    };
    let mut worst = 0.0f64;
    for &k in indices {
        for e in 0..params.params[k].value.len() {
            let mut plus = params.clone();
            plus.params[k].value.data_mut()[e] += FD_STEP;
            let mut minus = params.clone();
            minus.params[k].value.data_mut()[e] -= FD_STEP;
            let fd = (eval(&plus)? - eval(&minus)?) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(fd, grads[k].data()[e]));
        }
    }
    Ok(worst)
}

fn weighted_sum(tape: &mut Tape, v: Var, w: &Matrix) -> Result<Var> {
    let w = tape.leaf(w.clone());
    let p = tape.mul(v, w)?;
    Ok(tape.sum_all(p)?)
}

fn indices_with_prefix(params: &ModelParams, prefix: &str) -> Vec<usize> {
    params
        .params
        .iter()
        .enumerate()
        .filter(|(_, p)| p.name.starts_with(prefix))
        .map(|(k, _)| k)
        .collect()
}

fn got_gradient_error() -> Result<f64> {
    let solver = OtSolverConfig::default();
    let mut worst = 0.0f64;
    for (k, (tau, kind)) in [
        (Some(DEFAULT_TAU), StructuralCost::Absolute),
        (None, StructuralCost::Squared),
        (Some(DEFAULT_TAU), StructuralCost::Squared),
    ]
    .into_iter()
    .enumerate()
    {
        let mut rng = rng_from(5, &[k as u64]);
        let x = gaussian(5, 4, &mut rng);
        let y = gaussian(4, 4, &mut rng);
        let cfg = GotConfig {
            tau,
            ..GotConfig::default()
        };
        let solver = OtSolverConfig {
            gw_structural_cost: kind,
            ..solver
        };
        let out = got(&x, &y, &cfg, &solver)?;
        let (gx, gy) = got_grad_features(&x, &y, &out.plan_wd, &out.plan_gw, &cfg, kind)?;
        let obj = |a: &Matrix, b: &Matrix| Ok(got_objective(a, b, &out.plan_wd, &out.plan_gw, &cfg, kind)?);
        worst = worst.max(fd_matrix(&x, &gx, |p| obj(p, &y))?);
        worst = worst.max(fd_matrix(&y, &gy, |p| obj(&x, p))?);
    }
    Ok(worst)
}

fn bt_gradient_error() -> Result<f64> {
    let mut rng = rng_from(6, &[]);
    let zs: Vec<Matrix> = (0..4).map(|_| gaussian(6, 4, &mut rng)).collect();
    let mut worst = 0.0f64;
    for centered in [true, false] {
        let cfg = BtConfig {
            centered,
            ..BtConfig::default()
        };
        let loss = |zs: &[Matrix]| -> Result<(Tape, Vec<Var>, Var)> {
            let mut tape = Tape::new();
            let v: Vec<Var> = zs.iter().map(|z| tape.leaf(z.clone())).collect();
            let l = multimodal_bt_on(&mut tape, v[0], v[1], v[2], v[3], &cfg)?;
            Ok((tape, v, l))
        };
        let (tape, vars, l) = loss(&zs)?;
        let grads = tape.backward(l)?;
        for (k, &v) in vars.iter().enumerate() {
            let g = grads.wrt_or_zeros(v, zs[k].shape());
            worst = worst.max(fd_matrix(&zs[k], &g, |p| {
                let mut moved = zs.clone();
                moved[k] = p.clone();
                let (t, _, l) = loss(&moved)?;
                Ok(t.value(l).item())
            })?);
        }
    }
    Ok(worst)
}

fn model_gradient_errors() -> Result<(f64, f64)> {
    let cfg = TrainConfig::micro().model;
    let mut rng = rng_from(7, &[]);

    let params = ModelParams::init(&cfg, 21)?;
    let x = gaussian(5, cfg.d_model, &mut rng);
    let w = gaussian(5, cfg.proj_dims[2], &mut rng);
    let proj = fd_params(&params, &indices_with_prefix(&params, "proj.local.txt"), |t, b, p| {
        let xv = t.leaf(x.clone());
        let out = project(t, b, p, Projector::LocalText, xv)?;
        weighted_sum(t, out, &w)
    })?;

    let mut params = ModelParams::init(&cfg, 24)?;
    params.set_alphas(0.3);
    let x = gaussian(3, cfg.d_model, &mut rng);
    let y = gaussian(4, cfg.d_model, &mut rng);
    let w = gaussian(3, cfg.d_model, &mut rng);
    let top = cfg.n_layers - 1;
    let block = fd_params(
        &params,
        &indices_with_prefix(&params, &format!("img.layer{top}")),
        |t, b, p| {
            let xv = t.leaf(x.clone());
            let yv = t.leaf(y.clone());
            let out = fused_block(t, b, p, EncoderSide::Image, top, xv, Some(yv), None, 0)?;
            weighted_sum(t, out, &w)
        },
    )?;
    Ok((proj, block))
}

/// Sampled entries of every tensor, with the couplings frozen at their
/// solved values.
fn full_loss_gradient_error() -> Result<(f64, usize)> {
    let cfg = TrainConfig::micro();
    let mut t = Trainer::new(cfg.clone())?;
    t.params.set_alphas(0.2);
    let inputs = t.step_inputs(0)?;
    let plans = step_graph(&t.params, &cfg, &inputs, None)?.plans;
    let g = step_graph(&t.params, &cfg, &inputs, Some(&plans))?;
    let grads = g.bound.gradients(&g.tape.backward(g.total)?, &t.params);
    let eval = |p: &ModelParams| -> Result<f64> { Ok(step_graph(p, &cfg, &inputs, Some(&plans))?.report.total) };
    let mut rng = rng_from(8, &[]);
    let (mut worst, mut checked) = (0.0f64, 0);
    for (k, p) in t.params.params.iter().enumerate() {
        for _ in 0..3.min(p.value.len()) {
            let e = rng.random_range(0..p.value.len());
            let mut plus = t.params.clone();
            plus.params[k].value.data_mut()[e] += FD_STEP;
            let mut minus = t.params.clone();
            minus.params[k].value.data_mut()[e] -= FD_STEP;
            let fd = (eval(&plus)? - eval(&minus)?) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(fd, grads[k].data()[e]));
            checked += 1;
        }
    }
    Ok((worst, checked))
}

fn gradient_suite() -> Result<(bool, String)> {
    let got = got_gradient_error()?;
    let bt = bt_gradient_error()?;
    let (proj, block) = model_gradient_errors()?;
    let (full, checked) = full_loss_gradient_error()?;
    let worst = got.max(bt).max(proj).max(block).max(full);
    Ok((
        worst < FD_TOL,
        format!(
            "relative errors: GOT {got:.1e}, BT {bt:.1e}, projector {proj:.1e}, fused block {block:.1e}, \
             L_total {full:.1e} ({checked} entries)"
        ),
    ))
}

fn random_tokens(cfg: &TrainConfig, rng: &mut Rng) -> Vec<usize> {
    let len = rng.random_range(1..=cfg.model.max_text_len);
    (0..len).map(|_| rng.random_range(1..cfg.model.vocab_size)).collect()
}

fn gate_equivalence() -> Result<(bool, String)> {
    let cfg = TrainConfig::default();
    let params = ModelParams::init(&cfg.model, 9)?;
    if params
        .alpha_indices()
        .iter()
        .any(|&k| params.params[k].value.item() != 0.0)
    {
        return Ok((false, "gates do not start closed".into()));
    }
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let mut rng = rng_from(9, &[k]);
        let patches: Vec<Matrix> = (0..2)
            .map(|_| gaussian(cfg.model.n_patches, cfg.model.patch_dim, &mut rng))
            .collect();
        let tokens: Vec<Vec<usize>> = (0..2).map(|_| random_tokens(&cfg, &mut rng)).collect();
        let inputs: Vec<Input> = patches
            .iter()
            .zip(&tokens)
            .map(|(p, t)| Input { patches: p, tokens: t })
            .collect();
        let mut t1 = Tape::new();
        let b1 = Bound::new(&mut t1, &params);
        let dual = forward_dual(&mut t1, &b1, &params, &inputs, None)?;
        let mut t2 = Tape::new();
        let b2 = Bound::new(&mut t2, &params);
        let fusion = forward_fusion(&mut t2, &b2, &params, &inputs, None)?;
        let pairs = dual
            .local_image
            .iter()
            .zip(&fusion.local_image)
            .chain(dual.local_text.iter().zip(&fusion.local_text))
            .chain([
                (&dual.global_image, &fusion.global_image),
                (&dual.global_text, &fusion.global_text),
            ]);
        for (&a, &b) in pairs {
            worst = worst.max(t1.value(a).max_abs_diff(t2.value(b))?);
        }
    }
    Ok((worst <= 1e-12, format!("worst difference {worst:.1e} over 100 inputs")))
}

fn standardized(z: &Matrix) -> Matrix {
    let n = z.rows() as f64;
    let mut out = z.clone();
    for c in 0..z.cols() {
        let mean = (0..z.rows()).map(|r| z[(r, c)]).sum::<f64>() / n;
        let var = (0..z.rows()).map(|r| (z[(r, c)] - mean).powi(2)).sum::<f64>() / n;
        for r in 0..z.rows() {
            out[(r, c)] = (z[(r, c)] - mean) / var.sqrt();
        }
    }
    out
}

fn bt_sanity() -> Result<(bool, String)> {
    let cfg = BtConfig::default();
    let mut rng = rng_from(10, &[]);
    let mut ok = true;
    let mut notes = Vec::new();

    let z = standardized(&gaussian(16, 6, &mut rng));
    let same = EmbeddingBatch::new(z.clone(), View::Image)?;
    let c = cross_correlation(&same, &EmbeddingBatch::new(z, View::ImagePrime)?, &cfg)?;
    let (inv, red) = bt_terms(&c)?;
    let loss = bt_loss(&c, &cfg)?;
    let gap = (loss - cfg.lambda * red).abs();
    ok &= inv.abs() <= 1e-12 && gap <= 1e-12;
    notes.push(format!(
        "identical views: invariance {inv:.1e}, |loss - λ·off| {gap:.1e}"
    ));

    let at_identity = bt_loss(&Matrix::identity(6), &cfg)?;
    ok &= at_identity == 0.0;
    notes.push(format!("C = I gives {at_identity}"));

    let zs: Vec<Matrix> = (0..4).map(|_| gaussian(16, 6, &mut rng)).collect();
    let views = [View::Image, View::ImagePrime, View::Text, View::TextPrime];
    let batches: Vec<EmbeddingBatch> = zs
        .iter()
        .zip(views)
        .map(|(z, v)| EmbeddingBatch::new(z.clone(), v))
        .collect::<std::result::Result<_, _>>()?;
    let total = multimodal_bt(&batches[0], &batches[1], &batches[2], &batches[3], &cfg)?;
    let mut pairs = 0.0;
    for (a, b) in [(0, 1), (2, 3), (0, 3), (1, 2)] {
        pairs += bt_loss(&cross_correlation(&batches[a], &batches[b], &cfg)?, &cfg)?;
    }
    let gap = (total - pairs).abs();
    ok &= gap <= 1e-12;
    notes.push(format!("multimodal vs pair sum {gap:.1e}"));
    Ok((ok, notes.join("; ")))
}

fn mask_rate() -> Result<(bool, String)> {
    let ids: Vec<usize> = (0..100_000).map(|i| 1 + i % 50).collect();
    let (_, positions) = mlm_mask(&ids, 0.15, 11)?;
    let frac = positions.len() as f64 / ids.len() as f64;
    Ok(((frac - 0.15).abs() <= 0.01, format!("masked fraction {frac:.4}")))
}

fn seeded(mut cfg: TrainConfig, seed: u64) -> TrainConfig {
    cfg.seed = seed;
    cfg.spec.seed = seed;
    cfg
}

fn end_to_end() -> Result<(bool, String)> {
    let mut ok = true;
    let mut notes = Vec::new();
    for seed in 0..3 {
        let (_, ev) = run::train_and_evaluate(&seeded(TrainConfig::default(), seed))?;
        let ratio = ev.accuracy / ev.chance;
        ok &= ratio >= 3.0;
        notes.push(format!(
            "seed {seed}: {:.3} = {ratio:.2}× chance {:.3}",
            ev.accuracy, ev.chance
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn got_vs_wd() -> Result<(bool, String)> {
    let mut base = TrainConfig::default();
    base.spec.duplicate_entity_rate = 1.0;
    base.got.convention = GammaConvention::GammaOnWd;
    let mean_accuracy = |gamma: f64| -> Result<f64> {
        let mut sum = 0.0;
        for seed in 0..5 {
            let mut cfg = seeded(base.clone(), seed);
            cfg.got.gamma = gamma;
            sum += run::train_and_evaluate(&cfg)?.1.accuracy;
        }
        Ok(sum / 5.0)
    };
    let got = mean_accuracy(0.1)?;
    let wd = mean_accuracy(1.0)?;
    Ok((got >= wd, format!("mean accuracy GOT {got:.4}, WD-only {wd:.4}")))
}

fn short_run(dir: &std::path::Path) -> RunConfig {
    // 2 steps per epoch; the epoch-1 checkpoint leaves 6 steps to resume
    RunConfig {
        train: TrainConfig {
            train_size: 64,
            epochs: 4,
            ..TrainConfig::default()
        },
        output_dir: dir.to_path_buf(),
    }
}

fn determinism() -> Result<(bool, String)> {
    let tmp = tempfile::tempdir().map_err(|e| crate::error::Error::io(&std::env::temp_dir(), e))?;
    let read = |p: std::path::PathBuf| std::fs::read(&p).map_err(|e| crate::error::Error::io(&p, e));
    let mut notes = Vec::new();

    let a = short_run(&tmp.path().join("a"));
    let b = short_run(&tmp.path().join("b"));
    run::train(&a, None, false)?;
    run::train(&b, None, false)?;
    let metrics_a = read(a.output_dir.join("metrics.csv"))?;
    let identical = metrics_a == read(b.output_dir.join("metrics.csv"))?;
    notes.push(format!("metrics.csv identical: {identical}"));

    let ck_path = run::checkpoint_path(&a.output_dir, 1);
    let ck = checkpoint::load(&ck_path, &a.train.model)?;
    let again = tmp.path().join("again.ckpt");
    checkpoint::save(&again, &ck)?;
    let roundtrip = read(again)? == read(ck_path.clone())?
        && checkpoint::load(&tmp.path().join("again.ckpt"), &a.train.model)? == ck;
    notes.push(format!("checkpoint roundtrip exact: {roundtrip}"));

    // continue the epoch-1 checkpoint in a copy of run b's directory
    let c = RunConfig {
        output_dir: tmp.path().join("c"),
        ..a.clone()
    };
    std::fs::create_dir_all(&c.output_dir).map_err(|e| crate::error::Error::io(&c.output_dir, e))?;
    let resumed = run::train(&c, Some(&ck_path), false)?;
    let metrics_c = String::from_utf8_lossy(&read(c.output_dir.join("metrics.csv"))?).into_owned();
    let unbroken = String::from_utf8_lossy(&metrics_a).into_owned();
    let tail: Vec<&str> = unbroken.lines().skip(1 + ck.step).collect();
    let resumed_rows: Vec<&str> = metrics_c.lines().skip(1).collect();
    let resume_ok = resumed_rows == tail && resumed_rows.len() >= 5;
    notes.push(format!(
        "resumed {} steps match unbroken: {resume_ok}",
        resumed.steps - ck.step
    ));

    Ok((identical && roundtrip && resume_ok, notes.join("; ")))
}

fn schedule() -> Result<(bool, String)> {
    let cfg = OptimConfig::default();
    let spe = 8;
    let warmup = cfg.warmup_epochs * spe;
    let last = cfg.total_epochs * spe - 1;
    let mut ok = true;
    let mut notes = Vec::new();
    for (kind, base) in [
        (ParamKind::Weight, cfg.base_lr_weights * cfg.lr_multiplier),
        (ParamKind::Bias, cfg.base_lr_biases * cfg.lr_multiplier),
    ] {
        let at = |s| lr_at(s, spe, &cfg, kind);
        let start = at(0);
        let peak = at(warmup);
        let end = at(last);
        let end_gap = (end - base * 0.001).abs() / base;
        // one step either side of the boundary moves by at most one warmup increment
        let jump = (at(warmup) - at(warmup - 1))
            .abs()
            .max((at(warmup + 1) - at(warmup)).abs());
        let step = base / warmup as f64;
        ok &= start == 0.0 && (peak - base).abs() <= 1e-15 * base && end_gap <= 1e-12 && jump <= step * (1.0 + 1e-9);
        notes.push(format!(
            "{kind:?}: start {start}, warmup end {peak:.6}/{base:.6}, final {end:.3e}, boundary jump {jump:.2e}"
        ));
    }
    Ok((ok, notes.join("; ")))
}

/// Runs every criterion in order, handing each outcome to `report` as soon
/// as it is known.
pub fn run_all(mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    CRITERIA
        .iter()
        .map(|c| {
            let o = c.run();
            report(&o);
            o
        })
        .collect()
}
