use alloc::vec::Vec;

use super::*;

fn micro_config() -> TrainConfig {
    TrainConfig::micro()
}

#[test]
fn default_config_is_consistent() {
    TrainConfig::default().validate().unwrap();
    micro_config().validate().unwrap();
    let bad = TrainConfig {
        w_got: -1.0,
        ..TrainConfig::default()
    };
    assert!(bad.validate().is_err());
    let mut bad = TrainConfig::default();
    bad.model.vocab_size += 1;
    assert!(bad.validate().is_err());
}

#[test]
fn task_names() {
    let t: TaskSet = "BTGOT, MLM, ITM".parse().unwrap();
    assert_eq!(t, TaskSet::ALL);
    assert_eq!(t.to_string(), "BTGOT,MLM,ITM");
    let only: TaskSet = "btgot".parse().unwrap();
    assert!(only.btgot && !only.mlm && !only.itm);
    assert!("".parse::<TaskSet>().is_err());
    assert!("BT".parse::<TaskSet>().is_err());
}

#[test]
fn derangements_have_no_fixed_points() {
    for n in 2..12 {
        for seed in 0..20 {
            let p = derangement(n, seed);
            let mut sorted = p.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            assert!(p.iter().enumerate().all(|(i, &j)| i != j));
            assert_eq!(p, derangement(n, seed));
        }
    }
}

#[test]
fn disabled_tasks_contribute_exactly_zero() {
    let mut cfg = micro_config();
    cfg.tasks = "BTGOT".parse().unwrap();
    let mut t = Trainer::new(cfg).unwrap();
    for _ in 0..2 {
        let r = t.train_step().unwrap();
        assert_eq!((r.mlm, r.itm), (0.0, 0.0));
        assert!(r.bt > 0.0 && r.got > 0.0);
    }
    let mut cfg = micro_config();
    cfg.tasks = "MLM,ITM".parse().unwrap();
    let r = Trainer::new(cfg).unwrap().train_step().unwrap();
    assert_eq!((r.bt, r.got), (0.0, 0.0));
    assert!(r.itm > 0.0);
}

#[test]
fn reported_total_is_the_weighted_sum() {
    let mut t = Trainer::new(micro_config()).unwrap();
    for _ in 0..3 {
        let r = t.train_step().unwrap();
        let sum = r.bt + t.cfg.w_got * r.got + r.mlm + r.itm;
        assert!((r.total - sum).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn runs_are_bit_identical_and_resumable() {
    let cfg = micro_config();
    let run = |n: usize| {
        let mut t = Trainer::new(cfg.clone()).unwrap();
        let reports: Vec<StepReport> = (0..n).map(|_| t.train_step().unwrap()).collect();
        (t, reports)
    };
    let (a, ra) = run(5);
    let (_, rb) = run(5);
    assert_eq!(ra, rb);

    let (mid, _) = run(2);
    let mut resumed = Trainer::resume(cfg.clone(), mid.params.clone(), mid.state.clone(), mid.step).unwrap();
    let tail: Vec<StepReport> = (0..3).map(|_| resumed.train_step().unwrap()).collect();
    assert_eq!(tail, ra[2..]);
    assert_eq!(resumed.params, a.params);
    assert!(resumed.is_finished() == (resumed.step >= cfg.total_steps()));
}

#[test]
fn zero_steps_leave_metrics_unchanged() {
    let t = Trainer::new(micro_config()).unwrap();
    let fresh = Trainer::new(micro_config()).unwrap();
    assert_eq!(t.evaluate().unwrap(), fresh.evaluate().unwrap());
}

#[test]
fn batches_cover_each_epoch_once() {
    let t = Trainer::new(micro_config()).unwrap();
    let mut seen: Vec<u64> = (0..t.cfg.steps_per_epoch()).flat_map(|s| t.batch_indices(s)).collect();
    seen.sort_unstable();
    assert_eq!(seen, (0..8).collect::<Vec<u64>>());
    assert_ne!(t.batch_indices(0), t.batch_indices(2));
}

#[test]
fn oracle_features_align_perfectly() {
    let cfg = TrainConfig::default();
    let spec = SyntheticSpec {
        n_tokens: 8,
        ..cfg.spec
    };
    let world = World::new(spec).unwrap();
    for i in 0..10 {
        let s = world.sample(stream::DATA_EVAL, i);
        // every patch named once; token features are their patches' features
        let rows: Vec<usize> = s.gt_alignment.iter().map(|g| g.unwrap()).collect();
        let text = s.patch_features.select_rows(&rows);
        let plan = plan_alignment(&s.patch_features, &text, &cfg.got, &cfg.ot).unwrap();
        let pred: Vec<Option<usize>> = plan.column_argmax().into_iter().map(Some).collect();
        assert_eq!(pred, s.gt_alignment);
    }
}

#[test]
fn evaluation_reports_closed_form_chance() {
    let t = Trainer::new(micro_config()).unwrap();
    let r = t.evaluate().unwrap();
    assert!((r.chance - 1.0 / 3.0).abs() < 1e-15);
    assert!((0.0..=1.0).contains(&r.accuracy));
    assert_eq!(r.plans.len(), 4);
    assert!(r.plans.iter().all(|p| p.marginal_violation() < 1e-9));
}

#[test]
fn nan_parameters_abort_with_step() {
    let mut t = Trainer::new(micro_config()).unwrap();
    t.train_step().unwrap();
    let k = t.params.index_of("txt.embed").unwrap();
    t.params.params[k].value.data_mut().fill(f64::NAN);
    match t.train_step() {
        Err(Error::NumericAbort { step, .. }) => assert_eq!(step, 1),
        other => panic!("expected abort, got {other:?}"),
    }
}

#[test]
fn full_loss_gradient_matches_finite_differences() {
    let mut cfg = micro_config();
    cfg.ot.gw_structural_cost = crate::ot::StructuralCost::Squared;
    let mut t = Trainer::new(cfg.clone()).unwrap();
    // open the gates so every parameter group is live
    t.params.set_alphas(0.2);
    let inputs = t.step_inputs(0).unwrap();
    let g = step_graph(&t.params, &cfg, &inputs, None).unwrap();
    let plans = g.plans.clone();
    let fixed = step_graph(&t.params, &cfg, &inputs, Some(&plans)).unwrap();
    assert!((fixed.report.total - g.report.total).abs() < 1e-9);
    let grads = fixed
        .bound
        .gradients(&fixed.tape.backward(fixed.total).unwrap(), &t.params);
    let eval = |p: &ModelParams| step_graph(p, &cfg, &inputs, Some(&plans)).unwrap().report.total;
    let h = 1e-5;
    let mut rng = rng_from(5, &[]);
    let mut checked = 0;
    for (k, p) in t.params.params.iter().enumerate() {
        // a few entries of every tensor
        for _ in 0..3.min(p.value.len()) {
            let e = rng.random_range(0..p.value.len());
            let mut plus = t.params.clone();
            plus.params[k].value.data_mut()[e] += h;
            let mut minus = t.params.clone();
            minus.params[k].value.data_mut()[e] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let an = grads[k].data()[e];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-4);
            assert!(rel < 1e-4, "{} entry {e}: analytic {an} vs fd {fd}", p.name);
            checked += 1;
        }
    }
    assert!(checked > 100);
}
