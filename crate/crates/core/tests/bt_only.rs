//! With the alignment weight at zero and only the BTGOT task enabled, the
//! trainer must coincide with a plain Barlow Twins loop written against the
//! public model and optimizer API.

use gotalign_core::bt::multimodal_bt_on;
use gotalign_core::model::{forward_dual, project, Bound, Dropout, Input, Projector};
use gotalign_core::optim::{lars_step, step_lr};
use gotalign_core::rng::derive_seed;
use gotalign_core::train::{TaskSet, TrainConfig, Trainer};
use gotalign_core::Tape;

fn bt_only() -> TrainConfig {
    let mut cfg = TrainConfig::micro();
    cfg.w_got = 0.0;
    cfg.tasks = TaskSet {
        btgot: true,
        mlm: false,
        itm: false,
    };
    cfg.epochs = 3;
    cfg.optim.warmup_epochs = 1;
    cfg
}

#[test]
fn zero_alignment_weight_is_a_plain_barlow_twins_trainer() {
    let cfg = bt_only();
    let mut trainer = Trainer::new(cfg.clone()).unwrap();
    let mut params = trainer.params.clone();
    let mut state = trainer.state.clone();

    for step in 0..cfg.total_steps() {
        let report = trainer.train_step().unwrap();
        assert_eq!((report.mlm, report.itm), (0.0, 0.0));

        let inputs = trainer.step_inputs(step).unwrap();
        let mut tape = Tape::new();
        let b = Bound::new(&mut tape, &params);
        let mut globals = Vec::new();
        for (pass, view) in [&inputs.view1, &inputs.view2].into_iter().enumerate() {
            let batch: Vec<Input> = view
                .iter()
                .map(|s| Input {
                    patches: &s.patch_features,
                    tokens: &s.token_ids,
                })
                .collect();
            let drop = Dropout {
                seed: derive_seed(inputs.dropout_seed, &[pass as u64]),
                rate: params.cfg.dropout,
            };
            let out = forward_dual(&mut tape, &b, &params, &batch, Some(drop)).unwrap();
            let zi = project(&mut tape, &b, &params, Projector::GlobalImage, out.global_image).unwrap();
            let zt = project(&mut tape, &b, &params, Projector::GlobalText, out.global_text).unwrap();
            globals.push((zi, zt));
        }
        let loss = multimodal_bt_on(
            &mut tape,
            globals[0].0,
            globals[1].0,
            globals[0].1,
            globals[1].1,
            &cfg.bt,
        )
        .unwrap();
        assert_eq!(tape.value(loss).item(), report.bt, "step {step}");
        assert_eq!(report.total, report.bt, "step {step}");

        let grads = b.gradients(&tape.backward(loss).unwrap(), &params);
        let lr = step_lr(step, cfg.steps_per_epoch(), &cfg.schedule());
        lars_step(&mut params.params, &grads, &mut state, lr, &cfg.schedule()).unwrap();
        assert_eq!(params, trainer.params, "parameters diverged after step {step}");
    }
    assert_eq!(state, trainer.state);
}
