//! Drives the built binary: a short run and every artifact it leaves, the
//! other subcommands, and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

use gotalign::{checkpoint, export, heatmap, metrics};

fn gotalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gotalign"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const SHORT: [&str; 6] = ["--epochs", "2", "--train_size", "64", "--eval_size", "8"];

fn train_short(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--seed", "4", "--output_dir", dir.to_str().unwrap()];
    args.extend(SHORT);
    args.extend(extra);
    gotalign(&args)
}

#[test]
fn train_writes_the_documented_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = train_short(&dir, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let metrics_csv = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let mut lines = metrics_csv.lines();
    assert_eq!(lines.next(), Some(metrics::HEADER));
    assert_eq!(lines.count(), 4);
    assert_eq!(
        std::fs::read_to_string(dir.join("eval.csv")).unwrap().lines().count(),
        3
    );

    let cfg = gotalign::config::parse(&std::fs::read_to_string(dir.join("config.txt")).unwrap()).unwrap();
    assert_eq!(cfg.train.seed, 4);
    for epoch in [1, 2] {
        let ck = checkpoint::load(
            &dir.join(format!("checkpoints/epoch-{epoch:04}.ckpt")),
            &cfg.train.model,
        )
        .unwrap();
        assert_eq!(ck.step, 2 * epoch);
        assert_eq!(ck.config_hash, gotalign::config::config_hash(&cfg));
    }
    for k in 0..4 {
        let pgm = std::fs::read(dir.join(format!("heatmaps/eval-{k}.pgm"))).unwrap();
        assert!(pgm.starts_with(b"P5\n"));
        let csv = std::fs::read_to_string(dir.join(format!("heatmaps/eval-{k}.csv"))).unwrap();
        let plan = heatmap::parse_csv(&csv).unwrap();
        assert!((plan.sum() - 1.0).abs() < 1e-6);
    }
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("accuracy = ") && summary.contains("chance = 0.125"));

    // eval finds the run's config snapshot and reproduces the final numbers
    let ck = dir.join("checkpoints/epoch-0002.ckpt");
    let ev = gotalign(&["eval", "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(code(&ev), 0, "{}", String::from_utf8_lossy(&ev.stderr));
    assert_eq!(String::from_utf8(ev.stdout).unwrap(), summary);

    let maps = tmp.path().join("maps");
    let hm = gotalign(&[
        "heatmap",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--out",
        maps.to_str().unwrap(),
        "--samples",
        "2",
    ]);
    assert_eq!(code(&hm), 0);
    assert_eq!(
        std::fs::read(maps.join("eval-1.pgm")).unwrap(),
        std::fs::read(dir.join("heatmaps/eval-1.pgm")).unwrap()
    );
    assert!(!maps.join("eval-2.pgm").exists());
}

#[test]
fn resume_continues_where_the_checkpoint_left_off() {
    let tmp = tempfile::tempdir().unwrap();
    let whole = tmp.path().join("whole");
    assert_eq!(code(&train_short(&whole, &[])), 0);
    let ck = whole.join("checkpoints/epoch-0001.ckpt");
    let part = tmp.path().join("part");
    let out = train_short(&part, &["--resume", ck.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let whole_rows = std::fs::read_to_string(whole.join("metrics.csv")).unwrap();
    let part_rows = std::fs::read_to_string(part.join("metrics.csv")).unwrap();
    let tail: Vec<&str> = whole_rows.lines().skip(3).collect();
    assert_eq!(part_rows.lines().skip(1).collect::<Vec<_>>(), tail);

    // a checkpoint from a different configuration is refused
    let other = tmp.path().join("other");
    let out = train_short(&other, &["--resume", ck.to_str().unwrap(), "--w_got", "5"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("different configuration"));
}

#[test]
fn ablate_emits_one_row_per_setting() {
    let tmp = tempfile::tempdir().unwrap();
    let table = tmp.path().join("w.csv");
    let mut args = vec![
        "ablate",
        "--sweep",
        "w_got=50,100",
        "--out",
        table.to_str().unwrap(),
        "--epochs",
        "1",
    ];
    args.extend(["--train_size", "32", "--eval_size", "4", "--warmup_epochs", "0"]);
    let out = gotalign(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("w_got,50,") && rows[2].starts_with("w_got,100,"));
    // the same sweep again yields the same table
    assert_eq!(code(&gotalign(&args)), 0);
    assert_eq!(std::fs::read_to_string(&table).unwrap(), text);

    let bad = gotalign(&["ablate", "--sweep", "lambda=1,2"]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn export_roundtrips_through_the_parser() {
    let out = gotalign(&["export", "--count", "3", "--split", "train"]);
    assert_eq!(code(&out), 0);
    let records = export::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(records.len(), 3);
    assert!(records
        .iter()
        .all(|r| r.patch_features.shape() == (8, 16) && r.token_ids.len() == r.gt_alignment.len()));
}

#[test]
fn selftest_runs_selected_criteria() {
    let out = gotalign(&["selftest", "--only", "8,12"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().all(|l| l.starts_with("[PASS]")));
    assert_eq!(code(&gotalign(&["selftest", "--only", "99"])), 1);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&gotalign(&["--help"])), 0);
    assert_eq!(code(&gotalign(&["train"])), 1, "seed is mandatory");
    assert_eq!(code(&gotalign(&["train", "--seed", "1", "--no_such_key", "3"])), 1);
    assert_eq!(code(&gotalign(&["train", "--seed", "1", "--gamma", "2"])), 1);
    assert_eq!(code(&gotalign(&["eval", "--checkpoint", "/nonexistent/x.ckpt"])), 1);

    let tmp = tempfile::tempdir().unwrap();
    let out = train_short(
        &tmp.path().join("nan"),
        &["--lr_weights", "1e100", "--trust_coefficient", "none"],
    );
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numeric failure at step"));
}
