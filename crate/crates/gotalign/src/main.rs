use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use gotalign::checks::{self, CRITERIA};
use gotalign::config::{ConfigBuilder, KEYS};
use gotalign::error::{Error, Result};
use gotalign::{export, heatmap, run};
use gotalign_core::data::World;
use gotalign_core::rng::stream;
use gotalign_core::train::{evaluate_alignment, Trainer};

/// Criteria that train full models; `selftest` skips them unless asked.
const TRAINING_CRITERIA: [usize; 2] = [9, 10];

fn with_overrides(cmd: Command, seed_required: bool) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .value_parser(clap::value_parser!(PathBuf))
            .help("key = value configuration file"),
    );
    KEYS.iter().fold(cmd, |cmd, k| {
        let arg = Arg::new(k.name)
            .long(k.name)
            .value_name("VALUE")
            .help(k.help)
            .help_heading("Configuration keys");
        let arg = if k.name.contains('_') {
            arg.alias(k.name.replace('_', "-"))
        } else {
            arg
        };
        cmd.arg(arg.required(seed_required && k.name == "seed"))
    })
}

fn cli() -> Command {
    let checkpoint = || {
        Arg::new("checkpoint")
            .long("checkpoint")
            .value_name("FILE")
            .required(true)
            .value_parser(clap::value_parser!(PathBuf))
    };
    Command::new("gotalign")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Weakly supervised patch-token alignment with graph optimal transport")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            with_overrides(
                Command::new("train").about("Train a model into its output directory"),
                true,
            )
            .arg(
                Arg::new("resume")
                    .long("resume")
                    .value_name("CHECKPOINT")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("continue from a checkpoint written under the same configuration"),
            ),
        )
        .subcommand(
            with_overrides(
                Command::new("eval").about("Alignment metrics of a checkpoint on the held-out set"),
                false,
            )
            .arg(checkpoint()),
        )
        .subcommand(
            with_overrides(
                Command::new("ablate").about("Train and evaluate once per value of one key"),
                false,
            )
            .arg(
                Arg::new("sweep")
                    .long("sweep")
                    .value_name("KEY=V1,V2,...")
                    .required(true)
                    .help(format!("one of {}", run::SWEEPABLE.join(", "))),
            )
            .arg(
                Arg::new("out")
                    .long("out")
                    .value_name("FILE")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("CSV table path [default: <output_dir>/ablation-<key>.csv]"),
            ),
        )
        .subcommand(
            with_overrides(
                Command::new("heatmap").about("Export transport plans of held-out samples"),
                false,
            )
            .arg(checkpoint())
            .arg(
                Arg::new("samples")
                    .long("samples")
                    .value_name("N")
                    .default_value("4")
                    .value_parser(clap::value_parser!(usize)),
            )
            .arg(
                Arg::new("out")
                    .long("out")
                    .value_name("DIR")
                    .required(true)
                    .value_parser(clap::value_parser!(PathBuf)),
            ),
        )
        .subcommand(
            with_overrides(
                Command::new("export").about("Write synthetic samples in the line-oriented dataset format"),
                false,
            )
            .arg(
                Arg::new("split")
                    .long("split")
                    .value_parser(["train", "eval"])
                    .default_value("eval"),
            )
            .arg(
                Arg::new("count")
                    .long("count")
                    .value_name("N")
                    .default_value("16")
                    .value_parser(clap::value_parser!(u64)),
            )
            .arg(
                Arg::new("out")
                    .long("out")
                    .value_name("FILE")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("defaults to stdout"),
            ),
        )
        .subcommand(
            Command::new("selftest")
                .about("Run the invariant suites")
                .arg(
                    Arg::new("all")
                        .long("all")
                        .action(ArgAction::SetTrue)
                        .help("also run the criteria that train full models (several minutes)"),
                )
                .arg(
                    Arg::new("only")
                        .long("only")
                        .value_name("IDS")
                        .value_delimiter(',')
                        .value_parser(clap::value_parser!(usize))
                        .help("comma-separated criterion ids"),
                ),
        )
}

/// Config file first, then flag overrides, then derived keys.
fn builder(m: &ArgMatches, fallback_config: Option<PathBuf>) -> Result<ConfigBuilder> {
    let mut b = ConfigBuilder::new();
    if let Some(path) = m.get_one::<PathBuf>("config").cloned().or(fallback_config) {
        b.apply_file(&path)?;
    }
    for k in KEYS {
        if let Some(v) = m.get_one::<String>(k.name) {
            b.set(k.name, v)?;
        }
    }
    Ok(b)
}

/// The snapshot a run wrote next to its checkpoints, if there is one.
fn run_config_of(checkpoint: &Path) -> Option<PathBuf> {
    let candidate = checkpoint.parent()?.parent()?.join("config.txt");
    candidate.is_file().then_some(candidate)
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(name: &str, m: &ArgMatches) -> Result<bool> {
    match name {
        "train" => {
            let cfg = builder(m, None)?.build()?;
            let summary = run::train(&cfg, m.get_one::<PathBuf>("resume").map(PathBuf::as_path), true)?;
            print!("{}", run::summary_text(&summary.eval, summary.steps));
            println!("run directory = {}", summary.dir.display());
        }
        "eval" => {
            let ck = m.get_one::<PathBuf>("checkpoint").expect("required");
            let cfg = builder(m, run_config_of(ck))?.build()?;
            let ev = run::evaluate_checkpoint(&cfg.train, ck)?;
            print!(
                "{}",
                run::summary_text(&ev, gotalign::checkpoint::load(ck, &cfg.train.model)?.step)
            );
        }
        "ablate" => {
            let b = builder(m, None)?;
            let (key, values) = run::parse_sweep(m.get_one::<String>("sweep").expect("required"))?;
            let rows = run::ablate(&b, &key, &values)?;
            let out = match m.get_one::<PathBuf>("out") {
                Some(p) => p.clone(),
                None => b.build()?.output_dir.join(format!("ablation-{key}.csv")),
            };
            run::write_ablation(&out, &rows)?;
            println!("{}", run::ABLATION_HEADER);
            rows.iter().for_each(|r| println!("{}", r.csv()));
        }
        "heatmap" => {
            let ck = m.get_one::<PathBuf>("checkpoint").expect("required");
            let cfg = builder(m, run_config_of(ck))?.build()?;
            let loaded = gotalign::checkpoint::load(ck, &cfg.train.model)?;
            let trainer = Trainer::resume(cfg.train.clone(), loaded.params, loaded.state, loaded.step)?;
            let ev = evaluate_alignment(&trainer.params, &trainer.eval_set(), &cfg.train)?;
            let out = m.get_one::<PathBuf>("out").expect("required");
            let n = *m.get_one::<usize>("samples").expect("defaulted");
            for (k, plan) in ev.plans.iter().take(n).enumerate() {
                heatmap::export_heatmap(&plan.coupling, out, &format!("eval-{k}"))?;
            }
            println!("wrote {} heatmaps to {}", n.min(ev.plans.len()), out.display());
        }
        "export" => {
            let cfg = builder(m, None)?.build()?;
            let world = World::new(cfg.train.spec)?;
            let split = match m.get_one::<String>("split").map(String::as_str) {
                Some("train") => stream::DATA_TRAIN,
                _ => stream::DATA_EVAL,
            };
            let count = *m.get_one::<u64>("count").expect("defaulted");
            let samples: Vec<_> = (0..count).map(|i| (i, world.sample(split, i))).collect();
            let refs: Vec<_> = samples.iter().map(|(i, s)| (*i, s)).collect();
            write_out(m.get_one::<PathBuf>("out"), &export::write(&refs))?;
        }
        "selftest" => {
            let only: Option<Vec<usize>> = m.get_many::<usize>("only").map(|v| v.copied().collect());
            let all = m.get_flag("all");
            let mut ok = true;
            for c in &CRITERIA {
                let selected = match &only {
                    Some(ids) => ids.contains(&c.id),
                    None => all || !TRAINING_CRITERIA.contains(&c.id),
                };
                if selected {
                    let o = c.run();
                    println!("{}", o.line());
                    ok &= o.passed;
                }
            }
            if let Some(bad) = only.iter().flatten().find(|&&id| checks::criterion(id).is_none()) {
                return Err(Error::Usage(format!("no criterion {bad}")));
            }
            return Ok(ok);
        }
        other => unreachable!("unknown subcommand {other}"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match dispatch(name, sub) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
