use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use auginf::autoenc::VgaeModel;
use auginf::graph::{load_dataset, save_dataset, splits_path, Dataset};
use auginf::pipeline::{
    evaluate_run, run_ablation, sweep, train_joint, Ablation, AblationReport, JointModel, MetricRecord, RunContext,
    TrainConfig,
};
use auginf::synth::synthesize;
use auginf::{AugInfError, Result};
use auginf_numerics::Checkpoint;
use log::info;
use serde::Serialize;

use crate::args::{seeds, AblateArgs, Command, EvalArgs, ReplayArgs, SweepArgs, SweepAxis, SynthArgs, TrainArgs};
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const DATA_FILE: &str = "data.jsonl";
pub const MODEL_FILE: &str = "model.ckpt";
pub const VGAE_FILE: &str = "vgae.ckpt";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const REPORT_FILE: &str = "report.txt";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SWEEP_FILE: &str = "sweep.jsonl";
pub const SWEEP_CSV: &str = "sweep.csv";
const CONFIG_META: &str = "train_config";

/// Runs `cmd` and returns the path of the manifest it wrote.
pub fn run(cmd: &Command) -> Result<PathBuf> {
    match cmd {
        Command::Synth(a) => cmd_synth(a, cmd),
        Command::Train(a) => cmd_train(a, cmd),
        Command::Eval(a) => cmd_eval(a, cmd),
        Command::Ablate(a) => cmd_ablate(a, cmd),
        Command::Sweep(a) => cmd_sweep(a, cmd),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in rows {
        writeln!(w, "{}", serde_json::to_string(&r).expect("plain record"))?;
    }
    w.flush()?;
    Ok(())
}

fn load_data(path: &Path, manifest: &mut RunManifest) -> Result<Dataset> {
    let d = load_dataset(path)?;
    manifest.add_input(path)?;
    let splits = splits_path(path);
    if splits.exists() {
        manifest.add_input(&splits)?;
    }
    Ok(d)
}

fn finish(manifest: &mut RunManifest, out: &Path, outputs: &[&str]) -> Result<PathBuf> {
    for name in outputs {
        manifest.add_output(out, name)?;
    }
    manifest.write(out)
}

fn cmd_synth(a: &SynthArgs, cmd: &Command) -> Result<PathBuf> {
    let (dataset, report) = synthesize(&a.cascade_config())?;
    fs::create_dir_all(&a.out)?;
    let data = a.out.join(DATA_FILE);
    save_dataset(&dataset, &data)?;
    fs::write(a.out.join("synth_report.json"), serde_json::to_string_pretty(&report).expect("report") + "\n")?;
    let total = report.positives + report.negatives;
    println!(
        "{total} samples: {} positive ({:.1}%), {} negative; splits {}/{}/{}",
        report.positives,
        100.0 * report.positives as f64 / total as f64,
        report.negatives,
        dataset.splits.train.len(),
        dataset.splits.valid.len(),
        dataset.splits.test.len()
    );
    let mut m = RunManifest::new(cmd.clone(), vec![a.seed]);
    let splits = splits_path(Path::new(DATA_FILE));
    finish(&mut m, &a.out, &[DATA_FILE, &splits.display().to_string(), "synth_report.json"])
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).map_err(|e| AugInfError::Data(format!("checkpoint {}: {e}", path.display())))
}

fn load_vgae(path: &Path) -> Result<VgaeModel> {
    VgaeModel::from_checkpoint(&load_checkpoint(path)?)
}

fn cmd_train(a: &TrainArgs, cmd: &Command) -> Result<PathBuf> {
    let mut m = RunManifest::new(cmd.clone(), vec![a.seed]);
    let data = load_data(&a.data, &mut m)?;
    let cfg = a.model.train_config(a.seed);
    let ablation = Ablation::from_arm(a.arm)?;
    let mut ctx = RunContext::new(&data, cfg.clone())?;
    if let Some(p) = &a.vgae {
        ctx.set_vgae(load_vgae(p)?)?;
        m.add_input(p)?;
    }
    let run = train_joint(&mut ctx, ablation)?;
    fs::create_dir_all(&a.out)?;
    let mut ck = run.model.to_checkpoint();
    ck.meta.insert(CONFIG_META.into(), serde_json::to_string(&cfg).expect("config serialises"));
    ck.save(a.out.join(MODEL_FILE))?;
    let mut outputs = vec![MODEL_FILE, TRACE_FILE];
    if ablation.train_aug || ablation.test_aug {
        ctx.vgae()?.to_checkpoint().save(a.out.join(VGAE_FILE))?;
        outputs.push(VGAE_FILE);
    }
    jsonl(&a.out.join(TRACE_FILE), run.report.trace.iter().chain(run.report.last.iter()))?;
    if let Some(last) = &run.report.last {
        println!("arm {} trained: final loss {:.6}", a.arm, last.loss);
    }
    finish(&mut m, &a.out, &outputs)
}

fn cmd_eval(a: &EvalArgs, cmd: &Command) -> Result<PathBuf> {
    let mut m = RunManifest::new(cmd.clone(), Vec::new());
    let ck = load_checkpoint(&a.checkpoint)?;
    m.add_input(&a.checkpoint)?;
    let mut model = JointModel::from_checkpoint(&ck)?;
    let mut cfg: TrainConfig = serde_json::from_str(ck.meta_str(CONFIG_META)?)
        .map_err(|e| AugInfError::Data(format!("checkpoint training config: {e}")))?;
    cfg.aug_threshold = a.aug_threshold.unwrap_or(cfg.aug_threshold);
    cfg.aug_count = a.aug_count.unwrap_or(cfg.aug_count);
    model.ablation.test_aug |= a.test_aug;
    if model.ablation.test_aug && a.vgae.is_none() {
        return Err(AugInfError::Config("test-time augmentation needs a VGAE checkpoint (--vgae)".into()));
    }
    m.seeds = vec![cfg.seed];
    let data = load_data(&a.data, &mut m)?;
    let mut ctx = RunContext::for_test(&data, cfg.clone())?;
    if let Some(p) = &a.vgae {
        ctx.set_vgae(load_vgae(p)?)?;
        m.add_input(p)?;
    }
    let (scores, metrics) = evaluate_run(&mut ctx, &model)?;
    fs::create_dir_all(&a.out)?;
    let record = MetricRecord { arm: model.ablation.arm(), run_seed: cfg.seed, auc: metrics.auc, f1: metrics.f1 };
    jsonl(&a.out.join(METRICS_FILE), [&record])?;
    #[derive(Serialize)]
    struct Score {
        id: u64,
        label: u8,
        score: f64,
    }
    jsonl(
        &a.out.join(SCORES_FILE),
        ctx.test.iter().zip(&scores).map(|(p, &score)| Score { id: p.sample.id, label: p.sample.label, score }),
    )?;
    let report = AblationReport { records: vec![record] };
    fs::write(a.out.join(REPORT_FILE), report.table())?;
    print!("{}", report.table());
    finish(&mut m, &a.out, &[METRICS_FILE, SCORES_FILE, REPORT_FILE])
}

fn cmd_ablate(a: &AblateArgs, cmd: &Command) -> Result<PathBuf> {
    let seeds = seeds(a.seed, a.runs);
    let mut m = RunManifest::new(cmd.clone(), seeds.clone());
    let data = load_data(&a.data, &mut m)?;
    let report = run_ablation(&data, &a.model.train_config(a.seed), &a.arms, &seeds)?;
    fs::create_dir_all(&a.out)?;
    jsonl(&a.out.join(METRICS_FILE), &report.records)?;
    #[derive(Serialize)]
    struct Summary {
        arms: Vec<auginf::pipeline::ArmSummary>,
        deltas_vs_arm_1: Vec<auginf::pipeline::PairedDelta>,
    }
    let summary = Summary { arms: report.summary(), deltas_vs_arm_1: report.deltas(1) };
    fs::write(a.out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary).expect("summary") + "\n")?;
    fs::write(a.out.join(REPORT_FILE), report.table())?;
    print!("{}", report.table());
    finish(&mut m, &a.out, &[METRICS_FILE, SUMMARY_FILE, REPORT_FILE])
}

fn cmd_sweep(a: &SweepArgs, cmd: &Command) -> Result<PathBuf> {
    let seeds = seeds(a.seed, a.runs);
    let mut m = RunManifest::new(cmd.clone(), seeds.clone());
    let data = load_data(&a.data, &mut m)?;
    let points: Vec<(f64, usize)> = match a.vary {
        SweepAxis::Count => a.counts.iter().map(|&c| (a.model.aug_threshold, c)).collect(),
        SweepAxis::Threshold => a.thresholds.iter().map(|&t| (t, a.model.aug_count)).collect(),
    };
    let records = sweep(&data, &a.model.train_config(a.seed), Ablation::from_arm(a.arm)?, &points, &seeds)?;
    fs::create_dir_all(&a.out)?;
    jsonl(&a.out.join(SWEEP_FILE), &records)?;
    let mut csv = String::from("threshold,count,run_seed,auc,f1,added_edge_percent\n");
    for r in &records {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.threshold, r.count, r.run_seed, r.auc, r.f1, r.added_edge_percent
        ));
    }
    fs::write(a.out.join(SWEEP_CSV), &csv)?;
    print!("{csv}");
    finish(&mut m, &a.out, &[SWEEP_FILE, SWEEP_CSV])
}

fn with_out(cmd: &Command, out: &Path) -> Result<Command> {
    let mut c = cmd.clone();
    match &mut c {
        Command::Synth(a) => a.out = out.into(),
        Command::Train(a) => a.out = out.into(),
        Command::Eval(a) => a.out = out.into(),
        Command::Ablate(a) => a.out = out.into(),
        Command::Sweep(a) => a.out = out.into(),
        Command::Replay(_) => return Err(AugInfError::Config("a manifest cannot record a replay".into())),
    }
    Ok(c)
}

/// Re-runs the manifest's command into `out` and checks every recorded
/// output reproduces byte for byte.
fn cmd_replay(a: &ReplayArgs) -> Result<PathBuf> {
    let old = RunManifest::read(&a.manifest)?;
    old.verify_inputs()?;
    let cmd = with_out(&old.invocation, &a.out)?;
    info!("replaying into {}", a.out.display());
    let new = RunManifest::read(&run(&cmd)?)?;
    let mut mismatches = Vec::new();
    for f in &old.outputs {
        match new.outputs.iter().find(|g| g.path == f.path) {
            Some(g) if g.sha256 == f.sha256 => println!("identical {}", f.path),
            _ => {
                println!("DIFFERS   {}", f.path);
                mismatches.push(f.path.clone());
            }
        }
    }
    if !mismatches.is_empty() {
        return Err(AugInfError::Data(format!("replay differs in {}", mismatches.join(", "))));
    }
    Ok(a.out.join(MANIFEST_FILE))
}
