use std::path::Path;

use lad_core::checkpoint::Checkpoint;
use lad_core::config::PipelineConfig;
use lad_core::pipeline::{run_all, run_gen, run_report, run_score, Layout, Variant};
use lad_core::scene::{CaptureCondition, ScenarioId};
use lad_core::trainer::read_loss_curve;

fn small(extra: &[(&str, &str)]) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    for (k, v) in [("scenario", "Fruits,Balls"), ("condition", "WhiteBG,MeshBG"), ("train.epochs", "3"), ("dim", "16")]
        .iter()
        .chain(extra)
    {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn small_grid_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let layout = Layout::new(dir.path());
    let out = run_all(&small(&[]), &layout).unwrap();
    assert_eq!(out.reports.len(), 4);
    assert_eq!(out.aggregate.scenarios, vec![ScenarioId::Fruits, ScenarioId::Balls]);
    assert_eq!(out.aggregate.conditions, vec![CaptureCondition::WhiteBG, CaptureCondition::MeshBG]);
    for r in &out.reports {
        assert!((0.0..=1.0).contains(&r.auroc), "{}: {}", r.task_id, r.auroc);
    }
    let md = run_report(&small(&[]), &layout).unwrap();
    assert!(md.contains("| Fruits |"));
    for v in [Variant::Trained, Variant::Baseline] {
        assert!(layout.reports(v).join("conditions.csv").exists());
        assert!(layout.checkpoint("Fruits_WhiteBG", v).exists());
    }
}

#[test]
fn reruns_and_job_counts_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(&small(&[]), &Layout::new(a.path())).unwrap();
    run_all(&small(&[("jobs", "3")]), &Layout::new(b.path())).unwrap();
    for rel in [
        "tasks/Balls_MeshBG/descriptions.jsonl",
        "tasks/Balls_MeshBG/negatives.jsonl",
        "tasks/Balls_MeshBG/checkpoint.bin",
        "tasks/Fruits_WhiteBG/scores.jsonl",
        "tasks/Fruits_WhiteBG/loss.tsv",
        "reports/conditions.csv",
        "reports/baseline/report.md",
    ] {
        assert_eq!(read(&a.path().join(rel)), read(&b.path().join(rel)), "{rel}");
    }
}

#[test]
fn seed_changes_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_gen(&small(&[]), &Layout::new(a.path())).unwrap();
    run_gen(&small(&[("seed", "99")]), &Layout::new(b.path())).unwrap();
    let rel = "tasks/Fruits_MeshBG/descriptions.jsonl";
    assert_ne!(read(&a.path().join(rel)), read(&b.path().join(rel)));
}

#[test]
fn zero_learning_rate_leaves_the_encoder_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let layout = Layout::new(dir.path());
    let cfg = small(&[("train.learning_rate", "0"), ("train.weight_decay", "0")]);
    let out = run_all(&cfg, &layout).unwrap();
    let (base, _) = out.baseline.as_ref().unwrap();
    for (t, b) in out.reports.iter().zip(base) {
        assert_eq!(t.auroc, b.auroc, "{}", t.task_id);
    }
    let trained = Checkpoint::read(&layout.checkpoint("Fruits_WhiteBG", Variant::Trained)).unwrap();
    let init = Checkpoint::read(&layout.checkpoint("Fruits_WhiteBG", Variant::Baseline)).unwrap();
    assert_eq!(trained.params, init.params);
    let curve = read_loss_curve(&layout.loss_curve("Fruits_WhiteBG")).unwrap();
    assert_eq!(curve.len(), 3);
    assert!(curve.iter().all(|l| l.is_finite() && *l > 0.0));
}

#[test]
fn missing_stage_inputs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_score(&small(&[]), &Layout::new(dir.path())).unwrap_err();
    assert!(!err.to_string().is_empty());
}
