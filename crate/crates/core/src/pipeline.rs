//! gen / train / score / eval over the selected tasks.
//!
//! Output layout under the run directory:
//!
//! ```text
//! config.txt
//! tasks/<task>/scenes.jsonl descriptions.jsonl negatives.jsonl
//! tasks/<task>/checkpoint.bin baseline.bin loss.tsv
//! tasks/<task>/scores.jsonl baseline_scores.jsonl
//! reports/{task_reports.jsonl,conditions.csv,sensitivity.csv,report.md}
//! reports/baseline/...   same files for the untrained encoder
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::{Backend, PipelineConfig};
use crate::description::{render, DescriptionRecord, ExternalDescriber, FileBackend};
use crate::encoder::{EncoderParams, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{aggregate, emit_report, task_report, AggregateReport, GridSubset, ReportFormat, TaskReport};
use crate::io::{read_jsonl, write_bytes, write_jsonl};
use crate::negsynth::{synthesize_negative_with, NegativeRecord};
use crate::par::{self, Execution};
use crate::scene::{build_task, CaptureCondition, ScenarioId, Scene, Split, Task, ViolationLabel};
use crate::scorer::{build_library, score, score_split, ReferenceLibrary, ScoreRecord};
use crate::store::{encode_batch_precomputed, EmbeddingStore};
use crate::trainer::{fit, write_loss_curve, TokenPair};
use crate::seed;

/// One line of a scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub task_id: String,
    pub sample_id: String,
    pub split: Split,
    pub label: ViolationLabel,
    pub scene: Scene,
}

/// Which encoder produced a set of scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Trained,
    /// The encoder at its random initialization, never updated.
    Baseline,
}

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn task_dir(&self, task_id: &str) -> PathBuf {
        self.root.join("tasks").join(task_id)
    }

    pub fn scenes(&self, task_id: &str) -> PathBuf {
        self.task_dir(task_id).join("scenes.jsonl")
    }

    pub fn descriptions(&self, task_id: &str) -> PathBuf {
        self.task_dir(task_id).join("descriptions.jsonl")
    }

    pub fn negatives(&self, task_id: &str) -> PathBuf {
        self.task_dir(task_id).join("negatives.jsonl")
    }

    pub fn loss_curve(&self, task_id: &str) -> PathBuf {
        self.task_dir(task_id).join("loss.tsv")
    }

    pub fn checkpoint(&self, task_id: &str, v: Variant) -> PathBuf {
        self.task_dir(task_id).join(match v {
            Variant::Trained => "checkpoint.bin",
            Variant::Baseline => "baseline.bin",
        })
    }

    pub fn scores(&self, task_id: &str, v: Variant) -> PathBuf {
        self.task_dir(task_id).join(match v {
            Variant::Trained => "scores.jsonl",
            Variant::Baseline => "baseline_scores.jsonl",
        })
    }

    pub fn reports(&self, v: Variant) -> PathBuf {
        match v {
            Variant::Trained => self.root.join("reports"),
            Variant::Baseline => self.root.join("reports").join("baseline"),
        }
    }
}

/// Seed of one pipeline stage of one task.
pub fn task_seed(master: u64, scenario: ScenarioId, condition: CaptureCondition, stage: &str) -> u64 {
    seed::derive(master, &[scenario.name(), condition.name(), stage])
}

fn task_id(s: ScenarioId, c: CaptureCondition) -> String {
    Task::id_for(s, c)
}

fn for_tasks<T: Send>(
    cfg: &PipelineConfig,
    f: impl Fn(ScenarioId, CaptureCondition) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let tasks = cfg.tasks();
    par::with_jobs(cfg.jobs, || par::try_map(Execution::Parallel, &tasks, |&(s, c)| f(s, c)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSummary {
    pub task_id: String,
    pub scenes: usize,
    pub negatives: usize,
    pub skipped_negatives: usize,
}

pub fn gen_task(cfg: &PipelineConfig, layout: &Layout, s: ScenarioId, c: CaptureCondition, external: Option<&FileBackend>) -> Result<GenSummary> {
    let spec = s.spec();
    let task = build_task(spec, c, cfg.split_counts(s), task_seed(cfg.master_seed, s, c, "scenes"))?;
    let id = task.task_id.clone();
    let samples: Vec<_> = task.samples().collect();

    let render_cfg = cfg.render_config(c);
    let describe_seed = task_seed(cfg.master_seed, s, c, "describe");
    let describer = external.map(|b| ExternalDescriber::for_scenario(b, s, 1));
    let texts = samples
        .iter()
        .map(|ls| match &describer {
            Some(d) => Ok(d.fetch(&ls.sample_id)?.text.text),
            None => {
                let mut rng = seed::rng(seed::derive(describe_seed, &[&ls.sample_id]));
                Ok(render(&ls.scene, &render_cfg, &mut rng)?.text)
            }
        })
        .collect::<Result<Vec<String>>>()?;

    let neg_seed = task_seed(cfg.master_seed, s, c, "negatives");
    let mut negatives = Vec::new();
    let mut skipped = 0;
    for (ls, text) in samples.iter().zip(&texts).filter(|(ls, _)| ls.split == Split::Train) {
        let mut rng = seed::rng(seed::derive(neg_seed, &[&ls.sample_id]));
        match synthesize_negative_with(text, spec, &cfg.negatives, &mut rng) {
            Ok((neg, edits)) => negatives.push(NegativeRecord {
                task_id: id.clone(),
                sample_id: ls.sample_id.clone(),
                pos_text: text.clone(),
                neg_text: neg.text,
                edits,
            }),
            Err(e) => {
                log::warn!("{}: no negative ({e})", ls.sample_id);
                skipped += 1;
            }
        }
    }

    let scenes: Vec<SceneRecord> = samples
        .iter()
        .map(|ls| SceneRecord {
            task_id: id.clone(),
            sample_id: ls.sample_id.clone(),
            split: ls.split,
            label: ls.label,
            scene: ls.scene.clone(),
        })
        .collect();
    let descriptions: Vec<DescriptionRecord> = samples
        .iter()
        .zip(texts)
        .map(|(ls, text)| DescriptionRecord {
            task_id: id.clone(),
            sample_id: ls.sample_id.clone(),
            split: ls.split,
            label: ls.label,
            text,
        })
        .collect();
    write_jsonl(&layout.scenes(&id), &scenes)?;
    write_jsonl(&layout.descriptions(&id), &descriptions)?;
    write_jsonl(&layout.negatives(&id), &negatives)?;
    Ok(GenSummary { task_id: id, scenes: scenes.len(), negatives: negatives.len(), skipped_negatives: skipped })
}

pub fn run_gen(cfg: &PipelineConfig, layout: &Layout) -> Result<Vec<GenSummary>> {
    cfg.validate()?;
    write_bytes(&layout.root().join("config.txt"), cfg.to_text().as_bytes())?;
    let external = match (cfg.backend, &cfg.description_file) {
        (Backend::DescriptionFile, Some(p)) => Some(FileBackend::load(p)?),
        _ => None,
    };
    for_tasks(cfg, |s, c| gen_task(cfg, layout, s, c, external.as_ref()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub task_id: String,
    pub pairs: usize,
    pub loss_curve: Vec<f64>,
}

/// Vocabulary and untrained parameters of a task.
pub fn initial_encoder(cfg: &PipelineConfig, s: ScenarioId, c: CaptureCondition, negatives: &[NegativeRecord]) -> Result<(Vocabulary, EncoderParams)> {
    let vocab = Vocabulary::build(negatives.iter().flat_map(|n| [n.pos_text.as_str(), n.neg_text.as_str()]));
    let params = EncoderParams::init(vocab.len(), cfg.dim, cfg.dropout, task_seed(cfg.master_seed, s, c, "init"))?;
    Ok((vocab, params))
}

pub fn train_task(cfg: &PipelineConfig, layout: &Layout, s: ScenarioId, c: CaptureCondition) -> Result<TrainSummary> {
    let id = task_id(s, c);
    let negatives: Vec<NegativeRecord> = read_jsonl(&layout.negatives(&id))?;
    if negatives.is_empty() {
        return Err(Error::Config(format!("{id}: no training pairs")));
    }
    let (vocab, init) = initial_encoder(cfg, s, c, &negatives)?;
    let pairs = negatives
        .iter()
        .map(|n| TokenPair::new(&n.pos_text, &n.neg_text, &vocab))
        .collect::<Result<Vec<_>>>()?;
    let mut train_cfg = cfg.train;
    train_cfg.seed = task_seed(cfg.master_seed, s, c, "train");
    Checkpoint::new(init.clone(), vocab.clone(), &train_cfg).write(&layout.checkpoint(&id, Variant::Baseline))?;
    let out = fit(&pairs, init, &train_cfg)?;
    write_loss_curve(&layout.loss_curve(&id), &out.loss_curve)?;
    Checkpoint::new(out.params, vocab, &train_cfg).write(&layout.checkpoint(&id, Variant::Trained))?;
    Ok(TrainSummary { task_id: id, pairs: pairs.len(), loss_curve: out.loss_curve })
}

pub fn run_train(cfg: &PipelineConfig, layout: &Layout) -> Result<Vec<TrainSummary>> {
    cfg.validate()?;
    if cfg.backend == Backend::EmbeddingFile {
        log::info!("embedding-file backend: nothing to train");
        return Ok(Vec::new());
    }
    for_tasks(cfg, |s, c| train_task(cfg, layout, s, c))
}

fn score_records(id: &str, test: &[&DescriptionRecord], scores: Vec<crate::scorer::NormalityScore>) -> Vec<ScoreRecord> {
    test.iter()
        .zip(scores)
        .map(|(d, sc)| ScoreRecord {
            task_id: id.to_string(),
            sample_id: d.sample_id.clone(),
            label: d.label,
            score: sc.score,
            mean_distance: sc.mean_distance,
            neighbor_ids: sc.neighbor_ids,
        })
        .collect()
}

pub fn score_task(cfg: &PipelineConfig, layout: &Layout, s: ScenarioId, c: CaptureCondition, store: Option<&EmbeddingStore>) -> Result<usize> {
    let id = task_id(s, c);
    let descriptions: Vec<DescriptionRecord> = read_jsonl(&layout.descriptions(&id))?;
    let (train, test): (Vec<&DescriptionRecord>, Vec<&DescriptionRecord>) =
        descriptions.iter().partition(|d| d.split == Split::Train);

    if let Some(store) = store {
        let ids = |v: &[&DescriptionRecord]| v.iter().map(|d| d.sample_id.clone()).collect::<Vec<_>>();
        let lib = ReferenceLibrary::new(ids(&train), encode_batch_precomputed(&ids(&train), store)?)?;
        let scores = encode_batch_precomputed(&ids(&test), store)?
            .iter()
            .map(|z| score(z, &lib, cfg.k))
            .collect::<Result<Vec<_>>>()?;
        write_jsonl(&layout.scores(&id, Variant::Trained), &score_records(&id, &test, scores))?;
        return Ok(test.len());
    }

    let train_texts: Vec<(String, String)> = train.iter().map(|d| (d.sample_id.clone(), d.text.clone())).collect();
    let test_texts: Vec<String> = test.iter().map(|d| d.text.clone()).collect();
    for v in [Variant::Trained, Variant::Baseline] {
        let ckpt = Checkpoint::read(&layout.checkpoint(&id, v))?;
        let lib = build_library(&train_texts, &ckpt.params, &ckpt.vocab, Execution::Sequential)?;
        let scores = score_split(&test_texts, &ckpt.params, &ckpt.vocab, &lib, cfg.k, Execution::Sequential)?;
        write_jsonl(&layout.scores(&id, v), &score_records(&id, &test, scores))?;
    }
    Ok(test.len())
}

pub fn run_score(cfg: &PipelineConfig, layout: &Layout) -> Result<usize> {
    cfg.validate()?;
    let store = match (cfg.backend, &cfg.embedding_file) {
        (Backend::EmbeddingFile, Some(p)) => Some(EmbeddingStore::read(p)?),
        _ => None,
    };
    Ok(for_tasks(cfg, |s, c| score_task(cfg, layout, s, c, store.as_ref()))?.iter().sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub reports: Vec<TaskReport>,
    pub aggregate: AggregateReport,
    pub baseline: Option<(Vec<TaskReport>, AggregateReport)>,
}

fn eval_variant(cfg: &PipelineConfig, layout: &Layout, v: Variant) -> Result<(Vec<TaskReport>, AggregateReport)> {
    let reports = for_tasks(cfg, |s, c| {
        let id = task_id(s, c);
        let records: Vec<ScoreRecord> = read_jsonl(&layout.scores(&id, v))?;
        let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
        let labels: Vec<ViolationLabel> = records.iter().map(|r| r.label).collect();
        task_report(&id, s, c, &scores, &labels)
    })?;
    let agg = aggregate(&reports, &GridSubset::new(&cfg.scenarios, &cfg.conditions))?;
    let dir = layout.reports(v);
    write_jsonl(&dir.join("task_reports.jsonl"), &reports)?;
    let csv = emit_report(&agg, ReportFormat::Csv);
    write_bytes(&dir.join("conditions.csv"), csv.conditions.as_bytes())?;
    write_bytes(&dir.join("sensitivity.csv"), csv.sensitivity.as_bytes())?;
    write_bytes(&dir.join("report.md"), emit_report(&agg, ReportFormat::Markdown).combined().as_bytes())?;
    Ok((reports, agg))
}

pub fn run_eval(cfg: &PipelineConfig, layout: &Layout) -> Result<EvalSummary> {
    cfg.validate()?;
    let (reports, aggregate) = eval_variant(cfg, layout, Variant::Trained)?;
    let baseline = match cfg.backend {
        Backend::EmbeddingFile => None,
        _ => Some(eval_variant(cfg, layout, Variant::Baseline)?),
    };
    Ok(EvalSummary { reports, aggregate, baseline })
}

/// Re-emits the markdown report from the stored per-task reports.
pub fn run_report(cfg: &PipelineConfig, layout: &Layout) -> Result<String> {
    let reports: Vec<TaskReport> = read_jsonl(&layout.reports(Variant::Trained).join("task_reports.jsonl"))?;
    let agg = aggregate(&reports, &GridSubset::new(&cfg.scenarios, &cfg.conditions))?;
    Ok(emit_report(&agg, ReportFormat::Markdown).combined())
}

pub fn run_all(cfg: &PipelineConfig, layout: &Layout) -> Result<EvalSummary> {
    run_gen(cfg, layout)?;
    run_train(cfg, layout)?;
    run_score(cfg, layout)?;
    run_eval(cfg, layout)
}
