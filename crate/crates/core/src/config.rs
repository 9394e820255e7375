//! Flat `key = value` pipeline configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::description::RenderConfig;
use crate::encoder::{DEFAULT_DIM, DEFAULT_DROPOUT};
use crate::error::{Error, Result};
use crate::negsynth::NegativeConfig;
use crate::scene::{CaptureCondition, ScenarioId, SplitCounts};
use crate::scorer::DEFAULT_K;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Rendered descriptions.
    Builtin,
    /// Descriptions read from a line-delimited file keyed by sample id.
    DescriptionFile,
    /// Precomputed embeddings; no training.
    EmbeddingFile,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Builtin => "builtin-renderer",
            Backend::DescriptionFile => "description-file",
            Backend::EmbeddingFile => "embedding-file",
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "builtin" | "builtin-renderer" => Ok(Backend::Builtin),
            "description-file" => Ok(Backend::DescriptionFile),
            "embedding-file" => Ok(Backend::EmbeddingFile),
            _ => Err(Error::Config(format!("unknown backend `{s}`"))),
        }
    }
}

/// Partial split-count overrides; unset fields keep the per-scenario default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CountOverrides {
    pub train_normal: Option<usize>,
    pub test_normal: Option<usize>,
    pub single_a: Option<usize>,
    pub single_b: Option<usize>,
    pub dual: Option<usize>,
}

/// Partial render overrides; unset fields keep the per-condition default.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RenderOverrides {
    pub paraphrase_temperature: Option<f64>,
    pub omission_prob: Option<f64>,
    pub corruption_prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub master_seed: u64,
    pub scenarios: Vec<ScenarioId>,
    pub conditions: Vec<CaptureCondition>,
    pub counts: CountOverrides,
    pub render: RenderOverrides,
    pub negatives: NegativeConfig,
    /// The seed field is ignored; per-task training seeds come from the master seed.
    pub train: TrainConfig,
    pub dim: usize,
    pub dropout: f64,
    pub k: usize,
    pub backend: Backend,
    pub description_file: Option<PathBuf>,
    pub embedding_file: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            master_seed: 0,
            scenarios: ScenarioId::ALL.to_vec(),
            conditions: CaptureCondition::ALL.to_vec(),
            counts: CountOverrides::default(),
            render: RenderOverrides::default(),
            negatives: NegativeConfig::default(),
            train: TrainConfig::default(),
            dim: DEFAULT_DIM,
            dropout: DEFAULT_DROPOUT,
            k: DEFAULT_K,
            backend: Backend::Builtin,
            description_file: None,
            embedding_file: None,
            jobs: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn list<T: FromStr<Err = Error> + Copy + Ord>(value: &str, all: &[T]) -> Result<Vec<T>> {
    if value.eq_ignore_ascii_case("all") {
        return Ok(all.to_vec());
    }
    let mut out = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(T::from_str)
        .collect::<Result<Vec<T>>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::Config("empty selector".into()));
    }
    Ok(out)
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.master_seed = parse(key, value)?,
            "scenario" => self.scenarios = list(value, &ScenarioId::ALL)?,
            "condition" => self.conditions = list(value, &CaptureCondition::ALL)?,
            "k" => self.k = parse(key, value)?,
            "backend" => self.backend = value.parse()?,
            "description_file" => self.description_file = Some(PathBuf::from(value)),
            "embedding_file" => self.embedding_file = Some(PathBuf::from(value)),
            "jobs" => self.jobs = Some(parse(key, value)?),
            "dim" => self.dim = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "counts.train_normal" => self.counts.train_normal = Some(parse(key, value)?),
            "counts.test_normal" => self.counts.test_normal = Some(parse(key, value)?),
            "counts.single_a" => self.counts.single_a = Some(parse(key, value)?),
            "counts.single_b" => self.counts.single_b = Some(parse(key, value)?),
            "counts.dual" => self.counts.dual = Some(parse(key, value)?),
            "render.paraphrase_temperature" => self.render.paraphrase_temperature = Some(parse(key, value)?),
            "render.omission_prob" => self.render.omission_prob = Some(parse(key, value)?),
            "render.corruption_prob" => self.render.corruption_prob = Some(parse(key, value)?),
            "negatives.two_slot_prob" => self.negatives.two_slot_prob = parse(key, value)?,
            "negatives.count_window" => self.negatives.count_window = parse(key, value)?,
            "train.epochs" => self.train.epochs = parse(key, value)?,
            "train.batch_size" => self.train.batch_size = parse(key, value)?,
            "train.temperature" => self.train.temperature = parse(key, value)?,
            "train.learning_rate" => self.train.learning_rate = parse(key, value)?,
            "train.weight_decay" => self.train.weight_decay = parse(key, value)?,
            "train.clip_norm" => self.train.clip_norm = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.dim < 2 {
            return Err(Error::Config("dim must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if !(0.0..=1.0).contains(&self.negatives.two_slot_prob) {
            return Err(Error::Config("negatives.two_slot_prob must be in [0, 1]".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        match self.backend {
            Backend::DescriptionFile if self.description_file.is_none() => {
                return Err(Error::Config("backend description-file needs description_file".into()))
            }
            Backend::EmbeddingFile if self.embedding_file.is_none() => {
                return Err(Error::Config("backend embedding-file needs embedding_file".into()))
            }
            _ => {}
        }
        self.train.validate()?;
        for &c in &self.conditions {
            self.render_config(c).validate()?;
        }
        for &s in &self.scenarios {
            self.split_counts(s).validate()?;
        }
        Ok(())
    }

    pub fn split_counts(&self, id: ScenarioId) -> SplitCounts {
        let d = SplitCounts::default_for(id);
        let o = &self.counts;
        SplitCounts::new(
            o.train_normal.unwrap_or(d.train_normal),
            o.test_normal.unwrap_or(d.test_normal),
            o.single_a.unwrap_or(d.single_a),
            o.single_b.unwrap_or(d.single_b),
            o.dual.unwrap_or(d.dual),
        )
    }

    pub fn render_config(&self, condition: CaptureCondition) -> RenderConfig {
        let d = RenderConfig::for_condition(condition);
        let o = &self.render;
        RenderConfig {
            paraphrase_temperature: o.paraphrase_temperature.unwrap_or(d.paraphrase_temperature),
            omission_prob: o.omission_prob.unwrap_or(d.omission_prob),
            corruption_prob: o.corruption_prob.unwrap_or(d.corruption_prob),
        }
    }

    pub fn tasks(&self) -> Vec<(ScenarioId, CaptureCondition)> {
        self.scenarios
            .iter()
            .flat_map(|&s| self.conditions.iter().map(move |&c| (s, c)))
            .collect()
    }

    /// Effective configuration in the same format `parse` reads; written next
    /// to the outputs so a run can be repeated.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<&str>| v.join(",");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("seed", self.master_seed.to_string());
        kv("scenario", join(self.scenarios.iter().map(|s| s.name()).collect()));
        kv("condition", join(self.conditions.iter().map(|c| c.name()).collect()));
        kv("k", self.k.to_string());
        kv("backend", self.backend.name().to_string());
        if let Some(p) = &self.description_file {
            kv("description_file", p.display().to_string());
        }
        if let Some(p) = &self.embedding_file {
            kv("embedding_file", p.display().to_string());
        }
        kv("dim", self.dim.to_string());
        kv("dropout", self.dropout.to_string());
        let c = &self.counts;
        for (k, v) in [
            ("counts.train_normal", c.train_normal),
            ("counts.test_normal", c.test_normal),
            ("counts.single_a", c.single_a),
            ("counts.single_b", c.single_b),
            ("counts.dual", c.dual),
        ] {
            if let Some(v) = v {
                kv(k, v.to_string());
            }
        }
        let r = &self.render;
        for (k, v) in [
            ("render.paraphrase_temperature", r.paraphrase_temperature),
            ("render.omission_prob", r.omission_prob),
            ("render.corruption_prob", r.corruption_prob),
        ] {
            if let Some(v) = v {
                kv(k, v.to_string());
            }
        }
        kv("negatives.two_slot_prob", self.negatives.two_slot_prob.to_string());
        kv("negatives.count_window", self.negatives.count_window.to_string());
        let t = &self.train;
        kv("train.epochs", t.epochs.to_string());
        kv("train.batch_size", t.batch_size.to_string());
        kv("train.temperature", t.temperature.to_string());
        kv("train.learning_rate", t.learning_rate.to_string());
        kv("train.weight_decay", t.weight_decay.to_string());
        kv("train.clip_norm", t.clip_norm.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_full_grid() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.tasks().len(), 50);
        let total: usize = cfg.tasks().iter().map(|&(s, _)| cfg.split_counts(s).total()).sum();
        assert_eq!(total, 10_395);
        assert_eq!((cfg.train.epochs, cfg.train.batch_size, cfg.train.temperature), (20, 16, 0.5));
        assert_eq!(cfg.train.clip_norm, 1.0);
        assert_eq!(cfg.k, 5);
    }

    #[test]
    fn parse_and_reject() {
        let cfg = PipelineConfig::parse("# run\nseed = 9\nscenario = Fruits\ncondition=whitebg\ncounts.dual = 2 # few\n").unwrap();
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.tasks(), vec![(ScenarioId::Fruits, CaptureCondition::WhiteBG)]);
        assert_eq!(cfg.split_counts(ScenarioId::Fruits).dual, 2);
        assert!(PipelineConfig::parse("colour = red").unwrap_err().to_string().contains("unknown key"));
        assert!(PipelineConfig::parse("k = 0").is_err());
        assert!(PipelineConfig::parse("k = five").is_err());
        assert!(PipelineConfig::parse("scenario = Trains").is_err());
        assert!(PipelineConfig::parse("backend = embedding-file").is_err());
        assert!(PipelineConfig::parse("render.omission_prob = 2").is_err());
        assert!(PipelineConfig::parse("just words").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.set("scenario", "Balls,Sticks").unwrap();
        cfg.set("render.omission_prob", "0.25").unwrap();
        cfg.set("train.learning_rate", "0.001").unwrap();
        let back = PipelineConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.scenarios, [ScenarioId::Sticks, ScenarioId::Balls]);
    }
}
