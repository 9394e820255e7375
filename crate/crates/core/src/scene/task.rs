use std::fmt;

use serde::{Deserialize, Serialize};

use super::{sample_anomaly, sample_normal, CaptureCondition, Scene, ScenarioId, ScenarioSpec, ViolationLabel};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Per-task split sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train_normal: usize,
    pub test_normal: usize,
    pub test_anomaly: usize,
    pub single_a: usize,
    pub single_b: usize,
    pub dual: usize,
}

impl SplitCounts {
    pub fn new(train_normal: usize, test_normal: usize, single_a: usize, single_b: usize, dual: usize) -> Self {
        SplitCounts {
            train_normal,
            test_normal,
            test_anomaly: single_a + single_b + dual,
            single_a,
            single_b,
            dual,
        }
    }

    pub fn zero() -> Self {
        SplitCounts::new(0, 0, 0, 0, 0)
    }

    /// Default per-scenario split sizes (identical for every capture
    /// condition).
    pub fn default_for(id: ScenarioId) -> Self {
        let (a, b, d) = match id {
            ScenarioId::Sticks => (48, 48, 8),
            ScenarioId::Fruits => (48, 44, 8),
            ScenarioId::Tools => (52, 50, 8),
            ScenarioId::Cookies => (50, 50, 6),
            ScenarioId::Tapes => (50, 50, 10),
            ScenarioId::Stationery => (50, 50, 10),
            ScenarioId::Ropes => (48, 50, 12),
            ScenarioId::Blocks => (52, 50, 8),
            ScenarioId::Dishes => (48, 48, 15),
            ScenarioId::Balls => (48, 48, 12),
        };
        SplitCounts::new(50, 50, a, b, d)
    }

    pub fn validate(&self) -> Result<()> {
        let sum = self.single_a + self.single_b + self.dual;
        if sum != self.test_anomaly {
            return Err(Error::InconsistentCounts(format!(
                "single-A {} + single-B {} + dual {} = {sum}, but test anomaly total is {}",
                self.single_a, self.single_b, self.dual, self.test_anomaly
            )));
        }
        Ok(())
    }

    pub fn count(&self, label: ViolationLabel) -> usize {
        match label {
            ViolationLabel::Normal => self.test_normal,
            ViolationLabel::SingleA => self.single_a,
            ViolationLabel::SingleB => self.single_b,
            ViolationLabel::Dual => self.dual,
        }
    }

    pub fn total(&self) -> usize {
        self.train_normal + self.test_normal + self.test_anomaly
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledScene {
    pub sample_id: String,
    pub split: Split,
    pub label: ViolationLabel,
    pub scene: Scene,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub task_id: String,
    pub scenario: ScenarioId,
    pub condition: CaptureCondition,
    pub train: Vec<LabelledScene>,
    /// Test normals first, then single-A, single-B and dual anomalies.
    pub test: Vec<LabelledScene>,
}

impl Task {
    pub fn id_for(scenario: ScenarioId, condition: CaptureCondition) -> String {
        format!("{scenario}_{condition}")
    }

    pub fn samples(&self) -> impl Iterator<Item = &LabelledScene> {
        self.train.iter().chain(self.test.iter())
    }

    pub fn test_anomalies(&self) -> usize {
        self.test.iter().filter(|s| s.label.is_anomaly()).count()
    }
}

/// Generates one one-class task. Every sample draws from its own derived
/// seed, so the result depends only on `(spec, condition, counts, seed)`.
pub fn build_task(spec: &ScenarioSpec, condition: CaptureCondition, counts: SplitCounts, seed: u64) -> Result<Task> {
    counts.validate()?;
    let task_id = Task::id_for(spec.id, condition);
    let make = |split: Split, index: usize, label: ViolationLabel| -> Result<LabelledScene> {
        let mut rng = seed::rng(seed::derive_index(seed, &format!("{split}/{label}"), index));
        let scene = if label == ViolationLabel::Normal {
            sample_normal(spec, &mut rng)
        } else {
            sample_anomaly(spec, label, &mut rng)?
        };
        Ok(LabelledScene {
            sample_id: String::new(),
            split,
            label,
            scene: scene.with_condition(condition),
        })
    };

    let mut train = (0..counts.train_normal)
        .map(|i| make(Split::Train, i, ViolationLabel::Normal))
        .collect::<Result<Vec<_>>>()?;
    let mut test = Vec::with_capacity(counts.test_normal + counts.test_anomaly);
    for label in [ViolationLabel::Normal, ViolationLabel::SingleA, ViolationLabel::SingleB, ViolationLabel::Dual] {
        for i in 0..counts.count(label) {
            test.push(make(Split::Test, i, label)?);
        }
    }
    for (i, s) in train.iter_mut().enumerate() {
        s.sample_id = format!("{task_id}/train/{i:04}");
    }
    for (i, s) in test.iter_mut().enumerate() {
        s.sample_id = format!("{task_id}/test/{i:04}");
    }
    Ok(Task {
        task_id,
        scenario: spec.id,
        condition,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::classify;

    #[test]
    fn sticks_default_counts() {
        let spec = ScenarioId::Sticks.spec();
        let task = build_task(spec, CaptureCondition::WhiteBG, SplitCounts::default_for(spec.id), 1).unwrap();
        assert_eq!(task.train.len(), 50);
        assert_eq!(task.test.iter().filter(|s| s.label == ViolationLabel::Normal).count(), 50);
        assert_eq!(task.test_anomalies(), 104);
        let by = |l| task.test.iter().filter(|s| s.label == l).count();
        assert_eq!(
            (by(ViolationLabel::SingleA), by(ViolationLabel::SingleB), by(ViolationLabel::Dual)),
            (48, 48, 8)
        );
        for s in task.samples() {
            assert_eq!(classify(&s.scene, spec).unwrap(), s.label);
        }
    }

    #[test]
    fn dishes_default_counts() {
        let c = SplitCounts::default_for(ScenarioId::Dishes);
        assert_eq!((c.test_anomaly, c.single_a, c.single_b, c.dual), (111, 48, 48, 15));
    }

    #[test]
    fn corpus_size() {
        let per_condition: usize = ScenarioId::ALL.iter().map(|&id| SplitCounts::default_for(id).total()).sum();
        assert_eq!(per_condition * 5, 10_395);
        let anomalies: usize = ScenarioId::ALL.iter().map(|&id| SplitCounts::default_for(id).test_anomaly).sum();
        assert_eq!(anomalies * 5, 5_395);
    }

    #[test]
    fn zero_counts_give_empty_task() {
        let task = build_task(ScenarioId::Balls.spec(), CaptureCondition::MeshBG, SplitCounts::zero(), 4).unwrap();
        assert!(task.train.is_empty() && task.test.is_empty());
    }

    #[test]
    fn inconsistent_counts_rejected() {
        let mut c = SplitCounts::default_for(ScenarioId::Fruits);
        c.test_anomaly += 1;
        assert!(matches!(
            build_task(ScenarioId::Fruits.spec(), CaptureCondition::WhiteBG, c, 0),
            Err(Error::InconsistentCounts(_))
        ));
    }

    #[test]
    fn reproducible() {
        let spec = ScenarioId::Ropes.spec();
        let c = SplitCounts::default_for(spec.id);
        let a = build_task(spec, CaptureCondition::BlurryCD, c, 42).unwrap();
        let b = build_task(spec, CaptureCondition::BlurryCD, c, 42).unwrap();
        assert_eq!(a, b);
        let other = build_task(spec, CaptureCondition::BlurryCD, c, 43).unwrap();
        assert_ne!(a, other);
    }
}
