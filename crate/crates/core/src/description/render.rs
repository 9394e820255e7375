use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::grammar::{AttributeRecord, ClauseRef, SlotRole, Skeleton};
use super::scenarios::{fills, grammar};
use super::{DescriptionText, TextSource};
use crate::error::{Error, Result};
use crate::scene::{check_rules, CaptureCondition, Scene};
use crate::seed::Rng;

/// Temperatures at or below this render the canonical variant of every
/// clause; above it each clause picks a variant uniformly.
pub const CANONICAL_TEMPERATURE: f64 = 0.01;

/// Decoding temperature used for positive texts.
pub const POSITIVE_TEMPERATURE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub paraphrase_temperature: f64,
    pub omission_prob: f64,
    pub corruption_prob: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig::canonical()
    }
}

impl RenderConfig {
    pub fn canonical() -> Self {
        RenderConfig {
            paraphrase_temperature: 0.0,
            omission_prob: 0.0,
            corruption_prob: 0.0,
        }
    }

    /// Default linguistic noise for a capture condition.
    pub fn for_condition(condition: CaptureCondition) -> Self {
        let (omission_prob, corruption_prob) = match condition {
            CaptureCondition::WhiteBG => (0.0, 0.0),
            CaptureCondition::CableBG | CaptureCondition::MeshBG => (0.0, 0.05),
            CaptureCondition::LowLightCD | CaptureCondition::BlurryCD => (0.15, 0.05),
        };
        RenderConfig {
            paraphrase_temperature: POSITIVE_TEMPERATURE,
            omission_prob,
            corruption_prob,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.paraphrase_temperature;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Config(format!("paraphrase_temperature must be finite and >= 0, got {t}")));
        }
        for (name, p) in [("omission_prob", self.omission_prob), ("corruption_prob", self.corruption_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn is_canonical(&self) -> bool {
        self.paraphrase_temperature <= CANONICAL_TEMPERATURE && self.omission_prob == 0.0 && self.corruption_prob == 0.0
    }
}

fn draw(rng: &mut Rng, p: f64) -> bool {
    p > 0.0 && rng.gen::<f64>() < p
}

/// Renders a scene and returns the record it was built from alongside.
pub fn render_record(scene: &Scene, cfg: &RenderConfig, rng: &mut Rng) -> Result<(AttributeRecord, String)> {
    cfg.validate()?;
    check_rules(scene, scene.scenario_id.spec())?;
    let g = grammar(scene.scenario_id);
    let mut sentences = Vec::new();
    let mut clauses = Vec::new();
    let mut slots = Vec::new();
    for mut fill in fills(scene)? {
        let tmpl = g
            .clause(&fill.id)
            .ok_or_else(|| Error::Render(format!("no clause `{}`", fill.id)))?;
        if tmpl.optional && draw(rng, cfg.omission_prob) {
            continue;
        }
        let variant = if cfg.paraphrase_temperature > CANONICAL_TEMPERATURE {
            rng.gen_range(0..tmpl.variants.len())
        } else {
            0
        };
        for (name, value) in fill.slots.iter_mut() {
            let kind = g.kind(name).ok_or_else(|| Error::Render(format!("slot `{name}` is not declared")))?;
            if kind.role == SlotRole::Nuisance && draw(rng, cfg.corruption_prob) {
                let others: Vec<&str> = kind.values.iter().copied().filter(|v| *v != value.as_str()).collect();
                if let Some(v) = others.choose(rng) {
                    *value = v.to_string();
                }
            }
        }
        sentences.push(g.render_clause(&fill, variant)?);
        for name in &tmpl.slots {
            let v = fill
                .slots
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::Render(format!("missing value for slot `{name}`")))?;
            slots.push(v.clone());
        }
        clauses.push(ClauseRef { id: fill.id, variant });
    }
    let record = AttributeRecord {
        skeleton: Skeleton { scenario: scene.scenario_id, clauses },
        slots,
    };
    Ok((record, sentences.join(" ")))
}

/// Describes a scene in its scenario's template grammar.
pub fn render(scene: &Scene, cfg: &RenderConfig, rng: &mut Rng) -> Result<DescriptionText> {
    let (_, text) = render_record(scene, cfg, rng)?;
    Ok(DescriptionText {
        text,
        source: TextSource::Rendered,
        scene_ref: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::description::parse;
    use crate::scene::{sample_anomaly, sample_normal, ScenarioId, ViolationLabel};
    use crate::seed;

    fn canonical(scene: &Scene) -> String {
        render(scene, &RenderConfig::canonical(), &mut seed::rng(0)).unwrap().text
    }

    #[test]
    fn fruits_canonical_text() {
        let spec = ScenarioId::Fruits.spec();
        let scene = sample_normal(spec, &mut seed::rng(3));
        assert_eq!(
            canonical(&scene),
            "There are three oranges and two kiwis. The total number of items is five."
        );
    }

    #[test]
    fn sticks_canonical_text() {
        let scene = sample_normal(ScenarioId::Sticks.spec(), &mut seed::rng(3));
        assert_eq!(
            canonical(&scene),
            "There are three sticks in the image: two blue rectangular sticks and one red rectangular stick. \
             The blue sticks are long and the red sticks are short."
        );
    }

    #[test]
    fn normal_texts_do_not_depend_on_free_attributes() {
        for id in ScenarioId::ALL {
            let spec = id.spec();
            let a = sample_normal(spec, &mut seed::rng(1));
            let b = sample_normal(spec, &mut seed::rng(2));
            if a.label() == b.label() {
                assert_eq!(canonical(&a), canonical(&b), "{id}");
            }
        }
    }

    #[test]
    fn canonical_round_trip_all_scenarios() {
        for id in ScenarioId::ALL {
            let spec = id.spec();
            let mut rng = seed::rng(11);
            for i in 0..200 {
                let scene = match i % 4 {
                    0 => sample_normal(spec, &mut rng),
                    k => sample_anomaly(spec, ViolationLabel::ANOMALIES[k - 1], &mut rng).unwrap(),
                };
                let (record, text) = render_record(&scene, &RenderConfig::canonical(), &mut rng).unwrap();
                let parsed = parse(&text, spec).unwrap();
                assert_eq!(parsed, record, "{text}");
                assert_eq!(crate::description::grammar_for(id).render_record(&parsed).unwrap(), text);
            }
        }
    }

    #[test]
    fn omission_frequency() {
        let scene = sample_normal(ScenarioId::Sticks.spec(), &mut seed::rng(0));
        let cfg = RenderConfig { omission_prob: 0.3, ..RenderConfig::for_condition(CaptureCondition::LowLightCD) };
        let mut rng = seed::rng(5);
        let missing = (0..1000)
            .filter(|_| !render(&scene, &cfg, &mut rng).unwrap().text.contains("are long"))
            .count();
        assert!((missing as f64 / 1000.0 - 0.3).abs() <= 0.05, "{missing}");
    }

    #[test]
    fn corruption_is_parsed_back() {
        let scene = sample_normal(ScenarioId::Tools.spec(), &mut seed::rng(0));
        let cfg = RenderConfig { corruption_prob: 1.0, ..RenderConfig::canonical() };
        let (record, text) = render_record(&scene, &cfg, &mut seed::rng(9)).unwrap();
        assert!(!text.contains("silver"));
        let parsed = parse(&text, ScenarioId::Tools.spec()).unwrap();
        assert_eq!(parsed, record);
        assert_ne!(parsed.get("left_g1_finish"), Some("silver"));
    }

    #[test]
    fn paraphrases_parse() {
        let spec = ScenarioId::Balls.spec();
        let cfg = RenderConfig { paraphrase_temperature: 0.9, ..RenderConfig::canonical() };
        let mut rng = seed::rng(21);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..100 {
            let scene = sample_anomaly(spec, ViolationLabel::Dual, &mut rng).unwrap();
            let (record, text) = render_record(&scene, &cfg, &mut rng).unwrap();
            assert_eq!(parse(&text, spec).unwrap(), record);
            seen.insert(text);
        }
        assert!(seen.len() > 10);
    }

    #[test]
    fn invalid_config_rejected() {
        let scene = sample_normal(ScenarioId::Fruits.spec(), &mut seed::rng(0));
        let cfg = RenderConfig { omission_prob: 1.5, ..RenderConfig::canonical() };
        assert!(matches!(render(&scene, &cfg, &mut seed::rng(0)), Err(Error::Config(_))));
    }
}
