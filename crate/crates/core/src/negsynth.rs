//! Contradictory negatives by replacement-only slot edits.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::description::grammar::{number_value, SlotRole};
use crate::description::{grammar_for, AttributeRecord, DescriptionText, Grammar, TextSource};
use crate::error::{Error, Result};
use crate::scene::{AttributeAspect, ScenarioSpec};
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContradictionEdit {
    pub slot_name: String,
    pub old_value: String,
    pub new_value: String,
    pub aspect: AttributeAspect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeConfig {
    /// Probability of contradicting two slots instead of one.
    pub two_slot_prob: f64,
    /// Count edits stay within this distance of the true count.
    pub count_window: usize,
}

impl Default for NegativeConfig {
    fn default() -> Self {
        NegativeConfig { two_slot_prob: 0.3, count_window: 2 }
    }
}

/// One line of a negative-pair file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativeRecord {
    pub task_id: String,
    pub sample_id: String,
    pub pos_text: String,
    pub neg_text: String,
    pub edits: Vec<ContradictionEdit>,
}

/// Values that contradict `value` in `slot`: the slot vocabulary minus the
/// value and its equivalents; numeric slots stay within `window`.
pub fn contradiction_pool(grammar: &Grammar, slot: &str, value: &str, window: usize) -> Vec<&'static str> {
    let Some(kind) = grammar.kind(slot) else {
        return Vec::new();
    };
    if kind.role == SlotRole::Nuisance {
        return Vec::new();
    }
    let near = |v: &str| match (kind.numeric, number_value(v), number_value(value)) {
        (true, Some(a), Some(b)) => a.abs_diff(b) <= window,
        (true, _, _) => false,
        (false, _, _) => true,
    };
    kind.values
        .iter()
        .copied()
        .filter(|v| !kind.equivalent(v, value) && near(v))
        .collect()
}

/// Draws one negative for a positive text.
pub fn synthesize_negative(pos: &str, spec: &ScenarioSpec, rng: &mut Rng) -> Result<(DescriptionText, Vec<ContradictionEdit>)> {
    synthesize_negative_with(pos, spec, &NegativeConfig::default(), rng)
}

pub fn synthesize_negative_with(
    pos: &str,
    spec: &ScenarioSpec,
    cfg: &NegativeConfig,
    rng: &mut Rng,
) -> Result<(DescriptionText, Vec<ContradictionEdit>)> {
    let grammar = grammar_for(spec.id);
    let mut record = grammar.parse(pos)?;
    let editable: Vec<(usize, Vec<&'static str>)> = record
        .slots
        .iter()
        .enumerate()
        .map(|(i, (name, value))| (i, contradiction_pool(grammar, name, value, cfg.count_window)))
        .filter(|(_, pool)| !pool.is_empty())
        .collect();
    if editable.is_empty() {
        return Err(Error::EmptyPool);
    }
    let want = if rng.gen::<f64>() < cfg.two_slot_prob { 2 } else { 1 };
    let mut chosen: Vec<&(usize, Vec<&str>)> = editable.choose_multiple(rng, want.min(editable.len())).collect();
    chosen.sort_by_key(|(i, _)| *i);

    let mut edits = Vec::with_capacity(chosen.len());
    for (i, pool) in chosen {
        let new_value = *pool.choose(rng).expect("non-empty pool");
        let (name, old) = &record.slots[*i];
        let aspect = grammar
            .kind(name)
            .and_then(|k| k.aspect_for(new_value))
            .expect("editable slots are rule slots");
        edits.push(ContradictionEdit {
            slot_name: name.clone(),
            old_value: old.clone(),
            new_value: new_value.to_string(),
            aspect,
        });
        record.slots[*i].1 = new_value.to_string();
    }
    let text = grammar.render_record(&record)?;
    Ok((
        DescriptionText {
            text,
            source: TextSource::Rendered,
            scene_ref: None,
        },
        edits,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// (a) both texts realize the same clause templates and variants.
    pub skeleton_identical: bool,
    /// (b) no slot was inserted or deleted.
    pub slot_count_identical: bool,
    /// (c) at least one slot differs and every difference is a contradiction.
    pub contradiction: bool,
    /// (d) token counts differ by at most 10 %.
    pub token_delta_ok: bool,
    pub token_delta: f64,
    pub differing_slots: Vec<String>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.skeleton_identical && self.slot_count_identical && self.contradiction && self.token_delta_ok
    }
}

pub const MAX_TOKEN_DELTA: f64 = 0.10;

/// Checks a (positive, negative) pair against the negative constraints.
/// Failures are reported, never raised.
pub fn validate_negative(pos: &str, neg: &str, spec: &ScenarioSpec) -> ValidationReport {
    let grammar = grammar_for(spec.id);
    let count = |t: &str| t.split_whitespace().count();
    let (np, nn) = (count(pos), count(neg));
    let token_delta = if np == 0 { f64::INFINITY } else { (nn as f64 - np as f64).abs() / np as f64 };
    let mut report = ValidationReport {
        skeleton_identical: false,
        slot_count_identical: false,
        contradiction: false,
        token_delta_ok: token_delta <= MAX_TOKEN_DELTA,
        token_delta,
        differing_slots: Vec::new(),
        notes: Vec::new(),
    };
    let parsed = |t: &str, which: &str, notes: &mut Vec<String>| match grammar.parse(t) {
        Ok(r) => Some(r),
        Err(e) => {
            notes.push(format!("{which} does not parse: {e}"));
            None
        }
    };
    let (Some(p), Some(n)) = (parsed(pos, "positive", &mut report.notes), parsed(neg, "negative", &mut report.notes))
    else {
        return report;
    };
    report.skeleton_identical = p.skeleton == n.skeleton;
    report.slot_count_identical = p.slots.len() == n.slots.len();
    if report.skeleton_identical && report.slot_count_identical {
        report.contradiction = contradicts(grammar, &p, &n, &mut report);
    }
    report
}

fn contradicts(grammar: &Grammar, p: &AttributeRecord, n: &AttributeRecord, report: &mut ValidationReport) -> bool {
    let mut genuine = true;
    for ((name, old), (_, new)) in p.slots.iter().zip(&n.slots) {
        if old == new {
            continue;
        }
        report.differing_slots.push(name.clone());
        // the pool is window-free here: a distant count is still a contradiction
        if !contradiction_pool(grammar, name, old, usize::MAX).contains(&new.as_str()) {
            report.notes.push(format!("{name}: {old} -> {new} is not a contradiction"));
            genuine = false;
        }
    }
    if report.differing_slots.is_empty() {
        report.notes.push("no slot differs".into());
    }
    genuine && !report.differing_slots.is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::description::{render, RenderConfig};
    use crate::scene::{sample_normal, ScenarioId};
    use crate::seed;

    const FRUITS: &str = "There are three oranges and two kiwis. The total number of items is five.";

    #[test]
    fn pools() {
        let g = grammar_for(ScenarioId::Fruits);
        assert_eq!(contradiction_pool(g, "item1_count", "three", 2), ["one", "two", "four", "five"]);
        assert_eq!(contradiction_pool(g, "item1_count", "one", 2), ["two", "three"]);
        let types = contradiction_pool(g, "item2_type", "kiwi", 2);
        assert!(!types.contains(&"kiwi") && !types.contains(&"kiwifruit"));
        assert!(types.contains(&"orange"));
        let tools = grammar_for(ScenarioId::Tools);
        assert!(contradiction_pool(tools, "left_g1_finish", "silver", 2).is_empty());
    }

    #[test]
    fn fruits_negative_is_valid_and_deterministic() {
        let spec = ScenarioId::Fruits.spec();
        let (a, edits) = synthesize_negative(FRUITS, spec, &mut seed::rng(7)).unwrap();
        let (b, _) = synthesize_negative(FRUITS, spec, &mut seed::rng(7)).unwrap();
        assert_eq!(a, b);
        assert!(!edits.is_empty() && edits.len() <= 2);
        for e in &edits {
            assert_ne!(e.old_value, e.new_value);
            assert!(matches!(e.aspect, AttributeAspect::Quantity | AttributeAspect::Type));
        }
        let report = validate_negative(FRUITS, &a.text, spec);
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.differing_slots.len(), edits.len());
    }

    #[test]
    fn single_editable_slot_is_forced() {
        let spec = ScenarioId::Ropes.spec();
        let g = grammar_for(ScenarioId::Ropes);
        // only the rope clause: color is the one rule slot, texture is nuisance
        let pos = "There is one red braided rope next to a reference stick.";
        assert_eq!(g.parse(pos).unwrap().slots.len(), 2);
        for s in 0..20 {
            let (_, edits) = synthesize_negative(pos, spec, &mut seed::rng(s)).unwrap();
            assert_eq!(edits.len(), 1);
            assert_eq!(edits[0].slot_name, "rope_color");
        }
    }

    #[test]
    fn failing_checks() {
        let spec = ScenarioId::Fruits.spec();
        let same = validate_negative(FRUITS, FRUITS, spec);
        assert!(!same.contradiction && same.skeleton_identical && !same.passed());

        let appended = format!("{FRUITS} The total number of items is five.");
        let r = validate_negative(FRUITS, &appended, spec);
        assert!(!r.skeleton_identical && !r.passed());

        let synonym = "There are three oranges and two kiwifruits. The total number of items is five.";
        let r = validate_negative(FRUITS, synonym, spec);
        assert!(r.skeleton_identical && !r.contradiction);

        let r = validate_negative(FRUITS, "gibberish", spec);
        assert!(!r.passed() && !r.notes.is_empty());
    }

    #[test]
    fn every_scenario_yields_valid_negatives() {
        for id in ScenarioId::ALL {
            let spec = id.spec();
            let mut rng = seed::rng(1);
            let scene = sample_normal(spec, &mut rng);
            let pos = render(&scene, &RenderConfig::canonical(), &mut rng).unwrap().text;
            for _ in 0..50 {
                let (neg, _) = synthesize_negative(&pos, spec, &mut rng).unwrap();
                let report = validate_negative(&pos, &neg.text, spec);
                assert!(report.passed(), "{id}: {pos} / {} / {report:?}", neg.text);
            }
        }
    }
}
