//! Logic-focused scene descriptions: rendering, parsing, cleanup and the
//! external backend contract.

mod backend;
pub mod grammar;
mod normalize;
mod render;
mod scenarios;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scene::{ScenarioId, ScenarioSpec, Split, ViolationLabel};

pub use backend::{
    fetch_external, prompt_for, truncate_tokens, BackendRequest, BackendResponse, DecodeParams, DescriptionBackend,
    ExternalDescriber, Fetched, FileBackend, HttpBackend,
};
pub use grammar::{AttributeRecord, Grammar, Skeleton};
pub use normalize::{Normalizer, DEFAULT_MARKERS};
pub use render::{render, render_record, RenderConfig, CANONICAL_TEMPERATURE, POSITIVE_TEMPERATURE};
pub use scenarios::fills;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextSource {
    Rendered,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionText {
    pub text: String,
    pub source: TextSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_ref: Option<String>,
}

/// One line of a description file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionRecord {
    pub task_id: String,
    pub sample_id: String,
    pub split: Split,
    pub label: ViolationLabel,
    pub text: String,
}

pub fn grammar_for(id: ScenarioId) -> &'static Grammar {
    scenarios::grammar(id)
}

/// Parses a description back into its slot record.
pub fn parse(text: &str, spec: &ScenarioSpec) -> Result<AttributeRecord> {
    grammar_for(spec.id).parse(text)
}

/// Cleans raw model output with the default marker list.
pub fn normalize(raw: &str) -> Result<DescriptionText> {
    Ok(DescriptionText {
        text: Normalizer::default().normalize(raw)?,
        source: TextSource::External,
        scene_ref: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fruits_parse_example() {
        let rec = parse(
            "There are three oranges and two kiwis. The total number of items is five.",
            ScenarioId::Fruits.spec(),
        )
        .unwrap();
        let slots: Vec<(&str, &str)> = rec.slots.iter().map(|(n, v)| (n.as_str(), v.as_str())).collect();
        assert_eq!(
            slots,
            [("item1_count", "three"), ("item1_type", "orange"), ("item2_count", "two"), ("item2_type", "kiwi"), ("total", "five")]
        );
    }

    #[test]
    fn unparseable_texts() {
        let spec = ScenarioId::Fruits.spec();
        assert!(parse("", spec).is_err());
        assert!(parse("There are three bananas.", spec).is_err());
        assert!(parse("There are three oranges and two kiwis. Something else.", spec).is_err());
        assert!(parse("There are three oranges and two kiwis", spec).is_err());
    }

    #[test]
    fn kiwifruit_parses_as_equivalent() {
        let g = grammar_for(ScenarioId::Fruits);
        let rec = parse("There are three oranges and two kiwifruits.", ScenarioId::Fruits.spec()).unwrap();
        assert_eq!(rec.get("item2_type"), Some("kiwifruit"));
        assert!(g.kind("item2_type").unwrap().equivalent("kiwi", "kiwifruit"));
    }

    #[test]
    fn normalize_default() {
        let t = normalize("  There are  three oranges. ").unwrap();
        assert_eq!(t.text, "There are three oranges.");
    }
}
