//! Scenes, scenario rule specifications and the rule engine.
//!
//! A [`Scene`] is the ground-truth logical state of one sample. Each of the
//! ten built-in [`ScenarioSpec`]s pairs two [`AttributeAspect`]s with one
//! rule predicate each; [`check_rules`] returns the aspects a scene violates
//! and [`classify`] maps that set onto a [`ViolationLabel`].

mod rules;
mod sampler;
mod task;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use rules::check_rules;
pub use sampler::{mutate, sample_anomaly, sample_normal, MAX_ATTEMPTS};
pub use task::{build_task, LabelledScene, Split, SplitCounts, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttributeAspect {
    Quantity,
    Length,
    Type,
    Placement,
    Relation,
}

impl AttributeAspect {
    pub const ALL: [AttributeAspect; 5] = [
        AttributeAspect::Quantity,
        AttributeAspect::Length,
        AttributeAspect::Type,
        AttributeAspect::Placement,
        AttributeAspect::Relation,
    ];

    pub fn letter(self) -> char {
        match self {
            AttributeAspect::Quantity => 'Q',
            AttributeAspect::Length => 'L',
            AttributeAspect::Type => 'T',
            AttributeAspect::Placement => 'P',
            AttributeAspect::Relation => 'R',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaptureCondition {
    WhiteBG,
    CableBG,
    MeshBG,
    LowLightCD,
    BlurryCD,
}

impl CaptureCondition {
    pub const ALL: [CaptureCondition; 5] = [
        CaptureCondition::WhiteBG,
        CaptureCondition::CableBG,
        CaptureCondition::MeshBG,
        CaptureCondition::LowLightCD,
        CaptureCondition::BlurryCD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaptureCondition::WhiteBG => "WhiteBG",
            CaptureCondition::CableBG => "CableBG",
            CaptureCondition::MeshBG => "MeshBG",
            CaptureCondition::LowLightCD => "LowLightCD",
            CaptureCondition::BlurryCD => "BlurryCD",
        }
    }
}

impl fmt::Display for CaptureCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaptureCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaptureCondition::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownCondition(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    Sticks,
    Fruits,
    Tools,
    Cookies,
    Tapes,
    Stationery,
    Ropes,
    Blocks,
    Dishes,
    Balls,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 10] = [
        ScenarioId::Sticks,
        ScenarioId::Fruits,
        ScenarioId::Tools,
        ScenarioId::Cookies,
        ScenarioId::Tapes,
        ScenarioId::Stationery,
        ScenarioId::Ropes,
        ScenarioId::Blocks,
        ScenarioId::Dishes,
        ScenarioId::Balls,
    ];

    pub fn name(self) -> &'static str {
        self.spec().name
    }

    pub fn spec(self) -> &'static ScenarioSpec {
        &SPECS[self as usize]
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthClass {
    Short,
    Long,
    Similar,
}

impl LengthClass {
    pub fn word(self) -> &'static str {
        match self {
            LengthClass::Short => "short",
            LengthClass::Long => "long",
            LengthClass::Similar => "similar",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_class: Option<LengthClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_index: Option<u32>,
}

impl ObjectInstance {
    pub fn new(category: &str) -> Self {
        ObjectInstance {
            category: category.to_string(),
            color: None,
            length_class: None,
            region: None,
            order_index: None,
        }
    }

    pub fn color(mut self, color: &str) -> Self {
        self.color = Some(color.to_string());
        self
    }

    pub fn length(mut self, length: LengthClass) -> Self {
        self.length_class = Some(length);
        self
    }

    pub fn region(mut self, region: &str) -> Self {
        self.region = Some(region.to_string());
        self
    }

    pub fn order(mut self, index: u32) -> Self {
        self.order_index = Some(index);
        self
    }

    fn sort_key(&self) -> (Option<&str>, Option<u32>, &str, Option<&str>, Option<LengthClass>) {
        (
            self.region.as_deref(),
            self.order_index,
            self.category.as_str(),
            self.color.as_deref(),
            self.length_class,
        )
    }

    pub(crate) fn color_is(&self, color: &str) -> bool {
        self.color.as_deref() == Some(color)
    }

    pub(crate) fn region_is(&self, region: &str) -> bool {
        self.region.as_deref() == Some(region)
    }
}

/// Scenario-specific context that is not carried by any single object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneContext {
    /// Absolute length class of a reference object (Ropes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_length: Option<LengthClass>,
    /// Text printed on a label (Ropes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scene {
    pub scenario_id: ScenarioId,
    pub objects: Vec<ObjectInstance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<SceneContext>,
    pub condition: CaptureCondition,
}

impl Scene {
    pub fn new(scenario_id: ScenarioId, objects: Vec<ObjectInstance>) -> Self {
        let mut scene = Scene {
            scenario_id,
            objects,
            context: None,
            condition: CaptureCondition::WhiteBG,
        };
        scene.canonicalize();
        scene
    }

    pub fn with_condition(mut self, condition: CaptureCondition) -> Self {
        self.condition = condition;
        self
    }

    pub fn with_context(mut self, context: SceneContext) -> Self {
        self.context = Some(context);
        self
    }

    /// Sorts objects by (region, order index, category, color, length).
    pub fn canonicalize(&mut self) {
        self.objects.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    pub fn label(&self) -> Option<&str> {
        self.context.as_ref().and_then(|c| c.label.as_deref())
    }

    pub(crate) fn count(&self, pred: impl Fn(&ObjectInstance) -> bool) -> usize {
        self.objects.iter().filter(|o| pred(o)).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationLabel {
    #[serde(rename = "normal")]
    Normal,
    #[serde(rename = "singleA")]
    SingleA,
    #[serde(rename = "singleB")]
    SingleB,
    #[serde(rename = "dual")]
    Dual,
}

impl ViolationLabel {
    pub const ANOMALIES: [ViolationLabel; 3] =
        [ViolationLabel::SingleA, ViolationLabel::SingleB, ViolationLabel::Dual];

    pub fn from_flags(a: bool, b: bool) -> Self {
        match (a, b) {
            (false, false) => ViolationLabel::Normal,
            (true, false) => ViolationLabel::SingleA,
            (false, true) => ViolationLabel::SingleB,
            (true, true) => ViolationLabel::Dual,
        }
    }

    pub fn is_anomaly(self) -> bool {
        self != ViolationLabel::Normal
    }

    pub fn name(self) -> &'static str {
        match self {
            ViolationLabel::Normal => "normal",
            ViolationLabel::SingleA => "singleA",
            ViolationLabel::SingleB => "singleB",
            ViolationLabel::Dual => "dual",
        }
    }
}

impl fmt::Display for ViolationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Token sets a scenario's scenes may use.
#[derive(Debug, Clone, Copy)]
pub struct Vocab {
    pub categories: &'static [&'static str],
    pub colors: &'static [&'static str],
    pub lengths: &'static [LengthClass],
    pub regions: &'static [&'static str],
}

#[derive(Debug, Clone, Copy)]
pub struct RuleSpec {
    pub aspect: AttributeAspect,
    pub rule: &'static str,
}

#[derive(Debug)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub name: &'static str,
    pub aspects: (AttributeAspect, AttributeAspect),
    pub normal_rule: &'static str,
    pub vocab: Vocab,
    /// Declared layout slots; object regions must name one of these.
    pub layout: &'static [&'static str],
    pub rules: [RuleSpec; 2],
}

impl ScenarioSpec {
    pub fn aspect_pair(&self) -> [AttributeAspect; 2] {
        [self.aspects.0, self.aspects.1]
    }

    pub fn aspect_code(&self) -> String {
        format!("{}+{}", self.aspects.0.letter(), self.aspects.1.letter())
    }
}

use AttributeAspect::{Length as L, Placement as P, Quantity as Q, Relation as R, Type as T};
use LengthClass::{Long, Short, Similar};

static SPECS: [ScenarioSpec; 10] = [
    ScenarioSpec {
        id: ScenarioId::Sticks,
        name: "Sticks",
        aspects: (Q, L),
        normal_rule: "Two long blue sticks and one short red stick are present.",
        vocab: Vocab {
            categories: &["stick"],
            colors: &["blue", "red"],
            lengths: &[Long, Short],
            regions: &[],
        },
        layout: &[],
        rules: [
            RuleSpec { aspect: Q, rule: "exactly two blue sticks and one red stick" },
            RuleSpec { aspect: L, rule: "blue sticks are long and red sticks are short" },
        ],
    },
    ScenarioSpec {
        id: ScenarioId::Fruits,
        name: "Fruits",
        aspects: (Q, T),
        normal_rule: "Three oranges and two kiwifruits are present.",
        vocab: Vocab {
            categories: &["orange", "kiwi", "apple", "lemon", "peach"],
            colors: &[],
            lengths: &[],
            regions: &[],
        },
        layout: &[],
        rules: [
            RuleSpec { aspect: Q, rule: "exactly five fruits" },
            RuleSpec { aspect: T, rule: "only oranges and kiwis, with exactly three oranges" },
        ],
    },
    ScenarioSpec {
        id: ScenarioId::Tools,
        name: "Tools",
        aspects: (Q, P),
        normal_rule: "Two bolts, two washers, and two nuts are present and placed in the Left/Middle/Right bins, respectively.",
        vocab: Vocab {
            categories: &["bolt", "washer", "nut"],
            colors: &[],
            lengths: &[],
            regions: &["left", "middle", "right"],
        },
        layout: &["left", "middle", "right"],
        rules: [
            RuleSpec { aspect: Q, rule: "two bolts, two washers and two nuts" },
            RuleSpec { aspect: P, rule: "bolts left, washers middle, nuts right" },
        ],
    },
    ScenarioSpec {
        id: ScenarioId::Cookies,
        name: "Cookies",
        aspects: (Q, R),
        normal_rule: "Two yellow cookies are on the square dish and one black cookie is on the round dish.",
        vocab: Vocab {
            categories: &["cookie"],
            colors: &["yellow", "black", "brown"],
            lengths: &[],
            regions: &["square", "round"],
        },
        layout: &["square", "round"],
        rules: [
            RuleSpec { aspect: Q, rule: "two cookies on the square dish and one on the round dish" },
            RuleSpec { aspect: R, rule: "yellow cookies on the square dish, black cookies on the round dish" },
        ],
    },
    ScenarioSpec {
        id: ScenarioId::Tapes,
        name: "Tapes",
        aspects: (L, T),
        normal_rule: "A long green tape and a short red tape are present (length judged by the relative length of the two tapes).",
        vocab: Vocab {
            categories: &["tape"],
            colors: &["green", "red", "blue", "yellow"],
            lengths: &[Long, Short, Similar],
            regions: &[],
        },
        layout: &[],
        rules: [
            RuleSpec { aspect: L, rule: "one long and one short tape; the green tape is not short and the red tape is not long" },
            RuleSpec { aspect: T, rule: "exactly one green and one red tape" },
        ],
    },
    ScenarioSpec {
        id: ScenarioId::Stationery,
        name: "Stationery",
        aspects: (L, P),
        normal_rule: "Left bin contains a long black pencil and a long blue eraser; right bin contains a short red pencil and a short red eraser, with the eraser placed left of the pencil within each bin.",
        vocab: Vocab {
            categories: &["pencil", "eraser"],
            colors: &["black", "blue", "red"],
            lengths: &[Long, Short],
            regions: &["left", "right"],
        },
        layout: &["left", "right"],
        rules: [
            RuleSpec { aspect: L, rule: "left-bin items long, right-bin items short (by identity)" },
            RuleSpec { aspect: P, rule: "each item in its bin, eraser left of pencil" },
        ],
    },
    ScenarioSpec {
        id: ScenarioId::Ropes,
        name: "Ropes",
        aspects: (L, R),
        normal_rule: "The rope length is similar to the reference stick, and the rope color matches the text label.",
        vocab: Vocab {
            categories: &["rope"],
            colors: &["red", "blue", "green", "yellow"],
            lengths: &[Similar, Short, Long],
            regions: &[],
        },
        layout: &[],
        rules: [
            RuleSpec { aspect: L, rule: "rope length similar to the reference stick" },
            RuleSpec { aspect: R, rule: "rope color matches the label" },
        ],
    },
    ScenarioSpec {
        id: ScenarioId::Blocks,
        name: "Blocks",
        aspects: (T, P),
        normal_rule: "Two circle blocks, two triangle blocks, and two square blocks are placed in the Top/Middle/Bottom bins, respectively.",
        vocab: Vocab {
            categories: &["circle", "triangle", "square", "star", "hexagon"],
            colors: &[],
            lengths: &[],
            regions: &["top", "middle", "bottom"],
        },
        layout: &["top", "middle", "bottom"],
        rules: [
            RuleSpec { aspect: T, rule: "two circles, two triangles, two squares and nothing else" },
            RuleSpec { aspect: P, rule: "circles top, triangles middle, squares bottom" },
        ],
    },
    ScenarioSpec {
        id: ScenarioId::Dishes,
        name: "Dishes",
        aspects: (T, R),
        normal_rule: "A fork, a plate, and a spoon are arranged in this left-to-right order.",
        vocab: Vocab {
            categories: &["fork", "plate", "spoon", "knife", "cup"],
            colors: &[],
            lengths: &[],
            regions: &[],
        },
        layout: &[],
        rules: [
            RuleSpec { aspect: T, rule: "exactly one fork, one plate and one spoon" },
            RuleSpec { aspect: R, rule: "fork, plate, spoon from left to right" },
        ],
    },
    ScenarioSpec {
        id: ScenarioId::Balls,
        name: "Balls",
        aspects: (P, R),
        normal_rule: "Orange balls are in the top compartments and white balls are in the bottom compartments of the 2x2 case.",
        vocab: Vocab {
            categories: &["ball"],
            colors: &["orange", "white"],
            lengths: &[],
            regions: &["top_left", "top_right", "bottom_left", "bottom_right", "outside"],
        },
        layout: &["top_left", "top_right", "bottom_left", "bottom_right", "outside"],
        rules: [
            RuleSpec { aspect: P, rule: "one ball per compartment, none outside" },
            RuleSpec { aspect: R, rule: "orange balls on top, white balls at the bottom" },
        ],
    },
];

/// Classifies a scene under its scenario's two rules.
pub fn classify(scene: &Scene, spec: &ScenarioSpec) -> Result<ViolationLabel> {
    let violated = check_rules(scene, spec)?;
    Ok(label_from_set(&violated, spec))
}

pub fn label_from_set(violated: &BTreeSet<AttributeAspect>, spec: &ScenarioSpec) -> ViolationLabel {
    ViolationLabel::from_flags(violated.contains(&spec.aspects.0), violated.contains(&spec.aspects.1))
}
