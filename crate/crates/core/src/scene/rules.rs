use std::collections::{BTreeSet, HashSet};

use super::{LengthClass, ObjectInstance, Scene, ScenarioId, ScenarioSpec};
use crate::error::{Error, Result};
use crate::scene::AttributeAspect;

/// Returns the subset of the spec's two aspects whose rule the scene breaks.
///
/// An empty scene violates both rules.
pub fn check_rules(scene: &Scene, spec: &ScenarioSpec) -> Result<BTreeSet<AttributeAspect>> {
    if scene.scenario_id != spec.id {
        return Err(Error::ScenarioMismatch {
            scene: scene.scenario_id.to_string(),
            spec: spec.name.to_string(),
        });
    }
    validate(scene, spec)?;

    let (a, b) = if scene.objects.is_empty() {
        (true, true)
    } else {
        violations(scene)
    };
    let mut out = BTreeSet::new();
    if a {
        out.insert(spec.aspects.0);
    }
    if b {
        out.insert(spec.aspects.1);
    }
    Ok(out)
}

fn validate(scene: &Scene, spec: &ScenarioSpec) -> Result<()> {
    let oov = |field: &'static str, token: &str| Error::OutOfVocabulary {
        scenario: spec.name.to_string(),
        field,
        token: token.to_string(),
    };
    let mut seen_order = HashSet::new();
    for o in &scene.objects {
        if !spec.vocab.categories.contains(&o.category.as_str()) {
            return Err(oov("category", &o.category));
        }
        if let Some(c) = &o.color {
            if !spec.vocab.colors.contains(&c.as_str()) {
                return Err(oov("color", c));
            }
        }
        if let Some(l) = o.length_class {
            if !spec.vocab.lengths.contains(&l) {
                return Err(oov("length", l.word()));
            }
        }
        if let Some(r) = &o.region {
            if !spec.layout.contains(&r.as_str()) {
                return Err(oov("region", r));
            }
        }
        if let Some(i) = o.order_index {
            if !seen_order.insert(i) {
                return Err(Error::InvalidScene(format!("duplicate order index {i}")));
            }
        }
    }
    if let Some(label) = scene.label() {
        if !spec.vocab.colors.contains(&label) {
            return Err(oov("label", label));
        }
    }
    Ok(())
}

fn is(o: &ObjectInstance, category: &str) -> bool {
    o.category == category
}

fn all(scene: &Scene, pred: impl Fn(&ObjectInstance) -> bool) -> bool {
    scene.objects.iter().all(pred)
}

/// (rule A violated, rule B violated) for a non-empty, validated scene.
fn violations(scene: &Scene) -> (bool, bool) {
    use LengthClass::*;
    match scene.scenario_id {
        ScenarioId::Sticks => {
            let blue = scene.count(|o| o.color_is("blue"));
            let red = scene.count(|o| o.color_is("red"));
            let quantity = blue == 2 && red == 1 && scene.objects.len() == 3;
            let length = all(scene, |o| match o.color.as_deref() {
                Some("blue") => o.length_class == Some(Long),
                Some("red") => o.length_class == Some(Short),
                _ => false,
            });
            (!quantity, !length)
        }
        ScenarioId::Fruits => {
            let quantity = scene.objects.len() == 5;
            let types = all(scene, |o| is(o, "orange") || is(o, "kiwi"))
                && scene.count(|o| is(o, "orange")) == 3;
            (!quantity, !types)
        }
        ScenarioId::Tools => {
            let quantity = ["bolt", "washer", "nut"]
                .iter()
                .all(|c| scene.count(|o| is(o, c)) == 2);
            let placement = all(scene, |o| {
                let bin = match o.category.as_str() {
                    "bolt" => "left",
                    "washer" => "middle",
                    _ => "right",
                };
                o.region_is(bin)
            });
            (!quantity, !placement)
        }
        ScenarioId::Cookies => {
            let quantity = scene.count(|o| o.region_is("square")) == 2
                && scene.count(|o| o.region_is("round")) == 1
                && scene.objects.len() == 3;
            let relation = all(scene, |o| match o.region.as_deref() {
                Some("square") => o.color_is("yellow"),
                Some("round") => o.color_is("black"),
                _ => false,
            });
            (!quantity, !relation)
        }
        ScenarioId::Tapes => {
            let mut lengths: Vec<_> = scene.objects.iter().map(|o| o.length_class).collect();
            lengths.sort();
            let length = lengths == [Some(Short), Some(Long)]
                && !scene.objects.iter().any(|o| {
                    (o.color_is("red") && o.length_class == Some(Long))
                        || (o.color_is("green") && o.length_class == Some(Short))
                });
            let mut colors: Vec<_> = scene.objects.iter().map(|o| o.color.as_deref()).collect();
            colors.sort();
            let types = colors == [Some("green"), Some("red")];
            (!length, !types)
        }
        ScenarioId::Stationery => stationery(scene),
        ScenarioId::Ropes => {
            let length = all(scene, |o| o.length_class == Some(Similar));
            let relation = match scene.label() {
                Some(label) => all(scene, |o| o.color_is(label)),
                None => false,
            };
            (!length, !relation)
        }
        ScenarioId::Blocks => {
            let known = ["circle", "triangle", "square"];
            let types = all(scene, |o| known.contains(&o.category.as_str()))
                && known.iter().all(|c| scene.count(|o| is(o, c)) == 2);
            let placement = all(scene, |o| match o.category.as_str() {
                "circle" => o.region_is("top"),
                "triangle" => o.region_is("middle"),
                "square" => o.region_is("bottom"),
                _ => true,
            });
            (!types, !placement)
        }
        ScenarioId::Dishes => {
            let mut cats: Vec<&str> = scene.objects.iter().map(|o| o.category.as_str()).collect();
            cats.sort();
            let types = cats == ["fork", "plate", "spoon"];
            let rank = |c: &str| match c {
                "fork" => Some(0),
                "plate" => Some(1),
                "spoon" => Some(2),
                _ => None,
            };
            let mut ranked: Vec<(Option<u32>, u32)> = scene
                .objects
                .iter()
                .filter_map(|o| rank(&o.category).map(|r| (o.order_index, r)))
                .collect();
            let relation = if ranked.iter().any(|(i, _)| i.is_none()) {
                false
            } else {
                ranked.sort();
                ranked.windows(2).all(|w| w[0].1 <= w[1].1)
            };
            (!types, !relation)
        }
        ScenarioId::Balls => {
            let compartments = ["top_left", "top_right", "bottom_left", "bottom_right"];
            let placement = compartments
                .iter()
                .all(|c| scene.count(|o| o.region_is(c)) == 1)
                && scene.objects.len() == 4;
            let relation = all(scene, |o| match o.region.as_deref() {
                Some("top_left" | "top_right") => o.color_is("orange"),
                Some("bottom_left" | "bottom_right") => o.color_is("white"),
                _ => true,
            });
            (!placement, !relation)
        }
    }
}

/// Expected (bin, length) for each stationery item identity.
pub(crate) fn stationery_identity(category: &str, color: Option<&str>) -> Option<(&'static str, LengthClass)> {
    match (category, color) {
        ("pencil", Some("black")) => Some(("left", LengthClass::Long)),
        ("eraser", Some("blue")) => Some(("left", LengthClass::Long)),
        ("pencil", Some("red")) => Some(("right", LengthClass::Short)),
        ("eraser", Some("red")) => Some(("right", LengthClass::Short)),
        _ => None,
    }
}

fn stationery(scene: &Scene) -> (bool, bool) {
    let length = all(scene, |o| {
        matches!(stationery_identity(&o.category, o.color.as_deref()),
            Some((_, len)) if o.length_class == Some(len))
    });

    let mut identities: Vec<(&str, Option<&str>)> = scene
        .objects
        .iter()
        .map(|o| (o.category.as_str(), o.color.as_deref()))
        .collect();
    identities.sort();
    let complete = identities
        == [
            ("eraser", Some("blue")),
            ("eraser", Some("red")),
            ("pencil", Some("black")),
            ("pencil", Some("red")),
        ];
    let binned = all(scene, |o| {
        matches!(stationery_identity(&o.category, o.color.as_deref()),
            Some((bin, _)) if o.region_is(bin))
    });
    let ordered = ["left", "right"].iter().all(|bin| {
        let eraser = scene
            .objects
            .iter()
            .find(|o| o.region_is(bin) && is(o, "eraser"))
            .and_then(|o| o.order_index);
        let pencil = scene
            .objects
            .iter()
            .find(|o| o.region_is(bin) && is(o, "pencil"))
            .and_then(|o| o.order_index);
        matches!((eraser, pencil), (Some(e), Some(p)) if e < p)
    });
    (!length, !(complete && binned && ordered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{classify, ObjectInstance as O, SceneContext, ViolationLabel};
    use LengthClass::*;

    fn aspects(scene: &Scene) -> BTreeSet<AttributeAspect> {
        check_rules(scene, scene.scenario_id.spec()).unwrap()
    }

    #[test]
    fn fruits_normal_and_empty() {
        let mut objs = vec![O::new("orange"); 3];
        objs.extend(vec![O::new("kiwi"); 2]);
        assert!(aspects(&Scene::new(ScenarioId::Fruits, objs)).is_empty());
        let empty = Scene::new(ScenarioId::Fruits, vec![]);
        assert_eq!(
            aspects(&empty),
            [AttributeAspect::Quantity, AttributeAspect::Type].into_iter().collect()
        );
    }

    #[test]
    fn sticks_all_long() {
        let scene = Scene::new(
            ScenarioId::Sticks,
            vec![
                O::new("stick").color("blue").length(Long),
                O::new("stick").color("blue").length(Long),
                O::new("stick").color("red").length(Long),
            ],
        );
        assert_eq!(aspects(&scene), [AttributeAspect::Length].into_iter().collect());
    }

    #[test]
    fn cookies_yellow_on_round_dish() {
        let scene = Scene::new(
            ScenarioId::Cookies,
            vec![
                O::new("cookie").color("yellow").region("square"),
                O::new("cookie").color("yellow").region("square"),
                O::new("cookie").color("yellow").region("round"),
            ],
        );
        assert_eq!(classify(&scene, scene.scenario_id.spec()).unwrap(), ViolationLabel::SingleB);
    }

    #[test]
    fn out_of_vocabulary_rejected() {
        let scene = Scene::new(ScenarioId::Fruits, vec![O::new("banana")]);
        assert!(matches!(
            check_rules(&scene, scene.scenario_id.spec()),
            Err(Error::OutOfVocabulary { .. })
        ));
        let bad_region = Scene::new(ScenarioId::Tools, vec![O::new("bolt").region("attic")]);
        assert!(check_rules(&bad_region, bad_region.scenario_id.spec()).is_err());
    }

    #[test]
    fn spec_mismatch_rejected() {
        let scene = Scene::new(ScenarioId::Fruits, vec![O::new("orange")]);
        assert!(matches!(
            check_rules(&scene, ScenarioId::Tools.spec()),
            Err(Error::ScenarioMismatch { .. })
        ));
    }

    #[test]
    fn ropes_label_dependency() {
        let ctx = SceneContext { reference_length: Some(Long), label: Some("blue".into()) };
        let ok = Scene::new(ScenarioId::Ropes, vec![O::new("rope").color("blue").length(Similar)])
            .with_context(ctx.clone());
        assert!(aspects(&ok).is_empty());
        let bad = Scene::new(ScenarioId::Ropes, vec![O::new("rope").color("red").length(Short)])
            .with_context(ctx);
        assert_eq!(aspects(&bad).len(), 2);
    }

    #[test]
    fn dishes_order() {
        let scene = Scene::new(
            ScenarioId::Dishes,
            vec![O::new("plate").order(0), O::new("fork").order(1), O::new("spoon").order(2)],
        );
        assert_eq!(aspects(&scene), [AttributeAspect::Relation].into_iter().collect());
    }
}
