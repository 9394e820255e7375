use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{classify, LengthClass, ObjectInstance as O, Scene, SceneContext, ScenarioId, ScenarioSpec, ViolationLabel};
use crate::error::{Error, Result};
use crate::seed::Rng;

/// Rejection-sampling bound for targeted anomalies.
pub const MAX_ATTEMPTS: usize = 1000;

fn shuffled_orders(objects: &mut [O], rng: &mut Rng) {
    let mut idx: Vec<u32> = (0..objects.len() as u32).collect();
    idx.shuffle(rng);
    for (o, i) in objects.iter_mut().zip(idx) {
        o.order_index = Some(i);
    }
}

fn next_order(scene: &Scene) -> u32 {
    scene
        .objects
        .iter()
        .filter_map(|o| o.order_index)
        .max()
        .map_or(0, |m| m + 1)
}

/// Draws a scene that satisfies both rules of `spec`. Attributes the rules do
/// not pin (object order, the Ropes label and reference length) are uniform.
pub fn sample_normal(spec: &ScenarioSpec, rng: &mut Rng) -> Scene {
    use LengthClass::*;
    let mut context = None;
    let mut objects = match spec.id {
        ScenarioId::Sticks => vec![
            O::new("stick").color("blue").length(Long),
            O::new("stick").color("blue").length(Long),
            O::new("stick").color("red").length(Short),
        ],
        ScenarioId::Fruits => {
            let mut v = vec![O::new("orange"); 3];
            v.extend(vec![O::new("kiwi"); 2]);
            v
        }
        ScenarioId::Tools => ["bolt", "bolt", "washer", "washer", "nut", "nut"]
            .iter()
            .map(|c| O::new(c).region(tools_bin(c)))
            .collect(),
        ScenarioId::Cookies => vec![
            O::new("cookie").color("yellow").region("square"),
            O::new("cookie").color("yellow").region("square"),
            O::new("cookie").color("black").region("round"),
        ],
        ScenarioId::Tapes => vec![
            O::new("tape").color("green").length(Long),
            O::new("tape").color("red").length(Short),
        ],
        ScenarioId::Stationery => {
            // order is rule-relevant here: eraser before pencil in each bin
            let objects = vec![
                O::new("eraser").color("blue").length(Long).region("left").order(0),
                O::new("pencil").color("black").length(Long).region("left").order(1),
                O::new("eraser").color("red").length(Short).region("right").order(2),
                O::new("pencil").color("red").length(Short).region("right").order(3),
            ];
            return Scene::new(spec.id, objects);
        }
        ScenarioId::Ropes => {
            let label = *spec.vocab.colors.choose(rng).expect("ropes colors");
            context = Some(SceneContext {
                reference_length: Some(if rng.gen_bool(0.5) { Long } else { Short }),
                label: Some(label.to_string()),
            });
            vec![O::new("rope").color(label).length(Similar)]
        }
        ScenarioId::Blocks => ["circle", "circle", "triangle", "triangle", "square", "square"]
            .iter()
            .map(|c| O::new(c).region(blocks_bin(c).unwrap()))
            .collect(),
        ScenarioId::Dishes => {
            let objects = vec![O::new("fork").order(0), O::new("plate").order(1), O::new("spoon").order(2)];
            return Scene::new(spec.id, objects);
        }
        ScenarioId::Balls => vec![
            O::new("ball").color("orange").region("top_left"),
            O::new("ball").color("orange").region("top_right"),
            O::new("ball").color("white").region("bottom_left"),
            O::new("ball").color("white").region("bottom_right"),
        ],
    };
    shuffled_orders(&mut objects, rng);
    let mut scene = Scene::new(spec.id, objects);
    scene.context = context;
    scene
}

fn tools_bin(category: &str) -> &'static str {
    match category {
        "bolt" => "left",
        "washer" => "middle",
        _ => "right",
    }
}

fn blocks_bin(category: &str) -> Option<&'static str> {
    match category {
        "circle" => Some("top"),
        "triangle" => Some("middle"),
        "square" => Some("bottom"),
        _ => None,
    }
}

fn pick(scene: &Scene, rng: &mut Rng) -> Option<usize> {
    (!scene.objects.is_empty()).then(|| rng.gen_range(0..scene.objects.len()))
}

fn pick_where(scene: &Scene, rng: &mut Rng, pred: impl Fn(&O) -> bool) -> Option<usize> {
    let idx: Vec<usize> = (0..scene.objects.len()).filter(|&i| pred(&scene.objects[i])).collect();
    idx.choose(rng).copied()
}

fn other<'a>(options: &[&'a str], current: &str, rng: &mut Rng) -> &'a str {
    let rest: Vec<&str> = options.iter().copied().filter(|o| *o != current).collect();
    rest.choose(rng).copied().unwrap_or(options[0])
}

fn add_or_remove(scene: &mut Scene, rng: &mut Rng, removable: impl Fn(&O) -> bool, make: impl FnOnce(&mut Rng) -> O) {
    if rng.gen_bool(0.5) {
        if let Some(i) = pick_where(scene, rng, removable) {
            scene.objects.remove(i);
            return;
        }
    }
    let order = next_order(scene);
    let mut o = make(rng);
    o.order_index = Some(order);
    scene.objects.push(o);
}

/// Applies one edit aimed at breaking rule `which` (0 = first aspect, 1 =
/// second). The edit is constructive; callers re-check the result.
pub fn mutate(scene: &mut Scene, which: usize, rng: &mut Rng) {
    use LengthClass::*;
    let flip = |l: Option<LengthClass>| match l {
        Some(Long) => Some(Short),
        _ => Some(Long),
    };
    match (scene.scenario_id, which) {
        (ScenarioId::Sticks, 0) => add_or_remove(scene, rng, |_| true, |rng| {
            if rng.gen_bool(0.5) {
                O::new("stick").color("blue").length(Long)
            } else {
                O::new("stick").color("red").length(Short)
            }
        }),
        (ScenarioId::Sticks, _) => {
            if let Some(i) = pick(scene, rng) {
                scene.objects[i].length_class = flip(scene.objects[i].length_class);
            }
        }
        (ScenarioId::Fruits, 0) => add_or_remove(scene, rng, |o| o.category == "kiwi", |_| O::new("kiwi")),
        (ScenarioId::Fruits, _) => {
            if rng.gen_bool(0.7) {
                if let Some(i) = pick(scene, rng) {
                    let foreign = ["apple", "lemon", "peach"].choose(rng).unwrap();
                    scene.objects[i].category = foreign.to_string();
                }
            } else if let Some(i) = pick_where(scene, rng, |o| o.category == "kiwi") {
                scene.objects[i].category = "orange".into();
            }
        }
        (ScenarioId::Tools, 0) => add_or_remove(scene, rng, |_| true, |rng| {
            let c = *["bolt", "washer", "nut"].choose(rng).unwrap();
            O::new(c).region(tools_bin(c))
        }),
        (ScenarioId::Tools, _) => {
            if let Some(i) = pick(scene, rng) {
                let cur = scene.objects[i].region.clone().unwrap_or_default();
                scene.objects[i].region = Some(other(&["left", "middle", "right"], &cur, rng).into());
            }
        }
        (ScenarioId::Cookies, 0) => add_or_remove(scene, rng, |_| true, |rng| {
            if rng.gen_bool(0.5) {
                O::new("cookie").color("yellow").region("square")
            } else {
                O::new("cookie").color("black").region("round")
            }
        }),
        (ScenarioId::Cookies, _) => {
            if let Some(i) = pick(scene, rng) {
                let cur = scene.objects[i].color.clone().unwrap_or_default();
                scene.objects[i].color = Some(other(&["yellow", "black", "brown"], &cur, rng).into());
            }
        }
        (ScenarioId::Tapes, 0) => {
            if rng.gen_bool(0.5) {
                for o in &mut scene.objects {
                    o.length_class = Some(Similar);
                }
            } else {
                for o in &mut scene.objects {
                    o.length_class = flip(o.length_class);
                }
            }
        }
        (ScenarioId::Tapes, _) => {
            if let Some(i) = pick(scene, rng) {
                scene.objects[i].color = Some(["blue", "yellow"].choose(rng).unwrap().to_string());
            }
        }
        (ScenarioId::Stationery, 0) => {
            if let Some(i) = pick(scene, rng) {
                scene.objects[i].length_class = flip(scene.objects[i].length_class);
            }
        }
        (ScenarioId::Stationery, _) => {
            if rng.gen_bool(0.5) {
                // swap eraser/pencil order within one bin
                let bin = *["left", "right"].choose(rng).unwrap();
                let e = scene.objects.iter().position(|o| o.region_is(bin) && o.category == "eraser");
                let p = scene.objects.iter().position(|o| o.region_is(bin) && o.category == "pencil");
                if let (Some(e), Some(p)) = (e, p) {
                    let tmp = scene.objects[e].order_index;
                    scene.objects[e].order_index = scene.objects[p].order_index;
                    scene.objects[p].order_index = tmp;
                }
            } else if let Some(i) = pick(scene, rng) {
                let order = next_order(scene);
                let o = &mut scene.objects[i];
                let to = if o.region_is("left") { "right" } else { "left" };
                o.region = Some(to.into());
                o.order_index = Some(order);
            }
        }
        (ScenarioId::Ropes, 0) => {
            if let Some(i) = pick(scene, rng) {
                scene.objects[i].length_class = Some(if rng.gen_bool(0.5) { Short } else { Long });
            }
        }
        (ScenarioId::Ropes, _) => {
            if let Some(i) = pick(scene, rng) {
                let cur = scene.objects[i].color.clone().unwrap_or_default();
                let colors = scene.scenario_id.spec().vocab.colors;
                scene.objects[i].color = Some(other(colors, &cur, rng).into());
            }
        }
        (ScenarioId::Blocks, 0) => {
            if let Some(i) = pick(scene, rng) {
                scene.objects[i].category = ["star", "hexagon"].choose(rng).unwrap().to_string();
            }
        }
        (ScenarioId::Blocks, _) => {
            if let Some(i) = pick_where(scene, rng, |o| blocks_bin(&o.category).is_some()) {
                let cur = scene.objects[i].region.clone().unwrap_or_default();
                scene.objects[i].region = Some(other(&["top", "middle", "bottom"], &cur, rng).into());
            }
        }
        (ScenarioId::Dishes, 0) => {
            if let Some(i) = pick(scene, rng) {
                scene.objects[i].category = ["knife", "cup"].choose(rng).unwrap().to_string();
            }
        }
        (ScenarioId::Dishes, _) => {
            if scene.objects.len() >= 2 {
                let mut idx: Vec<usize> = (0..scene.objects.len()).collect();
                idx.shuffle(rng);
                let (a, b) = (idx[0], idx[1]);
                let tmp = scene.objects[a].order_index;
                scene.objects[a].order_index = scene.objects[b].order_index;
                scene.objects[b].order_index = tmp;
            }
        }
        (ScenarioId::Balls, 0) => {
            if let Some(i) = pick(scene, rng) {
                let o = &mut scene.objects[i];
                let to = if rng.gen_bool(0.5) {
                    "outside"
                } else {
                    match o.region.as_deref() {
                        Some("top_left") => "top_right",
                        Some("top_right") => "top_left",
                        Some("bottom_left") => "bottom_right",
                        _ => "bottom_left",
                    }
                };
                o.region = Some(to.into());
            }
        }
        (ScenarioId::Balls, _) => {
            if let Some(i) = pick(scene, rng) {
                let cur = scene.objects[i].color.clone().unwrap_or_default();
                scene.objects[i].color = Some(other(&["orange", "white"], &cur, rng).into());
            }
        }
    }
    scene.canonicalize();
}

/// Draws a scene whose label is exactly `target` by mutating a normal scene
/// and rejecting draws that miss the target.
pub fn sample_anomaly(spec: &ScenarioSpec, target: ViolationLabel, rng: &mut Rng) -> Result<Scene> {
    if target == ViolationLabel::Normal {
        return Err(Error::Generation {
            scenario: spec.name.to_string(),
            target: target.to_string(),
            attempts: 0,
        });
    }
    for _ in 0..MAX_ATTEMPTS {
        let mut scene = sample_normal(spec, rng);
        match target {
            ViolationLabel::SingleA => mutate(&mut scene, 0, rng),
            ViolationLabel::SingleB => mutate(&mut scene, 1, rng),
            _ => {
                mutate(&mut scene, 0, rng);
                mutate(&mut scene, 1, rng);
            }
        }
        if classify(&scene, spec)? == target {
            return Ok(scene);
        }
    }
    Err(Error::Generation {
        scenario: spec.name.to_string(),
        target: target.to_string(),
        attempts: MAX_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::check_rules;
    use crate::seed;

    #[test]
    fn normal_samples_are_normal() {
        for id in ScenarioId::ALL {
            let spec = id.spec();
            let mut rng = seed::rng(11);
            for _ in 0..1000 {
                let s = sample_normal(spec, &mut rng);
                assert!(check_rules(&s, spec).unwrap().is_empty(), "{id}: {s:?}");
            }
        }
    }

    #[test]
    fn sticks_normal_shape() {
        let s = sample_normal(ScenarioId::Sticks.spec(), &mut seed::rng(3));
        let long_blue = s.count(|o| o.color_is("blue") && o.length_class == Some(LengthClass::Long));
        let short_red = s.count(|o| o.color_is("red") && o.length_class == Some(LengthClass::Short));
        assert_eq!((long_blue, short_red, s.objects.len()), (2, 1, 3));
    }

    #[test]
    fn same_seed_same_scene() {
        for id in ScenarioId::ALL {
            let a = sample_normal(id.spec(), &mut seed::rng(99));
            let b = sample_normal(id.spec(), &mut seed::rng(99));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn anomalies_hit_target_exactly() {
        for id in ScenarioId::ALL {
            let spec = id.spec();
            let mut rng = seed::rng(5);
            for target in ViolationLabel::ANOMALIES {
                for _ in 0..200 {
                    let s = sample_anomaly(spec, target, &mut rng).unwrap();
                    assert_eq!(classify(&s, spec).unwrap(), target, "{id} {target}");
                }
            }
        }
    }

    #[test]
    fn tapes_single_b_thousand() {
        let spec = ScenarioId::Tapes.spec();
        let mut rng = seed::rng(17);
        for _ in 0..1000 {
            let s = sample_anomaly(spec, ViolationLabel::SingleB, &mut rng).unwrap();
            assert_eq!(classify(&s, spec).unwrap(), ViolationLabel::SingleB);
        }
    }

    #[test]
    fn tools_quantity_keeps_placement() {
        let spec = ScenarioId::Tools.spec();
        let mut rng = seed::rng(23);
        for _ in 0..100 {
            let s = sample_anomaly(spec, ViolationLabel::SingleA, &mut rng).unwrap();
            assert_ne!(s.objects.len(), 6);
            assert!(s.objects.iter().all(|o| o.region.as_deref() == Some(tools_bin(&o.category))));
        }
    }

    #[test]
    fn balls_dual_breaks_compartment_and_color() {
        let spec = ScenarioId::Balls.spec();
        let s = sample_anomaly(spec, ViolationLabel::Dual, &mut seed::rng(1)).unwrap();
        assert_eq!(check_rules(&s, spec).unwrap().len(), 2);
    }

    #[test]
    fn normal_target_rejected() {
        assert!(sample_anomaly(ScenarioId::Fruits.spec(), ViolationLabel::Normal, &mut seed::rng(0)).is_err());
    }

    #[test]
    fn condition_never_changes_label() {
        use crate::scene::CaptureCondition;
        let spec = ScenarioId::Cookies.spec();
        let mut rng = seed::rng(8);
        for target in ViolationLabel::ANOMALIES {
            let s = sample_anomaly(spec, target, &mut rng).unwrap();
            for c in CaptureCondition::ALL {
                assert_eq!(classify(&s.clone().with_condition(c), spec).unwrap(), target);
            }
        }
    }
}
