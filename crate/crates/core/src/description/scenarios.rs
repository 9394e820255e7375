//! One template grammar per scenario plus the scene → clause mapping.
//!
//! Grid layouts are described region by region, sequences by explicit
//! ordinal tokens, and relational facts (relative length, row colors, order
//! within a bin) by optional clauses that noisy conditions may drop.
//! The first value of every nuisance kind is the canonical wording.

use std::sync::OnceLock;

use super::grammar::{list_phrase, number_word, ClauseFill, ClauseTemplate, Grammar, SlotKind};
use crate::error::{Error, Result};
use crate::scene::{AttributeAspect::*, LengthClass, ObjectInstance, Scene, ScenarioId};

pub fn grammar(id: ScenarioId) -> &'static Grammar {
    static ALL: OnceLock<Vec<Grammar>> = OnceLock::new();
    &ALL.get_or_init(|| ScenarioId::ALL.iter().map(|&id| build(id)).collect())[id as usize]
}

/// Clause fills describing `scene`, nuisance slots at their canonical value.
pub fn fills(scene: &Scene) -> Result<Vec<ClauseFill>> {
    match scene.scenario_id {
        ScenarioId::Sticks => fill_sticks(scene),
        ScenarioId::Fruits => fill_fruits(scene),
        ScenarioId::Tools => fill_binned(scene, &TOOLS_BINS, |o| Some(o.category.as_str()), TOOLS_ITEMS, "item", "finish"),
        ScenarioId::Cookies => fill_cookies(scene),
        ScenarioId::Tapes => fill_tapes(scene),
        ScenarioId::Stationery => fill_stationery(scene),
        ScenarioId::Ropes => fill_ropes(scene),
        ScenarioId::Blocks => fill_binned(scene, &BLOCKS_BINS, |o| Some(o.category.as_str()), BLOCK_SHAPES, "shape", "tone"),
        ScenarioId::Dishes => fill_dishes(scene),
        ScenarioId::Balls => fill_balls(scene),
    }
}

fn build(id: ScenarioId) -> Grammar {
    let (clauses, kinds) = match id {
        ScenarioId::Sticks => sticks(),
        ScenarioId::Fruits => fruits(),
        ScenarioId::Tools => tools(),
        ScenarioId::Cookies => cookies(),
        ScenarioId::Tapes => tapes(),
        ScenarioId::Stationery => stationery(),
        ScenarioId::Ropes => ropes(),
        ScenarioId::Blocks => blocks(),
        ScenarioId::Dishes => dishes(),
        ScenarioId::Balls => balls(),
    };
    Grammar::new(id, clauses, kinds.into_iter().collect())
}

type Parts = (Vec<ClauseTemplate>, Vec<(&'static str, SlotKind)>);

fn sub(template: &str, subs: &[(&str, &str)]) -> String {
    subs.iter().fold(template.to_string(), |s, (k, v)| s.replace(k, v))
}

fn variants(templates: &[&str], subs: &[(&str, &str)]) -> Vec<String> {
    templates.iter().map(|t| sub(t, subs)).collect()
}

/// `n` list items from `pattern`, with `#` replaced by `stem(i)` for i in 1..=n.
fn listed(n: usize, stem: impl Fn(usize) -> String, pattern: &str) -> String {
    let items: Vec<String> = (1..=n).map(|i| pattern.replace('#', &stem(i))).collect();
    list_phrase(&items)
}

fn clause(id: impl Into<String>, optional: bool, variants: Vec<String>) -> ClauseTemplate {
    ClauseTemplate::new(id, optional, &variants)
}

fn num(n: usize) -> Result<&'static str> {
    number_word(n).ok_or_else(|| Error::Render(format!("count {n} exceeds the number vocabulary")))
}

fn missing(what: &str) -> Error {
    Error::Render(format!("object without {what}"))
}

/// (value, count) groups in vocabulary order, skipping empty groups.
fn groups<'a>(
    objects: impl IntoIterator<Item = &'a ObjectInstance>,
    key: impl Fn(&ObjectInstance) -> Option<&str>,
    order: &[&'static str],
    what: &str,
) -> Result<Vec<(&'static str, usize)>> {
    let mut counts = vec![0usize; order.len()];
    for o in objects {
        let k = key(o).ok_or_else(|| missing(what))?;
        let i = order
            .iter()
            .position(|v| *v == k)
            .ok_or_else(|| Error::Render(format!("{what} `{k}` has no template wording")))?;
        counts[i] += 1;
    }
    Ok(order.iter().zip(counts).filter(|(_, c)| *c > 0).map(|(v, c)| (*v, c)).collect())
}

fn capped(n: usize, max: usize, what: &str) -> Result<usize> {
    if n > max {
        Err(Error::Render(format!("{n} {what} exceed the template maximum of {max}")))
    } else {
        Ok(n)
    }
}

// ---- Sticks ---------------------------------------------------------------

const STICK_COLORS: &[&str] = &["blue", "red"];

fn sticks() -> Parts {
    let mut c = vec![clause(
        "none",
        false,
        variants(&["There are no sticks in the image.", "The image shows no sticks.", "I can see no sticks."], &[]),
    )];
    for n in 1..=2 {
        let l = listed(n, |i| format!("g{i}"), "{#_count} {#_color} {#_shape} {noun:stick:#_count}");
        c.push(clause(
            format!("sticks{n}"),
            false,
            variants(
                &[
                    "There {be:total} {total} {noun:stick:total} in the image: %L.",
                    "The image shows {total} {noun:stick:total}: %L.",
                    "I can see {total} {noun:stick:total}: %L.",
                ],
                &[("%L", &l)],
            ),
        ));
    }
    c.push(clause(
        "length_blue_red",
        true,
        variants(
            &[
                "The blue sticks are {blue_length} and the red sticks are {red_length}.",
                "Relative length: the blue sticks are {blue_length} and the red sticks are {red_length}.",
                "In terms of length, the blue sticks are {blue_length} while the red sticks are {red_length}.",
            ],
            &[],
        ),
    ));
    for color in STICK_COLORS {
        c.push(clause(
            format!("length_{color}"),
            true,
            variants(
                &[
                    "The %c sticks are {%c_length}.",
                    "Relative length: the %c sticks are {%c_length}.",
                    "In terms of length, the %c sticks are {%c_length}.",
                ],
                &[("%c", color)],
            ),
        ));
    }
    let kinds = vec![
        ("total", SlotKind::numbers(Quantity, 0)),
        ("count", SlotKind::numbers(Quantity, 1)),
        ("color", SlotKind::rule(Quantity, STICK_COLORS)),
        ("shape", SlotKind::nuisance(&["rectangular", "cylindrical", "flat", "thin"])),
        ("length", SlotKind::rule(Length, &["long", "short", "mixed"])),
    ];
    (c, kinds)
}

fn length_summary<'a>(objects: impl Iterator<Item = &'a ObjectInstance>) -> Result<&'static str> {
    let mut long = false;
    let mut short = false;
    for o in objects {
        match o.length_class {
            Some(LengthClass::Long) => long = true,
            Some(LengthClass::Short) => short = true,
            Some(LengthClass::Similar) => return Err(Error::Render("stick length must be long or short".into())),
            None => return Err(missing("length")),
        }
    }
    Ok(match (long, short) {
        (true, false) => "long",
        (false, true) => "short",
        _ => "mixed",
    })
}

fn fill_sticks(scene: &Scene) -> Result<Vec<ClauseFill>> {
    if scene.objects.is_empty() {
        return Ok(vec![ClauseFill::new("none")]);
    }
    let g = groups(&scene.objects, |o| o.color.as_deref(), STICK_COLORS, "color")?;
    let mut f = ClauseFill::new(format!("sticks{}", g.len())).slot("total", num(scene.objects.len())?);
    for (i, (color, n)) in g.iter().enumerate() {
        let p = format!("g{}", i + 1);
        f = f
            .slot(format!("{p}_count"), num(*n)?)
            .slot(format!("{p}_color"), *color)
            .slot(format!("{p}_shape"), "rectangular");
    }
    let mut out = vec![f];
    let lengths = g
        .iter()
        .map(|(color, _)| {
            let len = length_summary(scene.objects.iter().filter(|o| o.color_is(color)))?;
            Ok((*color, len))
        })
        .collect::<Result<Vec<_>>>()?;
    let id = format!("length_{}", lengths.iter().map(|(c, _)| *c).collect::<Vec<_>>().join("_"));
    let mut lf = ClauseFill::new(id);
    for (color, len) in lengths {
        lf = lf.slot(format!("{color}_length"), len);
    }
    out.push(lf);
    Ok(out)
}

// ---- Fruits ---------------------------------------------------------------

const FRUITS: &[&str] = &["orange", "kiwi", "apple", "lemon", "peach"];

fn fruits() -> Parts {
    let mut c = vec![clause(
        "none",
        false,
        variants(&["There are no fruits.", "The image contains no fruits.", "I can see no fruits."], &[]),
    )];
    for n in 1..=FRUITS.len() {
        let l = listed(n, |i| format!("item{i}"), "{#_count} {noun:$#_type:#_count}");
        c.push(clause(
            format!("fruits{n}"),
            false,
            variants(&["There {be:item1_count} %L.", "The image contains %L.", "I can see %L."], &[("%L", &l)]),
        ));
    }
    c.push(clause(
        "total",
        false,
        variants(
            &[
                "The total number of items is {total}.",
                "In total there {be:total} {total} {noun:item:total}.",
                "Altogether the count is {total}.",
            ],
            &[],
        ),
    ));
    let mut types = FRUITS.to_vec();
    types.push("kiwifruit");
    let kinds = vec![
        ("count", SlotKind::numbers(Quantity, 1)),
        ("total", SlotKind::numbers(Quantity, 0)),
        ("type", SlotKind::rule(Type, &types).with_equivalents(&[&["kiwi", "kiwifruit"]])),
    ];
    (c, kinds)
}

fn fill_fruits(scene: &Scene) -> Result<Vec<ClauseFill>> {
    if scene.objects.is_empty() {
        return Ok(vec![ClauseFill::new("none")]);
    }
    let g = groups(&scene.objects, |o| Some(o.category.as_str()), FRUITS, "fruit")?;
    let mut f = ClauseFill::new(format!("fruits{}", g.len()));
    for (i, (fruit, n)) in g.iter().enumerate() {
        f = f.slot(format!("item{}_count", i + 1), num(*n)?).slot(format!("item{}_type", i + 1), *fruit);
    }
    Ok(vec![f, ClauseFill::new("total").slot("total", num(scene.objects.len())?)])
}

// ---- Region-wise layouts (Tools, Blocks) ------------------------------------

const TOOLS_BINS: [&str; 3] = ["left", "middle", "right"];
const TOOLS_ITEMS: &[&str] = &["bolt", "washer", "nut"];
const BLOCKS_BINS: [&str; 3] = ["top", "middle", "bottom"];
const BLOCK_SHAPES: &[&str] = &["circle", "triangle", "square", "star", "hexagon"];

/// Per-bin clauses `<bin>_empty` and `<bin>_g<n>`; each group phrase is
/// `count nuisance item`.
fn binned_clauses(bins: &[&str], max_groups: usize, group: &str) -> Vec<ClauseTemplate> {
    let mut c = Vec::new();
    for bin in bins {
        c.push(clause(
            format!("{bin}_empty"),
            false,
            variants(
                &["The %b bin is empty.", "Nothing is in the %b bin.", "The %b bin holds nothing."],
                &[("%b", bin)],
            ),
        ));
        for n in 1..=max_groups {
            let l = listed(n, |i| format!("{bin}_g{i}"), group);
            c.push(clause(
                format!("{bin}_g{n}"),
                false,
                variants(
                    &[
                        "The %b bin contains %L.",
                        "The %b bin holds %L.",
                        "Inside the %b bin there {be:%b_g1_count} %L.",
                    ],
                    &[("%b", bin), ("%L", &l)],
                ),
            ));
        }
    }
    c
}

fn tools() -> Parts {
    let c = binned_clauses(&TOOLS_BINS, TOOLS_ITEMS.len(), "{#_count} {#_finish} {noun:$#_item:#_count}");
    let kinds = vec![
        ("count", SlotKind::numbers(Quantity, 1)),
        ("finish", SlotKind::nuisance(&["silver", "gray", "golden", "copper"])),
        ("item", SlotKind::rule(Placement, TOOLS_ITEMS)),
    ];
    (c, kinds)
}

fn blocks() -> Parts {
    let c = binned_clauses(&BLOCKS_BINS, BLOCK_SHAPES.len(), "{#_count} {#_tone} {#_shape} {noun:block:#_count}");
    let kinds = vec![
        ("count", SlotKind::numbers(Type, 1)),
        ("tone", SlotKind::nuisance(&["beige", "brown", "gray", "natural"])),
        ("shape", SlotKind::rule(Placement, BLOCK_SHAPES).with_alt_aspect(Type, &["star", "hexagon"])),
    ];
    (c, kinds)
}

fn fill_binned(
    scene: &Scene,
    bins: &[&str],
    key: impl Fn(&ObjectInstance) -> Option<&str>,
    order: &[&'static str],
    item_slot: &str,
    nuisance_slot: &str,
) -> Result<Vec<ClauseFill>> {
    if let Some(o) = scene.objects.iter().find(|o| !bins.iter().any(|b| o.region_is(b))) {
        return Err(Error::Render(format!("{} is not in a described bin", o.category)));
    }
    let canonical = grammar(scene.scenario_id).kinds[nuisance_slot].values[0];
    bins.iter()
        .map(|bin| {
            let g = groups(scene.objects.iter().filter(|o| o.region_is(bin)), &key, order, item_slot)?;
            if g.is_empty() {
                return Ok(ClauseFill::new(format!("{bin}_empty")));
            }
            let mut f = ClauseFill::new(format!("{bin}_g{}", g.len()));
            for (i, (item, n)) in g.iter().enumerate() {
                let p = format!("{bin}_g{}", i + 1);
                f = f
                    .slot(format!("{p}_count"), num(*n)?)
                    .slot(format!("{p}_{nuisance_slot}"), canonical)
                    .slot(format!("{p}_{item_slot}"), *item);
            }
            Ok(f)
        })
        .collect()
}

// ---- Cookies --------------------------------------------------------------

const DISHES_C: [&str; 2] = ["square", "round"];
const COOKIE_COLORS: &[&str] = &["yellow", "black", "brown"];

fn cookies() -> Parts {
    let mut c = Vec::new();
    for dish in DISHES_C {
        c.push(clause(
            format!("{dish}_empty"),
            false,
            variants(
                &[
                    "The %d {%d_tone} dish is empty.",
                    "Nothing is on the %d {%d_tone} dish.",
                    "The %d {%d_tone} dish holds nothing.",
                ],
                &[("%d", dish)],
            ),
        ));
        for n in 1..=COOKIE_COLORS.len() {
            let l = listed(n, |i| format!("{dish}_g{i}"), "{#_count} {#_color} {noun:cookie:#_count}");
            c.push(clause(
                format!("{dish}_g{n}"),
                false,
                variants(
                    &[
                        "The %d {%d_tone} dish holds %L.",
                        "On the %d {%d_tone} dish there {be:%d_g1_count} %L.",
                        "The %d {%d_tone} dish carries %L.",
                    ],
                    &[("%d", dish), ("%L", &l)],
                ),
            ));
        }
    }
    let kinds = vec![
        ("count", SlotKind::numbers(Quantity, 1)),
        ("color", SlotKind::rule(Relation, COOKIE_COLORS)),
        ("tone", SlotKind::nuisance(&["white", "gray", "beige", "blue"])),
    ];
    (c, kinds)
}

fn fill_cookies(scene: &Scene) -> Result<Vec<ClauseFill>> {
    if let Some(o) = scene.objects.iter().find(|o| !DISHES_C.iter().any(|d| o.region_is(d))) {
        return Err(Error::Render(format!("{} is not on a described dish", o.category)));
    }
    DISHES_C
        .iter()
        .map(|dish| {
            let g = groups(
                scene.objects.iter().filter(|o| o.region_is(dish)),
                |o| o.color.as_deref(),
                COOKIE_COLORS,
                "color",
            )?;
            let mut f = if g.is_empty() {
                ClauseFill::new(format!("{dish}_empty"))
            } else {
                ClauseFill::new(format!("{dish}_g{}", g.len()))
            };
            f = f.slot(format!("{dish}_tone"), "white");
            for (i, (color, n)) in g.iter().enumerate() {
                let p = format!("{dish}_g{}", i + 1);
                f = f.slot(format!("{p}_count"), num(*n)?).slot(format!("{p}_color"), *color);
            }
            Ok(f)
        })
        .collect()
}

// ---- Tapes ----------------------------------------------------------------

const TAPE_COLORS: &[&str] = &["green", "red", "blue", "yellow"];
const MAX_TAPES: usize = 4;

fn tapes() -> Parts {
    let mut c = vec![clause(
        "none",
        false,
        variants(&["There are no tapes.", "The image shows no tapes.", "I can see no tapes."], &[]),
    )];
    for n in 1..=TAPE_COLORS.len() {
        let l = listed(n, |i| format!("g{i}"), "{#_count} {#_color} {#_finish} {noun:tape:#_count}");
        c.push(clause(
            format!("tapes{n}"),
            false,
            variants(
                &[
                    "There {be:total} {total} {noun:tape:total}: %L.",
                    "The image shows {total} {noun:tape:total}: %L.",
                    "I can see {total} {noun:tape:total}: %L.",
                ],
                &[("%L", &l)],
            ),
        ));
    }
    for n in 1..=MAX_TAPES {
        let first = "The {t1_color} tape is {t1_length}";
        let rest = |lead: &str| {
            let mut items = vec![lead.to_string()];
            items.extend((2..=n).map(|i| format!("the {{t{i}_color}} tape is {{t{i}_length}}")));
            list_phrase(&items)
        };
        c.push(clause(
            format!("length{n}"),
            true,
            vec![
                format!("{}.", rest(first)),
                format!("Relative length: {}.", rest("the {t1_color} tape is {t1_length}")),
                format!("Comparing lengths, {}.", rest("the {t1_color} tape is {t1_length}")),
            ],
        ));
    }
    let kinds = vec![
        ("total", SlotKind::numbers(Type, 0)),
        ("count", SlotKind::numbers(Type, 1)),
        ("color", SlotKind::rule(Type, TAPE_COLORS)),
        ("finish", SlotKind::nuisance(&["plain", "glossy", "striped", "matte"])),
        ("length", SlotKind::rule(Length, &["long", "short", "similar"])),
    ];
    (c, kinds)
}

fn fill_tapes(scene: &Scene) -> Result<Vec<ClauseFill>> {
    if scene.objects.is_empty() {
        return Ok(vec![ClauseFill::new("none")]);
    }
    let g = groups(&scene.objects, |o| o.color.as_deref(), TAPE_COLORS, "color")?;
    let mut f = ClauseFill::new(format!("tapes{}", g.len())).slot("total", num(scene.objects.len())?);
    for (i, (color, n)) in g.iter().enumerate() {
        let p = format!("g{}", i + 1);
        f = f
            .slot(format!("{p}_count"), num(*n)?)
            .slot(format!("{p}_color"), *color)
            .slot(format!("{p}_finish"), "plain");
    }
    let mut tapes: Vec<(usize, LengthClass)> = scene
        .objects
        .iter()
        .map(|o| {
            let c = o.color.as_deref().ok_or_else(|| missing("color"))?;
            let ci = TAPE_COLORS.iter().position(|v| *v == c).unwrap();
            Ok((ci, o.length_class.ok_or_else(|| missing("length"))?))
        })
        .collect::<Result<_>>()?;
    tapes.sort();
    let n = capped(tapes.len(), MAX_TAPES, "tapes")?;
    let mut lf = ClauseFill::new(format!("length{n}"));
    for (i, (ci, len)) in tapes.iter().enumerate() {
        lf = lf
            .slot(format!("t{}_color", i + 1), TAPE_COLORS[*ci])
            .slot(format!("t{}_length", i + 1), len.word());
    }
    Ok(vec![f, lf])
}

// ---- Stationery -----------------------------------------------------------

const STATIONERY_BINS: [&str; 2] = ["left", "right"];
const MAX_BIN_ITEMS: usize = 4;

fn stationery() -> Parts {
    let mut c = Vec::new();
    for bin in STATIONERY_BINS {
        c.push(clause(
            format!("{bin}_empty"),
            false,
            variants(
                &[
                    "The %b {%b_tone} bin is empty.",
                    "Nothing is in the %b {%b_tone} bin.",
                    "The %b {%b_tone} bin holds nothing.",
                ],
                &[("%b", bin)],
            ),
        ));
        for n in 1..=MAX_BIN_ITEMS {
            let l = listed(n, |i| format!("{bin}_i{i}"), "a {#_length} {#_color} {#_item}");
            c.push(clause(
                format!("{bin}_i{n}"),
                false,
                variants(
                    &[
                        "The %b {%b_tone} bin contains %L.",
                        "Inside the %b {%b_tone} bin there is %L.",
                        "The %b {%b_tone} bin holds %L.",
                    ],
                    &[("%b", bin), ("%L", &l)],
                ),
            ));
        }
        c.push(clause(
            format!("{bin}_order"),
            true,
            variants(
                &[
                    "In the %b bin the eraser is {%b_order} the pencil.",
                    "Within the %b bin the eraser sits {%b_order} the pencil.",
                    "For the %b bin, the eraser is placed {%b_order} the pencil.",
                ],
                &[("%b", bin)],
            ),
        ));
    }
    let kinds = vec![
        ("tone", SlotKind::nuisance(&["gray", "white", "clear", "black"])),
        ("length", SlotKind::rule(Length, &["long", "short"])),
        ("color", SlotKind::rule(Placement, &["black", "blue", "red"])),
        ("item", SlotKind::rule(Placement, &["pencil", "eraser"])),
        ("order", SlotKind::rule(Placement, &["left_of", "right_of"])),
    ];
    (c, kinds)
}

fn fill_stationery(scene: &Scene) -> Result<Vec<ClauseFill>> {
    if let Some(o) = scene.objects.iter().find(|o| !STATIONERY_BINS.iter().any(|b| o.region_is(b))) {
        return Err(Error::Render(format!("{} is not in a described bin", o.category)));
    }
    let mut out = Vec::new();
    for bin in STATIONERY_BINS {
        let mut items: Vec<&ObjectInstance> = scene.objects.iter().filter(|o| o.region_is(bin)).collect();
        items.sort_by_key(|o| o.order_index);
        let mut f = if items.is_empty() {
            ClauseFill::new(format!("{bin}_empty"))
        } else {
            ClauseFill::new(format!("{bin}_i{}", capped(items.len(), MAX_BIN_ITEMS, "items")?))
        };
        f = f.slot(format!("{bin}_tone"), "gray");
        for (i, o) in items.iter().enumerate() {
            let p = format!("{bin}_i{}", i + 1);
            f = f
                .slot(format!("{p}_length"), o.length_class.ok_or_else(|| missing("length"))?.word())
                .slot(format!("{p}_color"), o.color.as_deref().ok_or_else(|| missing("color"))?)
                .slot(format!("{p}_item"), o.category.as_str());
        }
        out.push(f);
        let first = |cat: &str| items.iter().find(|o| o.category == cat).and_then(|o| o.order_index);
        if let (Some(e), Some(p)) = (first("eraser"), first("pencil")) {
            let rel = if e < p { "left_of" } else { "right_of" };
            out.push(ClauseFill::new(format!("{bin}_order")).slot(format!("{bin}_order"), rel));
        }
    }
    Ok(out)
}

// ---- Ropes ----------------------------------------------------------------

const ROPE_COLORS: &[&str] = &["red", "blue", "green", "yellow"];

fn ropes() -> Parts {
    let c = vec![
        clause(
            "none",
            false,
            variants(
                &[
                    "There is no rope next to the reference stick.",
                    "No rope lies beside the reference stick.",
                    "The image shows only a reference stick.",
                ],
                &[],
            ),
        ),
        clause(
            "rope",
            false,
            variants(
                &[
                    "There is one {rope_color} {rope_texture} rope next to a reference stick.",
                    "A {rope_color} {rope_texture} rope lies next to a reference stick.",
                    "The image shows a {rope_color} {rope_texture} rope beside a reference stick.",
                ],
                &[],
            ),
        ),
        clause(
            "label",
            false,
            variants(
                &[
                    "The text label reads {label}.",
                    "The label says {label}.",
                    "A label with the word {label} is attached.",
                ],
                &[],
            ),
        ),
        clause(
            "length",
            true,
            variants(
                &[
                    "The rope is {rope_length} compared with the reference stick.",
                    "Compared with the reference stick, the rope length is {rope_length}.",
                    "Relative to the stick, the rope is {rope_length}.",
                ],
                &[],
            ),
        ),
    ];
    let kinds = vec![
        ("color", SlotKind::rule(Relation, ROPE_COLORS)),
        ("label", SlotKind::rule(Relation, ROPE_COLORS)),
        ("texture", SlotKind::nuisance(&["braided", "twisted", "smooth", "thick"])),
        ("length", SlotKind::rule(Length, &["similar", "shorter", "longer"])),
    ];
    (c, kinds)
}

fn fill_ropes(scene: &Scene) -> Result<Vec<ClauseFill>> {
    let mut out = match scene.objects.as_slice() {
        [] => vec![ClauseFill::new("none")],
        [rope] => {
            let len = match rope.length_class.ok_or_else(|| missing("length"))? {
                LengthClass::Similar => "similar",
                LengthClass::Short => "shorter",
                LengthClass::Long => "longer",
            };
            vec![
                ClauseFill::new("rope")
                    .slot("rope_color", rope.color.as_deref().ok_or_else(|| missing("color"))?)
                    .slot("rope_texture", "braided"),
                ClauseFill::new("length").slot("rope_length", len),
            ]
        }
        _ => return Err(Error::Render("the Ropes grammar describes at most one rope".into())),
    };
    if let Some(label) = scene.label() {
        out.insert(out.len().min(1), ClauseFill::new("label").slot("label", label));
    }
    Ok(out)
}

// ---- Dishes ---------------------------------------------------------------

const UTENSILS: &[&str] = &["fork", "plate", "spoon", "knife", "cup"];
const ORDINALS: [&str; 6] = ["first", "second", "third", "fourth", "fifth", "sixth"];

fn dishes() -> Parts {
    let mut c = vec![clause(
        "none",
        false,
        variants(
            &["There are no items on the table.", "The table is empty.", "I can see nothing on the table."],
            &[],
        ),
    )];
    for n in 1..=ORDINALS.len() {
        let l = listed(n, |i| format!("i{i}"), "a {#_finish} {#_item}");
        c.push(clause(
            format!("items{n}"),
            false,
            variants(
                &[
                    "There {be:total} {total} {noun:item:total} on the table: %L.",
                    "The table holds {total} {noun:item:total}: %L.",
                    "I can see {total} {noun:item:total}: %L.",
                ],
                &[("%L", &l)],
            ),
        ));
        let items: Vec<String> = (1..=n).map(|i| format!("{{pos{i}_place@{}}}", ORDINALS[i - 1])).collect();
        let order = list_phrase(&items);
        c.push(clause(
            format!("order{n}"),
            true,
            variants(
                &[
                    "From left to right the order is %O.",
                    "Ordered from left to right: %O.",
                    "The left-to-right arrangement is %O.",
                ],
                &[("%O", &order)],
            ),
        ));
    }
    let kinds = vec![
        ("total", SlotKind::numbers(Type, 0)),
        ("finish", SlotKind::nuisance(&["clean", "shiny", "plain", "worn"])),
        ("item", SlotKind::rule(Type, UTENSILS)),
        ("place", SlotKind::rule(Relation, UTENSILS)),
    ];
    (c, kinds)
}

fn fill_dishes(scene: &Scene) -> Result<Vec<ClauseFill>> {
    if scene.objects.is_empty() {
        return Ok(vec![ClauseFill::new("none")]);
    }
    let n = capped(scene.objects.len(), ORDINALS.len(), "items")?;
    let mut cats: Vec<usize> = scene
        .objects
        .iter()
        .map(|o| {
            UTENSILS
                .iter()
                .position(|u| *u == o.category)
                .ok_or_else(|| Error::Render(format!("item `{}` has no template wording", o.category)))
        })
        .collect::<Result<_>>()?;
    cats.sort();
    let mut f = ClauseFill::new(format!("items{n}")).slot("total", num(n)?);
    for (i, ci) in cats.iter().enumerate() {
        f = f.slot(format!("i{}_finish", i + 1), "clean").slot(format!("i{}_item", i + 1), UTENSILS[*ci]);
    }
    let mut out = vec![f];
    if scene.objects.iter().all(|o| o.order_index.is_some()) {
        let mut seq: Vec<&ObjectInstance> = scene.objects.iter().collect();
        seq.sort_by_key(|o| o.order_index);
        let mut of = ClauseFill::new(format!("order{n}"));
        for (i, o) in seq.iter().enumerate() {
            of = of.slot(format!("pos{}_place", i + 1), o.category.as_str());
        }
        out.push(of);
    }
    Ok(out)
}

// ---- Balls ----------------------------------------------------------------

const COMPARTMENTS: [(&str, &str, &str); 4] = [
    ("top_left", "tl", "top left"),
    ("top_right", "tr", "top right"),
    ("bottom_left", "bl", "bottom left"),
    ("bottom_right", "br", "bottom right"),
];
const BALL_COLORS: &[&str] = &["orange", "white"];

fn balls() -> Parts {
    let mut c = Vec::new();
    let group = "{#_count} {#_color} {#_finish} {noun:ball:#_count}";
    for (_, short, words) in COMPARTMENTS {
        c.push(clause(
            format!("{short}_empty"),
            false,
            variants(
                &[
                    "The %w compartment is empty.",
                    "Nothing is in the %w compartment.",
                    "The %w compartment holds nothing.",
                ],
                &[("%w", words)],
            ),
        ));
        for n in 1..=BALL_COLORS.len() {
            let l = listed(n, |i| format!("{short}_g{i}"), group);
            c.push(clause(
                format!("{short}_g{n}"),
                false,
                variants(
                    &[
                        "The %w compartment holds %L.",
                        "In the %w compartment there {be:%s_g1_count} %L.",
                        "The %w compartment contains %L.",
                    ],
                    &[("%w", words), ("%s", short), ("%L", &l)],
                ),
            ));
        }
    }
    for n in 1..=BALL_COLORS.len() {
        let l = listed(n, |i| format!("out_g{i}"), group);
        c.push(clause(
            format!("out_g{n}"),
            false,
            variants(
                &[
                    "Outside the case there {be:out_g1_count} %L.",
                    "Outside the case the image shows %L.",
                    "Placed outside the case: %L.",
                ],
                &[("%L", &l)],
            ),
        ));
    }
    c.push(clause(
        "rows",
        true,
        variants(
            &[
                "The top row is {top_row} and the bottom row is {bottom_row}.",
                "Row colors: the top row is {top_row} and the bottom row is {bottom_row}.",
                "Looking at the rows, the top row is {top_row} while the bottom row is {bottom_row}.",
            ],
            &[],
        ),
    ));
    let kinds = vec![
        ("count", SlotKind::numbers(Placement, 1)),
        ("color", SlotKind::rule(Relation, BALL_COLORS)),
        ("finish", SlotKind::nuisance(&["smooth", "glossy", "matte", "fuzzy"])),
        ("row", SlotKind::rule(Relation, &["orange", "white", "mixed", "empty"])),
    ];
    (c, kinds)
}

fn ball_groups(scene: &Scene, short: &str, region: &str) -> Result<Option<ClauseFill>> {
    let g = groups(
        scene.objects.iter().filter(|o| o.region_is(region)),
        |o| o.color.as_deref(),
        BALL_COLORS,
        "color",
    )?;
    if g.is_empty() {
        return Ok(None);
    }
    let mut f = ClauseFill::new(format!("{short}_g{}", g.len()));
    for (i, (color, n)) in g.iter().enumerate() {
        let p = format!("{short}_g{}", i + 1);
        f = f
            .slot(format!("{p}_count"), num(*n)?)
            .slot(format!("{p}_color"), *color)
            .slot(format!("{p}_finish"), "smooth");
    }
    Ok(Some(f))
}

fn fill_balls(scene: &Scene) -> Result<Vec<ClauseFill>> {
    let known = |o: &ObjectInstance| o.region_is("outside") || COMPARTMENTS.iter().any(|(r, _, _)| o.region_is(r));
    if scene.objects.iter().any(|o| !known(o)) {
        return Err(Error::Render("ball without a described position".into()));
    }
    let mut out = Vec::new();
    for (region, short, _) in COMPARTMENTS {
        out.push(ball_groups(scene, short, region)?.unwrap_or_else(|| ClauseFill::new(format!("{short}_empty"))));
    }
    if let Some(f) = ball_groups(scene, "out", "outside")? {
        out.push(f);
    }
    let row = |a: &str, b: &str| {
        let colors: Vec<&str> = scene
            .objects
            .iter()
            .filter(|o| o.region_is(a) || o.region_is(b))
            .filter_map(|o| o.color.as_deref())
            .collect();
        match colors.first() {
            None => "empty",
            Some(&c) if colors.iter().all(|x| *x == c) => {
                if c == "orange" {
                    "orange"
                } else {
                    "white"
                }
            }
            _ => "mixed",
        }
    };
    out.push(
        ClauseFill::new("rows")
            .slot("top_row", row("top_left", "top_right"))
            .slot("bottom_row", row("bottom_left", "bottom_right")),
    );
    Ok(out)
}
