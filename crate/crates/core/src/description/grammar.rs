//! Slot-template grammar shared by the renderer, the parser and the
//! negative synthesizer.
//!
//! A text is a sequence of sentences. Each sentence realizes one clause
//! template (in one of its paraphrase variants); templates are written in a
//! small DSL:
//!
//! * `word` / trailing `,` `.` `:` are fixed tokens,
//! * `{name}` is a slot; its kind is the part of the name after the last
//!   underscore (`g1_count` has kind `count`),
//! * `{name@first}` renders the slot value as the compound token
//!   `first_<value>`,
//! * `{be:count}` renders `is`/`are` in agreement with a count slot,
//! * `{noun:stick:count}` renders a fixed noun in agreement with a count slot,
//! * `{noun:$name:count}` renders a slot value as a noun in agreement.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{AttributeAspect, ScenarioId};

pub const NUMBER_WORDS: [&str; 13] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
];

pub fn number_word(n: usize) -> Option<&'static str> {
    NUMBER_WORDS.get(n).copied()
}

pub fn number_value(word: &str) -> Option<usize> {
    NUMBER_WORDS.iter().position(|w| *w == word)
}

pub fn plural(lemma: &str) -> String {
    match lemma {
        "knife" => "knives".into(),
        _ if lemma.ends_with("ch") || lemma.ends_with("sh") || lemma.ends_with('s') || lemma.ends_with('x') => {
            format!("{lemma}es")
        }
        _ => format!("{lemma}s"),
    }
}

fn inflect(lemma: &str, count: &str) -> String {
    if count == "one" {
        lemma.to_string()
    } else {
        plural(lemma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotRole {
    /// Carries rule-relevant evidence; contradicting it is a logical edit.
    Rule(AttributeAspect),
    /// Appearance wording that no rule reads.
    Nuisance,
}

#[derive(Debug, Clone)]
pub struct SlotKind {
    pub values: Vec<&'static str>,
    pub role: SlotRole,
    pub numeric: bool,
    /// Groups of values that mean the same thing (never contradictions of
    /// one another).
    pub equivalents: Vec<Vec<&'static str>>,
    /// Values whose contradiction is attributed to a different aspect.
    pub alt_aspect: Option<(AttributeAspect, Vec<&'static str>)>,
}

impl SlotKind {
    pub fn rule(aspect: AttributeAspect, values: &[&'static str]) -> Self {
        SlotKind {
            values: values.to_vec(),
            role: SlotRole::Rule(aspect),
            numeric: false,
            equivalents: Vec::new(),
            alt_aspect: None,
        }
    }

    pub fn nuisance(values: &[&'static str]) -> Self {
        SlotKind {
            role: SlotRole::Nuisance,
            ..SlotKind::rule(AttributeAspect::Type, values)
        }
    }

    pub fn numbers(aspect: AttributeAspect, from: usize) -> Self {
        SlotKind {
            numeric: true,
            ..SlotKind::rule(aspect, &NUMBER_WORDS[from..])
        }
    }

    pub fn with_equivalents(mut self, groups: &[&[&'static str]]) -> Self {
        self.equivalents = groups.iter().map(|g| g.to_vec()).collect();
        self
    }

    pub fn with_alt_aspect(mut self, aspect: AttributeAspect, values: &[&'static str]) -> Self {
        self.alt_aspect = Some((aspect, values.to_vec()));
        self
    }

    pub fn contains(&self, value: &str) -> bool {
        self.values.contains(&value)
    }

    pub fn equivalent(&self, a: &str, b: &str) -> bool {
        a == b || self.equivalents.iter().any(|g| g.contains(&a) && g.contains(&b))
    }

    /// Aspect that contradicting this slot with `new_value` breaks.
    pub fn aspect_for(&self, new_value: &str) -> Option<AttributeAspect> {
        match self.role {
            SlotRole::Nuisance => None,
            SlotRole::Rule(aspect) => match &self.alt_aspect {
                Some((alt, values)) if values.contains(&new_value) => Some(*alt),
                _ => Some(aspect),
            },
        }
    }
}

/// Kind name of a slot: the suffix after the last underscore.
pub fn kind_of(slot: &str) -> &str {
    slot.rsplit('_').next().unwrap_or(slot)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Piece {
    Word(String),
    Punct(char),
    Slot { name: String, prefix: Option<String> },
    Be { count: String },
    Noun { lemma: String, count: String },
    NounSlot { name: String, count: String },
}

const PUNCT: [char; 4] = [',', '.', ':', ';'];

/// Splits on whitespace and peels trailing punctuation off each chunk.
fn chunks(src: &str) -> Vec<(String, bool)> {
    let mut out = Vec::new();
    for chunk in src.split_whitespace() {
        let core = chunk.trim_end_matches(PUNCT);
        if !core.is_empty() {
            out.push((core.to_string(), false));
        }
        for c in chunk[core.len()..].chars() {
            out.push((c.to_string(), true));
        }
    }
    out
}

fn parse_template(src: &str) -> Vec<Piece> {
    chunks(src)
        .into_iter()
        .map(|(tok, punct)| {
            if punct {
                return Piece::Punct(tok.chars().next().unwrap());
            }
            let Some(inner) = tok.strip_prefix('{').and_then(|t| t.strip_suffix('}')) else {
                return Piece::Word(tok);
            };
            let parts: Vec<&str> = inner.split(':').collect();
            match parts.as_slice() {
                ["be", count] => Piece::Be { count: count.to_string() },
                ["noun", lemma, count] => match lemma.strip_prefix('$') {
                    Some(name) => Piece::NounSlot { name: name.to_string(), count: count.to_string() },
                    None => Piece::Noun { lemma: lemma.to_string(), count: count.to_string() },
                },
                [slot] => match slot.split_once('@') {
                    Some((name, prefix)) => Piece::Slot { name: name.to_string(), prefix: Some(prefix.to_string()) },
                    None => Piece::Slot { name: slot.to_string(), prefix: None },
                },
                _ => panic!("bad template directive {{{inner}}}"),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ClauseTemplate {
    pub id: String,
    pub optional: bool,
    pub variants: Vec<Vec<Piece>>,
    /// Slot names in order of first appearance.
    pub slots: Vec<String>,
}

impl ClauseTemplate {
    pub fn new(id: impl Into<String>, optional: bool, variants: &[String]) -> Self {
        let id = id.into();
        let variants: Vec<Vec<Piece>> = variants.iter().map(|v| parse_template(v)).collect();
        let slot_names = |pieces: &[Piece]| {
            let mut slots: Vec<String> = Vec::new();
            for p in pieces {
                if let Piece::Slot { name, .. } | Piece::NounSlot { name, .. } = p {
                    if !slots.contains(name) {
                        slots.push(name.clone());
                    }
                }
            }
            slots
        };
        let slots = slot_names(&variants[0]);
        for v in &variants[1..] {
            let mut a = slot_names(v);
            let mut b = slots.clone();
            a.sort();
            b.sort();
            assert_eq!(a, b, "variants of clause {id} disagree on slots");
        }
        ClauseTemplate { id, optional, variants, slots }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClauseRef {
    pub id: String,
    pub variant: usize,
}

/// Template identifiers of the clauses a text was built from, in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Skeleton {
    pub scenario: ScenarioId,
    pub clauses: Vec<ClauseRef>,
}

/// Slot values extracted from a text plus the skeleton they fill.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeRecord {
    pub skeleton: Skeleton,
    pub slots: Vec<(String, String)>,
}

impl AttributeRecord {
    pub fn get(&self, slot: &str) -> Option<&str> {
        self.slots.iter().find(|(n, _)| n == slot).map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, slot: &str, value: &str) -> bool {
        match self.slots.iter_mut().find(|(n, _)| n == slot) {
            Some(entry) => {
                entry.1 = value.to_string();
                true
            }
            None => false,
        }
    }
}

/// One clause to realize: template id plus slot values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseFill {
    pub id: String,
    pub slots: Vec<(String, String)>,
}

impl ClauseFill {
    pub fn new(id: impl Into<String>) -> Self {
        ClauseFill { id: id.into(), slots: Vec::new() }
    }

    pub fn slot(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.slots.push((name.into(), value.into()));
        self
    }
}

#[derive(Debug)]
pub struct Grammar {
    pub scenario: ScenarioId,
    pub clauses: Vec<ClauseTemplate>,
    index: HashMap<String, usize>,
    pub kinds: BTreeMap<&'static str, SlotKind>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Punct(char),
}

fn join(tokens: &[Tok]) -> String {
    let mut out = String::new();
    for t in tokens {
        match t {
            Tok::Word(w) => {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(w);
            }
            Tok::Punct(c) => out.push(*c),
        }
    }
    out
}

fn tokenize(text: &str) -> Vec<Tok> {
    chunks(text)
        .into_iter()
        .map(|(t, punct)| if punct { Tok::Punct(t.chars().next().unwrap()) } else { Tok::Word(t) })
        .collect()
}

impl Grammar {
    pub fn new(scenario: ScenarioId, clauses: Vec<ClauseTemplate>, kinds: BTreeMap<&'static str, SlotKind>) -> Self {
        let index = clauses.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
        let g = Grammar { scenario, clauses, index, kinds };
        for c in &g.clauses {
            for name in &c.slots {
                assert!(g.kinds.contains_key(kind_of(name)), "slot {name} in {} has no kind", c.id);
            }
        }
        g
    }

    pub fn clause(&self, id: &str) -> Option<&ClauseTemplate> {
        self.index.get(id).map(|&i| &self.clauses[i])
    }

    pub fn kind(&self, slot: &str) -> Option<&SlotKind> {
        self.kinds.get(kind_of(slot))
    }

    fn realize(&self, pieces: &[Piece], values: &HashMap<&str, &str>) -> Result<Vec<Tok>> {
        let get = |name: &str| -> Result<&str> {
            values
                .get(name)
                .copied()
                .ok_or_else(|| Error::Render(format!("missing value for slot `{name}`")))
        };
        pieces
            .iter()
            .map(|p| {
                Ok(match p {
                    Piece::Word(w) => Tok::Word(w.clone()),
                    Piece::Punct(c) => Tok::Punct(*c),
                    Piece::Slot { name, prefix } => {
                        let v = get(name)?;
                        match prefix {
                            Some(pre) => Tok::Word(format!("{pre}_{v}")),
                            None => Tok::Word(v.to_string()),
                        }
                    }
                    Piece::Be { count } => Tok::Word(if get(count)? == "one" { "is" } else { "are" }.into()),
                    Piece::Noun { lemma, count } => Tok::Word(inflect(lemma, get(count)?)),
                    Piece::NounSlot { name, count } => Tok::Word(inflect(get(name)?, get(count)?)),
                })
            })
            .collect()
    }

    fn check_values(&self, slots: &[(String, String)]) -> Result<()> {
        for (name, value) in slots {
            let kind = self
                .kind(name)
                .ok_or_else(|| Error::Render(format!("slot `{name}` is not declared")))?;
            if !kind.contains(value) {
                return Err(Error::OutOfVocabulary {
                    scenario: self.scenario.to_string(),
                    field: "slot",
                    token: format!("{name}={value}"),
                });
            }
        }
        Ok(())
    }

    /// Realizes one clause in the given variant.
    pub fn render_clause(&self, fill: &ClauseFill, variant: usize) -> Result<String> {
        let tmpl = self
            .clause(&fill.id)
            .ok_or_else(|| Error::Render(format!("unknown clause `{}`", fill.id)))?;
        let pieces = tmpl
            .variants
            .get(variant)
            .ok_or_else(|| Error::Render(format!("clause `{}` has no variant {variant}", fill.id)))?;
        self.check_values(&fill.slots)?;
        let values: HashMap<&str, &str> = fill.slots.iter().map(|(n, v)| (n.as_str(), v.as_str())).collect();
        Ok(join(&self.realize(pieces, &values)?))
    }

    /// Re-renders a record; the inverse of [`Grammar::parse`].
    pub fn render_record(&self, record: &AttributeRecord) -> Result<String> {
        let mut slots = record.slots.iter();
        let mut sentences = Vec::with_capacity(record.skeleton.clauses.len());
        for cref in &record.skeleton.clauses {
            let tmpl = self
                .clause(&cref.id)
                .ok_or_else(|| Error::Render(format!("unknown clause `{}`", cref.id)))?;
            let mut fill = ClauseFill::new(&cref.id);
            for name in &tmpl.slots {
                let (n, v) = slots
                    .next()
                    .ok_or_else(|| Error::Render(format!("record is missing slot `{name}`")))?;
                if n != name {
                    return Err(Error::Render(format!("record slot `{n}` where `{name}` was expected")));
                }
                fill.slots.push((n.clone(), v.clone()));
            }
            sentences.push(self.render_clause(&fill, cref.variant)?);
        }
        if slots.next().is_some() {
            return Err(Error::Render("record has more slots than its skeleton".into()));
        }
        Ok(sentences.join(" "))
    }

    fn match_sentence(&self, sentence: &[Tok]) -> Option<(ClauseRef, Vec<(String, String)>)> {
        for tmpl in &self.clauses {
            'variant: for (vi, pieces) in tmpl.variants.iter().enumerate() {
                if pieces.len() != sentence.len() {
                    continue;
                }
                let mut values: Vec<(String, String)> = Vec::new();
                for (p, t) in pieces.iter().zip(sentence) {
                    let ok = match (p, t) {
                        (Piece::Punct(a), Tok::Punct(b)) => a == b,
                        (Piece::Word(a), Tok::Word(b)) => a == b,
                        (Piece::Be { .. }, Tok::Word(b)) => b == "is" || b == "are",
                        (Piece::Noun { lemma, .. }, Tok::Word(b)) => *b == *lemma || *b == plural(lemma),
                        (Piece::Slot { name, prefix }, Tok::Word(b)) => {
                            let raw = match prefix {
                                Some(pre) => b.strip_prefix(pre.as_str()).and_then(|r| r.strip_prefix('_')),
                                None => Some(b.as_str()),
                            };
                            match (raw, self.kind(name)) {
                                (Some(v), Some(kind)) if kind.contains(v) => {
                                    values.push((name.clone(), v.to_string()));
                                    true
                                }
                                _ => false,
                            }
                        }
                        (Piece::NounSlot { name, .. }, Tok::Word(b)) => {
                            let lemma = self
                                .kind(name)
                                .and_then(|k| k.values.iter().find(|v| **v == b.as_str() || plural(v) == *b));
                            match lemma {
                                Some(v) => {
                                    values.push((name.clone(), v.to_string()));
                                    true
                                }
                                None => false,
                            }
                        }
                        _ => false,
                    };
                    if !ok {
                        continue 'variant;
                    }
                }
                // agreement check: the sentence must be exactly what this
                // variant renders for the extracted values
                let map: HashMap<&str, &str> = values.iter().map(|(n, v)| (n.as_str(), v.as_str())).collect();
                match self.realize(pieces, &map) {
                    Ok(toks) if toks == sentence => {}
                    _ => continue 'variant,
                }
                let mut ordered = Vec::with_capacity(tmpl.slots.len());
                for name in &tmpl.slots {
                    let v = map[name.as_str()];
                    ordered.push((name.clone(), v.to_string()));
                }
                return Some((ClauseRef { id: tmpl.id.clone(), variant: vi }, ordered));
            }
        }
        None
    }

    /// Parses a text produced by this grammar back into a record.
    pub fn parse(&self, text: &str) -> Result<AttributeRecord> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::Parse("empty text".into()));
        }
        let mut clauses = Vec::new();
        let mut slots: Vec<(String, String)> = Vec::new();
        for sentence in tokens.split_inclusive(|t| *t == Tok::Punct('.')) {
            let (cref, values) = self.match_sentence(sentence).ok_or_else(|| {
                Error::Parse(format!("no {} template matches `{}`", self.scenario, join(sentence)))
            })?;
            for (n, _) in &values {
                if slots.iter().any(|(m, _)| m == n) {
                    return Err(Error::Parse(format!("slot `{n}` appears twice")));
                }
            }
            clauses.push(cref);
            slots.extend(values);
        }
        Ok(AttributeRecord {
            skeleton: Skeleton { scenario: self.scenario, clauses },
            slots,
        })
    }

    /// The fixed-token sequence of a skeleton with slots shown as `<name>`.
    pub fn skeleton_tokens(&self, skeleton: &Skeleton) -> Vec<String> {
        let mut out = Vec::new();
        for cref in &skeleton.clauses {
            if let Some(pieces) = self.clause(&cref.id).and_then(|t| t.variants.get(cref.variant)) {
                for p in pieces {
                    out.push(match p {
                        Piece::Word(w) => w.clone(),
                        Piece::Punct(c) => c.to_string(),
                        Piece::Slot { name, .. } | Piece::NounSlot { name, .. } => format!("<{name}>"),
                        Piece::Be { count } => format!("<be:{count}>"),
                        Piece::Noun { lemma, count } => format!("<{lemma}:{count}>"),
                    });
                }
            }
        }
        out
    }
}

/// Joins item phrases as `A`, `A and B`, or `A, B, and C`.
pub fn list_phrase(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [a] => a.clone(),
        [a, b] => format!("{a} and {b}"),
        _ => {
            let (last, head) = items.split_last().unwrap();
            format!("{}, and {last}", head.join(", "))
        }
    }
}
