//! Staged journey data model.
//!
//! A journey is an ordered list of touchpoint/action events. Every event carries
//! an [`ItemCode`]; its [`Stage`] is a pure function of the code. Validated
//! journeys hold their pre-purchase events (stages 1 and 2, possibly
//! interleaved) followed by exactly one stage-3 outcome event.

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Maximum number of pre-purchase events in one journey.
pub const MAX_STEPS: usize = 10;
/// Maximum total journey length (pre-purchase events plus the outcome).
pub const MAX_LEN: usize = MAX_STEPS + 1;

/// One of the 13 questionnaire items `a`..`m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ItemCode {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
    J,
    K,
    L,
    M,
}

impl ItemCode {
    pub const ALL: [ItemCode; 13] = [
        ItemCode::A,
        ItemCode::B,
        ItemCode::C,
        ItemCode::D,
        ItemCode::E,
        ItemCode::F,
        ItemCode::G,
        ItemCode::H,
        ItemCode::I,
        ItemCode::J,
        ItemCode::K,
        ItemCode::L,
        ItemCode::M,
    ];

    pub fn from_char(c: char) -> Option<Self> {
        let idx = (c as u32).checked_sub('a' as u32)? as usize;
        Self::ALL.get(idx).copied()
    }

    /// Parses a single-letter item code. Surrounding whitespace is ignored.
    pub fn parse(symbol: &str) -> Result<Self> {
        let trimmed = symbol.trim();
        let mut chars = trimmed.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Self::from_char(c),
            _ => None,
        }
        .ok_or_else(|| Error::UnknownSymbol(symbol.to_string()))
    }

    pub fn as_char(self) -> char {
        (b'a' + self as u8) as char
    }

    pub fn stage(self) -> Option<Stage> {
        stage_of(self)
    }

    /// Plain-language caption of the questionnaire item.
    pub fn caption(self) -> &'static str {
        match self {
            ItemCode::A => "Knowing the product through TV commercials",
            ItemCode::B => "Knowing the product through direct word of mouth",
            ItemCode::C => "Word of mouth on social media",
            ItemCode::D => "Knowing the product through other methods",
            ItemCode::E => "Comparing on websites by searching",
            ItemCode::F => "Comparing on e-commerce sites",
            ItemCode::G => "Comparing in stores",
            ItemCode::H => "Comparing on social media",
            ItemCode::I => "Purchase on an e-commerce site",
            ItemCode::J => "Purchase in a store",
            ItemCode::K => "No purchase",
            ItemCode::L => "Writing product reviews on social media",
            ItemCode::M => "Other",
        }
    }

    /// The symbol used in distance computations. Purchase channels collapse to
    /// `1`, non-purchase to `0`; post-purchase items have no symbol.
    pub fn canonical(self) -> Option<Symbol> {
        match self {
            ItemCode::I | ItemCode::J => Some(Symbol::Purchase),
            ItemCode::K => Some(Symbol::NoPurchase),
            ItemCode::L | ItemCode::M => None,
            other => Some(Symbol::Item(other)),
        }
    }
}

impl fmt::Display for ItemCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl Serialize for ItemCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Consumption stage. Ordered for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    /// Awareness (first recognition).
    St1,
    /// Information gathering.
    St2,
    /// Purchase or non-purchase.
    St3,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::St1, Stage::St2, Stage::St3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::St1 => "st1",
            Stage::St2 => "st2",
            Stage::St3 => "st3",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Stage {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

/// Stage of an item; `None` for the excluded post-purchase items `l` and `m`.
pub fn stage_of(item: ItemCode) -> Option<Stage> {
    use ItemCode::*;
    match item {
        A | B | C | D => Some(Stage::St1),
        E | F | G | H => Some(Stage::St2),
        I | J | K => Some(Stage::St3),
        L | M => None,
    }
}

/// Canonical alphabet of the distance metric: items `a`..`h` plus the two
/// outcome symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Item(ItemCode),
    Purchase,
    NoPurchase,
}

impl Symbol {
    /// All canonical symbols in matrix order: `a`..`h`, `1`, `0`.
    pub const ALL: [Symbol; 10] = [
        Symbol::Item(ItemCode::A),
        Symbol::Item(ItemCode::B),
        Symbol::Item(ItemCode::C),
        Symbol::Item(ItemCode::D),
        Symbol::Item(ItemCode::E),
        Symbol::Item(ItemCode::F),
        Symbol::Item(ItemCode::G),
        Symbol::Item(ItemCode::H),
        Symbol::Purchase,
        Symbol::NoPurchase,
    ];

    pub fn index(self) -> usize {
        match self {
            Symbol::Item(item) => item as usize,
            Symbol::Purchase => 8,
            Symbol::NoPurchase => 9,
        }
    }

    pub fn stage(self) -> Stage {
        match self {
            Symbol::Item(item) => stage_of(item).expect("canonical items have a stage"),
            _ => Stage::St3,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Item(item) => write!(f, "{item}"),
            Symbol::Purchase => f.write_str("1"),
            Symbol::NoPurchase => f.write_str("0"),
        }
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Binary purchase outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    NonPurchase = 0,
    Purchase = 1,
}

impl Outcome {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Outcome::NonPurchase),
            1 => Some(Outcome::Purchase),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn value(self) -> f64 {
        f64::from(self.bit())
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.bit())
    }
}

/// Outcome encoded by a stage-3 item, `None` for non-outcome items.
pub fn outcome_of(item: ItemCode) -> Option<Outcome> {
    match item {
        ItemCode::I | ItemCode::J => Some(Outcome::Purchase),
        ItemCode::K => Some(Outcome::NonPurchase),
        _ => None,
    }
}

/// The items of one stage, in journey order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageProjection {
    pub stage: Stage,
    pub items: Vec<ItemCode>,
}

impl StageProjection {
    pub fn symbols(&self) -> Vec<Symbol> {
        self.items.iter().filter_map(|item| item.canonical()).collect()
    }
}

/// One respondent's journey.
///
/// `steps` are the pre-purchase events (stages 1 and 2), `outcome` the
/// terminal stage-3 event. Journeys read from data always carry an outcome;
/// query journeys built from a partial draft may not.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Journey {
    id: String,
    steps: Vec<ItemCode>,
    outcome: Option<ItemCode>,
}

impl Journey {
    /// Builds a journey without checking the transition rules. Callers in
    /// this crate validate first.
    pub(crate) fn from_parts(id: String, steps: Vec<ItemCode>, outcome: Option<ItemCode>) -> Self {
        Journey { id, steps, outcome }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn steps(&self) -> &[ItemCode] {
        &self.steps
    }

    pub fn outcome_item(&self) -> Option<ItemCode> {
        self.outcome
    }

    /// All events in order, outcome last.
    pub fn items(&self) -> impl Iterator<Item = ItemCode> + '_ {
        self.steps.iter().copied().chain(self.outcome)
    }

    pub fn len(&self) -> usize {
        self.steps.len() + usize::from(self.outcome.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Observed label, if the journey has an outcome.
    pub fn label(&self) -> Option<Outcome> {
        self.outcome.and_then(outcome_of)
    }

    pub fn outcome_label(&self) -> Result<Outcome> {
        self.label().ok_or(Error::MissingOutcome)
    }

    pub fn project(&self, stage: Stage) -> StageProjection {
        StageProjection {
            stage,
            items: self.items().filter(|item| item.stage() == Some(stage)).collect(),
        }
    }

    /// Canonical symbols of one stage.
    pub fn stage_symbols(&self, stage: Stage) -> Vec<Symbol> {
        self.items()
            .filter(|item| item.stage() == Some(stage))
            .filter_map(ItemCode::canonical)
            .collect()
    }

    /// 1-based journey positions of the events belonging to `stage`.
    pub fn stage_positions(&self, stage: Stage) -> Vec<usize> {
        self.items()
            .enumerate()
            .filter(|(_, item)| item.stage() == Some(stage))
            .map(|(pos, _)| pos + 1)
            .collect()
    }

    /// The whole journey as canonical symbols, e.g. `[c, e, g, 1]`.
    pub fn canonical(&self) -> Vec<Symbol> {
        self.items().filter_map(ItemCode::canonical).collect()
    }

    /// Bracketed canonical notation such as `[c, e, g, 1]`.
    pub fn notation(&self) -> String {
        let parts: Vec<String> = self.canonical().iter().map(ToString::to_string).collect();
        format!("[{}]", parts.join(", "))
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

impl Serialize for Journey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let items: Vec<ItemCode> = self.items().collect();
        let mut s = serializer.serialize_struct("Journey", 4)?;
        s.serialize_field("id", &self.id)?;
        s.serialize_field("items", &items)?;
        s.serialize_field("canonical", &self.canonical())?;
        s.serialize_field("label", &self.label())?;
        s.end()
    }
}

/// Validated collection of labelled journeys with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    journeys: Vec<Journey>,
    provenance: String,
    item_counts: BTreeMap<ItemCode, usize>,
}

impl Dataset {
    pub fn new(journeys: Vec<Journey>, provenance: impl Into<String>) -> Result<Self> {
        if journeys.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = std::collections::HashSet::with_capacity(journeys.len());
        for journey in &journeys {
            if journey.label().is_none() {
                return Err(Error::MissingOutcome);
            }
            if !seen.insert(journey.id()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate journey id {:?}",
                    journey.id()
                )));
            }
        }
        let mut item_counts = BTreeMap::new();
        for item in journeys.iter().flat_map(Journey::items) {
            *item_counts.entry(item).or_insert(0) += 1;
        }
        Ok(Dataset {
            journeys,
            provenance: provenance.into(),
            item_counts,
        })
    }

    pub fn journeys(&self) -> &[Journey] {
        &self.journeys
    }

    pub fn len(&self) -> usize {
        self.journeys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.journeys.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Journey> {
        self.journeys.get(index)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.journeys.iter().position(|j| j.id() == id)
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn item_counts(&self) -> &BTreeMap<ItemCode, usize> {
        &self.item_counts
    }

    pub fn labels(&self) -> Vec<Outcome> {
        self.journeys
            .iter()
            .map(|j| j.label().expect("dataset journeys are labelled"))
            .collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.journeys.iter().map(|j| j.id().to_string()).collect()
    }

    /// A new dataset holding the journeys at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let journeys = indices.iter().map(|&i| self.journeys[i].clone()).collect();
        Dataset::new(journeys, format!("{} (subset)", self.provenance))
    }
}
