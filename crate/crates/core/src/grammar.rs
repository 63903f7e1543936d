//! The attributed grammar: structures, components, layouts and entities,
//! together with the finite attribute domains every node draws from.
//!
//! A panel is a sentence of this grammar:
//!
//! ```text
//! Scene -> Structure -> Component+ -> Layout -> Entity*
//! ```
//!
//! `Number`, `Position` and `Uniformity` live on the layout; `Type`, `Size`,
//! `Color` and `Orientation` live on each entity. `Uniformity` and
//! `Orientation` are noise and are never governed by a rule.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{RavenError, Result};

/// Shape names ordered by side count, circle last.
pub const TYPE_NAMES: [&str; 5] = ["triangle", "square", "pentagon", "hexagon", "circle"];
/// Entity scale as a fraction of the cell's shorter side.
pub const SIZE_VALUES: [f64; 6] = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
/// Grayscale fill intensity, lightest first.
pub const COLOR_VALUES: [u8; 10] = [255, 224, 196, 168, 140, 112, 84, 56, 28, 0];
/// Self-rotation in degrees.
pub const ANGLE_VALUES: [i16; 8] = [-135, -90, -45, 0, 45, 90, 135, 180];

/// Margin around each grid cell, as a fraction of the subdivided region.
const GRID_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FigureConfiguration {
    Center,
    Grid2x2,
    Grid3x3,
    LeftRight,
    UpDown,
    OutInCenter,
    OutInGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Structure {
    Singleton,
    LeftRight,
    UpDown,
    OutIn,
}

/// Role of a component inside its structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentKind {
    /// The sole component of a `Singleton` structure.
    Whole,
    Left,
    Right,
    Up,
    Down,
    Out,
    In,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LayoutKind {
    SingleCenter,
    SingleLeft,
    SingleRight,
    SingleUp,
    SingleDown,
    SingleOut,
    SingleInCenter,
    Grid2x2,
    Grid3x3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    Number,
    Position,
    Type,
    Size,
    Color,
    Uniformity,
    Orientation,
}

/// Axis-aligned rectangle in normalized panel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// An attribute value. Its meaning depends on the attribute:
/// a count for `Number`, a slot bitmask for `Position`, a boolean (0/1) for
/// `Uniformity`, and a level index into the value tables otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(pub u16);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDomain {
    pub attribute: Attribute,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub kind: ComponentKind,
    pub layout_kind: LayoutKind,
    /// Region the layout subdivides.
    pub region: Rect,
    /// Entity cells, row-major.
    pub slots: Vec<Rect>,
    pub max_entities: usize,
    domains: Vec<AttributeDomain>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub slot: u8,
    pub type_idx: u8,
    pub size_idx: u8,
    pub color_idx: u8,
    pub angle_idx: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentState {
    pub uniformity: bool,
    /// Occupied slots in ascending slot order.
    pub entities: Vec<Entity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PanelState {
    pub config: FigureConfiguration,
    pub components: Vec<ComponentState>,
}

impl FigureConfiguration {
    pub const ALL: [FigureConfiguration; 7] = [
        FigureConfiguration::Center,
        FigureConfiguration::Grid2x2,
        FigureConfiguration::Grid3x3,
        FigureConfiguration::LeftRight,
        FigureConfiguration::UpDown,
        FigureConfiguration::OutInCenter,
        FigureConfiguration::OutInGrid,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn structure(self) -> Structure {
        match self {
            Self::Center | Self::Grid2x2 | Self::Grid3x3 => Structure::Singleton,
            Self::LeftRight => Structure::LeftRight,
            Self::UpDown => Structure::UpDown,
            Self::OutInCenter | Self::OutInGrid => Structure::OutIn,
        }
    }

    pub fn components(self) -> &'static [ComponentSpec] {
        &component_table()[self.ordinal()]
    }

    pub fn component(self, index: usize) -> Result<&'static ComponentSpec> {
        self.components().get(index).ok_or(RavenError::DomainLookup {
            config: self,
            component: index,
            attribute: Attribute::Number,
        })
    }

    /// Identifier used for directories and command-line flags.
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Center => "center",
            Self::Grid2x2 => "grid_2x2",
            Self::Grid3x3 => "grid_3x3",
            Self::LeftRight => "left_right",
            Self::UpDown => "up_down",
            Self::OutInCenter => "out_in_center",
            Self::OutInGrid => "out_in_grid",
        }
    }

    /// Short column label for result tables.
    pub fn label(self) -> &'static str {
        match self {
            Self::Center => "Center",
            Self::Grid2x2 => "2x2Grid",
            Self::Grid3x3 => "3x3Grid",
            Self::LeftRight => "L-R",
            Self::UpDown => "U-D",
            Self::OutInCenter => "O-IC",
            Self::OutInGrid => "O-IG",
        }
    }

    /// Inverse of the (structure, layouts) projection used by the tree format.
    pub fn from_parts(structure: Structure, layouts: &[LayoutKind]) -> Option<Self> {
        Self::ALL.into_iter().find(|config| {
            config.structure() == structure
                && config.components().len() == layouts.len()
                && config
                    .components()
                    .iter()
                    .zip(layouts)
                    .all(|(spec, layout)| spec.layout_kind == *layout)
        })
    }
}

impl fmt::Display for FigureConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureConfiguration {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|c| {
                c.as_str() == wanted
                    || c.label().to_ascii_lowercase() == wanted
                    || format!("{c:?}").to_ascii_lowercase() == wanted
            })
            .ok_or_else(|| format!("unknown figure configuration `{s}`"))
    }
}

impl Structure {
    pub const ALL: [Structure; 4] = [
        Structure::Singleton,
        Structure::LeftRight,
        Structure::UpDown,
        Structure::OutIn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Singleton => "Singleton",
            Self::LeftRight => "LeftRight",
            Self::UpDown => "UpDown",
            Self::OutIn => "OutIn",
        }
    }
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 7] = [
        ComponentKind::Whole,
        ComponentKind::Left,
        ComponentKind::Right,
        ComponentKind::Up,
        ComponentKind::Down,
        ComponentKind::Out,
        ComponentKind::In,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Whole => "Whole",
            Self::Left => "Left",
            Self::Right => "Right",
            Self::Up => "Up",
            Self::Down => "Down",
            Self::Out => "Out",
            Self::In => "In",
        }
    }
}

impl LayoutKind {
    pub const ALL: [LayoutKind; 9] = [
        LayoutKind::SingleCenter,
        LayoutKind::SingleLeft,
        LayoutKind::SingleRight,
        LayoutKind::SingleUp,
        LayoutKind::SingleDown,
        LayoutKind::SingleOut,
        LayoutKind::SingleInCenter,
        LayoutKind::Grid2x2,
        LayoutKind::Grid3x3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::SingleCenter => "SingleCenter",
            Self::SingleLeft => "SingleLeft",
            Self::SingleRight => "SingleRight",
            Self::SingleUp => "SingleUp",
            Self::SingleDown => "SingleDown",
            Self::SingleOut => "SingleOut",
            Self::SingleInCenter => "SingleInCenter",
            Self::Grid2x2 => "Grid2x2",
            Self::Grid3x3 => "Grid3x3",
        }
    }
}

impl Attribute {
    pub const ALL: [Attribute; 7] = [
        Attribute::Number,
        Attribute::Position,
        Attribute::Type,
        Attribute::Size,
        Attribute::Color,
        Attribute::Uniformity,
        Attribute::Orientation,
    ];

    /// Attributes a rule may govern.
    pub const RULE_TARGETS: [Attribute; 5] = [
        Attribute::Number,
        Attribute::Position,
        Attribute::Type,
        Attribute::Size,
        Attribute::Color,
    ];

    pub fn is_noise(self) -> bool {
        matches!(self, Attribute::Uniformity | Attribute::Orientation)
    }

    pub fn is_entity_level(self) -> bool {
        matches!(
            self,
            Attribute::Type | Attribute::Size | Attribute::Color | Attribute::Orientation
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Number => "Number",
            Self::Position => "Position",
            Self::Type => "Type",
            Self::Size => "Size",
            Self::Color => "Color",
            Self::Uniformity => "Uniformity",
            Self::Orientation => "Orientation",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x: 0.0,
        y: 0.0,
        w: 1.0,
        h: 1.0,
    };

    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// True when the two rectangles share interior area.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x < other.right() && other.x < self.right() && self.y < other.bottom() && other.y < self.bottom()
    }

    pub fn contains(&self, other: &Rect) -> bool {
        other.x >= self.x && other.y >= self.y && other.right() <= self.right() && other.bottom() <= self.bottom()
    }

    pub fn strictly_contains(&self, other: &Rect) -> bool {
        other.x > self.x && other.y > self.y && other.right() < self.right() && other.bottom() < self.bottom()
    }

    /// Equal `n`×`n` subdivision, each cell inset by the grid margin.
    fn grid(&self, n: usize) -> Vec<Rect> {
        let (cw, ch) = (self.w / n as f64, self.h / n as f64);
        let (mx, my) = (GRID_MARGIN * self.w, GRID_MARGIN * self.h);
        (0..n * n)
            .map(|i| {
                let (row, col) = ((i / n) as f64, (i % n) as f64);
                Rect::new(
                    self.x + col * cw + mx,
                    self.y + row * ch + my,
                    cw - 2.0 * mx,
                    ch - 2.0 * my,
                )
            })
            .collect()
    }
}

/// Slot-set helpers for `Position` values.
pub mod slots {
    use super::Value;

    pub fn from_slots(slots: impl IntoIterator<Item = usize>) -> Value {
        Value(slots.into_iter().fold(0u16, |mask, s| mask | (1 << s)))
    }

    pub fn to_slots(value: Value) -> Vec<usize> {
        (0..16).filter(|s| value.0 & (1 << s) != 0).collect()
    }

    pub fn count(value: Value) -> usize {
        value.0.count_ones() as usize
    }

    pub fn full(slot_count: usize) -> Value {
        Value(((1u32 << slot_count) - 1) as u16)
    }

    /// Cyclic shift of an occupied-slot set in slot order.
    pub fn rotate(value: Value, delta: i32, slot_count: usize) -> Value {
        let n = slot_count as i32;
        from_slots(
            to_slots(value)
                .into_iter()
                .map(|s| (s as i32 + delta).rem_euclid(n) as usize),
        )
    }
}

impl AttributeDomain {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, value: Value) -> bool {
        match self.attribute {
            Attribute::Position => value.0 != 0 && value.0 <= slots::full(self.slot_count()).0,
            _ => self.values.binary_search(&value).is_ok(),
        }
    }

    pub fn index_of(&self, value: Value) -> Option<usize> {
        match self.attribute {
            // Position tables are not sorted by raw mask.
            Attribute::Position => self.values.iter().position(|v| *v == value),
            _ => self.values.binary_search(&value).ok(),
        }
    }

    /// Number of layout slots; only meaningful for `Position` and `Number`.
    pub fn slot_count(&self) -> usize {
        match self.attribute {
            Attribute::Position => self.values.last().map_or(0, |v| slots::count(*v)),
            Attribute::Number => self.values.last().map_or(0, |v| v.0 as usize),
            _ => 0,
        }
    }
}

impl ComponentSpec {
    pub fn domain(&self, attribute: Attribute) -> &AttributeDomain {
        &self.domains[attribute as usize]
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    fn new(kind: ComponentKind, layout_kind: LayoutKind, region: Rect) -> Self {
        let slots = match layout_kind {
            LayoutKind::Grid2x2 => region.grid(2),
            LayoutKind::Grid3x3 => region.grid(3),
            _ => vec![region],
        };
        let n = slots.len();
        let outside = kind == ComponentKind::Out;
        let levels = |range: std::ops::Range<u16>| range.map(Value).collect::<Vec<_>>();
        let domains = Attribute::ALL
            .into_iter()
            .map(|attribute| {
                let values = match attribute {
                    Attribute::Number => levels(1..n as u16 + 1),
                    Attribute::Position => position_values(n),
                    Attribute::Type => levels(0..TYPE_NAMES.len() as u16),
                    // The outside entity stays large and light so the inside
                    // component remains visible.
                    Attribute::Size if outside => levels(4..SIZE_VALUES.len() as u16),
                    Attribute::Size => levels(0..SIZE_VALUES.len() as u16),
                    Attribute::Color if outside => levels(0..1),
                    Attribute::Color => levels(0..COLOR_VALUES.len() as u16),
                    Attribute::Uniformity if n == 1 => levels(1..2),
                    Attribute::Uniformity => levels(0..2),
                    Attribute::Orientation => levels(0..ANGLE_VALUES.len() as u16),
                };
                AttributeDomain { attribute, values }
            })
            .collect();
        ComponentSpec {
            kind,
            layout_kind,
            region,
            slots,
            max_entities: n,
            domains,
        }
    }
}

/// Non-empty slot subsets ordered by cardinality, then lexicographically by
/// slot indices.
fn position_values(slot_count: usize) -> Vec<Value> {
    let mut sets: Vec<(usize, Vec<usize>, Value)> = (1u16..1 << slot_count)
        .map(|mask| {
            let v = Value(mask);
            (slots::count(v), slots::to_slots(v), v)
        })
        .collect();
    sets.sort();
    sets.into_iter().map(|(_, _, v)| v).collect()
}

fn component_table() -> &'static [Vec<ComponentSpec>; 7] {
    static TABLE: OnceLock<[Vec<ComponentSpec>; 7]> = OnceLock::new();
    TABLE.get_or_init(|| {
        use ComponentKind as K;
        use LayoutKind as L;
        let inside = Rect::new(0.25, 0.25, 0.5, 0.5);
        FigureConfiguration::ALL.map(|config| match config {
            FigureConfiguration::Center => {
                vec![ComponentSpec::new(K::Whole, L::SingleCenter, Rect::UNIT)]
            }
            FigureConfiguration::Grid2x2 => {
                vec![ComponentSpec::new(K::Whole, L::Grid2x2, Rect::UNIT)]
            }
            FigureConfiguration::Grid3x3 => {
                vec![ComponentSpec::new(K::Whole, L::Grid3x3, Rect::UNIT)]
            }
            FigureConfiguration::LeftRight => vec![
                ComponentSpec::new(K::Left, L::SingleLeft, Rect::new(0.0, 0.0, 0.5, 1.0)),
                ComponentSpec::new(K::Right, L::SingleRight, Rect::new(0.5, 0.0, 0.5, 1.0)),
            ],
            FigureConfiguration::UpDown => vec![
                ComponentSpec::new(K::Up, L::SingleUp, Rect::new(0.0, 0.0, 1.0, 0.5)),
                ComponentSpec::new(K::Down, L::SingleDown, Rect::new(0.0, 0.5, 1.0, 0.5)),
            ],
            FigureConfiguration::OutInCenter => vec![
                ComponentSpec::new(K::Out, L::SingleOut, Rect::UNIT),
                ComponentSpec::new(K::In, L::SingleInCenter, inside),
            ],
            FigureConfiguration::OutInGrid => vec![
                ComponentSpec::new(K::Out, L::SingleOut, Rect::UNIT),
                ComponentSpec::new(K::In, L::Grid2x2, inside),
            ],
        })
    })
}

/// Ordered value table for one attribute of one component.
pub fn attribute_domain(
    config: FigureConfiguration,
    component_index: usize,
    attribute: Attribute,
) -> Result<AttributeDomain> {
    config
        .components()
        .get(component_index)
        .map(|spec| spec.domain(attribute).clone())
        .ok_or(RavenError::DomainLookup {
            config,
            component: component_index,
            attribute,
        })
}

impl Entity {
    pub fn level(&self, attribute: Attribute) -> Option<u8> {
        match attribute {
            Attribute::Type => Some(self.type_idx),
            Attribute::Size => Some(self.size_idx),
            Attribute::Color => Some(self.color_idx),
            Attribute::Orientation => Some(self.angle_idx),
            _ => None,
        }
    }

    pub fn set_level(&mut self, attribute: Attribute, level: u8) {
        match attribute {
            Attribute::Type => self.type_idx = level,
            Attribute::Size => self.size_idx = level,
            Attribute::Color => self.color_idx = level,
            Attribute::Orientation => self.angle_idx = level,
            _ => {}
        }
    }
}

impl ComponentState {
    pub fn number(&self) -> usize {
        self.entities.len()
    }

    pub fn position(&self) -> Value {
        slots::from_slots(self.entities.iter().map(|e| e.slot as usize))
    }

    /// The component-level value of a rule-governed attribute.
    ///
    /// Entity attributes only have a component-level value when the layout
    /// is uniform and every entity agrees; otherwise `None`.
    pub fn value(&self, attribute: Attribute) -> Option<Value> {
        match attribute {
            Attribute::Number => Some(Value(self.number() as u16)),
            Attribute::Position => Some(self.position()),
            Attribute::Uniformity => Some(Value(self.uniformity as u16)),
            Attribute::Orientation => None,
            Attribute::Type | Attribute::Size | Attribute::Color => {
                if !self.uniformity {
                    return None;
                }
                let first = self.entities.first()?.level(attribute)?;
                self.entities
                    .iter()
                    .all(|e| e.level(attribute) == Some(first))
                    .then_some(Value(first as u16))
            }
        }
    }
}

impl PanelState {
    /// Checks every structural invariant against the grammar tables.
    pub fn validate(&self) -> Result<()> {
        let specs = self.config.components();
        if specs.len() != self.components.len() {
            return Err(RavenError::InvalidPanel(format!(
                "{} expects {} components, found {}",
                self.config,
                specs.len(),
                self.components.len()
            )));
        }
        for (ci, (spec, comp)) in specs.iter().zip(&self.components).enumerate() {
            let bad = |msg: String| RavenError::InvalidPanel(format!("component {ci}: {msg}"));
            if comp.entities.is_empty() {
                return Err(bad("layout has no entities".into()));
            }
            if !spec.domain(Attribute::Number).contains(Value(comp.number() as u16)) {
                return Err(bad(format!("number {} out of domain", comp.number())));
            }
            if comp.entities.windows(2).any(|w| w[0].slot >= w[1].slot) {
                return Err(bad("entity slots not strictly ascending".into()));
            }
            if comp.entities.iter().any(|e| e.slot as usize >= spec.slot_count()) {
                return Err(bad("entity slot outside layout".into()));
            }
            if !spec
                .domain(Attribute::Uniformity)
                .contains(Value(comp.uniformity as u16))
            {
                return Err(bad("uniformity not admissible for this layout".into()));
            }
            for entity in &comp.entities {
                for attribute in [
                    Attribute::Type,
                    Attribute::Size,
                    Attribute::Color,
                    Attribute::Orientation,
                ] {
                    let level = entity.level(attribute).unwrap_or_default();
                    if !spec.domain(attribute).contains(Value(level as u16)) {
                        return Err(bad(format!("{attribute:?} level {level} out of domain")));
                    }
                }
            }
            if comp.uniformity {
                let first = comp.entities[0];
                if comp
                    .entities
                    .iter()
                    .any(|e| (e.type_idx, e.size_idx, e.color_idx) != (first.type_idx, first.size_idx, first.color_idx))
                {
                    return Err(bad("uniform layout with differing entities".into()));
                }
            }
        }
        Ok(())
    }
}
