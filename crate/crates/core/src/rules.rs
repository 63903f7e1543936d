//! Row-wise relations: the four rule types, their eight instantiations, and
//! the apply / check / infer operations the sampler and solver share.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{RavenError, Result};
use crate::grammar::{slots, Attribute, AttributeDomain, Value};

pub const PROGRESSION_DELTAS: [i8; 4] = [-2, -1, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleType {
    Constant,
    Progression,
    Arithmetic,
    DistributeThree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithmeticOp {
    Plus,
    Minus,
}

/// Three distinct values laid out as a 3×3 Latin square: `rows[r][c]`
/// indexes into `values` for row `r`, column `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Distribution {
    pub values: [Value; 3],
    pub rows: [[u8; 3]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    Constant,
    Progression(i8),
    Arithmetic(ArithmeticOp),
    DistributeThree(Distribution),
}

/// A rule instantiation with its parameters stripped of sampled payload.
/// Exactly eight exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleClass {
    Constant,
    Progression(i8),
    Arithmetic(ArithmeticOp),
    DistributeThree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleSpec {
    pub target: Attribute,
    pub rule: Rule,
}

/// The four rule slots shared by every entity of one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleSlot {
    /// Governs either `Number` or `Position`.
    Layout,
    Type,
    Size,
    Color,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleGroup {
    pub component: usize,
    pub slots: [RuleSpec; 4],
}

impl RuleType {
    pub const ALL: [RuleType; 4] = [
        RuleType::Constant,
        RuleType::Progression,
        RuleType::Arithmetic,
        RuleType::DistributeThree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Constant => "Constant",
            Self::Progression => "Progression",
            Self::Arithmetic => "Arithmetic",
            Self::DistributeThree => "DistributeThree",
        }
    }
}

impl RuleClass {
    pub fn rule_type(self) -> RuleType {
        match self {
            Self::Constant => RuleType::Constant,
            Self::Progression(_) => RuleType::Progression,
            Self::Arithmetic(_) => RuleType::Arithmetic,
            Self::DistributeThree => RuleType::DistributeThree,
        }
    }
}

impl fmt::Display for RuleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant => f.write_str("Constant"),
            Self::Progression(d) => write!(f, "Progression({d:+})"),
            Self::Arithmetic(ArithmeticOp::Plus) => f.write_str("Arithmetic(plus)"),
            Self::Arithmetic(ArithmeticOp::Minus) => f.write_str("Arithmetic(minus)"),
            Self::DistributeThree => f.write_str("DistributeThree"),
        }
    }
}

impl Rule {
    pub fn class(&self) -> RuleClass {
        match *self {
            Rule::Constant => RuleClass::Constant,
            Rule::Progression(d) => RuleClass::Progression(d),
            Rule::Arithmetic(op) => RuleClass::Arithmetic(op),
            Rule::DistributeThree(_) => RuleClass::DistributeThree,
        }
    }

    pub fn rule_type(&self) -> RuleType {
        self.class().rule_type()
    }
}

impl RuleSlot {
    pub const ALL: [RuleSlot; 4] = [RuleSlot::Layout, RuleSlot::Type, RuleSlot::Size, RuleSlot::Color];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Attributes the slot may target.
    pub fn attributes(self) -> &'static [Attribute] {
        match self {
            Self::Layout => &[Attribute::Number, Attribute::Position],
            Self::Type => &[Attribute::Type],
            Self::Size => &[Attribute::Size],
            Self::Color => &[Attribute::Color],
        }
    }
}

impl fmt::Display for RuleSpec {
    /// The `[attribute:rule]` annotation form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}:{}]", self.target.name(), self.rule.class())
    }
}

/// Rule types that may govern an attribute. Shape identity has no additive
/// structure, so `Type` never carries `Arithmetic`; noise attributes take
/// no rule at all.
pub fn allowed_rule_types(attribute: Attribute) -> &'static [RuleType] {
    match attribute {
        Attribute::Number | Attribute::Position | Attribute::Size | Attribute::Color => &RuleType::ALL,
        Attribute::Type => &[RuleType::Constant, RuleType::Progression, RuleType::DistributeThree],
        Attribute::Uniformity | Attribute::Orientation => &[],
    }
}

/// All rule instantiations applicable to an attribute.
pub fn rule_classes(attribute: Attribute) -> Vec<RuleClass> {
    let mut out = Vec::new();
    for rule_type in allowed_rule_types(attribute) {
        match rule_type {
            RuleType::Constant => out.push(RuleClass::Constant),
            RuleType::Progression => out.extend(PROGRESSION_DELTAS.map(RuleClass::Progression)),
            RuleType::Arithmetic => out.extend([ArithmeticOp::Plus, ArithmeticOp::Minus].map(RuleClass::Arithmetic)),
            RuleType::DistributeThree => out.push(RuleClass::DistributeThree),
        }
    }
    out
}

/// The twelve 3×3 Latin squares over {0, 1, 2}.
pub fn latin_squares() -> &'static [[[u8; 3]; 3]] {
    static SQUARES: OnceLock<Vec<[[u8; 3]; 3]>> = OnceLock::new();
    SQUARES.get_or_init(|| {
        const PERMS: [[u8; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::new();
        for a in PERMS {
            for b in PERMS {
                for c in PERMS {
                    if (0..3).all(|i| a[i] != b[i] && a[i] != c[i] && b[i] != c[i]) {
                        out.push([a, b, c]);
                    }
                }
            }
        }
        out
    })
}

fn overflow(attribute: Attribute, detail: impl Into<String>) -> RavenError {
    RavenError::DomainOverflow {
        attribute,
        detail: detail.into(),
    }
}

fn step(domain: &AttributeDomain, value: Value, delta: i8) -> Result<Value> {
    let next = match domain.attribute {
        Attribute::Position => slots::rotate(value, delta as i32, domain.slot_count()),
        _ => {
            let raw = value.0 as i32 + delta as i32;
            if raw < 0 {
                return Err(overflow(domain.attribute, format!("{} {delta:+} < 0", value.0)));
            }
            Value(raw as u16)
        }
    };
    in_domain(domain, next)
}

fn combine(domain: &AttributeDomain, a: Value, b: Value, op: ArithmeticOp) -> Result<Value> {
    let attribute = domain.attribute;
    let out = match (attribute, op) {
        (Attribute::Position, ArithmeticOp::Plus) => Value(a.0 | b.0),
        (Attribute::Position, ArithmeticOp::Minus) => Value(a.0 & !b.0),
        (_, ArithmeticOp::Plus) => Value(a.0 + b.0),
        (_, ArithmeticOp::Minus) => Value(
            a.0.checked_sub(b.0)
                .ok_or_else(|| overflow(attribute, format!("{} - {} < 0", a.0, b.0)))?,
        ),
    };
    in_domain(domain, out)
}

fn in_domain(domain: &AttributeDomain, value: Value) -> Result<Value> {
    if domain.contains(value) {
        Ok(value)
    } else {
        Err(overflow(domain.attribute, format!("value {} not in domain", value.0)))
    }
}

/// Next value of a row given the values before it.
///
/// `row_prefix` holds the values already placed in the row (one or two;
/// `DistributeThree` also accepts an empty prefix to produce the row start).
pub fn apply_rule(rule: &RuleSpec, domain: &AttributeDomain, row_prefix: &[Value], row_index: usize) -> Result<Value> {
    let invalid = |why: &str| RavenError::InvalidRule {
        attribute: rule.target,
        rule: format!("{} ({why})", rule.rule.class()),
    };
    if domain.attribute != rule.target {
        return Err(invalid("domain belongs to another attribute"));
    }
    if row_prefix.len() > 2 || row_index > 2 {
        return Err(invalid("row has three cells"));
    }
    if let Some(v) = row_prefix.iter().find(|v| !domain.contains(**v)) {
        return Err(overflow(rule.target, format!("prefix value {} not in domain", v.0)));
    }
    match rule.rule {
        Rule::DistributeThree(dist) => in_domain(domain, dist.values[dist.rows[row_index][row_prefix.len()] as usize]),
        _ if row_prefix.is_empty() => Err(invalid("needs a row prefix")),
        Rule::Constant => Ok(row_prefix[row_prefix.len() - 1]),
        Rule::Progression(delta) => step(domain, row_prefix[row_prefix.len() - 1], delta),
        Rule::Arithmetic(op) => match row_prefix {
            [a, b] => combine(domain, *a, *b, op),
            _ => Err(invalid("needs two prefix values")),
        },
    }
}

/// Whether a full row is producible by the rule.
pub fn check_row(rule: &RuleSpec, domain: &AttributeDomain, row: &[Value; 3]) -> bool {
    if domain.attribute != rule.target || !row.iter().all(|v| domain.contains(*v)) {
        return false;
    }
    match rule.rule {
        Rule::Constant => row[0] == row[1] && row[1] == row[2],
        Rule::Progression(delta) => {
            step(domain, row[0], delta).is_ok_and(|v| v == row[1])
                && step(domain, row[1], delta).is_ok_and(|v| v == row[2])
        }
        Rule::Arithmetic(op) => combine(domain, row[0], row[1], op).is_ok_and(|v| v == row[2]),
        Rule::DistributeThree(dist) => is_permutation(row, &dist.values),
    }
}

fn is_permutation(row: &[Value; 3], values: &[Value; 3]) -> bool {
    let mut a = *row;
    let mut b = *values;
    a.sort();
    b.sort();
    a == b && b[0] != b[1] && b[1] != b[2]
}

/// Every rule instantiation consistent with both observed rows.
///
/// `DistributeThree` is reported when both rows permute the same three
/// distinct values and can be extended to a Latin arrangement; the returned
/// distribution carries that completion.
pub fn infer_rules(
    attribute: Attribute,
    domain: &AttributeDomain,
    row1: &[Value; 3],
    row2: &[Value; 3],
) -> Vec<RuleSpec> {
    let mut out = Vec::new();
    for class in rule_classes(attribute) {
        let rule = match class {
            RuleClass::Constant => Rule::Constant,
            RuleClass::Progression(d) => Rule::Progression(d),
            RuleClass::Arithmetic(op) => Rule::Arithmetic(op),
            RuleClass::DistributeThree => match distribution_from_rows(row1, row2) {
                Some(dist) => Rule::DistributeThree(dist),
                None => continue,
            },
        };
        let spec = RuleSpec {
            target: attribute,
            rule,
        };
        if check_row(&spec, domain, row1) && check_row(&spec, domain, row2) {
            out.push(spec);
        }
    }
    out
}

fn distribution_from_rows(row1: &[Value; 3], row2: &[Value; 3]) -> Option<Distribution> {
    let mut values = *row1;
    values.sort();
    if values[0] == values[1] || values[1] == values[2] {
        return None;
    }
    let index = |v: Value| values.iter().position(|x| *x == v).map(|i| i as u8);
    let mut rows = [[0u8; 3]; 3];
    for c in 0..3 {
        let (a, b) = (index(row1[c])?, index(row2[c])?);
        if a == b {
            return None;
        }
        rows[0][c] = a;
        rows[1][c] = b;
        rows[2][c] = 3 - a - b;
    }
    // Row two must itself be a permutation.
    let mut second = rows[1];
    second.sort();
    (second == [0, 1, 2]).then_some(Distribution { values, rows })
}

impl RuleGroup {
    pub fn spec(&self, slot: RuleSlot) -> &RuleSpec {
        &self.slots[slot.index()]
    }

    /// Slot targets and rule applicability.
    pub fn validate(&self) -> Result<()> {
        for slot in RuleSlot::ALL {
            let spec = self.spec(slot);
            if !slot.attributes().contains(&spec.target) {
                return Err(RavenError::InvalidRule {
                    attribute: spec.target,
                    rule: format!("{} placed in {slot:?} slot", spec.rule.class()),
                });
            }
            if !allowed_rule_types(spec.target).contains(&spec.rule.rule_type()) {
                return Err(RavenError::InvalidRule {
                    attribute: spec.target,
                    rule: spec.rule.class().to_string(),
                });
            }
            if let Rule::DistributeThree(dist) = spec.rule {
                let mut vals = dist.values;
                vals.sort();
                if vals[0] == vals[1] || vals[1] == vals[2] || !latin_squares().contains(&dist.rows) {
                    return Err(RavenError::InvalidRule {
                        attribute: spec.target,
                        rule: "DistributeThree needs three distinct values in a Latin square".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn non_constant_count(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| s.rule.rule_type() != RuleType::Constant)
            .count()
    }

    /// `[attribute:rule]` annotation strings in slot order.
    pub fn annotations(&self) -> Vec<String> {
        self.slots.iter().map(ToString::to_string).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{attribute_domain, FigureConfiguration};

    fn domain(config: FigureConfiguration, attribute: Attribute) -> AttributeDomain {
        attribute_domain(config, 0, attribute).unwrap()
    }

    fn spec(target: Attribute, rule: Rule) -> RuleSpec {
        RuleSpec { target, rule }
    }

    fn v(values: [u16; 3]) -> [Value; 3] {
        values.map(Value)
    }

    #[test]
    fn eight_instantiations() {
        let classes = rule_classes(Attribute::Number);
        assert_eq!(classes.len(), 8);
        let mut dedup = classes.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 8);
        assert_eq!(rule_classes(Attribute::Type).len(), 6);
        assert!(rule_classes(Attribute::Orientation).is_empty());
        assert!(rule_classes(Attribute::Uniformity).is_empty());
        assert_eq!(latin_squares().len(), 12);
    }

    #[test]
    fn apply_examples() {
        let size = domain(FigureConfiguration::Center, Attribute::Size);
        let r = spec(Attribute::Size, Rule::Progression(1));
        assert_eq!(apply_rule(&r, &size, &[Value(2)], 0).unwrap(), Value(3));

        let number = domain(FigureConfiguration::Grid3x3, Attribute::Number);
        let r = spec(Attribute::Number, Rule::Arithmetic(ArithmeticOp::Minus));
        assert_eq!(apply_rule(&r, &number, &[Value(5), Value(2)], 1).unwrap(), Value(3));

        let position = domain(FigureConfiguration::Grid2x2, Attribute::Position);
        let r = spec(Attribute::Position, Rule::Arithmetic(ArithmeticOp::Plus));
        let out = apply_rule(&r, &position, &[slots::from_slots([0, 1]), slots::from_slots([2])], 0).unwrap();
        assert_eq!(out, slots::from_slots([0, 1, 2]));
    }

    #[test]
    fn apply_reports_overflow() {
        let size = domain(FigureConfiguration::Center, Attribute::Size);
        let r = spec(Attribute::Size, Rule::Progression(2));
        assert!(matches!(
            apply_rule(&r, &size, &[Value(5)], 0),
            Err(RavenError::DomainOverflow { .. })
        ));
        let position = domain(FigureConfiguration::Grid2x2, Attribute::Position);
        let r = spec(Attribute::Position, Rule::Arithmetic(ArithmeticOp::Minus));
        let set = slots::from_slots([1]);
        assert!(matches!(
            apply_rule(&r, &position, &[set, set], 0),
            Err(RavenError::DomainOverflow { .. })
        ));
        let r = spec(Attribute::Size, Rule::Arithmetic(ArithmeticOp::Plus));
        assert!(matches!(
            apply_rule(&r, &size, &[Value(1)], 0),
            Err(RavenError::InvalidRule { .. })
        ));
    }

    #[test]
    fn check_examples() {
        let number = domain(FigureConfiguration::Grid3x3, Attribute::Number);
        assert!(check_row(
            &spec(Attribute::Number, Rule::Constant),
            &number,
            &v([4, 4, 4])
        ));
        assert!(!check_row(
            &spec(Attribute::Number, Rule::Progression(-1)),
            &number,
            &v([5, 4, 2])
        ));
        let dist = Distribution {
            values: v([1, 2, 3]),
            rows: latin_squares()[0],
        };
        assert!(check_row(
            &spec(Attribute::Number, Rule::DistributeThree(dist)),
            &number,
            &v([2, 3, 1])
        ));
    }

    #[test]
    fn infer_examples() {
        let number = domain(FigureConfiguration::Grid3x3, Attribute::Number);
        let found = infer_rules(Attribute::Number, &number, &v([1, 2, 3]), &v([2, 3, 4]));
        assert_eq!(found, vec![spec(Attribute::Number, Rule::Progression(1))]);

        let found = infer_rules(Attribute::Number, &number, &v([7, 7, 7]), &v([7, 7, 7]));
        assert!(found.contains(&spec(Attribute::Number, Rule::Constant)));

        let found = infer_rules(Attribute::Number, &number, &v([1, 2, 3]), &v([3, 1, 2]));
        assert_eq!(found.len(), 1);
        match found[0].rule {
            Rule::DistributeThree(dist) => {
                assert_eq!(dist.values, v([1, 2, 3]));
                assert_eq!(dist.rows[2], [1, 2, 0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_never_arithmetic() {
        let types = domain(FigureConfiguration::Center, Attribute::Type);
        let found = infer_rules(Attribute::Type, &types, &v([1, 1, 2]), &v([0, 2, 2]));
        assert!(found.iter().all(|r| r.rule.rule_type() != RuleType::Arithmetic));
    }

    #[test]
    fn annotation_format() {
        assert_eq!(
            spec(Attribute::Color, Rule::Progression(-2)).to_string(),
            "[Color:Progression(-2)]"
        );
        assert_eq!(
            spec(Attribute::Number, Rule::Arithmetic(ArithmeticOp::Plus)).to_string(),
            "[Number:Arithmetic(plus)]"
        );
    }

    #[test]
    fn group_validation_rejects_misplaced_targets() {
        let good = RuleGroup {
            component: 0,
            slots: [
                spec(Attribute::Number, Rule::Constant),
                spec(Attribute::Type, Rule::Constant),
                spec(Attribute::Size, Rule::Constant),
                spec(Attribute::Color, Rule::Constant),
            ],
        };
        good.validate().unwrap();
        let mut bad = good.clone();
        bad.slots[1] = spec(Attribute::Type, Rule::Arithmetic(ArithmeticOp::Plus));
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.slots[0] = spec(Attribute::Orientation, Rule::Constant);
        assert!(bad.validate().is_err());
        let mut bad = good;
        bad.slots[2] = spec(Attribute::Color, Rule::Constant);
        assert!(bad.validate().is_err());
    }
}
