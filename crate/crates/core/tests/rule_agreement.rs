//! apply / check / infer agree with an independent row oracle, exhaustively
//! over every attribute domain small enough to enumerate.

use std::collections::{BTreeSet, HashSet};

use raven_core::grammar::{attribute_domain, Attribute, AttributeDomain, FigureConfiguration, Value};
use raven_core::rules::{
    apply_rule, check_row, infer_rules, latin_squares, rule_classes, ArithmeticOp, Distribution, Rule, RuleClass,
    RuleSpec,
};

/// Next value of a progression, computed without the rule engine.
fn oracle_step(attribute: Attribute, slot_count: usize, v: u16, delta: i8) -> Option<u16> {
    if attribute == Attribute::Position {
        let n = slot_count as i32;
        let mut out = 0u16;
        for s in 0..n {
            if v & (1 << s) != 0 {
                out |= 1 << (s + delta as i32).rem_euclid(n);
            }
        }
        Some(out)
    } else {
        u16::try_from(v as i32 + delta as i32).ok()
    }
}

fn oracle_combine(attribute: Attribute, a: u16, b: u16, op: ArithmeticOp) -> Option<u16> {
    match (attribute, op) {
        (Attribute::Position, ArithmeticOp::Plus) => Some(a | b),
        (Attribute::Position, ArithmeticOp::Minus) => Some(a & !b),
        (_, ArithmeticOp::Plus) => Some(a + b),
        (_, ArithmeticOp::Minus) => a.checked_sub(b),
    }
}

struct Space {
    attribute: Attribute,
    domain: AttributeDomain,
    members: HashSet<u16>,
    slot_count: usize,
}

impl Space {
    fn new(config: FigureConfiguration, component: usize, attribute: Attribute) -> Self {
        let domain = attribute_domain(config, component, attribute).unwrap();
        Space {
            attribute,
            members: domain.values.iter().map(|v| v.0).collect(),
            slot_count: config.components()[component].slots.len(),
            domain,
        }
    }

    fn has(&self, v: Option<u16>) -> Option<u16> {
        v.filter(|v| self.members.contains(v))
    }

    /// Whether a row is producible by a (non-DistributeThree) class.
    fn row_holds(&self, class: RuleClass, row: [u16; 3]) -> bool {
        match class {
            RuleClass::Constant => row[0] == row[1] && row[1] == row[2],
            RuleClass::Progression(d) => {
                self.has(oracle_step(self.attribute, self.slot_count, row[0], d)) == Some(row[1])
                    && self.has(oracle_step(self.attribute, self.slot_count, row[1], d)) == Some(row[2])
            }
            RuleClass::Arithmetic(op) => self.has(oracle_combine(self.attribute, row[0], row[1], op)) == Some(row[2]),
            RuleClass::DistributeThree => unreachable!(),
        }
    }
}

fn spec(attribute: Attribute, class: RuleClass) -> RuleSpec {
    let rule = match class {
        RuleClass::Constant => Rule::Constant,
        RuleClass::Progression(d) => Rule::Progression(d),
        RuleClass::Arithmetic(op) => Rule::Arithmetic(op),
        RuleClass::DistributeThree => unreachable!(),
    };
    RuleSpec {
        target: attribute,
        rule,
    }
}

fn small_spaces() -> Vec<Space> {
    use FigureConfiguration as F;
    vec![
        Space::new(F::Grid3x3, 0, Attribute::Number),
        Space::new(F::Grid2x2, 0, Attribute::Number),
        Space::new(F::Grid2x2, 0, Attribute::Position),
        Space::new(F::Center, 0, Attribute::Position),
        Space::new(F::Center, 0, Attribute::Type),
        Space::new(F::Center, 0, Attribute::Size),
        Space::new(F::Center, 0, Attribute::Color),
        Space::new(F::OutInGrid, 0, Attribute::Size),
        Space::new(F::OutInGrid, 0, Attribute::Color),
    ]
}

fn rows(space: &Space) -> Vec<[u16; 3]> {
    let vals: Vec<u16> = space.domain.values.iter().map(|v| v.0).collect();
    let mut out = Vec::new();
    for &a in &vals {
        for &b in &vals {
            for &c in &vals {
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn values(row: [u16; 3]) -> [Value; 3] {
    row.map(Value)
}

fn permutes_distinct(row: [u16; 3], triple: [u16; 3]) -> bool {
    let (mut a, mut b) = (row, triple);
    a.sort();
    b.sort();
    a == b && b[0] != b[1] && b[1] != b[2]
}

#[test]
fn check_row_matches_oracle() {
    for space in small_spaces() {
        let classes: Vec<RuleClass> = rule_classes(space.attribute)
            .into_iter()
            .filter(|c| *c != RuleClass::DistributeThree)
            .collect();
        for row in rows(&space) {
            for &class in &classes {
                assert_eq!(
                    check_row(&spec(space.attribute, class), &space.domain, &values(row)),
                    space.row_holds(class, row),
                    "{:?} {class} {row:?}",
                    space.attribute
                );
            }
        }
    }
}

#[test]
fn distribute_three_check_is_permutation() {
    for space in small_spaces() {
        let vals = &space.domain.values;
        if vals.len() < 3 {
            continue;
        }
        let triple = [vals[0], vals[vals.len() / 2], vals[vals.len() - 1]];
        for square in latin_squares() {
            let rule = RuleSpec {
                target: space.attribute,
                rule: Rule::DistributeThree(Distribution {
                    values: triple,
                    rows: *square,
                }),
            };
            for row in rows(&space) {
                assert_eq!(
                    check_row(&rule, &space.domain, &values(row)),
                    permutes_distinct(row, triple.map(|v| v.0))
                );
            }
            // Every row the square lays out is accepted.
            for r in 0..3 {
                let mut laid = Vec::new();
                for _ in 0..3 {
                    laid.push(apply_rule(&rule, &space.domain, &laid[laid.len().saturating_sub(2)..], r).unwrap());
                }
                assert!(check_row(&rule, &space.domain, &[laid[0], laid[1], laid[2]]));
            }
        }
    }
}

#[test]
fn apply_agrees_with_check() {
    for space in small_spaces() {
        let vals = space.domain.values.clone();
        for class in rule_classes(space.attribute) {
            if class == RuleClass::DistributeThree {
                continue;
            }
            let rule = spec(space.attribute, class);
            for &a in &vals {
                for &b in &vals {
                    let prefix: &[Value] = &[a, b];
                    let expected = match class {
                        RuleClass::Constant => space.has(Some(b.0)),
                        RuleClass::Progression(d) => space.has(oracle_step(space.attribute, space.slot_count, b.0, d)),
                        RuleClass::Arithmetic(op) => space.has(oracle_combine(space.attribute, a.0, b.0, op)),
                        RuleClass::DistributeThree => unreachable!(),
                    };
                    let got = apply_rule(&rule, &space.domain, prefix, 0).ok().map(|v| v.0);
                    assert_eq!(got, expected, "{:?} {class} prefix {a:?} {b:?}", space.attribute);
                    // A completed row is accepted whenever its prefix was
                    // itself produced by the rule.
                    if let Some(c) = got {
                        let first_ok = match class {
                            RuleClass::Arithmetic(_) => true,
                            _ => apply_rule(&rule, &space.domain, &[a], 0).ok() == Some(b),
                        };
                        if first_ok {
                            assert!(check_row(&rule, &space.domain, &[a, b, Value(c)]));
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn infer_is_exactly_the_consistent_set() {
    for space in small_spaces() {
        let classes: Vec<RuleClass> = rule_classes(space.attribute);
        let plain: Vec<RuleClass> = classes
            .iter()
            .copied()
            .filter(|c| *c != RuleClass::DistributeThree)
            .collect();
        let all_rows = rows(&space);
        let interesting: Vec<[u16; 3]> = all_rows
            .iter()
            .copied()
            .filter(|r| plain.iter().any(|c| space.row_holds(*c, *r)) || permutes_distinct(*r, *r))
            .collect();
        for r1 in &interesting {
            for r2 in &interesting {
                let got: BTreeSet<RuleClass> = infer_rules(space.attribute, &space.domain, &values(*r1), &values(*r2))
                    .iter()
                    .map(|s| s.rule.class())
                    .collect();
                let mut want: BTreeSet<RuleClass> = plain
                    .iter()
                    .copied()
                    .filter(|c| space.row_holds(*c, *r1) && space.row_holds(*c, *r2))
                    .collect();
                let latin = permutes_distinct(*r2, *r1) && (0..3).all(|c| r1[c] != r2[c]);
                if classes.contains(&RuleClass::DistributeThree) && latin {
                    want.insert(RuleClass::DistributeThree);
                }
                assert_eq!(got, want, "{:?} {r1:?} {r2:?}", space.attribute);
            }
        }
        for r in all_rows.iter().filter(|r| !interesting.contains(r)) {
            assert!(infer_rules(space.attribute, &space.domain, &values(*r), &values(*r)).is_empty());
        }
    }
}

#[test]
fn generated_rows_are_inferred() {
    for space in small_spaces() {
        let vals = space.domain.values.clone();
        if vals.len() < 3 {
            continue;
        }
        for square in latin_squares() {
            let dist = Distribution {
                values: [vals[0], vals[1], vals[2]],
                rows: *square,
            };
            let rule = RuleSpec {
                target: space.attribute,
                rule: Rule::DistributeThree(dist),
            };
            if !rule_classes(space.attribute).contains(&RuleClass::DistributeThree) {
                continue;
            }
            let row = |r: usize| square[r].map(|i| dist.values[i as usize]);
            let inferred = infer_rules(space.attribute, &space.domain, &row(0), &row(1));
            assert!(inferred.contains(&rule), "{:?} {square:?}", space.attribute);
        }
    }
}

#[test]
fn eight_instantiations() {
    let mut all = BTreeSet::new();
    for attribute in Attribute::RULE_TARGETS {
        let classes = rule_classes(attribute);
        assert!(classes.len() <= 8);
        all.extend(classes);
    }
    assert_eq!(all.len(), 8);
    assert!(rule_classes(Attribute::Uniformity).is_empty());
    assert!(rule_classes(Attribute::Orientation).is_empty());
}
