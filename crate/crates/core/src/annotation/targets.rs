//! Multi-hot supervision vectors for rule and structure prediction.

use crate::forge::Problem;
use crate::grammar::{Attribute, ComponentKind, FigureConfiguration, LayoutKind, Structure};
use crate::rules::RuleType;

pub const RULE_TARGET_LEN: usize = Attribute::RULE_TARGETS.len() * RuleType::ALL.len();

/// Component kinds that carry information; `Whole` is implied by `Singleton`.
const STRUCT_COMPONENTS: [ComponentKind; 6] = [
    ComponentKind::Left,
    ComponentKind::Right,
    ComponentKind::Up,
    ComponentKind::Down,
    ComponentKind::Out,
    ComponentKind::In,
];

pub const STRUCT_TARGET_LEN: usize = Structure::ALL.len() + STRUCT_COMPONENTS.len() + LayoutKind::ALL.len();

fn rule_bit(attribute: Attribute, rule_type: RuleType) -> Option<usize> {
    let a = Attribute::RULE_TARGETS.iter().position(|x| *x == attribute)?;
    Some(a * RuleType::ALL.len() + rule_type as usize)
}

/// `Attribute:RuleType` names of the rule-target bits.
pub fn rule_target_labels() -> Vec<String> {
    Attribute::RULE_TARGETS
        .iter()
        .flat_map(|a| RuleType::ALL.iter().map(move |r| format!("{}:{}", a.name(), r.name())))
        .collect()
}

pub fn struct_target_labels() -> Vec<&'static str> {
    Structure::ALL
        .iter()
        .map(|s| s.name())
        .chain(STRUCT_COMPONENTS.iter().map(|c| c.name()))
        .chain(LayoutKind::ALL.iter().map(|l| l.name()))
        .collect()
}

/// One bit per (attribute, rule type) pair present in any component.
pub fn rule_target(problem: &Problem) -> Vec<u8> {
    let mut bits = vec![0u8; RULE_TARGET_LEN];
    for spec in problem.rule_groups.iter().flat_map(|g| &g.slots) {
        if let Some(i) = rule_bit(spec.target, spec.rule.rule_type()) {
            bits[i] = 1;
        }
    }
    bits
}

/// Structure, component and layout nodes present in the configuration.
pub fn struct_target(config: FigureConfiguration) -> Vec<u8> {
    let mut bits = vec![0u8; STRUCT_TARGET_LEN];
    bits[Structure::ALL.iter().position(|s| *s == config.structure()).unwrap()] = 1;
    for spec in config.components() {
        if let Some(i) = STRUCT_COMPONENTS.iter().position(|c| *c == spec.kind) {
            bits[Structure::ALL.len() + i] = 1;
        }
        let l = LayoutKind::ALL.iter().position(|l| *l == spec.layout_kind).unwrap();
        bits[Structure::ALL.len() + STRUCT_COMPONENTS.len() + l] = 1;
    }
    bits
}
