//! Grammar pruning under a rule set and sampling of single panels from the
//! pruned space.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{RavenError, Result};
use crate::grammar::{
    slots, Attribute, AttributeDomain, ComponentSpec, ComponentState, Entity, FigureConfiguration, PanelState, Value,
};
use crate::rules::{apply_rule, Rule, RuleGroup, RuleSlot, RuleSpec, RuleType};

/// Admissible first-panel values for one rule slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSpace {
    pub rule: RuleSpec,
    pub starts: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpace {
    pub component: usize,
    pub slots: [SlotSpace; 4],
    /// Uniformity values the component may take. `false` is only offered
    /// when the `Type`, `Size` and `Color` slots are all `Constant`.
    pub uniformity: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrunedSpace {
    pub config: FigureConfiguration,
    pub components: Vec<ComponentSpace>,
}

/// Component-level values for one panel, one per rule slot.
pub(crate) type SlotValues = [Value; 4];

impl PrunedSpace {
    /// Admissible start values for a governed attribute, if it is governed.
    pub fn starts(&self, component: usize, attribute: Attribute) -> Option<&[Value]> {
        self.components
            .get(component)?
            .slots
            .iter()
            .find(|s| s.rule.target == attribute)
            .map(|s| s.starts.as_slice())
    }

    pub fn spec(&self, component: usize) -> &'static ComponentSpec {
        &self.config.components()[component]
    }

    /// Second-panel values that complete an `Arithmetic` row from `first`
    /// without leaving the domain and without acting as an identity.
    pub fn seconds(&self, component: usize, slot: RuleSlot, first: Value) -> Vec<Value> {
        let space = &self.components[component].slots[slot.index()];
        let domain = self.spec(component).domain(space.rule.target);
        arithmetic_seconds(&space.rule, domain, first)
    }
}

fn arithmetic_seconds(rule: &RuleSpec, domain: &AttributeDomain, first: Value) -> Vec<Value> {
    domain
        .values
        .iter()
        .copied()
        .filter(|second| completes_arithmetic(rule, domain, first, *second))
        .collect()
}

fn completes_arithmetic(rule: &RuleSpec, domain: &AttributeDomain, first: Value, second: Value) -> bool {
    apply_rule(rule, domain, &[first, second], 0).is_ok_and(|third| third != first)
}

/// Start values from which a full row can be completed inside the domain.
pub(crate) fn admissible_starts(rule: &RuleSpec, domain: &AttributeDomain) -> Vec<Value> {
    match rule.rule {
        Rule::Constant => domain.values.clone(),
        Rule::Progression(_) => domain
            .values
            .iter()
            .copied()
            .filter(|&v0| {
                apply_rule(rule, domain, &[v0], 0)
                    .and_then(|v1| apply_rule(rule, domain, &[v0, v1], 0).map(|_| v1))
                    // A progression that maps a value onto itself is a constant.
                    .is_ok_and(|v1| v1 != v0)
            })
            .collect(),
        Rule::Arithmetic(_) => domain
            .values
            .iter()
            .copied()
            .filter(|&v0| {
                domain
                    .values
                    .iter()
                    .any(|v1| completes_arithmetic(rule, domain, v0, *v1))
            })
            .collect(),
        Rule::DistributeThree(dist) => {
            if dist.values.iter().all(|v| domain.contains(*v)) {
                dist.values.to_vec()
            } else {
                Vec::new()
            }
        }
    }
}

/// Restricts every governed attribute to start values from which a row can
/// be completed under its rule.
pub fn prune_space(config: FigureConfiguration, rules: &[RuleGroup]) -> Result<PrunedSpace> {
    let specs = config.components();
    if rules.len() != specs.len() {
        return Err(RavenError::InvalidRule {
            attribute: Attribute::Number,
            rule: format!("{config} needs {} rule groups, got {}", specs.len(), rules.len()),
        });
    }
    let mut components = Vec::with_capacity(specs.len());
    for (ci, (spec, group)) in specs.iter().zip(rules).enumerate() {
        group.validate()?;
        if group.component != ci {
            return Err(RavenError::InvalidRule {
                attribute: Attribute::Number,
                rule: format!("rule group for component {} in position {ci}", group.component),
            });
        }
        let slots = RuleSlot::ALL.map(|slot| {
            let rule = *group.spec(slot);
            let starts = admissible_starts(&rule, spec.domain(rule.target));
            SlotSpace { rule, starts }
        });
        if let Some(empty) = slots.iter().find(|s| s.starts.is_empty()) {
            return Err(RavenError::Unsatisfiable {
                component: ci,
                attribute: empty.rule.target,
            });
        }
        let entity_slots_constant = slots[1..].iter().all(|s| s.rule.rule.rule_type() == RuleType::Constant);
        let uniformity = spec
            .domain(Attribute::Uniformity)
            .values
            .iter()
            .map(|v| v.0 == 1)
            .filter(|&u| u || entity_slots_constant)
            .collect();
        components.push(ComponentSpace {
            component: ci,
            slots,
            uniformity,
        });
    }
    Ok(PrunedSpace { config, components })
}

/// Draws a random element; callers guarantee `items` is non-empty.
pub(crate) fn pick<T: Copy, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> T {
    *items.choose(rng).expect("pruned set is non-empty")
}

fn random_level<R: Rng + ?Sized>(spec: &ComponentSpec, attribute: Attribute, rng: &mut R) -> u8 {
    pick(&spec.domain(attribute).values, rng).0 as u8
}

/// A uniformly random occupied-slot set of the given size.
pub(crate) fn random_position<R: Rng + ?Sized>(slot_count: usize, number: usize, rng: &mut R) -> Value {
    let mut chosen = index::sample(rng, slot_count, number).into_vec();
    chosen.sort_unstable();
    slots::from_slots(chosen)
}

/// Builds one component from its slot values.
///
/// When the layout slot targets `Number` the occupied slots are drawn at
/// random. Non-uniform components ignore the `Type`/`Size`/`Color` values
/// and draw each entity's levels independently. Orientation is always drawn
/// per entity.
pub(crate) fn compose_component<R: Rng + ?Sized>(
    spec: &ComponentSpec,
    layout_target: Attribute,
    values: &SlotValues,
    uniformity: bool,
    rng: &mut R,
) -> ComponentState {
    let position = match layout_target {
        Attribute::Number => random_position(spec.slot_count(), values[0].0 as usize, rng),
        _ => values[0],
    };
    let entities = slots::to_slots(position)
        .into_iter()
        .map(|slot| new_entity(spec, slot, values, uniformity, rng))
        .collect();
    ComponentState { uniformity, entities }
}

pub(crate) fn new_entity<R: Rng + ?Sized>(
    spec: &ComponentSpec,
    slot: usize,
    values: &SlotValues,
    uniformity: bool,
    rng: &mut R,
) -> Entity {
    let level = |attribute: Attribute, value: Value, rng: &mut R| {
        if uniformity {
            value.0 as u8
        } else {
            random_level(spec, attribute, rng)
        }
    };
    Entity {
        slot: slot as u8,
        type_idx: level(Attribute::Type, values[1], rng),
        size_idx: level(Attribute::Size, values[2], rng),
        color_idx: level(Attribute::Color, values[3], rng),
        angle_idx: random_level(spec, Attribute::Orientation, rng),
    }
}

/// Samples a panel whose governed attributes all take admissible start
/// values.
pub fn sample_panel<R: Rng + ?Sized>(space: &PrunedSpace, rng: &mut R) -> PanelState {
    let components = space
        .components
        .iter()
        .map(|cs| {
            let spec = space.spec(cs.component);
            let uniformity = pick(&cs.uniformity, rng);
            let values = [0, 1, 2, 3].map(|i| pick(&cs.slots[i].starts, rng));
            compose_component(spec, cs.slots[0].rule.target, &values, uniformity, rng)
        })
        .collect();
    PanelState {
        config: space.config,
        components,
    }
}
