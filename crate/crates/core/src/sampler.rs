//! Rule-group sampling and row-wise construction of the 3×3 problem matrix.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RavenError, Result};
use crate::grammar::{Attribute, ComponentSpec, FigureConfiguration, PanelState, Value};
use crate::rules::{
    allowed_rule_types, apply_rule, latin_squares, rule_classes, Distribution, Rule, RuleClass, RuleGroup, RuleSlot,
    RuleSpec, RuleType,
};
use crate::space::{admissible_starts, compose_component, pick, prune_space, PrunedSpace, SlotValues};

/// Resample budget for each sampling stage.
pub const RETRY_BUDGET: usize = 100;

/// How rule groups are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleMode {
    /// Every slot draws its rule independently.
    #[default]
    Full,
    /// Exactly one slot across all components carries a non-`Constant` rule.
    SingleNonConstant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDraft {
    pub config: FigureConfiguration,
    pub rule_groups: Vec<RuleGroup>,
    /// Row-major; index 8 is the correct answer.
    pub panels: Vec<PanelState>,
    pub seed: u64,
}

impl MatrixDraft {
    pub fn answer(&self) -> &PanelState {
        &self.panels[8]
    }

    pub fn context(&self) -> &[PanelState] {
        &self.panels[..8]
    }
}

/// Generator for the matrix stage of a problem seed.
pub fn matrix_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for the answer-set stage of a problem seed.
pub fn answer_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn feasible_classes(spec: &ComponentSpec, target: Attribute, rule_type: RuleType) -> Vec<RuleClass> {
    let domain = spec.domain(target);
    rule_classes(target)
        .into_iter()
        .filter(|class| class.rule_type() == rule_type)
        .filter(|class| match class {
            RuleClass::Constant => true,
            RuleClass::DistributeThree => domain.len() >= 3,
            RuleClass::Progression(d) => !admissible_starts(
                &RuleSpec {
                    target,
                    rule: Rule::Progression(*d),
                },
                domain,
            )
            .is_empty(),
            RuleClass::Arithmetic(op) => !admissible_starts(
                &RuleSpec {
                    target,
                    rule: Rule::Arithmetic(*op),
                },
                domain,
            )
            .is_empty(),
        })
        .collect()
}

fn feasible_types(spec: &ComponentSpec, target: Attribute) -> Vec<RuleType> {
    allowed_rule_types(target)
        .iter()
        .copied()
        .filter(|t| !feasible_classes(spec, target, *t).is_empty())
        .collect()
}

fn concretize<R: Rng + ?Sized>(spec: &ComponentSpec, target: Attribute, class: RuleClass, rng: &mut R) -> RuleSpec {
    let rule = match class {
        RuleClass::Constant => Rule::Constant,
        RuleClass::Progression(d) => Rule::Progression(d),
        RuleClass::Arithmetic(op) => Rule::Arithmetic(op),
        RuleClass::DistributeThree => {
            let domain = spec.domain(target);
            let mut picked = index::sample(rng, domain.len(), 3).into_vec();
            picked.sort_unstable();
            let values = [0, 1, 2].map(|i| domain.values[picked[i]]);
            let rows = *latin_squares().choose(rng).expect("twelve squares");
            Rule::DistributeThree(Distribution { values, rows })
        }
    };
    RuleSpec { target, rule }
}

fn draw_rule<R: Rng + ?Sized>(spec: &ComponentSpec, target: Attribute, types: &[RuleType], rng: &mut R) -> RuleSpec {
    let rule_type = pick(types, rng);
    let class = pick(&feasible_classes(spec, target, rule_type), rng);
    concretize(spec, target, class, rng)
}

fn layout_target<R: Rng + ?Sized>(spec: &ComponentSpec, rng: &mut R) -> Attribute {
    if spec.slot_count() > 1 && rng.gen_bool(0.5) {
        Attribute::Position
    } else {
        Attribute::Number
    }
}

fn slot_target(slot: RuleSlot, layout: Attribute) -> Attribute {
    match slot {
        RuleSlot::Layout => layout,
        other => other.attributes()[0],
    }
}

fn draw_groups<R: Rng + ?Sized>(config: FigureConfiguration, mode: RuleMode, rng: &mut R) -> Vec<RuleGroup> {
    let specs = config.components();
    let targets: Vec<Attribute> = specs.iter().map(|s| layout_target(s, rng)).collect();
    let constant = |target| RuleSpec {
        target,
        rule: Rule::Constant,
    };
    match mode {
        RuleMode::Full => specs
            .iter()
            .zip(&targets)
            .enumerate()
            .map(|(component, (spec, &layout))| RuleGroup {
                component,
                slots: RuleSlot::ALL.map(|slot| {
                    let target = slot_target(slot, layout);
                    draw_rule(spec, target, &feasible_types(spec, target), rng)
                }),
            })
            .collect(),
        RuleMode::SingleNonConstant => {
            let mut groups: Vec<RuleGroup> = targets
                .iter()
                .enumerate()
                .map(|(component, &layout)| RuleGroup {
                    component,
                    slots: RuleSlot::ALL.map(|slot| constant(slot_target(slot, layout))),
                })
                .collect();
            let mut choices = Vec::new();
            for (ci, (spec, &layout)) in specs.iter().zip(&targets).enumerate() {
                for slot in RuleSlot::ALL {
                    let target = slot_target(slot, layout);
                    let types: Vec<_> = feasible_types(spec, target)
                        .into_iter()
                        .filter(|t| *t != RuleType::Constant)
                        .collect();
                    if !types.is_empty() {
                        choices.push((ci, slot, target, types));
                    }
                }
            }
            if let Some((ci, slot, target, types)) = choices.choose(rng) {
                groups[*ci].slots[slot.index()] = draw_rule(&specs[*ci], *target, types, rng);
            }
            groups
        }
    }
}

/// One rule group per component; every draw admits a non-empty pruned space.
pub fn sample_rule_groups<R: Rng + ?Sized>(config: FigureConfiguration, rng: &mut R) -> Result<Vec<RuleGroup>> {
    sample_rule_groups_with(config, RuleMode::Full, rng)
}

pub fn sample_rule_groups_with<R: Rng + ?Sized>(
    config: FigureConfiguration,
    mode: RuleMode,
    rng: &mut R,
) -> Result<Vec<RuleGroup>> {
    sample_pruned(config, mode, rng).map(|(groups, _)| groups)
}

fn sample_pruned<R: Rng + ?Sized>(
    config: FigureConfiguration,
    mode: RuleMode,
    rng: &mut R,
) -> Result<(Vec<RuleGroup>, PrunedSpace)> {
    let mut last = None;
    for _ in 0..RETRY_BUDGET {
        let groups = draw_groups(config, mode, rng);
        if mode == RuleMode::SingleNonConstant && groups.iter().map(RuleGroup::non_constant_count).sum::<usize>() != 1 {
            last = Some(RavenError::SamplerStuck {
                attempts: 1,
                reason: format!("{config} has no slot that admits a non-Constant rule"),
            });
            continue;
        }
        match prune_space(config, &groups) {
            Ok(space) => return Ok((groups, space)),
            Err(err) => last = Some(err),
        }
    }
    Err(RavenError::SamplerStuck {
        attempts: RETRY_BUDGET,
        reason: last.map_or_else(String::new, |e| e.to_string()),
    })
}

/// Values of one slot across one row.
fn row_values<R: Rng + ?Sized>(
    space: &PrunedSpace,
    component: usize,
    slot: RuleSlot,
    row: usize,
    held: Value,
    rng: &mut R,
) -> Result<[Value; 3]> {
    let slot_space = &space.components[component].slots[slot.index()];
    let rule = &slot_space.rule;
    let domain = space.spec(component).domain(rule.target);
    match rule.rule {
        // Constant values are held across the whole matrix.
        Rule::Constant => Ok([held; 3]),
        Rule::DistributeThree(dist) => Ok(dist.rows[row].map(|i| dist.values[i as usize])),
        Rule::Progression(_) => {
            let v0 = pick(&slot_space.starts, rng);
            let v1 = apply_rule(rule, domain, &[v0], row)?;
            let v2 = apply_rule(rule, domain, &[v0, v1], row)?;
            Ok([v0, v1, v2])
        }
        Rule::Arithmetic(_) => {
            let v0 = pick(&slot_space.starts, rng);
            let v1 = pick(&space.seconds(component, slot, v0), rng);
            let v2 = apply_rule(rule, domain, &[v0, v1], row)?;
            Ok([v0, v1, v2])
        }
    }
}

/// Samples rules, prunes, and fills the matrix row by row.
pub fn generate_matrix(config: FigureConfiguration, seed: u64) -> Result<MatrixDraft> {
    generate_matrix_with(config, seed, RuleMode::Full)
}

pub fn generate_matrix_with(config: FigureConfiguration, seed: u64, mode: RuleMode) -> Result<MatrixDraft> {
    let mut rng = matrix_rng(seed);
    let (rule_groups, space) = sample_pruned(config, mode, &mut rng)?;
    let n_comp = space.components.len();

    let uniformity: Vec<bool> = space.components.iter().map(|c| pick(&c.uniformity, &mut rng)).collect();
    let held: Vec<[Value; 4]> = space
        .components
        .iter()
        .map(|c| [0, 1, 2, 3].map(|i| pick(&c.slots[i].starts, &mut rng)))
        .collect();

    // values[component][row][column][slot]
    let mut values = vec![[[[Value(0); 4]; 3]; 3]; n_comp];
    for row in 0..3 {
        for (ci, comp_values) in values.iter_mut().enumerate() {
            for slot in RuleSlot::ALL {
                let triple = row_values(&space, ci, slot, row, held[ci][slot.index()], &mut rng)?;
                for (col, v) in triple.into_iter().enumerate() {
                    comp_values[row][col][slot.index()] = v;
                }
            }
        }
    }

    let mut panels = Vec::with_capacity(9);
    for cell in 0..9 {
        let (row, col) = (cell / 3, cell % 3);
        let components = (0..n_comp)
            .map(|ci| {
                let slot_values: &SlotValues = &values[ci][row][col];
                compose_component(
                    space.spec(ci),
                    rule_groups[ci].slots[0].target,
                    slot_values,
                    uniformity[ci],
                    &mut rng,
                )
            })
            .collect();
        panels.push(PanelState { config, components });
    }
    Ok(MatrixDraft {
        config,
        rule_groups,
        panels,
        seed,
    })
}
