//! Answer-set construction: seven distractors, each the correct panel with
//! one rule-governed attribute changed so that its slot no longer holds.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RavenError, Result};
use crate::grammar::{slots, Attribute, FigureConfiguration, PanelState, Value};
use crate::rules::{RuleGroup, RuleSlot};
use crate::sampler::MatrixDraft;
use crate::solver::{solve, ContextEvidence};
use crate::space::{new_entity, random_position};

pub const CANDIDATES: usize = 8;
const DISTRACTORS: usize = CANDIDATES - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub config: FigureConfiguration,
    /// Row-major matrix without its last cell.
    pub context: Vec<PanelState>,
    pub candidates: Vec<PanelState>,
    pub target: usize,
    pub rule_groups: Vec<RuleGroup>,
    pub fold: u8,
    pub seed: u64,
}

impl Problem {
    pub fn answer(&self) -> &PanelState {
        &self.candidates[self.target]
    }

    /// Context panels followed by candidates.
    pub fn panels(&self) -> impl Iterator<Item = &PanelState> {
        self.context.iter().chain(&self.candidates)
    }

    pub fn rule_count(&self) -> usize {
        self.rule_groups.iter().map(|g| g.slots.len()).sum()
    }
}

/// A single-attribute change to one component of the correct panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edit {
    pub component: usize,
    pub slot: RuleSlot,
    pub attribute: Attribute,
    pub value: Value,
}

/// Applies an edit. Layout edits re-draw the occupied slots (for `Number`)
/// and give new entities the component's shared look.
pub fn apply_edit<R: Rng + ?Sized>(panel: &PanelState, edit: &Edit, rng: &mut R) -> PanelState {
    let mut out = panel.clone();
    let spec = &panel.config.components()[edit.component];
    let comp = &mut out.components[edit.component];
    match edit.attribute {
        Attribute::Number | Attribute::Position => {
            let position = if edit.attribute == Attribute::Number {
                random_position(spec.slot_count(), edit.value.0 as usize, rng)
            } else {
                edit.value
            };
            let first = comp.entities[0];
            let shared = [
                Value(0),
                Value(first.type_idx as u16),
                Value(first.size_idx as u16),
                Value(first.color_idx as u16),
            ];
            let old = std::mem::take(&mut comp.entities);
            comp.entities = slots::to_slots(position)
                .into_iter()
                .map(|slot| match old.iter().find(|e| e.slot as usize == slot) {
                    Some(e) => *e,
                    None => new_entity(spec, slot, &shared, comp.uniformity, rng),
                })
                .collect();
        }
        attribute => {
            for entity in &mut comp.entities {
                entity.set_level(attribute, edit.value.0 as u8);
            }
        }
    }
    out
}

/// Every edit of a checkable slot that makes the slot fail, with the
/// resulting panel, grouped per (component, slot).
fn breaking_edits<R: Rng + ?Sized>(
    draft: &MatrixDraft,
    evidence: &ContextEvidence,
    rng: &mut R,
) -> Vec<Vec<(Edit, PanelState)>> {
    let correct = draft.answer();
    let mut groups = Vec::new();
    for group in &draft.rule_groups {
        let ci = group.component;
        let spec = &draft.config.components()[ci];
        for slot in RuleSlot::ALL {
            let attribute = group.spec(slot).target;
            let current = match correct.components[ci].value(attribute) {
                Some(v) if !evidence.is_released(ci, slot) => v,
                _ => continue,
            };
            let edits: Vec<_> = spec
                .domain(attribute)
                .values
                .iter()
                .filter(|v| **v != current)
                .filter_map(|&value| {
                    let edit = Edit {
                        component: ci,
                        slot,
                        attribute,
                        value,
                    };
                    let panel = apply_edit(correct, &edit, rng);
                    (!evidence.slot_satisfied(ci, slot, &panel.components[ci])).then_some((edit, panel))
                })
                .collect();
            if !edits.is_empty() {
                groups.push(edits);
            }
        }
    }
    groups
}

/// Builds the eight candidates: the correct panel at a uniformly random
/// index and seven rule-breaking single-attribute edits, spread across
/// slots round-robin.
pub fn build_answer_set<R: Rng + ?Sized>(draft: &MatrixDraft, rng: &mut R) -> Result<Problem> {
    let evidence = ContextEvidence::new(draft.context())?;
    let mut groups = breaking_edits(draft, &evidence, rng);
    let available: usize = groups.iter().map(Vec::len).sum();
    if available < DISTRACTORS {
        return Err(RavenError::ForgeFailure {
            available,
            required: DISTRACTORS,
        });
    }
    groups.shuffle(rng);
    for group in &mut groups {
        group.shuffle(rng);
    }

    let correct = draft.answer().clone();
    let mut distractors: Vec<PanelState> = Vec::with_capacity(DISTRACTORS);
    'fill: loop {
        for group in &mut groups {
            if distractors.len() == DISTRACTORS {
                break 'fill;
            }
            while let Some((_, panel)) = group.pop() {
                if panel != correct && !distractors.contains(&panel) {
                    distractors.push(panel);
                    break;
                }
            }
        }
        if groups.iter().all(Vec::is_empty) {
            break;
        }
    }
    if distractors.len() < DISTRACTORS {
        return Err(RavenError::ForgeFailure {
            available: distractors.len(),
            required: DISTRACTORS,
        });
    }

    let target = rng.gen_range(0..CANDIDATES);
    let mut candidates = distractors;
    candidates.insert(target, correct);
    Ok(Problem {
        id: format!("{}-{:016x}", draft.config, draft.seed),
        config: draft.config,
        context: draft.context().to_vec(),
        candidates,
        target,
        rule_groups: draft.rule_groups.clone(),
        fold: 0,
        seed: draft.seed,
    })
}

/// True iff the solver picks the target with a strict margin.
pub fn verify_unique(problem: &Problem) -> bool {
    matches!(solve(&problem.context, &problem.candidates), Ok(s) if s.chosen_index == problem.target)
}
