//! Constraint-count solver over symbolic panels.
//!
//! For every component and rule slot the solver infers the rules consistent
//! with the first two context rows, then counts a slot as satisfied by a
//! candidate when one of those rules also holds on the third row completed
//! with the candidate. The candidate with the highest count wins; a tie at
//! the maximum is reported instead of guessed.
//!
//! The solver sees panel attributes only. It never reads rule annotations
//! or pixels, so it cannot tell which of `Number`/`Position` a layout slot
//! governs and accepts either.

use serde::{Deserialize, Serialize};

use crate::error::{RavenError, Result};
use crate::grammar::{Attribute, ComponentState, FigureConfiguration, PanelState, Value};
use crate::rules::{check_row, infer_rules, RuleSlot, RuleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate_index: usize,
    pub satisfied: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub chosen_index: usize,
    pub scores: Vec<CandidateScore>,
}

#[derive(Debug, Clone)]
struct AttributeEvidence {
    attribute: Attribute,
    rules: Vec<RuleSpec>,
    /// First two cells of the third row.
    prefix: [Value; 2],
}

#[derive(Debug, Clone)]
enum SlotEvidence {
    /// Entity attributes of a non-uniform component vary freely.
    Released,
    Rules(Vec<AttributeEvidence>),
}

/// Rules inferred from the eight context panels, reusable across candidates.
#[derive(Debug, Clone)]
pub struct ContextEvidence {
    config: FigureConfiguration,
    slots: Vec<[SlotEvidence; 4]>,
}

impl ContextEvidence {
    pub fn new(context: &[PanelState]) -> Result<Self> {
        if context.len() != 8 {
            return Err(RavenError::Scoring(format!(
                "expected 8 context panels, got {}",
                context.len()
            )));
        }
        let config = context[0].config;
        let n_comp = config.components().len();
        if context
            .iter()
            .any(|p| p.config != config || p.components.len() != n_comp)
        {
            return Err(RavenError::Scoring("context panels mix configurations".into()));
        }
        let slots = (0..n_comp)
            .map(|ci| {
                let spec = &config.components()[ci];
                let comps: Vec<&ComponentState> = context.iter().map(|p| &p.components[ci]).collect();
                let released = comps.iter().all(|c| !c.uniformity);
                RuleSlot::ALL.map(|slot| {
                    if released && slot != RuleSlot::Layout {
                        return SlotEvidence::Released;
                    }
                    let evidence = slot
                        .attributes()
                        .iter()
                        .filter_map(|&attribute| {
                            let vals: Vec<Value> = comps.iter().map(|c| c.value(attribute)).collect::<Option<_>>()?;
                            let row1 = [vals[0], vals[1], vals[2]];
                            let row2 = [vals[3], vals[4], vals[5]];
                            let rules = infer_rules(attribute, spec.domain(attribute), &row1, &row2);
                            (!rules.is_empty()).then_some(AttributeEvidence {
                                attribute,
                                rules,
                                prefix: [vals[6], vals[7]],
                            })
                        })
                        .collect();
                    SlotEvidence::Rules(evidence)
                })
            })
            .collect();
        Ok(ContextEvidence { config, slots })
    }

    /// Whether the slot is skipped as free variation.
    pub fn is_released(&self, component: usize, slot: RuleSlot) -> bool {
        matches!(self.slots[component][slot.index()], SlotEvidence::Released)
    }

    pub fn config(&self) -> FigureConfiguration {
        self.config
    }

    /// Whether the candidate component completes the slot under some
    /// inferred rule.
    pub fn slot_satisfied(&self, component: usize, slot: RuleSlot, candidate: &ComponentState) -> bool {
        let spec = &self.config.components()[component];
        match &self.slots[component][slot.index()] {
            SlotEvidence::Released => true,
            SlotEvidence::Rules(evidence) => evidence.iter().any(|ev| {
                candidate.value(ev.attribute).is_some_and(|v| {
                    let row = [ev.prefix[0], ev.prefix[1], v];
                    ev.rules
                        .iter()
                        .any(|rule| check_row(rule, spec.domain(ev.attribute), &row))
                })
            }),
        }
    }

    pub fn score(&self, candidate: &PanelState, candidate_index: usize) -> Result<CandidateScore> {
        if candidate.config != self.config || candidate.components.len() != self.slots.len() {
            return Err(RavenError::Scoring(format!(
                "candidate {candidate_index} is {} but the context is {}",
                candidate.config, self.config
            )));
        }
        let satisfied = candidate
            .components
            .iter()
            .enumerate()
            .map(|(ci, comp)| {
                RuleSlot::ALL
                    .into_iter()
                    .filter(|slot| self.slot_satisfied(ci, *slot, comp))
                    .count()
            })
            .sum();
        Ok(CandidateScore {
            candidate_index,
            satisfied,
        })
    }

    pub fn max_score(&self) -> usize {
        4 * self.slots.len()
    }
}

pub fn score_candidate(
    context: &[PanelState],
    candidate: &PanelState,
    candidate_index: usize,
) -> Result<CandidateScore> {
    ContextEvidence::new(context)?.score(candidate, candidate_index)
}

/// Picks the candidate satisfying the most constraints.
pub fn solve(context: &[PanelState], candidates: &[PanelState]) -> Result<Solution> {
    if candidates.len() != 8 {
        return Err(RavenError::Scoring(format!(
            "expected 8 candidates, got {}",
            candidates.len()
        )));
    }
    let evidence = ContextEvidence::new(context)?;
    let scores = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| evidence.score(c, i))
        .collect::<Result<Vec<_>>>()?;
    let best = scores.iter().map(|s| s.satisfied).max().unwrap_or(0);
    let at_best: Vec<_> = scores.iter().filter(|s| s.satisfied == best).collect();
    if at_best.len() > 1 {
        return Err(RavenError::Ambiguous {
            count: at_best.len(),
            score: best,
        });
    }
    Ok(Solution {
        chosen_index: at_best[0].candidate_index,
        scores,
    })
}
