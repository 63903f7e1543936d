//! Procedural generator, annotator and symbolic solver for Raven-style
//! progressive-matrix problems.
//!
//! Generation follows the grammar pipeline: sample a rule group per
//! component, prune the attribute domains, fill the matrix row by row,
//! forge an answer set by breaking one rule per distractor, then render
//! and annotate.

pub mod annotation;
pub mod error;
pub mod forge;
pub mod generate;
pub mod grammar;
pub mod render;
pub mod rules;
pub mod sampler;
pub mod solver;
pub mod space;

pub use error::{RavenError, Result};
pub use forge::{build_answer_set, verify_unique, Problem};
pub use generate::{generate_indexed, generate_problem, generate_problems};
pub use grammar::{attribute_domain, Attribute, FigureConfiguration, PanelState, Value};
pub use rules::{apply_rule, check_row, infer_rules, RuleGroup, RuleSpec};
pub use sampler::{generate_matrix, sample_rule_groups, MatrixDraft, RuleMode};
pub use solver::{score_candidate, solve, CandidateScore, Solution};
pub use space::{prune_space, sample_panel, PrunedSpace};
