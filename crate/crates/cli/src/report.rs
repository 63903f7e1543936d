//! Solver accuracy, dataset statistics and full-dataset validation.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use raven_core::annotation::dataset::{verify_images, Dataset, DatasetStats, Split, PANELS_PER_PROBLEM};
use raven_core::annotation::ProblemRecord;
use raven_core::forge::{verify_unique, Problem, CANDIDATES};
use raven_core::grammar::FigureConfiguration;
use raven_core::rules::{check_row, RuleClass};
use raven_core::solver::solve;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub total: usize,
    pub correct: usize,
    /// Problems where the chosen candidate beat every other by at least one.
    pub strict: usize,
}

impl Tally {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.correct as f64 / self.total as f64)
    }

    fn add(&mut self, other: Tally) {
        self.total += other.total;
        self.correct += other.correct;
        self.strict += other.strict;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub per_config: Vec<(FigureConfiguration, Tally)>,
    pub ambiguous: Vec<String>,
}

impl SolverReport {
    pub fn overall(&self) -> Tally {
        let mut t = Tally::default();
        for (_, c) in &self.per_config {
            t.add(*c);
        }
        t
    }

    pub fn tally(&self, config: FigureConfiguration) -> Tally {
        self.per_config
            .iter()
            .find(|(c, _)| *c == config)
            .map(|(_, t)| *t)
            .unwrap_or_default()
    }

    /// Header plus one result row, configurations in canonical order.
    pub fn table(&self, method: &str) -> String {
        let cell = |t: Tally| t.accuracy().map_or("-".to_string(), |a| format!("{a:.2}%"));
        let mut out = format!("{:<10}{:>9}", "Method", "Acc");
        for config in FigureConfiguration::ALL {
            let _ = write!(out, "{:>9}", config.label());
        }
        let _ = write!(out, "\n{method:<10}{:>9}", cell(self.overall()));
        for config in FigureConfiguration::ALL {
            let _ = write!(out, "{:>9}", cell(self.tally(config)));
        }
        out.push('\n');
        out
    }
}

/// Runs the solver on every problem.
pub fn evaluate_solver(problems: &[Problem]) -> SolverReport {
    let outcomes: Vec<(FigureConfiguration, Tally, Option<String>)> = problems
        .par_iter()
        .map(|p| match solve(&p.context, &p.candidates) {
            Ok(solution) => {
                let mut scores: Vec<usize> = solution.scores.iter().map(|s| s.satisfied).collect();
                scores.sort_unstable_by(|a, b| b.cmp(a));
                let correct = solution.chosen_index == p.target;
                let tally = Tally {
                    total: 1,
                    correct: correct as usize,
                    strict: (correct && scores[0] > scores[1]) as usize,
                };
                (p.config, tally, None)
            }
            Err(_) => (
                p.config,
                Tally {
                    total: 1,
                    ..Tally::default()
                },
                Some(p.id.clone()),
            ),
        })
        .collect();
    let mut per_config: Vec<(FigureConfiguration, Tally)> = Vec::new();
    let mut ambiguous = Vec::new();
    for (config, tally, amb) in outcomes {
        match per_config.iter_mut().find(|(c, _)| *c == config) {
            Some((_, t)) => t.add(tally),
            None => per_config.push((config, tally)),
        }
        ambiguous.extend(amb);
    }
    per_config.sort_by_key(|(c, _)| c.ordinal());
    SolverReport { per_config, ambiguous }
}

/// Statistics recomputed from the records themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub stats: DatasetStats,
    pub trees: usize,
    pub instantiations: BTreeSet<String>,
}

pub fn dataset_stats(problems: &[Problem]) -> StatsReport {
    let trees = problems
        .iter()
        .map(|p| ProblemRecord::from_problem(p).trees.len())
        .sum();
    let instantiations = problems
        .iter()
        .flat_map(|p| &p.rule_groups)
        .flat_map(|g| &g.slots)
        .map(|s| s.rule.class().to_string())
        .collect();
    StatsReport {
        stats: DatasetStats::from_problems(problems),
        trees,
        instantiations,
    }
}

impl StatsReport {
    pub fn render(&self) -> String {
        let s = &self.stats;
        let mut out = String::new();
        let _ = writeln!(out, "problems      {}", s.problems);
        for (config, n) in &s.per_config {
            let _ = writeln!(out, "  {config:<14}{n}");
        }
        let _ = writeln!(out, "rules         {}", s.rule_annotations);
        let _ = writeln!(out, "AvgRule       {:.4}", s.avg_rules);
        let _ = writeln!(out, "RuleIns       {}", self.instantiations.len());
        let _ = writeln!(out, "StructAnno    {}", self.trees);
        let splits: Vec<String> = Split::ALL
            .iter()
            .map(|sp| format!("{} {}", sp.name(), s.per_split.get(sp.name()).copied().unwrap_or(0)))
            .collect();
        let _ = writeln!(out, "splits        {}", splits.join(" / "));
        out
    }
}

/// Re-checks every invariant of a loaded dataset. Returns one message per
/// failed check.
pub fn validate_dataset(root: &Path, dataset: &Dataset) -> Vec<String> {
    let mut failures: Vec<String> = dataset
        .manifest
        .problems
        .par_iter()
        .filter_map(|entry| verify_images(root, entry).err().map(|e| format!("{}: {e}", entry.id)))
        .collect();
    failures.extend(
        dataset
            .problems
            .par_iter()
            .flat_map_iter(check_problem)
            .collect::<Vec<_>>(),
    );
    let mut seen = BTreeSet::new();
    for p in &dataset.problems {
        if !seen.insert(&p.id) {
            failures.push(format!("{}: duplicate id", p.id));
        }
    }
    let recomputed = DatasetStats::from_problems(&dataset.problems);
    if recomputed != dataset.manifest.stats {
        failures.push("manifest statistics disagree with the records".into());
    }
    failures
}

fn check_problem(p: &Problem) -> Vec<String> {
    let mut out = Vec::new();
    let mut fail = |msg: String| out.push(format!("{}: {msg}", p.id));
    if p.context.len() + p.candidates.len() != PANELS_PER_PROBLEM || p.candidates.len() != CANDIDATES {
        fail("wrong panel count".into());
        return out;
    }
    if p.rule_groups.len() != p.config.components().len() {
        fail("one rule group per component expected".into());
    }
    for g in &p.rule_groups {
        if let Err(e) = g.validate() {
            fail(e.to_string());
        }
    }
    let rows: Vec<&raven_core::PanelState> = p.context.iter().chain([p.answer()]).collect();
    for g in &p.rule_groups {
        let spec = &p.config.components()[g.component];
        let released = rows.iter().all(|panel| !panel.components[g.component].uniformity);
        for rule in &g.slots {
            if released && rule.target.is_entity_level() {
                continue;
            }
            for r in 0..3 {
                let vals: Option<Vec<_>> = (0..3)
                    .map(|c| rows[3 * r + c].components[g.component].value(rule.target))
                    .collect();
                let ok = vals.is_some_and(|v| check_row(rule, spec.domain(rule.target), &[v[0], v[1], v[2]]));
                if !ok {
                    fail(format!("component {} row {r} breaks {rule}", g.component));
                }
            }
        }
    }
    for (i, a) in p.candidates.iter().enumerate() {
        if let Err(e) = a.validate() {
            fail(format!("candidate {i}: {e}"));
        }
        if p.candidates[i + 1..].contains(a) {
            fail(format!("candidate {i} is repeated"));
        }
    }
    if !verify_unique(p) {
        fail("solver does not single out the target".into());
    }
    if p.fold >= 10 {
        fail(format!("fold {}", p.fold));
    }
    out
}

/// Distinct rule instantiations a dataset can draw from, for reference.
pub fn instantiation_names() -> Vec<String> {
    use raven_core::rules::ArithmeticOp;
    let mut v = vec![RuleClass::Constant];
    v.extend([-2, -1, 1, 2].map(RuleClass::Progression));
    v.extend([ArithmeticOp::Plus, ArithmeticOp::Minus].map(RuleClass::Arithmetic));
    v.push(RuleClass::DistributeThree);
    v.iter().map(ToString::to_string).collect()
}
