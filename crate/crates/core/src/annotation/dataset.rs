//! On-disk dataset: one JSON record and sixteen PNG panels per problem,
//! indexed by a manifest with checksums, fold plan and summary statistics.
//!
//! ```text
//! <root>/manifest
//! <root>/<config>/<id>.record
//! <root>/<config>/<id>_<k>.png      k = 0..15, context then candidates
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::targets::{rule_target, struct_target};
use super::tree::{parse_tree, serialize_tree, SerializedTree};
use crate::error::{RavenError, Result};
use crate::forge::{Problem, CANDIDATES};
use crate::generate::FOLDS;
use crate::grammar::FigureConfiguration;
use crate::render::render_panel;
use crate::rules::RuleGroup;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest";
pub const PANELS_PER_PROBLEM: usize = 8 + CANDIDATES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn folds(self) -> std::ops::Range<u8> {
        match self {
            Split::Train => 0..6,
            Split::Validation => 6..8,
            Split::Test => 8..FOLDS,
        }
    }

    pub fn of_fold(fold: u8) -> Split {
        Self::ALL
            .into_iter()
            .find(|s| s.folds().contains(&fold))
            .unwrap_or(Split::Test)
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Everything needed to rebuild a [`Problem`] without the images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub schema_version: u32,
    pub id: String,
    pub config: String,
    pub seed: u64,
    pub fold: u8,
    pub target: usize,
    pub rules: Vec<Vec<String>>,
    pub rule_groups: Vec<RuleGroup>,
    /// Context panels then candidates.
    pub trees: Vec<SerializedTree>,
    pub rule_target: Vec<u8>,
    pub struct_target: Vec<u8>,
}

impl ProblemRecord {
    pub fn from_problem(problem: &Problem) -> Self {
        ProblemRecord {
            schema_version: SCHEMA_VERSION,
            id: problem.id.clone(),
            config: problem.config.as_str().to_string(),
            seed: problem.seed,
            fold: problem.fold,
            target: problem.target,
            rules: problem.rule_groups.iter().map(RuleGroup::annotations).collect(),
            rule_groups: problem.rule_groups.clone(),
            trees: problem.panels().map(serialize_tree).collect(),
            rule_target: rule_target(problem),
            struct_target: struct_target(problem.config),
        }
    }

    /// Rebuilds the problem, rejecting records whose derived fields disagree
    /// with their content.
    pub fn to_problem(&self, path: &Path) -> Result<Problem> {
        let corrupt = |message: String| RavenError::Corruption {
            path: path.to_path_buf(),
            message,
        };
        if self.schema_version != SCHEMA_VERSION {
            return Err(corrupt(format!("schema version {}", self.schema_version)));
        }
        let config = FigureConfiguration::from_str(&self.config).map_err(corrupt)?;
        if self.trees.len() != PANELS_PER_PROBLEM {
            return Err(corrupt(format!("{} trees", self.trees.len())));
        }
        if self.target >= CANDIDATES {
            return Err(corrupt(format!("target {}", self.target)));
        }
        let mut panels = self
            .trees
            .iter()
            .map(|t| parse_tree(t).map_err(|e| corrupt(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if let Some(p) = panels.iter().find(|p| p.config != config) {
            return Err(corrupt(format!("panel of {} in a {config} problem", p.config)));
        }
        for group in &self.rule_groups {
            group.validate().map_err(|e| corrupt(e.to_string()))?;
        }
        let candidates = panels.split_off(8);
        let problem = Problem {
            id: self.id.clone(),
            config,
            context: panels,
            candidates,
            target: self.target,
            rule_groups: self.rule_groups.clone(),
            fold: self.fold,
            seed: self.seed,
        };
        if ProblemRecord::from_problem(&problem) != *self {
            return Err(corrupt("annotations disagree with panels or rules".into()));
        }
        Ok(problem)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub config: String,
    pub fold: u8,
    pub record_sha256: String,
    /// Digest over the sixteen PNG files in panel order.
    pub images_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub train: Vec<u8>,
    pub validation: Vec<u8>,
    pub test: Vec<u8>,
}

impl Default for FoldPlan {
    fn default() -> Self {
        FoldPlan {
            train: Split::Train.folds().collect(),
            validation: Split::Validation.folds().collect(),
            test: Split::Test.folds().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub problems: usize,
    pub per_config: BTreeMap<String, usize>,
    pub per_split: BTreeMap<String, usize>,
    pub rule_annotations: usize,
    pub avg_rules: f64,
    pub struct_annotations: usize,
}

impl DatasetStats {
    pub fn from_problems(problems: &[Problem]) -> Self {
        let mut per_config = BTreeMap::new();
        let mut per_split = BTreeMap::new();
        for p in problems {
            *per_config.entry(p.config.as_str().to_string()).or_insert(0) += 1;
            *per_split.entry(Split::of_fold(p.fold).name().to_string()).or_insert(0) += 1;
        }
        let rule_annotations: usize = problems.iter().map(Problem::rule_count).sum();
        DatasetStats {
            problems: problems.len(),
            per_config,
            per_split,
            rule_annotations,
            avg_rules: if problems.is_empty() {
                0.0
            } else {
                rule_annotations as f64 / problems.len() as f64
            },
            struct_annotations: problems.len() * PANELS_PER_PROBLEM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub master_seed: Option<u64>,
    pub folds: FoldPlan,
    pub stats: DatasetStats,
    pub problems: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub problems: Vec<Problem>,
}

pub fn record_path(root: &Path, config: &str, id: &str) -> PathBuf {
    root.join(config).join(format!("{id}.record"))
}

pub fn panel_path(root: &Path, config: &str, id: &str, k: usize) -> PathBuf {
    root.join(config).join(format!("{id}_{k}.png"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary sibling so readers never see partial files.
fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(|e| RavenError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| RavenError::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| RavenError::io(path, e))
}

fn write_problem(root: &Path, problem: &Problem, images: bool) -> Result<ManifestEntry> {
    let config = problem.config.as_str();
    let record = ProblemRecord::from_problem(problem);
    let path = record_path(root, config, &problem.id);
    let bytes = serde_json::to_vec_pretty(&record).map_err(|e| RavenError::Json {
        path: path.clone(),
        source: e,
    })?;
    write_file(&path, &bytes)?;
    let images_sha256 = if images {
        let mut hasher = Sha256::new();
        for (k, panel) in problem.panels().enumerate() {
            let png = render_panel(panel).to_png()?;
            hasher.update(&png);
            write_file(&panel_path(root, config, &problem.id, k), &png)?;
        }
        Some(hex::encode(hasher.finalize()))
    } else {
        None
    };
    Ok(ManifestEntry {
        id: problem.id.clone(),
        config: config.to_string(),
        fold: problem.fold,
        record_sha256: sha256_hex(&bytes),
        images_sha256,
    })
}

/// Writes every problem, then the manifest. A directory without a manifest
/// is an interrupted write.
pub fn write_dataset(root: &Path, problems: &[Problem], master_seed: Option<u64>, images: bool) -> Result<Manifest> {
    for config in FigureConfiguration::ALL {
        if problems.iter().any(|p| p.config == config) {
            let dir = root.join(config.as_str());
            fs::create_dir_all(&dir).map_err(|e| RavenError::io(&dir, e))?;
        }
    }
    let entries = problems
        .par_iter()
        .map(|p| write_problem(root, p, images))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        master_seed,
        folds: FoldPlan::default(),
        stats: DatasetStats::from_problems(problems),
        problems: entries,
    };
    let path = root.join(MANIFEST_FILE);
    let bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| RavenError::Json {
        path: path.clone(),
        source: e,
    })?;
    write_file(&path, &bytes)?;
    Ok(manifest)
}

pub fn read_manifest(root: &Path) -> Result<Manifest> {
    let path = root.join(MANIFEST_FILE);
    let bytes = read_file(&path)?;
    let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| RavenError::Json {
        path: path.clone(),
        source: e,
    })?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(RavenError::Corruption {
            path,
            message: format!("schema version {}", manifest.schema_version),
        });
    }
    Ok(manifest)
}

fn read_entry(root: &Path, entry: &ManifestEntry) -> Result<Problem> {
    let path = record_path(root, &entry.config, &entry.id);
    let bytes = read_file(&path)?;
    if sha256_hex(&bytes) != entry.record_sha256 {
        return Err(RavenError::Corruption {
            path,
            message: "checksum mismatch".into(),
        });
    }
    let record: ProblemRecord = serde_json::from_slice(&bytes).map_err(|e| RavenError::Json {
        path: path.clone(),
        source: e,
    })?;
    let problem = record.to_problem(&path)?;
    if problem.id != entry.id || problem.fold != entry.fold || problem.config.as_str() != entry.config {
        return Err(RavenError::Corruption {
            path,
            message: "record disagrees with its manifest entry".into(),
        });
    }
    Ok(problem)
}

/// Loads every record listed in the manifest, verifying checksums.
pub fn read_dataset(root: &Path) -> Result<Dataset> {
    let manifest = read_manifest(root)?;
    let problems = manifest
        .problems
        .par_iter()
        .map(|e| read_entry(root, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { manifest, problems })
}

/// Checks the PNG digests of one problem and that each image decodes to a
/// full-size panel.
pub fn verify_images(root: &Path, entry: &ManifestEntry) -> Result<()> {
    let Some(expected) = &entry.images_sha256 else {
        return Ok(());
    };
    let mut hasher = Sha256::new();
    for k in 0..PANELS_PER_PROBLEM {
        let path = panel_path(root, &entry.config, &entry.id, k);
        let bytes = read_file(&path)?;
        let image = crate::render::PanelImage::from_png(&bytes).map_err(|e| RavenError::Corruption {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if (image.width, image.height) != (crate::render::PANEL_SIZE, crate::render::PANEL_SIZE) {
            return Err(RavenError::Corruption {
                path,
                message: format!("{}x{} panel", image.width, image.height),
            });
        }
        hasher.update(&bytes);
    }
    if hex::encode(hasher.finalize()) != *expected {
        return Err(RavenError::Corruption {
            path: root.join(&entry.config).join(&entry.id),
            message: "image checksum mismatch".into(),
        });
    }
    Ok(())
}
