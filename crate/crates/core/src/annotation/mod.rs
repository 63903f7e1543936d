//! Annotations and storage: parse trees, multi-hot targets and the dataset
//! layout on disk.

pub mod dataset;
pub mod targets;
pub mod tree;

pub use dataset::{read_dataset, write_dataset, Dataset, DatasetStats, Manifest, ProblemRecord, Split};
pub use targets::{rule_target, struct_target};
pub use tree::{parse_tree, serialize_tree, SerializedTree, Tree};
