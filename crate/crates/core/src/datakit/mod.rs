//! Publication schema, JSON Lines ingestion, label spaces and synthetic data.

mod labels;
mod publication;
mod synthetic;

pub use labels::{merge_to_binary, LabelMode, LabelSpace, HATE, MMHS_CLASSES, NO_HATE};
pub use publication::{load_jsonl, load_jsonl_with, write_jsonl, Dataset, Publication, Visual, BLOB_THRESHOLD};
pub use synthetic::{
    bayes_single_modality_accuracy, generate_synthetic, mutual_information_bits, split_and_batch, synthetic_labels,
    SplitBatches, SyntheticData, SyntheticSpec, SyntheticTask, MIN_GRID, TEXT_KEYWORDS,
};

#[cfg(test)]
mod tests;
