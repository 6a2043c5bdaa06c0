//! Ontology similarity filtering and class alignment.

mod align;
mod bag;
mod soft;

use serde::{Deserialize, Serialize};

pub use align::{
    align_classes, align_classes_with, fragment, position_type, position_type_with, Alignment, Candidate,
    Correspondence, PositionOutcome, Positioning, Rule,
};
pub use bag::{cosine_similarity, filter_similar, rank_similar, term_bag, SimilarityRow, TermBag};
pub use soft::{class_document, soft_tfidf, Corpus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    /// Minimum TF cosine for an ontology to be kept.
    pub filter_threshold: f64,
    /// Minimum SoftTFIDF score for a class correspondence.
    pub class_threshold: f64,
    /// Fraction of siblings that must match for the sibling rule.
    pub sibling_threshold: f64,
    /// Jaro-Winkler cut-off inside SoftTFIDF.
    pub inner_theta: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { filter_threshold: 0.5, class_threshold: 0.85, sibling_threshold: 0.5, inner_theta: 0.9 }
    }
}
