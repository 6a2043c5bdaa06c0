use serde::{Deserialize, Serialize};

use super::{Ontology, OntologyError};

/// How distances enter the semantic variance average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvMode {
    /// Mean of squared distances to the root.
    #[default]
    Squared,
    /// Mean of plain distances to the root.
    Plain,
}

/// `log2(1 + (|A(a) ∪ A(b)| - |A(a) ∩ A(b)|) / |A(a) ∪ A(b)|)` where `A(c)`
/// is the set of taxonomic ancestors of `c` including itself.
///
/// In a tree both ancestor lists end at the root, so the intersection is the
/// common suffix of the two parent chains.
pub fn semantic_distance(o: &Ontology, a: &str, b: &str) -> Result<f64, OntologyError> {
    let pa = o.ancestors(a)?;
    let pb = o.ancestors(b)?;
    let common = pa.iter().rev().zip(pb.iter().rev()).take_while(|(x, y)| x == y).count();
    let union = pa.len() + pb.len() - common;
    Ok((1.0 + (union - common) as f64 / union as f64).log2())
}

/// Average (squared) semantic distance from every non-root concept to the
/// root. A root-only ontology has variance 0.
pub fn semantic_variance(o: &Ontology, mode: SvMode) -> Result<f64, OntologyError> {
    let others: Vec<&str> = o.concepts.keys().map(String::as_str).filter(|c| *c != o.root).collect();
    if others.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for c in &others {
        let d = semantic_distance(o, c, &o.root)?;
        sum += match mode {
            SvMode::Squared => d * d,
            SvMode::Plain => d,
        };
    }
    Ok(sum / others.len() as f64)
}
