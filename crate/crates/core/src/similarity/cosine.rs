use std::path::Path;

use super::SimilarityScore;
use crate::error::{Error, Result};

/// A non-empty vector of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension("feature vector must have length >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "feature vector entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    /// Loads a vector stored as a single JSON array of numbers.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let values: Vec<f64> = serde_json::from_str(&raw).map_err(|e| Error::parse(path, e))?;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine of the angle between `a` and `b`.
///
/// A zero vector has no direction, so it yields an error rather than a
/// similarity of 0.
pub fn cosine_similarity(a: &FeatureVector, b: &FeatureVector) -> Result<SimilarityScore> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "cannot compare vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedSimilarity(
            "cosine similarity of a zero vector".into(),
        ));
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    SimilarityScore::new((dot / (na * nb)).clamp(-1.0, 1.0))
}
