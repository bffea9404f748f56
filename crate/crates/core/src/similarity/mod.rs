//! Semantic similarity between an intended and a perceived message, and the
//! semantic noise derived from it.
//!
//! Two metric families are provided: cosine similarity over feature vectors
//! (either supplied directly or built from text with a bag-of-words
//! vectorizer) and SSIM over grayscale images.

mod cosine;
mod pgm;
mod ssim;
mod text;

pub use cosine::{cosine_similarity, FeatureVector};
pub use pgm::{read_pgm, write_pgm};
pub use ssim::{ssim, GrayImage, SsimParams, SsimWindow};
pub use text::{text_cosine, text_to_vector, tokenize, Vocabulary};

use serde::Serialize;

use crate::error::{Error, Result};

/// Similarity between two messages. Both cosine and SSIM live in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Invalid(format!("similarity must be finite, got {value}")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Semantic noise, always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct SemanticNoise(f64);

impl SemanticNoise {
    /// Wraps an externally measured noise value, rejecting anything outside `[0, 1]`.
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Invalid(format!(
                "semantic noise must be in [0, 1], got {value}"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `1 - score`, clamped to `[0, 1]` so that negative cosine scores still
/// produce a bounded loss term.
pub fn semantic_noise(score: SimilarityScore) -> SemanticNoise {
    SemanticNoise((1.0 - score.value()).clamp(0.0, 1.0))
}
