//! Bag-of-words term-frequency vectors for caption comparison.

use std::collections::HashMap;

use super::{cosine_similarity, FeatureVector, SimilarityScore};
use crate::error::{Error, Result};

/// Ordered token list defining vector coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::default();
        for t in tokens {
            vocab.insert(t.into());
        }
        vocab
    }

    /// Union vocabulary of several texts, in order of first appearance.
    pub fn from_texts(texts: &[&str]) -> Self {
        Self::new(texts.iter().flat_map(|t| tokenize(t)))
    }

    fn insert(&mut self, token: String) {
        if !self.index.contains_key(&token) {
            self.index.insert(token.clone(), self.tokens.len());
            self.tokens.push(token);
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercases, turns every non-alphanumeric character into a separator and
/// splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    normalized.split_whitespace().map(str::to_owned).collect()
}

/// Term counts of `text` over `vocabulary`. Tokens absent from the vocabulary
/// are dropped. With `None` the vocabulary is built from `text` itself.
pub fn text_to_vector(text: &str, vocabulary: Option<&Vocabulary>) -> Result<FeatureVector> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::EmptyText);
    }
    let own;
    let vocab = match vocabulary {
        Some(v) => v,
        None => {
            own = Vocabulary::new(tokens.iter().cloned());
            &own
        }
    };
    if vocab.is_empty() {
        return Err(Error::Dimension("vocabulary is empty".into()));
    }
    let mut counts = vec![0.0; vocab.len()];
    for t in &tokens {
        if let Some(&i) = vocab.index.get(t) {
            counts[i] += 1.0;
        }
    }
    FeatureVector::new(counts)
}

/// Cosine similarity of two texts over their union vocabulary.
pub fn text_cosine(a: &str, b: &str) -> Result<SimilarityScore> {
    let vocab = Vocabulary::from_texts(&[a, b]);
    let va = text_to_vector(a, Some(&vocab))?;
    let vb = text_to_vector(b, Some(&vocab))?;
    cosine_similarity(&va, &vb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_over_fixed_vocabulary() {
        let v = Vocabulary::new(["a", "red", "rose"]);
        assert_eq!(text_to_vector("a red rose", Some(&v)).unwrap().values(), &[1.0, 1.0, 1.0]);

        let v = Vocabulary::new(["dog", "runs", "grass"]);
        assert_eq!(
            text_to_vector("dog dog runs", Some(&v)).unwrap().values(),
            &[2.0, 1.0, 0.0]
        );
    }

    #[test]
    fn normalization() {
        assert_eq!(tokenize("A brown-dog, RUNNING!"), vec!["a", "brown", "dog", "running"]);
        assert!(matches!(text_to_vector(" ?! ", None), Err(Error::EmptyText)));
    }

    #[test]
    fn identical_texts_score_one() {
        let s = text_cosine("a brown dog", "a brown dog").unwrap();
        assert!((s.value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_texts_score_zero() {
        let s = text_cosine("a red rose", "brown dog").unwrap();
        assert_eq!(s.value(), 0.0);
    }

    #[test]
    fn out_of_vocabulary_text_is_undefined() {
        let v = Vocabulary::new(["cat"]);
        let a = text_to_vector("cat", Some(&v)).unwrap();
        let b = text_to_vector("dog", Some(&v)).unwrap();
        assert!(matches!(cosine_similarity(&a, &b), Err(Error::UndefinedSimilarity(_))));
    }

    proptest! {
        #[test]
        fn word_order_does_not_matter(
            words_a in prop::collection::vec("[a-e]{1,3}", 1..8),
            words_b in prop::collection::vec("[a-e]{1,3}", 1..8),
            seed in any::<u64>(),
        ) {
            let rotate = |w: &[String]| {
                let mut w = w.to_vec();
                let k = (seed as usize) % w.len();
                w.rotate_left(k);
                w.reverse();
                w.join(" ")
            };
            let base = text_cosine(&words_a.join(" "), &words_b.join(" "));
            let perm = text_cosine(&rotate(&words_a), &rotate(&words_b));
            match (base, perm) {
                (Ok(x), Ok(y)) => prop_assert!((x.value() - y.value()).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "permutation changed definedness"),
            }
        }
    }
}
