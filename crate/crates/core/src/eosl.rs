//! Energy-optimized semantic loss: a weighted sum of semantic noise, channel
//! loss and normalized communication/semantic energy, accumulated over
//! transmission attempts until the semantic noise falls below a threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multipliers for the four loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EoslWeights {
    pub lambda_sm: f64,
    pub lambda_lch: f64,
    pub lambda_ec: f64,
    pub lambda_es: f64,
}

impl Default for EoslWeights {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl EoslWeights {
    pub fn uniform(lambda: f64) -> Self {
        Self {
            lambda_sm: lambda,
            lambda_lch: lambda,
            lambda_ec: lambda,
            lambda_es: lambda,
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            lambda_sm: self.lambda_sm * c,
            lambda_lch: self.lambda_lch * c,
            lambda_ec: self.lambda_ec * c,
            lambda_es: self.lambda_es * c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("lambda_sm", self.lambda_sm),
            ("lambda_lch", self.lambda_lch),
            ("lambda_ec", self.lambda_ec),
            ("lambda_es", self.lambda_es),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be a non-negative number, got {w}")));
            }
        }
        Ok(())
    }
}

/// Term values for one transmission attempt. All four lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttemptRecord {
    pub index: usize,
    pub semantic_noise: f64,
    pub channel_loss: f64,
    pub comm_ratio: f64,
    pub sem_ratio: f64,
}

impl AttemptRecord {
    pub fn new(
        index: usize,
        semantic_noise: f64,
        channel_loss: f64,
        comm_ratio: f64,
        sem_ratio: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("semantic noise", semantic_noise),
            ("channel loss", channel_loss),
            ("communication energy ratio", comm_ratio),
            ("semantic energy ratio", sem_ratio),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Invalid(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(Self {
            index,
            semantic_noise,
            channel_loss,
            comm_ratio,
            sem_ratio,
        })
    }
}

pub fn eosl_term(attempt: &AttemptRecord, w: &EoslWeights) -> f64 {
    w.lambda_sm * attempt.semantic_noise
        + w.lambda_lch * attempt.channel_loss
        + w.lambda_ec * attempt.comm_ratio
        + w.lambda_es * attempt.sem_ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    /// Every attempt reuses the candidate's measured noise.
    FixedPerCandidate,
    /// The candidate supplies one noise value per attempt.
    TraceSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetransmitPolicy {
    pub n_sm_thresh: f64,
    pub max_attempts: usize,
    pub noise_source: NoiseSource,
}

impl Default for RetransmitPolicy {
    fn default() -> Self {
        Self {
            n_sm_thresh: 0.3,
            max_attempts: 1,
            noise_source: NoiseSource::FixedPerCandidate,
        }
    }
}

impl RetransmitPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.n_sm_thresh) {
            return Err(Error::Invalid(format!(
                "n_sm_thresh must be in [0, 1], got {}",
                self.n_sm_thresh
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::Invalid("max_attempts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EoslScore {
    pub value: f64,
    pub attempts: usize,
    pub threshold_met: bool,
    pub per_attempt: Vec<f64>,
}

/// Per-candidate inputs that stay fixed across attempts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateTerms {
    pub channel_loss: f64,
    pub comm_ratio: f64,
    pub sem_ratio: f64,
}

/// Accumulates one term per attempt, stopping at the first attempt whose
/// noise is within threshold or when `max_attempts` is reached.
///
/// `noise` yields the semantic noise of attempt `j` (0-based); `None` means
/// the sequence ran out.
pub fn run_transmission<F>(
    mut noise: F,
    terms: CandidateTerms,
    policy: &RetransmitPolicy,
    w: &EoslWeights,
) -> Result<EoslScore>
where
    F: FnMut(usize) -> Option<f64>,
{
    policy.validate()?;
    w.validate()?;
    let mut per_attempt = Vec::new();
    let mut total = 0.0;
    for j in 0..policy.max_attempts {
        let n_sm = noise(j).ok_or(Error::TruncatedSequence { consumed: j })?;
        let record = AttemptRecord::new(j + 1, n_sm, terms.channel_loss, terms.comm_ratio, terms.sem_ratio)?;
        let term = eosl_term(&record, w);
        total += term;
        per_attempt.push(term);
        if n_sm <= policy.n_sm_thresh {
            return Ok(EoslScore {
                value: total,
                attempts: j + 1,
                threshold_met: true,
                per_attempt,
            });
        }
    }
    Ok(EoslScore {
        value: total,
        attempts: policy.max_attempts,
        threshold_met: false,
        per_attempt,
    })
}

/// Semantic noise for a candidate: one measured value, or a per-attempt sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateNoise {
    Fixed(f64),
    Sequence(Vec<f64>),
}

pub fn score_candidate(
    noise: &CandidateNoise,
    terms: CandidateTerms,
    policy: &RetransmitPolicy,
    w: &EoslWeights,
) -> Result<EoslScore> {
    match (policy.noise_source, noise) {
        (NoiseSource::FixedPerCandidate, CandidateNoise::Fixed(n)) => {
            run_transmission(|_| Some(*n), terms, policy, w)
        }
        (NoiseSource::TraceSequence, CandidateNoise::Sequence(seq)) => {
            run_transmission(|j| seq.get(j).copied(), terms, policy, w)
        }
        (NoiseSource::FixedPerCandidate, CandidateNoise::Sequence(_)) => Err(Error::Invalid(
            "a noise sequence was supplied but the policy uses fixed per-candidate noise".into(),
        )),
        (NoiseSource::TraceSequence, CandidateNoise::Fixed(_)) => Err(Error::Invalid(
            "the policy needs a per-attempt noise sequence".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn terms(l: f64, c: f64, s: f64) -> CandidateTerms {
        CandidateTerms {
            channel_loss: l,
            comm_ratio: c,
            sem_ratio: s,
        }
    }

    fn policy(thresh: f64, max: usize, src: NoiseSource) -> RetransmitPolicy {
        RetransmitPolicy {
            n_sm_thresh: thresh,
            max_attempts: max,
            noise_source: src,
        }
    }

    #[test]
    fn single_term_examples() {
        let w = EoslWeights {
            lambda_lch: 0.0,
            lambda_ec: 0.0,
            ..EoslWeights::default()
        };
        let a = AttemptRecord::new(1, 0.255, 0.3, 0.7, 50.701 / 524.718).unwrap();
        assert!((eosl_term(&a, &w) - 0.351_625_234_888_073_2).abs() < 1e-12);

        let zero = AttemptRecord::new(1, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(eosl_term(&zero, &EoslWeights::default()), 0.0);
        let one = AttemptRecord::new(1, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(eosl_term(&one, &EoslWeights::default()), 4.0);
        assert!(AttemptRecord::new(1, 1.2, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn first_attempt_within_threshold() {
        let p = RetransmitPolicy::default();
        let s = score_candidate(&CandidateNoise::Fixed(0.255), terms(0.0, 0.0, 0.1), &p, &EoslWeights::default())
            .unwrap();
        assert_eq!(s.attempts, 1);
        assert!(s.threshold_met);
        assert!((s.value - 0.355).abs() < 1e-12);
    }

    #[test]
    fn sequence_retransmits_until_threshold() {
        let p = policy(0.3, 5, NoiseSource::TraceSequence);
        let t = terms(0.1, 0.2, 0.3);
        let s = score_candidate(&CandidateNoise::Sequence(vec![0.5, 0.2, 0.9]), t, &p, &EoslWeights::default())
            .unwrap();
        assert_eq!(s.attempts, 2);
        assert!(s.threshold_met);
        assert!((s.value - ((0.5 + 0.6) + (0.2 + 0.6))).abs() < 1e-12);
    }

    #[test]
    fn cap_stops_the_loop() {
        let p = policy(0.3, 3, NoiseSource::FixedPerCandidate);
        let s = score_candidate(&CandidateNoise::Fixed(0.9), terms(0.0, 0.0, 0.0), &p, &EoslWeights::default())
            .unwrap();
        assert_eq!(s.attempts, 3);
        assert!(!s.threshold_met);
        assert!((s.value - 2.7).abs() < 1e-12);
    }

    #[test]
    fn exhausted_sequence_is_an_error() {
        let p = policy(0.3, 4, NoiseSource::TraceSequence);
        let err = score_candidate(&CandidateNoise::Sequence(vec![0.5, 0.6]), terms(0.0, 0.0, 0.0), &p, &EoslWeights::default())
            .unwrap_err();
        assert!(matches!(err, Error::TruncatedSequence { consumed: 2 }));
    }

    #[test]
    fn mismatched_noise_source_is_rejected() {
        let p = policy(0.3, 2, NoiseSource::TraceSequence);
        assert!(score_candidate(&CandidateNoise::Fixed(0.1), terms(0.0, 0.0, 0.0), &p, &EoslWeights::default()).is_err());
    }

    #[test]
    fn rejects_invalid_weights_and_policy() {
        let w = EoslWeights {
            lambda_sm: -1.0,
            ..EoslWeights::default()
        };
        assert!(w.validate().is_err());
        assert!(policy(0.3, 0, NoiseSource::FixedPerCandidate).validate().is_err());
        assert!(policy(1.3, 1, NoiseSource::FixedPerCandidate).validate().is_err());
    }

    fn unit() -> impl Strategy<Value = f64> {
        0.0f64..=1.0
    }

    fn weights() -> impl Strategy<Value = EoslWeights> {
        (0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0).prop_map(|(a, b, c, d)| EoslWeights {
            lambda_sm: a,
            lambda_lch: b,
            lambda_ec: c,
            lambda_es: d,
        })
    }

    proptest! {
        #[test]
        fn linear_in_each_weight(
            (n, l, c, s) in (unit(), unit(), unit(), unit()),
            w in weights(),
            k in 0.0f64..10.0,
        ) {
            let a = AttemptRecord::new(1, n, l, c, s).unwrap();
            let base = eosl_term(&a, &w);
            let bumped = EoslWeights { lambda_sm: w.lambda_sm * k, ..w };
            let expected = base + (k - 1.0) * w.lambda_sm * n;
            prop_assert!((eosl_term(&a, &bumped) - expected).abs() <= 1e-9);
            prop_assert!(eosl_term(&a, &EoslWeights::default()) <= 4.0);
        }

        #[test]
        fn monotone_in_terms_and_attempts(
            (n, l, c, s) in (unit(), unit(), unit(), unit()),
            dl in unit(),
            w in weights(),
            max in 1usize..6,
        ) {
            let t0 = terms(l, c, s);
            let t1 = terms((l + dl).min(1.0), c, s);
            let p = policy(0.0, max, NoiseSource::FixedPerCandidate);
            let n = n.max(1e-6);
            let a = score_candidate(&CandidateNoise::Fixed(n), t0, &p, &w).unwrap();
            let b = score_candidate(&CandidateNoise::Fixed(n), t1, &p, &w).unwrap();
            prop_assert!(b.value >= a.value - 1e-12);
            let p_more = policy(0.0, max + 1, NoiseSource::FixedPerCandidate);
            let more = score_candidate(&CandidateNoise::Fixed(n), t0, &p_more, &w).unwrap();
            prop_assert!(more.value >= a.value - 1e-12);
            prop_assert!(a.value <= 4.0 * 5.0 * a.attempts as f64);
        }

        #[test]
        fn single_attempt_equals_term((n, l, c, s) in (unit(), unit(), unit(), unit()), w in weights()) {
            let p = policy(0.3, 1, NoiseSource::FixedPerCandidate);
            let score = score_candidate(&CandidateNoise::Fixed(n), terms(l, c, s), &p, &w).unwrap();
            let a = AttemptRecord::new(1, n, l, c, s).unwrap();
            prop_assert_eq!(score.value, eosl_term(&a, &w));
            prop_assert_eq!(score.attempts, 1);
        }
    }
}
