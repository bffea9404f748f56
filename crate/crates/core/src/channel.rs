//! Lossy channel model: average bit error under deep fade, block-level loss
//! for a code correcting up to `t` errors, and a seeded Monte Carlo estimate
//! of the same loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the generator used by [`simulate_block_errors`], recorded in reports.
pub const PRNG_ID: &str = "ChaCha8Rng/seed_from_u64+stream";

/// Trials per Monte Carlo partition. Each partition draws from its own
/// stream, so the estimate does not depend on the number of worker threads.
const TRIALS_PER_PARTITION: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    /// Bit error probability from channel noise.
    pub p_b: f64,
    /// Probability of being in a deep fade.
    #[serde(default)]
    pub p_f: f64,
    /// Number of bit errors the code can correct per block.
    #[serde(default)]
    pub t: u64,
    /// Block (packet) length in bits.
    #[serde(default = "default_block_bits")]
    pub l: u64,
}

fn default_block_bits() -> u64 {
    1500 * 8
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            p_b: 0.001,
            p_f: 0.0,
            t: 0,
            l: default_block_bits(),
        }
    }
}

impl ChannelModel {
    pub fn new(p_b: f64, p_f: f64, t: u64, l: u64) -> Result<Self> {
        let ch = Self { p_b, p_f, t, l };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_b", self.p_b), ("p_f", self.p_f)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Invalid(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.l == 0 {
            return Err(Error::Invalid("block length l must be >= 1".into()));
        }
        if self.t > self.l {
            return Err(Error::Invalid(format!(
                "correctable errors t = {} exceeds block length l = {}",
                self.t, self.l
            )));
        }
        Ok(())
    }

    pub fn with_p_b(self, p_b: f64) -> Result<Self> {
        Self::new(p_b, self.p_f, self.t, self.l)
    }
}

/// Probability that a block is lost, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct ChannelLoss(f64);

impl ChannelLoss {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Mean bit error probability: a faded bit is wrong with probability 1/2.
pub fn average_bit_error(ch: &ChannelModel) -> f64 {
    (0.5 * ch.p_f + ch.p_b * (1.0 - ch.p_f)).clamp(0.0, 1.0)
}

/// Running log-sum-exp accumulator.
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn add(&mut self, log_term: f64) {
        if log_term > self.max {
            self.scaled = self.scaled * (self.max - log_term).exp() + 1.0;
            self.max = log_term;
        } else {
            self.scaled += (log_term - self.max).exp();
        }
    }

    fn ln(&self) -> f64 {
        self.max + self.scaled.ln()
    }
}

/// Probability that a block of `l` bits carries more than `t` errors when each
/// bit fails independently with the average bit error probability.
///
/// Binomial terms are generated in log space with the ratio recurrence
/// `term(i+1) = term(i) * (l-i)/(i+1) * p/(1-p)`. Below the mean the lower
/// tail is summed and complemented with `expm1`; at or above it the upper
/// tail is summed directly so that small losses keep full relative precision.
pub fn channel_loss(ch: &ChannelModel) -> ChannelLoss {
    let p = average_bit_error(ch);
    let (t, l) = (ch.t, ch.l);
    if p == 0.0 || t >= l {
        return ChannelLoss(0.0);
    }
    if p == 1.0 {
        return ChannelLoss(1.0);
    }

    let log_odds = p.ln() - (-p).ln_1p();
    let step = |log_term: f64, i: u64| log_term + ((l - i) as f64 / (i + 1) as f64).ln() + log_odds;
    let mut log_term = l as f64 * (-p).ln_1p();

    let loss = if (t as f64) < l as f64 * p {
        let mut cdf = LogSum::new();
        for i in 0..=t {
            cdf.add(log_term);
            if i < t {
                log_term = step(log_term, i);
            }
        }
        -cdf.ln().exp_m1()
    } else {
        for i in 0..=t {
            log_term = step(log_term, i);
        }
        // terms decrease monotonically past the mode, so stop once they are
        // negligible relative to the running total
        let mut tail = LogSum::new();
        let mut i = t + 1;
        loop {
            tail.add(log_term);
            if i == l || log_term < tail.ln() - 40.0 {
                break;
            }
            log_term = step(log_term, i);
            i += 1;
        }
        tail.ln().exp()
    };
    ChannelLoss(loss.clamp(0.0, 1.0))
}

/// Whether one simulated block of `l` bits has more than `t` bit errors.
///
/// Bits fail independently with probability `p`, so the gap to the next
/// failed bit is geometric: `floor(ln V / ln(1 - p))` for `V` uniform on
/// `(0, 1]`. Walking the gaps costs one draw per error and stops as soon as
/// the block is known to be lost.
fn block_lost<R: Rng>(rng: &mut R, l: u64, t: u64, log_q: f64) -> bool {
    let mut next = 0u64;
    let mut errors = 0u64;
    loop {
        let v = 1.0 - rng.random::<f64>();
        let gap = (v.ln() / log_q).floor();
        if gap >= (l - next) as f64 {
            return false;
        }
        next += gap as u64 + 1;
        errors += 1;
        if errors > t {
            return true;
        }
        if next == l {
            return false;
        }
    }
}

/// Fraction of `trials` simulated blocks whose error count exceeds `t`.
///
/// Each block is simulated bit by bit (via geometric gaps between errors).
/// Trials are split into fixed-size partitions, each seeded from `seed` and
/// its partition index, so the result is reproducible regardless of thread
/// scheduling.
pub fn simulate_block_errors(ch: &ChannelModel, trials: u64, seed: u64) -> Result<ChannelLoss> {
    ch.validate()?;
    if trials == 0 {
        return Err(Error::Invalid("Monte Carlo needs at least one trial".into()));
    }
    let p = average_bit_error(ch);
    if p == 0.0 || ch.t >= ch.l {
        return Ok(ChannelLoss(0.0));
    }
    if p == 1.0 {
        return Ok(ChannelLoss(1.0));
    }
    let log_q = (-p).ln_1p();

    let partitions = trials.div_ceil(TRIALS_PER_PARTITION);
    let failures: u64 = (0..partitions)
        .into_par_iter()
        .map(|k| {
            let n = TRIALS_PER_PARTITION.min(trials - k * TRIALS_PER_PARTITION);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            (0..n).filter(|_| block_lost(&mut rng, ch.l, ch.t, log_q)).count() as u64
        })
        .sum();
    Ok(ChannelLoss(failures as f64 / trials as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn ch(p_b: f64, p_f: f64, t: u64, l: u64) -> ChannelModel {
        ChannelModel::new(p_b, p_f, t, l).unwrap()
    }

    fn loss(p_b: f64, p_f: f64, t: u64, l: u64) -> f64 {
        channel_loss(&ch(p_b, p_f, t, l)).value()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    /// Direct summation with binomial coefficients built multiplicatively;
    /// only usable for small `l`.
    fn naive_loss(p: f64, t: u64, l: u64) -> f64 {
        let mut cdf = 0.0;
        for i in 0..=t {
            let mut coeff = 1.0;
            for k in 0..i {
                coeff *= (l - k) as f64 / (k + 1) as f64;
            }
            cdf += coeff * p.powi(i as i32) * (1.0 - p).powi((l - i) as i32);
        }
        1.0 - cdf
    }

    #[test]
    fn average_bit_error_examples() {
        assert_eq!(average_bit_error(&ch(0.001, 0.0, 0, 10)), 0.001);
        assert_eq!(average_bit_error(&ch(0.37, 1.0, 0, 10)), 0.5);
        assert!((average_bit_error(&ch(0.001, 0.01, 0, 10)) - 0.00599).abs() < 1e-15);
    }

    #[test]
    fn error_free_and_fully_correctable() {
        assert_eq!(loss(0.0, 0.0, 0, 12000), 0.0);
        assert_eq!(loss(0.3, 0.2, 50, 50), 0.0);
        assert_eq!(loss(1.0, 0.0, 3, 4), 1.0);
    }

    // Reference values below were evaluated with mpmath at 60 digits.
    #[test]
    fn matches_arbitrary_precision_reference() {
        let cases = [
            ((0.001, 0.0, 0, 12000), 0.999_993_892_566_993_9),
            ((0.001, 0.0, 30, 12000), 3.322_450_088_809_222e-6),
            ((0.001, 0.0, 12, 12000), 0.424_034_741_886_736_04),
            ((0.001, 0.01, 5, 1000), 0.553_191_430_924_756_7),
            ((0.001, 0.0, 100, 100_000), 0.473_437_798_144_926_9),
            ((0.001, 0.0, 150, 100_000), 1.216_905_038_976_477e-6),
        ];
        for ((p_b, p_f, t, l), expected) in cases {
            let got = loss(p_b, p_f, t, l);
            assert!(
                rel_err(got, expected) < 1e-9,
                "L({p_b}, {p_f}, {t}, {l}) = {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn t_zero_closed_form() {
        for (p, l) in [(0.001f64, 12000u64), (0.2, 7), (1e-7, 100_000), (0.5, 64)] {
            let expected = 1.0 - (1.0 - p).powi(l as i32);
            assert!(rel_err(loss(p, 0.0, 0, l), expected) < 1e-9);
        }
    }

    #[test]
    fn agrees_with_naive_sum_on_small_blocks() {
        for l in [1u64, 2, 5, 17, 40] {
            for t in 0..=l {
                for p in [0.01, 0.1, 0.3, 0.5, 0.9] {
                    let (a, b) = (loss(p, 0.0, t, l), naive_loss(p, t, l));
                    assert!((a - b).abs() < 1e-12, "l={l} t={t} p={p}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn monte_carlo_degenerate_channels() {
        assert_eq!(simulate_block_errors(&ch(0.0, 0.0, 0, 100), 1000, 1).unwrap().value(), 0.0);
        assert_eq!(simulate_block_errors(&ch(1.0, 0.0, 99, 100), 1000, 1).unwrap().value(), 1.0);
        assert!(simulate_block_errors(&ch(0.1, 0.0, 0, 100), 0, 1).is_err());
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let c = ch(0.01, 0.05, 2, 200);
        let a = simulate_block_errors(&c, 50_000, 42).unwrap();
        let b = simulate_block_errors(&c, 50_000, 42).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| simulate_block_errors(&c, 50_000, 42).unwrap());
        assert_eq!(a, single);
    }

    #[test]
    fn monte_carlo_large_block() {
        let c = ch(0.001, 0.0, 0, 12000);
        let analytic = channel_loss(&c).value();
        let trials = 1_000_000u64;
        let mc = simulate_block_errors(&c, trials, 7).unwrap().value();
        let sigma = (analytic * (1.0 - analytic) / trials as f64).sqrt();
        assert!((mc - analytic).abs() <= 3.0 * sigma.max(1.0 / trials as f64));
    }

    #[test]
    fn monte_carlo_deep_tail() {
        // analytic value is about 3.3e-6, so only a handful of blocks are lost
        let c = ch(0.001, 0.0, 30, 12000);
        let analytic = channel_loss(&c).value();
        let trials = 2_000_000u64;
        let mc = simulate_block_errors(&c, trials, 11).unwrap().value();
        let sigma = (analytic * (1.0 - analytic) / trials as f64).sqrt();
        assert!((mc - analytic).abs() <= 4.0 * sigma, "mc {mc} vs {analytic}");
    }

    /// Plain per-bit Bernoulli draws, independent of the gap sampler.
    #[test]
    fn bit_flip_simulation_agrees() {
        let c = ch(0.02, 0.1, 2, 60);
        let p = average_bit_error(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 100_000;
        let lost = (0..trials)
            .filter(|_| (0..c.l).filter(|_| rng.random::<f64>() < p).count() as u64 > c.t)
            .count();
        let empirical = lost as f64 / trials as f64;
        let analytic = channel_loss(&c).value();
        let sigma = (analytic * (1.0 - analytic) / trials as f64).sqrt();
        assert!((empirical - analytic).abs() <= 4.0 * sigma);
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(ChannelModel::new(1.1, 0.0, 0, 10).is_err());
        assert!(ChannelModel::new(0.1, -0.1, 0, 10).is_err());
        assert!(ChannelModel::new(0.1, 0.0, 11, 10).is_err());
        assert!(ChannelModel::new(0.1, 0.0, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn monotonicity(
            p in 0.0f64..0.6,
            dp in 0.0f64..0.3,
            l in 1u64..3000,
            t_frac in 0.0f64..1.0,
        ) {
            let t = ((l as f64) * t_frac * 0.5) as u64;
            let base = loss(p, 0.0, t, l);
            prop_assert!((0.0..=1.0).contains(&base));
            // more correction never hurts
            if t < l {
                prop_assert!(loss(p, 0.0, t + 1, l) <= base + 1e-12);
            }
            // a noisier channel never helps
            prop_assert!(loss((p + dp).min(1.0), 0.0, t, l) >= base - 1e-12);
            // longer blocks never help
            prop_assert!(loss(p, 0.0, t, l + 1) >= base - 1e-12);
        }
    }
}
