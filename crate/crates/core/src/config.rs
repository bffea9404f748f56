//! Run configuration and candidate manifest files.
//!
//! Both are JSON. Relative paths inside a file are resolved against the
//! directory containing that file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::energy::LinkParams;
use crate::eosl::{EoslWeights, RetransmitPolicy};
use crate::error::{Error, Result};
use crate::similarity::SsimParams;

/// The intended meaning candidates are compared against.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSemantics {
    pub text: Option<String>,
    pub image: Option<PathBuf>,
    pub vector: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Cosine,
    Ssim,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyOptions {
    /// Seconds between power samples.
    pub interval_s: f64,
    /// Leave GPU power out of the semantic energy.
    pub cpu_only: bool,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self {
            interval_s: 1.0,
            cpu_only: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub reference: ReferenceSemantics,
    pub channel: ChannelModel,
    pub link: LinkParams,
    pub weights: EoslWeights,
    pub policy: RetransmitPolicy,
    pub metric: Metric,
    pub ssim: SsimParams,
    pub energy: EnergyOptions,
    /// When non-zero, the report also carries a seeded Monte Carlo estimate
    /// of the channel loss.
    pub monte_carlo_trials: u64,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| Error::parse(path, e))
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: RunConfig = read_json(path)?;
        let base = base_dir(path);
        for p in [&mut cfg.reference.image, &mut cfg.reference.vector].into_iter().flatten() {
            resolve(&base, p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.link.validate()?;
        self.weights.validate()?;
        self.policy.validate()?;
        self.ssim.validate()?;
        if !(self.energy.interval_s > 0.0 && self.energy.interval_s.is_finite()) {
            return Err(Error::Invalid(format!(
                "energy.interval_s must be positive, got {}",
                self.energy.interval_s
            )));
        }
        for p in [&self.reference.image, &self.reference.vector].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "reference file not found"),
                ));
            }
        }
        Ok(())
    }
}

/// One candidate model's recorded artifacts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateBundle {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_vector_path: Option<PathBuf>,
    /// Grayscale PGM output (for SSIM).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<PathBuf>,
    pub power_trace_path: PathBuf,
    /// Extra decoder-side trace whose energy is added to the semantic energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder_power_trace_path: Option<PathBuf>,
    /// Replaces the similarity computation entirely.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precomputed_noise: Option<f64>,
    /// Per-attempt noise, used with the `trace_sequence` noise source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sequence: Option<Vec<f64>>,
    /// Overrides the transmitted message length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_bits: Option<u64>,
}

impl CandidateBundle {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::Precondition {
                candidate: self.name.clone(),
                reason: reason.into(),
            })
        };
        if self.name.is_empty() {
            return fail("candidate name is empty");
        }
        if self.caption.is_none()
            && self.feature_vector_path.is_none()
            && self.image_path.is_none()
            && self.precomputed_noise.is_none()
            && self.noise_sequence.is_none()
        {
            return fail("needs a caption, feature vector, image, or precomputed noise");
        }
        if let Some(n) = self.precomputed_noise {
            if !(0.0..=1.0).contains(&n) {
                return fail("precomputed_noise must be in [0, 1]");
            }
        }
        if let Some(seq) = &self.noise_sequence {
            if seq.is_empty() || seq.iter().any(|n| !(0.0..=1.0).contains(n)) {
                return fail("noise_sequence must be non-empty with values in [0, 1]");
            }
        }
        if self.message_bits == Some(0) {
            return fail("message_bits must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub candidates: Vec<CandidateBundle>,
}

impl BundleManifest {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut manifest: BundleManifest = read_json(path)?;
        let base = base_dir(path);
        for c in &mut manifest.candidates {
            resolve(&base, &mut c.power_trace_path);
            for p in [
                &mut c.feature_vector_path,
                &mut c.image_path,
                &mut c.decoder_power_trace_path,
            ]
            .into_iter()
            .flatten()
            {
                resolve(&base, p);
            }
        }
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_reference_experiment() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.channel.p_b, 0.001);
        assert_eq!(cfg.channel.l, 12_000);
        assert_eq!(cfg.link.data_rate, 143e6);
        assert_eq!(cfg.weights, EoslWeights::uniform(1.0));
        assert_eq!(cfg.policy.n_sm_thresh, 0.3);
        assert_eq!(cfg.policy.max_attempts, 1);
        assert_eq!(cfg.metric, Metric::Cosine);
        cfg.validate().unwrap();
    }

    #[test]
    fn parses_nested_options() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "channel": {"p_b": 0.01, "p_f": 0.1, "t": 3, "l": 800},
                "weights": {"lambda_lch": 0},
                "policy": {"noise_source": "trace_sequence", "max_attempts": 4},
                "metric": "ssim",
                "ssim": {"window": "global"}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.channel, ChannelModel::new(0.01, 0.1, 3, 800).unwrap());
        assert_eq!(cfg.weights.lambda_lch, 0.0);
        assert_eq!(cfg.weights.lambda_sm, 1.0);
        assert_eq!(cfg.policy.max_attempts, 4);
        assert_eq!(cfg.ssim, SsimParams::global());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"lambda": 1}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"channel": {"p_b": 2.0}}"#).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn manifest_paths_resolve_against_manifest_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bundles.json");
        std::fs::write(
            &path,
            r#"{"candidates": [{"name": "a", "precomputed_noise": 0.2, "power_trace_path": "traces/a.csv"}]}"#,
        )
        .unwrap();
        let m = BundleManifest::from_file(&path).unwrap();
        assert_eq!(m.candidates[0].power_trace_path, dir.path().join("traces/a.csv"));
    }

    #[test]
    fn bundle_preconditions() {
        let mut b = CandidateBundle {
            name: "x".into(),
            power_trace_path: "t.csv".into(),
            ..Default::default()
        };
        assert!(b.validate().is_err());
        b.precomputed_noise = Some(1.5);
        assert!(b.validate().is_err());
        b.precomputed_noise = Some(0.5);
        b.validate().unwrap();
    }
}
