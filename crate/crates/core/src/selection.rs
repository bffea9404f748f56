//! Candidate scoring, ranking, bit-error sweeps and encoder/decoder
//! comparisons, plus report rendering.
//!
//! Candidates are ingested once into [`PreparedCandidate`]s; ranking and each
//! sweep point then only recompute the channel term. Scoring runs in
//! parallel but every output keeps the manifest order, and rankings are
//! sorted by EOSL with a name tie-break, so reports never depend on
//! scheduling.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{self, ChannelModel, PRNG_ID};
use crate::config::{CandidateBundle, Metric, RunConfig};
use crate::energy::{self, PowerTrace};
use crate::eosl::{score_candidate, CandidateNoise, CandidateTerms, EoslScore, EoslWeights, NoiseSource};
use crate::error::{Error, Result};
use crate::similarity::{self, read_pgm, FeatureVector, SimilarityScore};

/// A candidate after file ingestion and similarity scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCandidate {
    pub name: String,
    pub similarity: Option<f64>,
    pub noise: CandidateNoise,
    pub cpu_energy_j: f64,
    pub gpu_energy_j: f64,
    pub semantic_energy_j: f64,
    pub cpu_utilization_total: Option<f64>,
    pub message_bits: u64,
    pub packets: u64,
    pub communication_energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateRow {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    /// Noise of the first attempt.
    pub semantic_noise: f64,
    pub channel_loss: f64,
    pub message_bits: u64,
    pub packets: u64,
    pub cpu_energy_j: f64,
    pub gpu_energy_j: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpu_utilization_total: Option<f64>,
    pub semantic_energy_j: f64,
    pub communication_energy_j: f64,
    pub sem_ratio: f64,
    pub comm_ratio: f64,
    pub eosl: f64,
    pub attempts: usize,
    pub threshold_met: bool,
    pub per_attempt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSummary {
    pub average_bit_error: f64,
    pub channel_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub trials: u64,
    pub channel_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EoslReport {
    pub config: RunConfig,
    pub seed: u64,
    pub prng: &'static str,
    pub channel: ChannelSummary,
    pub e_s_max_j: f64,
    pub e_c_max_j: f64,
    pub candidates: Vec<CandidateRow>,
    pub ranking: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint<'a> {
    pub p_b: f64,
    pub candidate: &'a str,
    pub eosl: f64,
}

fn trace_energy(path: &std::path::Path, cfg: &RunConfig) -> Result<(energy::TraceEnergy, Option<f64>)> {
    let trace = PowerTrace::from_csv_file(path, cfg.energy.interval_s)?;
    Ok((energy::integrate_trace(&trace), trace.total_cpu_utilization()))
}

/// Similarity of a bundle's output to the reference under `metric`.
fn measure_similarity(
    bundle: &CandidateBundle,
    cfg: &RunConfig,
    metric: Metric,
    reference_vector: Option<&FeatureVector>,
) -> Result<SimilarityScore> {
    let missing = |what: &str| Error::Precondition {
        candidate: bundle.name.clone(),
        reason: format!("{what} required for the {metric:?} metric"),
    };
    match metric {
        Metric::Cosine => {
            if let (Some(path), Some(reference)) = (&bundle.feature_vector_path, reference_vector) {
                let v = FeatureVector::from_json_file(path)?;
                return similarity::cosine_similarity(&v, reference);
            }
            match (&bundle.caption, &cfg.reference.text) {
                (Some(caption), Some(reference)) => similarity::text_cosine(caption, reference),
                (None, _) => Err(missing("a caption or feature vector")),
                (_, None) => Err(missing("reference.text in the run config")),
            }
        }
        Metric::Ssim => {
            let path = bundle.image_path.as_ref().ok_or_else(|| missing("image_path"))?;
            let reference = cfg
                .reference
                .image
                .as_ref()
                .ok_or_else(|| missing("reference.image in the run config"))?;
            let x = read_pgm(reference)?;
            let y = read_pgm(path)?;
            similarity::ssim(&x, &y, &cfg.ssim)
        }
    }
}

fn load_reference_vector(cfg: &RunConfig) -> Result<Option<FeatureVector>> {
    cfg.reference.vector.as_ref().map(FeatureVector::from_json_file).transpose()
}

/// Raw energies of one bundle.
#[derive(Debug, Clone, Copy)]
struct MeasuredEnergy {
    cpu_j: f64,
    gpu_j: f64,
    semantic_j: f64,
    cpu_utilization_total: Option<f64>,
    message_bits: u64,
    packets: u64,
    communication_j: f64,
}

fn measure_energy(bundle: &CandidateBundle, cfg: &RunConfig) -> Result<MeasuredEnergy> {
    let (energy, utilization) = trace_energy(&bundle.power_trace_path, cfg)?;
    let (mut cpu, mut gpu) = (energy.cpu_j, energy.gpu_j);
    if let Some(path) = &bundle.decoder_power_trace_path {
        let (dec, _) = trace_energy(path, cfg)?;
        cpu += dec.cpu_j;
        gpu += dec.gpu_j;
    }
    let message_bits = bundle
        .message_bits
        .or_else(|| bundle.caption.as_deref().filter(|c| !c.is_empty()).map(energy::caption_bits))
        .unwrap_or_else(|| cfg.link.packet_bits());
    let comm = energy::communication_energy(message_bits, &cfg.link, 1)?;
    Ok(MeasuredEnergy {
        cpu_j: cpu,
        gpu_j: gpu,
        semantic_j: if cfg.energy.cpu_only { cpu } else { cpu + gpu },
        cpu_utilization_total: utilization,
        message_bits,
        packets: comm.packets,
        communication_j: comm.joules,
    })
}

fn prepare_one(
    bundle: &CandidateBundle,
    cfg: &RunConfig,
    reference_vector: Option<&FeatureVector>,
) -> Result<PreparedCandidate> {
    bundle.validate()?;
    let e = measure_energy(bundle, cfg)?;

    let (similarity, noise) = match cfg.policy.noise_source {
        NoiseSource::TraceSequence => {
            let seq = bundle.noise_sequence.clone().ok_or_else(|| Error::Precondition {
                candidate: bundle.name.clone(),
                reason: "noise_sequence required by the trace_sequence noise source".into(),
            })?;
            (None, CandidateNoise::Sequence(seq))
        }
        NoiseSource::FixedPerCandidate => match bundle.precomputed_noise {
            Some(n) => (None, CandidateNoise::Fixed(n)),
            None => {
                let score = measure_similarity(bundle, cfg, cfg.metric, reference_vector)?;
                (
                    Some(score.value()),
                    CandidateNoise::Fixed(similarity::semantic_noise(score).value()),
                )
            }
        },
    };

    Ok(PreparedCandidate {
        name: bundle.name.clone(),
        similarity,
        noise,
        cpu_energy_j: e.cpu_j,
        gpu_energy_j: e.gpu_j,
        semantic_energy_j: e.semantic_j,
        cpu_utilization_total: e.cpu_utilization_total,
        message_bits: e.message_bits,
        packets: e.packets,
        communication_energy_j: e.communication_j,
    })
}

/// Reads every bundle's files and computes its noise and raw energies.
pub fn prepare(cfg: &RunConfig, bundles: &[CandidateBundle]) -> Result<Vec<PreparedCandidate>> {
    cfg.validate()?;
    if bundles.is_empty() {
        return Err(Error::Invalid("at least one candidate bundle is required".into()));
    }
    check_unique_names(bundles)?;
    let reference_vector = load_reference_vector(cfg)?;
    bundles
        .par_iter()
        .map(|b| prepare_one(b, cfg, reference_vector.as_ref()))
        .collect()
}

fn check_unique_names(bundles: &[CandidateBundle]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    match bundles.iter().find(|b| !seen.insert(b.name.as_str())) {
        Some(dup) => Err(Error::Invalid(format!("candidate name `{}` appears twice", dup.name))),
        None => Ok(()),
    }
}

fn energy_maxima(prepared: &[PreparedCandidate]) -> (f64, f64) {
    let max = |f: fn(&PreparedCandidate) -> f64| prepared.iter().map(f).fold(0.0, f64::max);
    (max(|c| c.semantic_energy_j), max(|c| c.communication_energy_j))
}

fn ratios(prepared: &[PreparedCandidate]) -> Result<(Vec<f64>, Vec<f64>)> {
    let sem: Vec<f64> = prepared.iter().map(|c| c.semantic_energy_j).collect();
    let comm: Vec<f64> = prepared.iter().map(|c| c.communication_energy_j).collect();
    Ok((energy::normalize(&sem)?, energy::normalize(&comm)?))
}

fn first_noise(noise: &CandidateNoise) -> f64 {
    match noise {
        CandidateNoise::Fixed(n) => *n,
        CandidateNoise::Sequence(seq) => seq[0],
    }
}

fn score_rows(
    prepared: &[PreparedCandidate],
    cfg: &RunConfig,
    weights: &EoslWeights,
    channel_loss: f64,
) -> Result<Vec<CandidateRow>> {
    let (sem, comm) = ratios(prepared)?;
    prepared
        .par_iter()
        .zip(sem.par_iter().zip(comm.par_iter()))
        .map(|(c, (&sem_ratio, &comm_ratio))| {
            let terms = CandidateTerms {
                channel_loss,
                comm_ratio,
                sem_ratio,
            };
            let EoslScore {
                value,
                attempts,
                threshold_met,
                per_attempt,
            } = score_candidate(&c.noise, terms, &cfg.policy, weights)?;
            Ok(CandidateRow {
                name: c.name.clone(),
                similarity: c.similarity,
                semantic_noise: first_noise(&c.noise),
                channel_loss,
                message_bits: c.message_bits,
                packets: c.packets,
                cpu_energy_j: c.cpu_energy_j,
                gpu_energy_j: c.gpu_energy_j,
                cpu_utilization_total: c.cpu_utilization_total,
                semantic_energy_j: c.semantic_energy_j,
                communication_energy_j: c.communication_energy_j,
                sem_ratio,
                comm_ratio,
                eosl: value,
                attempts,
                threshold_met,
                per_attempt,
            })
        })
        .collect()
}

/// Names sorted by ascending score, ties broken by name.
pub fn ranking_by<'a>(items: impl IntoIterator<Item = (&'a str, f64)>) -> Vec<String> {
    let mut v: Vec<(&str, f64)> = items.into_iter().collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().map(|(n, _)| n.to_owned()).collect()
}

fn channel_summary(ch: &ChannelModel, trials: u64, seed: u64) -> Result<ChannelSummary> {
    let monte_carlo = if trials > 0 {
        Some(MonteCarloSummary {
            trials,
            channel_loss: channel::simulate_block_errors(ch, trials, seed)?.value(),
        })
    } else {
        None
    };
    Ok(ChannelSummary {
        average_bit_error: channel::average_bit_error(ch),
        channel_loss: channel::channel_loss(ch).value(),
        monte_carlo,
    })
}

/// Scores already-prepared candidates under `cfg`.
pub fn rank_prepared(cfg: &RunConfig, prepared: &[PreparedCandidate], seed: u64) -> Result<EoslReport> {
    let channel = channel_summary(&cfg.channel, cfg.monte_carlo_trials, seed)?;
    let rows = score_rows(prepared, cfg, &cfg.weights, channel.channel_loss)?;
    let ranking = ranking_by(rows.iter().map(|r| (r.name.as_str(), r.eosl)));
    let (e_s_max_j, e_c_max_j) = energy_maxima(prepared);
    Ok(EoslReport {
        config: cfg.clone(),
        seed,
        prng: PRNG_ID,
        channel,
        e_s_max_j,
        e_c_max_j,
        candidates: rows,
        ranking,
    })
}

/// Computes noise, channel loss, energies and EOSL for each candidate and
/// ranks them by ascending EOSL.
pub fn rank(cfg: &RunConfig, bundles: &[CandidateBundle], seed: u64) -> Result<EoslReport> {
    let prepared = prepare(cfg, bundles)?;
    rank_prepared(cfg, &prepared, seed)
}

/// Parses `start:stop:steps` (inclusive, evenly spaced) or a comma-separated
/// list of values.
pub fn parse_grid(input: &str) -> Result<Vec<f64>> {
    let bad = || Error::Invalid(format!("invalid grid `{input}`; use start:stop:steps or v1,v2,..."));
    let grid = if input.contains(':') {
        let parts: Vec<&str> = input.split(':').collect();
        let [start, stop, steps] = parts.as_slice() else {
            return Err(bad());
        };
        let start: f64 = start.trim().parse().map_err(|_| bad())?;
        let stop: f64 = stop.trim().parse().map_err(|_| bad())?;
        let steps: usize = steps.trim().parse().map_err(|_| bad())?;
        match steps {
            0 => return Err(bad()),
            1 => vec![start],
            n => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        stop
                    } else {
                        start + (stop - start) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    } else {
        input.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?
    };
    validate_grid(&grid)?;
    Ok(grid)
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Invalid("bit error grid is empty".into()));
    }
    if let Some(p) = grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Invalid(format!("grid value {p} outside [0, 1]")));
    }
    Ok(())
}

/// EOSL of every prepared candidate at every bit error probability in `grid`.
/// Only the channel term changes between grid points.
pub fn sweep_prepared<'a>(
    cfg: &RunConfig,
    prepared: &'a [PreparedCandidate],
    grid: &[f64],
) -> Result<Vec<SweepPoint<'a>>> {
    validate_grid(grid)?;
    let per_point = grid
        .par_iter()
        .map(|&p_b| {
            let ch = cfg.channel.with_p_b(p_b)?;
            let rows = score_rows(prepared, cfg, &cfg.weights, channel::channel_loss(&ch).value())?;
            Ok(prepared
                .iter()
                .zip(rows)
                .map(|(c, r)| SweepPoint {
                    p_b,
                    candidate: c.name.as_str(),
                    eosl: r.eosl,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

pub fn render_sweep_csv(points: &[SweepPoint<'_>]) -> String {
    let mut out = String::from("p_b,candidate,eosl\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.p_b, csv_field(p.candidate), p.eosl);
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn render_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report types serialize infallibly");
    s.push('\n');
    s
}

pub fn render_text(report: &EoslReport) -> String {
    let mut out = String::new();
    let ch = &report.channel;
    let _ = writeln!(
        out,
        "channel: p_b={} p_f={} t={} l={}  avg bit error={:.6e}  L_ch={:.9}",
        report.config.channel.p_b,
        report.config.channel.p_f,
        report.config.channel.t,
        report.config.channel.l,
        ch.average_bit_error,
        ch.channel_loss
    );
    if let Some(mc) = &ch.monte_carlo {
        let _ = writeln!(
            out,
            "monte carlo: {} trials, seed {} ({}) -> L_ch={:.9}",
            mc.trials, report.seed, report.prng, mc.channel_loss
        );
    }
    let _ = writeln!(out, "E_s,max={:.6} J  E_c,max={:.6e} J", report.e_s_max_j, report.e_c_max_j);
    let width = report.candidates.iter().map(|r| r.name.len()).max().unwrap_or(0).max(9);
    let _ = writeln!(
        out,
        "{:>4}  {:<width$}  {:>8}  {:>11}  {:>12}  {:>11}  {:>8}  {:>8}  {:>9}  {:>3}  met",
        "rank", "candidate", "N_sm", "L_ch", "E_s [J]", "E_c [J]", "E_s/max", "E_c/max", "EOSL", "n"
    );
    for (i, name) in report.ranking.iter().enumerate() {
        let r = report
            .candidates
            .iter()
            .find(|r| &r.name == name)
            .expect("ranking is a permutation of candidates");
        let _ = writeln!(
            out,
            "{:>4}  {:<width$}  {:>8.4}  {:>11.9}  {:>12.3}  {:>11.4e}  {:>8.5}  {:>8.5}  {:>9.5}  {:>3}  {}",
            i + 1,
            r.name,
            r.semantic_noise,
            r.channel_loss,
            r.semantic_energy_j,
            r.communication_energy_j,
            r.sem_ratio,
            r.comm_ratio,
            r.eosl,
            r.attempts,
            if r.threshold_met { "yes" } else { "no" }
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncDecRow {
    pub name: String,
    pub cosine_similarity: f64,
    pub ssim: f64,
    pub noise_cosine: f64,
    pub noise_ssim: f64,
    pub semantic_energy_j: f64,
    pub communication_energy_j: f64,
    pub sem_ratio: f64,
    pub comm_ratio: f64,
    pub channel_loss: f64,
    pub eosl_cosine: f64,
    pub eosl_ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncDecReport {
    pub config: RunConfig,
    pub seed: u64,
    pub prng: &'static str,
    pub channel: ChannelSummary,
    pub candidates: Vec<EncDecRow>,
    pub ranking_cosine: Vec<String>,
    pub ranking_ssim: Vec<String>,
}

/// Measured inputs for one encoder/decoder pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EncDecMeasurement {
    pub name: String,
    pub cosine: SimilarityScore,
    pub ssim: SimilarityScore,
    pub semantic_energy_j: f64,
    pub communication_energy_j: f64,
}

/// Scores encoder/decoder pairs twice: once with caption cosine noise and once
/// with SSIM noise on the reconstructed image.
pub fn encdec_from_measurements(
    cfg: &RunConfig,
    measured: &[EncDecMeasurement],
    seed: u64,
) -> Result<EncDecReport> {
    cfg.validate()?;
    if cfg.policy.noise_source != NoiseSource::FixedPerCandidate {
        return Err(Error::Invalid(
            "encoder/decoder comparison needs the fixed_per_candidate noise source".into(),
        ));
    }
    if measured.is_empty() {
        return Err(Error::Invalid("at least one candidate bundle is required".into()));
    }
    let channel = channel_summary(&cfg.channel, cfg.monte_carlo_trials, seed)?;
    let sem = energy::normalize(&measured.iter().map(|m| m.semantic_energy_j).collect::<Vec<_>>())?;
    let comm = energy::normalize(&measured.iter().map(|m| m.communication_energy_j).collect::<Vec<_>>())?;

    let mut rows = Vec::with_capacity(measured.len());
    for ((m, &sem_ratio), &comm_ratio) in measured.iter().zip(&sem).zip(&comm) {
        let terms = CandidateTerms {
            channel_loss: channel.channel_loss,
            comm_ratio,
            sem_ratio,
        };
        let noise_cosine = similarity::semantic_noise(m.cosine).value();
        let noise_ssim = similarity::semantic_noise(m.ssim).value();
        let score = |n: f64| -> Result<f64> {
            Ok(score_candidate(&CandidateNoise::Fixed(n), terms, &cfg.policy, &cfg.weights)?.value)
        };
        rows.push(EncDecRow {
            name: m.name.clone(),
            cosine_similarity: m.cosine.value(),
            ssim: m.ssim.value(),
            noise_cosine,
            noise_ssim,
            semantic_energy_j: m.semantic_energy_j,
            communication_energy_j: m.communication_energy_j,
            sem_ratio,
            comm_ratio,
            channel_loss: channel.channel_loss,
            eosl_cosine: score(noise_cosine)?,
            eosl_ssim: score(noise_ssim)?,
        });
    }
    Ok(EncDecReport {
        ranking_cosine: ranking_by(rows.iter().map(|r| (r.name.as_str(), r.eosl_cosine))),
        ranking_ssim: ranking_by(rows.iter().map(|r| (r.name.as_str(), r.eosl_ssim))),
        config: cfg.clone(),
        seed,
        prng: PRNG_ID,
        channel,
        candidates: rows,
    })
}

/// Reads each bundle's caption and reconstructed image, scores both against
/// the reference semantics and produces a two-column EOSL report.
pub fn encdec_compare(cfg: &RunConfig, bundles: &[CandidateBundle], seed: u64) -> Result<EncDecReport> {
    cfg.validate()?;
    check_unique_names(bundles)?;
    let reference_vector = load_reference_vector(cfg)?;
    let measured = bundles
        .par_iter()
        .map(|b| {
            let fail = |reason: &str| Error::Precondition {
                candidate: b.name.clone(),
                reason: reason.into(),
            };
            if b.caption.is_none() {
                return Err(fail("encoder/decoder comparison needs a caption"));
            }
            if b.image_path.is_none() {
                return Err(fail("encoder/decoder comparison needs a reconstructed image"));
            }
            b.validate()?;
            let energy = measure_energy(b, cfg)?;
            let ssim = measure_similarity(b, cfg, Metric::Ssim, None)?;
            let cosine = measure_similarity(b, cfg, Metric::Cosine, reference_vector.as_ref())?;
            Ok(EncDecMeasurement {
                name: b.name.clone(),
                cosine,
                ssim,
                semantic_energy_j: energy.semantic_j,
                communication_energy_j: energy.communication_j,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    encdec_from_measurements(cfg, &measured, seed)
}

pub fn render_encdec_text(report: &EncDecReport) -> String {
    let mut out = String::new();
    let width = report.candidates.iter().map(|r| r.name.len()).max().unwrap_or(0).max(9);
    let _ = writeln!(
        out,
        "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>12}  {:>11}  {:>9}  {:>9}",
        "candidate", "cosine", "SSIM", "N_cos", "N_ssim", "E_s [J]", "E_c [J]", "EOSL_cos", "EOSL_ssim"
    );
    for r in &report.candidates {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>12.3}  {:>11.4e}  {:>9.5}  {:>9.5}",
            r.name,
            r.cosine_similarity,
            r.ssim,
            r.noise_cosine,
            r.noise_ssim,
            r.semantic_energy_j,
            r.communication_energy_j,
            r.eosl_cosine,
            r.eosl_ssim
        );
    }
    let _ = writeln!(out, "ranking (cosine): {}", report.ranking_cosine.join(" < "));
    let _ = writeln!(out, "ranking (SSIM):   {}", report.ranking_ssim.join(" < "));
    out
}
