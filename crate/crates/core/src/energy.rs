//! Power traces, energy integration, link transmit energy and per-set
//! normalization.
//!
//! Trace files are CSV with header `t_s,cpu_mw,gpu_mw` and an optional
//! fourth column `cpu_util_pct`. Power columns are milliwatts and are
//! converted to watts on ingestion.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSample {
    pub timestamp_s: f64,
    pub cpu_w: f64,
    pub gpu_w: f64,
    pub cpu_util_pct: Option<f64>,
}

/// Power samples at a fixed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    samples: Vec<PowerSample>,
    interval_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEnergy {
    pub cpu_j: f64,
    pub gpu_j: f64,
    pub total_j: f64,
}

impl PowerTrace {
    pub fn new(samples: Vec<PowerSample>, interval_s: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if !(interval_s > 0.0 && interval_s.is_finite()) {
            return Err(Error::MalformedTrace(format!(
                "sample interval must be positive, got {interval_s}"
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.timestamp_s.is_finite() {
                return Err(Error::MalformedTrace(format!("sample {i}: non-finite timestamp")));
            }
            for (what, w) in [("cpu", s.cpu_w), ("gpu", s.gpu_w)] {
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::MalformedTrace(format!(
                        "sample {i}: {what} power {w} is negative or not finite"
                    )));
                }
            }
        }
        if let Some(i) = samples
            .windows(2)
            .position(|w| w[1].timestamp_s <= w[0].timestamp_s)
        {
            return Err(Error::MalformedTrace(format!(
                "timestamps not strictly increasing at sample {}",
                i + 1
            )));
        }
        Ok(Self {
            samples,
            interval_s,
        })
    }

    /// Builds a trace from `(cpu_w, gpu_w)` pairs at `t = 0, Δt, 2Δt, ...`.
    pub fn from_watts(powers: &[(f64, f64)], interval_s: f64) -> Result<Self> {
        let samples = powers
            .iter()
            .enumerate()
            .map(|(i, &(cpu_w, gpu_w))| PowerSample {
                timestamp_s: i as f64 * interval_s,
                cpu_w,
                gpu_w,
                cpu_util_pct: None,
            })
            .collect();
        Self::new(samples, interval_s)
    }

    pub fn from_csv_reader<R: Read>(reader: R, interval_s: f64) -> std::result::Result<Self, Error> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::MalformedTrace(e.to_string()))?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        let has_util = match cols.as_slice() {
            ["t_s", "cpu_mw", "gpu_mw"] => false,
            ["t_s", "cpu_mw", "gpu_mw", "cpu_util_pct"] => true,
            _ => {
                return Err(Error::MalformedTrace(format!(
                    "expected header `t_s,cpu_mw,gpu_mw[,cpu_util_pct]`, got `{}`",
                    cols.join(",")
                )))
            }
        };
        let mut samples = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::MalformedTrace(e.to_string()))?;
            let field = |c: usize| -> Result<f64> {
                record[c].parse::<f64>().map_err(|_| {
                    Error::MalformedTrace(format!(
                        "row {}: `{}` is not a number in column {}",
                        i + 1,
                        &record[c],
                        cols[c]
                    ))
                })
            };
            samples.push(PowerSample {
                timestamp_s: field(0)?,
                cpu_w: field(1)? / 1000.0,
                gpu_w: field(2)? / 1000.0,
                cpu_util_pct: if has_util { Some(field(3)?) } else { None },
            });
        }
        Self::new(samples, interval_s)
    }

    pub fn from_csv_file(path: impl AsRef<Path>, interval_s: f64) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, interval_s).map_err(|e| match e {
            Error::MalformedTrace(reason) => Error::parse(path, format!("malformed trace: {reason}")),
            Error::EmptyTrace => Error::parse(path, "power trace is empty"),
            other => other,
        })
    }

    pub fn samples(&self) -> &[PowerSample] {
        &self.samples
    }

    pub fn interval_s(&self) -> f64 {
        self.interval_s
    }

    /// Sum of the utilization column, if the trace carried one.
    pub fn total_cpu_utilization(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.cpu_util_pct).sum()
    }

    /// Appends `other` after this trace, shifting its timestamps to follow.
    pub fn concat(&self, other: &PowerTrace) -> Result<PowerTrace> {
        if self.interval_s != other.interval_s {
            return Err(Error::MalformedTrace("cannot join traces with different intervals".into()));
        }
        let last = self.samples.last().map_or(0.0, |s| s.timestamp_s);
        let first = other.samples[0].timestamp_s;
        let shift = last + self.interval_s - first;
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().map(|s| PowerSample {
            timestamp_s: s.timestamp_s + shift,
            ..*s
        }));
        PowerTrace::new(samples, self.interval_s)
    }
}

/// Energy as the sum of instantaneous power times the sample interval.
pub fn integrate_trace(trace: &PowerTrace) -> TraceEnergy {
    let dt = trace.interval_s;
    let cpu: f64 = trace.samples.iter().map(|s| s.cpu_w).sum();
    let gpu: f64 = trace.samples.iter().map(|s| s.gpu_w).sum();
    TraceEnergy {
        cpu_j: cpu * dt,
        gpu_j: gpu * dt,
        total_j: (cpu + gpu) * dt,
    }
}

/// Physical-layer parameters used to cost a transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkParams {
    /// bits per second
    pub data_rate: f64,
    /// watts
    pub tx_power: f64,
    /// bytes
    pub packet_size: u64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            data_rate: 143e6,
            tx_power: 1.0,
            packet_size: 1500,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.data_rate > 0.0 && self.data_rate.is_finite()) {
            return Err(Error::Invalid(format!("data rate must be positive, got {}", self.data_rate)));
        }
        if !(self.tx_power > 0.0 && self.tx_power.is_finite()) {
            return Err(Error::Invalid(format!("tx power must be positive, got {}", self.tx_power)));
        }
        if self.packet_size == 0 {
            return Err(Error::Invalid("packet size must be positive".into()));
        }
        Ok(())
    }

    pub fn packet_bits(&self) -> u64 {
        self.packet_size * 8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommEnergy {
    pub joules: f64,
    pub packets: u64,
}

/// Transmit time times transmit power, for every attempt.
pub fn communication_energy(message_bits: u64, link: &LinkParams, attempts: u32) -> Result<CommEnergy> {
    link.validate()?;
    if message_bits == 0 {
        return Err(Error::Invalid("message must have at least one bit".into()));
    }
    if attempts == 0 {
        return Err(Error::Invalid("at least one attempt is required".into()));
    }
    Ok(CommEnergy {
        joules: f64::from(attempts) * (message_bits as f64 / link.data_rate) * link.tx_power,
        packets: message_bits.div_ceil(link.packet_bits()),
    })
}

/// Bits needed to send a caption as UTF-8.
pub fn caption_bits(caption: &str) -> u64 {
    caption.len() as u64 * 8
}

/// Each value divided by the set maximum. A set whose maximum is zero maps to
/// all zeros.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Invalid("cannot normalize an empty candidate set".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::Invalid(format!("energy {v} is negative or not finite")));
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| v / max).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(cpu: &[f64]) -> PowerTrace {
        PowerTrace::from_watts(&cpu.iter().map(|&c| (c, 0.0)).collect::<Vec<_>>(), 1.0).unwrap()
    }

    #[test]
    fn constant_power() {
        let e = integrate_trace(&trace(&[10.0, 10.0, 10.0]));
        assert_eq!(e.total_j, 30.0);
        assert_eq!(e.gpu_j, 0.0);

        let single = PowerTrace::from_watts(&[(5.0, 1.0)], 1.0).unwrap();
        assert_eq!(integrate_trace(&single).total_j, 6.0);
    }

    #[test]
    fn csv_in_milliwatts() {
        let csv = "t_s,cpu_mw,gpu_mw\n0,25000,1\n1,25701,1\n";
        let t = PowerTrace::from_csv_reader(csv.as_bytes(), 1.0).unwrap();
        let e = integrate_trace(&t);
        assert!((e.cpu_j - 50.701).abs() < 1e-12);
        assert!((e.gpu_j - 0.002).abs() < 1e-15);
        assert_eq!(t.total_cpu_utilization(), None);

        let csv = "t_s,cpu_mw,gpu_mw,cpu_util_pct\n0,1000,0,40.5\n1,1000,0,59.5\n";
        let t = PowerTrace::from_csv_reader(csv.as_bytes(), 1.0).unwrap();
        assert_eq!(t.total_cpu_utilization(), Some(100.0));
    }

    #[test]
    fn trace_errors() {
        let empty = "t_s,cpu_mw,gpu_mw\n";
        assert!(matches!(
            PowerTrace::from_csv_reader(empty.as_bytes(), 1.0),
            Err(Error::EmptyTrace)
        ));
        let backwards = "t_s,cpu_mw,gpu_mw\n1,1,1\n1,1,1\n";
        assert!(matches!(
            PowerTrace::from_csv_reader(backwards.as_bytes(), 1.0),
            Err(Error::MalformedTrace(_))
        ));
        let bad_header = "time,cpu,gpu\n0,1,1\n";
        assert!(PowerTrace::from_csv_reader(bad_header.as_bytes(), 1.0).is_err());
        let negative = "t_s,cpu_mw,gpu_mw\n0,-1,0\n";
        assert!(PowerTrace::from_csv_reader(negative.as_bytes(), 1.0).is_err());
        let garbage = "t_s,cpu_mw,gpu_mw\n0,abc,0\n";
        assert!(PowerTrace::from_csv_reader(garbage.as_bytes(), 1.0).is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = PowerTrace::from_csv_file("/nonexistent/trace.csv", 1.0).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/trace.csv"));
    }

    #[test]
    fn link_energy() {
        let link = LinkParams::default();
        let one = communication_energy(12_000, &link, 1).unwrap();
        assert!((one.joules - 8.391_608_391_608_392e-5).abs() < 1e-9);
        assert_eq!(one.packets, 1);
        let two = communication_energy(12_000, &link, 2).unwrap();
        assert!((two.joules - 1.678e-4).abs() < 1e-7);
        assert_eq!(communication_energy(12_001, &link, 1).unwrap().packets, 2);

        let unit = LinkParams {
            data_rate: 1.0,
            tx_power: 1.0,
            packet_size: 1,
        };
        assert_eq!(communication_energy(1, &unit, 1).unwrap().joules, 1.0);
        assert!(communication_energy(0, &unit, 1).is_err());
        assert!(communication_energy(1, &unit, 0).is_err());
    }

    #[test]
    fn normalization() {
        let r = normalize(&[50.701, 524.718]).unwrap();
        assert!((r[0] - 0.096_625_234_888_073_21).abs() < 1e-12);
        assert_eq!(r[1], 1.0);
        assert_eq!(normalize(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(normalize(&[]).is_err());
        assert!(normalize(&[-1.0]).is_err());
    }

    proptest! {
        #[test]
        fn additive_under_concatenation(
            a in prop::collection::vec(0.0f64..500.0, 1..40),
            b in prop::collection::vec(0.0f64..500.0, 1..40),
        ) {
            let (ta, tb) = (trace(&a), trace(&b));
            let joined = integrate_trace(&ta.concat(&tb).unwrap()).total_j;
            let parts = integrate_trace(&ta).total_j + integrate_trace(&tb).total_j;
            prop_assert!((joined - parts).abs() <= 1e-9 * parts.max(1.0));
        }

        #[test]
        fn scales_linearly(a in prop::collection::vec(0.0f64..500.0, 1..40), k in 0u32..10) {
            // powers of two keep the scaling exact in floating point
            let c = f64::from(1u32 << k);
            let base = integrate_trace(&trace(&a)).total_j;
            let scaled = integrate_trace(&trace(&a.iter().map(|v| v * c).collect::<Vec<_>>())).total_j;
            prop_assert_eq!(scaled, base * c);
        }

        #[test]
        fn ratios_are_scale_invariant(v in prop::collection::vec(0.0f64..1000.0, 1..10), c in 0.001f64..1000.0) {
            let a = normalize(&v).unwrap();
            let b = normalize(&v.iter().map(|x| x * c).collect::<Vec<_>>()).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((0.0..=1.0).contains(x));
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
