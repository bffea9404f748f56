use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eosl::channel::{self, ChannelModel, PRNG_ID};
use eosl::config::{BundleManifest, RunConfig};
use eosl::energy::{self, PowerTrace};
use eosl::selection;
use eosl::{Error, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "eosl", version, about = "Energy-optimized semantic loss benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Candidate manifest (JSON)
    #[arg(long)]
    bundles: PathBuf,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for Monte Carlo channel estimates
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score and rank every candidate by EOSL
    Rank {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// EOSL of every candidate over a grid of bit error probabilities
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `start:stop:steps` or a comma-separated list
        #[arg(long)]
        grid: String,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Compare encoders by caption cosine and reconstructed-image SSIM
    Encdec {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print the block channel loss for a channel model
    Channel {
        /// Take defaults from this run configuration's channel section
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        p_b: Option<f64>,
        #[arg(long)]
        p_f: Option<f64>,
        #[arg(long)]
        t: Option<u64>,
        #[arg(long)]
        l: Option<u64>,
        /// Also run a Monte Carlo estimate with this many blocks
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Integrate one power trace (CSV `t_s,cpu_mw,gpu_mw`) to joules
    Energy {
        #[arg(long)]
        trace: PathBuf,
        /// Sample interval in seconds
        #[arg(long, default_value_t = 1.0)]
        interval: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn require_format(format: Format, allowed: &[Format], command: &str) -> eosl::Result<()> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("`{command}` does not support --format {format:?}")))
    }
}

fn load(run: &RunArgs) -> eosl::Result<(RunConfig, BundleManifest)> {
    Ok((RunConfig::from_file(&run.config)?, BundleManifest::from_file(&run.bundles)?))
}

fn emit(out: Option<&Path>, body: &str) -> eosl::Result<()> {
    match out {
        Some(path) => std::fs::write(path, body).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> eosl::Result<()> {
    match cli.command {
        Command::Rank { run, format } => {
            require_format(format, &[Format::Json, Format::Text], "rank")?;
            let (cfg, manifest) = load(&run)?;
            let report = selection::rank(&cfg, &manifest.candidates, run.seed)?;
            let body = match format {
                Format::Json => selection::render_json(&report),
                _ => selection::render_text(&report),
            };
            emit(run.out.as_deref(), &body)
        }
        Command::Sweep { run, grid, format } => {
            require_format(format, &[Format::Csv, Format::Json], "sweep")?;
            let grid = selection::parse_grid(&grid)?;
            let (cfg, manifest) = load(&run)?;
            let prepared = selection::prepare(&cfg, &manifest.candidates)?;
            let points = selection::sweep_prepared(&cfg, &prepared, &grid)?;
            let body = match format {
                Format::Json => selection::render_json(&points),
                _ => selection::render_sweep_csv(&points),
            };
            emit(run.out.as_deref(), &body)
        }
        Command::Encdec { run, format } => {
            require_format(format, &[Format::Json, Format::Text], "encdec")?;
            let (cfg, manifest) = load(&run)?;
            let report = selection::encdec_compare(&cfg, &manifest.candidates, run.seed)?;
            let body = match format {
                Format::Json => selection::render_json(&report),
                _ => selection::render_encdec_text(&report),
            };
            emit(run.out.as_deref(), &body)
        }
        Command::Channel {
            config,
            p_b,
            p_f,
            t,
            l,
            trials,
            seed,
            out,
            format,
        } => {
            require_format(format, &[Format::Json, Format::Text], "channel")?;
            let base = match config {
                Some(path) => RunConfig::from_file(path)?.channel,
                None => ChannelModel::default(),
            };
            let ch = ChannelModel::new(
                p_b.unwrap_or(base.p_b),
                p_f.unwrap_or(base.p_f),
                t.unwrap_or(base.t),
                l.unwrap_or(base.l),
            )?;
            let analytic = channel::channel_loss(&ch).value();
            let mc = if trials > 0 {
                Some(channel::simulate_block_errors(&ch, trials, seed)?.value())
            } else {
                None
            };
            let body = match format {
                Format::Json => selection::render_json(&channel_output(&ch, analytic, mc, trials, seed)),
                _ => {
                    let mut s = format!(
                        "p_b={} p_f={} t={} l={}\naverage bit error: {:.9e}\nchannel loss: {:.12}\n",
                        ch.p_b,
                        ch.p_f,
                        ch.t,
                        ch.l,
                        channel::average_bit_error(&ch),
                        analytic
                    );
                    if let Some(v) = mc {
                        s.push_str(&format!(
                            "monte carlo ({trials} trials, seed {seed}, {PRNG_ID}): {v:.12}\n"
                        ));
                    }
                    s
                }
            };
            emit(out.as_deref(), &body)
        }
        Command::Energy {
            trace,
            interval,
            out,
            format,
        } => {
            require_format(format, &[Format::Json, Format::Text], "energy")?;
            let tr = PowerTrace::from_csv_file(&trace, interval)?;
            let e = energy::integrate_trace(&tr);
            let body = match format {
                Format::Json => selection::render_json(&e),
                _ => {
                    let mut s = format!(
                        "samples: {}\ncpu energy: {} J\ngpu energy: {} J\ntotal energy: {} J\n",
                        tr.samples().len(),
                        e.cpu_j,
                        e.gpu_j,
                        e.total_j
                    );
                    if let Some(u) = tr.total_cpu_utilization() {
                        s.push_str(&format!("total cpu utilization: {u} %\n"));
                    }
                    s
                }
            };
            emit(out.as_deref(), &body)
        }
    }
}

#[derive(serde::Serialize)]
struct ChannelOutput {
    channel: ChannelModel,
    average_bit_error: f64,
    channel_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo_channel_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prng: Option<&'static str>,
}

fn channel_output(ch: &ChannelModel, analytic: f64, mc: Option<f64>, trials: u64, seed: u64) -> ChannelOutput {
    ChannelOutput {
        channel: *ch,
        average_bit_error: channel::average_bit_error(ch),
        channel_loss: analytic,
        monte_carlo_channel_loss: mc,
        trials: mc.map(|_| trials),
        seed: mc.map(|_| seed),
        prng: mc.map(|_| PRNG_ID),
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Ingestion => 3,
        ErrorKind::Validation => 4,
        ErrorKind::Computation => 5,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
