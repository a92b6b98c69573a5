//! `spsqkd`: key-rate modelling for single-photon-source QKD from the
//! command line.
//!
//! Exit status: 0 success, 1 usage error, 2 parse or validation error,
//! 3 no operating point yields a key above the threshold. The worker count
//! follows `RAYON_NUM_THREADS`; results do not depend on it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod emit;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use spsqkd_core::correlation::{DEFAULT_BLINK_FAR_PEAKS, DEFAULT_SETUP_EFFICIENCY};
use spsqkd_core::{DetectionParams, Protocol, ProtocolConfig};

#[derive(Debug, Parser)]
#[command(name = "spsqkd", version, about = "Secure-key modelling for single-photon-source QKD")]
struct Cli {
    #[command(flatten)]
    shared: SharedParams,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProtocolArg {
    /// BB84 with the multi-photon bound from g2.
    Bb84,
    /// Two-decoy BB84 with exact single-photon parameters.
    Decoy,
}

/// Detector, channel and protocol parameters shared by every command.
#[derive(Debug, Clone, Args)]
pub struct SharedParams {
    /// Detector efficiency.
    #[arg(long, global = true, default_value_t = 0.86)]
    eta_d: f64,
    /// Dark-count probability per pulse.
    #[arg(long, global = true, default_value_t = 1.6e-6)]
    y0: f64,
    /// Misalignment error probability.
    #[arg(long = "e-d", global = true, default_value_t = 0.02)]
    e_d: f64,
    /// Error-correction inefficiency.
    #[arg(long = "f", global = true, default_value_t = 1.2)]
    f: f64,
    /// Fiber attenuation (dB/km).
    #[arg(long, global = true, default_value_t = 0.17)]
    alpha: f64,
    #[arg(long, global = true, value_enum, default_value_t = ProtocolArg::Bb84)]
    protocol: ProtocolArg,
    /// Key-rate threshold below which no key counts as possible.
    #[arg(long, global = true, default_value_t = 1e-8)]
    delta: f64,
}

impl SharedParams {
    fn detection(&self) -> anyhow::Result<DetectionParams> {
        Ok(DetectionParams::new(self.eta_d, self.y0, self.e_d)?)
    }

    fn protocol(&self) -> anyhow::Result<ProtocolConfig> {
        let p = match self.protocol {
            ProtocolArg::Bb84 => Protocol::Bb84G2Bound,
            ProtocolArg::Decoy => Protocol::Bb84Decoy2,
        };
        Ok(ProtocolConfig::new(p, self.f, self.delta)?)
    }

    fn record(&self, p: &mut emit::Provenance) {
        let protocol = match self.protocol {
            ProtocolArg::Bb84 => "bb84",
            ProtocolArg::Decoy => "decoy",
        };
        p.push("protocol", protocol)
            .num("eta_d", self.eta_d)
            .num("y0", self.y0)
            .num("e_d", self.e_d)
            .num("f", self.f)
            .num("alpha_db_per_km", self.alpha)
            .num("delta", self.delta);
    }
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Probability of at least one photon per pulse.
    #[arg(long, short = 'b')]
    brightness: f64,
    /// Zero-delay second-order autocorrelation.
    #[arg(long)]
    g2: f64,
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("channel").args(["distance_km", "eta_ch"])))]
pub struct ChannelArgs {
    /// Fiber length (km); zero when no channel is given.
    #[arg(long)]
    distance_km: Option<f64>,
    /// Channel transmission instead of a fiber length.
    #[arg(long)]
    eta_ch: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RangeArgs {
    /// First fiber length (km).
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    /// Last fiber length (km).
    #[arg(long, default_value_t = 300.0)]
    to: f64,
    /// Length step (km).
    #[arg(long, default_value_t = 1.0)]
    step: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Photon-number distribution implied by brightness and g2.
    InferStats {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Gain, error rate and secure key at one channel.
    Rate {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Optimize a sender-side attenuator first.
        #[arg(long)]
        optimize_attenuation: bool,
    },
    /// Key-rate maps over a measured excitation grid.
    Map {
        /// Grid file with columns detuning_nm,power,brightness,g2.
        grid: PathBuf,
        /// Fiber lengths (km), comma separated or repeated.
        #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
        distance_km: Vec<f64>,
        /// Output prefix; writes <prefix>_<d>km.csv and .json per distance.
        #[arg(long)]
        out: PathBuf,
        /// Also write a heatmap <prefix>_<d>km.svg.
        #[arg(long)]
        svg: bool,
        /// Transition wavelength (nm) for an extra detuning column in meV.
        #[arg(long)]
        center_wavelength_nm: Option<f64>,
    },
    /// Secure key against fiber length.
    Curve {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        range: RangeArgs,
        /// Optimize the attenuator at every length.
        #[arg(long)]
        optimize_attenuation: bool,
        /// CSV output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Log-scale figure.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Attenuator transmission that maximizes the key rate.
    OptimizeAttenuation {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
        #[arg(long, default_value_t = 1e-6)]
        eta_min: f64,
    },
    /// Longest fiber with a key, or the brightness that maximizes it.
    MaxDistance {
        /// Source brightness; not needed with --optimal-brightness.
        #[arg(long, short = 'b', required_unless_present = "optimal_brightness")]
        brightness: Option<f64>,
        #[arg(long)]
        g2: f64,
        /// Optimize the attenuator at every probed length.
        #[arg(long, conflicts_with = "optimal_brightness")]
        optimize_attenuation: bool,
        /// Search the brightness that maximizes the distance.
        #[arg(long)]
        optimal_brightness: bool,
        #[arg(long, default_value_t = 0.01)]
        resolution_km: f64,
        #[arg(long, default_value_t = 1000.0)]
        cap_km: f64,
    },
    /// Time filtering at maximal power against excitation-power tuning.
    TimeFilter {
        /// Grid file with columns detuning_nm,power,brightness,g2.
        grid: PathBuf,
        /// Detuning whose power series is compared.
        #[arg(long)]
        detuning_nm: f64,
        #[arg(long, default_value_t = 1e-9)]
        detuning_tol: f64,
        /// Radiative lifetime for the decay model (ns).
        #[arg(long, default_value_t = 1.07)]
        lifetime_ns: f64,
        /// Laser repetition rate (MHz).
        #[arg(long, default_value_t = 75.95)]
        rep_rate_mhz: f64,
        /// Use a coincidence histogram of the maximal-power cell instead
        /// of the decay model.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BLINK_FAR_PEAKS)]
        blink_far_peaks: usize,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Per-pulse Monte Carlo of the link, compared with the analytic totals.
    Simulate {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value_t = 10_000_000)]
        pulses: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Extra per-photon survival probability (attenuator).
        #[arg(long, default_value_t = 1.0)]
        attenuation: f64,
        /// Also write a synthetic coincidence histogram to this file.
        #[arg(long)]
        histogram_out: Option<PathBuf>,
        /// Emission lifetime for the histogram (ns).
        #[arg(long, default_value_t = 0.5)]
        lifetime_ns: f64,
        #[arg(long, default_value_t = 100.0)]
        bin_ps: f64,
        /// Side peaks per side in the histogram.
        #[arg(long, default_value_t = 10)]
        periods: u32,
    },
    /// g2(0) from a coincidence histogram.
    G2 {
        /// Histogram text file.
        histogram: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BLINK_FAR_PEAKS)]
        blink_far_peaks: usize,
        /// Gate half-width around each peak (ns).
        #[arg(long)]
        tau_ns: Option<f64>,
        /// Gate centre offset from each peak (ns).
        #[arg(long, default_value_t = 0.0, requires = "tau_ns")]
        offset_ns: f64,
        #[command(flatten)]
        rates: RateArgs,
    },
}

/// Count rates for dark-coincidence subtraction and the brightness estimate.
#[derive(Debug, Clone, Args)]
pub struct RateArgs {
    /// Detector 1 count rate (Hz).
    #[arg(long, requires_all = ["r2", "r1_dark", "r2_dark", "cc12", "acquisition_s"])]
    r1: Option<f64>,
    #[arg(long, requires = "r1")]
    r2: Option<f64>,
    #[arg(long, requires = "r1")]
    r1_dark: Option<f64>,
    #[arg(long, requires = "r1")]
    r2_dark: Option<f64>,
    /// Coincidence rate (Hz).
    #[arg(long, requires = "r1")]
    cc12: Option<f64>,
    /// Histogram acquisition time (s).
    #[arg(long, requires = "r1")]
    acquisition_s: Option<f64>,
    #[arg(long, default_value_t = 75.95)]
    rep_rate_mhz: f64,
    /// Setup transmission up to the detectors.
    #[arg(long, default_value_t = DEFAULT_SETUP_EFFICIENCY)]
    eta_setup: f64,
}

/// What a successful command reports to the exit status.
pub enum Outcome {
    Done,
    /// No evaluated operating point yields a key above the threshold.
    Insecure(String),
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let p = &cli.shared;
    match cli.command {
        Command::InferStats { source } => commands::infer_stats(&source),
        Command::Rate {
            source,
            channel,
            optimize_attenuation,
        } => commands::rate(p, &source, &channel, optimize_attenuation),
        Command::Map {
            grid,
            distance_km,
            out,
            svg,
            center_wavelength_nm,
        } => commands::map(p, &grid, &distance_km, &out, svg, center_wavelength_nm),
        Command::Curve {
            source,
            range,
            optimize_attenuation,
            out,
            svg,
        } => commands::curve(p, &source, &range, optimize_attenuation, out.as_deref(), svg.as_deref()),
        Command::OptimizeAttenuation {
            source,
            channel,
            grid_points,
            eta_min,
        } => commands::optimize_attenuation(p, &source, &channel, grid_points, eta_min),
        Command::MaxDistance {
            brightness,
            g2,
            optimize_attenuation,
            optimal_brightness,
            resolution_km,
            cap_km,
        } => {
            if optimal_brightness {
                commands::optimal_brightness(p, g2, cap_km)
            } else {
                let source = SourceArgs {
                    brightness: brightness.expect("required by clap"),
                    g2,
                };
                commands::max_distance(p, &source, optimize_attenuation, resolution_km, cap_km)
            }
        }
        Command::TimeFilter {
            grid,
            detuning_nm,
            detuning_tol,
            lifetime_ns,
            rep_rate_mhz,
            histogram,
            blink_far_peaks,
            range,
            out,
            svg,
        } => commands::time_filter(
            p,
            &commands::TimeFilterArgs {
                grid,
                detuning_nm,
                detuning_tol,
                lifetime_ns,
                rep_rate_mhz,
                histogram,
                blink_far_peaks,
                range,
            },
            out.as_deref(),
            svg.as_deref(),
        ),
        Command::Simulate {
            source,
            channel,
            pulses,
            seed,
            attenuation,
            histogram_out,
            lifetime_ns,
            bin_ps,
            periods,
        } => commands::simulate(
            p,
            &source,
            &channel,
            &commands::SimulateArgs {
                pulses,
                seed,
                attenuation,
                histogram_out,
                lifetime_ns,
                bin_ps,
                periods,
            },
        ),
        Command::G2 {
            histogram,
            blink_far_peaks,
            tau_ns,
            offset_ns,
            rates,
        } => commands::g2(p, &histogram, blink_far_peaks, tau_ns, offset_ns, &rates),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Insecure(msg)) => {
            eprintln!("spsqkd: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("spsqkd: {e:#}");
            ExitCode::from(2)
        }
    }
}
