//! Monte-Carlo BER experiments and their CSV output.

mod config;

pub use config::{CsiMode, DetectorKind, Fading, PilotSnr, Prepared, ProfileSource, SimConfig};

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{sample_channel, tap_quantize, DopplerMode, TapSet};
use crate::dd_io::{apply_ideal_fractional, apply_ideal_integer, apply_rect_integer, unit_noise, NoiseModel};
use crate::detector::{build_system, map_detect_exhaustive, mp_detect, ChannelResponse, Pulse};
use crate::error::{Error, Result};
use crate::estimator::{diagnose, estimate_fractional, estimate_integer, threshold_from_sigma, Diagnostics};
use crate::grid::DdFrame;
use crate::layout::Scheme;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub snr_d_db: f64,
    pub snr_p_db: f64,
    /// Threshold multiplier of σ.
    pub threshold: f64,
    pub scheme: Scheme,
    pub csi: CsiMode,
    pub frames: usize,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub miss_rate: f64,
    pub false_alarm_rate: f64,
    pub mean_iterations: f64,
    pub wall_time_s: f64,
}

impl MetricsRow {
    pub const HEADER: [&'static str; 13] = [
        "snr_d_db",
        "snr_p_db",
        "threshold",
        "scheme",
        "csi",
        "frames",
        "bits",
        "bit_errors",
        "ber",
        "miss_rate",
        "false_alarm_rate",
        "mean_iterations",
        "wall_time_s",
    ];

    fn record(&self) -> Vec<String> {
        let g = |x: f64| format!("{x:.5e}");
        vec![
            g(self.snr_d_db),
            g(self.snr_p_db),
            g(self.threshold),
            self.scheme.to_string(),
            self.csi.to_string(),
            self.frames.to_string(),
            self.bits.to_string(),
            self.bit_errors.to_string(),
            g(self.ber),
            g(self.miss_rate),
            g(self.false_alarm_rate),
            g(self.mean_iterations),
            g(self.wall_time_s),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != Self::HEADER.len() {
            return Err(Error::Config(format!("expected {} columns, got {}", Self::HEADER.len(), rec.len())));
        }
        fn field<T: FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("column {}: cannot parse '{}'", MetricsRow::HEADER[i], &rec[i])))
        }
        Ok(Self {
            snr_d_db: field(rec, 0)?,
            snr_p_db: field(rec, 1)?,
            threshold: field(rec, 2)?,
            scheme: field(rec, 3)?,
            csi: field(rec, 4)?,
            frames: field(rec, 5)?,
            bits: field(rec, 6)?,
            bit_errors: field(rec, 7)?,
            ber: field(rec, 8)?,
            miss_rate: field(rec, 9)?,
            false_alarm_rate: field(rec, 10)?,
            mean_iterations: field(rec, 11)?,
            wall_time_s: field(rec, 12)?,
        })
    }

    /// Equality ignoring `wall_time_s`.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self { wall_time_s: 0.0, ..self.clone() } == Self { wall_time_s: 0.0, ..other.clone() }
    }
}

/// Fraction of differing bits.
pub fn ber(tx: &[u8], rx: &[u8]) -> Result<f64> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch(tx.len(), rx.len()));
    }
    if tx.is_empty() {
        return Ok(0.0);
    }
    Ok(bit_errors(tx, rx) as f64 / tx.len() as f64)
}

fn bit_errors(tx: &[u8], rx: &[u8]) -> u64 {
    tx.iter().zip(rx).filter(|(a, b)| a != b).count() as u64
}

/// Header plus one line per row; floats carry six significant digits.
pub fn write_csv(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(MetricsRow::HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(MetricsRow::HEADER) {
        return Err(Error::Config("unexpected CSV header".into()));
    }
    r.records().map(|rec| MetricsRow::from_record(&rec?)).collect()
}

/// Everything a trial draws, in draw order: channel, data bits, unit noise.
/// Identical for every SNR point of a run.
#[derive(Debug, Clone)]
pub struct TrialDraw {
    pub taps: TapSet<f64>,
    pub bits: Vec<u8>,
    pub noise: DdFrame<f64>,
}

/// RNG of trial `trial`: the run seed with the trial index as stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn draw_trial(cfg: &SimConfig, prep: &Prepared, trial: u64) -> Result<TrialDraw> {
    let mut rng = trial_rng(cfg.seed, trial);
    let mut paths = sample_channel(&prep.profile, cfg.speed_kmph, cfg.carrier_hz, &mut rng)?;
    if cfg.fading == Fading::None {
        let total: f64 = prep.profile.powers().iter().sum();
        for (p, &pw) in paths.iter_mut().zip(prep.profile.powers()) {
            p.gain = Complex::new((pw / total).sqrt(), 0.0);
        }
    }
    let taps = tap_quantize(&paths, &prep.dims, cfg.doppler);
    let n_bits = prep.layout.data_cells(0).len() * prep.alphabet.bit_width();
    let bits = (0..n_bits).map(|_| rng.random::<bool>() as u8).collect();
    let noise = unit_noise(prep.dims, &mut rng);
    Ok(TrialDraw { taps, bits, noise })
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialStats {
    bits: u64,
    errors: u64,
    iterations: usize,
    diag: Diagnostics,
}

fn apply_channel(cfg: &SimConfig, x: &DdFrame<f64>, taps: &TapSet<f64>) -> Result<DdFrame<f64>> {
    match (cfg.pulse, cfg.doppler) {
        (Pulse::Ideal, DopplerMode::Integer) => apply_ideal_integer(x, taps),
        (Pulse::Ideal, DopplerMode::Fractional) => Ok(apply_ideal_fractional(x, taps)),
        (Pulse::Rectangular, DopplerMode::Integer) => apply_rect_integer(x, taps),
        (Pulse::Rectangular, DopplerMode::Fractional) => {
            Err(Error::Config("rectangular pulse supports integer Doppler only".into()))
        }
    }
}

fn run_trial(cfg: &SimConfig, prep: &Prepared, trial: u64, snr_d_db: f64) -> Result<TrialStats> {
    let draw = draw_trial(cfg, prep, trial)?;
    let layout = &prep.layout;
    let noise = NoiseModel::from_snr(snr_d_db, cfg.snr_p.at(snr_d_db));
    let xp = Complex::new(noise.pilot_amp, 0.0);
    let symbols = prep.alphabet.modulate_bits(&draw.bits)?;
    let x = layout.place_symbols(0, xp, &symbols)?;
    let y = apply_channel(cfg, &x, &draw.taps)?.add(&draw.noise.scale(Complex::new(noise.sigma(), 0.0)));
    let rx = layout.split_rx(&y)?;

    let threshold = threshold_from_sigma(cfg.threshold, noise.sigma());
    let est = if layout.scheme().is_fractional() {
        estimate_fractional(&rx.est[0], layout, xp, threshold)?
    } else {
        estimate_integer(&rx.est[0], layout, 0, xp, threshold)?
    };
    let diag = diagnose(&est, &draw.taps, layout, 0);
    let response = match cfg.csi {
        CsiMode::Ideal => ChannelResponse::from_taps(&draw.taps, layout, cfg.pulse, cfg.trunc)?,
        CsiMode::Estimated => ChannelResponse::from_estimate(&est, layout, 0, cfg.pulse, cfg.trunc)?,
    };
    let sys = build_system(&response, layout, 0, &rx.det, xp, noise.sigma2, &prep.alphabet)?;
    let (decisions, iterations) = match cfg.detector {
        DetectorKind::Mp => {
            let out = mp_detect(&sys, &cfg.mp_config());
            (out.decisions, out.iterations)
        }
        DetectorKind::Exhaustive => (map_detect_exhaustive(&sys)?, 0),
    };
    let rx_bits = prep.alphabet.indices_to_bits(&decisions);
    Ok(TrialStats { bits: draw.bits.len() as u64, errors: bit_errors(&draw.bits, &rx_bits), iterations, diag })
}

/// One row per SNR point, in configuration order. Trials run in parallel;
/// results depend only on the configuration (including its seed).
pub fn run_experiment(cfg: &SimConfig) -> Result<Vec<MetricsRow>> {
    let prep = cfg.prepare()?;
    cfg.snr_d_db
        .iter()
        .map(|&snr_d| {
            let start = Instant::now();
            let stats = (0..cfg.trials as u64)
                .into_par_iter()
                .map(|t| run_trial(cfg, &prep, t, snr_d))
                .collect::<Result<Vec<_>>>()?;
            let mut total = TrialStats::default();
            for s in &stats {
                total.bits += s.bits;
                total.errors += s.errors;
                total.iterations += s.iterations;
                total.diag.merge(&s.diag);
            }
            Ok(MetricsRow {
                snr_d_db: snr_d,
                snr_p_db: cfg.snr_p.at(snr_d),
                threshold: cfg.threshold,
                scheme: cfg.scheme,
                csi: cfg.csi,
                frames: stats.len(),
                bits: total.bits,
                bit_errors: total.errors,
                ber: if total.bits == 0 { 0.0 } else { total.errors as f64 / total.bits as f64 },
                miss_rate: total.diag.miss_rate(),
                false_alarm_rate: total.diag.false_alarm_rate(),
                mean_iterations: total.iterations as f64 / stats.len() as f64,
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}
