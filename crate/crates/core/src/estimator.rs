//! Threshold channel estimation from the pilot's receive region.
//!
//! A cell of the estimation region at offset `(d, l')` from the pilot is kept
//! when `|y| ≥ T`, and its gain is `y / x_p`. In the integer case each kept
//! cell is one path; in the fractional case cells at delay `l'` together form
//! the Doppler spread of that delay.

use std::collections::HashSet;
use std::fmt::Write as _;

use num_complex::Complex;
use num_traits::Zero;

use crate::channel::{DopplerMode, TapSet};
use crate::error::{Error, Result};
use crate::layout::FrameLayout;
use crate::scalar::{wrap, Real};

/// One retained estimation-region cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstTap<T> {
    /// Doppler offset from the pilot row, `k − k_p`.
    pub doppler: isize,
    /// Delay offset from the pilot column, `l − l_p`.
    pub delay: usize,
    pub gain: Complex<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedChannel<T> {
    pub mode: DopplerMode,
    pub threshold: T,
    /// Doppler bins of the grid, for cyclic offsets.
    pub n: usize,
    pub taps: Vec<EstTap<T>>,
    /// Delay indicator over `0..=l_tau`: at least one retained cell at that delay.
    pub delay_indicator: Vec<bool>,
}

impl<T: Real> EstimatedChannel<T> {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn gain_at(&self, doppler: isize, delay: usize) -> Option<Complex<T>> {
        let bin = wrap(doppler, self.n);
        self.taps
            .iter()
            .find(|t| t.delay == delay && wrap(t.doppler, self.n) == bin)
            .map(|t| t.gain)
    }

    /// One `mode k l kappa_bin re im` line per retained cell. `kappa_bin` is the
    /// cyclic Doppler bin `[k]_N` for fractional estimates and 0 otherwise.
    pub fn to_text(&self) -> String {
        let mut out = format!("# n={} threshold={:e}\n", self.n, self.threshold.to_f64_lossy());
        for t in &self.taps {
            let bin = match self.mode {
                DopplerMode::Integer => 0,
                DopplerMode::Fractional => wrap(t.doppler, self.n),
            };
            let _ = writeln!(
                out,
                "{} {} {} {} {:e} {:e}",
                self.mode.name(),
                t.doppler,
                t.delay,
                bin,
                t.gain.re.to_f64_lossy(),
                t.gain.im.to_f64_lossy()
            );
        }
        out
    }

    /// Parses [`Self::to_text`] output back. The indicator covers `0..=l_tau`.
    pub fn from_text(text: &str, l_tau: usize) -> Result<Self> {
        let mut n = None;
        let mut threshold = T::zero();
        let mut mode = DopplerMode::Integer;
        let mut taps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |msg: &str| Error::TapParse { line: i + 1, msg: msg.to_string() };
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("n", v)) => n = Some(v.parse().map_err(|_| err("bad n"))?),
                        Some(("threshold", v)) => {
                            threshold = T::of(v.parse().map_err(|_| err("bad threshold"))?)
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(err("expected 6 fields"));
            }
            mode = f[0].parse().map_err(|_| err("bad mode"))?;
            let doppler: isize = f[1].parse().map_err(|_| err("bad k"))?;
            let delay: usize = f[2].parse().map_err(|_| err("bad l"))?;
            let _bin: usize = f[3].parse().map_err(|_| err("bad kappa_bin"))?;
            let re: f64 = f[4].parse().map_err(|_| err("bad re"))?;
            let im: f64 = f[5].parse().map_err(|_| err("bad im"))?;
            if delay > l_tau {
                return Err(err("delay beyond l_tau"));
            }
            taps.push(EstTap { doppler, delay, gain: Complex::new(T::of(re), T::of(im)) });
        }
        let n = n.ok_or(Error::TapParse { line: 1, msg: "missing '# n=' header".into() })?;
        let mut delay_indicator = vec![false; l_tau + 1];
        for t in &taps {
            delay_indicator[t.delay] = true;
        }
        Ok(Self { mode, threshold, n, taps, delay_indicator })
    }
}

fn estimate<T: Real>(
    region_values: &[Complex<T>],
    layout: &FrameLayout,
    pilot_index: usize,
    pilot_amp: Complex<T>,
    threshold: T,
    mode: DopplerMode,
) -> Result<EstimatedChannel<T>> {
    if pilot_amp.is_zero() {
        return Err(Error::ZeroPilot);
    }
    let region = layout.est_region(pilot_index);
    if region.len() != region_values.len() {
        return Err(Error::LengthMismatch(region_values.len(), region.len()));
    }
    let dims = layout.dims();
    let (k_p, l_p) = layout.pilots()[pilot_index];
    let mut taps = Vec::new();
    let mut delay_indicator = vec![false; layout.l_tau() + 1];
    for (&idx, &y) in region.iter().zip(region_values) {
        if y.norm() >= threshold {
            let (k, l) = dims.coords(idx);
            let delay = l - l_p;
            taps.push(EstTap { doppler: k as isize - k_p as isize, delay, gain: y / pilot_amp });
            delay_indicator[delay] = true;
        }
    }
    Ok(EstimatedChannel { mode, threshold, n: dims.n, taps, delay_indicator })
}

/// Per-path threshold estimate for integer-Doppler layouts (SISO or one MIMO/uplink pilot).
pub fn estimate_integer<T: Real>(
    region_values: &[Complex<T>],
    layout: &FrameLayout,
    pilot_index: usize,
    pilot_amp: Complex<T>,
    threshold: T,
) -> Result<EstimatedChannel<T>> {
    if layout.scheme().is_fractional() {
        return Err(Error::ModeMismatch { channel: "integer".into(), scheme: layout.scheme().to_string() });
    }
    estimate(region_values, layout, pilot_index, pilot_amp, threshold, DopplerMode::Integer)
}

/// Per-delay Doppler-spread estimate for the full and reduced guard layouts.
/// In the reduced layout, leakage from nearby data is left in the samples.
pub fn estimate_fractional<T: Real>(
    region_values: &[Complex<T>],
    layout: &FrameLayout,
    pilot_amp: Complex<T>,
    threshold: T,
) -> Result<EstimatedChannel<T>> {
    if !layout.scheme().is_fractional() {
        return Err(Error::ModeMismatch { channel: "fractional".into(), scheme: layout.scheme().to_string() });
    }
    estimate(region_values, layout, 0, pilot_amp, threshold, DopplerMode::Fractional)
}

/// Threshold `T = multiplier·σ`.
pub fn threshold_from_sigma(multiplier: f64, sigma: f64) -> f64 {
    multiplier * sigma
}

/// Path detection bookkeeping against a known channel. Never used by the estimator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Paths (integer) or occupied delays (fractional) that exist.
    pub present: usize,
    pub missed: usize,
    /// Candidates with nothing there.
    pub absent: usize,
    pub false_alarms: usize,
}

impl Diagnostics {
    pub fn miss_rate(&self) -> f64 {
        if self.present == 0 {
            0.0
        } else {
            self.missed as f64 / self.present as f64
        }
    }

    pub fn false_alarm_rate(&self) -> f64 {
        if self.absent == 0 {
            0.0
        } else {
            self.false_alarms as f64 / self.absent as f64
        }
    }

    pub fn merge(&mut self, other: &Diagnostics) {
        self.present += other.present;
        self.missed += other.missed;
        self.absent += other.absent;
        self.false_alarms += other.false_alarms;
    }
}

pub fn diagnose<T: Real>(
    est: &EstimatedChannel<T>,
    truth: &TapSet<T>,
    layout: &FrameLayout,
    pilot_index: usize,
) -> Diagnostics {
    match est.mode {
        DopplerMode::Integer => {
            let n = layout.dims().n;
            let present: HashSet<(usize, usize)> = truth
                .taps
                .iter()
                .filter(|t| !t.gain.is_zero())
                .map(|t| (wrap(t.doppler, n), t.delay))
                .collect();
            let found: HashSet<(usize, usize)> =
                est.taps.iter().map(|t| (wrap(t.doppler, n), t.delay)).collect();
            let candidates = layout.est_region(pilot_index).len();
            Diagnostics {
                present: present.len(),
                missed: present.difference(&found).count(),
                absent: candidates.saturating_sub(present.len()),
                false_alarms: found.difference(&present).count(),
            }
        }
        DopplerMode::Fractional => {
            let delays = est.delay_indicator.len();
            let mut occupied = vec![false; delays];
            for t in truth.taps.iter().filter(|t| t.delay < delays && !t.gain.is_zero()) {
                occupied[t.delay] = true;
            }
            let mut d = Diagnostics::default();
            for (&o, &f) in occupied.iter().zip(&est.delay_indicator) {
                match (o, f) {
                    (true, true) => d.present += 1,
                    (true, false) => {
                        d.present += 1;
                        d.missed += 1;
                    }
                    (false, true) => {
                        d.absent += 1;
                        d.false_alarms += 1;
                    }
                    (false, false) => d.absent += 1,
                }
            }
            d
        }
    }
}
