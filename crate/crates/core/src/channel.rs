//! Sparse delay-Doppler channels: power-delay profiles, Jakes Doppler and
//! quantization of physical paths onto grid taps.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::GridDims;
use crate::scalar::Real;

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Extended Vehicular A (3GPP TS 36.104, Annex B.2): `(delay ns, relative power dB)`.
pub const EVA: [(f64, f64); 9] = [
    (0.0, 0.0),
    (30.0, -1.5),
    (150.0, -1.4),
    (310.0, -3.6),
    (370.0, -0.6),
    (710.0, -9.1),
    (1090.0, -7.0),
    (1730.0, -12.0),
    (2510.0, -16.9),
];

/// Tapped delay line: delays in seconds with linear powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    delays: Vec<f64>,
    powers: Vec<f64>,
}

impl PowerDelayProfile {
    /// From `(delay ns, power dB)` pairs.
    pub fn from_ns_db(taps: &[(f64, f64)]) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Channel("empty power-delay profile".into()));
        }
        let mut delays = Vec::with_capacity(taps.len());
        let mut powers = Vec::with_capacity(taps.len());
        for &(ns, db) in taps {
            if !(ns >= 0.0 && ns.is_finite()) || !db.is_finite() {
                return Err(Error::Channel(format!("invalid tap ({ns} ns, {db} dB)")));
            }
            delays.push(ns * 1e-9);
            powers.push(10f64.powf(db / 10.0));
        }
        Ok(Self { delays, powers })
    }

    pub fn eva() -> Self {
        Self::from_ns_db(&EVA).expect("EVA table is valid")
    }

    /// Parses one `delay_ns power_db` pair per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut taps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::ProfileParse { line: i + 1, msg: msg.to_string() };
            let mut it = line.split_whitespace();
            let delay: f64 = it.next().ok_or_else(|| err("missing delay"))?.parse().map_err(|_| err("bad delay"))?;
            let power: f64 = it.next().ok_or_else(|| err("missing power"))?.parse().map_err(|_| err("bad power"))?;
            if it.next().is_some() {
                return Err(err("expected two columns"));
            }
            taps.push((delay, power));
        }
        Self::from_ns_db(&taps)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Single tap at zero delay.
    pub fn flat() -> Self {
        Self::from_ns_db(&[(0.0, 0.0)]).expect("flat profile is valid")
    }

    /// `"eva"`, `"flat"` or a path to a profile file.
    pub fn by_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "eva" => Ok(Self::eva()),
            "flat" => Ok(Self::flat()),
            _ => Self::load(name.trim()),
        }
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn max_delay(&self) -> f64 {
        self.delays.iter().copied().fold(0.0, f64::max)
    }
}

/// One physical propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub gain: Complex<f64>,
    /// Seconds.
    pub delay: f64,
    /// Hz.
    pub doppler: f64,
}

/// Maximum Doppler shift in Hz for a terminal speed in km/h.
pub fn max_doppler_hz(speed_kmph: f64, carrier_hz: f64) -> f64 {
    carrier_hz * speed_kmph / (3.6 * SPEED_OF_LIGHT)
}

/// Jakes' single-angle Doppler, `ν_max cos θ`.
#[inline]
pub fn jakes_doppler(nu_max: f64, theta: f64) -> f64 {
    nu_max * theta.cos()
}

/// Doppler tap bound `k_ν` for a speed: the nearest tap to `ν_max·NT`.
pub fn doppler_tap_bound(speed_kmph: f64, carrier_hz: f64, dims: &GridDims) -> usize {
    (max_doppler_hz(speed_kmph, carrier_hz) * dims.frame_duration()).round() as usize
}

/// Largest delay tap of a profile on this grid.
pub fn delay_tap_bound(profile: &PowerDelayProfile, dims: &GridDims) -> usize {
    (profile.max_delay() * dims.bandwidth()).round() as usize
}

/// Draws one realization: Rayleigh gains scaled to unit total mean power and
/// one Jakes Doppler per delay tap.
pub fn sample_channel<R: Rng + ?Sized>(
    profile: &PowerDelayProfile,
    speed_kmph: f64,
    carrier_hz: f64,
    rng: &mut R,
) -> Result<Vec<PathSpec>> {
    if profile.is_empty() {
        return Err(Error::Channel("empty power-delay profile".into()));
    }
    if !(speed_kmph >= 0.0 && speed_kmph.is_finite()) || !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
        return Err(Error::Channel(format!(
            "speed must be non-negative and carrier positive (speed={speed_kmph} km/h, carrier={carrier_hz} Hz)"
        )));
    }
    let nu_max = max_doppler_hz(speed_kmph, carrier_hz);
    let total: f64 = profile.powers().iter().sum();
    let paths = profile
        .delays()
        .iter()
        .zip(profile.powers())
        .map(|(&delay, &p)| {
            let sd = (p / total / 2.0).sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let theta = rng.random_range(-PI..=PI);
            PathSpec { gain: Complex::new(re * sd, im * sd), delay, doppler: jakes_doppler(nu_max, theta) }
        })
        .collect();
    Ok(paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DopplerMode {
    Integer,
    Fractional,
}

impl DopplerMode {
    pub fn name(self) -> &'static str {
        match self {
            DopplerMode::Integer => "integer",
            DopplerMode::Fractional => "fractional",
        }
    }
}

impl std::fmt::Display for DopplerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DopplerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "integer" | "int" => Ok(DopplerMode::Integer),
            "fractional" | "frac" => Ok(DopplerMode::Fractional),
            other => Err(Error::Config(format!("unknown doppler mode '{other}'"))),
        }
    }
}

/// One grid-quantized path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap<T> {
    pub delay: usize,
    pub doppler: isize,
    /// Fractional Doppler in `(-1/2, 1/2]`; zero in integer mode.
    pub kappa: T,
    pub gain: Complex<T>,
}

impl<T: Real> Tap<T> {
    pub fn new(delay: usize, doppler: isize, gain: Complex<T>) -> Self {
        Self { delay, doppler, kappa: T::zero(), gain }
    }

    pub fn fractional(delay: usize, doppler: isize, kappa: T, gain: Complex<T>) -> Self {
        Self { delay, doppler, kappa, gain }
    }

    /// `ĥ = h·e^{−j2π(k+κ)l/(NT·MΔf)}`.
    pub fn coupled_gain(&self, dims: &GridDims) -> Complex<T> {
        let doppler = T::of(self.doppler as f64) + self.kappa;
        let angle = dims.coupling_angle(doppler, T::of_usize(self.delay));
        self.gain * crate::scalar::cis(-angle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TapSet<T> {
    pub mode: DopplerMode,
    pub taps: Vec<Tap<T>>,
}

impl<T: Real> TapSet<T> {
    /// Integer taps, merging duplicates of the same `(k, l)` pair.
    pub fn integer(taps: impl IntoIterator<Item = Tap<T>>) -> Self {
        let mut merged: BTreeMap<(usize, isize), Complex<T>> = BTreeMap::new();
        let mut order = Vec::new();
        for t in taps {
            let key = (t.delay, t.doppler);
            match merged.get_mut(&key) {
                Some(g) => *g = *g + t.gain,
                None => {
                    merged.insert(key, t.gain);
                    order.push(key);
                }
            }
        }
        let taps = order.into_iter().map(|key| Tap::new(key.0, key.1, merged[&key])).collect();
        Self { mode: DopplerMode::Integer, taps }
    }

    pub fn fractional(taps: Vec<Tap<T>>) -> Self {
        Self { mode: DopplerMode::Fractional, taps }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Largest delay tap present.
    pub fn max_delay(&self) -> usize {
        self.taps.iter().map(|t| t.delay).max().unwrap_or(0)
    }

    /// Largest `|k|` present.
    pub fn max_doppler(&self) -> usize {
        self.taps.iter().map(|t| t.doppler.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn fits(&self, l_tau: usize, k_nu: usize) -> bool {
        self.max_delay() <= l_tau && self.max_doppler() <= k_nu
    }

    pub fn has_fractional_doppler(&self) -> bool {
        self.taps.iter().any(|t| t.kappa != T::zero())
    }

    pub fn total_power(&self) -> T {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }
}

/// Nearest integer with ties toward the lower value.
fn round_half_down(x: f64) -> f64 {
    (x - 0.5).ceil()
}

/// Quantizes paths onto the grid. Bounds are not enforced here; callers
/// compare the result against their layout with [`TapSet::fits`].
pub fn tap_quantize<T: Real>(paths: &[PathSpec], dims: &GridDims, mode: DopplerMode) -> TapSet<T> {
    let frame = dims.frame_duration();
    let bw = dims.bandwidth();
    let taps = paths.iter().map(|p| {
        let delay = (p.delay * bw).round() as usize;
        let x = p.doppler * frame;
        let k = round_half_down(x);
        let kappa = match mode {
            DopplerMode::Integer => 0.0,
            DopplerMode::Fractional => x - k,
        };
        Tap {
            delay,
            doppler: k as isize,
            kappa: T::of(kappa),
            gain: Complex::new(T::of(p.gain.re), T::of(p.gain.im)),
        }
    });
    match mode {
        DopplerMode::Integer => TapSet::integer(taps),
        DopplerMode::Fractional => TapSet::fractional(taps.collect()),
    }
}
