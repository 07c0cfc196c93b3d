//! Experiment configuration: a flat `key = value` text file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::alphabet::Alphabet;
use crate::channel::{delay_tap_bound, doppler_tap_bound, DopplerMode, PowerDelayProfile};
use crate::detector::{MpConfig, Pulse, EXHAUSTIVE_LIMIT};
use crate::error::{Error, Result};
use crate::grid::GridDims;
use crate::layout::{FrameLayout, LayoutParams, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsiMode {
    Ideal,
    Estimated,
}

impl CsiMode {
    pub fn name(self) -> &'static str {
        match self {
            CsiMode::Ideal => "ideal",
            CsiMode::Estimated => "estimated",
        }
    }
}

impl fmt::Display for CsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ideal" | "perfect" => Ok(CsiMode::Ideal),
            "estimated" | "est" => Ok(CsiMode::Estimated),
            other => Err(Error::Config(format!("unknown csi mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Mp,
    Exhaustive,
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mp" => Ok(DetectorKind::Mp),
            "exhaustive" | "map" => Ok(DetectorKind::Exhaustive),
            other => Err(Error::Config(format!("unknown detector '{other}'"))),
        }
    }
}

/// Pilot SNR: fixed, or tied to the data SNR of each point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PilotSnr {
    Fixed(f64),
    Offset(f64),
}

impl PilotSnr {
    pub fn at(self, snr_d_db: f64) -> f64 {
        match self {
            PilotSnr::Fixed(p) => p,
            PilotSnr::Offset(o) => snr_d_db + o,
        }
    }
}

/// Path gains: Rayleigh draws, or the deterministic `√(p/Σp)` per tap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fading {
    Rayleigh,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    /// `eva`, `flat`, or a file path.
    Named(String),
    Custom(PowerDelayProfile),
}

impl ProfileSource {
    pub fn resolve(&self) -> Result<PowerDelayProfile> {
        match self {
            ProfileSource::Named(name) => PowerDelayProfile::by_name(name),
            ProfileSource::Custom(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub m: usize,
    pub delta_f: f64,
    pub scheme: Scheme,
    /// Derived from the profile when absent.
    pub l_tau: Option<usize>,
    /// Derived from speed and carrier when absent.
    pub k_nu: Option<usize>,
    pub k_hat: usize,
    pub pilot: Option<(usize, usize)>,
    pub qam: usize,
    pub pulse: Pulse,
    pub doppler: DopplerMode,
    pub profile: ProfileSource,
    pub fading: Fading,
    pub speed_kmph: f64,
    pub carrier_hz: f64,
    pub snr_d_db: Vec<f64>,
    pub snr_p: PilotSnr,
    /// Threshold as a multiple of σ.
    pub threshold: f64,
    pub csi: CsiMode,
    pub detector: DetectorKind,
    pub trials: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub damping: f64,
    /// Relative truncation of fractional Doppler spreads in the detector.
    pub trunc: f64,
}

impl Default for SimConfig {
    /// Low-latency preset: N=16, M=128, 15 kHz, EVA at 120 km/h and 4 GHz.
    fn default() -> Self {
        Self {
            n: 16,
            m: 128,
            delta_f: 15e3,
            scheme: Scheme::SisoInteger,
            l_tau: None,
            k_nu: None,
            k_hat: 0,
            pilot: None,
            qam: 4,
            pulse: Pulse::Ideal,
            doppler: DopplerMode::Integer,
            profile: ProfileSource::Named("eva".into()),
            fading: Fading::Rayleigh,
            speed_kmph: 120.0,
            carrier_hz: 4e9,
            snr_d_db: vec![10.0],
            snr_p: PilotSnr::Offset(25.0),
            threshold: 3.0,
            csi: CsiMode::Estimated,
            detector: DetectorKind::Mp,
            trials: 100,
            seed: 0,
            max_iter: 30,
            damping: 0.6,
            trunc: 1e-3,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let items: Vec<f64> = value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

impl SimConfig {
    /// Overlays `key = value` lines on the defaults. `#` starts a comment;
    /// unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let key = k.trim().to_ascii_lowercase();
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", i + 1)));
            }
        }
        let mut cfg = Self::default();
        let (mut pilot_k, mut pilot_l) = (None, None);
        for (key, v) in &entries {
            let v = v.as_str();
            match key.as_str() {
                "n" => cfg.n = parse_value(key, v)?,
                "m" => cfg.m = parse_value(key, v)?,
                "delta_f" => cfg.delta_f = parse_value(key, v)?,
                "scheme" => cfg.scheme = v.parse()?,
                "l_tau" => cfg.l_tau = Some(parse_value(key, v)?),
                "k_nu" => cfg.k_nu = Some(parse_value(key, v)?),
                "k_hat" => cfg.k_hat = parse_value(key, v)?,
                "pilot_k" => pilot_k = Some(parse_value(key, v)?),
                "pilot_l" => pilot_l = Some(parse_value(key, v)?),
                "qam" => cfg.qam = parse_value(key, v)?,
                "pulse" => cfg.pulse = v.parse()?,
                "doppler" => cfg.doppler = v.parse()?,
                "profile" => cfg.profile = ProfileSource::Named(v.to_string()),
                "fading" => {
                    cfg.fading = match v.to_ascii_lowercase().as_str() {
                        "rayleigh" => Fading::Rayleigh,
                        "none" => Fading::None,
                        other => return Err(Error::Config(format!("unknown fading '{other}'"))),
                    }
                }
                "speed_kmph" => cfg.speed_kmph = parse_value(key, v)?,
                "carrier_hz" => cfg.carrier_hz = parse_value(key, v)?,
                "snr_d" => cfg.snr_d_db = parse_list(key, v)?,
                "snr_p" => {
                    if entries.contains_key("snr_p_offset") {
                        return Err(Error::Config("snr_p and snr_p_offset are exclusive".into()));
                    }
                    cfg.snr_p = PilotSnr::Fixed(parse_value(key, v)?)
                }
                "snr_p_offset" => cfg.snr_p = PilotSnr::Offset(parse_value(key, v)?),
                "threshold" => cfg.threshold = parse_value(key, v)?,
                "csi" => cfg.csi = v.parse()?,
                "detector" => cfg.detector = v.parse()?,
                "trials" => cfg.trials = parse_value(key, v)?,
                "seed" => cfg.seed = parse_value(key, v)?,
                "max_iter" => cfg.max_iter = parse_value(key, v)?,
                "damping" => cfg.damping = parse_value(key, v)?,
                "trunc" => cfg.trunc = parse_value(key, v)?,
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }
        cfg.pilot = match (pilot_k, pilot_l) {
            (Some(k), Some(l)) => Some((k, l)),
            (None, None) => None,
            _ => return Err(Error::Config("pilot_k and pilot_l must be given together".into())),
        };
        Ok(cfg)
    }

    /// Reads a configuration file. A relative profile path is taken
    /// relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        if let ProfileSource::Named(name) = &cfg.profile {
            let builtin = matches!(name.to_ascii_lowercase().as_str(), "eva" | "flat");
            if !builtin && Path::new(name).is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.profile = ProfileSource::Named(dir.join(name).to_string_lossy().into_owned());
                }
            }
        }
        Ok(cfg)
    }

    pub fn dims(&self) -> Result<GridDims> {
        GridDims::new(self.n, self.m, self.delta_f)
    }

    pub fn mp_config(&self) -> MpConfig<f64> {
        MpConfig { max_iter: self.max_iter, damping: self.damping, ..MpConfig::default() }
    }

    /// Checks every setting and builds the derived objects a run needs.
    pub fn prepare(&self) -> Result<Prepared> {
        let bad = |msg: String| Err(Error::Config(msg));
        let dims = self.dims()?;
        if !self.scheme.is_siso() {
            return bad(format!("run supports SISO schemes only, got {}", self.scheme));
        }
        if self.scheme == Scheme::SisoInteger && self.doppler == DopplerMode::Fractional {
            return bad("fractional Doppler needs a fractional guard scheme".into());
        }
        if self.pulse == Pulse::Rectangular && self.doppler == DopplerMode::Fractional {
            return bad("rectangular pulse supports integer Doppler only".into());
        }
        if self.snr_d_db.is_empty() || self.snr_d_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_d must be a non-empty list of finite values".into());
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return bad(format!("threshold must be non-negative, got {}", self.threshold));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.max_iter == 0 || !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("need max_iter ≥ 1 and 0 < damping ≤ 1".into());
        }
        if !(self.trunc >= 0.0 && self.trunc < 1.0) {
            return bad(format!("trunc must lie in [0, 1), got {}", self.trunc));
        }
        let alphabet = Alphabet::qam(self.qam)?;
        let profile = self.profile.resolve()?;
        let need_l = delay_tap_bound(&profile, &dims);
        let need_k = doppler_tap_bound(self.speed_kmph, self.carrier_hz, &dims);
        let l_tau = self.l_tau.unwrap_or(need_l);
        let k_nu = self.k_nu.unwrap_or(need_k);
        if l_tau < need_l {
            return bad(format!("profile reaches delay tap {need_l} but l_tau = {l_tau}"));
        }
        if self.scheme != Scheme::SisoFracFull && k_nu < need_k {
            return bad(format!("speed reaches Doppler tap {need_k} but k_nu = {k_nu}"));
        }
        let mut params = LayoutParams::new(self.scheme, dims, l_tau, k_nu).k_hat(self.k_hat);
        if let Some((k, l)) = self.pilot {
            params = params.pilot(k, l);
        }
        let layout = params.build()?;
        if self.detector == DetectorKind::Exhaustive && layout.data_cells(0).len() > EXHAUSTIVE_LIMIT {
            return Err(Error::TooLarge { vars: layout.data_cells(0).len(), limit: EXHAUSTIVE_LIMIT });
        }
        Ok(Prepared { dims, layout, profile, alphabet })
    }
}

/// Validated configuration with its derived objects.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dims: GridDims,
    pub layout: FrameLayout,
    pub profile: PowerDelayProfile,
    pub alphabet: Alphabet<f64>,
}
