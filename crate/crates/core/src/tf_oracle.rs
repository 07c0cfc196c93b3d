//! Time-frequency reference chain: ISFFT, rectangular-pulse Heisenberg and
//! Wigner transforms, and a sample-level time-domain channel.
//!
//! Every stage is unitary. The chain shares no code with [`crate::dd_io`]
//! and serves as an independent check of the delay-Doppler relations.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{FftDirection, FftPlanner};

use crate::channel::TapSet;
use crate::dd_io::{add_awgn, NoiseModel};
use crate::grid::{DdFrame, GridDims};
use crate::scalar::{cis, Real};

/// Time-frequency samples `X[n, m]`, row-major in `[n][m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfGrid<T> {
    pub dims: GridDims,
    pub samples: Vec<Complex<T>>,
}

/// `N·M` samples at rate `MΔf`, optionally preceded by a cyclic prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal<T> {
    pub dims: GridDims,
    pub cp_len: usize,
    pub samples: Vec<Complex<T>>,
}

impl<T: Real> TimeSignal<T> {
    pub fn payload(&self) -> &[Complex<T>] {
        &self.samples[self.cp_len..]
    }

    /// Prepends the last `len` payload samples.
    pub fn with_cyclic_prefix(&self, len: usize) -> Self {
        let body = self.payload();
        let len = len.min(body.len());
        let mut samples = Vec::with_capacity(body.len() + len);
        samples.extend_from_slice(&body[body.len() - len..]);
        samples.extend_from_slice(body);
        Self { dims: self.dims, cp_len: len, samples }
    }

    pub fn without_cyclic_prefix(&self) -> Self {
        Self { dims: self.dims, cp_len: 0, samples: self.payload().to_vec() }
    }

    pub fn energy(&self) -> T {
        self.payload().iter().map(|c| c.norm_sqr()).sum()
    }
}

/// In-place FFT of `count` strided sequences of length `len`.
fn fft_strided<T: Real>(
    planner: &mut FftPlanner<T>,
    data: &mut [Complex<T>],
    len: usize,
    count: usize,
    stride_elem: usize,
    stride_seq: usize,
    dir: FftDirection,
) {
    let fft = planner.plan_fft(len, dir);
    let mut buf = vec![Complex::zero(); len];
    for s in 0..count {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = data[s * stride_seq + i * stride_elem];
        }
        fft.process(&mut buf);
        for (i, b) in buf.iter().enumerate() {
            data[s * stride_seq + i * stride_elem] = *b;
        }
    }
}

fn scale_all<T: Real>(data: &mut [Complex<T>], s: T) {
    data.iter_mut().for_each(|c| *c = c.scale(s));
}

/// `X[n,m] = (1/√NM) Σ_{k,l} x[k,l] e^{j2π(nk/N − ml/M)}`.
pub fn isfft<T: Real>(x: &DdFrame<T>) -> TfGrid<T> {
    let dims = x.dims();
    let (n, m) = (dims.n, dims.m);
    let mut data = x.cells().to_vec();
    let mut planner = FftPlanner::new();
    // delay → frequency along each row, Doppler → time down each column
    fft_strided(&mut planner, &mut data, m, n, 1, m, FftDirection::Forward);
    fft_strided(&mut planner, &mut data, n, m, m, 1, FftDirection::Inverse);
    scale_all(&mut data, T::one() / T::of_usize(n * m).sqrt());
    TfGrid { dims, samples: data }
}

/// Exact inverse of [`isfft`].
pub fn sfft<T: Real>(grid: &TfGrid<T>) -> DdFrame<T> {
    let dims = grid.dims;
    let (n, m) = (dims.n, dims.m);
    let mut data = grid.samples.clone();
    let mut planner = FftPlanner::new();
    fft_strided(&mut planner, &mut data, m, n, 1, m, FftDirection::Inverse);
    fft_strided(&mut planner, &mut data, n, m, m, 1, FftDirection::Forward);
    scale_all(&mut data, T::one() / T::of_usize(n * m).sqrt());
    DdFrame::from_cells(dims, data).expect("sized to dims")
}

/// Rectangular-pulse Heisenberg transform: a unitary inverse DFT per time slot.
pub fn otfs_tx_rect<T: Real>(grid: &TfGrid<T>) -> TimeSignal<T> {
    let dims = grid.dims;
    let mut data = grid.samples.clone();
    let mut planner = FftPlanner::new();
    fft_strided(&mut planner, &mut data, dims.m, dims.n, 1, dims.m, FftDirection::Inverse);
    scale_all(&mut data, T::one() / T::of_usize(dims.m).sqrt());
    TimeSignal { dims, cp_len: 0, samples: data }
}

/// Rectangular-pulse Wigner transform (drops any cyclic prefix first).
pub fn otfs_rx_rect<T: Real>(s: &TimeSignal<T>) -> TfGrid<T> {
    let dims = s.dims;
    let mut data = s.payload().to_vec();
    let mut planner = FftPlanner::new();
    fft_strided(&mut planner, &mut data, dims.m, dims.n, 1, dims.m, FftDirection::Forward);
    scale_all(&mut data, T::one() / T::of_usize(dims.m).sqrt());
    TfGrid { dims, samples: data }
}

/// Sample-level channel `r[q] = Σ_i h_i e^{j2π(k_i+κ_i)(q−l_i)/(NM)} s[q−l_i]`.
///
/// Time index `q = 0` is the first payload sample; prefix samples have
/// negative `q`. With `cyclic` set, the payload is delayed circularly and the
/// prefix (if any) is rebuilt from the result; otherwise samples before the
/// start of the buffer are zero.
pub fn td_channel<T: Real>(s: &TimeSignal<T>, taps: &TapSet<T>, cyclic: bool) -> TimeSignal<T> {
    let dims = s.dims;
    if cyclic {
        let body = s.payload();
        let len = body.len();
        let mut out = vec![Complex::zero(); len];
        for tap in &taps.taps {
            let nu = T::of(tap.doppler as f64) + tap.kappa;
            for (q, r) in out.iter_mut().enumerate() {
                let t = q as isize - tap.delay as isize;
                let src = body[t.rem_euclid(len as isize) as usize];
                *r = *r + tap.gain * cis(dims.coupling_angle(nu, T::of(t as f64))) * src;
            }
        }
        let sig = TimeSignal { dims, cp_len: 0, samples: out };
        return if s.cp_len > 0 { sig.with_cyclic_prefix(s.cp_len) } else { sig };
    }
    let cp = s.cp_len as isize;
    let mut out = vec![Complex::zero(); s.samples.len()];
    for tap in &taps.taps {
        let nu = T::of(tap.doppler as f64) + tap.kappa;
        for (i, r) in out.iter_mut().enumerate().skip(tap.delay) {
            let t = i as isize - cp - tap.delay as isize;
            *r = *r + tap.gain * cis(dims.coupling_angle(nu, T::of(t as f64))) * s.samples[i - tap.delay];
        }
    }
    TimeSignal { dims, cp_len: s.cp_len, samples: out }
}

/// ISFFT → Heisenberg → (prefix, channel, prefix removal) → Wigner → SFFT, plus noise.
///
/// The prefix is as long as the largest tap delay, which makes the linear
/// channel equivalent to a circular one over the frame.
pub fn full_chain<T: Real, R: Rng + ?Sized>(
    x: &DdFrame<T>,
    taps: &TapSet<T>,
    noise: &NoiseModel,
    rng: &mut R,
) -> DdFrame<T>
where
    StandardNormal: Distribution<T>,
{
    let s = otfs_tx_rect(&isfft(x)).with_cyclic_prefix(taps.max_delay());
    let r = td_channel(&s, taps, false);
    let y = sfft(&otfs_rx_rect(&r));
    add_awgn(&y, noise, rng)
}
