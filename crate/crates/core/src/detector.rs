//! Data detection over the detection region.
//!
//! [`build_system`] turns a channel model into one sparse linear equation per
//! detection cell. [`mp_detect`] runs Gaussian-approximation message passing
//! over the resulting factor graph; [`map_detect_exhaustive`] is a brute-force
//! reference for tiny systems.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::Zero;

use crate::alphabet::Alphabet;
use crate::channel::{DopplerMode, TapSet};
use crate::dd_io::{fractional_gain, rect_phase};
use crate::error::{Error, Result};
use crate::estimator::EstimatedChannel;
use crate::layout::{CellKind, FrameLayout};
use crate::scalar::{wrap, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pulse {
    Ideal,
    Rectangular,
}

impl Pulse {
    pub fn name(self) -> &'static str {
        match self {
            Pulse::Ideal => "ideal",
            Pulse::Rectangular => "rectangular",
        }
    }
}

impl fmt::Display for Pulse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pulse {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ideal" => Ok(Pulse::Ideal),
            "rect" | "rectangular" => Ok(Pulse::Rectangular),
            other => Err(Error::Config(format!("unknown pulse '{other}'"))),
        }
    }
}

/// One term of the receiver's channel model: `y[k,l] += g·β[k,l]·x[[k−d]_N, [l−l']_M]`,
/// where `β` is 1 for ideal pulses and the rectangular-pulse phase `α` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseTap<T> {
    pub doppler: isize,
    pub delay: usize,
    pub gain: Complex<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResponse<T> {
    pub pulse: Pulse,
    pub taps: Vec<ResponseTap<T>>,
}

/// Drops taps weaker than `rel·max|g|`.
fn truncate<T: Real>(taps: &mut Vec<ResponseTap<T>>, rel: T) {
    let peak = taps.iter().map(|t| t.gain.norm()).fold(T::zero(), T::max);
    let floor = peak * rel;
    taps.retain(|t| t.gain.norm() >= floor && !t.gain.is_zero());
}

impl<T: Real> ChannelResponse<T> {
    /// Receiver model from the true channel (ideal CSI).
    ///
    /// Fractional taps are folded into per-delay Doppler spreads over all `N`
    /// bins, then bins below `truncation·max` are dropped.
    pub fn from_taps(taps: &TapSet<T>, layout: &FrameLayout, pulse: Pulse, truncation: T) -> Result<Self> {
        let dims = layout.dims();
        let fractional = taps.mode == DopplerMode::Fractional && taps.has_fractional_doppler();
        if fractional && pulse == Pulse::Rectangular {
            return Err(Error::ModeMismatch { channel: "fractional".into(), scheme: "rectangular pulse".into() });
        }
        let mut out: Vec<ResponseTap<T>> = Vec::new();
        if !fractional {
            for t in &taps.taps {
                let gain = match pulse {
                    Pulse::Ideal => t.coupled_gain(&dims),
                    Pulse::Rectangular => t.gain,
                };
                out.push(ResponseTap { doppler: t.doppler, delay: t.delay, gain });
            }
            return Ok(Self { pulse, taps: out });
        }
        let n = dims.n;
        let mut delays: Vec<usize> = taps.taps.iter().map(|t| t.delay).collect();
        delays.sort_unstable();
        delays.dedup();
        for delay in delays {
            for d in 0..n {
                let gain: Complex<T> = taps
                    .taps
                    .iter()
                    .filter(|t| t.delay == delay)
                    .map(|t| fractional_gain(t.gain, t.doppler, delay, t.kappa, wrap(t.doppler - d as isize, n), &dims))
                    .sum();
                out.push(ResponseTap { doppler: d as isize, delay, gain });
            }
        }
        truncate(&mut out, truncation);
        Ok(Self { pulse, taps: out })
    }

    /// Receiver model from a threshold estimate taken at pilot `pilot_index`.
    ///
    /// For rectangular pulses the pilot-cell phase is divided out so the gain
    /// can be re-rotated per detection cell.
    pub fn from_estimate(
        est: &EstimatedChannel<T>,
        layout: &FrameLayout,
        pilot_index: usize,
        pulse: Pulse,
        truncation: T,
    ) -> Result<Self> {
        let dims = layout.dims();
        let (k_p, l_p) = layout.pilots()[pilot_index];
        if est.mode == DopplerMode::Fractional && pulse == Pulse::Rectangular {
            return Err(Error::ModeMismatch { channel: "fractional".into(), scheme: "rectangular pulse".into() });
        }
        let mut out: Vec<ResponseTap<T>> = est
            .taps
            .iter()
            .map(|t| {
                let gain = match pulse {
                    Pulse::Ideal => t.gain,
                    Pulse::Rectangular => {
                        let k = wrap(k_p as isize + t.doppler, dims.n);
                        t.gain / rect_phase::<T>(k, l_p + t.delay, t.doppler, t.delay, &dims)
                    }
                };
                ResponseTap { doppler: t.doppler, delay: t.delay, gain }
            })
            .collect();
        if est.mode == DopplerMode::Fractional {
            truncate(&mut out, truncation);
        } else {
            out.retain(|t| !t.gain.is_zero());
        }
        Ok(Self { pulse, taps: out })
    }

    #[inline]
    fn coefficient(&self, tap: &ResponseTap<T>, k: usize, l: usize, layout: &FrameLayout) -> Complex<T> {
        match self.pulse {
            Pulse::Ideal => tap.gain,
            Pulse::Rectangular => tap.gain * rect_phase(k, l, tap.doppler, tap.delay, &layout.dims()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row<T> {
    pub obs: Complex<T>,
    /// `(variable index, coefficient)`.
    pub terms: Vec<(usize, Complex<T>)>,
}

/// `y = H·x + v` restricted to the detection cells that see data.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem<T> {
    pub rows: Vec<Row<T>>,
    pub n_vars: usize,
    pub sigma2: T,
    pub alphabet: Alphabet<T>,
}

impl<T: Real> SparseSystem<T> {
    /// `H·x` for the given variable values.
    pub fn synthesize(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        self.rows.iter().map(|r| r.terms.iter().map(|&(j, h)| h * x[j]).sum()).collect()
    }

    /// `‖y − H·a(decisions)‖²`.
    pub fn residual(&self, decisions: &[usize]) -> T {
        let pts = self.alphabet.points();
        self.rows
            .iter()
            .map(|r| {
                let fit: Complex<T> = r.terms.iter().map(|&(j, h)| h * pts[decisions[j]]).sum();
                (r.obs - fit).norm_sqr()
            })
            .sum()
    }

    pub fn max_row_degree(&self) -> usize {
        self.rows.iter().map(|r| r.terms.len()).max().unwrap_or(0)
    }
}

/// Assembles one equation per detection cell of `stream`'s frame.
///
/// `det_values` follows [`FrameLayout::det_region`] order. Known pilot
/// contributions are subtracted from the observation; guard and foreign
/// cells contribute nothing. Rows left without unknowns are dropped.
pub fn build_system<T: Real>(
    response: &ChannelResponse<T>,
    layout: &FrameLayout,
    stream: usize,
    det_values: &[Complex<T>],
    pilot_amp: Complex<T>,
    sigma2: T,
    alphabet: &Alphabet<T>,
) -> Result<SparseSystem<T>> {
    let det = layout.det_region();
    if det.len() != det_values.len() {
        return Err(Error::LengthMismatch(det_values.len(), det.len()));
    }
    let dims = layout.dims();
    let (n, m) = (dims.n, dims.m);
    let mut var_of = vec![usize::MAX; dims.cells()];
    for (v, &cell) in layout.data_cells(stream).iter().enumerate() {
        var_of[cell] = v;
    }
    let kinds = layout.kinds();
    let mut rows = Vec::with_capacity(det.len());
    for (&cell, &y) in det.iter().zip(det_values) {
        let (k, l) = dims.coords(cell);
        let mut obs = y;
        let mut terms: Vec<(usize, Complex<T>)> = Vec::new();
        for tap in &response.taps {
            let sk = wrap(k as isize - tap.doppler, n);
            let sl = (l + m - tap.delay % m) % m;
            let src = sk * m + sl;
            match kinds[src] {
                CellKind::Pilot(s) if s == stream => obs = obs - response.coefficient(tap, k, l, layout) * pilot_amp,
                _ if var_of[src] != usize::MAX => {
                    let c = response.coefficient(tap, k, l, layout);
                    let v = var_of[src];
                    match terms.iter_mut().find(|(j, _)| *j == v) {
                        Some((_, acc)) => *acc = *acc + c,
                        None => terms.push((v, c)),
                    }
                }
                _ => {}
            }
        }
        if !terms.is_empty() {
            rows.push(Row { obs, terms });
        }
    }
    Ok(SparseSystem {
        rows,
        n_vars: layout.data_cells(stream).len(),
        sigma2: sigma2.max(T::of(1e-12)),
        alphabet: alphabet.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpConfig<T> {
    pub max_iter: usize,
    /// Weight of the fresh message in each damped update.
    pub damping: T,
    /// Convergence threshold on the largest message change.
    pub tol: T,
}

impl<T: Real> Default for MpConfig<T> {
    fn default() -> Self {
        Self { max_iter: 30, damping: T::of(0.6), tol: T::of(1e-6) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpOutcome {
    /// Alphabet index per variable.
    pub decisions: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn mp_detect<T: Real>(sys: &SparseSystem<T>, cfg: &MpConfig<T>) -> MpOutcome {
    mp_detect_traced(sys, cfg, |_, _| {})
}

/// [`mp_detect`] with a hook receiving the variable-to-observation messages
/// (`edges × Q`, edge-major) after every iteration.
pub fn mp_detect_traced<T: Real>(
    sys: &SparseSystem<T>,
    cfg: &MpConfig<T>,
    mut observe: impl FnMut(usize, &[T]),
) -> MpOutcome {
    let q = sys.alphabet.order();
    let pts = sys.alphabet.points();
    let sigma2 = sys.sigma2.max(T::of(1e-12));

    // edge e ↔ (row, term); var_edges lists edges touching each variable
    let mut edge_row = Vec::new();
    let mut edge_coef = Vec::new();
    let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); sys.n_vars];
    for (r, row) in sys.rows.iter().enumerate() {
        for &(j, h) in &row.terms {
            var_edges[j].push(edge_row.len());
            edge_row.push(r);
            edge_coef.push(h);
        }
    }
    let n_edges = edge_row.len();
    let uniform = T::one() / T::of_usize(q);
    let mut msg = vec![uniform; n_edges * q];
    let mut mean = vec![Complex::<T>::zero(); n_edges];
    let mut var = vec![T::zero(); n_edges];
    let mut row_mean = vec![Complex::<T>::zero(); sys.rows.len()];
    let mut row_var = vec![T::zero(); sys.rows.len()];
    let mut loglik = vec![T::zero(); n_edges * q];
    let mut total = vec![T::zero(); q];
    let mut decisions = vec![0usize; sys.n_vars];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        iterations += 1;

        // observation side: Gaussian interference statistics per edge
        row_mean.iter_mut().for_each(|m| *m = Complex::zero());
        row_var.iter_mut().for_each(|v| *v = sigma2);
        for e in 0..n_edges {
            let p = &msg[e * q..(e + 1) * q];
            let h = edge_coef[e];
            let mut mu = Complex::zero();
            let mut second = T::zero();
            for (pa, a) in p.iter().zip(pts) {
                mu = mu + a.scale(*pa);
                second = second + *pa * a.norm_sqr();
            }
            let m_e = h * mu;
            let v_e = (h.norm_sqr() * second - m_e.norm_sqr()).max(T::zero());
            mean[e] = m_e;
            var[e] = v_e;
            row_mean[edge_row[e]] = row_mean[edge_row[e]] + m_e;
            row_var[edge_row[e]] = row_var[edge_row[e]] + v_e;
        }
        for e in 0..n_edges {
            let r = edge_row[e];
            let mu = row_mean[r] - mean[e];
            let v = (row_var[r] - var[e]).max(sigma2);
            let resid = sys.rows[r].obs - mu;
            let h = edge_coef[e];
            for (a, ll) in pts.iter().zip(&mut loglik[e * q..(e + 1) * q]) {
                *ll = -(resid - h * a).norm_sqr() / v;
            }
        }

        // variable side: extrinsic products, damped
        let mut max_change = T::zero();
        for (j, edges) in var_edges.iter().enumerate() {
            total.iter_mut().for_each(|t| *t = T::zero());
            for &e in edges {
                for (t, ll) in total.iter_mut().zip(&loglik[e * q..(e + 1) * q]) {
                    *t = *t + *ll;
                }
            }
            decisions[j] = argmax(&total);
            for &e in edges {
                let ext: Vec<T> = total.iter().zip(&loglik[e * q..(e + 1) * q]).map(|(t, l)| *t - *l).collect();
                let fresh = softmax(&ext);
                for (old, f) in msg[e * q..(e + 1) * q].iter_mut().zip(fresh) {
                    let upd = cfg.damping * f + (T::one() - cfg.damping) * *old;
                    max_change = max_change.max((upd - *old).abs());
                    *old = upd;
                }
            }
        }
        observe(iterations, &msg);
        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }
    if sys.n_vars > 0 && n_edges == 0 {
        converged = true;
    }
    MpOutcome { decisions, iterations, converged }
}

fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax<T: Real>(v: &[T]) -> Vec<T> {
    let peak = v.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = v.iter().map(|x| (*x - peak).exp()).collect();
    let s: T = exps.iter().copied().sum();
    exps.into_iter().map(|x| x / s).collect()
}

pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Exact `argmin ‖y − H·x‖²` over all alphabet assignments. Hypotheses are
/// visited in lexicographic order of the index vector and the first minimum wins.
pub fn map_detect_exhaustive<T: Real>(sys: &SparseSystem<T>) -> Result<Vec<usize>> {
    let n = sys.n_vars;
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge { vars: n, limit: EXHAUSTIVE_LIMIT });
    }
    let q = sys.alphabet.order();
    let mut cur = vec![0usize; n];
    let mut best = cur.clone();
    let mut best_r = sys.residual(&cur);
    loop {
        // odometer with the last variable fastest
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < q {
                break;
            }
            cur[i] = 0;
        }
        let r = sys.residual(&cur);
        if r < best_r {
            best_r = r;
            best.clone_from(&cur);
        }
    }
}
