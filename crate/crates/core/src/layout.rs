//! Pilot, guard and data arrangements on the delay-Doppler grid.
//!
//! Every scheme places one pilot per stream inside a rectangular block of
//! zero-valued guard cells. The receive grid is split into estimation
//! regions (one per pilot) and a detection region holding everything else.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{DdFrame, GridDims};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    SisoInteger,
    SisoFracFull,
    SisoFracReduced,
    Mimo,
    MultiUserUplink,
    MultiUserDownlink,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::SisoInteger,
        Scheme::SisoFracFull,
        Scheme::SisoFracReduced,
        Scheme::Mimo,
        Scheme::MultiUserUplink,
        Scheme::MultiUserDownlink,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::SisoInteger => "siso_integer",
            Scheme::SisoFracFull => "siso_frac_full",
            Scheme::SisoFracReduced => "siso_frac_reduced",
            Scheme::Mimo => "mimo",
            Scheme::MultiUserUplink => "mu_uplink",
            Scheme::MultiUserDownlink => "mu_downlink",
        }
    }

    pub fn is_siso(self) -> bool {
        matches!(self, Scheme::SisoInteger | Scheme::SisoFracFull | Scheme::SisoFracReduced)
    }

    /// Schemes whose receiver estimates per-delay Doppler spreads.
    pub fn is_fractional(self) -> bool {
        matches!(self, Scheme::SisoFracFull | Scheme::SisoFracReduced)
    }

    /// Whether the guard block uses the extra half-width `k̂`.
    fn uses_k_hat(self) -> bool {
        !matches!(self, Scheme::SisoInteger | Scheme::SisoFracFull)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

/// Role of one grid cell on the transmit side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    /// Pilot of the given stream (zero for every other stream).
    Pilot(usize),
    /// Zero guard around the pilots.
    Guard,
    /// Zero separation between user data bands (downlink).
    UserGuard,
    /// Data of one stream, or of every stream when `None`.
    Data(Option<usize>),
}

/// Everything needed to construct a [`FrameLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutParams {
    pub scheme: Scheme,
    pub dims: GridDims,
    /// `(k_p, l_p)` of the first pilot; `None` picks the grid centre clipped to the bounds.
    pub pilot: Option<(usize, usize)>,
    pub l_tau: usize,
    pub k_nu: usize,
    pub k_hat: usize,
    pub n_streams: usize,
    /// Downlink only: zero columns between user bands (defaults to `l_tau`).
    pub user_gap: Option<usize>,
}

impl LayoutParams {
    pub fn new(scheme: Scheme, dims: GridDims, l_tau: usize, k_nu: usize) -> Self {
        Self { scheme, dims, pilot: None, l_tau, k_nu, k_hat: 0, n_streams: 1, user_gap: None }
    }

    pub fn k_hat(mut self, k_hat: usize) -> Self {
        self.k_hat = k_hat;
        self
    }

    pub fn streams(mut self, n: usize) -> Self {
        self.n_streams = n;
        self
    }

    pub fn pilot(mut self, k_p: usize, l_p: usize) -> Self {
        self.pilot = Some((k_p, l_p));
        self
    }

    pub fn user_gap(mut self, gap: usize) -> Self {
        self.user_gap = Some(gap);
        self
    }

    pub fn build(&self) -> Result<FrameLayout> {
        FrameLayout::build(self)
    }
}

/// Immutable pilot/guard/data arrangement plus the receive-side split.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    scheme: Scheme,
    dims: GridDims,
    pilots: Vec<(usize, usize)>,
    l_tau: usize,
    k_nu: usize,
    k_hat: usize,
    n_streams: usize,
    user_gap: usize,
    kinds: Vec<CellKind>,
    data_cells: Vec<Vec<usize>>,
    est_regions: Vec<Vec<usize>>,
    det_region: Vec<usize>,
}

/// Received values split by region, each in the region's row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct RxSplit<T> {
    pub est: Vec<Vec<Complex<T>>>,
    pub det: Vec<Complex<T>>,
}

/// Convenience wrapper matching the argument order of the scheme tables.
pub fn build_layout(
    scheme: Scheme,
    dims: GridDims,
    pilot: Option<(usize, usize)>,
    l_tau: usize,
    k_nu: usize,
    k_hat: usize,
    n_streams: usize,
) -> Result<FrameLayout> {
    LayoutParams { scheme, dims, pilot, l_tau, k_nu, k_hat, n_streams, user_gap: None }.build()
}

/// Closed-form pilot + guard count for a scheme.
pub fn table_overhead(
    scheme: Scheme,
    n: usize,
    l_tau: usize,
    k_nu: usize,
    k_hat: usize,
    n_streams: usize,
) -> usize {
    match scheme {
        Scheme::SisoInteger => (2 * l_tau + 1) * (4 * k_nu + 1),
        Scheme::SisoFracFull => (2 * l_tau + 1) * n,
        Scheme::SisoFracReduced | Scheme::MultiUserDownlink => {
            (2 * l_tau + 1) * (4 * (k_nu + k_hat) + 1)
        }
        Scheme::Mimo | Scheme::MultiUserUplink => {
            ((n_streams + 1) * l_tau + n_streams) * (4 * (k_nu + k_hat) + 1)
        }
    }
}

struct Bounds<'a> {
    violations: Vec<String>,
    dims: &'a GridDims,
}

impl Bounds<'_> {
    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(what());
        }
    }

    fn finish(self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::LayoutBound(format!(
                "{} (grid N={}, M={})",
                self.violations.join("; "),
                self.dims.n,
                self.dims.m
            )))
        }
    }
}

fn clamp_range(v: usize, lo: usize, hi: usize) -> usize {
    if lo > hi {
        v
    } else {
        v.clamp(lo, hi)
    }
}

impl FrameLayout {
    pub fn build(p: &LayoutParams) -> Result<Self> {
        let dims = p.dims;
        let (n, m) = (dims.n, dims.m);
        let scheme = p.scheme;
        if p.n_streams == 0 {
            return Err(Error::Layout("n_streams must be at least 1".into()));
        }
        if scheme.is_siso() && p.n_streams != 1 {
            return Err(Error::Layout(format!("{scheme} carries exactly one stream")));
        }
        if !scheme.uses_k_hat() && p.k_hat != 0 {
            return Err(Error::Layout(format!("{scheme} has no k_hat guard extension")));
        }
        let streams = p.n_streams;
        // pilot block columns: [l_p - l_tau, l_p + width_right]
        let width_right = match scheme {
            Scheme::Mimo | Scheme::MultiUserUplink => streams * p.l_tau + streams - 1,
            _ => p.l_tau,
        };
        let row_half = 2 * p.k_nu + 2 * p.k_hat;
        let full_rows = scheme == Scheme::SisoFracFull;

        let (k_p, l_p) = p.pilot.unwrap_or_else(|| {
            let k = if full_rows { n / 2 } else { clamp_range(n / 2, row_half, (n - 1).saturating_sub(row_half)) };
            let l = clamp_range(m / 2, p.l_tau, (m - 1).saturating_sub(width_right));
            (k, l)
        });

        let mut b = Bounds { violations: Vec::new(), dims: &dims };
        b.require(k_p < n, || format!("0 <= k_p <= N-1 (k_p={k_p})"));
        b.require(l_p >= p.l_tau, || format!("0 <= l_p - l_tau (l_p={l_p}, l_tau={})", p.l_tau));
        b.require(l_p + width_right < m, || {
            format!("l_p + {width_right} <= M-1 (l_p={l_p}, l_tau={}, streams={streams})", p.l_tau)
        });
        if !full_rows {
            let lbl = if p.k_hat > 0 { "2k_nu-2k_hat" } else { "2k_nu" };
            b.require(k_p >= row_half, || format!("0 <= k_p-{lbl} (k_p={k_p}, k_nu={}, k_hat={})", p.k_nu, p.k_hat));
            b.require(k_p + row_half < n, || {
                format!("k_p+{} <= N-1 (k_p={k_p}, k_nu={}, k_hat={})", lbl.replace('-', "+"), p.k_nu, p.k_hat)
            });
        }
        b.finish()?;

        let pilots: Vec<(usize, usize)> = match scheme {
            Scheme::Mimo | Scheme::MultiUserUplink => {
                (0..streams).map(|s| (k_p, l_p + s * (p.l_tau + 1))).collect()
            }
            _ => vec![(k_p, l_p)],
        };

        let in_block = |k: usize, l: usize| {
            let row_ok = full_rows || (k + row_half >= k_p && k <= k_p + row_half);
            row_ok && l + p.l_tau >= l_p && l <= l_p + width_right
        };

        // data ownership outside the pilot block
        let user_gap = p.user_gap.unwrap_or(p.l_tau);
        let column_owner: Vec<CellKind> = match scheme {
            Scheme::MultiUserUplink => {
                (0..m).map(|l| CellKind::Data(Some(l * streams / m))).collect()
            }
            Scheme::MultiUserDownlink if streams > 1 => {
                let gaps = streams * user_gap;
                if m < gaps + streams {
                    return Err(Error::LayoutBound(format!(
                        "N_u*(gap+1) <= M (N_u={streams}, gap={user_gap}, M={m})"
                    )));
                }
                let usable = m - gaps;
                let mut owner = Vec::with_capacity(m);
                for u in 0..streams {
                    let width = usable / streams + usize::from(u < usable % streams);
                    owner.extend(std::iter::repeat_n(CellKind::Data(Some(u)), width));
                    owner.extend(std::iter::repeat_n(CellKind::UserGuard, user_gap));
                }
                owner
            }
            Scheme::MultiUserDownlink => vec![CellKind::Data(Some(0)); m],
            _ => vec![CellKind::Data(None); m],
        };

        let mut kinds = Vec::with_capacity(dims.cells());
        for k in 0..n {
            for (l, &owner) in column_owner.iter().enumerate() {
                let kind = if let Some(s) = pilots.iter().position(|&pc| pc == (k, l)) {
                    CellKind::Pilot(s)
                } else if in_block(k, l) {
                    CellKind::Guard
                } else {
                    owner
                };
                kinds.push(kind);
            }
        }

        let data_cells = (0..streams)
            .map(|s| {
                kinds
                    .iter()
                    .enumerate()
                    .filter(|(_, kind)| match kind {
                        CellKind::Data(None) => true,
                        CellKind::Data(Some(u)) => *u == s,
                        _ => false,
                    })
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();

        let est_rows = |k: usize| match scheme {
            Scheme::SisoFracFull => true,
            Scheme::SisoInteger => k + p.k_nu >= k_p && k <= k_p + p.k_nu,
            _ => k + p.k_nu + p.k_hat >= k_p && k <= k_p + p.k_nu + p.k_hat,
        };
        let est_regions: Vec<Vec<usize>> = pilots
            .iter()
            .map(|&(_, lp)| {
                let mut cells = Vec::new();
                for k in (0..n).filter(|&k| est_rows(k)) {
                    for l in lp..=lp + p.l_tau {
                        cells.push(dims.index(k, l));
                    }
                }
                cells
            })
            .collect();

        let mut in_est = vec![false; dims.cells()];
        for &i in est_regions.iter().flatten() {
            in_est[i] = true;
        }
        let det_region = (0..dims.cells()).filter(|&i| !in_est[i]).collect();

        Ok(Self {
            scheme,
            dims,
            pilots,
            l_tau: p.l_tau,
            k_nu: p.k_nu,
            k_hat: p.k_hat,
            n_streams: streams,
            user_gap,
            kinds,
            data_cells,
            est_regions,
            det_region,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn pilots(&self) -> &[(usize, usize)] {
        &self.pilots
    }

    /// Pilot of the first stream.
    pub fn pilot(&self) -> (usize, usize) {
        self.pilots[0]
    }

    pub fn l_tau(&self) -> usize {
        self.l_tau
    }

    pub fn k_nu(&self) -> usize {
        self.k_nu
    }

    pub fn k_hat(&self) -> usize {
        self.k_hat
    }

    pub fn n_streams(&self) -> usize {
        self.n_streams
    }

    pub fn user_gap(&self) -> usize {
        self.user_gap
    }

    pub fn kind(&self, k: usize, l: usize) -> CellKind {
        self.kinds[self.dims.index(k, l)]
    }

    pub fn kinds(&self) -> &[CellKind] {
        &self.kinds
    }

    /// Flat indices of the data cells of `stream`, in fill order.
    pub fn data_cells(&self, stream: usize) -> &[usize] {
        &self.data_cells[stream]
    }

    /// One estimation region per pilot, as flat row-major indices.
    pub fn est_regions(&self) -> &[Vec<usize>] {
        &self.est_regions
    }

    pub fn est_region(&self, pilot: usize) -> &[usize] {
        &self.est_regions[pilot]
    }

    pub fn det_region(&self) -> &[usize] {
        &self.det_region
    }

    fn count(&self, pred: impl Fn(&CellKind) -> bool) -> usize {
        self.kinds.iter().filter(|k| pred(k)).count()
    }

    pub fn guard_count(&self) -> usize {
        self.count(|k| *k == CellKind::Guard)
    }

    pub fn user_guard_count(&self) -> usize {
        self.count(|k| *k == CellKind::UserGuard)
    }

    /// Pilot plus guard cells around the pilots.
    pub fn overhead_count(&self) -> usize {
        self.count(|k| matches!(k, CellKind::Pilot(_) | CellKind::Guard))
    }

    pub fn overhead_fraction(&self) -> f64 {
        self.overhead_count() as f64 / self.dims.cells() as f64
    }

    /// Closed-form overhead for this layout's parameters.
    pub fn table_overhead(&self) -> usize {
        table_overhead(self.scheme, self.dims.n, self.l_tau, self.k_nu, self.k_hat, self.n_streams)
    }

    /// Transmit frame of one stream: pilot, zero guards, data in fill order.
    pub fn place_symbols<T: Real>(
        &self,
        stream: usize,
        pilot_amp: Complex<T>,
        data: &[Complex<T>],
    ) -> Result<DdFrame<T>> {
        let cells = &self.data_cells[stream];
        if data.len() != cells.len() {
            return Err(Error::DataLength { expected: cells.len(), got: data.len() });
        }
        let mut frame = DdFrame::zeros(self.dims);
        let (kp, lp) = self.pilots[stream.min(self.pilots.len() - 1)];
        frame[(kp, lp)] = pilot_amp;
        let out = frame.cells_mut();
        for (&i, &d) in cells.iter().zip(data) {
            out[i] = d;
        }
        Ok(frame)
    }

    pub fn extract_data<T: Real>(&self, stream: usize, frame: &DdFrame<T>) -> Result<Vec<Complex<T>>> {
        frame.check_dims(&self.dims)?;
        Ok(self.data_cells[stream].iter().map(|&i| frame.cells()[i]).collect())
    }

    pub fn split_rx<T: Real>(&self, rx: &DdFrame<T>) -> Result<RxSplit<T>> {
        rx.check_dims(&self.dims)?;
        let c = rx.cells();
        Ok(RxSplit {
            est: self.est_regions.iter().map(|r| r.iter().map(|&i| c[i]).collect()).collect(),
            det: self.det_region.iter().map(|&i| c[i]).collect(),
        })
    }

    pub fn summary(&self) -> LayoutSummary {
        let pilots = self.count(|k| matches!(k, CellKind::Pilot(_)));
        LayoutSummary {
            scheme: self.scheme,
            n: self.dims.n,
            m: self.dims.m,
            pilots,
            guards: self.guard_count(),
            user_guards: self.user_guard_count(),
            data: self.count(|k| matches!(k, CellKind::Data(_))),
            overhead: self.overhead_count(),
            fraction: self.overhead_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutSummary {
    pub scheme: Scheme,
    pub n: usize,
    pub m: usize,
    pub pilots: usize,
    pub guards: usize,
    pub user_guards: usize,
    pub data: usize,
    pub overhead: usize,
    pub fraction: f64,
}

impl LayoutSummary {
    pub const HEADER: &'static str =
        "scheme                N     M  pilots  guards  user_gaps    data  overhead  percent";
}

impl fmt::Display for LayoutSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<18} {:>5} {:>5} {:>7} {:>7} {:>10} {:>7} {:>9} {:>7.2}%",
            self.scheme.name(),
            self.n,
            self.m,
            self.pilots,
            self.guards,
            self.user_guards,
            self.data,
            self.overhead,
            100.0 * self.fraction
        )
    }
}
