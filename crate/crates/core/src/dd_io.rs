//! Delay-Doppler input-output relations and additive noise.
//!
//! All relations are circular in both grid axes. Tap phases use the grid's
//! `NT·MΔf` product, so with `TΔf = 1` the coupling term is `e^{−j2πk'l'/(NM)}`.

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{DopplerMode, Tap, TapSet};
use crate::error::{Error, Result};
use crate::grid::{DdFrame, GridDims};
use crate::scalar::{cis, wrap, Real};

/// Noise level and the pilot amplitude tied to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma2: f64,
    pub snr_d_db: f64,
    pub snr_p_db: f64,
    pub pilot_amp: f64,
}

impl NoiseModel {
    /// Unit-energy data and unit-power channel: `σ² = 10^{−SNR_d/10}`,
    /// `|x_p| = σ·10^{SNR_p/20}`.
    pub fn from_snr(snr_d_db: f64, snr_p_db: f64) -> Self {
        let sigma2 = 10f64.powf(-snr_d_db / 10.0);
        Self { sigma2, snr_d_db, snr_p_db, pilot_amp: sigma2.sqrt() * 10f64.powf(snr_p_db / 20.0) }
    }

    /// Noise-free model with a fixed pilot amplitude.
    pub fn noiseless(pilot_amp: f64) -> Self {
        Self { sigma2: 0.0, snr_d_db: f64::INFINITY, snr_p_db: f64::INFINITY, pilot_amp }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Shifts `x` by one path and accumulates `coef(k, l)·x[[k−k']_N, [l−l']_M]` into `y`.
fn accumulate_shift<T: Real>(
    y: &mut [Complex<T>],
    x: &DdFrame<T>,
    doppler: isize,
    delay: usize,
    mut coef: impl FnMut(usize, usize) -> Complex<T>,
) {
    let dims = x.dims();
    let (n, m) = (dims.n, dims.m);
    let d = delay % m;
    let src = x.cells();
    for k in 0..n {
        let sk = wrap(k as isize - doppler, n);
        let row_in = &src[sk * m..(sk + 1) * m];
        let row_out = &mut y[k * m..(k + 1) * m];
        for (l, out) in row_out.iter_mut().enumerate() {
            let sl = (l + m - d) % m;
            *out = *out + coef(k, l) * row_in[sl];
        }
    }
}

/// Ideal-pulse relation with integer Doppler taps.
pub fn apply_ideal_integer<T: Real>(x: &DdFrame<T>, taps: &TapSet<T>) -> Result<DdFrame<T>> {
    if taps.mode == DopplerMode::Fractional {
        return Err(Error::FractionalTaps);
    }
    let dims = x.dims();
    let mut y = DdFrame::zeros(dims);
    for tap in &taps.taps {
        let g = tap.coupled_gain(&dims);
        accumulate_shift(y.cells_mut(), x, tap.doppler, tap.delay, |_, _| g);
    }
    Ok(y)
}

/// Gain `h̄[k', l', κ', q]` coupling `x[[k−k'+q]_N, ·]` into `y[k, ·]` under fractional Doppler.
///
/// The removable singularity at `q + κ' = 0` returns its limit, the integer-Doppler gain.
pub fn fractional_gain<T: Real>(
    h: Complex<T>,
    doppler: isize,
    delay: usize,
    kappa: T,
    q: usize,
    dims: &GridDims,
) -> Complex<T> {
    let tap = Tap::fractional(delay, doppler, kappa, h);
    let coupled = tap.coupled_gain(dims);
    let qf = T::of_usize(q);
    if (qf + kappa).abs() < T::of(1e-12) {
        return coupled;
    }
    let nf = T::of_usize(dims.n);
    let z = -qf - kappa;
    // e^{j2π(−q−κ')} − 1 with the integer part dropped so κ' = 0 gives an exact zero
    let numer = cis(-T::TAU() * kappa) - Complex::one();
    let denom = (cis(T::TAU() * z / nf) - Complex::one()).scale(nf);
    numer / denom * coupled
}

/// Ideal-pulse relation with fractional Doppler (integer taps are the `κ' = 0` case).
pub fn apply_ideal_fractional<T: Real>(x: &DdFrame<T>, taps: &TapSet<T>) -> DdFrame<T> {
    let dims = x.dims();
    let n = dims.n;
    let mut y = DdFrame::zeros(dims);
    for tap in &taps.taps {
        for q in 0..n {
            let g = fractional_gain(tap.gain, tap.doppler, tap.delay, tap.kappa, q, &dims);
            if g.is_zero() {
                continue;
            }
            // x[[k − k' + q]_N] is a shift by (k' − q)
            accumulate_shift(y.cells_mut(), x, tap.doppler - q as isize, tap.delay, |_, _| g);
        }
    }
    y
}

/// Known per-cell phase `α` of the rectangular-pulse relation.
pub fn rect_phase<T: Real>(k: usize, l: usize, doppler: isize, delay: usize, dims: &GridDims) -> Complex<T> {
    let (n, m) = (dims.n, dims.m);
    let nf = T::of_usize(n);
    let dl = T::of(l as f64 - delay as f64);
    let base = cis(T::TAU() * dl / T::of_usize(m) * T::of(doppler as f64) / nf);
    if l >= delay {
        base
    } else {
        let kk = T::of_usize(wrap(k as isize - doppler, n));
        base * cis(-T::TAU() * kk / nf).scale((nf - T::one()) / nf)
    }
}

/// Rectangular-pulse relation for integer Doppler: each path contributes
/// `h·α[k, l]·x[[k−k']_N, [l−l']_M]` with `h` the raw path gain.
pub fn apply_rect_integer<T: Real>(x: &DdFrame<T>, taps: &TapSet<T>) -> Result<DdFrame<T>> {
    if taps.mode == DopplerMode::Fractional {
        return Err(Error::FractionalTaps);
    }
    let dims = x.dims();
    let mut y = DdFrame::zeros(dims);
    for tap in &taps.taps {
        let h = tap.gain;
        accumulate_shift(y.cells_mut(), x, tap.doppler, tap.delay, |k, l| {
            h * rect_phase(k, l, tap.doppler, tap.delay, &dims)
        });
    }
    Ok(y)
}

/// Frame of i.i.d. `CN(0, 1)` samples.
pub fn unit_noise<T: Real, R: Rng + ?Sized>(dims: GridDims, rng: &mut R) -> DdFrame<T>
where
    StandardNormal: Distribution<T>,
{
    let h = T::of(std::f64::consts::FRAC_1_SQRT_2);
    let cells = (0..dims.cells())
        .map(|_| {
            let re: T = StandardNormal.sample(rng);
            let im: T = StandardNormal.sample(rng);
            Complex::new(re * h, im * h)
        })
        .collect();
    DdFrame::from_cells(dims, cells).expect("sized to dims")
}

/// Adds `CN(0, σ²)` noise to every cell; `σ² = 0` returns the input untouched.
pub fn add_awgn<T: Real, R: Rng + ?Sized>(y: &DdFrame<T>, noise: &NoiseModel, rng: &mut R) -> DdFrame<T>
where
    StandardNormal: Distribution<T>,
{
    if noise.sigma2 == 0.0 {
        return y.clone();
    }
    let w = unit_noise::<T, R>(y.dims(), rng);
    y.add(&w.scale(Complex::new(T::of(noise.sigma()), T::zero())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    type C = Complex<f64>;

    fn random_frame(dims: GridDims, rng: &mut ChaCha8Rng) -> DdFrame<f64> {
        unit_noise(dims, rng)
    }

    /// Dense `NM × NM` channel matrix built column by column from the
    /// relation's definition, independent of the shift kernel.
    fn dense_fractional(taps: &TapSet<f64>, dims: &GridDims) -> Vec<C> {
        let (n, m) = (dims.n, dims.m);
        let nm = n * m;
        let mut h = vec![C::zero(); nm * nm];
        for t in &taps.taps {
            for k in 0..n {
                for l in 0..m {
                    for q in 0..n {
                        let sk = (k as isize - t.doppler + q as isize).rem_euclid(n as isize) as usize;
                        let sl = (l as isize - t.delay as isize).rem_euclid(m as isize) as usize;
                        // closed form evaluated directly, no limit shortcut except at the singular point
                        let z = -(q as f64) - t.kappa;
                        let ratio = if z.abs() < 1e-12 {
                            C::new(1.0, 0.0)
                        } else {
                            (C::from_polar(1.0, 2.0 * PI * z) - 1.0)
                                / (C::from_polar(n as f64, 2.0 * PI * z / n as f64) - n as f64)
                        };
                        let ph = C::from_polar(
                            1.0,
                            -2.0 * PI * (t.doppler as f64 + t.kappa) * t.delay as f64 / nm as f64,
                        );
                        h[(k * m + l) * nm + sk * m + sl] += ratio * t.gain * ph;
                    }
                }
            }
        }
        h
    }

    fn matvec(h: &[C], x: &[C]) -> Vec<C> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|j| h[i * n + j] * x[j]).sum()).collect()
    }

    fn max_diff(a: &[C], b: &[C]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_channel() {
        let dims = GridDims::square(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_frame(dims, &mut rng);
        let taps = TapSet::integer([Tap::new(0, 0, C::new(1.0, 0.0))]);
        let y = apply_ideal_integer(&x, &taps).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn single_shifted_path_phase() {
        let dims = GridDims::square(4, 4);
        let x = DdFrame::delta(dims, 0, 0, C::new(1.0, 0.0));
        let taps = TapSet::integer([Tap::new(1, 1, C::new(1.0, 0.0))]);
        let y = apply_ideal_integer(&x, &taps).unwrap();
        let want = C::from_polar(1.0, -PI / 8.0);
        for k in 0..4 {
            for l in 0..4 {
                let expect = if (k, l) == (1, 1) { want } else { C::zero() };
                assert!((y[(k, l)] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn integer_matches_dense_oracle() {
        let dims = GridDims::square(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_frame(dims, &mut rng);
        let taps = TapSet::integer([
            Tap::new(0, 1, C::new(0.7, 0.1)),
            Tap::new(2, -2, C::new(-0.3, 0.4)),
            Tap::new(3, 0, C::new(0.2, -0.5)),
        ]);
        let y = apply_ideal_integer(&x, &taps).unwrap();
        let want = matvec(&dense_fractional(&taps, &dims), x.cells());
        assert!(max_diff(y.cells(), &want) < 1e-12);
    }

    #[test]
    fn integer_rejects_fractional_mode() {
        let dims = GridDims::square(4, 4);
        let x = DdFrame::<f64>::zeros(dims);
        let taps = TapSet::fractional(vec![Tap::fractional(0, 0, 0.3, C::new(1.0, 0.0))]);
        assert!(matches!(apply_ideal_integer(&x, &taps), Err(Error::FractionalTaps)));
        assert!(matches!(apply_rect_integer(&x, &taps), Err(Error::FractionalTaps)));
    }

    #[test]
    fn fractional_gain_values() {
        let dims = GridDims::square(8, 8);
        let one = C::new(1.0, 0.0);
        assert!((fractional_gain(one, 0, 0, 0.0, 0, &dims) - one).norm() < 1e-15);
        for q in 1..8 {
            assert_eq!(fractional_gain(one, 2, 3, 0.0, q, &dims), C::zero());
        }
        let g = fractional_gain(one, 0, 0, 0.5, 0, &dims);
        // (e^{−jπ} − 1) / (8e^{−jπ/8} − 8)
        let want = C::new(-2.0, 0.0) / (C::from_polar(8.0, -PI / 8.0) - 8.0);
        assert!((g - want).norm() < 1e-14);
        assert!((g - C::new(0.1250, -0.6284)).norm() < 1e-4);
    }

    #[test]
    fn fractional_matches_dense_oracle() {
        let dims = GridDims::square(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_frame(dims, &mut rng);
        let taps = TapSet::fractional(vec![
            Tap::fractional(1, 1, 0.31, C::new(0.6, -0.2)),
            Tap::fractional(3, -2, -0.42, C::new(0.1, 0.5)),
        ]);
        let y = apply_ideal_fractional(&x, &taps);
        let want = matvec(&dense_fractional(&taps, &dims), x.cells());
        assert!(max_diff(y.cells(), &want) < 1e-12);
    }

    #[test]
    fn fractional_reduces_to_integer() {
        let dims = GridDims::square(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_frame(dims, &mut rng);
        let taps = TapSet::integer([Tap::new(1, 2, C::new(0.3, 0.3)), Tap::new(2, -1, C::new(-0.5, 0.1))]);
        let yi = apply_ideal_integer(&x, &taps).unwrap();
        let yf = apply_ideal_fractional(&x, &taps);
        assert!(yi.max_abs_diff(&yf) < 1e-12);
    }

    #[test]
    fn fractional_leaks_over_all_doppler_bins() {
        let dims = GridDims::square(8, 8);
        let x = DdFrame::delta(dims, 0, 0, C::new(1.0, 0.0));
        let taps = TapSet::fractional(vec![Tap::fractional(2, 1, 0.4, C::new(1.0, 0.0))]);
        let y = apply_ideal_fractional(&x, &taps);
        for k in 0..8 {
            assert!(y[(k, 2)].norm() > 1e-6);
            for l in (0..8).filter(|&l| l != 2) {
                assert!(y[(k, l)].norm() < 1e-15);
            }
        }
    }

    #[test]
    fn kappa_continuity() {
        let dims = GridDims::square(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_frame(dims, &mut rng);
        let h = C::new(0.4, -0.7);
        let yi = apply_ideal_integer(&x, &TapSet::integer([Tap::new(2, 1, h)])).unwrap();
        let yf = apply_ideal_fractional(&x, &TapSet::fractional(vec![Tap::fractional(2, 1, 1e-9, h)]));
        assert!(yi.max_abs_diff(&yf) <= 1e-6);
    }

    #[test]
    fn geometric_series_consistency() {
        // A Doppler-constant input column sees the sum of all q-coefficients;
        // at κ' = 0 that sum is the integer-Doppler gain.
        for n in [4usize, 8, 16] {
            let dims = GridDims::square(n, 4);
            for &kappa in &[0.0, 0.25, -0.4, 0.5] {
                let sum: C = (0..n).map(|q| fractional_gain(C::new(1.0, 0.0), 1, 2, kappa, q, &dims)).sum();
                let direct: C = (0..n)
                    .map(|q| {
                        let z = -(q as f64) - kappa;
                        if z.abs() < 1e-12 {
                            C::new(1.0, 0.0)
                        } else {
                            (C::from_polar(1.0, 2.0 * PI * z) - 1.0)
                                / (C::from_polar(n as f64, 2.0 * PI * z / n as f64) - n as f64)
                        }
                    })
                    .sum::<C>()
                    * Tap::fractional(2, 1, kappa, C::new(1.0, 0.0)).coupled_gain(&dims);
                assert!((sum - direct).norm() < 1e-12, "n={n} kappa={kappa}");
                if kappa == 0.0 {
                    let int = Tap::new(2, 1, C::new(1.0, 0.0)).coupled_gain(&dims);
                    assert!((sum - int).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rect_phase_branches() {
        let dims = GridDims::square(4, 4);
        let a: C = rect_phase(2, 1, 1, 1, &dims);
        assert!((a - C::new(1.0, 0.0)).norm() < 1e-15);
        for k in 0..4 {
            for l in 0..4 {
                let a: C = rect_phase(k, l, 1, 2, &dims);
                let want = if l >= 2 { 1.0 } else { 0.75 };
                assert!((a.norm() - want).abs() < 1e-12);
            }
        }
        let a: C = rect_phase(0, 0, 1, 1, &dims);
        let want = C::from_polar(0.75, 2.0 * PI * (-0.25) * 0.25) * C::from_polar(1.0, -2.0 * PI * 0.75);
        assert!((a - want).norm() < 1e-15);
    }

    #[test]
    fn rect_with_zero_delay_taps_is_phase_rotated_ideal() {
        let dims = GridDims::square(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_frame(dims, &mut rng);
        let taps = TapSet::integer([Tap::new(0, 2, C::new(0.5, 0.5))]);
        let yr = apply_rect_integer(&x, &taps).unwrap();
        let yi = apply_ideal_integer(&x, &taps).unwrap();
        for k in 0..8 {
            for l in 0..8 {
                let ph = C::from_polar(1.0, 2.0 * PI * l as f64 * 2.0 / 64.0);
                assert!((yr[(k, l)] - yi[(k, l)] * ph).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rect_matches_loop_oracle() {
        let dims = GridDims::square(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random_frame(dims, &mut rng);
        let taps = TapSet::integer([Tap::new(1, 1, C::new(0.5, 0.1)), Tap::new(3, -2, C::new(-0.2, 0.6))]);
        let y = apply_rect_integer(&x, &taps).unwrap();
        let (n, m) = (8usize, 8usize);
        for k in 0..n {
            for l in 0..m {
                let mut acc = C::zero();
                for t in &taps.taps {
                    let kp = t.doppler as f64;
                    let lp = t.delay as f64;
                    let src_k = (k as isize - t.doppler).rem_euclid(n as isize) as usize;
                    let src_l = (l as isize - t.delay as isize).rem_euclid(m as isize) as usize;
                    let mut alpha = C::from_polar(1.0, 2.0 * PI * (l as f64 - lp) / m as f64 * kp / n as f64);
                    if l < t.delay {
                        alpha *= C::from_polar((n as f64 - 1.0) / n as f64, -2.0 * PI * src_k as f64 / n as f64);
                    }
                    acc += t.gain * alpha * x[(src_k, src_l)];
                }
                assert!((y[(k, l)] - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn linearity() {
        let dims = GridDims::square(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x1 = random_frame(dims, &mut rng);
        let x2 = random_frame(dims, &mut rng);
        let (a, b) = (C::new(0.3, -1.2), C::new(-0.7, 0.4));
        let taps = TapSet::fractional(vec![Tap::fractional(1, 2, 0.2, C::new(0.8, 0.0))]);
        let lhs = apply_ideal_fractional(&x1.scale(a).add(&x2.scale(b)), &taps);
        let rhs = apply_ideal_fractional(&x1, &taps).scale(a).add(&apply_ideal_fractional(&x2, &taps).scale(b));
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn delay_shift_covariance() {
        let dims = GridDims::square(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_frame(dims, &mut rng);
        let mut shifted = DdFrame::zeros(dims);
        for k in 0..8 {
            for l in 0..8 {
                shifted[(k, (l + 1) % 8)] = x[(k, l)];
            }
        }
        let h = C::new(0.9, 0.2);
        let a = apply_ideal_integer(&shifted, &TapSet::integer([Tap::new(2, 3, h)])).unwrap();
        let b = apply_ideal_integer(&x, &TapSet::integer([Tap::new(3, 3, h)])).unwrap();
        let ratio = Tap::new(2, 3, h).coupled_gain(&dims) / Tap::new(3, 3, h).coupled_gain(&dims);
        assert!(a.max_abs_diff(&b.scale(ratio)) < 1e-12);
    }

    #[test]
    fn noise_statistics_and_determinism() {
        let dims = GridDims::square(1000, 1000);
        let y = DdFrame::<f64>::zeros(dims);
        let nm = NoiseModel { sigma2: 1.0, snr_d_db: 0.0, snr_p_db: 0.0, pilot_amp: 1.0 };
        let w = add_awgn(&y, &nm, &mut ChaCha8Rng::seed_from_u64(42));
        let var = w.energy() / dims.cells() as f64;
        assert!((var - 1.0).abs() < 0.01, "{var}");
        let w2 = add_awgn(&y, &nm, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(w, w2);
        let silent = add_awgn(&w, &NoiseModel::noiseless(1.0), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(silent, w);
    }

    #[test]
    fn pilot_amplitude_from_snr() {
        let nm = NoiseModel::from_snr(10.0, 40.0);
        assert!((nm.sigma2 - 0.1).abs() < 1e-15);
        assert!((nm.pilot_amp - 0.1f64.sqrt() * 100.0).abs() < 1e-12);
    }

    #[test]
    fn single_precision_relation() {
        let dims = GridDims::square(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x64 = random_frame(dims, &mut rng);
        let x32 = DdFrame::from_cells(dims, x64.cells().iter().map(|c| Complex::new(c.re as f32, c.im as f32)).collect()).unwrap();
        let t64 = TapSet::fractional(vec![Tap::fractional(1, 1, 0.3, C::new(0.5, 0.5))]);
        let t32 = TapSet::fractional(vec![Tap::fractional(1, 1, 0.3f32, Complex::new(0.5f32, 0.5))]);
        let y64 = apply_ideal_fractional(&x64, &t64);
        let y32 = apply_ideal_fractional(&x32, &t32);
        for (a, b) in y64.cells().iter().zip(y32.cells()) {
            assert!((a.re - b.re as f64).abs() < 1e-4 && (a.im - b.im as f64).abs() < 1e-4);
        }
    }
}
