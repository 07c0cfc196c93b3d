//! Acceptance checks, one line per criterion. Exits nonzero if any fails.
//!
//! Run with `cargo test -p otfs-lab --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex;
use otfs_lab::channel::doppler_tap_bound;
use otfs_lab::dd_io::{apply_ideal_fractional, apply_ideal_integer, apply_rect_integer, unit_noise};
use otfs_lab::detector::{map_detect_exhaustive, mp_detect, MpConfig, Row, SparseSystem};
use otfs_lab::estimator::{estimate_fractional, estimate_integer};
use otfs_lab::harness::{run_experiment, CsiMode, PilotSnr, ProfileSource, SimConfig};
use otfs_lab::layout::table_overhead;
use otfs_lab::tf_oracle::full_chain;
use otfs_lab::{Alphabet, DdFrame, GridDims, LayoutParams, NoiseModel, PowerDelayProfile, Scheme, Tap, TapSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex<f64>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn lte() -> GridDims {
    GridDims::new(128, 512, 15e3).unwrap()
}

fn cn(rng: &mut ChaCha8Rng) -> C {
    let d: DdFrame<f64> = unit_noise(GridDims::square(2, 2), rng);
    d.cells()[0]
}

fn random_integer_taps(rng: &mut ChaCha8Rng, paths: usize, l_max: usize, k_max: isize) -> TapSet<f64> {
    let mut seen = Vec::new();
    let mut taps = Vec::new();
    while taps.len() < paths {
        let l = rng.random_range(0..=l_max);
        let k = rng.random_range(-(k_max as i64)..=k_max as i64) as isize;
        if seen.contains(&(l, k)) {
            continue;
        }
        seen.push((l, k));
        taps.push(Tap::new(l, k, cn(rng)));
    }
    TapSet::integer(taps)
}

/// Four taps on delay bins 0, 1, 2, 4 of a 32-bin delay axis.
fn desk_config(csi: CsiMode, snr_d_db: Vec<f64>) -> SimConfig {
    let bin_ns = 1e9 / (32.0 * 15e3);
    let pdp = PowerDelayProfile::from_ns_db(&[(0.0, 0.0), (bin_ns, -1.5), (2.0 * bin_ns, -3.0), (4.0 * bin_ns, -6.0)])
        .unwrap();
    let mut cfg = SimConfig {
        n: 16,
        m: 32,
        l_tau: Some(4),
        k_nu: Some(2),
        speed_kmph: 500.0,
        carrier_hz: 4e9,
        profile: ProfileSource::Custom(pdp),
        snr_d_db,
        snr_p: PilotSnr::Offset(25.0),
        threshold: 3.0,
        csi,
        ..SimConfig::default()
    };
    let bits_per_frame = cfg.prepare().unwrap().layout.data_cells(0).len() * 2;
    cfg.trials = 250_000usize.div_ceil(bits_per_frame);
    cfg
}

/// SNR where log10(BER) crosses log10(target), linearly interpolated.
fn crossing(points: &[(f64, f64)], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        if b0 >= target && b1 < target && b1 > 0.0 {
            let (l0, l1, lt) = (b0.log10(), b1.log10(), target.log10());
            Some(s0 + (s1 - s0) * (l0 - lt) / (l0 - l1))
        } else {
            None
        }
    })
}

fn c1_overhead_tables() -> Verdict {
    let dims = lte();
    let mut checked = 0;
    for scheme in Scheme::ALL {
        for l_tau in [1, 5, 20, 40] {
            for k_nu in [0, 1, 4, 8] {
                for k_hat in [0, 2, 5] {
                    for streams in [1, 2, 3] {
                        let Ok(lay) = LayoutParams::new(scheme, dims, l_tau, k_nu).k_hat(k_hat).streams(streams).build()
                        else {
                            continue;
                        };
                        let want = table_overhead(scheme, dims.n, l_tau, k_nu, k_hat, streams);
                        if lay.overhead_count() != want {
                            return verdict(false, format!("{scheme} l_tau={l_tau} k_nu={k_nu}: {} != {want}", lay.overhead_count()));
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    let build = |s, k_hat, streams| LayoutParams::new(s, dims, 20, 4).k_hat(k_hat).streams(streams).build().unwrap();
    let worked = [
        (build(Scheme::SisoInteger, 0, 1), 697, 0.01),
        (build(Scheme::SisoFracFull, 0, 1), 5248, 0.08),
        (build(Scheme::SisoFracReduced, 5, 1), 1517, 0.023),
        (build(Scheme::SisoFracReduced, 2, 1), 1025, 0.015),
        (build(Scheme::Mimo, 0, 3), 1411, 0.0215),
    ];
    for (lay, want, pct) in &worked {
        let frac = lay.overhead_fraction();
        if lay.overhead_count() != *want || (frac - pct).abs() > 0.1 * pct {
            return verdict(false, format!("{}: {} ({:.3}%)", lay.scheme(), lay.overhead_count(), 100.0 * frac));
        }
    }
    verdict(checked > 200, format!("{checked} layouts match; 697/5248/1517/1025/1411 reproduced"))
}

fn c2_equation_equivalence() -> Verdict {
    let dims = GridDims::square(16, 16);
    let (n, m) = (16usize, 16usize);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_brute, mut worst_frac) = (0f64, 0f64);
    for _ in 0..50 {
        let p = rng.random_range(1..=6);
        let taps = random_integer_taps(&mut rng, p, 5, 4);
        let x: DdFrame<f64> = unit_noise(dims, &mut rng);
        let y = apply_ideal_integer(&x, &taps).unwrap();
        for k in 0..n {
            for l in 0..m {
                let mut acc = C::new(0.0, 0.0);
                for t in &taps.taps {
                    let h_hat = t.gain * C::from_polar(1.0, -2.0 * PI * (t.doppler as f64) * (t.delay as f64) / (n * m) as f64);
                    let sk = (k as isize - t.doppler).rem_euclid(n as isize) as usize;
                    let sl = (l + m - t.delay) % m;
                    acc += h_hat * x[(sk, sl)];
                }
                worst_brute = worst_brute.max((acc - y[(k, l)]).norm());
            }
        }
        let frac = TapSet::fractional(taps.taps.clone());
        worst_frac = worst_frac.max(apply_ideal_fractional(&x, &frac).max_abs_diff(&y));
    }
    verdict(
        worst_brute <= 1e-12 && worst_frac <= 1e-12,
        format!("brute-force max err {worst_brute:.2e}, κ=0 fractional max err {worst_frac:.2e}"),
    )
}

fn c3_oracle_chain() -> Verdict {
    let dims = GridDims::square(16, 16);
    let l_tau = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noiseless = NoiseModel::noiseless(1.0);
    let (mut worst_tail, mut worst_head) = (0f64, 0f64);
    for _ in 0..20 {
        let mut taps = random_integer_taps(&mut rng, 3, l_tau, 3);
        taps.taps.push(Tap::new(l_tau, 1, cn(&mut rng)));
        let x: DdFrame<f64> = unit_noise(dims, &mut rng);
        let chain = full_chain(&x, &taps, &noiseless, &mut rng);
        let rect = apply_rect_integer(&x, &taps).unwrap();
        let (mut head_diff, mut head_ref) = (0f64, 0f64);
        for k in 0..16 {
            for l in 0..16 {
                let d = (chain[(k, l)] - rect[(k, l)]).norm();
                if l >= l_tau {
                    worst_tail = worst_tail.max(d);
                } else {
                    head_diff = head_diff.max(d);
                    head_ref = head_ref.max(chain[(k, l)].norm());
                }
            }
        }
        worst_head = worst_head.max(head_diff / head_ref);
    }
    let x: DdFrame<f64> = unit_noise(dims, &mut rng);
    let ident = TapSet::integer([Tap::new(0, 0, C::new(1.0, 0.0))]);
    let id_err = full_chain(&x, &ident, &noiseless, &mut rng).max_abs_diff(&x);
    let limit = 5.0 / 16.0;
    verdict(
        worst_tail <= 1e-9 && worst_head <= limit && id_err <= 1e-10,
        format!("l≥l_τ max err {worst_tail:.2e}; l<l_τ rel err {worst_head:.3} (limit {limit:.3}); identity {id_err:.2e}"),
    )
}

fn c4_noiseless_estimation() -> Verdict {
    let dims = GridDims::square(32, 32);
    let (l_tau, k_nu) = (4, 3);
    let t = f64::MIN_POSITIVE;
    let xp = C::new(3.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let alphabet = Alphabet::<f64>::qpsk();
    let mut worst = 0f64;

    let int_layout = LayoutParams::new(Scheme::SisoInteger, dims, l_tau, k_nu).build().unwrap();
    let frac_layout = LayoutParams::new(Scheme::SisoFracFull, dims, l_tau, k_nu).build().unwrap();
    for trial in 0..40 {
        let fractional = trial % 2 == 1;
        let layout = if fractional { &frac_layout } else { &int_layout };
        let taps = random_integer_taps(&mut rng, 4, l_tau, k_nu as isize);
        let data: Vec<C> =
            (0..layout.data_cells(0).len()).map(|_| alphabet.point(rng.random_range(0..4))).collect();
        let x = layout.place_symbols(0, xp, &data).unwrap();
        let est = if fractional {
            let y = apply_ideal_fractional(&x, &TapSet::fractional(taps.taps.clone()));
            estimate_fractional(&layout.split_rx(&y).unwrap().est[0], layout, xp, t).unwrap()
        } else {
            let y = apply_ideal_integer(&x, &taps).unwrap();
            estimate_integer(&layout.split_rx(&y).unwrap().est[0], layout, 0, xp, t).unwrap()
        };
        if est.len() != taps.len() {
            return verdict(false, format!("trial {trial}: {} taps estimated, {} true", est.len(), taps.len()));
        }
        for tap in &taps.taps {
            let Some(g) = est.gain_at(tap.doppler, tap.delay) else {
                return verdict(false, format!("trial {trial}: missed tap ({}, {})", tap.doppler, tap.delay));
            };
            worst = worst.max((g - tap.coupled_gain(&dims)).norm());
        }
    }
    verdict(worst <= 1e-12, format!("40 channels (integer + full-guard fractional), max gain err {worst:.2e}"))
}

fn c5_false_alarm_calibration() -> Verdict {
    let dims = GridDims::square(64, 64);
    let layout = LayoutParams::new(Scheme::SisoInteger, dims, 10, 5).build().unwrap();
    let sigma = 0.37;
    let xp = C::new(1.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let per_frame = layout.est_region(0).len();
    let frames = 2_000_000usize.div_ceil(per_frame);
    let mut alarms = 0usize;
    for _ in 0..frames {
        let noise: DdFrame<f64> = unit_noise(dims, &mut rng);
        let y = noise.scale(C::new(sigma, 0.0));
        let est = estimate_integer(&layout.split_rx(&y).unwrap().est[0], &layout, 0, xp, 3.0 * sigma).unwrap();
        alarms += est.len();
    }
    let cells = (frames * per_frame) as f64;
    let p = (-9f64).exp();
    let rate = alarms as f64 / cells;
    let se = (p * (1.0 - p) / cells).sqrt();
    let z = (rate - p) / se;
    verdict(z.abs() <= 3.0, format!("{alarms} alarms over {cells:.0} cells: {rate:.4e} vs e⁻⁹={p:.4e} (z={z:+.2})"))
}

fn c6_detector_oracle() -> Verdict {
    let dims = GridDims::square(2, 2);
    let alphabet = Alphabet::<f64>::qpsk();
    let sigma2: f64 = 1e-2;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut agree, mut worse) = (0, 0);
    let instances = 200;
    for _ in 0..instances {
        let taps = random_integer_taps(&mut rng, 1, 1, 1);
        let tap = taps.taps[0];
        let idx: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
        let x = DdFrame::from_cells(dims, idx.iter().map(|&i| alphabet.point(i)).collect()).unwrap();
        let noise: DdFrame<f64> = unit_noise(dims, &mut rng);
        let y = apply_ideal_integer(&x, &taps).unwrap().add(&noise.scale(C::new(sigma2.sqrt(), 0.0)));
        let g = tap.coupled_gain(&dims);
        let rows = (0..4)
            .map(|cell| {
                let (k, l) = dims.coords(cell);
                let src = dims.index((k as isize - tap.doppler).rem_euclid(2) as usize, (l + 2 - tap.delay) % 2);
                Row { obs: y.cells()[cell], terms: vec![(src, g)] }
            })
            .collect();
        let sys = SparseSystem { rows, n_vars: 4, sigma2, alphabet: alphabet.clone() };
        let mp = mp_detect(&sys, &MpConfig::default()).decisions;
        let map = map_detect_exhaustive(&sys).unwrap();
        if mp == map {
            agree += 1;
        }
        if sys.residual(&map) > sys.residual(&mp) + 1e-12 {
            worse += 1;
        }
    }
    let share = agree as f64 / instances as f64;
    verdict(share >= 0.98 && worse == 0, format!("MP = MAP on {agree}/{instances}; MAP worse on {worse}"))
}

fn c7_estimated_vs_ideal() -> Verdict {
    let snrs: Vec<f64> = (0..=8).map(|i| 4.0 + 2.0 * i as f64).collect();
    let mut crossings = Vec::new();
    let mut bits = u64::MAX;
    for csi in [CsiMode::Ideal, CsiMode::Estimated] {
        let rows = match run_experiment(&desk_config(csi, snrs.clone())) {
            Ok(r) => r,
            Err(e) => return verdict(false, format!("{csi}: {e}")),
        };
        bits = bits.min(rows.iter().map(|r| r.bits).min().unwrap_or(0));
        let curve: Vec<(f64, f64)> = rows.iter().map(|r| (r.snr_d_db, r.ber)).collect();
        match crossing(&curve, 1e-2) {
            Some(s) => crossings.push(s),
            None => return verdict(false, format!("{csi} curve never crosses 1e-2: {curve:?}")),
        }
    }
    let gap = crossings[1] - crossings[0];
    verdict(
        gap.abs() <= 1.0 && bits >= 200_000,
        format!("1e-2 crossing: ideal {:.2} dB, estimated {:.2} dB, gap {gap:+.2} dB ({bits} bits/point)", crossings[0], crossings[1]),
    )
}

fn c8_threshold_direction() -> Verdict {
    let mut bers = Vec::new();
    let mut bits = u64::MAX;
    for t in [3.0, 0.1] {
        let mut cfg = desk_config(CsiMode::Estimated, vec![14.0]);
        cfg.snr_p = PilotSnr::Fixed(30.0);
        cfg.threshold = t;
        match run_experiment(&cfg) {
            Ok(rows) => {
                bits = bits.min(rows[0].bits);
                bers.push(rows[0].ber);
            }
            Err(e) => return verdict(false, e.to_string()),
        }
    }
    verdict(
        bers[0] <= bers[1] && bits >= 200_000,
        format!("SNR_d=14 dB, SNR_p=30 dB: BER(3σ)={:.3e}, BER(0.1σ)={:.3e}", bers[0], bers[1]),
    )
}

fn c9_doppler_taps() -> Verdict {
    let dims = lte();
    let got: Vec<usize> = [30.0, 120.0, 500.0].iter().map(|&v| doppler_tap_bound(v, 4e9, &dims)).collect();
    verdict(got == [1, 4, 16], format!("30/120/500 km/h → k_ν = {got:?}"))
}

fn main() -> ExitCode {
    type Check = (usize, &'static str, fn() -> Verdict, Duration);
    let checks: [Check; 9] = [
        (1, "overhead tables", c1_overhead_tables, Duration::from_secs(1)),
        (2, "equation equivalence", c2_equation_equivalence, Duration::from_secs(10)),
        (3, "oracle chain", c3_oracle_chain, Duration::from_secs(10)),
        (4, "noiseless estimation exactness", c4_noiseless_estimation, Duration::from_secs(5)),
        (5, "false-alarm calibration", c5_false_alarm_calibration, Duration::from_secs(30)),
        (6, "detector oracle", c6_detector_oracle, Duration::from_secs(30)),
        (7, "estimated vs ideal CSI gap", c7_estimated_vs_ideal, Duration::from_secs(300)),
        (8, "threshold direction", c8_threshold_direction, Duration::from_secs(300)),
        (9, "Doppler tap bounds", c9_doppler_taps, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (id, name, check, budget) in checks {
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let pass = v.pass && took <= budget;
        if !pass {
            failed += 1;
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        let over = if took > budget { format!(" [over budget {budget:?}]") } else { String::new() };
        println!("[{tag}] {id} {name} ({:.2} s){over}: {}", took.as_secs_f64(), v.detail);
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
