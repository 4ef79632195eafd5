use num_complex::Complex64;
use proptest::prelude::*;

use denl_core::experiments::{assemble_bscan, Pipeline};
use denl_core::metrics::{fwhm, gof};
use denl_core::net::{NetConfig, Network, OutputActivation, Tensor4};
use denl_core::spectral::{self, compensation_exponent, fft, ifft, unwrap_phase, PhaseProfile};
use denl_core::stack::{build_stack, minmax_normalize, CoeffLadder};
use denl_core::{ground_truth, synthesize_signal, Grid, Interface, ObjectSpec, Order};

fn grid() -> Grid {
    Grid::new(256, 0.15).unwrap()
}

fn interface() -> impl Strategy<Value = Interface> {
    (8.0..96.0f64, 0.01..1.0f64, -30.0..30.0f64, -20.0..20.0f64).prop_map(|(f, r, a2, a3)| Interface::new(f, r, a2, a3))
}

fn unit01() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, 64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signal_centre_is_total_reflectivity(a in interface(), b in interface()) {
        prop_assume!((a.freq - b.freq).abs() >= 4.0);
        let obj = ObjectSpec::new(vec![a, b]);
        let sig = synthesize_signal(&obj, &grid()).unwrap();
        prop_assert!((sig.samples[128] - (a.reflectivity + b.reflectivity)).abs() < 1e-12);
    }

    #[test]
    fn synthesis_is_linear_in_interfaces(a in interface(), b in interface()) {
        prop_assume!((a.freq - b.freq).abs() >= 4.0);
        let g = grid();
        let sa = synthesize_signal(&ObjectSpec::single(a), &g).unwrap();
        let sb = synthesize_signal(&ObjectSpec::single(b), &g).unwrap();
        let sab = synthesize_signal(&ObjectSpec::new(vec![a, b]), &g).unwrap();
        for i in 0..256 {
            prop_assert!((sa.samples[i] + sb.samples[i] - sab.samples[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_truth_of_quadratic_free_object_is_raw_amplitude(mut a in interface()) {
        a.a2 = 0.0;
        let g = grid();
        let obj = ObjectSpec::single(a);
        let raw = synthesize_signal(&obj, &g).unwrap().amplitude();
        let gt = ground_truth(&obj, &g, Order::Second).unwrap();
        for (x, y) in raw.iter().zip(&gt) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn real_signal_spectrum_is_mirror_symmetric(a in interface()) {
        let amp = synthesize_signal(&ObjectSpec::single(a), &grid()).unwrap().amplitude();
        for n in 1..256 {
            prop_assert!((amp[n] - amp[256 - n]).abs() < 1e-10);
        }
    }

    #[test]
    fn ifft_inverts_fft(log_n in 3u32..=12, seed in any::<u64>()) {
        let n = 1usize << log_n;
        let mut rng = denl_core::SampleRng::from_seed(seed);
        let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))).collect();
        let back = ifft(&fft(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn phase_only_multiplication_keeps_energy(a in interface(), c in -60.0..60.0f64, third in any::<bool>()) {
        let g = grid();
        let order = if third { Order::Third } else { Order::Second };
        let sig = synthesize_signal(&ObjectSpec::single(a), &g).unwrap();
        let e = compensation_exponent(&g, order, c);
        let x: Vec<Complex64> = sig.samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        let y: Vec<Complex64> = x.iter().zip(&e).map(|(a, b)| a * b).collect();
        let energy = |z: &[Complex64]| fft(z).unwrap().bins.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let (ex, ey) = (energy(&x), energy(&y));
        prop_assert!((ex - ey).abs() <= 1e-10 * ex);
    }

    #[test]
    fn compensation_exponents_compose(c1 in -60.0..60.0f64, c2 in -60.0..60.0f64, third in any::<bool>()) {
        let g = grid();
        let order = if third { Order::Third } else { Order::Second };
        let e1 = compensation_exponent(&g, order, c1);
        let e2 = compensation_exponent(&g, order, c2);
        let e12 = compensation_exponent(&g, order, c1 + c2);
        for i in 0..256 {
            prop_assert!((e1[i] * e2[i] - e12[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn unwrap_is_idempotent(a in interface()) {
        let sig = synthesize_signal(&ObjectSpec::single(a), &grid()).unwrap();
        let z = spectral::analytic_signal(&sig).unwrap();
        let once = unwrap_phase(&PhaseProfile::of(&z));
        let twice = unwrap_phase(&once);
        prop_assert_eq!(once.phase, twice.phase);
    }

    #[test]
    fn normalization_ignores_scale_and_offset(x in prop::collection::vec(-5.0..5.0f64, 32), alpha in 0.01..100.0f64, beta in -10.0..10.0f64) {
        prop_assume!(x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min) > 1e-3);
        let y: Vec<f64> = x.iter().map(|v| alpha * v + beta).collect();
        let (nx, ny) = (minmax_normalize(&x).unwrap(), minmax_normalize(&y).unwrap());
        for (a, b) in nx.iter().zip(&ny) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_stack_is_symmetric_under_row_and_bin_reflection(f in 8.0..96.0f64, r in 0.1..1.0f64) {
        let g = grid();
        let sig = synthesize_signal(&ObjectSpec::single(Interface::new(f, r, 0.0, 0.0)), &g).unwrap();
        let ladder = CoeffLadder::symmetric(Order::Third, 20.0, 16).unwrap();
        let s = build_stack(&sig, &ladder).unwrap();
        for m in 0..16 {
            for n in 1..256 {
                prop_assert!((s.get(m, n) - s.get(15 - m, 256 - n)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gof_is_monotone_in_threshold(a in unit01(), b in unit01(), t1 in 1e-4..0.5f64, t2 in 1e-4..0.5f64) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(gof(&a, &b, lo).unwrap() <= gof(&a, &b, hi).unwrap());
    }

    #[test]
    fn gof_of_identical_vectors_is_100(a in unit01(), t in 1e-6..1.0f64) {
        prop_assert_eq!(gof(&a, &a, t).unwrap(), 100.0);
    }

    #[test]
    fn gof_is_symmetric(a in unit01(), b in unit01(), t in 1e-4..0.5f64) {
        prop_assert_eq!(gof(&a, &b, t).unwrap(), gof(&b, &a, t).unwrap());
    }

    #[test]
    fn fwhm_ignores_amplitude_scale(a in interface(), alpha in 0.01..100.0f64) {
        let amp = synthesize_signal(&ObjectSpec::single(a), &grid()).unwrap().amplitude();
        let peak = denl_core::experiments::main_peak(&amp);
        let scaled: Vec<f64> = amp.iter().map(|v| v * alpha).collect();
        match (fwhm(&amp, peak), fwhm(&scaled, peak)) {
            (Ok(w), Ok(ws)) => prop_assert!((w - ws).abs() < 1e-9),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "scaling changed the outcome: {x:?} vs {y:?}"),
        }
    }

    #[test]
    fn raw_bscan_lines_are_spectra_in_input_order(fs in prop::collection::vec(8.0..96.0f64, 1..6)) {
        let g = grid();
        let signals: Vec<_> = fs.iter().map(|&f| synthesize_signal(&ObjectSpec::single(Interface::new(f, 1.0, 5.0, 3.0)), &g).unwrap()).collect();
        let image = assemble_bscan(&signals, Pipeline::Raw).unwrap();
        prop_assert_eq!(image.lines, signals.len());
        for (i, s) in signals.iter().enumerate() {
            prop_assert_eq!(image.line(i), &s.amplitude()[..]);
        }
        let reversed: Vec<_> = signals.iter().rev().cloned().collect();
        let flipped = assemble_bscan(&reversed, Pipeline::Raw).unwrap();
        for i in 0..signals.len() {
            prop_assert_eq!(flipped.line(i), image.line(signals.len() - 1 - i));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn network_output_stays_in_unit_interval(seed in any::<u64>(), scale in 0.0..1e3f64) {
        let cfg = NetConfig { levels: 2, base_channels: 2, rows: 8, width: 16, output_activation: OutputActivation::Sigmoid };
        let net = Network::<f32>::new(cfg, Some(Order::Second), seed).unwrap();
        let mut rng = denl_core::SampleRng::from_seed(seed);
        let data: Vec<f32> = (0..2 * 8 * 16).map(|_| (scale * rng.uniform(-1.0, 1.0)) as f32).collect();
        let out = net.forward(&Tensor4::new(data, [2, 1, 8, 16]).unwrap()).unwrap();
        for v in out.iter().flatten() {
            prop_assert!((0.0..=1.0).contains(v));
        }
    }
}
