//! FFT, analytic-signal and phase primitives.
//!
//! Forward transforms are unnormalized, `X[k] = Σ x[n] e^{-2πi nk/N}`; the
//! inverse divides by `N`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sigmodel::{Grid, Order, RawSignal};

/// Complex spectrum of a grid-length signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub bins: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// Phase in radians, optionally flagged as unwrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    pub phase: Vec<f64>,
    pub unwrapped: bool,
}

impl PhaseProfile {
    pub fn wrapped(phase: Vec<f64>) -> Self {
        PhaseProfile {
            phase,
            unwrapped: false,
        }
    }

    /// Argument of every element of `z`, wrapped to `(-π, π]`.
    pub fn of(z: &[Complex64]) -> Self {
        Self::wrapped(z.iter().map(|c| c.arg()).collect())
    }
}

/// Precomputed twiddles and bit-reversal table for one power-of-two length.
///
/// Immutable after construction, so one plan can be shared across threads.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        // Each twiddle is evaluated directly rather than by repeated
        // multiplication so rounding error does not accumulate with k.
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Ok(FftPlan { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::ShapeMismatch(format!(
                "buffer of length {len} passed to a length-{} plan",
                self.n
            )));
        }
        Ok(())
    }

    /// In-place forward transform.
    pub fn forward(&self, data: &mut [Complex64]) -> Result<()> {
        self.check(data.len())?;
        self.transform(data, false);
        Ok(())
    }

    /// In-place inverse transform, scaled by `1/N`.
    pub fn inverse(&self, data: &mut [Complex64]) -> Result<()> {
        self.check(data.len())?;
        self.transform(data, true);
        let scale = 1.0 / self.n as f64;
        for x in data.iter_mut() {
            *x *= scale;
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let w = if inverse { w.conj() } else { w };
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

/// Forward FFT of a complex vector.
pub fn fft(x: &[Complex64]) -> Result<ComplexSpectrum> {
    let plan = FftPlan::new(x.len())?;
    let mut bins = x.to_vec();
    plan.forward(&mut bins)?;
    Ok(ComplexSpectrum { bins })
}

/// Forward FFT of a real vector.
pub fn fft_real(x: &[f64]) -> Result<ComplexSpectrum> {
    let plan = FftPlan::new(x.len())?;
    let mut bins: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    plan.forward(&mut bins)?;
    Ok(ComplexSpectrum { bins })
}

/// Inverse FFT (`1/N` scaled).
pub fn ifft(spec: &ComplexSpectrum) -> Result<Vec<Complex64>> {
    let plan = FftPlan::new(spec.len())?;
    let mut out = spec.bins.clone();
    plan.inverse(&mut out)?;
    Ok(out)
}

/// Elementwise modulus.
pub fn amplitude(spec: &ComplexSpectrum) -> Vec<f64> {
    spec.bins.iter().map(|c| c.norm()).collect()
}

/// `e[n] = exp(-i · coeff · v_n^order)`, unit modulus everywhere.
pub fn compensation_exponent(grid: &Grid, order: Order, coeff: f64) -> Vec<Complex64> {
    let p = order.exponent();
    (0..grid.n_samples)
        .map(|n| Complex64::from_polar(1.0, -coeff * grid.v(n).powi(p)))
        .collect()
}

/// As [`compensation_exponent`] with the order given as an integer.
pub fn compensation_exponent_for(grid: &Grid, order: u8, coeff: f64) -> Result<Vec<Complex64>> {
    if !coeff.is_finite() {
        return Err(Error::NonFinite(format!("compensation coefficient {coeff}")));
    }
    Ok(compensation_exponent(grid, Order::try_from(order)?, coeff))
}

/// Analytic signal via the one-sided spectrum: bins `1..N/2` doubled,
/// bins `0` and `N/2` kept, negative frequencies zeroed.
pub fn analytic_signal(x: &RawSignal) -> Result<Vec<Complex64>> {
    analytic_from_real(&x.samples)
}

pub fn analytic_from_real(x: &[f64]) -> Result<Vec<Complex64>> {
    let plan = FftPlan::new(x.len())?;
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    plan.forward(&mut buf)?;
    if n >= 2 {
        for b in buf.iter_mut().take(n / 2).skip(1) {
            *b *= 2.0;
        }
        for b in buf.iter_mut().skip(n / 2 + 1) {
            *b = Complex64::new(0.0, 0.0);
        }
    }
    plan.inverse(&mut buf)?;
    Ok(buf)
}

/// Band-limited interpolation of a real signal onto a grid `factor` times
/// denser (sample `i` of the output sits at input position `i / factor`).
/// The Nyquist bin is split evenly between both halves of the padded spectrum.
pub fn fourier_oversample(x: &[f64], factor: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if factor == 0 || !factor.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(factor));
    }
    let spec = fft_real(x)?;
    let m = n * factor;
    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    padded[..half].copy_from_slice(&spec.bins[..half]);
    padded[m - half + 1..].copy_from_slice(&spec.bins[half + 1..]);
    if factor > 1 {
        padded[half] = spec.bins[half] * 0.5;
        padded[m - half] = spec.bins[half] * 0.5;
    } else {
        padded[half] = spec.bins[half];
    }
    let plan = FftPlan::new(m)?;
    plan.inverse(&mut padded)?;
    Ok(padded.iter().map(|c| c.re * factor as f64).collect())
}

/// Adds multiples of 2π so consecutive differences lie in `(-π, π]`.
pub fn unwrap_phase(p: &PhaseProfile) -> PhaseProfile {
    let mut out = Vec::with_capacity(p.phase.len());
    let mut offset = 0.0;
    for (i, &x) in p.phase.iter().enumerate() {
        if i > 0 {
            let step = x - p.phase[i - 1];
            // step folded into (-π, π]
            let folded = step - 2.0 * PI * ((step - PI) / (2.0 * PI)).ceil();
            offset += folded - step;
        }
        out.push(x + offset);
    }
    PhaseProfile {
        phase: out,
        unwrapped: true,
    }
}

/// Unwrapped phase of the analytic signal of `x`.
pub fn unwrapped_phase_of(x: &[f64]) -> Result<Vec<f64>> {
    let z = analytic_from_real(x)?;
    Ok(unwrap_phase(&PhaseProfile::of(&z)).phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SampleRng;
    use crate::sigmodel::{synthesize_signal, Interface, ObjectSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * ((j * k) % n) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let mut x = vec![c(0.0, 0.0); 8];
        x[0] = c(1.0, 0.0);
        let spec = fft(&x).unwrap();
        for b in spec.bins {
            assert!((b - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn pure_tone_lands_in_one_bin() {
        let x: Vec<Complex64> = (0..8).map(|n| Complex64::from_polar(1.0, 2.0 * PI * 3.0 * n as f64 / 8.0)).collect();
        let spec = fft(&x).unwrap();
        for (k, b) in spec.bins.iter().enumerate() {
            let want = if k == 3 { c(8.0, 0.0) } else { c(0.0, 0.0) };
            assert!((b - want).norm() < 1e-12, "bin {k}: {b}");
        }
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = SampleRng::from_seed(3);
        for n in [1usize, 2, 4, 16, 64] {
            let x: Vec<Complex64> = (0..n).map(|_| c(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))).collect();
            let fast = fft(&x).unwrap().bins;
            let slow = naive_dft(&x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn round_trip_all_lengths() {
        let mut rng = SampleRng::from_seed(5);
        for p in 3..=12 {
            let n = 1usize << p;
            let x: Vec<Complex64> = (0..n).map(|_| c(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))).collect();
            let back = ifft(&fft(&x).unwrap()).unwrap();
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(fft(&[c(1.0, 0.0); 6]), Err(Error::NotPowerOfTwo(6))));
        assert!(fft_real(&[]).is_err());
    }

    #[test]
    fn amplitude_is_modulus() {
        let spec = ComplexSpectrum {
            bins: vec![c(3.0, 4.0), c(0.0, 0.0), c(-5.0, 0.0)],
        };
        assert_eq!(amplitude(&spec), vec![5.0, 0.0, 5.0]);
    }

    #[test]
    fn real_spectrum_is_mirror_symmetric_and_parseval_holds() {
        let mut rng = SampleRng::from_seed(11);
        let x: Vec<f64> = (0..1024).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let amp = amplitude(&fft_real(&x).unwrap());
        for k in 1..1024 {
            assert!((amp[k] - amp[1024 - k]).abs() < 1e-10);
        }
        let lhs: f64 = amp.iter().map(|a| a * a).sum();
        let rhs: f64 = 1024.0 * x.iter().map(|v| v * v).sum::<f64>();
        assert!(((lhs - rhs) / rhs).abs() < 1e-10);
    }

    #[test]
    fn compensation_composes_additively() {
        let grid = Grid::default();
        for order in [Order::Second, Order::Third] {
            let a = compensation_exponent(&grid, order, 12.5);
            let b = compensation_exponent(&grid, order, -4.25);
            let ab = compensation_exponent(&grid, order, 8.25);
            for n in 0..grid.n_samples {
                assert!((a[n] * b[n] - ab[n]).norm() < 1e-12);
                assert!((a[n].norm() - 1.0).abs() < 1e-15);
            }
        }
        let id = compensation_exponent(&grid, Order::Second, 0.0);
        assert!(id.iter().all(|e| *e == c(1.0, 0.0)));
        assert!(compensation_exponent_for(&grid, 4, 1.0).is_err());
        assert!(compensation_exponent_for(&grid, 2, f64::INFINITY).is_err());
    }

    #[test]
    fn phase_only_multiplication_preserves_energy() {
        let grid = Grid::default();
        let obj = ObjectSpec::new(vec![Interface::new(120.0, 0.9, 20.0, 5.0), Interface::new(300.0, 0.4, -8.0, 0.0)]);
        let sig = synthesize_signal(&obj, &grid).unwrap();
        let e = compensation_exponent(&grid, Order::Third, 17.0);
        let plain: Vec<Complex64> = sig.samples.iter().map(|&s| c(s, 0.0)).collect();
        let mixed: Vec<Complex64> = plain.iter().zip(&e).map(|(s, e)| s * e).collect();
        let e0: f64 = fft(&plain).unwrap().bins.iter().map(|b| b.norm_sqr()).sum();
        let e1: f64 = fft(&mixed).unwrap().bins.iter().map(|b| b.norm_sqr()).sum();
        assert!(((e0 - e1) / e0).abs() < 1e-10);
    }

    #[test]
    fn analytic_signal_of_cosine_is_complex_tone() {
        let grid = Grid::default();
        let x: Vec<f64> = (0..1024).map(|n| (2.0 * PI * 50.0 * grid.u(n)).cos()).collect();
        let z = analytic_from_real(&x).unwrap();
        for n in 0..1024 {
            let want = Complex64::from_polar(1.0, 2.0 * PI * 50.0 * grid.u(n));
            assert!((z[n] - want).norm() < 1e-9);
            assert!((z[n].re - x[n]).abs() < 1e-10);
        }
    }

    #[test]
    fn analytic_signal_keeps_real_part_and_dc() {
        let grid = Grid::default();
        let obj = ObjectSpec::new(vec![Interface::new(33.0, 1.0, 9.0, -4.0), Interface::new(250.0, 0.3, 0.0, 2.0)]);
        let sig = synthesize_signal(&obj, &grid).unwrap();
        let z = analytic_signal(&sig).unwrap();
        for (a, b) in z.iter().zip(&sig.samples) {
            assert!((a.re - b).abs() < 1e-10);
        }
        let dc = analytic_from_real(&[0.75; 16]).unwrap();
        for v in dc {
            assert!((v - c(0.75, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn unwrap_single_wrap() {
        let out = unwrap_phase(&PhaseProfile::wrapped(vec![0.0, 3.0, -3.0]));
        assert_eq!(out.phase[0], 0.0);
        assert_eq!(out.phase[1], 3.0);
        assert!((out.phase[2] - (2.0 * PI - 3.0)).abs() < 1e-12);
        assert!((out.phase[2] - 3.2832).abs() < 1e-4);
    }

    #[test]
    fn unwrap_smooth_is_identity_and_idempotent() {
        let smooth: Vec<f64> = (0..100).map(|i| 0.01 * i as f64 - 0.3).collect();
        let out = unwrap_phase(&PhaseProfile::wrapped(smooth.clone()));
        assert_eq!(out.phase, smooth);
        let wrapped: Vec<f64> = (0..200).map(|i| ((0.7 * i as f64) + PI).rem_euclid(2.0 * PI) - PI).collect();
        let once = unwrap_phase(&PhaseProfile::wrapped(wrapped));
        let twice = unwrap_phase(&once);
        assert_eq!(once.phase, twice.phase);
        assert!(once.phase.windows(2).all(|w| (w[1] - w[0]).abs() < PI));
    }

    #[test]
    fn unwrapped_tone_phase_has_expected_slope() {
        let grid = Grid::default();
        let f = 50.0;
        let x: Vec<f64> = (0..1024).map(|n| (2.0 * PI * f * grid.u(n)).cos()).collect();
        let phase = unwrapped_phase_of(&x).unwrap();
        // least-squares slope against u
        let us: Vec<f64> = (0..1024).map(|n| grid.u(n)).collect();
        let mu = us.iter().sum::<f64>() / 1024.0;
        let mp = phase.iter().sum::<f64>() / 1024.0;
        let num: f64 = us.iter().zip(&phase).map(|(u, p)| (u - mu) * (p - mp)).sum();
        let den: f64 = us.iter().map(|u| (u - mu) * (u - mu)).sum();
        let slope = num / den;
        assert!((slope / (2.0 * PI * f) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn oversampling_keeps_original_samples() {
        let mut rng = SampleRng::from_seed(3);
        let x: Vec<f64> = (0..64).map(|_| rng.standard_normal()).collect();
        let y = fourier_oversample(&x, 4).unwrap();
        assert_eq!(y.len(), 256);
        for (i, v) in x.iter().enumerate() {
            assert!((y[4 * i] - v).abs() < 1e-10);
        }
        let tone: Vec<f64> = (0..64).map(|i| (2.0 * PI * 5.0 * i as f64 / 64.0 + 0.3).cos()).collect();
        let fine = fourier_oversample(&tone, 8).unwrap();
        for (i, v) in fine.iter().enumerate() {
            let want = (2.0 * PI * 5.0 * i as f64 / 512.0 + 0.3).cos();
            assert!((v - want).abs() < 1e-10);
        }
    }
}
