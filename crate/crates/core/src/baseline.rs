//! Classical two-mirror linearization: a resampling vector for the
//! pixel-to-wavenumber map and a residual phase for depth-independent
//! dispersion.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::sigmodel::RawSignal;
use crate::spectral::{self, analytic_from_real, unwrapped_phase_of};

/// Pixels at each end excluded from line fits and accuracy claims.
pub const EDGE_GUARD: usize = 16;
/// Smallest mirror separation, in bins, a calibration pair may have.
pub const MIN_DEPTH_SEPARATION: f64 = 8.0;
/// Band-limited oversampling applied before cubic resampling, so the cubic
/// never sees more than a few degrees of phase per sample.
const OVERSAMPLE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    /// Fractional source pixel for each uniform-wavenumber output sample.
    pub resample_positions: Vec<f64>,
    /// Dispersion compensation phase in radians, linear part removed.
    pub residual_phase: Vec<f64>,
}

impl CalibrationMap {
    /// No resampling, no phase correction.
    pub fn identity(n: usize) -> Self {
        CalibrationMap {
            resample_positions: (0..n).map(|i| i as f64).collect(),
            residual_phase: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.resample_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resample_positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 2 * EDGE_GUARD + 2 || self.residual_phase.len() != n {
            return Err(Error::Calibration(format!(
                "map has {} positions and {} phases",
                n,
                self.residual_phase.len()
            )));
        }
        if self.resample_positions.iter().chain(&self.residual_phase).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("calibration map".into()));
        }
        if self.resample_positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Calibration("resample positions are not strictly increasing".into()));
        }
        let last = (n - 1) as f64;
        if self.resample_positions[0] < 0.0 || self.resample_positions[n - 1] > last {
            return Err(Error::Calibration("resample positions leave the detector".into()));
        }
        Ok(())
    }

    pub fn to_json_path(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let map: CalibrationMap = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        map.validate()?;
        Ok(map)
    }
}

/// Least-squares line `a + b·x` through `(x, y)` pairs.
fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Builds a calibration from two mirror signals at different depths.
pub fn calibrate(sig1: &RawSignal, sig2: &RawSignal) -> Result<CalibrationMap> {
    if sig1.grid != sig2.grid {
        return Err(Error::Calibration("calibration signals use different grids".into()));
    }
    let n = sig1.len();
    if n < 2 * EDGE_GUARD + 2 {
        return Err(Error::Calibration(format!("{n} samples leave no interior past the edge guard")));
    }
    let phi1 = unwrapped_phase_of(&sig1.samples)?;
    let phi2 = unwrapped_phase_of(&sig2.samples)?;
    let mut dphi: Vec<f64> = phi1.iter().zip(&phi2).map(|(a, b)| a - b).collect();

    // total phase excursion across the detector is 2π × separation × (N-1)/N
    let span = dphi[n - 1] - dphi[0];
    let separation = span.abs() / (2.0 * std::f64::consts::PI) * n as f64 / (n - 1) as f64;
    if !separation.is_finite() || separation < MIN_DEPTH_SEPARATION {
        return Err(Error::Calibration(format!(
            "mirror depths differ by {separation:.2} bins, need at least {MIN_DEPTH_SEPARATION}"
        )));
    }
    if span < 0.0 {
        dphi.iter_mut().for_each(|d| *d = -*d);
    }

    let interior = EDGE_GUARD..n - EDGE_GUARD;
    if dphi[interior.clone()].windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Calibration(
            "phase difference is not monotone: mirror depths too close or signals invalid".into(),
        ));
    }
    let knots_x = dphi[interior.clone()].to_vec();
    let knots_y = interior.clone().map(|i| i as f64).collect();
    // The guarded interior is mapped onto itself; the guard bands stay put.
    let (g0, g1) = (EDGE_GUARD, n - 1 - EDGE_GUARD);
    let inverse = MonotoneCubic::new(knots_x, knots_y)?;
    let step = (dphi[g1] - dphi[g0]) / (g1 - g0) as f64;
    let positions: Vec<f64> = (0..n)
        .map(|k| {
            if k <= g0 || k >= g1 {
                k as f64
            } else {
                inverse.eval(dphi[g0] + step * (k - g0) as f64)
            }
        })
        .collect();
    if positions.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Calibration("inverted map is not strictly increasing".into()));
    }

    let phase = MonotoneCubic::on_index_grid(phi1)?.eval_many(&positions);
    let xs: Vec<f64> = interior.clone().map(|i| i as f64).collect();
    let (a, b) = fit_line(&xs, &phase[interior]);
    let residual_phase = phase.iter().enumerate().map(|(k, p)| p - (a + b * k as f64)).collect();

    let map = CalibrationMap {
        resample_positions: positions,
        residual_phase,
    };
    map.validate()?;
    Ok(map)
}

/// Resampled, phase-corrected signal before the final FFT.
pub fn corrected_analytic(sig: &RawSignal, map: &CalibrationMap) -> Result<Vec<Complex64>> {
    if sig.len() != map.len() {
        return Err(Error::ShapeMismatch(format!(
            "signal has {} samples, calibration expects {}",
            sig.len(),
            map.len()
        )));
    }
    let fine = spectral::fourier_oversample(&sig.samples, OVERSAMPLE)?;
    let scaled: Vec<f64> = map.resample_positions.iter().map(|p| p * OVERSAMPLE as f64).collect();
    let resampled = MonotoneCubic::on_index_grid(fine)?.eval_many(&scaled);
    let mut z = analytic_from_real(&resampled)?;
    for (c, &r) in z.iter_mut().zip(&map.residual_phase) {
        *c *= Complex64::from_polar(1.0, -r);
    }
    Ok(z)
}

/// FFT amplitude of `sig` after calibration.
pub fn linearize(sig: &RawSignal, map: &CalibrationMap) -> Result<Vec<f64>> {
    let z = corrected_analytic(sig, map)?;
    Ok(spectral::amplitude(&spectral::fft(&z)?))
}
