//! Object and signal model.
//!
//! A synthetic interferogram is a Gaussian envelope times a sum of cosines,
//! one per interface, each carrying polynomial phase in the band coordinate
//! `v ∈ [-1, 1)`:
//!
//! ```text
//! s(n) = G(n) · Σ_j r_j · cos(2π f_j u_n + a2_j v_n² + a3_j v_n³ + φ_j)
//! G(n) = exp(-u_n² / (2σ²)),   u_n = (n - N/2) / N,   v_n = 2 u_n
//! ```
//!
//! `a2`/`a3` are therefore the phase excursion in radians at the band edge.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SampleRng;
use crate::spectral;

/// Minimum and maximum interface count of a dataset object.
pub const MIN_INTERFACES: usize = 2;
pub const MAX_INTERFACES: usize = 12;

/// Smallest allowed spacing between two interface frequencies, in bins.
pub const MIN_SEPARATION: f64 = 4.0;

/// Which polynomial phase order a stack, ground truth or network addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Order {
    Second,
    Third,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        match self {
            Order::Second => 2,
            Order::Third => 3,
        }
    }

    pub(crate) fn exponent(self) -> i32 {
        self.as_u8() as i32
    }
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            2 => Ok(Order::Second),
            3 => Ok(Order::Third),
            other => Err(Error::InvalidOrder(other)),
        }
    }
}

impl From<Order> for u8 {
    fn from(order: Order) -> u8 {
        order.as_u8()
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Sampling grid shared by every signal, stack and target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_samples: usize,
    pub envelope_sigma: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            n_samples: 1024,
            envelope_sigma: 0.15,
        }
    }
}

impl Grid {
    pub fn new(n_samples: usize, envelope_sigma: f64) -> Result<Self> {
        let grid = Grid {
            n_samples,
            envelope_sigma,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 8 || !self.n_samples.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_samples must be a power of two >= 8, got {}",
                self.n_samples
            )));
        }
        if !(self.envelope_sigma.is_finite() && self.envelope_sigma > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "envelope_sigma must be positive, got {}",
                self.envelope_sigma
            )));
        }
        Ok(())
    }

    /// Centered coordinate `u_n ∈ [-1/2, 1/2)`.
    #[inline]
    pub fn u(&self, n: usize) -> f64 {
        (n as f64 - (self.n_samples / 2) as f64) / self.n_samples as f64
    }

    /// Band coordinate `v_n = 2 u_n ∈ [-1, 1)`.
    #[inline]
    pub fn v(&self, n: usize) -> f64 {
        2.0 * self.u(n)
    }

    #[inline]
    pub fn envelope(&self, n: usize) -> f64 {
        let u = self.u(n);
        (-u * u / (2.0 * self.envelope_sigma * self.envelope_sigma)).exp()
    }

    /// Lowest admissible interface frequency in bins.
    pub fn f_min(&self) -> f64 {
        8.0
    }

    /// Highest admissible interface frequency in bins: `N/2 - 32`, with the
    /// guard shrinking to `N/8` on grids smaller than 256.
    pub fn f_max(&self) -> f64 {
        let guard = (self.n_samples / 8).min(32);
        (self.n_samples / 2 - guard) as f64
    }

    /// Analytic FWHM of an unchirped peak, `2√(2 ln 2) / (2π σ)` bins.
    pub fn transform_limit(&self) -> f64 {
        2.0 * (2.0 * std::f64::consts::LN_2).sqrt()
            / (2.0 * std::f64::consts::PI * self.envelope_sigma)
    }
}

/// One reflecting interface of an imaged object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    /// Peak position in FFT bins.
    pub freq: f64,
    pub reflectivity: f64,
    /// Second-order phase in radians at the band edge.
    pub a2: f64,
    /// Third-order phase in radians at the band edge.
    pub a3: f64,
    /// Constant phase offset; zero unless drawn explicitly.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub phase: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl Interface {
    pub fn new(freq: f64, reflectivity: f64, a2: f64, a3: f64) -> Self {
        Interface {
            freq,
            reflectivity,
            a2,
            a3,
            phase: 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        self.freq.is_finite()
            && self.reflectivity.is_finite()
            && self.a2.is_finite()
            && self.a3.is_finite()
            && self.phase.is_finite()
    }
}

/// An imaged object: an ordered list of interfaces.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub interfaces: Vec<Interface>,
}

impl ObjectSpec {
    pub fn new(interfaces: Vec<Interface>) -> Self {
        ObjectSpec { interfaces }
    }

    pub fn single(interface: Interface) -> Self {
        ObjectSpec {
            interfaces: vec![interface],
        }
    }

    pub fn len(&self) -> usize {
        self.interfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interfaces.is_empty()
    }

    /// Checks the invariants every synthesizable object must satisfy.
    ///
    /// Single-interface objects (mirrors, calibration targets) are accepted
    /// here; dataset objects are additionally held to
    /// [`ObjectSpec::validate_dataset_object`].
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let count = self.interfaces.len();
        if count == 0 || count > MAX_INTERFACES {
            return Err(Error::InvalidObject(format!(
                "interface count {count} outside [1, {MAX_INTERFACES}]"
            )));
        }
        let (lo, hi) = (grid.f_min(), grid.f_max());
        for (j, iface) in self.interfaces.iter().enumerate() {
            if !iface.is_finite() {
                return Err(Error::InvalidObject(format!(
                    "interface {j} has a non-finite coefficient"
                )));
            }
            if iface.freq < lo || iface.freq > hi {
                return Err(Error::InvalidObject(format!(
                    "interface {j} frequency {} outside [{lo}, {hi}]",
                    iface.freq
                )));
            }
            if !(iface.reflectivity > 0.0 && iface.reflectivity <= 1.0) {
                return Err(Error::InvalidObject(format!(
                    "interface {j} reflectivity {} outside (0, 1]",
                    iface.reflectivity
                )));
            }
        }
        for (i, a) in self.interfaces.iter().enumerate() {
            for (j, b) in self.interfaces.iter().enumerate().skip(i + 1) {
                if (a.freq - b.freq).abs() < MIN_SEPARATION {
                    return Err(Error::InvalidObject(format!(
                        "interfaces {i} and {j} closer than {MIN_SEPARATION} bins"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn validate_dataset_object(&self, grid: &Grid, a2_bound: f64, a3_bound: f64) -> Result<()> {
        let count = self.interfaces.len();
        if !(MIN_INTERFACES..=MAX_INTERFACES).contains(&count) {
            return Err(Error::InvalidObject(format!(
                "interface count {count} outside [{MIN_INTERFACES}, {MAX_INTERFACES}]"
            )));
        }
        self.validate(grid)?;
        for (j, iface) in self.interfaces.iter().enumerate() {
            if iface.a2.abs() > a2_bound || iface.a3.abs() > a3_bound {
                return Err(Error::InvalidObject(format!(
                    "interface {j} nonlinearity exceeds bounds ({a2_bound}, {a3_bound})"
                )));
            }
        }
        Ok(())
    }

    /// Copy of the object with the given order's coefficient zeroed on every interface.
    pub fn without_order(&self, order: Order) -> ObjectSpec {
        let interfaces = self
            .interfaces
            .iter()
            .map(|iface| {
                let mut iface = *iface;
                match order {
                    Order::Second => iface.a2 = 0.0,
                    Order::Third => iface.a3 = 0.0,
                }
                iface
            })
            .collect();
        ObjectSpec { interfaces }
    }

    pub fn total_reflectivity(&self) -> f64 {
        self.interfaces.iter().map(|i| i.reflectivity).sum()
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// A sampled real-valued interferogram.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSignal {
    pub samples: Vec<f64>,
    pub grid: Grid,
}

impl RawSignal {
    pub fn new(samples: Vec<f64>, grid: Grid) -> Result<Self> {
        grid.validate()?;
        if samples.len() != grid.n_samples {
            return Err(Error::ShapeMismatch(format!(
                "signal has {} samples, grid expects {}",
                samples.len(),
                grid.n_samples
            )));
        }
        Ok(RawSignal { samples, grid })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Adds zero-mean Gaussian noise. Datasets never call this.
    pub fn add_noise(&mut self, std_dev: f64, rng: &mut SampleRng) {
        for s in &mut self.samples {
            *s += std_dev * rng.standard_normal();
        }
    }

    /// FFT amplitude of the raw signal.
    pub fn amplitude(&self) -> Vec<f64> {
        let spectrum = spectral::fft_real(&self.samples).expect("grid length is a power of two");
        spectral::amplitude(&spectrum)
    }

    /// One sample per line with round-trip float precision.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.samples {
            writeln!(out, "{s:?}")?;
        }
        Ok(())
    }

    /// Reads one sample per line (also accepts a single comma-separated row).
    pub fn read_csv<R: BufRead>(input: R, envelope_sigma: f64) -> Result<Self> {
        let mut samples = Vec::new();
        for line in input.lines() {
            let line = line?;
            for field in line.split(',') {
                let field = field.trim();
                if field.is_empty() {
                    continue;
                }
                let value: f64 = field.parse().map_err(|_| {
                    Error::ShapeMismatch(format!("cannot parse {field:?} as a sample"))
                })?;
                samples.push(value);
            }
        }
        let grid = Grid::new(samples.len(), envelope_sigma)?;
        RawSignal::new(samples, grid)
    }
}

/// Synthesizes the interferogram of `obj` on `grid`. Deterministic.
pub fn synthesize_signal(obj: &ObjectSpec, grid: &Grid) -> Result<RawSignal> {
    grid.validate()?;
    obj.validate(grid)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let samples = (0..grid.n_samples)
        .map(|n| {
            let u = grid.u(n);
            let v = grid.v(n);
            let v2 = v * v;
            let v3 = v2 * v;
            let sum: f64 = obj
                .interfaces
                .iter()
                .map(|i| i.reflectivity * (two_pi * i.freq * u + i.a2 * v2 + i.a3 * v3 + i.phase).cos())
                .sum();
            grid.envelope(n) * sum
        })
        .collect();
    Ok(RawSignal {
        samples,
        grid: *grid,
    })
}

/// FFT amplitude of the object with `order` zeroed on every interface.
pub fn ground_truth(obj: &ObjectSpec, grid: &Grid, order: Order) -> Result<Vec<f64>> {
    let cleaned = obj.without_order(order);
    Ok(synthesize_signal(&cleaned, grid)?.amplitude())
}

/// As [`ground_truth`], but with the order given as a raw integer.
pub fn ground_truth_for(obj: &ObjectSpec, grid: &Grid, order: u8) -> Result<Vec<f64>> {
    ground_truth(obj, grid, Order::try_from(order)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, a2: f64, a3: f64) -> ObjectSpec {
        ObjectSpec::single(Interface::new(freq, 1.0, a2, a3))
    }

    #[test]
    fn center_sample_is_one_for_unit_tone() {
        let grid = Grid::default();
        let sig = synthesize_signal(&tone(100.0, 0.0, 0.0), &grid).unwrap();
        assert_eq!(sig.samples[512], 1.0);
    }

    #[test]
    fn center_identity_holds_with_nonlinear_phase() {
        let grid = Grid::default();
        let obj = ObjectSpec::new(vec![
            Interface::new(40.0, 0.3, 50.0, -20.0),
            Interface::new(90.0, 0.7, -10.0, 5.0),
            Interface::new(300.0, 0.2, 0.0, 30.0),
        ]);
        let sig = synthesize_signal(&obj, &grid).unwrap();
        assert!((sig.samples[512] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn synthesis_is_linear_in_interfaces() {
        let grid = Grid::default();
        let a = Interface::new(70.0, 0.6, 12.0, -3.0);
        let b = Interface::new(210.5, 0.9, -40.0, 22.0);
        let sa = synthesize_signal(&ObjectSpec::single(a), &grid).unwrap();
        let sb = synthesize_signal(&ObjectSpec::single(b), &grid).unwrap();
        let sab = synthesize_signal(&ObjectSpec::new(vec![a, b]), &grid).unwrap();
        for n in 0..grid.n_samples {
            assert!((sa.samples[n] + sb.samples[n] - sab.samples[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_bounds_samples() {
        let grid = Grid::default();
        let obj = ObjectSpec::new(vec![
            Interface::new(20.0, 0.5, 60.0, 30.0),
            Interface::new(400.0, 1.0, -60.0, -30.0),
        ]);
        let sig = synthesize_signal(&obj, &grid).unwrap();
        let bound = obj.total_reflectivity();
        assert!(sig.samples.iter().all(|s| s.abs() <= bound));
    }

    #[test]
    fn rejects_invalid_objects() {
        let grid = Grid::default();
        assert!(synthesize_signal(&ObjectSpec::default(), &grid).is_err());
        let thirteen = ObjectSpec::new((0..13).map(|j| Interface::new(10.0 + 10.0 * j as f64, 0.5, 0.0, 0.0)).collect());
        assert!(synthesize_signal(&thirteen, &grid).is_err());
        assert!(synthesize_signal(&tone(4.0, 0.0, 0.0), &grid).is_err());
        assert!(synthesize_signal(&tone(500.0, 0.0, 0.0), &grid).is_err());
        assert!(synthesize_signal(&tone(100.0, f64::NAN, 0.0), &grid).is_err());
        let close = ObjectSpec::new(vec![Interface::new(100.0, 0.5, 0.0, 0.0), Interface::new(102.0, 0.5, 0.0, 0.0)]);
        assert!(synthesize_signal(&close, &grid).is_err());
    }

    #[test]
    fn dataset_objects_need_two_interfaces() {
        let grid = Grid::default();
        let one = tone(100.0, 0.0, 0.0);
        assert!(one.validate(&grid).is_ok());
        assert!(one.validate_dataset_object(&grid, 60.0, 30.0).is_err());
        let over = ObjectSpec::new(vec![Interface::new(100.0, 0.5, 61.0, 0.0), Interface::new(200.0, 0.5, 0.0, 0.0)]);
        assert!(over.validate_dataset_object(&grid, 60.0, 30.0).is_err());
    }

    #[test]
    fn ground_truth_without_nonlinearity_matches_raw_amplitude() {
        let grid = Grid::default();
        let obj = ObjectSpec::new(vec![
            Interface::new(50.0, 0.8, 0.0, 0.0),
            Interface::new(150.0, 0.4, 0.0, 0.0),
        ]);
        let raw = synthesize_signal(&obj, &grid).unwrap().amplitude();
        let gt = ground_truth(&obj, &grid, Order::Second).unwrap();
        for (a, b) in raw.iter().zip(&gt) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn second_order_ground_truth_keeps_cubic_term() {
        let grid = Grid::default();
        let gt = ground_truth(&tone(100.0, 40.0, 15.0), &grid, Order::Second).unwrap();
        let expected = synthesize_signal(&tone(100.0, 0.0, 15.0), &grid).unwrap().amplitude();
        for (a, b) in gt.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn order_parsing() {
        assert_eq!(Order::try_from(2).unwrap(), Order::Second);
        assert_eq!(Order::try_from(3).unwrap(), Order::Third);
        assert!(matches!(Order::try_from(4), Err(Error::InvalidOrder(4))));
        assert!(ground_truth_for(&tone(100.0, 0.0, 0.0), &Grid::default(), 1).is_err());
    }

    #[test]
    fn object_json_shape() {
        let obj = tone(100.0, 1.5, -2.0);
        let json = serde_json::to_string(&obj).unwrap();
        assert_eq!(json, r#"{"interfaces":[{"freq":100.0,"reflectivity":1.0,"a2":1.5,"a3":-2.0}]}"#);
        let back: ObjectSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, obj);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let grid = Grid::new(64, 0.15).unwrap();
        let obj = ObjectSpec::single(Interface::new(9.3, 0.77, 3.3, -1.1));
        let sig = synthesize_signal(&obj, &grid).unwrap();
        let mut buf = Vec::new();
        sig.write_csv(&mut buf).unwrap();
        let back = RawSignal::read_csv(buf.as_slice(), 0.15).unwrap();
        assert_eq!(back, sig);
    }
}
