//! Mirror depth study, pipeline comparison and B-scan assembly on synthetic data.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baseline::{linearize, CalibrationMap};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::metrics::{argmax_in, fwhm, peak_asymmetry};
use crate::net::train::predict;
use crate::net::Network;
use crate::sigmodel::{synthesize_signal, Grid, Interface, ObjectSpec, Order, RawSignal};
use crate::stack::{build_stack, minmax_normalize_f32, CoeffLadder};

/// System nonlinearity: a spectrometer warp whose phase grows linearly with
/// depth, plus depth-independent interferometer dispersion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemDistortion {
    pub a2_per_bin: f64,
    pub a3_per_bin: f64,
    #[serde(default)]
    pub dispersion_a2: f64,
    #[serde(default)]
    pub dispersion_a3: f64,
}

impl SystemDistortion {
    /// Distortion reaching `a2`/`a3` radians at `depth`.
    pub fn reaching(a2: f64, a3: f64, depth: f64) -> Self {
        SystemDistortion {
            a2_per_bin: a2 / depth,
            a3_per_bin: a3 / depth,
            dispersion_a2: 0.0,
            dispersion_a3: 0.0,
        }
    }

    pub fn with_dispersion(mut self, a2: f64, a3: f64) -> Self {
        self.dispersion_a2 = a2;
        self.dispersion_a3 = a3;
        self
    }

    /// Adds the system phase to every interface of `obj`.
    pub fn apply(&self, obj: &ObjectSpec) -> ObjectSpec {
        let mut out = obj.clone();
        for i in &mut out.interfaces {
            i.a2 += self.a2_per_bin * i.freq + self.dispersion_a2;
            i.a3 += self.a3_per_bin * i.freq + self.dispersion_a3;
        }
        out
    }

    pub fn mirror(&self, grid: &Grid, depth: f64) -> Result<RawSignal> {
        let obj = self.apply(&ObjectSpec::single(Interface::new(depth, 1.0, 0.0, 0.0)));
        synthesize_signal(&obj, grid)
    }
}

/// `count` depths equally spaced strictly inside the usable band.
pub fn default_depths(grid: &Grid, count: usize) -> Vec<f64> {
    let (lo, hi) = (grid.f_min(), grid.f_max());
    let step = (hi - lo) / (count + 1) as f64;
    (1..=count).map(|i| (lo + step * i as f64).round()).collect()
}

/// A trained network together with the ladder its stacks were built with.
#[derive(Debug, Clone, Copy)]
pub struct NetPipeline<'a> {
    pub net: &'a Network<f32>,
    pub ladder: &'a CoeffLadder,
}

impl NetPipeline<'_> {
    fn check(&self, expected: Order) -> Result<()> {
        match self.net.order {
            Some(o) if o == expected && o == self.ladder.order => Ok(()),
            Some(o) => Err(Error::OrderMismatch {
                network: o.as_u8(),
                data: expected.as_u8(),
            }),
            None => Err(Error::Config("network has no order tag; train it first".into())),
        }
    }
}

/// Per-line processing applied when assembling a B-scan.
#[derive(Debug, Clone, Copy)]
pub enum Pipeline<'a> {
    /// `|FFT(signal)|`.
    Raw,
    Network(NetPipeline<'a>),
    Baseline(&'a CalibrationMap),
}

/// Input stack for `sig`, normalized and in network precision.
pub fn network_input(sig: &RawSignal, ladder: &CoeffLadder) -> Result<Vec<f32>> {
    let stack = build_stack(sig, ladder)?;
    minmax_normalize_f32(&stack.rows)
}

impl Pipeline<'_> {
    pub fn process(&self, signals: &[RawSignal]) -> Result<Vec<Vec<f64>>> {
        match self {
            Pipeline::Raw => Ok(signals.iter().map(RawSignal::amplitude).collect()),
            Pipeline::Baseline(map) => signals.iter().map(|s| linearize(s, map)).collect(),
            Pipeline::Network(p) => {
                let samples = signals
                    .iter()
                    .map(|s| {
                        Ok(Sample {
                            object: ObjectSpec::default(),
                            input: network_input(s, p.ladder)?,
                            target: Vec::new(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let out = predict(p.net, &samples, 8)?;
                Ok(out.into_iter().map(|v| v.into_iter().map(f64::from).collect()).collect())
            }
        }
    }
}

/// Strongest peak in the positive-frequency half.
pub fn main_peak(amp: &[f64]) -> usize {
    argmax_in(amp, 1, amp.len() / 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorStudyRow {
    pub depth: f64,
    pub raw_fwhm: f64,
    pub raw_asymmetry: f64,
    pub net1_fwhm: Option<f64>,
    pub net1_asymmetry: Option<f64>,
    pub net2_fwhm: Option<f64>,
    pub net2_asymmetry: Option<f64>,
    pub baseline_fwhm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorStudyResult {
    pub transform_limit: f64,
    pub rows: Vec<MirrorStudyRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

impl MirrorStudyResult {
    pub fn raw_fwhm_strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].raw_fwhm > w[0].raw_fwhm)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "depth,raw_fwhm,raw_asymmetry,net1_fwhm,net1_asymmetry,net2_fwhm,net2_asymmetry,baseline_fwhm"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.4},{:.4},{},{},{},{},{}",
                r.depth,
                r.raw_fwhm,
                r.raw_asymmetry,
                opt(r.net1_fwhm),
                opt(r.net1_asymmetry),
                opt(r.net2_fwhm),
                opt(r.net2_asymmetry),
                opt(r.baseline_fwhm)
            )?;
        }
        Ok(())
    }
}

fn shape(amp: &[f64]) -> Result<(f64, f64)> {
    let p = main_peak(amp);
    Ok((fwhm(amp, p)?, peak_asymmetry(amp, p)?))
}

/// Transform-limited FWHM measured on a centred, undistorted tone.
pub fn measured_transform_limit(grid: &Grid) -> Result<f64> {
    let depth = (grid.n_samples / 4) as f64;
    let amp = synthesize_signal(&ObjectSpec::single(Interface::new(depth, 1.0, 0.0, 0.0)), grid)?.amplitude();
    fwhm(&amp, main_peak(&amp))
}

/// Mirrors at `depths` under `system`, processed by every supplied pipeline.
pub fn mirror_study(
    grid: &Grid,
    depths: &[f64],
    system: &SystemDistortion,
    net1: Option<NetPipeline<'_>>,
    net2: Option<NetPipeline<'_>>,
    calib: Option<&CalibrationMap>,
) -> Result<MirrorStudyResult> {
    if depths.len() < 2 {
        return Err(Error::Config("mirror study needs at least two depths".into()));
    }
    if let Some(p) = &net1 {
        p.check(Order::Second)?;
    }
    if let Some(p) = &net2 {
        p.check(Order::Third)?;
    }
    let signals = depths.iter().map(|&d| system.mirror(grid, d)).collect::<Result<Vec<_>>>()?;
    let raw = Pipeline::Raw.process(&signals)?;
    let n1 = net1.map(|p| Pipeline::Network(p).process(&signals)).transpose()?;
    let n2 = net2.map(|p| Pipeline::Network(p).process(&signals)).transpose()?;
    let base = calib.map(|m| Pipeline::Baseline(m).process(&signals)).transpose()?;
    let mut rows = Vec::with_capacity(depths.len());
    for (i, &depth) in depths.iter().enumerate() {
        let (raw_fwhm, raw_asymmetry) = shape(&raw[i])?;
        let n1s = n1.as_ref().and_then(|o| shape(&o[i]).ok());
        let n2s = n2.as_ref().and_then(|o| shape(&o[i]).ok());
        let b = base.as_ref().and_then(|o| fwhm(&o[i], main_peak(&o[i])).ok());
        rows.push(MirrorStudyRow {
            depth,
            raw_fwhm,
            raw_asymmetry,
            net1_fwhm: n1s.map(|s| s.0),
            net1_asymmetry: n1s.map(|s| s.1),
            net2_fwhm: n2s.map(|s| s.0),
            net2_asymmetry: n2s.map(|s| s.1),
            baseline_fwhm: b,
        });
    }
    Ok(MirrorStudyResult {
        transform_limit: measured_transform_limit(grid)?,
        rows,
    })
}

/// Lines × samples image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BScan {
    pub lines: usize,
    pub n_samples: usize,
    pub data: Vec<f64>,
}

impl BScan {
    pub fn line(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_samples..(i + 1) * self.n_samples]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.lines {
            let line: Vec<String> = self.line(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// 8-bit binary PGM after min-max scaling over the whole image.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        let lo = self.data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        write!(out, "P5\n{} {}\n255\n", self.n_samples, self.lines)?;
        let bytes: Vec<u8> = self.data.iter().map(|v| (255.0 * (v - lo) / span).round() as u8).collect();
        out.write_all(&bytes)?;
        Ok(())
    }
}

/// Processes each signal with `pipeline`, keeping input order.
pub fn assemble_bscan(signals: &[RawSignal], pipeline: Pipeline<'_>) -> Result<BScan> {
    let first = signals.first().ok_or(Error::EmptyDataset)?;
    if signals.iter().any(|s| s.grid != first.grid) {
        return Err(Error::ShapeMismatch("B-scan lines use different grids".into()));
    }
    if let Pipeline::Network(p) = &pipeline {
        if p.net.order.is_none() {
            return Err(Error::Config("network has no order tag; train it first".into()));
        }
    }
    let lines = pipeline.process(signals)?;
    let n_samples = lines[0].len();
    Ok(BScan {
        lines: lines.len(),
        n_samples,
        data: lines.concat(),
    })
}

/// Tilted two-surface plate: front surface drifting linearly across lines,
/// back surface `thickness` deeper, and a weak self-interference term at
/// depth `thickness`.
pub fn glass_phantom(grid: &Grid, lines: usize, front: (f64, f64), thickness: f64, system: &SystemDistortion) -> Result<Vec<RawSignal>> {
    (0..lines)
        .map(|i| {
            let t = if lines > 1 { i as f64 / (lines - 1) as f64 } else { 0.0 };
            let f = front.0 + t * (front.1 - front.0);
            let obj = ObjectSpec::new(vec![
                Interface::new(thickness, 0.3, 0.0, 0.0),
                Interface::new(f, 1.0, 0.0, 0.0),
                Interface::new(f + thickness, 0.8, 0.0, 0.0),
            ]);
            synthesize_signal(&system.apply(&obj), grid)
        })
        .collect()
}

/// Local maxima in the positive-frequency half above `rel` × the global maximum.
pub fn count_peaks(amp: &[f64], rel: f64) -> usize {
    let half = amp.len() / 2;
    let top = amp[1..half].iter().copied().fold(0.0, f64::max);
    (2..half - 1)
        .filter(|&i| amp[i] >= rel * top && amp[i] > amp[i - 1] && amp[i] >= amp[i + 1])
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::calibrate;

    #[test]
    fn raw_width_grows_with_depth() {
        let grid = Grid::default();
        let depths = default_depths(&grid, 11);
        assert_eq!(depths.len(), 11);
        let max = *depths.last().unwrap();
        let system = SystemDistortion::reaching(40.0, 15.0, max);
        let calib = calibrate(&system.mirror(&grid, depths[2]).unwrap(), &system.mirror(&grid, depths[8]).unwrap()).unwrap();
        let r = mirror_study(&grid, &depths, &system, None, None, Some(&calib)).unwrap();
        assert!(r.raw_fwhm_strictly_increasing());
        for row in &r.rows {
            assert!(row.baseline_fwhm.unwrap() <= 1.5 * r.transform_limit, "{row:?}");
        }
    }

    #[test]
    fn zero_distortion_is_flat() {
        let grid = Grid::default();
        let depths = default_depths(&grid, 11);
        let system = SystemDistortion::default();
        let r = mirror_study(&grid, &depths, &system, None, None, Some(&CalibrationMap::identity(grid.n_samples))).unwrap();
        for row in &r.rows {
            assert!((row.raw_fwhm - r.transform_limit).abs() < 0.15, "{row:?}");
            assert!((row.baseline_fwhm.unwrap() - r.transform_limit).abs() < 0.15);
        }
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 12);
    }

    #[test]
    fn untagged_network_is_rejected() {
        let grid = Grid::new(64, 0.15).unwrap();
        let cfg = crate::net::NetConfig {
            levels: 1,
            base_channels: 1,
            rows: 4,
            width: 64,
            output_activation: crate::net::OutputActivation::Sigmoid,
        };
        let net = Network::<f32>::new(cfg, None, 0).unwrap();
        let ladder = CoeffLadder::symmetric(Order::Second, 10.0, 4).unwrap();
        let p = NetPipeline { net: &net, ladder: &ladder };
        let depths = [16.0, 20.0];
        assert!(mirror_study(&grid, &depths, &SystemDistortion::default(), Some(p), None, None).is_err());
    }

    #[test]
    fn raw_bscan_lines_are_fft_amplitudes() {
        let grid = Grid::default();
        let signals = glass_phantom(&grid, 8, (150.0, 250.0), 60.0, &SystemDistortion::default()).unwrap();
        let scan = assemble_bscan(&signals, Pipeline::Raw).unwrap();
        assert_eq!((scan.lines, scan.n_samples), (8, 1024));
        for (i, s) in signals.iter().enumerate() {
            assert_eq!(scan.line(i), s.amplitude().as_slice());
            assert_eq!(count_peaks(scan.line(i), 0.1), 3);
        }
        let mut rev = signals.clone();
        rev.reverse();
        let back = assemble_bscan(&rev, Pipeline::Raw).unwrap();
        assert_eq!(back.line(0), scan.line(7));
        let one = assemble_bscan(&signals[..1], Pipeline::Raw).unwrap();
        assert_eq!(one.lines, 1);
        assert_eq!(one.line(0), scan.line(0));
    }

    #[test]
    fn pgm_header_and_size() {
        let scan = BScan {
            lines: 2,
            n_samples: 3,
            data: vec![0.0, 1.0, 2.0, 3.0, 4.0, 4.0],
        };
        let mut out = Vec::new();
        scan.write_pgm(&mut out).unwrap();
        assert!(out.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&out[out.len() - 6..], &[0, 64, 128, 191, 255, 255]);
    }

    #[test]
    fn mixed_grids_are_rejected() {
        let a = SystemDistortion::default().mirror(&Grid::default(), 100.0).unwrap();
        let b = SystemDistortion::default().mirror(&Grid::new(512, 0.15).unwrap(), 100.0).unwrap();
        assert!(assemble_bscan(&[a, b], Pipeline::Raw).is_err());
    }
}
