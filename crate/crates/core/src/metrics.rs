//! GoF, peak-shape diagnostics and per-interface-count reports.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::net::train::predict;
use crate::net::Network;
use crate::sigmodel::{Order, MAX_INTERFACES, MIN_INTERFACES};

/// A prediction counts as poor when its GoF falls below this percentage.
pub const GOF_CUTOFF: f64 = 95.0;

const RANGE_TOLERANCE: f64 = 1e-9;

fn check_unit_range(name: &str, v: &[f64]) -> Result<()> {
    for &x in v {
        if !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&x) {
            return Err(Error::NotNormalized(format!("{name} contains {x}, outside [0, 1]")));
        }
    }
    Ok(())
}

/// Percentage of positions where `|pred - gt| <= threshold` (both on `[0, 1]`).
pub fn gof(pred: &[f64], gt: &[f64], threshold: f64) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} values, ground truth has {}",
            pred.len(),
            gt.len()
        )));
    }
    if !(threshold > 0.0) {
        return Err(Error::Config(format!("GoF threshold must be positive, got {threshold}")));
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_unit_range("prediction", pred)?;
    check_unit_range("ground truth", gt)?;
    let hits = pred.iter().zip(gt).filter(|(p, g)| (*p - *g).abs() <= threshold).count();
    Ok(100.0 * hits as f64 / pred.len() as f64)
}

fn check_peak(amp: &[f64], peak: usize) -> Result<()> {
    if peak >= amp.len() {
        return Err(Error::ShapeMismatch(format!("peak bin {peak} outside a length-{} vector", amp.len())));
    }
    let left_ok = peak == 0 || amp[peak - 1] <= amp[peak];
    let right_ok = peak + 1 == amp.len() || amp[peak + 1] <= amp[peak];
    if !(left_ok && right_ok) {
        return Err(Error::Config(format!("bin {peak} is not a local maximum")));
    }
    Ok(())
}

/// Fractional positions of the half-maximum crossings nearest `peak`.
fn half_max_crossings(amp: &[f64], peak: usize) -> Result<(f64, f64)> {
    check_peak(amp, peak)?;
    let half = amp[peak] / 2.0;
    let mut i = peak;
    while amp[i] > half {
        if i == 0 {
            return Err(Error::NoCrossing { side: "left", peak });
        }
        i -= 1;
    }
    let left = i as f64 + (half - amp[i]) / (amp[i + 1] - amp[i]);
    let mut j = peak;
    while amp[j] > half {
        if j + 1 == amp.len() {
            return Err(Error::NoCrossing { side: "right", peak });
        }
        j += 1;
    }
    let right = (j - 1) as f64 + (amp[j - 1] - half) / (amp[j - 1] - amp[j]);
    Ok((left, right))
}

/// Full width at half maximum in bins, linear interpolation between samples.
pub fn fwhm(amp: &[f64], peak: usize) -> Result<f64> {
    let (left, right) = half_max_crossings(amp, peak)?;
    Ok(right - left)
}

/// Sub-bin position of the maximum from a Gaussian (log-parabolic) fit to
/// the three samples around `peak`; falls back to a plain parabola when a
/// neighbour is not positive.
pub fn refined_peak(amp: &[f64], peak: usize) -> f64 {
    if peak == 0 || peak + 1 >= amp.len() {
        return peak as f64;
    }
    let (l, c, r) = (amp[peak - 1], amp[peak], amp[peak + 1]);
    let (l, c, r) = if l > 0.0 && c > 0.0 && r > 0.0 { (l.ln(), c.ln(), r.ln()) } else { (l, c, r) };
    let denom = l - 2.0 * c + r;
    if denom >= 0.0 {
        return peak as f64;
    }
    peak as f64 + (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
}

/// `right / left - 1` for the half-maximum distances measured from the
/// refined peak position. Zero for symmetric peaks; positive when the
/// right flank is longer.
pub fn peak_asymmetry(amp: &[f64], peak: usize) -> Result<f64> {
    let (left, right) = half_max_crossings(amp, peak)?;
    let centre = refined_peak(amp, peak);
    let (dl, dr) = (centre - left, right - centre);
    if !(dl > 0.0 && dr > 0.0) {
        return Err(Error::Config(format!("degenerate half-maximum geometry around bin {peak}")));
    }
    Ok(dr / dl - 1.0)
}

/// Index of the largest value in `lo..hi`, first on ties.
pub fn argmax_in(amp: &[f64], lo: usize, hi: usize) -> usize {
    let hi = hi.min(amp.len());
    let mut best = lo;
    for i in lo..hi {
        if amp[i] > amp[best] {
            best = i;
        }
    }
    best
}

/// One interface-count bucket of a [`GofReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub interfaces: usize,
    pub below: usize,
    pub total: usize,
    pub percent_below: f64,
}

impl BucketRow {
    fn new(interfaces: usize, below: usize, total: usize) -> Self {
        let percent_below = if total == 0 { 0.0 } else { 100.0 * below as f64 / total as f64 };
        BucketRow {
            interfaces,
            below,
            total,
            percent_below,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub threshold: f64,
    pub per_sample: Vec<f64>,
    pub interface_counts: Vec<usize>,
    /// Interface counts 2..=12 in order.
    pub buckets: Vec<BucketRow>,
    pub below_total: usize,
    pub total: usize,
    pub percent_below_total: f64,
    pub mean_gof: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl GofReport {
    pub fn from_samples(threshold: f64, per_sample: Vec<f64>, interface_counts: Vec<usize>) -> Result<Self> {
        if per_sample.len() != interface_counts.len() {
            return Err(Error::ShapeMismatch("per-sample GoF and interface counts differ in length".into()));
        }
        if per_sample.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut below = [0usize; MAX_INTERFACES + 1];
        let mut total = [0usize; MAX_INTERFACES + 1];
        for (&g, &j) in per_sample.iter().zip(&interface_counts) {
            let j = j.min(MAX_INTERFACES);
            total[j] += 1;
            if g < GOF_CUTOFF {
                below[j] += 1;
            }
        }
        let buckets: Vec<BucketRow> = (MIN_INTERFACES..=MAX_INTERFACES)
            .map(|j| BucketRow::new(j, below[j], total[j]))
            .collect();
        let below_total = buckets.iter().map(|b| b.below).sum();
        let all: usize = buckets.iter().map(|b| b.total).sum();
        let mean_gof = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
        Ok(GofReport {
            threshold,
            per_sample,
            interface_counts,
            percent_below_total: if all == 0 { 0.0 } else { 100.0 * below_total as f64 / all as f64 },
            below_total,
            total: all,
            buckets,
            mean_gof,
            warnings: Vec::new(),
        })
    }

    /// One row per bucket plus a totals row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "interfaces,below_95,in_dataset,percent_below")?;
        for b in &self.buckets {
            writeln!(out, "{},{},{},{:.2}", b.interfaces, b.below, b.total, b.percent_below)?;
        }
        writeln!(out, "total,{},{},{:.2}", self.below_total, self.total, self.percent_below_total)?;
        Ok(())
    }

    /// Transposed table: interface counts as columns, one line per quantity.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<14}", "Interfaces");
        for b in &self.buckets {
            let _ = write!(s, "{:>8}", b.interfaces);
        }
        let _ = writeln!(s, "{:>9}", "Totals");
        let _ = write!(s, "{:<14}", "# below 95%");
        for b in &self.buckets {
            let _ = write!(s, "{:>8}", b.below);
        }
        let _ = writeln!(s, "{:>9}", self.below_total);
        let _ = write!(s, "{:<14}", "# in dataset");
        for b in &self.buckets {
            let _ = write!(s, "{:>8}", b.total);
        }
        let _ = writeln!(s, "{:>9}", self.total);
        let _ = write!(s, "{:<14}", "% below");
        for b in &self.buckets {
            let _ = write!(s, "{:>8.2}", b.percent_below);
        }
        let _ = writeln!(s, "{:>9.2}", self.percent_below_total);
        s
    }
}

/// Runs `net` over `samples` and reports GoF at every threshold.
///
/// An order mismatch between network and data is an error unless
/// `allow_order_mismatch` is set, in which case it is recorded as a warning.
pub fn evaluate(
    net: &Network<f32>,
    samples: &[Sample],
    data_order: Order,
    thresholds: &[f64],
    allow_order_mismatch: bool,
) -> Result<Vec<GofReport>> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut warnings = Vec::new();
    match net.order {
        Some(o) if o != data_order => {
            let e = Error::OrderMismatch {
                network: o.as_u8(),
                data: data_order.as_u8(),
            };
            if !allow_order_mismatch {
                return Err(e);
            }
            log::warn!("{e}");
            warnings.push(e.to_string());
        }
        None => warnings.push("network carries no order tag".into()),
        _ => {}
    }
    let preds = predict(net, samples, 8)?;
    let counts: Vec<usize> = samples.iter().map(|s| s.interface_count()).collect();
    thresholds
        .iter()
        .map(|&th| {
            let per_sample = preds
                .iter()
                .zip(samples)
                .map(|(p, s)| {
                    let p: Vec<f64> = p.iter().map(|&v| v as f64).collect();
                    let t: Vec<f64> = s.target.iter().map(|&v| v as f64).collect();
                    gof(&p, &t, th)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut report = GofReport::from_samples(th, per_sample, counts.clone())?;
            report.warnings = warnings.clone();
            Ok(report)
        })
        .collect()
}

/// GoF reports for precomputed predictions (e.g. a reference predictor).
pub fn evaluate_predictions(preds: &[Vec<f64>], samples: &[Sample], threshold: f64) -> Result<GofReport> {
    if preds.len() != samples.len() {
        return Err(Error::ShapeMismatch("one prediction per sample required".into()));
    }
    let per_sample = preds
        .iter()
        .zip(samples)
        .map(|(p, s)| {
            let t: Vec<f64> = s.target.iter().map(|&v| v as f64).collect();
            gof(p, &t, threshold)
        })
        .collect::<Result<Vec<_>>>()?;
    GofReport::from_samples(threshold, per_sample, samples.iter().map(|s| s.interface_count()).collect())
}
