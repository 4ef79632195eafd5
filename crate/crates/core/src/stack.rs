//! Compensation stacks.
//!
//! Row `m` of a stack is the FFT amplitude of the raw signal after
//! multiplication by `exp(-i · C_m · v^order)`. A peak whose nonlinearity
//! matches `C_m` is transform-limited in that row and broadened elsewhere.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigmodel::{Order, RawSignal};
use crate::spectral::{compensation_exponent, FftPlan};

/// Default number of stack rows.
pub const DEFAULT_ROWS: usize = 32;

/// Equally spaced compensation coefficients, symmetric about zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffLadder {
    pub order: Order,
    pub values: Vec<f64>,
}

impl CoeffLadder {
    /// `values[m] = max · (2m/(M-1) - 1)`.
    pub fn symmetric(order: Order, max: f64, rows: usize) -> Result<Self> {
        if rows < 2 {
            return Err(Error::Config(format!("a ladder needs at least two rows, got {rows}")));
        }
        if !(max.is_finite() && max > 0.0) {
            return Err(Error::Config(format!("ladder maximum must be positive, got {max}")));
        }
        let values = (0..rows)
            .map(|m| max * (2.0 * m as f64 / (rows - 1) as f64 - 1.0))
            .collect();
        Ok(CoeffLadder { order, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let rows = self.values.len();
        if rows < 2 {
            return Err(Error::Config("ladder needs at least two values".into()));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("ladder values must be strictly increasing".into()));
        }
        let max = self.max();
        for (m, &v) in self.values.iter().enumerate() {
            let want = max * (2.0 * m as f64 / (rows - 1) as f64 - 1.0);
            if (v - want).abs() > 1e-9 * max.abs().max(1.0) {
                return Err(Error::Config(format!(
                    "ladder value {m} = {v} is not on the symmetric uniform ladder (expected {want})"
                )));
            }
        }
        Ok(())
    }

    /// Index of the ladder value nearest `coeff`, ties toward the smaller index.
    pub fn nearest(&self, coeff: f64) -> usize {
        let mut best = 0;
        for (m, v) in self.values.iter().enumerate() {
            if (v - coeff).abs() < (self.values[best] - coeff).abs() {
                best = m;
            }
        }
        best
    }
}

/// An `M × N` row-major matrix of compensated FFT amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub rows: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub ladder: CoeffLadder,
    pub normalized: bool,
}

impl Stack {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.rows[m * self.n_cols..(m + 1) * self.n_cols]
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.rows[m * self.n_cols + n]
    }

    /// Whole-stack min-max normalization.
    pub fn normalize(self) -> Result<Stack> {
        let rows = minmax_normalize(&self.rows)?;
        Ok(Stack {
            rows,
            normalized: true,
            ..self
        })
    }

    /// `M` lines of `N` comma-separated values.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for m in 0..self.n_rows {
            let line: Vec<String> = self.row(m).iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Builds the stack of `sig` for every coefficient of `ladder`.
///
/// Rows are computed in parallel into disjoint slices, so the result is
/// identical to the sequential order.
pub fn build_stack(sig: &RawSignal, ladder: &CoeffLadder) -> Result<Stack> {
    ladder.validate()?;
    let n = sig.grid.n_samples;
    if sig.samples.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "signal has {} samples, grid expects {n}",
            sig.samples.len()
        )));
    }
    let plan = FftPlan::new(n)?;
    let mut rows = vec![0.0; ladder.len() * n];
    rows.par_chunks_mut(n)
        .zip(ladder.values.par_iter())
        .for_each(|(row, &coeff)| {
            let exponent = compensation_exponent(&sig.grid, ladder.order, coeff);
            let mut buf: Vec<_> = sig.samples.iter().zip(&exponent).map(|(&s, e)| e * s).collect();
            plan.forward(&mut buf).expect("plan length matches grid");
            for (dst, b) in row.iter_mut().zip(&buf) {
                *dst = b.norm();
            }
        });
    Ok(Stack {
        rows,
        n_rows: ladder.len(),
        n_cols: n,
        ladder: ladder.clone(),
        normalized: false,
    })
}

/// `(x - min) / (max - min)` with one global min and max.
pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    let (min, max) = min_max(values)?;
    let span = max - min;
    Ok(values.iter().map(|&x| (x - min) / span).collect())
}

/// Single-precision variant used when storing dataset records.
pub fn minmax_normalize_f32(values: &[f64]) -> Result<Vec<f32>> {
    Ok(minmax_normalize(values)?.into_iter().map(|x| x as f32).collect())
}

fn min_max(values: &[f64]) -> Result<(f64, f64)> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &x in values {
        if !x.is_finite() {
            return Err(Error::NonFinite("normalization input".into()));
        }
        min = min.min(x);
        max = max.max(x);
    }
    if !(max > min) {
        return Err(Error::DegenerateRange);
    }
    Ok((min, max))
}

/// Reads a stack CSV written by [`Stack::write_csv`].
pub fn read_stack_csv<R: BufRead>(input: R, ladder: CoeffLadder) -> Result<Stack> {
    let mut rows = Vec::new();
    let mut n_cols = None;
    let mut n_rows = 0;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|_| Error::ShapeMismatch(format!("bad stack value {f:?}"))))
            .collect::<Result<_>>()?;
        match n_cols {
            None => n_cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::ShapeMismatch(format!("ragged stack CSV: {c} vs {}", values.len())))
            }
            _ => {}
        }
        rows.extend(values);
        n_rows += 1;
    }
    if n_rows != ladder.len() {
        return Err(Error::ShapeMismatch(format!("stack CSV has {n_rows} rows, ladder has {}", ladder.len())));
    }
    let normalized = rows.iter().all(|v| (0.0..=1.0).contains(v));
    Ok(Stack {
        rows,
        n_rows,
        n_cols: n_cols.unwrap_or(0),
        ladder,
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::fwhm;
    use crate::sigmodel::{synthesize_signal, Grid, Interface, ObjectSpec};

    fn positive_peak(row: &[f64], near: usize) -> usize {
        (near - 6..=near + 6).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap()
    }

    #[test]
    fn ladder_shape() {
        let ladder = CoeffLadder::symmetric(Order::Second, 60.0, 32).unwrap();
        assert_eq!(ladder.len(), 32);
        assert_eq!(ladder.values[0], -60.0);
        assert_eq!(ladder.values[31], 60.0);
        ladder.validate().unwrap();
        for m in 0..32 {
            assert!((ladder.values[m] + ladder.values[31 - m]).abs() < 1e-12);
        }
        let bad = CoeffLadder {
            order: Order::Second,
            values: vec![0.0, 1.0, 5.0],
        };
        assert!(bad.validate().is_err());
        assert!(CoeffLadder::symmetric(Order::Third, 0.0, 32).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(minmax_normalize(&[2.0, 4.0, 6.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        let canon = vec![0.0, 0.25, 1.0, 0.7];
        assert_eq!(minmax_normalize(&canon).unwrap(), canon);
        assert!(matches!(minmax_normalize(&[3.0, 3.0]), Err(Error::DegenerateRange)));
        assert!(minmax_normalize(&[]).is_err());
    }

    #[test]
    fn unchirped_tone_is_sharpest_in_central_rows() {
        let grid = Grid::default();
        let sig = synthesize_signal(&ObjectSpec::single(Interface::new(200.0, 1.0, 0.0, 0.0)), &grid).unwrap();
        let ladder = CoeffLadder::symmetric(Order::Second, 60.0, 32).unwrap();
        let stack = build_stack(&sig, &ladder).unwrap();
        let widths: Vec<f64> = (0..32)
            .map(|m| {
                let row = stack.row(m);
                fwhm(row, positive_peak(row, 200)).unwrap()
            })
            .collect();
        let min = widths.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((widths[15] - min).abs() < 1e-9 && (widths[16] - min).abs() < 1e-9);
        for m in 0..15 {
            assert!(widths[m] > widths[m + 1]);
        }
        for m in 16..31 {
            assert!(widths[m + 1] > widths[m]);
        }
    }

    #[test]
    fn matched_row_is_transform_limited_and_mirror_doubles() {
        let grid = Grid::default();
        let ladder = CoeffLadder::symmetric(Order::Second, 60.0, 32).unwrap();
        let a2 = ladder.values[7];
        let sig = synthesize_signal(&ObjectSpec::single(Interface::new(200.0, 1.0, a2, 0.0)), &grid).unwrap();
        let clean = synthesize_signal(&ObjectSpec::single(Interface::new(200.0, 1.0, 0.0, 0.0)), &grid).unwrap();
        let limit = fwhm(&clean.amplitude(), 200).unwrap();
        let stack = build_stack(&sig, &ladder).unwrap();
        let row = stack.row(7);
        assert!((fwhm(row, positive_peak(row, 200)).unwrap() - limit).abs() < 0.2);
        let doubled = synthesize_signal(&ObjectSpec::single(Interface::new(200.0, 1.0, 2.0 * a2, 0.0)), &grid).unwrap();
        let doubled_width = fwhm(&doubled.amplitude(), 200).unwrap();
        let mirror_width = fwhm(row, positive_peak(row, 1024 - 200)).unwrap();
        assert!((mirror_width - doubled_width).abs() / doubled_width < 0.1);
    }

    #[test]
    fn each_peak_is_sharpest_in_its_own_row() {
        let grid = Grid::default();
        let ladder = CoeffLadder::symmetric(Order::Second, 60.0, 32).unwrap();
        let obj = ObjectSpec::new(vec![
            Interface::new(60.0, 0.9, -45.0, 0.0),
            Interface::new(150.0, 0.6, -10.0, 0.0),
            Interface::new(260.0, 0.8, 20.0, 0.0),
            Interface::new(380.0, 0.5, 52.0, 0.0),
        ]);
        let stack = build_stack(&synthesize_signal(&obj, &grid).unwrap(), &ladder).unwrap();
        let mut best_rows = Vec::new();
        for iface in &obj.interfaces {
            let f = iface.freq as usize;
            let best = (0..32)
                .min_by(|&a, &b| {
                    let wa = fwhm(stack.row(a), positive_peak(stack.row(a), f)).unwrap();
                    let wb = fwhm(stack.row(b), positive_peak(stack.row(b), f)).unwrap();
                    wa.total_cmp(&wb)
                })
                .unwrap();
            assert_eq!(best, ladder.nearest(iface.a2));
            best_rows.push(best);
        }
        assert!(best_rows.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn stack_csv_round_trip() {
        let grid = Grid::new(64, 0.15).unwrap();
        let sig = synthesize_signal(&ObjectSpec::single(Interface::new(12.0, 1.0, 3.0, 0.0)), &grid).unwrap();
        let ladder = CoeffLadder::symmetric(Order::Second, 10.0, 4).unwrap();
        let stack = build_stack(&sig, &ladder).unwrap().normalize().unwrap();
        let mut buf = Vec::new();
        stack.write_csv(&mut buf).unwrap();
        let back = read_stack_csv(buf.as_slice(), ladder).unwrap();
        assert_eq!(back, stack);
    }
}
