//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson).

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// `xs` must be strictly increasing and at least two points long.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::ShapeMismatch(format!(
                "interpolation needs two or more matched points, got {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("interpolation abscissae must be strictly increasing".into()));
        }
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for k in 1..n - 1 {
            slopes[k] = if secants[k - 1] * secants[k] <= 0.0 {
                0.0
            } else {
                0.5 * (secants[k - 1] + secants[k])
            };
        }
        for k in 0..n - 1 {
            if secants[k] == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let alpha = slopes[k] / secants[k];
            let beta = slopes[k + 1] / secants[k];
            let r = alpha * alpha + beta * beta;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[k] = tau * alpha * secants[k];
                slopes[k + 1] = tau * beta * secants[k];
            }
        }
        Ok(MonotoneCubic { xs, ys, slopes })
    }

    /// Interpolant on the integer grid `0, 1, …, ys.len()-1`.
    pub fn on_index_grid(ys: Vec<f64>) -> Result<Self> {
        let xs = (0..ys.len()).map(|i| i as f64).collect();
        Self::new(xs, ys)
    }

    /// Value at `x`; outside the data range the end segments are extended linearly.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        let k = match self.xs.binary_search_by(|p| p.partial_cmp(&x).expect("finite abscissa")) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1]
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_and_lines() {
        let f = MonotoneCubic::new(vec![0.0, 1.0, 3.0, 4.0], vec![1.0, 3.0, 7.0, 9.0]).unwrap();
        for (x, y) in [(0.0, 1.0), (1.0, 3.0), (3.0, 7.0), (4.0, 9.0), (2.0, 5.0), (0.5, 2.0)] {
            assert!((f.eval(x) - y).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn preserves_monotonicity_of_steps() {
        let ys = vec![0.0, 0.0, 0.1, 5.0, 5.1, 5.1, 10.0];
        let f = MonotoneCubic::on_index_grid(ys).unwrap();
        let mut prev = f.eval(0.0);
        for i in 1..=600 {
            let v = f.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_abscissae() {
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(MonotoneCubic::new(vec![0.0], vec![1.0]).is_err());
        assert!(MonotoneCubic::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }
}
