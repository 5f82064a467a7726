use crate::error::{Error, Result};

/// Piecewise-linear interpolant over strictly ascending abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Config("a table needs at least two samples".into()));
        }
        if samples
            .iter()
            .any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(Error::Config("table samples must be finite".into()));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config(
                "table abscissae must be strictly ascending".into(),
            ));
        }
        Ok(Self {
            xs: samples.iter().map(|s| s.0).collect(),
            ys: samples.iter().map(|s| s.1).collect(),
        })
    }

    pub fn low(&self) -> f64 {
        self.xs[0]
    }

    pub fn high(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    /// Interpolated value, or `None` outside `[low, high]`.
    pub fn eval(&self, x: f64) -> Option<f64> {
        if !(x >= self.low() && x <= self.high()) {
            return None;
        }
        let hi = self.xs.partition_point(|&s| s < x).max(1);
        let lo = hi - 1;
        let t = (x - self.xs[lo]) / (self.xs[hi] - self.xs[lo]);
        Some(self.ys[lo] + t * (self.ys[hi] - self.ys[lo]))
    }
}
