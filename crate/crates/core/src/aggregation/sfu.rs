//! Special function unit: table-based exponentiation and LeakyReLU.

use crate::config::SfuConfig;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Sfu {
    table: Vec<f64>,
    min: f64,
    max: f64,
    step: f64,
    exact: bool,
    pub exp_latency: u64,
    pub lrelu_latency: u64,
    pub divide_latency: u64,
}

impl Sfu {
    pub fn new(cfg: &SfuConfig) -> Self {
        let step = (cfg.clamp_max - cfg.clamp_min) / cfg.lut_size as f64;
        Self {
            table: (0..=cfg.lut_size).map(|i| (cfg.clamp_min + i as f64 * step).exp()).collect(),
            min: cfg.clamp_min,
            max: cfg.clamp_max,
            step,
            exact: cfg.exact_exp,
            exp_latency: cfg.exp_latency,
            lrelu_latency: cfg.lrelu_latency,
            divide_latency: cfg.divide_latency,
        }
    }

    /// `exp(x)` and whether `x` fell outside the table domain and was clamped.
    ///
    /// The table holds `exp` at evenly spaced points; the remainder `r` past
    /// the nearest lower point is corrected with `1 + r + r²/2`.
    pub fn exp<T: Scalar>(&self, x: T) -> (T, bool) {
        let xf = x.as_f64();
        if self.exact {
            return (x.exp(), false);
        }
        let clamped = !(self.min..=self.max).contains(&xf);
        let xc = xf.clamp(self.min, self.max);
        let idx = (((xc - self.min) / self.step) as usize).min(self.table.len() - 1);
        let r = xc - (self.min + idx as f64 * self.step);
        (T::lit(self.table[idx] * (1.0 + r + 0.5 * r * r)), clamped)
    }

    pub fn leaky_relu<T: Scalar>(&self, x: T, slope: T) -> T {
        crate::reference::leaky_relu(x, slope)
    }
}
