//! Spatial (one-hot) encoding of a scalar series onto the input neurons.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::timeseries::TimeSeries;

/// Scaling of series values onto input indices `1..=m_in`, plus the
/// injection current and window length used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig<T> {
    pub m_in: usize,
    pub i0: T,
    pub delta: T,
    pub series_min: T,
    pub series_max: T,
}

impl<T: Scalar> EncodingConfig<T> {
    /// Uses the range of `fit_on` (typically the training split).
    pub fn fit(fit_on: &TimeSeries<T>, m_in: usize, i0: T, delta: T) -> Result<Self> {
        let (series_min, series_max) = fit_on.min_max();
        let cfg = Self {
            m_in,
            i0,
            delta,
            series_min,
            series_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_in < 2 {
            return Err(Error::InvalidParameter("m_in must be >= 2".into()));
        }
        if !(self.series_max > self.series_min) {
            return Err(Error::DegenerateRange(self.series_min.to_f64_lossy()));
        }
        if !(self.i0 > T::zero()) || !(self.delta > T::zero()) {
            return Err(Error::InvalidParameter("i0 and delta must be > 0".into()));
        }
        Ok(())
    }
}

/// 1-based index of the input neuron driven during each window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSchedule {
    pub indices: Vec<usize>,
}

impl InputSchedule {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn truncated(&self, windows: usize) -> Self {
        Self {
            indices: self.indices[..windows.min(self.len())].to_vec(),
        }
    }
}

/// Maps `value` linearly so that `series_min -> 1` and `series_max -> m_in`,
/// rounding half up. Out-of-range values clamp to the endpoints.
pub fn discretize<T: Scalar>(value: T, config: &EncodingConfig<T>) -> Result<usize> {
    if !(config.series_max > config.series_min) {
        return Err(Error::DegenerateRange(config.series_min.to_f64_lossy()));
    }
    if !Float::is_finite(value) {
        return Err(Error::InvalidParameter(
            "cannot encode a non-finite value".into(),
        ));
    }
    let half = T::lit(0.5);
    let span = T::from_count(config.m_in - 1);
    let scaled =
        T::one() + (value - config.series_min) / (config.series_max - config.series_min) * span;
    let index = Float::floor(scaled + half).to_f64_lossy();
    Ok(index.clamp(1.0, config.m_in as f64) as usize)
}

pub fn build_schedule<T: Scalar>(
    series: &TimeSeries<T>,
    config: &EncodingConfig<T>,
) -> Result<InputSchedule> {
    let indices = series
        .values()
        .iter()
        .map(|&v| discretize(v, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(InputSchedule { indices })
}
