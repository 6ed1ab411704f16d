//! Benchmark sequence generation: the Hénon map and the Mackey-Glass delay
//! differential equation, plus the contiguous train/test split.

use std::io::Write;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HenonParams {
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Default for HenonParams {
    fn default() -> Self {
        Self {
            a: 1.4,
            b: 0.3,
            x0: 0.0,
            y0: 0.0,
        }
    }
}

/// Mackey-Glass parameters. All times are in the same (arbitrary) unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MackeyGlassParams {
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub tau_delay: f64,
    pub euler_dt: f64,
    pub sample_interval: f64,
    pub history_init: f64,
}

impl Default for MackeyGlassParams {
    fn default() -> Self {
        Self {
            beta: 0.2,
            gamma: 0.1,
            eta: 10.0,
            tau_delay: 18.0,
            euler_dt: 0.15,
            sample_interval: 3.0,
            history_init: 1.2,
        }
    }
}

impl MackeyGlassParams {
    /// Length of the delay ring buffer, `tau_delay / euler_dt`.
    pub fn delay_steps(&self) -> Result<usize> {
        exact_ratio(self.tau_delay, self.euler_dt, "tau_delay")
    }

    /// Euler steps between consecutive samples.
    pub fn steps_per_sample(&self) -> Result<usize> {
        let n = exact_ratio(self.sample_interval, self.euler_dt, "sample_interval")?;
        if n == 0 {
            return Err(Error::InvalidParameter(
                "sample_interval must be at least one euler step".into(),
            ));
        }
        Ok(n)
    }
}

fn exact_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::InvalidParameter("euler_dt must be > 0".into()));
    }
    if !(num >= 0.0) || !num.is_finite() {
        return Err(Error::InvalidParameter(format!("{what} must be >= 0")));
    }
    let ratio = num / den;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "{what} = {num} is not an integer multiple of euler_dt = {den}"
        )));
    }
    Ok(rounded as usize)
}

/// Where a series came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Henon(HenonParams),
    MackeyGlass(MackeyGlassParams),
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    values: Vec<T>,
    origin: Origin,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn new(values: Vec<T>, origin: Origin) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "time series must be non-empty".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: i as f64 });
        }
        Ok(Self { values, origin })
    }

    pub fn external(values: Vec<T>) -> Result<Self> {
        Self::new(values, Origin::External)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_max(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (Float::min(lo, v), Float::max(hi, v))
            })
    }

    /// Drops the first `n` samples (e.g. an integration transient).
    pub fn skip(&self, n: usize) -> Result<Self> {
        if n >= self.len() {
            return Err(Error::EmptyPartition(format!(
                "cannot skip {n} of {} samples",
                self.len()
            )));
        }
        Ok(Self {
            values: self.values[n..].to_vec(),
            origin: self.origin.clone(),
        })
    }

    /// Writes `index,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{:.16e}", v.to_f64_lossy())?;
        }
        Ok(())
    }
}

/// Iterates the two-dimensional Hénon map from `(x0, y0)` and returns
/// `x_1 .. x_{n_steps}`.
pub fn gen_henon<T: Scalar>(params: &HenonParams, n_steps: usize) -> Result<TimeSeries<T>> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be >= 1".into()));
    }
    let (a, b) = (T::lit(params.a), T::lit(params.b));
    let one = T::one();
    let limit = T::lit(DIVERGENCE_LIMIT);
    let (mut x, mut y) = (T::lit(params.x0), T::lit(params.y0));
    let mut values = Vec::with_capacity(n_steps);
    for step in 1..=n_steps {
        let x_next = y + one - a * x * x;
        y = b * x;
        x = x_next;
        if !x.is_finite() || Float::abs(x) > limit {
            return Err(Error::Diverged {
                step,
                value: x.to_f64_lossy(),
            });
        }
        values.push(x);
    }
    TimeSeries::new(values, Origin::Henon(*params))
}

/// Forward-Euler integration of the Mackey-Glass equation with a constant
/// pre-history, sampled every `sample_interval`. The first sample is `x(0)`.
pub fn gen_mackey_glass<T: Scalar>(
    params: &MackeyGlassParams,
    n_samples: usize,
) -> Result<TimeSeries<T>> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let delay = params.delay_steps()?;
    let stride = params.steps_per_sample()?;

    let beta = T::lit(params.beta);
    let gamma = T::lit(params.gamma);
    let eta = T::lit(params.eta);
    let dt = T::lit(params.euler_dt);
    let one = T::one();

    // history[head] is x(t - tau) for the current t.
    let mut history = vec![T::lit(params.history_init); delay.max(1)];
    let mut head = 0usize;
    let mut x = T::lit(params.history_init);

    let mut values = Vec::with_capacity(n_samples);
    values.push(x);
    let mut step: usize = 0;
    while values.len() < n_samples {
        for _ in 0..stride {
            let lagged = if delay == 0 { x } else { history[head] };
            let dx = beta * lagged / (one + Float::powf(lagged, eta)) - gamma * x;
            let next = x + dt * dx;
            if delay > 0 {
                history[head] = x;
                head = (head + 1) % delay;
            }
            x = next;
            step += 1;
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    time: step as f64 * params.euler_dt,
                });
            }
        }
        values.push(x);
    }
    TimeSeries::new(values, Origin::MackeyGlass(*params))
}

/// A contiguous train/test split. The first `washout` training samples are
/// excluded from regression targets downstream.
#[derive(Debug, Clone)]
pub struct Split<T> {
    pub train: TimeSeries<T>,
    pub test: TimeSeries<T>,
    pub washout: usize,
}

pub fn split_series<T: Scalar>(
    series: &TimeSeries<T>,
    train_fraction: f64,
    washout: usize,
) -> Result<Split<T>> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::EmptyPartition(format!(
            "train_fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n = series.len();
    let n_train = split_point(n, train_fraction);
    if n_train == 0 || n_train >= n {
        return Err(Error::EmptyPartition(format!(
            "{n} samples at fraction {train_fraction} leave an empty partition"
        )));
    }
    if washout >= n_train {
        return Err(Error::EmptyPartition(format!(
            "washout {washout} consumes the whole training set ({n_train})"
        )));
    }
    let values = series.values();
    Ok(Split {
        train: TimeSeries::new(values[..n_train].to_vec(), series.origin().clone())?,
        test: TimeSeries::new(values[n_train..].to_vec(), series.origin().clone())?,
        washout,
    })
}

/// Number of training samples for a series of length `n`.
pub fn split_point(n: usize, train_fraction: f64) -> usize {
    (n as f64 * train_fraction).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn henon_first_steps() {
        let s = gen_henon::<f64>(&HenonParams::default(), 3).unwrap();
        assert_abs_diff_eq!(s.values()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.values()[1], -0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(s.values()[2], 1.076, epsilon = 1e-14);
    }

    #[test]
    fn henon_degenerate_is_constant() {
        let p = HenonParams {
            a: 0.0,
            b: 0.0,
            x0: 0.7,
            y0: -3.0,
        };
        let s = gen_henon::<f64>(&p, 10).unwrap();
        assert_eq!(s.values()[0], -2.0);
        assert!(s.values()[1..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn henon_matches_one_dimensional_recurrence() {
        let p = HenonParams::default();
        let s = gen_henon::<f64>(&p, 2000).unwrap();
        let x = s.values();
        // x_{-1} is implied by y0 = b x_{-1}; start checking from n = 1.
        for n in 1..x.len() - 1 {
            let rhs = 1.0 + p.b * x[n - 1] - p.a * x[n] * x[n];
            assert!((x[n + 1] - rhs).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn henon_divergence_reports_step() {
        let p = HenonParams {
            a: 3.0,
            b: 0.3,
            x0: 2.0,
            y0: 0.0,
        };
        match gen_henon::<f64>(&p, 100) {
            Err(Error::Diverged { step, .. }) => assert!(step > 1 && step < 10),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn mackey_glass_zero_derivative_is_constant() {
        let p = MackeyGlassParams {
            beta: 0.0,
            gamma: 0.0,
            history_init: 0.42,
            ..Default::default()
        };
        let s = gen_mackey_glass::<f64>(&p, 50).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.42));
    }

    #[test]
    fn mackey_glass_single_euler_step() {
        let p = MackeyGlassParams {
            beta: 0.0,
            gamma: 0.1,
            history_init: 1.0,
            euler_dt: 0.15,
            sample_interval: 0.15,
            ..Default::default()
        };
        let s = gen_mackey_glass::<f64>(&p, 2).unwrap();
        assert_eq!(s.values()[0], 1.0);
        assert_abs_diff_eq!(s.values()[1], 0.985, epsilon = 1e-15);
    }

    #[test]
    fn mackey_glass_rejects_non_multiple_delay() {
        let p = MackeyGlassParams {
            tau_delay: 17.99,
            ..Default::default()
        };
        assert!(matches!(
            gen_mackey_glass::<f64>(&p, 10),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn mackey_glass_paper_parameters_shape() {
        let p = MackeyGlassParams::default();
        assert_eq!(p.delay_steps().unwrap(), 120);
        assert_eq!(p.steps_per_sample().unwrap(), 20);
    }

    #[test]
    fn split_examples() {
        let s = TimeSeries::external((0..100).map(f64::from).collect()).unwrap();
        let sp = split_series(&s, 0.8, 0).unwrap();
        assert_eq!((sp.train.len(), sp.test.len()), (80, 20));

        let s = TimeSeries::external((0..10).map(f64::from).collect()).unwrap();
        let sp = split_series(&s, 0.5, 2).unwrap();
        assert_eq!(sp.train.len(), 5);
        assert_eq!(sp.washout, 2);

        assert!(matches!(
            split_series(&s, 1.0, 0),
            Err(Error::EmptyPartition(_))
        ));
        assert!(split_series(&s, 0.5, 5).is_err());
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let s = gen_henon::<f64>(&HenonParams::default(), 3).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,value"));
        let row: Vec<&str> = lines.nth(2).unwrap().split(',').collect();
        assert_eq!(row[0], "2");
        assert_eq!(row[1].parse::<f64>().unwrap(), s.values()[2]);
    }

    #[test]
    fn works_in_single_precision() {
        let s = gen_henon::<f32>(&HenonParams::default(), 3).unwrap();
        assert!((s.values()[2] - 1.076).abs() < 1e-6);
    }
}
