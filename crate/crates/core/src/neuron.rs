//! Leaky integrate-and-fire neuron updates and delayed spike delivery.
//!
//! Two models live here. The continuous model is a forward-Euler step of
//! `tau_m dV/dt = -(V - V_rest) + R I(t)` with threshold/reset. The
//! fixed-point model reproduces the integer current/voltage recurrence of a
//! Loihi 2 style LIF compartment:
//!
//! ```text
//! u[t] = u[t-1] * (1 - du) + a_in
//! v[t] = v[t-1] * (1 - dv) + u[t] + bias
//! spike iff v[t] > vth ; then v[t] = 0
//! ```
//!
//! with `du`, `dv` in `0..=4095` standing for fractions of 4096, and
//! thresholds, biases and synaptic inputs all expressed in units of 64.

use std::collections::VecDeque;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parameters of the continuous LIF model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousLifParams<T> {
    pub tau_m: T,
    pub v_rest: T,
    pub v_reset: T,
    pub v_thresh: T,
    pub r_membrane: T,
}

impl<T: Scalar> ContinuousLifParams<T> {
    /// Rest and reset at 0, unit membrane resistance.
    pub fn new(tau_m: T, v_thresh: T) -> Self {
        Self {
            tau_m,
            v_rest: T::zero(),
            v_reset: T::zero(),
            v_thresh,
            r_membrane: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m > T::zero()) {
            return Err(Error::InvalidParameter("tau_m must be > 0".into()));
        }
        if !(self.v_thresh > self.v_reset) {
            return Err(Error::InvalidParameter(
                "v_thresh must exceed v_reset".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LifState<T> {
    pub v: T,
}

/// One Euler step of the continuous LIF membrane.
///
/// `i_total` is the total input current for the step. A delta-function spike
/// of weight `w` arriving during the step contributes `w / dt`, so that the
/// membrane jumps by `w / tau_m`.
pub fn step_continuous<T: Scalar>(
    state: LifState<T>,
    params: &ContinuousLifParams<T>,
    i_total: T,
    dt: T,
) -> Result<(LifState<T>, bool)> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter("dt must be > 0".into()));
    }
    let v =
        state.v + dt / params.tau_m * (-(state.v - params.v_rest) + params.r_membrane * i_total);
    if !Float::is_finite(v) {
        return Err(Error::NonFinite { time: f64::NAN });
    }
    if v >= params.v_thresh {
        Ok((LifState { v: params.v_reset }, true))
    } else {
        Ok((LifState { v }, false))
    }
}

/// Scale applied to thresholds, biases and synaptic payloads.
pub const FIXED_POINT_UNIT: i64 = 64;
/// Decay constants are fractions of `1 << DECAY_SHIFT`.
pub const DECAY_SHIFT: u32 = 12;
pub const DECAY_MAX: u16 = 4095;

/// Integer parameters of a fixed-point LIF layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointLifParams {
    pub du: u16,
    pub dv: u16,
    pub vth_mant: i32,
    pub bias_mant: i32,
}

impl FixedPointLifParams {
    pub fn validate(&self) -> Result<()> {
        if self.du > DECAY_MAX || self.dv > DECAY_MAX {
            return Err(Error::InvalidParameter(format!(
                "du/dv must lie in 0..=4095 (got {}, {})",
                self.du, self.dv
            )));
        }
        if self.vth_mant < 0 {
            return Err(Error::InvalidParameter("vth_mant must be >= 0".into()));
        }
        Ok(())
    }

    /// Threshold in membrane units (`vth_mant * 64`).
    pub fn threshold(&self) -> i64 {
        i64::from(self.vth_mant) * FIXED_POINT_UNIT
    }

    /// Bias in membrane units. Unlike the threshold and payloads it is not
    /// scaled by 64.
    pub fn bias(&self) -> i64 {
        i64::from(self.bias_mant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct FixedState {
    pub u: i32,
    pub v: i32,
}

/// Applies `value * (1 - d / 4096)` truncated toward zero; `d = 4095` is full
/// decay.
pub fn decay(value: i64, d: u16) -> i64 {
    if d >= DECAY_MAX {
        return 0;
    }
    let keep = (1i64 << DECAY_SHIFT) - i64::from(d);
    let scaled = (value.abs() * keep) >> DECAY_SHIFT;
    value.signum() * scaled
}

fn narrow(x: i64, what: &'static str) -> Result<i32> {
    i32::try_from(x).map_err(|_| Error::Overflow(what))
}

/// One timestep of the fixed-point LIF compartment. `a_in` is already in
/// membrane units (payload * 64, summed over arriving spikes).
pub fn step_fixed_point(
    state: FixedState,
    params: &FixedPointLifParams,
    a_in: i64,
) -> Result<(FixedState, bool)> {
    let u = decay(i64::from(state.u), params.du)
        .checked_add(a_in)
        .ok_or(Error::Overflow("current"))?;
    let u = narrow(u, "current")?;
    let v = decay(i64::from(state.v), params.dv) + i64::from(u) + params.bias();
    let v = narrow(v, "voltage")?;
    if i64::from(v) > params.threshold() {
        Ok((FixedState { u, v: 0 }, true))
    } else {
        Ok((FixedState { u, v }, false))
    }
}

/// A spike in flight towards `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeEvent<P> {
    pub target: usize,
    pub payload: P,
    pub deliver_at: u64,
}

/// Calendar queue of spike events keyed by integer simulation step.
///
/// Events are returned by [`SpikeQueue::pop_due`] in scheduling order, which
/// keeps per-step summation deterministic.
#[derive(Debug, Clone)]
pub struct SpikeQueue<P> {
    base: u64,
    buckets: VecDeque<Vec<SpikeEvent<P>>>,
    pending: usize,
}

impl<P: Copy> Default for SpikeQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P: Copy> SpikeQueue<P> {
    pub fn new() -> Self {
        Self {
            base: 0,
            buckets: VecDeque::new(),
            pending: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.pending
    }

    pub fn is_empty(&self) -> bool {
        self.pending == 0
    }

    /// Enqueues one event per fanout entry, all due at `now + delay`.
    pub fn schedule_spike<I>(&mut self, fanout: I, now: u64, delay: u64)
    where
        I: IntoIterator<Item = (usize, P)>,
    {
        let at = now + delay;
        let mut fanout = fanout.into_iter().peekable();
        if fanout.peek().is_none() {
            return;
        }
        if self.buckets.is_empty() && self.base < now {
            self.base = now;
        }
        let slot = at.saturating_sub(self.base) as usize;
        if self.buckets.len() <= slot {
            self.buckets.resize_with(slot + 1, Vec::new);
        }
        let bucket = &mut self.buckets[slot];
        for (target, payload) in fanout {
            bucket.push(SpikeEvent {
                target,
                payload,
                deliver_at: at,
            });
            self.pending += 1;
        }
    }

    /// Removes and returns every event with `deliver_at <= now`.
    pub fn pop_due(&mut self, now: u64, out: &mut Vec<SpikeEvent<P>>) {
        while self.base <= now {
            match self.buckets.pop_front() {
                Some(mut bucket) => {
                    self.pending -= bucket.len();
                    out.append(&mut bucket);
                    self.base += 1;
                }
                None => {
                    self.base = now + 1;
                    break;
                }
            }
        }
    }
}
