//! Reservoir simulation over an input schedule.
//!
//! Each schedule entry is one presentation window. The scheduled input
//! neuron is driven for the whole window, every neuron is stepped, and the
//! per-window spike counts become one column of the [`StateMatrix`]. Neuron
//! state and in-flight spikes carry over between windows.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::encoding::InputSchedule;
use crate::error::{Error, Result};
use crate::neuron::{
    step_continuous, step_fixed_point, ContinuousLifParams, FixedPointLifParams, FixedState,
    LifState, SpikeQueue, FIXED_POINT_UNIT,
};
use crate::scalar::Scalar;
use crate::topology::ReservoirNetwork;

/// Continuous LIF simulation settings. `dt = delta / steps_per_window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousSimConfig<T> {
    pub neuron: ContinuousLifParams<T>,
    pub i0: T,
    pub delta: T,
    pub steps_per_window: usize,
}

impl<T: Scalar> ContinuousSimConfig<T> {
    pub fn dt(&self) -> T {
        self.delta / T::from_count(self.steps_per_window)
    }

    pub fn validate(&self) -> Result<()> {
        self.neuron.validate()?;
        if self.steps_per_window == 0 || !(self.delta > T::zero()) {
            return Err(Error::InvalidParameter(
                "steps_per_window must be >= 1 and delta > 0".into(),
            ));
        }
        Ok(())
    }

    /// Edge delay in whole simulation steps (rounded to nearest).
    pub fn delay_steps(&self, delay: f64) -> u64 {
        (delay / self.dt().to_f64_lossy()).round() as u64
    }
}

/// Fixed-point simulation: an input layer driving the network one-to-one,
/// the network itself, and two non-spiking integrator layers that copy the
/// input layer and the network one-to-one for readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointSimConfig {
    /// Loihi timesteps per presentation window.
    pub steps_per_window: usize,
    /// Input layer. Its `bias_mant` is applied only to the scheduled neuron.
    pub input: FixedPointLifParams,
    pub reservoir: FixedPointLifParams,
    pub output: FixedPointLifParams,
    /// Weight of input-layer to network connections.
    pub input_payload: i32,
    /// Weight of the connections into the integrator layers.
    pub output_payload: i32,
}

impl FixedPointSimConfig {
    pub fn validate(&self) -> Result<()> {
        self.input.validate()?;
        self.reservoir.validate()?;
        self.output.validate()?;
        if self.steps_per_window == 0 || self.output_payload <= 0 {
            return Err(Error::InvalidParameter(
                "steps_per_window and output_payload must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SimulationConfig<T> {
    Continuous(ContinuousSimConfig<T>),
    FixedPoint(FixedPointSimConfig),
}

/// `(rows) x (windows)` matrix of spike counts whose row 0 is the constant
/// bias 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix<T: Scalar> {
    data: DMatrix<T>,
}

impl<T: Scalar> StateMatrix<T> {
    /// Builds from per-window count columns, prepending the bias row.
    pub fn from_count_columns(n_rows: usize, columns: &[Vec<u32>]) -> Self {
        let mut data = Vec::with_capacity((n_rows + 1) * columns.len());
        for col in columns {
            debug_assert_eq!(col.len(), n_rows);
            data.push(T::one());
            data.extend(col.iter().map(|&c| T::from_count(c as usize)));
        }
        Self {
            data: DMatrix::from_vec(n_rows + 1, columns.len(), data),
        }
    }

    /// Wraps an arbitrary matrix (row 0 is expected to be the bias row).
    pub fn from_matrix(data: DMatrix<T>) -> Self {
        Self { data }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_windows(&self) -> usize {
        self.data.ncols()
    }

    /// Spike count of `neuron` (0-based, bias excluded) in `window`.
    pub fn count(&self, neuron: usize, window: usize) -> T {
        self.data[(neuron + 1, window)]
    }

    /// Columns `range` as a new matrix.
    pub fn columns(&self, start: usize, len: usize) -> DMatrix<T> {
        self.data.columns(start, len).into_owned()
    }

    /// Writes `window,neuron,count` rows for the count rows.
    pub fn write_counts_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "window,neuron,count")?;
        for w in 0..self.n_windows() {
            for n in 0..self.n_rows() - 1 {
                writeln!(out, "{w},{n},{}", self.count(n, w))?;
            }
        }
        Ok(())
    }
}

/// One membrane potential sample for figure output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneSample {
    pub time: f64,
    pub neuron: usize,
    pub v: f64,
}

pub fn write_membrane_csv<W: Write>(samples: &[MembraneSample], mut out: W) -> Result<()> {
    writeln!(out, "time,neuron,v")?;
    for s in samples {
        writeln!(out, "{:.16e},{},{:.16e}", s.time, s.neuron, s.v)?;
    }
    Ok(())
}

fn check_schedule(net: &ReservoirNetwork, schedule: &InputSchedule) -> Result<()> {
    let m_in = net.m_in();
    if let Some(&bad) = schedule.indices.iter().find(|&&i| i == 0 || i > m_in) {
        return Err(Error::InvalidParameter(format!(
            "schedule index {bad} outside 1..={m_in}"
        )));
    }
    Ok(())
}

/// Runs the configured model and returns the state matrix.
pub fn simulate<T: Scalar>(
    net: &ReservoirNetwork,
    schedule: &InputSchedule,
    config: &SimulationConfig<T>,
) -> Result<StateMatrix<T>> {
    match config {
        SimulationConfig::Continuous(c) => Ok(simulate_continuous(net, schedule, c, 0)?.0),
        SimulationConfig::FixedPoint(c) => fixed_point_readout_counts(net, schedule, c),
    }
}

type Fanout<T> = Vec<Vec<(u64, Vec<(usize, T)>)>>;

fn continuous_fanout<T: Scalar>(
    net: &ReservoirNetwork,
    config: &ContinuousSimConfig<T>,
) -> Fanout<T> {
    let mut out: Fanout<T> = vec![Vec::new(); net.n_neurons];
    for e in &net.edges {
        let delay = config.delay_steps(e.delay);
        let groups = &mut out[e.src];
        let target = (e.dst, T::lit(e.payload));
        match groups.iter_mut().find(|(d, _)| *d == delay) {
            Some((_, list)) => list.push(target),
            None => groups.push((delay, vec![target])),
        }
    }
    out
}

/// Continuous LIF simulation. Membrane samples are recorded for the first
/// `trace_steps` simulation steps.
pub fn simulate_continuous<T: Scalar>(
    net: &ReservoirNetwork,
    schedule: &InputSchedule,
    config: &ContinuousSimConfig<T>,
    trace_steps: u64,
) -> Result<(StateMatrix<T>, Vec<MembraneSample>)> {
    config.validate()?;
    check_schedule(net, schedule)?;
    let m = net.n_neurons;
    let dt = config.dt();
    let inv_dt = T::one() / dt;
    let spw = config.steps_per_window as u64;
    let fanout = continuous_fanout(net, config);

    let mut state = vec![
        LifState {
            v: config.neuron.v_rest
        };
        m
    ];
    let mut syn = vec![T::zero(); m];
    let mut queue: SpikeQueue<T> = SpikeQueue::new();
    let mut due = Vec::new();
    let mut spikers = Vec::new();
    let mut trace = Vec::new();
    let mut columns = Vec::with_capacity(schedule.len());

    for (window, &index) in schedule.indices.iter().enumerate() {
        let active = net.input_neurons[index - 1];
        let mut counts = vec![0u32; m];
        for k in 0..spw {
            let step = window as u64 * spw + k;
            due.clear();
            queue.pop_due(step, &mut due);
            for e in &due {
                syn[e.target] += e.payload;
            }
            spikers.clear();
            for i in 0..m {
                let mut current = syn[i] * inv_dt;
                if i == active {
                    current += config.i0;
                }
                let (next, spiked) = step_continuous(state[i], &config.neuron, current, dt)
                    .map_err(|e| match e {
                        Error::NonFinite { .. } => Error::NonFinite {
                            time: (step as f64 + 1.0) * dt.to_f64_lossy(),
                        },
                        other => other,
                    })?;
                state[i] = next;
                syn[i] = T::zero();
                if spiked {
                    counts[i] += 1;
                    spikers.push(i);
                }
            }
            for &i in &spikers {
                for (delay, targets) in &fanout[i] {
                    queue.schedule_spike(targets.iter().copied(), step, *delay);
                }
            }
            if step < trace_steps {
                let t = (step as f64 + 1.0) * dt.to_f64_lossy();
                trace.extend(state.iter().enumerate().map(|(neuron, s)| MembraneSample {
                    time: t,
                    neuron,
                    v: s.v.to_f64_lossy(),
                }));
            }
        }
        columns.push(counts);
    }
    Ok((StateMatrix::from_count_columns(m, &columns), trace))
}

fn integer_payload(payload: f64) -> Result<i64> {
    if payload.fract() != 0.0 || !payload.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "fixed-point payload must be an integer, got {payload}"
        )));
    }
    Ok(payload as i64 * FIXED_POINT_UNIT)
}

/// Result of a fixed-point run: integrator readout plus direct spike counts
/// of the same neurons, row-aligned.
#[derive(Debug, Clone)]
pub struct FixedPointRun<T: Scalar> {
    pub integrated: StateMatrix<T>,
    pub direct: StateMatrix<T>,
}

/// Fixed-point simulation read out through the integrator layers. Rows are
/// bias, input layer (`m_in`), network (`n_neurons`).
pub fn fixed_point_readout_counts<T: Scalar>(
    net: &ReservoirNetwork,
    schedule: &InputSchedule,
    config: &FixedPointSimConfig,
) -> Result<StateMatrix<T>> {
    Ok(simulate_fixed_point(net, schedule, config)?.integrated)
}

/// Timestep semantics: spikes emitted at step `t` reach the network at
/// `t + 1`; the integrator layers see them within step `t`, so the
/// window readout covers exactly the window's spikes.
pub fn simulate_fixed_point<T: Scalar>(
    net: &ReservoirNetwork,
    schedule: &InputSchedule,
    config: &FixedPointSimConfig,
) -> Result<FixedPointRun<T>> {
    config.validate()?;
    check_schedule(net, schedule)?;
    let m_in = net.m_in();
    let m = net.n_neurons;
    let rows = m_in + m;

    let mut fanout: Vec<Vec<(usize, i64)>> = vec![Vec::new(); m];
    for e in &net.edges {
        fanout[e.src].push((e.dst, integer_payload(e.payload)?));
    }
    let input_weight = i64::from(config.input_payload) * FIXED_POINT_UNIT;
    let output_weight = i64::from(config.output_payload) * FIXED_POINT_UNIT;

    let mut input_state = vec![FixedState::default(); m_in];
    let mut res_state = vec![FixedState::default(); m];
    let mut out_state = vec![FixedState::default(); rows];
    let mut pending = vec![0i64; m];
    let mut next_pending = vec![0i64; m];

    let idle = FixedPointLifParams {
        bias_mant: 0,
        ..config.input
    };

    let mut integrated = Vec::with_capacity(schedule.len());
    let mut direct = Vec::with_capacity(schedule.len());

    for &index in &schedule.indices {
        let active = index - 1;
        let mut counts = vec![0u32; rows];
        for _ in 0..config.steps_per_window {
            next_pending.fill(0);
            let mut spiked_rows: Vec<usize> = Vec::new();
            for (j, s) in input_state.iter_mut().enumerate() {
                let params = if j == active { &config.input } else { &idle };
                let (next, spiked) = step_fixed_point(*s, params, 0)?;
                *s = next;
                if spiked {
                    spiked_rows.push(j);
                    let dst = net.input_neurons[j];
                    next_pending[dst] = next_pending[dst]
                        .checked_add(input_weight)
                        .ok_or(Error::Overflow("synaptic input"))?;
                }
            }
            for i in 0..m {
                let (next, spiked) = step_fixed_point(res_state[i], &config.reservoir, pending[i])?;
                res_state[i] = next;
                if spiked {
                    spiked_rows.push(m_in + i);
                    for &(dst, w) in &fanout[i] {
                        next_pending[dst] = next_pending[dst]
                            .checked_add(w)
                            .ok_or(Error::Overflow("synaptic input"))?;
                    }
                }
            }
            std::mem::swap(&mut pending, &mut next_pending);

            let mut k = 0;
            for (row, s) in out_state.iter_mut().enumerate() {
                let a_in = if spiked_rows.get(k) == Some(&row) {
                    k += 1;
                    counts[row] += 1;
                    output_weight
                } else {
                    0
                };
                let (next, spiked) = step_fixed_point(*s, &config.output, a_in)?;
                if spiked {
                    return Err(Error::Overflow("output integrator threshold"));
                }
                *s = next;
            }
        }
        let mut col = Vec::with_capacity(rows);
        for s in out_state.iter_mut() {
            let v = i64::from(s.v);
            col.push((v / output_weight).max(0) as u32);
            *s = FixedState::default();
        }
        integrated.push(col);
        direct.push(counts);
    }
    Ok(FixedPointRun {
        integrated: StateMatrix::from_count_columns(rows, &integrated),
        direct: StateMatrix::from_count_columns(rows, &direct),
    })
}

/// Activity summary over the count rows (bias row excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeStats {
    pub total_spikes: f64,
    pub per_neuron_mean: Vec<f64>,
    pub silent_neurons: usize,
}

pub fn spike_stats<T: Scalar>(matrix: &StateMatrix<T>) -> SpikeStats {
    let windows = matrix.n_windows().max(1) as f64;
    let mut total = 0.0;
    let mut silent = 0;
    let mut per_neuron_mean = Vec::with_capacity(matrix.n_rows().saturating_sub(1));
    for r in 1..matrix.n_rows() {
        let s: f64 = matrix
            .matrix()
            .row(r)
            .iter()
            .map(|v| v.to_f64_lossy())
            .sum();
        total += s;
        if s == 0.0 {
            silent += 1;
        }
        per_neuron_mean.push(s / windows);
    }
    SpikeStats {
        total_spikes: total,
        per_neuron_mean,
        silent_neurons: silent,
    }
}
