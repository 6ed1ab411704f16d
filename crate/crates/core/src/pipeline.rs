//! One-step-ahead prediction task: encode, simulate, fit the readout on the
//! training windows, score on the held-out windows.
//!
//! Column `n` of the state matrix (recorded while `u_n` was presented) is
//! paired with the target `u_{n+1}`. Training pairs use columns
//! `washout .. n_train - 1`; test pairs use columns `n_train - 1 .. T - 1`, so
//! every test-split value is predicted exactly once.

use nalgebra::DMatrix;

use crate::encoding::{build_schedule, EncodingConfig, InputSchedule};
use crate::engine::{simulate, SimulationConfig, StateMatrix};
use crate::error::{Error, Result};
use crate::readout::{nrmse, predict, train, Normalization, ReadoutModel, Score};
use crate::scalar::Scalar;
use crate::timeseries::{split_series, TimeSeries};
use crate::topology::ReservoirNetwork;

/// Frozen task definition. Evaluating a network is a pure function of this
/// and the network.
#[derive(Debug, Clone)]
pub struct EvalPipeline<T: Scalar> {
    pub series: TimeSeries<T>,
    pub train_fraction: f64,
    pub washout: usize,
    pub simulation: SimulationConfig<T>,
    pub normalization: Normalization,
}

/// Everything produced by one evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation<T: Scalar> {
    pub encoding: EncodingConfig<T>,
    pub schedule: InputSchedule,
    pub states: StateMatrix<T>,
    pub model: ReadoutModel<T>,
    pub n_train: usize,
    pub test_targets: Vec<T>,
    pub test_predictions: Vec<T>,
    pub train_score: Score,
    pub score_std: Score,
    pub score_range: Score,
}

impl<T: Scalar> Evaluation<T> {
    pub fn score(&self, normalization: Normalization) -> Score {
        match normalization {
            Normalization::Std => self.score_std,
            Normalization::Range => self.score_range,
        }
    }
}

impl<T: Scalar> EvalPipeline<T> {
    fn encoding_for(
        &self,
        net: &ReservoirNetwork,
        train: &TimeSeries<T>,
    ) -> Result<EncodingConfig<T>> {
        let (i0, delta) = match &self.simulation {
            SimulationConfig::Continuous(c) => (c.i0, c.delta),
            SimulationConfig::FixedPoint(c) => (
                T::lit(c.input.bias().max(1) as f64),
                T::from_count(c.steps_per_window),
            ),
        };
        EncodingConfig::fit(train, net.m_in(), i0, delta)
    }

    pub fn run(&self, net: &ReservoirNetwork) -> Result<Evaluation<T>> {
        let split = split_series(&self.series, self.train_fraction, self.washout)?;
        let n_train = split.train.len();
        let total = self.series.len();
        if total - n_train < 2 {
            return Err(Error::EmptyPartition(
                "test split needs at least 2 samples".into(),
            ));
        }
        if n_train - 1 <= self.washout {
            return Err(Error::EmptyPartition(
                "no training pairs after washout".into(),
            ));
        }
        let encoding = self.encoding_for(net, &split.train)?;
        let schedule = build_schedule(&self.series, &encoding)?;
        let states = simulate(net, &schedule, &self.simulation)?;
        let u = self.series.values();

        let train_cols = n_train - 1 - self.washout;
        let x_train = states.columns(self.washout, train_cols);
        let y_train = DMatrix::from_row_slice(1, train_cols, &u[self.washout + 1..n_train]);
        let model = train(&x_train, &y_train)?;
        let fit = predict(&model, &x_train)?;
        let train_score = nrmse(fit.as_slice(), y_train.as_slice(), self.normalization)?;

        let test_cols = total - n_train;
        let x_test = states.columns(n_train - 1, test_cols);
        let test_targets = u[n_train..].to_vec();
        let test_predictions = predict(&model, &x_test)?.as_slice().to_vec();
        let score_std = nrmse(&test_predictions, &test_targets, Normalization::Std)?;
        let score_range = nrmse(&test_predictions, &test_targets, Normalization::Range)?;

        Ok(Evaluation {
            encoding,
            schedule,
            states,
            model,
            n_train,
            test_targets,
            test_predictions,
            train_score,
            score_std,
            score_range,
        })
    }
}

/// Held-out NRMSE of `net` under the pipeline's normalization.
pub fn evaluate_network<T: Scalar>(
    net: &ReservoirNetwork,
    pipeline: &EvalPipeline<T>,
) -> Result<f64> {
    Ok(pipeline.run(net)?.score(pipeline.normalization).nrmse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ContinuousSimConfig;
    use crate::neuron::ContinuousLifParams;
    use crate::timeseries::{gen_henon, HenonParams};
    use crate::topology::{handpicked_ring, Synapse};

    fn henon_pipeline(n: usize) -> EvalPipeline<f64> {
        EvalPipeline {
            series: gen_henon(&HenonParams::default(), n).unwrap(),
            train_fraction: 0.8,
            washout: 20,
            simulation: SimulationConfig::Continuous(ContinuousSimConfig {
                neuron: ContinuousLifParams::new(1.0, 5.0),
                i0: 100.0,
                delta: 1.0,
                steps_per_window: 200,
            }),
            normalization: Normalization::Std,
        }
    }

    #[test]
    fn edgeless_network_is_bias_plus_input_regression() {
        // inputs alone encode u_n one-hot, the rest are silent
        let net = ReservoirNetwork::new(100, (0..50).collect(), vec![]).unwrap();
        let pipe = henon_pipeline(400);
        let eval = pipe.run(&net).unwrap();
        assert!(eval.score_std.nrmse.is_finite());
        assert_eq!(eval.test_targets.len(), 80);
        assert_eq!(eval.states.n_windows(), 400);
    }

    #[test]
    fn silent_reservoir_falls_back_to_bias_only() {
        let net = ReservoirNetwork::new(4, vec![0, 1], vec![]).unwrap();
        let mut pipe = henon_pipeline(300);
        if let SimulationConfig::Continuous(c) = &mut pipe.simulation {
            c.i0 = 1.0; // never reaches threshold 5
        }
        let eval = pipe.run(&net).unwrap();
        assert!(eval.states.matrix().rows(1, 4).iter().all(|&v| v == 0.0));
        // bias-only predictor = training mean, so test nrmse is close to 1
        let s = eval.score_std.nrmse;
        assert!((0.9..1.2).contains(&s), "{s}");
    }

    #[test]
    fn evaluation_is_deterministic() {
        let net = handpicked_ring(
            10,
            Synapse {
                payload: 2.0,
                delay: 0.3,
            },
        )
        .unwrap();
        let pipe = henon_pipeline(200);
        assert_eq!(
            evaluate_network(&net, &pipe).unwrap().to_bits(),
            evaluate_network(&net, &pipe).unwrap().to_bits()
        );
    }

    #[test]
    fn too_short_series_is_rejected() {
        let net = handpicked_ring(
            10,
            Synapse {
                payload: 2.0,
                delay: 0.3,
            },
        )
        .unwrap();
        let pipe = henon_pipeline(22);
        assert!(pipe.run(&net).is_err());
    }
}
