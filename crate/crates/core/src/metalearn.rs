//! Simulated-annealing search over reservoir structure.
//!
//! Starting from an initial graph, each iteration removes one random internal
//! edge, scores the candidate, and accepts it with probability
//! `min(1, exp(-(f_new - f_old) / T(n)))` where `T(n) = 1 / (scale * n)` and
//! `n` counts from 1. Edges are only ever removed.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Edge, ReservoirNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealConfig {
    pub n_steps: usize,
    pub temperature_scale: f64,
    pub rng_seed: u64,
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be >= 1".into()));
        }
        if !(self.temperature_scale > 0.0) {
            return Err(Error::InvalidParameter(
                "temperature_scale must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// `T(n) = 1 / (scale * n)`, `n >= 1`.
pub fn temperature(n: usize, scale: f64) -> f64 {
    1.0 / (scale * n as f64)
}

pub fn acceptance_probability(delta_f: f64, temperature: f64) -> f64 {
    if delta_f <= 0.0 {
        return 1.0;
    }
    (-delta_f / temperature).exp().min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealStep {
    pub iteration: usize,
    /// NaN when the candidate could not be evaluated.
    #[serde(with = "nan_as_null")]
    pub candidate_nrmse: f64,
    pub accepted: bool,
    /// Edge count of the current (accepted) network after this iteration.
    pub edge_count: usize,
    pub removed: Edge,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealTrace {
    pub initial_nrmse: f64,
    pub steps: Vec<AnnealStep>,
    pub best_network: ReservoirNetwork,
    pub best_nrmse: f64,
}

impl AnnealTrace {
    /// Writes `iteration,candidate_nrmse,accepted,edge_count` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,candidate_nrmse,accepted,edge_count")?;
        for s in &self.steps {
            let f = if s.candidate_nrmse.is_finite() {
                format!("{:.16e}", s.candidate_nrmse)
            } else {
                "nan".to_string()
            };
            writeln!(out, "{},{f},{},{}", s.iteration, s.accepted, s.edge_count)?;
        }
        Ok(())
    }

    /// Re-applies the accepted removals to `initial`.
    pub fn replay(&self, initial: &ReservoirNetwork) -> Option<ReservoirNetwork> {
        self.steps
            .iter()
            .filter(|s| s.accepted)
            .try_fold(initial.clone(), |net, s| net.remove_edge(&s.removed))
    }

    /// Best accepted score after each iteration.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = self.initial_nrmse;
        self.steps
            .iter()
            .map(|s| {
                if s.accepted && s.candidate_nrmse < best {
                    best = s.candidate_nrmse;
                }
                best
            })
            .collect()
    }
}

/// Resumable annealing state. Each iteration draws from its own RNG stream,
/// so resuming from a checkpoint replays exactly the uninterrupted run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annealer {
    pub config: AnnealConfig,
    /// Last completed iteration (0 before the loop starts).
    pub iteration: usize,
    pub current: ReservoirNetwork,
    pub current_nrmse: f64,
    pub exhausted: bool,
    pub trace: AnnealTrace,
}

impl Annealer {
    /// Scores the initial network (the f_1 evaluation).
    pub fn new<F>(
        initial: ReservoirNetwork,
        config: AnnealConfig,
        objective: &mut F,
    ) -> Result<Self>
    where
        F: FnMut(&ReservoirNetwork) -> Result<f64>,
    {
        config.validate()?;
        if initial.internal_edge_count() == 0 {
            return Err(Error::NoInternalEdges);
        }
        let f1 = objective(&initial)?;
        if !f1.is_finite() {
            return Err(Error::InvalidParameter(
                "initial network score is not finite".into(),
            ));
        }
        Ok(Self {
            config,
            iteration: 0,
            current: initial.clone(),
            current_nrmse: f1,
            exhausted: false,
            trace: AnnealTrace {
                initial_nrmse: f1,
                steps: Vec::new(),
                best_network: initial,
                best_nrmse: f1,
            },
        })
    }

    pub fn is_done(&self) -> bool {
        self.exhausted || self.iteration >= self.config.n_steps
    }

    fn rng_for(&self, iteration: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.rng_seed);
        rng.set_stream(iteration as u64);
        rng
    }

    /// Runs one iteration. Returns `false` once the search is over.
    pub fn step<F>(&mut self, objective: &mut F) -> bool
    where
        F: FnMut(&ReservoirNetwork) -> Result<f64>,
    {
        if self.is_done() {
            return false;
        }
        let n = self.iteration + 1;
        let mut rng = self.rng_for(n);
        let (candidate, removed) = match self.current.remove_random_internal_edge(&mut rng) {
            Ok(c) => c,
            Err(_) => {
                self.exhausted = true;
                return false;
            }
        };
        let (f2, note) = match objective(&candidate) {
            Ok(f) if f.is_finite() => (f, None),
            Ok(f) => (f64::NAN, Some(format!("non-finite score {f}"))),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        let r: f64 = rng.gen();
        let accepted = note.is_none()
            && r <= acceptance_probability(
                f2 - self.current_nrmse,
                temperature(n, self.config.temperature_scale),
            );
        if accepted {
            self.current = candidate;
            self.current_nrmse = f2;
            if f2 < self.trace.best_nrmse {
                self.trace.best_nrmse = f2;
                self.trace.best_network = self.current.clone();
            }
        }
        self.trace.steps.push(AnnealStep {
            iteration: n,
            candidate_nrmse: f2,
            accepted,
            edge_count: self.current.edge_count(),
            removed,
            note,
        });
        self.iteration = n;
        if self.current.internal_edge_count() == 0 {
            self.exhausted = true;
        }
        true
    }

    /// Steps until done or `limit` more iterations have run.
    pub fn run<F>(&mut self, objective: &mut F, limit: Option<usize>)
    where
        F: FnMut(&ReservoirNetwork) -> Result<f64>,
    {
        let mut budget = limit.unwrap_or(usize::MAX);
        while budget > 0 && self.step(objective) {
            budget -= 1;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(text)?;
        a.current.validate()?;
        Ok(a)
    }
}

/// Runs the full search and returns the final accepted network and trace.
pub fn anneal<F>(
    initial: ReservoirNetwork,
    config: AnnealConfig,
    mut objective: F,
) -> Result<(ReservoirNetwork, AnnealTrace)>
where
    F: FnMut(&ReservoirNetwork) -> Result<f64>,
{
    let mut annealer = Annealer::new(initial, config, &mut objective)?;
    annealer.run(&mut objective, None);
    Ok((annealer.current, annealer.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{input_ring, ring_small_world, EdgeClass, Synapse};

    const S: Synapse = Synapse {
        payload: 2.0,
        delay: 0.3,
    };

    /// Score that prefers fewer internal edges, with a deterministic wiggle.
    fn toy_objective(net: &ReservoirNetwork) -> Result<f64> {
        let k = net.internal_edge_count() as f64;
        let wiggle = net
            .edges
            .iter()
            .map(|e| (e.src * 7 + e.dst * 13) % 5)
            .sum::<usize>() as f64;
        Ok(0.05 + 0.002 * k + 1e-4 * wiggle)
    }

    #[test]
    fn temperature_schedule() {
        assert!((temperature(5, 50.0) - 0.004).abs() < 1e-15);
        assert!((temperature(1000, 50.0) - 1.0 / 50000.0).abs() < 1e-18);
    }

    #[test]
    fn acceptance_rule() {
        assert_eq!(acceptance_probability(-0.01, 1e-9), 1.0);
        assert_eq!(acceptance_probability(-0.01, 1e9), 1.0);
        let p = acceptance_probability(0.01, temperature(1000, 50.0));
        assert!(p < 1e-200);
        assert!((acceptance_probability(0.01, 0.02) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn trace_invariants() {
        let init = input_ring(12, 2, 0.1, S, 3).unwrap();
        let cfg = AnnealConfig {
            n_steps: 30,
            temperature_scale: 50.0,
            rng_seed: 7,
        };
        let (fin, trace) = anneal(init.clone(), cfg, toy_objective).unwrap();
        assert_eq!(trace.steps.len(), 30);
        let mut last = init.edge_count();
        for s in &trace.steps {
            assert!(s.edge_count <= last);
            last = s.edge_count;
            assert_eq!(s.removed.class, EdgeClass::Internal);
        }
        assert_eq!(fin.count_class(EdgeClass::OneToOne), 12);
        assert_eq!(trace.replay(&init).unwrap(), fin);
        let accepted_min = trace
            .steps
            .iter()
            .filter(|s| s.accepted)
            .map(|s| s.candidate_nrmse)
            .fold(trace.initial_nrmse, f64::min);
        assert_eq!(trace.best_nrmse, accepted_min);
        assert!(trace.best_nrmse <= trace.initial_nrmse);
    }

    #[test]
    fn cold_search_only_accepts_improvements() {
        let init = ring_small_world(16, 2, 0.2, 8, S, 1).unwrap();
        let cfg = AnnealConfig {
            n_steps: 40,
            temperature_scale: 1e300,
            rng_seed: 2,
        };
        let objective = |net: &ReservoirNetwork| -> Result<f64> {
            // removing edges whose src is even makes things worse
            let bad = net.edges.iter().filter(|e| e.src % 2 == 1).count() as f64;
            let good = net.edges.iter().filter(|e| e.src % 2 == 0).count() as f64;
            Ok(1.0 + 0.01 * bad - 0.01 * good)
        };
        let (_, trace) = anneal(init, cfg, objective).unwrap();
        let mut current = trace.initial_nrmse;
        for s in &trace.steps {
            if s.accepted {
                assert!(s.candidate_nrmse <= current);
                current = s.candidate_nrmse;
            }
        }
        assert!(trace.steps.iter().any(|s| !s.accepted));
    }

    #[test]
    fn stops_when_edges_run_out() {
        let init = input_ring(5, 1, 0.0, S, 0).unwrap();
        let cfg = AnnealConfig {
            n_steps: 100,
            temperature_scale: 50.0,
            rng_seed: 0,
        };
        let always_better = |net: &ReservoirNetwork| Ok(net.internal_edge_count() as f64);
        let (fin, trace) = anneal(init, cfg, always_better).unwrap();
        assert_eq!(fin.internal_edge_count(), 0);
        assert_eq!(trace.steps.len(), 10);
    }

    #[test]
    fn failed_evaluation_is_rejected_and_search_continues() {
        let init = input_ring(6, 1, 0.0, S, 0).unwrap();
        let cfg = AnnealConfig {
            n_steps: 5,
            temperature_scale: 50.0,
            rng_seed: 0,
        };
        let mut calls = 0;
        let flaky = |_: &ReservoirNetwork| {
            calls += 1;
            if calls == 3 {
                Err(Error::InvalidParameter("boom".into()))
            } else {
                Ok(0.5)
            }
        };
        let (_, trace) = anneal(init, cfg, flaky).unwrap();
        assert_eq!(trace.steps.len(), 5);
        let failed = &trace.steps[1];
        assert!(!failed.accepted);
        assert!(failed.candidate_nrmse.is_nan());
        assert!(failed.note.as_deref().unwrap().contains("boom"));
        let mut csv = Vec::new();
        trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("iteration,candidate_nrmse,accepted,edge_count\n"));
        assert!(text.contains("2,nan,false,"));
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let init = input_ring(10, 2, 0.1, S, 5).unwrap();
        let cfg = AnnealConfig {
            n_steps: 25,
            temperature_scale: 50.0,
            rng_seed: 11,
        };
        let mut obj = toy_objective;
        let mut straight = Annealer::new(init.clone(), cfg, &mut obj).unwrap();
        straight.run(&mut obj, None);

        let mut first = Annealer::new(init, cfg, &mut obj).unwrap();
        first.run(&mut obj, Some(9));
        assert_eq!(first.iteration, 9);
        let mut resumed = Annealer::from_json(&first.to_json().unwrap()).unwrap();
        resumed.run(&mut obj, None);
        assert_eq!(resumed, straight);
    }

    #[test]
    fn rejects_networks_without_internal_edges() {
        let net = ReservoirNetwork::new(2, vec![0], vec![]).unwrap();
        let cfg = AnnealConfig {
            n_steps: 1,
            temperature_scale: 50.0,
            rng_seed: 0,
        };
        assert!(matches!(
            anneal(net, cfg, toy_objective),
            Err(Error::NoInternalEdges)
        ));
    }
}
