//! JSON experiment configs and the commands that turn them into artifacts.
//!
//! Every command is a pure function of the config (including its seed): it
//! writes into an existing output directory and produces byte-identical
//! files on re-runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    simulate_continuous, spike_stats, write_membrane_csv, SimulationConfig, SpikeStats,
};
use crate::error::Error;
use crate::metalearn::{AnnealConfig, Annealer};
use crate::pipeline::{EvalPipeline, Evaluation};
use crate::readout::{write_predictions_csv, Normalization};
use crate::timeseries::{gen_henon, gen_mackey_glass, HenonParams, MackeyGlassParams, TimeSeries};
use crate::topology::{
    cluster_chains, erdos_renyi, handpicked_ring, input_ring, linear_chains, ring_small_world,
    ReservoirNetwork, Synapse,
};

/// Failure of a command, split by exit-code class.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage} failed: {source}")]
    Pipeline {
        stage: &'static str,
        #[source]
        source: Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Pipeline { .. } => 2,
        }
    }
}

fn stage(stage: &'static str) -> impl FnOnce(Error) -> RunError {
    move |source| RunError::Pipeline { stage, source }
}

fn config_err(e: impl std::fmt::Display) -> RunError {
    RunError::Config(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Henon {
        #[serde(default)]
        params: HenonParams,
        n_samples: usize,
        #[serde(default)]
        skip: usize,
    },
    MackeyGlass {
        #[serde(default)]
        params: MackeyGlassParams,
        n_samples: usize,
        /// Leading samples dropped to discard the integration transient.
        #[serde(default)]
        skip: usize,
    },
}

impl TaskConfig {
    pub fn generate(&self) -> crate::Result<TimeSeries<f64>> {
        match self {
            TaskConfig::Henon {
                params,
                n_samples,
                skip,
            } => gen_henon(params, n_samples + skip)?.skip(*skip),
            TaskConfig::MackeyGlass {
                params,
                n_samples,
                skip,
            } => gen_mackey_glass(params, n_samples + skip)?.skip(*skip),
        }
    }
}

/// Network family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkDescriptor {
    ErdosRenyi {
        m: usize,
        p: f64,
        m_in: usize,
    },
    RingSmallWorld {
        m: usize,
        k: usize,
        p_add: f64,
        m_in: usize,
    },
    InputRing {
        m_in: usize,
        k: usize,
        p_add: f64,
    },
    HandpickedRing {
        m_in: usize,
    },
    ClusterChains {
        n_chains: usize,
        clusters_per_chain: usize,
        cluster_size: usize,
    },
    LinearChains {
        m_in: usize,
        chain_len: usize,
    },
    /// A network JSON file; payload/delay come from the file.
    File {
        path: PathBuf,
    },
}

impl NetworkDescriptor {
    pub fn build(&self, synapse: Synapse, seed: u64) -> crate::Result<ReservoirNetwork> {
        match self {
            NetworkDescriptor::ErdosRenyi { m, p, m_in } => {
                erdos_renyi(*m, *p, *m_in, synapse, seed)
            }
            NetworkDescriptor::RingSmallWorld { m, k, p_add, m_in } => {
                ring_small_world(*m, *k, *p_add, *m_in, synapse, seed)
            }
            NetworkDescriptor::InputRing { m_in, k, p_add } => {
                input_ring(*m_in, *k, *p_add, synapse, seed)
            }
            NetworkDescriptor::HandpickedRing { m_in } => handpicked_ring(*m_in, synapse),
            NetworkDescriptor::ClusterChains {
                n_chains,
                clusters_per_chain,
                cluster_size,
            } => cluster_chains(*n_chains, *clusters_per_chain, *cluster_size, synapse),
            NetworkDescriptor::LinearChains { m_in, chain_len } => {
                linear_chains(*m_in, *chain_len, synapse)
            }
            NetworkDescriptor::File { path } => ReservoirNetwork::load(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub washout: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            washout: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSettings {
    pub n_steps: usize,
    pub temperature_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub network: NetworkDescriptor,
    pub synapse: Synapse,
    pub simulation: SimulationConfig<f64>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub nrmse_norm: Normalization,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anneal: Option<AnnealSettings>,
    /// Windows of membrane trace to dump from `run` (continuous model only).
    #[serde(default)]
    pub trace_windows: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(config_err)
    }

    /// Loads a config; a relative network file path resolves against the
    /// config's directory and is stored absolute, so the echoed config runs
    /// from anywhere.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let NetworkDescriptor::File { path: net_path } = &mut cfg.network {
            if net_path.is_relative() {
                let joined = path.parent().unwrap_or(Path::new(".")).join(&*net_path);
                *net_path = joined.canonicalize().unwrap_or(joined);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if let NetworkDescriptor::File { path } = &self.network {
            if !path.exists() {
                return Err(config_err(format!(
                    "network file {} does not exist",
                    path.display()
                )));
            }
        }
        match &self.simulation {
            SimulationConfig::Continuous(c) => c.validate().map_err(config_err)?,
            SimulationConfig::FixedPoint(c) => c.validate().map_err(config_err)?,
        }
        if let Some(a) = &self.anneal {
            AnnealConfig {
                n_steps: a.n_steps,
                temperature_scale: a.temperature_scale,
                rng_seed: self.seed,
            }
            .validate()
            .map_err(config_err)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn pipeline(&self) -> Result<EvalPipeline<f64>, RunError> {
        Ok(EvalPipeline {
            series: self.task.generate().map_err(stage("series generation"))?,
            train_fraction: self.split.train_fraction,
            washout: self.split.washout,
            simulation: self.simulation,
            normalization: self.nrmse_norm,
        })
    }

    pub fn build_network(&self) -> Result<ReservoirNetwork, RunError> {
        self.network
            .build(self.synapse, self.seed)
            .map_err(stage("network construction"))
    }
}

fn require_dir(out: &Path) -> Result<(), RunError> {
    if !out.is_dir() {
        return Err(config_err(format!(
            "output directory {} does not exist",
            out.display()
        )));
    }
    Ok(())
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> crate::Result<()>,
) -> Result<(), RunError> {
    let file = File::create(path).map_err(|e| stage("write output")(e.into()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(stage("write output"))?;
    w.flush().map_err(|e| stage("write output")(e.into()))
}

fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    write_file(path, |w| Ok(w.write_all(text.as_bytes())?))
}

/// `gen-series`: writes `series.csv`.
pub fn cmd_gen_series(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, RunError> {
    require_dir(out)?;
    let series = cfg.task.generate().map_err(stage("series generation"))?;
    let path = out.join("series.csv");
    write_file(&path, |w| series.write_csv(w))?;
    Ok(path)
}

/// `build-net`: writes `network.json`.
pub fn cmd_build_net(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, RunError> {
    require_dir(out)?;
    let net = cfg.build_network()?;
    let path = out.join("network.json");
    write_text(&path, &net.to_json().map_err(stage("serialize network"))?)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub normalization: Normalization,
    pub nrmse: f64,
    pub nrmse_std: f64,
    pub nrmse_range: f64,
    pub rmse: f64,
    pub train_nrmse: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_neurons: usize,
    pub n_edges: usize,
}

impl ScoreReport {
    pub fn from_eval(eval: &Evaluation<f64>, net: &ReservoirNetwork, norm: Normalization) -> Self {
        Self {
            normalization: norm,
            nrmse: eval.score(norm).nrmse,
            nrmse_std: eval.score_std.nrmse,
            nrmse_range: eval.score_range.nrmse,
            rmse: eval.score_std.rmse,
            train_nrmse: eval.train_score.nrmse,
            n_train: eval.n_train,
            n_test: eval.test_targets.len(),
            n_neurons: net.n_neurons,
            n_edges: net.edge_count(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub score: ScoreReport,
    pub stats: SpikeStats,
}

/// Evaluates one network without writing anything.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<(ReservoirNetwork, Evaluation<f64>), RunError> {
    let net = cfg.build_network()?;
    let eval = cfg
        .pipeline()?
        .run(&net)
        .map_err(stage("reservoir evaluation"))?;
    Ok((net, eval))
}

/// `run`: evaluates the configured network and writes the results bundle.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome, RunError> {
    require_dir(out)?;
    let (net, eval) = evaluate(cfg)?;
    let score = ScoreReport::from_eval(&eval, &net, cfg.nrmse_norm);
    let stats = spike_stats(&eval.states);

    write_text(&out.join("config.json"), &cfg.to_json())?;
    write_text(
        &out.join("network.json"),
        &net.to_json().map_err(stage("serialize network"))?,
    )?;
    write_text(&out.join("score.json"), &json(&score))?;
    write_text(&out.join("spike_stats.json"), &json(&stats))?;
    write_text(&out.join("readout.json"), &json(&eval.model.to_file()))?;
    write_file(&out.join("predictions.csv"), |w| {
        write_predictions_csv(&eval.test_targets, &eval.test_predictions, w)
    })?;
    write_file(&out.join("attractor.csv"), |w| {
        writeln!(w, "index,target_n,target_n1,pred_n,pred_n1")?;
        let (t, p) = (&eval.test_targets, &eval.test_predictions);
        for i in 0..t.len().saturating_sub(1) {
            writeln!(
                w,
                "{i},{:.16e},{:.16e},{:.16e},{:.16e}",
                t[i],
                t[i + 1],
                p[i],
                p[i + 1]
            )?;
        }
        Ok(())
    })?;
    if cfg.trace_windows > 0 {
        if let SimulationConfig::Continuous(c) = &cfg.simulation {
            let schedule = eval.schedule.truncated(cfg.trace_windows);
            let steps = (cfg.trace_windows * c.steps_per_window) as u64;
            let (_, trace) =
                simulate_continuous(&net, &schedule, c, steps).map_err(stage("membrane trace"))?;
            write_file(&out.join("membrane.csv"), |w| write_membrane_csv(&trace, w))?;
        }
    }
    Ok(RunOutcome { score, stats })
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

#[derive(Debug, Clone)]
pub struct MetalearnOutcome {
    pub annealer: Annealer,
    pub initial_network: ReservoirNetwork,
}

/// `metalearn`: anneals from the configured network. Writes `checkpoint.json`
/// every `checkpoint_every` iterations and resumes from an existing
/// checkpoint in `out` when `resume` is set. `stop_after` bounds the number
/// of iterations executed by this call (for interrupt testing).
pub fn cmd_metalearn(
    cfg: &ExperimentConfig,
    out: &Path,
    resume: bool,
    checkpoint_every: usize,
    stop_after: Option<usize>,
) -> Result<MetalearnOutcome, RunError> {
    require_dir(out)?;
    let settings = cfg
        .anneal
        .ok_or_else(|| config_err("metalearn needs an \"anneal\" section"))?;
    let anneal_cfg = AnnealConfig {
        n_steps: settings.n_steps,
        temperature_scale: settings.temperature_scale,
        rng_seed: cfg.seed,
    };
    let initial = cfg.build_network()?;
    let pipeline = cfg.pipeline()?;
    let mut objective = |net: &ReservoirNetwork| crate::pipeline::evaluate_network(net, &pipeline);

    let checkpoint = out.join("checkpoint.json");
    let mut annealer = if resume && checkpoint.exists() {
        let text =
            std::fs::read_to_string(&checkpoint).map_err(|e| stage("read checkpoint")(e.into()))?;
        let a = Annealer::from_json(&text).map_err(stage("read checkpoint"))?;
        if a.config != anneal_cfg {
            return Err(config_err(
                "checkpoint was written with a different anneal config",
            ));
        }
        a
    } else {
        write_text(&out.join("config.json"), &cfg.to_json())?;
        write_text(
            &out.join("initial_network.json"),
            &initial.to_json().map_err(stage("serialize network"))?,
        )?;
        Annealer::new(initial.clone(), anneal_cfg, &mut objective)
            .map_err(stage("initial evaluation"))?
    };

    let every = checkpoint_every.max(1);
    let mut budget = stop_after.unwrap_or(usize::MAX);
    while budget > 0 && annealer.step(&mut objective) {
        budget -= 1;
        if annealer.iteration % every == 0 {
            write_text(
                &checkpoint,
                &annealer.to_json().map_err(stage("write checkpoint"))?,
            )?;
        }
    }
    write_text(
        &checkpoint,
        &annealer.to_json().map_err(stage("write checkpoint"))?,
    )?;

    if annealer.is_done() {
        let trace = &annealer.trace;
        write_file(&out.join("trace.csv"), |w| trace.write_csv(w))?;
        write_text(
            &out.join("final_network.json"),
            &annealer
                .current
                .to_json()
                .map_err(stage("serialize network"))?,
        )?;
        write_text(
            &out.join("best_network.json"),
            &trace
                .best_network
                .to_json()
                .map_err(stage("serialize network"))?,
        )?;
        let summary = serde_json::json!({
            "iterations": annealer.iteration,
            "initial_nrmse": trace.initial_nrmse,
            "final_nrmse": annealer.current_nrmse,
            "best_nrmse": trace.best_nrmse,
            "initial_internal_edges": initial.internal_edge_count(),
            "final_internal_edges": annealer.current.internal_edge_count(),
            "accepted": trace.steps.iter().filter(|s| s.accepted).count(),
        });
        write_text(&out.join("score.json"), &json(&summary))?;
    }
    Ok(MetalearnOutcome {
        annealer,
        initial_network: initial,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub seed: u64,
    pub nrmse_std: Option<f64>,
    pub nrmse_range: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub mean: f64,
    pub std: f64,
}

/// `sweep`: evaluates seeds `seed .. seed + n_seeds` (in parallel) and
/// writes `sweep.csv` with per-seed rows followed by `mean` and `std` rows
/// for the configured normalization.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    n_seeds: usize,
    out: &Path,
) -> Result<SweepSummary, RunError> {
    if n_seeds == 0 {
        return Err(config_err("n_seeds must be >= 1"));
    }
    require_dir(out)?;
    let pipeline = cfg.pipeline()?;
    let rows: Vec<SweepRow> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|offset| {
            let seed = cfg.seed + offset;
            let result = cfg
                .network
                .build(cfg.synapse, seed)
                .and_then(|net| pipeline.run(&net));
            match result {
                Ok(eval) => SweepRow {
                    seed,
                    nrmse_std: Some(eval.score_std.nrmse),
                    nrmse_range: Some(eval.score_range.nrmse),
                    error: None,
                },
                Err(e) => SweepRow {
                    seed,
                    nrmse_std: None,
                    nrmse_range: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let selected: Vec<f64> = rows
        .iter()
        .filter_map(|r| match cfg.nrmse_norm {
            Normalization::Std => r.nrmse_std,
            Normalization::Range => r.nrmse_range,
        })
        .collect();
    let n = selected.len().max(1) as f64;
    let mean = selected.iter().sum::<f64>() / n;
    let std = (selected
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n)
        .sqrt();

    write_text(&out.join("config.json"), &cfg.to_json())?;
    write_file(&out.join("sweep.csv"), |w| {
        writeln!(w, "seed,nrmse_std,nrmse_range,error")?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for r in &rows {
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            writeln!(
                w,
                "{},{},{},{err}",
                r.seed,
                fmt(r.nrmse_std),
                fmt(r.nrmse_range)
            )?;
        }
        writeln!(w, "mean,{mean:.16e},,")?;
        writeln!(w, "std,{std:.16e},,")?;
        Ok(())
    })?;
    Ok(SweepSummary { rows, mean, std })
}
