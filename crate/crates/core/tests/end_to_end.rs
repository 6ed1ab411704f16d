use spiking_reservoir::encoding::{build_schedule, EncodingConfig};
use spiking_reservoir::engine::{simulate, ContinuousSimConfig, SimulationConfig};
use spiking_reservoir::experiment::{cmd_run, ExperimentConfig, NetworkDescriptor};
use spiking_reservoir::neuron::ContinuousLifParams;
use spiking_reservoir::pipeline::EvalPipeline;
use spiking_reservoir::readout::Normalization;
use spiking_reservoir::timeseries::{gen_henon, HenonParams};
use spiking_reservoir::topology::{handpicked_ring, Synapse};
use spiking_reservoir::{ReservoirNetwork, TimeSeries32};

fn henon_sim<T: spiking_reservoir::Scalar>() -> SimulationConfig<T> {
    SimulationConfig::Continuous(ContinuousSimConfig {
        neuron: ContinuousLifParams::new(T::lit(1.0), T::lit(5.0)),
        i0: T::lit(100.0),
        delta: T::lit(1.0),
        steps_per_window: 200,
    })
}

#[test]
fn single_precision_pipeline_tracks_double() {
    let net = handpicked_ring(
        20,
        Synapse {
            payload: 2.0,
            delay: 0.3,
        },
    )
    .unwrap();
    let run32 = EvalPipeline::<f32> {
        series: gen_henon(&HenonParams::default(), 400).unwrap(),
        train_fraction: 0.8,
        washout: 20,
        simulation: henon_sim(),
        normalization: Normalization::Std,
    }
    .run(&net)
    .unwrap();
    let run64 = EvalPipeline::<f64> {
        series: gen_henon(&HenonParams::default(), 400).unwrap(),
        train_fraction: 0.8,
        washout: 20,
        simulation: henon_sim(),
        normalization: Normalization::Std,
    }
    .run(&net)
    .unwrap();
    let (a, b) = (run32.score_std.nrmse, run64.score_std.nrmse);
    assert!(a < 0.3 && b < 0.3, "{a} {b}");
    assert!((a - b).abs() < 0.05, "{a} {b}");
}

#[test]
fn spike_counts_never_exceed_steps_per_window() {
    let series: TimeSeries32 = gen_henon(&HenonParams::default(), 60).unwrap();
    let net = handpicked_ring(
        10,
        Synapse {
            payload: 10.0,
            delay: 0.0,
        },
    )
    .unwrap();
    let enc = EncodingConfig::fit(&series, 10, 100.0, 1.0).unwrap();
    let x = simulate(&net, &build_schedule(&series, &enc).unwrap(), &henon_sim()).unwrap();
    assert!(x
        .matrix()
        .rows(1, x.n_rows() - 1)
        .iter()
        .all(|&c| (0.0..=200.0).contains(&c)));
    assert!(x.matrix().row(0).iter().all(|&b| b == 1.0));
}

#[test]
fn network_file_config_reproduces_built_network() {
    let dir = tempfile::tempdir().unwrap();
    let net = handpicked_ring(
        10,
        Synapse {
            payload: 2.0,
            delay: 0.3,
        },
    )
    .unwrap();
    net.save(&dir.path().join("net.json")).unwrap();
    assert_eq!(
        ReservoirNetwork::load(&dir.path().join("net.json")).unwrap(),
        net
    );

    let text = format!(
        r#"{{"task": {{"kind": "henon", "n_samples": 150}},
            "network": {{"family": "file", "path": "net.json"}},
            "synapse": {{"payload": 2.0, "delay": 0.3}},
            "simulation": {},
            "seed": 0}}"#,
        serde_json::to_string(&henon_sim::<f64>()).unwrap()
    );
    std::fs::write(dir.path().join("cfg.json"), text).unwrap();
    let cfg = ExperimentConfig::load(&dir.path().join("cfg.json")).unwrap();
    assert!(matches!(cfg.network, NetworkDescriptor::File { .. }));
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    cmd_run(&cfg, &out).unwrap();
    let written = ReservoirNetwork::load(&out.join("network.json")).unwrap();
    assert_eq!(written, net);
}
