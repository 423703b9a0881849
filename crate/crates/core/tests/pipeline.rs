use std::fs;

use gnnie_core::experiment::{golden_failures, DatasetSource, ExperimentSpec, Prepared};
use gnnie_core::graph::{degree_sort, generate, io};
use gnnie_core::memory::Phase;
use gnnie_core::report::{write_bundle, RunReport};
use gnnie_core::sim::{build_network, simulate_network, OptFlags, SimSettings};
use gnnie_core::{AcceleratorConfig, GnnKind};
use proptest::prelude::*;

#[test]
fn file_dataset_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate::power_law(80, 3, 21).unwrap();
    let h = generate::bimodal_features::<f32>(80, 48, &Default::default(), 22).unwrap();
    let edges = dir.path().join("edges.txt");
    let feats = dir.path().join("features.gnnf");
    io::write_edge_list(&g, fs::File::create(&edges).unwrap()).unwrap();
    io::write_features_binary(&h, fs::File::create(&feats).unwrap()).unwrap();

    for kind in GnnKind::ALL {
        let mut spec = ExperimentSpec::new(
            kind,
            DatasetSource::Files {
                edges: edges.clone(),
                features: Some(feats.clone()),
                undirected: true,
            },
        );
        spec.layers = vec![24, 8];
        spec.verify_golden = true;
        let (report, sim) = Prepared::new(spec).unwrap().run().unwrap();
        assert!(golden_failures(&report).is_empty(), "{kind:?}");
        assert_eq!(report.num_arcs, g.num_arcs());
        assert_eq!(report.seeds.graph, None);

        let out = dir.path().join(kind.name());
        let files = write_bundle(&report, &sim.traces, &out).unwrap();
        let back = RunReport::from_json(&fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(back, report);
    }
    // Inputs are only read.
    let again = io::read_edge_list(&edges, None, true).unwrap();
    assert_eq!(again, g);
}

#[test]
fn snapshot_round_trip() {
    let g = generate::power_law(200, 4, 3).unwrap();
    let order = degree_sort(&g, 8);
    let mut buf = Vec::new();
    io::write_snapshot(&g, &order, &mut buf).unwrap();
    let (g2, o2) = io::read_snapshot(&buf[..]).unwrap();
    assert_eq!(g2, g);
    assert_eq!(o2, order);
}

#[test]
fn config_file_overrides_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("cfg.toml");
    fs::write(&toml, "freq_hz = 1.0e9\n[cache]\ngamma = 3\ndynamic_gamma = true\n").unwrap();
    let cfg = AcceleratorConfig::load(&toml).unwrap();
    assert_eq!(cfg.freq_hz, 1.0e9);
    assert_eq!(cfg.cache.gamma, 3);
    assert_eq!(cfg.rows, 16);

    let json = dir.path().join("cfg.json");
    fs::write(&json, r#"{"cache": {"gama": 3}}"#).unwrap();
    assert!(AcceleratorConfig::load(&json).is_err());
    fs::write(&json, r#"{"cache": {"capacity_vertices": 4, "r": 4}}"#).unwrap();
    assert!(AcceleratorConfig::load(&json).is_err());
}

#[test]
fn baseline_fetches_are_random_but_cached_runs_are_not() {
    let g = generate::power_law(300, 3, 8).unwrap();
    let h = generate::dense_features::<f32>(300, 64, 9);
    let layers = build_network(GnnKind::Gcn, 64, &[64], 1).unwrap();
    let mut cfg = AcceleratorConfig::default();
    cfg.cache.capacity_vertices = Some(40);
    cfg.cache.dynamic_gamma = true;
    let run = |opts: OptFlags| {
        let s = SimSettings {
            opts,
            verify_golden: true,
            ..Default::default()
        };
        simulate_network(&g, &h, &layers, &cfg, s).unwrap()
    };
    let cached = run(OptFlags::ALL);
    let base = run(OptFlags::NONE);
    assert!(cached.traces[0].is_sequential(Phase::Aggregation));
    assert!(!base.traces[0].is_sequential(Phase::Aggregation));
    assert!(cached.layers[0].rounds > 1);
    assert_eq!(base.layers[0].rounds, 1);
    assert!(base.layers[0].aggregation.dram_stall_cycles > cached.layers[0].aggregation.dram_stall_cycles);
    for out in [&cached, &base] {
        assert!(out.layers[0].golden_error.unwrap() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn any_small_instance_matches_golden_and_conserves_edges(
        n in 2usize..40,
        m in 1usize..4,
        seed in 0u64..1000,
        cap in 2usize..40,
        gamma in 1usize..6,
        block in 1usize..6,
        kind_ix in 0usize..4,
    ) {
        let kind = GnnKind::ALL[kind_ix];
        let g = generate::power_law(n.max(m + 1), m, seed).unwrap();
        let nv = g.num_vertices();
        let h = generate::dense_features::<f32>(nv, 12, seed + 1);
        let layers = build_network(kind, 12, &[6], seed + 2).unwrap();
        let mut cfg = AcceleratorConfig::default();
        cfg.cache.capacity_vertices = Some(cap.min(nv));
        cfg.cache.gamma = gamma;
        cfg.cache.block_size_vertices = block;
        cfg.cache.dynamic_gamma = true;
        let s = SimSettings { verify_golden: true, sample_seed: seed, ..Default::default() };
        let out = simulate_network(&g, &h, &layers, &cfg, s).unwrap();
        let l = &out.layers[0];
        prop_assert!(l.golden_error.unwrap() <= gnnie_core::sim::golden_tolerance(kind, &cfg));
        prop_assert_eq!(l.initial_alpha_sum, l.alpha_decrements);
        prop_assert!(out.traces[0].is_sequential(Phase::Aggregation));
        prop_assert!(out.traces[0].is_sequential(Phase::Merge));
    }
}
