//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; the process fails if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use gnnie_core::config::Design;
use gnnie_core::energy::peak_throughput;
use gnnie_core::experiment::{
    stacking, sweep_designs, sweep_gamma, DatasetSource, ExperimentSpec, GenSpec, Prepared, STACKING,
};
use gnnie_core::graph::generate;
use gnnie_core::memory::Phase;
use gnnie_core::reference::Aggregator;
use gnnie_core::sim::{build_network, golden_tolerance, simulate_network, OptFlags, SimSettings};
use gnnie_core::{Activation, AcceleratorConfig, FeatureMatrix, GnnKind, Graph, LayerSpec};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn powerlaw_spec(model: GnnKind, gen: &str) -> ExperimentSpec {
    ExperimentSpec::new(model, DatasetSource::Generated(gen.parse::<GenSpec>().expect("valid generator")))
}

const BENCH: &str = "powerlaw:n=1000,m=4,seed=1";
const BIMODAL: &str = "powerlaw:n=2000,m=4,seed=1,f=1024,sparse=0.99,dense=0.85";

fn c1_peak_throughput() -> Outcome {
    let p = peak_throughput(&AcceleratorConfig::default());
    let dev = (p - 3.17e12).abs() / 3.17e12;
    check(
        (p - 3.1616e12).abs() < 1.0 && dev < 0.005,
        format!("{:.4} TOPS, {:.2}% from 3.17", p * 1e-12, dev * 100.0),
        format!("peak {p} ops/s"),
    )
}

fn c2_mac_counts() -> Outcome {
    let macs: Vec<usize> = Design::ALL
        .iter()
        .map(|&d| AcceleratorConfig::default().with_design(d).total_macs())
        .collect();
    check(macs == [1024, 1280, 1536, 1792, 1216], format!("A-E {macs:?}"), format!("A-E {macs:?}"))
}

fn random_graph(rng: &mut impl Rng, seed: u64) -> Graph {
    let n = rng.gen_range(2..=64);
    if rng.gen_bool(0.5) && n > 2 {
        let m = rng.gen_range(1..=(n - 1).min(5));
        generate::power_law(n, m, seed).unwrap()
    } else {
        generate::erdos_renyi(n, rng.gen_range(0.02..0.4), seed).unwrap()
    }
}

fn random_layers(kind: GnnKind, f_in: usize, rng: &mut impl Rng, seed: u64) -> Vec<LayerSpec<f32>> {
    let depth = rng.gen_range(1..=2);
    let widths: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=24)).collect();
    let mut layers = build_network(kind, f_in, &widths, seed).unwrap();
    for l in &mut layers {
        match kind {
            GnnKind::GraphSage => {
                l.aggregator = if rng.gen_bool(0.5) { Aggregator::Mean } else { Aggregator::Max };
                l.sample_size = rng.gen_range(1..=8);
            }
            GnnKind::Gcn if rng.gen_bool(0.3) => l.activation = Activation::None,
            _ => {}
        }
    }
    layers
}

fn random_cfg(n: usize, rng: &mut impl Rng) -> AcceleratorConfig {
    let mut cfg = AcceleratorConfig::default();
    if rng.gen_bool(0.7) {
        let cap = rng.gen_range(2..=n.max(2));
        cfg.cache.capacity_vertices = Some(cap);
        if rng.gen_bool(0.4) {
            cfg.cache.r = Some(rng.gen_range(1..cap.min(9)));
        }
    }
    cfg.cache.gamma = rng.gen_range(1..=8);
    cfg.cache.dynamic_gamma = true;
    cfg.cache.block_size_vertices = rng.gen_range(1..=8);
    cfg
}

fn random_features(n: usize, rng: &mut impl Rng, seed: u64) -> FeatureMatrix<f32> {
    let f = rng.gen_range(1..=48);
    if rng.gen_bool(0.5) {
        generate::dense_features(n, f, seed)
    } else {
        generate::bimodal_features(n, f, &Default::default(), seed).unwrap()
    }
}

fn c3_golden_equivalence() -> Outcome {
    let mut rng = generate::rng(0xC3);
    let mut worst = [0.0f64; 4];
    for (ki, kind) in GnnKind::ALL.into_iter().enumerate() {
        for i in 0..50u64 {
            let seed = 1000 * ki as u64 + i;
            let g = random_graph(&mut rng, seed);
            let h = random_features(g.num_vertices(), &mut rng, seed + 1);
            let layers = random_layers(kind, h.width(), &mut rng, seed + 2);
            let mut cfg = random_cfg(g.num_vertices(), &mut rng);
            if kind == GnnKind::Gat && i % 2 == 1 {
                cfg.sfu.exact_exp = true;
            }
            let settings = SimSettings {
                opts: OptFlags::ALL,
                sample_seed: seed,
                verify_golden: true,
            };
            let out = simulate_network(&g, &h, &layers, &cfg, settings).map_err(err)?;
            let tol = golden_tolerance(kind, &cfg);
            for l in &out.layers {
                let e = l.golden_error.unwrap();
                if e.is_nan() || e > tol {
                    return Err(format!("{} instance {i}: error {e:.3e} > {tol:.0e}", kind.name()));
                }
                worst[ki] = worst[ki].max(e);
            }
        }
    }
    Ok(format!(
        "4x50 instances, worst error gcn {:.1e} sage {:.1e} gat {:.1e} gin {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

fn c4_attention_linearity() -> Outcome {
    let f_out = 32;
    let mut seen = Vec::new();
    for n in [10usize, 100, 1000] {
        for m in [1usize, 3] {
            let g = generate::power_law(n, m, 7).unwrap();
            let h = generate::dense_features::<f32>(n, 16, 8);
            let layers = build_network(GnnKind::Gat, 16, &[f_out], 9).unwrap();
            let out = simulate_network(&g, &h, &layers, &AcceleratorConfig::default(), SimSettings::default()).map_err(err)?;
            let got = out.layers[0].attention.as_ref().unwrap().scalar_mults;
            let want = (2 * f_out * n) as u64;
            if got != want {
                return Err(format!("|V|={n} m={m}: {got} scalar multiplications, expected {want}"));
            }
            seen.push(got);
        }
    }
    Ok(format!("2*32*|V| exactly at |V|=10/100/1000 for two edge densities: {seen:?}"))
}

fn c5_sequential_dram() -> Outcome {
    let mut rng = generate::rng(0xC5);
    let mut rounds = 0;
    for i in 0..100u64 {
        let g = random_graph(&mut rng, 5000 + i);
        let h = random_features(g.num_vertices(), &mut rng, 6000 + i);
        let kind = GnnKind::ALL[i as usize % 4];
        let layers = random_layers(kind, h.width(), &mut rng, 7000 + i);
        let cfg = random_cfg(g.num_vertices(), &mut rng);
        let settings = SimSettings {
            sample_seed: i,
            ..Default::default()
        };
        let out = simulate_network(&g, &h, &layers, &cfg, settings).map_err(err)?;
        for (l, t) in out.traces.iter().enumerate() {
            for phase in [Phase::Aggregation, Phase::Merge] {
                if let Some(v) = t.check_sequential(phase) {
                    return Err(format!("run {i} layer {l}: {phase:?} read went back {} -> {} in round {}", v.previous_block, v.block, v.round));
                }
            }
        }
        rounds += out.layers.iter().map(|l| l.rounds).sum::<usize>();
    }
    Ok(format!("100 runs, {rounds} rounds, block index nondecreasing within every round"))
}

fn c6_gamma_trend() -> Outcome {
    let mut spec = powerlaw_spec(GnnKind::Gcn, BENCH);
    let fixed = Prepared::new(spec.clone()).map_err(err)?;
    let zero = sweep_gamma(&fixed, &[0, 1]).map_err(err)?;
    if zero[0].deadlock.is_none() {
        return Err("gamma=0 completed without dynamic gamma".into());
    }
    spec.config.cache.dynamic_gamma = true;
    let dynamic = Prepared::new(spec).map_err(err)?;
    let gammas: Vec<usize> = (1..=10).collect();
    let pts = sweep_gamma(&dynamic, &gammas).map_err(err)?;
    let bytes: Vec<u64> = pts.iter().map(|p| p.aggregation_dram_bytes.unwrap_or(u64::MAX)).collect();
    let monotone = pts.iter().all(|p| p.deadlock.is_none()) && bytes.windows(2).all(|w| w[0] <= w[1]);
    let note = if zero[1].deadlock.is_some() {
        "; static gamma=1 also deadlocks, sweep uses dynamic gamma"
    } else {
        ""
    };
    check(
        monotone,
        format!("gamma=0 deadlocks; bytes over gamma 1..10 nondecreasing {bytes:?}{note}"),
        format!("bytes over gamma 1..10 {bytes:?}"),
    )
}

fn c7_alpha_flattening() -> Outcome {
    let p = Prepared::new(powerlaw_spec(GnnKind::Gcn, BENCH)).map_err(err)?;
    let (report, _) = p.run().map_err(err)?;
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, l) in report.layers.iter().enumerate() {
        let max_alpha: Vec<usize> = l.alpha_histograms.iter().map(|h| h.keys().last().copied().unwrap_or(0)).collect();
        let peak: Vec<usize> = l.alpha_histograms.iter().map(|h| h.values().copied().max().unwrap_or(0)).collect();
        let max_ok = max_alpha.windows(2).all(|w| w[1] <= w[0]);
        let peak_ok = peak.windows(2).all(|w| w[1] <= w[0]);
        ok &= max_ok && peak_ok;
        lines.push(format!(
            "layer {i}: max alpha {max_alpha:?} ({}), peak frequency {peak:?} ({})",
            if max_ok { "nonincreasing" } else { "INCREASES" },
            if peak_ok { "nonincreasing" } else { "INCREASES" }
        ));
    }
    check(ok, lines.join("; "), lines.join("; "))
}

fn bimodal_prepared(opts: OptFlags) -> Result<Prepared, String> {
    let mut spec = powerlaw_spec(GnnKind::Gcn, BIMODAL);
    spec.layers = vec![128];
    spec.opts = opts;
    Prepared::new(spec).map_err(err)
}

fn imbalance(rows: &[u64]) -> f64 {
    let max = *rows.iter().max().unwrap() as f64;
    let min = *rows.iter().min().unwrap() as f64;
    max / min.max(1.0)
}

fn c8_load_balancing() -> Outcome {
    let fm_only = sweep_designs(&bimodal_prepared("cp,lb,fm".parse().unwrap())?, &[Design::A, Design::E]).map_err(err)?;
    let fm_lr = sweep_designs(&bimodal_prepared(OptFlags::ALL)?, &[Design::E]).map_err(err)?;
    let (a, e) = (&fm_only[0], &fm_lr[0]);
    let reduction = 1.0 - e.weighting_cycles as f64 / a.weighting_cycles as f64;
    let (r_base, r_fm, r_lr) = (imbalance(&a.row_cycles), imbalance(&fm_only[1].row_cycles), imbalance(&e.row_cycles));
    check(
        reduction >= 0.05 && r_lr < r_fm && r_fm < r_base,
        format!(
            "E {} vs A {} weighting cycles ({:.1}% fewer); max/min row ratio FM+LR {r_lr:.2} < FM {r_fm:.2} < baseline {r_base:.2}",
            e.weighting_cycles,
            a.weighting_cycles,
            reduction * 100.0
        ),
        format!("reduction {:.1}%, ratios FM+LR {r_lr:.2} FM {r_fm:.2} baseline {r_base:.2}", reduction * 100.0),
    )
}

fn c9_beta_ordering() -> Outcome {
    let pts = sweep_designs(&bimodal_prepared(OptFlags::ALL)?, &Design::ALL).map_err(err)?;
    let b: Vec<f64> = pts[1..].iter().map(|p| p.beta.unwrap()).collect();
    let (bb, bc, bd, be) = (b[0], b[1], b[2], b[3]);
    check(
        be > bb && bb > bc && bc > bd,
        format!("beta E {be:.3} > B {bb:.3} > C {bc:.3} > D {bd:.3}"),
        format!("beta B {bb:.3} C {bc:.3} D {bd:.3} E {be:.3}"),
    )
}

fn c10_stacking() -> Outcome {
    let p = Prepared::new(powerlaw_spec(GnnKind::Gcn, BENCH)).map_err(err)?;
    let pts = stacking(&p).map_err(err)?;
    let cycles: Vec<u64> = pts.iter().map(|x| x.aggregation_cycles).collect();
    let labels: Vec<String> = STACKING.iter().map(|o| o.to_string()).collect();
    check(
        cycles.windows(2).all(|w| w[1] < w[0]),
        format!("aggregation cycles {labels:?} = {cycles:?}, strictly decreasing"),
        format!("aggregation cycles {labels:?} = {cycles:?}"),
    )
}

fn c11_determinism() -> Outcome {
    let mut sizes = Vec::new();
    for kind in GnnKind::ALL {
        let mut spec = powerlaw_spec(kind, "powerlaw:n=300,m=3,seed=5");
        spec.seed = 11;
        spec.verify_golden = true;
        let a = Prepared::new(spec.clone()).and_then(|p| p.run()).map_err(err)?.0.to_json().map_err(err)?;
        let b = Prepared::new(spec).and_then(|p| p.run()).map_err(err)?.0.to_json().map_err(err)?;
        if a != b {
            return Err(format!("{} reports differ", kind.name()));
        }
        sizes.push(a.len());
    }
    Ok(format!("repeated runs give byte-identical JSON for all four models ({sizes:?} bytes)"))
}

fn c12_conservation() -> Outcome {
    let mut rng = generate::rng(0xC12);
    let mut edges = 0u64;
    for i in 0..200u64 {
        let g = random_graph(&mut rng, 9000 + i);
        let h = random_features(g.num_vertices(), &mut rng, 9500 + i);
        let kind = GnnKind::ALL[i as usize % 4];
        let layers = random_layers(kind, h.width(), &mut rng, 9900 + i);
        let cfg = random_cfg(g.num_vertices(), &mut rng);
        let mut settings = SimSettings::default();
        if i % 5 == 0 {
            settings.opts = OptFlags::NONE;
        }
        let out = simulate_network(&g, &h, &layers, &cfg, settings).map_err(err)?;
        for l in &out.layers {
            if l.initial_alpha_sum != l.alpha_decrements {
                return Err(format!("instance {i}: sum alpha {} vs {} decrements", l.initial_alpha_sum, l.alpha_decrements));
            }
            edges += l.initial_alpha_sum;
        }
    }
    Ok(format!("200 instances, {edges} edge endpoints, sum of initial alpha equals decrements"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("peak throughput identity", c1_peak_throughput),
        ("MAC-count identity", c2_mac_counts),
        ("golden equivalence", c3_golden_equivalence),
        ("attention linearity", c4_attention_linearity),
        ("sequential DRAM reads", c5_sequential_dram),
        ("gamma ablation trend", c6_gamma_trend),
        ("alpha-histogram flattening", c7_alpha_flattening),
        ("FM/LR load balancing", c8_load_balancing),
        ("beta ordering", c9_beta_ordering),
        ("optimization stacking", c10_stacking),
        ("determinism", c11_determinism),
        ("edge conservation", c12_conservation),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
