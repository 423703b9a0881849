//! Run reports: JSON (schema `gnnie-sim/1`) and a CSV bundle.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{AcceleratorConfig, Design};
use crate::energy::{achieved_throughput, energy_report, peak_throughput, EnergyReport};
use crate::error::{Error, Result};
use crate::memory::DramTrace;
use crate::reference::GnnKind;
use crate::sim::{LayerResult, OptFlags, SimOutput};
use crate::stats::PhaseStats;

pub const SCHEMA: &str = "gnnie-sim/1";

/// Speedup gain per added MAC unit.
pub fn beta(base_cycles: u64, base_macs: usize, design_cycles: u64, design_macs: usize) -> Result<f64> {
    if base_macs == design_macs {
        return Err(Error::EqualMacCounts(base_macs));
    }
    Ok((base_cycles as f64 - design_cycles as f64) / (design_macs as f64 - base_macs as f64))
}

/// Name of the design whose MAC profile `cfg` uses, or `custom`.
pub fn design_label(cfg: &AcceleratorConfig) -> String {
    Design::ALL
        .into_iter()
        .find(|d| d.profile(cfg.rows) == cfg.mac_profile)
        .map_or_else(|| "custom".to_string(), |d| d.name().to_string())
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub graph: Option<u64>,
    pub features: Option<u64>,
    pub weights: u64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema: String,
    pub model: Option<GnnKind>,
    /// Where the graph and features came from.
    pub dataset: String,
    pub num_vertices: usize,
    pub num_arcs: usize,
    pub design: String,
    pub total_macs: usize,
    pub opts: OptFlags,
    pub seeds: Seeds,
    pub layers: Vec<LayerResult>,
    pub totals: PhaseStats,
    pub cycles: u64,
    pub runtime_s: f64,
    pub energy: EnergyReport,
    /// Operations per second, a MAC counted as two.
    pub peak_throughput: f64,
    pub achieved_throughput: f64,
    pub max_golden_error: Option<f64>,
    pub config: AcceleratorConfig,
}

/// Description of a run that is not contained in the simulation output.
#[derive(Clone, Debug, Default)]
pub struct RunMeta {
    pub model: Option<GnnKind>,
    pub dataset: String,
    pub num_vertices: usize,
    pub num_arcs: usize,
    pub opts: OptFlags,
    pub seeds: Seeds,
}

impl RunReport {
    pub fn new(meta: RunMeta, cfg: &AcceleratorConfig, layers: Vec<LayerResult>) -> Self {
        let per_layer: Vec<PhaseStats> = layers.iter().map(LayerResult::total).collect();
        let totals: PhaseStats = per_layer.iter().sum();
        let max_golden_error = layers
            .iter()
            .filter_map(|l| l.golden_error)
            .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))));
        Self {
            schema: SCHEMA.to_string(),
            model: meta.model,
            dataset: meta.dataset,
            num_vertices: meta.num_vertices,
            num_arcs: meta.num_arcs,
            design: design_label(cfg),
            total_macs: cfg.total_macs(),
            opts: meta.opts,
            seeds: meta.seeds,
            cycles: totals.cycles,
            runtime_s: totals.cycles as f64 / cfg.freq_hz,
            energy: energy_report(&per_layer, cfg),
            peak_throughput: peak_throughput(cfg),
            achieved_throughput: achieved_throughput(totals.mac_ops, totals.cycles, cfg),
            max_golden_error,
            totals,
            layers,
            config: cfg.clone(),
        }
    }

    pub fn from_sim(meta: RunMeta, cfg: &AcceleratorConfig, sim: &SimOutput) -> Self {
        Self::new(meta, cfg, sim.layers.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: RunReport = serde_json::from_str(s)?;
        if r.schema != SCHEMA {
            return Err(Error::Format(format!("unsupported report schema '{}'", r.schema)));
        }
        Ok(r)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Human-readable per-layer table.
    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<5} {:<9} {:>9} {:>12} {:>12} {:>12} {:>12} {:>7} {:>6}",
            "layer", "kind", "shape", "weighting", "attention", "aggregation", "dram_bytes", "rounds", "γ-esc"
        );
        for (i, l) in self.layers.iter().enumerate() {
            let t = l.total();
            let _ = writeln!(
                s,
                "{:<5} {:<9} {:>9} {:>12} {:>12} {:>12} {:>12} {:>7} {:>6}",
                i,
                l.kind.name(),
                format!("{}x{}", l.f_in, l.f_out),
                l.weighting.cycles + l.mlp.as_ref().map_or(0, |m| m.cycles),
                l.attention.as_ref().map_or(0, |a| a.cycles),
                l.aggregation.cycles,
                t.dram_bytes(),
                l.rounds,
                l.gamma_escalations
            );
        }
        let _ = writeln!(
            s,
            "total cycles {} ({:.3e} s), DRAM {} bytes, energy {:.4e} pJ, {:.4} of {:.4} TOPS (design {}, {} MACs)",
            self.cycles,
            self.runtime_s,
            self.totals.dram_bytes(),
            self.energy.total_pj,
            self.achieved_throughput * 1e-12,
            self.peak_throughput * 1e-12,
            self.design,
            self.total_macs
        );
        if let Some(e) = self.max_golden_error {
            let _ = writeln!(s, "max golden relative error {e:.3e}");
        }
        s
    }
}

#[derive(Serialize)]
struct RowRecord<'a> {
    row: usize,
    cycles: u64,
    design: &'a str,
}

#[derive(Serialize)]
struct AlphaRecord {
    round: usize,
    alpha: usize,
    frequency: usize,
}

pub fn write_row_workload_csv(rows: &[u64], design: &str, w: impl Write) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(["row", "cycles", "design"])?;
    for (row, &cycles) in rows.iter().enumerate() {
        wr.serialize(RowRecord { row, cycles, design })?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_alpha_histogram_csv(layer: &LayerResult, w: impl Write) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(["round", "alpha", "frequency"])?;
    for (round, h) in layer.alpha_histograms.iter().enumerate() {
        for (&alpha, &frequency) in h {
            wr.serialize(AlphaRecord { round, alpha, frequency })?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Writes `report.json` and the per-layer CSV files into `dir`; returns the
/// written paths in a fixed order.
pub fn write_bundle(report: &RunReport, traces: &[DramTrace], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join("report.json");
    report.write_json(&json)?;
    written.push(json);
    for (l, layer) in report.layers.iter().enumerate() {
        let p = dir.join(format!("layer{l}_row_workload.csv"));
        write_row_workload_csv(&layer.row_cycles, &report.design, fs::File::create(&p)?)?;
        written.push(p);
        let p = dir.join(format!("layer{l}_alpha_histogram.csv"));
        write_alpha_histogram_csv(layer, fs::File::create(&p)?)?;
        written.push(p);
        if let Some(t) = traces.get(l) {
            let p = dir.join(format!("layer{l}_dram_trace.csv"));
            t.write_csv(fs::File::create(&p)?)?;
            written.push(p);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate;
    use crate::sim::{build_network, simulate_network, SimSettings};

    fn run(kind: GnnKind) -> (RunReport, SimOutput) {
        let g = generate::power_law(60, 3, 1).unwrap();
        let h = generate::bimodal_features::<f32>(60, 32, &Default::default(), 2).unwrap();
        let layers = build_network(kind, 32, &[16, 8], 3).unwrap();
        let cfg = AcceleratorConfig::default();
        let settings = SimSettings {
            verify_golden: true,
            ..Default::default()
        };
        let sim = simulate_network(&g, &h, &layers, &cfg, settings).unwrap();
        let meta = RunMeta {
            model: Some(kind),
            dataset: "powerlaw:n=60,m=3,seed=1".into(),
            num_vertices: 60,
            num_arcs: g.num_arcs(),
            opts: OptFlags::ALL,
            seeds: Seeds {
                graph: Some(1),
                features: Some(2),
                weights: 3,
                samples: 0,
            },
        };
        (RunReport::from_sim(meta, &cfg, &sim), sim)
    }

    #[test]
    fn beta_examples() {
        assert!((beta(1000, 1024, 800, 1216).unwrap() - 200.0 / 192.0).abs() < 1e-12);
        assert_eq!(beta(1000, 1024, 1000, 1280).unwrap(), 0.0);
        assert_eq!(beta(800, 1024, 1000, 1216).unwrap(), -beta(1000, 1024, 800, 1216).unwrap());
        assert!(matches!(beta(1, 1024, 1, 1024), Err(Error::EqualMacCounts(1024))));
    }

    #[test]
    fn totals_are_sums() {
        let (r, _) = run(GnnKind::Gat);
        let sum: PhaseStats = r.layers.iter().flat_map(|l| l.phases()).sum();
        assert_eq!(r.totals, sum);
        assert_eq!(r.cycles, sum.cycles);
        assert!(r.achieved_throughput <= r.peak_throughput);
        assert_eq!(r.design, "E");
        assert_eq!(r.total_macs, 1216);
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let (a, _) = run(GnnKind::Gcn);
        let (b, _) = run(GnnKind::Gcn);
        let ja = a.to_json().unwrap();
        assert_eq!(ja, b.to_json().unwrap());
        assert_eq!(RunReport::from_json(&ja).unwrap(), a);
        assert!(ja.contains("\"schema\": \"gnnie-sim/1\""));
    }

    #[test]
    fn empty_report_is_valid() {
        let r = RunReport::new(RunMeta::default(), &AcceleratorConfig::default(), Vec::new());
        assert_eq!(r.cycles, 0);
        assert_eq!(r.achieved_throughput, 0.0);
        let back = RunReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(RunReport::from_json(&r.to_json().unwrap().replace("gnnie-sim/1", "gnnie-sim/0")).is_err());
    }

    #[test]
    fn bundle_manifest() {
        let (r, sim) = run(GnnKind::Gat);
        let dir = tempfile::tempdir().unwrap();
        let files = write_bundle(&r, &sim.traces, dir.path()).unwrap();
        let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names.len(), 7);
        for l in 0..2 {
            assert!(names.contains(&format!("layer{l}_alpha_histogram.csv")));
        }
        let alpha = fs::read_to_string(dir.path().join("layer0_alpha_histogram.csv")).unwrap();
        assert!(alpha.starts_with("round,alpha,frequency\n0,"));
        let rows = fs::read_to_string(dir.path().join("layer1_row_workload.csv")).unwrap();
        assert!(rows.starts_with("row,cycles,design\n0,"));
        assert_eq!(rows.lines().count(), 17);
        let t = DramTrace::read_csv(fs::File::open(dir.path().join("layer0_dram_trace.csv")).unwrap()).unwrap();
        assert_eq!(&t, &sim.traces[0]);
    }
}
