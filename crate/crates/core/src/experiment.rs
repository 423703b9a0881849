//! Experiment descriptions and the ablation sweeps built on top of
//! [`simulate_network`].

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AcceleratorConfig, Design};
use crate::error::{Error, Result};
use crate::graph::generate::{self, BimodalSparsity};
use crate::graph::{io, FeatureMatrix, Graph};
use crate::reference::GnnKind;
use crate::report::{beta, RunMeta, RunReport, Seeds};
use crate::sim::{build_network, golden_tolerance, simulate_network, OptFlags, SimOutput, SimSettings};

/// Hidden and output width used when no layer list is given.
pub const DEFAULT_LAYERS: [usize; 2] = [128, 128];
pub const DEFAULT_FEATURE_WIDTH: usize = 256;
/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "GNNIE_SIM_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GraphGen {
    PowerLaw { n: usize, m: usize },
    ErdosRenyi { n: usize, p: f64 },
}

/// Synthetic dataset: `powerlaw:n=1000,m=4,seed=1` or `er:n=200,p=0.05,seed=3`,
/// optionally followed by feature keys `f`, `sparse`, `dense`, `dense_frac`,
/// `skew` and `fseed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub graph: GraphGen,
    pub seed: u64,
    pub feature_width: usize,
    pub sparsity: BimodalSparsity,
    pub feature_seed: u64,
}

impl GenSpec {
    pub fn power_law(n: usize, m: usize, seed: u64) -> Self {
        Self {
            graph: GraphGen::PowerLaw { n, m },
            seed,
            feature_width: DEFAULT_FEATURE_WIDTH,
            sparsity: BimodalSparsity::default(),
            feature_seed: seed.wrapping_add(1),
        }
    }

    pub fn num_vertices(&self) -> usize {
        match self.graph {
            GraphGen::PowerLaw { n, .. } | GraphGen::ErdosRenyi { n, .. } => n,
        }
    }

    pub fn graph(&self) -> Result<Graph> {
        match self.graph {
            GraphGen::PowerLaw { n, m } => generate::power_law(n, m, self.seed),
            GraphGen::ErdosRenyi { n, p } => generate::erdos_renyi(n, p, self.seed),
        }
    }

    pub fn features(&self) -> Result<FeatureMatrix<f32>> {
        generate::bimodal_features(self.num_vertices(), self.feature_width, &self.sparsity, self.feature_seed)
    }
}

impl FromStr for GenSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidGenerator(m);
        let (family, rest) = s.split_once(':').ok_or_else(|| bad(format!("'{s}' lacks a generator name")))?;
        let mut n = None;
        let mut m = None;
        let mut p = None;
        let mut seed = 0u64;
        let mut fseed = None;
        let mut width = DEFAULT_FEATURE_WIDTH;
        let mut sparsity = BimodalSparsity::default();
        for kv in rest.split(',').filter(|x| !x.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("'{kv}' is not key=value")))?;
            let v = v.trim();
            let int = || v.parse::<u64>().map_err(|_| bad(format!("{k}={v} is not an integer")));
            let float = || v.parse::<f64>().map_err(|_| bad(format!("{k}={v} is not a number")));
            match k.trim() {
                "n" => n = Some(int()? as usize),
                "m" => m = Some(int()? as usize),
                "p" => p = Some(float()?),
                "seed" => seed = int()?,
                "f" => width = int()? as usize,
                "sparse" => sparsity.sparse_mode = float()?,
                "dense" => sparsity.dense_mode = float()?,
                "dense_frac" => sparsity.dense_fraction = float()?,
                "skew" => sparsity.column_skew = float()?,
                "fseed" => fseed = Some(int()?),
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        let n = n.ok_or_else(|| bad("missing n".into()))?;
        let graph = match family.trim() {
            "powerlaw" => GraphGen::PowerLaw {
                n,
                m: m.ok_or_else(|| bad("missing m".into()))?,
            },
            "er" => GraphGen::ErdosRenyi {
                n,
                p: p.ok_or_else(|| bad("missing p".into()))?,
            },
            other => return Err(bad(format!("unknown generator '{other}'"))),
        };
        if width == 0 {
            return Err(bad("feature width must be positive".into()));
        }
        Ok(Self {
            graph,
            seed,
            feature_width: width,
            sparsity,
            feature_seed: fseed.unwrap_or(seed.wrapping_add(1)),
        })
    }
}

impl fmt::Display for GenSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.graph {
            GraphGen::PowerLaw { n, m } => write!(f, "powerlaw:n={n},m={m}")?,
            GraphGen::ErdosRenyi { n, p } => write!(f, "er:n={n},p={p}")?,
        }
        let s = &self.sparsity;
        write!(
            f,
            ",seed={},f={},sparse={},dense={},dense_frac={},skew={},fseed={}",
            self.seed, self.feature_width, s.sparse_mode, s.dense_mode, s.dense_fraction, s.column_skew, self.feature_seed
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DatasetSource {
    Generated(GenSpec),
    /// Edge list plus a feature file; without features, generated bimodal
    /// features of the default width are used.
    Files {
        edges: PathBuf,
        features: Option<PathBuf>,
        undirected: bool,
    },
}

pub struct Dataset {
    pub graph: Graph,
    pub features: FeatureMatrix<f32>,
    pub description: String,
    pub graph_seed: Option<u64>,
    pub feature_seed: Option<u64>,
}

impl DatasetSource {
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            DatasetSource::Generated(g) => Ok(Dataset {
                graph: g.graph()?,
                features: g.features()?,
                description: g.to_string(),
                graph_seed: Some(g.seed),
                feature_seed: Some(g.feature_seed),
            }),
            DatasetSource::Files {
                edges,
                features,
                undirected,
            } => {
                let graph = io::read_edge_list(edges, None, *undirected)?;
                let (matrix, feature_seed) = match features {
                    Some(p) => (io::read_features(p)?, None),
                    None => (
                        generate::bimodal_features(graph.num_vertices(), DEFAULT_FEATURE_WIDTH, &BimodalSparsity::default(), seed)?,
                        Some(seed),
                    ),
                };
                let mut description = format!("edges:{}", edges.display());
                if let Some(p) = features {
                    description.push_str(&format!(",features:{}", p.display()));
                }
                Ok(Dataset {
                    graph,
                    features: matrix,
                    description,
                    graph_seed: None,
                    feature_seed,
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: GnnKind,
    /// Output width of each layer.
    pub layers: Vec<usize>,
    pub dataset: DatasetSource,
    pub config: AcceleratorConfig,
    pub opts: OptFlags,
    /// Seed of the layer parameters and of the neighbor-sample stream.
    pub seed: u64,
    pub verify_golden: bool,
}

impl ExperimentSpec {
    pub fn new(model: GnnKind, dataset: DatasetSource) -> Self {
        Self {
            model,
            layers: DEFAULT_LAYERS.to_vec(),
            dataset,
            config: AcceleratorConfig::default(),
            opts: OptFlags::ALL,
            seed: 0,
            verify_golden: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.layers.contains(&0) {
            return Err(Error::Config("layer widths must be positive and nonempty".into()));
        }
        self.config.validate()
    }

    fn settings(&self, opts: OptFlags) -> SimSettings {
        SimSettings {
            opts,
            sample_seed: self.seed,
            verify_golden: self.verify_golden,
        }
    }
}

/// Loaded inputs shared by every point of a sweep.
pub struct Prepared {
    pub spec: ExperimentSpec,
    pub data: Dataset,
}

impl Prepared {
    pub fn new(spec: ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        let data = spec.dataset.load(spec.seed)?;
        Ok(Self { spec, data })
    }

    fn simulate(&self, cfg: &AcceleratorConfig, opts: OptFlags) -> Result<SimOutput> {
        let layers = build_network(self.spec.model, self.data.features.width(), &self.spec.layers, self.spec.seed)?;
        simulate_network(&self.data.graph, &self.data.features, &layers, cfg, self.spec.settings(opts))
    }

    fn meta(&self, opts: OptFlags) -> RunMeta {
        RunMeta {
            model: Some(self.spec.model),
            dataset: self.data.description.clone(),
            num_vertices: self.data.graph.num_vertices(),
            num_arcs: self.data.graph.num_arcs(),
            opts,
            seeds: Seeds {
                graph: self.data.graph_seed,
                features: self.data.feature_seed,
                weights: self.spec.seed,
                samples: self.spec.seed,
            },
        }
    }

    pub fn run(&self) -> Result<(RunReport, SimOutput)> {
        let sim = self.simulate(&self.spec.config, self.spec.opts)?;
        let report = RunReport::from_sim(self.meta(self.spec.opts), &self.spec.config, &sim);
        Ok((report, sim))
    }
}

/// Layers whose golden error exceeds the tolerance, as `(layer, error, tolerance)`.
pub fn golden_failures(report: &RunReport) -> Vec<(usize, f64, f64)> {
    report
        .layers
        .iter()
        .enumerate()
        .filter_map(|(i, l)| {
            let tol = golden_tolerance(l.kind, &report.config);
            l.golden_error.filter(|e| e.is_nan() || *e > tol).map(|e| (i, e, tol))
        })
        .collect()
}

/// Runs `f` over `items` on a pool sized by [`THREADS_ENV`], keeping input order.
fn par_map<I: Sync, O: Send>(items: &[I], f: impl Fn(&I) -> O + Sync + Send) -> Result<Vec<O>> {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub gamma: usize,
    /// Aggregation and merge DRAM bytes over all layers; `None` on deadlock.
    pub aggregation_dram_bytes: Option<u64>,
    pub aggregation_cycles: Option<u64>,
    pub rounds: Option<usize>,
    pub gamma_escalations: Option<usize>,
    pub deadlock: Option<String>,
}

pub fn sweep_gamma(p: &Prepared, gammas: &[usize]) -> Result<Vec<GammaPoint>> {
    if gammas.is_empty() {
        return Err(Error::Config("empty gamma list".into()));
    }
    let points = par_map(gammas, |&gamma| -> Result<GammaPoint> {
        let mut cfg = p.spec.config.clone();
        cfg.cache.gamma = gamma;
        match p.simulate(&cfg, p.spec.opts) {
            Ok(sim) => Ok(GammaPoint {
                gamma,
                aggregation_dram_bytes: Some(sim.layers.iter().map(|l| l.aggregation.dram_bytes()).sum()),
                aggregation_cycles: Some(sim.layers.iter().map(|l| l.aggregation.cycles).sum()),
                rounds: Some(sim.layers.iter().map(|l| l.rounds).sum()),
                gamma_escalations: Some(sim.layers.iter().map(|l| l.gamma_escalations).sum()),
                deadlock: None,
            }),
            Err(e @ (Error::Deadlock { .. } | Error::NoProgress(_))) => Ok(GammaPoint {
                gamma,
                aggregation_dram_bytes: None,
                aggregation_cycles: None,
                rounds: None,
                gamma_escalations: None,
                deadlock: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        }
    })?;
    points.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub design: Design,
    pub total_macs: usize,
    pub opts: OptFlags,
    /// Weighting cycles over all layers, including the GINConv MLP pass.
    pub weighting_cycles: u64,
    pub aggregation_cycles: u64,
    pub total_cycles: u64,
    /// Per-row Weighting cycles of the first layer.
    pub row_cycles: Vec<u64>,
    /// Weighting speedup gain per added MAC over design A; `None` for A.
    pub beta: Option<f64>,
}

/// Designs A–D use uniform MACs without binning or redistribution; E uses
/// the flexible profile with binning and the experiment's `lr` flag.
pub fn sweep_designs(p: &Prepared, designs: &[Design]) -> Result<Vec<DesignPoint>> {
    if designs.is_empty() {
        return Err(Error::Config("empty design list".into()));
    }
    let mut all = designs.to_vec();
    if !all.contains(&Design::A) {
        all.insert(0, Design::A);
    }
    let points = par_map(&all, |&d| -> Result<DesignPoint> {
        let cfg = p.spec.config.clone().with_design(d);
        let opts = OptFlags {
            fm: d == Design::E,
            lr: d == Design::E && p.spec.opts.lr,
            ..p.spec.opts
        };
        let sim = p.simulate(&cfg, opts)?;
        Ok(DesignPoint {
            design: d,
            total_macs: cfg.total_macs(),
            opts,
            weighting_cycles: sim
                .layers
                .iter()
                .map(|l| l.weighting.cycles + l.mlp.as_ref().map_or(0, |m| m.cycles))
                .sum(),
            aggregation_cycles: sim.layers.iter().map(|l| l.aggregation.cycles).sum(),
            total_cycles: sim.layers.iter().map(|l| l.total().cycles).sum(),
            row_cycles: sim.layers.first().map(|l| l.row_cycles.clone()).unwrap_or_default(),
            beta: None,
        })
    })?;
    let mut points: Vec<DesignPoint> = points.into_iter().collect::<Result<_>>()?;
    let base = points
        .iter()
        .find(|x| x.design == Design::A)
        .map(|a| (a.weighting_cycles, a.total_macs))
        .expect("design A is always run");
    for x in &mut points {
        if x.total_macs != base.1 {
            x.beta = Some(beta(base.0, base.1, x.weighting_cycles, x.total_macs)?);
        }
    }
    points.retain(|x| designs.contains(&x.design));
    Ok(points)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackPoint {
    pub opts: OptFlags,
    pub aggregation_cycles: u64,
    pub aggregation_dram_bytes: u64,
    pub total_cycles: u64,
}

/// Baseline, CP, CP+FM and CP+FM+LB.
pub const STACKING: [OptFlags; 4] = [
    OptFlags::NONE,
    OptFlags {
        cp: true,
        ..OptFlags::NONE
    },
    OptFlags {
        cp: true,
        fm: true,
        ..OptFlags::NONE
    },
    OptFlags {
        cp: true,
        fm: true,
        lb: true,
        lr: false,
    },
];

pub fn stacking(p: &Prepared) -> Result<Vec<StackPoint>> {
    let points = par_map(&STACKING, |&opts| -> Result<StackPoint> {
        let sim = p.simulate(&p.spec.config, opts)?;
        Ok(StackPoint {
            opts,
            aggregation_cycles: sim.layers.iter().map(|l| l.aggregation.cycles).sum(),
            aggregation_dram_bytes: sim.layers.iter().map(|l| l.aggregation.dram_bytes()).sum(),
            total_cycles: sim.layers.iter().map(|l| l.total().cycles).sum(),
        })
    })?;
    points.into_iter().collect()
}

#[derive(Serialize)]
struct GammaRecord {
    gamma: usize,
    aggregation_dram_bytes: Option<u64>,
    aggregation_cycles: Option<u64>,
    rounds: Option<usize>,
    gamma_escalations: Option<usize>,
    deadlock: bool,
}

/// `gamma,aggregation_dram_bytes,aggregation_cycles,rounds,gamma_escalations,deadlock`;
/// deadlocked points leave the measurements empty.
pub fn write_gamma_csv(points: &[GammaPoint], w: impl Write) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for p in points {
        wr.serialize(GammaRecord {
            gamma: p.gamma,
            aggregation_dram_bytes: p.aggregation_dram_bytes,
            aggregation_cycles: p.aggregation_cycles,
            rounds: p.rounds,
            gamma_escalations: p.gamma_escalations,
            deadlock: p.deadlock.is_some(),
        })?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DesignRecord<'a> {
    design: &'a str,
    total_macs: usize,
    opts: String,
    weighting_cycles: u64,
    aggregation_cycles: u64,
    total_cycles: u64,
    beta: Option<f64>,
}

pub fn write_designs_csv(points: &[DesignPoint], w: impl Write) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for p in points {
        wr.serialize(DesignRecord {
            design: p.design.name(),
            total_macs: p.total_macs,
            opts: p.opts.to_string(),
            weighting_cycles: p.weighting_cycles,
            aggregation_cycles: p.aggregation_cycles,
            total_cycles: p.total_cycles,
            beta: p.beta,
        })?;
    }
    wr.flush()?;
    Ok(())
}

/// First-layer row workloads of every design, `row,cycles,design`.
pub fn write_design_rows_csv(points: &[DesignPoint], w: impl Write) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(["row", "cycles", "design"])?;
    for p in points {
        for (row, c) in p.row_cycles.iter().enumerate() {
            wr.write_record([row.to_string(), c.to_string(), p.design.name().to_string()])?;
        }
    }
    wr.flush()?;
    Ok(())
}
