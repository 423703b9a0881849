use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gnnie_core::config::Design;
use gnnie_core::experiment::{
    self, golden_failures, DatasetSource, ExperimentSpec, GenSpec, Prepared, DEFAULT_LAYERS,
};
use gnnie_core::graph::{degree_sort, io};
use gnnie_core::report::write_bundle;
use gnnie_core::sim::OptFlags;
use gnnie_core::{AcceleratorConfig, GnnKind};

#[derive(Parser)]
#[command(name = "gnnie-sim", version, about = "Cycle-level GNN accelerator simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one network and write its report.
    Run(Common),
    /// Aggregation DRAM traffic for each eviction threshold.
    SweepGamma {
        #[command(flatten)]
        common: Common,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        gammas: Vec<usize>,
    },
    /// Weighting cycles and speedup gain per added MAC for designs A–E.
    SweepDesigns {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "A,B,C,D,E")]
        designs: Vec<Design>,
    },
    /// Write a synthetic graph, its features and its degree-sorted snapshot.
    GenGraph {
        #[arg(long)]
        gen: GenSpec,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every layer against the golden model.
    Verify(Common),
}

#[derive(Args, Clone)]
#[command(group(clap::ArgGroup::new("dataset").required(true).args(["gen", "edges"])))]
struct Common {
    #[arg(long, default_value = "gcn")]
    model: GnnKind,
    /// Comma-separated output width of each layer.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    /// Accelerator configuration, TOML or `.json`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthetic dataset, e.g. `powerlaw:n=1000,m=4,seed=1`.
    #[arg(long)]
    gen: Option<GenSpec>,
    /// Edge list with one `u v` pair per line.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Feature file (binary `GNNF` or text) for `--edges`.
    #[arg(long, requires = "edges")]
    features: Option<PathBuf>,
    /// Treat the edge list as directed.
    #[arg(long, requires = "edges")]
    directed: bool,
    /// Seed of the layer parameters and neighbor samples.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    verify_golden: bool,
    /// Raise the eviction threshold while the cache is stuck.
    #[arg(long)]
    dynamic_gamma: bool,
    /// Enabled optimizations: `all`, `none` or a subset of `cp,fm,lr,lb`.
    #[arg(long, default_value = "all")]
    opt: OptFlags,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec> {
        let dataset = match (&self.gen, &self.edges) {
            (Some(g), None) => DatasetSource::Generated(g.clone()),
            (None, Some(e)) => DatasetSource::Files {
                edges: e.clone(),
                features: self.features.clone(),
                undirected: !self.directed,
            },
            _ => bail!("give exactly one of --gen and --edges"),
        };
        let mut config = match &self.config {
            Some(p) => AcceleratorConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => AcceleratorConfig::default(),
        };
        if self.dynamic_gamma {
            config.cache.dynamic_gamma = true;
        }
        let mut spec = ExperimentSpec::new(self.model, dataset);
        spec.layers = self.layers.clone().unwrap_or_else(|| DEFAULT_LAYERS.to_vec());
        spec.config = config;
        spec.opts = self.opt;
        spec.seed = self.seed;
        spec.verify_golden = self.verify_golden;
        Ok(spec)
    }

    fn prepare(&self) -> Result<Prepared> {
        Ok(Prepared::new(self.spec()?)?)
    }
}

fn create_out(out: &Option<PathBuf>) -> Result<Option<&Path>> {
    match out {
        Some(p) => {
            fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
            Ok(Some(p.as_path()))
        }
        None => Ok(None),
    }
}

fn report_mismatches(model: GnnKind, failures: &[(usize, f64, f64)]) -> bool {
    for (layer, err, tol) in failures {
        eprintln!("golden mismatch: {} layer {layer}: relative error {err:.3e} > {tol:.0e}", model.name());
    }
    failures.is_empty()
}

fn run(c: &Common) -> Result<bool> {
    let p = c.prepare()?;
    let (report, sim) = p.run()?;
    print!("{}", report.summary_table());
    if let Some(dir) = create_out(&c.out)? {
        for f in write_bundle(&report, &sim.traces, dir)? {
            println!("wrote {}", f.display());
        }
    }
    Ok(report_mismatches(c.model, &golden_failures(&report)))
}

fn verify(c: &Common) -> Result<bool> {
    let mut c = c.clone();
    c.verify_golden = true;
    let p = c.prepare()?;
    let (report, _) = p.run()?;
    for (i, l) in report.layers.iter().enumerate() {
        println!(
            "{} layer {i}: relative error {:.3e}",
            l.kind.name(),
            l.golden_error.unwrap_or(f64::NAN)
        );
    }
    let ok = report_mismatches(c.model, &golden_failures(&report));
    println!("{}", if ok { "golden check passed" } else { "golden check FAILED" });
    Ok(ok)
}

fn sweep_gamma(c: &Common, gammas: &[usize]) -> Result<bool> {
    let p = c.prepare()?;
    let points = experiment::sweep_gamma(&p, gammas)?;
    println!("{:>5} {:>14} {:>12} {:>7} {:>6}", "gamma", "dram_bytes", "cycles", "rounds", "γ-esc");
    for x in &points {
        match &x.deadlock {
            Some(msg) => println!("{:>5} {msg}", x.gamma),
            None => println!(
                "{:>5} {:>14} {:>12} {:>7} {:>6}",
                x.gamma,
                x.aggregation_dram_bytes.unwrap_or(0),
                x.aggregation_cycles.unwrap_or(0),
                x.rounds.unwrap_or(0),
                x.gamma_escalations.unwrap_or(0)
            ),
        }
    }
    if let Some(dir) = create_out(&c.out)? {
        let path = dir.join("gamma_sweep.csv");
        experiment::write_gamma_csv(&points, fs::File::create(&path)?)?;
        println!("wrote {}", path.display());
    }
    Ok(true)
}

fn sweep_designs(c: &Common, designs: &[Design]) -> Result<bool> {
    let p = c.prepare()?;
    let points = experiment::sweep_designs(&p, designs)?;
    println!("{:<6} {:>6} {:>12} {:>12} {:>10}", "design", "macs", "weighting", "total", "beta");
    for x in &points {
        let beta = x.beta.map_or_else(|| "-".to_string(), |b| format!("{b:.4}"));
        println!(
            "{:<6} {:>6} {:>12} {:>12} {:>10}",
            x.design.name(),
            x.total_macs,
            x.weighting_cycles,
            x.total_cycles,
            beta
        );
    }
    if let Some(dir) = create_out(&c.out)? {
        let path = dir.join("designs.csv");
        experiment::write_designs_csv(&points, fs::File::create(&path)?)?;
        println!("wrote {}", path.display());
        let path = dir.join("row_workload.csv");
        experiment::write_design_rows_csv(&points, fs::File::create(&path)?)?;
        println!("wrote {}", path.display());
    }
    Ok(true)
}

fn gen_graph(gen: &GenSpec, out: &Path) -> Result<bool> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let g = gen.graph()?;
    let h = gen.features()?;
    io::write_edge_list(&g, fs::File::create(out.join("edges.txt"))?)?;
    io::write_features_binary(&h, fs::File::create(out.join("features.gnnf"))?)?;
    let order = degree_sort(&g, AcceleratorConfig::default().cache.degree_bins);
    io::write_snapshot(&g, &order, fs::File::create(out.join("graph.snapshot"))?)?;
    println!(
        "{}: {} vertices, {} arcs, max degree {}, {} features per vertex",
        gen,
        g.num_vertices(),
        g.num_arcs(),
        g.max_degree(),
        h.width()
    );
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Verify(c) => verify(c),
        Command::SweepGamma { common, gammas } => sweep_gamma(common, gammas),
        Command::SweepDesigns { common, designs } => sweep_designs(common, designs),
        Command::GenGraph { gen, out } => gen_graph(gen, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
