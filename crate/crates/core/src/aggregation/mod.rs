//! Aggregation phase: combining weighted features over neighborhoods.
//!
//! With degree-aware caching the phase is a sequence of cache iterations;
//! every iteration processes the unprocessed edges among resident vertices,
//! schedules the resulting pairwise operations on the CPE array and finalizes
//! vertices whose edges are all in. The baseline instead walks the vertices
//! in ID order, one buffer-sized set at a time, and fetches out-of-set
//! neighbors from DRAM on demand.

mod attention;
mod kernel;
mod schedule;
mod sfu;

pub use attention::{compute_attention_scalars, AttentionScalars};
pub use kernel::{finalize_vertex, gat_edge_op, Kernel, VertexAggState};
pub use schedule::{
    adder_tree_levels, cpe_slots, element_ops, map_edges_to_cpes, schedule_distributed, schedule_per_vertex,
    uniform_makespan, VertexWork,
};
pub use sfu::Sfu;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cache::{CacheState, OutputBuffer};
use crate::config::AcceleratorConfig;
use crate::error::{Error, Result};
use crate::graph::{build_csr, degree_sort, FeatureMatrix, Graph, VertexOrder};
use crate::memory::{DramModel, DramTrace, Phase, TransferKind};
use crate::reference::{GnnKind, LayerSpec};
use crate::scalar::Scalar;
use crate::stats::PhaseStats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationOptions {
    /// Degree-aware caching; otherwise ID-order sets.
    pub caching: bool,
    /// Use the configured MAC profile, widest rows first; otherwise every
    /// CPE has the profile's smallest MAC count.
    pub flexible_mac: bool,
    /// Pool adder-tree operations over the whole array; otherwise one vertex
    /// per CPE.
    pub load_balance: bool,
}

impl Default for AggregationOptions {
    fn default() -> Self {
        Self {
            caching: true,
            flexible_mac: true,
            load_balance: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregationOutcome<T> {
    /// Per-vertex results; for GINConv the hidden layer of the MLP.
    pub output: FeatureMatrix<T>,
    pub stats: PhaseStats,
    pub rounds: usize,
    pub iterations: usize,
    /// Resident `α` histogram at the start of every Round.
    pub alpha_histograms: Vec<BTreeMap<usize, usize>>,
    /// Iterations that needed a temporarily raised `γ`.
    pub gamma_escalations: usize,
    pub capacity: usize,
    pub num_edges: usize,
    pub initial_alpha_sum: u64,
    pub alpha_decrements: u64,
    pub spilled_vertices: usize,
}

/// The graph Aggregation actually walks. GraphSAGE uses the union of its
/// sampled edges, each end pulling only if it sampled the other.
#[derive(Clone, Debug)]
pub struct WorkGraph {
    pub graph: Graph,
    pulls: Option<Vec<bool>>,
    sample_sizes: Vec<usize>,
}

impl WorkGraph {
    pub fn new(g: &Graph, kind: GnnKind, samples: Option<&[Vec<usize>]>) -> Result<Self> {
        let n = g.num_vertices();
        if kind != GnnKind::GraphSage {
            return Ok(Self {
                graph: g.clone(),
                pulls: None,
                sample_sizes: vec![0; n],
            });
        }
        let samples = samples.ok_or_else(|| Error::Config("GraphSAGE aggregation needs neighbor samples".into()))?;
        if samples.len() != n {
            return Err(Error::ShapeMismatch("one neighbor sample per vertex required".into()));
        }
        let mut edges = Vec::new();
        for (i, s) in samples.iter().enumerate() {
            for &j in s {
                if j == i {
                    return Err(Error::ShapeMismatch(format!("sample of vertex {i} contains itself")));
                }
                edges.push((i.min(j), i.max(j)));
            }
        }
        let graph = build_csr(&edges, n, true)?;
        let mut sorted: Vec<Vec<usize>> = samples.to_vec();
        sorted.iter_mut().for_each(|s| s.sort_unstable());
        let mut pulls = vec![false; graph.num_arcs()];
        for u in 0..n {
            let base = graph.offsets()[u];
            for (k, v) in graph.neighbors(u).iter().enumerate() {
                pulls[base + k] = sorted[u].binary_search(v).is_ok();
            }
        }
        Ok(Self {
            graph,
            pulls: Some(pulls),
            sample_sizes: samples.iter().map(Vec::len).collect(),
        })
    }

    /// Whether `u` takes a contribution from neighbor `v`.
    pub fn pulls(&self, u: usize, v: usize) -> bool {
        match &self.pulls {
            None => true,
            Some(p) => self.graph.arc_index(u, v).is_some_and(|a| p[a]),
        }
    }
}

fn vertex_bytes(width: usize, kind: GnnKind, cfg: &AcceleratorConfig) -> u64 {
    (width * cfg.feature_bytes + if kind == GnnKind::Gat { 8 } else { 0 }) as u64
}

/// Bytes a vertex occupies in the input buffer: features, adjacency, `α`.
pub fn vertex_footprint(g: &Graph, v: usize, width: usize, kind: GnnKind, cfg: &AcceleratorConfig) -> u64 {
    vertex_bytes(width, kind, cfg) + 4 * g.degree(v) as u64 + 4
}

/// Resident vertices `n`: the configured value, or as many average-degree
/// vertices as fit in half of the input buffer.
pub fn cache_capacity(g: &Graph, width: usize, kind: GnnKind, cfg: &AcceleratorConfig) -> usize {
    let n = g.num_vertices();
    let c = cfg.cache.capacity_vertices.unwrap_or_else(|| {
        let avg = g.num_arcs().div_ceil(n.max(1));
        let per = vertex_bytes(width, kind, cfg) as usize + 4 * avg + 4;
        (cfg.input_buffer_bytes / 2) / per
    });
    c.clamp(2.min(n.max(1)), n.max(1))
}

fn cpe_slot_list(cfg: &AcceleratorConfig, flexible: bool) -> Vec<usize> {
    let macs = cfg.row_macs();
    if flexible {
        cpe_slots(&macs, cfg.cols, true)
    } else {
        let m = macs.iter().copied().min().unwrap_or(1);
        vec![m; cfg.rows * cfg.cols]
    }
}

struct Driver<'a, 'k, T: Scalar> {
    work: &'a WorkGraph,
    kernel: Kernel<'k, T>,
    states: Vec<VertexAggState<T>>,
    out: Vec<T>,
    spec: &'a LayerSpec<T>,
    slots: Vec<usize>,
    op_width: usize,
    load_balance: bool,
    stats: PhaseStats,
}

/// Work of one iteration, by vertex.
#[derive(Default)]
struct IterationWork {
    contributions: BTreeMap<usize, usize>,
    fresh: std::collections::BTreeSet<usize>,
}

impl<T: Scalar> Driver<'_, '_, T> {
    fn gat(&self) -> bool {
        self.spec.kind == GnnKind::Gat
    }

    fn start(&mut self, v: usize, it: &mut IterationWork) {
        if !self.states[v].self_done {
            self.kernel.apply_self(v, &mut self.states[v]);
            it.fresh.insert(v);
            it.contributions.entry(v).or_insert(0);
        }
    }

    fn edge(&mut self, u: usize, v: usize, it: &mut IterationWork) {
        if u == v {
            return;
        }
        for (a, b) in [(u, v), (v, u)] {
            if self.work.pulls(a, b) {
                self.kernel.apply_edge(a, b, &mut self.states[a]);
                *it.contributions.entry(a).or_insert(0) += 1;
            }
        }
        self.stats.input_buffer_bytes += 2 * (self.kernel.width() * T::BYTES) as u64;
    }

    /// Cycles and operation counts of the iteration. `carried` tells whether
    /// a vertex had a partial before the iteration.
    fn cost(&mut self, it: &IterationWork, carried: &BTreeMap<usize, bool>) -> u64 {
        let mult_edge = self.kernel.edge_multiplies();
        let mult_self = self.kernel.self_multiplies();
        let work: Vec<VertexWork> = it
            .contributions
            .iter()
            .map(|(&v, &c)| {
                let fresh = it.fresh.contains(&v);
                let carry = carried.get(&v).copied().unwrap_or(false);
                VertexWork {
                    edge_ops: if mult_edge { c } else { 0 } + usize::from(fresh && mult_self),
                    operands: c + usize::from(fresh) + usize::from(carry),
                }
            })
            .collect();
        self.stats.mac_ops += element_ops(&work, self.op_width);
        let mut cycles = if self.load_balance {
            schedule_distributed(&work, &self.slots, self.op_width)
        } else {
            schedule_per_vertex(&work, &self.slots, self.op_width)
        };
        if self.gat() && !work.is_empty() {
            cycles += self.kernel.sfu.lrelu_latency + self.kernel.sfu.exp_latency;
        }
        cycles
    }

    fn finalize(&mut self, v: usize) -> Result<()> {
        let row = finalize_vertex(v, &self.states[v], self.spec, self.work.sample_sizes[v])?;
        let w = row.len();
        self.out[v * w..(v + 1) * w].copy_from_slice(&row);
        self.states[v].finalized = true;
        Ok(())
    }

    fn finish_stats(&mut self) {
        let s = &self.kernel;
        self.stats.sfu_ops = 2 * s.exp_ops
            + if self.gat() {
                self.states.len() as u64
            } else {
                0
            };
        self.stats.exp_clamps = s.exp_clamps;
    }
}

/// Simulates Aggregation of the weighted features `weighted` over `g`.
/// GAT needs `scalars`; GraphSAGE needs `samples`.
pub fn simulate_aggregation<T: Scalar>(
    g: &Graph,
    weighted: &FeatureMatrix<T>,
    spec: &LayerSpec<T>,
    scalars: Option<&AttentionScalars<T>>,
    samples: Option<&[Vec<usize>]>,
    cfg: &AcceleratorConfig,
    opts: AggregationOptions,
    trace: &mut DramTrace,
) -> Result<AggregationOutcome<T>> {
    cfg.validate()?;
    let n = g.num_vertices();
    let width = weighted.width();
    let work = WorkGraph::new(g, spec.kind, samples)?;
    let kernel = Kernel::new(g, spec, weighted, scalars, Sfu::new(&cfg.sfu), cfg.sfu.softmax)?;
    let mut d = Driver {
        work: &work,
        kernel,
        states: (0..n).map(|v| VertexAggState::new(width, work.graph.degree(v))).collect(),
        out: vec![T::zero(); n * width],
        spec,
        slots: cpe_slot_list(cfg, opts.flexible_mac),
        op_width: width + usize::from(spec.kind == GnnKind::Gat),
        load_balance: opts.load_balance,
        stats: PhaseStats::default(),
    };
    let mut outcome = if opts.caching {
        run_cached(&mut d, cfg, trace)?
    } else {
        run_baseline(&mut d, cfg, trace)?
    };
    d.finish_stats();
    outcome.stats = d.stats;
    outcome.output = FeatureMatrix::from_dense(n, width, d.out)?;
    Ok(outcome)
}

fn empty_outcome<T: Scalar>(capacity: usize, num_edges: usize) -> AggregationOutcome<T> {
    AggregationOutcome {
        output: FeatureMatrix::zeros(0, 0),
        stats: PhaseStats::default(),
        rounds: 0,
        iterations: 0,
        alpha_histograms: Vec::new(),
        gamma_escalations: 0,
        capacity,
        num_edges,
        initial_alpha_sum: 0,
        alpha_decrements: 0,
        spilled_vertices: 0,
    }
}

fn run_cached<T: Scalar>(d: &mut Driver<'_, '_, T>, cfg: &AcceleratorConfig, trace: &mut DramTrace) -> Result<AggregationOutcome<T>> {
    let g = &d.work.graph;
    let n = g.num_vertices();
    let width = d.kernel.width();
    let kind = d.spec.kind;
    let capacity = cache_capacity(g, width, kind, cfg);
    let order = degree_sort(g, cfg.cache.degree_bins);
    let footprint = (0..n).map(|v| vertex_footprint(g, v, width, kind, cfg)).collect();
    let mut cache = CacheState::new(g, order, capacity, cfg.cache.block_size_vertices, footprint)?
        .with_byte_budget((cfg.input_buffer_bytes / 2) as u64)?;
    let mut res = empty_outcome(capacity, cache.num_edges());
    res.initial_alpha_sum = cache.initial_alpha_sum();
    if n == 0 {
        return Ok(res);
    }
    let r = cfg.cache.r.unwrap_or(capacity / 8).max(1);
    let partial_bytes = vertex_bytes(width, kind, cfg).min((width * cfg.feature_bytes + cfg.feature_bytes) as u64);
    let out_bytes = (width * cfg.feature_bytes) as u64;
    let dram = DramModel::new(cfg);
    let mut ob = OutputBuffer::new(cfg.output_buffer_bytes as u64, n);
    let mut merge = Vec::new();

    let first = cache.init_cache(trace);
    d.stats.dram_bytes_read += first.bytes_read;
    d.stats.input_buffer_bytes += first.bytes_read;
    let mut dram_stall = dram.random_access(first.bytes_read);
    let mut compute = 0;
    res.alpha_histograms.push(cache.alpha_histogram());
    let max_iterations = 64 * (n + cache.num_edges()) + 1024;

    loop {
        res.iterations += 1;
        if res.iterations > max_iterations {
            return Err(Error::NoProgress(max_iterations));
        }
        let round = cache.round() as u64;
        let mut it = IterationWork::default();
        let resident = cache.resident_vertices();
        let carried: BTreeMap<usize, bool> = resident.iter().map(|&v| (v, d.states[v].started)).collect();
        for &v in &resident {
            d.start(v, &mut it);
        }
        let sub = cache.current_subgraph(g);
        for e in &sub {
            d.edge(e.u, e.v, &mut it);
        }
        cache.commit_processed(&sub)?;
        for &v in &resident {
            d.states[v].remaining = cache.alpha(v);
        }
        let mut cycles = d.cost(&it, &carried);

        let log_before = ob.log_bytes();
        let mut written = 0;
        for &v in it.contributions.keys() {
            ob.write(v, g.degree(v), partial_bytes, trace, round);
            d.stats.output_buffer_bytes += partial_bytes;
        }
        let mut any_final = false;
        for &v in &resident {
            if cache.alpha(v) == 0 && !cache.is_finalized(v) {
                d.finalize(v)?;
                cache.finalize(v)?;
                ob.release(v, trace, round);
                any_final = true;
                if ob.fragments(v) > 0 {
                    merge.push(v);
                } else {
                    trace.push(cache.block_of(v) as u64, out_bytes, TransferKind::Write, Phase::Aggregation, round);
                    written += out_bytes;
                }
            }
        }
        if any_final && kind == GnnKind::Gat {
            cycles += d.kernel.sfu.divide_latency;
        }
        written += ob.log_bytes() - log_before;
        d.stats.dram_bytes_written += written;
        compute += cycles;

        if cache.is_done() {
            dram_stall += dram.raw_cycles(written);
            break;
        }
        let mut gamma = cfg.cache.gamma;
        if cache.detect_deadlock(g, gamma) {
            if !cfg.cache.dynamic_gamma {
                return Err(Error::Deadlock {
                    round: cache.round(),
                    gamma,
                    unprocessed_edges: cache.unprocessed_edges(),
                });
            }
            let cap = g.max_degree() + 1;
            while cache.eviction_candidates(gamma).is_empty() && gamma < cap {
                gamma = (2 * gamma).clamp(1, cap);
            }
            res.gamma_escalations += 1;
        }
        let rep = cache.evict_and_refill(gamma, r, trace);
        d.stats.dram_bytes_read += rep.bytes_read;
        d.stats.dram_bytes_written += rep.bytes_written;
        d.stats.input_buffer_bytes += rep.bytes_read;
        dram_stall += dram.transfer(rep.bytes_read + rep.bytes_written + written, cycles);
        if rep.rounds_started > 0 {
            res.alpha_histograms.push(cache.alpha_histogram());
        }
    }

    // Merge sweep over the spill log: read every fragment back once and
    // reduce the fragments of each vertex.
    if !merge.is_empty() {
        let log = ob.log_bytes();
        let last = cache.round() as u64;
        trace.push(0, log, TransferKind::Read, Phase::Merge, last);
        let merge_work: Vec<VertexWork> = merge
            .iter()
            .map(|&v| VertexWork {
                edge_ops: 0,
                operands: ob.fragments(v) as usize,
            })
            .collect();
        d.stats.mac_ops += element_ops(&merge_work, d.op_width);
        let c = schedule_distributed(&merge_work, &d.slots, d.op_width);
        compute += c;
        let wb = merge.len() as u64 * out_bytes;
        for (k, _) in merge.iter().enumerate() {
            trace.push(k as u64, out_bytes, TransferKind::Write, Phase::Merge, last);
        }
        dram_stall += dram.random_access(log) + dram.transfer(wb, c);
        d.stats.dram_bytes_read += log;
        d.stats.dram_bytes_written += wb;
    }

    res.rounds = cache.round() + 1;
    res.alpha_decrements = cache.decrements();
    res.spilled_vertices = ob.spilled_vertices();
    d.stats.compute_cycles = compute;
    d.stats.dram_stall_cycles = dram_stall;
    d.stats.cycles = compute + dram_stall;
    Ok(res)
}

/// ID-order sets without degree awareness. Each edge leaving the set toward
/// a later set needs the neighbor's weighted features, fetched from DRAM at
/// random; every vertex finishes with its set.
fn run_baseline<T: Scalar>(d: &mut Driver<'_, '_, T>, cfg: &AcceleratorConfig, trace: &mut DramTrace) -> Result<AggregationOutcome<T>> {
    let g = &d.work.graph;
    let n = g.num_vertices();
    let width = d.kernel.width();
    let kind = d.spec.kind;
    let capacity = cache_capacity(g, width, kind, cfg);
    let num_edges = g.edges().len();
    let mut res = empty_outcome(capacity, num_edges);
    res.initial_alpha_sum = g.num_arcs() as u64;
    if n == 0 {
        return Ok(res);
    }
    let order = VertexOrder::identity(n);
    let block = cfg.cache.block_size_vertices;
    let dram = DramModel::new(cfg);
    let fetch = vertex_bytes(width, kind, cfg);
    let out_bytes = (width * cfg.feature_bytes) as u64;
    let budget = (cfg.input_buffer_bytes / 2) as u64;
    let footprint: Vec<u64> = (0..n).map(|v| vertex_footprint(g, v, width, kind, cfg)).collect();

    // Sets bounded by vertex count and by bytes.
    let mut sets: Vec<std::ops::Range<usize>> = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start;
        let mut bytes = 0;
        while end < n && end - start < capacity && bytes + footprint[end] <= budget {
            bytes += footprint[end];
            end += 1;
        }
        if end == start {
            return Err(Error::InfeasibleConfig(format!("vertex {start} does not fit in the input buffer")));
        }
        sets.push(start..end);
        start = end;
    }

    let mut compute = 0;
    let mut dram_stall = 0;
    let mut prev_cycles = 0;
    let mut pending_write = 0;
    for (k, set) in sets.iter().enumerate() {
        // sequential load of the set, prefetched during the previous set
        let load: u64 = set.clone().map(|v| footprint[v]).sum();
        let mut runs: BTreeMap<usize, u64> = BTreeMap::new();
        for v in set.clone() {
            *runs.entry(order.position(v) / block).or_default() += footprint[v];
        }
        for (b, bytes) in runs {
            trace.push(b as u64, bytes, TransferKind::Read, Phase::Aggregation, 0);
        }
        dram_stall += if k == 0 {
            dram.random_access(load)
        } else {
            dram.transfer(load + pending_write, prev_cycles)
        };
        d.stats.dram_bytes_read += load;
        d.stats.input_buffer_bytes += load;

        let mut it = IterationWork::default();
        let carried = BTreeMap::new();
        for v in set.clone() {
            d.start(v, &mut it);
        }
        let mut random = 0;
        for u in set.clone() {
            for &v in g.neighbors(u) {
                if v < set.start || (set.contains(&v) && v < u) {
                    continue;
                }
                if v >= set.end {
                    trace.push((v / block) as u64, fetch, TransferKind::Read, Phase::Aggregation, 0);
                    random += dram.random_access(fetch);
                    d.stats.dram_bytes_read += fetch;
                }
                d.edge(u, v, &mut it);
                res.alpha_decrements += if u == v { 1 } else { 2 };
                d.states[u].remaining -= 1;
                if u != v {
                    d.states[v].remaining -= 1;
                }
            }
        }
        let cycles = d.cost(&it, &carried)
            + if kind == GnnKind::Gat {
                d.kernel.sfu.divide_latency
            } else {
                0
            };
        for v in set.clone() {
            d.finalize(v)?;
            trace.push((v / block) as u64, out_bytes, TransferKind::Write, Phase::Aggregation, 0);
        }
        // later-set partials wait in the output buffer for their own set
        d.stats.output_buffer_bytes += it.contributions.len() as u64 * fetch;
        pending_write = set.len() as u64 * out_bytes;
        d.stats.dram_bytes_written += pending_write;
        dram_stall += random;
        compute += cycles;
        prev_cycles = cycles;
        res.iterations += 1;
    }
    dram_stall += dram.raw_cycles(pending_write);
    res.rounds = 1;
    d.stats.compute_cycles = compute;
    d.stats.dram_stall_cycles = dram_stall;
    d.stats.cycles = compute + dram_stall;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate;
    use crate::reference::{self, sample_neighborhoods, Activation, SampleStream};

    fn run(
        g: &Graph,
        h: &FeatureMatrix<f64>,
        spec: &LayerSpec<f64>,
        cfg: &AcceleratorConfig,
        opts: AggregationOptions,
        samples: Option<&[Vec<usize>]>,
    ) -> (AggregationOutcome<f64>, DramTrace) {
        let eta = FeatureMatrix::from_rows(&reference::weighting(h, spec)).unwrap();
        let mut trace = DramTrace::new();
        let scalars = (spec.kind == GnnKind::Gat).then(|| {
            compute_attention_scalars(&eta, spec.a1(), spec.a2(), cfg, &mut DramTrace::new())
                .unwrap()
                .0
        });
        let o = simulate_aggregation(g, &eta, spec, scalars.as_ref(), samples, cfg, opts, &mut trace).unwrap();
        (o, trace)
    }

    fn small_cache() -> AcceleratorConfig {
        let mut cfg = AcceleratorConfig::default();
        cfg.cache.capacity_vertices = Some(6);
        cfg.cache.dynamic_gamma = true;
        cfg.sfu.exact_exp = true;
        cfg
    }

    #[test]
    fn path_gcn_matches_golden() {
        let g = build_csr(&[(0, 1), (1, 2)], 3, true).unwrap();
        let h = generate::dense_features::<f64>(3, 4, 1);
        let spec = LayerSpec::random(GnnKind::Gcn, 4, 3, &mut generate::rng(1));
        let want = reference::gcn_layer(&g, &h, &spec).unwrap();
        for caching in [true, false] {
            let opts = AggregationOptions {
                caching,
                ..Default::default()
            };
            let (o, _) = run(&g, &h, &spec, &AcceleratorConfig::default(), opts, None);
            assert!(crate::graph::relative_error(&o.output, &want) < 1e-12);
        }
    }

    #[test]
    fn resident_graph_is_one_round() {
        let g = generate::power_law(60, 2, 3).unwrap();
        let h = generate::dense_features::<f64>(60, 8, 2);
        let spec = LayerSpec::random(GnnKind::Gcn, 8, 8, &mut generate::rng(2));
        let cfg = AcceleratorConfig::default();
        let (o, t) = run(&g, &h, &spec, &cfg, AggregationOptions::default(), None);
        assert_eq!(o.rounds, 1);
        let one_pass: u64 = (0..60).map(|v| vertex_footprint(&g, v, 8, GnnKind::Gcn, &cfg)).sum();
        assert_eq!(t.bytes(TransferKind::Read, Some(Phase::Aggregation)), one_pass);
        assert_eq!(o.initial_alpha_sum, o.alpha_decrements);
    }

    #[test]
    fn all_kinds_match_golden_with_small_cache() {
        let g = generate::power_law(40, 3, 7).unwrap();
        let h = generate::dense_features::<f64>(40, 6, 3);
        let cfg = small_cache();
        for kind in GnnKind::ALL {
            let mut spec = LayerSpec::random(kind, 6, 5, &mut generate::rng(9));
            spec.activation = Activation::Relu;
            let samples = sample_neighborhoods(&g, 3, &mut SampleStream::seeded(4)).unwrap();
            let want = match kind {
                GnnKind::GraphSage => reference::sage_layer_with_samples(&g, &h, &spec, &samples).unwrap(),
                _ => reference::run_layer(&g, &h, &spec, None).unwrap(),
            };
            let (o, t) = run(&g, &h, &spec, &cfg, AggregationOptions::default(), Some(&samples));
            let got = if kind == GnnKind::Gin {
                let rows: Vec<Vec<f64>> = (0..40)
                    .map(|i| {
                        let mlp = spec.mlp.as_ref().unwrap();
                        let mut r = mlp.weight2.left_mul(&o.output.row(i));
                        r.iter_mut().zip(&mlp.bias2).for_each(|(x, b)| *x += b);
                        spec.activation.apply(&mut r);
                        r
                    })
                    .collect();
                FeatureMatrix::from_rows(&rows).unwrap()
            } else {
                o.output.clone()
            };
            let err = crate::graph::relative_error(&got, &want);
            assert!(err < 1e-10, "{kind:?}: {err}");
            assert!(o.rounds > 1, "{kind:?}");
            assert!(t.is_sequential(Phase::Aggregation));
            assert_eq!(o.initial_alpha_sum, o.alpha_decrements);
        }
    }

    #[test]
    fn gamma_zero_deadlocks_without_escalation() {
        let g = generate::power_law(40, 3, 7).unwrap();
        let h = generate::dense_features::<f64>(40, 4, 3);
        let spec = LayerSpec::random(GnnKind::Gcn, 4, 4, &mut generate::rng(9));
        let mut cfg = small_cache();
        cfg.cache.gamma = 0;
        cfg.cache.dynamic_gamma = false;
        let eta = FeatureMatrix::from_rows(&reference::weighting(&h, &spec)).unwrap();
        let r = simulate_aggregation(&g, &eta, &spec, None, None, &cfg, AggregationOptions::default(), &mut DramTrace::new());
        assert!(matches!(r, Err(Error::Deadlock { gamma: 0, .. })));
        cfg.cache.dynamic_gamma = true;
        let (o, _) = run(&g, &h, &spec, &cfg, AggregationOptions::default(), None);
        assert!(o.gamma_escalations > 0);
    }

    #[test]
    fn sage_pulls_follow_samples() {
        let g = build_csr(&[(0, 1), (1, 2)], 3, true).unwrap();
        let samples = vec![vec![1], vec![], vec![1]];
        let w = WorkGraph::new(&g, GnnKind::GraphSage, Some(&samples)).unwrap();
        assert!(w.pulls(0, 1) && !w.pulls(1, 0) && w.pulls(2, 1));
        assert!(WorkGraph::new(&g, GnnKind::GraphSage, None).is_err());
    }
}
