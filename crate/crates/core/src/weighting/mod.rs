//! Weighting phase: `η = h · W` on the CPE array.
//!
//! Feature vectors are cut into `M` blocks of `k` elements; block `b` of a
//! vertex is a unit of CPE-row work and its `N` columns each produce one
//! output element per pass. Sets of `s` vertices are resident at a time and a
//! pass sweeps all sets against `N` weight columns.

mod binning;
mod mpe;
mod redistribution;

pub use binning::{bin_blocks, block_cycles, natural_assignment, BlockRef, RowAssignment};
pub use mpe::{mpe_accumulate, MpeOutcome, RowJob};
pub use redistribution::{apply_load_redistribution, plan_redistribution_pairs};

use serde::{Deserialize, Serialize};

use crate::config::AcceleratorConfig;
use crate::error::{Error, Result};
use crate::graph::FeatureMatrix;
use crate::matrix::Matrix;
use crate::memory::{DramModel, DramTrace, Phase, TransferKind};
use crate::scalar::Scalar;
use crate::stats::PhaseStats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightingPlan {
    /// Block size `⌈F_in / M⌉`.
    pub k: usize,
    /// Vertices per set.
    pub s: usize,
    pub num_sets: usize,
    pub num_passes: usize,
    pub bytes_per_vertex: usize,
}

/// Sizes blocks, sets and passes. Half of the input buffer holds a set; the
/// other half prefetches the next one.
pub fn plan_weighting(
    f_in: usize,
    f_out: usize,
    num_vertices: usize,
    cfg: &AcceleratorConfig,
    bytes_per_vertex: usize,
) -> Result<WeightingPlan> {
    if f_in == 0 || f_out == 0 {
        return Err(Error::InfeasibleConfig("feature widths must be positive".into()));
    }
    let half = cfg.input_buffer_bytes / 2;
    if bytes_per_vertex > half {
        return Err(Error::InfeasibleConfig(format!(
            "a {bytes_per_vertex}-byte feature vector exceeds half of the {}-byte input buffer",
            cfg.input_buffer_bytes
        )));
    }
    let weight_slice = 2 * f_in * cfg.cols * cfg.weight_bytes;
    if weight_slice > cfg.weight_buffer_bytes {
        return Err(Error::InfeasibleConfig(format!(
            "double-buffered weight slice of {weight_slice} bytes exceeds the weight buffer"
        )));
    }
    let s = half.checked_div(bytes_per_vertex).unwrap_or(usize::MAX).min(num_vertices.max(1));
    Ok(WeightingPlan {
        k: f_in.div_ceil(cfg.rows),
        s,
        num_sets: num_vertices.div_ceil(s),
        num_passes: f_out.div_ceil(cfg.cols),
        bytes_per_vertex,
    })
}

/// Row mapping policy for Weighting blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowPolicy {
    /// nnz binning onto MAC row groups; otherwise block `b` runs on row `b`.
    pub flexible_mac: bool,
    pub load_redistribution: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightingOutcome<T> {
    /// `h · W`, indexed by vertex ID.
    pub output: FeatureMatrix<T>,
    pub stats: PhaseStats,
    /// Busy cycles of every CPE row over the whole phase.
    pub row_cycles: Vec<u64>,
    pub plan: WeightingPlan,
    pub mpe_stall_events: u64,
}

/// Nonzero count of each of the `m` blocks of a row.
pub fn block_nnz(nonzeros: &[(usize, impl Copy)], k: usize, m: usize) -> Vec<usize> {
    let mut out = vec![0; m];
    for &(c, _) in nonzeros {
        out[(c / k).min(m - 1)] += 1;
    }
    out
}

/// Builds the row assignment of one set under `policy`.
pub fn assign_rows(blocks: &[BlockRef], cfg: &AcceleratorConfig, policy: RowPolicy, k: usize, dram: &DramModel) -> RowAssignment {
    let mut a = if policy.flexible_mac {
        bin_blocks(blocks, &cfg.mac_profile)
    } else {
        natural_assignment(blocks, &cfg.mac_profile)
    };
    if policy.load_redistribution {
        a = apply_load_redistribution(&a, blocks, &cfg.row_macs(), cfg.lr_max_pairs, lr_reload_penalty(k, cfg, dram));
    }
    a
}

/// Cycles to refill a row's weight spads with one `k × N` weight block held
/// in the weight buffer, at one value per CPE per cycle.
pub fn lr_reload_penalty(k: usize, _cfg: &AcceleratorConfig, _dram: &DramModel) -> u64 {
    k as u64
}

/// Simulates the Weighting phase for vertices taken in `order`.
pub fn simulate_weighting<T: Scalar>(
    h: &FeatureMatrix<T>,
    w: &Matrix<T>,
    order: &[usize],
    cfg: &AcceleratorConfig,
    policy: RowPolicy,
    trace: &mut DramTrace,
) -> Result<WeightingOutcome<T>> {
    cfg.validate()?;
    let n = h.num_rows();
    if order.len() != n {
        return Err(Error::ShapeMismatch(format!("order has {} entries for {n} vertices", order.len())));
    }
    if w.rows() != h.width() {
        return Err(Error::ShapeMismatch(format!(
            "weight has {} rows for features of width {}",
            w.rows(),
            h.width()
        )));
    }
    let (f_in, f_out) = (w.rows(), w.cols());
    let fb = cfg.feature_bytes;
    let bytes_per_vertex = (0..n).map(|i| h.row_bytes(i, fb)).max().unwrap_or(0);
    let plan = plan_weighting(f_in, f_out, n, cfg, bytes_per_vertex)?;
    let dram = DramModel::new(cfg);
    let m = cfg.rows;
    let row_macs = cfg.row_macs();

    let mut out = vec![T::zero(); n * f_out];
    let mut stats = PhaseStats::default();
    let mut row_cycles = vec![0u64; m];
    let mut set_makespan = Vec::with_capacity(plan.num_sets);
    let mut set_bytes = Vec::with_capacity(plan.num_sets);
    let mut mpe_stall_events = 0;
    let mut mpe_stall_cycles = 0;

    for set in order.chunks(plan.s) {
        let mut blocks = Vec::with_capacity(set.len() * m);
        for (pos, &v) in set.iter().enumerate() {
            let nz = h.row_nonzeros(v);
            let o = &mut out[v * f_out..(v + 1) * f_out];
            for &(c, x) in &nz {
                for (acc, &wv) in o.iter_mut().zip(w.row(c)) {
                    *acc = *acc + x * wv;
                }
            }
            for (b, cnt) in block_nnz(&nz, plan.k, m).into_iter().enumerate() {
                blocks.push(BlockRef {
                    vertex: pos,
                    block: b,
                    nnz: cnt,
                });
            }
            stats.mac_ops += (nz.len() * f_out) as u64;
            stats.skipped_zero_mults += ((f_in - nz.len()) * f_out) as u64;
        }
        let a = assign_rows(&blocks, cfg, policy, plan.k, &dram);
        let queues: Vec<Vec<RowJob>> = a
            .queues
            .iter()
            .enumerate()
            .map(|(r, q)| {
                let mut penalty = a.row_penalty[r];
                q.iter()
                    .map(|&i| {
                        let mut cycles = block_cycles(blocks[i].nnz, row_macs[r]);
                        if a.offloaded[i] {
                            cycles += std::mem::take(&mut penalty);
                        }
                        RowJob {
                            vertex: blocks[i].vertex,
                            cycles,
                        }
                    })
                    .collect()
            })
            .collect();
        let mpe = mpe_accumulate(&queues, set.len(), cfg.psum_slots);
        for (rc, &l) in row_cycles.iter_mut().zip(&a.row_loads) {
            *rc += l * plan.num_passes as u64;
        }
        set_makespan.push(mpe.makespan);
        mpe_stall_events += mpe.stall_events;
        mpe_stall_cycles += mpe.stall_cycles;
        set_bytes.push(set.iter().map(|&v| h.row_bytes(v, fb) as u64).sum::<u64>());
    }

    // Timeline of (pass, set) steps: the next step's reads and the previous
    // step's writes stream while the current step computes.
    let mut reads = Vec::new();
    let mut writes = Vec::new();
    let mut computes = Vec::new();
    for p in 0..plan.num_passes {
        let cols = (f_out - p * cfg.cols).min(cfg.cols);
        let wbytes = (f_in * cols * cfg.weight_bytes) as u64;
        trace.push(p as u64, wbytes, TransferKind::Read, Phase::Weighting, p as u64);
        stats.weight_buffer_bytes += 2 * wbytes;
        for (i, set) in order.chunks(plan.s).enumerate() {
            let fetch = if p == 0 || plan.num_sets > 1 { set_bytes[i] } else { 0 };
            trace.push(i as u64, fetch, TransferKind::Read, Phase::Weighting, p as u64);
            let obytes = (set.len() * cols * fb) as u64;
            trace.push(i as u64, obytes, TransferKind::Write, Phase::Weighting, p as u64);
            reads.push(fetch + if i == 0 { wbytes } else { 0 });
            writes.push(obytes);
            computes.push(set_makespan[i]);
            stats.input_buffer_bytes += fetch + set_bytes[i];
            stats.output_buffer_bytes += 2 * obytes;
        }
    }
    let mut dram_stall = dram.random_access(reads[0]);
    for j in 0..computes.len() {
        let pending = reads.get(j + 1).copied().unwrap_or(0) + if j > 0 { writes[j - 1] } else { 0 };
        dram_stall += dram.transfer(pending, computes[j]);
    }
    dram_stall += dram.raw_cycles(*writes.last().expect("at least one step"));

    let compute: u64 = set_makespan.iter().sum::<u64>() * plan.num_passes as u64;
    stats.compute_cycles = compute;
    stats.stall_cycles = mpe_stall_cycles * plan.num_passes as u64;
    stats.dram_stall_cycles = dram_stall;
    stats.cycles = compute + dram_stall;
    stats.dram_bytes_read = reads.iter().sum();
    stats.dram_bytes_written = writes.iter().sum();

    Ok(WeightingOutcome {
        output: FeatureMatrix::from_dense(n, f_out, out)?,
        stats,
        row_cycles,
        plan,
        mpe_stall_events: mpe_stall_events * plan.num_passes as u64,
    })
}
