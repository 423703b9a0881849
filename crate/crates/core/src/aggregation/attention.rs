//! Attention scalars `e1_i = a1 · η_i` and `e2_i = a2 · η_i`, computed once
//! per vertex.

use crate::config::AcceleratorConfig;
use crate::error::{Error, Result};
use crate::graph::FeatureMatrix;
use crate::memory::{DramModel, DramTrace, Phase, TransferKind};
use crate::scalar::Scalar;
use crate::stats::PhaseStats;

use super::schedule::uniform_makespan;

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionScalars<T> {
    pub e1: Vec<T>,
    pub e2: Vec<T>,
}

/// Each vertex occupies one CPE row, its `F` features split into `N` chunks
/// of `G = ⌈F/N⌉`. Rows take vertices in batches of `V_a`, the number of
/// vertices whose weighted features fit in the output buffer split across
/// the columns; each batch runs an `a1` pass and then an `a2` pass over the
/// same cached features, reloading the attention chunk between passes.
pub fn compute_attention_scalars<T: Scalar>(
    weighted: &FeatureMatrix<T>,
    a1: &[T],
    a2: &[T],
    cfg: &AcceleratorConfig,
    trace: &mut DramTrace,
) -> Result<(AttentionScalars<T>, PhaseStats)> {
    let f = weighted.width();
    if a1.len() != f || a2.len() != f {
        return Err(Error::ShapeMismatch(format!(
            "attention halves of length {} and {} for width {f}",
            a1.len(),
            a2.len()
        )));
    }
    let n = weighted.num_rows();
    let mut stats = PhaseStats::default();
    let mut e1 = Vec::with_capacity(n);
    let mut e2 = Vec::with_capacity(n);
    for i in 0..n {
        let row = weighted.row(i);
        let mut s1 = T::zero();
        let mut s2 = T::zero();
        for ((&x, &p), &q) in row.iter().zip(a1).zip(a2) {
            s1 = s1 + p * x;
            s2 = s2 + q * x;
        }
        e1.push(s1);
        e2.push(s2);
    }
    stats.scalar_mults = 2 * (f * n) as u64;
    stats.mac_ops = stats.scalar_mults;

    let g = f.div_ceil(cfg.cols).max(1);
    let mut groups: std::collections::BTreeMap<usize, u64> = Default::default();
    for m in cfg.row_macs() {
        *groups.entry(m).or_default() += 1;
    }
    let groups: Vec<(u64, u64)> = groups.into_iter().map(|(m, c)| (c, g.div_ceil(m) as u64)).collect();
    let vertex_bytes = f * cfg.feature_bytes;
    let v_a = (cfg.output_buffer_bytes / vertex_bytes.max(1) / cfg.cols).max(1);
    let dram = DramModel::new(cfg);
    let mut compute = 0;
    let mut dram_stall = 0;
    let mut prev = 0;
    let mut pending_write = 0;
    for (b, start) in (0..n).step_by(v_a).enumerate() {
        let len = v_a.min(n - start) as u64;
        let bytes = len * vertex_bytes as u64;
        trace.push(b as u64, bytes, TransferKind::Read, Phase::Attention, 0);
        trace.push(b as u64, 8 * len, TransferKind::Write, Phase::Attention, 0);
        dram_stall += if b == 0 {
            dram.random_access(bytes)
        } else {
            dram.transfer(bytes + pending_write, prev)
        };
        pending_write = 8 * len;
        let c = 2 * uniform_makespan(len, &groups) + 2 * g as u64;
        compute += c;
        prev = c;
        stats.dram_bytes_read += bytes;
        stats.dram_bytes_written += 8 * len;
        stats.output_buffer_bytes += bytes + 8 * len;
    }
    dram_stall += dram.raw_cycles(pending_write);
    stats.compute_cycles = compute;
    stats.dram_stall_cycles = dram_stall;
    stats.cycles = compute + dram_stall;
    Ok((AttentionScalars { e1, e2 }, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate;

    #[test]
    fn multiplication_count_is_linear() {
        let cfg = AcceleratorConfig::default();
        for n in [10, 100] {
            let h = generate::dense_features::<f32>(n, 8, 1);
            let (_, s) = compute_attention_scalars(&h, &[0.5; 8], &[0.25; 8], &cfg, &mut DramTrace::new()).unwrap();
            assert_eq!(s.scalar_mults, (2 * 8 * n) as u64);
        }
    }

    #[test]
    fn zero_attention_vector_gives_zero_scalars() {
        let cfg = AcceleratorConfig::default();
        let h = generate::dense_features::<f64>(5, 4, 3);
        let (a, _) = compute_attention_scalars(&h, &[0.0; 4], &[0.0; 4], &cfg, &mut DramTrace::new()).unwrap();
        assert!(a.e1.iter().chain(&a.e2).all(|&v| v == 0.0));
        assert!(compute_attention_scalars(&h, &[0.0; 3], &[0.0; 4], &cfg, &mut DramTrace::new()).is_err());
    }

    #[test]
    fn chunk_size() {
        let cfg = AcceleratorConfig::default();
        assert_eq!(128usize.div_ceil(cfg.cols), 8);
    }
}
