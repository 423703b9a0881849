//! Mapping of Aggregation work onto the CPE array.
//!
//! Every vertex touched in an iteration reduces its operands with an adder
//! tree of pairwise operations. With load distribution the tree levels of all
//! vertices are pooled and spread over the whole array, one level at a time;
//! without it each vertex is pinned to a single CPE.

/// Pairwise operations per adder-tree level for `d` operands.
pub fn adder_tree_levels(d: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut d = d;
    while d > 1 {
        out.push(d / 2);
        d = d.div_ceil(2);
    }
    out
}

/// Pools the adder trees of all vertices: operations per level.
pub fn map_edges_to_cpes(operands: &[usize]) -> Vec<usize> {
    let mut levels: Vec<usize> = Vec::new();
    for &d in operands {
        for (l, k) in adder_tree_levels(d).into_iter().enumerate() {
            if levels.len() <= l {
                levels.push(0);
            }
            levels[l] += k;
        }
    }
    levels
}

/// Time to finish `jobs` equal operations on machines where a CPE of group
/// `g` needs `groups[g].1` cycles per operation and there are `groups[g].0`
/// such CPEs. Smallest `T` with `Σ count · ⌊T / cost⌋ ≥ jobs`.
pub fn uniform_makespan(jobs: u64, groups: &[(u64, u64)]) -> u64 {
    if jobs == 0 {
        return 0;
    }
    let fastest = groups.iter().map(|g| g.1).min().expect("at least one CPE group");
    let capacity = |t: u64| groups.iter().map(|&(n, c)| n * (t / c)).sum::<u64>();
    let (mut lo, mut hi) = (1, jobs * fastest);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if capacity(mid) >= jobs {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Per-iteration work of one vertex.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VertexWork {
    /// Operations applied to single operands (edge scaling, attention weights).
    pub edge_ops: usize,
    /// Operands entering the adder tree, including a carried partial.
    pub operands: usize,
}

/// CPE slots of the array: per-CPE MAC counts in the order a scheduler fills
/// them. Row-major; with `widest_first` rows with more MACs come first.
pub fn cpe_slots(row_macs: &[usize], cols: usize, widest_first: bool) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..row_macs.len()).collect();
    if widest_first {
        rows.sort_by_key(|&r| (std::cmp::Reverse(row_macs[r]), r));
    }
    rows.iter().flat_map(|&r| std::iter::repeat_n(row_macs[r], cols)).collect()
}

fn groups_for(slots: &[usize], width: usize) -> Vec<(u64, u64)> {
    let mut by_macs: std::collections::BTreeMap<usize, u64> = Default::default();
    for &m in slots {
        *by_macs.entry(m).or_default() += 1;
    }
    by_macs.into_iter().map(|(m, n)| (n, width.div_ceil(m) as u64)).collect()
}

/// Cycles of an iteration when all operations are pooled: an edge-op stage
/// followed by one barrier per adder-tree level.
pub fn schedule_distributed(work: &[VertexWork], slots: &[usize], width: usize) -> u64 {
    let groups = groups_for(slots, width);
    let edge: u64 = work.iter().map(|w| w.edge_ops as u64).sum();
    let operands: Vec<usize> = work.iter().map(|w| w.operands).collect();
    uniform_makespan(edge, &groups)
        + map_edges_to_cpes(&operands)
            .into_iter()
            .map(|k| uniform_makespan(k as u64, &groups))
            .sum::<u64>()
}

/// Cycles of an iteration when vertex `k` of `work` runs alone on slot
/// `k mod |slots|`.
pub fn schedule_per_vertex(work: &[VertexWork], slots: &[usize], width: usize) -> u64 {
    let mut busy = vec![0u64; slots.len()];
    for (k, w) in work.iter().enumerate() {
        let s = k % slots.len();
        let ops = w.edge_ops + w.operands.saturating_sub(1);
        busy[s] += ops as u64 * width.div_ceil(slots[s]) as u64;
    }
    busy.into_iter().max().unwrap_or(0)
}

/// Total element operations implied by `work` at the given vector width.
pub fn element_ops(work: &[VertexWork], width: usize) -> u64 {
    work.iter()
        .map(|w| (w.edge_ops + w.operands.saturating_sub(1)) as u64 * width as u64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_levels() {
        assert_eq!(adder_tree_levels(8), vec![4, 2, 1]);
        assert_eq!(adder_tree_levels(7), vec![3, 2, 1]);
        assert_eq!(adder_tree_levels(1), Vec::<usize>::new());
        assert_eq!(adder_tree_levels(7).iter().sum::<usize>(), 6);
    }

    #[test]
    fn full_array_takes_one_slot() {
        assert_eq!(uniform_makespan(256, &[(256, 1)]), 1);
        assert_eq!(uniform_makespan(257, &[(256, 1)]), 2);
        assert_eq!(uniform_makespan(0, &[(256, 1)]), 0);
        // 3 fast machines (cost 1) and 1 slow (cost 4) for 8 jobs
        assert_eq!(uniform_makespan(8, &[(3, 1), (1, 4)]), 3);
    }

    #[test]
    fn deep_tree_sets_the_depth() {
        // degrees 7 and 1: only the first vertex has a tree
        let levels = map_edges_to_cpes(&[7, 1]);
        assert_eq!(levels, vec![3, 2, 1]);
        let work = [
            VertexWork { edge_ops: 0, operands: 7 },
            VertexWork { edge_ops: 0, operands: 1 },
        ];
        let slots = cpe_slots(&[4; 16], 16, false);
        assert_eq!(schedule_distributed(&work, &slots, 4), 3);
        assert_eq!(schedule_per_vertex(&work, &slots, 4), 6);
    }

    #[test]
    fn widest_rows_first() {
        let s = cpe_slots(&[4, 4, 6], 2, true);
        assert_eq!(s, vec![6, 6, 4, 4, 4, 4]);
        assert_eq!(cpe_slots(&[4, 6], 1, false), vec![4, 6]);
    }
}
