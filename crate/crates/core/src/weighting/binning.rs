use serde::{Deserialize, Serialize};

use crate::config::MacProfile;

/// One `k`-element block of one vertex inside a set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRef {
    /// Position of the vertex within its set.
    pub vertex: usize,
    pub block: usize,
    pub nnz: usize,
}

/// Cycles a block occupies a CPE with `macs` MAC units.
#[inline]
pub fn block_cycles(nnz: usize, macs: usize) -> u64 {
    nnz.div_ceil(macs) as u64
}

/// Queue of blocks per CPE row. Blocks with no nonzeros are skipped and never
/// queued.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowAssignment {
    /// Indices into the block list, per row, in issue order.
    pub queues: Vec<Vec<usize>>,
    /// Estimated busy cycles per row, including redistribution penalties.
    pub row_loads: Vec<u64>,
    /// Row group each queued block was binned to (`usize::MAX` when skipped).
    pub block_group: Vec<usize>,
    /// Weight reload cycles a row pays before its first offloaded block.
    pub row_penalty: Vec<u64>,
    /// Blocks moved to another row by load redistribution.
    pub offloaded: Vec<bool>,
}

impl RowAssignment {
    pub(crate) fn empty(rows: usize, num_blocks: usize) -> Self {
        Self {
            queues: vec![Vec::new(); rows],
            row_loads: vec![0; rows],
            block_group: vec![usize::MAX; num_blocks],
            row_penalty: vec![0; rows],
            offloaded: vec![false; num_blocks],
        }
    }

    /// Row nnz totals.
    pub fn row_nnz(&self, blocks: &[BlockRef]) -> Vec<usize> {
        self.queues.iter().map(|q| q.iter().map(|&i| blocks[i].nnz).sum()).collect()
    }

    pub fn max_load(&self) -> u64 {
        self.row_loads.iter().copied().max().unwrap_or(0)
    }

    /// Restores ascending vertex order in every queue.
    pub fn sort_queues(&mut self, blocks: &[BlockRef]) {
        for q in &mut self.queues {
            q.sort_by_key(|&i| (blocks[i].vertex, blocks[i].block));
        }
    }
}

/// Block `b` of every vertex goes to row `b mod M`.
pub fn natural_assignment(blocks: &[BlockRef], profile: &MacProfile) -> RowAssignment {
    let macs = profile.row_macs();
    let mut a = RowAssignment::empty(macs.len(), blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        if b.nnz == 0 {
            continue;
        }
        let r = b.block % macs.len();
        a.queues[r].push(i);
        a.row_loads[r] += block_cycles(b.nnz, macs[r]);
        a.block_group[i] = profile.group_of_row(r);
    }
    a
}

/// Bins nonzero blocks by nnz, one bin per row group, and sends lighter bins
/// to groups with fewer MACs.
///
/// Bin populations are proportional to the number of rows in each group, so
/// every CPE row receives about the same number of blocks; ties in nnz go to
/// the lower bin in (vertex, block) order. Inside a group each block, taken
/// heaviest first, joins the least-loaded row. A counting sort keeps the
/// binning linear in the number of blocks.
pub fn bin_blocks(blocks: &[BlockRef], profile: &MacProfile) -> RowAssignment {
    let macs = profile.row_macs();
    let mut a = RowAssignment::empty(macs.len(), blocks.len());
    let max_nnz = blocks.iter().map(|b| b.nnz).max().unwrap_or(0);
    let mut count = vec![0usize; max_nnz + 2];
    for b in blocks.iter().filter(|b| b.nnz > 0) {
        count[b.nnz + 1] += 1;
    }
    for i in 1..count.len() {
        count[i] += count[i - 1];
    }
    let total = count[max_nnz + 1];
    let mut sorted = vec![0usize; total];
    for (i, b) in blocks.iter().enumerate().filter(|(_, b)| b.nnz > 0) {
        sorted[count[b.nnz]] = i;
        count[b.nnz] += 1;
    }

    let rows_total = profile.num_rows();
    let mut start = 0;
    let mut rows_before = 0;
    for (g, &(r0, r1)) in profile.group_rows.iter().enumerate() {
        rows_before += r1 - r0;
        let end = total * rows_before / rows_total;
        let bin = &sorted[start..end];
        start = end;
        // heaviest first onto the least-loaded row of the group
        for &i in bin.iter().rev() {
            let r = (r0..r1).min_by_key(|&r| (a.row_loads[r], r)).expect("nonempty group");
            a.queues[r].push(i);
            a.row_loads[r] += block_cycles(blocks[i].nnz, macs[r]);
            a.block_group[i] = g;
        }
    }
    a.sort_queues(blocks);
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks(nnz: &[usize]) -> Vec<BlockRef> {
        nnz.iter()
            .enumerate()
            .map(|(i, &n)| BlockRef {
                vertex: i / 3,
                block: i % 3,
                nnz: n,
            })
            .collect()
    }

    fn three_groups() -> MacProfile {
        MacProfile {
            group_rows: vec![(0, 1), (1, 2), (2, 3)],
            macs_per_cpe: vec![4, 5, 6],
        }
    }

    #[test]
    fn ceiling_costs() {
        assert_eq!(block_cycles(6, 4), 2);
        assert_eq!(block_cycles(6, 6), 1);
        assert_eq!(block_cycles(0, 4), 0);
    }

    #[test]
    fn heavy_blocks_reach_the_widest_group() {
        let b = blocks(&[6, 4, 5, 4, 6, 5, 5, 6, 4]);
        let a = bin_blocks(&b, &three_groups());
        for (i, blk) in b.iter().enumerate() {
            let want = match blk.nnz {
                4 => 0,
                5 => 1,
                _ => 2,
            };
            assert_eq!(a.block_group[i], want, "block {i}");
        }
    }

    #[test]
    fn equal_nnz_split_is_monotone_by_index() {
        let b = blocks(&[3; 9]);
        let a = bin_blocks(&b, &three_groups());
        assert_eq!(a.block_group, vec![0, 0, 0, 1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn single_group_takes_everything() {
        let b = blocks(&[1, 2, 3, 4, 0, 6]);
        let p = MacProfile::uniform(2, 4);
        let a = bin_blocks(&b, &p);
        assert!(a.block_group.iter().enumerate().all(|(i, &g)| if b[i].nnz == 0 { g == usize::MAX } else { g == 0 }));
        assert_eq!(a.queues.iter().map(Vec::len).sum::<usize>(), 5);
    }

    #[test]
    fn queues_are_vertex_ordered() {
        let b = blocks(&[9, 1, 1, 1, 9, 1, 1, 1, 9, 5, 5, 5]);
        let a = bin_blocks(&b, &MacProfile::uniform(3, 2));
        for q in &a.queues {
            assert!(q.windows(2).all(|w| b[w[0]].vertex <= b[w[1]].vertex));
        }
    }

    #[test]
    fn natural_mapping_uses_block_index() {
        let b = blocks(&[2, 0, 5, 1, 1, 1]);
        let a = natural_assignment(&b, &MacProfile::uniform(3, 4));
        assert_eq!(a.queues, vec![vec![0, 3], vec![4], vec![2, 5]]);
        assert_eq!(a.row_loads, vec![2, 1, 3]);
    }
}
