use super::binning::{block_cycles, BlockRef, RowAssignment};

/// Pairs the most-loaded row with the least-loaded, the second most with the
/// second least, and so on, for up to `max_pairs` disjoint pairs whose loads
/// differ. Ties go to the lower row index.
pub fn plan_redistribution_pairs(loads: &[u64], max_pairs: usize) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..loads.len()).collect();
    idx.sort_by_key(|&r| (loads[r], r));
    let mut desc = idx.clone();
    desc.sort_by_key(|&r| (std::cmp::Reverse(loads[r]), r));
    let mut pairs = Vec::new();
    for (&heavy, &light) in desc.iter().zip(&idx).take(max_pairs.min(loads.len() / 2)) {
        if loads[heavy] <= loads[light] {
            break;
        }
        pairs.push((heavy, light));
    }
    pairs
}

/// Moves blocks from heavy to light rows of each planned pair.
///
/// A pair only transfers when the result, including the one-off
/// `reload_penalty` charged to the light row for loading the offloaded
/// weights, lowers the pair's maximum load. Blocks are moved one at a time,
/// each time picking the block that minimises the new pair maximum (smaller
/// nnz, then lower index, on ties), for as long as the maximum keeps falling.
/// Queues are returned in ascending vertex order.
pub fn apply_load_redistribution(
    assignment: &RowAssignment,
    blocks: &[BlockRef],
    row_macs: &[usize],
    max_pairs: usize,
    reload_penalty: u64,
) -> RowAssignment {
    let mut a = assignment.clone();
    for (h, l) in plan_redistribution_pairs(&a.row_loads, max_pairs) {
        let (mut lh, mut ll) = (a.row_loads[h], a.row_loads[l] + reload_penalty);
        let mut heavy = a.queues[h].clone();
        let mut moved = Vec::new();
        loop {
            let cur = lh.max(ll);
            let best = heavy
                .iter()
                .enumerate()
                .map(|(pos, &i)| {
                    let b = &blocks[i];
                    let nh = lh - block_cycles(b.nnz, row_macs[h]);
                    let nl = ll + block_cycles(b.nnz, row_macs[l]);
                    (nh.max(nl), b.nnz, i, pos, nh, nl)
                })
                .min_by_key(|t| (t.0, t.1, t.2));
            match best {
                Some((m, _, i, pos, nh, nl)) if m < cur => {
                    heavy.swap_remove(pos);
                    moved.push(i);
                    lh = nh;
                    ll = nl;
                }
                _ => break,
            }
        }
        if !moved.is_empty() && lh.max(ll) < a.row_loads[h].max(a.row_loads[l]) {
            for &i in &moved {
                a.offloaded[i] = true;
            }
            a.queues[h] = heavy;
            a.queues[l].extend(moved);
            a.row_loads[h] = lh;
            a.row_loads[l] = ll;
            a.row_penalty[l] += reload_penalty;
        }
    }
    a.sort_queues(blocks);
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_selection() {
        assert_eq!(plan_redistribution_pairs(&[10, 10, 10, 30], 1), vec![(3, 0)]);
        assert_eq!(plan_redistribution_pairs(&[1, 2, 3, 100], 2), vec![(3, 0), (2, 1)]);
        assert!(plan_redistribution_pairs(&[7, 7, 7, 7], 4).is_empty());
        assert!(plan_redistribution_pairs(&[5], 4).is_empty());
    }

    fn unit_blocks(n: usize) -> Vec<BlockRef> {
        (0..n)
            .map(|i| BlockRef {
                vertex: i,
                block: 0,
                nnz: 1,
            })
            .collect()
    }

    fn assignment(rows: &[Vec<usize>]) -> RowAssignment {
        let n = rows.iter().map(Vec::len).sum();
        let mut a = RowAssignment::empty(rows.len(), n);
        a.row_loads = rows.iter().map(|q| q.len() as u64).collect();
        a.queues = rows.to_vec();
        a.block_group = vec![0; n];
        a
    }

    #[test]
    fn spread_shrinks_on_one_pair() {
        let blocks = unit_blocks(60);
        let rows: Vec<Vec<usize>> = vec![(0..10).collect(), (10..20).collect(), (20..30).collect(), (30..60).collect()];
        let before = assignment(&rows);
        let after = apply_load_redistribution(&before, &blocks, &[1; 4], 1, 0);
        let spread = |a: &RowAssignment| a.max_load() - a.row_loads.iter().min().unwrap();
        assert!(spread(&after) < spread(&before));
        assert_eq!(after.row_loads, vec![20, 10, 10, 20]);
        assert!(after.queues[0].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn uniform_and_penalised_loads_stay_put() {
        let blocks = unit_blocks(8);
        let even = assignment(&[vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]);
        assert_eq!(apply_load_redistribution(&even, &blocks, &[1; 4], 4, 0), even);
        let skewed = assignment(&[vec![0, 1, 2, 3, 4], vec![5, 6, 7]]);
        assert_eq!(apply_load_redistribution(&skewed, &blocks, &[1; 2], 1, 10), skewed);
    }

    #[test]
    fn never_raises_the_maximum() {
        let blocks: Vec<BlockRef> = (0..40)
            .map(|i| BlockRef {
                vertex: i,
                block: 0,
                nnz: (i * 7) % 13,
            })
            .collect();
        let rows: Vec<Vec<usize>> = (0..4).map(|r| (r * 10..r * 10 + 10).collect()).collect();
        let macs = [1, 2, 3, 4];
        let mut before = assignment(&rows);
        before.row_loads = rows
            .iter()
            .enumerate()
            .map(|(r, q)| q.iter().map(|&i| block_cycles(blocks[i].nnz, macs[r])).sum())
            .collect();
        for pen in [0, 3, 50] {
            let after = apply_load_redistribution(&before, &blocks, &macs, 2, pen);
            assert!(after.max_load() <= before.max_load());
        }
    }
}
