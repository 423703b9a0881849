//! Merge-PE psum slot model.
//!
//! Each CPE row works through a queue of blocks in ascending vertex order and
//! emits one tagged partial per block. The MPE keeps `slots` psum entries,
//! granted to the earliest incomplete vertices, so a partial is accepted only
//! when fewer than `slots` incomplete vertices come before its vertex. A
//! rejected partial holds its row until a slot frees. Because the earliest
//! incomplete vertex always has a slot and row queues are vertex-ordered, the
//! scheme cannot deadlock.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

/// One queued unit of row work: the vertex it belongs to and its cycles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowJob {
    pub vertex: usize,
    pub cycles: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MpeOutcome {
    /// Cycle at which each row delivered its last partial.
    pub row_finish: Vec<u64>,
    pub makespan: u64,
    /// Row-cycles spent holding a rejected partial.
    pub stall_cycles: u64,
    pub stall_events: u64,
    /// Completion cycle per vertex (0 for vertices with no partials).
    pub vertex_done: Vec<u64>,
    /// Vertices in completion order.
    pub completion_order: Vec<usize>,
}

/// Runs the row queues against the psum slots. `num_vertices` bounds the
/// vertex tags; a vertex completes once every queued job for it has been
/// accepted.
pub fn mpe_accumulate(queues: &[Vec<RowJob>], num_vertices: usize, slots: usize) -> MpeOutcome {
    assert!(slots >= 1, "at least one psum slot");
    let rows = queues.len();
    let mut pending = vec![0usize; num_vertices];
    for q in queues {
        debug_assert!(q.windows(2).all(|w| w[0].vertex <= w[1].vertex));
        for j in q {
            pending[j.vertex] += 1;
        }
    }
    let mut incomplete: BTreeSet<usize> = (0..num_vertices).filter(|&v| pending[v] > 0).collect();
    let mut out = MpeOutcome {
        row_finish: vec![0; rows],
        vertex_done: vec![0; num_vertices],
        ..Default::default()
    };

    let admissible = |incomplete: &BTreeSet<usize>, v: usize| incomplete.iter().take(slots).any(|&u| u == v);

    // (time the head job finishes computing, row)
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    let mut head = vec![0usize; rows];
    for (r, q) in queues.iter().enumerate() {
        if let Some(j) = q.first() {
            heap.push(Reverse((j.cycles, r)));
        }
    }
    // rows holding a rejected partial: (row, time it was ready)
    let mut blocked: Vec<(usize, u64)> = Vec::new();

    let mut deliver = |r: usize,
                       t: u64,
                       heap: &mut BinaryHeap<Reverse<(u64, usize)>>,
                       incomplete: &mut BTreeSet<usize>,
                       head: &mut [usize],
                       out: &mut MpeOutcome|
     -> bool {
        let v = queues[r][head[r]].vertex;
        pending[v] -= 1;
        out.row_finish[r] = t;
        head[r] += 1;
        if let Some(j) = queues[r].get(head[r]) {
            heap.push(Reverse((t + j.cycles, r)));
        }
        if pending[v] == 0 {
            incomplete.remove(&v);
            out.vertex_done[v] = t;
            out.completion_order.push(v);
            true
        } else {
            false
        }
    };

    while let Some(Reverse((t, r))) = heap.pop() {
        let v = queues[r][head[r]].vertex;
        if !admissible(&incomplete, v) {
            out.stall_events += 1;
            blocked.push((r, t));
            continue;
        }
        let mut freed = deliver(r, t, &mut heap, &mut incomplete, &mut head, &mut out);
        while freed {
            freed = false;
            blocked.sort_unstable_by_key(|&(row, _)| (queues[row][head[row]].vertex, row));
            let mut still = Vec::with_capacity(blocked.len());
            for (row, ready) in std::mem::take(&mut blocked) {
                if admissible(&incomplete, queues[row][head[row]].vertex) {
                    out.stall_cycles += t - ready;
                    freed |= deliver(row, t, &mut heap, &mut incomplete, &mut head, &mut out);
                } else {
                    still.push((row, ready));
                }
            }
            blocked = still;
        }
    }
    debug_assert!(blocked.is_empty() && incomplete.is_empty());
    out.makespan = out.row_finish.iter().copied().max().unwrap_or(0);
    out
}
