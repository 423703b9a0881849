//! Degree-aware input-buffer management for Aggregation.
//!
//! Vertices live in DRAM in degree-sorted order and are streamed in
//! sequentially. The resident vertices and the unprocessed edges between them
//! form the subgraph of an iteration. After processing, up to `r` resident
//! vertices with fewer than `γ` unprocessed edges (`α`) are evicted and the
//! free slots are refilled from the DRAM cursor, which skips finished
//! vertices and whole finished blocks. A Round ends each time the cursor
//! wraps.

mod output;

pub use output::{OutputBuffer, Placement};

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexOrder};
use crate::memory::{DramTrace, Phase, TransferKind};

/// An undirected edge `{u, v}` with its identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub id: usize,
}

/// DRAM traffic of one refill.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RefillReport {
    pub evicted: Vec<usize>,
    pub loaded: Vec<usize>,
    pub bytes_read: u64,
    pub bytes_written: u64,
    /// Rounds started during this refill.
    pub rounds_started: usize,
}

impl RefillReport {
    pub fn changed(&self) -> bool {
        !self.evicted.is_empty() || !self.loaded.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct CacheState {
    capacity: usize,
    block_size: usize,
    order: VertexOrder,
    footprint: Vec<u64>,
    resident: Vec<bool>,
    resident_pos: BTreeSet<usize>,
    alpha: Vec<usize>,
    finalized: Vec<bool>,
    arc_edge: Vec<usize>,
    edge_done: Vec<bool>,
    unprocessed_edges: usize,
    block_unfinished: Vec<usize>,
    /// Unfinished vertices that are not resident.
    waiting: usize,
    cursor: usize,
    round: usize,
    initial_alpha: u64,
    decrements: u64,
    budget: u64,
    resident_bytes: u64,
}

impl CacheState {
    /// Empty cache over `g` with vertices stored in `order`. `footprint[v]`
    /// is the number of bytes fetched when `v` is loaded. A capacity above
    /// `|V|` is reduced to `|V|`.
    pub fn new(g: &Graph, order: VertexOrder, capacity: usize, block_size: usize, footprint: Vec<u64>) -> Result<Self> {
        let n = g.num_vertices();
        if order.len() != n || !order.is_permutation() || footprint.len() != n {
            return Err(Error::ShapeMismatch("cache order and footprints must cover every vertex".into()));
        }
        if capacity == 0 || block_size == 0 {
            return Err(Error::InfeasibleConfig("cache capacity and block size must be positive".into()));
        }
        let mut arc_edge = vec![usize::MAX; g.num_arcs()];
        let mut next = 0;
        for u in 0..n {
            let base = g.offsets()[u];
            for (k, &v) in g.neighbors(u).iter().enumerate() {
                if v >= u {
                    arc_edge[base + k] = next;
                    next += 1;
                }
            }
        }
        for u in 0..n {
            let base = g.offsets()[u];
            for (k, &v) in g.neighbors(u).iter().enumerate() {
                if v < u {
                    arc_edge[base + k] = arc_edge[g.arc_index(v, u).expect("graph is symmetric")];
                }
            }
        }
        let alpha: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
        let num_blocks = n.div_ceil(block_size);
        let mut block_unfinished = vec![0; num_blocks];
        for p in 0..n {
            block_unfinished[p / block_size] += 1;
        }
        Ok(Self {
            capacity: capacity.min(n.max(1)),
            block_size,
            footprint,
            resident: vec![false; n],
            resident_pos: BTreeSet::new(),
            initial_alpha: alpha.iter().map(|&a| a as u64).sum(),
            alpha,
            finalized: vec![false; n],
            arc_edge,
            edge_done: vec![false; next],
            unprocessed_edges: next,
            block_unfinished,
            waiting: n,
            cursor: 0,
            round: 0,
            decrements: 0,
            budget: u64::MAX,
            resident_bytes: 0,
            order,
        })
    }

    /// Also caps the bytes of resident vertices; loading stops at the first
    /// vertex that does not fit.
    pub fn with_byte_budget(mut self, budget: u64) -> Result<Self> {
        if let Some(v) = (0..self.footprint.len()).find(|&v| self.footprint[v] > budget) {
            return Err(Error::InfeasibleConfig(format!(
                "vertex {v} needs {} bytes but the input buffer holds {budget}",
                self.footprint[v]
            )));
        }
        self.budget = budget;
        Ok(self)
    }

    pub fn resident_bytes(&self) -> u64 {
        self.resident_bytes
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn order(&self) -> &VertexOrder {
        &self.order
    }

    pub fn alpha(&self, v: usize) -> usize {
        self.alpha[v]
    }

    pub fn is_resident(&self, v: usize) -> bool {
        self.resident[v]
    }

    pub fn is_finalized(&self, v: usize) -> bool {
        self.finalized[v]
    }

    /// Resident vertices in storage order.
    pub fn resident_vertices(&self) -> Vec<usize> {
        self.resident_pos.iter().map(|&p| self.order.order()[p]).collect()
    }

    pub fn free_slots(&self) -> usize {
        self.capacity - self.resident_pos.len()
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn unprocessed_edges(&self) -> usize {
        self.unprocessed_edges
    }

    pub fn num_edges(&self) -> usize {
        self.edge_done.len()
    }

    pub fn initial_alpha_sum(&self) -> u64 {
        self.initial_alpha
    }

    /// Total `α` decrements so far.
    pub fn decrements(&self) -> u64 {
        self.decrements
    }

    pub fn is_done(&self) -> bool {
        self.finalized.iter().all(|&f| f)
    }

    pub fn block_of(&self, v: usize) -> usize {
        self.order.position(v) / self.block_size
    }

    /// Loads the first `n` vertices of the storage order.
    pub fn init_cache(&mut self, trace: &mut DramTrace) -> RefillReport {
        let mut rep = RefillReport::default();
        self.refill(&mut rep, trace);
        rep
    }

    /// Unprocessed edges whose endpoints are both resident, ordered by the
    /// storage position of the lower endpoint.
    pub fn current_subgraph(&self, g: &Graph) -> Vec<Edge> {
        let mut out = Vec::new();
        for &p in &self.resident_pos {
            let u = self.order.order()[p];
            let base = g.offsets()[u];
            for (k, &v) in g.neighbors(u).iter().enumerate() {
                let id = self.arc_edge[base + k];
                if !self.edge_done[id] && self.resident[v] && (self.order.position(v) > p || v == u) {
                    out.push(Edge { u, v, id });
                }
            }
        }
        out
    }

    /// Marks edges processed, decrementing `α` at both endpoints (once for a
    /// self-loop).
    pub fn commit_processed(&mut self, edges: &[Edge]) -> Result<()> {
        for e in edges {
            if self.edge_done[e.id] {
                return Err(Error::DoubleProcessedEdge(e.u, e.v));
            }
            self.edge_done[e.id] = true;
            self.unprocessed_edges -= 1;
            self.alpha[e.u] -= 1;
            self.decrements += 1;
            if e.v != e.u {
                self.alpha[e.v] -= 1;
                self.decrements += 1;
            }
        }
        Ok(())
    }

    /// Records that `v` has produced its final result.
    pub fn finalize(&mut self, v: usize) -> Result<()> {
        if self.alpha[v] > 0 {
            return Err(Error::PrematureFinalize {
                vertex: v,
                remaining: self.alpha[v],
            });
        }
        if !self.finalized[v] {
            self.finalized[v] = true;
            let b = self.block_of(v);
            self.block_unfinished[b] -= 1;
            if !self.resident[v] {
                self.waiting -= 1;
            }
        }
        Ok(())
    }

    /// Resident vertices with `α < γ`, by ascending `α` then vertex ID.
    pub fn eviction_candidates(&self, gamma: usize) -> Vec<usize> {
        let mut c: Vec<usize> = self
            .resident_vertices()
            .into_iter()
            .filter(|&v| self.alpha[v] < gamma)
            .collect();
        c.sort_by_key(|&v| (self.alpha[v], v));
        c
    }

    /// Evicts up to `r` candidates, writing back `α` for unfinished ones, and
    /// refills the free slots sequentially from the cursor. At least one
    /// resident always survives; flushing the whole buffer could keep two
    /// endpoints of an edge from ever being resident together.
    pub fn evict_and_refill(&mut self, gamma: usize, r: usize, trace: &mut DramTrace) -> RefillReport {
        let mut rep = RefillReport::default();
        let keep = r.min(self.resident_pos.len().saturating_sub(1));
        let evict: Vec<usize> = self.eviction_candidates(gamma).into_iter().take(keep).collect();
        for &v in &evict {
            self.resident[v] = false;
            self.resident_pos.remove(&self.order.position(v));
            self.resident_bytes -= self.footprint[v];
            if !self.finalized[v] {
                self.waiting += 1;
                trace.push(
                    self.block_of(v) as u64,
                    4,
                    TransferKind::Write,
                    Phase::Aggregation,
                    self.round as u64,
                );
                rep.bytes_written += 4;
            }
        }
        rep.evicted = evict;
        self.refill(&mut rep, trace);
        rep
    }

    fn refill(&mut self, rep: &mut RefillReport, trace: &mut DramTrace) {
        let n = self.order.len();
        let mut free = self.free_slots();
        let mut run: Option<(usize, u64)> = None;
        let flush = |run: &mut Option<(usize, u64)>, trace: &mut DramTrace, round: usize| {
            if let Some((b, bytes)) = run.take() {
                trace.push(b as u64, bytes, TransferKind::Read, Phase::Aggregation, round as u64);
            }
        };
        while free > 0 && self.waiting > 0 {
            if self.cursor >= n {
                flush(&mut run, trace, self.round);
                self.cursor = 0;
                self.round += 1;
                rep.rounds_started += 1;
            }
            let p = self.cursor;
            let b = p / self.block_size;
            if self.block_unfinished[b] == 0 {
                self.cursor = ((b + 1) * self.block_size).min(n);
                continue;
            }
            let v = self.order.order()[p];
            if self.finalized[v] || self.resident[v] {
                self.cursor += 1;
                continue;
            }
            if self.resident_bytes + self.footprint[v] > self.budget {
                break;
            }
            self.cursor += 1;
            self.resident_bytes += self.footprint[v];
            self.resident[v] = true;
            self.resident_pos.insert(p);
            self.waiting -= 1;
            free -= 1;
            rep.loaded.push(v);
            rep.bytes_read += self.footprint[v];
            match &mut run {
                Some((rb, bytes)) if *rb == b => *bytes += self.footprint[v],
                _ => {
                    flush(&mut run, trace, self.round);
                    run = Some((b, self.footprint[v]));
                }
            }
        }
        flush(&mut run, trace, self.round);
        debug_assert!(self.resident_pos.len() <= self.capacity);
    }

    /// No edge can be processed, no resident vertex is below `γ` and nothing
    /// can be loaded, yet edges remain.
    pub fn detect_deadlock(&self, g: &Graph, gamma: usize) -> bool {
        self.unprocessed_edges > 0
            && self.eviction_candidates(gamma).is_empty()
            && !self.can_load()
            && self.current_subgraph(g).is_empty()
    }

    /// Whether a refill would bring in at least one vertex.
    pub fn can_load(&self) -> bool {
        if self.free_slots() == 0 || self.waiting == 0 {
            return false;
        }
        let n = self.order.len();
        (0..n)
            .map(|k| self.order.order()[(self.cursor + k) % n])
            .find(|&v| !self.finalized[v] && !self.resident[v])
            .is_some_and(|v| self.resident_bytes + self.footprint[v] <= self.budget)
    }

    /// Histogram of `α` over resident vertices.
    pub fn alpha_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for v in self.resident_vertices() {
            *h.entry(self.alpha[v]).or_insert(0) += 1;
        }
        h
    }
}
