//! Output buffer for partial aggregation results.
//!
//! Partials of high-degree vertices have priority: when the buffer is full a
//! newcomer displaces the lowest-degree resident partial if it outranks it,
//! and otherwise goes to DRAM itself. Displaced partials are appended to a
//! sequential spill log, numerator and (for GAT) denominator together.

use std::collections::BTreeSet;

use crate::memory::{DramTrace, Phase, TransferKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    OnChip,
    Spilled,
}

#[derive(Clone, Debug)]
pub struct OutputBuffer {
    capacity: u64,
    used: u64,
    entries: BTreeSet<(usize, usize)>,
    bytes_of: Vec<u64>,
    degree_of: Vec<usize>,
    fragments: Vec<u32>,
    log_bytes: u64,
    log_entries: u64,
    peak: u64,
}

impl OutputBuffer {
    pub fn new(capacity_bytes: u64, num_vertices: usize) -> Self {
        Self {
            capacity: capacity_bytes,
            used: 0,
            entries: BTreeSet::new(),
            bytes_of: vec![0; num_vertices],
            degree_of: vec![0; num_vertices],
            fragments: vec![0; num_vertices],
            log_bytes: 0,
            log_entries: 0,
            peak: 0,
        }
    }

    fn spill(&mut self, v: usize, bytes: u64, trace: &mut DramTrace, round: u64) {
        trace.push(self.log_entries, bytes, TransferKind::Write, Phase::Aggregation, round);
        self.log_entries += 1;
        self.log_bytes += bytes;
        self.fragments[v] += 1;
    }

    /// Keeps a `bytes`-sized partial of `v` in the buffer if its degree
    /// allows it.
    pub fn write(&mut self, v: usize, degree: usize, bytes: u64, trace: &mut DramTrace, round: u64) -> Placement {
        if self.bytes_of[v] > 0 {
            return Placement::OnChip;
        }
        while self.used + bytes > self.capacity {
            match self.entries.first().copied() {
                Some((d, u)) if d < degree => {
                    self.entries.remove(&(d, u));
                    let b = std::mem::take(&mut self.bytes_of[u]);
                    self.used -= b;
                    self.spill(u, b, trace, round);
                }
                _ => {
                    self.spill(v, bytes, trace, round);
                    return Placement::Spilled;
                }
            }
        }
        self.entries.insert((degree, v));
        self.bytes_of[v] = bytes;
        self.degree_of[v] = degree;
        self.used += bytes;
        self.peak = self.peak.max(self.used);
        debug_assert!(self.used <= self.capacity);
        Placement::OnChip
    }

    /// Drops the on-chip partial of a finished vertex. A vertex that already
    /// has fragments in the log sends its last fragment there too and is
    /// completed by the merge sweep.
    pub fn release(&mut self, v: usize, trace: &mut DramTrace, round: u64) {
        let b = std::mem::take(&mut self.bytes_of[v]);
        if b > 0 {
            self.entries.remove(&(self.degree_of[v], v));
            self.used -= b;
            if self.fragments[v] > 0 {
                self.spill(v, b, trace, round);
            }
        }
    }

    pub fn on_chip(&self, v: usize) -> bool {
        self.bytes_of[v] > 0
    }

    pub fn fragments(&self, v: usize) -> u32 {
        self.fragments[v]
    }

    pub fn spilled_vertices(&self) -> usize {
        self.fragments.iter().filter(|&&f| f > 0).count()
    }

    pub fn log_bytes(&self) -> u64 {
        self.log_bytes
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn peak(&self) -> u64 {
        self.peak
    }
}
