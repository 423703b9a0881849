//! Analytical DRAM model and the DRAM access trace.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::AcceleratorConfig;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferKind {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Weighting,
    Attention,
    Aggregation,
    /// Final sequential sweep that folds spilled partial results.
    Merge,
}

/// Flat-bandwidth DRAM with a fixed first-access latency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DramModel {
    pub bytes_per_cycle: f64,
    pub latency_cycles: u64,
}

impl DramModel {
    pub fn new(cfg: &AcceleratorConfig) -> Self {
        Self {
            bytes_per_cycle: cfg.dram_bytes_per_cycle(),
            latency_cycles: cfg.dram_latency_cycles(),
        }
    }

    /// Streaming cycles for `bytes`, ignoring latency.
    pub fn raw_cycles(&self, bytes: u64) -> u64 {
        (bytes as f64 / self.bytes_per_cycle).ceil() as u64
    }

    /// Cycles charged for a streaming transfer once `overlap` cycles of
    /// concurrent compute have hidden part of it.
    pub fn transfer(&self, bytes: u64, overlap: u64) -> u64 {
        self.raw_cycles(bytes).saturating_sub(overlap)
    }

    /// Cost of an isolated access that cannot be prefetched.
    pub fn random_access(&self, bytes: u64) -> u64 {
        if bytes == 0 {
            0
        } else {
            self.latency_cycles + self.raw_cycles(bytes)
        }
    }
}

/// `max(0, ⌈bytes / bw⌉ − overlap)`.
pub fn dram_transfer(model: &DramModel, bytes: u64, overlap_cycles: u64) -> u64 {
    model.transfer(bytes, overlap_cycles)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub seq: u64,
    pub block: u64,
    pub bytes: u64,
    pub kind: TransferKind,
    pub phase: Phase,
    pub round: u64,
}

/// Ordered log of DRAM transfers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DramTrace {
    entries: Vec<TraceEntry>,
}

/// First point where a phase's reads go backwards within a round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequentialityViolation {
    pub seq: u64,
    pub round: u64,
    pub previous_block: u64,
    pub block: u64,
}

impl DramTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, block: u64, bytes: u64, kind: TransferKind, phase: Phase, round: u64) {
        if bytes == 0 {
            return;
        }
        let seq = self.entries.len() as u64;
        self.entries.push(TraceEntry {
            seq,
            block,
            bytes,
            kind,
            phase,
            round,
        });
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bytes(&self, kind: TransferKind, phase: Option<Phase>) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.kind == kind && phase.is_none_or(|p| e.phase == p))
            .map(|e| e.bytes)
            .sum()
    }

    /// Checks that reads of `phase` never move to a lower block within a round.
    pub fn check_sequential(&self, phase: Phase) -> Option<SequentialityViolation> {
        let mut last: Option<(u64, u64)> = None;
        for e in self.entries.iter().filter(|e| e.phase == phase && e.kind == TransferKind::Read) {
            if let Some((round, block)) = last {
                if round == e.round && e.block < block {
                    return Some(SequentialityViolation {
                        seq: e.seq,
                        round: e.round,
                        previous_block: block,
                        block: e.block,
                    });
                }
            }
            last = Some((e.round, e.block));
        }
        None
    }

    pub fn is_sequential(&self, phase: Phase) -> bool {
        self.check_sequential(phase).is_none()
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for e in &self.entries {
            wr.serialize(e)?;
        }
        if self.entries.is_empty() {
            wr.write_record(["seq", "block", "bytes", "kind", "phase", "round"])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let entries = rd.deserialize().collect::<std::result::Result<Vec<TraceEntry>, _>>()?;
        Ok(Self { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> DramModel {
        DramModel {
            bytes_per_cycle: 8.0,
            latency_cycles: 130,
        }
    }

    #[test]
    fn transfer_examples() {
        let m = model();
        assert_eq!(dram_transfer(&m, 0, 0), 0);
        assert_eq!(dram_transfer(&m, 8, 0), 1);
        assert_eq!(dram_transfer(&m, 800, 100), 0);
        assert_eq!(dram_transfer(&m, 801, 100), 1);
        assert_eq!(m.random_access(8), 131);
        assert_eq!(m.random_access(0), 0);
    }

    #[test]
    fn sequential_audit() {
        let mut t = DramTrace::new();
        t.push(0, 10, TransferKind::Read, Phase::Aggregation, 0);
        t.push(2, 10, TransferKind::Read, Phase::Aggregation, 0);
        t.push(0, 10, TransferKind::Write, Phase::Aggregation, 0);
        t.push(1, 10, TransferKind::Read, Phase::Weighting, 0);
        t.push(0, 10, TransferKind::Read, Phase::Aggregation, 1);
        assert!(t.is_sequential(Phase::Aggregation));
        t.push(3, 0, TransferKind::Read, Phase::Aggregation, 1);
        assert_eq!(t.len(), 5);
        t.push(5, 10, TransferKind::Read, Phase::Aggregation, 1);
        t.push(4, 10, TransferKind::Read, Phase::Aggregation, 1);
        let v = t.check_sequential(Phase::Aggregation).unwrap();
        assert_eq!((v.round, v.previous_block, v.block), (1, 5, 4));
        assert_eq!(t.bytes(TransferKind::Read, Some(Phase::Aggregation)), 50);
        assert_eq!(t.bytes(TransferKind::Read, None), 60);
    }

    #[test]
    fn csv_round_trip() {
        let mut t = DramTrace::new();
        t.push(3, 64, TransferKind::Read, Phase::Merge, 2);
        t.push(4, 32, TransferKind::Write, Phase::Aggregation, 2);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("seq,block,bytes,kind,phase,round\n"));
        assert!(text.contains("0,3,64,read,merge,2"));
        assert_eq!(DramTrace::read_csv(&buf[..]).unwrap(), t);
    }
}
