use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

/// Counters for one phase of one layer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub cycles: u64,
    pub compute_cycles: u64,
    pub stall_cycles: u64,
    /// Part of `cycles` spent waiting on DRAM transfers that compute did not hide.
    pub dram_stall_cycles: u64,
    pub mac_ops: u64,
    pub skipped_zero_mults: u64,
    pub scalar_mults: u64,
    pub sfu_ops: u64,
    pub exp_clamps: u64,
    pub dram_bytes_read: u64,
    pub dram_bytes_written: u64,
    pub input_buffer_bytes: u64,
    pub output_buffer_bytes: u64,
    pub weight_buffer_bytes: u64,
}

impl PhaseStats {
    pub fn dram_bytes(&self) -> u64 {
        self.dram_bytes_read + self.dram_bytes_written
    }
}

impl AddAssign<&PhaseStats> for PhaseStats {
    fn add_assign(&mut self, o: &PhaseStats) {
        self.cycles += o.cycles;
        self.compute_cycles += o.compute_cycles;
        self.stall_cycles += o.stall_cycles;
        self.dram_stall_cycles += o.dram_stall_cycles;
        self.mac_ops += o.mac_ops;
        self.skipped_zero_mults += o.skipped_zero_mults;
        self.scalar_mults += o.scalar_mults;
        self.sfu_ops += o.sfu_ops;
        self.exp_clamps += o.exp_clamps;
        self.dram_bytes_read += o.dram_bytes_read;
        self.dram_bytes_written += o.dram_bytes_written;
        self.input_buffer_bytes += o.input_buffer_bytes;
        self.output_buffer_bytes += o.output_buffer_bytes;
        self.weight_buffer_bytes += o.weight_buffer_bytes;
    }
}

impl<'a> std::iter::Sum<&'a PhaseStats> for PhaseStats {
    fn sum<I: Iterator<Item = &'a PhaseStats>>(iter: I) -> Self {
        let mut acc = PhaseStats::default();
        for s in iter {
            acc += s;
        }
        acc
    }
}
