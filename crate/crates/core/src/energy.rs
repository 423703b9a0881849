//! Energy accounting and peak throughput.

use serde::{Deserialize, Serialize};

use crate::config::AcceleratorConfig;
use crate::stats::PhaseStats;

/// Energy split by component, in picojoules. Only the DRAM constant is
/// sourced; the MAC and buffer constants are placeholders.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub dram_pj: f64,
    pub mac_pj: f64,
    pub input_buffer_pj: f64,
    pub output_buffer_pj: f64,
    pub weight_buffer_pj: f64,
    pub total_pj: f64,
    pub placeholder_constants: bool,
}

pub fn energy_report<'a>(stats: impl IntoIterator<Item = &'a PhaseStats>, cfg: &AcceleratorConfig) -> EnergyReport {
    let s: PhaseStats = stats.into_iter().sum();
    let dram_pj = s.dram_bytes() as f64 * 8.0 * cfg.dram_pj_per_bit;
    let mac_pj = s.mac_ops as f64 * cfg.mac_pj_per_op;
    let b = cfg.buffer_pj_per_byte;
    let input_buffer_pj = s.input_buffer_bytes as f64 * b;
    let output_buffer_pj = s.output_buffer_bytes as f64 * b;
    let weight_buffer_pj = s.weight_buffer_bytes as f64 * b;
    EnergyReport {
        dram_pj,
        mac_pj,
        input_buffer_pj,
        output_buffer_pj,
        weight_buffer_pj,
        total_pj: dram_pj + mac_pj + input_buffer_pj + output_buffer_pj + weight_buffer_pj,
        placeholder_constants: true,
    }
}

/// Peak operations per second, counting a multiply-accumulate as two ops.
pub fn peak_throughput(cfg: &AcceleratorConfig) -> f64 {
    cfg.total_macs() as f64 * 2.0 * cfg.freq_hz
}

/// Operations per second actually achieved over `cycles`.
pub fn achieved_throughput(mac_ops: u64, cycles: u64, cfg: &AcceleratorConfig) -> f64 {
    if cycles == 0 {
        0.0
    } else {
        2.0 * mac_ops as f64 * cfg.freq_hz / cycles as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Design;

    #[test]
    fn one_gib_of_dram_traffic() {
        let cfg = AcceleratorConfig::default();
        let s = PhaseStats {
            dram_bytes_read: 1 << 30,
            ..Default::default()
        };
        let e = energy_report([&s], &cfg);
        assert!((e.dram_pj - 8.589934592e9 * 3.97).abs() < 1.0);
        assert!((e.total_pj * 1e-9 - 34.1).abs() < 0.05);
    }

    #[test]
    fn zero_and_linear() {
        let cfg = AcceleratorConfig::default();
        let e = energy_report([&PhaseStats::default()], &cfg);
        assert_eq!(e.total_pj, 0.0);
        let a = PhaseStats {
            mac_ops: 1000,
            ..Default::default()
        };
        let b = PhaseStats {
            mac_ops: 2000,
            ..Default::default()
        };
        assert_eq!(energy_report([&b], &cfg).mac_pj, 2.0 * energy_report([&a], &cfg).mac_pj);
    }

    #[test]
    fn peaks() {
        let cfg = AcceleratorConfig::default();
        assert!((peak_throughput(&cfg) - 3.1616e12).abs() < 1.0);
        let a = cfg.clone().with_design(Design::A);
        assert!((peak_throughput(&a) - 2.6624e12).abs() < 1.0);
        let mut half = cfg.clone();
        half.freq_hz /= 2.0;
        assert_eq!(peak_throughput(&half) * 2.0, peak_throughput(&cfg));
    }
}
