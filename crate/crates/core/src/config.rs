//! Accelerator configuration and design presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MAC units per CPE, given per contiguous group of array rows.
///
/// `group_rows` holds half-open `[start, end)` row ranges that must cover
/// `0..M` in order. `macs_per_cpe` is nondecreasing across groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacProfile {
    pub group_rows: Vec<(usize, usize)>,
    pub macs_per_cpe: Vec<usize>,
}

impl MacProfile {
    pub fn uniform(rows: usize, macs: usize) -> Self {
        Self {
            group_rows: vec![(0, rows)],
            macs_per_cpe: vec![macs],
        }
    }

    /// Rows 0–7 with 4 MACs, 8–11 with 5 and 12–15 with 6.
    pub fn flexible() -> Self {
        Self {
            group_rows: vec![(0, 8), (8, 12), (12, 16)],
            macs_per_cpe: vec![4, 5, 6],
        }
    }

    pub fn num_groups(&self) -> usize {
        self.macs_per_cpe.len()
    }

    pub fn num_rows(&self) -> usize {
        self.group_rows.last().map_or(0, |r| r.1)
    }

    pub fn is_uniform(&self) -> bool {
        self.macs_per_cpe.windows(2).all(|w| w[0] == w[1])
    }

    pub fn group_of_row(&self, row: usize) -> usize {
        self.group_rows
            .iter()
            .position(|&(s, e)| (s..e).contains(&row))
            .expect("row outside MAC profile")
    }

    /// MAC count of every row, indexed by row.
    pub fn row_macs(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_rows());
        for (&(s, e), &m) in self.group_rows.iter().zip(&self.macs_per_cpe) {
            out.extend(std::iter::repeat_n(m, e - s));
        }
        out
    }

    pub fn total_macs(&self, cols: usize) -> usize {
        self.row_macs().iter().sum::<usize>() * cols
    }

    /// Whether every row of `self` has at least as many MACs as in `other`.
    pub fn dominates(&self, other: &MacProfile) -> bool {
        let (a, b) = (self.row_macs(), other.row_macs());
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x >= y)
    }

    pub fn validate(&self, rows: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("mac_profile: {m}")));
        if self.group_rows.is_empty() || self.group_rows.len() != self.macs_per_cpe.len() {
            return bad("need one MAC count per row group");
        }
        let mut next = 0;
        for &(s, e) in &self.group_rows {
            if s != next || e <= s {
                return bad("row groups must partition 0..M in order");
            }
            next = e;
        }
        if next != rows {
            return bad("row groups must cover every array row");
        }
        if self.macs_per_cpe.contains(&0) {
            return bad("every CPE needs at least one MAC");
        }
        if self.macs_per_cpe.windows(2).any(|w| w[0] > w[1]) {
            return bad("MAC counts must be nondecreasing across groups");
        }
        Ok(())
    }
}

impl Default for MacProfile {
    fn default() -> Self {
        Self::flexible()
    }
}

/// The five MAC configurations compared in the design-space study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Design {
    A,
    B,
    C,
    D,
    E,
}

impl Design {
    pub const ALL: [Design; 5] = [Design::A, Design::B, Design::C, Design::D, Design::E];

    pub fn profile(self, rows: usize) -> MacProfile {
        match self {
            Design::A => MacProfile::uniform(rows, 4),
            Design::B => MacProfile::uniform(rows, 5),
            Design::C => MacProfile::uniform(rows, 6),
            Design::D => MacProfile::uniform(rows, 7),
            Design::E => MacProfile::flexible(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Design::A => "A",
            Design::B => "B",
            Design::C => "C",
            Design::D => "D",
            Design::E => "E",
        }
    }
}

impl std::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Design::A),
            "B" => Ok(Design::B),
            "C" => Ok(Design::C),
            "D" => Ok(Design::D),
            "E" => Ok(Design::E),
            other => Err(Error::Config(format!("unknown design '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    /// Resident vertices `n`; derived from the input buffer when unset.
    pub capacity_vertices: Option<usize>,
    /// Eviction threshold: vertices with fewer unprocessed edges are candidates.
    pub gamma: usize,
    /// Vertices replaced per iteration; `n / 8` when unset.
    pub r: Option<usize>,
    pub associativity: usize,
    pub block_size_vertices: usize,
    pub degree_bins: usize,
    /// Temporarily raise γ instead of failing when no vertex can be evicted.
    pub dynamic_gamma: bool,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            capacity_vertices: None,
            gamma: 5,
            r: None,
            associativity: 4,
            block_size_vertices: 8,
            degree_bins: 8,
            dynamic_gamma: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoftmaxMode {
    /// `exp(e_ij)` straight from the scores.
    Raw,
    /// Scores shifted by an upper bound of the neighborhood maximum.
    Stabilized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SfuConfig {
    pub exp_latency: u64,
    pub lrelu_latency: u64,
    pub divide_latency: u64,
    pub lut_size: usize,
    pub clamp_min: f64,
    pub clamp_max: f64,
    pub exact_exp: bool,
    pub softmax: SoftmaxMode,
}

impl Default for SfuConfig {
    fn default() -> Self {
        Self {
            exp_latency: 2,
            lrelu_latency: 1,
            divide_latency: 4,
            lut_size: 1024,
            clamp_min: -16.0,
            clamp_max: 16.0,
            exact_exp: false,
            softmax: SoftmaxMode::Stabilized,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceleratorConfig {
    /// CPE array rows (`M`).
    pub rows: usize,
    /// CPE array columns (`N`).
    pub cols: usize,
    pub mac_profile: MacProfile,
    pub freq_hz: f64,
    pub input_buffer_bytes: usize,
    pub output_buffer_bytes: usize,
    pub weight_buffer_bytes: usize,
    pub dram_bandwidth_bytes_per_s: f64,
    pub dram_latency_ns: f64,
    pub dram_pj_per_bit: f64,
    /// Placeholder, not derived from synthesis.
    pub mac_pj_per_op: f64,
    /// Placeholder, not derived from synthesis.
    pub buffer_pj_per_byte: f64,
    pub psum_slots: usize,
    pub feature_bytes: usize,
    pub weight_bytes: usize,
    pub lr_max_pairs: usize,
    pub cache: CacheConfig,
    pub sfu: SfuConfig,
}

impl Default for AcceleratorConfig {
    fn default() -> Self {
        Self {
            rows: 16,
            cols: 16,
            mac_profile: MacProfile::flexible(),
            freq_hz: 1.3e9,
            input_buffer_bytes: 512 * 1024,
            output_buffer_bytes: 1024 * 1024,
            weight_buffer_bytes: 128 * 1024,
            dram_bandwidth_bytes_per_s: 256e9,
            dram_latency_ns: 100.0,
            dram_pj_per_bit: 3.97,
            mac_pj_per_op: 0.5,
            buffer_pj_per_byte: 0.1,
            psum_slots: 16,
            feature_bytes: 4,
            weight_bytes: 1,
            lr_max_pairs: 4,
            cache: CacheConfig::default(),
            sfu: SfuConfig::default(),
        }
    }
}

impl AcceleratorConfig {
    pub fn with_design(mut self, d: Design) -> Self {
        self.mac_profile = d.profile(self.rows);
        self
    }

    pub fn total_macs(&self) -> usize {
        self.mac_profile.total_macs(self.cols)
    }

    pub fn row_macs(&self) -> Vec<usize> {
        self.mac_profile.row_macs()
    }

    pub fn dram_bytes_per_cycle(&self) -> f64 {
        self.dram_bandwidth_bytes_per_s / self.freq_hz
    }

    pub fn dram_latency_cycles(&self) -> u64 {
        (self.dram_latency_ns * 1e-9 * self.freq_hz).ceil() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.rows == 0 || self.cols == 0 {
            return bad("array dimensions must be positive");
        }
        self.mac_profile.validate(self.rows)?;
        if !(self.freq_hz > 0.0 && self.dram_bandwidth_bytes_per_s > 0.0) {
            return bad("frequency and DRAM bandwidth must be positive");
        }
        if self.input_buffer_bytes == 0 || self.output_buffer_bytes == 0 || self.weight_buffer_bytes == 0 {
            return bad("buffer capacities must be positive");
        }
        if self.dram_latency_ns < 0.0
            || self.dram_pj_per_bit < 0.0
            || self.mac_pj_per_op < 0.0
            || self.buffer_pj_per_byte < 0.0
        {
            return bad("latency and energy constants must be nonnegative");
        }
        if self.psum_slots == 0 || self.feature_bytes == 0 || self.weight_bytes == 0 {
            return bad("psum_slots, feature_bytes and weight_bytes must be positive");
        }
        let c = &self.cache;
        if matches!(c.capacity_vertices, Some(0 | 1)) || c.r == Some(0) {
            return bad("cache capacity must be at least 2 and r at least 1");
        }
        if let (Some(n), Some(r)) = (c.capacity_vertices, c.r) {
            if r >= n {
                return bad("cache r must be smaller than the capacity");
            }
        }
        if c.block_size_vertices == 0 || c.associativity == 0 || c.degree_bins == 0 {
            return bad("cache block size, associativity and degree_bins must be positive");
        }
        let s = &self.sfu;
        if s.lut_size < 2 || s.clamp_min >= s.clamp_max {
            return bad("SFU lookup table needs >= 2 entries over a nonempty domain");
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }
}
