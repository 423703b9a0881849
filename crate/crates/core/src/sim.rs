//! Whole-network simulation: Weighting, then (for GAT) attention scalars,
//! then Aggregation for every layer, optionally checked against the golden
//! model.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregation::{compute_attention_scalars, simulate_aggregation, AggregationOptions};
use crate::config::AcceleratorConfig;
use crate::error::{Error, Result};
use crate::graph::{generate, relative_error, FeatureMatrix, Graph};
use crate::memory::DramTrace;
use crate::reference::{self, sample_neighborhoods, GnnKind, LayerSpec, SampleStream};
use crate::stats::PhaseStats;
use crate::weighting::{simulate_weighting, RowPolicy, WeightingPlan};

/// Optimizations that can be switched off individually.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OptFlags {
    /// Degree-aware caching in Aggregation.
    pub cp: bool,
    /// Flexible MAC binning.
    pub fm: bool,
    /// Load redistribution between CPE rows in Weighting.
    pub lr: bool,
    /// Adder-tree load distribution in Aggregation.
    pub lb: bool,
}

impl OptFlags {
    pub const ALL: OptFlags = OptFlags {
        cp: true,
        fm: true,
        lr: true,
        lb: true,
    };
    pub const NONE: OptFlags = OptFlags {
        cp: false,
        fm: false,
        lr: false,
        lb: false,
    };

    pub fn weighting_policy(self) -> RowPolicy {
        RowPolicy {
            flexible_mac: self.fm,
            load_redistribution: self.lr,
        }
    }

    pub fn aggregation_options(self) -> AggregationOptions {
        AggregationOptions {
            caching: self.cp,
            flexible_mac: self.fm,
            load_balance: self.lb,
        }
    }
}

impl Default for OptFlags {
    fn default() -> Self {
        Self::ALL
    }
}

/// Comma-separated subset of `cp,fm,lr,lb`, or `all` / `none`.
impl FromStr for OptFlags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "all" => return Ok(Self::ALL),
            "none" | "" => return Ok(Self::NONE),
            _ => {}
        }
        let mut f = Self::NONE;
        for part in s.split(',') {
            match part.trim() {
                "cp" => f.cp = true,
                "fm" => f.fm = true,
                "lr" => f.lr = true,
                "lb" => f.lb = true,
                other => return Err(Error::Config(format!("unknown optimization '{other}'"))),
            }
        }
        Ok(f)
    }
}

impl fmt::Display for OptFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.cp, "cp"), (self.fm, "fm"), (self.lr, "lr"), (self.lb, "lb")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

/// Randomly initialised layers of `kind`; `widths[l]` is the output width of
/// layer `l`.
pub fn build_network(kind: GnnKind, f_in: usize, widths: &[usize], seed: u64) -> Result<Vec<LayerSpec<f32>>> {
    if widths.is_empty() || widths.contains(&0) || f_in == 0 {
        return Err(Error::Config("layer widths must be positive and nonempty".into()));
    }
    let mut rng = generate::rng(seed);
    let mut prev = f_in;
    let mut out = Vec::with_capacity(widths.len());
    for &w in widths {
        out.push(LayerSpec::random(kind, prev, w, &mut rng));
        prev = w;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSettings {
    pub opts: OptFlags,
    /// Seed of the GraphSAGE neighbor-sample stream.
    pub sample_seed: u64,
    pub verify_golden: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            opts: OptFlags::ALL,
            sample_seed: 0,
            verify_golden: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerResult {
    pub kind: GnnKind,
    pub f_in: usize,
    pub f_out: usize,
    pub weighting: PhaseStats,
    pub attention: Option<PhaseStats>,
    pub aggregation: PhaseStats,
    /// Second GINConv MLP layer, run as a Weighting pass.
    pub mlp: Option<PhaseStats>,
    pub weighting_plan: WeightingPlan,
    /// Busy cycles per CPE row in Weighting.
    pub row_cycles: Vec<u64>,
    pub rounds: usize,
    pub iterations: usize,
    pub alpha_histograms: Vec<BTreeMap<usize, usize>>,
    pub gamma_escalations: usize,
    pub cache_capacity: usize,
    pub num_edges: usize,
    pub initial_alpha_sum: u64,
    pub alpha_decrements: u64,
    pub spilled_vertices: usize,
    /// Normwise relative error against the golden model.
    pub golden_error: Option<f64>,
}

impl LayerResult {
    pub fn phases(&self) -> impl Iterator<Item = &PhaseStats> {
        [Some(&self.weighting), self.attention.as_ref(), Some(&self.aggregation), self.mlp.as_ref()]
            .into_iter()
            .flatten()
    }

    pub fn total(&self) -> PhaseStats {
        self.phases().sum()
    }
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub layers: Vec<LayerResult>,
    pub output: FeatureMatrix<f32>,
    /// DRAM trace of every layer.
    pub traces: Vec<DramTrace>,
}

/// Golden-model tolerance on the normwise relative error.
pub fn golden_tolerance(kind: GnnKind, cfg: &AcceleratorConfig) -> f64 {
    if kind == GnnKind::Gat && !cfg.sfu.exact_exp {
        1e-4
    } else {
        1e-5
    }
}

/// Keeps a matrix in whichever of dense or run-length form moves fewer bytes.
fn storage_form(h: &FeatureMatrix<f32>, value_bytes: usize) -> FeatureMatrix<f32> {
    let rlc = h.to_rlc();
    if rlc.total_bytes(value_bytes) < h.to_dense().total_bytes(value_bytes) {
        rlc
    } else {
        h.to_dense()
    }
}

pub fn simulate_network(
    g: &Graph,
    features: &FeatureMatrix<f32>,
    layers: &[LayerSpec<f32>],
    cfg: &AcceleratorConfig,
    settings: SimSettings,
) -> Result<SimOutput> {
    cfg.validate()?;
    if features.num_rows() != g.num_vertices() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} vertices",
            features.num_rows(),
            g.num_vertices()
        )));
    }
    let n = g.num_vertices();
    let identity: Vec<usize> = (0..n).collect();
    let mut stream = SampleStream::seeded(settings.sample_seed);
    let mut h = storage_form(features, cfg.feature_bytes);
    let mut golden: FeatureMatrix<f64> = features.cast();
    let mut results = Vec::with_capacity(layers.len());
    let mut traces = Vec::with_capacity(layers.len());
    for spec in layers {
        spec.validate()?;
        if h.width() != spec.f_in {
            return Err(Error::ShapeMismatch(format!("layer expects width {} but input has {}", spec.f_in, h.width())));
        }
        let mut trace = DramTrace::new();
        let samples = match spec.kind {
            GnnKind::GraphSage => Some(sample_neighborhoods(g, spec.sample_size, &mut stream)?),
            _ => None,
        };
        let policy = settings.opts.weighting_policy();
        let w = simulate_weighting(&h, &spec.weight, &identity, cfg, policy, &mut trace)?;
        let (scalars, attention) = if spec.kind == GnnKind::Gat {
            let (s, st) = compute_attention_scalars(&w.output, spec.a1(), spec.a2(), cfg, &mut trace)?;
            (Some(s), Some(st))
        } else {
            (None, None)
        };
        let agg = simulate_aggregation(
            g,
            &w.output,
            spec,
            scalars.as_ref(),
            samples.as_deref(),
            cfg,
            settings.opts.aggregation_options(),
            &mut trace,
        )?;
        let (out, mlp) = if spec.kind == GnnKind::Gin {
            let m = spec.mlp.as_ref().expect("validated GINConv layer");
            let hidden = storage_form(&agg.output, cfg.feature_bytes);
            let pass = simulate_weighting(&hidden, &m.weight2, &identity, cfg, policy, &mut trace)?;
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let mut r = pass.output.row(i).into_owned();
                r.iter_mut().zip(&m.bias2).for_each(|(x, &b)| *x += b);
                spec.activation.apply(&mut r);
                rows.push(r);
            }
            let out = if n == 0 {
                FeatureMatrix::zeros(0, spec.f_out)
            } else {
                FeatureMatrix::from_rows(&rows)?
            };
            (out, Some(pass.stats))
        } else {
            (agg.output, None)
        };

        let golden_error = if settings.verify_golden {
            let spec64: LayerSpec<f64> = spec.cast();
            let next = match &samples {
                Some(s) => reference::sage_layer_with_samples(g, &golden, &spec64, s)?,
                None => reference::run_layer(g, &golden, &spec64, None)?,
            };
            let err = relative_error(&out, &next);
            golden = next;
            Some(err)
        } else {
            None
        };

        results.push(LayerResult {
            kind: spec.kind,
            f_in: spec.f_in,
            f_out: spec.f_out,
            weighting: w.stats,
            attention,
            aggregation: agg.stats,
            mlp,
            weighting_plan: w.plan,
            row_cycles: w.row_cycles,
            rounds: agg.rounds,
            iterations: agg.iterations,
            alpha_histograms: agg.alpha_histograms,
            gamma_escalations: agg.gamma_escalations,
            cache_capacity: agg.capacity,
            num_edges: agg.num_edges,
            initial_alpha_sum: agg.initial_alpha_sum,
            alpha_decrements: agg.alpha_decrements,
            spilled_vertices: agg.spilled_vertices,
            golden_error,
        });
        traces.push(trace);
        h = storage_form(&out, cfg.feature_bytes);
    }
    Ok(SimOutput {
        layers: results,
        output: h.to_dense(),
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate;

    #[test]
    fn opt_flag_parsing() {
        assert_eq!("cp,lb".parse::<OptFlags>().unwrap().to_string(), "cp,lb");
        assert_eq!("all".parse::<OptFlags>().unwrap(), OptFlags::ALL);
        assert_eq!("none".parse::<OptFlags>().unwrap().to_string(), "none");
        assert!("cp,xx".parse::<OptFlags>().is_err());
    }

    #[test]
    fn two_layer_networks_match_golden() {
        let g = generate::power_law(50, 3, 5).unwrap();
        let h = generate::bimodal_features::<f32>(50, 40, &Default::default(), 6).unwrap();
        for kind in GnnKind::ALL {
            let layers = build_network(kind, 40, &[16, 8], 3).unwrap();
            let settings = SimSettings {
                verify_golden: true,
                ..Default::default()
            };
            let out = simulate_network(&g, &h, &layers, &AcceleratorConfig::default(), settings).unwrap();
            for l in &out.layers {
                let e = l.golden_error.unwrap();
                assert!(e < golden_tolerance(kind, &AcceleratorConfig::default()), "{kind:?}: {e}");
                assert_eq!(l.initial_alpha_sum, l.alpha_decrements);
            }
            assert_eq!(out.output.width(), 8);
        }
    }
}
