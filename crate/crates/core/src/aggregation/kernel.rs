//! Functional datapath of Aggregation: per-vertex accumulators, edge
//! contributions and finalization.

use crate::config::SoftmaxMode;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::reference::{closed_degree, leaky_relu, open_neighbors, Aggregator, GnnKind, LayerSpec};
use crate::scalar::Scalar;

use super::attention::AttentionScalars;
use super::sfu::Sfu;

#[derive(Clone, Debug, PartialEq)]
pub struct VertexAggState<T> {
    /// Numerator for GAT, the plain accumulator otherwise.
    pub acc: Vec<T>,
    /// Softmax denominator (GAT only).
    pub denom: T,
    /// Unprocessed edges.
    pub remaining: usize,
    pub self_done: bool,
    /// Whether a partial result exists from an earlier iteration.
    pub started: bool,
    pub finalized: bool,
}

impl<T: Scalar> VertexAggState<T> {
    pub fn new(width: usize, degree: usize) -> Self {
        Self {
            acc: vec![T::zero(); width],
            denom: T::zero(),
            remaining: degree,
            self_done: false,
            started: false,
            finalized: false,
        }
    }
}

/// Numerator contribution `exp(LeakyReLU(e1_i + e2_j) − shift)·η_j` and the
/// matching denominator increment of edge `(i, j)` seen from `i`, plus
/// whether the exponent was clamped.
pub fn gat_edge_op<T: Scalar>(
    i: usize,
    j: usize,
    scalars: &AttentionScalars<T>,
    eta_j: &[T],
    sfu: &Sfu,
    slope: T,
    shift: T,
) -> (Vec<T>, T, bool) {
    let e = sfu.leaky_relu(scalars.e1[i] + scalars.e2[j], slope);
    let (w, clamped) = sfu.exp(e - shift);
    (eta_j.iter().map(|&x| w * x).collect(), w, clamped)
}

/// Everything needed to apply contributions for one layer.
pub struct Kernel<'a, T: Scalar> {
    pub spec: &'a LayerSpec<T>,
    pub eta: &'a FeatureMatrix<T>,
    pub scalars: Option<&'a AttentionScalars<T>>,
    pub sfu: Sfu,
    inv_sqrt_deg: Vec<T>,
    shift: Vec<T>,
    /// Contributions whose exponent hit the SFU clamp.
    pub exp_clamps: u64,
    pub exp_ops: u64,
}

impl<'a, T: Scalar> Kernel<'a, T> {
    /// `g` is the model graph: GCN normalizes by its closed degrees and GAT
    /// bounds softmax shifts over its neighborhoods.
    pub fn new(
        g: &Graph,
        spec: &'a LayerSpec<T>,
        eta: &'a FeatureMatrix<T>,
        scalars: Option<&'a AttentionScalars<T>>,
        sfu: Sfu,
        softmax: SoftmaxMode,
    ) -> Result<Self> {
        let n = g.num_vertices();
        if eta.num_rows() != n {
            return Err(Error::ShapeMismatch(format!("{} weighted rows for {n} vertices", eta.num_rows())));
        }
        let inv_sqrt_deg = if spec.kind == GnnKind::Gcn {
            (0..n).map(|v| T::one() / T::lit(closed_degree(g, v) as f64).sqrt()).collect()
        } else {
            Vec::new()
        };
        let shift = if spec.kind == GnnKind::Gat {
            let s = scalars.ok_or_else(|| Error::Config("GAT aggregation needs attention scalars".into()))?;
            if s.e1.len() != n || s.e2.len() != n {
                return Err(Error::ShapeMismatch("attention scalars must cover every vertex".into()));
            }
            match softmax {
                SoftmaxMode::Raw => vec![T::zero(); n],
                // LeakyReLU is monotone, so this bounds every score of the row.
                SoftmaxMode::Stabilized => (0..n)
                    .map(|i| {
                        let m = open_neighbors(g, i).fold(s.e2[i], |m, j| m.max(s.e2[j]));
                        leaky_relu(s.e1[i] + m, spec.leaky_slope)
                    })
                    .collect(),
            }
        } else {
            Vec::new()
        };
        Ok(Self {
            spec,
            eta,
            scalars,
            sfu,
            inv_sqrt_deg,
            shift,
            exp_clamps: 0,
            exp_ops: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.eta.width()
    }

    /// Whether an edge contribution needs a multiplication before the sum.
    pub fn edge_multiplies(&self) -> bool {
        matches!(self.spec.kind, GnnKind::Gcn | GnnKind::Gat)
    }

    /// Whether the self term needs a multiplication.
    pub fn self_multiplies(&self) -> bool {
        match self.spec.kind {
            GnnKind::Gcn | GnnKind::Gat => true,
            GnnKind::Gin => self.spec.epsilon != T::zero(),
            GnnKind::GraphSage => false,
        }
    }

    fn combine(&self, acc: &mut [T], x: &[T]) {
        if self.spec.kind == GnnKind::GraphSage && self.spec.aggregator == Aggregator::Max {
            for (a, &v) in acc.iter_mut().zip(x) {
                *a = a.max(v);
            }
        } else {
            for (a, &v) in acc.iter_mut().zip(x) {
                *a = *a + v;
            }
        }
    }

    /// Folds the self term of `v` into its accumulator.
    pub fn apply_self(&mut self, v: usize, state: &mut VertexAggState<T>) {
        let eta = self.eta.row(v);
        match self.spec.kind {
            GnnKind::Gcn => {
                let c = self.inv_sqrt_deg[v] * self.inv_sqrt_deg[v];
                let x: Vec<T> = eta.iter().map(|&e| c * e).collect();
                self.combine(&mut state.acc, &x);
            }
            GnnKind::Gat => {
                let s = self.scalars.expect("checked in new");
                let (x, w, c) = gat_edge_op(v, v, s, &eta, &self.sfu, self.spec.leaky_slope, self.shift[v]);
                self.note_exp(c);
                self.combine(&mut state.acc, &x);
                state.denom = state.denom + w;
            }
            GnnKind::Gin => {
                let c = T::one() + self.spec.epsilon;
                let x: Vec<T> = eta.iter().map(|&e| c * e).collect();
                self.combine(&mut state.acc, &x);
            }
            GnnKind::GraphSage => {
                if state.started {
                    self.combine(&mut state.acc, &eta);
                } else {
                    state.acc.copy_from_slice(&eta);
                }
            }
        }
        state.self_done = true;
        state.started = true;
    }

    /// Adds the contribution of neighbor `j` to vertex `i`.
    pub fn apply_edge(&mut self, i: usize, j: usize, state: &mut VertexAggState<T>) {
        let eta = self.eta.row(j);
        match self.spec.kind {
            GnnKind::Gcn => {
                let c = self.inv_sqrt_deg[i] * self.inv_sqrt_deg[j];
                let x: Vec<T> = eta.iter().map(|&e| c * e).collect();
                self.combine(&mut state.acc, &x);
            }
            GnnKind::Gat => {
                let s = self.scalars.expect("checked in new");
                let (x, w, c) = gat_edge_op(i, j, s, &eta, &self.sfu, self.spec.leaky_slope, self.shift[i]);
                self.note_exp(c);
                self.combine(&mut state.acc, &x);
                state.denom = state.denom + w;
            }
            GnnKind::Gin | GnnKind::GraphSage => {
                if state.started || self.spec.kind == GnnKind::Gin {
                    self.combine(&mut state.acc, &eta);
                } else {
                    state.acc.copy_from_slice(&eta);
                }
            }
        }
        state.started = true;
    }

    fn note_exp(&mut self, clamped: bool) {
        self.exp_ops += 1;
        if clamped {
            self.exp_clamps += 1;
        }
    }
}

/// Output of vertex `v` once all its edges are in.
///
/// GAT divides by the denominator, GraphSAGE finishes its aggregator, and
/// the layer activation follows. GINConv returns the hidden layer of its MLP,
/// `ReLU(z + b1)`; the second linear layer runs as a separate Weighting pass.
pub fn finalize_vertex<T: Scalar>(v: usize, state: &VertexAggState<T>, spec: &LayerSpec<T>, num_samples: usize) -> Result<Vec<T>> {
    if state.remaining > 0 {
        return Err(Error::PrematureFinalize {
            vertex: v,
            remaining: state.remaining,
        });
    }
    if !state.self_done {
        return Err(Error::PrematureFinalize { vertex: v, remaining: 0 });
    }
    let mut out = state.acc.clone();
    match spec.kind {
        GnnKind::Gat => {
            if state.denom == T::zero() || !state.denom.is_finite() {
                return Err(Error::ZeroDenominator(v));
            }
            out.iter_mut().for_each(|x| *x = *x / state.denom);
        }
        GnnKind::GraphSage if spec.aggregator == Aggregator::Mean => {
            let c = T::lit((num_samples + 1) as f64);
            out.iter_mut().for_each(|x| *x = *x / c);
        }
        GnnKind::Gin => {
            let mlp = spec.mlp.as_ref().expect("validated GINConv layer");
            for (x, &b) in out.iter_mut().zip(&mlp.bias1) {
                *x = (*x + b).max(T::zero());
            }
            return Ok(out);
        }
        _ => {}
    }
    spec.activation.apply(&mut out);
    Ok(out)
}
