//! Golden functional model of the supported GNN layers.
//!
//! Every layer is computed Weighting-first (`η = h · W`, then aggregation),
//! which is mathematically identical to aggregating first.

mod layer;
mod sample;

pub use layer::{
    leaky_relu, Activation, Aggregator, GinMlp, GnnKind, LayerSpec, DEFAULT_LEAKY_SLOPE, DEFAULT_SAMPLE_SIZE,
};
pub use sample::{sample_neighborhoods, SampleStream, DEFAULT_STREAM_LEN};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::scalar::Scalar;

fn check_input<T: Scalar>(g: &Graph, h: &FeatureMatrix<T>, spec: &LayerSpec<T>) -> Result<()> {
    spec.validate()?;
    if h.num_rows() != g.num_vertices() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} vertices",
            h.num_rows(),
            g.num_vertices()
        )));
    }
    if h.width() != spec.f_in {
        return Err(Error::ShapeMismatch(format!(
            "feature width {} but f_in={}",
            h.width(),
            spec.f_in
        )));
    }
    Ok(())
}

/// `η_i = h_i · W` for every vertex.
pub fn weighting<T: Scalar>(h: &FeatureMatrix<T>, spec: &LayerSpec<T>) -> Vec<Vec<T>> {
    (0..h.num_rows()).map(|i| spec.weight.left_mul(&h.row(i))).collect()
}

/// Neighbors of `v` other than `v` itself.
pub fn open_neighbors(g: &Graph, v: usize) -> impl Iterator<Item = usize> + '_ {
    g.neighbors(v).iter().copied().filter(move |&j| j != v)
}

/// Degree counting the implicit self-loop, `|{i} ∪ N(i)|`.
pub fn closed_degree(g: &Graph, v: usize) -> usize {
    open_neighbors(g, v).count() + 1
}

fn finish<T: Scalar>(rows: Vec<Vec<T>>, width: usize, act: Activation) -> Result<FeatureMatrix<T>> {
    let n = rows.len();
    let mut data = Vec::with_capacity(n * width);
    for mut r in rows {
        act.apply(&mut r);
        data.extend(r);
    }
    FeatureMatrix::from_dense(n, width, data)
}

pub fn gcn_layer<T: Scalar>(g: &Graph, h: &FeatureMatrix<T>, spec: &LayerSpec<T>) -> Result<FeatureMatrix<T>> {
    check_input(g, h, spec)?;
    let eta = weighting(h, spec);
    let d: Vec<T> = (0..g.num_vertices()).map(|v| T::lit(closed_degree(g, v) as f64)).collect();
    let f = spec.f_out;
    let rows = (0..g.num_vertices())
        .map(|i| {
            let mut acc = vec![T::zero(); f];
            for j in std::iter::once(i).chain(open_neighbors(g, i)) {
                let c = T::one() / (d[i] * d[j]).sqrt();
                for (a, &e) in acc.iter_mut().zip(&eta[j]) {
                    *a = *a + c * e;
                }
            }
            acc
        })
        .collect();
    finish(rows, f, spec.activation)
}

/// GraphSAGE over explicit neighbor samples (`samples[i]` excludes `i`).
pub fn sage_layer_with_samples<T: Scalar>(
    g: &Graph,
    h: &FeatureMatrix<T>,
    spec: &LayerSpec<T>,
    samples: &[Vec<usize>],
) -> Result<FeatureMatrix<T>> {
    check_input(g, h, spec)?;
    if samples.len() != g.num_vertices() {
        return Err(Error::ShapeMismatch("one neighbor sample per vertex required".into()));
    }
    let eta = weighting(h, spec);
    let f = spec.f_out;
    let rows = (0..g.num_vertices())
        .map(|i| {
            let mut acc = eta[i].clone();
            for &j in &samples[i] {
                for (a, &e) in acc.iter_mut().zip(&eta[j]) {
                    *a = match spec.aggregator {
                        Aggregator::Max => a.max(e),
                        Aggregator::Sum | Aggregator::Mean => *a + e,
                    };
                }
            }
            if spec.aggregator == Aggregator::Mean {
                let c = T::lit((samples[i].len() + 1) as f64);
                acc.iter_mut().for_each(|a| *a = *a / c);
            }
            acc
        })
        .collect();
    finish(rows, f, spec.activation)
}

pub fn sage_layer<T: Scalar>(
    g: &Graph,
    h: &FeatureMatrix<T>,
    spec: &LayerSpec<T>,
    stream: &mut SampleStream,
) -> Result<FeatureMatrix<T>> {
    check_input(g, h, spec)?;
    let samples = sample_neighborhoods(g, spec.sample_size, stream)?;
    sage_layer_with_samples(g, h, spec, &samples)
}

/// Softmax-normalised attention coefficients `α_ij` for `j ∈ {i} ∪ N(i)`,
/// listed with `i` first and then the open neighbors in CSR order.
pub fn gat_coefficients<T: Scalar>(g: &Graph, eta: &[Vec<T>], spec: &LayerSpec<T>) -> Vec<Vec<(usize, T)>> {
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y);
    let e1: Vec<T> = eta.iter().map(|r| dot(spec.a1(), r)).collect();
    let e2: Vec<T> = eta.iter().map(|r| dot(spec.a2(), r)).collect();
    (0..g.num_vertices())
        .map(|i| {
            let mut e: Vec<(usize, T)> = std::iter::once(i)
                .chain(open_neighbors(g, i))
                .map(|j| (j, leaky_relu(e1[i] + e2[j], spec.leaky_slope)))
                .collect();
            let m = e.iter().fold(T::neg_infinity(), |m, &(_, v)| m.max(v));
            let mut sum = T::zero();
            for (_, v) in e.iter_mut() {
                *v = (*v - m).exp();
                sum = sum + *v;
            }
            e.iter_mut().for_each(|(_, v)| *v = *v / sum);
            e
        })
        .collect()
}

pub fn gat_layer<T: Scalar>(g: &Graph, h: &FeatureMatrix<T>, spec: &LayerSpec<T>) -> Result<FeatureMatrix<T>> {
    check_input(g, h, spec)?;
    let eta = weighting(h, spec);
    let coeffs = gat_coefficients(g, &eta, spec);
    let f = spec.f_out;
    let rows = coeffs
        .iter()
        .map(|c| {
            let mut acc = vec![T::zero(); f];
            for &(j, a) in c {
                for (o, &e) in acc.iter_mut().zip(&eta[j]) {
                    *o = *o + a * e;
                }
            }
            acc
        })
        .collect();
    finish(rows, f, spec.activation)
}

/// Applies the GINConv MLP to an already-multiplied first layer `z = x · W1`.
pub fn gin_mlp_tail<T: Scalar>(z: &[T], spec: &LayerSpec<T>) -> Vec<T> {
    let mlp = spec.mlp.as_ref().expect("validated GINConv layer");
    let hidden: Vec<T> = z.iter().zip(&mlp.bias1).map(|(&v, &b)| (v + b).max(T::zero())).collect();
    let mut out = mlp.weight2.left_mul(&hidden);
    for (o, &b) in out.iter_mut().zip(&mlp.bias2) {
        *o = *o + b;
    }
    out
}

pub fn gin_layer<T: Scalar>(g: &Graph, h: &FeatureMatrix<T>, spec: &LayerSpec<T>) -> Result<FeatureMatrix<T>> {
    check_input(g, h, spec)?;
    let eta = weighting(h, spec);
    let scale = T::one() + spec.epsilon;
    let rows = (0..g.num_vertices())
        .map(|i| {
            let mut z: Vec<T> = eta[i].iter().map(|&v| scale * v).collect();
            for j in open_neighbors(g, i) {
                for (a, &e) in z.iter_mut().zip(&eta[j]) {
                    *a = *a + e;
                }
            }
            gin_mlp_tail(&z, spec)
        })
        .collect();
    finish(rows, spec.f_out, spec.activation)
}

/// Runs one layer of any kind. GraphSAGE requires `stream`.
pub fn run_layer<T: Scalar>(
    g: &Graph,
    h: &FeatureMatrix<T>,
    spec: &LayerSpec<T>,
    stream: Option<&mut SampleStream>,
) -> Result<FeatureMatrix<T>> {
    match spec.kind {
        GnnKind::Gcn => gcn_layer(g, h, spec),
        GnnKind::Gat => gat_layer(g, h, spec),
        GnnKind::Gin => gin_layer(g, h, spec),
        GnnKind::GraphSage => match stream {
            Some(s) => sage_layer(g, h, spec, s),
            None => Err(Error::Config("GraphSAGE needs a sample stream".into())),
        },
    }
}

/// Graph-level representation: the per-layer column sums, concatenated.
pub fn graph_readout<T: Scalar>(per_layer: &[FeatureMatrix<T>]) -> Result<Vec<T>> {
    if per_layer.is_empty() {
        return Err(Error::EmptyInput("readout needs at least one layer".into()));
    }
    let mut out = Vec::new();
    for h in per_layer {
        let mut sum = vec![T::zero(); h.width()];
        for i in 0..h.num_rows() {
            for (s, &v) in sum.iter_mut().zip(h.row(i).iter()) {
                *s = *s + v;
            }
        }
        out.extend(sum);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_csr, generate};
    use crate::matrix::Matrix;

    fn feats(rows: &[Vec<f64>]) -> FeatureMatrix<f64> {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn gcn_isolated_vertex_keeps_features() {
        let g = build_csr(&[], 1, true).unwrap();
        let spec = LayerSpec::new(GnnKind::Gcn, Matrix::identity(2));
        let out = gcn_layer(&g, &feats(&[vec![1.0, 0.0]]), &spec).unwrap();
        assert_eq!(&*out.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn gcn_k2_symmetry() {
        let g = build_csr(&[(0, 1)], 2, true).unwrap();
        let mut rng = generate::rng(4);
        let spec = LayerSpec::<f64>::random(GnnKind::Gcn, 3, 2, &mut rng);
        let out = gcn_layer(&g, &feats(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]), &spec).unwrap();
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn gat_single_vertex_and_k2_scores() {
        let g = build_csr(&[], 1, true).unwrap();
        let mut spec = LayerSpec::new(GnnKind::Gat, Matrix::identity(1));
        spec.attention = vec![1.0, 1.0];
        spec.activation = Activation::None;
        let out = gat_layer(&g, &feats(&[vec![-3.0]]), &spec).unwrap();
        assert_eq!(out.row(0)[0], -3.0);

        let g = build_csr(&[(0, 1)], 2, true).unwrap();
        let eta = vec![vec![2.0], vec![3.0]];
        let c = gat_coefficients(&g, &eta, &spec);
        // scores for vertex 0: self 2+2=4, neighbor 2+3=5
        let expect = 1.0 / (1.0 + (1.0f64).exp());
        assert!((c[0][0].1 - expect).abs() < 1e-12);
        assert!(c.iter().all(|r| (r.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn gin_trivial_cases() {
        let g = build_csr(&[], 1, true).unwrap();
        let spec = LayerSpec::new(GnnKind::Gin, Matrix::identity(2));
        let out = gin_layer(&g, &feats(&[vec![-1.0, 2.0]]), &spec).unwrap();
        // identity MLP with a ReLU between the two layers
        assert_eq!(&*out.row(0), &[0.0, 2.0]);
        let mut spec = spec;
        spec.epsilon = -1.0;
        spec.mlp.as_mut().unwrap().bias2 = vec![0.5, 0.5];
        let out = gin_layer(&g, &feats(&[vec![7.0, 9.0]]), &spec).unwrap();
        assert_eq!(&*out.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn sage_max_of_identical_neighbors() {
        let g = build_csr(&[(0, 1), (0, 2)], 3, true).unwrap();
        let mut spec = LayerSpec::new(GnnKind::GraphSage, Matrix::identity(2));
        spec.aggregator = Aggregator::Max;
        let h = feats(&[vec![1.0, -2.0], vec![1.0, -2.0], vec![1.0, -2.0]]);
        let out = sage_layer(&g, &h, &spec, &mut SampleStream::seeded(1)).unwrap();
        assert_eq!(&*out.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn readout_sums_and_concatenates() {
        let a = feats(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(graph_readout(std::slice::from_ref(&a)).unwrap(), vec![4.0, 6.0]);
        let b = feats(&[vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]);
        let r = graph_readout(&[a, b]).unwrap();
        assert_eq!(r.len(), 5);
        assert!(r[2..].iter().all(|&v| v == 0.0));
        assert!(graph_readout::<f64>(&[]).is_err());
    }

    #[test]
    fn shape_errors() {
        let g = build_csr(&[], 2, true).unwrap();
        let spec = LayerSpec::new(GnnKind::Gcn, Matrix::<f64>::identity(3));
        assert!(gcn_layer(&g, &feats(&[vec![1.0, 2.0], vec![0.0, 0.0]]), &spec).is_err());
    }
}
