//! Seeded synthetic inputs: preferential-attachment and Erdős–Rényi graphs,
//! and feature matrices with bimodal row sparsity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_csr, FeatureMatrix, Graph};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Preferential-attachment graph on `n` vertices: a clique on the first
/// `m_attach + 1` vertices, then every new vertex attaches to `m_attach`
/// distinct existing vertices chosen with probability proportional to
/// degree. Vertex IDs are shuffled afterwards so that ID order carries no
/// degree information.
pub fn power_law(n: usize, m_attach: usize, seed: u64) -> Result<Graph> {
    build_csr(&power_law_edges(n, m_attach, seed)?, n, true)
}

pub fn power_law_edges(n: usize, m_attach: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if m_attach < 1 || n <= m_attach {
        return Err(Error::InvalidGenerator(format!(
            "need n > m_attach >= 1, got n={n}, m_attach={m_attach}"
        )));
    }
    let mut rng = rng(seed);
    let mut edges = Vec::with_capacity(n * m_attach);
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * n * m_attach);
    for u in 0..=m_attach {
        for v in u + 1..=m_attach {
            edges.push((u, v));
            endpoints.extend([u, v]);
        }
    }
    let mut chosen = Vec::with_capacity(m_attach);
    for v in m_attach + 1..n {
        chosen.clear();
        while chosen.len() < m_attach {
            let t = endpoints[rng.gen_range(0..endpoints.len())];
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            edges.push((t, v));
            endpoints.extend([t, v]);
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    Ok(edges.into_iter().map(|(u, v)| (perm[u], perm[v])).collect())
}

/// G(n, p) random graph.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) || n == 0 {
        return Err(Error::InvalidGenerator(format!("need n >= 1 and p in [0,1], got n={n}, p={p}")));
    }
    let mut rng = rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    build_csr(&edges, n, true)
}

/// Fifteen-vertex graph used to walk through the caching policy: three
/// degree-3 hubs, two degree-2 vertices and degree-1 leaves. Loading the
/// seven highest-degree vertices exposes six edges; once those are done the
/// four leaves can be replaced by the next four vertices.
pub fn caching_walkthrough() -> Graph {
    // Zero-based: vertex k here is V(k+1).
    let edges = [
        (0, 3),   // E1 V1-V4
        (0, 4),   // E2 V1-V5
        (1, 4),   // E3 V2-V5
        (1, 5),   // E4 V2-V6
        (2, 5),   // E5 V3-V6
        (2, 6),   // E6 V3-V7
        (0, 7),   // E7 V1-V8
        (1, 8),   // E8 V2-V9
        (2, 9),   // E9 V3-V10
        (10, 11), // V11-V12
        (12, 13), // V13-V14
    ];
    build_csr(&edges, 15, true).expect("static edges are in range")
}

/// Row sparsity profile with two modes: most rows are very sparse, a
/// minority are much denser. Column popularity decays exponentially with
/// column index so that contiguous column blocks carry unequal work.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BimodalSparsity {
    /// Fraction of zeros in rows of the sparse mode.
    pub sparse_mode: f64,
    /// Fraction of zeros in rows of the dense mode.
    pub dense_mode: f64,
    /// Probability that a row belongs to the dense mode.
    pub dense_fraction: f64,
    /// Column `c` is picked with weight `exp(-column_skew * c / width)`.
    pub column_skew: f64,
}

impl Default for BimodalSparsity {
    fn default() -> Self {
        Self {
            sparse_mode: 0.99,
            dense_mode: 0.85,
            dense_fraction: 0.3,
            column_skew: 2.0,
        }
    }
}

pub fn bimodal_features<T: Scalar>(
    n: usize,
    width: usize,
    profile: &BimodalSparsity,
    seed: u64,
) -> Result<FeatureMatrix<T>> {
    for (name, v) in [
        ("sparse_mode", profile.sparse_mode),
        ("dense_mode", profile.dense_mode),
        ("dense_fraction", profile.dense_fraction),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidGenerator(format!("{name}={v} outside [0,1]")));
        }
    }
    let mut rng = rng(seed);
    let weights: Vec<f64> = (0..width)
        .map(|c| (-profile.column_skew * c as f64 / width.max(1) as f64).exp())
        .collect();
    let mean_w = weights.iter().sum::<f64>() / width.max(1) as f64;
    let mut data = vec![T::zero(); n * width];
    for i in 0..n {
        let density = if rng.gen_bool(profile.dense_fraction) {
            1.0 - profile.dense_mode
        } else {
            1.0 - profile.sparse_mode
        };
        for c in 0..width {
            let p = (density * weights[c] / mean_w).min(1.0);
            if rng.gen_bool(p) {
                let mut v: f64 = rng.gen_range(-1.0..1.0);
                if v == 0.0 {
                    v = 0.5;
                }
                data[i * width + c] = T::lit(v);
            }
        }
    }
    FeatureMatrix::from_dense(n, width, data)
}

/// Dense features uniform in `[-1, 1)`.
pub fn dense_features<T: Scalar>(n: usize, width: usize, seed: u64) -> FeatureMatrix<T> {
    let mut rng = rng(seed);
    let data = (0..n * width).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    FeatureMatrix::from_dense(n, width, data).expect("shape is consistent")
}

/// Matrix with entries uniform in `[-scale, scale)`.
pub fn random_matrix<T: Scalar>(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Matrix<T> {
    let data = (0..rows * cols)
        .map(|_| T::lit(rng.gen_range(-scale..scale)))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape is consistent")
}

pub fn random_vector<T: Scalar>(len: usize, scale: f64, rng: &mut impl Rng) -> Vec<T> {
    (0..len).map(|_| T::lit(rng.gen_range(-scale..scale))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_attachment_is_a_tree() {
        let g = power_law(5, 1, 7).unwrap();
        assert_eq!(g.edges().len(), 4);
        assert!(connected(&g));
    }

    #[test]
    fn deterministic() {
        assert_eq!(power_law_edges(200, 3, 11).unwrap(), power_law_edges(200, 3, 11).unwrap());
        assert_ne!(power_law_edges(200, 3, 11).unwrap(), power_law_edges(200, 3, 12).unwrap());
    }

    #[test]
    fn invalid_sizes() {
        assert!(power_law(3, 3, 0).is_err());
        assert!(power_law(3, 0, 0).is_err());
        assert!(erdos_renyi(4, 1.5, 0).is_err());
    }

    #[test]
    fn attachment_graph_is_connected() {
        assert!(connected(&power_law(500, 2, 3).unwrap()));
    }

    #[test]
    fn walkthrough_degrees() {
        let g = caching_walkthrough();
        assert_eq!(&g.degrees()[..7], &[3, 3, 3, 1, 2, 2, 1]);
        assert_eq!(g.degree(14), 0);
    }

    #[test]
    fn bimodal_modes_show_up() {
        let f: FeatureMatrix<f32> = bimodal_features(400, 1024, &BimodalSparsity::default(), 5).unwrap();
        let sparse = f.row_nnz().iter().filter(|&&k| k < 40).count();
        let dense = f.row_nnz().iter().filter(|&&k| k > 100).count();
        assert!(sparse > 200 && dense > 60, "sparse={sparse} dense={dense}");
    }

    fn connected(g: &Graph) -> bool {
        let mut seen = vec![false; g.num_vertices()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
