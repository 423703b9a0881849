use serde::{Deserialize, Serialize};

use super::Graph;

pub const DEFAULT_DEGREE_BINS: usize = 8;

/// Vertex permutation produced by degree binning. Vertices are laid out in
/// DRAM in this order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexOrder {
    order: Vec<usize>,
    /// Start index in `order` of each bin.
    bin_boundaries: Vec<usize>,
    position: Vec<usize>,
}

impl VertexOrder {
    pub fn new(order: Vec<usize>, bin_boundaries: Vec<usize>) -> Self {
        let mut position = vec![usize::MAX; order.len()];
        for (p, &v) in order.iter().enumerate() {
            position[v] = p;
        }
        Self {
            order,
            bin_boundaries,
            position,
        }
    }

    /// Plain vertex-ID order in a single bin.
    pub fn identity(n: usize) -> Self {
        Self::new((0..n).collect(), if n == 0 { vec![] } else { vec![0] })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn bin_boundaries(&self) -> &[usize] {
        &self.bin_boundaries
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Position of vertex `v` in the order.
    #[inline]
    pub fn position(&self, v: usize) -> usize {
        self.position[v]
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.order.len()];
        for &v in &self.order {
            if v >= seen.len() || seen[v] {
                return false;
            }
            seen[v] = true;
        }
        true
    }

}

/// Bins vertices by degree into at most `num_bins` bins of roughly equal
/// population, highest degrees first. A degree value never straddles two
/// bins. Within a bin vertices appear in ascending ID order.
pub fn degree_sort(g: &Graph, num_bins: usize) -> VertexOrder {
    let num_bins = num_bins.max(1);
    let n = g.num_vertices();
    let max_deg = g.max_degree();
    let mut count = vec![0usize; max_deg + 1];
    for &d in g.degrees() {
        count[d] += 1;
    }
    let target = n.div_ceil(num_bins).max(1);
    // Lower degree bound of every bin, descending.
    let mut edges = Vec::new();
    let mut pop = 0;
    for d in (0..=max_deg).rev() {
        if count[d] == 0 {
            continue;
        }
        pop += count[d];
        if pop >= target && edges.len() + 1 < num_bins {
            edges.push(d);
            pop = 0;
        }
    }
    if pop > 0 || edges.is_empty() {
        edges.push(0);
    }
    degree_sort_with_edges(g, &edges)
}

/// Bins vertices with explicit lower degree bounds. `edges` must be strictly
/// descending; bin `b` holds degrees in `[edges[b], edges[b - 1])` and the
/// last bound is treated as zero.
pub fn degree_sort_with_edges(g: &Graph, edges: &[usize]) -> VertexOrder {
    let n = g.num_vertices();
    let nb = edges.len().max(1);
    let bin_of = |d: usize| -> usize {
        edges
            .iter()
            .position(|&lo| d >= lo)
            .unwrap_or(nb - 1)
    };
    // Counting sort: one pass to size the bins, one pass to place vertices.
    let mut size = vec![0usize; nb];
    let bins: Vec<usize> = g.degrees().iter().map(|&d| bin_of(d)).collect();
    for &b in &bins {
        size[b] += 1;
    }
    let mut start = vec![0usize; nb];
    for b in 1..nb {
        start[b] = start[b - 1] + size[b - 1];
    }
    let boundaries: Vec<usize> = (0..nb).filter(|&b| size[b] > 0).map(|b| start[b]).collect();
    let mut order = vec![0usize; n];
    let mut next = start;
    for v in 0..n {
        let b = bins[v];
        order[next[b]] = v;
        next[b] += 1;
    }
    VertexOrder::new(order, boundaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_csr, generate};

    #[test]
    fn walkthrough_graph_order() {
        let g = generate::caching_walkthrough();
        let o = degree_sort(&g, 3);
        // V1,V2,V3 (deg 3) then V5,V6 (deg 2) then V4,V7,... (deg 1)
        assert_eq!(&o.order()[..7], &[0, 1, 2, 4, 5, 3, 6]);
        assert!(o.is_permutation());
    }

    #[test]
    fn regular_graph_is_id_order() {
        let n = 6;
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let g = build_csr(&edges, n, true).unwrap();
        assert_eq!(degree_sort(&g, 8).order(), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn star_center_first() {
        let c = 3;
        let edges: Vec<_> = (0..6).filter(|&v| v != c).map(|v| (c, v)).collect();
        let g = build_csr(&edges, 6, true).unwrap();
        assert_eq!(degree_sort(&g, DEFAULT_DEGREE_BINS).order()[0], c);
    }

    #[test]
    fn bins_are_degree_monotone() {
        let g = generate::power_law(300, 2, 9).unwrap();
        let o = degree_sort(&g, 5);
        let b = o.bin_boundaries();
        assert!(b.len() <= 5);
        for w in b.windows(2) {
            let next_end = b.iter().find(|&&s| s > w[1]).copied().unwrap_or(o.len());
            let min_here = o.order()[w[0]..w[1]].iter().map(|&v| g.degree(v)).min().unwrap();
            let max_next = o.order()[w[1]..next_end].iter().map(|&v| g.degree(v)).max().unwrap();
            assert!(min_here >= max_next);
        }
    }

    #[test]
    fn explicit_edges() {
        let g = generate::caching_walkthrough();
        let o = degree_sort_with_edges(&g, &[3, 1, 0]);
        assert_eq!(o.bin_boundaries(), &[0, 3, 14]);
        assert_eq!(o.position(14), 14);
    }
}
