use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adjacency in compressed sparse row form.
///
/// `offsets[v]..offsets[v + 1]` indexes the sorted neighbor list of `v` in
/// `coords`. Undirected graphs store both directions of every edge; a
/// self-loop is stored once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    num_vertices: usize,
    offsets: Vec<usize>,
    coords: Vec<usize>,
    degrees: Vec<usize>,
    undirected: bool,
}

/// Builds a CSR graph from an edge list. Duplicate edges collapse;
/// self-loops are kept.
pub fn build_csr(edges: &[(usize, usize)], num_vertices: usize, undirected: bool) -> Result<Graph> {
    let mut pairs = Vec::with_capacity(edges.len() * if undirected { 2 } else { 1 });
    for &(u, v) in edges {
        for x in [u, v] {
            if x >= num_vertices {
                return Err(Error::VertexOutOfRange {
                    vertex: x,
                    num_vertices,
                });
            }
        }
        pairs.push((u, v));
        if undirected && u != v {
            pairs.push((v, u));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    let mut offsets = vec![0usize; num_vertices + 1];
    for &(u, _) in &pairs {
        offsets[u + 1] += 1;
    }
    for v in 0..num_vertices {
        offsets[v + 1] += offsets[v];
    }
    let coords: Vec<usize> = pairs.iter().map(|&(_, v)| v).collect();
    let degrees = (0..num_vertices).map(|v| offsets[v + 1] - offsets[v]).collect();
    Ok(Graph {
        num_vertices,
        offsets,
        coords,
        degrees,
        undirected,
    })
}

impl Graph {
    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.coords[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Number of stored adjacency entries (directed arcs).
    pub fn num_arcs(&self) -> usize {
        self.coords.len()
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Index into `coords` of the arc `u -> v`.
    pub fn arc_index(&self, u: usize, v: usize) -> Option<usize> {
        self.neighbors(u)
            .binary_search(&v)
            .ok()
            .map(|k| self.offsets[u] + k)
    }

    /// Edges as `(u, v)` pairs; undirected graphs yield each edge once with
    /// `u <= v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.num_vertices {
            for &v in self.neighbors(u) {
                if !self.undirected || u <= v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn num_self_loops(&self) -> usize {
        (0..self.num_vertices)
            .filter(|&v| self.has_edge(v, v))
            .count()
    }

    pub fn without_self_loops(&self) -> Graph {
        let edges: Vec<_> = self.edges().into_iter().filter(|(u, v)| u != v).collect();
        build_csr(&edges, self.num_vertices, self.undirected).expect("edges already validated")
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.num_vertices {
            return Err(Error::ShapeMismatch("permutation length".into()));
        }
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(u, v)| (perm[u], perm[v]))
            .collect();
        build_csr(&edges, self.num_vertices, self.undirected)
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Format(format!("invalid CSR: {m}")));
        if self.offsets.len() != self.num_vertices + 1 || self.offsets[0] != 0 {
            return bad("offset length");
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return bad("offsets decrease");
        }
        if *self.offsets.last().unwrap() != self.coords.len() {
            return bad("last offset != coordinate count");
        }
        for v in 0..self.num_vertices {
            if self.degrees[v] != self.offsets[v + 1] - self.offsets[v] {
                return bad("degree mismatch");
            }
        }
        if self.coords.iter().any(|&c| c >= self.num_vertices) {
            return bad("coordinate out of range");
        }
        if self.undirected {
            for u in 0..self.num_vertices {
                for &v in self.neighbors(u) {
                    if !self.has_edge(v, u) {
                        return bad("asymmetric undirected graph");
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn from_parts(
        num_vertices: usize,
        offsets: Vec<usize>,
        coords: Vec<usize>,
        undirected: bool,
    ) -> Result<Graph> {
        if offsets.len() != num_vertices + 1 {
            return Err(Error::Format("offset length".into()));
        }
        let degrees = offsets.windows(2).map(|w| w[1].saturating_sub(w[0])).collect();
        let g = Graph {
            num_vertices,
            offsets,
            coords,
            degrees,
            undirected,
        };
        g.validate()?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_undirected() {
        let g = build_csr(&[(0, 1)], 2, true).unwrap();
        assert_eq!(g.offsets(), &[0, 1, 2]);
        assert_eq!(g.coords(), &[1, 0]);
    }

    #[test]
    fn empty_graph() {
        let g = build_csr(&[], 3, true).unwrap();
        assert_eq!(g.offsets(), &[0, 0, 0, 0]);
        assert!(g.coords().is_empty());
    }

    #[test]
    fn duplicates_collapse_and_self_loops_stay() {
        let g = build_csr(&[(0, 1), (1, 0), (0, 1), (2, 2)], 3, true).unwrap();
        assert_eq!(g.degrees(), &[1, 1, 1]);
        assert!(g.has_edge(2, 2));
        assert_eq!(g.num_self_loops(), 1);
        assert_eq!(g.without_self_loops().degree(2), 0);
        g.validate().unwrap();
    }

    #[test]
    fn out_of_range_endpoint() {
        let err = build_csr(&[(0, 5)], 3, true).unwrap_err();
        assert!(matches!(err, Error::VertexOutOfRange { vertex: 5, .. }));
    }

    #[test]
    fn directed_keeps_one_direction() {
        let g = build_csr(&[(0, 1)], 2, false).unwrap();
        assert!(g.has_edge(0, 1));
        assert!(!g.has_edge(1, 0));
    }
}
