use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{generate, Graph};

/// Pregenerated random numbers replayed in order. A cycling stream wraps
/// around at the end; a non-cycling one reports exhaustion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleStream {
    values: Vec<u32>,
    cursor: usize,
    draws: usize,
    cycle: bool,
}

pub const DEFAULT_STREAM_LEN: usize = 4096;

impl SampleStream {
    pub fn from_values(values: Vec<u32>, cycle: bool) -> Self {
        Self {
            values,
            cursor: 0,
            draws: 0,
            cycle,
        }
    }

    pub fn pregenerated(seed: u64, len: usize, cycle: bool) -> Self {
        let mut rng = generate::rng(seed);
        Self::from_values((0..len).map(|_| rng.gen()).collect(), cycle)
    }

    /// Cycling stream of the default length.
    pub fn seeded(seed: u64) -> Self {
        Self::pregenerated(seed, DEFAULT_STREAM_LEN, true)
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn next_value(&mut self) -> Result<u32> {
        if self.cursor == self.values.len() {
            if !self.cycle || self.values.is_empty() {
                return Err(Error::SampleStreamExhausted(self.draws));
            }
            self.cursor = 0;
        }
        let v = self.values[self.cursor];
        self.cursor += 1;
        self.draws += 1;
        Ok(v)
    }
}

/// Draws `min(sample_size, |N(i)|)` distinct neighbors of every vertex with a
/// partial Fisher–Yates shuffle fed by `stream`. Self-loops are not
/// candidates. Vertices with no more neighbors than `sample_size` take their
/// whole neighborhood without consuming the stream. Each sample is returned
/// sorted.
pub fn sample_neighborhoods(g: &Graph, sample_size: usize, stream: &mut SampleStream) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(g.num_vertices());
    for i in 0..g.num_vertices() {
        let mut cand: Vec<usize> = g.neighbors(i).iter().copied().filter(|&j| j != i).collect();
        if cand.len() > sample_size {
            for t in 0..sample_size {
                let span = (cand.len() - t) as u64;
                let k = t + (stream.next_value()? as u64 % span) as usize;
                cand.swap(t, k);
            }
            cand.truncate(sample_size);
            cand.sort_unstable();
        }
        out.push(cand);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_csr;

    #[test]
    fn small_neighborhood_is_taken_whole() {
        let g = build_csr(&[(0, 1)], 2, true).unwrap();
        let mut s = SampleStream::from_values(vec![], false);
        let samples = sample_neighborhoods(&g, 25, &mut s).unwrap();
        assert_eq!(samples, vec![vec![1], vec![0]]);
    }

    #[test]
    fn exhaustion_and_cycling() {
        let edges: Vec<_> = (1..6).map(|v| (0, v)).collect();
        let g = build_csr(&edges, 6, true).unwrap();
        let mut s = SampleStream::from_values(vec![3], false);
        assert!(matches!(
            sample_neighborhoods(&g, 2, &mut s),
            Err(Error::SampleStreamExhausted(1))
        ));
        let mut s = SampleStream::from_values(vec![3, 1], true);
        let samples = sample_neighborhoods(&g, 2, &mut s).unwrap();
        assert_eq!(samples[0].len(), 2);
        assert!(samples[0].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn replay_is_deterministic() {
        let g = generate::power_law(100, 4, 3).unwrap();
        let a = sample_neighborhoods(&g, 3, &mut SampleStream::seeded(9)).unwrap();
        let b = sample_neighborhoods(&g, 3, &mut SampleStream::seeded(9)).unwrap();
        assert_eq!(a, b);
    }
}
