//! File formats: whitespace edge lists, `GNNF` binary feature files (with a
//! plain-text fallback) and binary graph snapshots.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{build_csr, FeatureMatrix, Graph, VertexOrder};
use crate::error::{Error, Result};

const FEATURE_MAGIC: &[u8; 4] = b"GNNF";
const SNAPSHOT_MAGIC: &[u8; 4] = b"GNNG";
const SNAPSHOT_VERSION: u32 = 1;

/// Parses `u v` lines with 0-based IDs. Blank lines and lines starting with
/// `#` are ignored. When `num_vertices` is `None` it is one past the largest
/// ID seen.
pub fn parse_edge_list(reader: impl BufRead, num_vertices: Option<usize>, undirected: bool) -> Result<Graph> {
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split_whitespace();
        let mut next = || -> Result<usize> {
            it.next()
                .ok_or_else(|| Error::Format(format!("line {}: expected two vertex IDs", lineno + 1)))?
                .parse()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))
        };
        let u = next()?;
        let v = next()?;
        edges.push((u, v));
    }
    let n = num_vertices.unwrap_or_else(|| edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0));
    build_csr(&edges, n, undirected)
}

pub fn read_edge_list(path: &Path, num_vertices: Option<usize>, undirected: bool) -> Result<Graph> {
    parse_edge_list(BufReader::new(File::open(path)?), num_vertices, undirected)
}

pub fn write_edge_list(g: &Graph, mut w: impl Write) -> Result<()> {
    for (u, v) in g.edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

pub fn write_features_binary(f: &FeatureMatrix<f32>, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(FEATURE_MAGIC)?;
    w.write_u32::<LittleEndian>(to_u32(f.num_rows())?)?;
    w.write_u32::<LittleEndian>(to_u32(f.width())?)?;
    for i in 0..f.num_rows() {
        for &v in f.row(i).iter() {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_binary(mut r: impl Read) -> Result<FeatureMatrix<f32>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::Format("missing GNNF header".into()));
    }
    let rows = r.read_u32::<LittleEndian>()? as usize;
    let width = r.read_u32::<LittleEndian>()? as usize;
    let mut data = vec![0f32; rows * width];
    r.read_f32_into::<LittleEndian>(&mut data)
        .map_err(|e| Error::Format(format!("truncated feature payload: {e}")))?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after feature payload".into()));
    }
    FeatureMatrix::from_dense(rows, width, data)
}

/// One row per line, whitespace-separated values.
pub fn parse_features_text(reader: impl BufRead) -> Result<FeatureMatrix<f32>> {
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f32>().map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    FeatureMatrix::from_rows(&rows)
}

/// Reads a feature file, picking the binary format when the file starts
/// with the `GNNF` magic and the text format otherwise.
pub fn read_features(path: &Path) -> Result<FeatureMatrix<f32>> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(FEATURE_MAGIC) {
        read_features_binary(bytes.as_slice())
    } else {
        parse_features_text(bytes.as_slice())
    }
}

pub fn write_snapshot(g: &Graph, order: &VertexOrder, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_u32::<LittleEndian>(SNAPSHOT_VERSION)?;
    w.write_u8(g.is_undirected() as u8)?;
    w.write_u64::<LittleEndian>(g.num_vertices() as u64)?;
    w.write_u64::<LittleEndian>(g.num_arcs() as u64)?;
    for &o in g.offsets() {
        w.write_u64::<LittleEndian>(o as u64)?;
    }
    for &c in g.coords() {
        w.write_u32::<LittleEndian>(to_u32(c)?)?;
    }
    w.write_u64::<LittleEndian>(order.bin_boundaries().len() as u64)?;
    for &b in order.bin_boundaries() {
        w.write_u64::<LittleEndian>(b as u64)?;
    }
    for &v in order.order() {
        w.write_u32::<LittleEndian>(to_u32(v)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(mut r: impl Read) -> Result<(Graph, VertexOrder)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("missing GNNG header".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let undirected = r.read_u8()? != 0;
    let n = r.read_u64::<LittleEndian>()? as usize;
    let arcs = r.read_u64::<LittleEndian>()? as usize;
    let offsets = (0..=n)
        .map(|_| r.read_u64::<LittleEndian>().map(|x| x as usize))
        .collect::<std::io::Result<Vec<_>>>()?;
    let coords = (0..arcs)
        .map(|_| r.read_u32::<LittleEndian>().map(|x| x as usize))
        .collect::<std::io::Result<Vec<_>>>()?;
    let g = Graph::from_parts(n, offsets, coords, undirected)?;
    let nb = r.read_u64::<LittleEndian>()? as usize;
    let bins = (0..nb)
        .map(|_| r.read_u64::<LittleEndian>().map(|x| x as usize))
        .collect::<std::io::Result<Vec<_>>>()?;
    let order = (0..n)
        .map(|_| r.read_u32::<LittleEndian>().map(|x| x as usize))
        .collect::<std::io::Result<Vec<_>>>()?;
    let order = VertexOrder::new(order, bins);
    if !order.is_permutation() {
        return Err(Error::Format("snapshot order is not a permutation".into()));
    }
    Ok((g, order))
}

fn to_u32(x: usize) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::Format(format!("{x} does not fit in 32 bits")))
}
