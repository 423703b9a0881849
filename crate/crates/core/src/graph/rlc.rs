use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Run-length compressed feature row: each stored nonzero value is preceded
/// by the count of zeros before it, and the zeros after the last value are
/// kept as an explicit count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlcRow<T> {
    pub runs: Vec<(usize, T)>,
    pub trailing_zeros: usize,
}

/// Bytes used for each stored zero-run length.
pub const RUN_LENGTH_BYTES: usize = 2;

pub fn rlc_encode<T: Scalar>(row: &[T]) -> RlcRow<T> {
    let mut runs = Vec::new();
    let mut zeros = 0;
    for &v in row {
        if v == T::zero() {
            zeros += 1;
        } else {
            runs.push((zeros, v));
            zeros = 0;
        }
    }
    RlcRow {
        runs,
        trailing_zeros: zeros,
    }
}

pub fn rlc_decode<T: Scalar>(r: &RlcRow<T>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(r.width());
    for &(z, v) in &r.runs {
        if v == T::zero() {
            return Err(Error::MalformedRlc("stored value is zero".into()));
        }
        out.extend(std::iter::repeat_n(T::zero(), z));
        out.push(v);
    }
    out.extend(std::iter::repeat_n(T::zero(), r.trailing_zeros));
    Ok(out)
}

impl<T: Scalar> RlcRow<T> {
    pub fn encode(row: &[T]) -> Self {
        rlc_encode(row)
    }

    pub fn decode(&self) -> Result<Vec<T>> {
        rlc_decode(self)
    }

    /// Decodes and checks that the run sums add up to `width`.
    pub fn decode_exact(&self, width: usize) -> Result<Vec<T>> {
        if self.width() != width {
            return Err(Error::MalformedRlc(format!(
                "runs cover {} elements, expected {width}",
                self.width()
            )));
        }
        self.decode()
    }

    /// Decoded length.
    pub fn width(&self) -> usize {
        self.runs.iter().map(|(z, _)| z + 1).sum::<usize>() + self.trailing_zeros
    }

    pub fn nnz(&self) -> usize {
        self.runs.len()
    }

    /// Encoded size: one run length plus one value per nonzero, plus the
    /// trailing-zero count.
    pub fn encoded_bytes(&self, value_bytes: usize) -> usize {
        self.runs.len() * (RUN_LENGTH_BYTES + value_bytes) + RUN_LENGTH_BYTES
    }

    /// Nonzeros with their column index.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        let mut col = 0;
        self.runs.iter().map(move |&(z, v)| {
            col += z;
            let c = col;
            col += 1;
            (c, v)
        })
    }

    pub fn cast<U: Scalar>(&self) -> RlcRow<U> {
        RlcRow {
            runs: self.runs.iter().map(|&(z, v)| (z, v.cast())).collect(),
            trailing_zeros: self.trailing_zeros,
        }
    }
}
