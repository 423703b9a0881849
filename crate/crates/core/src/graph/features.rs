use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::rlc::{rlc_encode, RlcRow};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Rows<T> {
    Dense(Vec<T>),
    Rlc(Vec<RlcRow<T>>),
}

/// Per-vertex feature rows, stored dense or run-length compressed, with the
/// nonzero count of every row kept alongside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix<T> {
    num_rows: usize,
    width: usize,
    rows: Rows<T>,
    row_nnz: Vec<usize>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn zeros(num_rows: usize, width: usize) -> Self {
        Self {
            num_rows,
            width,
            rows: Rows::Dense(vec![T::zero(); num_rows * width]),
            row_nnz: vec![0; num_rows],
        }
    }

    /// Row-major dense data.
    pub fn from_dense(num_rows: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != num_rows * width {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {num_rows} rows of width {width}",
                data.len()
            )));
        }
        let row_nnz = if width == 0 {
            vec![0; num_rows]
        } else {
            data.chunks(width)
                .map(|r| r.iter().filter(|v| **v != T::zero()).count())
                .collect()
        };
        Ok(Self {
            num_rows,
            width,
            rows: Rows::Dense(data),
            row_nnz,
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::ShapeMismatch("ragged feature rows".into()));
        }
        Self::from_dense(rows.len(), width, rows.concat())
    }

    pub fn from_matrix(m: &Matrix<T>) -> Self {
        Self::from_dense(m.rows(), m.cols(), m.data().to_vec()).expect("matrix shape is consistent")
    }

    pub fn from_rlc(width: usize, rows: Vec<RlcRow<T>>) -> Result<Self> {
        for r in &rows {
            if r.width() != width {
                return Err(Error::MalformedRlc(format!(
                    "row covers {} elements, expected {width}",
                    r.width()
                )));
            }
            if r.runs.iter().any(|&(_, v)| v == T::zero()) {
                return Err(Error::MalformedRlc("stored value is zero".into()));
            }
        }
        let row_nnz = rows.iter().map(RlcRow::nnz).collect();
        Ok(Self {
            num_rows: rows.len(),
            width,
            rows: Rows::Rlc(rows),
            row_nnz,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row_nnz(&self) -> &[usize] {
        &self.row_nnz
    }

    pub fn nnz(&self) -> usize {
        self.row_nnz.iter().sum()
    }

    pub fn is_rlc(&self) -> bool {
        matches!(self.rows, Rows::Rlc(_))
    }

    /// Decoded row `i`.
    pub fn row(&self, i: usize) -> Cow<'_, [T]> {
        match &self.rows {
            Rows::Dense(d) => Cow::Borrowed(&d[i * self.width..(i + 1) * self.width]),
            Rows::Rlc(r) => Cow::Owned(r[i].decode().expect("rows validated at construction")),
        }
    }

    /// Nonzero entries of row `i` as `(column, value)`.
    pub fn row_nonzeros(&self, i: usize) -> Vec<(usize, T)> {
        match &self.rows {
            Rows::Dense(_) => self
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != T::zero())
                .map(|(c, v)| (c, *v))
                .collect(),
            Rows::Rlc(r) => r[i].nonzeros().collect(),
        }
    }

    /// Bytes needed to move row `i` to or from DRAM in its current storage
    /// form, with `value_bytes` per stored value.
    pub fn row_bytes(&self, i: usize, value_bytes: usize) -> usize {
        match &self.rows {
            Rows::Dense(_) => self.width * value_bytes,
            Rows::Rlc(r) => r[i].encoded_bytes(value_bytes),
        }
    }

    pub fn total_bytes(&self, value_bytes: usize) -> usize {
        (0..self.num_rows).map(|i| self.row_bytes(i, value_bytes)).sum()
    }

    pub fn to_rlc(&self) -> Self {
        let rows = (0..self.num_rows).map(|i| rlc_encode(&self.row(i))).collect();
        Self {
            num_rows: self.num_rows,
            width: self.width,
            rows: Rows::Rlc(rows),
            row_nnz: self.row_nnz.clone(),
        }
    }

    pub fn to_dense(&self) -> Self {
        let mut data = Vec::with_capacity(self.num_rows * self.width);
        for i in 0..self.num_rows {
            data.extend_from_slice(&self.row(i));
        }
        Self {
            num_rows: self.num_rows,
            width: self.width,
            rows: Rows::Dense(data),
            row_nnz: self.row_nnz.clone(),
        }
    }

    pub fn to_matrix(&self) -> Matrix<T> {
        let mut data = Vec::with_capacity(self.num_rows * self.width);
        for i in 0..self.num_rows {
            data.extend_from_slice(&self.row(i));
        }
        Matrix::from_vec(self.num_rows, self.width, data).expect("shape is consistent")
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMatrix<U> {
        let rows = match &self.rows {
            Rows::Dense(d) => Rows::Dense(d.iter().map(|v| v.cast()).collect()),
            Rows::Rlc(r) => Rows::Rlc(r.iter().map(RlcRow::cast).collect()),
        };
        FeatureMatrix {
            num_rows: self.num_rows,
            width: self.width,
            rows,
            row_nnz: self.row_nnz.clone(),
        }
    }

    /// Rows reordered so that row `k` of the result is row `perm[k]`.
    pub fn gather(&self, perm: &[usize]) -> Self {
        let rows: Vec<Vec<T>> = perm.iter().map(|&i| self.row(i).into_owned()).collect();
        let mut out = Self::from_dense(perm.len(), self.width, rows.concat()).expect("consistent");
        if self.is_rlc() {
            out = out.to_rlc();
        }
        out
    }

    pub fn max_abs(&self) -> T {
        (0..self.num_rows)
            .flat_map(|i| self.row(i).into_owned())
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Largest elementwise difference divided by the largest magnitude in
/// `reference` (infinity-norm relative error). Both matrices must have the
/// same shape.
pub fn relative_error<A: Scalar, B: Scalar>(candidate: &FeatureMatrix<A>, reference: &FeatureMatrix<B>) -> f64 {
    assert_eq!(candidate.num_rows(), reference.num_rows());
    assert_eq!(candidate.width(), reference.width());
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..reference.num_rows() {
        let a = candidate.row(i);
        let b = reference.row(i);
        for (x, y) in a.iter().zip(b.iter()) {
            diff = diff.max((x.as_f64() - y.as_f64()).abs());
            scale = scale.max(y.as_f64().abs());
        }
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
