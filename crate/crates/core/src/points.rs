use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

/// A row-major set of points in R^d.
///
/// Used for sample sets, test sets and frequency sets alike. Appending keeps
/// earlier rows untouched, which is what nested sample sets rely on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "points need dimension >= 1");
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        assert!(dim >= 1, "points need dimension >= 1");
        Self {
            dim,
            data: Vec::with_capacity(dim * rows),
        }
    }

    /// Builds from a flat row-major buffer.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(crate::Error::InvalidArgument(format!(
                "flat buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut out = Self::with_capacity(dim, rows.len());
        for r in rows {
            out.push(r.as_ref())?;
        }
        Ok(out)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        self.data.extend_from_slice(x);
        Ok(())
    }

    pub fn extend(&mut self, other: &Points) -> Result<()> {
        check_dim(self.dim, other.dim)?;
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    /// The first `n` rows as a new set.
    pub fn prefix(&self, n: usize) -> Points {
        Points {
            dim: self.dim,
            data: self.data[..n * self.dim].to_vec(),
        }
    }

    /// Selects rows by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> Points {
        let mut out = Points::with_capacity(self.dim, idx.len());
        for &i in idx {
            out.data.extend_from_slice(self.row(i));
        }
        out
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Column `k` copied out.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.iter().map(|r| r[k]).collect()
    }
}
