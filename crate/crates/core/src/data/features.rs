use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Dense per-entity attribute vectors (X for users, Y for items), one row
/// per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    rows: Array2<f64>,
}

impl FeatureTable {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if let Some((idx, v)) = rows.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let dim = rows.ncols().max(1);
            return Err(Error::Data(format!(
                "non-finite feature value {v} for entity {} at column {}",
                idx / dim,
                idx % dim
            )));
        }
        Ok(Self { rows })
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn row(&self, id: usize) -> ArrayView1<'_, f64> {
        self.rows.row(id)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.rows
    }

    /// Keeps rows listed in `keep`, in that order.
    pub(crate) fn select(&self, keep: &[usize]) -> Self {
        Self {
            rows: self.rows.select(ndarray::Axis(0), keep),
        }
    }
}
