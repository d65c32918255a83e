//! Single-vector building blocks of the forward pass.

use ndarray::{concatenate, Array1, Array2, ArrayView1, Axis};

use super::{Aggregator, Dense, ModelParams};
use crate::error::{Error, Result};

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub(crate) fn relu_vec(mut z: Array1<f64>) -> Array1<f64> {
    z.mapv_inplace(relu);
    z
}

pub(crate) fn concat(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    concatenate(Axis(0), &[a, b]).expect("1-d concatenation")
}

fn expect_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape {
            context,
            expected,
            actual,
        })
    }
}

/// `ReLU(F [q_i, y_i] + b_F)` with features, `q_i` unchanged without.
pub fn item_embedding(
    params: &ModelParams,
    q_i: ArrayView1<'_, f64>,
    y_i: Option<ArrayView1<'_, f64>>,
) -> Result<Array1<f64>> {
    expect_len("item latent", params.item_latent.ncols(), q_i.len())?;
    match (&params.item_transform, y_i) {
        (None, None) => Ok(q_i.to_owned()),
        (Some(f), Some(y)) => {
            expect_len("item features", params.item_feature_dim(), y.len())?;
            Ok(relu_vec(f.pre_activation(concat(q_i, y).view())))
        }
        (None, Some(y)) => Err(Error::Shape {
            context: "item features (featureless model)",
            expected: 0,
            actual: y.len(),
        }),
        (Some(_), None) => Err(Error::Shape {
            context: "item features",
            expected: params.item_feature_dim(),
            actual: 0,
        }),
    }
}

/// Layer-0 user vector: `ReLU(W0 [x_a, p_a] + b_0)` with features, `p_a`
/// unchanged without.
pub fn user_base_embedding(
    params: &ModelParams,
    x_a: Option<ArrayView1<'_, f64>>,
    p_a: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    expect_len("user latent", params.user_latent.ncols(), p_a.len())?;
    match (&params.user_transform, x_a) {
        (None, None) => Ok(p_a.to_owned()),
        (Some(w0), Some(x)) => {
            expect_len("user features", params.user_feature_dim(), x.len())?;
            Ok(relu_vec(w0.pre_activation(concat(x, p_a).view())))
        }
        (None, Some(x)) => Err(Error::Shape {
            context: "user features (featureless model)",
            expected: 0,
            actual: x.len(),
        }),
        (Some(_), None) => Err(Error::Shape {
            context: "user features",
            expected: params.user_feature_dim(),
            actual: 0,
        }),
    }
}

/// Componentwise mean or max over the rows; zero vector for no rows.
pub(crate) fn aggregate_rows<'a>(
    dim: usize,
    rows: impl IntoIterator<Item = ArrayView1<'a, f64>>,
    aggregator: Aggregator,
) -> Array1<f64> {
    let mut acc: Option<Array1<f64>> = None;
    let mut count = 0usize;
    for row in rows {
        count += 1;
        match &mut acc {
            None => acc = Some(row.to_owned()),
            Some(a) => match aggregator {
                Aggregator::Average => *a += &row,
                Aggregator::Max => a.zip_mut_with(&row, |x, &y| {
                    if y > *x {
                        *x = y
                    }
                }),
            },
        }
    }
    match (acc, aggregator) {
        (None, _) => Array1::zeros(dim),
        (Some(sum), Aggregator::Average) => sum / count as f64,
        (Some(max), Aggregator::Max) => max,
    }
}

/// AGG over the neighbours' rows of `layer` (one row per user).
pub fn aggregate_neighbors(
    layer: &Array2<f64>,
    neighbors: &[usize],
    aggregator: Aggregator,
) -> Result<Array1<f64>> {
    if let Some(&bad) = neighbors.iter().find(|&&b| b >= layer.nrows()) {
        return Err(Error::UnknownId {
            kind: "user",
            id: bad,
            count: layer.nrows(),
        });
    }
    Ok(aggregate_rows(
        layer.ncols(),
        neighbors.iter().map(|&b| layer.row(b)),
        aggregator,
    ))
}

pub(crate) fn convolve_pre(layer: &Dense, h_agg: ArrayView1<'_, f64>, h_a: ArrayView1<'_, f64>) -> Array1<f64> {
    layer.pre_activation(concat(h_agg, h_a).view())
}

/// `ReLU(W^k [h_agg, h_a] + b_k)`.
pub fn convolve_layer(
    params: &ModelParams,
    k: usize,
    h_agg: ArrayView1<'_, f64>,
    h_a: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    let layer = params.layers.get(k).ok_or(Error::UnknownId {
        kind: "layer",
        id: k,
        count: params.layers.len(),
    })?;
    let d = layer.out_dim();
    expect_len("aggregated embedding", d, h_agg.len())?;
    expect_len("user embedding", d, h_a.len())?;
    Ok(relu_vec(convolve_pre(layer, h_agg, h_a)))
}

/// Inner product score.
pub fn predict(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
    expect_len("score operands", u.len(), v.len())?;
    Ok(u.dot(&v))
}
