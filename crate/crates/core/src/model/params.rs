use ndarray::{Array1, Array2, ArrayView1, ArrayViewD, ArrayViewMutD};
use rand::Rng;

use super::HyperParams;
use crate::error::{Error, Result};

/// A fully connected layer `z = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Option<Array1<f64>>,
}

impl Dense {
    pub fn zeros(out_dim: usize, in_dim: usize, bias: bool) -> Self {
        Self {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: bias.then(|| Array1::zeros(out_dim)),
        }
    }

    /// Glorot-uniform weights, zero bias.
    fn glorot<R: Rng>(out_dim: usize, in_dim: usize, bias: bool, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Self {
            weight: Array2::from_shape_simple_fn((out_dim, in_dim), || {
                rng.random_range(-limit..limit)
            }),
            bias: bias.then(|| Array1::zeros(out_dim)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    /// Pre-activation `W x + b`.
    pub fn pre_activation(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut z = self.weight.dot(&x);
        if let Some(b) = &self.bias {
            z += b;
        }
        z
    }
}

/// All trainable tensors.
///
/// Free latents are stored one row per entity: `user_latent` is M x L (row
/// a is p_a), `item_latent` is N x L (row i is q_i).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub user_latent: Array2<f64>,
    pub item_latent: Array2<f64>,
    /// F: D x (L + d2). Absent in featureless mode.
    pub item_transform: Option<Dense>,
    /// W0: D x (d1 + L). Absent in featureless mode.
    pub user_transform: Option<Dense>,
    /// W^k: D x 2D, one per diffusion layer.
    pub layers: Vec<Dense>,
}

impl ModelParams {
    /// All-zero parameters with the shapes implied by `hypers` and the data.
    pub fn zeros(
        hypers: &HyperParams,
        num_users: usize,
        num_items: usize,
        user_feature_dim: usize,
        item_feature_dim: usize,
    ) -> Self {
        let (d, l) = (hypers.embed_dim, hypers.latent_dim);
        let featured = !hypers.featureless();
        Self {
            user_latent: Array2::zeros((num_users, l)),
            item_latent: Array2::zeros((num_items, l)),
            item_transform: featured.then(|| Dense::zeros(d, l + item_feature_dim, hypers.use_bias)),
            user_transform: featured.then(|| Dense::zeros(d, user_feature_dim + l, hypers.use_bias)),
            layers: (0..hypers.depth)
                .map(|_| Dense::zeros(d, 2 * d, hypers.use_bias))
                .collect(),
        }
    }

    /// Free latents ~ U(-0.01, 0.01), transforms Glorot-uniform, biases zero.
    /// User latents stay zero when `hypers.user_free_latent` is off.
    pub fn init<R: Rng>(
        hypers: &HyperParams,
        num_users: usize,
        num_items: usize,
        user_feature_dim: usize,
        item_feature_dim: usize,
        rng: &mut R,
    ) -> Self {
        let (d, l) = (hypers.embed_dim, hypers.latent_dim);
        let featured = !hypers.featureless();
        let mut small = |rows, cols| {
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-0.01..0.01))
        };
        let user_latent = if hypers.user_free_latent {
            small(num_users, l)
        } else {
            Array2::zeros((num_users, l))
        };
        let item_latent = small(num_items, l);
        let item_transform =
            featured.then(|| Dense::glorot(d, l + item_feature_dim, hypers.use_bias, rng));
        let user_transform =
            featured.then(|| Dense::glorot(d, user_feature_dim + l, hypers.use_bias, rng));
        let layers = (0..hypers.depth)
            .map(|_| Dense::glorot(d, 2 * d, hypers.use_bias, rng))
            .collect();
        Self {
            user_latent,
            item_latent,
            item_transform,
            user_transform,
            layers,
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_latent.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.item_latent.nrows()
    }

    /// d1, or 0 in featureless mode.
    pub fn user_feature_dim(&self) -> usize {
        self.user_transform
            .as_ref()
            .map_or(0, |t| t.in_dim() - self.user_latent.ncols())
    }

    /// d2, or 0 in featureless mode.
    pub fn item_feature_dim(&self) -> usize {
        self.item_transform
            .as_ref()
            .map_or(0, |t| t.in_dim() - self.item_latent.ncols())
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, mut t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Named views of every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![
            ("user_latent".to_string(), self.user_latent.view().into_dyn()),
            ("item_latent".to_string(), self.item_latent.view().into_dyn()),
        ];
        fn push_dense<'a>(name: &str, dense: &'a Dense, out: &mut Vec<(String, ArrayViewD<'a, f64>)>) {
            out.push((format!("{name}.weight"), dense.weight.view().into_dyn()));
            if let Some(b) = &dense.bias {
                out.push((format!("{name}.bias"), b.view().into_dyn()));
            }
        }
        if let Some(t) = &self.item_transform {
            push_dense("item_transform", t, &mut out);
        }
        if let Some(t) = &self.user_transform {
            push_dense("user_transform", t, &mut out);
        }
        for (k, layer) in self.layers.iter().enumerate() {
            push_dense(&format!("layer{k}"), layer, &mut out);
        }
        out
    }

    /// Mutable counterpart of [`tensors`](Self::tensors), same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = vec![
            ("user_latent".to_string(), self.user_latent.view_mut().into_dyn()),
            ("item_latent".to_string(), self.item_latent.view_mut().into_dyn()),
        ];
        fn push_dense<'a>(
            name: &str,
            dense: &'a mut Dense,
            out: &mut Vec<(String, ArrayViewMutD<'a, f64>)>,
        ) {
            out.push((format!("{name}.weight"), dense.weight.view_mut().into_dyn()));
            if let Some(b) = &mut dense.bias {
                out.push((format!("{name}.bias"), b.view_mut().into_dyn()));
            }
        }
        if let Some(t) = &mut self.item_transform {
            push_dense("item_transform", t, &mut out);
        }
        if let Some(t) = &mut self.user_transform {
            push_dense("user_transform", t, &mut out);
        }
        for (k, layer) in self.layers.iter_mut().enumerate() {
            push_dense(&format!("layer{k}"), layer, &mut out);
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Parameters the optimizer actually updates.
    pub fn num_trainable(&self, hypers: &HyperParams) -> usize {
        let frozen = if hypers.user_free_latent {
            0
        } else {
            self.user_latent.len()
        };
        self.num_parameters() - frozen
    }

    /// Flattened copy of every tensor, in [`tensors`](Self::tensors) order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|(_, t)| t.iter().copied().collect::<Vec<_>>())
            .collect()
    }

    /// Overwrites every tensor from a flat slice produced by [`to_flat`](Self::to_flat).
    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for (_, mut t) in self.tensors_mut() {
            let n = t.len();
            for (dst, src) in t.iter_mut().zip(&flat[offset..offset + n]) {
                *dst = *src;
            }
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat length does not match parameters");
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// ‖P‖² + ‖Q‖².
    pub fn free_latent_sq_norm(&self) -> f64 {
        self.user_latent.iter().map(|v| v * v).sum::<f64>()
            + self.item_latent.iter().map(|v| v * v).sum::<f64>()
    }

    /// Checks every tensor against the shapes `hypers` implies.
    pub fn check_shapes(&self, hypers: &HyperParams) -> Result<()> {
        let (d, l) = (hypers.embed_dim, hypers.latent_dim);
        let shape_err = |context, expected, actual| Error::Shape {
            context,
            expected,
            actual,
        };
        if self.user_latent.ncols() != l {
            return Err(shape_err("user_latent cols", l, self.user_latent.ncols()));
        }
        if self.item_latent.ncols() != l {
            return Err(shape_err("item_latent cols", l, self.item_latent.ncols()));
        }
        if self.layers.len() != hypers.depth {
            return Err(shape_err("layer count", hypers.depth, self.layers.len()));
        }
        let check_dense = |ctx: &'static str, dense: &Dense, in_dim: Option<usize>| -> Result<()> {
            if dense.out_dim() != d {
                return Err(shape_err(ctx, d, dense.out_dim()));
            }
            if let Some(i) = in_dim {
                if dense.in_dim() != i {
                    return Err(shape_err(ctx, i, dense.in_dim()));
                }
            }
            match &dense.bias {
                Some(b) if !hypers.use_bias => Err(shape_err(ctx, 0, b.len())),
                None if hypers.use_bias => Err(shape_err(ctx, d, 0)),
                Some(b) if b.len() != d => Err(shape_err(ctx, d, b.len())),
                _ => Ok(()),
            }
        };
        for layer in &self.layers {
            check_dense("diffusion layer", layer, Some(2 * d))?;
        }
        match (hypers.featureless(), &self.item_transform, &self.user_transform) {
            (true, None, None) => Ok(()),
            (false, Some(f), Some(w0)) => {
                if f.in_dim() < l {
                    return Err(shape_err("item_transform in_dim", l, f.in_dim()));
                }
                if w0.in_dim() < l {
                    return Err(shape_err("user_transform in_dim", l, w0.in_dim()));
                }
                check_dense("item_transform", f, None)?;
                check_dense("user_transform", w0, None)
            }
            _ => Err(Error::Config(format!(
                "transform presence does not match feature mode {}",
                hypers.feature_mode
            ))),
        }
    }
}
