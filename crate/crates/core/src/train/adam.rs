use super::GradientSet;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Adam moments congruent to the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: ModelParams,
    pub second: ModelParams,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zero moments, beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(params: &ModelParams) -> Self {
        Self {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

fn congruent(a: &ModelParams, b: &ModelParams) -> bool {
    let (ta, tb) = (a.tensors(), b.tensors());
    ta.len() == tb.len()
        && ta
            .iter()
            .zip(&tb)
            .all(|((na, xa), (nb, xb))| na == nb && xa.shape() == xb.shape())
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut ModelParams,
    state: &mut AdamState,
    grads: &GradientSet,
    learning_rate: f64,
) -> Result<()> {
    if !congruent(params, &grads.0) || !congruent(params, &state.first) {
        return Err(Error::Config("Adam state / gradients do not match parameter shapes".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    let g_all = grads.0.tensors();
    let m_all = state.first.tensors_mut();
    let v_all = state.second.tensors_mut();
    for ((((name, mut p), (_, mut m)), (_, mut v)), (_, g)) in
        params.tensors_mut().into_iter().zip(m_all).zip(v_all).zip(g_all)
    {
        ndarray::Zip::from(&mut p)
            .and(&mut m)
            .and(&mut v)
            .and(&g)
            .for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence(format!("non-finite value in {name} after Adam step")));
        }
    }
    Ok(())
}
