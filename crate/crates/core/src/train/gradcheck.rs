//! Central-difference verification of analytic gradients.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backward::loss_and_gradients;
use super::loss::{batch_ids, batch_loss};
use super::PairwiseSample;
use crate::data::DatasetBundle;
use crate::error::Result;
use crate::model::{ForwardPass, HyperParams, ModelParams};

/// Gradients smaller than this are compared absolutely: central differences
/// carry roughly `eps * |loss| / h` round-off, which would otherwise dominate
/// the ratio for near-zero coordinates.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub checked: usize,
    pub tolerance: f64,
    /// `max_rel_error < tolerance`.
    pub passed: bool,
    /// Times the evaluation point was jittered away from a ReLU/max kink.
    pub jitters: usize,
}

/// Compares `analytic` against central differences of `f` at `x` over the
/// coordinates in `coords`.
pub fn check_gradient<F>(
    mut f: F,
    x: &[f64],
    analytic: &[f64],
    coords: &[usize],
    h: f64,
    tolerance: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: coords.first().copied().unwrap_or(0),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        checked: coords.len(),
        tolerance,
        passed: false,
        jitters: 0,
    };
    for &c in coords {
        probe[c] = x[c] + h;
        let up = f(&probe);
        probe[c] = x[c] - h;
        let down = f(&probe);
        probe[c] = x[c];
        let numeric = (up - down) / (2.0 * h);
        let err = relative_error(analytic[c], numeric);
        if err > report.max_rel_error || err.is_nan() {
            report.max_rel_error = err;
            report.worst_index = c;
            report.worst_analytic = analytic[c];
            report.worst_numeric = numeric;
        }
    }
    report.passed = report.max_rel_error < tolerance;
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Check a random subset when there are more coordinates than this.
    pub max_coords: usize,
    /// A point closer than this to a ReLU or max switch is jittered.
    pub kink_margin: f64,
    pub max_jitters: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            max_coords: 4000,
            kink_margin: 1e-3,
            max_jitters: 10,
            seed: 0,
        }
    }
}

/// Checks [`loss_and_gradients`] against central differences of
/// [`batch_loss`]. Frozen user latents are excluded from the comparison.
pub fn finite_difference_check(
    params: &ModelParams,
    hypers: &HyperParams,
    bundle: &DatasetBundle,
    batch: &[PairwiseSample],
    lambda: f64,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut point = params.clone();
    let mut jitters = 0;
    if !batch.is_empty() {
        let (users, items) = batch_ids(batch);
        loop {
            let pass = ForwardPass::run(&point, hypers, bundle, &users, &items)?;
            let margin = pass.kink_margin(&bundle.social, hypers.aggregator);
            if margin >= options.kink_margin || jitters >= options.max_jitters {
                break;
            }
            jitters += 1;
            for (name, mut t) in point.tensors_mut() {
                if name == "user_latent" && !hypers.user_free_latent {
                    continue;
                }
                t.mapv_inplace(|v| v + rng.random_range(-0.05..0.05));
            }
        }
    }

    let (_, grads) = loss_and_gradients(&point, hypers, bundle, batch, lambda)?;
    let analytic = grads.to_flat();
    let x = point.to_flat();

    let frozen = if hypers.user_free_latent {
        0
    } else {
        point.user_latent.len()
    };
    let eligible: Vec<usize> = (frozen..x.len()).collect();
    let coords: Vec<usize> = if eligible.len() > options.max_coords {
        let mut picked: Vec<usize> = index::sample(&mut rng, eligible.len(), options.max_coords)
            .into_iter()
            .map(|k| eligible[k])
            .collect();
        picked.sort_unstable();
        picked
    } else {
        eligible
    };

    let mut scratch = point.clone();
    let f = |flat: &[f64]| {
        scratch.set_flat(flat);
        batch_loss(&scratch, hypers, bundle, batch, lambda).expect("validated above")
    };
    let mut report = check_gradient(
        f,
        &x,
        &analytic,
        &coords,
        options.step,
        options.tolerance,
    );
    report.jitters = jitters;
    Ok(report)
}
