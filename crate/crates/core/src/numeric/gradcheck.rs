//! Central finite-difference checks of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::tape::{Gradients, ParamId, ParamSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Denominator floor in the relative error.
    pub floor: f64,
    /// Coordinates sampled per parameter tensor (all of them if the tensor is smaller).
    pub coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            floor: 1e-8,
            coords_per_tensor: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checks: Vec<CoordinateCheck>,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&CoordinateCheck> {
        self.checks
            .iter()
            .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `loss_and_grad`'s analytic gradient against central differences
/// on sampled coordinates of every parameter tensor.
pub fn gradient_check<F>(
    params: &ParamSet,
    mut loss_and_grad: F,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet) -> Result<(f64, Gradients)>,
{
    let (loss, analytic) = loss_and_grad(params)?;
    if !loss.is_finite() {
        return Err(Error::Evaluation(format!("non-finite loss {loss}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = params.clone();
    let mut checks = Vec::new();
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        let n = params.get(id).len();
        let mut coords: Vec<usize> = if n <= opts.coords_per_tensor {
            (0..n).collect()
        } else {
            sample(&mut rng, n, opts.coords_per_tensor).into_vec()
        };
        coords.sort_unstable();
        for k in coords {
            let original = params.get(id).data()[k];
            probe.get_mut(id).data_mut()[k] = original + opts.step;
            let (plus, _) = loss_and_grad(&probe)?;
            probe.get_mut(id).data_mut()[k] = original - opts.step;
            let (minus, _) = loss_and_grad(&probe)?;
            probe.get_mut(id).data_mut()[k] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Evaluation(format!(
                    "non-finite loss while probing {}[{k}]",
                    params.name(id)
                )));
            }
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic.get(id).data()[k];
            checks.push(CoordinateCheck {
                param: params.name(id).to_string(),
                index: k,
                analytic: a,
                numeric,
                relative_error: relative_error(a, numeric, opts.floor),
            });
        }
    }
    let max_relative_error = checks
        .iter()
        .map(|c| c.relative_error)
        .fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_relative_error,
        checks,
    })
}
