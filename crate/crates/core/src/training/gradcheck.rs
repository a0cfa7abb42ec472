//! Central finite-difference verification of [`backward`](super::backward).

use crate::model::{LstmClassifier, ParamId};
use crate::numerics::{Real, SeededRng};
use crate::textprep::EncodedSequence;

use super::{backward, example_loss, TrainError};

/// Pass threshold on the worst relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Floor on the relative-error denominator.
const DENOM_FLOOR: f64 = 1e-8;
/// Minimum sample size when a tensor is too large to check exhaustively.
pub const MIN_SAMPLED_COORDS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Tensors larger than this are checked on a seeded sample of
    /// `max(limit, MIN_SAMPLED_COORDS)` coordinates; `None` checks every entry.
    pub max_coords_per_tensor: Option<usize>,
    pub seed: u64,
    /// Debug hook: doubles the analytic gradient of this tensor before
    /// comparing, which a working checker must flag.
    pub corrupt: Option<ParamId>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_coords_per_tensor: None,
            seed: 0,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Worst error per tensor, in [`ParamId::ALL`] order.
    pub per_tensor: Vec<(ParamId, f64)>,
    pub coordinates_checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= GRADCHECK_TOLERANCE
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOM_FLOOR)
}

/// Compares analytic gradients of one example against
/// `(L(theta + eps) - L(theta - eps)) / (2 eps)`.
///
/// Requires 64-bit parameters.
pub fn grad_check<T: Real>(
    model: &LstmClassifier<T>,
    seq: &EncodedSequence,
    label: usize,
    options: &GradCheckOptions,
) -> Result<GradCheckReport, TrainError> {
    if T::BITS != 64 {
        return Err(TrainError::PrecisionRequired { bits: T::BITS });
    }
    if !(options.epsilon > 0.0) || !options.epsilon.is_finite() {
        return Err(TrainError::InvalidConfig(format!(
            "finite-difference epsilon must be positive, got {}",
            options.epsilon
        )));
    }
    let pass = model.forward(seq)?;
    let mut analytic = backward(model, &pass, seq, label)?;
    if let Some(id) = options.corrupt {
        analytic
            .tensor_mut(id)
            .values_mut()
            .iter_mut()
            .for_each(|v| *v = *v + *v);
    }

    let mut rng = SeededRng::new(options.seed);
    let mut probe = model.clone();
    let loss_at = |probe: &LstmClassifier<T>| -> Result<f64, TrainError> {
        let loss = example_loss(probe, seq, label)?.to_f64();
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss);
        }
        Ok(loss)
    };
    let eps = options.epsilon;
    let mut per_tensor = Vec::with_capacity(ParamId::ALL.len());
    let mut checked = 0;
    for id in ParamId::ALL {
        let len = model.tensor(id).len();
        let coords: Vec<usize> = match options.max_coords_per_tensor {
            Some(limit) if len > limit.max(MIN_SAMPLED_COORDS) => {
                let mut all: Vec<usize> = (0..len).collect();
                rng.shuffle(&mut all);
                all.truncate(limit.max(MIN_SAMPLED_COORDS));
                all.sort_unstable();
                all
            }
            _ => (0..len).collect(),
        };
        let mut worst: f64 = 0.0;
        for &k in &coords {
            let original = probe.tensor(id).values()[k];
            probe.tensor_mut(id).values_mut()[k] = T::from_f64(original.to_f64() + eps);
            let plus = loss_at(&probe)?;
            probe.tensor_mut(id).values_mut()[k] = T::from_f64(original.to_f64() - eps);
            let minus = loss_at(&probe)?;
            probe.tensor_mut(id).values_mut()[k] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.tensor(id).values()[k].to_f64();
            worst = worst.max(relative_error(a, numeric));
        }
        checked += coords.len();
        per_tensor.push((id, worst));
    }
    let max_relative_error = per_tensor.iter().map(|&(_, e)| e).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_relative_error,
        per_tensor,
        coordinates_checked: checked,
    })
}
