use crate::model::{LstmClassifier, ParamId};
use crate::numerics::{Matrix, Real};

use super::{Gradients, TrainError};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
pub fn clip_gradients<T: Real>(
    mut grads: Gradients<T>,
    max_norm: f64,
) -> Result<Gradients<T>, TrainError> {
    if !(max_norm > 0.0) {
        return Err(TrainError::InvalidConfig(format!(
            "clip norm must be positive, got {max_norm}"
        )));
    }
    if !grads.is_finite() {
        return Err(TrainError::NonFiniteGradient);
    }
    let norm = grads.global_norm().to_f64();
    if norm > max_norm {
        grads.scale_in_place(T::from_f64(max_norm / norm));
    }
    Ok(grads)
}

/// First and second moment estimates for a list of tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Matrix<T>>,
    pub v: Vec<Matrix<T>>,
    /// Number of updates applied so far.
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        Self {
            m: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }

    /// Moments for every tensor of `model`, in [`ParamId::ALL`] order.
    pub fn for_model(model: &LstmClassifier<T>) -> Self {
        let shapes: Vec<_> = ParamId::ALL
            .iter()
            .map(|&id| model.tensor(id).shape())
            .collect();
        Self::new(&shapes)
    }

    /// One bias-corrected update over paired parameter and gradient tensors.
    pub fn step(
        &mut self,
        params: &mut [&mut Matrix<T>],
        grads: &[&Matrix<T>],
        lr: f64,
    ) -> Result<(), TrainError> {
        if !(lr > 0.0) {
            return Err(TrainError::InvalidConfig(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TrainError::InvalidConfig(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(TrainError::InvalidConfig(format!(
                    "shape mismatch: param {:?}, grad {:?}, moments {:?}",
                    p.shape(),
                    g.shape(),
                    m.shape()
                )));
            }
        }
        self.t += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one = T::one();
        let correction1 = T::from_f64(1.0 - self.beta1.powi(self.t as i32));
        let correction2 = T::from_f64(1.0 - self.beta2.powi(self.t as i32));
        let lr = T::from_f64(lr);
        let eps = T::from_f64(self.epsilon);
        for (slot, (param, grad)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.m[slot].values_mut();
            let v = self.v[slot].values_mut();
            for (((p, &g), mk), vk) in param
                .values_mut()
                .iter_mut()
                .zip(grad.values())
                .zip(m)
                .zip(v)
            {
                *mk = b1 * *mk + (one - b1) * g;
                *vk = b2 * *vk + (one - b2) * g * g;
                let m_hat = *mk / correction1;
                let v_hat = *vk / correction2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            }
            if !param.is_finite() {
                return Err(TrainError::NonFiniteParameters);
            }
        }
        Ok(())
    }
}

/// Adam update of every model tensor; the PAD embedding row is re-zeroed.
pub fn adam_update<T: Real>(
    model: &mut LstmClassifier<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<(), TrainError> {
    let LstmClassifier {
        embedding,
        lstm,
        head,
        ..
    } = model;
    let mut params: [&mut Matrix<T>; 11] = [
        &mut embedding.table,
        &mut lstm.w_i,
        &mut lstm.w_f,
        &mut lstm.w_o,
        &mut lstm.w_c,
        &mut lstm.b_i,
        &mut lstm.b_f,
        &mut lstm.b_o,
        &mut lstm.b_c,
        &mut head.w_y,
        &mut head.b_y,
    ];
    let grads: Vec<&Matrix<T>> = ParamId::ALL.iter().map(|&id| grads.tensor(id)).collect();
    state.step(&mut params, &grads, lr)?;
    embedding.zero_pad_row();
    Ok(())
}
