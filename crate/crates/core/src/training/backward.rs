use crate::model::{ClassifierHead, ForwardPass, LstmClassifier, LstmParams, ParamId};
use crate::numerics::{cross_entropy, matmul_transposed, Matrix, Real};
use crate::textprep::{EncodedSequence, PAD_ID};

use super::TrainError;

/// One gradient tensor per trainable parameter, shape-matched.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub embedding: Matrix<T>,
    pub lstm: LstmParams<T>,
    pub head: ClassifierHead<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &LstmClassifier<T>) -> Self {
        let cfg = &model.config;
        Self {
            embedding: Matrix::zeros(cfg.vocab_size, cfg.embed_dim),
            lstm: LstmParams::zeros(cfg.hidden_dim, cfg.embed_dim),
            head: ClassifierHead {
                w_y: Matrix::zeros(cfg.num_classes, cfg.hidden_dim),
                b_y: Matrix::zeros(cfg.num_classes, 1),
            },
        }
    }

    pub fn tensor(&self, id: ParamId) -> &Matrix<T> {
        match id {
            ParamId::Embedding => &self.embedding,
            ParamId::Wi => &self.lstm.w_i,
            ParamId::Wf => &self.lstm.w_f,
            ParamId::Wo => &self.lstm.w_o,
            ParamId::Wc => &self.lstm.w_c,
            ParamId::Bi => &self.lstm.b_i,
            ParamId::Bf => &self.lstm.b_f,
            ParamId::Bo => &self.lstm.b_o,
            ParamId::Bc => &self.lstm.b_c,
            ParamId::Wy => &self.head.w_y,
            ParamId::By => &self.head.b_y,
        }
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Matrix<T> {
        match id {
            ParamId::Embedding => &mut self.embedding,
            ParamId::Wi => &mut self.lstm.w_i,
            ParamId::Wf => &mut self.lstm.w_f,
            ParamId::Wo => &mut self.lstm.w_o,
            ParamId::Wc => &mut self.lstm.w_c,
            ParamId::Bi => &mut self.lstm.b_i,
            ParamId::Bf => &mut self.lstm.b_f,
            ParamId::Bo => &mut self.lstm.b_o,
            ParamId::Bc => &mut self.lstm.b_c,
            ParamId::Wy => &mut self.head.w_y,
            ParamId::By => &mut self.head.b_y,
        }
    }

    /// L2 norm over every entry of every tensor.
    pub fn global_norm(&self) -> T {
        ParamId::ALL
            .iter()
            .map(|&id| self.tensor(id).squared_norm())
            .sum::<T>()
            .sqrt()
    }

    pub fn scale_in_place(&mut self, factor: T) {
        for id in ParamId::ALL {
            self.tensor_mut(id)
                .values_mut()
                .iter_mut()
                .for_each(|v| *v = *v * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        ParamId::ALL.iter().all(|&id| self.tensor(id).is_finite())
    }
}

/// Cross-entropy loss of `model` on one example.
pub fn example_loss<T: Real>(
    model: &LstmClassifier<T>,
    seq: &EncodedSequence,
    label: usize,
) -> Result<T, TrainError> {
    let pass = model.forward(seq)?;
    Ok(cross_entropy(&pass.probs, label)?)
}

/// Exact gradients of the cross-entropy loss for one example.
pub fn backward<T: Real>(
    model: &LstmClassifier<T>,
    pass: &ForwardPass<T>,
    seq: &EncodedSequence,
    label: usize,
) -> Result<Gradients<T>, TrainError> {
    let mut grads = Gradients::zeros_like(model);
    accumulate_gradients(model, pass, seq, label, &mut grads)?;
    Ok(grads)
}

/// Adds the gradients for one example into `grads`.
///
/// Reverse accumulation runs through the head, then for each timestep from
/// last to first: output, memory update, candidate, forget, output and input
/// gates, and finally the embedding rows that fed the step.
pub fn accumulate_gradients<T: Real>(
    model: &LstmClassifier<T>,
    pass: &ForwardPass<T>,
    seq: &EncodedSequence,
    label: usize,
    grads: &mut Gradients<T>,
) -> Result<(), TrainError> {
    let classes = model.config.num_classes;
    if label >= classes {
        return Err(TrainError::LabelOutOfRange { label, classes });
    }
    if pass.caches.len() != seq.valid_len || pass.caches.is_empty() {
        return Err(TrainError::CacheMismatch {
            caches: pass.caches.len(),
            valid_len: seq.valid_len,
        });
    }
    let hidden = model.config.hidden_dim;
    let one = T::one();

    // softmax + cross-entropy: dL/dlogits = p - onehot(label)
    let mut dlogits = pass.probs.clone();
    dlogits[label] = dlogits[label] - one;
    let h_last = pass.last_hidden().values();
    grads.head.w_y.add_outer(&dlogits, h_last)?;
    for (g, &d) in grads.head.b_y.values_mut().iter_mut().zip(&dlogits) {
        *g = *g + d;
    }
    let dlogits = Matrix::column(&dlogits)?;
    let mut dh: Vec<T> = matmul_transposed(&model.head.w_y, &dlogits)?.into_values();
    let mut dc_next = vec![T::zero(); hidden];

    let (mut dz_i, mut dz_f, mut dz_o, mut dz_c) = (
        vec![T::zero(); hidden],
        vec![T::zero(); hidden],
        vec![T::zero(); hidden],
        vec![T::zero(); hidden],
    );
    for (t, cache) in pass.caches.iter().enumerate().rev() {
        let (i, f, o) = (cache.i.values(), cache.f.values(), cache.o.values());
        let (c_tilde, c_prev, tanh_c) = (
            cache.c_tilde.values(),
            cache.c_prev.values(),
            cache.tanh_c.values(),
        );
        for k in 0..hidden {
            let d_o = dh[k] * tanh_c[k];
            let dc = dc_next[k] + dh[k] * o[k] * (one - tanh_c[k] * tanh_c[k]);
            let d_i = dc * c_tilde[k];
            let d_f = dc * c_prev[k];
            let d_ct = dc * i[k];
            dc_next[k] = dc * f[k];
            dz_i[k] = d_i * i[k] * (one - i[k]);
            dz_f[k] = d_f * f[k] * (one - f[k]);
            dz_o[k] = d_o * o[k] * (one - o[k]);
            dz_c[k] = d_ct * (one - c_tilde[k] * c_tilde[k]);
        }
        let z = cache.concat.values();
        let lstm = &mut grads.lstm;
        for (w, b, dz) in [
            (&mut lstm.w_i, &mut lstm.b_i, &dz_i),
            (&mut lstm.w_f, &mut lstm.b_f, &dz_f),
            (&mut lstm.w_o, &mut lstm.b_o, &dz_o),
            (&mut lstm.w_c, &mut lstm.b_c, &dz_c),
        ] {
            w.add_outer(dz, z)?;
            for (g, &d) in b.values_mut().iter_mut().zip(dz.iter()) {
                *g = *g + d;
            }
        }
        // d[h_prev; x] = sum over gates of W_g^T dz_g
        let mut dconcat = vec![T::zero(); z.len()];
        for (w, dz) in [
            (&model.lstm.w_i, &dz_i),
            (&model.lstm.w_f, &dz_f),
            (&model.lstm.w_o, &dz_o),
            (&model.lstm.w_c, &dz_c),
        ] {
            for (k, &d) in dz.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                for (acc, &wv) in dconcat.iter_mut().zip(w.row(k)) {
                    *acc = *acc + d * wv;
                }
            }
        }
        let id = seq.ids[t];
        if id != PAD_ID {
            for (g, &d) in grads
                .embedding
                .row_mut(id as usize)
                .iter_mut()
                .zip(&dconcat[hidden..])
            {
                *g = *g + d;
            }
        }
        dh.copy_from_slice(&dconcat[..hidden]);
    }
    Ok(())
}
