//! Straight-line scalar reference implementations used as test oracles.
//!
//! Nothing here calls the library's matrix code: parameters are read
//! element by element and every sum is an explicit loop.

#![allow(dead_code, clippy::needless_range_loop)]

use threatlstm::model::{LstmClassifier, LstmParams, ParamId};
use threatlstm::numerics::Matrix;
use threatlstm::textprep::EncodedSequence;
use threatlstm::training::backward;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `b[j] + sum_k W[j][k] * z[k]` where `z = h_prev ++ x`.
fn affine(w: &Matrix<f64>, b: &Matrix<f64>, h_prev: &[f64], x: &[f64], j: usize) -> f64 {
    let hidden = h_prev.len();
    let mut acc = b.get(j, 0);
    for (k, &hk) in h_prev.iter().enumerate() {
        acc += w.get(j, k) * hk;
    }
    for (k, &xk) in x.iter().enumerate() {
        acc += w.get(j, hidden + k) * xk;
    }
    acc
}

#[derive(Debug, Clone)]
pub struct ScalarStep {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub c_tilde: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// One LSTM step computed unit by unit.
pub fn scalar_step(p: &LstmParams<f64>, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> ScalarStep {
    let n = h_prev.len();
    let mut s = ScalarStep {
        i: vec![0.0; n],
        f: vec![0.0; n],
        o: vec![0.0; n],
        c_tilde: vec![0.0; n],
        c: vec![0.0; n],
        h: vec![0.0; n],
    };
    for j in 0..n {
        let i = sigmoid(affine(&p.w_i, &p.b_i, h_prev, x, j));
        let o = sigmoid(affine(&p.w_o, &p.b_o, h_prev, x, j));
        let f = sigmoid(affine(&p.w_f, &p.b_f, h_prev, x, j));
        let c_tilde = affine(&p.w_c, &p.b_c, h_prev, x, j).tanh();
        let c = f * c_prev[j] + i * c_tilde;
        let h = o * c.tanh();
        s.i[j] = i;
        s.f[j] = f;
        s.o[j] = o;
        s.c_tilde[j] = c_tilde;
        s.c[j] = c;
        s.h[j] = h;
    }
    s
}

/// Class probabilities of the whole classifier, computed from scratch.
pub fn scalar_probs(model: &LstmClassifier<f64>, seq: &EncodedSequence) -> Vec<f64> {
    let hidden = model.config.hidden_dim;
    let embed = model.config.embed_dim;
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    for &id in &seq.ids[..seq.valid_len] {
        let x: Vec<f64> = (0..embed)
            .map(|k| model.embedding.table.get(id as usize, k))
            .collect();
        let step = scalar_step(&model.lstm, &x, &h, &c);
        h = step.h;
        c = step.c;
    }
    let k = model.config.num_classes;
    let logits: Vec<f64> = (0..k)
        .map(|r| {
            let mut acc = model.head.b_y.get(r, 0);
            for (j, &hj) in h.iter().enumerate() {
                acc += model.head.w_y.get(r, j) * hj;
            }
            acc
        })
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Cross-entropy of the scalar forward pass.
pub fn scalar_loss(model: &LstmClassifier<f64>, seq: &EncodedSequence, label: usize) -> f64 {
    -scalar_probs(model, seq)[label].max(1e-12).ln()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Worst relative error between the library's analytic gradients and
/// central differences of [`scalar_loss`], over every coordinate.
pub fn independent_gradient_error(
    model: &LstmClassifier<f64>,
    seq: &EncodedSequence,
    label: usize,
    eps: f64,
) -> f64 {
    let pass = model.forward(seq).expect("forward");
    let grads = backward(model, &pass, seq, label).expect("backward");
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for id in ParamId::ALL {
        for k in 0..model.tensor(id).len() {
            let original = probe.tensor(id).values()[k];
            probe.tensor_mut(id).values_mut()[k] = original + eps;
            let plus = scalar_loss(&probe, seq, label);
            probe.tensor_mut(id).values_mut()[k] = original - eps;
            let minus = scalar_loss(&probe, seq, label);
            probe.tensor_mut(id).values_mut()[k] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grads.tensor(id).values()[k];
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    worst
}
