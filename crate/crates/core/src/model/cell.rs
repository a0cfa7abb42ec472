//! The recurrent cell.
//!
//! With `z = [h_{t-1}; x_t]` (hidden state stacked on top of the input):
//!
//! ```text
//! i_t  = sigmoid(W_i z + b_i)          input gate
//! o_t  = sigmoid(W_o z + b_o)          output gate
//! f_t  = sigmoid(W_f z + b_f)          forget gate
//! C~_t = tanh(W_C z + b_C)             candidate memory
//! C_t  = f_t * C_{t-1} + i_t * C~_t
//! h_t  = o_t * tanh(C_t)
//! ```

use crate::numerics::{add, concat_rows, hadamard, matmul, sigmoid, tanh_map, Matrix, Real};

use super::ModelError;

/// Gate weights of shape `hidden x (hidden + embed)` and biases of shape `hidden x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    pub w_i: Matrix<T>,
    pub w_f: Matrix<T>,
    pub w_o: Matrix<T>,
    pub w_c: Matrix<T>,
    pub b_i: Matrix<T>,
    pub b_f: Matrix<T>,
    pub b_o: Matrix<T>,
    pub b_c: Matrix<T>,
}

impl<T: Real> LstmParams<T> {
    pub fn zeros(hidden_dim: usize, embed_dim: usize) -> Self {
        let w = || Matrix::zeros(hidden_dim, hidden_dim + embed_dim);
        let b = || Matrix::zeros(hidden_dim, 1);
        Self {
            w_i: w(),
            w_f: w(),
            w_o: w(),
            w_c: w(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_c: b(),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_i.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_i.cols() - self.w_i.rows()
    }
}

/// Hidden output `h` and memory cell `c`, both `hidden x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: Matrix<T>,
    pub c: Matrix<T>,
}

impl<T: Real> LstmState<T> {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: Matrix::zeros(hidden_dim, 1),
            c: Matrix::zeros(hidden_dim, 1),
        }
    }
}

/// Everything the backward pass needs from one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache<T> {
    pub x: Matrix<T>,
    pub h_prev: Matrix<T>,
    pub c_prev: Matrix<T>,
    /// `[h_prev; x]`
    pub concat: Matrix<T>,
    pub i: Matrix<T>,
    pub f: Matrix<T>,
    pub o: Matrix<T>,
    pub c_tilde: Matrix<T>,
    pub c: Matrix<T>,
    pub tanh_c: Matrix<T>,
    pub h: Matrix<T>,
}

fn gate<T: Real>(w: &Matrix<T>, b: &Matrix<T>, z: &Matrix<T>) -> Result<Matrix<T>, ModelError> {
    Ok(add(&matmul(w, z)?, b)?)
}

/// Advances the cell by one timestep.
pub fn lstm_step<T: Real>(
    params: &LstmParams<T>,
    x: &Matrix<T>,
    prev: &LstmState<T>,
) -> Result<(LstmState<T>, StepCache<T>), ModelError> {
    let hidden = params.hidden_dim();
    if x.shape() != (params.input_dim(), 1)
        || prev.h.shape() != (hidden, 1)
        || prev.c.shape() != (hidden, 1)
    {
        return Err(ModelError::Dimension(format!(
            "step expects x {}x1 and state {}x1, got x {:?}, h {:?}, c {:?}",
            params.input_dim(),
            hidden,
            x.shape(),
            prev.h.shape(),
            prev.c.shape()
        )));
    }
    let concat = concat_rows(&prev.h, x)?;
    let i = sigmoid(&gate(&params.w_i, &params.b_i, &concat)?);
    let o = sigmoid(&gate(&params.w_o, &params.b_o, &concat)?);
    let f = sigmoid(&gate(&params.w_f, &params.b_f, &concat)?);
    let c_tilde = tanh_map(&gate(&params.w_c, &params.b_c, &concat)?);
    let c = add(&hadamard(&f, &prev.c)?, &hadamard(&i, &c_tilde)?)?;
    let tanh_c = tanh_map(&c);
    let h = hadamard(&o, &tanh_c)?;
    let state = LstmState {
        h: h.clone(),
        c: c.clone(),
    };
    let cache = StepCache {
        x: x.clone(),
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        concat,
        i,
        f,
        o,
        c_tilde,
        c,
        tanh_c,
        h,
    };
    Ok((state, cache))
}
