use super::{NumericsError, Real};

/// Dense row-major matrix. Column vectors are `n x 1` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Real> Matrix<T> {
    /// Builds a matrix, rejecting wrong lengths and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, values: Vec<T>) -> Result<Self, NumericsError> {
        if values.len() != rows * cols {
            return Err(NumericsError::LengthMismatch {
                rows,
                cols,
                len: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite { index });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            values: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = T::one();
        }
        m
    }

    /// Column vector from a slice.
    pub fn column(values: &[T]) -> Result<Self, NumericsError> {
        Self::from_vec(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.values[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [T] {
        let cols = self.cols;
        &mut self.values[row * cols..(row + 1) * cols]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<(), NumericsError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(NumericsError::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        self.map(|v| v * factor)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.values[c * self.rows + r] = self.values[r * self.cols + c];
            }
        }
        out
    }

    /// Sum of squared entries.
    pub fn squared_norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(
            T::zero(),
            |acc, &v| if v.abs() > acc { v.abs() } else { acc },
        )
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<(), NumericsError> {
        if self.shape() != other.shape() {
            return Err(NumericsError::ShapeMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<(), NumericsError> {
        self.check_same_shape(other, "add_assign")?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + b;
        }
        Ok(())
    }

    /// In-place `self += u * v^T` for column vectors `u` (rows) and `v` (cols).
    pub fn add_outer(&mut self, u: &[T], v: &[T]) -> Result<(), NumericsError> {
        if u.len() != self.rows || v.len() != self.cols {
            return Err(NumericsError::ShapeMismatch {
                op: "add_outer",
                left: self.shape(),
                right: (u.len(), v.len()),
            });
        }
        for (r, &ur) in u.iter().enumerate() {
            if ur == T::zero() {
                continue;
            }
            for (dst, &vc) in self.row_mut(r).iter_mut().zip(v) {
                *dst = *dst + ur * vc;
            }
        }
        Ok(())
    }
}

/// Matrix product with row-major accumulation order.
pub fn matmul<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    if a.cols != b.rows {
        return Err(NumericsError::ShapeMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    if b.cols == 1 {
        // matrix-vector: one dot product per row
        for r in 0..a.rows {
            out.values[r] = dot(a.row(r), &b.values);
        }
        return Ok(out);
    }
    for r in 0..a.rows {
        for k in 0..a.cols {
            let scale = a.values[r * a.cols + k];
            let src = &b.values[k * b.cols..(k + 1) * b.cols];
            let dst = &mut out.values[r * b.cols..(r + 1) * b.cols];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = *d + scale * s;
            }
        }
    }
    Ok(out)
}

/// `a^T * b` without materializing the transpose.
pub fn matmul_transposed<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
) -> Result<Matrix<T>, NumericsError> {
    if a.rows != b.rows {
        return Err(NumericsError::ShapeMismatch {
            op: "matmul_transposed",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        for i in 0..a.cols {
            let scale = a.values[k * a.cols + i];
            if scale == T::zero() {
                continue;
            }
            let src = &b.values[k * b.cols..(k + 1) * b.cols];
            let dst = &mut out.values[i * b.cols..(i + 1) * b.cols];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = *d + scale * s;
            }
        }
    }
    Ok(out)
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc = acc + x * y;
    }
    acc
}

pub fn sigmoid<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    x.map(sigmoid_scalar)
}

#[inline]
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub fn tanh_map<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| v.tanh())
}

pub fn hadamard<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    zip_with(a, b, "hadamard", |x, y| x * y)
}

pub fn add<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    zip_with(a, b, "add", |x, y| x + y)
}

pub fn sub<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    zip_with(a, b, "sub", |x, y| x - y)
}

fn zip_with<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    op: &'static str,
    f: impl Fn(T, T) -> T,
) -> Result<Matrix<T>, NumericsError> {
    a.check_same_shape(b, op)?;
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        values: a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| f(x, y))
            .collect(),
    })
}

/// Stacks `a` on top of `b`.
pub fn concat_rows<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    if a.cols != b.cols {
        return Err(NumericsError::ShapeMismatch {
            op: "concat_rows",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut values = Vec::with_capacity(a.len() + b.len());
    values.extend_from_slice(&a.values);
    values.extend_from_slice(&b.values);
    Ok(Matrix {
        rows: a.rows + b.rows,
        cols: a.cols,
        values,
    })
}

/// Max-subtracted softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Result<Vec<T>, NumericsError> {
    if logits.is_empty() {
        return Err(NumericsError::Empty("softmax"));
    }
    let max = logits
        .iter()
        .fold(T::neg_infinity(), |m, &v| if v > m { v } else { m });
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Probability floor applied before taking the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln(probs[label])` with the probability floored at [`PROB_FLOOR`].
pub fn cross_entropy<T: Real>(probs: &[T], label: usize) -> Result<T, NumericsError> {
    let p = *probs.get(label).ok_or(NumericsError::LabelOutOfRange {
        label,
        classes: probs.len(),
    })?;
    let floor = T::from_f64(PROB_FLOOR);
    Ok(-(if p > floor { p } else { floor }).ln())
}
