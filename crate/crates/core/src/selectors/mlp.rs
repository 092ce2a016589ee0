//! Small fully-connected regressor trained by full-batch gradient descent.
//!
//! Hidden layers are ReLU, the output is linear, and the loss is mean
//! squared error. Updates use classical momentum. Everything is seeded
//! and single-threaded, so training is bitwise reproducible.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{count, real, wide, Scalar};
use crate::rng;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: u32,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self { hidden: vec![64, 32], learning_rate: 1e-3, momentum: 0.9, epochs: 500 }
    }
}

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("no training rows")]
    Empty,
    #[error("{rows} rows vs {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: u32, loss: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Layer<R> {
    /// `(out, in)` weight matrix.
    pub w: Array2<R>,
    pub b: Array1<R>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Mlp<R> {
    pub layers: Vec<Layer<R>>,
}

/// Loss value and per-layer parameter gradients, as [`Mlp::gradients`]
/// returns them.
pub struct Gradients<R> {
    pub loss: R,
    pub w: Vec<Array2<R>>,
    pub b: Vec<Array1<R>>,
}

impl<R: Scalar> Mlp<R> {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights, zero biases.
    pub fn init(input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut gen = rng::rng(seed);
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let w = Array2::from_shape_fn((fan_out, fan_in), |_| {
                    real::<R>(gen.gen_range(-bound..bound))
                });
                Layer { w, b: Array1::zeros(fan_out) }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn predict_row(&self, row: ArrayView1<R>) -> R {
        let mut a: Array1<R> = row.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.w.dot(&a) + &layer.b;
            if i < last {
                z.mapv_inplace(|v| v.max(R::zero()));
            }
            a = z;
        }
        a[0]
    }

    pub fn predict(&self, x: &Array2<R>) -> Vec<R> {
        (0..x.nrows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    /// Mean-squared-error loss and full-batch parameter gradients.
    pub(crate) fn gradients(&self, x: &Array2<R>, y: &[R]) -> Gradients<R> {
        let n = x.nrows();
        let last = self.layers.len() - 1;
        // Forward, keeping each layer's input and pre-activation.
        let mut inputs: Vec<Array2<R>> = Vec::with_capacity(self.layers.len());
        let mut zs: Vec<Array2<R>> = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            inputs.push(a.clone());
            let mut z = a.dot(&layer.w.t());
            for mut row in z.rows_mut() {
                row += &layer.b;
            }
            zs.push(z.clone());
            if i < last {
                z.mapv_inplace(|v| v.max(R::zero()));
            }
            a = z;
        }
        let preds = a.column(0);
        let inv_n = R::one() / count::<R>(n);
        let mut loss = R::zero();
        let mut delta = Array2::<R>::zeros((n, 1));
        for i in 0..n {
            let err = preds[i] - y[i];
            loss += err * err * inv_n;
            delta[[i, 0]] = real::<R>(2.0) * err * inv_n;
        }
        // Backward.
        let mut grad_w: Vec<Array2<R>> = Vec::with_capacity(self.layers.len());
        let mut grad_b: Vec<Array1<R>> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let gw = delta.t().dot(&inputs[i]);
            let gb = delta.sum_axis(ndarray::Axis(0));
            if i > 0 {
                let mut next = delta.dot(&self.layers[i].w);
                // ReLU mask of the previous layer's pre-activation.
                ndarray::Zip::from(&mut next).and(&zs[i - 1]).for_each(|d, &z| {
                    if z <= R::zero() {
                        *d = R::zero();
                    }
                });
                delta = next;
            }
            grad_w.push(gw);
            grad_b.push(gb);
        }
        grad_w.reverse();
        grad_b.reverse();
        Gradients { loss, w: grad_w, b: grad_b }
    }
}

/// Train on rows of `x` against scalar targets.
pub fn train_mlp<R: Scalar>(
    x: &Array2<R>,
    y: &[R],
    params: &MlpParams,
    seed: u64,
) -> Result<Mlp<R>, MlpError> {
    if x.nrows() == 0 {
        return Err(MlpError::Empty);
    }
    if x.nrows() != y.len() {
        return Err(MlpError::LengthMismatch { rows: x.nrows(), targets: y.len() });
    }
    let mut mlp = Mlp::init(x.ncols(), &params.hidden, seed);
    let lr = real::<R>(params.learning_rate);
    let momentum = real::<R>(params.momentum);
    let mut vel_w: Vec<Array2<R>> = mlp.layers.iter().map(|l| Array2::zeros(l.w.dim())).collect();
    let mut vel_b: Vec<Array1<R>> = mlp.layers.iter().map(|l| Array1::zeros(l.b.len())).collect();
    for epoch in 0..params.epochs {
        let grads = mlp.gradients(x, y);
        if !grads.loss.is_finite() || wide(grads.loss) > 1e6 {
            return Err(MlpError::Diverged { epoch, loss: wide(grads.loss) });
        }
        for (i, layer) in mlp.layers.iter_mut().enumerate() {
            ndarray::Zip::from(&mut vel_w[i]).and(&grads.w[i]).for_each(|v, &g| {
                *v = momentum * *v - lr * g;
            });
            layer.w += &vel_w[i];
            ndarray::Zip::from(&mut vel_b[i]).and(&grads.b[i]).for_each(|v, &g| {
                *v = momentum * *v - lr * g;
            });
            layer.b += &vel_b[i];
        }
    }
    Ok(mlp)
}
