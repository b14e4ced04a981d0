use crate::Tensor2;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Affine layer `y = x W + b` with `W: in x out`, `b: 1 x out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Tensor2,
    pub b: Tensor2,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { w: Tensor2::zeros(inputs, outputs), b: Tensor2::zeros(1, outputs) }
    }

    /// Glorot-uniform weights scaled by `gain`, zero bias.
    pub fn init<R: Rng>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        let limit = gain * (6.0 / (inputs + outputs) as f64).sqrt();
        Self { w: Tensor2::from_fn(inputs, outputs, |_, _| rng.random_range(-limit..=limit)), b: Tensor2::zeros(1, outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.w.rows()
    }

    pub fn outputs(&self) -> usize {
        self.w.cols()
    }

    pub fn forward(&self, x: &Tensor2) -> Tensor2 {
        let mut y = x.matmul(&self.w);
        y.add_row(&self.b);
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Tensor2, dy: &Tensor2, grad: &mut Linear) -> Tensor2 {
        x.t_matmul_acc(dy, &mut grad.w);
        grad.b.add_assign(&dy.column_sums());
        dy.matmul_t(&self.w)
    }
}
