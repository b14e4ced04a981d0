use crate::{NetError, Tensor2};

/// A named, ordered collection of tensors. Gradients use the same type.
pub trait Params: Clone {
    fn tensors(&self) -> Vec<&Tensor2>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor2>;
    fn tensor_names(&self) -> Vec<String>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }

    fn global_norm(&self) -> f64 {
        self.tensors().iter().map(|t| t.sum_sq()).sum::<f64>().sqrt()
    }

    fn scale_all(&mut self, k: f64) {
        self.tensors_mut().into_iter().for_each(|t| t.scale(k));
    }

    fn add_all(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    fn ensure_finite(&self) -> Result<(), NetError> {
        for (t, name) in self.tensors().into_iter().zip(self.tensor_names()) {
            t.ensure_finite(&name)?;
        }
        Ok(())
    }

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }
}
