use crate::NetError;
use serde::{Deserialize, Serialize};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Which operand of a product is used transposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Plain,
    Transposed,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NetError> {
        if data.len() != rows * cols {
            return Err(NetError::Shape(format!("{} values for a {rows}x{cols} tensor", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Tensor2 {
        Tensor2 { rows: end - start, cols: self.cols, data: self.data[start * self.cols..end * self.cols].to_vec() }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn add_assign(&mut self, o: &Tensor2) {
        debug_assert_eq!(self.shape(), o.shape());
        self.data.iter_mut().zip(&o.data).for_each(|(a, b)| *a += b);
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Adds `bias` (1 x cols) to every row.
    pub fn add_row(&mut self, bias: &Tensor2) {
        debug_assert_eq!(bias.rows, 1);
        debug_assert_eq!(bias.cols, self.cols);
        for r in 0..self.rows {
            self.row_mut(r).iter_mut().zip(&bias.data).for_each(|(a, b)| *a += b);
        }
    }

    /// Column sums as a 1 x cols tensor.
    pub fn column_sums(&self) -> Tensor2 {
        let mut out = Tensor2::zeros(1, self.cols);
        for r in 0..self.rows {
            out.data.iter_mut().zip(self.row(r)).for_each(|(a, b)| *a += b);
        }
        out
    }

    pub fn relu_inplace(&mut self) {
        self.data.iter_mut().for_each(|x| *x = x.max(0.0));
    }

    /// Zeroes `self` wherever `activated` is not positive (ReLU backward).
    pub fn relu_mask(&mut self, activated: &Tensor2) {
        self.data.iter_mut().zip(&activated.data).for_each(|(g, a)| {
            if *a <= 0.0 {
                *g = 0.0
            }
        });
    }

    /// Error unless every entry is finite.
    pub fn ensure_finite(&self, what: &str) -> Result<(), NetError> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(NetError::NonFinite(what.to_string()))
        }
    }

    fn strides(&self, layout: Layout) -> (usize, usize, isize, isize) {
        match layout {
            Layout::Plain => (self.rows, self.cols, self.cols as isize, 1),
            Layout::Transposed => (self.cols, self.rows, 1, self.cols as isize),
        }
    }

    fn gemm(a: &Tensor2, la: Layout, b: &Tensor2, lb: Layout, beta: f64, out: &mut Tensor2) {
        let (m, k, rsa, csa) = a.strides(la);
        let (k2, n, rsb, csb) = b.strides(lb);
        assert_eq!(k, k2, "inner dimensions differ");
        assert_eq!((out.rows, out.cols), (m, n), "output shape");
        if m == 0 || n == 0 {
            return;
        }
        if k == 0 {
            out.scale(beta);
            return;
        }
        // SAFETY: shapes and strides above describe the owned buffers exactly.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.data.as_ptr(),
                rsa,
                csa,
                b.data.as_ptr(),
                rsb,
                csb,
                beta,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
    }

    /// `self * b`
    pub fn matmul(&self, b: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros(self.rows, b.cols);
        Self::gemm(self, Layout::Plain, b, Layout::Plain, 0.0, &mut out);
        out
    }

    /// `self^T * b`
    pub fn t_matmul(&self, b: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros(self.cols, b.cols);
        Self::gemm(self, Layout::Transposed, b, Layout::Plain, 0.0, &mut out);
        out
    }

    /// `self * b^T`
    pub fn matmul_t(&self, b: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros(self.rows, b.rows);
        Self::gemm(self, Layout::Plain, b, Layout::Transposed, 0.0, &mut out);
        out
    }

    /// `acc += self^T * b`
    pub fn t_matmul_acc(&self, b: &Tensor2, acc: &mut Tensor2) {
        Self::gemm(self, Layout::Transposed, b, Layout::Plain, 1.0, acc);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Tensor2, b: &Tensor2) -> Tensor2 {
        Tensor2::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum())
    }

    fn transpose(a: &Tensor2) -> Tensor2 {
        Tensor2::from_fn(a.cols(), a.rows(), |i, j| a.get(j, i))
    }

    #[test]
    fn products_match_naive_loops() {
        let a = Tensor2::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.5 - 2.0);
        let b = Tensor2::from_fn(4, 2, |i, j| (i as f64 - j as f64) * 0.3);
        let c = Tensor2::from_fn(3, 2, |i, j| i as f64 + 0.1 * j as f64);
        let close = |x: &Tensor2, y: &Tensor2| x.data().iter().zip(y.data()).all(|(p, q)| (p - q).abs() < 1e-12);
        assert!(close(&a.matmul(&b), &naive(&a, &b)));
        assert!(close(&a.t_matmul(&c), &naive(&transpose(&a), &c)));
        assert!(close(&a.matmul_t(&transpose(&b)), &naive(&a, &b)));
        let mut acc = Tensor2::from_fn(4, 2, |_, _| 1.0);
        a.t_matmul_acc(&c, &mut acc);
        let mut want = naive(&transpose(&a), &c);
        want.data_mut().iter_mut().for_each(|x| *x += 1.0);
        assert!(close(&acc, &want));
    }

    #[test]
    fn non_finite_entries_are_reported() {
        let mut t = Tensor2::zeros(2, 2);
        assert!(t.ensure_finite("t").is_ok());
        t.set(1, 0, f64::NAN);
        assert!(matches!(t.ensure_finite("t"), Err(NetError::NonFinite(_))));
        assert!(Tensor2::from_vec(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn empty_products_are_defined() {
        let a = Tensor2::zeros(0, 3);
        let b = Tensor2::zeros(3, 2);
        assert_eq!(a.matmul(&b).shape(), (0, 2));
        let e = Tensor2::zeros(2, 0);
        assert_eq!(e.matmul(&Tensor2::zeros(0, 3)), Tensor2::zeros(2, 3));
    }
}
