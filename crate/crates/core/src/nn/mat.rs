//! Dense row-major matrix and the two hot kernels the network is built
//! from. Weight layouts are chosen so that every inner loop runs over a
//! contiguous row slice.

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }
}

/// acc += x * row, elementwise over contiguous slices. `mul_add` compiles
/// to a hardware fused multiply-add on targets that have one.
#[inline]
pub fn axpy(acc: &mut [f64], row: &[f64], x: f64) {
    for (a, &r) in acc.iter_mut().zip(row) {
        *a = r.mul_add(x, *a);
    }
}

/// Dot product with four accumulators so the reduction is not serialized.
/// Summation order is fixed, keeping results bit-reproducible.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    let mut acc = [0.0f64; 4];
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] = x[0].mul_add(y[0], acc[0]);
        acc[1] = x[1].mul_add(y[1], acc[1]);
        acc[2] = x[2].mul_add(y[2], acc[2]);
        acc[3] = x[3].mul_add(y[3], acc[3]);
    }
    let mut s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s = x.mul_add(*y, s);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_access() {
        let mut m = Mat::zeros(3, 4);
        m.row_mut(1).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.row(0), &[0.0; 4]);
        assert_eq!(m.row(1), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn axpy_accumulates() {
        let mut acc = vec![1.0, 1.0, 1.0];
        axpy(&mut acc, &[1.0, 2.0, 3.0], 2.0);
        assert_eq!(acc, vec![3.0, 5.0, 7.0]);
    }

    #[test]
    fn dot_matches_naive_for_all_lengths() {
        for n in 0..20 {
            let a: Vec<f64> = (0..n).map(|i| (i as f64) * 0.5 - 1.0).collect();
            let b: Vec<f64> = (0..n).map(|i| 2.0 - (i as f64) * 0.25).collect();
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!((dot(&a, &b) - naive).abs() < 1e-12, "n={n}");
        }
    }
}
