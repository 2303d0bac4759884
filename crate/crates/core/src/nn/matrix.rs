/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Self { rows, cols, data: vec![v; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
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

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · wᵀ` for `self` of shape n×k and `w` of shape m×k.
    pub fn matmul_t(&self, w: &Matrix) -> Matrix {
        assert_eq!(self.cols, w.cols, "matmul_t inner dimension");
        let mut out = Matrix::zeros(self.rows, w.rows);
        for i in 0..self.rows {
            let x = self.row(i);
            let o = &mut out.data[i * w.rows..(i + 1) * w.rows];
            for (j, oj) in o.iter_mut().enumerate() {
                *oj = dot(x, w.row(j));
            }
        }
        out
    }

    /// `self · w` for `self` n×k and `w` k×m.
    pub fn matmul(&self, w: &Matrix) -> Matrix {
        assert_eq!(self.cols, w.rows, "matmul inner dimension");
        let mut out = Matrix::zeros(self.rows, w.cols);
        for i in 0..self.rows {
            let o = &mut out.data[i * w.cols..(i + 1) * w.cols];
            for (k, &x) in self.row(i).iter().enumerate() {
                if x != 0.0 {
                    axpy(o, x, w.row(k));
                }
            }
        }
        out
    }

    /// `selfᵀ · b` for `self` n×k and `b` n×m, giving k×m.
    pub fn t_matmul(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.rows, b.rows, "t_matmul outer dimension");
        let mut out = Matrix::zeros(self.cols, b.cols);
        for i in 0..self.rows {
            let brow = b.row(i);
            for (k, &x) in self.row(i).iter().enumerate() {
                if x != 0.0 {
                    axpy(&mut out.data[k * b.cols..(k + 1) * b.cols], x, brow);
                }
            }
        }
        out
    }

    pub fn add_assign(&mut self, o: &Matrix) {
        assert_eq!(self.shape(), o.shape(), "add shapes");
        for (a, b) in self.data.iter_mut().zip(&o.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, -1.0]]);
        assert_eq!(a.matmul_t(&w), Matrix::from_rows(&[vec![1.0, -1.0], vec![3.0, -1.0], vec![5.0, -1.0]]));
        let wt = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, -1.0]]);
        assert_eq!(a.matmul(&wt), a.matmul_t(&w));
        assert_eq!(a.t_matmul(&a), Matrix::from_rows(&[vec![35.0, 44.0], vec![44.0, 56.0]]));
    }
}
