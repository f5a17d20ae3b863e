use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{shape_err, NumericsError, Result, Shape};

/// Dense row-major fp64 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2 {
    data: Array2<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { data: Array2::zeros((rows, cols)) }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { data: Array2::from_elem((rows, cols), value) }
    }

    pub fn identity(n: usize) -> Self {
        Self { data: Array2::eye(n) }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(NumericsError::Config(format!("{} values cannot fill a {rows}x{cols} matrix", values.len())));
        }
        let data = Array2::from_shape_vec((rows, cols), values).map_err(|e| NumericsError::Config(e.to_string()))?;
        Ok(Self { data })
    }

    /// Builds from nested rows; panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut flat = Vec::with_capacity(n * m);
        for r in rows {
            assert_eq!(r.as_ref().len(), m, "ragged rows");
            flat.extend_from_slice(r.as_ref());
        }
        Self::from_vec(n, m, flat).expect("shape checked above")
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self { data: Array2::from_shape_fn((rows, cols), |(i, j)| f(i, j)) }
    }

    pub fn from_array(data: Array2<f64>) -> Self {
        let data = if data.is_standard_layout() { data } else { data.as_standard_layout().into_owned() };
        Self { data }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> Shape {
        (self.rows(), self.cols())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[[r, c]]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[[r, c]] = v;
    }

    pub fn row(&self, r: usize) -> ArrayView1<'_, f64> {
        self.data.row(r)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice().expect("standard layout")
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.data.as_slice_mut().expect("standard layout")
    }

    pub fn array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// The single value of a 1x1 matrix.
    pub fn scalar(&self) -> Option<f64> {
        (self.shape() == (1, 1)).then(|| self.data[[0, 0]])
    }

    pub fn matmul(&self, other: &Tensor2) -> Result<Tensor2> {
        if self.cols() != other.rows() {
            return Err(shape_err("matmul", self.shape(), other.shape()));
        }
        Ok(Self::from_array(self.data.dot(&other.data)))
    }

    pub fn transpose(&self) -> Tensor2 {
        Self::from_array(self.data.t().to_owned())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2 {
        Self { data: self.data.mapv(f) }
    }

    pub fn zip_map(&self, other: &Tensor2, f: impl Fn(f64, f64) -> f64) -> Result<Tensor2> {
        if self.shape() != other.shape() {
            return Err(shape_err("elementwise", self.shape(), other.shape()));
        }
        let mut out = self.data.clone();
        out.zip_mut_with(&other.data, |a, &b| *a = f(*a, b));
        Ok(Self { data: out })
    }

    pub fn add(&self, other: &Tensor2) -> Result<Tensor2> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn add_assign(&mut self, other: &Tensor2) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(shape_err("add_assign", self.shape(), other.shape()));
        }
        self.data += &other.data;
        Ok(())
    }

    pub fn scale(&self, k: f64) -> Tensor2 {
        Self { data: &self.data * k }
    }

    pub fn sum(&self) -> f64 {
        self.data.sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.sum_axis(Axis(1)).to_vec()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor2) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(other.data.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Columns of `parts` laid side by side.
    pub fn concat_cols(parts: &[&Tensor2]) -> Result<Tensor2> {
        let rows = parts.first().map_or(0, |p| p.rows());
        for p in parts {
            if p.rows() != rows {
                return Err(shape_err("concat_cols", parts[0].shape(), p.shape()));
            }
        }
        let views: Vec<_> = parts.iter().map(|p| p.data.view()).collect();
        let data = ndarray::concatenate(Axis(1), &views).map_err(|e| NumericsError::Config(e.to_string()))?;
        Ok(Self::from_array(data))
    }

    pub fn slice_cols(&self, start: usize, end: usize) -> Tensor2 {
        Self::from_array(self.data.slice(ndarray::s![.., start..end]).to_owned())
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> Tensor2 {
        Self::from_array(self.data.slice(ndarray::s![start..end, ..]).to_owned())
    }
}

impl From<Array2<f64>> for Tensor2 {
    fn from(data: Array2<f64>) -> Self {
        Self::from_array(data)
    }
}
