use crate::error::{Error, Result};

/// Dense row-major matrix of f64. Everything the tape touches is one of
/// these; row vectors are 1 x n and scalars are 1 x 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("{rows}x{cols} = {} elements", rows * cols),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn full(rows: usize, cols: usize, v: f64) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::full(rows, cols, 1.0)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    /// 1 x n row vector.
    pub fn row(data: Vec<f64>) -> Self {
        Tensor {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    /// Stacks equal-length rows into an r x c matrix. Errors on ragged input
    /// or an empty row list.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidInput("Tensor::from_rows: no rows".into()))?;
        let cols = first.len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::shape(
                    "Tensor::from_rows",
                    format!("{cols} columns"),
                    format!("{} columns", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn scalar_value(&self) -> Result<f64> {
        if self.is_scalar() {
            Ok(self.data[0])
        } else {
            Err(Error::shape("scalar_value", "1x1", self.shape_str()))
        }
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                "matmul",
                format!("lhs cols == rhs rows (lhs {})", self.shape_str()),
                rhs.shape_str(),
            ));
        }
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = Tensor::zeros(n, m);
        // i-k-j loop order keeps the inner loop contiguous on both sides.
        for i in 0..n {
            let out_row = &mut out.data[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[p * m..(p + 1) * m];
                for j in 0..m {
                    out_row[j] += a * rhs_row[j];
                }
            }
        }
        Ok(out)
    }

    /// Shape relation for elementwise binary ops: exact match, a 1 x 1
    /// scalar against anything, or a 1 x c row vector against an r x c
    /// matrix. Anything else is an error.
    pub fn broadcast_zip(&self, rhs: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let class = BroadcastClass::of(self.shape(), rhs.shape()).ok_or_else(|| {
            Error::shape(
                "elementwise op",
                format!("broadcast-compatible with {}", self.shape_str()),
                rhs.shape_str(),
            )
        })?;
        let out = match class {
            BroadcastClass::Same => Tensor {
                rows: self.rows,
                cols: self.cols,
                data: self
                    .data
                    .iter()
                    .zip(&rhs.data)
                    .map(|(&a, &b)| f(a, b))
                    .collect(),
            },
            BroadcastClass::ScalarLhs => {
                let a = self.data[0];
                rhs.map(|b| f(a, b))
            }
            BroadcastClass::ScalarRhs => {
                let b = rhs.data[0];
                self.map(|a| f(a, b))
            }
            BroadcastClass::RowLhs => {
                let mut out = Tensor::zeros(rhs.rows, rhs.cols);
                for r in 0..rhs.rows {
                    for c in 0..rhs.cols {
                        out.data[r * rhs.cols + c] = f(self.data[c], rhs.get(r, c));
                    }
                }
                out
            }
            BroadcastClass::RowRhs => {
                let mut out = Tensor::zeros(self.rows, self.cols);
                for r in 0..self.rows {
                    for c in 0..self.cols {
                        out.data[r * self.cols + c] = f(self.get(r, c), rhs.data[c]);
                    }
                }
                out
            }
        };
        Ok(out)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }

    /// Columns [start, start+len) of every row.
    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Tensor> {
        if start + len > self.cols {
            return Err(Error::shape(
                "slice_cols",
                format!("start+len <= {}", self.cols),
                format!("{}..{}", start, start + len),
            ));
        }
        let mut data = Vec::with_capacity(self.rows * len);
        for r in 0..self.rows {
            let base = r * self.cols;
            data.extend_from_slice(&self.data[base + start..base + start + len]);
        }
        Ok(Tensor {
            rows: self.rows,
            cols: len,
            data,
        })
    }

    /// Concatenates along columns; all parts must agree on row count.
    pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("concat_cols: no inputs".into()))?;
        let rows = first.rows;
        let total: usize = parts.iter().map(|p| p.cols).sum();
        for p in parts {
            if p.rows != rows {
                return Err(Error::shape(
                    "concat_cols",
                    format!("{rows} rows"),
                    p.shape_str(),
                ));
            }
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row_slice(r));
            }
        }
        Ok(Tensor {
            rows,
            cols: total,
            data,
        })
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        self.map(|v| v.clamp(lo, hi))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// How two shapes line up in an elementwise op.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BroadcastClass {
    Same,
    ScalarLhs,
    ScalarRhs,
    RowLhs,
    RowRhs,
}

impl BroadcastClass {
    pub fn of(lhs: (usize, usize), rhs: (usize, usize)) -> Option<Self> {
        if lhs == rhs {
            Some(BroadcastClass::Same)
        } else if lhs == (1, 1) {
            Some(BroadcastClass::ScalarLhs)
        } else if rhs == (1, 1) {
            Some(BroadcastClass::ScalarRhs)
        } else if lhs.0 == 1 && lhs.1 == rhs.1 {
            Some(BroadcastClass::RowLhs)
        } else if rhs.0 == 1 && rhs.1 == lhs.1 {
            Some(BroadcastClass::RowRhs)
        } else {
            None
        }
    }

    /// Shape of the op result.
    pub fn out_shape(&self, lhs: (usize, usize), rhs: (usize, usize)) -> (usize, usize) {
        match self {
            BroadcastClass::Same | BroadcastClass::ScalarRhs | BroadcastClass::RowRhs => lhs,
            BroadcastClass::ScalarLhs | BroadcastClass::RowLhs => rhs,
        }
    }
}
