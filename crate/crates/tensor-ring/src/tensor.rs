//! Dense N-way tensors with a fixed first-index-fastest linearization.
//!
//! Element `(i_1, ..., i_N)` (1-based) lives at flat position
//! `sum_n (i_n - 1) * prod_{j < n} I_j`, i.e. generalized column-major.
//! All unfoldings are index remaps over this single layout; `Prefix(n)`
//! is a pure reshape and the other two are a cyclic/extract permutation
//! followed by a reshape.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// The three matricizations of an N-way tensor.
///
/// * `Classical(n)`: rows `i_n`, columns `(i_1 .. i_{n-1} i_{n+1} .. i_N)`
///   with `i_1` fastest.
/// * `ModeN(n)`: rows `i_n`, columns `(i_{n+1} .. i_N i_1 .. i_{n-1})`
///   with `i_{n+1}` fastest.
/// * `Prefix(n)`: rows `(i_1 .. i_n)`, columns `(i_{n+1} .. i_N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnfoldKind {
    Classical(usize),
    ModeN(usize),
    Prefix(usize),
}

impl UnfoldKind {
    fn mode(&self) -> usize {
        match *self {
            UnfoldKind::Classical(n) | UnfoldKind::ModeN(n) | UnfoldKind::Prefix(n) => n,
        }
    }
}

/// Flat position (1-based) of a 1-based multi-index in the given shape.
pub fn linear_index(multi_index: &[usize], shape: &[usize]) -> Result<usize> {
    if multi_index.len() != shape.len() {
        return Err(Error::ShapeMismatch {
            context: "linear_index",
            expected: shape.to_vec(),
            actual: multi_index.to_vec(),
        });
    }
    let mut flat = 0usize;
    let mut stride = 1usize;
    for (mode, (&i, &dim)) in multi_index.iter().zip(shape).enumerate() {
        if i < 1 || i > dim {
            return Err(Error::IndexOutOfRange {
                mode: mode + 1,
                index: i,
                dim,
            });
        }
        flat += (i - 1) * stride;
        stride *= dim;
    }
    Ok(flat + 1)
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::InvalidArgument("tensor order must be at least 1".into()));
    }
    let mut total = 1usize;
    for &d in shape {
        if d == 0 {
            return Err(Error::InvalidArgument("tensor dimensions must be positive".into()));
        }
        total = total
            .checked_mul(d)
            .ok_or_else(|| Error::InvalidArgument("tensor size overflows usize".into()))?;
    }
    Ok(total)
}

/// Dense real tensor, immutable after construction from the caller's view.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let total = check_shape(&shape)?;
        if values.len() != total {
            return Err(Error::ShapeMismatch {
                context: "DenseTensor::new",
                expected: vec![total],
                actual: vec![values.len()],
            });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let total = check_shape(&shape).expect("invalid shape");
        Self {
            shape,
            values: vec![0.0; total],
        }
    }

    /// Column-major matrix constructor.
    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Per-mode strides of the linearization (first mode has stride 1).
    pub fn strides(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.shape.len());
        let mut acc = 1;
        for &d in &self.shape {
            s.push(acc);
            acc *= d;
        }
        s
    }

    /// Element at a 1-based multi-index.
    pub fn get(&self, multi_index: &[usize]) -> Result<f64> {
        let flat = linear_index(multi_index, &self.shape)?;
        Ok(self.values[flat - 1])
    }

    /// Matrix accessor (0-based) for order-2 tensors.
    pub fn at2(&self, r: usize, c: usize) -> f64 {
        debug_assert_eq!(self.order(), 2);
        self.values[r + c * self.shape[0]]
    }

    pub fn rows(&self) -> usize {
        debug_assert_eq!(self.order(), 2);
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.order(), 2);
        self.shape[1]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < 1 || mode > self.order() {
            return Err(Error::InvalidMode {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Rearrange modes; `perm[k]` is the 0-based source mode of output mode `k`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.order();
        if perm.len() != n || {
            let mut seen = vec![false; n];
            perm.iter().any(|&p| {
                p >= n || std::mem::replace(&mut seen[p], true)
            })
        } {
            return Err(Error::InvalidArgument(format!(
                "invalid axis permutation {perm:?} for order {n}"
            )));
        }
        let src_strides = self.strides();
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        // Leading output modes that coincide with leading source modes form a
        // contiguous run that can be copied wholesale.
        let mut run = 1usize;
        let mut lead = 0usize;
        while lead < n && perm[lead] == lead {
            run *= self.shape[lead];
            lead += 1;
        }
        let mut out = vec![0.0; self.values.len()];
        if lead == n {
            out.copy_from_slice(&self.values);
            return Self::new(out_shape, out);
        }
        let iter_dims: Vec<usize> = out_shape[lead..].to_vec();
        let iter_strides: Vec<usize> = perm[lead..].iter().map(|&p| src_strides[p]).collect();
        let mut counters = vec![0usize; iter_dims.len()];
        let mut src_off = 0usize;
        let mut dst_off = 0usize;
        loop {
            out[dst_off..dst_off + run].copy_from_slice(&self.values[src_off..src_off + run]);
            dst_off += run;
            let mut k = 0;
            loop {
                if k == iter_dims.len() {
                    return Self::new(out_shape, out);
                }
                counters[k] += 1;
                src_off += iter_strides[k];
                if counters[k] < iter_dims[k] {
                    break;
                }
                counters[k] = 0;
                src_off -= iter_dims[k] * iter_strides[k];
                k += 1;
            }
        }
    }

    /// Mode order (0-based) whose permuted flattening realizes the unfolding.
    fn unfold_perm(&self, kind: UnfoldKind) -> Result<Vec<usize>> {
        let n = kind.mode();
        self.check_mode(n)?;
        let order = self.order();
        let perm = match kind {
            UnfoldKind::Classical(_) => {
                let mut p = vec![n - 1];
                p.extend((0..order).filter(|&j| j != n - 1));
                p
            }
            UnfoldKind::ModeN(_) => {
                let mut p = vec![n - 1];
                p.extend(n..order);
                p.extend(0..n - 1);
                p
            }
            UnfoldKind::Prefix(_) => (0..order).collect(),
        };
        Ok(perm)
    }

    fn unfold_dims(&self, kind: UnfoldKind) -> (usize, usize) {
        let n = kind.mode();
        match kind {
            UnfoldKind::Classical(_) | UnfoldKind::ModeN(_) => {
                let rows = self.shape[n - 1];
                (rows, self.len() / rows)
            }
            UnfoldKind::Prefix(_) => {
                let rows: usize = self.shape[..n].iter().product();
                (rows, self.len() / rows)
            }
        }
    }

    /// Matricization per `UnfoldKind`; returns an order-2 tensor.
    pub fn unfold(&self, kind: UnfoldKind) -> Result<DenseTensor> {
        let perm = self.unfold_perm(kind)?;
        let (rows, cols) = self.unfold_dims(kind);
        let permuted = self.permute_axes(&perm)?;
        DenseTensor::matrix(rows, cols, permuted.values)
    }

    /// Inverse of `unfold`: rebuild the tensor of `shape` from its matricization.
    pub fn fold(matrix: &DenseTensor, kind: UnfoldKind, shape: &[usize]) -> Result<DenseTensor> {
        if matrix.order() != 2 {
            return Err(Error::ShapeMismatch {
                context: "fold: not a matrix",
                expected: vec![2],
                actual: vec![matrix.order()],
            });
        }
        let probe = DenseTensor {
            shape: shape.to_vec(),
            values: Vec::new(),
        };
        check_shape(shape)?;
        let perm = probe.unfold_perm(kind)?;
        let total: usize = shape.iter().product();
        let (rows, cols) = {
            let tmp = DenseTensor {
                shape: shape.to_vec(),
                values: vec![0.0; total],
            };
            tmp.unfold_dims(kind)
        };
        if matrix.rows() != rows || matrix.cols() != cols {
            return Err(Error::ShapeMismatch {
                context: "fold: matrix dims inconsistent with shape and kind",
                expected: vec![rows, cols],
                actual: vec![matrix.rows(), matrix.cols()],
            });
        }
        // The matrix holds the permuted tensor; apply the inverse permutation.
        let perm_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
        let as_permuted = DenseTensor {
            shape: perm_shape,
            values: matrix.values.clone(),
        };
        let mut inv = vec![0usize; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        as_permuted.permute_axes(&inv)
    }

    /// Multi-TTM: contract `matrix` over the tensor mode it is paired with,
    /// for each `(mode, matrix)` pair (1-based modes, at most one per mode).
    pub fn multi_ttm(&self, factors: &[(usize, &DenseTensor)]) -> Result<DenseTensor> {
        let mut seen = vec![false; self.order()];
        for &(mode, mat) in factors {
            self.check_mode(mode)?;
            if std::mem::replace(&mut seen[mode - 1], true) {
                return Err(Error::InvalidArgument(format!(
                    "multi_ttm: mode {mode} provided twice"
                )));
            }
            if mat.order() != 2 || mat.cols() != self.shape[mode - 1] {
                return Err(Error::ShapeMismatch {
                    context: "multi_ttm: factor columns must match mode dimension",
                    expected: vec![self.shape[mode - 1]],
                    actual: mat.shape.clone(),
                });
            }
        }
        let mut acc = self.clone();
        for &(mode, mat) in factors {
            acc = acc.ttm(mode, mat)?;
        }
        Ok(acc)
    }

    fn ttm(&self, mode: usize, mat: &DenseTensor) -> Result<DenseTensor> {
        let unfolded = self.unfold(UnfoldKind::Classical(mode))?;
        let (rows_in, cols) = (unfolded.rows(), unfolded.cols());
        let rows_out = mat.rows();
        let mut prod = vec![0.0; rows_out * cols];
        linalg::gemm_strided(
            rows_out,
            rows_in,
            cols,
            1.0,
            mat.values(),
            0,
            1,
            rows_out,
            unfolded.values(),
            0,
            1,
            rows_in,
            0.0,
            &mut prod,
            0,
            1,
            rows_out,
        );
        let mut new_shape = self.shape.clone();
        new_shape[mode - 1] = rows_out;
        let matrix = DenseTensor::matrix(rows_out, cols, prod)?;
        DenseTensor::fold(&matrix, UnfoldKind::Classical(mode), &new_shape)
    }

    /// `X_{[n]} * U` without materializing the unfolding.
    ///
    /// `u` must have `prod_{j != n} I_j` rows (in `ModeN(n)` column order);
    /// the result is `I_n x u.cols()`, column-major. The unfolding is
    /// consumed as strided GEMM panels over whichever index group (the
    /// modes below or above `n`) is smaller.
    pub fn moden_times(&self, n: usize, u: &DenseTensor) -> Result<DenseTensor> {
        self.check_mode(n)?;
        let a: usize = self.shape[..n - 1].iter().product();
        let b = self.shape[n - 1];
        let c: usize = self.shape[n..].iter().product();
        if u.order() != 2 || u.rows() != a * c {
            return Err(Error::ShapeMismatch {
                context: "moden_times: row count must match the unfolding",
                expected: vec![a * c],
                actual: u.shape().to_vec(),
            });
        }
        let p = u.cols();
        let mut out = vec![0.0; b * p];
        if a <= c {
            for lo in 0..a {
                linalg::gemm_strided(
                    b,
                    c,
                    p,
                    1.0,
                    &self.values,
                    lo,
                    a,
                    a * b,
                    u.values(),
                    lo * c,
                    1,
                    a * c,
                    if lo == 0 { 0.0 } else { 1.0 },
                    &mut out,
                    0,
                    1,
                    b,
                );
            }
        } else {
            for hi in 0..c {
                linalg::gemm_strided(
                    b,
                    a,
                    p,
                    1.0,
                    &self.values,
                    a * b * hi,
                    a,
                    1,
                    u.values(),
                    hi,
                    c,
                    a * c,
                    if hi == 0 { 0.0 } else { 1.0 },
                    &mut out,
                    0,
                    1,
                    b,
                );
            }
        }
        DenseTensor::matrix(b, p, out)
    }

    /// Copy of the sub-tensor covering 1-based last-mode indices `[start, end]`.
    pub fn slice_last_mode(&self, start: usize, end: usize) -> Result<DenseTensor> {
        let last = self.order();
        let dim = self.shape[last - 1];
        if start < 1 || end < start || end > dim {
            return Err(Error::IndexOutOfRange {
                mode: last,
                index: if end > dim { end } else { start },
                dim,
            });
        }
        let block = self.len() / dim;
        let mut shape = self.shape.clone();
        shape[last - 1] = end - start + 1;
        let values = self.values[(start - 1) * block..end * block].to_vec();
        DenseTensor::new(shape, values)
    }

    /// Append `block` along the last mode; all other dims must agree.
    pub fn append_last_mode(&mut self, block: &DenseTensor) -> Result<()> {
        let last = self.order();
        if block.order() != last || block.shape[..last - 1] != self.shape[..last - 1] {
            return Err(Error::ShapeMismatch {
                context: "append_last_mode",
                expected: self.shape[..last - 1].to_vec(),
                actual: block.shape.clone(),
            });
        }
        self.values.extend_from_slice(&block.values);
        self.shape[last - 1] += block.shape[last - 1];
        Ok(())
    }
}

/// Dense complex tensor with the same layout rules as [`DenseTensor`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexDenseTensor {
    shape: Vec<usize>,
    values: Vec<Complex64>,
}

impl ComplexDenseTensor {
    pub fn new(shape: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        let total = check_shape(&shape)?;
        if values.len() != total {
            return Err(Error::ShapeMismatch {
                context: "ComplexDenseTensor::new",
                expected: vec![total],
                actual: vec![values.len()],
            });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let total = check_shape(&shape).expect("invalid shape");
        Self {
            shape,
            values: vec![Complex64::new(0.0, 0.0); total],
        }
    }

    pub fn from_real(t: &DenseTensor) -> Self {
        Self {
            shape: t.shape().to_vec(),
            values: t.values().iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.shape.len());
        let mut acc = 1;
        for &d in &self.shape {
            s.push(acc);
            acc *= d;
        }
        s
    }

    /// sqrt of the summed squared moduli.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}
