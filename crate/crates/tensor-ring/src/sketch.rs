//! Sketch constructions for the ALS subproblems: uniform sampling,
//! leverage-based sampling, and the Kronecker sub-sampled randomized
//! Fourier transform (KSRFT), plus the randomized batch solvers built
//! on them.
//!
//! Sampling never materializes a sketching matrix: index tables are drawn
//! per mode and applied to core slices and tensor fibers directly. The
//! diagonal rescaling of the sketch rows is dropped for random draws (it
//! cancels in the normal-equation solve); under exhaustive enumeration it
//! is kept so that sketched and unsketched solves agree exactly.

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg;
use crate::solvers::{self, SolveOptions};
use crate::tensor::{ComplexDenseTensor, DenseTensor, UnfoldKind};
use crate::tr::{self, TRCores};

/// The three sketch constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchKind {
    Uniform,
    Leverage,
    Ksrft,
}

/// How index tables are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawScheme {
    /// i.i.d. draws with replacement from the per-mode distributions.
    Replacement,
    /// Enumerate the full joint index grid exactly once; the configured
    /// sketch size is ignored and rows carry the `sqrt(J/m)` rescaling
    /// weight. Distribution inputs are bypassed. This exists to check
    /// sampling degeneracy against the unsketched solvers.
    Exhaustive,
}

/// A sketch construction plus its size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchSpec {
    pub kind: SketchKind,
    pub m: usize,
    pub scheme: DrawScheme,
}

impl SketchSpec {
    pub fn uniform(m: usize) -> Self {
        Self {
            kind: SketchKind::Uniform,
            m,
            scheme: DrawScheme::Replacement,
        }
    }

    pub fn leverage(m: usize) -> Self {
        Self {
            kind: SketchKind::Leverage,
            m,
            scheme: DrawScheme::Replacement,
        }
    }

    pub fn ksrft(m: usize) -> Self {
        Self {
            kind: SketchKind::Ksrft,
            m,
            scheme: DrawScheme::Replacement,
        }
    }

    pub fn exhaustive(kind: SketchKind) -> Self {
        Self {
            kind,
            m: 1,
            scheme: DrawScheme::Exhaustive,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidArgument("sketch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-row leverage scores of `M`: squared row norms of any orthonormal
/// basis of the column space, computed from the eigendecomposition of
/// `M^T M`. Gram eigenvalues below `rcond` times the largest are truncated,
/// the same spectral cutoff the normal-equation solver applies to its Gram
/// matrix. The scores sum to the numerical rank.
pub fn leverage_scores(m: &DenseTensor, rcond: f64) -> Vec<f64> {
    leverage_scores_with_rank(m, rcond).0
}

pub(crate) fn leverage_scores_with_rank(m: &DenseTensor, rcond: f64) -> (Vec<f64>, usize) {
    assert_eq!(m.order(), 2);
    let (rows, cols) = (m.rows(), m.cols());
    let gram = linalg::matmul_tn(rows, cols, m.values(), cols, m.values());
    let (w, v) = linalg::sym_eig(cols, &gram);
    let lam_max = w.iter().fold(0.0f64, |acc, x| acc.max(*x));
    if lam_max <= 0.0 {
        return (vec![0.0; rows], 0);
    }
    let cut = rcond * lam_max;
    let kept: Vec<usize> = (0..cols).filter(|&k| w[k] > cut).collect();
    let mv = linalg::matmul(rows, cols, m.values(), cols, &v);
    let mut scores = vec![0.0; rows];
    for &k in &kept {
        let inv = 1.0 / w[k];
        let col = &mv[k * rows..(k + 1) * rows];
        for i in 0..rows {
            scores[i] += col[i] * col[i] * inv;
        }
    }
    (scores, kept.len())
}

/// Leverage-based probability distribution of a core over `[I_n]`,
/// computed on the `Classical(2)` unfolding of the core.
pub fn core_distribution(core: &DenseTensor, rcond: f64) -> Result<Vec<f64>> {
    let m = core.unfold(UnfoldKind::Classical(2))?;
    let (scores, rank) = leverage_scores_with_rank(&m, rcond);
    if rank == 0 {
        return Err(Error::ZeroMatrix);
    }
    let inv = 1.0 / rank as f64;
    Ok(scores.iter().map(|s| s * inv).collect())
}

/// One sampled mode: which mode, its extent, and the drawn 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeDraw {
    pub mode: usize,
    pub dim: usize,
    pub idxs: Vec<usize>,
}

/// Distribution request for one mode; `weights: None` means uniform.
#[derive(Debug, Clone)]
pub struct SampleDist<'a> {
    pub mode: usize,
    pub dim: usize,
    pub weights: Option<&'a [f64]>,
}

/// Index table with one column per sampled mode, all of length `m`,
/// kept in the draw (ring) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleIndexTable {
    cols: Vec<ModeDraw>,
    m: usize,
    exhaustive: bool,
}

impl SampleIndexTable {
    /// m i.i.d. draws per mode, with replacement, reproducible under the
    /// caller's RNG.
    pub fn draw(dists: &[SampleDist], m: usize, rng: &mut impl Rng) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        let mut cols = Vec::with_capacity(dists.len());
        for d in dists {
            let idxs = draw_mode_indices(d, m, rng)?;
            cols.push(ModeDraw {
                mode: d.mode,
                dim: d.dim,
                idxs,
            });
        }
        Ok(Self {
            cols,
            m,
            exhaustive: false,
        })
    }

    /// Table from pre-drawn columns (all of length `m`).
    pub fn from_columns(cols: Vec<ModeDraw>, m: usize) -> Result<Self> {
        if cols.iter().any(|c| c.idxs.len() != m) {
            return Err(Error::InvalidArgument(
                "index table columns must all have length m".into(),
            ));
        }
        Ok(Self {
            cols,
            m,
            exhaustive: false,
        })
    }

    pub(crate) fn from_parts(cols: Vec<ModeDraw>, m: usize, exhaustive: bool) -> Self {
        debug_assert!(cols.iter().all(|c| c.idxs.len() == m));
        Self {
            cols,
            m,
            exhaustive,
        }
    }

    /// Enumerate the full joint grid once: column k holds the k-th digit of
    /// the row number in mixed radix with the first listed mode fastest,
    /// matching the column order of the mode-N unfolding.
    pub fn exhaustive(mode_dims: &[(usize, usize)]) -> Self {
        let m: usize = mode_dims.iter().map(|&(_, d)| d).product();
        let mut cols = Vec::with_capacity(mode_dims.len());
        let mut stride = 1usize;
        for &(mode, dim) in mode_dims {
            let idxs = (0..m).map(|j| (j / stride) % dim + 1).collect();
            cols.push(ModeDraw { mode, dim, idxs });
            stride *= dim;
        }
        Self {
            cols,
            m,
            exhaustive: true,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> &[ModeDraw] {
        &self.cols
    }

    pub fn column(&self, mode: usize) -> Option<&ModeDraw> {
        self.cols.iter().find(|c| c.mode == mode)
    }

    /// Uniform rescaling weight per sampled row: `sqrt(J/m)` under
    /// exhaustive enumeration of a grid of size `J`, 1 otherwise.
    pub fn row_weight(&self) -> f64 {
        if self.exhaustive {
            let j: usize = self.cols.iter().map(|c| c.dim).product();
            (j as f64 / self.m as f64).sqrt()
        } else {
            1.0
        }
    }
}

/// Draw per-mode index tables (Alg. "sampled subchain and input tensors",
/// sampling stage): m i.i.d. draws per mode, reproducible under seed.
pub fn sample_indices(
    dists: &[SampleDist],
    m: usize,
    rng: &mut impl Rng,
) -> Result<SampleIndexTable> {
    SampleIndexTable::draw(dists, m, rng)
}

fn draw_mode_indices(d: &SampleDist, m: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    match d.weights {
        None => Ok((0..m).map(|_| rng.gen_range(1..=d.dim)).collect()),
        Some(w) => {
            if w.len() != d.dim {
                return Err(Error::InvalidDistribution(format!(
                    "mode {}: {} weights for dimension {}",
                    d.mode,
                    w.len(),
                    d.dim
                )));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "mode {}: weights must be finite and nonnegative",
                    d.mode
                )));
            }
            let dist = WeightedIndex::new(w)
                .map_err(|e| Error::InvalidDistribution(format!("mode {}: {e}", d.mode)))?;
            Ok((0..m).map(|_| dist.sample(rng) + 1).collect())
        }
    }
}

/// Gather `core(:, idxs, :)`.
pub(crate) fn sample_core(core: &DenseTensor, idxs: &[usize]) -> DenseTensor {
    let (rl, im, rr) = (core.shape()[0], core.shape()[1], core.shape()[2]);
    let v = core.values();
    let m = idxs.len();
    let mut out = vec![0.0; rl * m * rr];
    for b in 0..rr {
        for (j, &i) in idxs.iter().enumerate() {
            debug_assert!(i >= 1 && i <= im);
            let src = rl * (i - 1) + rl * im * b;
            let dst = rl * j + rl * m * b;
            out[dst..dst + rl].copy_from_slice(&v[src..src + rl]);
        }
    }
    DenseTensor::new(vec![rl, m, rr], out).expect("sampled core shape")
}

pub(crate) fn sample_core_c(core: &ComplexDenseTensor, idxs: &[usize]) -> ComplexDenseTensor {
    let (rl, im, rr) = (core.shape()[0], core.shape()[1], core.shape()[2]);
    let v = core.values();
    let m = idxs.len();
    let mut out = vec![Complex64::new(0.0, 0.0); rl * m * rr];
    for b in 0..rr {
        for (j, &i) in idxs.iter().enumerate() {
            debug_assert!(i >= 1 && i <= im);
            let src = rl * (i - 1) + rl * im * b;
            let dst = rl * j + rl * m * b;
            out[dst..dst + rl].copy_from_slice(&v[src..src + rl]);
        }
    }
    ComplexDenseTensor::new(vec![rl, m, rr], out).expect("sampled core shape")
}

fn identity_slices(r: usize, m: usize) -> DenseTensor {
    let mut v = vec![0.0; r * m * r];
    for a in 0..r {
        for j in 0..m {
            v[a + r * j + r * m * a] = 1.0;
        }
    }
    DenseTensor::new(vec![r, m, r], v).expect("identity slices")
}

fn identity_slices_c(r: usize, m: usize) -> ComplexDenseTensor {
    let mut v = vec![Complex64::new(0.0, 0.0); r * m * r];
    for a in 0..r {
        for j in 0..m {
            v[a + r * j + r * m * a] = Complex64::new(1.0, 0.0);
        }
    }
    ComplexDenseTensor::new(vec![r, m, r], v).expect("identity slices")
}

fn slices_hadamard_c(a: &ComplexDenseTensor, b: &ComplexDenseTensor) -> ComplexDenseTensor {
    let (i1, j, k) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    debug_assert_eq!(b.shape()[0], k);
    debug_assert_eq!(b.shape()[1], j);
    let i2 = b.shape()[2];
    let (av, bv) = (a.values(), b.values());
    let mut out = vec![Complex64::new(0.0, 0.0); i1 * j * i2];
    for c in 0..i2 {
        for y in 0..j {
            for r in 0..i1 {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..k {
                    acc += av[r + i1 * y + i1 * j * l] * bv[l + k * y + k * j * c];
                }
                out[r + i1 * y + i1 * j * c] = acc;
            }
        }
    }
    ComplexDenseTensor::new(vec![i1, j, i2], out).expect("hadamard shape")
}

/// Chain sampled cores (ring order) from identity slices; result
/// `R_left x m x R_right`.
pub(crate) fn chain_sampled(parts: &[&DenseTensor], r_left: usize, m: usize) -> DenseTensor {
    let mut acc = identity_slices(r_left, m);
    for p in parts {
        acc = tr::slices_hadamard(&acc, p).expect("sampled chain shapes agree");
    }
    acc
}

pub(crate) fn chain_sampled_c(
    parts: &[&ComplexDenseTensor],
    r_left: usize,
    m: usize,
) -> ComplexDenseTensor {
    let mut acc = identity_slices_c(r_left, m);
    for p in parts {
        acc = slices_hadamard_c(&acc, p);
    }
    acc
}

/// Mode-2 unfolding of a sampled subchain `(R_left, m, R_right)` as an
/// `m x (R_right * R_left)` column-major matrix (right-rank index fastest).
pub(crate) fn subchain_cols_small(t: &DenseTensor) -> DenseTensor {
    let (rl, m, rr) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let v = t.values();
    let mut out = vec![0.0; m * rr * rl];
    for a in 0..rl {
        for b in 0..rr {
            let col = b + rr * a;
            for j in 0..m {
                out[j + m * col] = v[a + rl * j + rl * m * b];
            }
        }
    }
    DenseTensor::matrix(m, rr * rl, out).expect("unfolded sampled chain")
}

pub(crate) fn subchain_cols_small_c(t: &ComplexDenseTensor) -> (Vec<Complex64>, usize, usize) {
    let (rl, m, rr) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    let v = t.values();
    let mut out = vec![Complex64::new(0.0, 0.0); m * rr * rl];
    for a in 0..rl {
        for b in 0..rr {
            let col = b + rr * a;
            for j in 0..m {
                out[j + m * col] = v[a + rl * j + rl * m * b];
            }
        }
    }
    (out, m, rr * rl)
}

/// Gather sampled mode-`n` fibers of `x` as an `I_n x m` matrix; column `j`
/// is the fiber at the table's row-`j` indices.
pub(crate) fn gather_fibers(
    x: &DenseTensor,
    n: usize,
    table: &SampleIndexTable,
) -> Result<DenseTensor> {
    let strides = x.strides();
    let dim_n = x.shape()[n - 1];
    let m = table.m();
    for c in table.cols() {
        if c.mode == n || c.mode > x.order() {
            return Err(Error::InvalidArgument(format!(
                "fiber gather: unexpected mode {} in table",
                c.mode
            )));
        }
        let d = x.shape()[c.mode - 1];
        if let Some(&bad) = c.idxs.iter().find(|&&i| i < 1 || i > d) {
            return Err(Error::IndexOutOfRange {
                mode: c.mode,
                index: bad,
                dim: d,
            });
        }
    }
    let mut out = vec![0.0; dim_n * m];
    let xv = x.values();
    let sn = strides[n - 1];
    for j in 0..m {
        let mut base = 0usize;
        for c in table.cols() {
            base += (c.idxs[j] - 1) * strides[c.mode - 1];
        }
        let col = &mut out[j * dim_n..(j + 1) * dim_n];
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = xv[base + i * sn];
        }
    }
    DenseTensor::matrix(dim_n, m, out)
}

pub(crate) fn gather_fibers_c(
    x: &ComplexDenseTensor,
    n: usize,
    table: &SampleIndexTable,
) -> Result<Vec<Complex64>> {
    let strides = x.strides();
    let dim_n = x.shape()[n - 1];
    let m = table.m();
    let mut out = vec![Complex64::new(0.0, 0.0); dim_n * m];
    let xv = x.values();
    let sn = strides[n - 1];
    for j in 0..m {
        let mut base = 0usize;
        for c in table.cols() {
            let d = x.shape()[c.mode - 1];
            let i = c.idxs[j];
            if i < 1 || i > d {
                return Err(Error::IndexOutOfRange {
                    mode: c.mode,
                    index: i,
                    dim: d,
                });
            }
            base += (i - 1) * strides[c.mode - 1];
        }
        let col = &mut out[j * dim_n..(j + 1) * dim_n];
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = xv[base + i * sn];
        }
    }
    Ok(out)
}

/// Sampled subchain and input tensors: the sampled `G^{!=n}_S`
/// (`R_{n+1} x m x R_n`, built from identity slices by slices-Hadamard
/// products in ring order) and the sampled unfolding `X_{S[n]}` (`I_n x m`).
/// Both carry the table's uniform rescaling weight.
pub fn ssit(
    cores: &TRCores,
    x: &DenseTensor,
    n: usize,
    table: &SampleIndexTable,
) -> Result<(DenseTensor, DenseTensor)> {
    let ring = cores.ring_order(n);
    let got: Vec<usize> = table.cols().iter().map(|c| c.mode).collect();
    if ring != got {
        return Err(Error::InvalidArgument(format!(
            "ssit: table modes {got:?} must be the ring order {ring:?}"
        )));
    }
    for c in table.cols() {
        let dim = cores.core(c.mode).shape()[1];
        if let Some(&bad) = c.idxs.iter().find(|&&i| i < 1 || i > dim) {
            return Err(Error::IndexOutOfRange {
                mode: c.mode,
                index: bad,
                dim,
            });
        }
    }
    let sampled: Vec<DenseTensor> = table
        .cols()
        .iter()
        .map(|c| sample_core(cores.core(c.mode), &c.idxs))
        .collect();
    let refs: Vec<&DenseTensor> = sampled.iter().collect();
    let ranks = cores.ranks();
    let r_left = ranks[n % cores.order()];
    let mut g_s = chain_sampled(&refs, r_left, table.m());
    let mut x_s = gather_fibers(x, n, table)?;
    let w = table.row_weight();
    if w != 1.0 {
        for v in g_s.values_mut() {
            *v *= w;
        }
        for v in x_s.values_mut() {
            *v *= w;
        }
    }
    Ok((g_s, x_s))
}

// ---------------------------------------------------------------------------
// KSRFT
// ---------------------------------------------------------------------------

/// Per-mode sign flips and (implicitly unitary) DFTs plus a uniform sample
/// table over the modes other than `n`.
#[derive(Debug, Clone)]
pub struct KsrftOperator {
    pub signs: Vec<Vec<f64>>,
    table: SampleIndexTable,
    pub m: usize,
    pub n: usize,
}

impl KsrftOperator {
    /// Fresh sign flips for every mode of `dims` and uniform draws (or the
    /// exhaustive grid) over the modes other than `n`.
    pub fn draw(
        dims: &[usize],
        n: usize,
        m: usize,
        scheme: DrawScheme,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if n < 1 || n > dims.len() {
            return Err(Error::InvalidMode {
                mode: n,
                order: dims.len(),
            });
        }
        let signs = draw_signs(dims, rng);
        let order = dims.len();
        let ring: Vec<usize> = (n + 1..=order).chain(1..n).collect();
        let table = match scheme {
            DrawScheme::Replacement => {
                let dists: Vec<SampleDist> = ring
                    .iter()
                    .map(|&k| SampleDist {
                        mode: k,
                        dim: dims[k - 1],
                        weights: None,
                    })
                    .collect();
                SampleIndexTable::draw(&dists, m, rng)?
            }
            DrawScheme::Exhaustive => {
                let mode_dims: Vec<(usize, usize)> =
                    ring.iter().map(|&k| (k, dims[k - 1])).collect();
                SampleIndexTable::exhaustive(&mode_dims)
            }
        };
        let m = table.m();
        Ok(Self { signs, table, m, n })
    }

    pub fn table(&self) -> &SampleIndexTable {
        &self.table
    }
}

pub(crate) fn draw_signs(dims: &[usize], rng: &mut impl Rng) -> Vec<Vec<f64>> {
    dims.iter()
        .map(|&d| {
            (0..d)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

/// In-place unitary DFT over every length-`dim` fiber along the axis with
/// the given stride.
fn fft_fibers(values: &mut [Complex64], dim: usize, stride: usize, inner: usize, outer: usize) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(dim);
    let scale = 1.0 / (dim as f64).sqrt();
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    for hi in 0..outer {
        for lo in 0..inner {
            let base = lo + hi * inner * dim;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = values[base + i * stride];
            }
            fft.process(&mut buf);
            for (i, b) in buf.iter().enumerate() {
                values[base + i * stride] = b * scale;
            }
        }
    }
}

/// Mix one mode of a complex tensor: multiply by the mode's sign flips,
/// then apply the unitary DFT along that mode.
fn mix_mode(t: &mut ComplexDenseTensor, mode: usize, signs: &[f64]) {
    let dim = t.shape()[mode - 1];
    debug_assert_eq!(signs.len(), dim);
    let stride = t.strides()[mode - 1];
    let inner = stride;
    let outer = t.len() / (dim * inner);
    {
        let v = t.values_mut();
        for hi in 0..outer {
            for (i, &s) in signs.iter().enumerate() {
                if s == 1.0 {
                    continue;
                }
                let base = hi * inner * dim + i * stride;
                for lo in 0..inner {
                    v[base + lo] *= s;
                }
            }
        }
    }
    fft_fibers(t.values_mut(), dim, stride, inner, outer);
}

/// `G x_2 (F D)`: sign-flip then unitary DFT along the middle mode.
pub fn ksrft_mix_core(core: &DenseTensor, signs: &[f64]) -> ComplexDenseTensor {
    let mut c = ComplexDenseTensor::from_real(core);
    mix_mode(&mut c, 2, signs);
    c
}

/// Mix the listed cores (1-based modes) with their per-mode sign flips.
pub fn ksrft_mix_cores(
    cores: &TRCores,
    signs: &[Vec<f64>],
    modes: &[usize],
) -> Vec<ComplexDenseTensor> {
    modes
        .iter()
        .map(|&j| ksrft_mix_core(cores.core(j), &signs[j - 1]))
        .collect()
}

/// Mix every mode of `x`.
pub fn ksrft_mix_tensor(x: &DenseTensor, signs: &[Vec<f64>]) -> ComplexDenseTensor {
    let mut c = ComplexDenseTensor::from_real(x);
    for mode in 1..=x.order() {
        mix_mode(&mut c, mode, &signs[mode - 1]);
    }
    c
}

/// Undo the mode-`n` mixing on a sampled unfolding: apply `D_n F_n^*` to
/// every column (each column is a mode-`n` fiber of the mixed tensor).
pub(crate) fn unmix_columns(values: &mut [Complex64], dim: usize, cols: usize, signs: &[f64]) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(dim);
    let scale = 1.0 / (dim as f64).sqrt();
    for c in 0..cols {
        let col = &mut values[c * dim..(c + 1) * dim];
        fft.process(col);
        for (i, v) in col.iter_mut().enumerate() {
            *v *= scale * signs[i];
        }
    }
}

/// KSRFT sketch of the mode-`n` subproblem: mixes the cores other than `n`
/// and the whole tensor, uniform-samples both, and unmixes mode `n` of the
/// sampled unfolding. Returns the sketched subchain `(R_{n+1} x m x R_n)`
/// and the sketched unfolding (`I_n x m`), both complex.
pub fn ksrft_sketch(
    cores: &TRCores,
    x: &DenseTensor,
    n: usize,
    op: &KsrftOperator,
) -> Result<(ComplexDenseTensor, ComplexDenseTensor)> {
    if op.n != n {
        return Err(Error::InvalidArgument(format!(
            "ksrft_sketch: operator drawn for mode {}, used for mode {n}",
            op.n
        )));
    }
    let ring = cores.ring_order(n);
    let mixed: Vec<ComplexDenseTensor> = ring
        .iter()
        .map(|&k| ksrft_mix_core(cores.core(k), &op.signs[k - 1]))
        .collect();
    let sampled: Vec<ComplexDenseTensor> = mixed
        .iter()
        .zip(op.table.cols())
        .map(|(c, col)| sample_core_c(c, &col.idxs))
        .collect();
    let refs: Vec<&ComplexDenseTensor> = sampled.iter().collect();
    let ranks = cores.ranks();
    let r_left = ranks[n % cores.order()];
    let mut g_s = chain_sampled_c(&refs, r_left, op.table.m());

    let x_hat = ksrft_mix_tensor(x, &op.signs);
    let mut x_cols = gather_fibers_c(&x_hat, n, &op.table)?;
    let dim_n = x.shape()[n - 1];
    unmix_columns(&mut x_cols, dim_n, op.table.m(), &op.signs[n - 1]);

    let w = op.table.row_weight();
    if w != 1.0 {
        for v in g_s.values_mut() {
            *v *= w;
        }
        for v in x_cols.iter_mut() {
            *v *= w;
        }
    }
    let x_s = ComplexDenseTensor::new(vec![dim_n, op.table.m()], x_cols)?;
    Ok((g_s, x_s))
}

// ---------------------------------------------------------------------------
// Randomized batch solvers
// ---------------------------------------------------------------------------

/// TR-ALS with sampled subproblems (uniform or leverage-based). Leverage
/// distributions are recomputed only for the core just updated.
pub fn tr_als_sampled(
    x: &DenseTensor,
    ranks: &[usize],
    init: &TRCores,
    spec: &SketchSpec,
    opts: &SolveOptions,
) -> Result<(TRCores, Vec<f64>)> {
    spec.validate()?;
    opts_validate(opts)?;
    if spec.kind == SketchKind::Ksrft {
        return Err(Error::InvalidArgument(
            "tr_als_sampled: use tr_ksrft_als for the KSRFT sketch".into(),
        ));
    }
    check_sampled_problem(x, ranks, init)?;
    let n_modes = init.order();
    let mut cores = init.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut dists: Option<Vec<Vec<f64>>> = match spec.kind {
        SketchKind::Leverage => Some(
            (1..=n_modes)
                .map(|k| core_distribution(cores.core(k), opts.pinv_rcond))
                .collect::<Result<_>>()?,
        ),
        _ => None,
    };
    let mut errors = Vec::new();
    let mut prev: Option<f64> = None;
    for _sweep in 0..opts.max_iters {
        for n in 1..=n_modes {
            let table = draw_table_for_mode(&cores, n, spec, dists.as_deref(), &mut rng)?;
            let (g_s, x_s) = ssit(&cores, x, n, &table)?;
            let u = subchain_cols_small(&g_s);
            let p = DenseTensor::matrix(
                x_s.rows(),
                u.cols(),
                linalg::matmul(x_s.rows(), x_s.cols(), x_s.values(), u.cols(), u.values()),
            )?;
            let q = DenseTensor::matrix(
                u.cols(),
                u.cols(),
                linalg::matmul_tn(u.rows(), u.cols(), u.values(), u.cols(), u.values()),
            )?;
            let g = solvers::solve_normal(&q, &p, opts.pinv_rcond)?;
            let (rl, i, rr) = solvers::core_dims(&cores, n);
            cores.set_core(n, DenseTensor::fold(&g, UnfoldKind::Classical(2), &[rl, i, rr])?)?;
            if let Some(d) = dists.as_mut() {
                d[n - 1] = core_distribution(cores.core(n), opts.pinv_rcond)?;
            }
        }
        let err = tr::relative_error(x, &cores)?;
        errors.push(err);
        if let Some(p) = prev {
            if (p - err).abs() < opts.tol {
                break;
            }
        }
        prev = Some(err);
    }
    Ok((cores, errors))
}

fn opts_validate(opts: &SolveOptions) -> Result<()> {
    if opts.max_iters < 1 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    Ok(())
}

fn check_sampled_problem(x: &DenseTensor, ranks: &[usize], init: &TRCores) -> Result<()> {
    if init.dims().as_slice() != x.shape() {
        return Err(Error::ShapeMismatch {
            context: "sketched solver: init core dims must match tensor",
            expected: x.shape().to_vec(),
            actual: init.dims(),
        });
    }
    if init.ranks().as_slice() != ranks {
        return Err(Error::RankChain(format!(
            "init ranks {:?} do not match requested {:?}",
            init.ranks(),
            ranks
        )));
    }
    Ok(())
}

fn draw_table_for_mode(
    cores: &TRCores,
    n: usize,
    spec: &SketchSpec,
    dists: Option<&[Vec<f64>]>,
    rng: &mut impl Rng,
) -> Result<SampleIndexTable> {
    let ring = cores.ring_order(n);
    match spec.scheme {
        DrawScheme::Exhaustive => {
            let mode_dims: Vec<(usize, usize)> = ring
                .iter()
                .map(|&k| (k, cores.core(k).shape()[1]))
                .collect();
            Ok(SampleIndexTable::exhaustive(&mode_dims))
        }
        DrawScheme::Replacement => {
            let reqs: Vec<SampleDist> = ring
                .iter()
                .map(|&k| SampleDist {
                    mode: k,
                    dim: cores.core(k).shape()[1],
                    weights: dists.map(|d| d[k - 1].as_slice()),
                })
                .collect();
            SampleIndexTable::draw(&reqs, spec.m, rng)
        }
    }
}

/// TR-ALS with the KSRFT sketch: one mixing of the input tensor up front,
/// per-subproblem uniform sampling in the mixed domain, and real-part
/// normal equations for the updates.
pub fn tr_ksrft_als(
    x: &DenseTensor,
    ranks: &[usize],
    init: &TRCores,
    spec: &SketchSpec,
    opts: &SolveOptions,
) -> Result<(TRCores, Vec<f64>)> {
    spec.validate()?;
    opts_validate(opts)?;
    if spec.kind != SketchKind::Ksrft {
        return Err(Error::InvalidArgument(
            "tr_ksrft_als: sketch kind must be Ksrft".into(),
        ));
    }
    check_sampled_problem(x, ranks, init)?;
    let n_modes = init.order();
    let mut cores = init.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let signs = draw_signs(&cores.dims(), &mut rng);
    let x_hat = ksrft_mix_tensor(x, &signs);
    let mut mixed: Vec<ComplexDenseTensor> = (1..=n_modes)
        .map(|k| ksrft_mix_core(cores.core(k), &signs[k - 1]))
        .collect();
    let mut errors = Vec::new();
    let mut prev: Option<f64> = None;
    for _sweep in 0..opts.max_iters {
        for n in 1..=n_modes {
            let ring = cores.ring_order(n);
            let table = match spec.scheme {
                DrawScheme::Exhaustive => {
                    let mode_dims: Vec<(usize, usize)> = ring
                        .iter()
                        .map(|&k| (k, cores.core(k).shape()[1]))
                        .collect();
                    SampleIndexTable::exhaustive(&mode_dims)
                }
                DrawScheme::Replacement => {
                    let reqs: Vec<SampleDist> = ring
                        .iter()
                        .map(|&k| SampleDist {
                            mode: k,
                            dim: cores.core(k).shape()[1],
                            weights: None,
                        })
                        .collect();
                    SampleIndexTable::draw(&reqs, spec.m, &mut rng)?
                }
            };
            let sampled: Vec<ComplexDenseTensor> = ring
                .iter()
                .zip(table.cols())
                .map(|(&k, col)| sample_core_c(&mixed[k - 1], &col.idxs))
                .collect();
            let refs: Vec<&ComplexDenseTensor> = sampled.iter().collect();
            let r_left = ranks[n % n_modes];
            let g_s = chain_sampled_c(&refs, r_left, table.m());
            let (mut u, um, ucols) = subchain_cols_small_c(&g_s);
            let mut x_cols = gather_fibers_c(&x_hat, n, &table)?;
            let dim_n = x.shape()[n - 1];
            unmix_columns(&mut x_cols, dim_n, table.m(), &signs[n - 1]);
            let w = table.row_weight();
            if w != 1.0 {
                for v in u.iter_mut() {
                    *v *= w;
                }
                for v in x_cols.iter_mut() {
                    *v *= w;
                }
            }
            // real-part normal equations: P = Re(X_S conj(U)), Q = Re(U^T conj(U))
            let (p, q) = real_normal_parts(&x_cols, dim_n, &u, um, ucols)?;
            let g = solvers::solve_normal(&q, &p, opts.pinv_rcond)?;
            let (rl, i, rr) = solvers::core_dims(&cores, n);
            cores.set_core(n, DenseTensor::fold(&g, UnfoldKind::Classical(2), &[rl, i, rr])?)?;
            mixed[n - 1] = ksrft_mix_core(cores.core(n), &signs[n - 1]);
        }
        let err = tr::relative_error(x, &cores)?;
        errors.push(err);
        if let Some(p) = prev {
            if (p - err).abs() < opts.tol {
                break;
            }
        }
        prev = Some(err);
    }
    Ok((cores, errors))
}

/// `P = Re(X_S conj(U))` and `Q = Re(U^T conj(U))` for a complex sketched
/// subproblem.
pub(crate) fn real_normal_parts(
    x_cols: &[Complex64],
    rows: usize,
    u: &[Complex64],
    um: usize,
    ucols: usize,
) -> Result<(DenseTensor, DenseTensor)> {
    let mut p_c = vec![Complex64::new(0.0, 0.0); rows * ucols];
    for c in 0..ucols {
        let ucol = &u[c * um..(c + 1) * um];
        for j in 0..um {
            let z = ucol[j].conj();
            if z == Complex64::new(0.0, 0.0) {
                continue;
            }
            let xcol = &x_cols[j * rows..(j + 1) * rows];
            let out = &mut p_c[c * rows..(c + 1) * rows];
            for i in 0..rows {
                out[i] += xcol[i] * z;
            }
        }
    }
    let q_c = linalg::cmatmul_t_conj(um, ucols, u, ucols, u);
    let p = DenseTensor::matrix(rows, ucols, p_c.iter().map(|z| z.re).collect())?;
    let q = DenseTensor::matrix(ucols, ucols, q_c.iter().map(|z| z.re).collect())?;
    Ok((p, q))
}

// ---------------------------------------------------------------------------
// Sketch-size guidance (documentation-grade, never enforced)
// ---------------------------------------------------------------------------

/// Suggested sketch size for uniform sampling: smallest m with
/// `m >= (2 gamma R2 / eps) * max(48/eps * ln(96 gamma R2 / (eps^2 sqrt(delta))), 1/delta)`
/// where `R2 = r_n * r_next` and `gamma > 1` bounds the row-norm
/// inhomogeneity of the subchain's left singular vectors. Advisory only.
pub fn uniform_sketch_size(eps: f64, delta: f64, gamma: f64, r_n: usize, r_next: usize) -> usize {
    let r2 = (r_n * r_next) as f64;
    let a = 48.0 / eps * (96.0 * gamma * r2 / (eps * eps * delta.sqrt())).ln();
    let m = (2.0 * gamma * r2 / eps) * a.max(1.0 / delta);
    m.ceil().max(1.0) as usize
}

/// Suggested sketch size for leverage-based sampling: smallest m with
/// `m > (prod_j R_j^2) * max(16/(3 (sqrt 2 - 1)^2) * ln(4 R_n R_{n+1} / delta), 4/(eps delta))`.
/// Advisory only.
pub fn leverage_sketch_size(eps: f64, delta: f64, ranks: &[usize], n: usize) -> usize {
    let prod: f64 = ranks.iter().map(|&r| (r * r) as f64).product();
    let r2 = (ranks[n - 1] * ranks[n % ranks.len()]) as f64;
    let c = 16.0 / (3.0 * (std::f64::consts::SQRT_2 - 1.0).powi(2));
    let m = prod * (c * (4.0 * r2 / delta).ln()).max(4.0 / (eps * delta));
    (m.floor() as usize).max(1) + 1
}

/// Suggested KSRFT sketch size from the simplified bound
/// `m = O(eps^-1 R2^{2(N-1)} log^{2N-3}(R2/eps) log^4(R2/eps log(R2/eps)) log prod I_j)`
/// with the implicit constant taken as 1 (the theory leaves it
/// unspecified). `r2 = R_n * R_{n+1}`. Advisory only.
pub fn ksrft_sketch_size(eps: f64, r2: usize, order: usize, dim_product: f64) -> usize {
    let r2 = r2 as f64;
    let n = order as f64;
    let lg = (r2 / eps).ln().max(1.0);
    let m = (1.0 / eps)
        * r2.powf(2.0 * (n - 1.0))
        * lg.powf(2.0 * n - 3.0)
        * ((r2 / eps) * lg).ln().max(1.0).powi(4)
        * dim_product.ln().max(1.0);
    m.ceil().max(1.0) as usize
}
