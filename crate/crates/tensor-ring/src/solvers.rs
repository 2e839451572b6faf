//! Deterministic batch decomposition: TR-ALS and the structure-exploiting
//! normal-equation variant TR-ALS-NE, sharing one least-squares kernel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{DenseTensor, UnfoldKind};
use crate::tr::{self, GramTensor, TRCores};

/// Iteration controls shared by all solvers.
///
/// `tol` is the absolute change in relative error between two successive
/// sweeps; `pinv_rcond` truncates singular values below
/// `pinv_rcond * sigma_max` in every pseudoinverse solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub pinv_rcond: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-10,
            seed: 0,
            pinv_rcond: 1e-12,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) || !(self.pinv_rcond >= 0.0) {
            return Err(Error::InvalidArgument(
                "tol and pinv_rcond must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Minimum-norm solution `X = P * Q^+` for symmetric `Q`, via a symmetric
/// eigendecomposition with eigenvalues below `rcond * sigma_max` truncated.
pub fn solve_normal(q: &DenseTensor, p: &DenseTensor, rcond: f64) -> Result<DenseTensor> {
    if q.order() != 2 || q.rows() != q.cols() {
        return Err(Error::ShapeMismatch {
            context: "solve_normal: Q must be square",
            expected: vec![q.rows(), q.rows()],
            actual: q.shape().to_vec(),
        });
    }
    if p.order() != 2 || p.cols() != q.rows() {
        return Err(Error::ShapeMismatch {
            context: "solve_normal: P columns must match Q",
            expected: vec![q.rows()],
            actual: p.shape().to_vec(),
        });
    }
    if q.values().iter().any(|v| !v.is_finite()) || p.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "solve_normal",
        });
    }
    let n = q.rows();
    let qmax = q.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for c in 0..n {
        for r in 0..c {
            if (q.at2(r, c) - q.at2(c, r)).abs() > 1e-10 * qmax.max(1e-300) {
                return Err(Error::InvalidArgument(
                    "solve_normal: Q is not symmetric".into(),
                ));
            }
        }
    }
    let (w, v) = linalg::sym_eig(n, q.values());
    let sigma_max = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let rows = p.rows();
    let mut pv = linalg::matmul(rows, n, p.values(), n, v.as_slice());
    for k in 0..n {
        let inv = if sigma_max > 0.0 && w[k].abs() > rcond * sigma_max {
            1.0 / w[k]
        } else {
            0.0
        };
        for r in 0..rows {
            pv[r + k * rows] *= inv;
        }
    }
    let mut x = vec![0.0; rows * n];
    linalg::gemm_strided(
        rows, n, n, 1.0, &pv, 0, 1, rows, &v, 0, n, 1, 0.0, &mut x, 0, 1, rows,
    );
    DenseTensor::matrix(rows, n, x)
}

/// Random initial cores: standard normal entries scaled by
/// `1/sqrt(R_n R_{n+1})`, reproducible under `seed`.
pub fn random_init_cores(dims: &[usize], ranks: &[usize], seed: u64) -> Result<TRCores> {
    if dims.len() != ranks.len() {
        return Err(Error::RankChain(format!(
            "{} ranks for {} modes",
            ranks.len(),
            dims.len()
        )));
    }
    if ranks.iter().any(|&r| r == 0) {
        return Err(Error::RankChain("ranks must be positive".into()));
    }
    let n = dims.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let cores = (0..n)
        .map(|k| {
            let rl = ranks[k];
            let rr = ranks[(k + 1) % n];
            let scale = 1.0 / ((rl * rr) as f64).sqrt();
            let vals: Vec<f64> = (0..rl * dims[k] * rr)
                .map(|_| {
                    let x: f64 = normal.sample(&mut rng);
                    x * scale
                })
                .collect();
            DenseTensor::new(vec![rl, dims[k], rr], vals).unwrap()
        })
        .collect();
    TRCores::new(cores)
}

fn check_problem(x: &DenseTensor, ranks: &[usize], init: &TRCores) -> Result<()> {
    if init.dims().as_slice() != x.shape() {
        return Err(Error::ShapeMismatch {
            context: "solver: init core dims must match tensor",
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

fn fold_core(g: &DenseTensor, rl: usize, i: usize, rr: usize) -> Result<DenseTensor> {
    DenseTensor::fold(g, UnfoldKind::Classical(2), &[rl, i, rr])
}

/// TR-ALS: per sweep, solve the subproblem for each mode `n = 1..N` exactly
/// against the materialized subchain unfolding.
pub fn tr_als(
    x: &DenseTensor,
    ranks: &[usize],
    init: &TRCores,
    opts: &SolveOptions,
) -> Result<(TRCores, Vec<f64>)> {
    opts.validate()?;
    check_problem(x, ranks, init)?;
    let n_modes = init.order();
    let mut cores = init.clone();
    let mut errors = Vec::new();
    let mut prev: Option<f64> = None;
    for _sweep in 0..opts.max_iters {
        for n in 1..=n_modes {
            let w = tr::subchain_unfolding(&cores, n)?;
            let m_n = x.moden_times(n, &w)?;
            let q = DenseTensor::matrix(
                w.cols(),
                w.cols(),
                linalg::matmul_tn(w.rows(), w.cols(), w.values(), w.cols(), w.values()),
            )?;
            drop(w);
            let g = solve_normal(&q, &m_n, opts.pinv_rcond)?;
            let (rl, i, rr) = core_dims(&cores, n);
            cores.set_core(n, fold_core(&g, rl, i, rr)?)?;
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

/// TR-ALS-NE: same iterates as TR-ALS, but the Gram matrix of each
/// subproblem comes from the contracted chain of per-core Gram tensors
/// instead of an explicit product against the subchain unfolding.
pub fn tr_als_ne(
    x: &DenseTensor,
    ranks: &[usize],
    init: &TRCores,
    opts: &SolveOptions,
) -> Result<(TRCores, Vec<f64>)> {
    opts.validate()?;
    check_problem(x, ranks, init)?;
    let n_modes = init.order();
    let mut cores = init.clone();
    let mut grams: Vec<GramTensor> = (1..=n_modes).map(|k| tr::gram_core(cores.core(k))).collect();
    let mut errors = Vec::new();
    let mut prev: Option<f64> = None;
    for _sweep in 0..opts.max_iters {
        for n in 1..=n_modes {
            let ring = cores.ring_order(n);
            let chain: Vec<&GramTensor> = ring.iter().map(|&k| &grams[k - 1]).collect();
            let h = tr::gram_chain(&chain)?;
            let w = tr::subchain_unfolding(&cores, n)?;
            let m_n = x.moden_times(n, &w)?;
            drop(w);
            let q = h.prefix2()?;
            let g = solve_normal(&q, &m_n, opts.pinv_rcond)?;
            let (rl, i, rr) = core_dims(&cores, n);
            cores.set_core(n, fold_core(&g, rl, i, rr)?)?;
            grams[n - 1] = tr::gram_core(cores.core(n));
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

pub(crate) fn core_dims(cores: &TRCores, n: usize) -> (usize, usize, usize) {
    let s = cores.core(n).shape();
    (s[0], s[1], s[2])
}
