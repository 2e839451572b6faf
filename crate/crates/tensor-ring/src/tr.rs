//! Tensor-ring containers and TR-specific products: reconstruction,
//! subchain tensors, outer/contracted/subchain/slices-Hadamard products,
//! Gram tensors and their contracted chains, and relative error.
//!
//! Column conventions are pinned once here and relied on everywhere else:
//! the mode-2 unfolding of a subchain tensor has `R_n * R_{n+1}` columns
//! ordered with the `R_n` (right-rank) index fastest, which matches the
//! `Classical(2)` column order of core `n`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{DenseTensor, UnfoldKind};

/// Ring of N third-order cores; core `n` has shape `R_n x I_n x R_{n+1}`
/// with `R_{N+1} = R_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TRCores {
    cores: Vec<DenseTensor>,
}

impl TRCores {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.len() < 2 {
            return Err(Error::RankChain("a ring needs at least two cores".into()));
        }
        for (k, c) in cores.iter().enumerate() {
            if c.order() != 3 {
                return Err(Error::RankChain(format!(
                    "core {} has order {}, expected 3",
                    k + 1,
                    c.order()
                )));
            }
        }
        let n = cores.len();
        for k in 0..n {
            let next = (k + 1) % n;
            if cores[k].shape()[2] != cores[next].shape()[0] {
                return Err(Error::RankChain(format!(
                    "core {} third dimension {} does not match core {} first dimension {}",
                    k + 1,
                    cores[k].shape()[2],
                    next + 1,
                    cores[next].shape()[0]
                )));
            }
        }
        Ok(Self { cores })
    }

    /// Number of cores N.
    pub fn order(&self) -> usize {
        self.cores.len()
    }

    /// `(R_1, ..., R_N)`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[0]).collect()
    }

    /// `(I_1, ..., I_N)`.
    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    /// Core by 1-based mode.
    pub fn core(&self, n: usize) -> &DenseTensor {
        &self.cores[n - 1]
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    /// Replace core `n` (shape must be unchanged except the mode-2 extent).
    pub(crate) fn set_core(&mut self, n: usize, core: DenseTensor) -> Result<()> {
        let old = &self.cores[n - 1];
        if core.order() != 3
            || core.shape()[0] != old.shape()[0]
            || core.shape()[2] != old.shape()[2]
        {
            return Err(Error::ShapeMismatch {
                context: "set_core",
                expected: old.shape().to_vec(),
                actual: core.shape().to_vec(),
            });
        }
        self.cores[n - 1] = core;
        Ok(())
    }

    /// Lateral slice `G_n(i)` as a column-major `R_n x R_{n+1}` matrix.
    pub fn lateral_slice(&self, n: usize, i: usize) -> Vec<f64> {
        lateral_slice(self.core(n), i)
    }

    /// Ring order `n+1, ..., N, 1, ..., n-1` of the modes excluding `n`.
    pub fn ring_order(&self, n: usize) -> Vec<usize> {
        let order = self.order();
        (n + 1..=order).chain(1..n).collect()
    }
}

/// Lateral slice of an order-3 tensor as a column-major matrix.
pub(crate) fn lateral_slice(core: &DenseTensor, i: usize) -> Vec<f64> {
    let (rl, im, rr) = (core.shape()[0], core.shape()[1], core.shape()[2]);
    debug_assert!(i >= 1 && i <= im);
    let v = core.values();
    let mut out = vec![0.0; rl * rr];
    for b in 0..rr {
        for a in 0..rl {
            out[a + b * rl] = v[a + rl * (i - 1) + rl * im * b];
        }
    }
    out
}

/// Fourth-order Gram tensor `Z_n` of shape `R_{n+1} x R_n x R_{n+1} x R_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramTensor(DenseTensor);

impl GramTensor {
    pub fn as_tensor(&self) -> &DenseTensor {
        &self.0
    }

    /// The symmetric `(R_{n+1} R_n) x (R_{n+1} R_n)` view (`Prefix(2)` unfolding).
    pub fn prefix2(&self) -> Result<DenseTensor> {
        self.0.unfold(UnfoldKind::Prefix(2))
    }
}

/// Subchain tensor `G^{!=n}` of shape `R_{n+1} x prod_{j != n} I_j x R_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubchainTensor(DenseTensor);

impl SubchainTensor {
    pub fn as_tensor(&self) -> &DenseTensor {
        &self.0
    }

    pub fn into_tensor(self) -> DenseTensor {
        self.0
    }
}

/// Outer product per element: shape is the concatenation of both shapes.
pub fn outer_product(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
    let mut shape = a.shape().to_vec();
    shape.extend_from_slice(b.shape());
    let (av, bv) = (a.values(), b.values());
    let mut out = vec![0.0; av.len() * bv.len()];
    for (j, &bx) in bv.iter().enumerate() {
        let block = &mut out[j * av.len()..(j + 1) * av.len()];
        for (i, &ax) in av.iter().enumerate() {
            block[i] = ax * bx;
        }
    }
    DenseTensor::new(shape, out).expect("outer product shape")
}

/// General contracted product of fourth-order tensors:
/// `C(i1,i2,r1,r2) = sum_{j,k} A(i1,j,r1,k) B(j,i2,k,r2)`.
pub fn contracted_product(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.order() != 4 || b.order() != 4 {
        return Err(Error::ShapeMismatch {
            context: "contracted_product: operands must be 4th-order",
            expected: vec![4, 4],
            actual: vec![a.order(), b.order()],
        });
    }
    let (i1, j, r1, k) = (a.shape()[0], a.shape()[1], a.shape()[2], a.shape()[3]);
    let (bj, i2, bk, r2) = (b.shape()[0], b.shape()[1], b.shape()[2], b.shape()[3]);
    if j != bj || k != bk {
        return Err(Error::ShapeMismatch {
            context: "contracted_product: contraction dims must agree",
            expected: vec![j, k],
            actual: vec![bj, bk],
        });
    }
    let (av, bv) = (a.values(), b.values());
    let mut out = vec![0.0; i1 * i2 * r1 * r2];
    for x2 in 0..r2 {
        for x1 in 0..r1 {
            for y2 in 0..i2 {
                for y1 in 0..i1 {
                    let mut acc = 0.0;
                    for kk in 0..k {
                        for jj in 0..j {
                            acc += av[y1 + i1 * jj + i1 * j * x1 + i1 * j * r1 * kk]
                                * bv[jj + bj * y2 + bj * i2 * kk + bj * i2 * bk * x2];
                        }
                    }
                    out[y1 + i1 * y2 + i1 * i2 * x1 + i1 * i2 * r1 * x2] = acc;
                }
            }
        }
    }
    DenseTensor::new(vec![i1, i2, r1, r2], out)
}

/// Mode-2 subchain product: combined slice `(j1, j2)` (j1 fastest) is
/// `A(j1) * B(j2)`.
pub fn subchain_product(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.order() != 3 || b.order() != 3 || a.shape()[2] != b.shape()[0] {
        return Err(Error::ShapeMismatch {
            context: "subchain_product: inner ranks must agree",
            expected: a.shape().to_vec(),
            actual: b.shape().to_vec(),
        });
    }
    let (i1, j1, k) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let (_, j2, i2) = (b.shape()[0], b.shape()[1], b.shape()[2]);
    let (av, bv) = (a.values(), b.values());
    let jt = j1 * j2;
    let mut out = vec![0.0; i1 * jt * i2];
    for y2 in 0..j2 {
        for y1 in 0..j1 {
            let j = y1 + j1 * y2;
            for c in 0..i2 {
                for r in 0..i1 {
                    let mut acc = 0.0;
                    for l in 0..k {
                        acc += av[r + i1 * y1 + i1 * j1 * l] * bv[l + k * y2 + k * j2 * c];
                    }
                    out[r + i1 * j + i1 * jt * c] = acc;
                }
            }
        }
    }
    DenseTensor::new(vec![i1, jt, i2], out)
}

/// Mode-2 slices-Hadamard product: slice `j` of the result is `A(j) * B(j)`.
pub fn slices_hadamard(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.order() != 3
        || b.order() != 3
        || a.shape()[1] != b.shape()[1]
        || a.shape()[2] != b.shape()[0]
    {
        return Err(Error::ShapeMismatch {
            context: "slices_hadamard: mode-2 extents and inner ranks must agree",
            expected: a.shape().to_vec(),
            actual: b.shape().to_vec(),
        });
    }
    let (i1, j, k) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let i2 = b.shape()[2];
    let (av, bv) = (a.values(), b.values());
    let mut out = vec![0.0; i1 * j * i2];
    for c in 0..i2 {
        for y in 0..j {
            for r in 0..i1 {
                let mut acc = 0.0;
                for l in 0..k {
                    acc += av[r + i1 * y + i1 * j * l] * bv[l + k * y + k * j * c];
                }
                out[r + i1 * y + i1 * j * c] = acc;
            }
        }
    }
    DenseTensor::new(vec![i1, j, i2], out)
}

/// Mode-2 unfolding of the chained product of `parts` (left to right),
/// built directly in column-major layout: the result is
/// `(prod_j J_j) x (R_right * R_left)` with the right-rank index fastest.
///
/// Intermediate tensors are laid out `(slice, right, left)` so every chain
/// step is a batch of strided GEMMs and no final gather is needed.
pub(crate) fn chain_cols(parts: &[&DenseTensor]) -> Result<DenseTensor> {
    assert!(!parts.is_empty());
    for w in parts.windows(2) {
        if w[0].shape()[2] != w[1].shape()[0] {
            return Err(Error::RankChain(format!(
                "chain: inner ranks {} and {} do not match",
                w[0].shape()[2],
                w[1].shape()[0]
            )));
        }
    }
    let r_left = parts[0].shape()[0];
    // Seed: first core rearranged to (J, R_right, R_left).
    let first = parts[0];
    let (rl, j0, rr) = (first.shape()[0], first.shape()[1], first.shape()[2]);
    let fv = first.values();
    let mut cur = vec![0.0; rl * j0 * rr];
    for a in 0..rl {
        for b in 0..rr {
            for j in 0..j0 {
                cur[j + j0 * b + j0 * rr * a] = fv[a + rl * j + rl * j0 * b];
            }
        }
    }
    let mut m_cur = j0;
    let mut r_cur = rr;
    for part in &parts[1..] {
        let (k, j2, r_next) = (part.shape()[0], part.shape()[1], part.shape()[2]);
        debug_assert_eq!(k, r_cur);
        let m_next = m_cur * j2;
        let mut next = vec![0.0; m_next * r_next * r_left];
        let pv = part.values();
        for a in 0..r_left {
            for y2 in 0..j2 {
                linalg::gemm_strided(
                    m_cur,
                    k,
                    r_next,
                    1.0,
                    &cur,
                    m_cur * k * a,
                    1,
                    m_cur,
                    pv,
                    k * y2,
                    1,
                    k * j2,
                    0.0,
                    &mut next,
                    m_cur * y2 + m_next * r_next * a,
                    1,
                    m_next,
                );
            }
        }
        cur = next;
        m_cur = m_next;
        r_cur = r_next;
    }
    DenseTensor::new(vec![m_cur, r_cur, r_left], cur)
        .map(|t| DenseTensor::matrix(m_cur, r_cur * r_left, t.into_values()).unwrap())
}

/// `G^{!=n}_{[2]}` as a column-major `prod_{j != n} I_j x R_n R_{n+1}` matrix.
pub fn subchain_unfolding(cores: &TRCores, n: usize) -> Result<DenseTensor> {
    if n < 1 || n > cores.order() {
        return Err(Error::InvalidMode {
            mode: n,
            order: cores.order(),
        });
    }
    let ring = cores.ring_order(n);
    let parts: Vec<&DenseTensor> = ring.iter().map(|&k| cores.core(k)).collect();
    chain_cols(&parts)
}

/// Subchain tensor `G^{!=n}`, the merge of all cores except core `n`
/// evaluated by chained subchain products in ring order.
pub fn subchain(cores: &TRCores, n: usize) -> Result<SubchainTensor> {
    if n < 1 || n > cores.order() {
        return Err(Error::InvalidMode {
            mode: n,
            order: cores.order(),
        });
    }
    let ring = cores.ring_order(n);
    let mut acc = cores.core(ring[0]).clone();
    for &k in &ring[1..] {
        acc = subchain_product(&acc, cores.core(k))?;
    }
    Ok(SubchainTensor(acc))
}

/// Gram tensor of a third-order core:
/// `Z(a,b,c,d) = sum_i G^T(i)(a,b) G^T(i)(c,d)`.
pub fn gram_core(core: &DenseTensor) -> GramTensor {
    let (rl, _i, rr) = (core.shape()[0], core.shape()[1], core.shape()[2]);
    let m = core
        .unfold(UnfoldKind::ModeN(2))
        .expect("order-3 core always unfolds");
    let g = linalg::matmul_tn(m.rows(), m.cols(), m.values(), m.cols(), m.values());
    GramTensor(DenseTensor::new(vec![rr, rl, rr, rl], g).expect("gram shape"))
}

/// Contracted chain `H^{!=n}` of the Gram tensors for modes `!= n`.
///
/// `grams` must be given in ring order `n+1, ..., N, 1, ..., n-1`; the chain
/// is contracted in the reverse of that order, matching the update rules.
pub fn gram_chain(grams: &[&GramTensor]) -> Result<GramTensor> {
    if grams.is_empty() {
        return Err(Error::RankChain("gram_chain: empty chain".into()));
    }
    let mut rev = grams.iter().rev();
    let mut acc = rev.next().unwrap().0.clone();
    for z in rev {
        acc = contracted_product(&acc, &z.0)?;
    }
    Ok(GramTensor(acc))
}

/// `X_hat = TR(cores)` materialized; shape `(I_1, ..., I_N)`.
pub fn tr_reconstruct(cores: &TRCores) -> DenseTensor {
    let order = cores.order();
    let w = subchain_unfolding(cores, order).expect("valid ring");
    let g2 = cores
        .core(order)
        .unfold(UnfoldKind::Classical(2))
        .expect("core unfolds");
    let p = w.rows();
    let r2 = w.cols();
    let i_n = g2.rows();
    let mut out = vec![0.0; p * i_n];
    // out = W * G_{N(2)}^T; the transposed factor is a strided view.
    linalg::gemm_strided(
        p,
        r2,
        i_n,
        1.0,
        w.values(),
        0,
        1,
        p,
        g2.values(),
        0,
        i_n,
        1,
        0.0,
        &mut out,
        0,
        1,
        p,
    );
    DenseTensor::new(cores.dims(), out).expect("reconstruction shape")
}

/// `||X - TR(cores)||_F` without materializing the reconstruction.
pub fn residual_norm(x: &DenseTensor, cores: &TRCores) -> Result<f64> {
    if x.shape() != cores.dims().as_slice() {
        return Err(Error::ShapeMismatch {
            context: "residual_norm",
            expected: cores.dims(),
            actual: x.shape().to_vec(),
        });
    }
    let order = cores.order();
    let w = subchain_unfolding(cores, order)?;
    let g2 = cores.core(order).unfold(UnfoldKind::Classical(2))?;
    let p = w.rows();
    let r2 = w.cols();
    let i_n = g2.rows();
    let block = 8usize;
    let ranges: Vec<(usize, usize)> = (0..i_n)
        .step_by(block)
        .map(|s| (s, (s + block).min(i_n)))
        .collect();
    let sum: f64 = ranges
        .par_iter()
        .map(|&(s, e)| {
            let cols = e - s;
            let mut buf = vec![0.0; p * cols];
            linalg::gemm_strided(
                p,
                r2,
                cols,
                1.0,
                w.values(),
                0,
                1,
                p,
                g2.values(),
                s,
                i_n,
                1,
                0.0,
                &mut buf,
                0,
                1,
                p,
            );
            let xv = &x.values()[p * s..p * e];
            xv.iter()
                .zip(&buf)
                .map(|(a, b)| {
                    let d = a - b;
                    d * d
                })
                .sum::<f64>()
        })
        .sum();
    Ok(sum.sqrt())
}

/// `||X - TR(cores)||_F / ||X||_F`; errors on a zero-norm `X`.
pub fn relative_error(x: &DenseTensor, cores: &TRCores) -> Result<f64> {
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(residual_norm(x, cores)? / norm)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_cores(dims: &[usize], ranks: &[usize], seed: u64) -> TRCores {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims.len();
        let cores = (0..n)
            .map(|k| {
                let rl = ranks[k];
                let rr = ranks[(k + 1) % n];
                let vals: Vec<f64> = (0..rl * dims[k] * rr)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                DenseTensor::new(vec![rl, dims[k], rr], vals).unwrap()
            })
            .collect();
        TRCores::new(cores).unwrap()
    }

    fn trace_oracle(cores: &TRCores, idx: &[usize]) -> f64 {
        let n = cores.order();
        let ranks = cores.ranks();
        let mut acc = {
            // identity R_1 x R_1
            let r = ranks[0];
            let mut m = vec![0.0; r * r];
            for i in 0..r {
                m[i + i * r] = 1.0;
            }
            m
        };
        let rows = ranks[0];
        for k in 1..=n {
            let slice = cores.lateral_slice(k, idx[k - 1]);
            let rl = ranks[k - 1];
            let rr = ranks[k % n];
            acc = linalg::matmul(rows, rl, &acc, rr, &slice);
        }
        // trace of acc (R_1 x R_1)
        let r = ranks[0];
        (0..r).map(|i| acc[i + i * r]).sum()
    }

    #[test]
    fn ring_validation() {
        let a = DenseTensor::zeros(vec![2, 3, 3]);
        let b = DenseTensor::zeros(vec![3, 4, 2]);
        assert!(TRCores::new(vec![a.clone(), b.clone()]).is_ok());
        let c = DenseTensor::zeros(vec![3, 4, 3]);
        assert!(matches!(TRCores::new(vec![a, c]).err(), Some(Error::RankChain(_))));
    }

    #[test]
    fn reconstruct_rank_one_is_product_of_scalars() {
        // all ranks 1: cores are 1 x I x 1, entries g_n(i_n)
        let g1 = DenseTensor::new(vec![1, 2, 1], vec![2.0, 3.0]).unwrap();
        let g2 = DenseTensor::new(vec![1, 2, 1], vec![5.0, 7.0]).unwrap();
        let g3 = DenseTensor::new(vec![1, 2, 1], vec![11.0, 13.0]).unwrap();
        let cores = TRCores::new(vec![g1, g2, g3]).unwrap();
        let x = tr_reconstruct(&cores);
        assert_eq!(x.get(&[1, 1, 1]).unwrap(), 2.0 * 5.0 * 11.0);
        assert_eq!(x.get(&[2, 2, 2]).unwrap(), 3.0 * 7.0 * 13.0);
        assert_eq!(x.get(&[2, 1, 2]).unwrap(), 3.0 * 5.0 * 13.0);
    }

    #[test]
    fn reconstruct_identity_slices_gives_constant_rank() {
        let r = 3;
        let dims = [2usize, 4, 3];
        let cores: Vec<DenseTensor> = dims
            .iter()
            .map(|&d| {
                let mut v = vec![0.0; r * d * r];
                for i in 0..d {
                    for a in 0..r {
                        v[a + r * i + r * d * a] = 1.0;
                    }
                }
                DenseTensor::new(vec![r, d, r], v).unwrap()
            })
            .collect();
        let cores = TRCores::new(cores).unwrap();
        let x = tr_reconstruct(&cores);
        assert!(x.values().iter().all(|&v| v == r as f64));
    }

    #[test]
    fn reconstruct_matches_trace_oracle() {
        let cores = random_cores(&[3, 3, 3], &[2, 2, 2], 7);
        let x = tr_reconstruct(&cores);
        for i3 in 1..=3 {
            for i2 in 1..=3 {
                for i1 in 1..=3 {
                    let want = trace_oracle(&cores, &[i1, i2, i3]);
                    let got = x.get(&[i1, i2, i3]).unwrap();
                    assert!((want - got).abs() < 1e-13, "{want} vs {got}");
                }
            }
        }
    }

    #[test]
    fn reconstruct_circular_shift_invariance() {
        let cores = random_cores(&[2, 3, 4], &[2, 3, 2], 11);
        let x = tr_reconstruct(&cores);
        // rotate cores left by one; reconstruction must equal the axis rotation
        let mut rotated = cores.cores().to_vec();
        rotated.rotate_left(1);
        let xr = tr_reconstruct(&TRCores::new(rotated).unwrap());
        let x_perm = x.permute_axes(&[1, 2, 0]).unwrap();
        for (a, b) in x_perm.values().iter().zip(xr.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn outer_product_examples() {
        let u = DenseTensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let v = DenseTensor::new(vec![2], vec![3.0, 4.0]).unwrap();
        let o = outer_product(&u, &v);
        assert_eq!(o.shape(), &[2, 2]);
        assert_eq!(o.get(&[1, 1]).unwrap(), 3.0);
        assert_eq!(o.get(&[2, 1]).unwrap(), 6.0);
        assert_eq!(o.get(&[1, 2]).unwrap(), 4.0);
        assert_eq!(o.get(&[2, 2]).unwrap(), 8.0);

        let z = DenseTensor::zeros(vec![2, 2]);
        let oz = outer_product(&u, &z);
        assert!(oz.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn outer_product_matches_element_loop() {
        let a = random_cores(&[2, 2], &[1, 1], 3).core(1).clone();
        let b = random_cores(&[2, 2], &[1, 1], 4).core(2).clone();
        let o = outer_product(&a, &b);
        for (fa, &va) in a.values().iter().enumerate() {
            for (fb, &vb) in b.values().iter().enumerate() {
                assert_eq!(o.values()[fa + a.len() * fb], va * vb);
            }
        }
    }

    #[test]
    fn contracted_product_all_ones_counts_summands() {
        let a = DenseTensor::new(vec![2, 2, 2, 3], vec![1.0; 24]).unwrap();
        let b = DenseTensor::new(vec![2, 2, 3, 2], vec![1.0; 24]).unwrap();
        let c = contracted_product(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 2, 2, 2]);
        assert!(c.values().iter().all(|&x| x == 6.0));
    }

    #[test]
    fn contracted_product_matches_quadruple_loop() {
        let av: Vec<f64> = (0..2 * 3 * 2 * 2).map(|i| (i as f64) * 0.3 - 1.0).collect();
        let bv: Vec<f64> = (0..3 * 2 * 2 * 3).map(|i| (i as f64) * 0.7 - 5.0).collect();
        let a = DenseTensor::new(vec![2, 3, 2, 2], av).unwrap();
        let b = DenseTensor::new(vec![3, 2, 2, 3], bv).unwrap();
        let c = contracted_product(&a, &b).unwrap();
        for i1 in 1..=2usize {
            for i2 in 1..=2usize {
                for r1 in 1..=2usize {
                    for r2 in 1..=3usize {
                        let mut acc = 0.0;
                        for j in 1..=3usize {
                            for k in 1..=2usize {
                                acc += a.get(&[i1, j, r1, k]).unwrap()
                                    * b.get(&[j, i2, k, r2]).unwrap();
                            }
                        }
                        let got = c.get(&[i1, i2, r1, r2]).unwrap();
                        assert!((acc - got).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn contracted_product_dim_mismatch() {
        let a = DenseTensor::zeros(vec![2, 2, 2, 3]);
        let b = DenseTensor::zeros(vec![2, 2, 2, 2]);
        assert!(contracted_product(&a, &b).is_err());
    }

    #[test]
    fn subchain_product_identity_slices() {
        // A with every lateral slice the K x K identity
        let k = 2;
        let j1 = 3;
        let mut av = vec![0.0; k * j1 * k];
        for j in 0..j1 {
            for a in 0..k {
                av[a + k * j + k * j1 * a] = 1.0;
            }
        }
        let a = DenseTensor::new(vec![k, j1, k], av).unwrap();
        let b = random_cores(&[4, 2], &[2, 2], 5).core(1).clone();
        let c = subchain_product(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 3 * 4, 2]);
        for j2 in 1..=4usize {
            for j1i in 1..=3usize {
                let comb = j1i + 3 * (j2 - 1);
                for r in 1..=2usize {
                    for s in 1..=2usize {
                        assert_eq!(
                            c.get(&[r, comb, s]).unwrap(),
                            b.get(&[r, j2, s]).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn subchain_product_scalars() {
        let a = DenseTensor::new(vec![1, 2, 1], vec![2.0, 3.0]).unwrap();
        let b = DenseTensor::new(vec![1, 2, 1], vec![5.0, 7.0]).unwrap();
        let c = subchain_product(&a, &b).unwrap();
        // j1 fastest: (a1 b1, a2 b1, a1 b2, a2 b2)
        assert_eq!(c.values(), &[10.0, 15.0, 14.0, 21.0]);
    }

    #[test]
    fn subchain_product_matches_slice_oracle() {
        let a = random_cores(&[3, 2], &[2, 3], 8).core(1).clone(); // 2 x 3 x 3
        let b = random_cores(&[2, 3], &[3, 2], 9).core(1).clone(); // 3 x 2 x 2
        let c = subchain_product(&a, &b).unwrap();
        for j2 in 1..=2usize {
            for j1 in 1..=3usize {
                let sa = lateral_slice(&a, j1);
                let sb = lateral_slice(&b, j2);
                let prod = linalg::matmul(2, 3, &sa, 2, &sb);
                let sc = lateral_slice(&c, j1 + 3 * (j2 - 1));
                for i in 0..prod.len() {
                    assert!((prod[i] - sc[i]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn slices_hadamard_identity_passthrough() {
        let k = 2;
        let j = 3;
        let mut av = vec![0.0; k * j * k];
        for y in 0..j {
            for a in 0..k {
                av[a + k * y + k * j * a] = 1.0;
            }
        }
        let a = DenseTensor::new(vec![k, j, k], av).unwrap();
        let b = random_cores(&[j, 2], &[k, k], 13).core(1).clone();
        let c = slices_hadamard(&a, &b).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn slices_hadamard_single_slice_is_matmul() {
        let a = DenseTensor::new(vec![2, 1, 3], (1..=6).map(f64::from).collect()).unwrap();
        let b = DenseTensor::new(vec![3, 1, 2], (1..=6).map(f64::from).collect()).unwrap();
        let c = slices_hadamard(&a, &b).unwrap();
        let prod = linalg::matmul(2, 3, &lateral_slice(&a, 1), 2, &lateral_slice(&b, 1));
        assert_eq!(lateral_slice(&c, 1), prod);
    }

    #[test]
    fn slices_hadamard_mismatch() {
        let a = DenseTensor::zeros(vec![2, 3, 2]);
        let b = DenseTensor::zeros(vec![2, 4, 2]);
        assert!(slices_hadamard(&a, &b).is_err());
    }

    #[test]
    fn subchain_matches_def3_slices() {
        let cores = random_cores(&[3, 2, 4], &[2, 3, 2], 17);
        // N = 3, n = 2: slice (i3, i1) with i3 fastest equals G_3(i3) G_1(i1)
        let sc = subchain(&cores, 2).unwrap();
        let t = sc.as_tensor();
        assert_eq!(t.shape(), &[2, 4 * 3, 3]); // R_3 x (I_3 I_1) x R_2
        for i1 in 1..=3usize {
            for i3 in 1..=4usize {
                let comb = i3 + 4 * (i1 - 1);
                let g3 = cores.lateral_slice(3, i3); // R_3 x R_1 = 2 x 2
                let g1 = cores.lateral_slice(1, i1); // R_1 x R_2 = 2 x 3
                let want = linalg::matmul(2, 2, &g3, 3, &g1);
                let got = lateral_slice(t, comb);
                for i in 0..want.len() {
                    assert!((want[i] - got[i]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn subchain_two_cores_degenerate() {
        let cores = random_cores(&[3, 4], &[2, 3], 19);
        let sc = subchain(&cores, 1).unwrap();
        assert_eq!(sc.as_tensor(), cores.core(2));
    }

    #[test]
    fn subchain_unfolding_matches_subchain() {
        let cores = random_cores(&[3, 2, 4], &[2, 3, 2], 23);
        for n in 1..=3 {
            let w = subchain_unfolding(&cores, n).unwrap();
            let t = subchain(&cores, n).unwrap();
            let u = t.as_tensor().unfold(UnfoldKind::ModeN(2)).unwrap();
            assert_eq!(w.shape(), u.shape());
            for i in 0..w.len() {
                assert!((w.values()[i] - u.values()[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gram_core_identity_slice() {
        // single lateral slice = 2x2 identity -> Z(a,b,c,d) = delta_ab delta_cd
        let core = DenseTensor::new(vec![2, 1, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let z = gram_core(&core);
        for a in 1..=2usize {
            for b in 1..=2usize {
                for c in 1..=2usize {
                    for d in 1..=2usize {
                        let want = if a == b && c == d { 1.0 } else { 0.0 };
                        assert_eq!(z.as_tensor().get(&[a, b, c, d]).unwrap(), want);
                    }
                }
            }
        }
    }

    #[test]
    fn gram_core_zero() {
        let z = gram_core(&DenseTensor::zeros(vec![2, 3, 2]));
        assert!(z.as_tensor().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gram_core_matches_unfolding_gram() {
        let core = random_cores(&[4, 2], &[3, 2], 29).core(1).clone(); // 3 x 4 x 2
        let z = gram_core(&core);
        let m = core.unfold(UnfoldKind::ModeN(2)).unwrap();
        let g = linalg::matmul_tn(m.rows(), m.cols(), m.values(), m.cols(), m.values());
        let zp = z.prefix2().unwrap();
        for i in 0..g.len() {
            assert!((g[i] - zp.values()[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn gram_chain_rank_one_scalar() {
        // all ranks 1: chain value = prod_j sum_i g_j(i)^2
        let cores = random_cores(&[3, 2, 4], &[1, 1, 1], 31);
        let z2 = gram_core(cores.core(2));
        let z3 = gram_core(cores.core(3));
        let h = gram_chain(&[&z2, &z3]).unwrap(); // n = 1, ring order 2,3
        let want: f64 = [2usize, 3]
            .iter()
            .map(|&k| {
                cores
                    .core(k)
                    .values()
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
            })
            .product();
        assert!((h.as_tensor().values()[0] - want).abs() < 1e-12);
    }

    #[test]
    fn gram_chain_single_element() {
        let cores = random_cores(&[3, 4], &[2, 3], 37);
        let z2 = gram_core(cores.core(2));
        let h = gram_chain(&[&z2]).unwrap();
        assert_eq!(h.as_tensor(), z2.as_tensor());
    }

    #[test]
    fn gram_chain_matches_subchain_gram() {
        // Prop. 1 at module level: H^{!=n}_{<2>} == (G^{!=n}_{[2]})^T G^{!=n}_{[2]}
        let cores = random_cores(&[3, 2, 3], &[2, 2, 2], 41);
        for n in 1..=3usize {
            let ring = cores.ring_order(n);
            let grams: Vec<GramTensor> =
                ring.iter().map(|&k| gram_core(cores.core(k))).collect();
            let refs: Vec<&GramTensor> = grams.iter().collect();
            let h = gram_chain(&refs).unwrap();
            let hp = h.prefix2().unwrap();
            let w = subchain_unfolding(&cores, n).unwrap();
            let g = linalg::matmul_tn(w.rows(), w.cols(), w.values(), w.cols(), w.values());
            assert_eq!(hp.len(), g.len());
            let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for i in 0..g.len() {
                assert!(
                    (g[i] - hp.values()[i]).abs() <= 1e-12 * scale.max(1.0),
                    "mode {n} entry {i}: {} vs {}",
                    g[i],
                    hp.values()[i]
                );
            }
        }
    }

    #[test]
    fn relative_error_exact_and_zero_cores() {
        let cores = random_cores(&[3, 3, 3], &[2, 2, 2], 43);
        let x = tr_reconstruct(&cores);
        assert!(relative_error(&x, &cores).unwrap() < 1e-13);

        let zeros = TRCores::new(
            cores
                .cores()
                .iter()
                .map(|c| DenseTensor::zeros(c.shape().to_vec()))
                .collect(),
        )
        .unwrap();
        assert!((relative_error(&x, &zeros).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn relative_error_zero_tensor_rejected() {
        let cores = random_cores(&[2, 2], &[1, 1], 47);
        let x = DenseTensor::zeros(vec![2, 2]);
        assert!(matches!(relative_error(&x, &cores), Err(Error::ZeroNorm)));
    }

    #[test]
    fn relative_error_matches_direct_subtraction() {
        let cores = random_cores(&[3, 3, 3], &[2, 2, 2], 53);
        let x = tr_reconstruct(&cores);
        let norm = x.frobenius_norm();
        // perturb one core entry
        let mut pert = cores.clone();
        let mut c1 = pert.core(1).clone();
        c1.values_mut()[0] += 1e-3;
        pert.set_core(1, c1).unwrap();
        let xp = tr_reconstruct(&pert);
        let want: f64 = x
            .values()
            .iter()
            .zip(xp.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / norm;
        let got = relative_error(&x, &pert).unwrap();
        assert!((want - got).abs() < 1e-12 * (1.0 + want));
    }
}
