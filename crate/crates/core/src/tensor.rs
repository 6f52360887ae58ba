//! Dense complex linear algebra over tensor-product spaces.
//!
//! Every operator carries the ordered list of its tensor-factor dimensions.
//! The basis is row-major over the product basis `|i_1 ... i_k>` with the
//! leftmost factor most significant, so the index of `|i_1 ... i_k>` is
//! `((i_1 * d_2 + i_2) * d_3 + ...)`. Index arithmetic, Kronecker products and
//! serialization all follow this convention.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{HERMITICITY_TOL, PINV_TOL};
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Dense square operator on `C^{d_1} ⊗ ... ⊗ C^{d_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredOperator {
    factors: Vec<usize>,
    data: CMatrix,
}

impl FactoredOperator {
    pub fn new(factors: Vec<usize>, data: CMatrix) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::dim("factor list must be non-empty"));
        }
        if factors.iter().any(|&f| f == 0) {
            return Err(Error::dim(format!("factor dimensions must be >= 1, got {factors:?}")));
        }
        let side: usize = factors.iter().product();
        if data.nrows() != side || data.ncols() != side {
            return Err(Error::dim(format!(
                "factors {factors:?} need a {side}x{side} matrix, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { factors, data })
    }

    /// Single-factor operator.
    pub fn from_matrix(data: CMatrix) -> Result<Self> {
        let n = data.nrows();
        Self::new(vec![n], data)
    }

    pub fn identity(factors: &[usize]) -> Self {
        let side = factors.iter().product();
        Self { factors: factors.to_vec(), data: CMatrix::identity(side, side) }
    }

    pub fn zeros(factors: &[usize]) -> Self {
        let side = factors.iter().product();
        Self { factors: factors.to_vec(), data: CMatrix::zeros(side, side) }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_data(self) -> CMatrix {
        self.data
    }

    pub fn side(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// Largest entry of `|A - A^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.data)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn adjoint(&self) -> Self {
        Self { factors: self.factors.clone(), data: self.data.adjoint() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { factors: self.factors.clone(), data: self.data.map(|z| z * s) }
    }

    pub fn map_data(&self, f: impl FnOnce(&CMatrix) -> CMatrix) -> Result<Self> {
        Self::new(self.factors.clone(), f(&self.data))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { factors: self.factors.clone(), data: &self.data + &other.data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { factors: self.factors.clone(), data: &self.data - &other.data })
    }

    /// `tr(self * other)`.
    pub fn trace_product(&self, other: &Self) -> Result<C64> {
        if self.side() != other.side() {
            return Err(Error::dim("trace product of operators with different sides"));
        }
        Ok(trace_of_product(&self.data, &other.data))
    }

    /// Reinterprets the same matrix under a different factorization of its side.
    pub fn with_factors(&self, factors: Vec<usize>) -> Result<Self> {
        Self::new(factors, self.data.clone())
    }

    /// Merges all factors into one.
    pub fn flatten(&self) -> Self {
        Self { factors: vec![self.side()], data: self.data.clone() }
    }

    /// `<v| A |v>`.
    pub fn expectation(&self, v: &CVector) -> Result<C64> {
        if v.len() != self.side() {
            return Err(Error::dim("vector length does not match operator side"));
        }
        Ok(v.dotc(&(&self.data * v)))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.factors != other.factors {
            return Err(Error::dim(format!(
                "factor lists differ: {:?} vs {:?}",
                self.factors, other.factors
            )));
        }
        Ok(())
    }
}

/// Pure state vector, optionally tagged with a product structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: CVector,
    factors: Option<Vec<usize>>,
}

impl Ket {
    pub fn new(amplitudes: CVector) -> Self {
        Self { amplitudes, factors: None }
    }

    pub fn with_factors(amplitudes: CVector, factors: Vec<usize>) -> Result<Self> {
        if factors.iter().product::<usize>() != amplitudes.len() {
            return Err(Error::dim("ket factor list does not match its length"));
        }
        Ok(Self { amplitudes, factors: Some(factors) })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn factors(&self) -> Option<&[usize]> {
        self.factors.as_deref()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self { amplitudes: self.amplitudes.map(|z| z / n), factors: self.factors.clone() }
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-12
    }

    /// `|v><v|`.
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn kron(&self, other: &Ket) -> Ket {
        Ket::new(self.amplitudes.kronecker(&other.amplitudes))
    }
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues; the
/// eigenvector for `values[k]` is column `k` of `vectors`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn min_vector(&self) -> CVector {
        self.vectors.column(0).into_owned()
    }

    pub fn max_vector(&self) -> CVector {
        self.vectors.column(self.values.len() - 1).into_owned()
    }

    /// `sum_k f(lambda_k) |v_k><v_k|`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= s);
        }
        let out = scaled * self.vectors.adjoint();
        debug_assert_eq!(out.nrows(), n);
        out
    }
}

pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn strides(factors: &[usize]) -> Vec<usize> {
    let mut s = vec![1; factors.len()];
    for j in (0..factors.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * factors[j + 1];
    }
    s
}

/// Digits of every basis index, flattened as `[index * k + j]`.
fn all_digits(factors: &[usize]) -> Vec<usize> {
    let k = factors.len();
    let side: usize = factors.iter().product();
    let st = strides(factors);
    let mut out = vec![0; side * k];
    for idx in 0..side {
        for j in 0..k {
            out[idx * k + j] = (idx / st[j]) % factors[j];
        }
    }
    out
}

fn check_indices(which: &[usize], count: usize) -> Result<()> {
    for &w in which {
        if w >= count {
            return Err(Error::IndexOutOfRange { index: w, count });
        }
    }
    Ok(())
}

/// Kronecker product; the factor list of the result is the concatenation.
pub fn kron(a: &FactoredOperator, b: &FactoredOperator) -> FactoredOperator {
    let mut factors = a.factors.clone();
    factors.extend_from_slice(&b.factors);
    FactoredOperator { factors, data: a.data.kronecker(&b.data) }
}

pub fn kron_all(ops: &[FactoredOperator]) -> Result<FactoredOperator> {
    let (first, rest) = ops.split_first().ok_or_else(|| Error::dim("empty Kronecker product"))?;
    Ok(rest.iter().fold(first.clone(), |acc, op| kron(&acc, op)))
}

/// Transposes the selected tensor factors in the fixed product basis.
pub fn partial_transpose(c: &FactoredOperator, which: &[usize]) -> Result<FactoredOperator> {
    let k = c.factors.len();
    check_indices(which, k)?;
    let mut mask = vec![false; k];
    for &w in which {
        mask[w] = true;
    }
    let st = strides(&c.factors);
    let digits = all_digits(&c.factors);
    let n = c.side();
    let mut out = CMatrix::zeros(n, n);
    for r in 0..n {
        let rd = &digits[r * k..(r + 1) * k];
        for col in 0..n {
            let cd = &digits[col * k..(col + 1) * k];
            let (mut r2, mut c2) = (0, 0);
            for j in 0..k {
                let (a, b) = if mask[j] { (cd[j], rd[j]) } else { (rd[j], cd[j]) };
                r2 += a * st[j];
                c2 += b * st[j];
            }
            out[(r2, c2)] = c.data[(r, col)];
        }
    }
    Ok(FactoredOperator { factors: c.factors.clone(), data: out })
}

/// Traces out the selected factors. Tracing every factor yields a 1x1
/// operator with factor list `[1]`.
pub fn partial_trace(c: &FactoredOperator, which: &[usize]) -> Result<FactoredOperator> {
    let k = c.factors.len();
    check_indices(which, k)?;
    let mut traced = vec![false; k];
    for &w in which {
        traced[w] = true;
    }
    let kept: Vec<usize> = (0..k).filter(|&j| !traced[j]).collect();
    let out_factors: Vec<usize> =
        if kept.is_empty() { vec![1] } else { kept.iter().map(|&j| c.factors[j]).collect() };
    let out_st = strides(&out_factors);
    let digits = all_digits(&c.factors);
    let n = c.side();
    let m: usize = out_factors.iter().product();

    let keep_index: Vec<usize> = (0..n)
        .map(|idx| {
            let d = &digits[idx * k..(idx + 1) * k];
            kept.iter().enumerate().map(|(pos, &j)| d[j] * out_st[pos]).sum()
        })
        .collect();

    let mut out = CMatrix::zeros(m, m);
    for r in 0..n {
        let rd = &digits[r * k..(r + 1) * k];
        for col in 0..n {
            let cd = &digits[col * k..(col + 1) * k];
            if (0..k).all(|j| !traced[j] || rd[j] == cd[j]) {
                out[(keep_index[r], keep_index[col])] += c.data[(r, col)];
            }
        }
    }
    Ok(FactoredOperator { factors: out_factors, data: out })
}

/// Relabels tensor factors: factor `i` of the output is factor `perm[i]` of
/// the input.
pub fn permute_factors(c: &FactoredOperator, perm: &[usize]) -> Result<FactoredOperator> {
    let k = c.factors.len();
    let mut seen = vec![false; k];
    if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::BadPermutation(perm.to_vec()));
    }
    let out_factors: Vec<usize> = perm.iter().map(|&p| c.factors[p]).collect();
    let out_st = strides(&out_factors);
    let digits = all_digits(&c.factors);
    let n = c.side();
    let target: Vec<usize> = (0..n)
        .map(|idx| {
            let d = &digits[idx * k..(idx + 1) * k];
            perm.iter().enumerate().map(|(i, &p)| d[p] * out_st[i]).sum()
        })
        .collect();
    let mut out = CMatrix::zeros(n, n);
    for r in 0..n {
        for col in 0..n {
            out[(target[r], target[col])] = c.data[(r, col)];
        }
    }
    Ok(FactoredOperator { factors: out_factors, data: out })
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> f64 {
    singular_values(a).iter().sum()
}

/// Largest singular value.
pub fn op_norm(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

pub fn eig_hermitian(a: &CMatrix) -> Result<HermitianEigen> {
    eig_hermitian_tol(a, HERMITICITY_TOL)
}

/// Inputs within `tol` of Hermitian are symmetrized before decomposition.
pub fn eig_hermitian_tol(a: &CMatrix, tol: f64) -> Result<HermitianEigen> {
    if a.nrows() != a.ncols() {
        return Err(Error::dim("eigendecomposition of a non-square matrix"));
    }
    let defect = hermiticity_defect(a);
    if defect > tol {
        return Err(Error::NotHermitian(defect));
    }
    let sym = (a + a.adjoint()) * c(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(a.nrows(), a.nrows(), |r, col| eig.eigenvectors[(r, order[col])]);
    Ok(HermitianEigen { values, vectors })
}

/// Minimal eigenvalue of a Hermitian matrix.
pub fn lambda_min(a: &CMatrix) -> Result<f64> {
    Ok(eig_hermitian(a)?.min())
}

/// Moore-Penrose pseudo-inverse via SVD; singular values below
/// `tol * sigma_max` count as zero.
pub fn pseudo_inverse(m: &CMatrix, tol: f64) -> CMatrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return CMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^dagger");
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let cutoff = tol * smax;
    let mut out = CMatrix::zeros(cols, rows);
    for k in 0..s.len() {
        if s[k] > cutoff && s[k] > 0.0 {
            let vk = v_t.row(k).adjoint();
            let uk = u.column(k);
            out += (vk * uk.adjoint()) * c(1.0 / s[k]);
        }
    }
    out
}

pub fn pseudo_inverse_default(m: &CMatrix) -> CMatrix {
    pseudo_inverse(m, PINV_TOL)
}

/// Numerical rank with singular values below `tol * sigma_max` counted as zero.
pub fn rank(m: &CMatrix, tol: f64) -> usize {
    let s = singular_values(m);
    let smax = s.iter().copied().fold(0.0, f64::max);
    s.iter().filter(|&&x| x > tol * smax && x > 0.0).count()
}

/// `A^{1/2}` for positive semidefinite `A`; eigenvalues below zero are clipped.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    Ok(eig_hermitian(a)?.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// Generalized inverse square root: eigenvalues at most `tol * lambda_max`
/// in modulus map to zero.
pub fn psd_pinv_sqrt(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    let eig = eig_hermitian(a)?;
    let scale = eig.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let cutoff = tol * scale;
    if let Some(&neg) = eig.values.iter().find(|&&v| v < -cutoff.max(1e-12)) {
        return Err(Error::pre(format!("matrix is not positive semidefinite (eigenvalue {neg:e})")));
    }
    Ok(eig.reconstruct_with(|l| if l > cutoff && l > 0.0 { 1.0 / l.sqrt() } else { 0.0 }))
}

/// `|Omega_d> = sum_i |ii> / sqrt(d)` and its projector `omega_d`.
pub fn max_entangled(d: usize) -> (Ket, FactoredOperator) {
    let mut v = CVector::zeros(d * d);
    let amp = c(1.0 / (d as f64).sqrt());
    for i in 0..d {
        v[i * d + i] = amp;
    }
    let proj = &v * v.adjoint();
    (
        Ket { amplitudes: v, factors: Some(vec![d, d]) },
        FactoredOperator { factors: vec![d, d], data: proj },
    )
}

/// `F_d |ij> = |ji>`.
pub fn flip(d: usize) -> FactoredOperator {
    let mut f = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            f[(j * d + i, i * d + j)] = ONE;
        }
    }
    FactoredOperator { factors: vec![d, d], data: f }
}

/// Matrix unit `E_{ij} = |i><j|` of size `d`.
pub fn matrix_unit(d: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(i, j)] = ONE;
    m
}

/// Row-major reshaping of a vector on `C^{rows} ⊗ C^{cols}` into a matrix.
pub fn unvec(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |r, col| v[r * cols + col])
}

/// Row-major vectorization.
pub fn vec_rowmajor(m: &CMatrix) -> CVector {
    let (rows, cols) = m.shape();
    CVector::from_fn(rows * cols, |k, _| m[(k / cols, k % cols)])
}

/// Standard complex Gaussian entry with `E|z|^2 = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// the `R` diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let z = gaussian_matrix(d, d, rng);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 { rkk / rkk.norm() } else { ONE };
        q.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    q
}

pub fn haar_unitary_seeded(d: usize, seed: u64) -> CMatrix {
    haar_unitary(d, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Haar-random unit vector.
pub fn random_ket<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(d, |_, _| complex_gaussian(rng));
    let n = v.norm();
    v.map(|z| z / n)
}

/// Hermitian matrix with i.i.d. Gaussian entries (GUE up to scale).
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = gaussian_matrix(d, d, rng);
    (&g + g.adjoint()) * c(0.5)
}

/// Random full-rank density matrix `G G^dagger / tr(G G^dagger)`.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = gaussian_matrix(d, d, rng);
    let rho = &g * g.adjoint();
    let t = rho.trace();
    rho.map(|z| z / t)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(vals: &[f64]) -> FactoredOperator {
        let n = vals.len();
        FactoredOperator::from_matrix(CMatrix::from_fn(n, n, |i, j| if i == j { c(vals[i]) } else { ZERO }))
            .unwrap()
    }

    #[test]
    fn kron_identities_and_basis_order() {
        let i2 = FactoredOperator::identity(&[2]);
        let k = kron(&i2, &i2);
        assert_eq!(k.factors(), &[2, 2]);
        assert_eq!(k.data(), &CMatrix::identity(4, 4));

        let k = kron(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0]));
        let expect = diag(&[0.0, 1.0, 0.0, 0.0]).with_factors(vec![2, 2]).unwrap();
        assert_eq!(k, expect);
    }

    #[test]
    fn kron_matches_elementwise_loop() {
        let a = flip(2).scale(0.5);
        let b = FactoredOperator::identity(&[2]);
        let k = kron(&a, &b);
        // |i1 i2 i3> with i1 i2 from a and i3 from b
        for r in 0..8 {
            for col in 0..8 {
                let (ra, rb) = (r / 2, r % 2);
                let (ca, cb) = (col / 2, col % 2);
                let expect = a.data()[(ra, ca)] * b.data()[(rb, cb)];
                assert_eq!(k.data()[(r, col)], expect);
            }
        }
    }

    #[test]
    fn factor_validation() {
        assert!(FactoredOperator::new(vec![], CMatrix::zeros(1, 1)).is_err());
        assert!(FactoredOperator::new(vec![0], CMatrix::zeros(0, 0)).is_err());
        assert!(FactoredOperator::new(vec![2, 2], CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn partial_transpose_of_omega_is_flip_over_d() {
        for d in 2..5 {
            let (_, omega) = max_entangled(d);
            let pt = partial_transpose(&omega, &[1]).unwrap();
            assert!(pt.max_abs_diff(&flip(d).scale(1.0 / d as f64)) < 1e-15);
            assert!(partial_transpose(&pt, &[1]).unwrap().max_abs_diff(&omega) <= 1e-15);
        }
        assert!(matches!(
            partial_transpose(&flip(2), &[2]),
            Err(Error::IndexOutOfRange { index: 2, count: 2 })
        ));
    }

    #[test]
    fn partial_transpose_of_product() {
        let mut rng = rng_from_seed(3);
        let a = FactoredOperator::from_matrix(gaussian_matrix(2, 2, &mut rng)).unwrap();
        let b = FactoredOperator::from_matrix(gaussian_matrix(3, 3, &mut rng)).unwrap();
        let bt = FactoredOperator::from_matrix(b.data().transpose()).unwrap();
        let pt = partial_transpose(&kron(&a, &b), &[1]).unwrap();
        assert!(pt.max_abs_diff(&kron(&a, &bt)) < 1e-15);
    }

    #[test]
    fn partial_trace_cases() {
        let (_, omega) = max_entangled(3);
        let marg = partial_trace(&omega, &[0]).unwrap();
        assert!(marg.max_abs_diff(&FactoredOperator::identity(&[3]).scale(1.0 / 3.0)) < 1e-15);

        let mut rng = rng_from_seed(5);
        let a = FactoredOperator::from_matrix(gaussian_matrix(2, 2, &mut rng)).unwrap();
        let b = FactoredOperator::from_matrix(gaussian_matrix(3, 3, &mut rng)).unwrap();
        let pt = partial_trace(&kron(&a, &b), &[1]).unwrap();
        let expect = a.data() * b.trace();
        assert!(max_abs_diff(pt.data(), &expect) < 1e-13);

        let all = partial_trace(&omega, &[0, 1]).unwrap();
        assert_eq!(all.factors(), &[1]);
        assert!((all.trace() - ONE).norm() < 1e-15);
        assert!(partial_trace(&omega, &[5]).is_err());
    }

    #[test]
    fn permutation_swap_and_identity() {
        let mut rng = rng_from_seed(9);
        let a = FactoredOperator::from_matrix(gaussian_matrix(2, 2, &mut rng)).unwrap();
        let b = FactoredOperator::from_matrix(gaussian_matrix(3, 3, &mut rng)).unwrap();
        let ab = kron(&a, &b);
        assert_eq!(permute_factors(&ab, &[0, 1]).unwrap(), ab);
        let swapped = permute_factors(&ab, &[1, 0]).unwrap();
        assert!(swapped.max_abs_diff(&kron(&b, &a)) < 1e-15);
        assert!(permute_factors(&ab, &[0, 0]).is_err());
        assert!(permute_factors(&ab, &[0]).is_err());
    }

    #[test]
    fn flip_trace_norm_and_spectrum() {
        let f = flip(2);
        // eigenvalues +1 (x3) and -1 (x1)
        let eig = eig_hermitian(f.data()).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-12);
        assert!(eig.values[1..].iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!((trace_norm(f.data()) - 4.0).abs() < 1e-12);
        assert!((op_norm(&CMatrix::identity(5, 5)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian_and_reconstructs() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian(_))));

        let mut rng = rng_from_seed(1);
        let h = random_hermitian(6, &mut rng);
        let eig = eig_hermitian(&h).unwrap();
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(max_abs_diff(&eig.reconstruct_with(|l| l), &h) < 1e-10);
    }

    #[test]
    fn density_has_unit_trace_norm() {
        let mut rng = rng_from_seed(11);
        let rho = random_density(4, &mut rng);
        assert!((trace_norm(&rho) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_is_unitary_and_deterministic() {
        let u1 = haar_unitary_seeded(1, 7);
        assert!((u1[(0, 0)].norm() - 1.0).abs() < 1e-14);
        let u = haar_unitary_seeded(8, 7);
        let resid = max_abs_diff(&(u.adjoint() * &u), &CMatrix::identity(8, 8));
        assert!(resid <= 1e-12, "unitarity residual {resid}");
        assert_eq!(u, haar_unitary_seeded(8, 7));
    }

    #[test]
    fn pseudo_inverse_cases() {
        let id = CMatrix::identity(3, 3);
        assert!(max_abs_diff(&pseudo_inverse_default(&id), &id) < 1e-15);
        let d = diag(&[2.0, 0.0]).into_data();
        let expect = diag(&[0.5, 0.0]).into_data();
        assert!(max_abs_diff(&pseudo_inverse_default(&d), &expect) < 1e-15);

        let mut rng = rng_from_seed(2);
        let m = gaussian_matrix(4, 6, &mut rng);
        let p = pseudo_inverse_default(&m);
        assert_eq!(p.shape(), (6, 4));
        assert!(max_abs_diff(&(&m * &p * &m), &m) < 1e-10);
        assert!(max_abs_diff(&(&p * &m * &p), &p) < 1e-10);
        let mp = &m * &p;
        assert!(max_abs_diff(&mp, &mp.adjoint()) < 1e-10);
        let pm = &p * &m;
        assert!(max_abs_diff(&pm, &pm.adjoint()) < 1e-10);
    }

    #[test]
    fn maximally_entangled_facts() {
        for d in 1..5 {
            let (ket, omega) = max_entangled(d);
            assert!(ket.is_normalized());
            assert!((omega.trace() - ONE).norm() < 1e-14);
            let overlap = omega.trace_product(&flip(d)).unwrap();
            assert!((overlap - ONE).norm() < 1e-14);
        }
    }
}
