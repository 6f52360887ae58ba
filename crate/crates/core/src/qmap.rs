//! Linear maps between matrix algebras, stored by their normalized Choi
//! matrix `C = (id ⊗ L)(omega_din)` with factors `[din, dout]`.
//!
//! The natural representation `N` acts on row-major vectorizations,
//! `vec(L(X)) = N vec(X)`, and is related to the Choi matrix entrywise by
//! `N[(a, b), (i, j)] = din * C[(i, a), (j, b)]`.

use crate::config::HERMITICITY_TOL;
use crate::error::{Error, Flagged, Result};
use crate::tensor::{
    self, c, eig_hermitian, kron, max_entangled, partial_trace, partial_transpose,
    permute_factors, pseudo_inverse, vec_rowmajor, CMatrix, FactoredOperator, ZERO,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MapRep {
    din: usize,
    dout: usize,
    choi: FactoredOperator,
}

/// Outcome of a structural test, with the number that decided it: the
/// minimal eigenvalue for the positivity tests, the largest deviation
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Verdict {
    pub holds: bool,
    pub witness: f64,
}

impl MapRep {
    /// Wraps a Choi matrix; its factor list must be `[din, dout]`.
    pub fn from_choi(choi: FactoredOperator) -> Result<Self> {
        match *choi.factors() {
            [din, dout] => Ok(Self { din, dout, choi }),
            _ => Err(Error::dim(format!(
                "a Choi matrix needs factors [din, dout], got {:?}",
                choi.factors()
            ))),
        }
    }

    /// Wraps a raw `(din*dout)`-square matrix as a Choi matrix.
    pub fn from_choi_matrix(din: usize, dout: usize, data: CMatrix) -> Result<Self> {
        Self::from_choi(FactoredOperator::new(vec![din, dout], data)?)
    }

    /// Builds the map from its natural representation (`dout^2 x din^2`).
    pub fn from_natural(din: usize, dout: usize, n: &CMatrix) -> Result<Self> {
        if n.shape() != (dout * dout, din * din) {
            return Err(Error::dim(format!(
                "natural representation for {din} -> {dout} must be {}x{}, got {}x{}",
                dout * dout,
                din * din,
                n.nrows(),
                n.ncols()
            )));
        }
        let scale = 1.0 / din as f64;
        let side = din * dout;
        let data = CMatrix::from_fn(side, side, |r, col| {
            let (i, a) = (r / dout, r % dout);
            let (j, b) = (col / dout, col % dout);
            n[(a * dout + b, i * din + j)] * scale
        });
        Self::from_choi_matrix(din, dout, data)
    }

    /// Builds the map by evaluating `f` on the matrix units `E_ij`.
    pub fn from_fn(din: usize, dout: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        let mut n = CMatrix::zeros(dout * dout, din * din);
        for i in 0..din {
            for j in 0..din {
                let image = f(&tensor::matrix_unit(din, i, j));
                if image.shape() != (dout, dout) {
                    return Err(Error::dim("map image has the wrong shape"));
                }
                n.column_mut(i * din + j).copy_from(&vec_rowmajor(&image));
            }
        }
        Self::from_natural(din, dout, &n)
    }

    /// `X -> sum_k K_k X K_k^dagger`, each `K_k` of shape `dout x din`.
    pub fn from_kraus(kraus: &[CMatrix]) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::dim("empty Kraus list"))?;
        let (dout, din) = first.shape();
        if din == 0 || dout == 0 || kraus.iter().any(|k| k.shape() != (dout, din)) {
            return Err(Error::dim("Kraus operators must share a non-empty shape"));
        }
        let scale = 1.0 / din as f64;
        let side = din * dout;
        let data = CMatrix::from_fn(side, side, |r, col| {
            let (i, a) = (r / dout, r % dout);
            let (j, b) = (col / dout, col % dout);
            kraus.iter().map(|k| k[(a, i)] * k[(b, j)].conj()).sum::<tensor::C64>() * scale
        });
        Self::from_choi_matrix(din, dout, data)
    }

    pub fn din(&self) -> usize {
        self.din
    }

    pub fn dout(&self) -> usize {
        self.dout
    }

    pub fn choi(&self) -> &FactoredOperator {
        &self.choi
    }

    /// `J = din * C`.
    pub fn unnormalized_choi(&self) -> CMatrix {
        self.choi.data() * c(self.din as f64)
    }

    pub fn natural_rep(&self) -> CMatrix {
        let (din, dout) = (self.din, self.dout);
        let cd = self.choi.data();
        let s = din as f64;
        CMatrix::from_fn(dout * dout, din * din, |r, col| {
            let (a, b) = (r / dout, r % dout);
            let (i, j) = (col / din, col % din);
            cd[(i * dout + a, j * dout + b)] * s
        })
    }

    /// `L(X) = din * tr_in[(X^T ⊗ 1) C]`.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let (din, dout) = (self.din, self.dout);
        if x.shape() != (din, din) {
            return Err(Error::dim(format!(
                "input must be {din}x{din}, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        let cd = self.choi.data();
        let s = c(din as f64);
        let mut out = CMatrix::zeros(dout, dout);
        for a in 0..dout {
            for b in 0..dout {
                let mut acc = ZERO;
                for i in 0..din {
                    for j in 0..din {
                        acc += x[(i, j)] * cd[(i * dout + a, j * dout + b)];
                    }
                }
                out[(a, b)] = acc * s;
            }
        }
        Ok(out)
    }

    pub fn apply_op(&self, x: &FactoredOperator) -> Result<FactoredOperator> {
        FactoredOperator::new(vec![self.dout], self.apply(x.data())?)
    }

    /// Image of the identity, `L(1)`.
    pub fn image_of_identity(&self) -> CMatrix {
        self.apply(&CMatrix::identity(self.din, self.din)).expect("shape matches by construction")
    }

    /// `L*(1) = din * (tr_out C)^T`.
    pub fn adjoint_image_of_identity(&self) -> CMatrix {
        let marg = partial_trace(&self.choi, &[1]).expect("two factors");
        marg.data().transpose() * c(self.din as f64)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { din: self.din, dout: self.dout, choi: self.choi.scale(s) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self { din: self.din, dout: self.dout, choi: self.choi.add(&other.choi)? })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self { din: self.din, dout: self.dout, choi: self.choi.sub(&other.choi)? })
    }

    /// Largest entrywise Choi difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.din != other.din || self.dout != other.dout {
            return f64::INFINITY;
        }
        self.choi.max_abs_diff(&other.choi)
    }
}

pub fn identity_map(d: usize) -> MapRep {
    MapRep::from_choi(max_entangled(d).1).expect("factors [d, d]")
}

/// Transposition `theta_d`; its Choi matrix is `F_d / d`.
pub fn transpose_map(d: usize) -> MapRep {
    MapRep::from_choi(tensor::flip(d).scale(1.0 / d as f64)).expect("factors [d, d]")
}

/// `W_p(X) = ((d - p) tr(X) 1 - (1 - d p) X^T) / (d^2 - 1)`.
pub fn werner_channel(p: f64, d: usize) -> Result<MapRep> {
    if !(-1.0..=1.0).contains(&p) {
        return Err(Error::param(format!("Werner parameter {p} outside [-1, 1]")));
    }
    if d < 2 {
        return Err(Error::param("Werner channel needs d >= 2"));
    }
    let df = d as f64;
    let norm = df * df - 1.0;
    MapRep::from_fn(d, d, |x| {
        let tr = x.trace();
        CMatrix::identity(d, d) * (tr * ((df - p) / norm)) - x.transpose() * c((1.0 - df * p) / norm)
    })
}

/// `Gamma_d(X) = tr(X) 1 - X`.
pub fn reduction_map(d: usize) -> MapRep {
    MapRep::from_fn(d, d, |x| CMatrix::identity(d, d) * x.trace() - x).expect("square images")
}

/// `X -> (1 - alpha) tr(X) 1 / d + alpha X`. Outside the channel range
/// `[-1/(d^2 - 1), 1]` the map is still returned, with a warning.
pub fn depolarizing(alpha: f64, d: usize) -> Result<Flagged<MapRep>> {
    if d < 1 || !alpha.is_finite() {
        return Err(Error::param("depolarizing needs d >= 1 and a finite weight"));
    }
    let df = d as f64;
    let map = MapRep::from_fn(d, d, |x| {
        CMatrix::identity(d, d) * (x.trace() * ((1.0 - alpha) / df)) + x * c(alpha)
    })?;
    let lower = if d > 1 { -1.0 / (df * df - 1.0) } else { f64::NEG_INFINITY };
    let mut out = Flagged::clean(map);
    if alpha < lower - 1e-15 || alpha > 1.0 + 1e-15 {
        out.warnings.push(format!(
            "depolarizing weight {alpha} outside the channel range [{lower}, 1]; map is not CP"
        ));
    }
    Ok(out)
}

/// Measure-and-prepare channel `rho -> sum_k tr(M_k rho) sigma_k`, whose Choi
/// matrix is `(1/din) sum_k M_k^T ⊗ sigma_k`.
pub fn measure_prepare(povm: &[CMatrix], states: &[CMatrix]) -> Result<MapRep> {
    if povm.is_empty() || povm.len() != states.len() {
        return Err(Error::param("need one prepared state per POVM element"));
    }
    let din = povm[0].nrows();
    let dout = states[0].nrows();
    let mut total = CMatrix::zeros(din, din);
    for m in povm {
        if m.shape() != (din, din) {
            return Err(Error::dim("POVM elements must share a square shape"));
        }
        if eig_hermitian(m).map_err(|_| Error::param("POVM element is not Hermitian"))?.min() < -1e-10 {
            return Err(Error::param("POVM element is not positive semidefinite"));
        }
        total += m;
    }
    if tensor::max_abs_diff(&total, &CMatrix::identity(din, din)) > 1e-10 {
        return Err(Error::param("POVM elements do not sum to the identity"));
    }
    for s in states {
        if s.shape() != (dout, dout) {
            return Err(Error::dim("prepared states must share a square shape"));
        }
    }
    let mut choi = CMatrix::zeros(din * dout, din * dout);
    for (m, s) in povm.iter().zip(states) {
        choi += m.transpose().kronecker(s);
    }
    MapRep::from_choi_matrix(din, dout, choi * c(1.0 / din as f64))
}

/// Hilbert-Schmidt adjoint: `tr(A^dagger L(B)) = tr(L*(A)^dagger B)`.
pub fn adjoint(m: &MapRep) -> MapRep {
    MapRep::from_natural(m.dout, m.din, &m.natural_rep().adjoint()).expect("shapes swap consistently")
}

/// `l2 ∘ l1`.
pub fn compose(l2: &MapRep, l1: &MapRep) -> Result<MapRep> {
    if l1.dout != l2.din {
        return Err(Error::dim(format!(
            "cannot compose a map on {} after one into {}",
            l2.din, l1.dout
        )));
    }
    MapRep::from_natural(l1.din, l2.dout, &(l2.natural_rep() * l1.natural_rep()))
}

/// `l1 ⊗ l2` on `din1*din2 -> dout1*dout2`.
pub fn tensor(l1: &MapRep, l2: &MapRep) -> MapRep {
    let k = kron(&l1.choi, &l2.choi);
    let grouped = permute_factors(&k, &[0, 2, 1, 3]).expect("valid permutation");
    let merged = grouped
        .with_factors(vec![l1.din * l2.din, l1.dout * l2.dout])
        .expect("same side");
    MapRep { din: l1.din * l2.din, dout: l1.dout * l2.dout, choi: merged }
}

/// Choi matrix of `L^{⊗n}` with all inputs grouped before all outputs,
/// returned with factors `[din^n, dout^n]`.
pub fn choi_tensor_power(m: &MapRep, n: usize) -> Result<FactoredOperator> {
    if n < 1 {
        return Err(Error::param("tensor power needs n >= 1"));
    }
    let parts = vec![m.choi.clone(); n];
    let k = tensor::kron_all(&parts)?;
    let perm: Vec<usize> = (0..n).map(|t| 2 * t).chain((0..n).map(|t| 2 * t + 1)).collect();
    let grouped = permute_factors(&k, &perm)?;
    grouped.with_factors(vec![m.din.pow(n as u32), m.dout.pow(n as u32)])
}

pub fn tensor_power(m: &MapRep, n: usize) -> Result<MapRep> {
    MapRep::from_choi(choi_tensor_power(m, n)?)
}

/// `theta_dout ∘ m`, i.e. the Choi matrix partially transposed on the output.
pub fn transpose_after(m: &MapRep) -> MapRep {
    let pt = partial_transpose(&m.choi, &[1]).expect("two factors");
    MapRep { din: m.din, dout: m.dout, choi: pt }
}

/// `m ∘ theta_din`.
pub fn transpose_before(m: &MapRep) -> MapRep {
    let pt = partial_transpose(&m.choi, &[0]).expect("two factors");
    MapRep { din: m.din, dout: m.dout, choi: pt }
}

fn lambda_min_checked(a: &CMatrix) -> Result<f64> {
    Ok(eig_hermitian(a)?.min())
}

/// Completely positive iff the Choi matrix is positive semidefinite.
pub fn is_cp(m: &MapRep, tol: f64) -> Result<Verdict> {
    let lam = lambda_min_checked(m.choi.data())?;
    Ok(Verdict { holds: lam >= -tol, witness: lam })
}

/// Completely co-positive iff the partially transposed Choi matrix is positive
/// semidefinite.
pub fn is_ccp(m: &MapRep, tol: f64) -> Result<Verdict> {
    let lam = lambda_min_checked(transpose_after(m).choi.data())?;
    Ok(Verdict { holds: lam >= -tol, witness: lam })
}

/// `tr_out C = 1 / din`.
pub fn is_trace_preserving(m: &MapRep, tol: f64) -> Verdict {
    let marg = partial_trace(&m.choi, &[1]).expect("two factors");
    let target = CMatrix::identity(m.din, m.din) * c(1.0 / m.din as f64);
    let dev = tensor::max_abs_diff(marg.data(), &target);
    Verdict { holds: dev <= tol, witness: dev }
}

/// `tr_in C = 1 / din`, equivalently `L(1) = 1`.
pub fn is_unital(m: &MapRep, tol: f64) -> Verdict {
    let marg = partial_trace(&m.choi, &[0]).expect("two factors");
    let target = CMatrix::identity(m.dout, m.dout) * c(1.0 / m.din as f64);
    let dev = tensor::max_abs_diff(marg.data(), &target);
    Verdict { holds: dev <= tol, witness: dev }
}

pub fn is_hermiticity_preserving(m: &MapRep, tol: f64) -> Verdict {
    let dev = m.choi.hermiticity_defect();
    Verdict { holds: dev <= tol, witness: dev }
}

pub fn is_channel(m: &MapRep, tol: f64) -> Result<bool> {
    Ok(is_trace_preserving(m, tol).holds && is_cp(m, tol)?.holds)
}

/// `(||C||_1 - tr C) / 2`, the magnitude of the negative part of the Choi
/// spectrum.
pub fn d_cp(m: &MapRep) -> Result<f64> {
    let eig = eig_hermitian(m.choi.data())?;
    Ok(eig.values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum())
}

/// Moore-Penrose right inverse; needs the natural representation to have
/// full row rank `dout^2`.
pub fn right_inverse(m: &MapRep, tol: f64) -> Result<MapRep> {
    let n = m.natural_rep();
    let r = tensor::rank(&n, tol);
    if r < m.dout * m.dout {
        return Err(Error::RankDeficient(format!(
            "map is not surjective: rank {r} < {}",
            m.dout * m.dout
        )));
    }
    MapRep::from_natural(m.dout, m.din, &pseudo_inverse(&n, tol))
}

/// Moore-Penrose left inverse; needs full column rank `din^2`.
pub fn left_inverse(m: &MapRep, tol: f64) -> Result<MapRep> {
    let n = m.natural_rep();
    let r = tensor::rank(&n, tol);
    if r < m.din * m.din {
        return Err(Error::RankDeficient(format!(
            "map is not injective: rank {r} < {}",
            m.din * m.din
        )));
    }
    MapRep::from_natural(m.dout, m.din, &pseudo_inverse(&n, tol))
}

/// `X -> R(1)^{-1/2} R(X) R(1)^{-1/2}`; requires `R(1)` positive definite.
pub fn unitalize(m: &MapRep) -> Result<MapRep> {
    let r1 = m.image_of_identity();
    let eig = eig_hermitian(&r1).map_err(|_| Error::pre("image of the identity is not Hermitian"))?;
    if eig.min() <= HERMITICITY_TOL * eig.max().abs().max(1.0) {
        return Err(Error::pre(format!(
            "image of the identity is not invertible (lambda_min = {:e})",
            eig.min()
        )));
    }
    let s = eig.reconstruct_with(|l| 1.0 / l.sqrt());
    // vec(S X S) = (S ⊗ S^T) vec(X) in row-major order
    let left = s.kronecker(&s.transpose());
    MapRep::from_natural(m.din, m.dout, &(left * m.natural_rep()))
}
