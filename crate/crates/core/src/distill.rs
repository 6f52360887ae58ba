//! Distillation-style protocols on Choi matrices of positive maps: local
//! filtering onto Werner and isotropic states, the recurrence recursion, the
//! one-parameter candidate family and d_CP bounds.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::blockpos::{min_product_overlap, OptReport};
use crate::capacity::{diamond_interval, BoundReport, BoundUnit, Constituent, FormulaId};
use crate::config::OptConfig;
use crate::error::{Error, Result};
use crate::qmap::{
    choi_tensor_power, d_cp, depolarizing, identity_map, tensor, transpose_after, werner_channel,
    MapRep,
};
use crate::tensor::{
    c, eig_hermitian, flip, max_entangled, partial_trace, partial_transpose, trace_norm, unvec,
    CMatrix, FactoredOperator, Ket,
};
use crate::twirl::{twirl_uu, twirl_uubar, werner_param, isotropic_param, TwirlState};

/// Strict negativity threshold for the eigenvalues that trigger filtering.
pub const FILTER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    InputSide,
    OutputSide,
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterOutcome {
    pub side: Side,
    #[serde(with = "crate::io::matrix_serde")]
    pub filter: CMatrix,
    pub state: TwirlState,
    /// `<psi|C^{T2}|psi>` (Werner) or `<psi|C_reduction|psi>` (isotropic).
    pub raw_overlap: f64,
    pub trace_before_twirl: f64,
    /// Flip (Werner) or maximally-entangled (isotropic) expectation of the
    /// filtered operator before normalization.
    pub invariant_before_twirl: f64,
    pub psi: Ket,
    /// Filtered operator `C'` before twirling.
    pub filtered: FactoredOperator,
}

fn min_negative_eigvec(op: &CMatrix, what: &str) -> Result<(f64, crate::tensor::CVector)> {
    let eig = eig_hermitian(op)?;
    if eig.min() >= -FILTER_TOL {
        return Err(Error::pre(format!("{what} (minimal eigenvalue {:e})", eig.min())));
    }
    Ok((eig.min(), eig.min_vector()))
}

/// `(A^dagger ⊗ 1) C (A ⊗ 1)` with `A` of shape `d1 x k`.
fn filter_first(cm: &CMatrix, a: &CMatrix, dout: usize) -> CMatrix {
    let left = a.kronecker(&CMatrix::identity(dout, dout));
    left.adjoint() * cm * left
}

/// `(1 ⊗ L) C (1 ⊗ R)`.
fn filter_second(cm: &CMatrix, l: &CMatrix, r: &CMatrix, din: usize) -> CMatrix {
    let id = CMatrix::identity(din, din);
    id.kronecker(l) * cm * id.kronecker(r)
}

fn checked_trace(cp: &CMatrix) -> Result<f64> {
    let tr = cp.trace().re;
    if tr <= FILTER_TOL {
        return Err(Error::pre(format!("filtered operator has vanishing trace {tr:e}")));
    }
    Ok(tr)
}

fn clamp_param(p: f64, lo: f64, hi: f64) -> Result<f64> {
    let slack = 1e-9;
    if p < lo - slack || p > hi + slack {
        return Err(Error::pre(format!(
            "filtered parameter {p} outside [{lo}, {hi}]; the map is not positive"
        )));
    }
    Ok(p.clamp(lo, hi))
}

/// Filters the Choi matrix of a positive, not completely co-positive map to an
/// entangled Werner state.
///
/// `psi` is the minimal eigenvector of `C^{T2}`, and `tr(C' F) = d <psi|C^{T2}|psi> < 0`
/// for the filtered `C'`. On the output side `A = sqrt(d2) mat(psi)` and
/// `C' = (A^dagger ⊗ 1) C (A ⊗ 1)` on `d2 ⊗ d2`; on the input side
/// `B = sqrt(d1) mat(psi)^T` and `C' = (1 ⊗ B^T) C (1 ⊗ conj(B))` on `d1 ⊗ d1`.
pub fn filter_to_werner(m: &MapRep, side: Side) -> Result<FilterOutcome> {
    let (d1, d2) = (m.din(), m.dout());
    let pt = partial_transpose(m.choi(), &[1])?;
    let (raw_overlap, psi) = min_negative_eigvec(
        pt.data(),
        "map is completely co-positive: the partially transposed Choi matrix has no negative eigenvalue",
    )?;
    let mat = unvec(&psi, d1, d2);
    let (filter, filtered, d) = match side {
        Side::OutputSide => {
            let a = mat * c((d2 as f64).sqrt());
            let cp = filter_first(m.choi().data(), &a, d2);
            (a, cp, d2)
        }
        Side::InputSide => {
            let b = mat.transpose() * c((d1 as f64).sqrt());
            let cp = filter_second(m.choi().data(), &b.transpose(), &b.conjugate(), d1);
            (b, cp, d1)
        }
    };
    if d < 2 {
        return Err(Error::pre("Werner states need the filtered side to have dimension >= 2"));
    }
    let filtered = FactoredOperator::new(vec![d, d], filtered)?;
    let tr = checked_trace(filtered.data())?;
    let tf = filtered.trace_product(&flip(d))?.re;
    let twirled = twirl_uu(&filtered)?.scale(1.0 / tr);
    let p = clamp_param(werner_param(&twirled)?, -1.0, 1.0)?;
    Ok(FilterOutcome {
        side,
        filter,
        state: TwirlState::werner(p, d)?,
        raw_overlap,
        trace_before_twirl: tr,
        invariant_before_twirl: tf,
        psi: Ket::new(psi),
        filtered,
    })
}

/// `lambda_max[(1 ⊗ P(1))^{-1/2} C (1 ⊗ P(1))^{-1/2}]` with a generalized
/// inverse square root; a value above `1/d1` shows `P ∘ Gamma` is not CP.
pub fn reduction_p(m: &MapRep) -> Result<f64> {
    let p1 = m.image_of_identity();
    if p1.norm() <= FILTER_TOL {
        return Err(Error::pre("P(1) vanishes"));
    }
    let s = crate::tensor::psd_pinv_sqrt(&p1, 1e-12)?;
    let k = CMatrix::identity(m.din(), m.din()).kronecker(&s);
    let eig = eig_hermitian(&(&k * m.choi().data() * &k))?;
    Ok(eig.max())
}

/// Choi matrix of `Gamma ∘ P` (output side) or `P ∘ Gamma` (input side).
pub fn reduction_choi(m: &MapRep, side: Side) -> Result<CMatrix> {
    let (d1, d2) = (m.din(), m.dout());
    let cm = m.choi().data();
    Ok(match side {
        Side::OutputSide => {
            let marg = partial_trace(m.choi(), &[1])?;
            marg.data().kronecker(&CMatrix::identity(d2, d2)) - cm
        }
        Side::InputSide => {
            let p1 = m.image_of_identity();
            CMatrix::identity(d1, d1).kronecker(&p1) * c(1.0 / d1 as f64) - cm
        }
    })
}

/// Filters a map violating the reduction criterion to an entangled isotropic
/// state (`p > 1/d`), via the minimal eigenvector `psi` of the reduction Choi
/// matrix and the U⊗Ū twirl.
pub fn filter_to_isotropic(m: &MapRep, side: Side) -> Result<FilterOutcome> {
    let (d1, d2) = (m.din(), m.dout());
    let red = reduction_choi(m, side)?;
    let (raw_overlap, psi) = min_negative_eigvec(&red, "reduction criterion is not violated on this side")?;
    let mat = unvec(&psi, d1, d2);
    let (filter, filtered, d) = match side {
        Side::OutputSide => {
            let a = mat * c((d2 as f64).sqrt());
            let cp = filter_first(m.choi().data(), &a, d2);
            (a, cp, d2)
        }
        Side::InputSide => {
            let b = mat.transpose() * c((d1 as f64).sqrt());
            let cp = filter_second(m.choi().data(), &b.adjoint(), &b, d1);
            (b, cp, d1)
        }
    };
    if d < 2 {
        return Err(Error::pre("isotropic states need the filtered side to have dimension >= 2"));
    }
    let filtered = FactoredOperator::new(vec![d, d], filtered)?;
    let tr = checked_trace(filtered.data())?;
    let tw = filtered.trace_product(&max_entangled(d).1)?.re;
    let twirled = twirl_uubar(&filtered)?.scale(1.0 / tr);
    let p = clamp_param(isotropic_param(&twirled)?, 0.0, 1.0)?;
    Ok(FilterOutcome {
        side,
        filter,
        state: TwirlState::isotropic(p, d)?,
        raw_overlap,
        trace_before_twirl: tr,
        invariant_before_twirl: tw,
        psi: Ket::new(psi),
        filtered,
    })
}

fn check_dim(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::param("the recursion needs d >= 2"));
    }
    Ok(d as f64)
}

fn recurrence_denominator(p: f64, d: f64) -> f64 {
    p * p * d * d * d - 2.0 * p * d + d * d + d - 1.0
}

/// `r(p) = [1 + p (p d (d^2 + d - 1) - 2)] / [p^2 d^3 - 2 p d + d^2 + d - 1]`.
pub fn recurrence_r(p: f64, d: usize) -> Result<f64> {
    let df = check_dim(d)?;
    let den = recurrence_denominator(p, df);
    if den == 0.0 {
        return Err(Error::param(format!("denominator of r vanishes at p = {p}")));
    }
    Ok((1.0 + p * (p * df * (df * df + df - 1.0) - 2.0)) / den)
}

/// `g_d(p) = (1 - r(p)) / (1 - p)` for `p ∈ (1/d, 1]`, evaluated in the
/// cancelled form `(d - 1)(d p + d + 2) / [p (p d^3 - 2 d) + d^2 + d - 1]`
/// so that `p = 1` needs no limit.
pub fn recurrence_g(p: f64, d: usize) -> Result<f64> {
    let df = check_dim(d)?;
    if !(p > 1.0 / df && p <= 1.0) {
        return Err(Error::param(format!("g_d needs p in (1/d, 1], got {p}")));
    }
    Ok((df - 1.0) * (df * p + df + 2.0) / recurrence_denominator(p, df))
}

/// `[p, r(p), r(r(p)), ...]` with `levels` applications of `r`.
pub fn recurrence_iterate(p: f64, d: usize, levels: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(levels + 1);
    out.push(p);
    let mut q = p;
    for _ in 0..levels {
        q = recurrence_r(q, d)?;
        out.push(q);
    }
    Ok(out)
}

/// `2 (1 - p) g_{d1}(p)^{floor(log2(n - 1))}` with `p = reduction_p(m)`.
///
/// The report treats the value as a bound on `d_CP(P) / ||P||_diamond` and
/// carries `d_CP` and the diamond interval of `P` for auditing.
pub fn dcp_bound_recurrence(m: &MapRep, n: u32, cfg: &OptConfig) -> Result<BoundReport> {
    if n < 2 {
        return Err(Error::param("n must be >= 2"));
    }
    let d1 = m.din();
    let p = reduction_p(m)?;
    if !(p > 1.0 / d1 as f64) {
        return Err(Error::pre(format!(
            "reduction criterion not violated: p = {p} <= 1/{d1}"
        )));
    }
    let p = p.min(1.0);
    let g = recurrence_g(p, d1)?;
    let exponent = (n - 1).ilog2();
    let value = 2.0 * (1.0 - p) * g.powi(exponent as i32);
    let dcp = d_cp(m)?;
    let diamond = diamond_interval(m, cfg)?;
    let mut constituents = BTreeMap::new();
    constituents.insert("d_cp".to_string(), Constituent::exact(dcp, "spectral"));
    constituents.insert("p_diamond".to_string(), Constituent::from_interval(&diamond));
    let params = BTreeMap::from([
        ("p".to_string(), p),
        ("g".to_string(), g),
        ("exponent".to_string(), exponent as f64),
        ("n".to_string(), n as f64),
        ("d1".to_string(), d1 as f64),
    ]);
    Ok(BoundReport {
        formula_id: FormulaId::RecurrenceDcpRatio,
        value,
        unit: BoundUnit::Ratio,
        constituents,
        params,
        conservative: true,
        vacuous: false,
        notes: vec!["bounds d_CP(P) / ||P||_diamond; the unnormalized d_CP(P) form is not claimed".into()],
    })
}

/// `W_p ⊗ (theta_d ∘ W_p)` on `d^2 -> d^2`.
pub fn one_param_family(p: f64, d: usize) -> Result<MapRep> {
    let w = werner_channel(p, d)?;
    Ok(tensor(&w, &transpose_after(&w)))
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub p: f64,
    pub d: usize,
    pub p_direct: f64,
    pub p_transposed: f64,
    /// Depolarizing weight raising the smaller parameter to `p`.
    pub alpha: f64,
    pub filter_direct: FilterOutcome,
    pub filter_transposed: FilterOutcome,
    #[serde(skip)]
    pub family: MapRep,
}

/// Filters `m` and `theta ∘ m` to Werner states with parameters `p1, p2 < 0`,
/// equalizes them at `p = max(p1, p2)` with the depolarizing weight
/// `alpha = (p - 1/d) / (p_small - 1/d)`, and returns `one_param_family(p, d)`.
pub fn build_candidate(m: &MapRep) -> Result<Candidate> {
    let direct = filter_to_werner(m, Side::OutputSide)?;
    let transposed = filter_to_werner(&transpose_after(m), Side::OutputSide)?;
    let d = m.dout();
    let (p1, p2) = (direct.state.p, transposed.state.p);
    let p = p1.max(p2);
    let p_small = p1.min(p2);
    let inv_d = 1.0 / d as f64;
    let alpha = (p - inv_d) / (p_small - inv_d);
    // the same weight must be realizable by a depolarizing channel
    let dep = depolarizing(alpha, d)?;
    if !dep.is_clean() {
        return Err(Error::pre(dep.warnings.join("; ")));
    }
    Ok(Candidate {
        p,
        d,
        p_direct: p1,
        p_transposed: p2,
        alpha,
        filter_direct: direct,
        filter_transposed: transposed,
        family: one_param_family(p, d)?,
    })
}

/// `sum_i (A_i ⊗ B_i) X (A_i ⊗ B_i)^dagger`.
pub fn apply_separable(pairs: &[(CMatrix, CMatrix)], x: &FactoredOperator) -> Result<FactoredOperator> {
    let (a0, b0) = pairs.first().ok_or_else(|| Error::dim("empty Kraus list"))?;
    let (ra, ca) = a0.shape();
    let (rb, cb) = b0.shape();
    if pairs.iter().any(|(a, b)| a.shape() != (ra, ca) || b.shape() != (rb, cb)) {
        return Err(Error::dim("Kraus pairs must share shapes"));
    }
    if x.side() != ca * cb {
        return Err(Error::dim(format!(
            "operator side {} does not match {}x{}",
            x.side(),
            ca,
            cb
        )));
    }
    let mut out = CMatrix::zeros(ra * rb, ra * rb);
    for (a, b) in pairs {
        let k = a.kronecker(b);
        out += &k * x.data() * k.adjoint();
    }
    FactoredOperator::new(vec![ra, rb], out)
}

/// `||omega_{d1} - S(C^{⊗(n-1)})||_1` for the input/output grouped Choi power.
pub fn scheme_error(m: &MapRep, pairs: &[(CMatrix, CMatrix)], n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::param("n must be >= 2"));
    }
    let power = choi_tensor_power(m, (n - 1) as usize)?;
    let out = apply_separable(pairs, &power)?;
    let d1 = m.din();
    if out.side() != d1 * d1 {
        return Err(Error::dim(format!("scheme output must act on {d1} x {d1}")));
    }
    Ok(trace_norm(&(max_entangled(d1).1.into_data() - out.data())))
}

/// `upper||id - R||_diamond * upper||P||_diamond`, compared against `d_CP(P)`.
///
/// The bound needs `R ⊗ P` to be positive; a block-positivity search on its
/// Choi matrix is recorded in the notes and in `params["hypothesis_refuted"]`.
pub fn dcp_scheme_bound(m: &MapRep, r: &MapRep, cfg: &OptConfig) -> Result<(BoundReport, OptReport)> {
    let d1 = m.din();
    if r.din() != d1 || r.dout() != d1 {
        return Err(Error::dim(format!("R must map {d1} -> {d1}")));
    }
    let id_minus_r = identity_map(d1).sub(r)?;
    let a = diamond_interval(&id_minus_r, cfg)?;
    let b = diamond_interval(m, cfg)?;
    let dcp = d_cp(m)?;
    let joint = tensor(r, m);
    let search = min_product_overlap(joint.choi(), 1, cfg)?;
    let refuted = search.value < -cfg.tol;
    let value = a.upper * b.upper;
    let mut constituents = BTreeMap::new();
    constituents.insert("id_minus_r".to_string(), Constituent::from_interval(&a));
    constituents.insert("p".to_string(), Constituent::from_interval(&b));
    constituents.insert("d_cp".to_string(), Constituent::exact(dcp, "spectral"));
    let mut notes = Vec::new();
    if refuted {
        notes.push(format!(
            "hypothesis refuted: R ⊗ P is not positive (product overlap {:e})",
            search.value
        ));
    } else {
        notes.push("hypothesis R ⊗ P positive: not refuted by the product-vector search".into());
    }
    let params = BTreeMap::from([("hypothesis_refuted".to_string(), if refuted { 1.0 } else { 0.0 })]);
    let report = BoundReport {
        formula_id: FormulaId::SchemeDcp,
        value,
        unit: BoundUnit::Ratio,
        constituents,
        params,
        conservative: true,
        vacuous: false,
        notes,
    };
    Ok((report, search))
}
