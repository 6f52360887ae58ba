//! Block-positivity: minimal overlap with product vectors, the operator built
//! from an unextendible product basis, and witnesses for n-tensor-stable
//! positivity.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::OptConfig;
use crate::error::{Error, Flagged, Result};
use crate::qmap::{choi_tensor_power, MapRep};
use crate::tensor::{
    c, eig_hermitian, hermiticity_defect, C64, op_norm, random_ket, rng_from_seed, CMatrix, CVector,
    FactoredOperator, Ket, ONE, ZERO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Certification {
    /// The value is negative beyond tolerance and attained by the stored
    /// product vector, so the operator is not block-positive.
    RefutationCertified,
    /// Best value found by a non-convex search; not a proof of a lower bound.
    HeuristicMinimum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptReport {
    pub value: f64,
    pub certified: Certification,
    pub witness_left: Ket,
    pub witness_right: Ket,
    pub restarts_run: usize,
    pub converged_fraction: f64,
    pub iterations_max: usize,
}

struct Run {
    value: f64,
    left: CVector,
    right: CVector,
    iterations: usize,
    converged: bool,
}

/// `(<psi| ⊗ 1) C (|psi> ⊗ 1)`.
fn contract_left(c_mat: &CMatrix, psi: &CVector, dr: usize) -> CMatrix {
    let dl = psi.len();
    let mut m = CMatrix::zeros(dr, dr);
    for a in 0..dl {
        for a2 in 0..dl {
            let w = psi[a].conj() * psi[a2];
            if w == ZERO {
                continue;
            }
            let block = c_mat.view((a * dr, a2 * dr), (dr, dr));
            m.zip_apply(&block, |acc, x| *acc += w * x);
        }
    }
    m
}

/// `(1 ⊗ <phi|) C (1 ⊗ |phi>)`.
fn contract_right(c_mat: &CMatrix, phi: &CVector, dl: usize) -> CMatrix {
    let dr = phi.len();
    CMatrix::from_fn(dl, dl, |a, a2| {
        let block = c_mat.view((a * dr, a2 * dr), (dr, dr));
        phi.dotc(&(block * phi))
    })
}

fn product_expectation(c_mat: &CMatrix, left: &CVector, right: &CVector) -> f64 {
    let v = left.kronecker(right);
    v.dotc(&(c_mat * &v)).re
}

fn see_saw(c_mat: &CMatrix, dl: usize, dr: usize, seed: u64, cfg: &OptConfig) -> Result<Run> {
    let mut rng = rng_from_seed(seed);
    let mut left = random_ket(dl, &mut rng);
    let mut right = random_ket(dr, &mut rng);
    let mut value = product_expectation(c_mat, &left, &right);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let eig = eig_hermitian(&contract_left(c_mat, &left, dr))?;
        right = eig.min_vector();
        let eig = eig_hermitian(&contract_right(c_mat, &right, dl))?;
        left = eig.min_vector();
        let next = eig.min();
        let change = (value - next).abs();
        value = next;
        if change <= cfg.tol * value.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    Ok(Run { value: product_expectation(c_mat, &left, &right), left, right, iterations, converged })
}

fn contiguous_split(c: &FactoredOperator, left_factors: usize) -> Result<(usize, usize)> {
    let k = c.factors().len();
    if left_factors == 0 || left_factors >= k {
        return Err(Error::dim(format!(
            "split after {left_factors} of {k} factors leaves a side empty"
        )));
    }
    let dl = c.factors()[..left_factors].iter().product();
    let dr = c.factors()[left_factors..].iter().product();
    Ok((dl, dr))
}

/// Minimizes `<psi ⊗ phi| C |psi ⊗ phi>` over unit vectors, splitting the
/// factor list after the first `left_factors` factors.
///
/// Alternates minimal-eigenvector updates of the two sides from `cfg.restarts`
/// random starts; restart `i` uses seed `cfg.seed + i`, and ties between
/// restarts go to the lowest index.
pub fn min_product_overlap(c: &FactoredOperator, left_factors: usize, cfg: &OptConfig) -> Result<OptReport> {
    let defect = hermiticity_defect(c.data());
    if defect > crate::config::HERMITICITY_TOL {
        return Err(Error::NotHermitian(defect));
    }
    if c.side() > cfg.size_cap {
        return Err(Error::SizeCapExceeded { side: c.side(), cap: cfg.size_cap });
    }
    let (dl, dr) = contiguous_split(c, left_factors)?;
    let restarts = cfg.restarts.max(1);
    let c_mat = c.data();
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|i| see_saw(c_mat, dl, dr, cfg.seed.wrapping_add(i as u64), cfg))
        .collect::<Result<_>>()?;

    let converged = runs.iter().filter(|r| r.converged).count();
    let iterations_max = runs.iter().map(|r| r.iterations).max().unwrap_or(0);
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.value < best.value { r } else { best })
        .expect("at least one restart");
    let certified = if best.value < -cfg.tol {
        Certification::RefutationCertified
    } else {
        Certification::HeuristicMinimum
    };
    Ok(OptReport {
        value: best.value,
        certified,
        witness_left: Ket::new(best.left),
        witness_right: Ket::new(best.right),
        restarts_run: restarts,
        converged_fraction: converged as f64 / restarts as f64,
        iterations_max,
    })
}

/// Recomputes `<l ⊗ r| C |l ⊗ r>` from a report's witnesses.
pub fn witness_value(c: &FactoredOperator, report: &OptReport) -> f64 {
    product_expectation(c.data(), report.witness_left.amplitudes(), report.witness_right.amplitudes())
}

/// The operator `P` together with its separable decomposition.
#[derive(Debug, Clone)]
pub struct UpbOperator {
    pub operator: FactoredOperator,
    /// `(A_k, B_k)` with `sum_k A_k ⊗ B_k = P`, each factor positive semidefinite.
    pub separable_terms: Vec<(CMatrix, CMatrix)>,
    pub from_separable: FactoredOperator,
}

/// `P = (|00> + |11>)(<00| + <11|) + |01><01| + |10><10| + sum_{i>1 or j>1} |ij><ij|`
/// on `C^{d1} ⊗ C^{d2}`. Its kernel is spanned by `|00> - |11>`, which has
/// no product vector in it.
pub fn upb_operator(d1: usize, d2: usize) -> Result<UpbOperator> {
    if d1 < 2 || d2 < 2 {
        return Err(Error::param("the UPB operator needs d1, d2 >= 2"));
    }
    let side = d1 * d2;
    let idx = |i: usize, j: usize| i * d2 + j;
    let mut p = CMatrix::identity(side, side);
    p[(idx(0, 0), idx(1, 1))] = ONE;
    p[(idx(1, 1), idx(0, 0))] = ONE;

    let mut terms = Vec::new();
    for k in 0..3 {
        let phase = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 3.0);
        let xi = |d: usize| {
            let mut v = CVector::zeros(d);
            v[0] = ONE;
            v[1] = phase;
            v
        };
        let (x1, x2) = (xi(d1), xi(d2));
        let a = &x1 * x1.adjoint() * c(1.0 / 3.0);
        let b = (&x2 * x2.adjoint()).conjugate();
        terms.push((a, b));
    }
    for i in 0..d1 {
        for j in 0..d2 {
            if i > 1 || j > 1 {
                terms.push((crate::tensor::matrix_unit(d1, i, i), crate::tensor::matrix_unit(d2, j, j)));
            }
        }
    }
    let mut sep = CMatrix::zeros(side, side);
    for (a, b) in &terms {
        sep += a.kronecker(b);
    }
    Ok(UpbOperator {
        operator: FactoredOperator::new(vec![d1, d2], p)?,
        separable_terms: terms,
        from_separable: FactoredOperator::new(vec![d1, d2], sep)?,
    })
}

/// `(pnorm^n + mu^n)^{1/n} - pnorm`, evaluated as
/// `pnorm * expm1(ln(1 + (mu/pnorm)^n) / n)` so it stays accurate for large n.
pub fn nts_epsilon_bound(mu: f64, pnorm: f64, n: u32) -> Result<f64> {
    if !(mu >= 0.0) || !(pnorm > 0.0) || n < 1 {
        return Err(Error::param(format!(
            "need mu >= 0, pnorm > 0, n >= 1 (got {mu}, {pnorm}, {n})"
        )));
    }
    let ratio_pow = (n as f64 * (mu / pnorm).ln()).exp();
    Ok(pnorm * ((ratio_pow.ln_1p()) / n as f64).exp_m1())
}

/// Inputs for choosing `eps` in [`nts_witness_map`].
#[derive(Debug, Clone, Serialize)]
pub struct NtsInterval {
    pub mu: f64,
    pub pnorm: f64,
    pub n: u32,
    /// Largest `eps` for which the witness is guaranteed n-tensor-stable positive.
    pub eps_max: f64,
    pub mu_report: OptReport,
}

pub fn nts_interval(d1: usize, d2: usize, n: u32, cfg: &OptConfig) -> Result<NtsInterval> {
    let upb = upb_operator(d1, d2)?;
    let mu_report = min_product_overlap(&upb.operator, 1, cfg)?;
    let pnorm = op_norm(upb.operator.data());
    let mu = mu_report.value.max(0.0);
    let eps_max = nts_epsilon_bound(mu, pnorm, n)?;
    Ok(NtsInterval { mu, pnorm, n, eps_max, mu_report })
}

/// The map whose Choi matrix is `P - eps 1`, stored without normalization.
/// `eps` outside `[0, eps_max]` is accepted with a warning: the interval is
/// sufficient for n-tensor-stable positivity, not necessary.
pub fn nts_witness_map(d1: usize, d2: usize, eps: f64, eps_max: f64) -> Result<Flagged<MapRep>> {
    let upb = upb_operator(d1, d2)?;
    let shifted = upb.operator.sub(&FactoredOperator::identity(&[d1, d2]).scale(eps))?;
    let mut out = Flagged::clean(MapRep::from_choi(shifted)?);
    if !(0.0..=eps_max).contains(&eps) {
        out.warnings.push(format!(
            "eps = {eps} lies outside the guaranteed interval [0, {eps_max}]"
        ));
    }
    Ok(out)
}

/// Searches for a product vector with negative expectation on the Choi
/// matrix of `m^{⊗n}`, split into all inputs against all outputs.
pub fn verify_nts(m: &MapRep, n: u32, cfg: &OptConfig) -> Result<OptReport> {
    if n < 1 {
        return Err(Error::param("n must be >= 1"));
    }
    let side = (m.din() * m.dout())
        .checked_pow(n)
        .ok_or(Error::SizeCapExceeded { side: usize::MAX, cap: cfg.size_cap })?;
    if side > cfg.size_cap {
        return Err(Error::SizeCapExceeded { side, cap: cfg.size_cap });
    }
    let choi = choi_tensor_power(m, n as usize)?;
    min_product_overlap(&choi, 1, cfg)
}
