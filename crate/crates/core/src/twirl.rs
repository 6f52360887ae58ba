//! U⊗U and U⊗Ū twirls, Werner and isotropic states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockpos::min_product_overlap;
use crate::config::OptConfig;
use crate::error::{Error, Result};
use crate::tensor::{
    c, eig_hermitian, flip, haar_unitary, max_entangled, partial_transpose, CMatrix,
    FactoredOperator,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TwirlKind {
    Werner,
    Isotropic,
}

/// Werner state (`p = tr(rho F)`, `p ∈ [-1, 1]`) or isotropic state
/// (`p = tr(rho omega)`, `p ∈ [0, 1]`) on `C^d ⊗ C^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwirlState {
    pub kind: TwirlKind,
    pub d: usize,
    pub p: f64,
}

impl TwirlState {
    pub fn werner(p: f64, d: usize) -> Result<Self> {
        check_werner(p, d)?;
        Ok(Self { kind: TwirlKind::Werner, d, p })
    }

    pub fn isotropic(p: f64, d: usize) -> Result<Self> {
        check_isotropic(p, d)?;
        Ok(Self { kind: TwirlKind::Isotropic, d, p })
    }

    pub fn realize(&self) -> FactoredOperator {
        match self.kind {
            TwirlKind::Werner => werner_state(self.p, self.d),
            TwirlKind::Isotropic => isotropic_state(self.p, self.d),
        }
        .expect("validated on construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntanglementClass {
    SeparablePPT,
    EntangledNPPT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub class: EntanglementClass,
    /// `lambda_min` of the partially transposed state.
    pub pt_min_eigenvalue: f64,
}

fn check_werner(p: f64, d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::param("Werner states need d >= 2"));
    }
    if !(-1.0..=1.0).contains(&p) {
        return Err(Error::param(format!("Werner parameter {p} outside [-1, 1]")));
    }
    Ok(())
}

fn check_isotropic(p: f64, d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::param("isotropic states need d >= 2"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("isotropic parameter {p} outside [0, 1]")));
    }
    Ok(())
}

fn square_pair(c: &FactoredOperator) -> Result<usize> {
    match *c.factors() {
        [a, b] if a == b && a >= 2 => Ok(a),
        _ => Err(Error::dim(format!(
            "twirls need two equal factors of dimension >= 2, got {:?}",
            c.factors()
        ))),
    }
}

/// Projection onto span{1, F}:
/// `[tr C/(d^2-1) - tr(CF)/(d(d^2-1))] 1 - [tr C/(d(d^2-1)) - tr(CF)/(d^2-1)] F`.
pub fn twirl_uu(x: &FactoredOperator) -> Result<FactoredOperator> {
    let d = square_pair(x)?;
    let f = flip(d);
    let df = d as f64;
    let n = df * df - 1.0;
    let tr = x.trace();
    let trf = x.trace_product(&f)?;
    let a = tr / n - trf / (df * n);
    let b = tr / (df * n) - trf / n;
    let data = CMatrix::identity(d * d, d * d) * a - f.data() * b;
    FactoredOperator::new(vec![d, d], data)
}

/// U⊗Ū twirl, the U⊗U twirl conjugated by a partial transpose.
pub fn twirl_uubar(x: &FactoredOperator) -> Result<FactoredOperator> {
    square_pair(x)?;
    let pt = partial_transpose(x, &[1])?;
    partial_transpose(&twirl_uu(&pt)?, &[1])
}

/// `[(d - p) 1 + (d p - 1) F] / (d (d^2 - 1))`.
pub fn werner_state(p: f64, d: usize) -> Result<FactoredOperator> {
    check_werner(p, d)?;
    let df = d as f64;
    let n = df * (df * df - 1.0);
    let data = CMatrix::identity(d * d, d * d) * c((df - p) / n) + flip(d).data() * c((df * p - 1.0) / n);
    FactoredOperator::new(vec![d, d], data)
}

/// `p omega + (1 - p)(1 - omega)/(d^2 - 1)`.
pub fn isotropic_state(p: f64, d: usize) -> Result<FactoredOperator> {
    check_isotropic(p, d)?;
    let df = d as f64;
    let omega = max_entangled(d).1.into_data();
    let rest = CMatrix::identity(d * d, d * d) - &omega;
    let data = omega * c(p) + rest * c((1.0 - p) / (df * df - 1.0));
    FactoredOperator::new(vec![d, d], data)
}

/// `tr(rho F)`.
pub fn werner_param(x: &FactoredOperator) -> Result<f64> {
    let d = square_pair(x)?;
    Ok(x.trace_product(&flip(d))?.re)
}

/// `tr(rho omega)`.
pub fn isotropic_param(x: &FactoredOperator) -> Result<f64> {
    let d = square_pair(x)?;
    Ok(x.trace_product(&max_entangled(d).1)?.re)
}

/// Threshold classification (Werner: entangled iff `p < 0`; isotropic:
/// entangled iff `p > 1/d`), reported together with the spectral PPT test.
pub fn classify(ts: &TwirlState) -> Result<Classification> {
    let entangled = match ts.kind {
        TwirlKind::Werner => {
            check_werner(ts.p, ts.d)?;
            ts.p < 0.0
        }
        TwirlKind::Isotropic => {
            check_isotropic(ts.p, ts.d)?;
            ts.p > 1.0 / ts.d as f64
        }
    };
    let pt = partial_transpose(&ts.realize(), &[1])?;
    let pt_min_eigenvalue = eig_hermitian(pt.data())?.min();
    let class = if entangled { EntanglementClass::EntangledNPPT } else { EntanglementClass::SeparablePPT };
    Ok(Classification { class, pt_min_eigenvalue })
}

/// Empirical Haar twirl with per-entry standard errors of the mean.
#[derive(Debug, Clone)]
pub struct McTwirl {
    pub mean: FactoredOperator,
    pub stderr_re: nalgebra::DMatrix<f64>,
    pub stderr_im: nalgebra::DMatrix<f64>,
    pub samples: usize,
}

const MC_CHUNK: usize = 1024;

struct Moments {
    sum: CMatrix,
    sq_re: nalgebra::DMatrix<f64>,
    sq_im: nalgebra::DMatrix<f64>,
}

/// Average of `(U ⊗ U) C (U ⊗ U)^dagger` (or `U ⊗ Ū` when
/// `conjugate_second`) over Haar samples. Samples are drawn in fixed-size
/// chunks, chunk `k` using ChaCha stream `k` of `seed`, and chunk sums are
/// reduced in chunk order, so the result is independent of thread count.
pub fn mc_twirl(x: &FactoredOperator, samples: usize, seed: u64, conjugate_second: bool) -> Result<McTwirl> {
    let d = square_pair(x)?;
    if samples == 0 {
        return Err(Error::param("Monte-Carlo twirl needs at least one sample"));
    }
    let n = d * d;
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let count = MC_CHUNK.min(samples - k * MC_CHUNK);
            let mut m = Moments {
                sum: CMatrix::zeros(n, n),
                sq_re: nalgebra::DMatrix::zeros(n, n),
                sq_im: nalgebra::DMatrix::zeros(n, n),
            };
            for _ in 0..count {
                let u = haar_unitary(d, &mut rng);
                let second = if conjugate_second { u.conjugate() } else { u.clone() };
                let uu = u.kronecker(&second);
                let y = &uu * x.data() * uu.adjoint();
                for (idx, z) in y.iter().enumerate() {
                    m.sq_re[idx] += z.re * z.re;
                    m.sq_im[idx] += z.im * z.im;
                }
                m.sum += y;
            }
            m
        })
        .collect();

    let mut total = Moments {
        sum: CMatrix::zeros(n, n),
        sq_re: nalgebra::DMatrix::zeros(n, n),
        sq_im: nalgebra::DMatrix::zeros(n, n),
    };
    for p in parts {
        total.sum += p.sum;
        total.sq_re += p.sq_re;
        total.sq_im += p.sq_im;
    }
    let s = samples as f64;
    let mean = total.sum.map(|z| z / s);
    let stderr = |sq: f64, mu: f64| {
        if samples < 2 {
            return f64::INFINITY;
        }
        let var = ((sq - s * mu * mu) / (s - 1.0)).max(0.0);
        (var / s).sqrt()
    };
    let stderr_re = nalgebra::DMatrix::from_fn(n, n, |i, j| stderr(total.sq_re[(i, j)], mean[(i, j)].re));
    let stderr_im = nalgebra::DMatrix::from_fn(n, n, |i, j| stderr(total.sq_im[(i, j)], mean[(i, j)].im));
    Ok(McTwirl { mean: FactoredOperator::new(vec![d, d], mean)?, stderr_re, stderr_im, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchStatus {
    /// Hypotheses hold and the twirl is positive semidefinite.
    Holds,
    /// Hypotheses hold but the twirl has a negative eigenvalue.
    Violated,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwirlPositivityReport {
    /// Heuristic minimum of the product-vector overlap.
    pub product_overlap_min: f64,
    pub trace_flip: f64,
    pub trace_omega: f64,
    pub lambda_min_uu: f64,
    pub lambda_min_uubar: f64,
    pub uu_branch: BranchStatus,
    pub uubar_branch: BranchStatus,
}

/// Checks that the twirl of a block-positive `C` is positive: the U⊗U branch
/// applies when `tr(C F) <= 0`, the U⊗Ū branch when `tr(C omega) >= 0`.
pub fn twirl_positivity_check(x: &FactoredOperator, cfg: &OptConfig) -> Result<TwirlPositivityReport> {
    let d = square_pair(x)?;
    let overlap = min_product_overlap(x, 1, cfg)?;
    let block_positive = overlap.value >= -cfg.tol;
    let trace_flip = x.trace_product(&flip(d))?.re;
    let trace_omega = x.trace_product(&max_entangled(d).1)?.re;
    let lambda_min_uu = eig_hermitian(twirl_uu(x)?.data())?.min();
    let lambda_min_uubar = eig_hermitian(twirl_uubar(x)?.data())?.min();
    let scale = x.trace().norm().max(1.0);
    let status = |hyp: bool, lam: f64| match (hyp, lam >= -1e-10 * scale) {
        (false, _) => BranchStatus::NotApplicable,
        (true, true) => BranchStatus::Holds,
        (true, false) => BranchStatus::Violated,
    };
    Ok(TwirlPositivityReport {
        product_overlap_min: overlap.value,
        trace_flip,
        trace_omega,
        lambda_min_uu,
        lambda_min_uubar,
        uu_branch: status(block_positive && trace_flip <= 0.0, lambda_min_uu),
        uubar_branch: status(block_positive && trace_omega >= 0.0, lambda_min_uubar),
    })
}
