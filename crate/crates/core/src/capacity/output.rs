//! Extremes of output spectra: the minimal output eigenvalue and
//! `tr[S(rho)^p]` over input states.

use rayon::prelude::*;
use serde::Serialize;

use crate::blockpos::{Certification, OptReport};
use crate::config::OptConfig;
use crate::error::{Error, Result};
use crate::qmap::{adjoint, is_ccp, is_cp, tensor, MapRep};
use crate::tensor::{
    c, eig_hermitian, gaussian_matrix, random_ket, rng_from_seed, CMatrix, CVector, Ket,
};

const CP_TOL: f64 = 1e-10;

fn require_cp(m: &MapRep, what: &str) -> Result<()> {
    if !is_cp(m, CP_TOL)?.holds {
        return Err(Error::pre(format!("{what} is not completely positive")));
    }
    Ok(())
}

struct Descent {
    value: f64,
    input: CVector,
    output: CVector,
    iterations: usize,
    converged: bool,
}

/// Pure input `x` -> minimal eigenvector `v` of `T(xx^dagger)` -> minimal
/// eigenvector of `T*(vv^dagger)`. Each half-step can only lower
/// `<v|T(xx^dagger)|v>`.
fn lmin_descent(t: &MapRep, t_adj: &MapRep, mut x: CVector, cfg: &OptConfig) -> Result<Descent> {
    let mut value = f64::INFINITY;
    let mut v = CVector::zeros(t.dout());
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let out = eig_hermitian(&t.apply(&(&x * x.adjoint()))?)?;
        let next = out.min();
        v = out.min_vector();
        let change = value - next;
        value = next;
        if change.abs() <= cfg.tol * value.abs().max(1.0) {
            converged = true;
            break;
        }
        x = eig_hermitian(&t_adj.apply(&(&v * v.adjoint()))?)?.min_vector();
    }
    Ok(Descent { value, input: x, output: v, iterations, converged })
}

/// Smallest output eigenvalue over input states, `min_rho lambda_min(T(rho))`.
///
/// The minimum is attained on pure inputs. The reported value is achieved by
/// the stored input (`witness_left`, with `witness_right` the output
/// eigenvector), so it is an upper bound on the true minimum; restart `i` is
/// seeded with `cfg.seed + i`.
pub fn lambda_min_out(t: &MapRep, cfg: &OptConfig) -> Result<OptReport> {
    require_cp(t, "channel")?;
    let t_adj = adjoint(t);
    let restarts = cfg.restarts.max(1);
    let runs: Vec<Descent> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(cfg.seed.wrapping_add(i as u64));
            lmin_descent(t, &t_adj, random_ket(t.din(), &mut rng), cfg)
        })
        .collect::<Result<_>>()?;
    let converged = runs.iter().filter(|r| r.converged).count();
    let iterations_max = runs.iter().map(|r| r.iterations).max().unwrap_or(0);
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.value < best.value { r } else { best })
        .expect("at least one restart");
    Ok(OptReport {
        value: best.value,
        certified: Certification::HeuristicMinimum,
        witness_left: Ket::new(best.input),
        witness_right: Ket::new(best.output),
        restarts_run: restarts,
        converged_fraction: converged as f64 / restarts as f64,
        iterations_max,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AdditivityReport {
    pub lambda_t: OptReport,
    pub lambda_s: OptReport,
    pub lambda_ts: OptReport,
    pub product: f64,
    /// `|lambda(T ⊗ S) - lambda(T) lambda(S)|`.
    pub deviation: f64,
}

/// Compares `lambda_min_out(T ⊗ S)` with the product of the factors.
///
/// `t_eb` must be entanglement breaking; only the necessary conditions CP and
/// completely co-positive are checkable here, the rest is the caller's
/// obligation (e.g. by building it with `measure_prepare`).
pub fn check_additivity_lmin(t_eb: &MapRep, s_cp: &MapRep, cfg: &OptConfig) -> Result<AdditivityReport> {
    require_cp(t_eb, "first map")?;
    if !is_ccp(t_eb, CP_TOL)?.holds {
        return Err(Error::pre("first map is not entanglement breaking (its Choi matrix is NPPT)"));
    }
    require_cp(s_cp, "second map")?;
    let lambda_t = lambda_min_out(t_eb, cfg)?;
    let lambda_s = lambda_min_out(s_cp, cfg)?;
    let lambda_ts = lambda_min_out(&tensor(t_eb, s_cp), cfg)?;
    let product = lambda_t.value * lambda_s.value;
    let deviation = (lambda_ts.value - product).abs();
    Ok(AdditivityReport { lambda_t, lambda_s, lambda_ts, product, deviation })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Extremum {
    Max,
    Min,
}

/// Result of [`output_p_extreme`]; the witness is a density matrix rather
/// than a product of kets, so this is separate from [`OptReport`].
#[derive(Debug, Clone, Serialize)]
pub struct ExtremeReport {
    pub value: f64,
    #[serde(with = "crate::io::matrix_serde")]
    pub witness: CMatrix,
    pub sign: Extremum,
    pub p: f64,
    /// The extremum is attained on pure states (convex maximization or
    /// concave minimization), and a pure-state search was used.
    pub pure_state_direction: bool,
    /// Some tested output was singular while `p < 0`, so the value is `+inf`.
    pub divergent: bool,
    pub restarts_run: usize,
    pub converged_fraction: f64,
}

/// `tr X^p` for positive semidefinite `X`; `+inf` for singular `X` and `p < 0`.
fn trace_power(x: &CMatrix, p: f64) -> Result<f64> {
    let eig = eig_hermitian(x)?;
    let scale = eig.max().abs().max(1e-300);
    let mut acc = 0.0;
    for &l in &eig.values {
        if l <= 1e-14 * scale {
            if p < 0.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        acc += l.powf(p);
    }
    Ok(acc)
}

/// `p S*(S(rho)^{p-1})`, the gradient of `rho -> tr[S(rho)^p]`.
fn power_gradient(s: &MapRep, s_adj: &MapRep, rho: &CMatrix, p: f64) -> Result<CMatrix> {
    let out = eig_hermitian(&s.apply(rho)?)?;
    let pow = out.reconstruct_with(|l| if l > 0.0 { l.powf(p - 1.0) } else { 0.0 });
    Ok(s_adj.apply(&pow)? * c(p))
}

fn herm(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5)
}

struct Local {
    value: f64,
    rho: CMatrix,
    converged: bool,
}

/// Conditional-gradient steps over pure states: the linearization of a convex
/// (concave) objective is maximized (minimized) by an eigenvector of the
/// gradient, and the objective follows monotonically.
fn pure_state_search(s: &MapRep, s_adj: &MapRep, p: f64, sign: Extremum, mut x: CVector, cfg: &OptConfig) -> Result<Local> {
    let mut rho = &x * x.adjoint();
    let mut value = trace_power(&s.apply(&rho)?, p)?;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        if !value.is_finite() {
            break;
        }
        let g = herm(&power_gradient(s, s_adj, &rho, p)?);
        let eig = eig_hermitian(&g)?;
        x = match sign {
            Extremum::Max => eig.max_vector(),
            Extremum::Min => eig.min_vector(),
        };
        let next_rho = &x * x.adjoint();
        let next = trace_power(&s.apply(&next_rho)?, p)?;
        let improves = match sign {
            Extremum::Max => next >= value,
            Extremum::Min => next <= value,
        };
        if !improves {
            converged = true;
            break;
        }
        let change = (next - value).abs();
        value = next;
        rho = next_rho;
        if change <= cfg.tol * value.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    Ok(Local { value, rho, converged })
}

/// Gradient steps on `rho = A A^dagger / tr(A A^dagger)` with backtracking.
fn mixed_state_search(s: &MapRep, s_adj: &MapRep, p: f64, sign: Extremum, mut a: CMatrix, cfg: &OptConfig) -> Result<Local> {
    let dir = match sign {
        Extremum::Max => 1.0,
        Extremum::Min => -1.0,
    };
    let density = |a: &CMatrix| {
        let r = a * a.adjoint();
        let t = r.trace().re;
        (r * c(1.0 / t), t)
    };
    let (mut rho, mut t) = density(&a);
    let mut value = trace_power(&s.apply(&rho)?, p)?;
    let mut step = 1.0;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        if !value.is_finite() {
            break;
        }
        let g = herm(&power_gradient(s, s_adj, &rho, p)?);
        let centered = &g - CMatrix::identity(g.nrows(), g.ncols()) * (&g * &rho).trace();
        let grad = &centered * &a * c(2.0 / t);
        let gnorm = grad.norm();
        if gnorm <= 1e-14 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            let trial = &a + &grad * c(dir * step);
            let (trial_rho, trial_t) = density(&trial);
            let trial_value = trace_power(&s.apply(&trial_rho)?, p)?;
            if trial_value.is_finite() && dir * (trial_value - value) > 0.0 {
                let change = (trial_value - value).abs();
                a = trial;
                rho = trial_rho;
                t = trial_t;
                value = trial_value;
                step *= 2.0;
                accepted = true;
                if change <= cfg.tol * value.abs().max(1.0) {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    Ok(Local { value, rho, converged })
}

/// Extremizes `tr[S(rho)^p]` over density matrices.
///
/// `tr X^p` is convex for `p >= 1` and `p < 0` and concave for `0 < p < 1`.
/// Maximizing a convex (minimizing a concave) objective is decided by pure
/// states and uses [`pure_state_search`]-style eigenvector steps; the other
/// direction runs gradient steps over mixed states, with one start at the
/// maximally mixed state and the rest random. For `p < 0` a singular output
/// makes the value `+inf`, which is reported through `divergent`.
pub fn output_p_extreme(s: &MapRep, p: f64, sign: Extremum, cfg: &OptConfig) -> Result<ExtremeReport> {
    require_cp(s, "map")?;
    if p == 0.0 || !p.is_finite() {
        return Err(Error::param("the exponent must be finite and non-zero"));
    }
    let convex = p >= 1.0 || p < 0.0;
    let pure_direction = matches!((convex, sign), (true, Extremum::Max) | (false, Extremum::Min));
    let s_adj = adjoint(s);
    let d = s.din();
    let restarts = cfg.restarts.max(1);
    let runs: Vec<Local> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(cfg.seed.wrapping_add(i as u64));
            if pure_direction {
                pure_state_search(s, &s_adj, p, sign, random_ket(d, &mut rng), cfg)
            } else {
                let a = if i == 0 { CMatrix::identity(d, d) } else { gaussian_matrix(d, d, &mut rng) };
                mixed_state_search(s, &s_adj, p, sign, a, cfg)
            }
        })
        .collect::<Result<_>>()?;
    let converged = runs.iter().filter(|r| r.converged).count();
    let better = |a: f64, b: f64| match sign {
        Extremum::Max => a > b,
        Extremum::Min => a < b,
    };
    let best = runs
        .into_iter()
        .reduce(|best, r| if better(r.value, best.value) { r } else { best })
        .expect("at least one restart");
    Ok(ExtremeReport {
        value: best.value,
        divergent: best.value.is_infinite(),
        witness: best.rho,
        sign,
        p,
        pure_state_direction: pure_direction,
        restarts_run: restarts,
        converged_fraction: converged as f64 / restarts as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmap::{depolarizing, identity_map, measure_prepare};
    use crate::tensor::{matrix_unit, random_density};

    fn cfg() -> OptConfig {
        OptConfig::default().with_restarts(16)
    }

    #[test]
    fn lmin_identity_and_depolarizing() {
        assert!(lambda_min_out(&identity_map(3), &cfg()).unwrap().value.abs() < 1e-10);
        let alpha = 0.6;
        let m = depolarizing(alpha, 2).unwrap().value;
        let v = lambda_min_out(&m, &cfg()).unwrap().value;
        assert!((v - (1.0 - alpha) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn lmin_positive_for_full_rank_preparations() {
        let mut rng = rng_from_seed(3);
        let povm = vec![matrix_unit(2, 0, 0), matrix_unit(2, 1, 1)];
        let states = vec![random_density(2, &mut rng), random_density(2, &mut rng)];
        let m = measure_prepare(&povm, &states).unwrap();
        let r = lambda_min_out(&m, &cfg()).unwrap();
        assert!(r.value > 0.0);
        let mixed = m.apply(&(CMatrix::identity(2, 2) * c(0.5))).unwrap();
        assert!(r.value <= eig_hermitian(&mixed).unwrap().min() + 1e-12);
    }

    #[test]
    fn renyi_extremes_of_identity() {
        let id = identity_map(3);
        let min = output_p_extreme(&id, 2.0, Extremum::Min, &cfg()).unwrap();
        assert!((min.value - 1.0 / 3.0).abs() < 1e-8);
        assert!(!min.pure_state_direction);
        let max = output_p_extreme(&id, 2.0, Extremum::Max, &cfg()).unwrap();
        assert!((max.value - 1.0).abs() < 1e-10);
        let neg = output_p_extreme(&id, -1.0, Extremum::Max, &cfg()).unwrap();
        assert!(neg.divergent);
        assert!(output_p_extreme(&id, 0.0, Extremum::Max, &cfg()).is_err());
    }

    #[test]
    fn renyi_half_on_depolarizing() {
        // concave exponent: maximum at the maximally mixed input
        let m = depolarizing(0.5, 2).unwrap().value;
        let r = output_p_extreme(&m, 0.5, Extremum::Max, &cfg()).unwrap();
        assert!((r.value - 2.0 * 0.5f64.sqrt()).abs() < 1e-8);
        // minimum at pure inputs with output spectrum (0.75, 0.25)
        let r = output_p_extreme(&m, 0.5, Extremum::Min, &cfg()).unwrap();
        assert!((r.value - (0.75f64.sqrt() + 0.25f64.sqrt())).abs() < 1e-10);
    }
}
