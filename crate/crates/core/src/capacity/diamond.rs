//! Two-sided bounds on the diamond norm of Hermiticity-preserving maps.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::OptConfig;
use crate::error::{Error, Result};
use crate::qmap::{is_hermiticity_preserving, MapRep};
use crate::tensor::{
    c, eig_hermitian, partial_trace, psd_sqrt, random_ket, rng_from_seed, trace_norm, CMatrix,
    CVector, FactoredOperator, ZERO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UpperMethod {
    /// Exact value `||T*(1)||_inf` for a completely positive map.
    CPClosedForm,
    /// `||T_+*(1)||_inf + ||T_-*(1)||_inf` from the eigensign split of the Choi matrix.
    CPDecomposition,
}

/// Certified enclosure `lower <= ||T||_diamond <= upper`.
#[derive(Debug, Clone, Serialize)]
pub struct NormInterval {
    pub lower: f64,
    pub upper: f64,
    /// Input states `(rho, sigma)` attaining `lower` via [`witness_value`].
    #[serde(serialize_with = "serialize_witness")]
    pub lower_witness: (CMatrix, CMatrix),
    pub method_upper: UpperMethod,
}

fn serialize_witness<S: serde::Serializer>(w: &(CMatrix, CMatrix), s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&crate::io::matrix_to_value(&w.0))?;
    t.serialize_element(&crate::io::matrix_to_value(&w.1))?;
    t.end()
}

/// `||(sqrt(rho^T) ⊗ 1) J (sqrt(sigma^T) ⊗ 1)||_1` with `J = din * C`; every
/// pair of input states gives a lower bound on the diamond norm.
pub fn witness_value(m: &MapRep, rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    let d2 = m.dout();
    let id = CMatrix::identity(d2, d2);
    let a = psd_sqrt(&rho.transpose())?.kronecker(&id);
    let b = psd_sqrt(&sigma.transpose())?.kronecker(&id);
    Ok(trace_norm(&(a * m.unnormalized_choi() * b)))
}

/// `||T*(1)||_inf` where `T*(1) = din (tr_out C)^T`; exact for CP maps.
fn cp_closed_form(choi: &FactoredOperator, din: usize) -> Result<(f64, CVector)> {
    let marg = partial_trace(choi, &[1])?;
    let adj_one = marg.data().transpose() * c(din as f64);
    let eig = eig_hermitian(&adj_one)?;
    Ok((eig.max(), eig.max_vector()))
}

/// `(Phi ⊗ id)(|u><v|)` for `u, v` on input ⊗ ancilla, both of dimension `din`.
fn apply_to_outer(cd: &CMatrix, din: usize, dout: usize, u: &CVector, v: &CVector) -> CMatrix {
    let s = din as f64;
    let n = dout * din;
    let mut x = CMatrix::zeros(n, n);
    for i in 0..din {
        for j in 0..din {
            let block = cd.view((i * dout, j * dout), (dout, dout));
            for z in 0..din {
                let ui = u[i * din + z];
                if ui == ZERO {
                    continue;
                }
                for z2 in 0..din {
                    let w = ui * v[j * din + z2].conj() * s;
                    if w == ZERO {
                        continue;
                    }
                    for y in 0..dout {
                        for y2 in 0..dout {
                            x[(y * din + z, y2 * din + z2)] += w * block[(y, y2)];
                        }
                    }
                }
            }
        }
    }
    x
}

/// `M` with `<v|M|u> = tr(W (Phi ⊗ id)(|u><v|))`.
fn pull_back(cd: &CMatrix, din: usize, dout: usize, w: &CMatrix) -> CMatrix {
    let s = din as f64;
    let n = din * din;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..din {
        for j in 0..din {
            let block = cd.view((i * dout, j * dout), (dout, dout));
            for z in 0..din {
                for z2 in 0..din {
                    let mut acc = ZERO;
                    for y in 0..dout {
                        for y2 in 0..dout {
                            acc += block[(y, y2)] * w[(y2 * din + z2, y * din + z)];
                        }
                    }
                    m[(j * din + z2, i * din + z)] = acc * s;
                }
            }
        }
    }
    m
}

struct Ascent {
    value: f64,
    u: CVector,
    v: CVector,
}

/// Alternates the unitary `W` (polar part of `X`) with the top singular
/// pair of the pulled-back operator; the value never decreases.
fn ascend(m: &MapRep, mut u: CVector, mut v: CVector, cfg: &OptConfig) -> Ascent {
    let (din, dout) = (m.din(), m.dout());
    let cd = m.choi().data();
    let mut value = 0.0;
    for _ in 0..cfg.max_iter {
        let x = apply_to_outer(cd, din, dout, &u, &v);
        let svd = x.svd(true, true);
        let next: f64 = svd.singular_values.iter().sum();
        let w = svd.v_t.expect("requested").adjoint() * svd.u.expect("requested").adjoint();
        let change = next - value;
        value = value.max(next);
        if change.abs() <= cfg.tol * value.max(1.0) {
            break;
        }
        let pb = pull_back(cd, din, dout, &w).svd(true, true);
        let k = (0..pb.singular_values.len())
            .max_by(|&a, &b| pb.singular_values[a].total_cmp(&pb.singular_values[b]))
            .expect("non-empty");
        u = pb.v_t.as_ref().expect("requested").row(k).adjoint();
        v = pb.u.as_ref().expect("requested").column(k).into_owned();
    }
    Ascent { value, u, v }
}

fn reduced(u: &CVector, d: usize) -> CMatrix {
    let mat = crate::tensor::unvec(u, d, d);
    &mat * mat.adjoint()
}

/// Diamond-norm interval.
///
/// For CP maps both ends equal `||T*(1)||_inf`. Otherwise the lower end is the
/// best ascent value over a start at the maximally entangled input and
/// `cfg.restarts` random starts (restart `i` seeded with `cfg.seed + i`),
/// re-evaluated from its witness states; the upper end uses the eigensign
/// split `C = C_+ - C_-` and the closed form on each part.
pub fn diamond_interval(m: &MapRep, cfg: &OptConfig) -> Result<NormInterval> {
    let herm = is_hermiticity_preserving(m, crate::config::HERMITICITY_TOL);
    if !herm.holds {
        return Err(Error::NotHermitian(herm.witness));
    }
    let (din, dout) = (m.din(), m.dout());
    let eig = eig_hermitian(m.choi().data())?;
    let scale = eig.values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    if eig.min() >= -1e-13 * scale {
        let (value, top) = cp_closed_form(m.choi(), din)?;
        let rho = &top * top.adjoint();
        return Ok(NormInterval {
            lower: value,
            upper: value,
            lower_witness: (rho.clone(), rho),
            method_upper: UpperMethod::CPClosedForm,
        });
    }

    let pos = FactoredOperator::new(vec![din, dout], eig.reconstruct_with(|l| l.max(0.0)))?;
    let neg = FactoredOperator::new(vec![din, dout], eig.reconstruct_with(|l| (-l).max(0.0)))?;
    let upper = cp_closed_form(&pos, din)?.0 + cp_closed_form(&neg, din)?.0;

    let omega = crate::tensor::max_entangled(din).0.amplitudes().clone();
    let starts: Vec<Option<u64>> =
        std::iter::once(None).chain((0..cfg.restarts as u64).map(|i| Some(cfg.seed.wrapping_add(i)))).collect();
    let runs: Vec<Ascent> = starts
        .into_par_iter()
        .map(|seed| match seed {
            None => ascend(m, omega.clone(), omega.clone(), cfg),
            Some(s) => {
                let mut rng = rng_from_seed(s);
                let u = random_ket(din * din, &mut rng);
                let v = random_ket(din * din, &mut rng);
                ascend(m, u, v, cfg)
            }
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.value > best.value { r } else { best })
        .expect("at least one start");
    let rho = reduced(&best.u, din);
    let sigma = reduced(&best.v, din);
    let lower = witness_value(m, &rho, &sigma)?;
    Ok(NormInterval { lower, upper: upper.max(lower), lower_witness: (rho, sigma), method_upper: UpperMethod::CPDecomposition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmap::{identity_map, transpose_map, werner_channel, MapRep};
    use crate::tensor::gaussian_matrix;

    fn cfg() -> OptConfig {
        OptConfig::default().with_restarts(8)
    }

    #[test]
    fn channels_have_unit_norm() {
        for m in [identity_map(3), werner_channel(-0.4, 2).unwrap()] {
            let iv = diamond_interval(&m, &cfg()).unwrap();
            assert!((iv.lower - 1.0).abs() < 1e-12 && (iv.upper - 1.0).abs() < 1e-12);
            assert_eq!(iv.method_upper, UpperMethod::CPClosedForm);
            let w = witness_value(&m, &iv.lower_witness.0, &iv.lower_witness.1).unwrap();
            assert!((w - iv.lower).abs() < 1e-10);
        }
    }

    #[test]
    fn transpose_interval() {
        for d in 2..4 {
            let iv = diamond_interval(&transpose_map(d), &cfg()).unwrap();
            assert!(iv.lower >= d as f64 - 1e-10);
            assert!((iv.upper - d as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_bounded_by_omega_evaluation_and_witness_consistent() {
        let mut rng = rng_from_seed(4);
        let g = gaussian_matrix(6, 6, &mut rng);
        let h = (&g + g.adjoint()) * c(0.5);
        let m = MapRep::from_choi_matrix(2, 3, h).unwrap();
        let iv = diamond_interval(&m, &cfg()).unwrap();
        let omega_val = trace_norm(&m.unnormalized_choi()) / 2.0;
        assert!(iv.lower >= omega_val - 1e-10);
        assert!(iv.lower <= iv.upper + 1e-9);
        let w = witness_value(&m, &iv.lower_witness.0, &iv.lower_witness.1).unwrap();
        assert!((w - iv.lower).abs() < 1e-10);
    }

    #[test]
    fn ascent_value_matches_witness_reevaluation() {
        let mut rng = rng_from_seed(8);
        let g = gaussian_matrix(6, 6, &mut rng);
        let h = (&g + g.adjoint()) * c(0.5);
        let m = MapRep::from_choi_matrix(3, 2, h).unwrap();
        let u = random_ket(9, &mut rng);
        let v = random_ket(9, &mut rng);
        let a = ascend(&m, u, v, &cfg());
        let direct = trace_norm(&apply_to_outer(m.choi().data(), 3, 2, &a.u, &a.v));
        let w = witness_value(&m, &reduced(&a.u, 3), &reduced(&a.v, 3)).unwrap();
        assert!((direct - w).abs() < 1e-10, "{direct} vs {w}");
        assert!(a.value >= direct - 1e-9);
    }
}
