#![allow(dead_code)]

use tspm_core::qmap::{measure_prepare, MapRep};
use tspm_core::tensor::{
    c, haar_unitary, psd_pinv_sqrt, random_density, random_ket, rng_from_seed, CMatrix,
};

/// Channel with `rank` Kraus operators cut from a Haar isometry.
pub fn random_channel(din: usize, dout: usize, rank: usize, seed: u64) -> MapRep {
    let mut rng = rng_from_seed(seed);
    let u = haar_unitary(dout * rank, &mut rng);
    assert!(dout * rank >= din);
    let kraus: Vec<CMatrix> = (0..rank)
        .map(|k| u.view((k * dout, 0), (dout, din)).into_owned())
        .collect();
    MapRep::from_kraus(&kraus).unwrap()
}

/// Measure-and-prepare channel with a random POVM and random output states.
pub fn random_eb(din: usize, dout: usize, outcomes: usize, seed: u64) -> MapRep {
    let mut rng = rng_from_seed(seed);
    let raw: Vec<CMatrix> = (0..outcomes).map(|_| random_density(din, &mut rng)).collect();
    let total = raw.iter().fold(CMatrix::zeros(din, din), |acc, a| acc + a);
    let s = psd_pinv_sqrt(&total, 1e-12).unwrap();
    let povm: Vec<CMatrix> = raw.iter().map(|a| &s * a * &s).collect();
    let states: Vec<CMatrix> = (0..outcomes).map(|_| random_density(dout, &mut rng)).collect();
    measure_prepare(&povm, &states).unwrap()
}

/// Smallest output eigenvalue over `samples` Haar-random pure inputs.
pub fn brute_lmin(m: &MapRep, samples: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let v = random_ket(m.din(), &mut rng);
        let out = m.apply(&(&v * v.adjoint())).unwrap();
        let h = (&out + out.adjoint()) * c(0.5);
        let min = h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        best = best.min(min);
    }
    best
}
