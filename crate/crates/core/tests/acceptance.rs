//! Acceptance suite: one PASS/FAIL line per criterion, with wall-clock time.
//! Runs without the libtest harness so the lines always reach stdout.

mod common;

use std::time::{Duration, Instant};

use tspm_core::blockpos::{min_product_overlap, nts_witness_map, upb_operator, verify_nts, Certification};
use tspm_core::capacity::{
    capacity_bound_general, check_additivity_lmin, diamond_interval, strong_converse_q2, transposition_bound,
    two_way_error_bound, UpperMethod,
};
use tspm_core::config::OptConfig;
use tspm_core::distill::{filter_to_werner, one_param_family, recurrence_g, recurrence_iterate, recurrence_r, Side};
use tspm_core::qmap::{
    adjoint, compose, d_cp, identity_map, is_ccp, is_cp, tensor, transpose_after, transpose_map, werner_channel, MapRep,
};
use tspm_core::tensor::{
    c, flip, gaussian_matrix, kron, max_entangled, op_norm, partial_transpose, permute_factors, random_hermitian,
    rng_from_seed, CMatrix, CVector, FactoredOperator,
};
use tspm_core::twirl::{classify, mc_twirl, twirl_uu, twirl_uubar, EntanglementClass, TwirlState};

use common::{brute_lmin, random_channel, random_eb};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, || format!("took {:.1?}, limit {:.0?}", t, limit))
}

fn cfg() -> OptConfig {
    OptConfig::default()
}

fn upb_constant() -> Check {
    let start = Instant::now();
    let cfg = cfg().with_restarts(64);
    let p22 = upb_operator(2, 2).map_err(|e| e.to_string())?.operator;
    let mu22 = min_product_overlap(&p22, 1, &cfg).map_err(|e| e.to_string())?.value;
    ensure((mu22 - 0.5).abs() <= 1e-6, || format!("mu(2,2) = {mu22}"))?;
    let norm = op_norm(p22.data());
    ensure((norm - 2.0).abs() <= 1e-12, || format!("||P||_inf = {norm}"))?;
    let p33 = upb_operator(3, 3).map_err(|e| e.to_string())?.operator;
    let mu33 = min_product_overlap(&p33, 1, &cfg).map_err(|e| e.to_string())?.value;
    ensure((mu33 - 0.5).abs() <= 1e-6, || format!("mu(3,3) = {mu33}"))?;
    within_time(start, Duration::from_secs(30))?;
    Ok(format!("mu(2,2) = {mu22:.9}, ||P|| = {norm}, mu(3,3) = {mu33:.9}"))
}

fn multiplicativity() -> Check {
    let start = Instant::now();
    let p = upb_operator(2, 2).map_err(|e| e.to_string())?.operator;
    // A1 B1 A2 B2 -> A1 A2 | B1 B2
    let pp = permute_factors(&kron(&p, &p), &[0, 2, 1, 3]).map_err(|e| e.to_string())?;
    let r = min_product_overlap(&pp, 2, &cfg().with_restarts(128)).map_err(|e| e.to_string())?;
    ensure((r.value - 0.25).abs() <= 1e-5, || format!("mu(P⊗P) = {}", r.value))?;
    within_time(start, Duration::from_secs(120))?;
    Ok(format!("mu(P⊗P) = {:.9} over {} restarts", r.value, r.restarts_run))
}

fn nts_witness() -> Check {
    let start = Instant::now();
    let cfg = cfg();
    let inside = nts_witness_map(2, 2, 2.0 / 64.0, f64::INFINITY).map_err(|e| e.to_string())?.value;
    let r_in = verify_nts(&inside, 2, &cfg).map_err(|e| e.to_string())?;
    ensure(r_in.value >= -1e-8, || format!("eps = 2/64 refuted with value {}", r_in.value))?;
    let outside = nts_witness_map(2, 2, 0.1, f64::INFINITY).map_err(|e| e.to_string())?.value;
    let r_out = verify_nts(&outside, 2, &cfg).map_err(|e| e.to_string())?;
    ensure(r_out.certified == Certification::RefutationCertified, || {
        format!("eps = 0.1 not refuted (value {})", r_out.value)
    })?;
    within_time(start, Duration::from_secs(120))?;
    Ok(format!("eps=2/64: min {:.3e}; eps=0.1: refuted at {:.6}", r_in.value, r_out.value))
}

fn twirl_oracle() -> Check {
    let start = Instant::now();
    let samples = 100_000;
    let mut worst_sigma: f64 = 0.0;
    let mut worst_exact: f64 = 0.0;
    let mut compared = 0;
    let mut outside = Vec::new();
    for d in [2, 3] {
        let mut rng = rng_from_seed(1000 + d as u64);
        let x = FactoredOperator::new(vec![d, d], random_hermitian(d * d, &mut rng)).map_err(|e| e.to_string())?;
        let omega = max_entangled(d).1;
        for (conj, closed) in [(false, twirl_uu(&x)), (true, twirl_uubar(&x))] {
            let closed = closed.map_err(|e| e.to_string())?;
            let mc = mc_twirl(&x, samples, 42, conj).map_err(|e| e.to_string())?;
            for r in 0..d * d {
                for col in 0..d * d {
                    let diff = closed.data()[(r, col)] - mc.mean.data()[(r, col)];
                    for (delta, se) in [(diff.re, mc.stderr_re[(r, col)]), (diff.im, mc.stderr_im[(r, col)])] {
                        compared += 1;
                        if delta.abs() > 3.0 * se + 1e-12 {
                            outside.push(format!("d={d} conj={conj} ({r},{col}) at {:.2}σ", delta.abs() / se));
                        }
                        if se > 0.0 {
                            worst_sigma = worst_sigma.max(delta.abs() / se);
                        }
                    }
                }
            }
            let inv = if conj { &omega } else { &flip(d) };
            let dt = (closed.trace() - x.trace()).norm();
            let di = (closed.trace_product(inv).unwrap() - x.trace_product(inv).unwrap()).norm();
            worst_exact = worst_exact.max(dt).max(di);
        }
    }
    ensure(outside.is_empty(), || {
        format!("{} of {compared} real components outside the 3σ band: {}", outside.len(), outside.join(", "))
    })?;
    ensure(worst_exact <= 1e-12, || format!("invariant drift {worst_exact:e}"))?;
    within_time(start, Duration::from_secs(60))?;
    Ok(format!("max |Δ|/σ = {worst_sigma:.2}, invariant drift {worst_exact:.1e}"))
}

fn werner_consistency() -> Check {
    let mut worst: f64 = 0.0;
    for d in [2, 3, 4] {
        for p in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let choi = werner_channel(p, d).map_err(|e| e.to_string())?;
            // independent construction of [(d - p) 1 + (d p - 1) F] / (d (d^2 - 1))
            let df = d as f64;
            let f = flip(d);
            let expect = FactoredOperator::identity(&[d, d])
                .scale(df - p)
                .add(&f.scale(df * p - 1.0))
                .unwrap()
                .scale(1.0 / (df * (df * df - 1.0)));
            worst = worst.max(choi.choi().max_abs_diff(&expect));
        }
    }
    ensure(worst <= 1e-12, || format!("Choi deviation {worst:e}"))?;
    let grid = |lo: f64, hi: f64| (0..=40).map(move |k| lo + (hi - lo) * k as f64 / 40.0);
    for d in [2, 3, 4] {
        let df = d as f64;
        for p in grid(-1.0, 1.0).chain([-0.01, 0.0]) {
            let cl = classify(&TwirlState::werner(p, d).unwrap()).map_err(|e| e.to_string())?;
            let expect = if p < 0.0 { EntanglementClass::EntangledNPPT } else { EntanglementClass::SeparablePPT };
            ensure(cl.class == expect, || format!("Werner d={d} p={p}: {:?}", cl.class))?;
            ensure((cl.pt_min_eigenvalue < -1e-12) == (p < 0.0), || {
                format!("Werner d={d} p={p}: PT spectrum {}", cl.pt_min_eigenvalue)
            })?;
        }
        for p in grid(0.0, 1.0).chain([1.0 / df, 1.0 / df + 0.01]) {
            let cl = classify(&TwirlState::isotropic(p, d).unwrap()).map_err(|e| e.to_string())?;
            let ent = p > 1.0 / df;
            let expect = if ent { EntanglementClass::EntangledNPPT } else { EntanglementClass::SeparablePPT };
            ensure(cl.class == expect, || format!("isotropic d={d} p={p}: {:?}", cl.class))?;
            ensure((cl.pt_min_eigenvalue < -1e-12) == ent, || {
                format!("isotropic d={d} p={p}: PT spectrum {}", cl.pt_min_eigenvalue)
            })?;
        }
    }
    Ok(format!("max Choi deviation {worst:.1e}; thresholds agree with PT spectra"))
}

fn dcp_values() -> Check {
    for d in [2, 3, 4] {
        // F/d as a real symmetric matrix, diagonalized independently
        let n = d * d;
        let f = nalgebra::DMatrix::<f64>::from_fn(n, n, |r, col| {
            let (i, j) = (r / d, r % d);
            if col == j * d + i {
                1.0 / d as f64
            } else {
                0.0
            }
        });
        let oracle: f64 = f.symmetric_eigenvalues().iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
        let v = d_cp(&transpose_map(d)).map_err(|e| e.to_string())?;
        ensure((v - oracle).abs() <= 1e-12 && (v - (d as f64 - 1.0) / 2.0).abs() <= 1e-12, || {
            format!("d_cp(theta_{d}) = {v}, oracle {oracle}")
        })?;
    }
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let (din, dout) = (2 + seed as usize % 2, 2 + (seed as usize / 2) % 2);
        worst = worst.max(d_cp(&random_channel(din, dout, 1 + seed as usize % 3 + din, seed)).unwrap());
    }
    ensure(worst <= 1e-10, || format!("channel d_cp {worst:e}"))?;
    Ok(format!("transpose values (d-1)/2 for d=2..4; max channel d_cp {worst:.1e}"))
}

fn recurrence_algebra() -> Check {
    for d in 2..=5 {
        let df = d as f64;
        let a = recurrence_r(1.0 / df, d).unwrap();
        let b = recurrence_r(1.0, d).unwrap();
        ensure((a - 1.0 / df).abs() <= 1e-12 && (b - 1.0).abs() <= 1e-12, || format!("fixed points at d={d}: {a}, {b}"))?;
        for k in 1..20 {
            let p = 1.0 / df + (1.0 - 1.0 / df) * k as f64 / 20.0;
            let g = recurrence_g(p, d).unwrap();
            let rel = (1.0 - recurrence_r(p, d).unwrap()) / (1.0 - p);
            ensure((g - rel).abs() <= 1e-12, || format!("g_{d}({p}) = {g} vs {rel}"))?;
        }
    }
    let it = recurrence_iterate(0.6, 2, 20).unwrap();
    ensure(it.windows(2).all(|w| w[1] > w[0]), || "iterates not increasing".into())?;
    let last = *it.last().unwrap();
    ensure(last > 1.0 - 1e-6, || {
        format!("r^(20)(0.6) = {last} at d = 2, not above 1 - 1e-6 (1 - r contracts by g_2 -> 2/3 per level)")
    })?;
    Ok(format!("r^(20)(0.6) = {last}"))
}

fn diamond_intervals() -> Check {
    let start = Instant::now();
    let cfg = cfg();
    for seed in 0..5 {
        let ch = random_channel(2 + seed as usize % 2, 2, 3, 100 + seed);
        let iv = diamond_interval(&ch, &cfg).map_err(|e| e.to_string())?;
        ensure((iv.lower - 1.0).abs() <= 1e-8 && (iv.upper - 1.0).abs() <= 1e-8, || {
            format!("channel interval [{}, {}]", iv.lower, iv.upper)
        })?;
    }
    let mut lows = Vec::new();
    for d in [2, 3] {
        let iv = diamond_interval(&transpose_map(d), &cfg).map_err(|e| e.to_string())?;
        let df = d as f64;
        ensure(iv.lower >= df - 1e-4, || format!("theta_{d} lower {}", iv.lower))?;
        ensure((iv.upper - df).abs() <= 1e-12 && iv.method_upper == UpperMethod::CPDecomposition, || {
            format!("theta_{d} upper {} via {:?}", iv.upper, iv.method_upper)
        })?;
        lows.push(iv.lower);
    }
    within_time(start, Duration::from_secs(60))?;
    Ok(format!("channels [1,1]; theta lower ends {:?}", lows))
}

fn bound_reduction() -> Check {
    let cfg = cfg();
    let theta = transpose_map(2);
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let t = random_channel(2, 2, 1 + seed as usize % 4, 200 + seed);
        let a = capacity_bound_general(&t, &theta, &cfg).map_err(|e| e.to_string())?.value;
        let b = transposition_bound(&t, &cfg).map_err(|e| e.to_string())?.value;
        worst = worst.max((a - b).abs());
    }
    ensure(worst <= 1e-6, || format!("max deviation {worst:e}"))?;
    Ok(format!("max |general - transposition| = {worst:.1e} bits"))
}

fn lmin_multiplicativity() -> Check {
    let start = Instant::now();
    let cfg = cfg();
    let samples = 100_000;
    let mut worst_dev: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for k in 0..20u64 {
        let t = random_eb(2, 2, 2 + k as usize % 3, 300 + k);
        let s = random_channel(2, 2, 1 + k as usize % 3, 400 + k);
        let rep = check_additivity_lmin(&t, &s, &cfg).map_err(|e| e.to_string())?;
        worst_dev = worst_dev.max(rep.deviation);
        let ts = tensor(&t, &s);
        for (m, r, name) in [(&t, &rep.lambda_t, "T"), (&s, &rep.lambda_s, "S"), (&ts, &rep.lambda_ts, "T⊗S")] {
            let brute = brute_lmin(m, samples, 500 + k);
            ensure(r.value <= brute + 1e-9, || format!("pair {k} {name}: see-saw {} above sampled {brute}", r.value))?;
            ensure(brute - r.value <= 0.05, || format!("pair {k} {name}: see-saw {} far below sampled {brute}", r.value))?;
            worst_gap = worst_gap.max(brute - r.value);
        }
    }
    ensure(worst_dev <= 1e-6, || format!("max deviation {worst_dev:e}"))?;
    within_time(start, Duration::from_secs(300))?;
    Ok(format!("max deviation {worst_dev:.1e}; max sampling gap {worst_gap:.1e}"))
}

fn filtering_pipeline() -> Check {
    let mut worst: f64 = 0.0;
    let mut ps = Vec::new();
    for p in [-1.0, -0.5, -0.1] {
        let m = werner_channel(p, 2).unwrap();
        let out = filter_to_werner(&m, Side::OutputSide).map_err(|e| e.to_string())?;
        ensure(out.state.p < 0.0, || format!("p_in = {p}: p_out = {}", out.state.p))?;
        // tr(C' F) against d2 <psi|C^{T2}|psi>, both from scratch
        let cpt = partial_transpose(m.choi(), &[1]).unwrap();
        let psi: &CVector = out.psi.amplitudes();
        let rhs = 2.0 * psi.dotc(&(cpt.data() * psi)).re;
        let a = &out.filter;
        let left = a.kronecker(&CMatrix::identity(2, 2));
        let filtered = left.adjoint() * m.choi().data() * &left;
        let lhs = (filtered * flip(2).data()).trace().re;
        worst = worst.max((lhs - rhs).abs());
        ps.push(out.state.p);
    }
    ensure(worst <= 1e-10, || format!("identity residual {worst:e}"))?;
    match filter_to_werner(&transpose_map(2), Side::OutputSide) {
        Err(e) if e.to_string().contains("completely co-positive") => {}
        other => return Err(format!("transpose map: expected the co-positivity error, got {other:?}")),
    }
    Ok(format!("p_out = {ps:?}; identity residual {worst:.1e}"))
}

fn one_parameter_family() -> Check {
    let mut worst: f64 = 0.0;
    for p in [-1.0, -0.5, 0.3] {
        let fam = one_param_family(p, 3).unwrap();
        let rho = werner_channel(p, 3).unwrap().choi().clone();
        let rho_pt = partial_transpose(&rho, &[1]).unwrap();
        let grouped = permute_factors(&kron(&rho, &rho_pt), &[0, 2, 1, 3]).unwrap().with_factors(vec![9, 9]).unwrap();
        worst = worst.max(fam.choi().max_abs_diff(&grouped));
    }
    ensure(worst <= 1e-12, || format!("Choi deviation {worst:e}"))?;
    for k in 0..=33 {
        let p = -1.0 + (1.0 - 0.01) * k as f64 / 33.0;
        let fam = one_param_family(p, 3).unwrap();
        let (cp, ccp) = (is_cp(&fam, 1e-12).unwrap(), is_ccp(&fam, 1e-12).unwrap());
        ensure(!cp.holds && !ccp.holds, || format!("p = {p}: is_cp {cp:?}, is_ccp {ccp:?}"))?;
    }
    Ok(format!("Choi deviation {worst:.1e}; neither CP nor cCP on [-1, -0.01]"))
}

/// `(M ⊗ id)(omega_d)` assembled from the action of `M` on matrix units.
fn left_choi(m: &MapRep) -> CMatrix {
    let d = m.din();
    let k = m.dout();
    let mut out = CMatrix::zeros(k * d, k * d);
    for i in 0..d {
        for j in 0..d {
            let mut e = CMatrix::zeros(d, d);
            e[(i, j)] = c(1.0);
            let img = m.apply(&e).unwrap();
            let mut u = CMatrix::zeros(d, d);
            u[(i, j)] = c(1.0 / d as f64);
            out += img.kronecker(&u);
        }
    }
    out
}

fn tricks_identities() -> Check {
    let mut worst1: f64 = 0.0;
    let mut worst2: f64 = 0.0;
    for (d1, d2) in [(2, 2), (2, 3), (3, 2)] {
        let omega1 = max_entangled(d1).0.amplitudes().clone();
        let omega2 = max_entangled(d2).0.amplitudes().clone();
        for seed in 0..50u64 {
            let mut rng = rng_from_seed(10_000 * d1 as u64 + 100 * d2 as u64 + seed);
            let x = gaussian_matrix(d2, d1, &mut rng);
            let lhs = CMatrix::identity(d1, d1).kronecker(&x) * &omega1;
            let rhs = x.transpose().kronecker(&CMatrix::identity(d2, d2)) * &omega2 * c((d2 as f64 / d1 as f64).sqrt());
            worst1 = worst1.max((lhs - rhs).norm());

            let h = random_hermitian(d1 * d2, &mut rng);
            let l = MapRep::from_choi_matrix(d1, d2, h).unwrap();
            let twisted = compose(&transpose_map(d1), &compose(&adjoint(&l), &transpose_map(d2)).unwrap()).unwrap();
            let rhs = left_choi(&twisted) * c(d2 as f64 / d1 as f64);
            let diff = (l.choi().data() - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
            worst2 = worst2.max(diff);
        }
    }
    ensure(worst1 <= 1e-12, || format!("first identity residual {worst1:e}"))?;
    ensure(worst2 <= 1e-12, || format!("second identity residual {worst2:e}"))?;
    Ok(format!("residuals {worst1:.1e}, {worst2:.1e} over 150 instances each"))
}

fn error_floor_arithmetic() -> Check {
    let cfg = cfg();
    let id2 = identity_map(2);
    let f = two_way_error_bound(&id2, 1, 2.0, &cfg).map_err(|e| e.to_string())?;
    ensure(f.certified == 0.0 && f.optimistic == 0.0, || format!("identity floor {f:?}"))?;
    for seed in 0..3 {
        let t = transpose_after(&random_channel(2, 2, 2, 600 + seed));
        for n in [2.0, 4.0, 8.0] {
            let f = two_way_error_bound(&t, 3, n, &cfg).map_err(|e| e.to_string())?;
            let expect = 1.0 - 1.0 / n;
            ensure((f.certified - expect).abs() <= 1e-12 && (f.optimistic - expect).abs() <= 1e-12, || {
                format!("co-positive channel, N = {n}: {f:?}")
            })?;
        }
    }
    let mut prev = f64::NEG_INFINITY;
    let mut last = 0.0;
    for m in 1..=60 {
        let f = strong_converse_q2(&id2, 1.5, m, &cfg).map_err(|e| e.to_string())?.certified;
        ensure(f >= prev, || format!("floor decreased at m = {m}: {f} < {prev}"))?;
        if m == 10 {
            ensure((f - (1.0 - 2f64.powi(-5))).abs() <= 1e-12, || format!("m = 10 floor {f}"))?;
        }
        prev = f;
        last = f;
    }
    ensure(last >= 1.0 - 1e-9, || format!("floor at m = 60 is {last}"))?;
    Ok(format!("identity floor 0; co-positive floors 1 - 1/N; strong-converse floor at m = 60: {last}"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 14] = [
        ("1 upb constant", upb_constant),
        ("2 multiplicativity of mu", multiplicativity),
        ("3 n-tensor witness", nts_witness),
        ("4 twirl oracle", twirl_oracle),
        ("5 werner channel consistency", werner_consistency),
        ("6 d_cp spectral values", dcp_values),
        ("7 recurrence algebra", recurrence_algebra),
        ("8 diamond intervals", diamond_intervals),
        ("9 bound reduction", bound_reduction),
        ("10 lambda_min multiplicativity", lmin_multiplicativity),
        ("11 filtering pipeline", filtering_pipeline),
        ("12 one-parameter family", one_parameter_family),
        ("13 maximally entangled identities", tricks_identities),
        ("14 error-floor arithmetic", error_floor_arithmetic),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name} ({t:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name} ({t:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
