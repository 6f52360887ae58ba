use serde::Serialize;
use serde_json::{json, Value};

use tspm_core::blockpos::{min_product_overlap, nts_interval, nts_witness_map, upb_operator, verify_nts};
use tspm_core::capacity::{
    capacity_bound_general, capacity_bound_left, check_additivity_lmin, diamond_interval, lambda_min_out,
    strong_converse_q2, strong_converse_rate_ts, transposition_bound, two_way_error_bound,
};
use tspm_core::config::OptConfig;
use tspm_core::distill::{build_candidate, filter_to_isotropic, filter_to_werner, one_param_family, recurrence_iterate, Side};
use tspm_core::error::Error;
use tspm_core::io::{map_from_json, operator_from_json};
use tspm_core::qmap::{d_cp, is_ccp, is_cp, MapRep};
use tspm_core::tensor::{op_norm, random_hermitian, rng_from_seed, FactoredOperator};
use tspm_core::twirl::{isotropic_param, mc_twirl, twirl_uu, twirl_uubar, werner_param};

use crate::output::{min_converged_fraction, print, render, Report};
use crate::{BoundKind, Command, Format, Protocol, SideArg};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Precondition(_) => 3,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &str) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {path}: {e}")))
}

fn load_map(path: &str) -> CliResult<MapRep> {
    map_from_json(&read(path)?).map_err(|e| CliError::input(format!("{path}: {e}")))
}

fn load_operator(path: &str) -> CliResult<FactoredOperator> {
    operator_from_json(&read(path)?).map_err(|e| CliError::input(format!("{path}: {e}")))
}

fn write_artifact<T: Serialize>(path: &str, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::input(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::input(format!("cannot write {path}: {e}")))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn config_value(cfg: &OptConfig) -> Value {
    json!({
        "seed": cfg.seed,
        "restarts": cfg.restarts,
        "max_iter": cfg.max_iter,
        "tol": cfg.tol,
        "size_cap": cfg.size_cap,
    })
}

fn with_config(mut v: Value, cfg: &OptConfig) -> Value {
    if let Value::Object(m) = &mut v {
        m.entry("config").or_insert_with(|| config_value(cfg));
    }
    v
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

pub fn run(cmd: &Command, cfg: &OptConfig, format: Format) -> CliResult<u8> {
    let report = dispatch(cmd, cfg)?;
    let report = match report {
        Report::Doc(v) => Report::Doc(with_config(v, cfg)),
        table => table,
    };
    print(&render(&report, format).map_err(CliError::input)?).map_err(CliError::input)?;
    if let Report::Doc(v) = &report {
        if let Some(f) = min_converged_fraction(v).filter(|&f| f < 0.5) {
            eprintln!("error: only {:.1}% of restarts converged", 100.0 * f);
            return Ok(2);
        }
    }
    Ok(0)
}

fn dispatch(cmd: &Command, cfg: &OptConfig) -> CliResult<Report> {
    Ok(match cmd {
        Command::Upb { d1, d2, out } => {
            let upb = upb_operator(*d1, *d2)?;
            match out {
                Some(path) => {
                    write_artifact(path, &upb.operator)?;
                    Report::Doc(json!({
                        "out": path,
                        "factors": upb.operator.factors(),
                        "trace": upb.operator.trace().re,
                        "op_norm": op_norm(upb.operator.data()),
                        "separable_terms": upb.separable_terms.len(),
                    }))
                }
                None => Report::Doc(to_value(&upb.operator)),
            }
        }
        Command::Mu { operator, split } => {
            let op = load_operator(operator)?;
            Report::Doc(to_value(&min_product_overlap(&op, *split, cfg)?))
        }
        Command::Witness { d1, d2, n, eps, out } => {
            let interval = nts_interval(*d1, *d2, *n, cfg)?;
            let eps_value = match eps.as_str() {
                "auto" => interval.eps_max,
                s => s
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::input(format!("--eps must be `auto` or a number, got {s}")))?,
            };
            let flagged = nts_witness_map(*d1, *d2, eps_value, interval.eps_max)?;
            warn_all(&flagged.warnings);
            let mut doc = json!({
                "eps": eps_value,
                "interval": [0.0, interval.eps_max],
                "mu": interval.mu,
                "pnorm": interval.pnorm,
                "n": interval.n,
                "mu_report": to_value(&interval.mu_report),
                "warnings": flagged.warnings,
            });
            match out {
                Some(path) => {
                    write_artifact(path, &flagged.value)?;
                    doc["out"] = json!(path);
                }
                None => doc["map"] = to_value(&flagged.value),
            }
            Report::Doc(doc)
        }
        Command::VerifyNts { map, n } => Report::Doc(to_value(&verify_nts(&load_map(map)?, *n, cfg)?)),
        Command::Dcp { map } => Report::Doc(json!(d_cp(&load_map(map)?)?)),
        Command::Dnorm { map } => Report::Doc(to_value(&diamond_interval(&load_map(map)?, cfg)?)),
        Command::Capacity { channel, bound, pmap } => {
            let t = load_map(channel)?;
            let p = || -> CliResult<MapRep> {
                let path = pmap.as_deref().ok_or_else(|| CliError::input("this bound needs --pmap"))?;
                load_map(path)
            };
            let report = match bound {
                BoundKind::Transpose => transposition_bound(&t, cfg)?,
                BoundKind::General => capacity_bound_general(&t, &p()?, cfg)?,
                BoundKind::Left => capacity_bound_left(&t, &p()?, cfg)?,
                BoundKind::ScRate => strong_converse_rate_ts(&t, &p()?, cfg)?,
            };
            Report::Doc(to_value(&report))
        }
        Command::TwoWay { channel, m, n_dim, rate } => {
            let t = load_map(channel)?;
            let floor = match (n_dim, rate) {
                (Some(n), None) => two_way_error_bound(&t, *m, *n, cfg)?,
                (None, Some(r)) => strong_converse_q2(&t, *r, *m, cfg)?,
                _ => return Err(CliError::input("give exactly one of --N or --rate")),
            };
            Report::Doc(to_value(&floor))
        }
        Command::Distill { map, protocol, side } => {
            let m = load_map(map)?;
            let side = match side {
                SideArg::In => Side::InputSide,
                SideArg::Out => Side::OutputSide,
            };
            let outcome = match protocol {
                Protocol::Werner => filter_to_werner(&m, side)?,
                Protocol::Isotropic => filter_to_isotropic(&m, side)?,
            };
            Report::Doc(to_value(&outcome))
        }
        Command::Recurrence { p, d, levels } => {
            let rows = recurrence_iterate(*p, *d, *levels)?
                .into_iter()
                .enumerate()
                .map(|(k, q)| vec![json!(k), json!(q)])
                .collect();
            Report::Table { header: vec!["level", "p"], rows }
        }
        Command::Family { p, d, from_map, out } => {
            let (mut doc, family) = match (from_map, p, d) {
                (Some(path), _, _) => {
                    let cand = build_candidate(&load_map(path)?)?;
                    (to_value(&cand), cand.family)
                }
                (None, Some(p), Some(d)) => {
                    let fam = one_param_family(*p, *d)?;
                    let doc = json!({
                        "p": p,
                        "d": d,
                        "is_cp": to_value(&is_cp(&fam, cfg.tol)?),
                        "is_ccp": to_value(&is_ccp(&fam, cfg.tol)?),
                    });
                    (doc, fam)
                }
                _ => return Err(CliError::input("give --p and --d, or --from-map")),
            };
            match out {
                Some(path) => {
                    write_artifact(path, &family)?;
                    doc["out"] = json!(path);
                }
                None => doc["map"] = to_value(&family),
            }
            Report::Doc(doc)
        }
        Command::Twirl { check, dim, samples, operator } => twirl(*check, *dim, *samples, operator.as_deref(), cfg)?,
        Command::Lmin { map, tensor } => {
            let t = load_map(map)?;
            match tensor {
                Some(path) => Report::Doc(to_value(&check_additivity_lmin(&t, &load_map(path)?, cfg)?)),
                None => Report::Doc(to_value(&lambda_min_out(&t, cfg)?)),
            }
        }
    })
}

fn twirl(check: bool, dim: Option<usize>, samples: usize, operator: Option<&str>, cfg: &OptConfig) -> CliResult<Report> {
    let x = match (operator, dim) {
        (Some(path), _) => load_operator(path)?,
        (None, Some(d)) if d >= 1 => {
            let mut rng = rng_from_seed(cfg.seed);
            FactoredOperator::new(vec![d, d], random_hermitian(d * d, &mut rng))?
        }
        _ => return Err(CliError::input("give --operator or a positive --dim")),
    };
    if let Some(d) = dim {
        if x.factors() != [d, d] {
            return Err(CliError::input(format!("operator factors {:?} do not match --dim {d}", x.factors())));
        }
    }
    let uu = twirl_uu(&x)?;
    let uubar = twirl_uubar(&x)?;
    if !check {
        return Ok(Report::Doc(json!({
            "werner_p": werner_param(&uu.scale(1.0 / uu.trace().re))?,
            "isotropic_p": isotropic_param(&uubar.scale(1.0 / uubar.trace().re))?,
            "twirl_uu": to_value(&uu),
            "twirl_uubar": to_value(&uubar),
        })));
    }
    if samples == 0 {
        return Err(CliError::input("--samples must be positive"));
    }
    let mut rows = Vec::new();
    for (kind, closed, conj) in [("uu", &uu, false), ("uubar", &uubar, true)] {
        let mc = mc_twirl(&x, samples, cfg.seed, conj)?;
        let n = closed.side();
        for r in 0..n {
            for c in 0..n {
                let a = closed.data()[(r, c)];
                let b = mc.mean.data()[(r, c)];
                let (se_re, se_im) = (mc.stderr_re[(r, c)], mc.stderr_im[(r, c)]);
                let within = (a.re - b.re).abs() <= 3.0 * se_re + 1e-12 && (a.im - b.im).abs() <= 3.0 * se_im + 1e-12;
                rows.push(vec![
                    json!(kind),
                    json!(r),
                    json!(c),
                    json!(a.re),
                    json!(a.im),
                    json!(b.re),
                    json!(b.im),
                    json!(se_re),
                    json!(se_im),
                    json!(within),
                ]);
            }
        }
    }
    Ok(Report::Table {
        header: vec!["kind", "row", "col", "closed_re", "closed_im", "mc_re", "mc_im", "stderr_re", "stderr_im", "within_3sigma"],
        rows,
    })
}
