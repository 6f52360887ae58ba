//! Capacity, strong-converse and error-floor evaluators.
//!
//! Each bound combines diamond-norm intervals. The end of each interval is
//! chosen so the reported number stays a valid upper bound on the capacity
//! (upper ends in numerators, lower ends in denominators).

use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use super::diamond::{diamond_interval, NormInterval};
use crate::config::{OptConfig, PINV_TOL};
use crate::error::{Error, Result};
use crate::qmap::{
    adjoint, compose, is_ccp, is_channel, is_cp, is_hermiticity_preserving, is_trace_preserving,
    is_unital, left_inverse, right_inverse, transpose_after, MapRep,
};
use crate::tensor::{op_norm, trace_norm};

/// Tolerance for the unitality and trace-preservation preconditions.
pub const STRUCTURE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FormulaId {
    /// `log2 ||theta ∘ T||_diamond`.
    Transposition,
    /// `log2(||P^-1 ∘ T|| ||P*(1)||_inf) log2(d2) / log2 ||P*||`.
    GeneralRightInverse,
    /// `log2 ||T ∘ P^-1|| log2(d1) / log2(||P*|| / ||P(1)||_inf)`.
    LeftInverse,
    /// Strong-converse rate with `||(P* ⊗ id)(omega)||_1` in the denominator.
    StrongConverseRate,
    /// `2 (1 - p) g_d(p)^{floor(log2(n - 1))}`, bounding `d_CP(P) / ||P||_diamond`.
    RecurrenceDcpRatio,
    /// `||id - R||_diamond ||P||_diamond`, bounding `d_CP(P)`.
    SchemeDcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundUnit {
    Bits,
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constituent {
    pub lower: f64,
    pub upper: f64,
    pub method: String,
}

impl Constituent {
    pub fn exact(value: f64, method: &str) -> Self {
        Self { lower: value, upper: value, method: method.into() }
    }

    pub fn from_interval(iv: &NormInterval) -> Self {
        Self { lower: iv.lower, upper: iv.upper, method: format!("{:?}", iv.method_upper) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub formula_id: FormulaId,
    pub value: f64,
    pub unit: BoundUnit,
    pub constituents: BTreeMap<String, Constituent>,
    pub params: BTreeMap<String, f64>,
    /// Every constituent was taken at the end that keeps the bound valid.
    pub conservative: bool,
    /// The denominator is not above one, so no finite bound follows.
    pub vacuous: bool,
    pub notes: Vec<String>,
}

impl Serialize for BoundReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("formula_id", &self.formula_id)?;
        let key = match self.unit {
            BoundUnit::Bits => "bound_bits",
            BoundUnit::Ratio => "bound_ratio",
        };
        if self.value.is_finite() {
            m.serialize_entry(key, &self.value)?;
        } else {
            m.serialize_entry(key, &format!("{}", self.value))?;
        }
        m.serialize_entry("constituents", &self.constituents)?;
        m.serialize_entry("params", &self.params)?;
        m.serialize_entry("conservative", &self.conservative)?;
        m.serialize_entry("vacuous", &self.vacuous)?;
        m.serialize_entry("notes", &self.notes)?;
        m.end()
    }
}

fn ratio_of_logs(num_arg: f64, scale_bits: f64, den_arg: f64) -> (f64, bool) {
    if den_arg <= 1.0 {
        return (f64::INFINITY, true);
    }
    (num_arg.log2() * scale_bits / den_arg.log2(), false)
}

impl BoundReport {
    fn constituent(&self, name: &str) -> &Constituent {
        &self.constituents[name]
    }

    fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    /// Re-evaluates the formula from the stored constituents and parameters.
    pub fn recompute(&self) -> f64 {
        match self.formula_id {
            FormulaId::Transposition => self.constituent("theta_t").upper.log2(),
            FormulaId::GeneralRightInverse => {
                let num = self.constituent("pinv_t").upper * self.constituent("p_adjoint_unit").upper;
                ratio_of_logs(num, self.param("d2").log2(), self.constituent("p_adjoint").lower).0
            }
            FormulaId::LeftInverse => {
                let den = self.constituent("p_adjoint").lower / self.constituent("p_unit").upper;
                ratio_of_logs(self.constituent("t_pinv").upper, self.param("d1").log2(), den).0
            }
            FormulaId::StrongConverseRate => {
                let num = self.constituent("pinv_t").upper * self.constituent("p_adjoint_unit").upper;
                ratio_of_logs(num, self.param("d2").log2(), self.constituent("p_adjoint_omega").lower).0
            }
            FormulaId::RecurrenceDcpRatio => {
                2.0 * (1.0 - self.param("p")) * self.param("g").powi(self.param("exponent") as i32)
            }
            FormulaId::SchemeDcp => self.constituent("id_minus_r").upper * self.constituent("p").upper,
        }
    }
}

fn require_channel(t: &MapRep) -> Result<()> {
    if !is_channel(t, STRUCTURE_TOL)? {
        return Err(Error::pre("input is not a quantum channel (CP and trace preserving)"));
    }
    Ok(())
}

fn tsp_disclaimer(p: &MapRep, notes: &mut Vec<String>) -> Result<()> {
    if !is_cp(p, STRUCTURE_TOL)?.holds && !is_ccp(p, STRUCTURE_TOL)?.holds {
        notes.push(
            "hypothesis: P is tensor-stable positive; this is assumed, not verified".into(),
        );
    }
    Ok(())
}

/// `log2` of the upper end of `||theta_{d2} ∘ T||_diamond`.
pub fn transposition_bound(t: &MapRep, cfg: &OptConfig) -> Result<BoundReport> {
    require_channel(t)?;
    let iv = diamond_interval(&transpose_after(t), cfg)?;
    let mut constituents = BTreeMap::new();
    constituents.insert("theta_t".to_string(), Constituent::from_interval(&iv));
    Ok(BoundReport {
        formula_id: FormulaId::Transposition,
        value: iv.upper.log2(),
        unit: BoundUnit::Bits,
        constituents,
        params: BTreeMap::from([("d2".to_string(), t.dout() as f64)]),
        conservative: true,
        vacuous: false,
        notes: vec![],
    })
}

struct RightInverseParts {
    pinv_t: NormInterval,
    p_adjoint_unit: f64,
    notes: Vec<String>,
}

fn right_inverse_parts(t: &MapRep, p: &MapRep, cfg: &OptConfig) -> Result<RightInverseParts> {
    require_channel(t)?;
    if !is_hermiticity_preserving(p, STRUCTURE_TOL).holds {
        return Err(Error::pre("P is not Hermiticity preserving"));
    }
    if !is_unital(p, STRUCTURE_TOL).holds {
        return Err(Error::pre("P is not unital"));
    }
    if t.dout() != p.dout() {
        return Err(Error::dim(format!(
            "channel output {} does not match the output of P ({})",
            t.dout(),
            p.dout()
        )));
    }
    let pinv = right_inverse(p, PINV_TOL)?;
    let pinv_t = diamond_interval(&compose(&pinv, t)?, cfg)?;
    let p_adjoint_unit = op_norm(&p.adjoint_image_of_identity());
    let mut notes = vec!["right inverse: Moore-Penrose pseudo-inverse of the natural representation".into()];
    tsp_disclaimer(p, &mut notes)?;
    Ok(RightInverseParts { pinv_t, p_adjoint_unit, notes })
}

/// `log2(upper||P^-1 ∘ T|| ||P*(1)||_inf) log2(d2) / log2(lower||P*||)` for
/// a unital, surjective `P`; `+inf` (vacuous) when the denominator norm is at
/// most one.
pub fn capacity_bound_general(t: &MapRep, p: &MapRep, cfg: &OptConfig) -> Result<BoundReport> {
    let parts = right_inverse_parts(t, p, cfg)?;
    let p_adj = diamond_interval(&adjoint(p), cfg)?;
    let d2 = t.dout() as f64;
    let (value, vacuous) =
        ratio_of_logs(parts.pinv_t.upper * parts.p_adjoint_unit, d2.log2(), p_adj.lower);
    let mut constituents = BTreeMap::new();
    constituents.insert("pinv_t".to_string(), Constituent::from_interval(&parts.pinv_t));
    constituents.insert("p_adjoint_unit".to_string(), Constituent::exact(parts.p_adjoint_unit, "spectral"));
    constituents.insert("p_adjoint".to_string(), Constituent::from_interval(&p_adj));
    Ok(BoundReport {
        formula_id: FormulaId::GeneralRightInverse,
        value,
        unit: BoundUnit::Bits,
        constituents,
        params: BTreeMap::from([("d2".to_string(), d2)]),
        conservative: true,
        vacuous,
        notes: parts.notes,
    })
}

/// `log2(upper||T ∘ P^-1||) log2(d1) / log2(lower||P*|| / ||P(1)||_inf)` for a
/// trace-preserving, injective `P`.
pub fn capacity_bound_left(t: &MapRep, p: &MapRep, cfg: &OptConfig) -> Result<BoundReport> {
    require_channel(t)?;
    if !is_trace_preserving(p, STRUCTURE_TOL).holds {
        return Err(Error::pre("P is not trace preserving"));
    }
    if t.din() != p.din() {
        return Err(Error::dim(format!(
            "channel input {} does not match the input of P ({})",
            t.din(),
            p.din()
        )));
    }
    let pinv = left_inverse(p, PINV_TOL)?;
    let t_pinv = diamond_interval(&compose(t, &pinv)?, cfg)?;
    let p_adj = diamond_interval(&adjoint(p), cfg)?;
    let p_unit = op_norm(&p.image_of_identity());
    let d1 = p.din() as f64;
    let (value, vacuous) = ratio_of_logs(t_pinv.upper, d1.log2(), p_adj.lower / p_unit);
    let mut notes = vec!["left inverse: Moore-Penrose pseudo-inverse of the natural representation".into()];
    tsp_disclaimer(p, &mut notes)?;
    let mut constituents = BTreeMap::new();
    constituents.insert("t_pinv".to_string(), Constituent::from_interval(&t_pinv));
    constituents.insert("p_adjoint".to_string(), Constituent::from_interval(&p_adj));
    constituents.insert("p_unit".to_string(), Constituent::exact(p_unit, "spectral"));
    Ok(BoundReport {
        formula_id: FormulaId::LeftInverse,
        value,
        unit: BoundUnit::Bits,
        constituents,
        params: BTreeMap::from([("d1".to_string(), d1)]),
        conservative: true,
        vacuous,
        notes,
    })
}

/// Strong-converse rate: the general bound with `||(P* ⊗ id)(omega_{d2})||_1`
/// (computed exactly) in place of `||P*||_diamond`.
pub fn strong_converse_rate_ts(t: &MapRep, p: &MapRep, cfg: &OptConfig) -> Result<BoundReport> {
    let parts = right_inverse_parts(t, p, cfg)?;
    let omega_norm = trace_norm(adjoint(p).choi().data());
    let d2 = t.dout() as f64;
    let (value, vacuous) = ratio_of_logs(parts.pinv_t.upper * parts.p_adjoint_unit, d2.log2(), omega_norm);
    let mut constituents = BTreeMap::new();
    constituents.insert("pinv_t".to_string(), Constituent::from_interval(&parts.pinv_t));
    constituents.insert("p_adjoint_unit".to_string(), Constituent::exact(parts.p_adjoint_unit, "spectral"));
    constituents.insert("p_adjoint_omega".to_string(), Constituent::exact(omega_norm, "trace norm"));
    Ok(BoundReport {
        formula_id: FormulaId::StrongConverseRate,
        value,
        unit: BoundUnit::Bits,
        constituents,
        params: BTreeMap::from([("d2".to_string(), d2)]),
        conservative: true,
        vacuous,
        notes: parts.notes,
    })
}

/// Error floor `1 - ||theta ∘ T||^m / N` of a two-way scheme, at both ends of
/// the norm interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorFloor {
    /// Uses the upper norm end: a valid lower bound on the error.
    pub certified: f64,
    /// Uses the lower norm end: the floor the true norm could give at best.
    pub optimistic: f64,
    pub norm_lower: f64,
    pub norm_upper: f64,
    pub m: u32,
    pub log2_n: f64,
}

fn floor_at(norm: f64, m: u32, log2_n: f64) -> f64 {
    // 1 - norm^m / N, with the ratio formed in log space
    let exponent = m as f64 * norm.log2() - log2_n;
    (1.0 - exponent.exp2()).clamp(0.0, 1.0)
}

fn error_floor(t: &MapRep, m: u32, log2_n: f64, cfg: &OptConfig) -> Result<ErrorFloor> {
    if m < 1 {
        return Err(Error::param("m must be >= 1"));
    }
    let iv = diamond_interval(&transpose_after(t), cfg)?;
    Ok(ErrorFloor {
        certified: floor_at(iv.upper, m, log2_n),
        optimistic: floor_at(iv.lower, m, log2_n),
        norm_lower: iv.lower,
        norm_upper: iv.upper,
        m,
        log2_n,
    })
}

/// Error floor for sending an `N`-dimensional system with `m` channel uses.
pub fn two_way_error_bound(t: &MapRep, m: u32, n_dim: f64, cfg: &OptConfig) -> Result<ErrorFloor> {
    if !(n_dim >= 1.0) {
        return Err(Error::param("N must be >= 1"));
    }
    error_floor(t, m, n_dim.log2(), cfg)
}

/// Error floor at `N = 2^{rate m}`.
pub fn strong_converse_q2(t: &MapRep, rate: f64, m: u32, cfg: &OptConfig) -> Result<ErrorFloor> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::param("rate must be finite and non-negative"));
    }
    error_floor(t, m, rate * m as f64, cfg)
}

/// `1 - d2^{-2n} - [(||P*(1)||_inf upper||P^-1 ∘ T||)^m + 2] / ||(P* ⊗ id)(omega)||_1^n`,
/// clamped to `[0, 1]`.
pub fn sc_error_floor(t: &MapRep, p: &MapRep, n: u32, m: u32, cfg: &OptConfig) -> Result<f64> {
    let parts = right_inverse_parts(t, p, cfg)?;
    let omega_norm = trace_norm(adjoint(p).choi().data());
    if omega_norm <= 1.0 {
        return Err(Error::pre("||(P* ⊗ id)(omega)||_1 <= 1: the error floor is vacuous"));
    }
    let d2 = t.dout() as f64;
    let (nf, mf) = (n as f64, m as f64);
    let growth = (mf * (parts.p_adjoint_unit * parts.pinv_t.upper).ln() - nf * omega_norm.ln()).exp();
    let offset = 2.0 * (-nf * omega_norm.ln()).exp();
    let value = 1.0 - d2.powf(-2.0 * nf) - growth - offset;
    Ok(value.clamp(0.0, 1.0))
}
