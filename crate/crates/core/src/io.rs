//! JSON wire formats.
//!
//! Complex numbers are `[re, im]` pairs and every matrix is flattened
//! row-major:
//!
//! * operator: `{"factors": [d1, ..., dk], "data": [[re, im], ...]}`
//! * matrix: `{"rows": r, "cols": c, "data": [[re, im], ...]}`
//! * ket: `{"dim": n, "amplitudes": [[re, im], ...], "factors": [...]?}`
//! * map: `{"din": d1, "dout": d2, "choi": <operator>}` or
//!   `{"din": d1, "dout": d2, "kraus": [<matrix>, ...]}`

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::qmap::MapRep;
use crate::tensor::{CMatrix, CVector, FactoredOperator, Ket, C64};

type Pair = [f64; 2];

fn to_pairs<'a>(it: impl Iterator<Item = &'a C64>) -> Vec<Pair> {
    it.map(|z| [z.re, z.im]).collect()
}

fn rowmajor_pairs(m: &CMatrix) -> Vec<Pair> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for col in 0..m.ncols() {
            let z = m[(r, col)];
            out.push([z.re, z.im]);
        }
    }
    out
}

fn matrix_from_pairs(rows: usize, cols: usize, data: &[Pair]) -> Result<CMatrix> {
    if data.len() != rows * cols {
        return Err(Error::Schema(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            data.len()
        )));
    }
    if data.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Schema("non-finite matrix entry".into()));
    }
    Ok(CMatrix::from_fn(rows, cols, |r, col| {
        let [re, im] = data[r * cols + col];
        C64::new(re, im)
    }))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorWire {
    factors: Vec<usize>,
    data: Vec<Pair>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixWire {
    rows: usize,
    cols: usize,
    data: Vec<Pair>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KetWire {
    dim: usize,
    amplitudes: Vec<Pair>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    factors: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapWire {
    din: usize,
    dout: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    choi: Option<OperatorWire>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    kraus: Option<Vec<MatrixWire>>,
}

impl From<&FactoredOperator> for OperatorWire {
    fn from(op: &FactoredOperator) -> Self {
        Self { factors: op.factors().to_vec(), data: rowmajor_pairs(op.data()) }
    }
}

impl TryFrom<OperatorWire> for FactoredOperator {
    type Error = Error;

    fn try_from(w: OperatorWire) -> Result<Self> {
        if w.factors.is_empty() || w.factors.contains(&0) {
            return Err(Error::Schema(format!("invalid factor list {:?}", w.factors)));
        }
        let side = w
            .factors
            .iter()
            .try_fold(1usize, |acc, &f| acc.checked_mul(f))
            .ok_or_else(|| Error::Schema("factor product overflows".into()))?;
        let data = matrix_from_pairs(side, side, &w.data)?;
        FactoredOperator::new(w.factors, data).map_err(|e| Error::Schema(e.to_string()))
    }
}

impl Serialize for FactoredOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorWire::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FactoredOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        FactoredOperator::try_from(OperatorWire::deserialize(d)?).map_err(D::Error::custom)
    }
}

impl Serialize for Ket {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KetWire {
            dim: self.dim(),
            amplitudes: to_pairs(self.amplitudes().iter()),
            factors: self.factors().map(<[usize]>::to_vec),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ket {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = KetWire::deserialize(d)?;
        if w.amplitudes.len() != w.dim {
            return Err(D::Error::custom("ket length does not match dim"));
        }
        let v = CVector::from_iterator(w.dim, w.amplitudes.iter().map(|[re, im]| C64::new(*re, *im)));
        match w.factors {
            Some(f) => Ket::with_factors(v, f).map_err(D::Error::custom),
            None => Ok(Ket::new(v)),
        }
    }
}

impl Serialize for MapRep {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MapWire { din: self.din(), dout: self.dout(), choi: Some(self.choi().into()), kraus: None }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MapRep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        map_from_wire(MapWire::deserialize(d)?).map_err(D::Error::custom)
    }
}

fn map_from_wire(w: MapWire) -> Result<MapRep> {
    let map = match (w.choi, w.kraus) {
        (Some(choi), None) => MapRep::from_choi(FactoredOperator::try_from(choi)?)
            .map_err(|e| Error::Schema(e.to_string()))?,
        (None, Some(kraus)) => {
            let mats = kraus
                .into_iter()
                .map(|m| matrix_from_pairs(m.rows, m.cols, &m.data))
                .collect::<Result<Vec<_>>>()?;
            MapRep::from_kraus(&mats).map_err(|e| Error::Schema(e.to_string()))?
        }
        _ => return Err(Error::Schema("a map needs exactly one of \"choi\" or \"kraus\"".into())),
    };
    if (map.din(), map.dout()) != (w.din, w.dout) {
        return Err(Error::Schema(format!(
            "declared dimensions {}->{} disagree with the data ({}->{})",
            w.din,
            w.dout,
            map.din(),
            map.dout()
        )));
    }
    Ok(map)
}

/// Serializes a plain matrix in the `{"rows", "cols", "data"}` format.
pub fn matrix_to_value(m: &CMatrix) -> serde_json::Value {
    serde_json::to_value(MatrixWire { rows: m.nrows(), cols: m.ncols(), data: rowmajor_pairs(m) })
        .expect("plain data serializes")
}

pub fn matrix_from_value(v: &serde_json::Value) -> Result<CMatrix> {
    let w: MatrixWire = serde_json::from_value(v.clone()).map_err(|e| Error::Schema(e.to_string()))?;
    matrix_from_pairs(w.rows, w.cols, &w.data)
}

/// Serde adapter for fields holding a plain matrix.
pub mod matrix_serde {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixWire { rows: m.nrows(), cols: m.ncols(), data: rowmajor_pairs(m) }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let w = MatrixWire::deserialize(d)?;
        matrix_from_pairs(w.rows, w.cols, &w.data).map_err(D::Error::custom)
    }
}

pub fn operator_from_json(text: &str) -> Result<FactoredOperator> {
    serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
}

pub fn map_from_json(text: &str) -> Result<MapRep> {
    serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmap::{transpose_map, werner_channel};
    use crate::tensor::{gaussian_matrix, rng_from_seed};

    #[test]
    fn operator_round_trip() {
        let mut rng = rng_from_seed(1);
        let op = FactoredOperator::new(vec![2, 3], gaussian_matrix(6, 6, &mut rng)).unwrap();
        let text = serde_json::to_string(&op).unwrap();
        assert_eq!(operator_from_json(&text).unwrap(), op);
    }

    #[test]
    fn operator_layout_is_row_major() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(1.0, 2.0);
        let op = FactoredOperator::from_matrix(m).unwrap();
        let v = serde_json::to_value(&op).unwrap();
        assert_eq!(v["data"][1], serde_json::json!([1.0, 2.0]));
    }

    #[test]
    fn operator_size_mismatch_is_rejected() {
        let text = r#"{"factors":[2],"data":[[1,0],[0,0],[0,0]]}"#;
        assert!(matches!(operator_from_json(text), Err(Error::Schema(_))));
        let text = r#"{"factors":[],"data":[]}"#;
        assert!(operator_from_json(text).is_err());
    }

    #[test]
    fn map_round_trip_and_kraus_input() {
        let w = werner_channel(-0.3, 3).unwrap();
        let text = serde_json::to_string(&w).unwrap();
        assert_eq!(map_from_json(&text).unwrap(), w);

        let text = r#"{"din":2,"dout":2,"kraus":[{"rows":2,"cols":2,"data":[[0,0],[1,0],[1,0],[0,0]]}]}"#;
        let x = map_from_json(text).unwrap();
        let t = transpose_map(2);
        assert_eq!(x.din(), t.din());
        let bad = r#"{"din":3,"dout":2,"kraus":[{"rows":2,"cols":2,"data":[[1,0],[0,0],[0,0],[1,0]]}]}"#;
        assert!(map_from_json(bad).is_err());
    }

    #[test]
    fn ket_round_trip() {
        let k = Ket::with_factors(CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]), vec![2])
            .unwrap();
        let text = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<Ket>(&text).unwrap(), k);
    }
}
