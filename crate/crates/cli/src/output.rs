use std::io::Write;

use serde_json::{Map, Value};

use crate::Format;

/// A report is either a JSON document or a table.
pub enum Report {
    Doc(Value),
    Table { header: Vec<&'static str>, rows: Vec<Vec<Value>> },
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Flattens nested objects and arrays into `(dotted.path, value)` pairs.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&join(k), x, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| flatten(&join(&i.to_string()), x, out)),
        _ => out.push((prefix.to_string(), scalar_text(v))),
    }
}

pub fn render(report: &Report, format: Format) -> Result<String, String> {
    match (report, format) {
        (Report::Doc(v), Format::Json) => Ok(format!("{}\n", serde_json::to_string_pretty(v).map_err(|e| e.to_string())?)),
        (Report::Table { header, rows }, Format::Json) => {
            let objs: Vec<Value> = rows
                .iter()
                .map(|r| Value::Object(header.iter().map(|h| h.to_string()).zip(r.iter().cloned()).collect::<Map<_, _>>()))
                .collect();
            Ok(format!("{}\n", serde_json::to_string_pretty(&objs).map_err(|e| e.to_string())?))
        }
        (Report::Doc(v), Format::Csv) => {
            let mut pairs = Vec::new();
            flatten("", v, &mut pairs);
            let rows = pairs.into_iter().map(|(k, v)| vec![k, v]).collect::<Vec<_>>();
            write_csv(&["key", "value"], &rows)
        }
        (Report::Table { header, rows }, Format::Csv) => {
            let rows = rows.iter().map(|r| r.iter().map(scalar_text).collect()).collect::<Vec<_>>();
            write_csv(header, &rows)
        }
    }
}

fn write_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| e.to_string())?;
    for r in rows {
        w.write_record(r).map_err(|e| e.to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

pub fn print(text: &str) -> Result<(), String> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| e.to_string())
}

/// Smallest `converged_fraction` anywhere in the document.
pub fn min_converged_fraction(v: &Value) -> Option<f64> {
    match v {
        Value::Object(m) => m
            .iter()
            .filter_map(|(k, x)| if k == "converged_fraction" { x.as_f64() } else { min_converged_fraction(x) })
            .reduce(f64::min),
        Value::Array(a) => a.iter().filter_map(min_converged_fraction).reduce(f64::min),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_flattening() {
        let r = Report::Doc(json!({"a": 1.5, "b": {"c": [1, 2]}, "s": "x"}));
        let text = render(&r, Format::Csv).unwrap();
        assert_eq!(text, "key,value\na,1.5\nb.c.0,1\nb.c.1,2\ns,x\n");
    }

    #[test]
    fn table_as_json() {
        let r = Report::Table { header: vec!["level", "p"], rows: vec![vec![json!(0), json!(0.5)]] };
        let v: Value = serde_json::from_str(&render(&r, Format::Json).unwrap()).unwrap();
        assert_eq!(v, json!([{"level": 0, "p": 0.5}]));
    }

    #[test]
    fn converged_fraction_is_found_when_nested() {
        let v = json!({"x": {"converged_fraction": 0.75}, "y": [{"converged_fraction": 0.25}]});
        assert_eq!(min_converged_fraction(&v), Some(0.25));
        assert_eq!(min_converged_fraction(&json!({"value": 1})), None);
    }
}
