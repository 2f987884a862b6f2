//! Deterministic serialization of reports: sorted keys, `{:.16e}` floats,
//! `"inf"`/`"nan"` strings for non-finite values.

use std::fmt::Write as _;

use serde_json::{Map, Value};

use super::{BoundReport, DecayCurve};

/// Non-finite floats become strings so the output stays valid JSON.
pub fn float_value(x: f64) -> Value {
    if x.is_finite() {
        serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Pretty JSON with sorted keys and fixed float formatting.
pub fn to_canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.push_str(&"  ".repeat(d));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, depth + 1);
                let _ = write!(out, "{}: ", Value::String((*k).clone()));
                write_value(out, &map[k.as_str()], depth + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

/// Reports sorted by name as one JSON array.
pub fn reports_json(reports: &[BoundReport]) -> String {
    let mut sorted: Vec<&BoundReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    to_canonical_json(&Value::Array(sorted.into_iter().map(BoundReport::to_json).collect()))
}

pub fn summary_csv(reports: &[BoundReport]) -> String {
    let mut sorted: Vec<&BoundReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let mut out = String::from("name,lhs,rhs,slack,pass\n");
    for r in sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.name,
            format_float(r.lhs),
            format_float(r.rhs),
            format_float(r.slack),
            r.pass
        );
    }
    out
}

pub fn decay_csv(curve: &DecayCurve) -> String {
    let mut out = String::from("n,H_n,bound_n\n");
    for e in &curve.entries {
        let _ = writeln!(out, "{},{},{}", e.n, format_float(e.entropy), format_float(e.bound));
    }
    out
}

pub(crate) fn object(pairs: Vec<(&str, Value)>) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_layout() {
        let v = object(vec![
            ("b", float_value(0.1)),
            ("a", Value::from(3)),
            ("c", Value::Array(vec![float_value(f64::INFINITY), Value::Bool(true)])),
        ]);
        let s = to_canonical_json(&v);
        assert_eq!(
            s,
            "{\n  \"a\": 3,\n  \"b\": 1.0000000000000001e-1,\n  \"c\": [\n    \"inf\",\n    true\n  ]\n}\n"
        );
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }
}
