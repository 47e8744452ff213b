//! Canonical JSON: object keys sorted, floats written with 17 significant
//! digits, integers verbatim, two-space indentation.

use serde::Serialize;
use serde_json::Value;

pub fn to_canonical<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn indent(level: usize, out: &mut String) {
    out.push('\n');
    out.push_str(&"  ".repeat(level));
}

fn write_number(n: &serde_json::Number, out: &mut String) {
    if n.is_i64() || n.is_u64() {
        out.push_str(&n.to_string());
    } else {
        // Signed zero is folded so equal values print identically.
        let f = n.as_f64().expect("finite float") + 0.0;
        out.push_str(&format!("{f:.16e}"));
    }
}

fn write_value(v: &Value, level: usize, out: &mut String) {
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => write_number(n, out),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            // Numeric arrays stay on one line.
            if items.iter().all(|x| x.is_number()) {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(x, level, out);
                }
                out.push(']');
                return;
            }
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(level + 1, out);
                write_value(x, level + 1, out);
            }
            indent(level, out);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(level + 1, out);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*k], level + 1, out);
            }
            indent(level, out);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use noisylp::LpDocument;

    #[test]
    fn floats_have_17_digits_and_keys_sort() {
        let v = serde_json::json!({"b": 0.1, "a": [1, -2.5], "c": {"z": null, "y": true}});
        let s = to_canonical(&v).unwrap();
        assert!(s.contains("\"a\": [1, -2.5000000000000000e0]"));
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.find("\"y\"").unwrap() < s.find("\"z\"").unwrap());
    }

    #[test]
    fn lp_round_trip_is_byte_identical() {
        let text = r#"{"p": [1, 0], "M": [[-1.1, 1], [1, -1], [1, 0], [-1, 0]], "c": [0, 0, -1, -1],
                       "box": {"lower": [-2, -2], "upper": [2, 2]}, "labels": ["x1", "x2"]}"#;
        let doc: LpDocument = serde_json::from_str(text).unwrap();
        let once = to_canonical(&doc).unwrap();
        let doc2: LpDocument = serde_json::from_str(&once).unwrap();
        assert_eq!(doc, doc2);
        assert_eq!(once, to_canonical(&doc2).unwrap());
        let params = doc2.to_params().unwrap();
        assert_eq!(
            to_canonical(&LpDocument { labels: doc.labels.clone(), ..LpDocument::from_params(&params) }).unwrap(),
            once
        );
    }
}
