//! JSON envelope and CSV writers. Floats in CSV carry 17 significant digits.

use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA: &str = "lrl/1";

/// `{"schema": "lrl/1", "command": ..., ...body}` as pretty JSON with a trailing newline.
pub fn json_document<T: Serialize>(command: &str, body: &T) -> String {
    let mut doc = json!({ "schema": SCHEMA, "command": command });
    match serde_json::to_value(body).expect("serializable body") {
        Value::Object(map) => doc.as_object_mut().expect("object").extend(map),
        other => {
            doc["result"] = other;
        }
    }
    let mut out = serde_json::to_string_pretty(&doc).expect("json");
    out.push('\n');
    out
}

pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

/// RFC-4180 table from a header and string rows.
pub fn csv_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, -2.0 / 9.0, 1e-300, 123456.789, std::f64::consts::PI] {
            let s = float(v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn envelope_carries_schema() {
        #[derive(Serialize)]
        struct B {
            x: u32,
        }
        let doc: Value = serde_json::from_str(&json_document("t", &B { x: 3 })).unwrap();
        assert_eq!(doc["schema"], "lrl/1");
        assert_eq!(doc["x"], 3);
    }

    #[test]
    fn csv_quotes_when_needed() {
        let t = csv_table(&["a".into(), "b".into()], &[vec!["x,y".into(), "1".into()]]);
        assert_eq!(t, "a,b\r\n\"x,y\",1\r\n");
    }
}
