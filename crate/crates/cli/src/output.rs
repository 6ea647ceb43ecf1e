//! Table rendering. Both formats are deterministic: CSV floats print
//! with 17 significant digits (round-trip exact), JSON floats use native
//! numbers in their shortest round-trip form, and JSON keys are sorted.

use std::collections::BTreeMap;

use crate::runner::{Cell, Table};

fn csv_escape(text: &str) -> String {
    if text.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

fn float_repr(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn render_csv(table: &Table) -> String {
    let mut out = String::new();
    out.push_str(&table.headers.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|cell| match cell {
                Cell::Float(Some(v)) => float_repr(*v),
                Cell::Float(None) => String::new(),
                Cell::Int(v) => v.to_string(),
                Cell::Text(s) => csv_escape(s),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn timestamp() -> u64 {
    if let Ok(s) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(v) = s.parse::<u64>() {
            return v;
        }
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn render_json(command: &str, echo: &BTreeMap<String, String>, table: &Table) -> String {
    use serde_json::{json, Map, Value};

    let config: Map<String, Value> = echo
        .iter()
        .map(|(k, v)| (k.clone(), Value::String(v.clone())))
        .collect();
    let meta = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp": timestamp(),
        "config": config,
    });

    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let mut map = Map::new();
            for (header, cell) in table.headers.iter().zip(row) {
                let value = match cell {
                    Cell::Float(Some(v)) => json!(v),
                    Cell::Float(None) => Value::Null,
                    Cell::Int(v) => json!(v),
                    Cell::Text(s) => Value::String(s.clone()),
                };
                map.insert((*header).to_string(), value);
            }
            Value::Object(map)
        })
        .collect();

    let doc = json!({ "meta": meta, "rows": rows });
    let mut text = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_table() -> Table {
        Table {
            headers: vec!["x", "label", "value", "error"],
            rows: vec![
                vec![
                    Cell::Float(Some(1.0)),
                    Cell::Text("plain".into()),
                    Cell::Int(3),
                    Cell::Text(String::new()),
                ],
                vec![
                    Cell::Float(Some(0.5)),
                    Cell::Text("with, comma".into()),
                    Cell::Float(None),
                    Cell::Text("dim 4 is \"too small\"".into()),
                ],
            ],
            n_errors: 1,
        }
    }

    #[test]
    fn csv_quotes_only_what_needs_quoting() {
        let text = render_csv(&sample_table());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "x,label,value,error");
        assert!(lines[1].starts_with("1.0000000000000000e0,plain,3,"));
        assert!(lines[1].ends_with(','));
        assert!(lines[2].contains("\"with, comma\""));
        assert!(lines[2].contains("\"dim 4 is \"\"too small\"\"\""));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn empty_floats_render_as_empty_csv_cells_and_json_null() {
        let table = sample_table();
        let csv = render_csv(&table);
        assert!(csv.lines().nth(2).unwrap().contains(",,"));

        let echo = BTreeMap::from([("seed".to_string(), "1".to_string())]);
        let doc: serde_json::Value =
            serde_json::from_str(&render_json("visibility", &echo, &table)).unwrap();
        assert!(doc["rows"][1]["value"].is_null());
        assert_eq!(doc["rows"][0]["x"], 1.0);
        assert_eq!(doc["meta"]["command"], "visibility");
        assert_eq!(doc["meta"]["config"]["seed"], "1");
    }

    #[test]
    fn json_timestamp_honours_the_reproducibility_epoch() {
        // Set for this whole test binary: other tests here do not read time.
        std::env::set_var("SOURCE_DATE_EPOCH", "1700000000");
        let table = sample_table();
        let echo = BTreeMap::new();
        let doc: serde_json::Value =
            serde_json::from_str(&render_json("fringes", &echo, &table)).unwrap();
        assert_eq!(doc["meta"]["timestamp"], 1700000000u64);
    }
}
