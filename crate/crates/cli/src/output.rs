//! Byte-stable rendering: every float is written with 17 significant digits.

use serde_json::Value;

pub fn num(x: f64) -> String {
    // -0 prints as 0 so that sign-of-zero noise never changes the bytes
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

fn write_json(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if f.is_finite() {
                    out.push_str(&num(f));
                } else {
                    out.push_str("null");
                }
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // short numeric rows stay on one line
            if items.iter().all(|x| x.is_number() || x.is_null()) && items.len() <= 8 {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_json(x, depth, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_json(x, depth + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_json(x, depth + 1, out);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
    }
}

pub fn json(v: &Value) -> String {
    let mut s = String::new();
    write_json(v, 0, &mut s);
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Self::Num(v) => num(*v),
            Self::Int(i) => i.to_string(),
            Self::Text(t) => t.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Self::Num(v) => serde_json::json!(v),
            Self::Int(i) => serde_json::json!(i),
            Self::Text(t) => Value::String(t.clone()),
        }
    }
}

/// Table with `# key = value` preamble lines, rendered as CSV or JSON.
#[derive(Debug, Default)]
pub struct Table {
    notes: Vec<(String, f64)>,
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { notes: Vec::new(), header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn note(&mut self, key: &str, value: f64) {
        self.notes.push((key.to_string(), value));
    }

    pub fn row(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| Cell::Num(*v)).collect());
    }

    pub fn row_cells(&mut self, cells: Vec<Cell>) {
        self.rows.push(cells);
    }

    pub fn csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.notes {
            s.push_str(&format!("# {k} = {}\n", num(*v)));
        }
        s.push_str(&self.header.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> Value {
        let mut notes = serde_json::Map::new();
        for (k, v) in &self.notes {
            notes.insert(k.clone(), serde_json::json!(v));
        }
        let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
        serde_json::json!({"summary": notes, "columns": self.header, "rows": rows})
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.0), "1.0000000000000000e0");
        let s = json(&json!({"b": 1, "a": [0.5, 2.0], "c": f64::NAN}));
        assert_eq!(s, "{\n  \"a\": [5.0000000000000000e-1, 2.0000000000000000e0],\n  \"b\": 1,\n  \"c\": null\n}\n");
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"][0], json!(0.5));
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(["t", "x"]);
        t.note("residual", 0.25);
        t.row(&[0.0, 1.5]);
        assert_eq!(t.to_json()["summary"]["residual"], json!(0.25));
        assert_eq!(t.csv(), "# residual = 2.5000000000000000e-1\nt,x\n0.0000000000000000e0,1.5000000000000000e0\n");
    }
}
