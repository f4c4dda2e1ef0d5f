use std::io::{self, Write};

use serde_json::Value;

use crate::args::Format;

/// Rows that the csv and plain formats print instead of the nested field
/// `key`.
#[derive(Clone, Debug, Default)]
pub struct Listing {
    pub key: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub value: Value,
    pub listing: Option<Listing>,
    /// Set when a checked invariant failed; the report is still printed.
    pub violation: Option<String>,
}

impl Outcome {
    pub fn new(value: Value) -> Self {
        Outcome { value, listing: None, violation: None }
    }

    pub fn with_listing(mut self, listing: Listing) -> Self {
        self.listing = Some(listing);
        self
    }

    pub fn violated_if(mut self, cond: bool, what: impl Into<String>) -> Self {
        if cond {
            self.violation = Some(what.into());
        }
        self
    }
}

pub fn emit(out: &mut dyn Write, outcome: &Outcome, format: Format) -> io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &outcome.value)?;
            writeln!(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            match &outcome.listing {
                Some(l) => {
                    w.write_record(&l.header)?;
                    for row in &l.rows {
                        w.write_record(row)?;
                    }
                }
                None => {
                    w.write_record(["key", "value"])?;
                    for (k, v) in flatten(&outcome.value) {
                        w.write_record([k, v])?;
                    }
                }
            }
            w.flush()
        }
        Format::Plain => {
            let mut value = outcome.value.clone();
            if let Some(l) = &outcome.listing {
                for row in &l.rows {
                    writeln!(out, "{}", row.join(" "))?;
                }
                if let Value::Object(map) = &mut value {
                    map.remove(l.key);
                }
            }
            for (k, v) in flatten(&value) {
                writeln!(out, "{k} = {v}")?;
            }
            Ok(())
        }
    }
}

/// Leaf values keyed by dotted path, arrays indexed as `key[i]`.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    fn walk(prefix: String, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) => {
                for (k, x) in map {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(p, x, out);
                }
            }
            Value::Array(items) => {
                for (i, x) in items.iter().enumerate() {
                    walk(format!("{prefix}[{i}]"), x, out);
                }
            }
            Value::String(s) => out.push((prefix, s.clone())),
            other => out.push((prefix, other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk(String::new(), value, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flatten_paths() {
        let v = json!({"a": {"b": [1, "x"]}, "c": null});
        assert_eq!(
            flatten(&v),
            vec![
                ("a.b[0]".into(), "1".into()),
                ("a.b[1]".into(), "x".into()),
                ("c".into(), "null".into())
            ]
        );
    }

    #[test]
    fn plain_prints_listing_first() {
        let o = Outcome::new(json!({"found": [1, 10], "count": 2})).with_listing(Listing {
            key: "found",
            header: vec!["n".into()],
            rows: vec![vec!["1".into()], vec!["10".into()]],
        });
        let mut buf = Vec::new();
        emit(&mut buf, &o, Format::Plain).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1\n10\ncount = 2\n");
        let mut buf = Vec::new();
        emit(&mut buf, &o, Format::Csv).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n\n1\n10\n");
    }
}
