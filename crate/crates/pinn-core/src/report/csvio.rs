//! The one CSV dialect every emitted artifact uses
//!
//! A file opens with `# key: value` metadata lines, continues with a single
//! header row, then data rows. Fields never contain commas or quotes, so no
//! quoting rules apply. Floats are written with Rust's shortest round-trip
//! formatting, which makes parsing an emitted file reproduce the emitting
//! values bit for bit.

use super::ReportError;

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct CsvDoc {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn new(header: &[&str]) -> CsvDoc {
        CsvDoc {
            meta: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn add_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn meta_value(&self, key: &str) -> Result<&str, ReportError> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| ReportError::Parse {
                what: "csv metadata".to_string(),
                detail: format!("missing `# {key}:` line"),
            })
    }

    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.meta {
            out.push_str(&format!("# {key}: {value}\n"));
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<CsvDoc, ReportError> {
        let mut doc = CsvDoc::default();
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.peek() {
            let Some(rest) = line.strip_prefix('#') else {
                break;
            };
            let (key, value) = rest.split_once(':').ok_or_else(|| ReportError::Parse {
                what: "csv metadata".to_string(),
                detail: format!("metadata line without `:` separator: {line}"),
            })?;
            doc.meta
                .push((key.trim().to_string(), value.trim().to_string()));
            lines.next();
        }
        let header = lines.next().ok_or_else(|| ReportError::Parse {
            what: "csv".to_string(),
            detail: "missing header row".to_string(),
        })?;
        doc.header = header.split(',').map(|s| s.to_string()).collect();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
            if fields.len() != doc.header.len() {
                return Err(ReportError::Parse {
                    what: "csv".to_string(),
                    detail: format!(
                        "row has {} fields, header has {}: {line}",
                        fields.len(),
                        doc.header.len()
                    ),
                });
            }
            doc.rows.push(fields);
        }
        Ok(doc)
    }

    pub fn expect_header(&self, expected: &[&str]) -> Result<(), ReportError> {
        if self.header != expected {
            return Err(ReportError::Parse {
                what: "csv header".to_string(),
                detail: format!("expected {expected:?}, got {:?}", self.header),
            });
        }
        Ok(())
    }
}

pub(crate) fn parse_f64(field: &str, what: &str) -> Result<f64, ReportError> {
    field.parse::<f64>().map_err(|_| ReportError::Parse {
        what: what.to_string(),
        detail: format!("not a number: `{field}`"),
    })
}

pub(crate) fn parse_usize(field: &str, what: &str) -> Result<usize, ReportError> {
    field.parse::<usize>().map_err(|_| ReportError::Parse {
        what: what.to_string(),
        detail: format!("not a count: `{field}`"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emit_parse_round_trip() {
        let mut doc = CsvDoc::new(&["x", "u"]);
        doc.add_meta("kind", "demo");
        doc.add_meta("dx", 0.1_f64);
        doc.rows.push(vec!["0.1".into(), format!("{}", 0.3175228803470284_f64)]);
        doc.rows.push(vec!["0.2".into(), format!("{}", -1e-17_f64)]);
        let back = CsvDoc::parse(&doc.emit()).unwrap();
        assert_eq!(doc, back);
        let v: f64 = back.rows[0][1].parse().unwrap();
        assert_eq!(v.to_bits(), 0.3175228803470284_f64.to_bits());
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(CsvDoc::parse("").is_err());
        assert!(CsvDoc::parse("# broken meta line\nx,u\n").is_err());
        let ragged = "x,u\n1,2,3\n";
        assert!(CsvDoc::parse(ragged).is_err());
        assert!(parse_f64("abc", "demo").is_err());
        assert!(parse_usize("-1", "demo").is_err());
    }
}
