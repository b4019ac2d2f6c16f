//! Record emission: JSON lines, or a generic CSV projection of the same
//! records. serde_json objects keep their keys sorted, so both formats are
//! byte-stable across runs with the same config and seed.

use std::io::Write;

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

/// Print one line, ending the process quietly if the reader has gone away
/// (stdout piped into a consumer that stopped, e.g. `head`).
pub fn out_line(line: &str) {
    let mut stdout = std::io::stdout().lock();
    if writeln!(stdout, "{line}").is_err() {
        std::process::exit(0);
    }
}

pub struct Emitter {
    format: Format,
    last_header: Vec<String>,
}

impl Emitter {
    pub fn new(format: Format) -> Self {
        Emitter { format, last_header: Vec::new() }
    }

    pub fn emit(&mut self, record: Value) {
        match self.format {
            Format::Jsonl => out_line(&record.to_string()),
            Format::Csv => self.emit_csv(record),
        }
    }

    fn emit_csv(&mut self, record: Value) {
        let obj = match record {
            Value::Object(m) => m,
            other => {
                out_line(&csv_cell(&other.to_string()));
                return;
            }
        };
        let header: Vec<String> = obj.keys().cloned().collect();
        if header != self.last_header {
            out_line(&header.iter().map(|h| csv_cell(h)).collect::<Vec<_>>().join(","));
            self.last_header = header;
        }
        let row: Vec<String> = obj
            .values()
            .map(|v| match v {
                Value::Null => String::new(),
                Value::String(s) => csv_cell(s),
                Value::Bool(b) => b.to_string(),
                Value::Number(n) => n.to_string(),
                nested => csv_cell(&nested.to_string()),
            })
            .collect();
        out_line(&row.join(","));
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
