//! Machine output of a subcommand in the three `--format` renderings.

use clap::ValueEnum;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Clone)]
pub struct Output {
    pub json: Value,
    pub text: String,
    /// Dedicated CSV; when absent the top-level scalar fields of `json` are
    /// written as `key,value` rows.
    pub csv: Option<String>,
}

impl Output {
    pub fn new(json: Value, text: impl Into<String>) -> Self {
        Self {
            json,
            text: text.into(),
            csv: None,
        }
    }

    pub fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }

    pub fn render(&self, format: Format) -> String {
        let mut s = match format {
            Format::Json => {
                serde_json::to_string_pretty(&self.json).expect("json value serializes")
            }
            Format::Text => self.text.clone(),
            Format::Csv => self.csv.clone().unwrap_or_else(|| flat_csv(&self.json)),
        };
        if !s.ends_with('\n') {
            s.push('\n');
        }
        s
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn flat_csv(v: &Value) -> String {
    let mut out = String::from("key,value\n");
    if let Value::Object(m) = v {
        for (k, v) in m {
            let cell = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                Value::Null => String::new(),
                _ => continue,
            };
            out.push_str(&format!("{},{}\n", csv_cell(k), csv_cell(&cell)));
        }
    }
    out
}
