//! Trajectory files: `#`-prefixed header comments, one row of column names,
//! then one row per sample with every value at 17 significant digits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// A table of named columns sharing a `t` column, plus the header comments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub comments: Vec<String>,
    pub t: Vec<f64>,
    pub columns: Vec<Column>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    /// Comment lines joined back into one document.
    pub fn comment_text(&self) -> String {
        self.comments.iter().map(|c| format!("{c}\n")).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            if c.is_empty() {
                s.push_str("#\n");
            } else {
                let _ = writeln!(s, "# {c}");
            }
        }
        s.push('t');
        for c in &self.columns {
            s.push(',');
            s.push_str(&c.name);
        }
        s.push('\n');
        for (i, t) in self.t.iter().enumerate() {
            push_float(&mut s, *t);
            for c in &self.columns {
                s.push(',');
                push_float(&mut s, c.values[i]);
            }
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tables serialize");
        s.push('\n');
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut comments = Vec::new();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((_, line)) = lines.peek() {
            let Some(c) = line.strip_prefix('#') else { break };
            comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
            lines.next();
        }
        let (_, header) = lines.next().ok_or_else(|| CliError::Parse("file has no header row".into()))?;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        if names.first() != Some(&"t") {
            return Err(CliError::Parse(format!("first column must be `t`, got `{header}`")));
        }
        let mut t = Vec::new();
        let mut columns: Vec<Column> =
            names[1..].iter().map(|n| Column { name: n.to_string(), values: Vec::new() }).collect();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() {
                return Err(CliError::Parse(format!(
                    "line {}: {} fields, expected {}",
                    i + 1,
                    fields.len(),
                    names.len()
                )));
            }
            let mut values = fields.iter().map(|f| {
                f.trim().parse::<f64>().map_err(|e| CliError::Parse(format!("line {}: `{f}`: {e}", i + 1)))
            });
            t.push(values.next().unwrap()?);
            for (c, v) in columns.iter_mut().zip(values) {
                c.values.push(v?);
            }
        }
        Ok(Table { comments, t, columns })
    }

    /// Reads either format; JSON is recognized by a leading `{`.
    pub fn from_text(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            let table: Table = serde_json::from_str(text).map_err(|e| CliError::Parse(format!("invalid JSON: {e}")))?;
            if table.columns.iter().any(|c| c.values.len() != table.t.len()) {
                return Err(CliError::Parse("column lengths differ from the time grid".into()));
            }
            Ok(table)
        } else {
            Self::from_csv(text)
        }
    }
}

fn push_float(s: &mut String, v: f64) {
    let _ = write!(s, "{v:.16e}");
}
