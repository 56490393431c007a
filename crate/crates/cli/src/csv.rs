//! Versioned CSV: a `# qadv-csv v1 key=value ...` comment line, a header
//! row, then data rows.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const CSV_VERSION_TAG: &str = "qadv-csv v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(meta: &[(&str, String)], header: &[&str]) -> Self {
        Self {
            meta: meta
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn render(&self) -> String {
        let mut out = format!("# {CSV_VERSION_TAG}");
        for (k, v) in &self.meta {
            out.push_str(&format!(" {k}={v}"));
        }
        out.push('\n');
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().context("empty csv")?;
        let Some(rest) = first
            .strip_prefix("# ")
            .and_then(|l| l.strip_prefix(CSV_VERSION_TAG))
        else {
            bail!("missing `# {CSV_VERSION_TAG}` version line");
        };
        let mut meta = BTreeMap::new();
        for pair in rest.split_whitespace() {
            let (k, v) = pair
                .split_once('=')
                .with_context(|| format!("bad csv metadata `{pair}`"))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let header: Vec<String> = lines
            .next()
            .context("csv has no header row")?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                bail!(
                    "csv row {} has {} fields, expected {}",
                    i + 1,
                    row.len(),
                    header.len()
                );
            }
            rows.push(row);
        }
        Ok(Self { meta, header, rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        qadv::textfmt::write_atomic(path, &self.render())
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut t = Table::new(
            &[("seed", "7".into()), ("config_hash", "abc".into())],
            &["epsilon", "risk"],
        );
        t.push(vec!["0.1".into(), "0.25".into()]);
        let text = t.render();
        assert!(text.starts_with("# qadv-csv v1 config_hash=abc seed=7\nepsilon,risk\n"));
        assert_eq!(Table::parse(&text).unwrap(), t);
    }

    #[test]
    fn rejects_malformed() {
        assert!(Table::parse("epsilon,risk\n0.1,0.2\n").is_err());
        assert!(Table::parse("# qadv-csv v1\na,b\n1\n").is_err());
        assert!(Table::parse("").is_err());
    }
}
