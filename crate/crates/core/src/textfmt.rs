//! Line-oriented `key = value` documents with bracketed sections.
//!
//! ```text
//! # qadv-checkpoint v1
//! name = classifier-3
//! [params]
//! 1.0000000000000000e0
//! [end]
//! ```
//!
//! Floats are written with 17 significant digits so they parse back bit-exactly.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_f64(field: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::parse(field, format!("`{s}`: {e}")))
}

pub fn parse_usize(field: &str, s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|e| Error::parse(field, format!("`{s}`: {e}")))
}

pub fn parse_u64(field: &str, s: &str) -> Result<u64> {
    s.trim()
        .parse::<u64>()
        .map_err(|e| Error::parse(field, format!("`{s}`: {e}")))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    pub name: String,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub magic: String,
    pub header: Vec<(String, String)>,
    pub sections: Vec<Section>,
}

impl Document {
    pub fn new(magic: impl Into<String>) -> Self {
        Self {
            magic: magic.into(),
            ..Default::default()
        }
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.header.push((key.into(), value.to_string()));
    }

    pub fn section(&mut self, name: impl Into<String>, lines: Vec<String>) {
        self.sections.push(Section {
            name: name.into(),
            lines,
        });
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::parse(key, "missing required field"))
    }

    pub fn find_section(&self, name: &str) -> Result<&Section> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::parse(name, "missing section"))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.magic);
        for (k, v) in &self.header {
            let _ = writeln!(out, "{k} = {v}");
        }
        for s in &self.sections {
            let _ = writeln!(out, "[{}]", s.name);
            for l in &s.lines {
                let _ = writeln!(out, "{l}");
            }
        }
        let _ = writeln!(out, "[end]");
        out
    }

    /// Parses a rendered document; a missing `[end]` marker means truncation.
    pub fn parse(text: &str, expected_magic: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::parse("magic", "empty file"))?;
        let magic = first
            .strip_prefix("# ")
            .ok_or_else(|| Error::parse("magic", format!("bad first line `{first}`")))?;
        if magic != expected_magic {
            return Err(Error::parse(
                "magic",
                format!("expected `{expected_magic}`, found `{magic}`"),
            ));
        }
        let mut doc = Document::new(magic);
        let mut current: Option<Section> = None;
        let mut ended = false;
        for line in lines {
            if ended {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::parse("end", "content after [end] marker"));
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if let Some(s) = current.take() {
                    doc.sections.push(s);
                }
                if name == "end" {
                    ended = true;
                } else {
                    current = Some(Section {
                        name: name.to_string(),
                        lines: Vec::new(),
                    });
                }
                continue;
            }
            match current.as_mut() {
                Some(s) => s.lines.push(line.to_string()),
                None => {
                    if line.trim().is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (k, v) = line.split_once(" = ").ok_or_else(|| {
                        Error::parse("header", format!("malformed line `{line}`"))
                    })?;
                    doc.header
                        .push((k.trim().to_string(), v.trim().to_string()));
                }
            }
        }
        if !ended {
            return Err(Error::parse(
                "end",
                "missing [end] marker (truncated file?)",
            ));
        }
        Ok(doc)
    }
}

/// Writes `contents` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("output");
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_bit_exactly() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            std::f64::consts::TAU,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(parse_f64("x", &fmt_f64(x)).unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn document_round_trip_and_truncation() {
        let mut d = Document::new("test v1");
        d.set("a", 3);
        d.set("name", "hello world");
        d.section("data", vec!["1 2".into(), "3 4".into()]);
        let text = d.render();
        let back = Document::parse(&text, "test v1").unwrap();
        assert_eq!(back, d);
        assert_eq!(back.require("a").unwrap(), "3");

        let cut = &text[..text.len() - 7];
        assert!(matches!(
            Document::parse(cut, "test v1"),
            Err(Error::Parse { ref field, .. }) if field == "end"
        ));
        assert!(matches!(
            Document::parse(&text, "other v1"),
            Err(Error::Parse { ref field, .. }) if field == "magic"
        ));
    }
}
