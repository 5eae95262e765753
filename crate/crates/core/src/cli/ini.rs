//! Flat INI text: `[section]` headers, `key = value` lines, `#`/`;` comments.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// 1-based source line; 0 for entries added programmatically.
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Replaces the value of `key`, appending it when absent.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value,
            None => self.entries.push(Entry { key: key.to_string(), value, line: 0 }),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ini {
    pub sections: Vec<Section>,
}

fn config_error(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut ini = Ini::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_error(line, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(config_error(line, "empty section name"));
                }
                if ini.section(name).is_some() {
                    return Err(config_error(line, format!("duplicate section [{name}]")));
                }
                ini.sections.push(Section { name: name.to_string(), line, entries: Vec::new() });
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| config_error(line, format!("expected `key = value`, found `{s}`")))?;
            let (key, value) = (key.trim(), strip_comment(value).trim());
            if key.is_empty() {
                return Err(config_error(line, "empty key"));
            }
            let section = ini
                .sections
                .last_mut()
                .ok_or_else(|| config_error(line, format!("key `{key}` appears before any section")))?;
            if section.get(key).is_some() {
                return Err(config_error(line, format!("duplicate key `{key}` in [{}]", section.name)));
            }
            section.entries.push(Entry { key: key.to_string(), value: value.to_string(), line });
        }
        Ok(ini)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn section_mut(&mut self, name: &str) -> &mut Section {
        if let Some(i) = self.sections.iter().position(|s| s.name == name) {
            return &mut self.sections[i];
        }
        self.sections.push(Section { name: name.to_string(), line: 0, entries: Vec::new() });
        self.sections.last_mut().unwrap()
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.section(section)?.get(key)
    }
}

/// Trailing ` # ...` or ` ; ...` comments after a value.
fn strip_comment(v: &str) -> &str {
    let cut = [" #", "\t#", " ;", "\t;"]
        .iter()
        .filter_map(|m| v.find(m))
        .min()
        .unwrap_or(v.len());
    &v[..cut]
}

impl fmt::Display for Ini {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "[{}]", s.name)?;
            for e in &s.entries {
                writeln!(f, "{} = {}", e.key, e.value)?;
            }
        }
        Ok(())
    }
}
