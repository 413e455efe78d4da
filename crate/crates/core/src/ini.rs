//! Line-based `key = value` files with `[section]` headers.
//!
//! `#` starts a comment line. Duplicate sections and duplicate keys within
//! a section are errors that name both lines.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct ConfigError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ConfigError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> Self {
        ConfigError { line, col, msg: msg.into() }
    }
}

impl From<crate::poly::ParseError> for ConfigError {
    fn from(e: crate::poly::ParseError) -> Self {
        ConfigError { line: e.line, col: e.col, msg: e.msg }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    /// 1-based column where the value starts.
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Fails on the first key not in `allowed` (entries whose key starts
    /// with one of `prefixes` are also accepted).
    pub fn check_keys(&self, allowed: &[&str], prefixes: &[&str]) -> Result<(), ConfigError> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) && !prefixes.iter().any(|p| e.key.starts_with(p)) {
                return Err(ConfigError::new(
                    e.line,
                    1,
                    format!("unknown key '{}' in section [{}]", e.key, self.name),
                ));
            }
        }
        Ok(())
    }

    pub fn require(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.get(key)
            .ok_or_else(|| ConfigError::new(self.line, 1, format!("missing key '{key}' in section [{}]", self.name)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

/// Parses a document; entries before the first header go to section `""`.
pub fn parse(text: &str) -> Result<Document, ConfigError> {
    let mut doc = Document::default();
    let mut cur = Section { name: String::new(), line: 1, entries: Vec::new() };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indent = raw.len() - raw.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(ConfigError::new(line, indent + trimmed.len() + 1, "expected ']'"));
            };
            let name = name.trim().to_string();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::new(line, indent + 2, format!("invalid section name '{name}'")));
            }
            if let Some(prev) = doc.sections.iter().chain(std::iter::once(&cur)).find(|s| s.name == name) {
                return Err(ConfigError::new(
                    line,
                    indent + 1,
                    format!("duplicate section [{name}] (first defined on line {})", prev.line),
                ));
            }
            let done = std::mem::replace(&mut cur, Section { name, line, entries: Vec::new() });
            if !done.name.is_empty() || !done.entries.is_empty() {
                doc.sections.push(done);
            }
            continue;
        }
        let Some(eq) = raw.find('=') else {
            return Err(ConfigError::new(line, indent + 1, "expected 'key = value'"));
        };
        let key = raw[..eq].trim().to_string();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::new(line, indent + 1, format!("invalid key '{key}'")));
        }
        let after = &raw[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let value = after.trim().to_string();
        if value.is_empty() {
            return Err(ConfigError::new(line, eq + 2, format!("missing value for '{key}'")));
        }
        if let Some(prev) = cur.entries.iter().find(|e| e.key == key) {
            return Err(ConfigError::new(
                line,
                indent + 1,
                format!("duplicate key '{key}' (first defined on line {})", prev.line),
            ));
        }
        cur.entries.push(Entry { key, value, line, col: eq + 2 + lead });
    }
    if !cur.name.is_empty() || !cur.entries.is_empty() {
        doc.sections.push(cur);
    }
    Ok(doc)
}

/// Splits a comma-separated value, keeping column offsets.
pub fn split_list(e: &Entry) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in e.value.char_indices().chain(std::iter::once((e.value.len(), ','))) {
        if c == ',' {
            let piece = &e.value[start..i];
            let lead = piece.len() - piece.trim_start().len();
            out.push((piece.trim().to_string(), e.col + start + lead));
            start = i + 1;
        }
    }
    out
}
