//! Flat `key = value` configuration text.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Keys may contain dots (`trunc.cap1`) so callers can namespace blocks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.chars().any(char::is_whitespace) {
            return Err(Error::Parse(format!("line {}: invalid key `{key}`", lineno + 1)));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate key `{key}`", lineno + 1)));
        }
    }
    Ok(out)
}

pub struct Value<'a>(&'a str);

pub fn require<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<Value<'a>> {
    map.get(key)
        .map(|v| Value(v.as_str()))
        .ok_or_else(|| Error::MissingKey(key.to_string()))
}

impl Value<'_> {
    pub fn parse_f64(&self, key: &str) -> Result<f64> {
        self.0
            .parse()
            .map_err(|_| Error::Parse(format!("`{key}`: expected a number, got `{}`", self.0)))
    }

    pub fn parse_u32(&self, key: &str) -> Result<u32> {
        self.0
            .parse()
            .map_err(|_| Error::Parse(format!("`{key}`: expected a non-negative integer, got `{}`", self.0)))
    }

    pub fn as_str(&self) -> &str {
        self.0
    }
}
