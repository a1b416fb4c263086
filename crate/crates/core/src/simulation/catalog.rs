//! Key-value scenario catalog.
//!
//! ```text
//! # comment
//! set=2 id=s7 alpha=-0.25 gamma=1.5
//! set=3 id=s12 alpha0=0 gamma0=0 alpha1=-0.5 gamma1=0
//! ```

use std::collections::BTreeMap;

use super::Truth;
use crate::error::{Error, Result};

/// The power-simulation scenarios shipped with the crate.
pub const BUILTIN_CATALOG: &str = include_str!("../../data/scenarios.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub id: String,
    pub truth: Truth,
}

impl CatalogEntry {
    pub fn set_id(&self) -> u8 {
        self.truth.set_id()
    }
}

pub fn parse_catalog(text: &str) -> Result<Vec<CatalogEntry>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::InvalidScenario(format!("catalog line {}: {msg}", lineno + 1));
        let mut kv = BTreeMap::new();
        for tok in line.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{tok}`")))?;
            if kv.insert(k, v).is_some() {
                return Err(bad(format!("duplicate key `{k}`")));
            }
        }
        let id = kv
            .remove("id")
            .ok_or_else(|| bad("missing `id`".into()))?
            .to_string();
        let set = kv.remove("set").ok_or_else(|| bad("missing `set`".into()))?;
        let mut num = |key: &str| -> Result<f64> {
            let v = kv.remove(key).ok_or_else(|| bad(format!("missing `{key}`")))?;
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("`{key}` is not a number: `{v}`")))
        };
        let truth = match set {
            "2" => Truth::LogitLinear {
                alpha: num("alpha")?,
                gamma: num("gamma")?,
            },
            "3" => Truth::PowerTransform {
                alpha0: num("alpha0")?,
                gamma0: num("gamma0")?,
                alpha1: num("alpha1")?,
                gamma1: num("gamma1")?,
            },
            other => return Err(bad(format!("unsupported set `{other}`"))),
        };
        if let Some(k) = kv.keys().next() {
            return Err(bad(format!("unknown key `{k}`")));
        }
        if out
            .iter()
            .any(|e: &CatalogEntry| e.id == id && e.set_id() == truth.set_id())
        {
            return Err(bad(format!("duplicate scenario `{id}`")));
        }
        out.push(CatalogEntry { id, truth });
    }
    Ok(out)
}

pub fn builtin_catalog() -> Vec<CatalogEntry> {
    parse_catalog(BUILTIN_CATALOG).expect("built-in catalog parses")
}

/// Looks up `id` among the built-in scenarios of `set`.
pub fn lookup(set: u8, id: &str) -> Result<CatalogEntry> {
    builtin_catalog()
        .into_iter()
        .find(|e| e.set_id() == set && e.id == id)
        .ok_or_else(|| Error::UnknownScenario(format!("set {set} {id}")))
}
