//! Name-keyed lookup of interchangeable strategies.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Maps strategy names to factories of type `F`.
#[derive(Debug, Clone)]
pub struct Registry<F> {
    kind: &'static str,
    entries: BTreeMap<String, F>,
}

impl<F: Clone> Registry<F> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, entries: BTreeMap::new() }
    }

    /// Adds or replaces the entry for `name`.
    pub fn register(&mut self, name: impl Into<String>, factory: F) -> &mut Self {
        self.entries.insert(name.into().to_ascii_lowercase(), factory);
        self
    }

    /// Case-insensitive lookup.
    pub fn get(&self, name: &str) -> Result<F> {
        self.entries.get(&name.to_ascii_lowercase()).cloned().ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(&name.to_ascii_lowercase())
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_case_insensitive_and_lists_names_on_miss() {
        let mut r: Registry<fn() -> u8> = Registry::new("widget");
        r.register("Alpha", || 1).register("beta", || 2);
        assert_eq!(r.get("ALPHA").unwrap()(), 1);
        let err = r.get("gamma").unwrap_err().to_string();
        assert!(err.contains("widget") && err.contains("alpha, beta"), "{err}");
    }
}
