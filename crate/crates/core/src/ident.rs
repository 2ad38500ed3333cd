//! Canonical query/report identifiers.
//!
//! An identifier is an ordered list of keywords such as
//! `["Temperature", "San Francisco"]`. Each keyword is trimmed, internal
//! whitespace runs collapse to one space, and the result is lowercased. The
//! canonical string joins keywords with `|`, e.g. `temperature|san francisco`.

use std::fmt;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IdentifierError {
    #[error("identifier has no keywords")]
    Empty,
    #[error("keyword {0} is empty")]
    EmptyKeyword(usize),
    #[error("keyword contains a control character")]
    ControlCharacter,
    #[error("identifier is not in canonical form (expected {0:?})")]
    NotCanonical(String),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Identifier(String);

impl Identifier {
    pub const SEPARATOR: char = '|';

    pub fn from_keywords<I, S>(keywords: I) -> Result<Self, IdentifierError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut parts = Vec::new();
        for (i, kw) in keywords.into_iter().enumerate() {
            let kw = kw.as_ref();
            if kw.chars().any(char::is_control) {
                return Err(IdentifierError::ControlCharacter);
            }
            let canon = kw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
            if canon.is_empty() || canon.contains(Self::SEPARATOR) {
                return Err(IdentifierError::EmptyKeyword(i));
            }
            parts.push(canon);
        }
        if parts.is_empty() {
            return Err(IdentifierError::Empty);
        }
        Ok(Identifier(parts.join("|")))
    }

    /// Canonicalizes a `|`-separated keyword string.
    pub fn parse(s: &str) -> Result<Self, IdentifierError> {
        if s.trim().is_empty() {
            return Err(IdentifierError::Empty);
        }
        Self::from_keywords(s.split(Self::SEPARATOR))
    }

    /// Accepts `s` only if it is already canonical.
    pub fn from_canonical(s: &str) -> Result<Self, IdentifierError> {
        let id = Self::parse(s)?;
        if id.0 != s {
            return Err(IdentifierError::NotCanonical(id.0));
        }
        Ok(id)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.0.split(Self::SEPARATOR)
    }
}

impl fmt::Debug for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Identifier({:?})", self.0)
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalization() {
        let id = Identifier::from_keywords(["Temperature", "  San   Francisco "]).unwrap();
        assert_eq!(id.as_str(), "temperature|san francisco");
        assert_eq!(Identifier::parse("TEMPERATURE| San Francisco").unwrap(), id);
        assert_eq!(id.keywords().collect::<Vec<_>>(), ["temperature", "san francisco"]);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert_eq!(Identifier::parse(""), Err(IdentifierError::Empty));
        assert_eq!(Identifier::parse("a||b"), Err(IdentifierError::EmptyKeyword(1)));
        assert_eq!(Identifier::from_keywords(Vec::<String>::new()), Err(IdentifierError::Empty));
        assert_eq!(Identifier::parse("a\u{7}"), Err(IdentifierError::ControlCharacter));
        assert_eq!(Identifier::from_keywords(["a|b"]), Err(IdentifierError::EmptyKeyword(0)));
    }

    #[test]
    fn strict_parse_requires_canonical_form() {
        assert!(Identifier::from_canonical("pollution|manhattan").is_ok());
        assert_eq!(
            Identifier::from_canonical("Pollution|Manhattan"),
            Err(IdentifierError::NotCanonical("pollution|manhattan".into()))
        );
    }
}
