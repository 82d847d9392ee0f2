//! Opaque text tokens and the two tokenizer profiles.
//!
//! A [`Token`] is a non-empty text atom. The engine never needs a model
//! vocabulary: code is split either into single characters or into
//! alternating runs of non-whitespace and whitespace, and in both cases
//! concatenating the tokens gives back the input byte for byte.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A non-empty, immutable text atom. Cloning is a reference-count bump.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(Arc<str>);

impl Token {
    /// Builds a token, returning `None` for the empty string.
    pub fn new(text: &str) -> Option<Self> {
        if text.is_empty() {
            None
        } else {
            Some(Token(Arc::from(text)))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_whitespace(&self) -> bool {
        self.0.chars().all(char::is_whitespace)
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Builds a token from a literal. Panics on the empty string.
impl From<&str> for Token {
    fn from(text: &str) -> Self {
        Token::new(text).expect("token text must be non-empty")
    }
}

impl Serialize for Token {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Token::new(&text).ok_or_else(|| serde::de::Error::custom("empty token"))
    }
}

/// How source text is split into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// One token per Unicode scalar value, whitespace included.
    #[default]
    Char,
    /// Maximal runs of non-whitespace, with each maximal whitespace run kept
    /// as its own separator token.
    Word,
}

impl Profile {
    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Char => "char",
            Profile::Word => "word",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown tokenizer profile `{0}` (expected `char` or `word`)")]
pub struct UnknownProfile(pub String);

impl FromStr for Profile {
    type Err = UnknownProfile;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "char" => Ok(Profile::Char),
            "word" => Ok(Profile::Word),
            other => Err(UnknownProfile(other.to_string())),
        }
    }
}

pub fn tokenize(text: &str, profile: Profile) -> Vec<Token> {
    match profile {
        Profile::Char => {
            let mut buf = [0u8; 4];
            text.chars()
                .map(|c| Token(Arc::from(&*c.encode_utf8(&mut buf))))
                .collect()
        }
        Profile::Word => {
            let mut out = Vec::new();
            let mut start = 0;
            let mut in_space: Option<bool> = None;
            for (i, c) in text.char_indices() {
                let space = c.is_whitespace();
                match in_space {
                    Some(prev) if prev != space => {
                        out.push(Token(Arc::from(&text[start..i])));
                        start = i;
                    }
                    _ => {}
                }
                in_space = Some(space);
            }
            if start < text.len() {
                out.push(Token(Arc::from(&text[start..])));
            }
            out
        }
    }
}

pub fn detokenize<T: AsRef<str>>(tokens: &[T]) -> String {
    let len = tokens.iter().map(|t| t.as_ref().len()).sum();
    let mut out = String::with_capacity(len);
    for t in tokens {
        out.push_str(t.as_ref());
    }
    out
}
