use std::collections::HashMap;

use super::{DataError, Example};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Token ↔ id map. Id 0 is padding, id 1 unknown; the rest are assigned in
/// order of first appearance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.push(PAD);
        v.push(UNK);
        v
    }
}

impl Vocab {
    pub fn build<'a>(examples: impl IntoIterator<Item = &'a Example>) -> Self {
        let mut v = Self::default();
        for ex in examples {
            for t in &ex.tokens {
                if !v.index.contains_key(t) {
                    v.push(t);
                }
            }
        }
        v
    }

    fn push(&mut self, token: &str) {
        self.index.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or [`UNK_ID`].
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line, in id order.
    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, DataError> {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for line in text.lines() {
            if v.index.contains_key(line) {
                return Err(DataError::BadVocab(format!("duplicate token {line:?}")));
            }
            v.push(line);
        }
        if v.token(PAD_ID) != Some(PAD) || v.token(UNK_ID) != Some(UNK) {
            return Err(DataError::BadVocab("missing reserved tokens".into()));
        }
        Ok(v)
    }
}
