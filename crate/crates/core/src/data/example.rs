use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Sentiment classes in model output order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sentiment {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Positive => "positive",
        })
    }
}

impl FromStr for Sentiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negative" => Ok(Sentiment::Negative),
            "neutral" => Ok(Sentiment::Neutral),
            "positive" => Ok(Sentiment::Positive),
            other => Err(other.to_string()),
        }
    }
}

/// One labelled sentence with its aspect span (1-based, inclusive).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Example {
    pub tokens: Vec<String>,
    pub span: (usize, usize),
    pub label: Sentiment,
}

impl Example {
    pub fn new(
        tokens: Vec<String>,
        span: (usize, usize),
        label: Sentiment,
    ) -> Result<Self, DataError> {
        let (s, e) = span;
        if tokens.is_empty() || s == 0 || s > e || e > tokens.len() {
            return Err(DataError::BadExample(format!(
                "span [{s}, {e}] invalid for {} tokens",
                tokens.len()
            )));
        }
        Ok(Self {
            tokens,
            span,
            label,
        })
    }

    pub fn aspect_tokens(&self) -> &[String] {
        &self.tokens[self.span.0 - 1..self.span.1]
    }

    pub fn aspect_text(&self) -> String {
        self.aspect_tokens().join(" ")
    }
}

/// Per-label totals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
    pub neutral: usize,
}

impl LabelCounts {
    pub fn of(examples: &[Example]) -> Self {
        let mut c = Self::default();
        for e in examples {
            match e.label {
                Sentiment::Positive => c.positive += 1,
                Sentiment::Negative => c.negative += 1,
                Sentiment::Neutral => c.neutral += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative + self.neutral
    }
}

impl fmt::Display for LabelCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "positive={} negative={} neutral={}",
            self.positive, self.negative, self.neutral
        )
    }
}
