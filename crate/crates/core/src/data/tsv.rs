//! `sentence<TAB>aspect<TAB>from<TAB>to<TAB>label` triplet files.

use std::fmt::Write as _;
use std::path::Path;

use super::tokenize::{covering_tokens, find_phrase, tokenize, tokenize_with_offsets};
use super::{read_file, DataError, Example, Sentiment};

pub fn parse_tsv(path: &Path) -> Result<Vec<Example>, DataError> {
    parse_tsv_str(&read_file(path)?)
}

/// Parses TSV text. Offsets of `-1` select the first token-level
/// occurrence of the aspect.
pub fn parse_tsv_str(text: &str) -> Result<Vec<Example>, DataError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        let bad = |message: String| DataError::Tsv { line, message };
        if cols.len() != 5 {
            return Err(bad(format!(
                "expected 5 tab-separated columns, found {}",
                cols.len()
            )));
        }
        let (sentence, aspect) = (cols[0], cols[1]);
        let from: i64 = cols[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad from offset {:?}", cols[2])))?;
        let to: i64 = cols[3]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad to offset {:?}", cols[3])))?;
        let label: Sentiment = cols[4]
            .parse()
            .map_err(|label| DataError::UnknownLabel { line, label })?;

        let tokens = tokenize_with_offsets(sentence);
        let words: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
        let not_found = || DataError::AspectNotFound {
            line,
            aspect: aspect.to_string(),
        };
        let span = if from < 0 || to < 0 {
            let phrase = tokenize(aspect);
            let at = find_phrase(&words, &phrase).ok_or_else(not_found)?;
            (at + 1, at + phrase.len())
        } else {
            let (first, last, _) =
                covering_tokens(&tokens, from as usize, to as usize).ok_or_else(not_found)?;
            (first + 1, last + 1)
        };
        out.push(Example::new(words, span, label).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}

/// Writes examples as TSV lines. Tokens are joined by single spaces and
/// offsets point at the aspect span in that text.
pub fn to_tsv(examples: &[Example]) -> String {
    let mut out = String::new();
    for ex in examples {
        let sentence = ex.tokens.join(" ");
        let from: usize = ex.tokens[..ex.span.0 - 1]
            .iter()
            .map(|t| t.chars().count() + 1)
            .sum();
        let aspect = ex.aspect_text();
        let to = from + aspect.chars().count();
        writeln!(out, "{sentence}\t{aspect}\t{from}\t{to}\t{}", ex.label).unwrap();
    }
    out
}
