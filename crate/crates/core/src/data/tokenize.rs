//! Lowercasing tokenizer that keeps character offsets.

/// A token and the half-open range of `char` indices it covers in the source text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Splits on whitespace and makes every punctuation character its own token.
/// Offsets count `char`s, matching the SemEval `from`/`to` attributes.
pub fn tokenize_with_offsets(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut word_start = 0;
    let flush = |word: &mut String, start: usize, end: usize, tokens: &mut Vec<Token>| {
        if !word.is_empty() {
            tokens.push(Token {
                text: word.to_lowercase(),
                start,
                end,
            });
            word.clear();
        }
    };
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            flush(&mut word, word_start, i, &mut tokens);
        } else if is_punct(c) {
            flush(&mut word, word_start, i, &mut tokens);
            tokens.push(Token {
                text: c.to_lowercase().collect(),
                start: i,
                end: i + 1,
            });
        } else {
            if word.is_empty() {
                word_start = i;
            }
            word.push(c);
        }
    }
    let end = text.chars().count();
    flush(&mut word, word_start, end, &mut tokens);
    tokens
}

pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_offsets(text)
        .into_iter()
        .map(|t| t.text)
        .collect()
}

/// Token index range `[first, last]` (0-based, inclusive) of the tokens
/// overlapping the char range `[from, to)`, and whether the range had to be
/// widened to reach token boundaries.
pub fn covering_tokens(tokens: &[Token], from: usize, to: usize) -> Option<(usize, usize, bool)> {
    let first = tokens.iter().position(|t| t.start < to && t.end > from)?;
    let last = tokens.iter().rposition(|t| t.start < to && t.end > from)?;
    let widened = tokens[first].start < from || tokens[last].end > to;
    Some((first, last, widened))
}

/// First index at which `phrase` occurs as a contiguous token run.
pub fn find_phrase(tokens: &[String], phrase: &[String]) -> Option<usize> {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return None;
    }
    tokens.windows(phrase.len()).position(|w| w == phrase)
}
