//! Reader for SemEval-2014 Task 4 aspect-term XML files.

use std::path::Path;

use log::warn;

use super::tokenize::{covering_tokens, find_phrase, tokenize, tokenize_with_offsets};
use super::{read_file, DataError, Example, Sentiment};

/// One [`Example`] per `(sentence, aspectTerm)` pair. Terms labelled
/// `conflict` are dropped.
pub fn parse_semeval_xml(path: &Path) -> Result<Vec<Example>, DataError> {
    let text = read_file(path)?;
    parse_semeval_str(&text)
}

pub fn parse_semeval_str(xml: &str) -> Result<Vec<Example>, DataError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| DataError::Xml {
        line: e.pos().row as usize,
        message: e.to_string(),
    })?;
    let line_of = |node: roxmltree::Node| doc.text_pos_at(node.range().start).row as usize;
    let mut out = Vec::new();

    for sentence in doc.descendants().filter(|n| n.has_tag_name("sentence")) {
        let text = sentence
            .children()
            .find(|n| n.has_tag_name("text"))
            .and_then(|n| n.text())
            .ok_or_else(|| DataError::Xml {
                line: line_of(sentence),
                message: "sentence without text".into(),
            })?;
        let tokens = tokenize_with_offsets(text);
        let words: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();

        let terms = sentence
            .children()
            .filter(|n| n.has_tag_name("aspectTerms"))
            .flat_map(|n| n.children())
            .filter(|n| n.has_tag_name("aspectTerm"));
        for term in terms {
            let line = line_of(term);
            let attr = |name: &str| {
                term.attribute(name).ok_or_else(|| DataError::Xml {
                    line,
                    message: format!("aspectTerm missing {name}"),
                })
            };
            let polarity = attr("polarity")?;
            if polarity.eq_ignore_ascii_case("conflict") {
                continue;
            }
            let label: Sentiment = polarity
                .parse()
                .map_err(|p| DataError::UnknownLabel { line, label: p })?;
            let term_text = attr("term")?;

            let offsets = match (term.attribute("from"), term.attribute("to")) {
                (Some(f), Some(t)) => Some((parse_offset(f, line)?, parse_offset(t, line)?)),
                _ => None,
            };
            let span = match offsets {
                Some((from, to)) => {
                    let (first, last, widened) =
                        covering_tokens(&tokens, from, to).ok_or_else(|| {
                            DataError::AspectNotFound {
                                line,
                                aspect: term_text.to_string(),
                            }
                        })?;
                    if widened {
                        warn!("line {line}: offsets {from}..{to} of {term_text:?} widened to token boundaries");
                    }
                    (first + 1, last + 1)
                }
                None => {
                    let phrase = tokenize(term_text);
                    let at =
                        find_phrase(&words, &phrase).ok_or_else(|| DataError::AspectNotFound {
                            line,
                            aspect: term_text.to_string(),
                        })?;
                    (at + 1, at + phrase.len())
                }
            };
            let ex = Example::new(words.clone(), span, label)?;
            if tokenize(term_text) != ex.aspect_tokens() {
                warn!(
                    "line {line}: span text {:?} differs from term {term_text:?}",
                    ex.aspect_text()
                );
            }
            out.push(ex);
        }
    }
    Ok(out)
}

fn parse_offset(s: &str, line: usize) -> Result<usize, DataError> {
    s.trim().parse().map_err(|_| DataError::Xml {
        line,
        message: format!("bad offset {s:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<sentences>
  <sentence id="1">
    <text>The food was great but the service was slow.</text>
    <aspectTerms>
      <aspectTerm term="food" polarity="positive" from="4" to="8"/>
      <aspectTerm term="service" polarity="negative" from="27" to="34"/>
    </aspectTerms>
  </sentence>
  <sentence id="2">
    <text>Mixed feelings about the wine list.</text>
    <aspectTerms>
      <aspectTerm term="wine list" polarity="conflict" from="25" to="34"/>
    </aspectTerms>
  </sentence>
  <sentence id="3">
    <text>Nothing to see here.</text>
  </sentence>
  <sentence id="4">
    <text>Their sake &amp; sushi were Neutral-ish.</text>
    <aspectTerms>
      <aspectTerm term="sushi" polarity="Neutral" from="13" to="18"/>
    </aspectTerms>
  </sentence>
</sentences>"#;

    #[test]
    fn two_aspects_share_tokens() {
        let ex = parse_semeval_str(SAMPLE).unwrap();
        assert_eq!(ex.len(), 3);
        assert_eq!(ex[0].tokens, ex[1].tokens);
        assert_eq!(ex[0].span, (2, 2));
        assert_eq!(ex[1].span, (7, 7));
        assert_eq!(ex[0].label, Sentiment::Positive);
        assert_eq!(ex[1].label, Sentiment::Negative);
    }

    #[test]
    fn conflict_dropped_and_entities_decoded() {
        let ex = parse_semeval_str(SAMPLE).unwrap();
        assert!(ex.iter().all(|e| e.aspect_text() != "wine list"));
        assert_eq!(ex[2].aspect_text(), "sushi");
        assert_eq!(ex[2].label, Sentiment::Neutral);
    }

    #[test]
    fn misaligned_offsets_widen() {
        let xml = r#"<sentences><sentence><text>great food here</text><aspectTerms>
            <aspectTerm term="ood" polarity="positive" from="7" to="10"/></aspectTerms></sentence></sentences>"#;
        let ex = parse_semeval_str(xml).unwrap();
        assert_eq!(ex[0].span, (2, 2));
    }

    #[test]
    fn malformed_xml_reports_line() {
        let xml = "<sentences>\n<sentence>\n<text>oops</txt>\n</sentence></sentences>";
        match parse_semeval_str(xml) {
            Err(DataError::Xml { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_polarity_rejected() {
        let xml = r#"<sentences><sentence><text>a b</text><aspectTerms>
            <aspectTerm term="a" polarity="great" from="0" to="1"/></aspectTerms></sentence></sentences>"#;
        assert!(matches!(
            parse_semeval_str(xml),
            Err(DataError::UnknownLabel { line: 2, .. })
        ));
    }
}
