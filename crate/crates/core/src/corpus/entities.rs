//! Capitalization-based entity mentions.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::stopwords::is_stopword;
use super::tokenize::{normalize_token, token_spans};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    /// Lowercased words joined by single spaces.
    pub surface: String,
    /// Indices into `tokenize(text)`.
    pub span: Range<usize>,
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// Extracts entity mentions from `text`.
///
/// Mentions are maximal runs of capitalized tokens separated only by spaces
/// or tabs. A sentence-initial stopword ("The", "Did") is dropped from the
/// front of its run, and runs made only of stopwords ("I") are discarded.
/// Repeated mentions are all kept.
pub fn extract_entities(text: &str) -> Vec<EntityMention> {
    let spans = token_spans(text);
    let mut out = Vec::new();
    let mut i = 0;
    while i < spans.len() {
        if !is_capitalized(&text[spans[i].start..spans[i].end]) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < spans.len() {
            let gap = &text[spans[j - 1].end..spans[j].start];
            let joined = !gap.is_empty() && gap.chars().all(|c| c == ' ' || c == '\t');
            if joined && is_capitalized(&text[spans[j].start..spans[j].end]) {
                j += 1;
            } else {
                break;
            }
        }

        let words: Vec<String> = (i..j)
            .map(|t| normalize_token(&text[spans[t].start..spans[t].end]))
            .collect();
        let mut first = 0;
        if is_sentence_initial(text, &spans, i) && is_stopword(&words[0]) {
            first = 1;
        }
        let kept = &words[first..];
        if !kept.is_empty() && !kept.iter().all(|w| is_stopword(w)) {
            out.push(EntityMention {
                surface: kept.join(" "),
                span: (i + first)..j,
            });
        }
        i = j;
    }
    out
}

fn is_sentence_initial(text: &str, spans: &[super::TokenSpan], idx: usize) -> bool {
    let before = if idx == 0 {
        &text[..spans[0].start]
    } else {
        &text[spans[idx - 1].end..spans[idx].start]
    };
    idx == 0 || before.chars().any(|c| matches!(c, '.' | '!' | '?' | '\n'))
}

/// Bag of entity surfaces.
pub fn entity_surfaces(text: &str) -> Vec<String> {
    extract_entities(text).into_iter().map(|m| m.surface).collect()
}
