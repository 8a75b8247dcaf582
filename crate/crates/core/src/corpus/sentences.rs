//! Rule-based sentence splitting.

/// Tokens ending in a period that never close a sentence.
const ABBREVIATIONS: [&str; 6] = ["mr.", "mrs.", "dr.", "u.s.", "st.", "no."];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201D}' | '\u{2019}' | ')' | ']')
}

fn is_opening_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201C}' | '\u{2018}')
}

fn ends_with_abbreviation(text: &str, period_at: usize) -> bool {
    let head = &text[..=period_at];
    let word_start = head
        .rfind(|c: char| c.is_whitespace() || matches!(c, '(' | '"' | '\u{201C}'))
        .map_or(0, |i| i + head[i..].chars().next().map_or(1, char::len_utf8));
    let word = head[word_start..].to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Splits `text` into trimmed, non-empty sentences.
///
/// A boundary is a run of `.`, `!` or `?` (plus any closing quotes or
/// brackets) followed by whitespace and then an uppercase letter, an opening
/// quote or a digit. A period closing one of the fixed abbreviations never
/// splits. Blank lines always split.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c == '\n' {
            // paragraph break: newline, optional spaces, newline
            let mut j = i + 1;
            while j < chars.len() && chars[j].1 != '\n' && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j < chars.len() && chars[j].1 == '\n' {
                cuts.push(byte_at(i));
                i = j + 1;
                continue;
            }
            i += 1;
            continue;
        }
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (is_terminator(chars[j].1) || is_closer(chars[j].1)) {
            j += 1;
        }
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = k > j
            && k < chars.len()
            && {
                let next = chars[k].1;
                next.is_uppercase() || is_opening_quote(next) || next.is_ascii_digit()
            }
            && !(c == '.' && j == i + 1 && ends_with_abbreviation(text, chars[i].0));
        if boundary {
            cuts.push(byte_at(j));
        }
        i = j;
    }

    let mut sentences = Vec::new();
    let mut start = 0;
    for cut in cuts.into_iter().chain(std::iter::once(text.len())) {
        let piece = text[start..cut].trim();
        if !piece.is_empty() {
            sentences.push(piece.to_string());
        }
        start = cut;
    }
    sentences
}
