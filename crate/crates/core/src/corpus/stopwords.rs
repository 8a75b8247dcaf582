use std::collections::HashSet;
use std::sync::OnceLock;

/// Bundled English function-word list, one lowercase word per line.
///
/// IDF tables and overlap features are computed against this exact list;
/// editing it changes every fitted model.
pub const STOPWORDS_FILE: &str = include_str!("stopwords.txt");

fn table() -> &'static HashSet<&'static str> {
    static TABLE: OnceLock<HashSet<&'static str>> = OnceLock::new();
    TABLE.get_or_init(|| {
        STOPWORDS_FILE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

/// Expects an already lowercased token.
pub fn is_stopword(token: &str) -> bool {
    table().contains(token)
}

pub fn stopword_count() -> usize {
    table().len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership() {
        assert!(is_stopword("the"));
        assert!(is_stopword("not"));
        assert!(!is_stopword("zeppelin"));
        assert!(!is_stopword("The"));
    }

    #[test]
    fn size_matches_file_lines() {
        let lines = STOPWORDS_FILE.lines().filter(|l| !l.trim().is_empty()).count();
        assert_eq!(stopword_count(), lines);
        assert!((140..=160).contains(&lines));
    }
}
