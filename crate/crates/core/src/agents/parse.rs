//! Action parsing for free-text replies: case-insensitive match of an action
//! label as a whole word, and the label mentioned last wins.

use super::AgentError;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte offset of the last whole-word occurrence of `needle` in `hay`.
fn last_word_match(hay: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let mut last = None;
    let mut from = 0;
    while let Some(rel) = hay[from..].find(needle) {
        let start = from + rel;
        let end = start + needle.len();
        let before_ok = hay[..start].chars().next_back().is_none_or(|c| !is_word_char(c));
        let after_ok = hay[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if before_ok && after_ok {
            last = Some(start);
        }
        from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
    }
    last
}

/// Index of the label mentioned last in `text`.
pub fn parse_action(text: &str, labels: &[String; 2]) -> Result<usize, AgentError> {
    let hay = text.to_lowercase();
    let mut best: Option<(usize, usize)> = None;
    for (i, label) in labels.iter().enumerate() {
        if let Some(pos) = last_word_match(&hay, &label.to_lowercase()) {
            if best.is_none_or(|(p, _)| pos > p) {
                best = Some((pos, i));
            }
        }
    }
    best.map(|(_, i)| i)
        .ok_or_else(|| AgentError::UnparseableAction(text.chars().take(200).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pd() -> [String; 2] {
        ["Cooperate".into(), "Defect".into()]
    }

    #[test]
    fn exact_label() {
        assert_eq!(parse_action("Defect", &pd()).unwrap(), 1);
        assert_eq!(parse_action("cooperate", &pd()).unwrap(), 0);
        assert_eq!(parse_action("  DEFECT.\n", &pd()).unwrap(), 1);
    }

    #[test]
    fn last_mention_wins() {
        let text = "I should cooperate... but they will defect. Final answer: Cooperate";
        assert_eq!(parse_action(text, &pd()).unwrap(), 0);
        assert_eq!(parse_action("Cooperate? No: Defect", &pd()).unwrap(), 1);
    }

    #[test]
    fn whole_words_only() {
        assert!(parse_action("Defected earlier", &pd()).is_err());
        assert_eq!(parse_action("uncooperative, so Defect", &pd()).unwrap(), 1);
    }

    #[test]
    fn no_label() {
        let err = parse_action("banana", &pd()).unwrap_err();
        assert_eq!(err.code(), "unparseable_action");
    }
}
