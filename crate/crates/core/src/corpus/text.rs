//! Language-aware token counting and deterministic sentence splitting.
//!
//! Token budgets use whitespace-delimited tokens for "en" (and any other
//! space-separated language) and individual non-whitespace characters for
//! "zh". Both rules are cheap and reproducible; neither attempts real
//! linguistic segmentation.

/// True when the language tag counts tokens per character (CJK-style).
pub fn counts_chars(lang: &str) -> bool {
    lang == "zh" || lang.starts_with("zh-")
}

/// Token count of `text` under the budget rule for `lang`.
pub fn token_count(text: &str, lang: &str) -> usize {
    if counts_chars(lang) {
        text.chars().filter(|c| !c.is_whitespace()).count()
    } else {
        text.split_whitespace().count()
    }
}

const ASCII_TERMINATORS: [char; 4] = ['.', '!', '?', ';'];
const CJK_TERMINATORS: [char; 4] = ['。', '！', '？', '；'];

/// Split `text` into trimmed sentences.
///
/// A sentence ends at a newline, at a CJK terminator, or at an ASCII
/// terminator followed by whitespace or end of text (so decimals like
/// "2.5" do not split). Terminator characters stay attached, which keeps
/// each sentence a verbatim substring of the input.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut chars = text.char_indices().peekable();
    while let Some((idx, ch)) = chars.next() {
        let end = if ch == '\n' {
            Some(idx)
        } else if CJK_TERMINATORS.contains(&ch) {
            Some(idx + ch.len_utf8())
        } else if ASCII_TERMINATORS.contains(&ch) {
            match chars.peek() {
                None => Some(idx + ch.len_utf8()),
                Some((_, next)) if next.is_whitespace() => Some(idx + ch.len_utf8()),
                _ => None,
            }
        } else {
            None
        };
        if let Some(end) = end {
            let sentence = text[start..end].trim();
            if !sentence.is_empty() {
                sentences.push(sentence.to_string());
            }
            start = idx + ch.len_utf8();
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

/// Longest prefix of `text` containing at most `budget` tokens, cut at a
/// token boundary so the original spacing is preserved.
pub fn truncate_to_tokens<'a>(text: &'a str, lang: &str, budget: usize) -> &'a str {
    if token_count(text, lang) <= budget {
        return text;
    }
    if budget == 0 {
        return "";
    }
    if counts_chars(lang) {
        let mut seen = 0usize;
        for (idx, ch) in text.char_indices() {
            if !ch.is_whitespace() {
                seen += 1;
                if seen == budget {
                    return &text[..idx + ch.len_utf8()];
                }
            }
        }
        text
    } else {
        let mut seen = 0usize;
        let mut in_token = false;
        for (idx, ch) in text.char_indices() {
            if ch.is_whitespace() {
                in_token = false;
            } else if !in_token {
                in_token = true;
                seen += 1;
                if seen > budget {
                    return text[..idx].trim_end();
                }
            }
        }
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_count_en_whitespace() {
        assert_eq!(token_count("adjuvant chemotherapy  started", "en"), 3);
        assert_eq!(token_count("", "en"), 0);
    }

    #[test]
    fn token_count_zh_chars() {
        assert_eq!(token_count("确诊乳腺癌", "zh"), 5);
        assert_eq!(token_count("确诊 乳腺癌", "zh"), 5);
    }

    #[test]
    fn sentences_keep_terminators_and_skip_decimals() {
        let sents = split_sentences("Cycle 2.5 given today. Tolerated well; no fever.\nPlan CT");
        assert_eq!(
            sents,
            vec!["Cycle 2.5 given today.", "Tolerated well;", "no fever.", "Plan CT"]
        );
    }

    #[test]
    fn sentences_cjk() {
        let sents = split_sentences("确诊乳腺癌。开始化疗！随访");
        assert_eq!(sents, vec!["确诊乳腺癌。", "开始化疗！", "随访"]);
    }

    #[test]
    fn sentences_are_verbatim_substrings() {
        let text = "First note here. Second note!  Third\nFourth one.";
        for s in split_sentences(text) {
            assert!(text.contains(&s), "sentence {s:?} not verbatim in input");
        }
    }

    #[test]
    fn truncate_en_cuts_at_token_boundary() {
        assert_eq!(truncate_to_tokens("a bb  ccc dddd", "en", 2), "a bb");
        assert_eq!(truncate_to_tokens("a bb ccc", "en", 9), "a bb ccc");
        assert_eq!(truncate_to_tokens("a bb", "en", 0), "");
    }

    #[test]
    fn truncate_zh_cuts_per_char() {
        assert_eq!(truncate_to_tokens("确诊乳腺癌", "zh", 2), "确诊");
    }
}
