use super::{Language, Sentence};

const TERMINATORS: &[char] = &['。', '！', '？', '!', '?', '.', ';', '；', '\n'];

/// Closing marks that stay attached to the sentence they end.
const TRAILING_CLOSERS: &[char] = &['"', '\'', '”', '’', '」', '』', '）', ')', '】', '》'];

fn is_terminator(c: char) -> bool {
    TERMINATORS.contains(&c)
}

/// Splits `text` into sentences.
///
/// Boundaries are runs of terminal punctuation (`。！？!?.;；`) or newlines.
/// Terminators and any closing quotes/brackets right after them stay with the
/// preceding sentence. A `.` between two ASCII digits is a decimal point, not a
/// boundary. Fragments are trimmed and empty ones dropped, so the output
/// concatenated covers every non-whitespace character of the input.
pub fn segment(post_id: &str, text: &str, language: Language) -> Vec<Sentence> {
    let _ = language; // same punctuation set for zh and en
    let chars: Vec<char> = text.chars().collect();
    let mut pieces: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let decimal_point =
            c == '.' && i > 0 && chars[i - 1].is_ascii_digit() && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if !is_terminator(c) || decimal_point {
            current.push(c);
            i += 1;
            continue;
        }
        while i < chars.len() && is_terminator(chars[i]) {
            if chars[i] != '\n' {
                current.push(chars[i]);
            }
            i += 1;
        }
        while i < chars.len() && TRAILING_CLOSERS.contains(&chars[i]) {
            current.push(chars[i]);
            i += 1;
        }
        pieces.push(std::mem::take(&mut current));
    }
    pieces.push(current);

    pieces
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .enumerate()
        .map(|(index, text)| Sentence { post_id: post_id.to_string(), index, text })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(text: &str, lang: Language) -> Vec<String> {
        segment("p", text, lang).into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn chinese_terminators() {
        assert_eq!(texts("我很累。我想消失。", Language::Zh), vec!["我很累。", "我想消失。"]);
    }

    #[test]
    fn no_terminal_punctuation_is_one_sentence() {
        assert_eq!(texts("no terminal punctuation", Language::En), vec!["no terminal punctuation"]);
    }

    #[test]
    fn empty_input() {
        assert!(segment("p", "", Language::En).is_empty());
        assert!(segment("p", " \n\t ", Language::Zh).is_empty());
    }

    #[test]
    fn runs_and_closers_stay_together() {
        assert_eq!(
            texts("It hurts... Why?! \"Stop.\" Then 3.5 hours passed", Language::En),
            vec!["It hurts...", "Why?!", "\"Stop.\"", "Then 3.5 hours passed"]
        );
        assert_eq!(texts("他说：“我不行。”然后走了", Language::Zh), vec!["他说：“我不行。”", "然后走了"]);
    }

    #[test]
    fn semicolons_and_newlines_split() {
        assert_eq!(
            texts("I am wasting my time; nothing is out there\nline two", Language::En),
            vec!["I am wasting my time;", "nothing is out there", "line two"]
        );
    }

    proptest! {
        #[test]
        fn segments_are_nonempty_contiguous_and_cover_input(text in "[a-z 。！？!?.;；\n我很累]{0,60}") {
            let out = segment("p", &text, Language::Zh);
            for (i, s) in out.iter().enumerate() {
                prop_assert_eq!(s.index, i);
                prop_assert!(!s.text.is_empty());
                prop_assert_eq!(s.text.trim(), s.text.as_str());
            }
            let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            let joined: String = out.iter().map(|s| s.text.as_str()).collect();
            prop_assert_eq!(strip(&joined), strip(&text));
        }
    }
}
