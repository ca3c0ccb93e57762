//! Tweet decomposition into cleaned text and typed entity channels.
//!
//! Whitespace tokens are scanned left to right. URLs, `@mentions`,
//! `#hashtags`, emoji sequences and standalone numbers are cut out of the
//! token; the remaining pieces are checked against the smiley list and the
//! reserved-word set, kept if they contain an alphanumeric character, and
//! dropped otherwise. Hindi text is additionally split on `:`, `,` and `;`
//! after URL and smiley detection.

pub mod emoji;
pub mod segment;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ingest::Language;
pub use segment::{build_lexicon, segment_hashtag, OovPenalty, SegmenterLexicon};

pub const DEFAULT_SMILEYS: &[&str] = &[
    ":)", ":-)", ":(", ":-(", ";)", ";-)", ":D", ":-D", ";D", ":P", ":-P", ":p", ":-p", ":'(",
    ":/", ":-/", ":|", ":*", ":o", ":O", "=)", "=(", "XD", "xD", "<3", "</3", "^_^", "-_-",
];

pub const DEFAULT_RESERVED: &[&str] = &["RT", "FAV"];

const URL_PREFIXES: &[&str] = &["https://", "http://", "www."];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetParts {
    pub cleaned_text: String,
    pub hashtags: Vec<String>,
    pub segmented_hashtags: Vec<Vec<String>>,
    pub emojis: Vec<String>,
    pub smileys: Vec<String>,
    pub urls: Vec<String>,
    pub mentions: Vec<String>,
    pub numbers: Vec<String>,
    pub reserved: Vec<String>,
}

/// Cleaner configuration plus per-language segmentation lexicons.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub reserved: Vec<String>,
    pub smileys: Vec<String>,
    pub oov: OovPenalty,
    lexicons: HashMap<Language, SegmenterLexicon>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor {
            reserved: DEFAULT_RESERVED.iter().map(|s| s.to_string()).collect(),
            smileys: DEFAULT_SMILEYS.iter().map(|s| s.to_string()).collect(),
            oov: OovPenalty::default(),
            lexicons: HashMap::new(),
        }
    }
}

/// Decomposes with the default cleaner and no segmentation lexicon.
pub fn decompose(text: &str, language: Language) -> TweetParts {
    Preprocessor::default().decompose(text, language)
}

impl Preprocessor {
    pub fn with_lexicon(mut self, language: Language, lexicon: SegmenterLexicon) -> Self {
        self.lexicons.insert(language, lexicon);
        self
    }

    pub fn lexicon(&self, language: Language) -> Option<&SegmenterLexicon> {
        self.lexicons.get(&language)
    }

    pub fn decompose(&self, text: &str, language: Language) -> TweetParts {
        let mut parts = TweetParts::default();
        let mut kept: Vec<String> = Vec::new();
        for token in text.split_whitespace() {
            if language == Language::Hi {
                if self.is_smiley(token) {
                    parts.smileys.push(token.to_string());
                    continue;
                }
                if starts_with_url(token) {
                    let (url, _) = split_url(token);
                    parts.urls.push(url.to_string());
                    continue;
                }
                for piece in token.split([':', ',', ';']).filter(|p| !p.is_empty()) {
                    self.scan(piece, &mut parts, &mut kept);
                }
            } else {
                self.scan(token, &mut parts, &mut kept);
            }
        }
        parts.cleaned_text = kept.join(" ");
        parts.segmented_hashtags = parts
            .hashtags
            .iter()
            .map(|tag| self.segment(tag, language))
            .collect();
        parts
    }

    /// Hindi tags without a Hindi lexicon stay whole; other languages fall
    /// back to an empty lexicon (camel-case hints only).
    fn segment(&self, tag: &str, language: Language) -> Vec<String> {
        match self.lexicons.get(&language) {
            Some(lex) => segment::segment_hashtag_with(tag, lex, &self.oov),
            None if language == Language::Hi => vec![tag.to_lowercase()],
            None => segment::segment_hashtag_with(tag, &SegmenterLexicon::default(), &self.oov),
        }
    }

    fn is_smiley(&self, s: &str) -> bool {
        self.smileys.iter().any(|m| m == s)
    }

    fn is_reserved(&self, s: &str) -> bool {
        let core = s.trim_end_matches(':');
        self.reserved.iter().any(|r| r == core)
    }

    fn flush(&self, buf: &mut String, parts: &mut TweetParts, kept: &mut Vec<String>) {
        if buf.is_empty() {
            return;
        }
        let piece = std::mem::take(buf);
        if self.is_smiley(&piece) {
            parts.smileys.push(piece);
        } else if self.is_reserved(&piece) {
            parts.reserved.push(piece.trim_end_matches(':').to_string());
        } else if piece.chars().any(char::is_alphanumeric) {
            kept.push(piece);
        }
    }

    fn scan(&self, token: &str, parts: &mut TweetParts, kept: &mut Vec<String>) {
        let chars: Vec<char> = token.chars().collect();
        let mut buf = String::new();
        let mut i = 0;
        // index right after the last extracted entity
        let mut cut = 0;
        while i < chars.len() {
            let c = chars[i];
            let at_boundary = i == cut || !is_word_char(chars[i - 1]);

            if at_boundary
                && matches!(c, 'h' | 'H' | 'w' | 'W')
                && starts_with_url(&chars[i..].iter().collect::<String>())
            {
                self.flush(&mut buf, parts, kept);
                let rest: String = chars[i..].iter().collect();
                let (url, trailing) = split_url(&rest);
                parts.urls.push(url.to_string());
                buf.push_str(trailing);
                break;
            }

            let emoji_len = emoji::emoji_len(&chars, i);
            if emoji_len > 0 {
                self.flush(&mut buf, parts, kept);
                parts.emojis.push(chars[i..i + emoji_len].iter().collect());
                i += emoji_len;
                cut = i;
                continue;
            }
            if emoji::is_joiner_or_modifier(c) {
                self.flush(&mut buf, parts, kept);
                i += 1;
                cut = i;
                continue;
            }

            if (c == '@' || c == '#') && at_boundary {
                let end = word_run_end(&chars, i + 1);
                if end > i + 1 {
                    self.flush(&mut buf, parts, kept);
                    if c == '@' {
                        parts.mentions.push(chars[i..end].iter().collect());
                    } else {
                        parts.hashtags.push(chars[i + 1..end].iter().collect());
                    }
                    i = end;
                    cut = end;
                    continue;
                }
            }

            if c.is_ascii_digit() && at_boundary {
                let end = number_run_end(&chars, i);
                if chars.get(end).is_none_or(|&next| !is_word_char(next)) {
                    self.flush(&mut buf, parts, kept);
                    parts.numbers.push(chars[i..end].iter().collect());
                    i = end;
                    cut = end;
                    continue;
                }
                buf.extend(&chars[i..end]);
                i = end;
                continue;
            }

            buf.push(c);
            i += 1;
        }
        self.flush(&mut buf, parts, kept);
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || ('\u{0900}'..='\u{097F}').contains(&c)
}

fn word_run_end(chars: &[char], start: usize) -> usize {
    let mut end = start;
    while end < chars.len() && is_word_char(chars[end]) {
        end += 1;
    }
    end
}

/// End of `\d+(\.\d+)*` starting at `start`.
fn number_run_end(chars: &[char], start: usize) -> usize {
    let digits = |from: usize| {
        let mut e = from;
        while e < chars.len() && chars[e].is_ascii_digit() {
            e += 1;
        }
        e
    };
    let mut end = digits(start);
    while end + 1 < chars.len() && chars[end] == '.' && chars[end + 1].is_ascii_digit() {
        end = digits(end + 1);
    }
    end
}

fn starts_with_url(s: &str) -> bool {
    let lower = s.get(..8).unwrap_or(s).to_ascii_lowercase();
    URL_PREFIXES.iter().any(|p| lower.starts_with(p)) && s.len() > 4
}

/// Splits trailing sentence punctuation off a URL token.
fn split_url(token: &str) -> (&str, &str) {
    let url = token.trim_end_matches(['.', ',', ';', ':', '!', '?', ')', ']', '}', '"', '\'']);
    (url, &token[url.len()..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn retweet_example() {
        let p = decompose(
            "RT @Lubchansky: good to know rich people have always been dumb as shit https://t.co/otdmH0wquk",
            Language::En,
        );
        assert_eq!(p.cleaned_text, "good to know rich people have always been dumb as shit");
        assert_eq!(p.mentions, ["@Lubchansky"]);
        assert_eq!(p.urls, ["https://t.co/otdmH0wquk"]);
        assert_eq!(p.reserved, ["RT"]);
        assert!(p.hashtags.is_empty() && p.emojis.is_empty() && p.numbers.is_empty());
    }

    #[test]
    fn mention_example() {
        let p = decompose("@HermesCxbin turn that shit off", Language::En);
        assert_eq!(p.cleaned_text, "turn that shit off");
        assert_eq!(p.mentions, ["@HermesCxbin"]);
    }

    #[test]
    fn empty_input() {
        assert_eq!(decompose("", Language::En), TweetParts::default());
        assert_eq!(decompose("   ", Language::Hi), TweetParts::default());
    }

    #[test]
    fn numbers_hashtags_emojis_smileys() {
        let p = decompose(
            "I can’t get the 14 days free trial :) #PlayStation 🐼😅 ranked 2nd, 3.5 stars!",
            Language::En,
        );
        assert_eq!(p.numbers, ["14", "3.5"]);
        assert_eq!(p.hashtags, ["PlayStation"]);
        assert_eq!(p.segmented_hashtags, [vec!["play".to_string(), "station".to_string()]]);
        assert_eq!(p.emojis, ["🐼", "😅"]);
        assert_eq!(p.smileys, [":)"]);
        assert_eq!(p.cleaned_text, "I can’t get the days free trial ranked 2nd, stars!");
    }

    #[test]
    fn emoji_glued_to_words() {
        let p = decompose("love🐼you", Language::De);
        assert_eq!(p.cleaned_text, "love you");
        assert_eq!(p.emojis, ["🐼"]);
    }

    #[test]
    fn hindi_splits_on_separators() {
        let p = decompose("नमस्ते,दोस्तों;आज :) RT: #भारत https://x.co/a 42", Language::Hi);
        assert_eq!(p.cleaned_text, "नमस्ते दोस्तों आज");
        assert_eq!(p.smileys, [":)"]);
        assert_eq!(p.reserved, ["RT"]);
        assert_eq!(p.hashtags, ["भारत"]);
        assert_eq!(p.segmented_hashtags, [vec!["भारत".to_string()]]);
        assert_eq!(p.urls, ["https://x.co/a"]);
        assert_eq!(p.numbers, ["42"]);
    }

    #[test]
    fn lexicon_segmentation_used() {
        let lex = SegmenterLexicon::from_counts([("world", 100u64), ("cup", 80)]);
        let pre = Preprocessor::default().with_lexicon(Language::En, lex);
        let p = pre.decompose("go #worldcup", Language::En);
        assert_eq!(p.segmented_hashtags, [vec!["world".to_string(), "cup".to_string()]]);
    }

    fn tweetish() -> impl Strategy<Value = String> {
        let atoms = prop_oneof![
            "[a-zA-Z]{1,6}",
            "[0-9]{1,3}",
            Just("@".to_string()),
            Just("#".to_string()),
            Just(":".to_string()),
            Just(".".to_string()),
            Just(",".to_string()),
            Just(" ".to_string()),
            Just("  ".to_string()),
            Just("🐼".to_string()),
            Just("👍🏽".to_string()),
            Just("RT".to_string()),
            Just(":)".to_string()),
            Just(":D".to_string()),
            Just("https://t.co/x".to_string()),
            Just("www.a.de".to_string()),
            Just("नमस्ते".to_string()),
            Just("_".to_string()),
        ];
        proptest::collection::vec(atoms, 0..25).prop_map(|v| v.concat())
    }

    fn has_emoji(s: &str) -> bool {
        s.chars().any(emoji::is_emoji_codepoint)
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(text in tweetish(), hi in any::<bool>()) {
            let lang = if hi { Language::Hi } else { Language::En };
            let once = decompose(&text, lang);
            let twice = decompose(&once.cleaned_text, lang);
            prop_assert_eq!(&twice.cleaned_text, &once.cleaned_text);
            prop_assert!(twice.mentions.is_empty() && twice.hashtags.is_empty());
            prop_assert!(twice.urls.is_empty() && twice.reserved.is_empty());
            prop_assert!(twice.emojis.is_empty() && twice.numbers.is_empty());
        }

        #[test]
        fn cleaned_text_is_free_of_entities(text in tweetish()) {
            let p = decompose(&text, Language::En);
            prop_assert!(!has_emoji(&p.cleaned_text));
            for token in p.cleaned_text.split(' ') {
                prop_assert!(!p.reserved.iter().any(|r| r == token));
                prop_assert!(!p.mentions.iter().any(|m| m == token));
                prop_assert!(!URL_PREFIXES.iter().any(|u| token.starts_with(u)));
            }
            for (tag, seg) in p.hashtags.iter().zip(&p.segmented_hashtags) {
                prop_assert_eq!(seg.concat(), tag.to_lowercase());
            }
        }
    }
}
