//! Seeded synthetic tweets with planted lexical signals: profanity tokens
//! mark PRFN, slur placeholders mark HATE and threat phrases mark OFFN.
//! Hashtags, emojis, mentions and URLs are sprinkled over every class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encode::EmojiLexicon;
use crate::error::Result;
use crate::ingest::{Corpus, CorpusLanguage, FineLabel, Language, SplitTag, TweetRecord};
use crate::preprocess::segment::SegmenterLexicon;

pub const PROFANITY: &[&str] = &["damn", "crap", "bloody", "frick", "shite", "bollocks"];
pub const SLURS: &[&str] = &["slura", "slurb", "slurc", "slurd"];
pub const THREATS: &[&str] = &[
    "i will hurt you",
    "watch your back",
    "you will regret this",
    "coming for you",
    "you are finished",
];

const NEUTRAL_EN: &[&str] = &[
    "morning", "coffee", "match", "weekend", "music", "train", "rain", "city", "book", "garden", "friends", "dinner",
    "movie", "season", "team", "market", "river", "walk", "school", "office", "phone", "window", "summer", "news",
    "game", "party", "holiday", "street", "bridge", "pizza", "concert", "family", "beach", "road", "story", "lunch",
    "today", "tomorrow", "great", "lovely", "quiet", "busy", "early", "late", "happy", "long", "short", "new",
];
const NEUTRAL_DE: &[&str] = &[
    "morgen", "kaffee", "spiel", "wochenende", "musik", "zug", "regen", "stadt", "buch", "garten", "freunde",
    "abendessen", "film", "saison", "mannschaft", "markt", "fluss", "spaziergang", "schule", "buero", "handy",
    "fenster", "sommer", "nachrichten", "heute", "schoen", "ruhig", "frueh", "spaet", "neu", "lang", "kurz",
];
const NEUTRAL_HI: &[&str] = &[
    "सुबह", "चाय", "मैच", "छुट्टी", "संगीत", "ट्रेन", "बारिश", "शहर", "किताब", "बगीचा", "दोस्त", "खाना", "फिल्म",
    "मौसम", "टीम", "बाजार", "नदी", "स्कूल", "दफ्तर", "फोन", "गर्मी", "खबर", "आज", "कल", "अच्छा", "नया",
];
const HASHTAGS: &[&str] = &[
    "#MondayMotivation", "#goodmorning", "#weekendvibes", "#matchday", "#rainyday", "#booklover", "#citylife",
    "#summertime",
];
pub const EMOJIS: &[&str] = &["😀", "😂", "🙏", "🔥", "⚽", "☕", "🌧", "🎉", "❤", "👍"];

fn neutral(language: Language) -> &'static [&'static str] {
    match language {
        Language::En => NEUTRAL_EN,
        Language::De => NEUTRAL_DE,
        Language::Hi => NEUTRAL_HI,
    }
}

/// Class mix: 40% NONE and 20% each of HATE, OFFN, PRFN.
fn fine_label(i: usize) -> FineLabel {
    match i % 5 {
        0 | 1 => FineLabel::None,
        2 => FineLabel::Hate,
        3 => FineLabel::Offn,
        _ => FineLabel::Prfn,
    }
}

fn tweet(language: Language, label: FineLabel, rng: &mut ChaCha8Rng) -> String {
    let vocab = neutral(language);
    let n = rng.gen_range(5..=10);
    let mut words: Vec<String> = (0..n).map(|_| vocab.choose(rng).unwrap().to_string()).collect();
    let signal = match label {
        FineLabel::None => None,
        FineLabel::Hate => Some(format!("{} people", SLURS.choose(rng).unwrap())),
        FineLabel::Offn => Some(THREATS.choose(rng).unwrap().to_string()),
        FineLabel::Prfn => Some(PROFANITY.choose(rng).unwrap().to_string()),
    };
    if let Some(s) = signal {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, s);
    }
    if rng.gen_bool(0.3) {
        words.insert(0, format!("@user{}", rng.gen_range(1..50)));
    }
    if rng.gen_bool(0.4) {
        words.push(HASHTAGS.choose(rng).unwrap().to_string());
    }
    if rng.gen_bool(0.4) {
        words.push(EMOJIS.choose(rng).unwrap().to_string());
    }
    if rng.gen_bool(0.2) {
        words.push(format!("https://t.co/{:08x}", rng.gen::<u32>()));
    }
    words.join(" ")
}

/// `n` labelled tweets in `language`, identical for identical arguments.
pub fn generate(n: usize, language: Language, seed: u64) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ language as u64);
    let records = (0..n)
        .map(|i| {
            let fine = fine_label(i);
            TweetRecord {
                id: format!("{}-syn-{i:04}", language.as_str()),
                text: tweet(language, fine, &mut rng),
                language,
                task1: Some(fine.coarse()),
                task2: Some(fine),
            }
        })
        .collect();
    Corpus::new(records, CorpusLanguage::from(language), SplitTag::Train)
}

/// Seed of the bundled 600-tweet fixture.
pub const FIXTURE_SEED: u64 = 2020;
pub const FIXTURE_SIZE: usize = 600;

pub fn fixture_corpus() -> Result<Corpus> {
    generate(FIXTURE_SIZE, Language::En, FIXTURE_SEED)
}

/// Unigram counts covering the hashtag vocabulary.
pub fn segmenter_lexicon() -> SegmenterLexicon {
    let words = [
        ("monday", 40),
        ("motivation", 30),
        ("good", 120),
        ("morning", 90),
        ("weekend", 50),
        ("vibes", 20),
        ("match", 35),
        ("day", 150),
        ("rainy", 15),
        ("book", 45),
        ("lover", 12),
        ("city", 60),
        ("life", 80),
        ("summer", 40),
        ("time", 140),
    ];
    SegmenterLexicon::from_counts(words.iter().map(|(w, c)| (w.to_string(), *c as u64)))
}

/// Deterministic unit-scale vectors for [`EMOJIS`].
pub fn emoji_lexicon(dim: usize, seed: u64) -> EmojiLexicon {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lexicon = EmojiLexicon::new(dim);
    for e in EMOJIS {
        let v = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        lexicon.insert(*e, v).expect("dimension fixed above");
    }
    lexicon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{CoarseLabel, Task};
    use crate::preprocess::Preprocessor;

    #[test]
    fn deterministic_and_balanced() {
        let a = fixture_corpus().unwrap();
        assert_eq!(a.records(), fixture_corpus().unwrap().records());
        assert_eq!(a.len(), 600);
        assert_eq!(a.label_counts(Task::Task2), [240, 120, 120, 120]);
        assert_eq!(a.label_counts(Task::Task1), [240, 360]);
    }

    #[test]
    fn signals_survive_preprocessing() {
        let pre = Preprocessor::default();
        for r in fixture_corpus().unwrap().records() {
            let text = pre.decompose(&r.text, r.language).cleaned_text;
            let has = |list: &[&str]| list.iter().any(|w| text.contains(w));
            assert_eq!(has(SLURS), r.task2 == Some(FineLabel::Hate), "{}", r.text);
            assert_eq!(has(THREATS), r.task2 == Some(FineLabel::Offn), "{}", r.text);
            assert_eq!(has(PROFANITY), r.task2 == Some(FineLabel::Prfn), "{}", r.text);
            assert_eq!(r.task1 == Some(CoarseLabel::Not), r.task2 == Some(FineLabel::None));
        }
    }

    #[test]
    fn other_languages() {
        for lang in [Language::De, Language::Hi] {
            let c = generate(50, lang, 1).unwrap();
            assert!(c.records().iter().all(|r| r.language == lang));
        }
    }
}
