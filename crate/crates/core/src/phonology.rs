//! Phonemized utterances: inventory, words, stress and emphasis flags.
//!
//! Inputs arrive already phonemized with ARPAbet-style symbols. Pauses are
//! pause-class phonemes grouped into pseudo-words of their own, so every
//! phoneme index is covered by exactly one word.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhonemeClass {
    Vowel,
    Stop,
    Affricate,
    Fricative,
    Nasal,
    Liquid,
    Glide,
    Pause,
}

impl PhonemeClass {
    pub const ALL: [PhonemeClass; 8] = [
        PhonemeClass::Vowel,
        PhonemeClass::Stop,
        PhonemeClass::Affricate,
        PhonemeClass::Fricative,
        PhonemeClass::Nasal,
        PhonemeClass::Liquid,
        PhonemeClass::Glide,
        PhonemeClass::Pause,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhonemeClass::Vowel => "vowel",
            PhonemeClass::Stop => "stop",
            PhonemeClass::Affricate => "affricate",
            PhonemeClass::Fricative => "fricative",
            PhonemeClass::Nasal => "nasal",
            PhonemeClass::Liquid => "liquid",
            PhonemeClass::Glide => "glide",
            PhonemeClass::Pause => "pause",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stress {
    #[default]
    None,
    Primary,
    Secondary,
}

impl Stress {
    pub fn is_none(&self) -> bool {
        *self == Stress::None
    }
}

struct Entry {
    name: &'static str,
    class: PhonemeClass,
    voiced: bool,
}

const fn e(name: &'static str, class: PhonemeClass, voiced: bool) -> Entry {
    Entry {
        name,
        class,
        voiced,
    }
}

use PhonemeClass::*;

static INVENTORY: [Entry; 41] = [
    e("AA", Vowel, true),
    e("AE", Vowel, true),
    e("AH", Vowel, true),
    e("AO", Vowel, true),
    e("AW", Vowel, true),
    e("AY", Vowel, true),
    e("EH", Vowel, true),
    e("ER", Vowel, true),
    e("EY", Vowel, true),
    e("IH", Vowel, true),
    e("IY", Vowel, true),
    e("OW", Vowel, true),
    e("OY", Vowel, true),
    e("UH", Vowel, true),
    e("UW", Vowel, true),
    e("P", Stop, false),
    e("B", Stop, true),
    e("T", Stop, false),
    e("D", Stop, true),
    e("K", Stop, false),
    e("G", Stop, true),
    e("CH", Affricate, false),
    e("JH", Affricate, true),
    e("F", Fricative, false),
    e("V", Fricative, true),
    e("TH", Fricative, false),
    e("DH", Fricative, true),
    e("S", Fricative, false),
    e("Z", Fricative, true),
    e("SH", Fricative, false),
    e("ZH", Fricative, true),
    e("HH", Fricative, false),
    e("M", Nasal, true),
    e("N", Nasal, true),
    e("NG", Nasal, true),
    e("L", Liquid, true),
    e("R", Liquid, true),
    e("W", Glide, true),
    e("Y", Glide, true),
    e("pau", Pause, false),
    e("sil", Pause, false),
];

/// A symbol from the built-in inventory.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(u8);

impl Symbol {
    pub fn parse(name: &str) -> Option<Symbol> {
        INVENTORY
            .iter()
            .position(|entry| entry.name == name)
            .map(|i| Symbol(i as u8))
    }

    pub fn name(self) -> &'static str {
        INVENTORY[self.0 as usize].name
    }

    pub fn class(self) -> PhonemeClass {
        INVENTORY[self.0 as usize].class
    }

    pub fn voiced(self) -> bool {
        INVENTORY[self.0 as usize].voiced
    }

    pub fn all() -> impl Iterator<Item = Symbol> {
        (0..INVENTORY.len()).map(|i| Symbol(i as u8))
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        Symbol::parse(&name)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown phoneme symbol {name:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phoneme {
    pub symbol: Symbol,
    pub stress: Stress,
}

impl Phoneme {
    /// Fails when stress is attached to anything but a vowel.
    pub fn new(symbol: Symbol, stress: Stress) -> Option<Phoneme> {
        if stress != Stress::None && symbol.class() != PhonemeClass::Vowel {
            return None;
        }
        Some(Phoneme { symbol, stress })
    }

    pub fn unstressed(symbol: Symbol) -> Phoneme {
        Phoneme {
            symbol,
            stress: Stress::None,
        }
    }

    pub fn class(&self) -> PhonemeClass {
        self.symbol.class()
    }

    pub fn voiced(&self) -> bool {
        self.symbol.voiced()
    }

    pub fn is_vowel(&self) -> bool {
        self.class() == PhonemeClass::Vowel
    }

    pub fn is_pause(&self) -> bool {
        self.class() == PhonemeClass::Pause
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub phoneme_range: Range<usize>,
    pub orthography: String,
    /// Absolute phoneme index of the vowel carrying the word stress.
    pub stressed_vowel: Option<usize>,
}

impl Word {
    pub fn len(&self) -> usize {
        self.phoneme_range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phoneme_range.is_empty()
    }
}

/// A validated phonemized utterance with at most one emphasis target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    phonemes: Vec<Phoneme>,
    words: Vec<Word>,
    emphasis_target: Option<usize>,
}

impl Utterance {
    pub fn new(
        phonemes: Vec<Phoneme>,
        words: Vec<Word>,
        emphasis_target: Option<usize>,
    ) -> Result<Utterance> {
        if words.is_empty() {
            return Err(Error::InvalidUtterance("no words".into()));
        }
        let mut cursor = 0;
        for (wi, word) in words.iter().enumerate() {
            if word.phoneme_range.start != cursor
                || word.phoneme_range.is_empty()
                || word.phoneme_range.end > phonemes.len()
            {
                return Err(Error::WordRanges { word: wi });
            }
            cursor = word.phoneme_range.end;

            let members = &phonemes[word.phoneme_range.clone()];
            let pauses = members.iter().filter(|p| p.is_pause()).count();
            if pauses != 0 && pauses != members.len() {
                return Err(Error::InvalidWord {
                    word: wi,
                    reason: "pause phonemes must form their own pseudo-word".into(),
                });
            }
            let has_vowel = members.iter().any(Phoneme::is_vowel);
            match word.stressed_vowel {
                Some(v) => {
                    if !word.phoneme_range.contains(&v) || !phonemes[v].is_vowel() {
                        return Err(Error::InvalidWord {
                            word: wi,
                            reason: format!("stressed vowel index {v} does not point at a vowel of the word"),
                        });
                    }
                }
                None if has_vowel => {
                    return Err(Error::InvalidWord {
                        word: wi,
                        reason: "word has vowels but no stressed vowel".into(),
                    });
                }
                None => {}
            }
        }
        if cursor != phonemes.len() {
            return Err(Error::WordRanges {
                word: words.len() - 1,
            });
        }
        if let Some(index) = emphasis_target {
            if index >= words.len() {
                return Err(Error::EmphasisOutOfRange {
                    index,
                    n_words: words.len(),
                });
            }
        }
        Ok(Utterance {
            phonemes,
            words,
            emphasis_target,
        })
    }

    pub fn phonemes(&self) -> &[Phoneme] {
        &self.phonemes
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn emphasis_target(&self) -> Option<usize> {
        self.emphasis_target
    }

    pub fn with_emphasis(&self, target: Option<usize>) -> Result<Utterance> {
        Utterance::new(self.phonemes.clone(), self.words.clone(), target)
    }

    pub fn n_phonemes(&self) -> usize {
        self.phonemes.len()
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    /// Index of the word containing phoneme `index`.
    pub fn word_of(&self, index: usize) -> Option<usize> {
        self.words
            .iter()
            .position(|w| w.phoneme_range.contains(&index))
    }

    pub fn is_pause_word(&self, word: usize) -> bool {
        self.words[word]
            .phoneme_range
            .clone()
            .all(|i| self.phonemes[i].is_pause())
    }

    /// Content words carry a primary-stressed vowel.
    pub fn is_content_word(&self, word: usize) -> bool {
        self.words[word]
            .stressed_vowel
            .map(|v| self.phonemes[v].stress == Stress::Primary)
            .unwrap_or(false)
    }

    /// Whether phoneme `index` closes its word.
    pub fn is_word_final(&self, index: usize) -> bool {
        self.words.iter().any(|w| w.phoneme_range.end == index + 1)
    }

    pub fn orthography(&self) -> Vec<String> {
        self.words.iter().map(|w| w.orthography.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        let doc = UtteranceDoc {
            words: self
                .words
                .iter()
                .map(|w| WordDoc {
                    orthography: w.orthography.clone(),
                    phonemes: self.phonemes[w.phoneme_range.clone()]
                        .iter()
                        .map(|p| PhonemeDoc {
                            symbol: p.symbol.name().to_string(),
                            stress: p.stress,
                        })
                        .collect(),
                    stressed_vowel: w.stressed_vowel.map(|v| v - w.phoneme_range.start),
                })
                .collect(),
            emphasis_word_index: self.emphasis_target,
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("utterance serializes");
        text.push('\n');
        text
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtteranceDoc {
    words: Vec<WordDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emphasis_word_index: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WordDoc {
    orthography: String,
    phonemes: Vec<PhonemeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stressed_vowel: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhonemeDoc {
    symbol: String,
    #[serde(default, skip_serializing_if = "Stress::is_none")]
    stress: Stress,
}

/// Parses and validates an utterance document.
pub fn parse_utterance(text: &str) -> Result<Utterance> {
    let doc: UtteranceDoc = serde_json::from_str(text)?;
    let mut phonemes = Vec::new();
    let mut words = Vec::with_capacity(doc.words.len());
    for (wi, word) in doc.words.into_iter().enumerate() {
        if word.phonemes.is_empty() {
            return Err(Error::InvalidWord {
                word: wi,
                reason: "word has no phonemes".into(),
            });
        }
        let start = phonemes.len();
        for (pi, ph) in word.phonemes.iter().enumerate() {
            let symbol = Symbol::parse(&ph.symbol).ok_or_else(|| Error::UnknownSymbol {
                word: wi,
                phoneme: pi,
                symbol: ph.symbol.clone(),
            })?;
            let phoneme = Phoneme::new(symbol, ph.stress).ok_or_else(|| Error::InvalidWord {
                word: wi,
                reason: format!("stress on non-vowel {symbol} at phoneme {pi}"),
            })?;
            phonemes.push(phoneme);
        }
        let end = phonemes.len();
        let stressed_vowel = match word.stressed_vowel {
            Some(local) if local >= end - start => {
                return Err(Error::InvalidWord {
                    word: wi,
                    reason: format!("stressed vowel index {local} outside the word"),
                })
            }
            Some(local) => Some(start + local),
            None => default_stressed_vowel(&phonemes[start..end]).map(|local| start + local),
        };
        words.push(Word {
            phoneme_range: start..end,
            orthography: word.orthography,
            stressed_vowel,
        });
    }
    Utterance::new(phonemes, words, doc.emphasis_word_index)
}

/// First primary-stressed vowel, else the first vowel.
fn default_stressed_vowel(phonemes: &[Phoneme]) -> Option<usize> {
    phonemes
        .iter()
        .position(|p| p.is_vowel() && p.stress == Stress::Primary)
        .or_else(|| phonemes.iter().position(Phoneme::is_vowel))
}

/// Per-phoneme binary emphasis marks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeFlags {
    flags: Vec<bool>,
}

impl PhonemeFlags {
    pub fn new(flags: Vec<bool>) -> PhonemeFlags {
        PhonemeFlags { flags }
    }

    pub fn zeros(len: usize) -> PhonemeFlags {
        PhonemeFlags {
            flags: vec![false; len],
        }
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.flags.iter().map(|&f| f as u8).collect()
    }
}

/// Spreads the word-level emphasis flag onto every phoneme of the target word.
pub fn upsample_flags(utt: &Utterance) -> PhonemeFlags {
    let mut flags = vec![false; utt.n_phonemes()];
    if let Some(target) = utt.emphasis_target() {
        for i in utt.words()[target].phoneme_range.clone() {
            flags[i] = true;
        }
    }
    PhonemeFlags { flags }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(name: &str) -> Symbol {
        Symbol::parse(name).unwrap()
    }

    fn word_json(orth: &str, symbols: &[&str]) -> String {
        let phs: Vec<String> = symbols
            .iter()
            .map(|s| match s.strip_suffix('1') {
                Some(base) => format!(r#"{{"symbol":"{base}","stress":"primary"}}"#),
                None => format!(r#"{{"symbol":"{s}"}}"#),
            })
            .collect();
        format!(r#"{{"orthography":"{orth}","phonemes":[{}]}}"#, phs.join(","))
    }

    #[test]
    fn parses_three_word_document() {
        let text = format!(
            r#"{{"words":[{},{},{}],"emphasis_word_index":2}}"#,
            word_json("it", &["IH", "T"]),
            word_json("is", &["IH", "Z"]),
            word_json("not", &["N", "AA1", "T"]),
        );
        let utt = parse_utterance(&text).unwrap();
        assert_eq!(utt.n_phonemes(), 7);
        assert_eq!(utt.emphasis_target(), Some(2));
        assert_eq!(utt.words()[2].phoneme_range, 4..7);
        assert_eq!(utt.words()[2].stressed_vowel, Some(5));
        assert!(utt.is_content_word(2));
        assert!(!utt.is_content_word(0));
    }

    #[test]
    fn missing_emphasis_field_means_no_target() {
        let text = format!(r#"{{"words":[{}]}}"#, word_json("it", &["IH", "T"]));
        assert_eq!(parse_utterance(&text).unwrap().emphasis_target(), None);
    }

    #[test]
    fn unknown_symbol_reports_location() {
        let text = format!(r#"{{"words":[{}]}}"#, word_json("zz", &["ZZ"]));
        let err = parse_utterance(&text).unwrap_err().to_string();
        assert!(err.contains("unknown symbol at word 0"), "{err}");
    }

    #[test]
    fn emphasis_out_of_range_rejected() {
        let text = format!(
            r#"{{"words":[{}],"emphasis_word_index":1}}"#,
            word_json("it", &["IH", "T"])
        );
        assert!(matches!(
            parse_utterance(&text),
            Err(Error::EmphasisOutOfRange { index: 1, n_words: 1 })
        ));
    }

    #[test]
    fn stress_on_consonant_rejected() {
        let text = r#"{"words":[{"orthography":"t","phonemes":[{"symbol":"T","stress":"primary"}]}]}"#;
        assert!(parse_utterance(text).is_err());
    }

    #[test]
    fn overlapping_ranges_rejected() {
        let phonemes: Vec<_> = ["IH", "T", "IH"].iter().map(|s| Phoneme::unstressed(sym(s))).collect();
        let words = vec![
            Word {
                phoneme_range: 0..2,
                orthography: "it".into(),
                stressed_vowel: Some(0),
            },
            Word {
                phoneme_range: 1..3,
                orthography: "ti".into(),
                stressed_vowel: Some(2),
            },
        ];
        assert!(matches!(
            Utterance::new(phonemes, words, None),
            Err(Error::WordRanges { word: 1 })
        ));
    }

    #[test]
    fn pause_mixed_into_word_rejected() {
        let text = format!(r#"{{"words":[{}]}}"#, word_json("a", &["AH", "pau"]));
        assert!(parse_utterance(&text).is_err());
    }

    #[test]
    fn upsampling_marks_target_word() {
        let text = format!(
            r#"{{"words":[{},{}],"emphasis_word_index":1}}"#,
            word_json("a", &["AH", "T"]),
            word_json("bat", &["B", "AE1", "T"]),
        );
        let utt = parse_utterance(&text).unwrap();
        assert_eq!(upsample_flags(&utt).to_bits(), vec![0, 0, 1, 1, 1]);
        let none = utt.with_emphasis(None).unwrap();
        assert_eq!(upsample_flags(&none).to_bits(), vec![0; 5]);
    }

    #[test]
    fn single_word_full_coverage() {
        let text = format!(
            r#"{{"words":[{}],"emphasis_word_index":0}}"#,
            word_json("stop", &["S", "T", "AA1", "P"]),
        );
        let utt = parse_utterance(&text).unwrap();
        assert_eq!(upsample_flags(&utt).to_bits(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn inventory_symbols_are_unique() {
        let names: std::collections::BTreeSet<_> = Symbol::all().map(Symbol::name).collect();
        assert_eq!(names.len(), Symbol::all().count());
    }
}
