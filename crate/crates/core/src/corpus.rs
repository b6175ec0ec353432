//! Seeded generator of phonemized sentences with one emphasis target each.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phonology::{Phoneme, Stress, Symbol, Utterance, Word};

/// Orthography and ARPAbet pronunciation; a trailing 1/2/0 marks vowel stress.
const CONTENT: &[(&str, &str)] = &[
    ("always", "AO1 L W EY2 Z"),
    ("answer", "AE1 N S ER0"),
    ("garden", "G AA1 R D AH0 N"),
    ("morning", "M AO1 R N IH0 NG"),
    ("people", "P IY1 P AH0 L"),
    ("travel", "T R AE1 V AH0 L"),
    ("village", "V IH1 L AH0 JH"),
    ("window", "W IH1 N D OW0"),
    ("yellow", "Y EH1 L OW0"),
    ("music", "M Y UW1 Z IH0 K"),
    ("river", "R IH1 V ER0"),
    ("summer", "S AH1 M ER0"),
    ("table", "T EY1 B AH0 L"),
    ("letter", "L EH1 T ER0"),
    ("doctor", "D AA1 K T ER0"),
    ("kitchen", "K IH1 CH AH0 N"),
    ("mountain", "M AW1 N T AH0 N"),
    ("teacher", "T IY1 CH ER0"),
    ("remember", "R IH0 M EH1 M B ER0"),
    ("forget", "F ER0 G EH1 T"),
    ("believe", "B IH0 L IY1 V"),
    ("decide", "D IH0 S AY1 D"),
    ("enjoy", "EH0 N JH OY1"),
    ("explain", "IH0 K S P L EY1 N"),
    ("follow", "F AA1 L OW0"),
    ("carry", "K EH1 R IY0"),
    ("open", "OW1 P AH0 N"),
    ("visit", "V IH1 Z IH0 T"),
    ("quickly", "K W IH1 K L IY0"),
    ("never", "N EH1 V ER0"),
    ("really", "R IH1 L IY0"),
    ("often", "AO1 F AH0 N"),
    ("quiet", "K W AY1 AH0 T"),
    ("happy", "HH AE1 P IY0"),
    ("heavy", "HH EH1 V IY0"),
    ("easy", "IY1 Z IY0"),
    ("little", "L IH1 T AH0 L"),
    ("early", "ER1 L IY0"),
    ("green", "G R IY1 N"),
    ("house", "HH AW1 S"),
    ("road", "R OW1 D"),
    ("bread", "B R EH1 D"),
    ("night", "N AY1 T"),
    ("friend", "F R EH1 N D"),
    ("walk", "W AO1 K"),
    ("think", "TH IH1 NG K"),
    ("names", "N EY1 M Z"),
    ("boat", "B OW1 T"),
    ("school", "S K UW1 L"),
    ("voice", "V OY1 S"),
];

const FUNCTION: &[(&str, &str)] = &[
    ("the", "DH AH0"),
    ("a", "AH0"),
    ("to", "T UW0"),
    ("of", "AH0 V"),
    ("and", "AH0 N D"),
    ("in", "IH0 N"),
    ("it", "IH0 T"),
    ("is", "IH0 Z"),
    ("was", "W AH0 Z"),
    ("we", "W IY0"),
    ("she", "SH IY0"),
    ("they", "DH EY0"),
    ("at", "AE0 T"),
    ("for", "F ER0"),
    ("with", "W IH0 DH"),
    ("our", "AW0 ER0"),
];

fn pronounce(arpabet: &str) -> Result<Vec<Phoneme>> {
    arpabet
        .split_whitespace()
        .map(|token| {
            let (name, stress) = match token.as_bytes().last() {
                Some(b'1') => (&token[..token.len() - 1], Stress::Primary),
                Some(b'2') => (&token[..token.len() - 1], Stress::Secondary),
                Some(b'0') => (&token[..token.len() - 1], Stress::None),
                _ => (token, Stress::None),
            };
            let symbol = Symbol::parse(name).ok_or_else(|| Error::invalid("lexicon", format!("unknown symbol {name}")))?;
            Phoneme::new(symbol, stress).ok_or_else(|| Error::invalid("lexicon", format!("stress on {name}")))
        })
        .collect()
}

fn push_word(phonemes: &mut Vec<Phoneme>, orthography: &str, arpabet: &str) -> Result<Word> {
    let start = phonemes.len();
    let ps = pronounce(arpabet)?;
    let stressed = ps
        .iter()
        .position(|p| p.stress == Stress::Primary)
        .or_else(|| ps.iter().position(Phoneme::is_vowel))
        .map(|i| start + i);
    phonemes.extend(ps);
    Ok(Word {
        phoneme_range: start..phonemes.len(),
        orthography: orthography.to_string(),
        stressed_vowel: stressed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub min_words: usize,
    pub max_words: usize,
    /// Probability that a slot holds a content word.
    pub content_percent: u32,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_words: 4,
            max_words: 10,
            content_percent: 60,
        }
    }
}

pub fn generate_corpus(n: usize, seed: u64) -> Result<Vec<Utterance>> {
    generate_corpus_with(n, seed, &CorpusConfig::default())
}

/// Random sentences of lexicon words, each with at least two content words
/// and a content-word emphasis target. Identical seeds give identical output.
pub fn generate_corpus_with(n: usize, seed: u64, config: &CorpusConfig) -> Result<Vec<Utterance>> {
    if config.min_words < 2 || config.min_words > config.max_words || config.content_percent > 100 {
        return Err(Error::invalid("corpus config", format!("{config:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(config.min_words..=config.max_words);
            let mut entries: Vec<(&str, &str, bool)> = (0..len)
                .map(|_| {
                    if rng.random_range(0..100) < config.content_percent {
                        let (o, p) = *CONTENT.choose(&mut rng).expect("lexicon");
                        (o, p, true)
                    } else {
                        let (o, p) = *FUNCTION.choose(&mut rng).expect("lexicon");
                        (o, p, false)
                    }
                })
                .collect();
            while entries.iter().filter(|e| e.2).count() < 2 {
                let slot = rng.random_range(0..len);
                let (o, p) = *CONTENT.choose(&mut rng).expect("lexicon");
                entries[slot] = (o, p, true);
            }
            let content: Vec<usize> = (0..len).filter(|&i| entries[i].2).collect();
            let target = *content.choose(&mut rng).expect("two content words");

            let mut phonemes = Vec::new();
            let mut words = Vec::with_capacity(len);
            for (orthography, arpabet, _) in entries {
                words.push(push_word(&mut phonemes, orthography, arpabet)?);
            }
            Utterance::new(phonemes, words, Some(target))
        })
        .collect()
}

/// "it is always easy to forget names", emphasis on "forget".
pub fn fixture_sentence() -> Utterance {
    let words = ["it", "is", "always", "easy", "to", "forget", "names"];
    let mut phonemes = Vec::new();
    let mut out = Vec::new();
    for w in words {
        let (_, arpabet) = CONTENT
            .iter()
            .chain(FUNCTION)
            .find(|(o, _)| *o == w)
            .expect("fixture words are in the lexicon");
        out.push(push_word(&mut phonemes, w, arpabet).expect("lexicon is valid"));
    }
    Utterance::new(phonemes, out, Some(5)).expect("fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicon_is_valid() {
        for (o, p) in CONTENT {
            let ps = pronounce(p).unwrap();
            assert!(ps.iter().any(|x| x.stress == Stress::Primary), "{o}");
        }
        for (o, p) in FUNCTION {
            let ps = pronounce(p).unwrap();
            assert!(ps.iter().all(|x| x.stress != Stress::Primary), "{o}");
        }
    }

    #[test]
    fn deterministic_and_in_bounds() {
        let a = generate_corpus(40, 7).unwrap();
        assert_eq!(a, generate_corpus(40, 7).unwrap());
        assert_ne!(a, generate_corpus(40, 8).unwrap());
        for u in &a {
            assert!((4..=10).contains(&u.n_words()));
            let t = u.emphasis_target().unwrap();
            assert!(u.is_content_word(t));
            assert!((0..u.n_words()).filter(|&w| u.is_content_word(w)).count() >= 2);
        }
    }

    #[test]
    fn fixture_targets_forget() {
        let u = fixture_sentence();
        assert_eq!(u.orthography()[5], "forget");
        assert!(u.is_content_word(5));
        assert!(!u.is_content_word(0));
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = CorpusConfig {
            min_words: 5,
            max_words: 3,
            content_percent: 50,
        };
        assert!(generate_corpus_with(1, 0, &cfg).is_err());
    }
}
