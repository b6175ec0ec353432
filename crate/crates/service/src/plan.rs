//! Listening-test plans and their blinded stimulus identities.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ddemph_core::evalstats::TestType;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSpec {
    pub system: String,
    /// WAV path, relative paths resolved against the plan's directory.
    pub wav: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenSpec {
    pub id: String,
    pub utterance_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub words: Vec<String>,
    pub stimuli: Vec<StimulusSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_word: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestPlan {
    pub test_type: TestType,
    pub seed: u64,
    pub screens: Vec<ScreenSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stimulus {
    pub id: String,
    pub system: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Screen {
    pub id: String,
    pub utterance_id: String,
    pub words: Vec<String>,
    pub stimuli: Vec<Stimulus>,
    pub correct_word: Option<usize>,
}

/// A validated plan with server-side stimulus ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedPlan {
    pub test_type: TestType,
    pub seed: u64,
    pub screens: Vec<Screen>,
    stimuli: BTreeMap<String, (usize, usize)>,
}

fn bad(reason: impl Into<String>) -> ServiceError {
    ServiceError::InvalidPlan(reason.into())
}

impl TestPlan {
    pub fn from_json(text: &str) -> Result<TestPlan, ServiceError> {
        serde_json::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.screens.is_empty() {
            return Err(bad("plan has no screens"));
        }
        let mut ids = BTreeSet::new();
        for s in &self.screens {
            if !ids.insert(&s.id) {
                return Err(bad(format!("duplicate screen id {:?}", s.id)));
            }
            let systems: BTreeSet<&String> = s.stimuli.iter().map(|x| &x.system).collect();
            if systems.len() != s.stimuli.len() {
                return Err(bad(format!("screen {:?} repeats a system", s.id)));
            }
            let count_ok = match self.test_type {
                TestType::Mushra => s.stimuli.len() >= 2,
                TestType::Preference => s.stimuli.len() == 2,
                TestType::Identify => s.stimuli.len() == 1,
            };
            if !count_ok {
                return Err(bad(format!(
                    "screen {:?} has {} stimuli, wrong for a {} test",
                    s.id,
                    s.stimuli.len(),
                    self.test_type.name()
                )));
            }
            match (self.test_type, s.correct_word) {
                (TestType::Identify, Some(w)) if w < s.words.len() => {}
                (TestType::Identify, _) => {
                    return Err(bad(format!("identify screen {:?} needs words and a correct_word among them", s.id)))
                }
                (_, Some(_)) => return Err(bad(format!("screen {:?}: correct_word only applies to identify", s.id))),
                (_, None) => {}
            }
        }
        Ok(())
    }

    /// Validates, checks that every stimulus file exists, and assigns
    /// random stimulus ids drawn from the plan seed.
    pub fn load(&self, base_dir: &Path) -> Result<LoadedPlan, ServiceError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut stimuli = BTreeMap::new();
        let mut screens = Vec::with_capacity(self.screens.len());
        for (si, s) in self.screens.iter().enumerate() {
            let mut out = Vec::with_capacity(s.stimuli.len());
            for (k, st) in s.stimuli.iter().enumerate() {
                let path = base_dir.join(&st.wav);
                if !path.is_file() {
                    return Err(ServiceError::MissingStimulus(path.display().to_string()));
                }
                let id = loop {
                    let candidate = format!("{:016x}", rng.random::<u64>());
                    if !stimuli.contains_key(&candidate) {
                        break candidate;
                    }
                };
                stimuli.insert(id.clone(), (si, k));
                out.push(Stimulus {
                    id,
                    system: st.system.clone(),
                    path,
                });
            }
            screens.push(Screen {
                id: s.id.clone(),
                utterance_id: s.utterance_id.clone(),
                words: s.words.clone(),
                stimuli: out,
                correct_word: s.correct_word,
            });
        }
        Ok(LoadedPlan {
            test_type: self.test_type,
            seed: self.seed,
            screens,
            stimuli,
        })
    }
}

fn listener_seed(plan_seed: u64, listener: &str, salt: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(plan_seed.to_le_bytes());
    h.update(salt.as_bytes());
    h.update([0]);
    h.update(listener.as_bytes());
    h.finalize().into()
}

impl LoadedPlan {
    pub fn stimulus(&self, id: &str) -> Option<&Stimulus> {
        self.stimuli.get(id).map(|&(s, k)| &self.screens[s].stimuli[k])
    }

    pub fn screen_by_id(&self, id: &str) -> Option<&Screen> {
        self.screens.iter().find(|s| s.id == id)
    }

    pub fn session_id(&self, listener: &str) -> String {
        hex::encode(&listener_seed(self.seed, listener, "session")[..12])
    }

    /// Per-listener screen order.
    pub fn screen_order(&self, listener: &str) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.screens.len()).collect();
        order.shuffle(&mut ChaCha8Rng::from_seed(listener_seed(self.seed, listener, "screens")));
        order
    }

    /// Per-listener stimulus order on one screen.
    pub fn stimulus_order(&self, listener: &str, screen: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.screens[screen].stimuli.len()).collect();
        let salt = format!("stimuli/{}", self.screens[screen].id);
        order.shuffle(&mut ChaCha8Rng::from_seed(listener_seed(self.seed, listener, &salt)));
        order
    }
}
