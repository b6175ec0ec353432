//! Sessions, response validation and the append-only response log.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ddemph_core::evalstats::{IdentifiabilityRecord, MushraRecord, PreferenceRecord, TestType};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::plan::LoadedPlan;

/// What a listener submitted for one screen, keyed by blinded stimulus ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Payload {
    Ratings(BTreeMap<String, f64>),
    Choice(String),
    Word(usize),
}

/// One line of the response log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseRecord {
    pub session_id: String,
    pub listener_id: String,
    pub screen_id: String,
    pub payload: Payload,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub listener_id: String,
    pub test_type: TestType,
    pub n_screens: usize,
    pub answered: Vec<usize>,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusView {
    pub id: String,
    pub url: String,
}

/// A screen as shown to a listener: no system labels, no answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenView {
    pub session_id: String,
    pub index: usize,
    pub n_screens: usize,
    pub test_type: TestType,
    pub stimuli: Vec<StimulusView>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub words: Vec<String>,
    pub answered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub session_id: String,
    pub index: usize,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub listener_id: String,
    pub answered: usize,
    pub n_screens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test_type", content = "records", rename_all = "snake_case")]
pub enum ExportRecords {
    Mushra(Vec<MushraRecord>),
    Preference(Vec<PreferenceRecord>),
    Identify(Vec<IdentifiabilityRecord>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Export {
    #[serde(flatten)]
    pub records: ExportRecords,
    /// Listeners left out because their MUSHRA session is incomplete.
    pub excluded: Vec<Exclusion>,
}

impl Export {
    /// One evalstats input document per line.
    pub fn to_jsonl(&self) -> String {
        fn lines<T: Serialize>(rs: &[T]) -> String {
            rs.iter()
                .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
                .collect()
        }
        match &self.records {
            ExportRecords::Mushra(r) => lines(r),
            ExportRecords::Preference(r) => lines(r),
            ExportRecords::Identify(r) => lines(r),
        }
    }
}

#[derive(Default)]
struct State {
    /// session id -> listener id
    sessions: BTreeMap<String, String>,
    /// session id -> answered screen ids
    answered: BTreeMap<String, BTreeSet<String>>,
    records: Vec<ResponseRecord>,
}

pub struct TestService {
    plan: LoadedPlan,
    log_path: PathBuf,
    writer: Mutex<File>,
    state: RwLock<State>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn replay(path: &Path) -> Result<State, ServiceError> {
    let mut state = State::default();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(state),
        Err(e) => return Err(e.into()),
    };
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<ResponseRecord, _> = serde_json::from_str(line);
        let record = match parsed {
            Ok(r) => r,
            // a torn final write was never acknowledged
            Err(_) if !complete && i + 1 == lines.len() => break,
            Err(e) => {
                return Err(ServiceError::CorruptLog {
                    line: i + 1,
                    reason: e.to_string(),
                })
            }
        };
        state
            .sessions
            .insert(record.session_id.clone(), record.listener_id.clone());
        state
            .answered
            .entry(record.session_id.clone())
            .or_default()
            .insert(record.screen_id.clone());
        state.records.push(record);
    }
    Ok(state)
}

impl TestService {
    /// Opens the service over `log_path`, replaying any existing responses.
    pub fn open(plan: LoadedPlan, log_path: &Path) -> Result<TestService, ServiceError> {
        let state = replay(log_path)?;
        if let Ok(bytes) = std::fs::read(log_path) {
            if bytes.last().is_some_and(|&b| b != b'\n') {
                // a torn final write was never acknowledged; cut it off
                let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
                let f = OpenOptions::new().write(true).open(log_path)?;
                f.set_len(keep as u64)?;
                f.sync_all()?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(log_path)?;
        Ok(TestService {
            plan,
            log_path: log_path.to_path_buf(),
            writer: Mutex::new(file),
            state: RwLock::new(state),
        })
    }

    pub fn plan(&self) -> &LoadedPlan {
        &self.plan
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    fn info(&self, state: &State, session_id: &str, listener: &str) -> SessionInfo {
        let order = self.plan.screen_order(listener);
        let done = state.answered.get(session_id);
        let answered: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(_, &s)| done.is_some_and(|d| d.contains(&self.plan.screens[s].id)))
            .map(|(i, _)| i)
            .collect();
        SessionInfo {
            session_id: session_id.to_string(),
            listener_id: listener.to_string(),
            test_type: self.plan.test_type,
            n_screens: order.len(),
            complete: answered.len() == order.len(),
            answered,
        }
    }

    /// Returns the listener's session, creating it on first use.
    pub fn create_session(&self, listener: &str) -> Result<SessionInfo, ServiceError> {
        if listener.is_empty() || listener.len() > 128 || listener.chars().any(char::is_control) {
            return Err(ServiceError::InvalidListener(format!("{listener:?}")));
        }
        for s in &self.plan.screens {
            for st in &s.stimuli {
                if !st.path.is_file() {
                    return Err(ServiceError::MissingStimulus(st.path.display().to_string()));
                }
            }
        }
        let id = self.plan.session_id(listener);
        let mut state = self.state.write();
        state.sessions.entry(id.clone()).or_insert_with(|| listener.to_string());
        Ok(self.info(&state, &id, listener))
    }

    pub fn session(&self, session_id: &str) -> Result<SessionInfo, ServiceError> {
        let state = self.state.read();
        let listener = state
            .sessions
            .get(session_id)
            .ok_or_else(|| ServiceError::UnknownSession(session_id.to_string()))?;
        Ok(self.info(&state, session_id, listener))
    }

    fn locate(&self, state: &State, session_id: &str, index: usize) -> Result<(String, usize), ServiceError> {
        let listener = state
            .sessions
            .get(session_id)
            .ok_or_else(|| ServiceError::UnknownSession(session_id.to_string()))?;
        let order = self.plan.screen_order(listener);
        let screen = *order.get(index).ok_or(ServiceError::UnknownScreen {
            index,
            n_screens: order.len(),
        })?;
        Ok((listener.clone(), screen))
    }

    pub fn screen(&self, session_id: &str, index: usize) -> Result<ScreenView, ServiceError> {
        let state = self.state.read();
        let (listener, s) = self.locate(&state, session_id, index)?;
        let screen = &self.plan.screens[s];
        let stimuli = self
            .plan
            .stimulus_order(&listener, s)
            .into_iter()
            .map(|k| {
                let id = screen.stimuli[k].id.clone();
                StimulusView {
                    url: format!("/audio/{id}.wav"),
                    id,
                }
            })
            .collect();
        Ok(ScreenView {
            session_id: session_id.to_string(),
            index,
            n_screens: self.plan.screens.len(),
            test_type: self.plan.test_type,
            stimuli,
            words: if self.plan.test_type == TestType::Identify {
                screen.words.clone()
            } else {
                Vec::new()
            },
            answered: state
                .answered
                .get(session_id)
                .is_some_and(|d| d.contains(&screen.id)),
        })
    }

    fn check_payload(&self, screen: usize, payload: &Payload) -> Result<(), ServiceError> {
        let s = &self.plan.screens[screen];
        let ids: BTreeSet<&str> = s.stimuli.iter().map(|x| x.id.as_str()).collect();
        let bad = |m: String| Err(ServiceError::InvalidPayload(m));
        match (self.plan.test_type, payload) {
            (TestType::Mushra, Payload::Ratings(r)) => {
                let rated: BTreeSet<&str> = r.keys().map(String::as_str).collect();
                if rated != ids {
                    return bad(format!("ratings must cover exactly the {} stimuli of the screen", ids.len()));
                }
                if let Some((k, v)) = r.iter().find(|(_, v)| !(0.0..=100.0).contains(*v)) {
                    return bad(format!("rating {v} for {k} outside [0, 100]"));
                }
                Ok(())
            }
            (TestType::Preference, Payload::Choice(c)) if ids.contains(c.as_str()) => Ok(()),
            (TestType::Preference, Payload::Choice(c)) => bad(format!("{c:?} is not a stimulus of this screen")),
            (TestType::Identify, Payload::Word(w)) if *w < s.words.len() => Ok(()),
            (TestType::Identify, Payload::Word(w)) => bad(format!("word {w} outside [0, {})", s.words.len())),
            (t, _) => bad(format!("payload kind does not match a {} screen", t.name())),
        }
    }

    /// Validates and durably appends a response; returns only after the
    /// log line has been synced to disk.
    pub fn record_response(&self, session_id: &str, index: usize, payload: Payload) -> Result<Ack, ServiceError> {
        let mut writer = self.writer.lock();
        let (listener, screen) = {
            let state = self.state.read();
            let (listener, screen) = self.locate(&state, session_id, index)?;
            let done = state.answered.get(session_id).map_or(0, BTreeSet::len);
            if done == self.plan.screens.len() {
                return Err(ServiceError::SessionClosed(session_id.to_string()));
            }
            if state
                .answered
                .get(session_id)
                .is_some_and(|d| d.contains(&self.plan.screens[screen].id))
            {
                return Err(ServiceError::Duplicate {
                    session: session_id.to_string(),
                    screen: index,
                });
            }
            (listener, screen)
        };
        self.check_payload(screen, &payload)?;
        let record = ResponseRecord {
            session_id: session_id.to_string(),
            listener_id: listener,
            screen_id: self.plan.screens[screen].id.clone(),
            payload,
            timestamp_ms: now_ms(),
        };
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        writer.write_all(line.as_bytes())?;
        writer.sync_data()?;

        let mut state = self.state.write();
        let done = state.answered.entry(session_id.to_string()).or_default();
        done.insert(record.screen_id.clone());
        let remaining = self.plan.screens.len() - done.len();
        state.records.push(record);
        Ok(Ack {
            session_id: session_id.to_string(),
            index,
            remaining,
        })
    }

    pub fn records(&self) -> Vec<ResponseRecord> {
        self.state.read().records.clone()
    }

    /// Converts the log into evalstats inputs with system labels restored.
    pub fn export(&self, test_type: TestType) -> Result<Export, ServiceError> {
        if test_type != self.plan.test_type {
            return Err(ServiceError::WrongTestType(test_type.name().to_string()));
        }
        let state = self.state.read();
        let n_screens = self.plan.screens.len();
        let mut excluded = Vec::new();
        let mut incomplete = BTreeSet::new();
        if test_type == TestType::Mushra {
            for (session, listener) in &state.sessions {
                let answered = state.answered.get(session).map_or(0, BTreeSet::len);
                if answered < n_screens {
                    incomplete.insert(session.clone());
                    excluded.push(Exclusion {
                        listener_id: listener.clone(),
                        answered,
                        n_screens,
                    });
                }
            }
        }
        let kept = state.records.iter().filter(|r| !incomplete.contains(&r.session_id));
        let system_of = |id: &str| -> Result<String, ServiceError> {
            self.plan
                .stimulus(id)
                .map(|s| s.system.clone())
                .ok_or_else(|| ServiceError::CorruptLog {
                    line: 0,
                    reason: format!("stimulus {id} is not in the plan"),
                })
        };
        let screen_of = |r: &ResponseRecord| {
            self.plan.screen_by_id(&r.screen_id).ok_or_else(|| ServiceError::CorruptLog {
                line: 0,
                reason: format!("screen {} is not in the plan", r.screen_id),
            })
        };
        let records = match test_type {
            TestType::Mushra => ExportRecords::Mushra(
                kept.map(|r| {
                    let Payload::Ratings(ratings) = &r.payload else {
                        return Err(ServiceError::CorruptLog { line: 0, reason: "non-rating payload".into() });
                    };
                    Ok(MushraRecord {
                        listener_id: r.listener_id.clone(),
                        screen: r.screen_id.clone(),
                        ratings: ratings
                            .iter()
                            .map(|(id, v)| Ok((system_of(id)?, *v)))
                            .collect::<Result<_, ServiceError>>()?,
                    })
                })
                .collect::<Result<_, _>>()?,
            ),
            TestType::Preference => ExportRecords::Preference(
                kept.map(|r| {
                    let Payload::Choice(choice) = &r.payload else {
                        return Err(ServiceError::CorruptLog { line: 0, reason: "non-choice payload".into() });
                    };
                    let screen = screen_of(r)?;
                    Ok(PreferenceRecord {
                        listener_id: r.listener_id.clone(),
                        screen: r.screen_id.clone(),
                        system_a: screen.stimuli[0].system.clone(),
                        system_b: screen.stimuli[1].system.clone(),
                        chosen: system_of(choice)?,
                    })
                })
                .collect::<Result<_, _>>()?,
            ),
            TestType::Identify => ExportRecords::Identify(
                kept.map(|r| {
                    let Payload::Word(word) = r.payload else {
                        return Err(ServiceError::CorruptLog { line: 0, reason: "non-word payload".into() });
                    };
                    let screen = screen_of(r)?;
                    Ok(IdentifiabilityRecord {
                        utterance_id: screen.utterance_id.clone(),
                        system: screen.stimuli[0].system.clone(),
                        true_word: screen.correct_word.expect("identify screens carry the answer"),
                        chosen_word: word,
                        n_words: screen.words.len(),
                        listener_id: Some(r.listener_id.clone()),
                    })
                })
                .collect::<Result<_, _>>()?,
            ),
        };
        Ok(Export { records, excluded })
    }
}
