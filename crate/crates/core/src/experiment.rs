//! Objective identifiability experiment: render each utterance under every
//! mode, measure it, and check whether the emphasis detector finds the target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{identify_emphasis, word_report, Identification, WordAcousticReport};
use crate::duration::DurationModel;
use crate::error::{Error, Result};
use crate::evalstats::{identifiability, IdentifiabilityRecord, IdentifiabilitySummary};
use crate::phonology::Utterance;
use crate::pipeline::{synthesize, Mode, SynthesisConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub utterance: usize,
    pub mode: Mode,
    pub target: usize,
    pub identification: Identification,
    pub target_duration_ratio: f64,
    pub injected_correlates: usize,
    pub target_pre_stress_silence_ms: f64,
    pub target_f0_range_delta_hz: f64,
}

impl Trial {
    pub fn correct(&self) -> bool {
        self.identification.detected && self.identification.word_index == self.target
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub not_detected: usize,
    pub mean_target_duration_ratio: f64,
    pub mean_target_pre_stress_silence_ms: f64,
    pub mean_target_f0_range_delta_hz: f64,
    pub injected_correlates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Expected accuracy of guessing uniformly among content words.
    pub chance: f64,
    pub modes: Vec<ModeSummary>,
    pub identifiability: IdentifiabilitySummary,
    pub trials: Vec<Trial>,
}

impl ExperimentReport {
    pub fn mode(&self, mode: Mode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

fn run_utterance(
    index: usize,
    utt: &Utterance,
    model: &DurationModel,
    modes: &[Mode],
    base: &SynthesisConfig,
) -> Result<Vec<Trial>> {
    let target = utt
        .emphasis_target()
        .ok_or_else(|| Error::invalid("experiment", format!("utterance {index} has no emphasis target")))?;
    let reference = synthesize(utt, model, None, &SynthesisConfig { mode: Mode::None, ..base.clone() })?;
    let baseline = word_report(&reference.waveform, &reference.alignment)?;
    modes
        .iter()
        .map(|&mode| {
            let s = synthesize(utt, model, None, &SynthesisConfig { mode, ..base.clone() })?;
            let reports: Vec<WordAcousticReport> = word_report(&s.waveform, &s.alignment)?;
            let identification = identify_emphasis(&reports, &baseline)?;
            let (r, b) = (&reports[target], &baseline[target]);
            Ok(Trial {
                utterance: index,
                mode,
                target,
                identification,
                target_duration_ratio: r.duration_ms / b.duration_ms,
                injected_correlates: s.plan.correlates.len(),
                target_pre_stress_silence_ms: r.pre_stress_silence_ms,
                target_f0_range_delta_hz: r.f0_range_hz.unwrap_or(0.0) - b.f0_range_hz.unwrap_or(0.0),
            })
        })
        .collect()
}

/// Runs every mode on every utterance (in parallel across utterances).
/// Results are ordered by utterance then mode, independent of scheduling.
pub fn run_experiment(
    utterances: &[Utterance],
    model: &DurationModel,
    modes: &[Mode],
    base: &SynthesisConfig,
) -> Result<ExperimentReport> {
    if utterances.is_empty() {
        return Err(Error::Empty("experiment utterances"));
    }
    if modes.is_empty() {
        return Err(Error::Empty("experiment modes"));
    }
    let per_utt: Vec<Vec<Trial>> = utterances
        .par_iter()
        .enumerate()
        .map(|(i, u)| run_utterance(i, u, model, modes, base))
        .collect::<Result<_>>()?;
    let trials: Vec<Trial> = per_utt.into_iter().flatten().collect();

    let chance = utterances
        .iter()
        .map(|u| {
            let content = (0..u.n_words()).filter(|&w| u.is_content_word(w)).count();
            1.0 / content.max(1) as f64
        })
        .sum::<f64>()
        / utterances.len() as f64;

    let summaries = modes
        .iter()
        .map(|&mode| {
            let ts: Vec<&Trial> = trials.iter().filter(|t| t.mode == mode).collect();
            let n = ts.len();
            let mean = |f: &dyn Fn(&Trial) -> f64| ts.iter().map(|t| f(t)).sum::<f64>() / n as f64;
            let correct = ts.iter().filter(|t| t.correct()).count();
            ModeSummary {
                mode,
                n,
                correct,
                accuracy: correct as f64 / n as f64,
                not_detected: ts.iter().filter(|t| !t.identification.detected).count(),
                mean_target_duration_ratio: mean(&|t| t.target_duration_ratio),
                mean_target_pre_stress_silence_ms: mean(&|t| t.target_pre_stress_silence_ms),
                mean_target_f0_range_delta_hz: mean(&|t| t.target_f0_range_delta_hz),
                injected_correlates: ts.iter().map(|t| t.injected_correlates).sum(),
            }
        })
        .collect();

    let records: Vec<IdentifiabilityRecord> = trials
        .iter()
        .map(|t| IdentifiabilityRecord {
            utterance_id: format!("utt{:04}", t.utterance),
            system: t.mode.name().to_string(),
            true_word: t.target,
            // A miss is scored as a wrong answer.
            chosen_word: if t.identification.detected {
                t.identification.word_index
            } else {
                (t.target + 1) % utterances[t.utterance].n_words()
            },
            n_words: utterances[t.utterance].n_words(),
            listener_id: None,
        })
        .collect();

    Ok(ExperimentReport {
        chance,
        modes: summaries,
        identifiability: identifiability(&records)?,
        trials,
    })
}
