//! Statistics for listening tests: MUSHRA summaries, the Friedman test,
//! two-alternative preference deltas and emphasis identifiability.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestType {
    Mushra,
    Preference,
    Identify,
}

impl TestType {
    pub fn name(self) -> &'static str {
        match self {
            TestType::Mushra => "mushra",
            TestType::Preference => "preference",
            TestType::Identify => "identify",
        }
    }

    pub fn parse(s: &str) -> Option<TestType> {
        match s {
            "mushra" => Some(TestType::Mushra),
            "preference" => Some(TestType::Preference),
            "identify" => Some(TestType::Identify),
            _ => None,
        }
    }
}

/// Ratings in [0, 100]; one row per (listener, screen), one column per system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatingsMatrix {
    systems: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl RatingsMatrix {
    pub fn new(systems: Vec<String>, rows: Vec<Vec<f64>>) -> Result<RatingsMatrix> {
        if systems.is_empty() {
            return Err(Error::Empty("systems"));
        }
        if rows.is_empty() {
            return Err(Error::Empty("rating rows"));
        }
        let distinct: BTreeSet<&String> = systems.iter().collect();
        if distinct.len() != systems.len() {
            return Err(Error::invalid("ratings", "duplicate system label"));
        }
        for row in &rows {
            if row.len() != systems.len() {
                return Err(Error::LengthMismatch {
                    what: "rating row",
                    expected: systems.len(),
                    actual: row.len(),
                });
            }
            if let Some(&bad) = row.iter().find(|r| !(0.0..=100.0).contains(*r)) {
                return Err(Error::OutOfRange {
                    name: "rating",
                    value: bad,
                    min: 0.0,
                    max: 100.0,
                });
            }
        }
        Ok(RatingsMatrix { systems, rows })
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Single rating: the interval has zero width and carries no information.
    pub degenerate: bool,
}

pub const Z_95: f64 = 1.96;

/// Mean with a normal-approximation 95% interval, `mean ± 1.96 sd / sqrt(n)`.
pub fn mushra_summary(m: &RatingsMatrix) -> Vec<SystemSummary> {
    m.systems
        .iter()
        .enumerate()
        .map(|(j, system)| {
            let values: Vec<f64> = m.column(j).collect();
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let half = Z_95 * sd / (n as f64).sqrt();
            SystemSummary {
                system: system.clone(),
                n,
                mean,
                sd,
                ci_low: mean - half,
                ci_high: mean + half,
                degenerate: n == 1,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub q: f64,
    pub df: usize,
    pub p_value: f64,
    pub n: usize,
    pub k: usize,
    pub rank_sums: Vec<f64>,
}

/// Average (mid) ranks of a row, 1-based; ties share the mean of their ranks.
pub fn mid_ranks(row: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    let mut ranks = vec![0.0; row.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_term)
}

/// Friedman rank test across systems with tie correction and a chi-square
/// (k - 1 df) p-value.
pub fn friedman(m: &RatingsMatrix) -> Result<FriedmanResult> {
    let k = m.systems.len();
    let n = m.rows.len();
    if k < 2 {
        return Err(Error::invalid("friedman", "needs at least two systems"));
    }
    let mut rank_sums = vec![0.0; k];
    let mut ties = 0.0;
    for row in &m.rows {
        let (ranks, t) = mid_ranks(row);
        for (s, r) in rank_sums.iter_mut().zip(ranks) {
            *s += r;
        }
        ties += t;
    }
    let (nf, kf) = (n as f64, k as f64);
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * rank_sums.iter().map(|r| r * r).sum::<f64>()
        - 3.0 * nf * (kf + 1.0);
    let correction = 1.0 - ties / (nf * (kf * kf * kf - kf));
    let (q, p_value) = if correction.abs() < 1e-12 {
        (0.0, 1.0)
    } else {
        let q = (raw / correction).max(0.0);
        (q, chi_square_sf(q, (k - 1) as f64))
    };
    Ok(FriedmanResult {
        q,
        df: k - 1,
        p_value,
        n,
        k,
        rank_sums,
    })
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        // Modified Lentz evaluation of the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, x / 2.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceTally {
    pub system_a: String,
    pub system_b: String,
    pub votes_a: u64,
    pub votes_b: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceResult {
    pub system_a: String,
    pub system_b: String,
    pub votes_a: u64,
    pub votes_b: u64,
    /// Share preferring A minus share preferring B.
    pub delta_pref: f64,
    pub p_value: f64,
}

const EXACT_BINOMIAL_MAX_N: u64 = 120;

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// P(X <= k) for X ~ Binomial(n, 1/2).
fn binomial_half_cdf(n: u64, k: u64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if n <= EXACT_BINOMIAL_MAX_N {
        let mut c: u128 = 1;
        let mut sum: u128 = 0;
        for i in 0..=k {
            if i > 0 {
                c = c * (n - i + 1) as u128 / i as u128;
            }
            sum += c;
        }
        // sum < 2^n <= 2^120 is exact; the division rounds once.
        sum as f64 / 2f64.powi(n as i32)
    } else {
        let ln_half = -(n as f64) * std::f64::consts::LN_2;
        let logs: Vec<f64> = (0..=k).map(|i| ln_choose(n, i) + ln_half).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (top.exp() * logs.iter().map(|l| (l - top).exp()).sum::<f64>()).min(1.0)
    }
}

/// Exact two-sided binomial test against 1/2.
pub fn binomial_two_sided(successes: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let lower = binomial_half_cdf(n, successes.min(n - successes));
    (2.0 * lower).min(1.0)
}

pub fn preference_delta(t: &PreferenceTally) -> Result<PreferenceResult> {
    let n = t.votes_a + t.votes_b;
    if n == 0 {
        return Err(Error::Empty("preference votes"));
    }
    Ok(PreferenceResult {
        system_a: t.system_a.clone(),
        system_b: t.system_b.clone(),
        votes_a: t.votes_a,
        votes_b: t.votes_b,
        delta_pref: (t.votes_a as f64 - t.votes_b as f64) / n as f64,
        p_value: binomial_two_sided(t.votes_a, n),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifiabilityRecord {
    pub utterance_id: String,
    pub system: String,
    pub true_word: usize,
    pub chosen_word: usize,
    pub n_words: usize,
    #[serde(default)]
    pub listener_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityRow {
    pub system: String,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilitySummary {
    pub overall: IdentifiabilityRow,
    pub per_system: Vec<IdentifiabilityRow>,
}

pub fn identifiability(records: &[IdentifiabilityRecord]) -> Result<IdentifiabilitySummary> {
    if records.is_empty() {
        return Err(Error::Empty("identification records"));
    }
    for r in records {
        if r.n_words == 0 || r.true_word >= r.n_words || r.chosen_word >= r.n_words {
            return Err(Error::invalid(
                "identification record",
                format!(
                    "{}: words {} and {} must be below {}",
                    r.utterance_id, r.true_word, r.chosen_word, r.n_words
                ),
            ));
        }
    }
    let row = |system: &str, rs: &[&IdentifiabilityRecord]| {
        let correct = rs.iter().filter(|r| r.true_word == r.chosen_word).count();
        IdentifiabilityRow {
            system: system.to_string(),
            n: rs.len(),
            correct,
            accuracy: correct as f64 / rs.len() as f64,
        }
    };
    let mut by_system: BTreeMap<&str, Vec<&IdentifiabilityRecord>> = BTreeMap::new();
    for r in records {
        by_system.entry(&r.system).or_default().push(r);
    }
    let all: Vec<&IdentifiabilityRecord> = records.iter().collect();
    Ok(IdentifiabilitySummary {
        overall: row("all", &all),
        per_system: by_system.iter().map(|(s, rs)| row(s, rs)).collect(),
    })
}

/// One line per (listener, screen) of a MUSHRA export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MushraRecord {
    pub listener_id: String,
    pub screen: String,
    pub ratings: BTreeMap<String, f64>,
}

/// One line per (listener, screen) of a preference export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceRecord {
    pub listener_id: String,
    pub screen: String,
    pub system_a: String,
    pub system_b: String,
    pub chosen: String,
}

/// Parses JSON Lines, skipping blank lines; errors carry the line number.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::format("jsonl", format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn ratings_from_records(records: &[MushraRecord]) -> Result<RatingsMatrix> {
    let first = records.first().ok_or(Error::Empty("mushra records"))?;
    let systems: Vec<String> = first.ratings.keys().cloned().collect();
    let rows = records
        .iter()
        .map(|r| {
            if r.ratings.keys().ne(systems.iter()) {
                return Err(Error::invalid(
                    "mushra record",
                    format!("{}/{} does not rate exactly {:?}", r.listener_id, r.screen, systems),
                ));
            }
            Ok(r.ratings.values().copied().collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    RatingsMatrix::new(systems, rows)
}

/// Tallies votes per unordered system pair, labels in lexicographic order.
pub fn tally_preferences(records: &[PreferenceRecord]) -> Result<Vec<PreferenceTally>> {
    let mut tallies: BTreeMap<(String, String), (u64, u64)> = BTreeMap::new();
    for r in records {
        if r.system_a == r.system_b || (r.chosen != r.system_a && r.chosen != r.system_b) {
            return Err(Error::invalid(
                "preference record",
                format!("{}/{}: choice {:?} not one of two systems", r.listener_id, r.screen, r.chosen),
            ));
        }
        let (a, b) = if r.system_a < r.system_b {
            (&r.system_a, &r.system_b)
        } else {
            (&r.system_b, &r.system_a)
        };
        let entry = tallies.entry((a.clone(), b.clone())).or_default();
        if &r.chosen == a {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }
    if tallies.is_empty() {
        return Err(Error::Empty("preference records"));
    }
    Ok(tallies
        .into_iter()
        .map(|((system_a, system_b), (votes_a, votes_b))| PreferenceTally {
            system_a,
            system_b,
            votes_a,
            votes_b,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test_type", rename_all = "snake_case")]
pub enum Summary {
    Mushra {
        systems: Vec<SystemSummary>,
        friedman: Option<FriedmanResult>,
    },
    Preference {
        pairs: Vec<PreferenceResult>,
    },
    Identify(IdentifiabilitySummary),
}

pub fn summarize(test_type: TestType, jsonl: &str) -> Result<Summary> {
    match test_type {
        TestType::Mushra => {
            let m = ratings_from_records(&parse_jsonl(jsonl)?)?;
            let friedman = if m.systems().len() >= 2 { Some(friedman(&m)?) } else { None };
            Ok(Summary::Mushra {
                systems: mushra_summary(&m),
                friedman,
            })
        }
        TestType::Preference => Ok(Summary::Preference {
            pairs: tally_preferences(&parse_jsonl(jsonl)?)?
                .iter()
                .map(preference_delta)
                .collect::<Result<_>>()?,
        }),
        TestType::Identify => Ok(Summary::Identify(identifiability(&parse_jsonl(jsonl)?)?)),
    }
}

pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

/// Plain-text table in the layout of a results section.
pub fn render_table(summary: &Summary) -> String {
    let mut out = String::new();
    match summary {
        Summary::Mushra { systems, friedman } => {
            let _ = writeln!(out, "{:<16} {:>4} {:>7} {:>17}", "System", "n", "Mean", "95% CI");
            for s in systems {
                let ci = format!("[{:.1}, {:.1}]", s.ci_low, s.ci_high);
                let mark = if s.degenerate { " (n=1)" } else { "" };
                let _ = writeln!(out, "{:<16} {:>4} {:>7.1} {:>17}{mark}", s.system, s.n, s.mean, ci);
            }
            if let Some(f) = friedman {
                let _ = writeln!(
                    out,
                    "Friedman Q = {:.3}, df = {}, p = {}",
                    f.q,
                    f.df,
                    format_p(f.p_value)
                );
            }
        }
        Summary::Preference { pairs } => {
            let _ = writeln!(
                out,
                "{:<16} {:<16} {:>6} {:>6} {:>8} {:>8}",
                "System A", "System B", "A", "B", "dPref", "p-value"
            );
            for p in pairs {
                let _ = writeln!(
                    out,
                    "{:<16} {:<16} {:>6} {:>6} {:>7.1}% {:>8}",
                    p.system_a,
                    p.system_b,
                    p.votes_a,
                    p.votes_b,
                    100.0 * p.delta_pref,
                    format_p(p.p_value)
                );
            }
        }
        Summary::Identify(s) => {
            let _ = writeln!(out, "{:<16} {:>8} {:>6} {:>8}", "System", "Correct", "Total", "Accuracy");
            for r in s.per_system.iter().chain(std::iter::once(&s.overall)) {
                let _ = writeln!(
                    out,
                    "{:<16} {:>8} {:>6} {:>7.1}%",
                    r.system,
                    r.correct,
                    r.n,
                    100.0 * r.accuracy
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>) -> RatingsMatrix {
        let k = rows[0].len();
        RatingsMatrix::new((0..k).map(|i| format!("s{i}")).collect(), rows).unwrap()
    }

    #[test]
    fn mushra_mean_and_interval() {
        let m = matrix(vec![vec![60.0], vec![70.0], vec![80.0]]);
        let s = &mushra_summary(&m)[0];
        assert_eq!(s.mean, 70.0);
        assert!((s.sd - 10.0).abs() < 1e-12);
        let half = 1.96 * 10.0 / 3f64.sqrt();
        assert!((s.ci_low - (70.0 - half)).abs() < 1e-9);
        assert!((s.ci_high - (70.0 + half)).abs() < 1e-9);
        assert!(!s.degenerate);
    }

    #[test]
    fn single_rating_is_degenerate() {
        let s = &mushra_summary(&matrix(vec![vec![42.0]]))[0];
        assert!(s.degenerate);
        assert_eq!(s.ci_low, 42.0);
        assert_eq!(s.ci_high, 42.0);
    }

    #[test]
    fn friedman_identical_rankings() {
        let m = matrix(vec![vec![10.0, 20.0, 30.0]; 3]);
        let f = friedman(&m).unwrap();
        assert!((f.q - 6.0).abs() < 1e-12);
        assert_eq!(f.df, 2);
        assert!((f.p_value - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn friedman_all_tied() {
        let f = friedman(&matrix(vec![vec![50.0, 50.0, 50.0]; 4])).unwrap();
        assert_eq!(f.q, 0.0);
        assert_eq!(f.p_value, 1.0);
    }

    #[test]
    fn friedman_needs_two_systems() {
        assert!(friedman(&matrix(vec![vec![1.0]; 3])).is_err());
    }

    #[test]
    fn ratings_out_of_range() {
        assert!(RatingsMatrix::new(vec!["a".into()], vec![vec![101.0]]).is_err());
        assert!(RatingsMatrix::new(vec!["a".into()], vec![vec![f64::NAN]]).is_err());
        assert!(RatingsMatrix::new(vec!["a".into(), "b".into()], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn ten_to_zero_preference() {
        let r = preference_delta(&PreferenceTally {
            system_a: "a".into(),
            system_b: "b".into(),
            votes_a: 10,
            votes_b: 0,
        })
        .unwrap();
        assert_eq!(r.delta_pref, 1.0);
        assert_eq!(r.p_value, 2.0 / 1024.0);
    }

    #[test]
    fn balanced_preference() {
        let r = preference_delta(&PreferenceTally {
            system_a: "a".into(),
            system_b: "b".into(),
            votes_a: 5,
            votes_b: 5,
        })
        .unwrap();
        assert_eq!(r.delta_pref, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn large_preference_tail() {
        // Reference value computed independently.
        let p = binomial_two_sided(35, 50);
        assert!((p - 0.006_600_447_966_810_918).abs() < 1e-15);
        let big = binomial_two_sided(300, 500);
        assert!(big > 0.0 && big < 1e-5);
    }

    #[test]
    fn no_votes_rejected() {
        let t = PreferenceTally {
            system_a: "a".into(),
            system_b: "b".into(),
            votes_a: 0,
            votes_b: 0,
        };
        assert!(preference_delta(&t).is_err());
    }

    #[test]
    fn identifiability_fraction() {
        let rec = |sys: &str, t, c| IdentifiabilityRecord {
            utterance_id: "u".into(),
            system: sys.into(),
            true_word: t,
            chosen_word: c,
            n_words: 5,
            listener_id: None,
        };
        let s = identifiability(&[rec("dd", 1, 1), rec("dd", 2, 2), rec("dd", 3, 0), rec("mel", 1, 4)]).unwrap();
        assert_eq!(s.overall.correct, 2);
        assert_eq!(s.per_system[0].accuracy, 2.0 / 3.0);
        assert_eq!(s.per_system[1].accuracy, 0.0);
        assert!(identifiability(&[rec("dd", 5, 1)]).is_err());
    }

    #[test]
    fn jsonl_line_numbers() {
        let err = parse_jsonl::<PreferenceRecord>("\n{\"bad\":1}\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn incomplete_mushra_row_rejected() {
        let text = r#"{"listener_id":"a","screen":"1","ratings":{"x":10,"y":20}}
{"listener_id":"b","screen":"1","ratings":{"x":10}}"#;
        assert!(summarize(TestType::Mushra, text).is_err());
    }

    #[test]
    fn table_formats() {
        let text = r#"{"listener_id":"a","screen":"1","system_a":"dd","system_b":"mel","chosen":"dd"}"#;
        let table = render_table(&summarize(TestType::Preference, text).unwrap());
        assert!(table.contains("100.0%"), "{table}");
        assert!(table.contains("1.000"), "{table}");
    }
}
