//! Line-oriented text formats for trials, scores, transcripts and utt2spk.

use std::collections::BTreeMap;

use super::{Trial, TrialScore};
use crate::error::{Error, Result};

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn bad(line: usize, what: &str) -> Error {
    Error::Format(format!("line {line}: {what}"))
}

/// `enroll_id test_id target|nontarget` per line.
pub fn parse_trials(text: &str) -> Result<Vec<Trial>> {
    lines(text)
        .map(|(n, l)| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let [e, t, label] = f[..] else {
                return Err(bad(n, "expected 3 fields"));
            };
            Ok(Trial {
                enroll_id: e.into(),
                test_id: t.into(),
                label: label.parse()?,
            })
        })
        .collect()
}

pub fn encode_trials(trials: &[Trial]) -> String {
    trials
        .iter()
        .map(|t| format!("{} {} {}\n", t.enroll_id, t.test_id, t.label))
        .collect()
}

/// `enroll_id test_id score` per line.
pub fn encode_scores(scores: &[TrialScore]) -> String {
    scores
        .iter()
        .map(|s| format!("{} {} {}\n", s.enroll_id, s.test_id, s.score))
        .collect()
}

/// Reads a score file; labels come from the matching trial list entries.
pub fn parse_scores(text: &str, trials: &[Trial]) -> Result<Vec<TrialScore>> {
    let labels: BTreeMap<(&str, &str), _> = trials
        .iter()
        .map(|t| ((t.enroll_id.as_str(), t.test_id.as_str()), t.label))
        .collect();
    lines(text)
        .map(|(n, l)| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let [e, t, score] = f[..] else {
                return Err(bad(n, "expected 3 fields"));
            };
            let label = *labels
                .get(&(e, t))
                .ok_or_else(|| Error::UnknownId(format!("{e} {t}")))?;
            Ok(TrialScore {
                enroll_id: e.into(),
                test_id: t.into(),
                score: score.parse().map_err(|_| bad(n, "bad score"))?,
                label,
            })
        })
        .collect()
}

/// `utt_id text...`: the first whitespace-separated field is the key and
/// the rest of the line is the value.
pub fn parse_keyed_lines(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, l) in lines(text) {
        let (key, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        if out.insert(key.to_owned(), rest.trim().to_owned()).is_some() {
            return Err(bad(n, &format!("duplicate id `{key}`")));
        }
    }
    Ok(out)
}
