use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token granularity for error rates: words (WER) or characters (CER).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorUnit {
    #[default]
    Word,
    Char,
}

impl std::str::FromStr for ErrorUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" | "wer" => Ok(Self::Word),
            "char" | "cer" => Ok(Self::Char),
            other => Err(Error::Format(format!("unknown error unit `{other}`"))),
        }
    }
}

/// Words split on whitespace; characters exclude whitespace.
pub fn tokenize(text: &str, unit: ErrorUnit) -> Vec<String> {
    match unit {
        ErrorUnit::Word => text.split_whitespace().map(str::to_owned).collect(),
        ErrorUnit::Char => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
    }
}

/// Levenshtein distance with unit costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `100 · edits / len(reference)` in percent.
pub fn error_rate<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyInput("reference transcript"));
    }
    Ok(100.0 * edit_distance(reference, hypothesis) as f64 / reference.len() as f64)
}
