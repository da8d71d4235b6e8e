use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::errors::{edit_distance, tokenize, ErrorUnit};
use super::metrics::{compute_eer, compute_min_dcf, MetricParams};
use super::{Scenario, Trial, TrialLabel, TrialScore};
use crate::error::{Error, Result};
use crate::pool::{
    cosine_similarity, generate_pseudo_embedding, AnonymizationParams, EmbeddingPool,
    SpeakerEmbedding,
};
use crate::seed::{derive_seed, rng_from_seed};

/// Maps a source embedding to the embedding the attacker gets to see.
pub trait Anonymizer: Sync {
    fn anonymize(&self, src: &SpeakerEmbedding, seed: u64) -> Result<SpeakerEmbedding>;
}

/// Pass-through; stands in for resynthesis with the original speaker vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityAnonymizer;

impl Anonymizer for IdentityAnonymizer {
    fn anonymize(&self, src: &SpeakerEmbedding, _seed: u64) -> Result<SpeakerEmbedding> {
        Ok(src.clone())
    }
}

/// Pseudo-speaker generation from an external pool.
#[derive(Debug, Clone)]
pub struct PoolAnonymizer {
    pub pool: EmbeddingPool,
    pub params: AnonymizationParams,
}

impl PoolAnonymizer {
    pub fn new(pool: EmbeddingPool, params: AnonymizationParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { pool, params })
    }
}

impl Anonymizer for PoolAnonymizer {
    fn anonymize(&self, src: &SpeakerEmbedding, seed: u64) -> Result<SpeakerEmbedding> {
        let params = AnonymizationParams {
            seed,
            ..self.params
        };
        generate_pseudo_embedding(&self.pool, src, &params, &mut rng_from_seed(seed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnonymizationPolicy {
    /// A fresh pseudo-speaker for every utterance.
    #[default]
    PerUtterance,
    /// One pseudo-speaker per source speaker, built from the speaker's mean
    /// embedding and shared by all of their utterances.
    PerSpeaker,
}

impl std::str::FromStr for AnonymizationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-utterance" | "utterance" => Ok(Self::PerUtterance),
            "per-speaker" | "speaker" => Ok(Self::PerSpeaker),
            other => Err(Error::Format(format!(
                "unknown anonymization policy `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub policy: AnonymizationPolicy,
    /// Utterance id to speaker id; ids missing here are their own speaker.
    pub utt2spk: BTreeMap<String, String>,
    /// In AA, reuse the same pseudo-speaker seeds on both sides instead of
    /// drawing independent ones.
    pub share_pseudo_across_sides: bool,
    pub metric: MetricParams,
    pub unit: ErrorUnit,
}

impl ScenarioConfig {
    fn speaker_of<'a>(&'a self, utt: &'a str) -> &'a str {
        self.utt2spk.get(utt).map_or(utt, String::as_str)
    }

    /// Seed for one anonymization unit (utterance or speaker) on one side.
    pub fn unit_seed(&self, side: &str, key: &str) -> u64 {
        if self.share_pseudo_across_sides {
            derive_seed(self.seed, key)
        } else {
            derive_seed(self.seed, &format!("{side}:{key}"))
        }
    }
}

/// Anonymizes one side of a trial list. Each output keeps its input id and
/// gender; only the vector changes. Output order matches the input.
pub fn anonymize_side(
    side: &str,
    inputs: &[SpeakerEmbedding],
    anonymizer: &dyn Anonymizer,
    cfg: &ScenarioConfig,
) -> Result<Vec<SpeakerEmbedding>> {
    let relabel = |src: &SpeakerEmbedding, pseudo: SpeakerEmbedding| SpeakerEmbedding {
        vector: pseudo.vector,
        speaker_id: src.speaker_id.clone(),
        gender: src.gender,
    };
    match cfg.policy {
        AnonymizationPolicy::PerUtterance => inputs
            .par_iter()
            .map(|src| {
                let seed = cfg.unit_seed(side, &src.speaker_id);
                Ok(relabel(src, anonymizer.anonymize(src, seed)?))
            })
            .collect(),
        AnonymizationPolicy::PerSpeaker => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, e) in inputs.iter().enumerate() {
                groups
                    .entry(cfg.speaker_of(&e.speaker_id))
                    .or_default()
                    .push(i);
            }
            let groups: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
            let pseudo: Vec<Vec<f64>> = groups
                .par_iter()
                .map(|(spk, members)| {
                    let first = &inputs[members[0]];
                    let mut mean = vec![0.0; first.dim()];
                    for &i in members {
                        if inputs[i].gender != first.gender {
                            return Err(Error::Format(format!("speaker `{spk}` has mixed gender")));
                        }
                        for (m, v) in mean.iter_mut().zip(&inputs[i].vector) {
                            *m += v;
                        }
                    }
                    let src = SpeakerEmbedding::new(mean, *spk, first.gender)?;
                    Ok(anonymizer.anonymize(&src, cfg.unit_seed(side, spk))?.vector)
                })
                .collect::<Result<_>>()?;
            let mut out: Vec<Option<SpeakerEmbedding>> = vec![None; inputs.len()];
            for ((_, members), vector) in groups.iter().zip(pseudo) {
                for &i in members {
                    out[i] = Some(SpeakerEmbedding {
                        vector: vector.clone(),
                        speaker_id: inputs[i].speaker_id.clone(),
                        gender: inputs[i].gender,
                    });
                }
            }
            Ok(out.into_iter().map(Option::unwrap).collect())
        }
    }
}

/// Cosine score per trial. Enrollment models are the mean of all entries
/// sharing an enrollment id; test ids must be unique.
pub fn score_trials(
    enroll: &[SpeakerEmbedding],
    test: &[SpeakerEmbedding],
    trials: &[Trial],
) -> Result<Vec<TrialScore>> {
    let mut models: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for e in enroll {
        e.validate()?;
        let (sum, n) = models
            .entry(e.speaker_id.as_str())
            .or_insert_with(|| (vec![0.0; e.dim()], 0));
        if sum.len() != e.dim() {
            return Err(Error::DimensionMismatch {
                expected: sum.len(),
                actual: e.dim(),
            });
        }
        sum.iter_mut().zip(&e.vector).for_each(|(s, v)| *s += v);
        *n += 1;
    }
    let models: BTreeMap<&str, Vec<f64>> = models
        .into_iter()
        .map(|(k, (sum, n))| (k, sum.into_iter().map(|v| v / n as f64).collect()))
        .collect();
    let mut tests: BTreeMap<&str, &[f64]> = BTreeMap::new();
    for t in test {
        t.validate()?;
        if tests.insert(&t.speaker_id, &t.vector).is_some() {
            return Err(Error::Format(format!(
                "duplicate test id `{}`",
                t.speaker_id
            )));
        }
    }
    trials
        .iter()
        .map(|tr| {
            let m = models
                .get(tr.enroll_id.as_str())
                .ok_or_else(|| Error::UnknownId(tr.enroll_id.clone()))?;
            let t = tests
                .get(tr.test_id.as_str())
                .ok_or_else(|| Error::UnknownId(tr.test_id.clone()))?;
            Ok(TrialScore {
                enroll_id: tr.enroll_id.clone(),
                test_id: tr.test_id.clone(),
                score: cosine_similarity(m, t)?,
                label: tr.label,
            })
        })
        .collect()
}

/// Reference and ASR hypothesis text per utterance.
#[derive(Debug, Clone, Default)]
pub struct Transcripts {
    pub reference: BTreeMap<String, String>,
    pub hypothesis: BTreeMap<String, String>,
}

impl Transcripts {
    /// Corpus-level rate: total edits over total reference tokens.
    pub fn error_rate(&self, unit: ErrorUnit) -> Result<f64> {
        let (mut edits, mut total) = (0usize, 0usize);
        for (utt, text) in &self.reference {
            let hyp = self
                .hypothesis
                .get(utt)
                .ok_or_else(|| Error::UnknownId(utt.clone()))?;
            let r = tokenize(text, unit);
            edits += edit_distance(&r, &tokenize(hyp, unit));
            total += r.len();
        }
        if total == 0 {
            return Err(Error::EmptyInput("reference transcripts"));
        }
        Ok(100.0 * edits as f64 / total as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialCounts {
    pub targets: usize,
    pub nontargets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    /// Percent.
    pub eer: f64,
    pub eer_threshold: f64,
    pub min_dcf: f64,
    pub error_rate: Option<f64>,
    pub error_unit: Option<ErrorUnit>,
    pub counts: TrialCounts,
}

impl ScenarioReport {
    pub fn to_text(&self) -> String {
        let mut s =
            format!(
            "scenario={}\neer={:?}\neer_threshold={:?}\nmin_dcf={:?}\ntargets={}\nnontargets={}\n",
            self.scenario, self.eer, self.eer_threshold, self.min_dcf, self.counts.targets,
            self.counts.nontargets
        );
        if let (Some(rate), Some(unit)) = (self.error_rate, self.error_unit) {
            let key = match unit {
                ErrorUnit::Word => "wer",
                ErrorUnit::Char => "cer",
            };
            s.push_str(&format!("{key}={rate:?}\n"));
        }
        s
    }
}

/// Scores the trials under one attack scenario and summarizes privacy
/// (EER, minDCF) and, if transcripts are given, utility (WER or CER).
pub fn run_scenario(
    scenario: Scenario,
    enroll: &[SpeakerEmbedding],
    test: &[SpeakerEmbedding],
    trials: &[Trial],
    anonymizer: Option<&dyn Anonymizer>,
    transcripts: Option<&Transcripts>,
    cfg: &ScenarioConfig,
) -> Result<ScenarioReport> {
    run_scenario_scored(scenario, enroll, test, trials, anonymizer, transcripts, cfg).map(|r| r.0)
}

/// [`run_scenario`], also returning the per-trial scores.
pub fn run_scenario_scored(
    scenario: Scenario,
    enroll: &[SpeakerEmbedding],
    test: &[SpeakerEmbedding],
    trials: &[Trial],
    anonymizer: Option<&dyn Anonymizer>,
    transcripts: Option<&Transcripts>,
    cfg: &ScenarioConfig,
) -> Result<(ScenarioReport, Vec<TrialScore>)> {
    cfg.metric.validate()?;
    if trials.is_empty() {
        return Err(Error::EmptyInput("trial list"));
    }
    let anon = match (scenario, anonymizer) {
        (Scenario::OO, _) => None,
        (_, Some(a)) => Some(a),
        (s, None) => return Err(Error::MissingAnonymizer(s)),
    };
    let enroll_seen = match anon {
        Some(a) if scenario.anonymizes_enroll() => anonymize_side("enroll", enroll, a, cfg)?,
        _ => enroll.to_vec(),
    };
    let test_seen = match anon {
        Some(a) if scenario.anonymizes_test() => anonymize_side("test", test, a, cfg)?,
        _ => test.to_vec(),
    };
    let scores = score_trials(&enroll_seen, &test_seen, trials)?;
    let eer = compute_eer(&scores)?;
    let min_dcf = compute_min_dcf(&scores, &cfg.metric)?;
    let targets = scores
        .iter()
        .filter(|s| s.label == TrialLabel::Target)
        .count();
    let error_rate = transcripts.map(|t| t.error_rate(cfg.unit)).transpose()?;
    let report = ScenarioReport {
        scenario,
        eer: eer.eer,
        eer_threshold: eer.threshold,
        min_dcf,
        error_rate,
        error_unit: error_rate.map(|_| cfg.unit),
        counts: TrialCounts {
            targets,
            nontargets: scores.len() - targets,
        },
    };
    Ok((report, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::Gender;

    fn emb(v: &[f64], id: &str) -> SpeakerEmbedding {
        SpeakerEmbedding::new(v.to_vec(), id, Gender::Female).unwrap()
    }

    fn trial(e: &str, t: &str, label: TrialLabel) -> Trial {
        Trial {
            enroll_id: e.into(),
            test_id: t.into(),
            label,
        }
    }

    #[test]
    fn score_example() {
        let s = score_trials(
            &[emb(&[1.0, 0.0], "e")],
            &[emb(&[1.0, 1.0], "t")],
            &[trial("e", "t", TrialLabel::Target)],
        )
        .unwrap();
        assert!((s[0].score - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn enrollment_is_averaged() {
        let s = score_trials(
            &[emb(&[1.0, 0.0], "e"), emb(&[0.0, 1.0], "e")],
            &[emb(&[1.0, 1.0], "t")],
            &[trial("e", "t", TrialLabel::Target)],
        )
        .unwrap();
        assert!((s[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_and_duplicate_ids() {
        let t = [trial("x", "t", TrialLabel::Target)];
        assert!(matches!(
            score_trials(&[emb(&[1.0], "e")], &[emb(&[1.0], "t")], &t),
            Err(Error::UnknownId(_))
        ));
        assert!(score_trials(&[], &[emb(&[1.0], "t"), emb(&[2.0], "t")], &[]).is_err());
    }

    #[test]
    fn anonymizer_required() {
        let e = [emb(&[1.0, 0.0], "a")];
        let t = [emb(&[1.0, 0.1], "b")];
        let tr = [trial("a", "b", TrialLabel::Target)];
        let r = run_scenario(
            Scenario::OA,
            &e,
            &t,
            &tr,
            None,
            None,
            &ScenarioConfig::default(),
        );
        assert!(matches!(r, Err(Error::MissingAnonymizer(Scenario::OA))));
    }

    #[test]
    fn corpus_error_rate() {
        let mut tr = Transcripts::default();
        tr.reference.insert("u1".into(), "a b c".into());
        tr.hypothesis.insert("u1".into(), "a x c d".into());
        assert!((tr.error_rate(ErrorUnit::Word).unwrap() - 200.0 / 3.0).abs() < 1e-12);
        tr.reference.insert("u2".into(), "d".into());
        assert!(tr.error_rate(ErrorUnit::Word).is_err());
    }

    #[test]
    fn per_speaker_policy_shares_vectors() {
        let mut entries = Vec::new();
        for i in 0..30 {
            let a = i as f64 * 0.2;
            entries.push(
                SpeakerEmbedding::new(vec![a.cos(), a.sin(), 0.3], format!("p{i}"), Gender::Female)
                    .unwrap(),
            );
        }
        let anon = PoolAnonymizer::new(
            EmbeddingPool::new(entries).unwrap(),
            AnonymizationParams {
                n_far: 10,
                n_avg: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let inputs = [
            emb(&[1.0, 0.0, 0.0], "u1"),
            emb(&[0.9, 0.1, 0.0], "u2"),
            emb(&[0.0, 1.0, 0.0], "u3"),
        ];
        let mut cfg = ScenarioConfig {
            policy: AnonymizationPolicy::PerSpeaker,
            ..Default::default()
        };
        cfg.utt2spk.insert("u1".into(), "s1".into());
        cfg.utt2spk.insert("u2".into(), "s1".into());
        let out = anonymize_side("test", &inputs, &anon, &cfg).unwrap();
        assert_eq!(out[0].vector, out[1].vector);
        assert_eq!(out[2].speaker_id, "u3");
        assert_eq!(out, anonymize_side("test", &inputs, &anon, &cfg).unwrap());

        cfg.policy = AnonymizationPolicy::PerUtterance;
        let a = anonymize_side("enroll", &inputs, &anon, &cfg).unwrap();
        let b = anonymize_side("test", &inputs, &anon, &cfg).unwrap();
        assert_ne!(a, b);
        cfg.share_pseudo_across_sides = true;
        let a = anonymize_side("enroll", &inputs, &anon, &cfg).unwrap();
        let b = anonymize_side("test", &inputs, &anon, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
