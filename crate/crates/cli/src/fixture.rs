//! A small synthetic data set covering every subcommand: clustered speaker
//! embeddings with trials and transcripts, an external pool, a voiced WAV
//! and three-cluster backbone features.

use std::f64::consts::PI;

use anyhow::Result;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use voxanon_core::dsp::wav::encode_wav;
use voxanon_core::eval::io::encode_trials;
use voxanon_core::eval::Trial;
use voxanon_core::feat::write_feat;
use voxanon_core::pool::io::encode_embd;
use voxanon_core::seed::{derive_seed, rng_from_seed, Rng as SeedRng};
use voxanon_core::{EmbeddingPool, Gender, SpeakerEmbedding, TrialLabel, Waveform};

pub const SPEAKERS: usize = 8;
pub const DIM: usize = 32;
pub const FEATURE_FILES: usize = 3;

fn gauss(r: &mut SeedRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn gender(i: usize) -> Gender {
    if i.is_multiple_of(2) {
        Gender::Female
    } else {
        Gender::Male
    }
}

const WORDS: [&str; 8] = ["the", "quick", "brown", "fox", "jumps", "over", "a", "dog"];

/// File name and contents of every fixture file.
pub fn toy_files(seed: u64) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    let mut r = rng_from_seed(derive_seed(seed, "toy-speakers"));
    let centers: Vec<Vec<f64>> = (0..SPEAKERS).map(|_| unit(gauss(&mut r, DIM))).collect();
    let mut utter = |s: usize, id: String| {
        let v = centers[s]
            .iter()
            .map(|c| c + 0.02 * r.sample::<f64, _>(StandardNormal))
            .collect();
        SpeakerEmbedding::new(v, id, gender(s))
    };

    let mut enroll = Vec::new();
    let mut test = Vec::new();
    let mut utt2spk = String::new();
    for s in 0..SPEAKERS {
        for _ in 0..2 {
            enroll.push(utter(s, format!("spk{s}"))?);
        }
        for u in 0..2 {
            let id = format!("spk{s}_u{u}");
            utt2spk.push_str(&format!("{id} spk{s}\n"));
            test.push(utter(s, id)?);
        }
    }
    let trials: Vec<Trial> = (0..SPEAKERS)
        .flat_map(|e| {
            test.iter().map(move |t| Trial {
                enroll_id: format!("spk{e}"),
                test_id: t.speaker_id.clone(),
                label: if t.speaker_id.starts_with(&format!("spk{e}_")) {
                    TrialLabel::Target
                } else {
                    TrialLabel::Nontarget
                },
            })
        })
        .collect();

    let mut r = rng_from_seed(derive_seed(seed, "toy-pool"));
    let pool: Vec<SpeakerEmbedding> = (0..120)
        .map(|i| SpeakerEmbedding::new(gauss(&mut r, DIM), format!("pool{i}"), gender(i)))
        .collect::<voxanon_core::Result<_>>()?;

    let (mut refs, mut hyps) = (String::new(), String::new());
    for (i, t) in test.iter().enumerate() {
        let words: Vec<&str> = (0..5).map(|k| WORDS[(i + 3 * k) % WORDS.len()]).collect();
        refs.push_str(&format!("{}\t{}\n", t.speaker_id, words.join(" ")));
        let mut h = words.clone();
        if i % 3 == 0 {
            h[1] = "fog";
        }
        hyps.push_str(&format!("{}\t{}\n", t.speaker_id, h.join(" ")));
    }

    files.push((
        "enroll.embd".into(),
        encode_embd(&EmbeddingPool::new(enroll)?)?,
    ));
    files.push(("test.embd".into(), encode_embd(&EmbeddingPool::new(test)?)?));
    files.push(("pool.embd".into(), encode_embd(&EmbeddingPool::new(pool)?)?));
    files.push(("trials.txt".into(), encode_trials(&trials).into_bytes()));
    files.push(("utt2spk.txt".into(), utt2spk.into_bytes()));
    files.push(("ref.txt".into(), refs.into_bytes()));
    files.push(("hyp.txt".into(), hyps.into_bytes()));
    files.push(("voice.wav".into(), encode_wav(&voice(seed)?)?));

    let mut r = rng_from_seed(derive_seed(seed, "toy-features"));
    for f in 0..FEATURE_FILES {
        // one second of backbone frames, three well-separated clusters
        let m = Array2::from_shape_fn((50, 8), |(t, j)| {
            let c = (t / 5 + f) % 3;
            let center = if j == c {
                4.0
            } else if j == c + 4 {
                1.0
            } else {
                0.0
            };
            center + 0.3 * r.sample::<f64, _>(StandardNormal)
        });
        let mut buf = Vec::new();
        write_feat(&mut buf, &m)?;
        files.push((format!("feat{f}.feat"), buf));
    }
    Ok(files)
}

/// One second of a 140 Hz pulse train through two formant resonators.
fn voice(seed: u64) -> Result<Waveform> {
    let sr = 16_000.0;
    let mut r = rng_from_seed(derive_seed(seed, "toy-voice"));
    let period = (sr / 140.0) as usize;
    let mut x: Vec<f64> = (0..16_000)
        .map(|i| f64::from(u8::from(i % period == 0)) + 0.005 * r.sample::<f64, _>(StandardNormal))
        .collect();
    for (f, bw) in [(600.0, 90.0), (1700.0, 120.0)] {
        let rad = (-PI * bw / sr).exp();
        let (a1, a2) = (2.0 * rad * (2.0 * PI * f / sr).cos(), -rad * rad);
        let (mut y1, mut y2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = *v + a1 * y1 + a2 * y2;
            (y2, y1) = (y1, y);
            *v = y;
        }
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Waveform::new(
        x.iter().map(|v| 0.7 * v / peak).collect(),
        16_000,
    )?)
}
