use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ndarray::Array2;
use voxanon_core::dsp::wav::{encode_wav, read_wav};
use voxanon_core::eval::io::{encode_scores, parse_keyed_lines, parse_trials};
use voxanon_core::eval::{
    anonymize_side, run_scenario_scored, Anonymizer, IdentityAnonymizer, PoolAnonymizer,
    ScenarioConfig, Transcripts,
};
use voxanon_core::feat::{decode_feat, write_feat};
use voxanon_core::pool::io::{encode_for_path, load_pool};
use voxanon_core::seed::derive_seed;
use voxanon_core::softunits::{extract_content, SoftTrainConfig};
use voxanon_core::vocloss::{
    discriminator_loss, generator_loss_terms, run_bank, standin_bank, DiscriminatorFeatures,
};
use voxanon_core::{
    assemble, extract_f0, kmeans_fit, mcadams_anonymize, quantize, train_soft_head, ContentFrames,
    DiscreteUnits, EmbeddingPool, F0Track, Scenario, SoftUnitCodebook,
};

use crate::cli::*;
use crate::config::{flag, RunConfig};
use crate::output::Outputs;
use crate::{fixture, UsageError};

/// Stand-in discriminators look at the waveform in segments of this length.
pub const LOSS_SEGMENT: usize = 256;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read(path)?).with_context(|| format!("{} is not UTF-8", path.display()))
}

fn load_feat(path: &Path) -> Result<Array2<f64>> {
    decode_feat(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn feat_bytes(m: &Array2<f64>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_feat(&mut buf, m)?;
    Ok(buf)
}

fn load_store(path: &Path) -> Result<EmbeddingPool> {
    load_pool(path).with_context(|| format!("loading embeddings from {}", path.display()))
}

fn load_wav(path: &Path) -> Result<voxanon_core::Waveform> {
    read_wav(path).with_context(|| format!("reading {}", path.display()))
}

/// Config file, then `--set` pairs, then global flags.
pub fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_text(&read_text(p)?)
            .with_context(|| format!("in config {}", p.display()))?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&cli.set)?;
    flag(&mut cfg.seed, cli.seed);
    flag(&mut cfg.jobs, cli.jobs);
    if cli.verbose > 0 {
        cfg.verbosity = cli.verbose;
    }
    Ok(cfg)
}

fn info(cfg: &RunConfig, msg: impl FnOnce() -> String) {
    if cfg.verbosity > 0 {
        eprintln!("{}", msg());
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    let mut out = Outputs::default();
    match &cli.command {
        Command::AnonPool(a) => {
            flag(&mut cfg.anon.n_far, a.n_far);
            flag(&mut cfg.anon.n_avg, a.n_avg);
            flag(&mut cfg.policy, a.policy);
        }
        Command::Mcadams(a) => {
            flag(&mut cfg.mcadams.alpha, a.alpha);
            flag(&mut cfg.mcadams.frame_len, a.frame_len);
            flag(&mut cfg.mcadams.hop, a.hop);
            flag(&mut cfg.mcadams.order, a.order);
        }
        Command::F0(a) => {
            flag(&mut cfg.f0.f_min, a.f_min);
            flag(&mut cfg.f0.f_max, a.f_max);
            flag(&mut cfg.f0.nccf_threshold, a.threshold);
        }
        Command::Kmeans(a) => {
            flag(&mut cfg.kmeans_k, a.k);
            flag(&mut cfg.kmeans_max_iters, a.max_iters);
        }
        Command::SoftTrain(a) => {
            flag(&mut cfg.soft.num_units, a.num_units);
            flag(&mut cfg.soft.embed_dim, a.embed_dim);
            flag(&mut cfg.soft.tau, a.tau);
            flag(&mut cfg.soft.lr, a.lr);
            flag(&mut cfg.soft.epochs, a.epochs);
            flag(&mut cfg.soft.batch_size, a.batch_size);
        }
        Command::SoftExtract(a) => flag(&mut cfg.content_mode, a.mode),
        Command::Assemble(a) => flag(&mut cfg.assembly.upsample, a.upsample),
        Command::Losses(a) => {
            flag(&mut cfg.lambda_fm, a.lambda_fm);
            flag(&mut cfg.lambda_mel, a.lambda_mel);
        }
        Command::Eval(a) => {
            flag(&mut cfg.anon.n_far, a.n_far);
            flag(&mut cfg.anon.n_avg, a.n_avg);
            flag(&mut cfg.policy, a.policy);
            flag(&mut cfg.unit, a.unit);
            cfg.share_pseudo_across_sides |= a.share_pseudo;
        }
        Command::ToyFixture(_) | Command::Config(_) => {}
    }
    cfg.validate()?;
    if cfg.jobs > 0 {
        // only fails if a pool already exists, which then serves just as well
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global();
    }

    match &cli.command {
        Command::AnonPool(a) => anon_pool(&cfg, a, &mut out)?,
        Command::Mcadams(a) => {
            let w = load_wav(&a.input)?;
            let y = mcadams_anonymize(&w, &cfg.mcadams)?;
            out.add(&a.output, encode_wav(&y)?);
        }
        Command::F0(a) => {
            let track = extract_f0(&load_wav(&a.input)?, &cfg.f0)?;
            info(&cfg, || {
                let v = track.voiced.iter().filter(|&&v| v).count();
                format!("{} frames, {v} voiced", track.len())
            });
            out.add(&a.output, track.to_text());
        }
        Command::Kmeans(a) => kmeans(&cfg, a, &mut out)?,
        Command::SoftTrain(a) => soft_train(&cfg, a, &mut out)?,
        Command::SoftExtract(a) => {
            let cb: SoftUnitCodebook = serde_json::from_slice(&read(&a.codebook)?)
                .with_context(|| format!("parsing {}", a.codebook.display()))?;
            cb.validate()?;
            let content = extract_content(&load_feat(&a.features)?, &cb, cfg.content_mode)?;
            out.add(&a.output, feat_bytes(&content.frames)?);
        }
        Command::Assemble(a) => assemble_cmd(&cfg, a, &mut out)?,
        Command::Losses(a) => {
            let text = losses(&cfg, a, &mut out)?;
            stdout.write_all(text.as_bytes())?;
        }
        Command::Eval(a) => {
            let text = eval(&cfg, a, &mut out)?;
            stdout.write_all(text.as_bytes())?;
        }
        Command::ToyFixture(a) => {
            for (name, bytes) in fixture::toy_files(cfg.seed)? {
                out.add(a.output_dir.join(name), bytes);
            }
        }
        Command::Config(a) => match &a.output {
            Some(p) => out.add(p, cfg.to_text()),
            None => stdout.write_all(cfg.to_text().as_bytes())?,
        },
    }
    for p in out.paths() {
        info(&cfg, || format!("writing {}", p.display()));
    }
    out.commit()
}

/// Seed shared by `anon-pool` and `eval` so both draw the same pseudo-speakers.
fn anon_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.seed, "anon")
}

fn scenario_config(cfg: &RunConfig, utt2spk: Option<&PathBuf>) -> Result<ScenarioConfig> {
    Ok(ScenarioConfig {
        seed: anon_seed(cfg),
        policy: cfg.policy,
        utt2spk: match utt2spk {
            Some(p) => parse_keyed_lines(&read_text(p)?)
                .with_context(|| format!("parsing {}", p.display()))?,
            None => BTreeMap::new(),
        },
        share_pseudo_across_sides: cfg.share_pseudo_across_sides,
        metric: cfg.metric,
        unit: cfg.unit,
    })
}

fn anon_pool(cfg: &RunConfig, a: &AnonPoolArgs, out: &mut Outputs) -> Result<()> {
    if a.side != "enroll" && a.side != "test" {
        bail!(UsageError(format!(
            "--side must be `enroll` or `test`, not `{}`",
            a.side
        )));
    }
    let pool = load_store(&a.pool)?;
    let inputs = load_store(&a.input)?;
    let sc = scenario_config(cfg, a.utt2spk.as_ref())?;
    let anon = PoolAnonymizer::new(pool, cfg.anon)?;
    let mut pseudo = anonymize_side(&a.side, inputs.entries(), &anon, &sc)?;
    pseudo.sort_by(|x, y| x.speaker_id.cmp(&y.speaker_id));
    let store = EmbeddingPool::new(pseudo)?;
    out.add(&a.output, encode_for_path(&a.output, &store)?);
    Ok(())
}

fn kmeans(cfg: &RunConfig, a: &KmeansArgs, out: &mut Outputs) -> Result<()> {
    let feats = a
        .features
        .iter()
        .map(|p| load_feat(p))
        .collect::<Result<Vec<_>>>()?;
    let dim = feats[0].ncols();
    if let Some((p, f)) = a
        .features
        .iter()
        .zip(&feats)
        .find(|(_, f)| f.ncols() != dim)
    {
        bail!("{}: {} columns, expected {dim}", p.display(), f.ncols());
    }
    let views: Vec<_> = feats.iter().map(|f| f.view()).collect();
    let all = ndarray::concatenate(ndarray::Axis(0), &views)?;
    let fit = kmeans_fit(
        &all,
        cfg.kmeans_k,
        cfg.kmeans_max_iters,
        derive_seed(cfg.seed, "kmeans"),
    )?;
    info(cfg, || {
        format!(
            "k-means: {} iterations, inertia {}",
            fit.iterations, fit.inertia
        )
    });
    out.add(&a.centroids, feat_bytes(&fit.centroids)?);
    if let Some(dir) = &a.units_dir {
        for (p, f) in a.features.iter().zip(&feats) {
            let stem = p
                .file_stem()
                .ok_or_else(|| UsageError(format!("{} has no file name", p.display())))?;
            let units = quantize(f, &fit.centroids)?;
            out.add(dir.join(stem).with_extension("units"), units.to_text());
        }
    }
    Ok(())
}

fn soft_train(cfg: &RunConfig, a: &SoftTrainArgs, out: &mut Outputs) -> Result<()> {
    if a.features.len() != a.units.len() {
        bail!(UsageError(format!(
            "{} feature files but {} unit files",
            a.features.len(),
            a.units.len()
        )));
    }
    let feats = a
        .features
        .iter()
        .map(|p| load_feat(p))
        .collect::<Result<Vec<_>>>()?;
    let units = a
        .units
        .iter()
        .map(|p| {
            DiscreteUnits::from_text(&read_text(p)?)
                .with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let train = SoftTrainConfig {
        seed: derive_seed(cfg.seed, "soft-train"),
        ..cfg.soft
    };
    let head = train_soft_head(&feats, &units, &train)?;
    for (i, l) in head.loss_history.iter().enumerate() {
        info(cfg, || format!("epoch {}: loss {l}", i + 1));
    }
    out.add(&a.output, serde_json::to_vec_pretty(&head.codebook)?);
    let history: String = head
        .loss_history
        .iter()
        .map(|l| format!("{l:?}\n"))
        .collect();
    out.add_opt(a.history.as_deref(), history);
    Ok(())
}

fn assemble_cmd(cfg: &RunConfig, a: &AssembleArgs, out: &mut Outputs) -> Result<()> {
    let content = ContentFrames {
        frames: load_feat(&a.content)?,
        mode: cfg.content_mode,
    };
    let f0 = F0Track::from_text(&read_text(&a.f0)?, cfg.f0.hop)
        .with_context(|| format!("parsing {}", a.f0.display()))?;
    let store = load_store(&a.embeddings)?;
    let spk = store
        .entries()
        .iter()
        .find(|e| e.speaker_id == a.speaker)
        .ok_or_else(|| voxanon_core::Error::UnknownId(a.speaker.clone()))?;
    let frames = assemble(&content, &f0, spk, &cfg.assembly)?;
    info(cfg, || {
        format!("{} frames of width {}", frames.len(), frames.width())
    });
    out.add(&a.output, feat_bytes(&frames.frames)?);
    Ok(())
}

/// Runs the stand-in bank over consecutive segments and concatenates scores
/// and feature maps per sub-discriminator.
fn segmented_features(
    bank: &[voxanon_core::vocloss::LinearDiscriminator],
    x: &[f64],
) -> Result<DiscriminatorFeatures> {
    let mut merged: Option<DiscriminatorFeatures> = None;
    for seg in x.chunks_exact(LOSS_SEGMENT) {
        let f = run_bank(bank, seg)?;
        match &mut merged {
            None => merged = Some(f),
            Some(m) => {
                for (dst, src) in m.subs.iter_mut().zip(f.subs) {
                    dst.scores.extend(src.scores);
                    for (d, s) in dst.feature_maps.iter_mut().zip(src.feature_maps) {
                        d.extend(s);
                    }
                }
            }
        }
    }
    merged.ok_or_else(|| {
        voxanon_core::Error::EmptyInput("waveform shorter than one discriminator segment").into()
    })
}

fn losses(cfg: &RunConfig, a: &LossesArgs, out: &mut Outputs) -> Result<String> {
    let x = load_wav(&a.real)?;
    let x_hat = load_wav(&a.fake)?;
    let voc = cfg.voc_loss();
    let bank = standin_bank(LOSS_SEGMENT, derive_seed(cfg.seed, "losses"));
    if x.len() != x_hat.len() {
        return Err(voxanon_core::Error::LengthMismatch(format!(
            "{} vs {} samples",
            x.len(),
            x_hat.len()
        ))
        .into());
    }
    let real = segmented_features(&bank, x.samples())?;
    let fake = segmented_features(&bank, x_hat.samples())?;
    let terms = generator_loss_terms(&x, &x_hat, &real, &fake, &voc)?;
    let d = discriminator_loss(&real, &fake)?;
    let text = format!(
        "adversarial_g={:?}\nadversarial_d={d:?}\nfeature_matching={:?}\nmel={:?}\nlambda_fm={:?}\nlambda_mel={:?}\ngenerator_total={:?}\n",
        terms.adversarial, terms.feature_matching, terms.mel, voc.lambda_fm, voc.lambda_mel, terms.total
    );
    out.add_opt(a.report.as_deref(), text.clone());
    let json = serde_json::json!({
        "generator": terms,
        "discriminator": d,
        "lambda_fm": voc.lambda_fm,
        "lambda_mel": voc.lambda_mel,
    });
    out.add_opt(a.json.as_deref(), serde_json::to_vec_pretty(&json)?);
    Ok(text)
}

fn eval(cfg: &RunConfig, a: &EvalArgs, out: &mut Outputs) -> Result<String> {
    let enroll = load_store(&a.enroll)?;
    let test = load_store(&a.test)?;
    let trials = parse_trials(&read_text(&a.trials)?)
        .with_context(|| format!("parsing {}", a.trials.display()))?;
    let kind = a.anonymizer.unwrap_or(match a.scenario {
        Scenario::OR => AnonymizerKind::Identity,
        _ => AnonymizerKind::Pool,
    });
    let pool_anon;
    let anon: Option<&dyn Anonymizer> = match (a.scenario, kind) {
        (Scenario::OO, _) => None,
        (_, AnonymizerKind::Identity) => Some(&IdentityAnonymizer),
        (s, AnonymizerKind::Pool) => {
            let path = a
                .pool
                .as_ref()
                .ok_or_else(|| UsageError(format!("scenario {s} needs --pool")))?;
            pool_anon = PoolAnonymizer::new(load_store(path)?, cfg.anon)?;
            Some(&pool_anon)
        }
    };
    let transcripts = match (&a.reference, &a.hyp) {
        (Some(r), Some(h)) => Some(Transcripts {
            reference: parse_keyed_lines(&read_text(r)?)
                .with_context(|| format!("parsing {}", r.display()))?,
            hypothesis: parse_keyed_lines(&read_text(h)?)
                .with_context(|| format!("parsing {}", h.display()))?,
        }),
        _ => None,
    };
    let sc = scenario_config(cfg, a.utt2spk.as_ref())?;
    let (report, scores) = run_scenario_scored(
        a.scenario,
        enroll.entries(),
        test.entries(),
        &trials,
        anon,
        transcripts.as_ref(),
        &sc,
    )?;
    let text = report.to_text();
    out.add_opt(a.scores.as_deref(), encode_scores(&scores));
    out.add_opt(a.report.as_deref(), text.clone());
    out.add_opt(a.json.as_deref(), serde_json::to_vec_pretty(&report)?);
    Ok(text)
}
