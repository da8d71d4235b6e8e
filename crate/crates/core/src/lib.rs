//! Core algorithms for language-independent speaker anonymization.
//!
//! The pipeline splits speech into three streams and recombines them:
//!
//! - content: soft distributions over discrete speech units ([`softunits`]),
//! - prosody: an F0 track at a 160-sample hop ([`f0`]),
//! - identity: a speaker embedding, replaced by a pseudo-speaker drawn from an
//!   external pool ([`pool`]).
//!
//! [`assembly`] concatenates the streams at the F0 frame rate, [`vocloss`] holds
//! the vocoder training objective, [`dsp`] has the shared signal primitives plus
//! the McAdams formant-shifting baseline, and [`eval`] implements the
//! privacy/utility protocol (EER, minDCF, WER/CER over OO/OA/AA/OR scenarios).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod f0;
pub mod feat;
pub mod pool;
pub mod seed;
pub mod softunits;
pub mod vocloss;

pub use assembly::{assemble, upsample_frames, AssembledFrames, AssemblyConfig, UpsampleMode};
pub use dsp::{frame_signal, lpc_coeffs, mcadams_anonymize, mel_spectrogram};
pub use dsp::{LpcFrame, McAdamsConfig, MelConfig, Waveform};
pub use error::{Error, Result};
pub use eval::{
    compute_eer, compute_min_dcf, error_rate, run_scenario, score_trials, MetricParams, Scenario,
    ScenarioReport, Trial, TrialLabel, TrialScore,
};
pub use f0::{extract_f0, nccf, F0Config, F0Track};
pub use pool::{
    cosine_distance, generate_pseudo_embedding, select_far_candidates, AnonymizationParams,
    EmbeddingPool, Gender, SpeakerEmbedding,
};
pub use softunits::{
    ce_loss, kmeans_fit, quantize, soft_distribution, train_soft_head, ContentFrames,
    DiscreteUnits, SoftUnitCodebook,
};
pub use vocloss::{
    adversarial_losses, feature_matching_loss, generator_loss, mel_loss, DiscriminatorFeatures,
    VocLossConfig,
};
