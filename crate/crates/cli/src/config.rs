//! `RunConfig`: every tunable of every subcommand in one flat key=value file.
//!
//! Lines are `key=value`; blank lines and `#` comments are ignored. Keys not
//! listed in the file keep their defaults, and command-line flags are
//! applied on top afterwards.

use std::str::FromStr;

use anyhow::{bail, Context, Result};
use voxanon_core::dsp::SAMPLE_RATE;
use voxanon_core::eval::{AnonymizationPolicy, ErrorUnit};
use voxanon_core::softunits::{ContentMode, SoftTrainConfig};
use voxanon_core::{
    AnonymizationParams, AssemblyConfig, F0Config, McAdamsConfig, MelConfig, MetricParams,
    UpsampleMode, VocLossConfig,
};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Root of every derived seed.
    pub seed: u64,
    pub verbosity: u8,
    /// Worker threads; 0 lets the runtime decide.
    pub jobs: usize,
    pub anon: AnonymizationParams,
    pub policy: AnonymizationPolicy,
    pub share_pseudo_across_sides: bool,
    pub mcadams: McAdamsConfig,
    pub f0: F0Config,
    pub mel: MelConfig,
    pub kmeans_k: usize,
    pub kmeans_max_iters: usize,
    pub soft: SoftTrainConfig,
    pub content_mode: ContentMode,
    pub assembly: AssemblyConfig,
    pub lambda_fm: f64,
    pub lambda_mel: f64,
    pub metric: MetricParams,
    pub unit: ErrorUnit,
}

impl Default for RunConfig {
    fn default() -> Self {
        let voc = VocLossConfig::default();
        Self {
            seed: 0,
            verbosity: 0,
            jobs: 0,
            anon: AnonymizationParams::default(),
            policy: AnonymizationPolicy::default(),
            share_pseudo_across_sides: false,
            mcadams: McAdamsConfig::default(),
            f0: F0Config::default(),
            mel: MelConfig::default(),
            kmeans_k: 200,
            kmeans_max_iters: 100,
            soft: SoftTrainConfig::default(),
            content_mode: ContentMode::default(),
            assembly: AssemblyConfig::default(),
            lambda_fm: voc.lambda_fm,
            lambda_mel: voc.lambda_mel,
            metric: MetricParams::default(),
            unit: ErrorUnit::default(),
        }
    }
}

trait Value: Sized {
    fn show(&self) -> String;
    fn read(s: &str) -> Option<Self>;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn show(&self) -> String {
                // Debug keeps the shortest round-trip form and a `.0` on floats
                format!("{self:?}")
            }
            fn read(s: &str) -> Option<Self> {
                s.parse().ok()
            }
        }
    )*};
}
plain_value!(u8, u64, usize, f64, bool);

macro_rules! named_value {
    ($($t:ty { $($name:literal => $variant:expr),+ }),*) => {$(
        impl Value for $t {
            fn show(&self) -> String {
                $(if *self == $variant { return $name.into(); })+
                unreachable!()
            }
            fn read(s: &str) -> Option<Self> {
                <$t>::from_str(s).ok()
            }
        }
    )*};
}
named_value!(
    AnonymizationPolicy {
        "per-utterance" => AnonymizationPolicy::PerUtterance,
        "per-speaker" => AnonymizationPolicy::PerSpeaker
    },
    ContentMode { "soft" => ContentMode::Soft, "raw" => ContentMode::Raw },
    UpsampleMode { "repeat" => UpsampleMode::Repeat, "linear" => UpsampleMode::Linear },
    ErrorUnit { "word" => ErrorUnit::Word, "char" => ErrorUnit::Char }
);

macro_rules! keys {
    ($($key:literal => $($field:ident).+),* $(,)?) => {
        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$($key),*];

            /// Every key, one per line, in a fixed order.
            pub fn to_text(&self) -> String {
                let mut out = String::new();
                $(
                    out.push_str($key);
                    out.push('=');
                    out.push_str(&Value::show(&self.$($field).+));
                    out.push('\n');
                )*
                out
            }

            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $($key => {
                        self.$($field).+ = Value::read(value).ok_or_else(|| {
                            UsageError(format!("bad value `{value}` for `{key}`"))
                        })?;
                    })*
                    _ => bail!(UsageError(format!("unknown config key `{key}`"))),
                }
                Ok(())
            }
        }
    };
}

keys! {
    "seed" => seed,
    "verbosity" => verbosity,
    "jobs" => jobs,
    "anon.n_far" => anon.n_far,
    "anon.n_avg" => anon.n_avg,
    "anon.policy" => policy,
    "anon.share_pseudo_across_sides" => share_pseudo_across_sides,
    "mcadams.alpha" => mcadams.alpha,
    "mcadams.frame_len" => mcadams.frame_len,
    "mcadams.hop" => mcadams.hop,
    "mcadams.order" => mcadams.order,
    "mcadams.max_pole_radius" => mcadams.max_pole_radius,
    "f0.f_min" => f0.f_min,
    "f0.f_max" => f0.f_max,
    "f0.frame_len" => f0.frame_len,
    "f0.hop" => f0.hop,
    "f0.nccf_threshold" => f0.nccf_threshold,
    "f0.dp_transition_cost" => f0.dp_transition_cost,
    "f0.lag_weight" => f0.lag_weight,
    "f0.max_candidates" => f0.max_candidates,
    "mel.n_fft" => mel.n_fft,
    "mel.hop" => mel.hop,
    "mel.win" => mel.win,
    "mel.n_mels" => mel.n_mels,
    "mel.f_min" => mel.f_min,
    "mel.f_max" => mel.f_max,
    "kmeans.k" => kmeans_k,
    "kmeans.max_iters" => kmeans_max_iters,
    "soft.num_units" => soft.num_units,
    "soft.embed_dim" => soft.embed_dim,
    "soft.tau" => soft.tau,
    "soft.lr" => soft.lr,
    "soft.epochs" => soft.epochs,
    "soft.batch_size" => soft.batch_size,
    "soft.content_mode" => content_mode,
    "assembly.upsample" => assembly.upsample,
    "assembly.max_length_mismatch" => assembly.max_length_mismatch,
    "losses.lambda_fm" => lambda_fm,
    "losses.lambda_mel" => lambda_mel,
    "eval.c_fa" => metric.c_fa,
    "eval.c_miss" => metric.c_miss,
    "eval.p_target" => metric.p_target,
    "eval.unit" => unit,
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("config line {}: expected key=value", i + 1)))?;
            cfg.set(k.trim(), v.trim())
                .with_context(|| format!("config line {}", i + 1))?;
        }
        Ok(cfg)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, pairs: &[S]) -> Result<()> {
        for p in pairs {
            let p = p.as_ref();
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| UsageError(format!("override `{p}`: expected key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn voc_loss(&self) -> VocLossConfig {
        VocLossConfig {
            lambda_fm: self.lambda_fm,
            lambda_mel: self.lambda_mel,
            mel: self.mel,
            ..VocLossConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            self.anon.validate(),
            self.mcadams.validate(),
            self.f0.validate(SAMPLE_RATE),
            self.mel.validate(SAMPLE_RATE),
            self.soft.validate(),
            self.voc_loss().validate(),
            self.metric.validate(),
        ];
        for c in checks {
            c.map_err(|e| UsageError(format!("invalid configuration: {e}")))?;
        }
        if self.kmeans_k == 0 || self.kmeans_max_iters == 0 {
            bail!(UsageError(
                "kmeans.k and kmeans.max_iters must be positive".into()
            ));
        }
        Ok(())
    }
}

/// Sets `target` when the flag was given.
pub fn flag<T: Copy>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_lossless() {
        let mut cfg = RunConfig {
            seed: u64::MAX,
            lambda_fm: 0.1 + 0.2,
            policy: AnonymizationPolicy::PerSpeaker,
            unit: ErrorUnit::Char,
            ..Default::default()
        };
        cfg.mcadams.alpha = 1.0 / 3.0;
        cfg.metric.p_target = 1e-300;
        let text = cfg.to_text();
        assert_eq!(RunConfig::from_text(&text).unwrap(), cfg);
        assert_eq!(text.lines().count(), RunConfig::KEYS.len());
    }

    #[test]
    fn defaults_and_overrides() {
        let mut cfg = RunConfig::from_text("# comment\n\nanon.n_far = 50\n").unwrap();
        assert_eq!(cfg.anon.n_far, 50);
        assert_eq!(cfg.lambda_fm, 2.0);
        assert_eq!(cfg.lambda_mel, 45.0);
        cfg.apply_overrides(&["anon.n_far=20", "soft.content_mode=raw"])
            .unwrap();
        assert_eq!(cfg.anon.n_far, 20);
        assert_eq!(cfg.content_mode, ContentMode::Raw);
    }

    #[test]
    fn bad_input_is_a_usage_error() {
        for text in ["nope=1", "seed=-1", "seed", "anon.policy=sometimes"] {
            let err = RunConfig::from_text(text).unwrap_err();
            assert!(err.chain().any(|e| e.is::<UsageError>()), "{text}");
        }
        let cfg = RunConfig::from_text("anon.n_avg=300").unwrap();
        assert!(cfg.validate().is_err());
    }
}
