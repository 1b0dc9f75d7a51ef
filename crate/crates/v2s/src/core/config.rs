//! Training configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::path::Path;

use crate::core::types::LossWeights;
use crate::error::{Error, Result};

/// Everything a training run needs to be reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub critic_steps_per_gen_step: u32,
    /// Length of the random window (in seconds) cut from each clip for the
    /// adversarial losses.
    pub clip_seconds: f64,
    pub batch_size: usize,
    pub total_gen_steps: u64,
    pub seed: u64,
    pub enable_wave_critic: bool,
    pub enable_power_critic: bool,
    pub enable_pase_loss: bool,
    pub enable_power_loss: bool,
    pub enable_mfcc_loss: bool,
    /// Multiplier in (0, 1] applied to every channel width in the model;
    /// 1.0 is the full-size architecture.
    pub model_width_scale: f64,
    /// Save a checkpoint every this many generator steps.
    pub checkpoint_interval: u64,
    pub loss_weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.99,
            critic_steps_per_gen_step: 6,
            clip_seconds: 1.0,
            batch_size: 8,
            total_gen_steps: 2000,
            seed: 0,
            enable_wave_critic: true,
            enable_power_critic: true,
            enable_pase_loss: true,
            enable_power_loss: true,
            enable_mfcc_loss: true,
            model_width_scale: 1.0,
            checkpoint_interval: 500,
            loss_weights: LossWeights::default(),
        }
    }
}

/// Collects every constraint violation instead of stopping at the first,
/// so a bad config file can be fixed in one pass.
pub fn validate_config(config: &TrainConfig) -> Vec<String> {
    let mut violations = Vec::new();
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        violations.push("learning_rate must be > 0".to_string());
    }
    if config.critic_steps_per_gen_step < 1 {
        violations.push("critic_steps_per_gen_step must be ≥ 1".to_string());
    }
    if !(0.0..1.0).contains(&config.adam_beta1) {
        violations.push("adam_beta1 must be in [0, 1)".to_string());
    }
    if !(0.0..1.0).contains(&config.adam_beta2) {
        violations.push("adam_beta2 must be in [0, 1)".to_string());
    }
    if !(config.clip_seconds.is_finite() && config.clip_seconds > 0.0) {
        violations.push("clip_seconds must be > 0".to_string());
    }
    if config.batch_size < 1 {
        violations.push("batch_size must be ≥ 1".to_string());
    }
    if config.total_gen_steps < 1 {
        violations.push("total_gen_steps must be ≥ 1".to_string());
    }
    if !(config.model_width_scale.is_finite()
        && config.model_width_scale > 0.0
        && config.model_width_scale <= 1.0)
    {
        violations.push("model_width_scale must be in (0, 1]".to_string());
    }
    if config.checkpoint_interval < 1 {
        violations.push("checkpoint_interval must be ≥ 1".to_string());
    }
    if config.loss_weights.validate().is_err() {
        violations.push("loss weights must be non-negative".to_string());
    }
    violations
}

impl TrainConfig {
    /// Serializes to the flat `key = value` text format. Key order is fixed
    /// so two identical configs always produce identical bytes.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("learning_rate", format!("{}", self.learning_rate));
        kv("adam_beta1", format!("{}", self.adam_beta1));
        kv("adam_beta2", format!("{}", self.adam_beta2));
        kv(
            "critic_steps_per_gen_step",
            format!("{}", self.critic_steps_per_gen_step),
        );
        kv("clip_seconds", format!("{}", self.clip_seconds));
        kv("batch_size", format!("{}", self.batch_size));
        kv("total_gen_steps", format!("{}", self.total_gen_steps));
        kv("seed", format!("{}", self.seed));
        kv("enable_wave_critic", format!("{}", self.enable_wave_critic));
        kv(
            "enable_power_critic",
            format!("{}", self.enable_power_critic),
        );
        kv("enable_pase_loss", format!("{}", self.enable_pase_loss));
        kv("enable_power_loss", format!("{}", self.enable_power_loss));
        kv("enable_mfcc_loss", format!("{}", self.enable_mfcc_loss));
        kv("model_width_scale", format!("{}", self.model_width_scale));
        kv("checkpoint_interval", format!("{}", self.checkpoint_interval));
        kv("alpha_adv", format!("{}", self.loss_weights.alpha_adv));
        kv("alpha_pase", format!("{}", self.loss_weights.alpha_pase));
        kv("alpha_power", format!("{}", self.loss_weights.alpha_power));
        kv("alpha_mfcc", format!("{}", self.loss_weights.alpha_mfcc));
        kv("gp_lambda", format!("{}", self.loss_weights.gp_lambda));
        out
    }

    /// Parses the flat text format. Starts from defaults, so a partial file
    /// overrides only the keys it names. Unknown keys are errors: a typo'd
    /// key silently falling back to a default would be very hard to notice.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut config = TrainConfig::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {line_no}: expected `key = value`, got {raw_line:?}"))
            })?;
            let key = key.trim();
            let value = value.trim();
            config.set_key(key, value).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {line_no}: {msg}")),
                other => other,
            })?;
        }
        Ok(config)
    }

    fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        fn scalar(key: &str, value: &str) -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: expected a number, got {value:?}")))
        }
        fn integer<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse::<T>()
                .map_err(|_| Error::Config(format!("{key}: expected an integer, got {value:?}")))
        }
        fn boolean(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::Config(format!(
                    "{key}: expected true or false, got {value:?}"
                ))),
            }
        }

        match key {
            "learning_rate" => self.learning_rate = scalar(key, value)?,
            "adam_beta1" => self.adam_beta1 = scalar(key, value)?,
            "adam_beta2" => self.adam_beta2 = scalar(key, value)?,
            "critic_steps_per_gen_step" => {
                self.critic_steps_per_gen_step = integer(key, value)?
            }
            "clip_seconds" => self.clip_seconds = scalar(key, value)?,
            "batch_size" => self.batch_size = integer(key, value)?,
            "total_gen_steps" => self.total_gen_steps = integer(key, value)?,
            "seed" => self.seed = integer(key, value)?,
            "enable_wave_critic" => self.enable_wave_critic = boolean(key, value)?,
            "enable_power_critic" => self.enable_power_critic = boolean(key, value)?,
            "enable_pase_loss" => self.enable_pase_loss = boolean(key, value)?,
            "enable_power_loss" => self.enable_power_loss = boolean(key, value)?,
            "enable_mfcc_loss" => self.enable_mfcc_loss = boolean(key, value)?,
            "model_width_scale" => self.model_width_scale = scalar(key, value)?,
            "checkpoint_interval" => self.checkpoint_interval = integer(key, value)?,
            "alpha_adv" => self.loss_weights.alpha_adv = scalar(key, value)?,
            "alpha_pase" => self.loss_weights.alpha_pase = scalar(key, value)?,
            "alpha_power" => self.loss_weights.alpha_power = scalar(key, value)?,
            "alpha_mfcc" => self.loss_weights.alpha_mfcc = scalar(key, value)?,
            "gp_lambda" => self.loss_weights.gp_lambda = scalar(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
        Self::from_config_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_config_string())
            .map_err(|e| Error::io(path.to_path_buf(), e))
    }

    /// Number of whole video frames covered by `clip_seconds` at `frame_rate`.
    pub fn clip_frames(&self, frame_rate: u32) -> usize {
        (self.clip_seconds * frame_rate as f64).round() as usize
    }
}
