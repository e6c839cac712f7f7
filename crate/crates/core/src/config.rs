//! Training configuration and its flat `key = value` text form.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Unknown keys are rejected. Serialization writes every key, so a
//! written config reproduces a run on its own.

use std::fmt;
use std::str::FromStr;

use crate::enhance::CycleMode;
use crate::error::{Error, Result};
use crate::optim::AdamConfig;

/// Ablation variant of the pipeline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Variant {
    #[default]
    Full,
    /// No head/tail/relation-aware attention; `S` is the projected specificity.
    WithoutEnsemble,
    /// No type space; the enhancer consumes `S` directly.
    WithoutType,
    /// No cycle co-enhancement; only neighbor re-aggregation.
    WithoutCycle,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::WithoutEnsemble,
        Variant::WithoutType,
        Variant::WithoutCycle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::WithoutEnsemble => "wo-E",
            Variant::WithoutType => "wo-T",
            Variant::WithoutCycle => "wo-C",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Variant::Full),
            "wo-e" => Ok(Variant::WithoutEnsemble),
            "wo-t" => Ok(Variant::WithoutType),
            "wo-c" => Ok(Variant::WithoutCycle),
            _ => Err(Error::Config(format!(
                "unknown variant {s:?} (expected full, wo-E, wo-T or wo-C)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub margin: f64,
    pub neg_k: usize,
    pub neg_refresh_epochs: usize,
    /// Use all k nearest neighbors as negatives instead of sampling one per side.
    pub neg_sample_all: bool,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub cycle_mode: CycleMode,
    pub variant: Variant,
    pub semi: bool,
    pub seed: u64,
    /// Entity width; `None` takes it from the name embeddings.
    pub d_e: Option<usize>,
    pub d_r: usize,
    pub d_t: usize,
    pub gcn_depth: usize,
    pub train_ratio: f64,
    pub leaky_slope: f64,
    /// Evaluate every this many epochs (0 = never) during training.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 3.0,
            neg_k: 5,
            neg_refresh_epochs: 5,
            neg_sample_all: true,
            epochs: 50,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            cycle_mode: CycleMode::HeadTailHead,
            variant: Variant::Full,
            semi: false,
            seed: 0,
            d_e: None,
            d_r: 100,
            d_t: 100,
            gcn_depth: 2,
            train_ratio: 0.30,
            leaky_slope: 0.3,
            eval_every: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.margin.is_nan() || self.margin <= 0.0 {
            return bad(format!("margin must be > 0, got {}", self.margin));
        }
        if self.neg_k == 0 {
            return bad("neg_k must be >= 1".into());
        }
        if self.neg_refresh_epochs == 0 {
            return bad("neg_refresh_epochs must be >= 1".into());
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return bad(format!("train_ratio must be in (0, 1), got {}", self.train_ratio));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if self.d_r == 0 || self.d_t == 0 || self.d_e == Some(0) {
            return bad("dimensions must be positive".into());
        }
        if self.gcn_depth == 0 {
            return bad("gcn_depth must be >= 1".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "margin" => self.margin = parse(key, v)?,
            "neg_k" => self.neg_k = parse(key, v)?,
            "neg_refresh_epochs" => self.neg_refresh_epochs = parse(key, v)?,
            "neg_sample_all" => self.neg_sample_all = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "beta1" => self.beta1 = parse(key, v)?,
            "beta2" => self.beta2 = parse(key, v)?,
            "adam_eps" => self.adam_eps = parse(key, v)?,
            "cycle_mode" => self.cycle_mode = CycleMode::from_number(parse(key, v)?)?,
            "variant" => self.variant = v.parse()?,
            "semi" => self.semi = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "d_e" => self.d_e = if v == "auto" { None } else { Some(parse(key, v)?) },
            "d_r" => self.d_r = parse(key, v)?,
            "d_t" => self.d_t = parse(key, v)?,
            "gcn_depth" => self.gcn_depth = parse(key, v)?,
            "train_ratio" => self.train_ratio = parse(key, v)?,
            "leaky_slope" => self.leaky_slope = parse(key, v)?,
            "eval_every" => self.eval_every = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Layers `text` over `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let d_e = self.d_e.map_or_else(|| "auto".to_string(), |d| d.to_string());
        let entries: [(&str, String); 20] = [
            ("margin", self.margin.to_string()),
            ("neg_k", self.neg_k.to_string()),
            ("neg_refresh_epochs", self.neg_refresh_epochs.to_string()),
            ("neg_sample_all", self.neg_sample_all.to_string()),
            ("epochs", self.epochs.to_string()),
            ("lr", self.lr.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("adam_eps", self.adam_eps.to_string()),
            ("cycle_mode", self.cycle_mode.number().to_string()),
            ("variant", self.variant.to_string()),
            ("semi", self.semi.to_string()),
            ("seed", self.seed.to_string()),
            ("d_e", d_e),
            ("d_r", self.d_r.to_string()),
            ("d_t", self.d_t.to_string()),
            ("gcn_depth", self.gcn_depth.to_string()),
            ("train_ratio", self.train_ratio.to_string()),
            ("leaky_slope", self.leaky_slope.to_string()),
            ("eval_every", self.eval_every.to_string()),
        ];
        entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
