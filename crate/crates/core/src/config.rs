//! Flat `key=value` experiment configs.
//!
//! Keys are the field names of [`AugmentConfig`] and [`TrainConfig`]. Blank
//! lines and `#` comments are ignored; unknown or repeated keys are errors.
//! The training loss is spelled `loss=sm|wsm` plus `sigma`, `variant` and
//! `truncation_radius` for the weighted form.

use std::path::Path;

use crate::augment::AugmentConfig;
use crate::circular::{KernelConfig, KernelVariant};
use crate::error::{Error, Result};
use crate::trainer::{LossKind, TrainConfig};

/// Kernel width used when a config asks for `wsm` without a `sigma`.
pub const DEFAULT_SIGMA: f64 = 2.0;

const AUGMENT_KEYS: &[&str] = &[
    "jpeg_quality",
    "color_cast_prob_per_channel",
    "color_cast_range",
    "channel_swap_prob",
    "degrade_fraction",
    "degrade_target_area",
    "occlusion_fraction",
    "occlusion_size_range",
    "crop_prob",
    "crop_fraction",
    "seed",
];

const TRAIN_KEYS: &[&str] = &[
    "k",
    "loss",
    "sigma",
    "variant",
    "truncation_radius",
    "learning_rate",
    "epochs",
    "batch_size",
    "seed",
    "hidden_units",
    "blend_ratio",
    "train_size",
    "image_size",
];

/// Ordered `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::input(format!("config line {}: expected key=value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if pairs.iter().any(|(seen, _)| seen == k) {
            return Err(Error::input(format!(
                "config line {}: repeated key {k:?}",
                n + 1
            )));
        }
        pairs.push((k.to_string(), v.to_string()));
    }
    Ok(pairs)
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_pairs(&text)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::input(format!("bad value {value:?} for {key}")))
}

fn parse_opt<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

fn check_keys(pairs: &[(String, String)], allowed: &[&str], what: &str) -> Result<()> {
    for (k, _) in pairs {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::input(format!("unknown {what} config key {k:?}")));
        }
    }
    Ok(())
}

/// Overrides fields of `base` with the pairs.
pub fn augment_from_pairs(
    pairs: &[(String, String)],
    base: AugmentConfig,
) -> Result<AugmentConfig> {
    check_keys(pairs, AUGMENT_KEYS, "augment")?;
    let mut c = base;
    for (k, v) in pairs {
        match k.as_str() {
            "jpeg_quality" => c.jpeg_quality = parse(k, v)?,
            "color_cast_prob_per_channel" => c.color_cast_prob_per_channel = parse(k, v)?,
            "color_cast_range" => c.color_cast_range = parse(k, v)?,
            "channel_swap_prob" => c.channel_swap_prob = parse(k, v)?,
            "degrade_fraction" => c.degrade_fraction = parse(k, v)?,
            "degrade_target_area" => c.degrade_target_area = parse_opt(k, v)?,
            "occlusion_fraction" => c.occlusion_fraction = parse(k, v)?,
            "occlusion_size_range" => {
                let (lo, hi) = v
                    .split_once(',')
                    .ok_or_else(|| Error::input("occlusion_size_range must be lo,hi"))?;
                c.occlusion_size_range = (parse(k, lo.trim())?, parse(k, hi.trim())?);
            }
            "crop_prob" => c.crop_prob = parse(k, v)?,
            "crop_fraction" => c.crop_fraction = parse(k, v)?,
            "seed" => c.seed = parse(k, v)?,
            _ => unreachable!(),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn augment_to_text(c: &AugmentConfig) -> String {
    format!(
        "jpeg_quality={}\ncolor_cast_prob_per_channel={}\ncolor_cast_range={}\n\
         channel_swap_prob={}\ndegrade_fraction={}\ndegrade_target_area={}\n\
         occlusion_fraction={}\nocclusion_size_range={},{}\ncrop_prob={}\n\
         crop_fraction={}\nseed={}\n",
        c.jpeg_quality,
        c.color_cast_prob_per_channel,
        c.color_cast_range,
        c.channel_swap_prob,
        c.degrade_fraction,
        fmt_opt(c.degrade_target_area),
        c.occlusion_fraction,
        c.occlusion_size_range.0,
        c.occlusion_size_range.1,
        c.crop_prob,
        c.crop_fraction,
        c.seed,
    )
}

pub fn train_from_pairs(pairs: &[(String, String)], base: TrainConfig) -> Result<TrainConfig> {
    check_keys(pairs, TRAIN_KEYS, "train")?;
    let mut c = base;
    let (mut weighted, mut sigma, mut variant, mut trunc) = match c.loss {
        LossKind::SoftMax => (false, DEFAULT_SIGMA, KernelVariant::default(), None),
        LossKind::Weighted(k) => (true, k.sigma(), k.variant(), k.truncation_radius()),
    };
    for (k, v) in pairs {
        match k.as_str() {
            "k" => c.k = parse(k, v)?,
            "loss" => {
                weighted = match v.as_str() {
                    "sm" => false,
                    "wsm" => true,
                    _ => return Err(Error::input(format!("loss must be sm or wsm, got {v:?}"))),
                }
            }
            "sigma" => sigma = parse(k, v)?,
            "variant" => variant = v.parse()?,
            "truncation_radius" => trunc = parse_opt(k, v)?,
            "learning_rate" => c.learning_rate = parse(k, v)?,
            "epochs" => c.epochs = parse(k, v)?,
            "batch_size" => c.batch_size = parse(k, v)?,
            "seed" => c.seed = parse(k, v)?,
            "hidden_units" => c.hidden_units = parse(k, v)?,
            "blend_ratio" => c.blend_ratio = parse(k, v)?,
            "train_size" => c.train_size = parse_opt(k, v)?,
            "image_size" => c.image_size = parse(k, v)?,
            _ => unreachable!(),
        }
    }
    c.loss = if weighted {
        LossKind::Weighted(KernelConfig::new(sigma, variant, trunc)?)
    } else {
        LossKind::SoftMax
    };
    c.validate()?;
    Ok(c)
}

pub fn train_to_text(c: &TrainConfig) -> String {
    let loss = match c.loss {
        LossKind::SoftMax => "loss=sm\n".to_string(),
        LossKind::Weighted(k) => format!(
            "loss=wsm\nsigma={}\nvariant={}\ntruncation_radius={}\n",
            k.sigma(),
            k.variant(),
            fmt_opt(k.truncation_radius())
        ),
    };
    format!(
        "k={}\n{loss}learning_rate={}\nepochs={}\nbatch_size={}\nseed={}\n\
         hidden_units={}\nblend_ratio={}\ntrain_size={}\nimage_size={}\n",
        c.k,
        c.learning_rate,
        c.epochs,
        c.batch_size,
        c.seed,
        c.hidden_units,
        c.blend_ratio,
        fmt_opt(c.train_size),
        c.image_size,
    )
}
