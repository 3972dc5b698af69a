//! Render job specifications for an external renderer.
//!
//! Each CAD model is viewed from cameras at every whole-degree azimuth on
//! five elevation rings. For every view a job samples the light direction,
//! luminous power, color temperature, aperture, shutter, vignetting and a
//! background patch. Jobs are descriptions only: nothing here renders.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

pub const ELEVATIONS_DEG: [i32; 5] = [-5, 0, 10, 20, 30];
pub const VIEWS_PER_MODEL: usize = 360 * ELEVATIONS_DEG.len();

pub const LIGHT_ELEVATION_RANGE_DEG: (f64, f64) = (10.0, 80.0);
pub const LUMINOUS_POWER_RANGE_LM: (f64, f64) = (1400.0, 10000.0);
pub const F_STOP_RANGE: (f64, f64) = (2.7, 8.3);
pub const SHUTTER_RANGE_S: (f64, f64) = (1.0 / 200.0, 1.0 / 25.0);
pub const VIGNETTING_PROBABILITY: f64 = 0.25;
pub const DEFAULT_BACKGROUND_POOL: u32 = 10_000;
pub const DEFAULT_AUGMENT_COPIES: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QualityTier {
    SimpleMaterialAmbient,
    ComplexMaterialAmbient,
    ComplexMaterialDirectional,
}

impl QualityTier {
    pub fn is_ambient(self) -> bool {
        !matches!(self, QualityTier::ComplexMaterialDirectional)
    }
}

impl fmt::Display for QualityTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QualityTier::SimpleMaterialAmbient => "SimpleMaterialAmbient",
            QualityTier::ComplexMaterialAmbient => "ComplexMaterialAmbient",
            QualityTier::ComplexMaterialDirectional => "ComplexMaterialDirectional",
        })
    }
}

impl FromStr for QualityTier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SimpleMaterialAmbient" | "simple" => Ok(QualityTier::SimpleMaterialAmbient),
            "ComplexMaterialAmbient" | "complex-ambient" => Ok(QualityTier::ComplexMaterialAmbient),
            "ComplexMaterialDirectional" | "directional" => {
                Ok(QualityTier::ComplexMaterialDirectional)
            }
            other => Err(Error::input(format!("unknown quality tier {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct View {
    pub azimuth_deg: u16,
    pub elevation_deg: i32,
}

/// One render request. Ambient tiers carry `null` for every light field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderJobSpec {
    pub model_id: String,
    pub azimuth_deg: u16,
    pub elevation_deg: i32,
    pub light_azimuth_deg: Option<f64>,
    pub light_elevation_deg: Option<f64>,
    pub luminous_power_lm: Option<f64>,
    pub temperature_profile: Option<String>,
    pub f_stop: f64,
    pub shutter_s: f64,
    pub vignetting: bool,
    pub background_patch_id: String,
    pub quality_tier: QualityTier,
    pub seed: u64,
    /// Augmented variants to derive from this render.
    pub augment_copies: u32,
    /// Camera sphere radius, passed through verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere_radius: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOptions {
    pub background_pool: u32,
    pub augment_copies: u32,
    pub sphere_radius: Option<String>,
    /// Per-model luminous power scale; models not listed use 1.
    pub power_multiplier: HashMap<String, f64>,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            background_pool: DEFAULT_BACKGROUND_POOL,
            augment_copies: DEFAULT_AUGMENT_COPIES,
            sphere_radius: None,
            power_multiplier: HashMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureProfile {
    pub name: &'static str,
    pub kelvin: f64,
    /// Per-channel gains, normalized so the largest is 1.
    pub rgb_gain: [f64; 3],
}

const PROFILES: [(&str, f64); 9] = [
    ("candle_flame", 2000.0),
    ("tungsten_light_bulb", 2700.0),
    ("halogen_light", 3200.0),
    ("fluorescent_light", 4000.0),
    ("late_afternoon_sun", 4800.0),
    ("midday_sun", 5500.0),
    ("overcast_sky", 6500.0),
    ("open_shade", 7500.0),
    ("clear_blue_sky", 10000.0),
];

/// Approximate sRGB of a black body at `kelvin` (Helland's curve fit to the
/// Planckian locus, valid for 1000–40000 K), channels in `[0, 255]`.
pub fn planckian_rgb(kelvin: f64) -> [f64; 3] {
    let t = kelvin / 100.0;
    let red = if t <= 66.0 {
        255.0
    } else {
        329.698727446 * (t - 60.0).powf(-0.1332047592)
    };
    let green = if t <= 66.0 {
        99.4708025861 * t.ln() - 161.1195681661
    } else {
        288.1221695283 * (t - 60.0).powf(-0.0755148492)
    };
    let blue = if t >= 66.0 {
        255.0
    } else if t <= 19.0 {
        0.0
    } else {
        138.5177312231 * (t - 10.0).ln() - 305.0447927307
    };
    [red, green, blue].map(|c| c.clamp(0.0, 255.0))
}

pub fn temperature_profile_table() -> Vec<TemperatureProfile> {
    PROFILES
        .iter()
        .map(|&(name, kelvin)| {
            let rgb = planckian_rgb(kelvin);
            let max = rgb.iter().copied().fold(0.0, f64::max);
            TemperatureProfile {
                name,
                kelvin,
                rgb_gain: rgb.map(|c| c / max),
            }
        })
        .collect()
}

/// Every (azimuth, elevation) pair, azimuth-major.
pub fn enumerate_views() -> Vec<View> {
    (0..360u16)
        .flat_map(|az| {
            ELEVATIONS_DEG.iter().map(move |&el| View {
                azimuth_deg: az,
                elevation_deg: el,
            })
        })
        .collect()
}

/// Samples every job parameter from `seed`. All parameters are drawn in a
/// fixed order for every tier, so tiers differ only in the blanked light fields.
pub fn sample_job(
    model_id: &str,
    view: View,
    tier: QualityTier,
    seed: u64,
    opts: &GeneratorOptions,
) -> RenderJobSpec {
    let mut rng = rng_from_seed(seed);
    let light_azimuth = rng.gen_range(0.0..360.0);
    // Uniform over the spherical band: sin(elevation) is uniform.
    let (lo, hi) = LIGHT_ELEVATION_RANGE_DEG;
    let z: f64 = rng.gen_range(lo.to_radians().sin()..=hi.to_radians().sin());
    let light_elevation = z.asin().to_degrees().clamp(lo, hi);
    let power = rng.gen_range(LUMINOUS_POWER_RANGE_LM.0..=LUMINOUS_POWER_RANGE_LM.1)
        * opts.power_multiplier.get(model_id).copied().unwrap_or(1.0);
    let profile = rng.gen_range(0..PROFILES.len() as u32) as usize;
    let f_stop = rng.gen_range(F_STOP_RANGE.0..=F_STOP_RANGE.1);
    let shutter = rng.gen_range(SHUTTER_RANGE_S.0..=SHUTTER_RANGE_S.1);
    let vignetting = rng.gen_bool(VIGNETTING_PROBABILITY);
    let background = rng.gen_range(0..opts.background_pool.max(1));

    let directional = !tier.is_ambient();
    RenderJobSpec {
        model_id: model_id.to_string(),
        azimuth_deg: view.azimuth_deg,
        elevation_deg: view.elevation_deg,
        light_azimuth_deg: directional.then_some(light_azimuth),
        light_elevation_deg: directional.then_some(light_elevation),
        luminous_power_lm: directional.then_some(power),
        temperature_profile: directional.then(|| PROFILES[profile].0.to_string()),
        f_stop,
        shutter_s: shutter,
        vignetting,
        background_patch_id: format!("bg{background:05}"),
        quality_tier: tier,
        seed,
        augment_copies: opts.augment_copies,
        sphere_radius: opts.sphere_radius.clone(),
    }
}

pub fn job_seed(root: u64, model_id: &str, view: View) -> u64 {
    derive_seed(
        root,
        &format!("job/{model_id}/{}/{}", view.azimuth_deg, view.elevation_deg),
    )
}

/// All jobs for `models`, model by model, views in [`enumerate_views`] order.
pub fn generate_jobs<'a>(
    models: &'a [String],
    tier: QualityTier,
    root_seed: u64,
    opts: &'a GeneratorOptions,
) -> impl Iterator<Item = RenderJobSpec> + 'a {
    let views = enumerate_views();
    models.iter().flat_map(move |m| {
        views
            .clone()
            .into_iter()
            .map(move |v| sample_job(m, v, tier, job_seed(root_seed, m, v), opts))
    })
}

pub fn write_jobs<W: Write>(
    jobs: impl Iterator<Item = RenderJobSpec>,
    mut out: W,
) -> Result<usize> {
    let mut n = 0;
    for job in jobs {
        serde_json::to_writer(&mut out, &job)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("writing job specs", e))?;
        n += 1;
    }
    out.flush().map_err(|e| Error::io("writing job specs", e))?;
    Ok(n)
}

pub fn read_jobs<R: BufRead>(input: R) -> Result<Vec<RenderJobSpec>> {
    let mut jobs = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("reading job specs", e))?;
        if !line.trim().is_empty() {
            jobs.push(serde_json::from_str(&line)?);
        }
    }
    Ok(jobs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSplit {
    pub train_model_ids: Vec<String>,
    pub test_model_ids: Vec<String>,
}

/// Holds out the model at `holdout_index` for testing.
pub fn make_split(model_ids: &[String], holdout_index: usize) -> Result<ModelSplit> {
    if model_ids.len() < 2 {
        return Err(Error::input("a split needs at least two models"));
    }
    let mut seen = HashSet::new();
    for id in model_ids {
        if !seen.insert(id) {
            return Err(Error::input(format!("duplicate model id {id:?}")));
        }
    }
    if holdout_index >= model_ids.len() {
        return Err(Error::input(format!(
            "holdout index {holdout_index} out of range for {} models",
            model_ids.len()
        )));
    }
    let mut train = model_ids.to_vec();
    let test = train.remove(holdout_index);
    Ok(ModelSplit {
        train_model_ids: train,
        test_model_ids: vec![test],
    })
}
