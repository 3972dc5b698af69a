//! Command-line front end.
//!
//! Each subcommand is a pure function of its input files, flags and root
//! seed. Errors map to exit codes through [`Error::exit_code`].

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::augment::{
    area_percentile, augment_pipeline, list_images, read_box_areas, replay, AugmentConfig,
    AugmentRecord, PatchSource,
};
use crate::balance::{
    apply_plan, bin_counts, plan_adaptive, plan_random, write_plans, BalanceMethod,
};
use crate::circular::{CircularLabelSpace, KernelConfig, KernelVariant};
use crate::config::{augment_from_pairs, read_pairs, train_from_pairs, DEFAULT_SIGMA};
use crate::error::{Error, Result};
use crate::glyph::{make_glyph_dataset, render_glyph, LabelDistribution, DEFAULT_SIZE};
use crate::manifest::{DatasetManifest, Source};
use crate::metrics::{EvalReport, DEFAULT_BINS, DEFAULT_CORRECT_WITHIN_DEG};
use crate::rendergen::{generate_jobs, make_split, write_jobs, GeneratorOptions, QualityTier};
use crate::seed::derive_seed;
use crate::trainer::{log_to_csv, predict, train, LossKind, ModelParams, Samples, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "viewpoint", version, about = "Viewpoint estimation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one render job per (model, view) as JSON Lines.
    GenJobs(GenJobsArgs),
    /// Augment every image in a directory and write an audit log.
    Augment(AugmentArgs),
    /// Generate a glyph dataset manifest.
    Glyphs(GlyphsArgs),
    /// Add pool samples to a manifest to flatten its label histogram.
    Balance(BalanceArgs),
    /// Train a classifier and write its parameters.
    Train(TrainArgs),
    /// Evaluate a model or a predictions file against a manifest.
    Eval(EvalArgs),
    /// Tabulate evaluation reports.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenJobsArgs {
    /// Model ids, one per line.
    #[arg(long)]
    pub models: PathBuf,
    /// simple, complex-ambient or directional.
    #[arg(long)]
    pub tier: QualityTier,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Index of the model held out for testing.
    #[arg(long)]
    pub holdout: Option<usize>,
    /// Split file; defaults to `<out>.split.json`.
    #[arg(long)]
    pub split_out: Option<PathBuf>,
    #[arg(long, default_value_t = crate::rendergen::DEFAULT_AUGMENT_COPIES)]
    pub copies: u32,
    #[arg(long, default_value_t = crate::rendergen::DEFAULT_BACKGROUND_POOL)]
    pub background_pool: u32,
    #[arg(long)]
    pub sphere_radius: Option<String>,
    /// CSV of `model_id,multiplier` scaling luminous power per model.
    #[arg(long)]
    pub power_multipliers: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub audit: PathBuf,
    /// key=value file with augmentation settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Augmented copies per input image.
    #[arg(long, default_value_t = 1)]
    pub copies: u32,
    /// Directory of occluder images; solid colors when absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Object box areas, one per line; sets the degrade target area to
    /// their `--box-quantile` quantile unless the config sets one.
    #[arg(long)]
    pub box_areas: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    pub box_quantile: f64,
    /// Re-apply the operations of an existing audit instead of sampling.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistributionArg {
    Uniform,
    Peaked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Glyph,
    Synthetic,
}

#[derive(Debug, Args)]
pub struct GlyphsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = DistributionArg::Uniform)]
    pub distribution: DistributionArg,
    /// Draw uniform labels independently instead of exactly n/K per bin.
    #[arg(long)]
    pub sampled: bool,
    /// Peak bins for `peaked`; defaults to 0 and K/2.
    #[arg(long, value_delimiter = ',')]
    pub peaks: Vec<usize>,
    #[arg(long, default_value_t = 20.0)]
    pub peak_weight: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "g")]
    pub id_prefix: String,
    #[arg(long, value_enum, default_value_t = SourceArg::Glyph)]
    pub source: SourceArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write each glyph as a PNG here.
    #[arg(long)]
    pub png_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SIZE)]
    pub size: usize,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, default_value = "adaptive")]
    pub method: BalanceMethod,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Additions for `random`; defaults to what `adaptive` would add.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plan_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Sm,
    Wsm,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Real (or primary) training manifest.
    #[arg(long)]
    pub real: PathBuf,
    /// Synthetic pool blended in with `--blend`.
    #[arg(long)]
    pub synth: Option<PathBuf>,
    /// key=value file with training settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// squared or literal.
    #[arg(long)]
    pub variant: Option<KernelVariant>,
    #[arg(long)]
    pub truncation_radius: Option<usize>,
    #[arg(long)]
    pub blend: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub image_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch CSV log.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(
        long,
        conflicts_with = "predictions",
        required_unless_present = "predictions"
    )]
    pub params: Option<PathBuf>,
    /// CSV with `sample_id,pred_deg` columns.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value = "")]
    pub label: String,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_CORRECT_WITHIN_DEG)]
    pub within: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub per_bin: Option<PathBuf>,
    /// Write `sample_id,pred_deg` for every row.
    #[arg(long)]
    pub predictions_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report files written by `eval`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenJobs(a) => gen_jobs(&a),
        Command::Augment(a) => augment(&a),
        Command::Glyphs(a) => glyphs(&a),
        Command::Balance(a) => balance(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Eval(a) => eval(&a),
        Command::Report(a) => report(&a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn read_model_ids(path: &Path) -> Result<Vec<String>> {
    Ok(read_file(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn gen_jobs(a: &GenJobsArgs) -> Result<()> {
    let models = read_model_ids(&a.models)?;
    if models.is_empty() {
        return Err(Error::input(format!(
            "{} lists no models",
            a.models.display()
        )));
    }
    let mut power_multiplier = HashMap::new();
    if let Some(p) = &a.power_multipliers {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(p)?;
        for rec in rdr.records() {
            let rec = rec?;
            let (id, m) = (rec.get(0).unwrap_or(""), rec.get(1).unwrap_or(""));
            let m: f64 = m
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("bad power multiplier {m:?} for {id:?}")))?;
            power_multiplier.insert(id.trim().to_string(), m);
        }
    }
    let opts = GeneratorOptions {
        background_pool: a.background_pool,
        augment_copies: a.copies,
        sphere_radius: a.sphere_radius.clone(),
        power_multiplier,
    };
    // Validate the split before writing anything.
    let split = a.holdout.map(|h| make_split(&models, h)).transpose()?;
    let n = write_jobs(
        generate_jobs(&models, a.tier, a.seed, &opts),
        create(&a.out)?,
    )?;
    if let Some(split) = split {
        let path = a.split_out.clone().unwrap_or_else(|| {
            let mut p = a.out.clone().into_os_string();
            p.push(".split.json");
            p.into()
        });
        let mut text = serde_json::to_string(&split)?;
        text.push('\n');
        write_file(&path, text)?;
    }
    println!("jobs={n}");
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLine {
    pub input: String,
    pub output: String,
    pub seed: u64,
    pub ops: AugmentRecord,
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn save_png(img: &image::RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::input(format!("writing {}: {e}", path.display())))
}

fn augment(a: &AugmentArgs) -> Result<()> {
    let inputs = list_images(&a.input)?;
    if inputs.is_empty() {
        return Err(Error::input(format!(
            "no PNG or JPEG images in {}",
            a.input.display()
        )));
    }
    let source = match &a.corpus {
        Some(dir) => PatchSource::from_dir(dir)?,
        None => PatchSource::UniformColor,
    };
    std::fs::create_dir_all(&a.out)
        .map_err(|e| Error::io(format!("creating {}", a.out.display()), e))?;
    let load = |p: &Path| -> Result<image::RgbImage> {
        Ok(image::open(p)
            .map_err(|e| Error::input(format!("reading {}: {e}", p.display())))?
            .to_rgb8())
    };
    let mut audit = create(&a.audit)?;

    if let Some(replay_path) = &a.replay {
        let by_name: HashMap<String, &PathBuf> = inputs.iter().map(|p| (file_name(p), p)).collect();
        let text = read_file(replay_path)?;
        let mut n = 0;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let rec: AuditLine = serde_json::from_str(line)?;
            let src = by_name.get(&rec.input).ok_or_else(|| {
                Error::input(format!("audit refers to missing input {:?}", rec.input))
            })?;
            let out = replay(&load(src)?, &rec.ops, &source)?;
            save_png(&out, &a.out.join(&rec.output))?;
            serde_json::to_writer(&mut audit, &rec)?;
            audit
                .write_all(b"\n")
                .map_err(|e| Error::io("writing audit", e))?;
            n += 1;
        }
        audit.flush().map_err(|e| Error::io("writing audit", e))?;
        println!("replayed={n}");
        return Ok(());
    }

    let mut cfg = AugmentConfig::default();
    if let Some(p) = &a.config {
        cfg = augment_from_pairs(&read_pairs(p)?, cfg)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let (Some(p), None) = (&a.box_areas, cfg.degrade_target_area) {
        let q = area_percentile(&read_box_areas(p)?, a.box_quantile)?;
        cfg.degrade_target_area = Some(q.round().max(1.0) as u64);
    }
    cfg.validate()?;

    let mut n = 0;
    for path in &inputs {
        let img = load(path)?;
        let name = file_name(path);
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        for copy in 0..a.copies {
            let seed = derive_seed(cfg.seed, &format!("augment/{name}/{copy}"));
            let (out, ops) = augment_pipeline(&img, &cfg, seed, &source)?;
            let output = format!("{stem}_a{copy}.png");
            save_png(&out, &a.out.join(&output))?;
            let line = AuditLine {
                input: name.clone(),
                output,
                seed,
                ops,
            };
            serde_json::to_writer(&mut audit, &line)?;
            audit
                .write_all(b"\n")
                .map_err(|e| Error::io("writing audit", e))?;
            n += 1;
        }
    }
    audit.flush().map_err(|e| Error::io("writing audit", e))?;
    println!("augmented={n}");
    Ok(())
}

fn glyphs(a: &GlyphsArgs) -> Result<()> {
    let space = CircularLabelSpace::new(a.k)?;
    let dist = match a.distribution {
        DistributionArg::Uniform if a.sampled => LabelDistribution::Weights(vec![1.0; a.k]),
        DistributionArg::Uniform => LabelDistribution::uniform_counts(a.n, a.k),
        DistributionArg::Peaked => {
            let peaks = if a.peaks.is_empty() {
                vec![0, a.k / 2]
            } else {
                a.peaks.clone()
            };
            if let Some(p) = peaks.iter().find(|&&p| p >= a.k) {
                return Err(Error::input(format!(
                    "peak bin {p} out of range for K={}",
                    a.k
                )));
            }
            if !(a.peak_weight >= 0.0 && a.peak_weight.is_finite()) {
                return Err(Error::input("peak weight must be non-negative"));
            }
            LabelDistribution::peaked(a.k, &peaks, a.peak_weight)
        }
    };
    let mut manifest = make_glyph_dataset(a.n, &dist, space, a.seed)?;
    for (i, row) in manifest.rows.iter_mut().enumerate() {
        row.sample_id = format!("{}{i:06}", a.id_prefix);
        if a.source == SourceArg::Synthetic {
            row.source = Source::Synthetic;
        }
    }
    if let Some(dir) = &a.png_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        for row in &manifest.rows {
            let theta = row.glyph_theta().expect("glyph rows carry their angle");
            let g = render_glyph(theta, a.size, row.seed)?;
            let path = dir.join(format!("{}.png", row.sample_id));
            g.to_gray8()
                .save_with_format(&path, image::ImageFormat::Png)
                .map_err(|e| Error::input(format!("writing {}: {e}", path.display())))?;
        }
    }
    manifest.save(&a.out)?;
    println!("samples={}", manifest.len());
    Ok(())
}

fn balance(a: &BalanceArgs) -> Result<()> {
    let space = CircularLabelSpace::new(a.k)?;
    let real = DatasetManifest::load(&a.manifest)?;
    let pool = DatasetManifest::load(&a.pool)?;
    real.validate(&space)?;
    pool.validate(&space)?;
    let h = bin_counts(&real, a.k)?;
    let plan = match a.method {
        BalanceMethod::Adaptive => plan_adaptive(&h, a.budget)?,
        BalanceMethod::Random => {
            let free = plan_adaptive(&h, None)?.total();
            let n = a.n.unwrap_or(free);
            let n = a.budget.map_or(n, |b| n.min(b));
            plan_random(n, a.k, derive_seed(a.seed, "balance/plan"))?
        }
    };
    let out = apply_plan(&real, &pool, &plan, a.seed)?;
    out.save(&a.out)?;
    if let Some(p) = &a.plan_out {
        let mut w = create(p)?;
        write_plans(std::slice::from_ref(&plan), &mut w)?;
        w.flush().map_err(|e| Error::io("writing plan", e))?;
    }
    println!("additions={}", plan.total());
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(p) = &a.config {
        cfg = train_from_pairs(&read_pairs(p)?, cfg)?;
    }
    let (mut sigma, mut variant, mut trunc) = match cfg.loss {
        LossKind::Weighted(k) => (k.sigma(), k.variant(), k.truncation_radius()),
        LossKind::SoftMax => (DEFAULT_SIGMA, KernelVariant::default(), None),
    };
    sigma = a.sigma.unwrap_or(sigma);
    variant = a.variant.unwrap_or(variant);
    trunc = a.truncation_radius.or(trunc);
    let weighted = match a.loss {
        Some(LossArg::Sm) => false,
        Some(LossArg::Wsm) => true,
        None => matches!(cfg.loss, LossKind::Weighted(_)),
    };
    cfg.loss = if weighted {
        LossKind::Weighted(KernelConfig::new(sigma, variant, trunc)?)
    } else {
        LossKind::SoftMax
    };
    if let Some(v) = a.blend {
        cfg.blend_ratio = v;
    }
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = a.hidden {
        cfg.hidden_units = v;
    }
    if a.train_size.is_some() {
        cfg.train_size = a.train_size;
    }
    if let Some(v) = a.image_size {
        cfg.image_size = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let cfg = train_config(a)?;
    let space = cfg.validate()?;
    let real = DatasetManifest::load(&a.real)?;
    real.validate(&space)?;
    let synth = match &a.synth {
        Some(p) => {
            let m = DatasetManifest::load(p)?;
            m.validate(&space)?;
            m
        }
        None => DatasetManifest::new(Vec::new()),
    };
    let outcome = train(&real, &synth, &cfg)?;
    outcome.params.save(&a.out)?;
    if let Some(p) = &a.log {
        write_file(p, log_to_csv(&outcome.log))?;
    }
    let last = outcome.log.last().expect("at least one epoch");
    let loss = match cfg.loss {
        LossKind::SoftMax => "sm".to_string(),
        LossKind::Weighted(k) => format!("wsm(sigma={})", k.sigma()),
    };
    println!(
        "loss={loss} real={} synthetic={} final_loss={} train_MAE={}",
        outcome.drawn.0, outcome.drawn.1, last.loss, last.train_mae
    );
    Ok(())
}

fn image_side(input_dim: usize) -> Result<usize> {
    let side = (input_dim as f64).sqrt().round() as usize;
    if side * side != input_dim {
        return Err(Error::input(format!(
            "model input size {input_dim} is not a square image"
        )));
    }
    Ok(side)
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    sample_id: String,
    pred_deg: f64,
}

fn eval(a: &EvalArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&a.manifest)?;
    if manifest.is_empty() {
        return Err(Error::input(format!(
            "{} has no rows",
            a.manifest.display()
        )));
    }
    let gt: Vec<f64> = manifest.rows.iter().map(|r| r.azimuth_deg).collect();
    let pred: Vec<f64> = if let Some(p) = &a.params {
        let params = ModelParams::load(p)?;
        let space = CircularLabelSpace::new(params.k)?;
        manifest.validate(&space)?;
        let samples = Samples::from_manifest(&manifest, image_side(params.input_dim)?)?;
        let (_, bins) = predict(&params, &samples)?;
        bins.iter().map(|&b| space.bin_to_degrees(b)).collect()
    } else {
        let path = a.predictions.as_ref().expect("clap requires one source");
        let file =
            File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        let mut by_id = HashMap::new();
        for row in csv::Reader::from_reader(BufReader::new(file)).deserialize() {
            let row: PredictionRow = row?;
            if by_id.insert(row.sample_id.clone(), row.pred_deg).is_some() {
                return Err(Error::input(format!(
                    "duplicate prediction for {:?}",
                    row.sample_id
                )));
            }
        }
        manifest
            .rows
            .iter()
            .map(|r| {
                by_id.get(&r.sample_id).copied().ok_or_else(|| {
                    Error::input(format!("no prediction for sample {:?}", r.sample_id))
                })
            })
            .collect::<Result<_>>()?
    };
    if let Some(p) = &a.predictions_out {
        let mut w = csv::Writer::from_writer(create(p)?);
        w.write_record(["sample_id", "pred_deg"])?;
        for (row, d) in manifest.rows.iter().zip(&pred) {
            w.write_record([row.sample_id.as_str(), &d.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("writing predictions", e))?;
    }
    let report = EvalReport::evaluate(a.label.clone(), &pred, &gt, a.bins, a.within)?;
    write_file(&a.out, report.to_text())?;
    if let Some(p) = &a.per_bin {
        write_file(p, report.per_bin_csv())?;
    }
    println!(
        "median_angular_error_deg={}",
        report.median_angular_error_deg
    );
    Ok(())
}

/// MAE table followed by the per-bin accuracy block.
pub fn render_report(reports: &[EvalReport]) -> Result<String> {
    let bins = reports.first().map_or(0, |r| r.per_bin_accuracy.len());
    if reports.iter().any(|r| r.per_bin_accuracy.len() != bins) {
        return Err(Error::input("reports use different bin counts"));
    }
    let width = reports
        .iter()
        .map(|r| r.label.len())
        .max()
        .unwrap_or(0)
        .max(13);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>6}  {:>10}  {:>8}",
        "configuration", "n", "MAE_deg", "entropy"
    );
    for r in reports {
        let entropy = r
            .accuracy_entropy
            .map_or_else(|| "NA".to_string(), |e| format!("{e:.4}"));
        let _ = writeln!(
            s,
            "{:<width$}  {:>6}  {:>10.3}  {:>8}",
            r.label, r.n_evaluated, r.median_angular_error_deg, entropy
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "per-bin accuracy (max entropy ln {bins} = {:.4})",
        (bins as f64).ln()
    );
    let labels: Vec<&str> = reports.iter().map(|r| r.label.as_str()).collect();
    let _ = writeln!(s, "bin_start_deg,{}", labels.join(","));
    let w = 360.0 / bins.max(1) as f64;
    for b in 0..bins {
        let cells: Vec<String> = reports
            .iter()
            .map(|r| r.per_bin_accuracy[b].map_or_else(|| "NA".to_string(), |a| format!("{a:.4}")))
            .collect();
        let _ = writeln!(s, "{},{}", b as f64 * w, cells.join(","));
    }
    Ok(s)
}

fn report(a: &ReportArgs) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(|p| EvalReport::from_text(&read_file(p)?))
        .collect::<Result<Vec<_>>>()?;
    let text = render_report(&reports)?;
    match &a.out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
