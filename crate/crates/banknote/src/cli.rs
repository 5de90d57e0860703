//! The `banknote` command line.

use std::ffi::OsString;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use banknote_core::augment::{self, AugmentConfig};
use banknote_core::metrics::{argmax, confusion, derive_metrics, EvalReport};
use banknote_core::split::{Split, SplitRatios};
use banknote_core::train::{self, Sample, TrainConfig, TrainData};
use banknote_core::zoo::{self, Family, Scale};
use banknote_core::{Model, ParamStore};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkpoint::FileCheckpoint;
use crate::dataset::{self, DatasetManifest, LabeledImage};
use crate::error::{exit, AppError, Result};
use crate::history::render_history;
use crate::imageio;
use crate::report::{render_details, render_report, ReportFormat};
use crate::synth;
use crate::weights;

pub const CLASSES_FILE: &str = "classes.txt";

#[derive(Parser, Debug)]
#[command(
    name = "banknote",
    version,
    about = "Train and run lightweight CNN image classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a classifier on a class-per-directory dataset.
    Train(TrainArgs),
    /// Evaluate saved weights on one split of a dataset.
    Evaluate(EvaluateArgs),
    /// Rank the classes for a single image.
    Predict(PredictArgs),
    /// Write augmented variants of an image.
    AugmentPreview(PreviewArgs),
    /// List the tensors of a weight file.
    InspectWeights(InspectArgs),
    /// Generate a synthetic geometric-pattern dataset.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Mobilenet,
    Resnet,
    Nasnet,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Mobilenet => Family::MobileNet,
            FamilyArg::Resnet => Family::ResNet,
            FamilyArg::Nasnet => Family::NasNet,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Tiny,
    Small,
    Paper,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Tiny => Scale::Tiny,
            ScaleArg::Small => Scale::Small,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AugmentMode {
    None,
    /// A fresh random variant of every image each epoch.
    Online,
    /// Train on each image plus nine stored variants.
    Offline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WeightsScope {
    /// Load backbone tensors only; the head starts fresh.
    Backbone,
    /// Load every tensor.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long = "model", value_enum, default_value = "mobilenet")]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value = "paper")]
    pub scale: ScaleArg,
    /// Images are resized to SIZE×SIZE.
    #[arg(long, default_value_t = 224)]
    pub input_size: usize,
}

impl ModelArgs {
    fn name(&self) -> String {
        format!("{}-{}", Family::from(self.family), Scale::from(self.scale))
    }

    fn build(&self, num_classes: usize) -> Result<Model> {
        let s = self.input_size;
        let spec = zoo::build_classifier(
            self.family.into(),
            self.scale.into(),
            [s, s, 3],
            num_classes,
        )?;
        Ok(Model::new(spec)?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.1)]
    pub val_ratio: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test_ratio: f64,
    /// Seed of the train/val/test assignment; defaults to --seed.
    #[arg(long)]
    pub split_seed: Option<u64>,
}

impl SplitArgs {
    fn ratios(&self) -> Result<SplitRatios> {
        Ok(SplitRatios::new(
            1.0 - self.val_ratio - self.test_ratio,
            self.val_ratio,
            self.test_ratio,
        )?)
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset root with one subdirectory per class.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Directory for the checkpoint, history, manifest and report.
    #[arg(long)]
    pub out: PathBuf,
    /// Initial weights.
    #[arg(long)]
    pub weights_in: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "backbone")]
    pub weights_scope: WeightsScope,
    /// Best checkpoint path; defaults to OUT/best.bnkw.
    #[arg(long)]
    pub weights_out: Option<PathBuf>,
    /// Structured report path; defaults to OUT/report.json.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub freeze_backbone: bool,
    #[arg(long, value_enum, default_value = "online")]
    pub augment: AugmentMode,
    #[arg(long, default_value_t = 1e-4)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 2)]
    pub plateau_patience: usize,
    #[arg(long, default_value_t = 0.8)]
    pub plateau_factor: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub min_lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub min_delta: f64,
    #[arg(long, default_value_t = 10)]
    pub early_stop_patience: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub split: SplitArgs,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            plateau_patience: self.plateau_patience,
            plateau_factor: self.plateau_factor,
            min_lr: self.min_lr,
            min_delta: self.min_delta,
            early_stop_patience: self.early_stop_patience,
            seed: self.seed,
            freeze_backbone: self.freeze_backbone,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub ratios: SplitArgs,
    /// Structured report output path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Class names, one per line; defaults to classes.txt beside the weights.
    #[arg(long)]
    pub classes: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
}

#[derive(Args, Debug)]
pub struct PreviewArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub weights: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated pattern names.
    #[arg(long, default_value = "circle,hstripes,checker")]
    pub patterns: String,
    #[arg(long, default_value_t = 30)]
    pub per_class: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on stderr.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> u8 {
    run_from(std::env::args_os())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|_| ()),
        Command::Predict(a) => {
            for (name, p) in cmd_predict(&a)? {
                println!("{name}\t{p:.6}");
            }
            Ok(())
        }
        Command::AugmentPreview(a) => {
            let paths = cmd_augment_preview(&a)?;
            println!("wrote {} variants to {}", paths.len(), a.out_dir.display());
            Ok(())
        }
        Command::InspectWeights(a) => cmd_inspect(&a),
        Command::Synth(a) => {
            let n = synth::write_tree(
                &a.out,
                &synth::parse_patterns(&a.patterns)?,
                a.per_class,
                a.size,
                a.seed,
            )?;
            println!("wrote {n} images to {}", a.out.display());
            Ok(())
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| AppError::io(path, e))
}

fn dataset_name(root: &Path) -> String {
    root.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| root.display().to_string())
}

fn load_split_dataset(
    root: &Path,
    size: usize,
    split: &SplitArgs,
    seed: u64,
) -> Result<(DatasetManifest, Vec<LabeledImage>)> {
    let (manifest, items) = dataset::load_dataset(root, (size, size))?;
    if !manifest.skipped.is_empty() {
        log::warn!("skipped {} undecodable files", manifest.skipped.len());
    }
    if manifest.num_classes() < 2 {
        return Err(AppError::TooFewClasses(manifest.num_classes()));
    }
    let manifest =
        dataset::split_manifest(manifest, split.ratios()?, split.split_seed.unwrap_or(seed))?;
    Ok((manifest, items))
}

/// Forward pass over `samples`, reduced to a named report.
pub fn evaluate_samples(
    model: &Model,
    params: &ParamStore<f32>,
    samples: &[Sample<f32>],
    class_names: &[String],
) -> Result<EvalReport> {
    let probs = train::predict_all(model, params, samples)?;
    let predicted: Vec<usize> = probs.iter().map(|p| argmax(p.data())).collect();
    let truth: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let cm = confusion(&truth, &predicted, class_names.len())?.with_names(class_names.to_vec())?;
    Ok(derive_metrics(&cm))
}

fn emit_report(report: &EvalReport, path: &Path) -> Result<()> {
    print!(
        "{}",
        render_report(std::slice::from_ref(report), ReportFormat::Text)
    );
    print!("{}", render_details(report));
    write_file(
        path,
        &render_report(std::slice::from_ref(report), ReportFormat::Json),
    )
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let config = a.config();
    config.validate()?;
    let (manifest, items) = load_split_dataset(&a.data, a.model.input_size, &a.split, a.seed)?;
    let k = manifest.num_classes();
    let model = a.model.build(k)?;
    let mut params = ParamStore::init(&model, a.seed);
    if let Some(w) = &a.weights_in {
        match a.weights_scope {
            WeightsScope::Backbone => weights::load_backbone(&model, w, &mut params)?,
            WeightsScope::Full => params = weights::load_params(&model, w)?,
        }
    }
    let mut train_set = dataset::select(&manifest, &items, Split::Train);
    let val_set = dataset::select(&manifest, &items, Split::Val);
    let test_set = dataset::select(&manifest, &items, Split::Test);
    let aug_cfg = AugmentConfig::default();
    let online = match a.augment {
        AugmentMode::None => None,
        AugmentMode::Online => Some(&aug_cfg),
        AugmentMode::Offline => {
            let pairs: Vec<_> = train_set.into_iter().map(|s| (s.image, s.label)).collect();
            train_set = augment::augment_offline(&pairs, &aug_cfg, a.seed)
                .map(|r| r.map(|(img, l)| Sample::new(img, l)))
                .collect::<banknote_core::Result<_>>()?;
            None
        }
    };
    fs::create_dir_all(&a.out).map_err(|e| AppError::io(&a.out, e))?;
    write_file(&a.out.join("manifest.tsv"), &manifest.to_table())?;
    write_file(
        &a.out.join(CLASSES_FILE),
        &(manifest.class_names.join("\n") + "\n"),
    )?;
    let weights_out = a
        .weights_out
        .clone()
        .unwrap_or_else(|| a.out.join("best.bnkw"));
    if let Some(dir) = weights_out.parent() {
        if dir != a.out {
            write_file(
                &dir.join(CLASSES_FILE),
                &(manifest.class_names.join("\n") + "\n"),
            )?;
        }
    }
    log::info!(
        "{} {}: {} train / {} val / {} test images, {} classes, {} parameters",
        dataset_name(&a.data),
        a.model.name(),
        train_set.len(),
        val_set.len(),
        test_set.len(),
        k,
        model.param_count()
    );
    let data = TrainData {
        train: &train_set,
        val: &val_set,
        num_classes: k,
    };
    let mut sink = FileCheckpoint::new(&weights_out);
    let outcome = train::fit_with(&model, params, &data, online, &config, &mut sink, |r| {
        log::info!(
            "epoch {:>3}  lr {:.3e}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}",
            r.epoch,
            r.lr,
            r.train_loss,
            r.train_acc,
            r.val_loss,
            r.val_acc
        );
        ControlFlow::Continue(())
    })?;
    write_file(
        &a.out.join("history.tsv"),
        &render_history(&outcome.state.history),
    )?;
    log::info!(
        "best epoch {:?}, val_loss {:.4}, checkpoint {}",
        outcome.state.best_epoch,
        outcome.state.best_val_loss,
        weights_out.display()
    );
    if test_set.is_empty() {
        log::warn!("test split is empty, no report written");
        return Ok(());
    }
    let rep = evaluate_samples(&model, &outcome.params, &test_set, &manifest.class_names)?
        .named(dataset_name(&a.data), a.model.name());
    emit_report(
        &rep,
        &a.report
            .clone()
            .unwrap_or_else(|| a.out.join("report.json")),
    )
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<EvalReport> {
    let (manifest, items) = load_split_dataset(&a.data, a.model.input_size, &a.ratios, a.seed)?;
    let model = a.model.build(manifest.num_classes())?;
    let params = weights::load_params(&model, &a.weights)?;
    let samples = dataset::select(&manifest, &items, a.split.into());
    if samples.is_empty() {
        return Err(AppError::Data(format!(
            "the {} split is empty",
            Split::from(a.split)
        )));
    }
    let rep = evaluate_samples(&model, &params, &samples, &manifest.class_names)?
        .named(dataset_name(&a.data), a.model.name());
    match &a.report {
        Some(p) => emit_report(&rep, p)?,
        None => {
            print!(
                "{}",
                render_report(std::slice::from_ref(&rep), ReportFormat::Text)
            );
            print!("{}", render_details(&rep));
        }
    }
    Ok(rep)
}

/// Reads class names, one per line.
pub fn read_classes(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// All classes ranked by probability (ties by index), truncated to `top_k`.
pub fn cmd_predict(a: &PredictArgs) -> Result<Vec<(String, f64)>> {
    let classes_path = a.classes.clone().unwrap_or_else(|| {
        a.weights
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(CLASSES_FILE)
    });
    let names = read_classes(&classes_path)?;
    if names.len() < 2 {
        return Err(AppError::TooFewClasses(names.len()));
    }
    let model = a.model.build(names.len())?;
    let params = weights::load_params(&model, &a.weights)?;
    let s = a.model.input_size;
    let img = imageio::load_image(&a.image)?;
    let img = banknote_core::image::resize_bilinear(&img, s, s)?;
    let probs = model.forward(&params, &img)?;
    let mut ranked: Vec<(usize, f64)> =
        probs.data().iter().map(|&p| p as f64).enumerate().collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    Ok(ranked
        .into_iter()
        .take(a.top_k.max(1))
        .map(|(i, p)| (names[i].clone(), p))
        .collect())
}

/// Writes `count` augmented variants and returns their paths.
pub fn cmd_augment_preview(a: &PreviewArgs) -> Result<Vec<PathBuf>> {
    let img = imageio::load_image(&a.image)?;
    let cfg = AugmentConfig::default();
    fs::create_dir_all(&a.out_dir).map_err(|e| AppError::io(&a.out_dir, e))?;
    let stem = a
        .image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());
    let mut out = Vec::with_capacity(a.count);
    for k in 1..=a.count as u64 {
        let mut rng = augment::item_rng(a.seed, 0, k);
        let p = augment::sample_params(&cfg, &mut rng);
        let variant = augment::apply_affine(&img, &p)?;
        let path = a.out_dir.join(format!("{stem}_aug{k:02}.png"));
        imageio::save_image(&path, &variant)?;
        out.push(path);
    }
    Ok(out)
}

fn cmd_inspect(a: &InspectArgs) -> Result<()> {
    let tensors = weights::load_weights(&a.weights)?;
    let mut total = 0usize;
    for (name, t) in &tensors {
        println!("{name}\t{:?}\t{}", t.shape(), t.len());
        total += t.len();
    }
    println!("{} tensors, {total} values", tensors.len());
    Ok(())
}
