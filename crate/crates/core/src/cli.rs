//! Command-line front end. `cli_main` returns the process exit code: 0 on
//! success, 2 on usage errors, otherwise the code of the error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use crate::error::{PoseError, Result};
use crate::eval::{category_report, CategoryReport, EvalRecord, JointGroup};
use crate::features::FeaturePyramid;
use crate::geometry::Point;
use crate::io::annotations::{annotations_to_string, load_annotations, AnnotationSet, PersonRecord};
use crate::io::config::RunConfig;
use crate::io::format;
use crate::io::synth::{generate_synthetic, PoseFamily, SynthConfig};
use crate::model::MixtureModel;
use crate::pipeline::{all_features, cluster_variant, model_pyramid, predict_single, predict_two_trees, train_variant, InferMode, Variant};
use crate::raster::Raster;
use crate::two_trees::{TreeOrder, TwoTreeModel};

#[derive(Parser, Debug)]
#[command(name = "posekit", version, about = "Articulated pose estimation with mixtures of parts")]
struct Cli {
    /// TOML run configuration; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice. POSEKIT_SEED takes precedence.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render synthetic scenes with their annotations.
    Synth(SynthArgs),
    /// Cluster part types and save the phraselet book.
    Cluster(ClusterArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Predict keypoints.
    Infer(InferArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Print a results CSV as a method/category by joint grid.
    DumpGrid(DumpGridArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory; receives images/ and annotations.jsonl or negatives.txt.
    #[arg(long)]
    out: PathBuf,
    /// upright, rotated, legs-crossed, arm-occluding or negative.
    #[arg(long, default_value = "upright")]
    family: String,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    first: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    /// Mean torso diameter in pixels.
    #[arg(long, default_value_t = 32.0)]
    torso: f64,
    #[arg(long, default_value_t = 6)]
    clutter: usize,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long)]
    annotations: PathBuf,
    /// mop, rotnorm or rotnorm-lower.
    #[arg(long, default_value = "rotnorm")]
    variant: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Positive training people; image paths are relative to this file.
    #[arg(long)]
    annotations: PathBuf,
    /// Person-free images, one path per line, relative to this file.
    #[arg(long)]
    negatives: Option<PathBuf>,
    #[arg(long, default_value = "rotnorm")]
    variant: String,
    /// Model file; rewritten after every round.
    #[arg(long)]
    out: PathBuf,
    /// Per-round objective log (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Also save the phraselet book here.
    #[arg(long)]
    book: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InferArgs {
    /// Images to process, as annotations; only the image paths are read.
    #[arg(long)]
    annotations: PathBuf,
    /// upper, lower, two-trees or two-trees-reversed.
    #[arg(long, default_value = "upper")]
    mode: String,
    #[arg(long)]
    upper: Option<PathBuf>,
    #[arg(long)]
    lower: Option<PathBuf>,
    /// Predictions, one person per line.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Ground-truth annotations.
    #[arg(long)]
    gt: PathBuf,
    /// `name=predictions.jsonl`, repeatable.
    #[arg(long = "pred", required = true)]
    pred: Vec<String>,
    /// Categories to report; records with none of them count as untagged.
    #[arg(long, value_delimiter = ',')]
    categories: Vec<String>,
    /// Results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Directory for one SVG curve plot per category and joint.
    #[arg(long)]
    svg_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DumpGridArgs {
    results: PathBuf,
}

fn usage(msg: impl Into<String>) -> PoseError {
    PoseError::InvalidArgument(msg.into())
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PoseError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| PoseError::io(path, e))
}

fn base_dir(file: &Path) -> PathBuf {
    file.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_rasters(dir: &Path, names: &[&str]) -> Result<Vec<Raster>> {
    names.iter().map(|n| Raster::load(&dir.join(n))).collect()
}

fn variant(s: &str) -> Result<Variant> {
    Variant::parse(s).ok_or_else(|| usage(format!("unknown variant {s:?}")))
}

fn synth(args: &SynthArgs, cfg: &RunConfig) -> Result<()> {
    let family = PoseFamily::parse(&args.family).ok_or_else(|| usage(format!("unknown family {:?}", args.family)))?;
    let scenes = generate_synthetic(&SynthConfig {
        n: args.n,
        family,
        clutter: args.clutter,
        seed: cfg.seed,
        first: args.first,
        width: args.width,
        height: args.height,
        torso: args.torso,
        angle: None,
    });
    let images = args.out.join("images");
    std::fs::create_dir_all(&images).map_err(|e| PoseError::io(&images, e))?;
    let mut set = AnnotationSet::default();
    let mut negatives = String::new();
    for s in &scenes {
        s.raster.save_png(&images.join(s.file_name()))?;
        match &s.person {
            Some(p) => set.records.push(p.clone()),
            None => negatives.push_str(&format!("images/{}\n", s.file_name())),
        }
    }
    if family == PoseFamily::Negative {
        write(&args.out.join("negatives.txt"), negatives)?;
    } else {
        write(&args.out.join("annotations.jsonl"), annotations_to_string(&set))?;
    }
    info!("{} {} scenes in {}", scenes.len(), family.tag(), args.out.display());
    Ok(())
}

fn cluster(args: &ClusterArgs, cfg: &RunConfig) -> Result<()> {
    let set = load_annotations(&args.annotations)?;
    let book = cluster_variant(variant(&args.variant)?, &set.records, cfg)?;
    format::save(&book, &args.out)
}

fn train(args: &TrainArgs, cfg: &RunConfig) -> Result<()> {
    let v = variant(&args.variant)?;
    let set = load_annotations(&args.annotations)?;
    if set.is_empty() {
        return Err(usage("no positive training people"));
    }
    let dir = base_dir(&args.annotations);
    let names: Vec<&str> = set.records.iter().map(|r| r.image.as_str()).collect();
    let pos_feats = all_features(&load_rasters(&dir, &names)?, &cfg.pyramid)?;
    let neg_feats = match &args.negatives {
        Some(list) => {
            let text = std::fs::read_to_string(list).map_err(|e| PoseError::io(list, e))?;
            let names: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            all_features(&load_rasters(&base_dir(list), &names)?, &cfg.pyramid)?
        }
        None => Vec::new(),
    };
    let positives: Vec<(&FeaturePyramid, &PersonRecord)> = pos_feats.iter().zip(&set.records).collect();
    let negatives: Vec<&FeaturePyramid> = neg_feats.iter().collect();
    let mut saved = Ok(());
    let tv = train_variant(v, cfg, &positives, &negatives, |round, m| {
        if saved.is_ok() {
            saved = format::save(m, &args.out);
            info!("round {round}: checkpoint {}", args.out.display());
        }
    })?;
    saved?;
    format::save(&tv.result.model, &args.out)?;
    if let Some(path) = &args.log {
        let mut csv = String::from("epoch,objective,cache_size,new_constraints\n");
        for r in &tv.result.log {
            csv.push_str(&format!("{},{:.9},{},{}\n", r.epoch, r.objective, r.cache_size, r.new_constraints));
        }
        write(path, csv)?;
    }
    if let Some(path) = &args.book {
        format::save(&tv.book, path)?;
    }
    Ok(())
}

fn infer(args: &InferArgs, run: &RunConfig) -> Result<()> {
    let mode = InferMode::parse(&args.mode).ok_or_else(|| usage(format!("unknown mode {:?}", args.mode)))?;
    let need = |p: &Option<PathBuf>, what: &str| -> Result<MixtureModel> {
        let path = p.as_ref().ok_or_else(|| usage(format!("--mode {} needs --{what}", args.mode)))?;
        format::load(path)
    };
    enum Predictor {
        Single(MixtureModel),
        Two(TwoTreeModel, TreeOrder),
    }
    let predictor = match mode {
        InferMode::Upper => Predictor::Single(need(&args.upper, "upper")?),
        InferMode::Lower => Predictor::Single(need(&args.lower, "lower")?),
        InferMode::TwoTrees | InferMode::TwoTreesReversed => {
            let order = if mode == InferMode::TwoTrees {
                TreeOrder::LowerFirst
            } else {
                TreeOrder::UpperFirst
            };
            Predictor::Two(TwoTreeModel::new(need(&args.lower, "lower")?, need(&args.upper, "upper")?)?, order)
        }
    };
    let cfg = match &predictor {
        Predictor::Single(m) => model_pyramid(m, &run.pyramid),
        Predictor::Two(t, _) => model_pyramid(&t.upper, &run.pyramid),
    };
    let set = load_annotations(&args.annotations)?;
    let dir = base_dir(&args.annotations);
    let mut out = AnnotationSet::default();
    for r in &set.records {
        let raster = Raster::load(&dir.join(&r.image))?;
        let pyr = crate::pipeline::features(&raster, &cfg)?;
        let (kps, score) = match &predictor {
            Predictor::Single(m) => predict_single(m, &pyr)?,
            Predictor::Two(t, order) => predict_two_trees(t, &pyr, *order)?,
        };
        info!("{}: score {score:.4}", r.image);
        out.records.push(PersonRecord {
            image: r.image.clone(),
            width: r.width,
            height: r.height,
            keypoints: kps.iter().map(|p| (p.x, p.y, true)).collect(),
            categories: r.categories.clone(),
        });
    }
    write(&args.out, annotations_to_string(&out))
}

fn eval(args: &EvalArgs) -> Result<()> {
    let gt = load_annotations(&args.gt)?;
    let truth: BTreeMap<&str, &PersonRecord> = gt.records.iter().map(|r| (r.image.as_str(), r)).collect();
    let mut results = Vec::new();
    for spec in &args.pred {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| usage(format!("--pred {spec:?} is not name=path")))?;
        let preds = load_annotations(Path::new(path))?;
        let mut recs = Vec::with_capacity(preds.len());
        for p in &preds.records {
            let t = truth
                .get(p.image.as_str())
                .ok_or_else(|| usage(format!("{path}: {} has no ground truth", p.image)))?;
            let pts = |r: &PersonRecord| -> Vec<Point> { r.points() };
            recs.push(EvalRecord::new(&p.image, pts(p), pts(t), t.categories.clone())?);
        }
        results.push((name.to_string(), recs));
    }
    let report = category_report(&results, &args.categories, &JointGroup::standard())?;
    write(&args.out, report.to_csv())?;
    if let Some(dir) = &args.svg_dir {
        let mut cats: Vec<&str> = report.rows.iter().map(|r| r.category.as_str()).collect();
        cats.dedup();
        for cat in cats {
            for g in JointGroup::standard() {
                write(&dir.join(format!("{cat}_{}.svg", g.name)), report.svg(cat, &g.name))?;
            }
        }
    }
    print!("{}", report.grid());
    Ok(())
}

fn dump_grid(args: &DumpGridArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.results).map_err(|e| PoseError::io(&args.results, e))?;
    print!("{}", CategoryReport::from_csv(&text, &args.results)?.grid());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_seed(cli.seed)?;
    match &cli.command {
        Command::Synth(a) => synth(a, &cfg),
        Command::Cluster(a) => cluster(a, &cfg),
        Command::Train(a) => train(a, &cfg),
        Command::Infer(a) => infer(a, &cfg),
        Command::Eval(a) => eval(a),
        Command::DumpGrid(a) => dump_grid(a),
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            match e {
                PoseError::InvalidArgument(_) => 2,
                e => e.code(),
            }
        }
    }
}
