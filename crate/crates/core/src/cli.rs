use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use midas::bench::{format_table, run_bench, BenchConfig};
use midas::dataset::{generate_samples, ArrangementGroup, SampleConfig};
use midas::fingerprint::{read_mdv, threshold_for_excess, write_mdv};
use midas::learn::{
    cross_validate, evaluate, load_model_file, read_manifest, train, write_dataset, Classifier,
    Dataset, FeatureEncoding, ModelKind, TrainParams, TrainedModel,
};
use midas::mtdf::{read_sequence, write_sequence};
use midas::pipeline::{analyze_scene, vector_from_sequence, PipelineConfig};
use midas::preprocess::PreprocessDoc;
use midas::segment::Arrangement;
use midas::simulate::{fit_cooling, household_materials, parse_scene, plastic_materials, render_scene};
use midas::{Error, FrameSequence, Result};

#[derive(Parser)]
#[command(name = "midas", version, about = "Thermal-dissipation fingerprints: simulate, extract, segment, classify")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene document to an MTDF file, or generate a labelled dataset
    Simulate(SimulateArgs),
    /// Whole-frame dissipation vector of a single-object recording
    Extract(ExtractArgs),
    /// Per-object vectors of a multi-object recording
    Segment(SegmentArgs),
    /// Train a classifier from a manifest of labelled vectors
    Train(TrainArgs),
    /// Label a vector file, or every object in a recording
    Predict(PredictArgs),
    /// Score a model on a manifest, or cross-validate a model kind
    Evaluate(EvaluateArgs),
    /// Time the end-to-end pipeline over video lengths and object groups
    Bench(BenchArgs),
    /// Fit a cooling time constant and threshold to measured dissipation times
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// Preprocessing settings document (TOML); unset keys use defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hot-pixel criterion in °C above the normalization floor
    #[arg(long, default_value_t = 2.0)]
    threshold_c: f64,
    /// Dissipation vector length in frames
    #[arg(long, default_value_t = 480)]
    vector_len: usize,
    /// Remaining fraction below which a fingerprint counts as gone
    #[arg(long, default_value_t = 0.02)]
    epsilon: f64,
    /// Background dissimilarity (fraction of full scale) that drops a frame;
    /// overrides the settings document
    #[arg(long)]
    dissimilarity: Option<f64>,
    /// Median window side, odd; overrides the settings document
    #[arg(long)]
    denoise_window: Option<usize>,
    /// Normalization floor in centikelvin; defaults to the recorded ambient
    #[arg(long)]
    norm_floor_ck: Option<u16>,
    /// Normalization ceiling in centikelvin; defaults to floor + 20 °C
    #[arg(long)]
    norm_ceil_ck: Option<u16>,
}

impl PipelineArgs {
    fn resolve(&self, seq: &FrameSequence) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::for_sequence(seq);
        let mut doc = match &self.config {
            Some(path) => PreprocessDoc::parse(&read_text(path)?)?,
            None => PreprocessDoc::default(),
        };
        doc.dissimilarity_threshold = self.dissimilarity.or(doc.dissimilarity_threshold);
        doc.denoise_window = self.denoise_window.or(doc.denoise_window);
        doc.norm_floor_centikelvin = self.norm_floor_ck.or(doc.norm_floor_centikelvin);
        doc.norm_ceil_centikelvin = self.norm_ceil_ck.or(doc.norm_ceil_centikelvin);
        cfg.preprocess = doc.resolve(seq.ambient_centikelvin())?;
        if !(self.threshold_c > 0.0) {
            return Err(Error::Config("--threshold-c must be > 0".into()));
        }
        cfg.fingerprint.intensity_threshold =
            threshold_for_excess(self.threshold_c, cfg.preprocess.span_centikelvin());
        cfg.fingerprint.vector_len = self.vector_len;
        cfg.fingerprint.dissipated_epsilon = self.epsilon;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene document (TOML)
    #[arg(long, required_unless_present = "dataset_dir", requires = "out")]
    spec: Option<PathBuf>,
    /// Output MTDF file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a labelled vector dataset and `manifest.txt` here instead
    #[arg(long, conflicts_with = "spec")]
    dataset_dir: Option<PathBuf>,
    /// Samples per material for --dataset-dir
    #[arg(long, default_value_t = 40)]
    per_class: usize,
    /// Material catalog for --dataset-dir
    #[arg(long, value_enum, default_value_t = Catalog::Household)]
    materials: Catalog,
    /// Sensor noise σ in °C for --dataset-dir
    #[arg(long, default_value_t = 0.3)]
    noise_c: f64,
    /// Overrides the scene document's seed; seeds dataset generation
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Catalog {
    Household,
    Plastics,
}

#[derive(Args)]
struct ExtractArgs {
    /// Input MTDF file
    #[arg(long = "in")]
    input: PathBuf,
    /// Output MDV1 file
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct SegmentArgs {
    /// Input MTDF file
    #[arg(long = "in")]
    input: PathBuf,
    /// Directory for `roi_<id>.mdv` files and `rois.txt`
    #[arg(long)]
    out_dir: PathBuf,
    /// Objects expected per connected region
    #[arg(long)]
    expected_k: Option<usize>,
    /// Minimum peak prominence, in intensity levels, to split a region
    #[arg(long, default_value_t = 10)]
    prominence: u8,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Manifest: `<vector.mdv> <label> [context] [gender]` per line
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_parser = parse_kind, default_value = "forest")]
    model_kind: ModelKind,
    /// Append the one-hot hold type to the features
    #[arg(long)]
    context: bool,
    /// Append the one-hot gender to the features
    #[arg(long)]
    gender: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args)]
struct HyperArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Forest size
    #[arg(long)]
    trees: Option<usize>,
    /// SVM / MLP epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// MLP hidden units
    #[arg(long)]
    hidden: Option<usize>,
}

impl HyperArgs {
    fn params(&self) -> TrainParams {
        let mut p = TrainParams::with_seed(self.seed);
        if let Some(t) = self.trees {
            p.forest.n_trees = t;
        }
        if let Some(e) = self.epochs {
            p.svm.epochs = e;
            p.mlp.epochs = e;
        }
        if let Some(h) = self.hidden {
            p.mlp.hidden_units = h;
        }
        p
    }
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// MDV1 vector to label
    #[arg(long, required_unless_present = "input", conflicts_with = "input")]
    vector: Option<PathBuf>,
    /// MTDF recording; every segmented object is labelled
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained model to score on --manifest
    #[arg(long, required_unless_present = "cv", conflicts_with = "cv")]
    model: Option<PathBuf>,
    #[arg(long)]
    manifest: PathBuf,
    /// Stratified k-fold cross-validation instead of a fixed model
    #[arg(long)]
    cv: Option<usize>,
    #[arg(long, value_parser = parse_kind, default_value = "forest")]
    model_kind: ModelKind,
    #[arg(long)]
    context: bool,
    #[arg(long)]
    gender: bool,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Video lengths in seconds
    #[arg(long, value_delimiter = ',', default_value = "30,60,90,120")]
    lengths: Vec<f64>,
    #[arg(long, default_value_t = 30_000)]
    fps_millihz: u32,
    /// Object groups, A (one object) to D (four)
    #[arg(long, value_delimiter = ',', value_parser = parse_group, default_value = "A,B,C,D")]
    arrangements: Vec<ArrangementGroup>,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "dispersed,agglomerated")]
    modes: Vec<ModeArg>,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the table here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dispersed,
    Agglomerated,
}

fn parse_group(s: &str) -> std::result::Result<ArrangementGroup, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct CalibrateArgs {
    /// Measured dissipation times in seconds
    #[arg(long, value_delimiter = ',', required = true)]
    times: Vec<f64>,
    /// Initial excess over ambient (°C) of each measurement
    #[arg(long, value_delimiter = ',', required = true)]
    excesses: Vec<f64>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Domain(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io(path))
}

fn load_sequence(path: &Path) -> Result<FrameSequence> {
    read_sequence(BufReader::new(File::open(path).map_err(io(path))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io(path))?))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    let mut say = |s: String| -> Result<()> {
        writeln!(stdout, "{s}").map_err(|source| Error::Io { position: 0, source })
    };
    match cli.command {
        Command::Simulate(a) => {
            if let Some(dir) = a.dataset_dir {
                let mats = match a.materials {
                    Catalog::Household => household_materials(),
                    Catalog::Plastics => plastic_materials(),
                };
                let cfg = SampleConfig {
                    noise_sigma_c: a.noise_c,
                    ..Default::default()
                };
                let samples = generate_samples(&mats, a.per_class, &cfg, a.seed.unwrap_or(0))?;
                fs::create_dir_all(&dir).map_err(io(&dir))?;
                let manifest = write_dataset(&samples, &dir)?;
                let mpath = dir.join("manifest.txt");
                fs::write(&mpath, manifest).map_err(io(&mpath))?;
                say(format!("wrote {} samples to {}", samples.len(), mpath.display()))?;
            } else {
                let (spec, out) = (a.spec.expect("clap"), a.out.expect("clap"));
                let mut scene = parse_scene(&read_text(&spec)?)?;
                if let Some(seed) = a.seed {
                    scene.rng_seed = seed;
                }
                let seq = render_scene(&scene)?;
                let mut w = create(&out)?;
                write_sequence(&seq, &mut w)?;
                w.flush().map_err(io(&out))?;
            }
        }
        Command::Extract(a) => {
            let seq = load_sequence(&a.input)?;
            let v = vector_from_sequence(&seq, &a.pipeline.resolve(&seq)?)?;
            write_mdv(&v, create(&a.out)?)?;
        }
        Command::Segment(a) => {
            let seq = load_sequence(&a.input)?;
            let mut cfg = a.pipeline.resolve(&seq)?;
            cfg.segment.prominence = a.prominence;
            cfg.segment.expected_k = a.expected_k;
            let scene = analyze_scene(&seq, &cfg, None)?;
            fs::create_dir_all(&a.out_dir).map_err(io(&a.out_dir))?;
            let mut lines = String::new();
            for o in &scene.objects {
                write_mdv(&o.vector, create(&a.out_dir.join(format!("roi_{}.mdv", o.roi.id)))?)?;
                lines += &o.roi.manifest_line();
                lines.push('\n');
            }
            for (c, w) in &scene.warnings {
                eprintln!(
                    "warning: region {c} yielded {} of {} expected objects",
                    w.found, w.expected
                );
            }
            let path = a.out_dir.join("rois.txt");
            fs::write(&path, &lines).map_err(io(&path))?;
            say(format!("arrangement {}", scene.arrangement))?;
            say(lines.trim_end().to_string())?;
        }
        Command::Train(a) => {
            let samples = read_manifest(&a.manifest)?;
            let encoding = FeatureEncoding {
                include_context: a.context,
                include_gender: a.gender,
            };
            let data = Dataset::from_samples(&samples, encoding)?;
            let model = train(a.model_kind, &data, &a.hyper.params())?;
            let tm = TrainedModel { encoding, model };
            let mut w = create(&a.out)?;
            tm.save(&mut w)?;
        }
        Command::Predict(a) => {
            let tm = load_model_file(&a.model)?;
            if let Some(v) = a.vector {
                let vector = read_mdv(BufReader::new(File::open(&v).map_err(io(&v))?))?;
                if tm.encoding.extra_dims() > 0 {
                    return Err(Error::Encoding(
                        "model expects context/gender features; a bare vector has none".into(),
                    ));
                }
                say(tm.model.predict(vector.values())?.to_string())?;
            } else {
                let input = a.input.expect("clap");
                let seq = load_sequence(&input)?;
                let scene = analyze_scene(&seq, &a.pipeline.resolve(&seq)?, Some(&tm))?;
                for o in &scene.objects {
                    say(format!(
                        "roi {} {} dissipation_s {:.3}",
                        o.roi.id,
                        o.label.as_deref().unwrap_or("-"),
                        o.dissipation.seconds
                    ))?;
                }
            }
        }
        Command::Evaluate(a) => {
            let samples = read_manifest(&a.manifest)?;
            let report = if let Some(k) = a.cv {
                let enc = FeatureEncoding {
                    include_context: a.context,
                    include_gender: a.gender,
                };
                let data = Dataset::from_samples(&samples, enc)?;
                cross_validate(a.model_kind, &data, k, &a.hyper.params(), a.hyper.seed)?
            } else {
                let tm = load_model_file(&a.model.expect("clap"))?;
                let data = Dataset::from_samples(&samples, tm.encoding)?;
                evaluate(&tm.model, &data)?
            };
            say(format!("accuracy {:.4}", report.accuracy))?;
            say(format!("hamming_loss {:.4}", report.hamming_loss))?;
            say(format!("classes {}", report.classes.join(" ")))?;
            for (c, row) in report.classes.iter().zip(&report.confusion) {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                say(format!("confusion {c} {}", cells.join(" ")))?;
            }
        }
        Command::Bench(a) => {
            let cfg = BenchConfig {
                video_lengths_s: a.lengths,
                fps_millihz: a.fps_millihz,
                arrangements: a.arrangements,
                modes: a
                    .modes
                    .iter()
                    .map(|m| match m {
                        ModeArg::Dispersed => Arrangement::Dispersed,
                        ModeArg::Agglomerated => Arrangement::Agglomerated,
                    })
                    .collect(),
                repetitions: a.repetitions,
                rng_seed: a.seed,
                ..Default::default()
            };
            let table = format_table(&run_bench(&cfg)?);
            match a.out {
                Some(path) => fs::write(&path, table).map_err(io(&path))?,
                None => say(table.trim_end().to_string())?,
            }
        }
        Command::Calibrate(a) => {
            let fit = fit_cooling(&a.excesses, &a.times)?;
            say(format!("tau_s {:.3}", fit.tau_s))?;
            say(format!("threshold_c {:.4}", fit.threshold_c))?;
            for ((e, t), (p, r)) in a
                .excesses
                .iter()
                .zip(&a.times)
                .zip(fit.predicted_s.iter().zip(&fit.residuals_s))
            {
                say(format!("point excess_c {e} measured_s {t} fitted_s {p:.3} residual_s {r:.3}"))?;
            }
            say(format!("max_abs_residual_s {:.3}", fit.max_abs_residual()))?;
        }
    }
    Ok(())
}
