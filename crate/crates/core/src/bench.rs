//! Response-time measurements of the full multi-object pipeline.
//!
//! Scenes are rendered and classifiers trained outside the timed region.
//! Each cell gets one discarded warmup run, then `repetitions` timed runs.
//! Everything runs on the calling thread, one pipeline run at a time.

use std::fmt::Write as _;
use std::ops::Range;
use std::time::Instant;

use crate::dataset::{
    agglomerated_scene, dispersed_scene, generate_samples, ArrangementGroup, MultiSceneConfig,
    SampleConfig,
};
use crate::error::{Error, Result};
use crate::frame::FrameSequence;
use crate::learn::{train_forest, Dataset, FeatureEncoding, ForestParams, Model, TrainedModel};
use crate::pipeline::{analyze_scene, PipelineConfig};
use crate::segment::Arrangement;
use crate::simulate::{household_materials, render_scene};

pub const TABLE_HEADER: &str = "length_s\tarrangement\tmode\tframes\tmedian_ms\tp10_ms\tp90_ms\troi_count";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub video_lengths_s: Vec<f64>,
    pub fps_millihz: u32,
    pub arrangements: Vec<ArrangementGroup>,
    pub modes: Vec<Arrangement>,
    pub repetitions: usize,
    pub rng_seed: u64,
    pub width: usize,
    pub height: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            video_lengths_s: vec![30.0, 60.0, 90.0, 120.0],
            fps_millihz: 30_000,
            arrangements: ArrangementGroup::ALL.to_vec(),
            modes: vec![Arrangement::Dispersed, Arrangement::Agglomerated],
            repetitions: 3,
            rng_seed: 0,
            width: 80,
            height: 60,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.video_lengths_s.is_empty() || self.video_lengths_s.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Config("video lengths must be non-empty and > 0".into()));
        }
        if self.repetitions < 3 {
            return Err(Error::Config("repetitions must be >= 3".into()));
        }
        if self.fps_millihz == 0 {
            return Err(Error::Config("fps_millihz must be > 0".into()));
        }
        if self.arrangements.is_empty() || self.modes.is_empty() {
            return Err(Error::Config("need at least one arrangement and one mode".into()));
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::Config("bench frames must be at least 16x16".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub length_s: f64,
    pub arrangement: ArrangementGroup,
    pub mode: Arrangement,
    pub frames: usize,
    pub median_ms: f64,
    pub p10_ms: f64,
    pub p90_ms: f64,
    pub roi_count: usize,
}

/// Nearest-rank percentile of an ascending list.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// A small vector-only forest for vectors of `frames` elements.
fn bench_model(cfg: &BenchConfig, length_s: f64) -> Result<TrainedModel> {
    let samples = SampleConfig {
        width: 16,
        height: 16,
        fps_millihz: cfg.fps_millihz,
        duration_s: length_s,
        ..Default::default()
    };
    let data = generate_samples(&household_materials(), 3, &samples, cfg.rng_seed)?;
    let data = Dataset::from_samples(&data, FeatureEncoding::default())?;
    let forest = train_forest(
        &data,
        &ForestParams {
            n_trees: 15,
            seed: cfg.rng_seed,
            ..Default::default()
        },
    )?;
    Ok(TrainedModel {
        encoding: FeatureEncoding::default(),
        model: Model::Forest(forest),
    })
}

/// A rendered scene ready to be timed.
struct Cell {
    length_s: f64,
    group: ArrangementGroup,
    mode: Arrangement,
    seq: FrameSequence,
    pcfg: PipelineConfig,
    roi_count: usize,
    times: Vec<f64>,
}

fn prepare_cell(
    cfg: &BenchConfig,
    length_s: f64,
    group: ArrangementGroup,
    mode: Arrangement,
    model: &TrainedModel,
) -> Result<Cell> {
    let scene_cfg = MultiSceneConfig {
        width: cfg.width,
        height: cfg.height,
        fps_millihz: cfg.fps_millihz,
        duration_s: length_s,
        noise_sigma_c: 0.3,
        ..Default::default()
    };
    let mats = group.materials();
    let spec = match mode {
        Arrangement::Dispersed => dispersed_scene(&mats, &scene_cfg, cfg.rng_seed)?,
        Arrangement::Agglomerated => agglomerated_scene(&mats, &scene_cfg, 6, cfg.rng_seed)?,
    };
    let seq = render_scene(&spec)?;
    let mut pcfg = PipelineConfig::for_sequence(&seq);
    pcfg.fingerprint.vector_len = seq.len().max(2);
    // Warmup run, also the source of the ROI count.
    let warm = analyze_scene(&seq, &pcfg, Some(model))?;
    Ok(Cell {
        length_s,
        group,
        mode,
        seq,
        pcfg,
        roi_count: warm.objects.len(),
        times: Vec::with_capacity(cfg.repetitions),
    })
}

/// Upper bound on rendered frame data held at once while timing.
const BATCH_BYTES: usize = 256 << 20;

fn cell_bytes(cfg: &BenchConfig, length_s: f64) -> usize {
    let frames = (length_s * cfg.fps_millihz as f64 / 1000.0).round() as usize;
    frames * cfg.width * cfg.height * 2 * cfg.arrangements.len() * cfg.modes.len()
}

/// One row per (length, arrangement, mode) cell, in that nesting order.
///
/// Consecutive lengths are batched while their rendered scenes fit in
/// [`BATCH_BYTES`]. Within a batch every cell is rendered and warmed up
/// first, then timed round-robin, one run of each cell per round, so a slow
/// stretch on the machine lands on every cell instead of skewing one.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for batch in batches(cfg) {
        rows.extend(run_batch(cfg, &cfg.video_lengths_s[batch])?);
    }
    Ok(rows)
}

/// Splits the lengths into consecutive runs; a length that alone exceeds the
/// budget gets a batch of its own.
fn batches(cfg: &BenchConfig) -> Vec<Range<usize>> {
    let lengths = &cfg.video_lengths_s;
    let mut out = Vec::new();
    let mut start = 0;
    while start < lengths.len() {
        let mut end = start + 1;
        let mut bytes = cell_bytes(cfg, lengths[start]);
        while end < lengths.len() && bytes + cell_bytes(cfg, lengths[end]) <= BATCH_BYTES {
            bytes += cell_bytes(cfg, lengths[end]);
            end += 1;
        }
        out.push(start..end);
        start = end;
    }
    out
}

fn run_batch(cfg: &BenchConfig, lengths: &[f64]) -> Result<Vec<BenchRow>> {
    let mut models = Vec::with_capacity(lengths.len());
    let mut cells = Vec::new();
    for &length_s in lengths {
        let model = bench_model(cfg, length_s)
            .map_err(|e| Error::Domain(format!("training model for {length_s} s videos: {e}")))?;
        for &group in &cfg.arrangements {
            for &mode in &cfg.modes {
                let cell = prepare_cell(cfg, length_s, group, mode, &model)
                    .map_err(|e| Error::Domain(format!("cell {length_s} s {group} {mode}: {e}")))?;
                cells.push((models.len(), cell));
            }
        }
        models.push(model);
    }
    for _ in 0..cfg.repetitions {
        for (m, c) in &mut cells {
            let start = Instant::now();
            let out = analyze_scene(&c.seq, &c.pcfg, Some(&models[*m])).map_err(|e| {
                Error::Domain(format!("cell {} s {} {}: {e}", c.length_s, c.group, c.mode))
            })?;
            c.times.push(start.elapsed().as_secs_f64() * 1000.0);
            std::hint::black_box(out);
        }
    }
    Ok(cells
        .into_iter()
        .map(|(_, mut c)| {
            c.times.sort_by(f64::total_cmp);
            BenchRow {
                length_s: c.length_s,
                arrangement: c.group,
                mode: c.mode,
                frames: c.seq.len(),
                median_ms: percentile(&c.times, 50.0),
                p10_ms: percentile(&c.times, 10.0),
                p90_ms: percentile(&c.times, 90.0),
                roi_count: c.roi_count,
            }
        })
        .collect())
}

/// Tab-separated table with [`TABLE_HEADER`].
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut s = String::from(TABLE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{}",
            r.length_s, r.arrangement, r.mode, r.frames, r.median_ms, r.p10_ms, r.p90_ms, r.roi_count
        );
    }
    s
}
