//! Raw thermal frames to clean, normalized grayscale frames.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::frame::{FrameSequence, GrayFrame, RawFrame};

/// Default normalization span above ambient: 20 °C.
pub const DEFAULT_SPAN_CENTIKELVIN: u16 = 2000;
pub const DEFAULT_DISSIMILARITY: f64 = 0.2;
pub const DEFAULT_DENOISE_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    /// Mean background difference, as a fraction of full scale, above which a
    /// frame is dropped.
    pub dissimilarity_threshold: f64,
    /// Median window side; odd.
    pub denoise_window: usize,
    pub norm_floor_centikelvin: u16,
    pub norm_ceil_centikelvin: u16,
}

impl PreprocessConfig {
    /// Defaults for a capture at the given ambient: floor at ambient, ceiling
    /// 20 °C above it.
    pub fn for_ambient(ambient_centikelvin: u16) -> Self {
        PreprocessConfig {
            dissimilarity_threshold: DEFAULT_DISSIMILARITY,
            denoise_window: DEFAULT_DENOISE_WINDOW,
            norm_floor_centikelvin: ambient_centikelvin,
            norm_ceil_centikelvin: ambient_centikelvin.saturating_add(DEFAULT_SPAN_CENTIKELVIN),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dissimilarity_threshold) {
            return Err(Error::Config(format!(
                "dissimilarity_threshold {} outside [0, 1]",
                self.dissimilarity_threshold
            )));
        }
        check_window(self.denoise_window)?;
        check_bounds(self.norm_floor_centikelvin, self.norm_ceil_centikelvin)
    }

    pub fn span_centikelvin(&self) -> u16 {
        self.norm_ceil_centikelvin - self.norm_floor_centikelvin
    }
}

/// Key/value document form of [`PreprocessConfig`], same TOML grammar as
/// scene files. Missing bounds are filled in from the capture's ambient.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessDoc {
    pub dissimilarity_threshold: Option<f64>,
    pub denoise_window: Option<usize>,
    pub norm_floor_centikelvin: Option<u16>,
    pub norm_ceil_centikelvin: Option<u16>,
}

impl PreprocessDoc {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(0, e.message().to_string()))
    }

    pub fn resolve(&self, ambient_centikelvin: u16) -> Result<PreprocessConfig> {
        let d = PreprocessConfig::for_ambient(ambient_centikelvin);
        let floor = self.norm_floor_centikelvin.unwrap_or(d.norm_floor_centikelvin);
        let cfg = PreprocessConfig {
            dissimilarity_threshold: self.dissimilarity_threshold.unwrap_or(d.dissimilarity_threshold),
            denoise_window: self.denoise_window.unwrap_or(d.denoise_window),
            norm_floor_centikelvin: floor,
            norm_ceil_centikelvin: self
                .norm_ceil_centikelvin
                .unwrap_or(floor.saturating_add(DEFAULT_SPAN_CENTIKELVIN)),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Config(format!("denoise window {window} must be odd and >= 1")));
    }
    Ok(())
}

fn check_bounds(floor: u16, ceil: u16) -> Result<()> {
    if floor >= ceil {
        return Err(Error::Config(format!(
            "normalization floor {floor} must be below ceiling {ceil}"
        )));
    }
    Ok(())
}

/// Maps absolute temperature onto `[0, 255]`:
/// `round(255 · clamp((T − floor) / (ceil − floor), 0, 1))`.
pub fn normalize(frame: &RawFrame, floor: u16, ceil: u16) -> Result<GrayFrame> {
    check_bounds(floor, ceil)?;
    let span = (ceil - floor) as f64;
    let pixels = frame
        .pixels()
        .iter()
        .map(|&t| {
            let r = ((t as f64 - floor as f64) / span).clamp(0.0, 1.0);
            (255.0 * r).round() as u8
        })
        .collect();
    GrayFrame::new(frame.width(), frame.height(), pixels, frame.index())
}

/// [`normalize`] with the mapping tabulated once for every possible input.
#[derive(Debug, Clone)]
pub struct Normalizer {
    table: Vec<u8>,
}

impl Normalizer {
    pub fn new(floor: u16, ceil: u16) -> Result<Self> {
        check_bounds(floor, ceil)?;
        let span = (ceil - floor) as f64;
        let table = (0..=u16::MAX)
            .map(|t| (255.0 * ((t.clamp(floor, ceil) - floor) as f64 / span)).round() as u8)
            .collect();
        Ok(Normalizer { table })
    }

    pub fn apply(&self, frame: &RawFrame) -> Result<GrayFrame> {
        let mut out = GrayFrame::filled(frame.width(), frame.height(), 0, frame.index())?;
        self.apply_into(frame, &mut out)?;
        Ok(out)
    }

    /// Overwrites `out`, which must have the frame's dimensions, and takes
    /// over the frame's index.
    pub fn apply_into(&self, frame: &RawFrame, out: &mut GrayFrame) -> Result<()> {
        if (out.width(), out.height()) != (frame.width(), frame.height()) {
            return Err(Error::Domain(format!("frame {} dimensions differ", frame.index())));
        }
        for (g, &t) in out.pixels_mut().iter_mut().zip(frame.pixels()) {
            *g = self.table[t as usize];
        }
        out.set_index(frame.index());
        Ok(())
    }
}

pub fn normalize_frames(frames: &[RawFrame], floor: u16, ceil: u16) -> Result<Vec<GrayFrame>> {
    let n = Normalizer::new(floor, ceil)?;
    frames.iter().map(|f| n.apply(f)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<GrayFrame>,
    /// Positions (in the input list) of dropped frames, ascending.
    pub rejected: Vec<usize>,
}

/// Drops frames whose background jumps relative to the last kept frame.
///
/// The background is the set of pixels below `hot_threshold` in the
/// reference (last kept) frame, so a fading fingerprint never counts as
/// dissimilarity. A frame is rejected when the mean absolute difference over
/// that set exceeds `threshold · 255`. The first frame is always kept.
pub fn background_filter(
    frames: &[GrayFrame],
    threshold: f64,
    hot_threshold: u8,
) -> Result<FilterOutcome> {
    let Some(first) = frames.first() else {
        return Err(Error::Domain("background filter needs at least one frame".into()));
    };
    let limit = threshold * 255.0;
    let mut kept = vec![first.clone()];
    let mut rejected = Vec::new();
    let mut reference = 0usize;
    for (i, frame) in frames.iter().enumerate().skip(1) {
        if background_difference(&frames[reference], frame, hot_threshold)? > limit {
            rejected.push(i);
        } else {
            kept.push(frame.clone());
            reference = i;
        }
    }
    Ok(FilterOutcome { kept, rejected })
}

/// Mean absolute difference, in gray levels, over the pixels of `reference`
/// below `hot_threshold`; 0 when there are none.
pub fn background_difference(reference: &GrayFrame, frame: &GrayFrame, hot_threshold: u8) -> Result<f64> {
    if (reference.width(), reference.height()) != (frame.width(), frame.height()) {
        return Err(Error::Domain(format!("frame {} dimensions differ", frame.index())));
    }
    let mut sum = 0u64;
    let mut count = 0u64;
    for (&a, &b) in reference.pixels().iter().zip(frame.pixels()) {
        let m = (a < hot_threshold) as u64;
        sum += m * a.abs_diff(b) as u64;
        count += m;
    }
    Ok(if count == 0 { 0.0 } else { sum as f64 / count as f64 })
}

/// Median of the `window × window` neighbourhood at `(x, y)`, replicating
/// border pixels.
fn median_at(frame: &GrayFrame, x: usize, y: usize, window: usize, buf: &mut Vec<u8>) -> u8 {
    let r = (window / 2) as isize;
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    buf.clear();
    for dy in -r..=r {
        let yy = (y as isize + dy).clamp(0, h - 1) as usize;
        for dx in -r..=r {
            let xx = (x as isize + dx).clamp(0, w - 1) as usize;
            buf.push(frame.get(xx, yy));
        }
    }
    let mid = buf.len() / 2;
    *buf.select_nth_unstable(mid).1
}

/// Median filter with border replication.
pub fn denoise(frame: &GrayFrame, window: usize) -> Result<GrayFrame> {
    check_window(window)?;
    if window == 1 {
        return Ok(frame.clone());
    }
    let mut buf = Vec::with_capacity(window * window);
    let mut out = Vec::with_capacity(frame.pixels().len());
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            out.push(median_at(frame, x, y, window, &mut buf));
        }
    }
    GrayFrame::new(frame.width(), frame.height(), out, frame.index())
}

/// Median-filters only the pixels flagged in `region` (row-major, same size as
/// the frame); other pixels keep their input value. Every flagged pixel gets
/// exactly the value [`denoise`] would give it.
pub fn denoise_region(frame: &GrayFrame, window: usize, region: &[bool]) -> Result<GrayFrame> {
    check_window(window)?;
    if region.len() != frame.pixels().len() {
        return Err(Error::Domain("region mask size differs from frame".into()));
    }
    let at: Vec<usize> = (0..region.len()).filter(|&i| region[i]).collect();
    let mut out = frame.pixels().to_vec();
    denoise_at(frame, window, &at, &mut out)?;
    GrayFrame::new(frame.width(), frame.height(), out, frame.index())
}

/// Writes the [`denoise`] value of each listed pixel into `out` at the same
/// position; other entries of `out` are left alone.
pub fn denoise_at(frame: &GrayFrame, window: usize, at: &[usize], out: &mut [u8]) -> Result<()> {
    check_window(window)?;
    let n = frame.pixels().len();
    if out.len() != n || at.iter().any(|&i| i >= n) {
        return Err(Error::Domain("pixel positions exceed the frame".into()));
    }
    let w = frame.width();
    let mut buf = Vec::with_capacity(window * window);
    for &i in at {
        out[i] = if window == 1 { frame.pixels()[i] } else { median_at(frame, i % w, i / w, window, &mut buf) };
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub frames: Vec<GrayFrame>,
    pub rejected: Vec<usize>,
}

/// Normalize, drop dissimilar frames, then denoise what is left.
pub fn preprocess_sequence(
    seq: &FrameSequence,
    cfg: &PreprocessConfig,
    hot_threshold: u8,
) -> Result<Preprocessed> {
    cfg.validate()?;
    let gray = normalize_frames(seq.frames(), cfg.norm_floor_centikelvin, cfg.norm_ceil_centikelvin)?;
    let FilterOutcome { kept, rejected } =
        background_filter(&gray, cfg.dissimilarity_threshold, hot_threshold)?;
    let frames = kept
        .iter()
        .map(|f| denoise(f, cfg.denoise_window))
        .collect::<Result<Vec<_>>>()?;
    Ok(Preprocessed { frames, rejected })
}
