//! End-to-end analysis of a recorded sequence: normalize, filter, segment,
//! fingerprint and optionally classify each object.

use crate::error::{Error, Result};
use crate::fingerprint::{
    dissipation_time, extract_vector, vector_from_areas, Dissipation, FingerprintConfig,
};
use crate::frame::{DissipationVector, FrameSequence};
use crate::learn::{Classifier, TrainedModel};
use crate::preprocess::{
    background_difference, denoise, denoise_at, preprocess_sequence, Normalizer, PreprocessConfig,
};
use crate::segment::{
    dilated_region, region_hot_area, segment_frame, Arrangement, Roi, SegmentConfig,
    UnderSegmentation,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub fingerprint: FingerprintConfig,
    pub segment: SegmentConfig,
}

impl PipelineConfig {
    /// Defaults derived from the sequence's recorded ambient temperature.
    pub fn for_sequence(seq: &FrameSequence) -> Self {
        let preprocess = PreprocessConfig::for_ambient(seq.ambient_centikelvin());
        PipelineConfig {
            fingerprint: FingerprintConfig::for_span(preprocess.span_centikelvin()),
            preprocess,
            segment: SegmentConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.fingerprint.validate()
    }
}

/// Whole-frame fingerprint of a single-object sequence.
pub fn vector_from_sequence(seq: &FrameSequence, cfg: &PipelineConfig) -> Result<DissipationVector> {
    cfg.validate()?;
    let pre = preprocess_sequence(seq, &cfg.preprocess, cfg.fingerprint.intensity_threshold)?;
    extract_vector(&pre.frames, seq.fps_millihz(), &cfg.fingerprint)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectReport {
    pub roi: Roi,
    pub vector: DissipationVector,
    pub dissipation: Dissipation,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneAnalysis {
    pub objects: Vec<ObjectReport>,
    pub arrangement: Arrangement,
    pub warnings: Vec<(usize, UnderSegmentation)>,
    /// Input positions of frames dropped by the background filter.
    pub rejected: Vec<usize>,
}

impl SceneAnalysis {
    /// Predicted labels in ROI order; empty when no model was given.
    pub fn labels(&self) -> Vec<String> {
        self.objects.iter().filter_map(|o| o.label.clone()).collect()
    }
}

/// Multi-object analysis.
///
/// Segmentation runs on the fully denoised first kept frame. Later frames are
/// median-filtered only inside the union of the dilated object masks, which
/// gives the same per-object areas as filtering whole frames while keeping
/// the per-frame cost proportional to the object footprint.
pub fn analyze_scene(
    seq: &FrameSequence,
    cfg: &PipelineConfig,
    model: Option<&TrainedModel>,
) -> Result<SceneAnalysis> {
    cfg.validate()?;
    if let Some(m) = model {
        if m.encoding.extra_dims() > 0 {
            return Err(Error::Encoding(
                "scene analysis has no hold-type or gender data; use a vector-only model".into(),
            ));
        }
    }
    let p = &cfg.preprocess;
    let fp = &cfg.fingerprint;
    let thr = fp.intensity_threshold;
    let limit = p.dissimilarity_threshold * 255.0;
    let norm = Normalizer::new(p.norm_floor_centikelvin, p.norm_ceil_centikelvin)?;
    let frames = seq.frames();
    let mut reference = norm.apply(&frames[0])?;
    let first = denoise(&reference, p.denoise_window)?;
    let scene = segment_frame(&first, thr, &cfg.segment);
    if scene.rois.is_empty() {
        return Err(Error::NoFingerprint("no hot region in the first frame".into()));
    }

    // Frames are filtered one at a time against the last kept frame, and only
    // pixels inside the dilated object masks are median-filtered.
    let (w, h) = (first.width(), first.height());
    let regions: Vec<Vec<usize>> = scene.rois.iter().map(|r| dilated_region(r, w, h)).collect();
    let mut mask = vec![false; w * h];
    for &i in regions.iter().flatten() {
        mask[i] = true;
    }
    let at: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let mut areas: Vec<Vec<usize>> = regions
        .iter()
        .map(|r| {
            let mut a = Vec::with_capacity(fp.vector_len);
            a.push(region_hot_area(&first, r, thr));
            a
        })
        .collect();
    let mut clean = first.pixels().to_vec();
    let mut used = 1;
    let mut rejected = Vec::new();
    let mut gray = reference.clone();
    for (i, raw) in frames.iter().enumerate().skip(1) {
        norm.apply_into(raw, &mut gray)?;
        if background_difference(&reference, &gray, thr)? > limit {
            rejected.push(i);
            continue;
        }
        if used < fp.vector_len {
            denoise_at(&gray, p.denoise_window, &at, &mut clean)?;
            for (a, region) in areas.iter_mut().zip(&regions) {
                a.push(region.iter().filter(|&&j| clean[j] >= thr).count());
            }
            used += 1;
        }
        std::mem::swap(&mut reference, &mut gray);
    }

    let mut objects = Vec::with_capacity(regions.len());
    for (roi, a) in scene.rois.into_iter().zip(&areas) {
        let vector = vector_from_areas(a, seq.fps_millihz(), fp.vector_len)?;
        let label = match model {
            Some(m) => Some(m.model.predict(vector.values())?.to_owned()),
            None => None,
        };
        objects.push(ObjectReport {
            dissipation: dissipation_time(&vector, fp.dissipated_epsilon),
            roi,
            vector,
            label,
        });
    }
    Ok(SceneAnalysis {
        objects,
        arrangement: scene.arrangement,
        warnings: scene.warnings,
        rejected,
    })
}
