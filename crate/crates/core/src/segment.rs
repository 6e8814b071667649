//! Multi-object scenes: hot-region labelling, splitting of touching
//! fingerprints, and one dissipation vector per object.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::fingerprint::{vector_from_areas, FingerprintConfig};
use crate::frame::{DissipationVector, GrayFrame};

pub const DEFAULT_PROMINENCE: u8 = 10;

/// A connected hot region in frame 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Roi {
    pub id: usize,
    /// `(min_x, min_y, max_x, max_y)`, inclusive.
    pub bbox: (usize, usize, usize, usize),
    /// Intensity-weighted centroid `(x, y)`.
    pub centroid: (f64, f64),
    /// Member pixels `(x, y)` in row-major order.
    pub mask: Vec<(usize, usize)>,
    pub peak_intensity: u8,
}

impl Roi {
    fn from_pixels(id: usize, mut mask: Vec<(usize, usize)>, frame: &GrayFrame) -> Self {
        debug_assert!(!mask.is_empty());
        mask.sort_by_key(|&(x, y)| (y, x));
        let mut bbox = (usize::MAX, usize::MAX, 0, 0);
        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        let mut peak = 0u8;
        for &(x, y) in &mask {
            bbox.0 = bbox.0.min(x);
            bbox.1 = bbox.1.min(y);
            bbox.2 = bbox.2.max(x);
            bbox.3 = bbox.3.max(y);
            let v = frame.get(x, y);
            peak = peak.max(v);
            let w = v as f64;
            sw += w;
            sx += w * x as f64;
            sy += w * y as f64;
        }
        Roi {
            id,
            bbox,
            centroid: (sx / sw, sy / sw),
            mask,
            peak_intensity: peak,
        }
    }

    pub fn area(&self) -> usize {
        self.mask.len()
    }

    /// The manifest line `roi <id> bbox <x0> <y0> <x1> <y1> centroid <cx> <cy>`.
    pub fn manifest_line(&self) -> String {
        let (x0, y0, x1, y1) = self.bbox;
        format!(
            "roi {} bbox {x0} {y0} {x1} {y1} centroid {:.3} {:.3}",
            self.id, self.centroid.0, self.centroid.1
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrangement {
    Dispersed,
    Agglomerated,
}

impl fmt::Display for Arrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arrangement::Dispersed => "dispersed",
            Arrangement::Agglomerated => "agglomerated",
        })
    }
}

fn neighbours8(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    (-1isize..=1)
        .flat_map(|dy| (-1isize..=1).map(move |dx| (dx, dy)))
        .filter(|&d| d != (0, 0))
        .filter_map(move |(dx, dy)| {
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            (nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize).then_some((nx as usize, ny as usize))
        })
}

/// 8-connected components of pixels `>= threshold`, ordered by
/// `(min_y, min_x)` of their bounding boxes and numbered from 0.
pub fn find_rois(frame: &GrayFrame, threshold: u8) -> Vec<Roi> {
    let (w, h) = (frame.width(), frame.height());
    let mut seen = vec![false; w * h];
    let mut comps: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || frame.pixels()[start] < threshold {
            continue;
        }
        seen[start] = true;
        queue.push_back((start % w, start / w));
        let mut pixels = Vec::new();
        while let Some((x, y)) = queue.pop_front() {
            pixels.push((x, y));
            for (nx, ny) in neighbours8(x, y, w, h) {
                let i = ny * w + nx;
                if !seen[i] && frame.pixels()[i] >= threshold {
                    seen[i] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
        comps.push(pixels);
    }
    let mut rois: Vec<Roi> = comps
        .into_iter()
        .map(|px| Roi::from_pixels(0, px, frame))
        .collect();
    rois.sort_by_key(|r| (r.bbox.1, r.bbox.0, r.mask[0].1 * w + r.mask[0].0));
    for (i, r) in rois.iter_mut().enumerate() {
        r.id = i;
    }
    rois
}

/// `expected_k` asked for more objects than distinct maxima were found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnderSegmentation {
    pub expected: usize,
    pub found: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub rois: Vec<Roi>,
    pub warning: Option<UnderSegmentation>,
}

struct Peak {
    value: u8,
    /// Linear index of the first pixel of the peak's plateau.
    first: usize,
    /// Drop to the saddle where this peak merged into a higher one; `None`
    /// for the highest peak of the region.
    prominence: Option<u8>,
}

fn find_root(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Splits one ROI around its distinct intensity maxima.
///
/// Maxima are found by flooding the region from the top down: a pixel with
/// no brighter processed neighbour starts a peak, and where two flooded
/// areas meet, the lower peak gets a prominence equal to its height above
/// that saddle. Plateaus collapse to a single peak since their parts merge
/// with zero prominence. Peaks with prominence `>= min_prominence` (and
/// always the highest one) survive; with `expected_k`, only the `k` most
/// prominent are kept. Every pixel then goes to the nearest surviving peak
/// (plateau centroid), ties to the lower id.
pub fn split_agglomerated(
    frame: &GrayFrame,
    roi: &Roi,
    min_prominence: u8,
    expected_k: Option<usize>,
) -> SplitOutcome {
    let (w, h) = (frame.width(), frame.height());
    let n = roi.mask.len();
    let mut local = vec![usize::MAX; w * h];
    for (m, &(x, y)) in roi.mask.iter().enumerate() {
        local[y * w + x] = m;
    }
    let value = |m: usize| {
        let (x, y) = roi.mask[m];
        frame.get(x, y)
    };

    // Mask order is row-major, so a stable sort keeps scan order within a level.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&m| std::cmp::Reverse(value(m)));

    let mut parent: Vec<usize> = (0..n).collect();
    let mut peak_of = vec![usize::MAX; n];
    let mut processed = vec![false; n];
    let mut peaks: Vec<Peak> = Vec::new();
    let mut roots = Vec::with_capacity(8);
    for &m in &order {
        let (x, y) = roi.mask[m];
        let v = value(m);
        roots.clear();
        for (nx, ny) in neighbours8(x, y, w, h) {
            let nm = local[ny * w + nx];
            if nm != usize::MAX && processed[nm] {
                let r = find_root(&mut parent, nm);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        processed[m] = true;
        if roots.is_empty() {
            peak_of[m] = peaks.len();
            peaks.push(Peak {
                value: v,
                first: y * w + x,
                prominence: None,
            });
            continue;
        }
        let survivor = *roots
            .iter()
            .min_by_key(|&&r| (std::cmp::Reverse(peaks[peak_of[r]].value), peak_of[r]))
            .expect("non-empty");
        for &r in roots.iter().filter(|&&r| r != survivor) {
            let p = &mut peaks[peak_of[r]];
            p.prominence = Some(p.value - v);
            parent[r] = survivor;
        }
        parent[m] = survivor;
    }

    let mut candidates: Vec<usize> = (0..peaks.len())
        .filter(|&p| match peaks[p].prominence {
            None => true,
            Some(pr) => pr > 0 && pr >= min_prominence,
        })
        .collect();
    candidates.sort_by_key(|&p| (std::cmp::Reverse(peaks[p].prominence.map_or(u16::MAX, u16::from)), p));
    let mut warning = None;
    if let Some(k) = expected_k {
        let k = k.max(1);
        if k > candidates.len() {
            warning = Some(UnderSegmentation {
                expected: k,
                found: candidates.len(),
            });
        }
        candidates.truncate(k);
    }
    if candidates.len() <= 1 {
        return SplitOutcome {
            rois: vec![roi.clone()],
            warning,
        };
    }
    candidates.sort_by_key(|&p| peaks[p].first);

    // Peak location: centroid of its plateau.
    let centers: Vec<(f64, f64)> = candidates
        .iter()
        .map(|&p| {
            let start = local[peaks[p].first];
            let level = peaks[p].value;
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            let (mut sx, mut sy, mut c) = (0.0, 0.0, 0.0);
            while let Some(m) = stack.pop() {
                let (x, y) = roi.mask[m];
                sx += x as f64;
                sy += y as f64;
                c += 1.0;
                for (nx, ny) in neighbours8(x, y, w, h) {
                    let nm = local[ny * w + nx];
                    if nm != usize::MAX && !seen[nm] && value(nm) == level {
                        seen[nm] = true;
                        stack.push(nm);
                    }
                }
            }
            (sx / c, sy / c)
        })
        .collect();

    let mut parts: Vec<Vec<(usize, usize)>> = vec![Vec::new(); centers.len()];
    for &(x, y) in &roi.mask {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &(cx, cy)) in centers.iter().enumerate() {
            let d = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        parts[best].push((x, y));
    }
    let rois = parts
        .into_iter()
        .filter(|p| !p.is_empty())
        .enumerate()
        .map(|(i, p)| Roi::from_pixels(i, p, frame))
        .collect();
    SplitOutcome { rois, warning }
}

/// Agglomerated iff some pixel of one mask is 8-adjacent to a pixel of
/// another.
pub fn arrangement_of(rois: &[Roi], width: usize, height: usize) -> Arrangement {
    let mut label = vec![usize::MAX; width * height];
    for (i, r) in rois.iter().enumerate() {
        for &(x, y) in &r.mask {
            label[y * width + x] = i;
        }
    }
    for (i, r) in rois.iter().enumerate() {
        for &(x, y) in &r.mask {
            for (nx, ny) in neighbours8(x, y, width, height) {
                let l = label[ny * width + nx];
                if l != usize::MAX && l != i {
                    return Arrangement::Agglomerated;
                }
            }
        }
    }
    Arrangement::Dispersed
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentConfig {
    /// Minimum peak prominence (intensity levels) for a separate object.
    pub prominence: u8,
    /// Objects expected per connected region, if known.
    pub expected_k: Option<usize>,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            prominence: DEFAULT_PROMINENCE,
            expected_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSegmentation {
    pub rois: Vec<Roi>,
    pub arrangement: Arrangement,
    /// `(component index, warning)` for regions that yielded fewer maxima than
    /// expected.
    pub warnings: Vec<(usize, UnderSegmentation)>,
}

/// Segments frame 0: components, then splitting of each component. ROIs are
/// renumbered by `(min_y, min_x)` after splitting.
pub fn segment_frame(frame: &GrayFrame, threshold: u8, cfg: &SegmentConfig) -> SceneSegmentation {
    let mut rois = Vec::new();
    let mut warnings = Vec::new();
    for (ci, comp) in find_rois(frame, threshold).iter().enumerate() {
        let out = split_agglomerated(frame, comp, cfg.prominence, cfg.expected_k);
        if let Some(wn) = out.warning {
            warnings.push((ci, wn));
        }
        rois.extend(out.rois);
    }
    let w = frame.width();
    rois.sort_by_key(|r| (r.bbox.1, r.bbox.0, r.mask[0].1 * w + r.mask[0].0));
    for (i, r) in rois.iter_mut().enumerate() {
        r.id = i;
    }
    let arrangement = arrangement_of(&rois, frame.width(), frame.height());
    SceneSegmentation {
        rois,
        arrangement,
        warnings,
    }
}

/// Linear indices of `roi`'s mask grown by one pixel (8-neighbourhood),
/// clipped to the frame, ascending.
pub fn dilated_region(roi: &Roi, width: usize, height: usize) -> Vec<usize> {
    let mut flag = vec![false; width * height];
    for &(x, y) in &roi.mask {
        flag[y * width + x] = true;
        for (nx, ny) in neighbours8(x, y, width, height) {
            flag[ny * width + nx] = true;
        }
    }
    flag.iter()
        .enumerate()
        .filter_map(|(i, &f)| f.then_some(i))
        .collect()
}

/// Hot pixels of `frame` inside `region`.
pub fn region_hot_area(frame: &GrayFrame, region: &[usize], threshold: u8) -> usize {
    let px = frame.pixels();
    region.iter().filter(|&&i| px[i] >= threshold).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiExtraction {
    pub objects: Vec<(Roi, DissipationVector)>,
    pub arrangement: Arrangement,
    pub warnings: Vec<(usize, UnderSegmentation)>,
}

/// One dissipation vector per object.
///
/// Objects are fixed in frame 0; at every later frame, the area of object `r`
/// is the hot-pixel count inside its frame-0 mask dilated by one pixel.
pub fn extract_multi(
    frames: &[GrayFrame],
    fps_millihz: u32,
    fp: &FingerprintConfig,
    seg: &SegmentConfig,
) -> Result<MultiExtraction> {
    fp.validate()?;
    let first = frames
        .first()
        .ok_or_else(|| Error::NoFingerprint("empty frame list".into()))?;
    let scene = segment_frame(first, fp.intensity_threshold, seg);
    if scene.rois.is_empty() {
        return Err(Error::NoFingerprint("no hot region in frame 0".into()));
    }
    let (w, h) = (first.width(), first.height());
    let objects = scene
        .rois
        .into_iter()
        .map(|roi| {
            let region = dilated_region(&roi, w, h);
            let areas: Vec<usize> = frames
                .iter()
                .take(fp.vector_len)
                .map(|f| region_hot_area(f, &region, fp.intensity_threshold))
                .collect();
            let v = vector_from_areas(&areas, fps_millihz, fp.vector_len)?;
            Ok((roi, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiExtraction {
        objects,
        arrangement: scene.arrangement,
        warnings: scene.warnings,
    })
}
