//! Dissipation vectors: how the hot area of a fingerprint shrinks over time.
//!
//! With `A_i` the hot area in the first frame and `A_t` the area at frame
//! `t`, the reduction area is `RA_t = (A_i − A_t) / A_i`. The feature vector
//! stores the complementary remaining fraction `A_t / A_i`, which is exactly
//! zero once the fingerprint is gone, so padding a short capture with zeros
//! and a fully dissipated fingerprint look the same.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::frame::{DissipationVector, GrayFrame};

/// 60 s at 8 Hz.
pub const DEFAULT_VECTOR_LEN: usize = 480;
pub const DEFAULT_EPSILON: f64 = 0.02;
/// Default hot-pixel criterion: 2 °C above the normalization floor.
pub const DEFAULT_THRESHOLD_EXCESS_C: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerprintConfig {
    /// Pixels at or above this intensity are part of a fingerprint.
    pub intensity_threshold: u8,
    pub vector_len: usize,
    /// Remaining fraction below which the fingerprint counts as gone.
    pub dissipated_epsilon: f64,
}

impl FingerprintConfig {
    pub fn new(intensity_threshold: u8, vector_len: usize, dissipated_epsilon: f64) -> Result<Self> {
        let cfg = FingerprintConfig {
            intensity_threshold,
            vector_len,
            dissipated_epsilon,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults for a normalization span (ceil − floor) in centikelvin.
    pub fn for_span(span_centikelvin: u16) -> Self {
        FingerprintConfig {
            intensity_threshold: threshold_for_excess(DEFAULT_THRESHOLD_EXCESS_C, span_centikelvin),
            vector_len: DEFAULT_VECTOR_LEN,
            dissipated_epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.intensity_threshold == 0 {
            return Err(Error::Config("intensity threshold must be in [1, 255]".into()));
        }
        if self.vector_len < 2 {
            return Err(Error::Config(format!("vector_len {} must be >= 2", self.vector_len)));
        }
        if !(self.dissipated_epsilon > 0.0 && self.dissipated_epsilon < 1.0) {
            return Err(Error::Config(format!(
                "dissipated_epsilon {} outside (0, 1)",
                self.dissipated_epsilon
            )));
        }
        Ok(())
    }
}

/// Intensity a pixel `excess_c` above the floor normalizes to, as a threshold
/// in `[1, 255]`.
pub fn threshold_for_excess(excess_c: f64, span_centikelvin: u16) -> u8 {
    (255.0 * excess_c * 100.0 / span_centikelvin as f64)
        .round()
        .clamp(1.0, 255.0) as u8
}

/// The smallest excess over the floor (°C) whose noise-free rendering counts
/// as hot under `threshold`, once both the centikelvin and the 8-bit
/// rounding are accounted for.
///
/// A pixel at integer excess `K` centikelvin is hot iff
/// `round(255 · K / span) ≥ threshold`; a continuous excess `e` renders to
/// `round(100 · e)` centikelvin, so the boundary is `(K_min − 0.5) / 100`.
pub fn detection_excess_c(threshold: u8, span_centikelvin: u16) -> f64 {
    let span = span_centikelvin as f64;
    let k_min = (0..=span_centikelvin as u32)
        .find(|&k| (255.0 * (k as f64 / span).min(1.0)).round() >= threshold as f64)
        .unwrap_or(span_centikelvin as u32);
    (k_min as f64 - 0.5) / 100.0
}

/// Number of pixels with intensity `>= threshold`.
pub fn hot_area(frame: &GrayFrame, threshold: u8) -> usize {
    frame.pixels().iter().filter(|&&p| p >= threshold).count()
}

/// `(A_i − A_t) / A_i`, with `A_t` clamped to `A_i`.
pub fn reduction_area(a_i: usize, a_t: usize) -> Result<f64> {
    if a_i == 0 {
        return Err(Error::NoFingerprint("initial area is zero".into()));
    }
    let a_t = a_t.min(a_i);
    Ok((a_i - a_t) as f64 / a_i as f64)
}

/// Builds a vector from an area trajectory. The first area is `A_i`.
pub fn vector_from_areas(areas: &[usize], fps_millihz: u32, vector_len: usize) -> Result<DissipationVector> {
    let a_i = match areas.first() {
        Some(&a) if a > 0 => a,
        _ => return Err(Error::NoFingerprint("no hot pixels in the first frame".into())),
    };
    let mut values = Vec::with_capacity(vector_len);
    let mut gone = false;
    for &a_t in areas.iter().take(vector_len) {
        let remaining = if gone { 0.0 } else { 1.0 - reduction_area(a_i, a_t)? };
        gone |= remaining == 0.0;
        values.push(remaining);
    }
    values.resize(vector_len, 0.0);
    DissipationVector::new(values, fps_millihz)
}

/// Dissipation vector of a whole-frame fingerprint.
pub fn extract_vector(
    frames: &[GrayFrame],
    fps_millihz: u32,
    cfg: &FingerprintConfig,
) -> Result<DissipationVector> {
    cfg.validate()?;
    let areas: Vec<usize> = frames
        .iter()
        .take(cfg.vector_len)
        .map(|f| hot_area(f, cfg.intensity_threshold))
        .collect();
    vector_from_areas(&areas, fps_millihz, cfg.vector_len)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    pub seconds: f64,
    /// The fraction never fell below epsilon; `seconds` is then the span the
    /// vector covers.
    pub still_dissipating: bool,
}

/// Time of the first element below `epsilon`.
pub fn dissipation_time(v: &DissipationVector, epsilon: f64) -> Dissipation {
    match v.values().iter().position(|&x| x < epsilon) {
        Some(i) => Dissipation {
            seconds: i as f64 / v.fps(),
            still_dissipating: false,
        },
        None => Dissipation {
            seconds: v.len() as f64 / v.fps(),
            still_dissipating: true,
        },
    }
}

/// Fractional ranks, ties sharing their average rank (1-based).
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation with average-rank ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Domain(format!("length mismatch: {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Domain("spearman needs at least 3 pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN in input".into()));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Domain("spearman is undefined for a constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Writes the MDV1 text form: a header line `MDV1 <L> <fps_millihz>`, then
/// one decimal fraction per line.
pub fn write_mdv<W: Write>(v: &DissipationVector, mut out: W) -> Result<()> {
    let io = |source| Error::Io { position: 0, source };
    writeln!(out, "MDV1 {} {}", v.len(), v.fps_millihz()).map_err(io)?;
    for x in v.values() {
        writeln!(out, "{x}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_mdv<R: BufRead>(input: R) -> Result<DissipationVector> {
    let mut lines = input.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|source| Error::Io { position: 0, source })?,
        None => return Err(Error::Format("empty MDV1 file".into())),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "MDV1" {
        return Err(Error::Format(format!("bad MDV1 header {header:?}")));
    }
    let len: usize = fields[1]
        .parse()
        .map_err(|_| Error::parse(1, format!("bad length {:?}", fields[1])))?;
    let fps: u32 = fields[2]
        .parse()
        .map_err(|_| Error::parse(1, format!("bad fps_millihz {:?}", fields[2])))?;
    let mut values = Vec::with_capacity(len.min(1 << 20));
    for (i, line) in lines {
        let line = line.map_err(|source| Error::Io { position: 0, source })?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let x: f64 = t
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("bad value {t:?}")))?;
        values.push(x);
    }
    if values.len() != len {
        return Err(Error::Format(format!(
            "header declares {len} values, found {}",
            values.len()
        )));
    }
    DissipationVector::new(values, fps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, v: u8, i: usize) -> GrayFrame {
        GrayFrame::filled(w, h, v, i).unwrap()
    }

    #[test]
    fn hot_area_cases() {
        assert_eq!(hot_area(&gray(6, 4, 0, 0), 1), 0);
        assert_eq!(hot_area(&gray(6, 4, 255, 0), 255), 24);
        let f = GrayFrame::new(3, 1, vec![25, 26, 27], 0).unwrap();
        assert_eq!(hot_area(&f, 26), 2);
    }

    #[test]
    fn reduction_area_examples() {
        assert_eq!(reduction_area(100, 100).unwrap(), 0.0);
        assert_eq!(reduction_area(100, 0).unwrap(), 1.0);
        assert_eq!(reduction_area(200, 50).unwrap(), 0.75);
        assert_eq!(reduction_area(10, 30).unwrap(), 0.0);
        assert!(matches!(reduction_area(0, 0), Err(Error::NoFingerprint(_))));
    }

    proptest! {
        #[test]
        fn reduction_area_endpoints(a in 1usize..1_000_000) {
            prop_assert_eq!(reduction_area(a, a).unwrap(), 0.0);
            prop_assert_eq!(reduction_area(a, 0).unwrap(), 1.0);
        }

        #[test]
        fn vector_is_complement_of_reduction_area(areas in prop::collection::vec(0usize..50, 1..30), len in 2usize..40) {
            let mut areas = areas;
            areas[0] = areas[0].max(1);
            let v = vector_from_areas(&areas, 8000, len).unwrap();
            let mut gone = false;
            for (t, x) in v.values().iter().enumerate() {
                let expect = if t >= areas.len() || gone { 0.0 } else { 1.0 - reduction_area(areas[0], areas[t]).unwrap() };
                gone |= expect == 0.0;
                prop_assert_eq!(*x, expect);
            }
        }
    }

    #[test]
    fn extract_vector_cases() {
        let cfg = FingerprintConfig::new(26, 4, 0.05).unwrap();
        let hot: Vec<_> = (0..4).map(|i| gray(3, 3, 200, i)).collect();
        assert_eq!(extract_vector(&hot, 8000, &cfg).unwrap().values(), &[1.0; 4]);

        let mut seq = vec![gray(3, 3, 200, 0)];
        seq.extend((1..6).map(|i| gray(3, 3, 0, i)));
        assert_eq!(extract_vector(&seq, 8000, &cfg).unwrap().values(), &[1.0, 0.0, 0.0, 0.0]);

        let short = vec![gray(3, 3, 200, 0)];
        assert_eq!(extract_vector(&short, 8000, &cfg).unwrap().values(), &[1.0, 0.0, 0.0, 0.0]);

        let cold = vec![gray(3, 3, 10, 0)];
        assert!(matches!(extract_vector(&cold, 8000, &cfg), Err(Error::NoFingerprint(_))));
    }

    #[test]
    fn regrowth_after_zero_is_suppressed() {
        let v = vector_from_areas(&[4, 2, 0, 3, 1], 8000, 6).unwrap();
        assert_eq!(v.values(), &[1.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dissipation_time_cases() {
        let v = DissipationVector::new(vec![1.0, 0.0, 0.0], 8000).unwrap();
        let d = dissipation_time(&v, 0.05);
        assert_eq!(d.seconds, 0.125);
        assert!(!d.still_dissipating);
        let ones = DissipationVector::new(vec![1.0; 16], 8000).unwrap();
        let d = dissipation_time(&ones, 0.05);
        assert!(d.still_dissipating);
        assert_eq!(d.seconds, 2.0);
    }

    #[test]
    fn default_threshold_is_two_degrees() {
        assert_eq!(threshold_for_excess(2.0, 2000), 26);
        let cfg = FingerprintConfig::for_span(2000);
        assert_eq!(cfg.intensity_threshold, 26);
        assert_eq!(cfg.vector_len, 480);
        // round(255·K/2000) ≥ 26 first holds at K = 200 (25.5 rounds up).
        assert_eq!(detection_excess_c(26, 2000), 1.995);
    }

    #[test]
    fn detection_excess_matches_pixel_scan() {
        use crate::preprocess::normalize;
        use crate::frame::RawFrame;
        for thr in [1u8, 26, 100, 255] {
            for span in [500u16, 2000, 3001] {
                let theta = detection_excess_c(thr, span);
                let floor = 29515u16;
                for k in 0..=span {
                    let f = RawFrame::new(1, 1, vec![floor + k], 0).unwrap();
                    let g = normalize(&f, floor, floor + span).unwrap();
                    let hot = g.pixels()[0] >= thr;
                    assert_eq!(hot, k as f64 > theta * 100.0, "thr {thr} span {span} k {k}");
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(FingerprintConfig::new(0, 10, 0.1).is_err());
        assert!(FingerprintConfig::new(1, 1, 0.1).is_err());
        assert!(FingerprintConfig::new(1, 2, 0.0).is_err());
        assert!(FingerprintConfig::new(1, 2, 1.0).is_err());
    }

    /// Pearson on average ranks, computed the long way.
    fn rank_pearson_oracle(xs: &[f64], ys: &[f64]) -> f64 {
        let rank = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|a| {
                    let less = v.iter().filter(|b| *b < a).count() as f64;
                    let eq = v.iter().filter(|b| *b == a).count() as f64;
                    less + (eq + 1.0) / 2.0
                })
                .collect()
        };
        let (rx, ry) = (rank(xs), rank(ys));
        let n = xs.len() as f64;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn spearman_cases() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&xs, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap(), 1.0);
        assert_eq!(spearman(&xs, &[9.0, 7.0, 5.0, 3.0, 1.0]).unwrap(), -1.0);
        let tx = [1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 4.0, 7.0];
        let ty = [3.0, 1.0, 2.0, 2.0, 9.0, 5.0, 5.0, 0.5];
        let r = spearman(&tx, &ty).unwrap();
        assert!((r - rank_pearson_oracle(&tx, &ty)).abs() < 1e-12);
        assert!(spearman(&xs, &xs[..4]).is_err());
        assert!(spearman(&xs[..2], &xs[..2]).is_err());
        assert!(spearman(&xs, &[1.0; 5]).is_err());
    }

    proptest! {
        #[test]
        fn spearman_matches_oracle_with_ties(pairs in prop::collection::vec((0u8..6, 0u8..6), 3..25)) {
            let xs: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            match spearman(&xs, &ys) {
                Ok(r) => prop_assert!((r - rank_pearson_oracle(&xs, &ys)).abs() < 1e-12),
                Err(_) => prop_assert!(rank_pearson_oracle(&xs, &ys).is_nan()),
            }
        }

        #[test]
        fn mdv_round_trip(areas in prop::collection::vec(0usize..1000, 1..50), len in 2usize..60, fps in 1u32..100_000) {
            let mut areas = areas;
            areas[0] = areas[0].max(1);
            let v = vector_from_areas(&areas, fps, len).unwrap();
            let mut buf = Vec::new();
            write_mdv(&v, &mut buf).unwrap();
            prop_assert_eq!(read_mdv(&buf[..]).unwrap(), v);
        }
    }

    #[test]
    fn mdv_errors() {
        assert!(read_mdv(&b""[..]).is_err());
        assert!(read_mdv(&b"MDV2 2 8000\n1\n0\n"[..]).is_err());
        assert!(read_mdv(&b"MDV1 3 8000\n1\n0\n"[..]).is_err());
        assert!(read_mdv(&b"MDV1 2 8000\n1\nx\n"[..]).is_err());
        assert!(read_mdv(&b"MDV1 2 8000\n1\n0.5\n"[..]).is_ok());
        assert!(read_mdv(&b"MDV1 2 8000\n0.5\n0.5\n"[..]).is_err());
    }
}
