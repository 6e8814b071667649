//! Frame and feature-vector types shared by every stage of the pipeline.
//!
//! Absolute temperatures are carried as centikelvin in `u16` (0.01 K steps,
//! up to 655.35 K). All constructors validate their invariants, so a value of
//! any of these types is always well formed.

use crate::error::{Error, Result};

const KELVIN_OFFSET_C: f64 = 273.15;

/// Converts degrees Celsius to centikelvin, rounding to the nearest step and
/// saturating at the ends of the `u16` range.
pub fn celsius_to_centikelvin(celsius: f64) -> u16 {
    let ck = ((celsius + KELVIN_OFFSET_C) * 100.0).round();
    ck.clamp(0.0, u16::MAX as f64) as u16
}

pub fn centikelvin_to_celsius(ck: u16) -> f64 {
    ck as f64 / 100.0 - KELVIN_OFFSET_C
}

fn check_dims(what: &'static str, width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(what, format!("dimensions {width}x{height} must be >= 1")));
    }
    if width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(Error::invalid(what, format!("dimensions {width}x{height} exceed 65535")));
    }
    if len != width * height {
        return Err(Error::invalid(
            what,
            format!("{len} pixels for a {width}x{height} frame"),
        ));
    }
    Ok(())
}

/// One thermal image in absolute temperature (centikelvin), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    width: usize,
    height: usize,
    pixels: Vec<u16>,
    index: usize,
}

impl RawFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u16>, index: usize) -> Result<Self> {
        check_dims("raw frame", width, height, pixels.len())?;
        Ok(RawFrame {
            width,
            height,
            pixels,
            index,
        })
    }

    pub fn filled(width: usize, height: usize, value: u16, index: usize) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], index)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }

    pub fn into_pixels(self) -> Vec<u16> {
        self.pixels
    }
}

/// A normalized 8-bit intensity image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    index: usize,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>, index: usize) -> Result<Self> {
        check_dims("gray frame", width, height, pixels.len())?;
        Ok(GrayFrame {
            width,
            height,
            pixels,
            index,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8, index: usize) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], index)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn set_index(&mut self, index: usize) {
        self.index = index;
    }
}

/// An ordered capture of raw frames plus the acquisition metadata.
///
/// Frame `i` always carries index `i`. The optional material label is
/// metadata for dataset building and is not stored in the MTDF container.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    frames: Vec<RawFrame>,
    fps_millihz: u32,
    ambient_centikelvin: u16,
    label: Option<String>,
}

impl FrameSequence {
    pub fn new(
        frames: Vec<RawFrame>,
        fps_millihz: u32,
        ambient_centikelvin: u16,
        label: Option<String>,
    ) -> Result<Self> {
        if fps_millihz == 0 {
            return Err(Error::invalid("frame sequence", "fps_millihz must be > 0"));
        }
        if let Some(first) = frames.first() {
            let (w, h) = (first.width(), first.height());
            for (i, f) in frames.iter().enumerate() {
                if f.width() != w || f.height() != h {
                    return Err(Error::invalid(
                        "frame sequence",
                        format!(
                            "frame {i} is {}x{}, expected {w}x{h}",
                            f.width(),
                            f.height()
                        ),
                    ));
                }
                if f.index() != i {
                    return Err(Error::invalid(
                        "frame sequence",
                        format!("frame at position {i} has index {}", f.index()),
                    ));
                }
            }
        }
        Ok(FrameSequence {
            frames,
            fps_millihz,
            ambient_centikelvin,
            label,
        })
    }

    pub fn frames(&self) -> &[RawFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(width, height)` of the frames, or `None` for an empty sequence.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width(), f.height()))
    }

    pub fn fps_millihz(&self) -> u32 {
        self.fps_millihz
    }

    pub fn fps(&self) -> f64 {
        self.fps_millihz as f64 / 1000.0
    }

    pub fn ambient_centikelvin(&self) -> u16 {
        self.ambient_centikelvin
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }
}

/// Remaining hot-area fraction `A_t / A_i` per frame, fixed length.
///
/// Element 0 is 1.0, all elements lie in `[0, 1]`, and the first exact zero
/// is followed only by zeros. `1 - values[t]` is the reduction area at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationVector {
    values: Vec<f64>,
    fps_millihz: u32,
}

impl DissipationVector {
    pub fn new(values: Vec<f64>, fps_millihz: u32) -> Result<Self> {
        const WHAT: &str = "dissipation vector";
        if values.is_empty() {
            return Err(Error::invalid(WHAT, "length must be >= 1"));
        }
        if fps_millihz == 0 {
            return Err(Error::invalid(WHAT, "fps_millihz must be > 0"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::invalid(WHAT, format!("element {i} = {v} outside [0, 1]")));
        }
        if values[0] != 1.0 {
            return Err(Error::invalid(
                WHAT,
                format!("element 0 must be 1.0, got {}", values[0]),
            ));
        }
        if let Some(z) = values.iter().position(|&v| v == 0.0) {
            if let Some(j) = values[z..].iter().position(|&v| v != 0.0) {
                return Err(Error::invalid(
                    WHAT,
                    format!("element {} is non-zero after zero at {z}", z + j),
                ));
            }
        }
        Ok(DissipationVector {
            values,
            fps_millihz,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn fps_millihz(&self) -> u32 {
        self.fps_millihz
    }

    pub fn fps(&self) -> f64 {
        self.fps_millihz as f64 / 1000.0
    }

    /// Reduction area per element, `1 - A_t / A_i`.
    pub fn reduction_areas(&self) -> Vec<f64> {
        self.values.iter().map(|v| 1.0 - v).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_rejects_bad_dims() {
        assert!(RawFrame::new(0, 3, vec![], 0).is_err());
        assert!(RawFrame::new(2, 2, vec![1, 2, 3], 0).is_err());
        assert!(GrayFrame::new(3, 1, vec![0, 0, 0], 0).is_ok());
    }

    #[test]
    fn sequence_checks_dims_and_indices() {
        let a = RawFrame::filled(2, 2, 100, 0).unwrap();
        let b = RawFrame::filled(2, 3, 100, 1).unwrap();
        assert!(FrameSequence::new(vec![a.clone(), b], 8000, 29515, None).is_err());
        let c = RawFrame::filled(2, 2, 100, 2).unwrap();
        assert!(FrameSequence::new(vec![a.clone(), c], 8000, 29515, None).is_err());
        assert!(FrameSequence::new(vec![a.clone()], 0, 29515, None).is_err());
        let seq = FrameSequence::new(vec![a], 8000, 29515, None).unwrap();
        assert_eq!(seq.dims(), Some((2, 2)));
        assert_eq!(seq.fps(), 8.0);
    }

    #[test]
    fn vector_invariants() {
        assert!(DissipationVector::new(vec![1.0, 0.5, 0.0, 0.0], 8000).is_ok());
        assert!(DissipationVector::new(vec![1.0, 0.0, 0.1], 8000).is_err());
        assert!(DissipationVector::new(vec![0.9, 0.5], 8000).is_err());
        assert!(DissipationVector::new(vec![1.0, 1.2], 8000).is_err());
        assert!(DissipationVector::new(vec![1.0, f64::NAN], 8000).is_err());
        let v = DissipationVector::new(vec![1.0, 0.25], 8000).unwrap();
        assert_eq!(v.reduction_areas(), vec![0.0, 0.75]);
    }

    #[test]
    fn celsius_round_trip() {
        assert_eq!(celsius_to_centikelvin(22.0), 29515);
        assert_eq!(celsius_to_centikelvin(-300.0), 0);
        assert!((centikelvin_to_celsius(29515) - 22.0).abs() < 1e-9);
    }
}
