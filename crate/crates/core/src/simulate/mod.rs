//! Synthetic thermal scenes with closed-form ground truth.
//!
//! Each object leaves an isotropic Gaussian heat spot that cools toward
//! ambient with a single time constant:
//!
//! ```text
//! T(x, y, t) = T_amb + Σ ΔT_o · exp(-t / τ_o) · exp(-d² / (2σ_o²)) + noise
//! ΔT_o       = initial_excess_o · exp(-k_o · thickness_o)
//! ```
//!
//! Because the model is closed form, the time at which a spot's peak drops
//! below a detection threshold and the area above that threshold at any time
//! are both known exactly. Those are the oracles the rest of the pipeline is
//! checked against.

mod calibrate;
mod catalog;
mod scene_file;

pub use calibrate::{fit_cooling, CoolingFit};
pub use catalog::{
    emissivity_sweep, household_materials, plastic_materials, tau_from_emissivity,
};
pub use scene_file::{parse_scene, scene_to_toml};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{celsius_to_centikelvin, FrameSequence, RawFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialProfile {
    pub name: String,
    /// Cooling time constant in seconds.
    pub tau_s: f64,
    pub emissivity: f64,
    pub spot_sigma_px: f64,
    /// Attenuation per millimetre of cover material.
    pub resistance_k_per_mm: f64,
}

impl MaterialProfile {
    pub fn new(
        name: impl Into<String>,
        tau_s: f64,
        emissivity: f64,
        spot_sigma_px: f64,
        resistance_k_per_mm: f64,
    ) -> Result<Self> {
        let p = MaterialProfile {
            name: name.into(),
            tau_s,
            emissivity,
            spot_sigma_px,
            resistance_k_per_mm,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        const WHAT: &str = "material profile";
        if self.name.is_empty() || self.name.chars().any(char::is_whitespace) {
            return Err(Error::invalid(WHAT, format!("bad name {:?}", self.name)));
        }
        if !(self.tau_s > 0.0 && self.tau_s.is_finite()) {
            return Err(Error::invalid(WHAT, format!("tau_s = {} must be > 0", self.tau_s)));
        }
        if !(self.emissivity > 0.0 && self.emissivity <= 1.0) {
            return Err(Error::invalid(
                WHAT,
                format!("emissivity = {} outside (0, 1]", self.emissivity),
            ));
        }
        if !(self.spot_sigma_px > 0.0 && self.spot_sigma_px.is_finite()) {
            return Err(Error::invalid(
                WHAT,
                format!("spot_sigma_px = {} must be > 0", self.spot_sigma_px),
            ));
        }
        if !(self.resistance_k_per_mm >= 0.0 && self.resistance_k_per_mm.is_finite()) {
            return Err(Error::invalid(
                WHAT,
                format!("resistance_k_per_mm = {} must be >= 0", self.resistance_k_per_mm),
            ));
        }
        Ok(())
    }
}

/// One heat spot in a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub profile: MaterialProfile,
    /// Spot center `(x, y)` in pixel coordinates; pixel `(i, j)` has its
    /// center at `(i, j)`.
    pub center: (f64, f64),
    /// Hold-induced excess over ambient, in °C, before cover attenuation.
    pub initial_excess_c: f64,
    pub cover_thickness_mm: f64,
}

impl SceneObject {
    pub fn new(profile: MaterialProfile, center: (f64, f64), initial_excess_c: f64) -> Self {
        SceneObject {
            profile,
            center,
            initial_excess_c,
            cover_thickness_mm: 0.0,
        }
    }

    pub fn with_cover(mut self, thickness_mm: f64) -> Self {
        self.cover_thickness_mm = thickness_mm;
        self
    }

    /// Excess at the spot center at `t = 0`, after cover attenuation.
    pub fn effective_excess_c(&self) -> f64 {
        self.initial_excess_c * (-self.profile.resistance_k_per_mm * self.cover_thickness_mm).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub fps_millihz: u32,
    pub duration_s: f64,
    pub ambient_c: f64,
    pub objects: Vec<SceneObject>,
    pub noise_sigma_c: f64,
    pub rng_seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        const WHAT: &str = "scene";
        if self.width == 0 || self.height == 0 || self.width > 65535 || self.height > 65535 {
            return Err(Error::invalid(
                WHAT,
                format!("dimensions {}x{}", self.width, self.height),
            ));
        }
        if self.fps_millihz == 0 {
            return Err(Error::invalid(WHAT, "fps_millihz must be > 0"));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid(WHAT, "duration_s must be > 0"));
        }
        if !(self.noise_sigma_c >= 0.0 && self.noise_sigma_c.is_finite()) {
            return Err(Error::invalid(WHAT, "noise_sigma_c must be >= 0"));
        }
        if !self.ambient_c.is_finite() {
            return Err(Error::invalid(WHAT, "ambient_c must be finite"));
        }
        if self.objects.is_empty() {
            return Err(Error::invalid(WHAT, "scene must contain ≥ 1 object"));
        }
        for (i, o) in self.objects.iter().enumerate() {
            o.profile.validate()?;
            let (cx, cy) = o.center;
            if !(cx >= 0.0 && cy >= 0.0 && cx <= (self.width - 1) as f64 && cy <= (self.height - 1) as f64)
            {
                return Err(Error::invalid(
                    WHAT,
                    format!("object {i} center ({cx}, {cy}) outside the frame"),
                ));
            }
            if !(o.initial_excess_c > 0.0 && o.initial_excess_c.is_finite()) {
                return Err(Error::invalid(
                    WHAT,
                    format!("object {i} initial_excess_c must be > 0"),
                ));
            }
            if !(o.cover_thickness_mm >= 0.0 && o.cover_thickness_mm.is_finite()) {
                return Err(Error::invalid(
                    WHAT,
                    format!("object {i} cover_thickness_mm must be >= 0"),
                ));
            }
        }
        Ok(())
    }

    pub fn fps(&self) -> f64 {
        self.fps_millihz as f64 / 1000.0
    }

    /// Number of frames rendered: `round(duration · fps)`, at least one.
    pub fn frame_count(&self) -> usize {
        ((self.duration_s * self.fps()).round() as usize).max(1)
    }

    pub fn ambient_centikelvin(&self) -> u16 {
        celsius_to_centikelvin(self.ambient_c)
    }
}

/// Renders every frame of `spec`. Identical specs (seed included) give
/// bit-identical output.
pub fn render_scene(spec: &SceneSpec) -> Result<FrameSequence> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let ambient_ck = spec.ambient_centikelvin();

    // Spatial factors are time independent; compute them once per object.
    let spots: Vec<Vec<f64>> = spec
        .objects
        .iter()
        .map(|o| {
            let two_sigma_sq = 2.0 * o.profile.spot_sigma_px * o.profile.spot_sigma_px;
            let (cx, cy) = o.center;
            let mut g = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    g.push((-d2 / two_sigma_sq).exp());
                }
            }
            g
        })
        .collect();
    let excess_ck: Vec<f64> = spec
        .objects
        .iter()
        .map(|o| 100.0 * o.effective_excess_c())
        .collect();

    let noise = if spec.noise_sigma_c > 0.0 {
        Some(
            Normal::new(0.0, 100.0 * spec.noise_sigma_c)
                .map_err(|e| Error::Domain(format!("noise model: {e}")))?,
        )
    } else {
        None
    };

    let fps = spec.fps();
    let mut frames = Vec::with_capacity(spec.frame_count());
    let mut field = vec![0.0f64; w * h];
    for index in 0..spec.frame_count() {
        let t = index as f64 / fps;
        field.fill(ambient_ck as f64);
        for ((o, g), amp) in spec.objects.iter().zip(&spots).zip(&excess_ck) {
            let peak = amp * (-t / o.profile.tau_s).exp();
            for (f, gv) in field.iter_mut().zip(g) {
                *f += peak * gv;
            }
        }
        if let Some(normal) = &noise {
            let mut rng = frame_rng(spec.rng_seed, index);
            for f in field.iter_mut() {
                *f += normal.sample(&mut rng);
            }
        }
        let pixels = field
            .iter()
            .map(|v| v.round().clamp(0.0, u16::MAX as f64) as u16)
            .collect();
        frames.push(RawFrame::new(w, h, pixels, index)?);
    }
    FrameSequence::new(frames, spec.fps_millihz, ambient_ck, None)
}

/// Independent noise stream for one frame, derived from the scene seed and
/// the frame index.
fn frame_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be > 0, got {v}")))
    }
}

/// Time for a noise-free spot's peak excess to fall to `threshold_excess_c`:
/// `τ · ln(initial / threshold)`, or 0 when it starts at or below threshold.
pub fn analytic_dissipation_time(
    profile: &MaterialProfile,
    initial_excess_c: f64,
    threshold_excess_c: f64,
) -> Result<f64> {
    check_positive("initial_excess_c", initial_excess_c)?;
    check_positive("threshold_excess_c", threshold_excess_c)?;
    if initial_excess_c <= threshold_excess_c {
        return Ok(0.0);
    }
    Ok(profile.tau_s * (initial_excess_c / threshold_excess_c).ln())
}

/// Excess seen through `thickness_mm` of cover: `initial · exp(-k · thickness)`.
pub fn attenuated_excess(
    initial_excess_c: f64,
    profile: &MaterialProfile,
    thickness_mm: f64,
) -> Result<f64> {
    if !(thickness_mm >= 0.0 && thickness_mm.is_finite()) {
        return Err(Error::Domain(format!(
            "thickness_mm must be >= 0, got {thickness_mm}"
        )));
    }
    Ok(initial_excess_c * (-profile.resistance_k_per_mm * thickness_mm).exp())
}

/// Area (pixels², continuous) where a Gaussian spot with the given peak
/// excess exceeds `threshold_c`: `π · 2σ² · ln(peak / θ)`, or 0.
pub fn analytic_hot_area(spot_sigma_px: f64, peak_excess_c: f64, threshold_c: f64) -> f64 {
    if peak_excess_c <= threshold_c || threshold_c <= 0.0 {
        return 0.0;
    }
    std::f64::consts::PI * 2.0 * spot_sigma_px * spot_sigma_px * (peak_excess_c / threshold_c).ln()
}

/// Block-average downsampling to a coarser sensor grid, as seen from further
/// away. Output pixel `(i, j)` averages input columns
/// `[⌊i·W/w⌋, ⌊(i+1)·W/w⌋)` and the matching rows, rounded to the nearest
/// centikelvin.
pub fn resample_camera(
    seq: &FrameSequence,
    out_width: usize,
    out_height: usize,
) -> Result<FrameSequence> {
    let (w, h) = seq
        .dims()
        .ok_or_else(|| Error::Domain("cannot resample an empty sequence".into()))?;
    if out_width == 0 || out_height == 0 {
        return Err(Error::Domain("output dimensions must be >= 1".into()));
    }
    if out_width > w || out_height > h {
        return Err(Error::Domain(format!(
            "upsampling {w}x{h} to {out_width}x{out_height} is not supported"
        )));
    }
    let col_edges: Vec<usize> = (0..=out_width).map(|i| i * w / out_width).collect();
    let row_edges: Vec<usize> = (0..=out_height).map(|j| j * h / out_height).collect();

    let frames = seq
        .frames()
        .iter()
        .map(|f| {
            let mut out = Vec::with_capacity(out_width * out_height);
            for j in 0..out_height {
                for i in 0..out_width {
                    let mut sum = 0u64;
                    let mut count = 0u64;
                    for y in row_edges[j]..row_edges[j + 1] {
                        for x in col_edges[i]..col_edges[i + 1] {
                            sum += f.get(x, y) as u64;
                            count += 1;
                        }
                    }
                    out.push(((sum + count / 2) / count) as u16);
                }
            }
            RawFrame::new(out_width, out_height, out, f.index())
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(
        frames,
        seq.fps_millihz(),
        seq.ambient_centikelvin(),
        seq.label().map(str::to_owned),
    )
}
