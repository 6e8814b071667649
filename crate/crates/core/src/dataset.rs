//! Labelled synthetic data: single-object training samples and multi-object
//! scenes in dispersed or agglomerated layouts.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learn::{Gender, HoldType, LabeledSample};
use crate::pipeline::{vector_from_sequence, PipelineConfig};
use crate::segment::Roi;
use crate::simulate::{household_materials, render_scene, MaterialProfile, SceneObject, SceneSpec};

/// Hold-induced excess range (°C) for each hold type: a quick touch warms
/// the object least, a fixed grip most.
pub fn hold_excess_range(hold: HoldType) -> (f64, f64) {
    match hold {
        HoldType::Quick => (8.0, 10.0),
        HoldType::Natural => (10.0, 12.0),
        HoldType::Fixed => (12.0, 14.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub width: usize,
    pub height: usize,
    pub fps_millihz: u32,
    pub duration_s: f64,
    pub ambient_c: f64,
    pub noise_sigma_c: f64,
    /// Per-sample τ is drawn uniformly from `τ · [1 − j, 1 + j]`.
    pub tau_jitter: f64,
    pub denoise_window: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            width: 32,
            height: 24,
            fps_millihz: 8000,
            duration_s: 60.0,
            ambient_c: 22.0,
            noise_sigma_c: 0.3,
            tau_jitter: 0.05,
            denoise_window: 3,
        }
    }
}

impl SampleConfig {
    pub fn frame_count(&self) -> usize {
        ((self.duration_s * self.fps_millihz as f64 / 1000.0).round() as usize).max(1)
    }

    /// Pipeline settings matching these samples: one vector element per
    /// rendered frame.
    pub fn pipeline(&self, seq: &crate::frame::FrameSequence) -> PipelineConfig {
        let mut cfg = PipelineConfig::for_sequence(seq);
        cfg.preprocess.denoise_window = self.denoise_window;
        cfg.fingerprint.vector_len = self.frame_count().max(2);
        cfg
    }
}

/// `per_class` samples for each material. Sample `i` of a class uses hold
/// type `i mod 3` and gender `(i / 3) mod 2`; everything random comes from
/// `seed`, one generator stream per sample.
pub fn generate_samples(
    materials: &[MaterialProfile],
    per_class: usize,
    cfg: &SampleConfig,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    if !(0.0..1.0).contains(&cfg.tau_jitter) {
        return Err(Error::Config("tau_jitter must be in [0, 1)".into()));
    }
    let mut out = Vec::with_capacity(materials.len() * per_class);
    for (m, material) in materials.iter().enumerate() {
        for i in 0..per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((m * per_class + i) as u64);
            let hold = HoldType::ALL[i % 3];
            let gender = Gender::ALL[(i / 3) % 2];
            let (lo, hi) = hold_excess_range(hold);
            let excess = rng.random_range(lo..hi);
            let mut profile = material.clone();
            if cfg.tau_jitter > 0.0 {
                profile.tau_s *= rng.random_range(1.0 - cfg.tau_jitter..1.0 + cfg.tau_jitter);
            }
            let center = ((cfg.width / 2) as f64, (cfg.height / 2) as f64);
            let spec = SceneSpec {
                width: cfg.width,
                height: cfg.height,
                fps_millihz: cfg.fps_millihz,
                duration_s: cfg.duration_s,
                ambient_c: cfg.ambient_c,
                objects: vec![SceneObject::new(profile, center, excess)],
                noise_sigma_c: cfg.noise_sigma_c,
                rng_seed: rng.random(),
            };
            let seq = render_scene(&spec)?;
            let vector = vector_from_sequence(&seq, &cfg.pipeline(&seq))?;
            out.push(
                LabeledSample::new(vector, material.name.clone())?
                    .with_context(hold)
                    .with_gender(gender),
            );
        }
    }
    Ok(out)
}

/// Object groupings used for multi-object runs: A holds one object, each
/// later group adds one more.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArrangementGroup {
    A,
    B,
    C,
    D,
}

impl ArrangementGroup {
    pub const ALL: [ArrangementGroup; 4] = [
        ArrangementGroup::A,
        ArrangementGroup::B,
        ArrangementGroup::C,
        ArrangementGroup::D,
    ];

    pub fn material_names(self) -> &'static [&'static str] {
        const ORDER: [&str; 4] = ["coffee_cup", "plastic_bottle", "cigarette_butt", "face_mask"];
        &ORDER[..self as usize + 1]
    }

    /// Profiles from the household catalog.
    pub fn materials(self) -> Vec<MaterialProfile> {
        let all = household_materials();
        self.material_names()
            .iter()
            .map(|n| all.iter().find(|m| m.name == *n).expect("catalog entry").clone())
            .collect()
    }
}

impl fmt::Display for ArrangementGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ArrangementGroup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(ArrangementGroup::A),
            "B" | "b" => Ok(ArrangementGroup::B),
            "C" | "c" => Ok(ArrangementGroup::C),
            "D" | "d" => Ok(ArrangementGroup::D),
            _ => Err(Error::Config(format!("unknown arrangement group {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSceneConfig {
    pub width: usize,
    pub height: usize,
    pub fps_millihz: u32,
    pub duration_s: f64,
    pub ambient_c: f64,
    pub noise_sigma_c: f64,
    pub excess_range_c: (f64, f64),
}

impl Default for MultiSceneConfig {
    fn default() -> Self {
        MultiSceneConfig {
            width: 80,
            height: 60,
            fps_millihz: 4000,
            duration_s: 150.0,
            ambient_c: 22.0,
            noise_sigma_c: 0.0,
            excess_range_c: (8.0, 14.0),
        }
    }
}

fn scene_with(
    materials: &[MaterialProfile],
    centers: Vec<(f64, f64)>,
    cfg: &MultiSceneConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SceneSpec> {
    let (lo, hi) = cfg.excess_range_c;
    if !(lo > 0.0 && lo <= hi) {
        return Err(Error::Config("excess range must satisfy 0 < lo <= hi".into()));
    }
    let objects = materials
        .iter()
        .zip(centers)
        .map(|(m, c)| {
            let e = if hi > lo { rng.random_range(lo..hi) } else { lo };
            SceneObject::new(m.clone(), c, e)
        })
        .collect();
    let spec = SceneSpec {
        width: cfg.width,
        height: cfg.height,
        fps_millihz: cfg.fps_millihz,
        duration_s: cfg.duration_s,
        ambient_c: cfg.ambient_c,
        objects,
        noise_sigma_c: cfg.noise_sigma_c,
        rng_seed: rng.random(),
    };
    spec.validate()?;
    Ok(spec)
}

/// Up to four objects, one per quadrant, on integer pixel centers jittered
/// by up to three pixels around the quadrant middle.
pub fn dispersed_scene(
    materials: &[MaterialProfile],
    cfg: &MultiSceneConfig,
    seed: u64,
) -> Result<SceneSpec> {
    if materials.is_empty() || materials.len() > 4 {
        return Err(Error::Config("dispersed scenes hold 1 to 4 objects".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (qw, qh) = (cfg.width / 2, cfg.height / 2);
    let mut quadrants = [(0, 0), (1, 0), (0, 1), (1, 1)];
    quadrants.sort_by_key(|_| rng.random::<u32>());
    let centers = quadrants[..materials.len()]
        .iter()
        .map(|&(qx, qy)| {
            let jx = rng.random_range(-3i64..=3);
            let jy = rng.random_range(-3i64..=3);
            let x = (qx * qw + qw / 2) as i64 + jx;
            let y = (qy * qh + qh / 2) as i64 + jy;
            (
                x.clamp(0, cfg.width as i64 - 1) as f64,
                y.clamp(0, cfg.height as i64 - 1) as f64,
            )
        })
        .collect();
    scene_with(materials, centers, cfg, &mut rng)
}

/// Objects packed on a 2×2 grid with centers `gap_px` apart, so their heat
/// spots merge into one connected region.
pub fn agglomerated_scene(
    materials: &[MaterialProfile],
    cfg: &MultiSceneConfig,
    gap_px: usize,
    seed: u64,
) -> Result<SceneSpec> {
    if materials.is_empty() || materials.len() > 4 {
        return Err(Error::Config("agglomerated scenes hold 1 to 4 objects".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = (cfg.width / 2).saturating_sub(gap_px / 2) as f64;
    let y0 = (cfg.height / 2).saturating_sub(gap_px / 2) as f64;
    let g = gap_px as f64;
    let centers = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)][..materials.len()]
        .iter()
        .map(|(i, j)| (x0 + i * g, y0 + j * g))
        .collect();
    scene_with(materials, centers, cfg, &mut rng)
}

/// For each ROI, the index of the scene object whose center is nearest its
/// centroid.
pub fn nearest_objects(rois: &[Roi], spec: &SceneSpec) -> Vec<usize> {
    rois.iter()
        .map(|r| {
            let d = |o: &SceneObject| {
                (o.center.0 - r.centroid.0).powi(2) + (o.center.1 - r.centroid.1).powi(2)
            };
            (0..spec.objects.len())
                .min_by(|&a, &b| d(&spec.objects[a]).total_cmp(&d(&spec.objects[b])))
                .expect("scene has objects")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_cycle_context_and_gender() {
        let cfg = SampleConfig {
            duration_s: 10.0,
            ..Default::default()
        };
        let mats = &household_materials()[..2];
        let s = generate_samples(mats, 6, &cfg, 1).unwrap();
        assert_eq!(s.len(), 12);
        assert_eq!(s[0].label, "cigarette_butt");
        assert_eq!(s[6].label, "face_mask");
        assert_eq!(s[4].context, Some(HoldType::Natural));
        assert_eq!(s[4].gender_meta, Some(Gender::Male));
        assert_eq!(s[0].vector.len(), 80);
        assert_eq!(s, generate_samples(mats, 6, &cfg, 1).unwrap());
    }

    #[test]
    fn groups_grow_by_one() {
        for (i, g) in ArrangementGroup::ALL.iter().enumerate() {
            assert_eq!(g.materials().len(), i + 1);
            assert_eq!(g.to_string().parse::<ArrangementGroup>().unwrap(), *g);
        }
    }

    #[test]
    fn dispersed_objects_are_far_apart() {
        let mats = ArrangementGroup::D.materials();
        for seed in 0..20 {
            let s = dispersed_scene(&mats, &MultiSceneConfig::default(), seed).unwrap();
            for (i, a) in s.objects.iter().enumerate() {
                assert_eq!(a.center.0.fract(), 0.0);
                for b in &s.objects[i + 1..] {
                    let d = ((a.center.0 - b.center.0).powi(2) + (a.center.1 - b.center.1).powi(2)).sqrt();
                    assert!(d >= 20.0, "seed {seed}: {d}");
                }
            }
        }
    }
}
