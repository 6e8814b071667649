//! Plain-text scene documents.
//!
//! A scene is a TOML document: one `key = value` per line for the scene
//! settings, then one `[[object]]` block per heat spot.
//!
//! ```toml
//! width = 32
//! height = 32
//! fps_millihz = 8000
//! duration_s = 60
//! ambient_c = 22.0
//! noise_sigma_c = 0.0      # optional, default 0
//! rng_seed = 7             # optional, default 0
//!
//! [[object]]
//! name = "plastic_bottle"
//! tau_s = 40
//! emissivity = 0.94
//! spot_sigma_px = 2.5
//! resistance_k_per_mm = 0.5
//! center_x = 16
//! center_y = 16
//! initial_excess_c = 12
//! cover_thickness_mm = 0   # optional, default 0
//! ```
//!
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use super::{MaterialProfile, SceneObject, SceneSpec};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    width: usize,
    height: usize,
    fps_millihz: u32,
    duration_s: f64,
    ambient_c: f64,
    #[serde(default)]
    noise_sigma_c: f64,
    #[serde(default)]
    rng_seed: u64,
    #[serde(default, rename = "object")]
    objects: Vec<ObjectDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    name: String,
    tau_s: f64,
    emissivity: f64,
    spot_sigma_px: f64,
    resistance_k_per_mm: f64,
    center_x: f64,
    center_y: f64,
    initial_excess_c: f64,
    #[serde(default)]
    cover_thickness_mm: f64,
}

pub fn parse_scene(text: &str) -> Result<SceneSpec> {
    let doc: SceneDoc = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
            .unwrap_or(0);
        Error::parse(line, e.message().to_string())
    })?;
    let objects = doc
        .objects
        .into_iter()
        .map(|o| {
            let profile = MaterialProfile::new(
                o.name,
                o.tau_s,
                o.emissivity,
                o.spot_sigma_px,
                o.resistance_k_per_mm,
            )?;
            Ok(SceneObject {
                profile,
                center: (o.center_x, o.center_y),
                initial_excess_c: o.initial_excess_c,
                cover_thickness_mm: o.cover_thickness_mm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = SceneSpec {
        width: doc.width,
        height: doc.height,
        fps_millihz: doc.fps_millihz,
        duration_s: doc.duration_s,
        ambient_c: doc.ambient_c,
        objects,
        noise_sigma_c: doc.noise_sigma_c,
        rng_seed: doc.rng_seed,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn scene_to_toml(spec: &SceneSpec) -> String {
    let doc = SceneDoc {
        width: spec.width,
        height: spec.height,
        fps_millihz: spec.fps_millihz,
        duration_s: spec.duration_s,
        ambient_c: spec.ambient_c,
        noise_sigma_c: spec.noise_sigma_c,
        rng_seed: spec.rng_seed,
        objects: spec
            .objects
            .iter()
            .map(|o| ObjectDoc {
                name: o.profile.name.clone(),
                tau_s: o.profile.tau_s,
                emissivity: o.profile.emissivity,
                spot_sigma_px: o.profile.spot_sigma_px,
                resistance_k_per_mm: o.profile.resistance_k_per_mm,
                center_x: o.center.0,
                center_y: o.center.1,
                initial_excess_c: o.initial_excess_c,
                cover_thickness_mm: o.cover_thickness_mm,
            })
            .collect(),
    };
    toml::to_string(&doc).expect("scene documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"
width = 20
height = 10
fps_millihz = 8000
duration_s = 5
ambient_c = 22.5

[[object]]
name = "pp"
tau_s = 40
emissivity = 0.94
spot_sigma_px = 2.5
resistance_k_per_mm = 0.5
center_x = 5
center_y = 4
initial_excess_c = 12

[[object]]
name = "pvc"
tau_s = 100
emissivity = 0.97
spot_sigma_px = 2
resistance_k_per_mm = 0.5
center_x = 15
center_y = 4
initial_excess_c = 9.5
cover_thickness_mm = 0.44
"#;

    #[test]
    fn parses_and_round_trips() {
        let spec = parse_scene(DOC).unwrap();
        assert_eq!(spec.objects.len(), 2);
        assert_eq!(spec.objects[1].cover_thickness_mm, 0.44);
        assert_eq!(spec.rng_seed, 0);
        assert_eq!(parse_scene(&scene_to_toml(&spec)).unwrap(), spec);
    }

    #[test]
    fn rejects_unknown_keys_and_invalid_values() {
        let bad = DOC.replace("ambient_c = 22.5", "ambient_c = 22.5\ncolour = 3");
        assert!(matches!(parse_scene(&bad), Err(Error::Parse { .. })));
        let bad = DOC.replace("tau_s = 40", "tau_s = -1");
        assert!(parse_scene(&bad).is_err());
        let no_objects = DOC.split("[[object]]").next().unwrap();
        assert!(parse_scene(no_objects).is_err());
    }
}
