//! Demo material sets used by the examples, the benchmark and the tests.
//!
//! The numbers are illustrative, chosen so that dissipation times are well
//! separated; they are not measurements.

use super::MaterialProfile;

/// τ for a given emissivity under the demo affine map (higher ε, slower
/// fingerprint fade): `τ = 30 s + 1000 s · (ε − 0.90)`.
pub fn tau_from_emissivity(emissivity: f64) -> f64 {
    30.0 + 1000.0 * (emissivity - 0.90)
}

fn profile(name: &str, tau_s: f64, emissivity: f64, sigma: f64, k: f64) -> MaterialProfile {
    MaterialProfile::new(name, tau_s, emissivity, sigma, k).expect("catalog entries are valid")
}

/// Five resin types with emissivities spread over 0.90–0.97 and τ from
/// [`tau_from_emissivity`].
pub fn plastic_materials() -> Vec<MaterialProfile> {
    [("ldpe", 0.90), ("hdpe", 0.92), ("pp", 0.94), ("ps", 0.95), ("pvc", 0.97)]
        .iter()
        .map(|&(name, eps)| profile(name, tau_from_emissivity(eps), eps, 2.5, 0.5))
        .collect()
}

/// `n` synthetic materials with emissivity evenly spaced in `[0.90, 0.97]`.
pub fn emissivity_sweep(n: usize) -> Vec<MaterialProfile> {
    (0..n)
        .map(|i| {
            let eps = if n > 1 {
                0.90 + 0.07 * i as f64 / (n - 1) as f64
            } else {
                0.90
            };
            profile(&format!("sweep{i:02}"), tau_from_emissivity(eps), eps, 2.5, 0.5)
        })
        .collect()
}

/// Household objects with time constants roughly a factor 1.7 apart, enough
/// to keep classes apart across the demo hold-excess range.
pub fn household_materials() -> Vec<MaterialProfile> {
    vec![
        profile("cigarette_butt", 8.0, 0.95, 2.0, 0.6),
        profile("face_mask", 14.0, 0.91, 2.5, 0.3),
        profile("coffee_cup", 24.0, 0.93, 2.5, 0.4),
        profile("plastic_bottle", 40.0, 0.94, 2.5, 0.5),
        profile("glass_jar", 68.0, 0.92, 2.5, 0.2),
    ]
}
