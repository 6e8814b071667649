//! Fits the single-time-constant cooling model to measured dissipation times.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CoolingFit {
    pub tau_s: f64,
    /// Detection threshold, °C above ambient.
    pub threshold_c: f64,
    /// Model times `τ · ln(excess / θ)` at each input excess.
    pub predicted_s: Vec<f64>,
    /// `predicted - measured` per point.
    pub residuals_s: Vec<f64>,
    pub sse: f64,
}

impl CoolingFit {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals_s.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

fn sse(tau: f64, theta: f64, excesses: &[f64], times: &[f64]) -> f64 {
    excesses
        .iter()
        .zip(times)
        .map(|(e, t)| (tau * (e / theta).ln() - t).powi(2))
        .sum()
}

const GRID: usize = 160;
const REFINE_ROUNDS: usize = 60;

/// Least-squares fit of `(τ, θ)` to `(excess, time)` pairs.
///
/// A coarse log-spaced grid over `τ ∈ [0.1, 1e5]` s and
/// `θ ∈ (0, min excess)` locates the basin; the grid is then repeatedly
/// re-centred on the best cell and shrunk.
pub fn fit_cooling(excesses_c: &[f64], times_s: &[f64]) -> Result<CoolingFit> {
    if excesses_c.len() != times_s.len() {
        return Err(Error::Domain(format!(
            "{} excesses but {} times",
            excesses_c.len(),
            times_s.len()
        )));
    }
    if excesses_c.len() < 2 {
        return Err(Error::Domain("need at least two points to fit".into()));
    }
    if excesses_c.iter().chain(times_s).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Domain("excesses and times must be positive".into()));
    }
    let min_excess = excesses_c.iter().cloned().fold(f64::INFINITY, f64::min);
    if excesses_c.iter().all(|&e| e == min_excess) {
        return Err(Error::Domain("excesses must not all be equal".into()));
    }

    // Search in log space: u = ln τ, v = ln(θ / min_excess) < 0.
    let mut u_range = (0.1f64.ln(), 1e5f64.ln());
    let mut v_range = (1e-6f64.ln(), -1e-9);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for _ in 0..REFINE_ROUNDS {
        let du = (u_range.1 - u_range.0) / (GRID - 1) as f64;
        let dv = (v_range.1 - v_range.0) / (GRID - 1) as f64;
        for i in 0..GRID {
            let u = u_range.0 + du * i as f64;
            for j in 0..GRID {
                let v = v_range.0 + dv * j as f64;
                let cost = sse(u.exp(), min_excess * v.exp(), excesses_c, times_s);
                if cost < best.0 {
                    best = (cost, u, v);
                }
            }
        }
        let (_, u, v) = best;
        u_range = (u - 2.0 * du, u + 2.0 * du);
        v_range = (v - 2.0 * dv, (v + 2.0 * dv).min(-1e-12));
    }

    let (cost, u, v) = best;
    let tau_s = u.exp();
    let threshold_c = min_excess * v.exp();
    let predicted_s: Vec<f64> = excesses_c
        .iter()
        .map(|e| tau_s * (e / threshold_c).ln())
        .collect();
    let residuals_s = predicted_s.iter().zip(times_s).map(|(p, t)| p - t).collect();
    Ok(CoolingFit {
        tau_s,
        threshold_c,
        predicted_s,
        residuals_s,
        sse: cost,
    })
}
