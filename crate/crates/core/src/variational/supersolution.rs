use serde::{Deserialize, Serialize};

use super::VariationalError;
use crate::discretization::Domain;
use crate::hardy::{check_fg2_vanishes, HardyProfile};
use crate::weights::{check_monotone, Monotonicity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionReport {
    pub s: f64,
    pub m: f64,
    /// The bracket stays at or above `s(s+1)/2` on `(0, t_ok]`.
    pub t_ok: f64,
    pub sign_ok: bool,
    /// `(t, bracket)` on the profile grid.
    pub trace: Vec<(f64, f64)>,
    /// Largest relative distance from `s(s+1)` over the lowest grid decade.
    pub limit_rel_error: f64,
    pub limit_ok: bool,
    /// `(lower decade edge, ∫ dt/(F·G) over that decade)`, top decade first.
    pub divergence_increments: Vec<(f64, f64)>,
    pub divergence_fires: bool,
    /// `v_s(η) = f(η)^{1/2} μ^{−s}`.
    pub v_s_at_eta: f64,
}

/// Evaluates `s(s+1) + Δδ·F·(s_w G²/2 + sG) − M F² G²` on the profile grid
/// and reports where it certifies the supersolution sign (p = 2).
pub fn supersolution_check(
    profile: &HardyProfile,
    s: f64,
    m: f64,
    domain: &Domain,
) -> Result<SupersolutionReport, VariationalError> {
    if !(s > 0.5) || !(m > 0.0) {
        return Err(VariationalError::InvalidParameter(format!(
            "need s > 1/2 and M > 0, got s = {s}, M = {m}"
        )));
    }
    if !check_fg2_vanishes(profile).verdict {
        return Err(VariationalError::HypothesisNotMet(
            "F·G² does not vanish at the boundary".into(),
        ));
    }
    let mono = check_monotone(profile.weight(), profile.eta());
    if mono.sign == Monotonicity::Mixed {
        return Err(VariationalError::HypothesisNotMet(format!(
            "w is not monotone near the boundary (sign changes near {:?})",
            mono.witnesses
        )));
    }
    let sw = profile.switching();
    let grid = profile.grid();
    let ln_f_cap = profile.ln_f_cap_values();
    let g = profile.g_values();
    let target = s * (s + 1.0);
    let bracket: Vec<f64> = (0..grid.len())
        .map(|i| {
            let f = ln_f_cap[i].exp();
            let lap = domain.laplacian_of_delta(grid[i]);
            target + lap * f * (0.5 * sw * g[i] * g[i] + s * g[i]) - m * f * f * g[i] * g[i]
        })
        .collect();
    let mut t_ok = 0.0;
    for (i, &b) in bracket.iter().enumerate() {
        if b >= 0.5 * target {
            t_ok = grid[i];
        } else {
            break;
        }
    }
    let tail = 10.0 * grid[0];
    let limit_rel_error = grid
        .iter()
        .zip(&bracket)
        .take_while(|(t, _)| **t <= tail)
        .map(|(_, b)| (b - target).abs() / target)
        .fold(0.0, f64::max);

    // Trapezoid in ln t of t/(F·G), decade by decade from the top.
    let ln_t: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
    let integrand: Vec<f64> = (0..grid.len())
        .map(|i| (ln_t[i] - ln_f_cap[i]).exp() / g[i])
        .collect();
    let mut increments = Vec::new();
    let mut edge = profile.eta() / 10.0;
    let mut acc = 0.0;
    for i in (0..grid.len() - 1).rev() {
        acc += 0.5 * (integrand[i] + integrand[i + 1]) * (ln_t[i + 1] - ln_t[i]);
        if grid[i] <= edge * (1.0 + 1e-9) {
            increments.push((grid[i], acc));
            acc = 0.0;
            edge /= 10.0;
        }
    }
    let fires = match increments.len() {
        n if n >= 2 => {
            let (last, prev) = (increments[n - 1].1, increments[n - 2].1);
            last > 0.0 && last >= 0.5 * prev
        }
        _ => false,
    };
    let ln_f_eta = profile.ln_cumulative_at_ln_t(profile.eta().ln()).value;
    let stride = (grid.len() / 256).max(1);
    let mut trace: Vec<(f64, f64)> = (0..grid.len())
        .step_by(stride)
        .map(|i| (grid[i], bracket[i]))
        .collect();
    let last = grid.len() - 1;
    if trace.last().map(|x| x.0) != Some(grid[last]) {
        trace.push((grid[last], bracket[last]));
    }
    Ok(SupersolutionReport {
        s,
        m,
        t_ok,
        sign_ok: t_ok > 0.0,
        trace,
        limit_rel_error,
        limit_ok: limit_rel_error <= 0.05,
        divergence_increments: increments,
        divergence_fires: fires,
        v_s_at_eta: (0.5 * ln_f_eta).exp() * profile.mu().powf(-s),
    })
}
