use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::VariationalError;
use crate::discretization::{AssembledForms, Domain, GridFunction, Mesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub gamma: f64,
    pub seed: Option<u64>,
    /// `grad − γ·hardy` per sample, each sample scaled to unit Hardy term.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub negative_count: usize,
}

/// Random trial functions supported in `δ < η`: a few sine modes in `δ/η`
/// with random amplitudes, drawn independently near each boundary piece.
pub fn random_zero_trace_samples(
    mesh: &Mesh,
    eta: f64,
    count: usize,
    seed: u64,
) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split = match *mesh.domain() {
        Domain::Interval { length } => 0.5 * length,
        Domain::Ball { .. } => f64::INFINITY,
    };
    (0..count)
        .map(|_| {
            let modes = rng.gen_range(1..=6);
            let left: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let right: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
            GridFunction::interpolate(mesh, |d, x| {
                if d >= eta {
                    return 0.0;
                }
                let c = if x < split { &left } else { &right };
                c.iter()
                    .enumerate()
                    .map(|(j, a)| a * ((j + 1) as f64 * std::f64::consts::PI * d / eta).sin())
                    .sum()
            })
        })
        .collect()
}

/// Margins of the Hardy inequality with constant `γ` over the samples,
/// using forms assembled at `λ = 0`. Samples with a zero Hardy term are
/// skipped.
pub fn hardy_audit(
    samples: &[GridFunction],
    forms: &AssembledForms,
    gamma: f64,
    seed: Option<u64>,
) -> Result<AuditReport, VariationalError> {
    let mut margins = Vec::with_capacity(samples.len());
    for u in samples {
        let t = forms.norms(u)?;
        if t.hardy > 0.0 {
            margins.push(t.grad / t.hardy - gamma);
        }
    }
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AuditReport {
        gamma,
        seed,
        negative_count: margins.iter().filter(|m| **m < 0.0).count(),
        margins,
        min_margin,
    })
}
