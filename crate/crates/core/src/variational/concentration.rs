use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{minimize_quotient, MinimizeOptions, VariationalError};
use crate::discretization::{assemble, Mesh};
use crate::hardy::HardyProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConcentrationVerdict {
    /// Minimisers escape to the boundary: interior energy falls at least
    /// tenfold along the ladder while the boundary share does not drop.
    Concentrating,
    /// Interior energy and boundary share settle at the finest two levels.
    Compact,
    /// Neither pattern is clear on this ladder.
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationLevel {
    pub n_nodes: usize,
    pub boundary_resolution: f64,
    pub j: f64,
    pub converged: bool,
    pub boundary_mass_fraction: f64,
    pub interior_gradient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub p: f64,
    pub lambda: f64,
    pub eta_probe: f64,
    pub levels: Vec<ConcentrationLevel>,
    pub boundary_mass_fraction: Vec<f64>,
    pub interior_gradient: Vec<f64>,
    pub verdict: ConcentrationVerdict,
}

impl ConcentrationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "level,n_nodes,boundary_resolution,J,boundary_mass_fraction,interior_gradient\n",
        );
        for (k, l) in self.levels.iter().enumerate() {
            out.push_str(&format!(
                "{k},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                l.n_nodes,
                l.boundary_resolution,
                l.j,
                l.boundary_mass_fraction,
                l.interior_gradient
            ));
        }
        out
    }
}

/// Minimises on every ladder level and tracks where the Hardy term and the
/// gradient energy of the (Hardy-normalised) minimiser live.
pub fn concentration_diagnostic(
    p: f64,
    lambda: f64,
    ladder: &[Mesh],
    profile: &HardyProfile,
    eta_probe: f64,
    opts: &MinimizeOptions,
) -> Result<ConcentrationReport, VariationalError> {
    if ladder.len() < 2 {
        return Err(VariationalError::InvalidParameter(
            "need at least two ladder levels".into(),
        ));
    }
    if !(eta_probe > 0.0 && eta_probe < ladder[0].domain().inradius()) {
        return Err(VariationalError::InvalidParameter(format!(
            "eta_probe out of range: {eta_probe}"
        )));
    }
    let levels = ladder
        .par_iter()
        .map(|mesh| -> Result<ConcentrationLevel, VariationalError> {
            let forms = assemble(mesh, profile.weight(), profile, p, lambda)?;
            let (res, converged) = match minimize_quotient(&forms, opts) {
                Ok(r) => (r, true),
                Err(VariationalError::NoConvergence(r)) => (*r, false),
                Err(e) => return Err(e),
            };
            let (inner, outer) = forms.terms_split(&res.minimizer, eta_probe)?;
            let hardy = inner.hardy + outer.hardy;
            Ok(ConcentrationLevel {
                n_nodes: mesh.n_nodes(),
                boundary_resolution: mesh.boundary_resolution(),
                j: res.j_estimate,
                converged,
                boundary_mass_fraction: inner.hardy / hardy,
                interior_gradient: outer.grad / hardy,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let fraction: Vec<f64> = levels.iter().map(|l| l.boundary_mass_fraction).collect();
    let gradient: Vec<f64> = levels.iter().map(|l| l.interior_gradient).collect();
    Ok(ConcentrationReport {
        p,
        lambda,
        eta_probe,
        verdict: verdict(&fraction, &gradient),
        levels,
        boundary_mass_fraction: fraction,
        interior_gradient: gradient,
    })
}

fn verdict(fraction: &[f64], gradient: &[f64]) -> ConcentrationVerdict {
    let n = gradient.len();
    let falling = gradient.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6));
    let drop = gradient[0] / gradient[n - 1].max(f64::MIN_POSITIVE);
    let share_holds = fraction[n - 1] >= fraction[0] - 1e-9;
    if falling && drop >= 10.0 && share_holds {
        return ConcentrationVerdict::Concentrating;
    }
    let (g1, g0) = (gradient[n - 1], gradient[n - 2]);
    let (f1, f0) = (fraction[n - 1], fraction[n - 2]);
    if g1 > 0.0 && (g1 - g0).abs() <= 0.1 * g1 && (f1 - f0).abs() <= 0.1 && f1 < 1.0 - 1e-6 {
        return ConcentrationVerdict::Compact;
    }
    ConcentrationVerdict::Undetermined
}
