use serde::{Deserialize, Serialize};

use super::{chi_described, VariationalError};
use crate::discretization::{AssembledForms, GridFunction, Mesh};
use crate::hardy::HardyProfile;
use crate::quadrature::{integrate_ln, ln_add, ln_sub};
use crate::weights::ClassKind;

const RTOL: f64 = 1e-13;
const MAX_SUB: usize = 4000;

fn check_eps_eta(
    eps: f64,
    eta: f64,
    p: f64,
    profile: &HardyProfile,
) -> Result<(), VariationalError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(VariationalError::InvalidParameter(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    if !(eta > 0.0 && eta <= profile.eta() / 2.0 * (1.0 + 1e-12)) {
        return Err(VariationalError::InvalidParameter(format!(
            "eta must lie in (0, eta0/2 = {}], got {eta}",
            profile.eta() / 2.0
        )));
    }
    if !(p > 1.0) {
        return Err(VariationalError::InvalidParameter(format!(
            "p must exceed 1, got {p}"
        )));
    }
    Ok(())
}

/// Exponent `1 + s·ε − 1/p` of the test family.
fn family_exponent(eps: f64, p: f64, profile: &HardyProfile) -> f64 {
    1.0 + profile.switching() * eps - 1.0 / p
}

/// Nodal interpolant of `u_ε`: `f^{1+sε−1/p}` on `(0, η]`, linear taper to
/// zero on `(η, 2η]`, zero beyond. `f` is the profile's cumulative integral.
pub fn test_family_u_eps(
    eps: f64,
    eta: f64,
    p: f64,
    profile: &HardyProfile,
    mesh: &Mesh,
) -> Result<GridFunction, VariationalError> {
    check_eps_eta(eps, eta, p, profile)?;
    let e = family_exponent(eps, p, profile);
    let ln_f_eta = profile.ln_cumulative_at_ln_t(eta.ln()).value;
    let u_eta = (e * ln_f_eta).exp();
    let needed = mesh
        .half_profile()
        .iter()
        .copied()
        .find(|&d| d > 0.0)
        .unwrap_or(f64::INFINITY);
    if needed < profile.min_t() && needed <= eta {
        return Err(VariationalError::ProfileTooCoarse {
            profile_min: profile.min_t(),
            needed,
        });
    }
    let mut bad = None;
    let u = GridFunction::interpolate(mesh, |d, _| {
        let v = if d <= eta {
            (e * profile.ln_cumulative_at_ln_t(d.ln()).value).exp()
        } else if d <= 2.0 * eta {
            u_eta * (2.0 * eta - d) / eta
        } else {
            0.0
        };
        if !v.is_finite() && bad.is_none() {
            bad = Some(d);
        }
        v
    });
    match bad {
        Some(d) => Err(VariationalError::NonFiniteTrial(d)),
        None => Ok(u),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormPieces {
    pub grad_main: f64,
    pub hardy_main: f64,
    pub ratio: f64,
}

/// Closed forms of the gradient and Hardy integrals of `u_ε` over `(0, η)`.
pub fn closed_form_pieces(
    eps: f64,
    eta: f64,
    p: f64,
    profile: &HardyProfile,
) -> Result<ClosedFormPieces, VariationalError> {
    check_eps_eta(eps, eta, p, profile)?;
    let s = profile.switching();
    let ln_f_eta = profile.ln_cumulative_at_ln_t(eta.ln()).value;
    let ln_hardy = s * eps * p * ln_f_eta - (p * eps).ln();
    let ratio = family_exponent(eps, p, profile).powf(p);
    let hardy_main = ln_hardy.exp();
    Ok(ClosedFormPieces {
        grad_main: ratio * hardy_main,
        hardy_main,
        ratio,
    })
}

/// `ln ∫_{-∞}^{top} e^{g(u)} du` for an integrand decaying as `u → −∞`,
/// summed over doubling chunks; also returns the part below `split`.
fn half_line_ln(
    ln_g: impl Fn(f64) -> f64,
    top: f64,
    split: f64,
) -> Result<(f64, f64), VariationalError> {
    let mut total = f64::NEG_INFINITY;
    let mut below = f64::NEG_INFINITY;
    let mut b = top;
    if split.is_finite() && split < top {
        total = integrate_ln(&ln_g, split, top, RTOL, MAX_SUB)?.ln_value;
        b = split;
    }
    let mut width = 1.0;
    let mut quiet = 0;
    for _ in 0..200 {
        let a = b - width;
        let piece = integrate_ln(&ln_g, a, b, RTOL, MAX_SUB)?.ln_value;
        total = ln_add(total, piece);
        if b <= split {
            below = ln_add(below, piece);
        }
        if piece < total + (1e-17f64).ln() && ln_g(a) < ln_g(b) {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
        b = a;
        width = (width * 2.0).min(4096.0);
    }
    Ok((total, below))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UepsQuadrature {
    pub grad_main: f64,
    pub hardy_main: f64,
    pub mass_main: f64,
    pub taper_grad: f64,
    pub taper_hardy: f64,
    pub taper_mass: f64,
    /// Full quotient of `u_ε` on the one-dimensional model (unit Jacobian).
    pub quotient: f64,
    /// Share of the Hardy integral drawn from below the profile grid.
    pub extrapolated_fraction: f64,
}

/// Direct quadrature of every piece of the `u_ε` quotient in `t`.
pub fn ueps_quadrature(
    eps: f64,
    eta: f64,
    p: f64,
    lambda: f64,
    profile: &HardyProfile,
) -> Result<UepsQuadrature, VariationalError> {
    check_eps_eta(eps, eta, p, profile)?;
    let w = profile.weight();
    let e = family_exponent(eps, p, profile);
    let lnf = |u: f64| profile.ln_cumulative_at_ln_t(u).value;
    let top = eta.ln();
    let split = profile.min_t().ln();
    // |u'|^p W_p with u' = e f^{e−1} f' and |f'| = 1/w.
    let (ln_grad, _) = half_line_ln(
        |u| p * e.abs().ln() + p * (e - 1.0) * lnf(u) - w.ln_w_at_ln_t(u) + u,
        top,
        split,
    )?;
    let (ln_hardy, ln_hardy_below) = half_line_ln(
        |u| {
            e * p * lnf(u) + (p - 1.0) * w.ln_w_at_ln_t(u) - p * profile.ln_hardy_at_ln_t(u).value
                + u
        },
        top,
        split,
    )?;
    let (ln_mass, _) = half_line_ln(
        |u| e * p * lnf(u) + (p - 1.0) * w.ln_w_at_ln_t(u) + u,
        top,
        split,
    )?;

    let ln_u_eta_p = e * p * lnf(top);
    let lnw = |t: f64| w.ln_w(t);
    let ln_c = ln_u_eta_p - p * eta.ln()
        + integrate_ln(|t| (p - 1.0) * lnw(t), eta, 2.0 * eta, RTOL, MAX_SUB)?.ln_value;
    let taper = |t: f64| {
        p * (2.0 * eta - t).max(f64::MIN_POSITIVE).ln() - p * eta.ln() + (p - 1.0) * lnw(t)
    };
    let ln_d = ln_u_eta_p
        + integrate_ln(
            |t| taper(t) - p * profile.ln_hardy_at_ln_t(t.ln()).value,
            eta,
            2.0 * eta,
            RTOL,
            MAX_SUB,
        )?
        .ln_value;
    let ln_e = ln_u_eta_p + integrate_ln(taper, eta, 2.0 * eta, RTOL, MAX_SUB)?.ln_value;

    let (grad_main, hardy_main, mass_main) = (ln_grad.exp(), ln_hardy.exp(), ln_mass.exp());
    let (taper_grad, taper_hardy, taper_mass) = (ln_c.exp(), ln_d.exp(), ln_e.exp());
    Ok(UepsQuadrature {
        grad_main,
        hardy_main,
        mass_main,
        taper_grad,
        taper_hardy,
        taper_mass,
        quotient: (grad_main + taper_grad - lambda * (mass_main + taper_mass))
            / (hardy_main + taper_hardy),
        extrapolated_fraction: (ln_hardy_below - ln_hardy).exp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UepsComparison {
    pub eps: f64,
    pub eta: f64,
    pub p: f64,
    pub lambda: f64,
    pub closed: ClosedFormPieces,
    pub quadrature: UepsQuadrature,
    /// Main-part ratio from quadrature.
    pub quadrature_ratio: f64,
    /// Closed-form main parts plus the quadrature tapers.
    pub closed_quotient: f64,
    /// `χ` of the nodal interpolant, when forms are supplied.
    pub mesh_quotient: Option<f64>,
}

/// The `u_ε` quotient three ways: closed form, direct quadrature and `χ` on
/// the mesh interpolant.
pub fn ueps_comparison(
    eps: f64,
    eta: f64,
    profile: &HardyProfile,
    forms: Option<&AssembledForms>,
    p: f64,
    lambda: f64,
) -> Result<UepsComparison, VariationalError> {
    let closed = closed_form_pieces(eps, eta, p, profile)?;
    let quadrature = ueps_quadrature(eps, eta, p, lambda, profile)?;
    let closed_quotient = (closed.grad_main + quadrature.taper_grad
        - lambda * (quadrature.mass_main + quadrature.taper_mass))
        / (closed.hardy_main + quadrature.taper_hardy);
    let mesh_quotient = match forms {
        Some(forms) => {
            let u = test_family_u_eps(eps, eta, p, profile, forms.mesh())?;
            Some(
                chi_described(
                    &u,
                    &forms.at_lambda(lambda),
                    format!("u_eps(eps={eps}, eta={eta})"),
                )?
                .value,
            )
        }
        None => None,
    };
    Ok(UepsComparison {
        eps,
        eta,
        p,
        lambda,
        closed,
        quadrature,
        quadrature_ratio: quadrature.grad_main / quadrature.hardy_main,
        closed_quotient,
        mesh_quotient,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub eps_bar: f64,
    pub eta: f64,
    /// `(f(ε̄) − f(η))^{1−p}`.
    pub energy_closed_form: f64,
    pub energy_quadrature: f64,
    /// `∫_0^η (1 − φ)^p W_p`.
    pub mass_defect: f64,
}

/// Cutoff vanishing on `(0, ε̄]`, equal to one from `η` on and interpolating
/// through `f` in between. Class P weights only.
pub fn cutoff_phi(
    eps_bar: f64,
    eta: f64,
    p: f64,
    profile: &HardyProfile,
    mesh: &Mesh,
) -> Result<(GridFunction, CutoffReport), VariationalError> {
    if profile.class().kind != ClassKind::P {
        return Err(VariationalError::ClassMismatch(
            "the cutoff needs f to blow up at the boundary (class P)".into(),
        ));
    }
    if !(eps_bar > 0.0 && eps_bar < eta && eta < profile.eta()) {
        return Err(VariationalError::InvalidParameter(format!(
            "need 0 < eps_bar < eta < eta0, got {eps_bar}, {eta}"
        )));
    }
    if !(p > 1.0) {
        return Err(VariationalError::InvalidParameter(format!(
            "p must exceed 1, got {p}"
        )));
    }
    let w = profile.weight();
    let lnf = |u: f64| profile.ln_cumulative_at_ln_t(u).value;
    let (lf_eps, lf_eta) = (lnf(eps_bar.ln()), lnf(eta.ln()));
    let ln_delta = ln_sub(lf_eps, lf_eta);
    let phi = GridFunction::interpolate(mesh, |d, _| {
        if d <= eps_bar {
            0.0
        } else if d >= eta {
            1.0
        } else {
            (ln_sub(lf_eps, lnf(d.ln())) - ln_delta)
                .exp()
                .clamp(0.0, 1.0)
        }
    });
    let energy = integrate_ln(
        |u| -w.ln_w_at_ln_t(u) + u - p * ln_delta,
        eps_bar.ln(),
        eta.ln(),
        RTOL,
        MAX_SUB,
    )?;
    let (ln_inner, _) = half_line_ln(
        |u| (p - 1.0) * w.ln_w_at_ln_t(u) + u,
        eps_bar.ln(),
        f64::NEG_INFINITY,
    )?;
    let ln_outer = integrate_ln(
        |u| p * (ln_sub(lnf(u), lf_eta) - ln_delta) + (p - 1.0) * w.ln_w_at_ln_t(u) + u,
        eps_bar.ln(),
        eta.ln(),
        RTOL,
        MAX_SUB,
    )?
    .ln_value;
    Ok((
        phi,
        CutoffReport {
            eps_bar,
            eta,
            energy_closed_form: ((1.0 - p) * ln_delta).exp(),
            energy_quadrature: energy.ln_value.exp(),
            mass_defect: ln_add(ln_inner, ln_outer).exp(),
        },
    ))
}
