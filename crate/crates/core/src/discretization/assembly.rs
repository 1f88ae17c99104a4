//! Quadrature tables and `p = 2` matrices for the three integrals of the
//! variational quotient: gradient energy, mass and Hardy term.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DiscretizationError, GridFunction, Mesh};
use crate::hardy::HardyProfile;
use crate::quadrature::{
    integrate_ln, ln_sum_exp, sum_panels_to_zero, GaussLegendre, PanelRules, PanelTrend,
};
use crate::tridiag::SymTridiag;
use crate::weights::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssembleOptions {
    /// Gauss points per cell away from the boundary.
    pub interior_order: usize,
    /// Gauss points per cell in the boundary layer.
    pub boundary_order: usize,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            interior_order: 8,
            boundary_order: 16,
        }
    }
}

/// The three integrals of the quotient for one trial function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    pub grad: f64,
    pub mass: f64,
    pub hardy: f64,
}

/// Tridiagonal gradient, mass and Hardy matrices over the free nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrices {
    pub a: SymTridiag,
    pub m: SymTridiag,
    pub h: SymTridiag,
}

#[derive(Debug)]
pub struct FormTables {
    mesh: Mesh,
    p: f64,
    eta0: f64,
    max_f_cap: f64,
    profile: Arc<HardyProfile>,
    options: AssembleOptions,
    /// `∫_cell W_p J / h^p` per cell.
    grad_coef: Vec<f64>,
    qp_start: Vec<usize>,
    qp_delta: Vec<f64>,
    /// Value at the quadrature point of the hat function of the cell's left node.
    qp_phi: Vec<f64>,
    qp_mass: Vec<f64>,
    qp_hardy: Vec<f64>,
    pinned: Vec<bool>,
    free: std::ops::Range<usize>,
    matrices: Option<Matrices>,
}

/// Assembled forms at a given `λ`; the tables are shared between `λ` values.
#[derive(Debug, Clone)]
pub struct AssembledForms {
    tables: Arc<FormTables>,
    lambda: f64,
}

struct CellData {
    coef: f64,
    delta: Vec<f64>,
    phi: Vec<f64>,
    mass: Vec<f64>,
    hardy: Vec<f64>,
    pin: bool,
}

/// Cells whose gradient coefficient or Hardy weights leave
/// `[TINY_ENTRY, 1/TINY_ENTRY]` are pinned.
const TINY_ENTRY: f64 = 1e-200;

/// Largest fall of the log Hardy weight across a free cell, toward the interior.
const MAX_CELL_DROP: f64 = 18.420680743952367;

pub fn assemble(
    mesh: &Mesh,
    w: &Weight,
    profile: &HardyProfile,
    p: f64,
    lambda: f64,
) -> Result<AssembledForms, DiscretizationError> {
    assemble_with(mesh, w, profile, p, lambda, AssembleOptions::default())
}

pub fn assemble_with(
    mesh: &Mesh,
    w: &Weight,
    profile: &HardyProfile,
    p: f64,
    lambda: f64,
    options: AssembleOptions,
) -> Result<AssembledForms, DiscretizationError> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(DiscretizationError::InvalidParameter(format!(
            "p must exceed 1, got {p}"
        )));
    }
    if !lambda.is_finite() {
        return Err(DiscretizationError::InvalidParameter(
            "lambda must be finite".into(),
        ));
    }
    let eta0 = profile.eta();
    let gl_int = GaussLegendre::new(options.interior_order);
    let gl_bdy = GaussLegendre::new(options.boundary_order);
    let domain = *mesh.domain();
    let n_cells = mesh.n_cells();

    let cells: Vec<CellData> = (0..n_cells)
        .into_par_iter()
        .map(|k| -> Result<CellData, DiscretizationError> {
            let (dk, dk1) = (mesh.delta(k), mesh.delta(k + 1));
            let (lo, hi) = if dk < dk1 { (dk, dk1) } else { (dk1, dk) };
            let h = hi - lo;
            let gl = if lo < 4.0 * h { &gl_bdy } else { &gl_int };
            let mut pieces = vec![(lo, hi)];
            if lo < eta0 && eta0 < hi {
                pieces = vec![(lo, eta0), (eta0, hi)];
            }
            let ln_wp = |d: f64| (p - 1.0) * w.ln_w(d) + domain.jacobian_at_delta(d).ln();
            // Weights like e^{1/√t} vary by many orders of magnitude across a
            // boundary-layer cell; split such pieces geometrically so that the
            // log of the weight and of F^p moves by at most 1/2 per panel.
            let ln_rate =
                |d: f64| (p - 1.0) * w.ln_w(d) - p * profile.ln_hardy_at_ln_t(d.ln()).value;
            let pieces: Vec<(f64, f64)> = pieces
                .into_iter()
                .flat_map(|(a, b)| {
                    let m = if a >= profile.min_t() {
                        let v = (ln_rate(b) - ln_rate(a)).abs();
                        if v.is_finite() {
                            (2.0 * v).ceil().clamp(1.0, 4096.0) as usize
                        } else {
                            1
                        }
                    } else {
                        1
                    };
                    let q = (b / a).powf(1.0 / m as f64);
                    (0..m).map(move |j| {
                        let x0 = if j == 0 { a } else { a * q.powi(j as i32) };
                        let x1 = if j + 1 == m {
                            b
                        } else {
                            a * q.powi(j as i32 + 1)
                        };
                        (x0, x1)
                    })
                })
                .collect();
            let mut deltas = Vec::new();
            let mut phi = Vec::new();
            let mut mass = Vec::new();
            let mut hardy = Vec::new();
            for &(a, b) in &pieces {
                let c = 0.5 * (a + b);
                let r = 0.5 * (b - a);
                for (x, g) in gl.nodes.iter().zip(&gl.weights) {
                    let d = c + r * x;
                    if d < profile.min_t() {
                        return Err(DiscretizationError::ExtrapolationRequired {
                            delta: d,
                            profile_min: profile.min_t(),
                        });
                    }
                    let ln_f_cap = profile.ln_hardy_at_ln_t(d.ln()).value;
                    let ln_m = ln_wp(d) + (g * r).ln();
                    deltas.push(d);
                    phi.push((dk1 - d) / (dk1 - dk));
                    mass.push(ln_m.exp());
                    hardy.push((ln_m - p * ln_f_cap).exp());
                }
            }
            let mut pin = false;
            let ln_int = if lo == 0.0 {
                let rules = PanelRules::default();
                match sum_panels_to_zero(ln_wp, hi, &rules)? {
                    PanelTrend::Convergent { ln_total, .. } => ln_total,
                    _ => {
                        pin = true;
                        f64::INFINITY
                    }
                }
            } else {
                let mut acc = Vec::new();
                for &(a, b) in &pieces {
                    acc.push(integrate_ln(ln_wp, a, b, 1e-12, 4000)?.ln_value);
                }
                ln_sum_exp(&acc)
            };
            let coef = (ln_int - p * h.ln()).exp();
            // Entries near the ends of the exponent range carry no precision
            // through the solvers.
            let in_range = |v: f64| (TINY_ENTRY..=1.0 / TINY_ENTRY).contains(&v);
            let finite = in_range(coef)
                && mass.iter().chain(&hardy).all(|v| *v <= 1.0 / TINY_ENTRY)
                && hardy.iter().any(|v| in_range(*v));
            // Where the Hardy weight falls steeply away from the boundary the
            // boundary-side Gram block is rank one to working precision, and
            // forward elimination loses the next cell's contribution.
            let unresolved = lo > 0.0 && ln_rate(lo) - ln_rate(hi) > MAX_CELL_DROP;
            if !finite || unresolved {
                pin = true;
            }
            Ok(CellData {
                coef,
                delta: deltas,
                phi,
                mass,
                hardy,
                pin,
            })
        })
        .collect::<Result<_, _>>()?;

    let n = mesh.n_nodes();
    let mut pinned: Vec<bool> = (0..n).map(|i| mesh.is_boundary(i)).collect();
    let mut grad_coef = Vec::with_capacity(n_cells);
    let mut qp_start = vec![0];
    let mut qp_delta = Vec::new();
    let mut qp_phi = Vec::new();
    let mut qp_mass = Vec::new();
    let mut qp_hardy = Vec::new();
    for (k, c) in cells.into_iter().enumerate() {
        qp_delta.extend(c.delta);
        if c.pin {
            pinned[k] = true;
            pinned[k + 1] = true;
            grad_coef.push(0.0);
            qp_phi.extend(c.phi);
            qp_mass.extend(c.mass.iter().map(|_| 0.0));
            qp_hardy.extend(c.hardy.iter().map(|_| 0.0));
        } else {
            grad_coef.push(c.coef);
            qp_phi.extend(c.phi);
            qp_mass.extend(c.mass);
            qp_hardy.extend(c.hardy);
        }
        qp_start.push(qp_phi.len());
    }
    let first_free = pinned
        .iter()
        .position(|b| !b)
        .ok_or_else(|| DiscretizationError::InvalidParameter("every node is pinned".into()))?;
    let last_free = pinned.iter().rposition(|b| !b).unwrap();
    if pinned[first_free..=last_free].iter().any(|b| *b) {
        return Err(DiscretizationError::NonContiguousFreeNodes);
    }
    let free = first_free..last_free + 1;

    let mut tables = FormTables {
        mesh: mesh.clone(),
        p,
        eta0,
        max_f_cap: profile.max_f_cap(),
        profile: Arc::new(profile.clone()),
        options,
        grad_coef,
        qp_start,
        qp_delta,
        qp_phi,
        qp_mass,
        qp_hardy,
        pinned,
        free,
        matrices: None,
    };
    if p == 2.0 {
        tables.matrices = Some(tables.build_matrices());
    }
    Ok(AssembledForms {
        tables: Arc::new(tables),
        lambda,
    })
}

impl FormTables {
    fn build_matrices(&self) -> Matrices {
        let lo = self.free.start;
        let nf = self.free.len();
        let mut a = SymTridiag::zeros(nf);
        let mut m = SymTridiag::zeros(nf);
        let mut h = SymTridiag::zeros(nf);
        let idx = |i: usize| -> Option<usize> {
            if self.free.contains(&i) {
                Some(i - lo)
            } else {
                None
            }
        };
        for k in 0..self.grad_coef.len() {
            let (i, j) = (idx(k), idx(k + 1));
            let c = self.grad_coef[k];
            let (mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0);
            let (mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0);
            for q in self.qp_start[k]..self.qp_start[k + 1] {
                let (pl, pr) = (self.qp_phi[q], 1.0 - self.qp_phi[q]);
                m00 += self.qp_mass[q] * pl * pl;
                m01 += self.qp_mass[q] * pl * pr;
                m11 += self.qp_mass[q] * pr * pr;
                h00 += self.qp_hardy[q] * pl * pl;
                h01 += self.qp_hardy[q] * pl * pr;
                h11 += self.qp_hardy[q] * pr * pr;
            }
            if let Some(i) = i {
                a.diag[i] += c;
                m.diag[i] += m00;
                h.diag[i] += h00;
            }
            if let Some(j) = j {
                a.diag[j] += c;
                m.diag[j] += m11;
                h.diag[j] += h11;
            }
            if let (Some(i), Some(_)) = (i, j) {
                a.off[i] -= c;
                m.off[i] += m01;
                h.off[i] += h01;
            }
        }
        Matrices { a, m, h }
    }
}

impl AssembledForms {
    /// The same tables at another `λ`.
    pub fn at_lambda(&self, lambda: f64) -> AssembledForms {
        AssembledForms {
            tables: Arc::clone(&self.tables),
            lambda,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> f64 {
        self.tables.p
    }

    pub fn eta0(&self) -> f64 {
        self.tables.eta0
    }

    pub fn mesh(&self) -> &Mesh {
        &self.tables.mesh
    }

    pub fn options(&self) -> &AssembleOptions {
        &self.tables.options
    }

    /// `max F` of the profile the forms were built with.
    pub fn max_f_cap(&self) -> f64 {
        self.tables.max_f_cap
    }

    /// The Hardy profile the forms were assembled with.
    pub fn profile(&self) -> &HardyProfile {
        &self.tables.profile
    }

    pub fn matrices(&self) -> Option<&Matrices> {
        self.tables.matrices.as_ref()
    }

    pub fn pinned(&self) -> &[bool] {
        &self.tables.pinned
    }

    /// Node indices carrying unknowns.
    pub fn free_range(&self) -> std::ops::Range<usize> {
        self.tables.free.clone()
    }

    /// Free-node values of `u`.
    pub fn restrict(&self, u: &GridFunction) -> Vec<f64> {
        u.values[self.free_range()].to_vec()
    }

    /// Grid function with free-node values `v` and zeros elsewhere.
    pub fn extend(&self, v: &[f64]) -> GridFunction {
        let mut values = vec![0.0; self.mesh().n_nodes()];
        values[self.free_range()].copy_from_slice(v);
        GridFunction { values }
    }

    fn check(&self, u: &GridFunction) -> Result<(), DiscretizationError> {
        let n = self.mesh().n_nodes();
        if u.values.len() != n {
            return Err(DiscretizationError::MeshMismatch {
                expected: n,
                got: u.values.len(),
            });
        }
        Ok(())
    }

    /// The three integrals for `u`; values at pinned nodes are ignored.
    pub fn norms(&self, u: &GridFunction) -> Result<Terms, DiscretizationError> {
        self.check(u)?;
        Ok(self.terms_of(&self.masked(&u.values)))
    }

    fn masked(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.tables.pinned)
            .map(|(v, &pin)| if pin { 0.0 } else { *v })
            .collect()
    }

    /// Terms for a full nodal vector already zero at pinned nodes.
    pub fn terms_of(&self, u: &[f64]) -> Terms {
        let t = &self.tables;
        let p = t.p;
        let pw = |v: f64| if p == 2.0 { v * v } else { v.abs().powf(p) };
        let mut grad = 0.0;
        let mut mass = 0.0;
        let mut hardy = 0.0;
        for k in 0..t.grad_coef.len() {
            let (a, b) = (u[k], u[k + 1]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            if t.grad_coef[k] != 0.0 {
                grad += t.grad_coef[k] * pw(b - a);
            }
            for q in t.qp_start[k]..t.qp_start[k + 1] {
                let v = pw(t.qp_phi[q] * a + (1.0 - t.qp_phi[q]) * b);
                mass += t.qp_mass[q] * v;
                hardy += t.qp_hardy[q] * v;
            }
        }
        Terms { grad, mass, hardy }
    }

    /// Terms split by boundary distance: `(δ < split, δ >= split)`. Mass and
    /// Hardy terms split at quadrature points, gradient terms by cell midpoint.
    pub fn terms_split(
        &self,
        u: &GridFunction,
        split: f64,
    ) -> Result<(Terms, Terms), DiscretizationError> {
        self.check(u)?;
        let u = self.masked(&u.values);
        let t = &self.tables;
        let p = t.p;
        let pw = |v: f64| if p == 2.0 { v * v } else { v.abs().powf(p) };
        let zero = Terms {
            grad: 0.0,
            mass: 0.0,
            hardy: 0.0,
        };
        let (mut inner, mut outer) = (zero, zero);
        let mesh = &t.mesh;
        for k in 0..t.grad_coef.len() {
            let (a, b) = (u[k], u[k + 1]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let mid = 0.5 * (mesh.delta(k) + mesh.delta(k + 1));
            let g = t.grad_coef[k] * pw(b - a);
            if mid < split {
                inner.grad += g;
            } else {
                outer.grad += g;
            }
            for q in t.qp_start[k]..t.qp_start[k + 1] {
                let v = pw(t.qp_phi[q] * a + (1.0 - t.qp_phi[q]) * b);
                let side = if t.qp_delta[q] < split {
                    &mut inner
                } else {
                    &mut outer
                };
                side.mass += t.qp_mass[q] * v;
                side.hardy += t.qp_hardy[q] * v;
            }
        }
        Ok((inner, outer))
    }

    /// Terms and their gradients with respect to every nodal value
    /// (entries at pinned nodes are zeroed).
    pub fn terms_and_gradients(&self, u: &[f64]) -> (Terms, [Vec<f64>; 3]) {
        self.accumulate(u, false)
    }

    /// Per-node sums of the absolute cell contributions to the three
    /// gradients; the natural scale for a nodal weak-form residual.
    pub fn gradient_magnitudes(&self, u: &[f64]) -> [Vec<f64>; 3] {
        self.accumulate(u, true).1
    }

    fn accumulate(&self, u: &[f64], abs: bool) -> (Terms, [Vec<f64>; 3]) {
        let t = &self.tables;
        let p = t.p;
        let n = u.len();
        let mut dg = vec![0.0; n];
        let mut dm = vec![0.0; n];
        let mut dh = vec![0.0; n];
        let mut terms = Terms {
            grad: 0.0,
            mass: 0.0,
            hardy: 0.0,
        };
        // |v|^p and its derivative p|v|^{p-2}v.
        let pw = |v: f64| -> (f64, f64) {
            if p == 2.0 {
                (v * v, 2.0 * v)
            } else {
                let a = v.abs();
                if a == 0.0 {
                    (0.0, 0.0)
                } else {
                    let ap1 = a.powf(p - 1.0);
                    (ap1 * a, p * ap1 * v.signum())
                }
            }
        };
        let pw = |v: f64| {
            let (a, d) = pw(v);
            (a, if abs { d.abs() } else { d })
        };
        let sgn = |x: f64| if abs { x.abs() } else { x };
        for k in 0..t.grad_coef.len() {
            let (a, b) = (u[k], u[k + 1]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let c = t.grad_coef[k];
            if c != 0.0 {
                let (v, d) = pw(b - a);
                terms.grad += c * v;
                dg[k] += sgn(-c * d);
                dg[k + 1] += sgn(c * d);
            }
            for q in t.qp_start[k]..t.qp_start[k + 1] {
                let phi = t.qp_phi[q];
                let (v, d) = pw(phi * a + (1.0 - phi) * b);
                let (mq, hq) = (t.qp_mass[q], t.qp_hardy[q]);
                terms.mass += mq * v;
                terms.hardy += hq * v;
                dm[k] += mq * d * phi;
                dm[k + 1] += mq * d * (1.0 - phi);
                dh[k] += hq * d * phi;
                dh[k + 1] += hq * d * (1.0 - phi);
            }
        }
        for (i, pin) in t.pinned.iter().enumerate() {
            if *pin {
                dg[i] = 0.0;
                dm[i] = 0.0;
                dh[i] = 0.0;
            }
        }
        (terms, [dg, dm, dh])
    }

    /// Tridiagonal Hessians of the three terms over the free nodes at `u`,
    /// with `|v|^{p−2}` regularised by `floor` where `p < 2`.
    pub fn hessians(&self, u: &[f64], floor: f64) -> [SymTridiag; 3] {
        let t = &self.tables;
        let p = t.p;
        let lo = t.free.start;
        let nf = t.free.len();
        let mut out = [
            SymTridiag::zeros(nf),
            SymTridiag::zeros(nf),
            SymTridiag::zeros(nf),
        ];
        let curv = |v: f64| p * (p - 1.0) * (v * v + floor * floor).powf(0.5 * (p - 2.0));
        let idx = |i: usize| {
            if t.free.contains(&i) {
                Some(i - lo)
            } else {
                None
            }
        };
        for k in 0..t.grad_coef.len() {
            let (i, j) = (idx(k), idx(k + 1));
            if i.is_none() && j.is_none() {
                continue;
            }
            let (a, b) = (u[k], u[k + 1]);
            let c = t.grad_coef[k] * curv(b - a);
            let mut loc = [[0.0; 3]; 3];
            loc[0] = [c, -c, c];
            for q in t.qp_start[k]..t.qp_start[k + 1] {
                let phi = t.qp_phi[q];
                let s = curv(phi * a + (1.0 - phi) * b);
                for (slot, wq) in [(1, t.qp_mass[q]), (2, t.qp_hardy[q])] {
                    let e = wq * s;
                    loc[slot][0] += e * phi * phi;
                    loc[slot][1] += e * phi * (1.0 - phi);
                    loc[slot][2] += e * (1.0 - phi) * (1.0 - phi);
                }
            }
            for (slot, l) in loc.iter().enumerate() {
                if let Some(i) = i {
                    out[slot].diag[i] += l[0];
                }
                if let Some(j) = j {
                    out[slot].diag[j] += l[2];
                }
                if let (Some(i), Some(_)) = (i, j) {
                    out[slot].off[i] += l[1];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{make_graded_mesh, Domain};
    use crate::hardy::{build_profile, ProfileOptions};
    use crate::weights::{classify, make_weight, WeightSpec};

    fn setup(n: usize, res: f64) -> (Mesh, AssembledForms) {
        let d = Domain::interval(1.0).unwrap();
        let mesh = make_graded_mesh(&d, n, res).unwrap();
        let w = make_weight(WeightSpec::constant(1.0)).unwrap();
        let c = classify(&w, 0.25).unwrap();
        let prof = build_profile(
            &w,
            &c,
            0.25,
            1.0,
            ProfileOptions::reaching(0.25, res * 1e-3),
        )
        .unwrap();
        let f = assemble(&mesh, &w, &prof, 2.0, 0.0).unwrap();
        (mesh, f)
    }

    #[test]
    fn hat_function_energy_is_exact() {
        let (mesh, f) = setup(200, 1e-6);
        let mid = mesh.n_nodes() / 2;
        let mut u = GridFunction::zeros(&mesh);
        u.values[mid] = 1.0;
        let t = f.norms(&u).unwrap();
        let exact = 1.0 / mesh.cell_size(mid - 1) + 1.0 / mesh.cell_size(mid);
        assert!((t.grad - exact).abs() <= 1e-10 * exact);
        let m = f.matrices().unwrap();
        let v = f.restrict(&u);
        assert!((m.a.quad_form(&v) - t.grad).abs() <= 1e-10 * t.grad);
        assert!((m.h.quad_form(&v) - t.hardy).abs() <= 1e-10 * t.hardy);
    }

    #[test]
    fn polynomial_mass() {
        let (mesh, f) = setup(2000, 1e-6);
        let u = GridFunction::interpolate(&mesh, |_, x| x * (1.0 - x));
        let t = f.norms(&u).unwrap();
        assert!((t.mass - 1.0 / 30.0).abs() < 1e-5, "{}", t.mass);
        assert!((t.grad - 1.0 / 3.0).abs() < 1e-4, "{}", t.grad);
    }

    #[test]
    fn gradients_match_differences() {
        let (mesh, f) = setup(64, 1e-3);
        let f3 = {
            let w = make_weight(WeightSpec::constant(1.0)).unwrap();
            let c = classify(&w, 0.25).unwrap();
            let prof = build_profile(&w, &c, 0.25, 1.0, ProfileOptions::default()).unwrap();
            assemble(&mesh, &w, &prof, 3.0, 0.0).unwrap()
        };
        let u = GridFunction::interpolate(&mesh, |_, x| (3.0 * x).sin() * x * (1.0 - x));
        let (_, g) = f3.terms_and_gradients(&u.values);
        let i = 17;
        let h = 1e-6;
        let mut up = u.values.clone();
        up[i] += h;
        let mut dn = u.values.clone();
        dn[i] -= h;
        let tp = f3.terms_of(&up);
        let tm = f3.terms_of(&dn);
        let fd = (tp.hardy - tm.hardy) / (2.0 * h);
        assert!(
            (fd - g[2][i]).abs() < 1e-6 * g[2][i].abs(),
            "{fd} vs {}",
            g[2][i]
        );
        let fd = (tp.grad - tm.grad) / (2.0 * h);
        assert!((fd - g[0][i]).abs() < 1e-6 * g[0][i].abs().max(1.0));
        let _ = f;
    }
}
