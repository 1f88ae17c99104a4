use serde::{Deserialize, Serialize};

use super::{test_family_u_eps, VariationalError};
use crate::discretization::{AssembledForms, Domain, GridFunction};
use crate::tridiag::SymTridiag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Shifted inverse iteration on the tridiagonal pencil (p = 2).
    Eigen2,
    /// Preconditioned nonlinear conjugate gradients (any p > 1).
    Descent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    /// `None` picks `Eigen2` for p = 2 and `Descent` otherwise.
    pub method: Option<Method>,
    pub max_iter: usize,
    /// Eigen2 stops when successive Rayleigh quotients differ by less.
    pub rq_tol: f64,
    /// Descent stops when the relative decrease over `stall_window`
    /// iterations falls below `stall_rtol`.
    pub stall_window: usize,
    pub stall_rtol: f64,
    /// `ε` of the boundary-concentrated initial guess.
    pub guess_eps: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            method: None,
            max_iter: 100_000,
            rq_tol: 1e-12,
            stall_window: 20,
            stall_rtol: 1e-10,
            guess_eps: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub j_estimate: f64,
    pub minimizer: GridFunction,
    pub iterations: usize,
    pub residual: f64,
    pub trace: Vec<(usize, f64)>,
    pub method: Method,
    pub converged: bool,
    pub initial_guess: String,
}

/// The two starting points: `u_ε` at `guess_eps` (boundary layer) and the
/// first Dirichlet mode shape (interior bump). Guesses that cannot be built
/// on this mesh are skipped.
pub fn initial_guesses(forms: &AssembledForms, guess_eps: f64) -> Vec<(String, GridFunction)> {
    let mesh = forms.mesh();
    let mut out = Vec::new();
    let eta = forms.eta0() / 2.0;
    if let Ok(u) = test_family_u_eps(guess_eps, eta, forms.p(), forms.profile(), mesh) {
        out.push((format!("u_eps(eps={guess_eps}, eta={eta})"), u));
    }
    let mode = match *mesh.domain() {
        Domain::Interval { length } => {
            GridFunction::interpolate(mesh, |_, x| (std::f64::consts::PI * x / length).sin())
        }
        Domain::Ball { radius, .. } => {
            GridFunction::interpolate(mesh, |_, r| (0.5 * std::f64::consts::PI * r / radius).cos())
        }
    };
    out.push(("dirichlet mode".to_string(), mode));
    out
}

/// Minimises the quotient over the discrete space from both initial guesses
/// and keeps the smaller value.
pub fn minimize_quotient(
    forms: &AssembledForms,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult, VariationalError> {
    let p = forms.p();
    let method = opts.method.unwrap_or(if p == 2.0 {
        Method::Eigen2
    } else {
        Method::Descent
    });
    if method == Method::Eigen2 && p != 2.0 {
        return Err(VariationalError::InvalidParameter(format!(
            "the eigen path needs p = 2, got {p}"
        )));
    }
    if forms.free_range().is_empty() {
        return Err(VariationalError::InvalidParameter("no free nodes".into()));
    }
    let mut best: Option<Result<MinimizeResult, VariationalError>> = None;
    for (label, guess) in initial_guesses(forms, opts.guess_eps) {
        let v = forms.restrict(&guess);
        if forms.terms_of(&forms.extend(&v).values).hardy <= 0.0 {
            continue;
        }
        let run = match method {
            Method::Eigen2 => eigen2(forms, v, opts, label),
            Method::Descent => descent(forms, v, opts, label),
        };
        let better = match (&best, &run) {
            (None, _) => true,
            (Some(Err(_)), Ok(_)) => true,
            (Some(Ok(b)), Ok(r)) => r.j_estimate < b.j_estimate,
            (
                Some(Err(VariationalError::NoConvergence(b))),
                Err(VariationalError::NoConvergence(r)),
            ) => r.j_estimate < b.j_estimate,
            _ => false,
        };
        if better {
            best = Some(run);
        }
    }
    best.unwrap_or(Err(VariationalError::ZeroDenominator(0.0)))
}

fn shifted(forms: &AssembledForms) -> Result<(SymTridiag, SymTridiag), VariationalError> {
    let mats = forms.matrices().ok_or_else(|| {
        VariationalError::InvalidParameter("matrices are only assembled for p = 2".into())
    })?;
    let k = SymTridiag::combine(&[(1.0, &mats.a), (-forms.lambda(), &mats.m)]);
    let h = mats.h.clone();
    if h.count_below(0.0, &SymTridiag::zeros(h.len())) > 0 {
        return Err(VariationalError::IndefiniteH);
    }
    Ok((k, h))
}

fn normalize_sign(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn eigen2(
    forms: &AssembledForms,
    mut x: Vec<f64>,
    opts: &MinimizeOptions,
    label: String,
) -> Result<MinimizeResult, VariationalError> {
    let (k, h) = shifted(forms)?;
    let rq = |v: &[f64]| k.quad_form(v) / h.quad_form(v);
    let mut hi = rq(&x);
    let mut bump = 1e-12 * hi.abs().max(1.0);
    while k.count_below(hi, &h) == 0 {
        hi += bump;
        bump *= 2.0;
    }
    let mut step = hi.abs().max(1.0);
    let mut lo = hi - step;
    while k.count_below(lo, &h) > 0 {
        step *= 2.0;
        lo = hi - step;
    }
    // Sturm bisection for the smallest eigenvalue.
    for _ in 0..300 {
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if k.count_below(mid, &h) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let sigma = lo;
    let scale = h.quad_form(&x).sqrt();
    x.iter_mut().for_each(|v| *v /= scale);
    let mut value = k.quad_form(&x);
    let mut trace = vec![(0, value)];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter.min(10_000) {
        let mut y = k.solve_shifted(sigma, &h, &h.mul_vec(&x));
        let norm = h.quad_form(&y).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        y.iter_mut().for_each(|v| *v /= norm);
        let next = k.quad_form(&y);
        x = y;
        iterations = it;
        let delta = (value - next).abs();
        value = next;
        trace.push((it, value));
        if it >= 2 && delta < opts.rq_tol * value.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    normalize_sign(&mut x);
    let value = rq(&x);
    let residual = algebraic_residual(&k, &h, &x, value);
    let result = MinimizeResult {
        j_estimate: value,
        minimizer: forms.extend(&x),
        iterations,
        residual,
        trace,
        method: Method::Eigen2,
        converged,
        initial_guess: label,
    };
    if converged {
        Ok(result)
    } else {
        Err(VariationalError::NoConvergence(Box::new(result)))
    }
}

/// `‖(K − J·H)x‖_{H⁻¹} / ‖x‖_H`: the eigen-residual measured in the norms of
/// the pencil, so it does not scale with the smallest cell.
fn algebraic_residual(k: &SymTridiag, h: &SymTridiag, x: &[f64], value: f64) -> f64 {
    let kx = k.mul_vec(x);
    let hx = h.mul_vec(x);
    let r: Vec<f64> = kx.iter().zip(&hx).map(|(a, b)| a - value * b).collect();
    let hinv_r = h.solve(&r);
    let num: f64 = r.iter().zip(&hinv_r).map(|(a, b)| a * b).sum();
    (num.max(0.0) / h.quad_form(x)).sqrt()
}

struct Functional<'a> {
    forms: &'a AssembledForms,
    lambda: f64,
}

impl Functional<'_> {
    fn full(&self, v: &[f64]) -> Vec<f64> {
        self.forms.extend(v).values
    }

    fn value(&self, v: &[f64]) -> f64 {
        let t = self.forms.terms_of(&self.full(v));
        (t.grad - self.lambda * t.mass) / t.hardy
    }

    /// Quotient and its gradient over the free nodes.
    fn value_and_gradient(&self, v: &[f64]) -> (f64, f64, Vec<f64>) {
        let (t, [dg, dm, dh]) = self.forms.terms_and_gradients(&self.full(v));
        let chi = (t.grad - self.lambda * t.mass) / t.hardy;
        let free = self.forms.free_range();
        let g = free
            .map(|i| (dg[i] - self.lambda * dm[i] - chi * dh[i]) / t.hardy)
            .collect();
        (chi, t.hardy, g)
    }
}

fn descent(
    forms: &AssembledForms,
    mut v: Vec<f64>,
    opts: &MinimizeOptions,
    label: String,
) -> Result<MinimizeResult, VariationalError> {
    let p = forms.p();
    let f = Functional {
        forms,
        lambda: forms.lambda(),
    };
    let rescale = |v: &mut Vec<f64>, hardy: f64| {
        let c = hardy.powf(-1.0 / p);
        v.iter_mut().for_each(|x| *x *= c);
    };
    let (_, hardy, _) = f.value_and_gradient(&v);
    rescale(&mut v, hardy);
    let (mut value, _, mut g) = f.value_and_gradient(&v);
    let mut trace = vec![(0, value)];
    let mut dir: Vec<f64> = Vec::new();
    let mut z_prev: Vec<f64> = Vec::new();
    let mut g_prev: Vec<f64> = Vec::new();
    let mut alpha_prev: f64 = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let vmax = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let [hg, _, hh] = forms.hessians(&f.full(&v), 1e-6 * vmax);
        let pre = SymTridiag::combine(&[(1.0, &hg), (value.abs(), &hh)]);
        let z = pre.solve(&g);
        let mut d: Vec<f64> = z.iter().map(|x| -x).collect();
        if !dir.is_empty() {
            let num: f64 = z
                .iter()
                .zip(g.iter().zip(&g_prev))
                .map(|(zi, (gi, gp))| zi * (gi - gp))
                .sum();
            let den: f64 = z_prev.iter().zip(&g_prev).map(|(a, b)| a * b).sum();
            let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
            for (di, pd) in d.iter_mut().zip(&dir) {
                *di += beta * pd;
            }
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            d = z.iter().map(|x| -x).collect();
            slope = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        }
        if !(slope < 0.0) || !slope.is_finite() {
            converged = true;
            break;
        }
        let trial = |a: f64| -> (f64, Vec<f64>) {
            let w: Vec<f64> = v.iter().zip(&d).map(|(x, y)| x + a * y).collect();
            (f.value(&w), w)
        };
        let mut alpha = (2.0 * alpha_prev).min(1.0);
        let (mut fv, mut w) = trial(alpha);
        let mut halvings = 0;
        while !(fv < value) && halvings < 60 {
            alpha *= 0.5;
            halvings += 1;
            (fv, w) = trial(alpha);
        }
        if !(fv < value) {
            converged = true;
            break;
        }
        if halvings == 0 {
            let (f2, w2) = trial(2.0 * alpha);
            if f2 < fv {
                alpha *= 2.0;
                w = w2;
            }
        }
        alpha_prev = alpha;
        v = w;
        let (_, hardy, _) = f.value_and_gradient(&v);
        rescale(&mut v, hardy);
        dir = d;
        z_prev = z;
        g_prev = g;
        let (nv, _, ng) = f.value_and_gradient(&v);
        value = nv;
        g = ng;
        trace.push((it, value));
        if it >= opts.stall_window {
            let old = trace[trace.len() - 1 - opts.stall_window].1;
            if (old - value) <= opts.stall_rtol * value.abs().max(1e-300) {
                converged = true;
                break;
            }
        }
    }
    normalize_sign(&mut v);
    let value = f.value(&v);
    let minimizer = forms.extend(&v);
    let residual = weak_residual(forms, &minimizer.values, value);
    let result = MinimizeResult {
        j_estimate: value,
        minimizer,
        iterations,
        residual,
        trace,
        method: Method::Descent,
        converged,
        initial_guess: label,
    };
    if converged {
        Ok(result)
    } else {
        Err(VariationalError::NoConvergence(Box::new(result)))
    }
}

/// Largest nodal weak-form residual `|N' − λM' − J·D'|`, each node scaled by
/// the absolute size of its own contributions. Nodes whose scale is below
/// `1e-10` of the largest are ignored.
fn weak_residual(forms: &AssembledForms, u: &[f64], j: f64) -> f64 {
    let lambda = forms.lambda();
    let (_, [dg, dm, dh]) = forms.terms_and_gradients(u);
    let [ag, am, ah] = forms.gradient_magnitudes(u);
    let free = forms.free_range();
    let scales: Vec<f64> = free
        .clone()
        .map(|i| ag[i] + lambda.abs() * am[i] + j.abs() * ah[i])
        .collect();
    let top = scales.iter().copied().fold(0.0, f64::max);
    free.zip(&scales)
        .filter(|(_, s)| **s > 1e-10 * top)
        .map(|(i, s)| (dg[i] - lambda * dm[i] - j * dh[i]).abs() / s)
        .fold(0.0, f64::max)
}

/// Euler–Lagrange residual of a minimiser: the eigen-residual of
/// `(A − λM − J·H)u` in the pencil norms for p = 2, the scaled nodal weak-form residual
/// otherwise.
pub fn euler_lagrange_residual(
    res: &MinimizeResult,
    forms: &AssembledForms,
) -> Result<f64, VariationalError> {
    let n = forms.mesh().n_nodes();
    if res.minimizer.values.len() != n {
        return Err(crate::discretization::DiscretizationError::MeshMismatch {
            expected: n,
            got: res.minimizer.values.len(),
        }
        .into());
    }
    let u = forms.restrict(&res.minimizer);
    if forms.p() == 2.0 && forms.matrices().is_some() {
        let (k, h) = shifted(forms)?;
        let j = k.quad_form(&u) / h.quad_form(&u);
        let c = h.quad_form(&u).sqrt();
        let x: Vec<f64> = u.iter().map(|v| v / c).collect();
        return Ok(algebraic_residual(&k, &h, &x, j));
    }
    let full = forms.extend(&u).values;
    let t = forms.terms_of(&full);
    let j = (t.grad - forms.lambda() * t.mass) / t.hardy;
    Ok(weak_residual(forms, &full, j))
}
