//! Hardy functions `f`, `F = w·f` and `G` tabulated on a boundary-graded
//! grid, with admissibility and asymptotic diagnostics.
//!
//! Everything is stored in log form: for `w = e^{±t^{-β}}` the cumulative
//! integral `f` leaves the range of `f64` long before the smallest node.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::quadrature::{
    fit_line, integrate_ln, ln_add, sum_panels_to_zero, GaussLegendre, PanelRules, PanelTrend,
    Pchip, QuadratureError,
};
use crate::weights::{
    log_grid, make_weight, switching, ClassKind, MonotoneReport, Monotonicity, Weight, WeightClass,
    WeightError, WeightFamily, WeightSpec,
};

pub const PROFILE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HardyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("quadrature failure: {0}")]
    QuadratureFailure(#[from] QuadratureError),
    #[error("weight is not in the requested class: {0}")]
    ClassMismatch(String),
    #[error("evaluation point must be positive, got {0}")]
    NonPositiveT(f64),
    #[error("identity '{identity}' violated at t = {t:e}: relative error {rel_error:e} > {tol:e}")]
    ToleranceExceeded {
        identity: String,
        t: f64,
        rel_error: f64,
        tol: f64,
    },
    #[error("asymptotic fit rejected: residual {residual:.4} > 0.05 (exponent {exponent:.4})")]
    FitRejected { residual: f64, exponent: f64 },
    #[error("profile grid too shallow: smallest node {t_min:e}, need <= {needed:e}")]
    InsufficientGrid { t_min: f64, needed: f64 },
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("malformed profile document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub n_nodes: usize,
    /// The grid spans `[η·10^{-decades}, η]`.
    pub decades: f64,
    /// Relative tolerance of each node-to-node integral.
    pub rtol: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            n_nodes: 4096,
            decades: 10.0,
            rtol: 1e-12,
        }
    }
}

impl ProfileOptions {
    /// Options whose grid reaches at least down to `t_min`.
    pub fn reaching(eta: f64, t_min: f64) -> Self {
        let need = (eta / t_min).log10().ceil() + 1.0;
        let decades = need.max(10.0);
        let n_nodes = ((decades * 410.0) as usize).max(4096);
        Self {
            n_nodes,
            decades,
            ..Self::default()
        }
    }
}

/// A profile evaluation; `extrapolated` is set below the smallest node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileValue {
    pub value: f64,
    pub extrapolated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailConstants {
    /// `F` for `t >= η`.
    pub f_cap_tail: f64,
    pub ln_f_cap_tail: f64,
    /// `G` for `t >= η`, equal to `μ`.
    pub g_tail: f64,
    /// `f` for `t >= η`.
    pub f_tail: f64,
}

#[derive(Debug, Clone)]
pub struct HardyProfile {
    weight: Weight,
    class: WeightClass,
    eta: f64,
    mu: f64,
    options: ProfileOptions,
    grid: Vec<f64>,
    ln_f: Vec<f64>,
    ln_f_cap: Vec<f64>,
    g: Vec<f64>,
    tails: TailConstants,
    /// `ln F` against `ln t`.
    interp: Pchip,
    /// Slope of `ln F` in `ln t` over the lowest decade, for extrapolation.
    tail_slope: f64,
}

/// Tabulates `f`, `F` and `G` for `(w, class, η, μ)` on a geometric grid
/// graded toward `t = 0`.
pub fn build_profile(
    w: &Weight,
    class: &WeightClass,
    eta: f64,
    mu: f64,
    options: ProfileOptions,
) -> Result<HardyProfile, HardyError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(HardyError::InvalidParameter(format!(
            "eta must be positive, got {eta}"
        )));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(HardyError::InvalidParameter(format!(
            "mu must be positive, got {mu}"
        )));
    }
    if options.n_nodes < 64 {
        return Err(HardyError::InvalidParameter(format!(
            "n_nodes must be at least 64, got {}",
            options.n_nodes
        )));
    }
    if !(options.decades >= 8.0) {
        return Err(HardyError::InvalidParameter(format!(
            "the grid must span at least 8 decades, got {}",
            options.decades
        )));
    }
    let n0 = options.n_nodes;
    let base: Vec<f64> = (0..n0)
        .map(|i| {
            if i + 1 == n0 {
                eta
            } else {
                let frac = 1.0 - i as f64 / (n0 - 1) as f64;
                eta * 10f64.powf(-options.decades * frac)
            }
        })
        .collect();
    let ln_recip = |s: f64| -w.ln_w(s);
    let integrate =
        |a: f64, b: f64| integrate_ln(ln_recip, a, b, options.rtol, 2000).map(|r| r.ln_value);
    let base_pieces: Vec<f64> = base
        .windows(2)
        .map(|ab| integrate(ab[0], ab[1]))
        .collect::<Result<_, _>>()?;
    let base_ln_f = cumulate(w, class, &base, &base_pieces, mu, options.rtol)?;
    let splits = split_counts(&base, &base_ln_f);
    let mut grid = Vec::with_capacity(n0);
    let mut pieces = Vec::with_capacity(n0);
    for (i, &m) in splits.iter().enumerate() {
        let (a, b) = (base[i], base[i + 1]);
        grid.push(a);
        if m == 1 {
            pieces.push(base_pieces[i]);
            continue;
        }
        let q = (b / a).powf(1.0 / m as f64);
        let mut x0 = a;
        for j in 1..=m {
            let x1 = if j == m { b } else { a * q.powi(j as i32) };
            if j < m {
                grid.push(x1);
            }
            pieces.push(integrate(x0, x1)?);
            x0 = x1;
        }
    }
    grid.push(eta);
    let n = grid.len();
    let ln_f = cumulate(w, class, &grid, &pieces, mu, options.rtol)?;
    let ln_f_cap: Vec<f64> = grid
        .iter()
        .zip(&ln_f)
        .map(|(&t, lf)| w.ln_w(t) + lf)
        .collect();
    let s = switching(class) as f64;
    let ln_f_eta = ln_f[n - 1];
    let g: Vec<f64> = ln_f.iter().map(|lf| mu + s * (ln_f_eta - lf)).collect();

    let f_tail_ln = match class.kind {
        ClassKind::P => mu.ln(),
        ClassKind::Q => ln_f_eta,
    };
    let ln_f_cap_tail = w.ln_w(eta) + f_tail_ln;
    let tails = TailConstants {
        f_cap_tail: ln_f_cap_tail.exp(),
        ln_f_cap_tail,
        g_tail: mu,
        f_tail: f_tail_ln.exp(),
    };
    let ln_t: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
    let interp = Pchip::new(ln_t.clone(), ln_f_cap.clone());
    let lowest_decade = grid
        .iter()
        .take_while(|&&t| t <= 10.0 * grid[0])
        .count()
        .max(3);
    let (tail_slope, _) = fit_line(&ln_t[..lowest_decade], &ln_f_cap[..lowest_decade]);

    Ok(HardyProfile {
        weight: w.clone(),
        class: *class,
        eta,
        mu,
        options,
        grid,
        ln_f,
        ln_f_cap,
        g,
        tails,
        interp,
        tail_slope,
    })
}

/// Largest change of `ln |d ln f/d ln t|` allowed between neighbouring cells.
const MAX_SLOPE_STEP: f64 = 0.03;

/// `ln f` at the nodes from the node-to-node integrals of `1/w`.
fn cumulate(
    w: &Weight,
    class: &WeightClass,
    grid: &[f64],
    pieces: &[f64],
    mu: f64,
    rtol: f64,
) -> Result<Vec<f64>, HardyError> {
    let n = grid.len();
    let mut ln_f = vec![0.0; n];
    match class.kind {
        ClassKind::P => {
            ln_f[n - 1] = mu.ln();
            for i in (0..n - 1).rev() {
                ln_f[i] = ln_add(ln_f[i + 1], pieces[i]);
            }
        }
        ClassKind::Q => {
            ln_f[0] = ln_head_integral(w, grid[0], rtol)?;
            for i in 1..n {
                ln_f[i] = ln_add(ln_f[i - 1], pieces[i - 1]);
            }
        }
    }
    Ok(ln_f)
}

/// Sub-cells per cell so that the log-slope of `ln f` changes by at most
/// `MAX_SLOPE_STEP` from cell to cell, with neighbouring counts within a
/// factor of two. A small `μ` against a large `1/w(η)` makes `ln f` bend
/// sharply just below `η`.
fn split_counts(grid: &[f64], ln_f: &[f64]) -> Vec<usize> {
    let cells = grid.len() - 1;
    let ln_slope: Vec<f64> = (0..cells)
        .map(|i| {
            ((ln_f[i + 1] - ln_f[i]) / (grid[i + 1] / grid[i]).ln())
                .abs()
                .ln()
        })
        .collect();
    let mut m = vec![1usize; cells];
    for i in 0..cells {
        let mut v: f64 = 0.0;
        for j in [i.wrapping_sub(1), i + 1] {
            if j < cells {
                v = v.max((ln_slope[j] - ln_slope[i]).abs());
            }
        }
        if v.is_finite() {
            m[i] = (v / MAX_SLOPE_STEP).ceil().clamp(1.0, 256.0) as usize;
        }
    }
    for i in 1..cells {
        m[i] = m[i].max(m[i - 1] / 2);
    }
    for i in (0..cells.saturating_sub(1)).rev() {
        m[i] = m[i].max(m[i + 1] / 2);
    }
    m
}

/// Weights of the first derivative at `z` from values at `x` (Fornberg).
fn derivative_weights(z: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                c[i][1] = c1 * (c[i - 1][0] - c5 * c[i - 1][1]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            c[j][1] = (c4 * c[j][1] - c[j][0]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|r| r[1]).collect()
}

/// `ln ∫_0^{t0} 1/w` for a class-Q weight.
fn ln_head_integral(w: &Weight, t0: f64, rtol: f64) -> Result<f64, HardyError> {
    match &w.spec().family {
        WeightFamily::Power { alpha } if *alpha < 1.0 => {
            return Ok((1.0 - alpha) * t0.ln() - (1.0 - alpha).ln())
        }
        WeightFamily::Constant { c } => return Ok(t0.ln() - c.ln()),
        _ => {}
    }
    let rules = PanelRules {
        rtol,
        ..PanelRules::default()
    };
    match sum_panels_to_zero(|s| -w.ln_w(s), t0, &rules)? {
        PanelTrend::Convergent { ln_total, .. } => Ok(ln_total),
        PanelTrend::Divergent { ln_partial, panels } => Err(HardyError::ClassMismatch(format!(
            "class Q requested but the integral of 1/w near 0 diverges (ln partial sum {ln_partial:.3} after {panels} panels)"
        ))),
        PanelTrend::Ambiguous { ln_partial, panels } => Err(HardyError::ClassMismatch(format!(
            "class Q requested but the integral of 1/w near 0 did not settle (ln partial sum {ln_partial:.3} after {panels} panels)"
        ))),
    }
}

impl HardyProfile {
    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn class(&self) -> &WeightClass {
        &self.class
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn options(&self) -> &ProfileOptions {
        &self.options
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn min_t(&self) -> f64 {
        self.grid[0]
    }

    pub fn ln_f_values(&self) -> &[f64] {
        &self.ln_f
    }

    pub fn ln_f_cap_values(&self) -> &[f64] {
        &self.ln_f_cap
    }

    pub fn f_values(&self) -> Vec<f64> {
        self.ln_f.iter().map(|v| v.exp()).collect()
    }

    pub fn f_cap_values(&self) -> Vec<f64> {
        self.ln_f_cap.iter().map(|v| v.exp()).collect()
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g
    }

    pub fn tails(&self) -> &TailConstants {
        &self.tails
    }

    pub fn switching(&self) -> f64 {
        switching(&self.class) as f64
    }

    /// `max F` over the grid and the tail.
    pub fn max_f_cap(&self) -> f64 {
        self.ln_f_cap
            .iter()
            .copied()
            .fold(self.tails.ln_f_cap_tail, f64::max)
            .exp()
    }

    /// `ln F(t)`.
    pub fn ln_hardy(&self, t: f64) -> Result<ProfileValue, HardyError> {
        if !(t > 0.0) {
            return Err(HardyError::NonPositiveT(t));
        }
        Ok(self.ln_hardy_at_ln_t(t.ln()))
    }

    /// `ln F(e^u)`; valid for `u` below the `f64` range of `t` as well.
    pub fn ln_hardy_at_ln_t(&self, u: f64) -> ProfileValue {
        let ln_eta = self.eta.ln();
        let u0 = self.interp.x()[0];
        if u >= ln_eta {
            ProfileValue {
                value: self.tails.ln_f_cap_tail,
                extrapolated: false,
            }
        } else if u < u0 {
            ProfileValue {
                value: self.ln_f_cap[0] + self.tail_slope * (u - u0),
                extrapolated: true,
            }
        } else {
            ProfileValue {
                value: self.interp.eval(u),
                extrapolated: false,
            }
        }
    }

    /// `F(t)`.
    pub fn hardy(&self, t: f64) -> Result<ProfileValue, HardyError> {
        let v = self.ln_hardy(t)?;
        Ok(ProfileValue {
            value: v.value.exp(),
            extrapolated: v.extrapolated,
        })
    }

    /// `ln f(e^u)`.
    pub fn ln_cumulative_at_ln_t(&self, u: f64) -> ProfileValue {
        if u >= self.eta.ln() {
            return ProfileValue {
                value: self.tails.f_tail.ln(),
                extrapolated: false,
            };
        }
        let lf = self.ln_hardy_at_ln_t(u);
        ProfileValue {
            value: lf.value - self.weight.ln_w_at_ln_t(u),
            extrapolated: lf.extrapolated,
        }
    }

    pub fn ln_cumulative(&self, t: f64) -> Result<ProfileValue, HardyError> {
        if !(t > 0.0) {
            return Err(HardyError::NonPositiveT(t));
        }
        Ok(self.ln_cumulative_at_ln_t(t.ln()))
    }

    /// `f(t)`.
    pub fn cumulative(&self, t: f64) -> Result<ProfileValue, HardyError> {
        let v = self.ln_cumulative(t)?;
        Ok(ProfileValue {
            value: v.value.exp(),
            extrapolated: v.extrapolated,
        })
    }

    /// `G(e^u)`.
    pub fn remainder_at_ln_t(&self, u: f64) -> ProfileValue {
        if u >= self.eta.ln() {
            return ProfileValue {
                value: self.mu,
                extrapolated: false,
            };
        }
        let lf = self.ln_cumulative_at_ln_t(u);
        let ln_f_eta = self.ln_f[self.ln_f.len() - 1];
        ProfileValue {
            value: self.mu + self.switching() * (ln_f_eta - lf.value),
            extrapolated: lf.extrapolated,
        }
    }

    /// `G(t)`.
    pub fn remainder(&self, t: f64) -> Result<ProfileValue, HardyError> {
        if !(t > 0.0) {
            return Err(HardyError::NonPositiveT(t));
        }
        Ok(self.remainder_at_ln_t(t.ln()))
    }

    /// `G` at the grid nodes by direct quadrature of `1/F` (interpolated),
    /// independent of the closed identity used for the stored values.
    pub fn g_by_quadrature(&self) -> Vec<f64> {
        let gl = GaussLegendre::new(8);
        let u = self.interp.x();
        let n = u.len();
        let mut out = vec![0.0; n];
        out[n - 1] = self.mu;
        let mut acc = self.mu;
        for i in (0..n - 1).rev() {
            acc += gl.integrate(u[i], u[i + 1], |x| (x - self.interp.eval(x)).exp());
            out[i] = acc;
        }
        out
    }

    /// Versioned JSON document `{meta, grid, f, F, G, tails}`.
    pub fn to_json(&self) -> Value {
        json!({
            "meta": {
                "format_version": PROFILE_FORMAT_VERSION,
                "weight": self.weight.spec().to_json(),
                "class": self.class,
                "eta": self.eta,
                "mu": self.mu,
                "options": self.options,
            },
            "grid": self.grid,
            "ln_f": self.ln_f,
            "ln_F": self.ln_f_cap,
            "f": self.f_values(),
            "F": self.f_cap_values(),
            "G": self.g,
            "tails": self.tails,
        })
    }

    /// Rebuilds a profile from [`HardyProfile::to_json`] output without
    /// repeating the quadrature.
    pub fn from_json(v: &Value) -> Result<Self, HardyError> {
        let bad = |m: &str| HardyError::Malformed(m.to_string());
        let meta = v.get("meta").ok_or_else(|| bad("missing meta"))?;
        let version = meta
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing format_version"))?;
        if version != PROFILE_FORMAT_VERSION as u64 {
            return Err(bad(&format!("unsupported format_version {version}")));
        }
        let spec = WeightSpec::from_json(meta.get("weight").ok_or_else(|| bad("missing weight"))?)?;
        let weight = make_weight(spec)?;
        let de = |key: &str, val: Option<&Value>| -> Result<Value, HardyError> {
            val.cloned().ok_or_else(|| bad(&format!("missing {key}")))
        };
        let class: WeightClass = serde_json::from_value(de("class", meta.get("class"))?)
            .map_err(|e| bad(&e.to_string()))?;
        let options: ProfileOptions = serde_json::from_value(de("options", meta.get("options"))?)
            .map_err(|e| bad(&e.to_string()))?;
        let num = |key: &str| {
            meta.get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| bad(key))
        };
        let eta = num("eta")?;
        let mu = num("mu")?;
        let vec = |key: &str| -> Result<Vec<f64>, HardyError> {
            serde_json::from_value(de(key, v.get(key))?).map_err(|e| bad(&e.to_string()))
        };
        let grid = vec("grid")?;
        let ln_f = vec("ln_f")?;
        let ln_f_cap = vec("ln_F")?;
        let g = vec("G")?;
        let tails: TailConstants = serde_json::from_value(de("tails", v.get("tails"))?)
            .map_err(|e| bad(&e.to_string()))?;
        let n = grid.len();
        if n < 2 || ln_f.len() != n || ln_f_cap.len() != n || g.len() != n {
            return Err(bad("array lengths disagree"));
        }
        let ln_t: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
        let interp = Pchip::new(ln_t.clone(), ln_f_cap.clone());
        let lowest = grid
            .iter()
            .take_while(|&&t| t <= 10.0 * grid[0])
            .count()
            .max(3)
            .min(n);
        let (tail_slope, _) = fit_line(&ln_t[..lowest], &ln_f_cap[..lowest]);
        Ok(Self {
            weight,
            class,
            eta,
            mu,
            options,
            grid,
            ln_f,
            ln_f_cap,
            g,
            tails,
            interp,
            tail_slope,
        })
    }

    /// CSV with columns `t, f, F, G, F·G²` at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,f,F,G,FG2\n");
        for i in 0..self.grid.len() {
            let fg2 = (self.ln_f_cap[i] + 2.0 * self.g[i].ln()).exp();
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.grid[i],
                self.ln_f[i].exp(),
                self.ln_f_cap[i].exp(),
                self.g[i],
                fg2
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub max_rel_error: f64,
    pub worst_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub tol: f64,
    pub checks: Vec<IdentityCheck>,
    pub nodes_checked: usize,
}

/// Checks the three derivative identities linking `f`, `F` and `G` by
/// seven-point differences in `ln t` over interior grid nodes.
pub fn verify_identities(p: &HardyProfile, tol: f64) -> Result<IdentityReport, HardyError> {
    verify_identities_on(p, tol, None)
}

/// As [`verify_identities`], restricted to nodes inside `range`.
pub fn verify_identities_on(
    p: &HardyProfile,
    tol: f64,
    range: Option<(f64, f64)>,
) -> Result<IdentityReport, HardyError> {
    if !(tol > 0.0) {
        return Err(HardyError::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let u = p.interp.x();
    let n = u.len();
    let s = p.switching();
    let names = [
        "d ln f/dt = s/F",
        "d ln G/dt = -1/(F G)",
        "d(1/G)/dt = 1/(F G^2)",
    ];
    let mut checks: Vec<IdentityCheck> = names
        .iter()
        .map(|name| IdentityCheck {
            identity: name.to_string(),
            max_rel_error: 0.0,
            worst_t: f64::NAN,
        })
        .collect();
    let ln_g: Vec<f64> = p.g.iter().map(|g| g.ln()).collect();
    let inv_g: Vec<f64> = p.g.iter().map(|g| 1.0 / g).collect();
    let mut count = 0;
    for i in 3..n.saturating_sub(3) {
        let t = p.grid[i];
        if let Some((lo, hi)) = range {
            if t < lo || t > hi {
                continue;
            }
        }
        count += 1;
        let cw = derivative_weights(u[i], &u[i - 3..=i + 3]);
        let d = |y: &[f64]| (0..7).map(|k| cw[k] * y[i - 3 + k]).sum::<f64>();
        // u-derivatives equal t times the t-derivatives.
        let t_over_f = (t.ln() - p.ln_f_cap[i]).exp();
        let g = p.g[i];
        let pairs = [
            (d(&p.ln_f), s * t_over_f),
            (d(&ln_g), -t_over_f / g),
            (d(&inv_g), t_over_f / (g * g)),
        ];
        for (check, (lhs, rhs)) in checks.iter_mut().zip(pairs) {
            let err = (lhs - rhs).abs() / rhs.abs();
            if err > check.max_rel_error || check.worst_t.is_nan() {
                check.max_rel_error = err;
                check.worst_t = t;
            }
        }
    }
    for c in &checks {
        if c.max_rel_error > tol {
            return Err(HardyError::ToleranceExceeded {
                identity: c.identity.clone(),
                t: c.worst_t,
                rel_error: c.max_rel_error,
                tol,
            });
        }
    }
    Ok(IdentityReport {
        tol,
        checks,
        nodes_checked: count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub fit_range: (f64, f64),
    /// Max of `|ln F − fit| / |ln F|` over the fitted nodes.
    pub residual: f64,
}

/// Least-squares power law `F ≈ c·t^k` over the lowest two decades.
pub fn estimate_f_asymptotics(p: &HardyProfile) -> Result<AsymptoticsFit, HardyError> {
    let needed = 1e-6 * p.eta;
    if p.min_t() > needed * (1.0 + 1e-12) {
        return Err(HardyError::InsufficientGrid {
            t_min: p.min_t(),
            needed,
        });
    }
    let lo = p.min_t();
    estimate_f_asymptotics_on(p, lo, 100.0 * lo)
}

/// Least-squares power law `F ≈ c·t^k` over grid nodes in `[t_lo, t_hi]`.
pub fn estimate_f_asymptotics_on(
    p: &HardyProfile,
    t_lo: f64,
    t_hi: f64,
) -> Result<AsymptoticsFit, HardyError> {
    if t_lo < p.min_t() * (1.0 - 1e-12) {
        return Err(HardyError::InsufficientGrid {
            t_min: p.min_t(),
            needed: t_lo,
        });
    }
    let tol = 1e-9;
    let idx: Vec<usize> = (0..p.grid.len())
        .filter(|&i| p.grid[i] >= t_lo * (1.0 - tol) && p.grid[i] <= t_hi * (1.0 + tol))
        .collect();
    if idx.len() < 3 {
        return Err(HardyError::InvalidParameter(format!(
            "fewer than 3 grid nodes in [{t_lo:e}, {t_hi:e}]"
        )));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| p.grid[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| p.ln_f_cap[i]).collect();
    let (exponent, intercept) = fit_line(&xs, &ys);
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + exponent * x)).abs() / y.abs())
        .fold(0.0, f64::max);
    if residual > 0.05 {
        return Err(HardyError::FitRejected { residual, exponent });
    }
    Ok(AsymptoticsFit {
        exponent,
        coefficient: intercept.exp(),
        fit_range: (t_lo, t_hi),
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KSup {
    Finite(f64),
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AdmissibilityVerdict {
    Admissible { k: f64 },
    NotAdmissible,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub k_curve: Vec<(f64, f64)>,
    pub k_sup: KSup,
    /// Fitted slope of `ln K` against `ln(1/t)` over the last two decades.
    pub trend_slope: Option<f64>,
    /// `(t, √t·G(t))` with `μ = 1`.
    pub g_bound_curve: Vec<(f64, f64)>,
    pub verdict: AdmissibilityVerdict,
}

/// Slope above which growth of `K(t)` toward 0 is certified.
pub const ADMISSIBILITY_DIVERGENT_SLOPE: f64 = 0.25;
/// Slope at or below which `K(t)` is accepted as bounded.
pub const ADMISSIBILITY_BOUNDED_SLOPE: f64 = 0.02;

/// Tabulates `K(t) = √t·ln ∫_t^η 1/w` (P) or `K(t) = −√t·ln ∫_0^t 1/w` (Q)
/// down to `t_min` and classifies its trend.
pub fn check_admissible(
    w: &Weight,
    class: &WeightClass,
    eta: f64,
    t_min: f64,
) -> Result<AdmissibilityReport, HardyError> {
    if !(t_min > 0.0 && t_min < eta) {
        return Err(HardyError::InvalidParameter(format!(
            "need 0 < t_min < eta, got t_min = {t_min}, eta = {eta}"
        )));
    }
    let decades = (eta / t_min).log10();
    let n = ((decades * 40.0).ceil() as usize).max(64);
    let ts = log_grid(t_min, eta, n);
    let rtol = 1e-12;
    let pieces: Vec<f64> = ts
        .windows(2)
        .map(|ab| integrate_ln(|s| -w.ln_w(s), ab[0], ab[1], rtol, 2000).map(|r| r.ln_value))
        .collect::<Result<_, _>>()?;
    // ln of the defining integral at each node, and ln f with μ = 1.
    let mut ln_i = vec![f64::NEG_INFINITY; n];
    let mut ln_f = vec![0.0; n];
    let s = switching(class) as f64;
    match class.kind {
        ClassKind::P => {
            for i in (0..n - 1).rev() {
                ln_i[i] = ln_add(ln_i[i + 1], pieces[i]);
            }
            for i in 0..n {
                ln_f[i] = ln_add(0.0, ln_i[i]);
            }
        }
        ClassKind::Q => {
            ln_i[0] = ln_head_integral(w, ts[0], rtol)?;
            for i in 1..n {
                ln_i[i] = ln_add(ln_i[i - 1], pieces[i - 1]);
            }
            ln_f.clone_from(&ln_i);
        }
    }
    let k_curve: Vec<(f64, f64)> = (0..n)
        .filter(|&i| ln_i[i].is_finite())
        .map(|i| (ts[i], -s * ts[i].sqrt() * ln_i[i]))
        .collect();
    let ln_f_eta = ln_f[n - 1];
    let g_bound_curve: Vec<(f64, f64)> = (0..n)
        .map(|i| (ts[i], ts[i].sqrt() * (1.0 + s * (ln_f_eta - ln_f[i]))))
        .collect();

    let window_hi = t_min * 100.0;
    let tail: Vec<(f64, f64)> = k_curve
        .iter()
        .copied()
        .filter(|&(t, k)| t <= window_hi && k > 0.0)
        .collect();
    let k_max = k_curve.iter().map(|&(_, k)| k).fold(0.0, f64::max);
    let (trend_slope, verdict, k_sup) = if tail.len() < 5 {
        // K is non-positive near 0, so the defining integral is at most 1
        // there and the growth bound holds trivially.
        (
            None,
            AdmissibilityVerdict::Admissible { k: k_max },
            KSup::Finite(k_max),
        )
    } else {
        let xs: Vec<f64> = tail.iter().map(|(t, _)| -t.ln()).collect();
        let ys: Vec<f64> = tail.iter().map(|(_, k)| k.ln()).collect();
        let (slope, _) = fit_line(&xs, &ys);
        if slope > ADMISSIBILITY_DIVERGENT_SLOPE {
            (
                Some(slope),
                AdmissibilityVerdict::NotAdmissible,
                KSup::Divergent,
            )
        } else if slope <= ADMISSIBILITY_BOUNDED_SLOPE {
            (
                Some(slope),
                AdmissibilityVerdict::Admissible { k: k_max },
                KSup::Finite(k_max),
            )
        } else {
            (
                Some(slope),
                AdmissibilityVerdict::Inconclusive,
                KSup::Finite(k_max),
            )
        }
    };
    Ok(AdmissibilityReport {
        k_curve,
        k_sup,
        trend_slope,
        g_bound_curve,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fg2Report {
    pub verdict: bool,
    pub reference_value: f64,
    pub trace: Vec<(f64, f64)>,
}

/// Whether `F·G²` falls below `10⁻³` of its value at `η/2` along the grid
/// tail with a decreasing trend.
pub fn check_fg2_vanishes(p: &HardyProfile) -> Fg2Report {
    let n = p.grid.len();
    let ln_fg2: Vec<f64> = (0..n).map(|i| p.ln_f_cap[i] + 2.0 * p.g[i].ln()).collect();
    let u_half = (p.eta / 2.0).ln();
    let reference = p.ln_hardy_at_ln_t(u_half).value + 2.0 * p.remainder_at_ln_t(u_half).value.ln();
    let stride = (n / 128).max(1);
    let mut trace: Vec<(f64, f64)> = (0..n)
        .step_by(stride)
        .map(|i| (p.grid[i], ln_fg2[i].exp()))
        .collect();
    if trace.last().map(|x| x.0) != Some(p.grid[n - 1]) {
        trace.push((p.grid[n - 1], ln_fg2[n - 1].exp()));
    }
    // Decreasing toward 0 across the lowest three decade marks.
    let at = |t: f64| {
        let i = p.grid.partition_point(|&g| g < t).min(n - 1);
        ln_fg2[i]
    };
    let t0 = p.grid[0];
    let trend = ln_fg2[0] < at(10.0 * t0) && at(10.0 * t0) < at(100.0 * t0);
    let small = ln_fg2[0] < reference + 1e-3f64.ln();
    Fg2Report {
        verdict: trend && small,
        reference_value: reference.exp(),
        trace,
    }
}

/// Whether tabulated `F` falls below `10⁻⁶·max F` at the smallest node.
/// Requires a monotone weight.
pub fn check_lim_f_zero(p: &HardyProfile, mono: &MonotoneReport) -> Result<bool, HardyError> {
    if mono.sign == Monotonicity::Mixed {
        return Err(HardyError::HypothesisNotMet(format!(
            "w' changes sign near {:?}",
            mono.witnesses
        )));
    }
    let ln_max = p.ln_f_cap.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(p.ln_f_cap[0] < ln_max + 1e-6f64.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub t: f64,
    pub f_cap_eta0: f64,
    pub f_cap_half: f64,
    pub g_eta0: f64,
    pub g_half: f64,
}

/// `F` and `G` at the probe points for cut-offs `η₀` and `η₀/2`.
pub fn eta_sensitivity(
    w: &Weight,
    class: &WeightClass,
    eta0: f64,
    mu: f64,
    probes: &[f64],
    options: ProfileOptions,
) -> Result<Vec<SensitivityRow>, HardyError> {
    let full = build_profile(w, class, eta0, mu, options)?;
    let half = build_profile(w, class, eta0 / 2.0, mu, options)?;
    probes
        .iter()
        .map(|&t| {
            Ok(SensitivityRow {
                t,
                f_cap_eta0: full.hardy(t)?.value,
                f_cap_half: half.hardy(t)?.value,
                g_eta0: full.remainder(t)?.value,
                g_half: half.remainder(t)?.value,
            })
        })
        .collect()
}

/// `μ` that activates the closed forms for `t^α` with `α > 1`.
pub fn closed_form_mu(w: &Weight, eta: f64) -> Option<f64> {
    match w.spec().family {
        WeightFamily::Power { alpha } if alpha > 1.0 => Some(eta.powf(1.0 - alpha) / (alpha - 1.0)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::classify;

    fn profile(spec: &str, eta: f64, mu: f64) -> HardyProfile {
        let w = make_weight(spec.parse().unwrap()).unwrap();
        let c = classify(&w, eta).unwrap();
        build_profile(&w, &c, eta, mu, ProfileOptions::default()).unwrap()
    }

    #[test]
    fn power_two_is_linear() {
        let p = profile("power:2", 0.5, 2.0);
        for &t in p.grid() {
            let f = p.hardy(t).unwrap().value;
            assert!((f / t - 1.0).abs() < 1e-10, "{t}: {f}");
        }
        assert_eq!(p.hardy(0.7).unwrap().value, 0.5);
        assert_eq!(p.remainder(0.7).unwrap().value, 2.0);
        let g = p.remainder(0.01).unwrap().value;
        assert!((g - (2.0 + (0.5f64 / 0.01).ln())).abs() < 1e-9);
    }

    #[test]
    fn constant_weight_closed_forms() {
        let p = profile("const:1", 0.25, 1.0);
        let v = p.hardy(0.1).unwrap();
        assert!((v.value - 0.1).abs() < 1e-12 && !v.extrapolated);
        assert!((p.tails().f_cap_tail - 0.25).abs() < 1e-15);
        let below = p.hardy(p.min_t() / 10.0).unwrap();
        assert!(below.extrapolated);
        assert!((below.value / (p.min_t() / 10.0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn g_quadrature_cross_check() {
        let p = profile("exppow:-1,0.5", 0.25, 1.0);
        let gq = p.g_by_quadrature();
        for (a, b) in gq.iter().zip(p.g_values()) {
            assert!((a - b).abs() <= 1e-7 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn json_round_trip() {
        let p = profile("exppow:1,0.5", 0.25, 1.0);
        let back = HardyProfile::from_json(&p.to_json()).unwrap();
        for t in [1e-9, 1e-4, 0.1, 0.3] {
            assert_eq!(p.hardy(t).unwrap(), back.hardy(t).unwrap());
        }
        assert!(p.to_csv().lines().count() == p.grid().len() + 1);
    }

    #[test]
    fn class_mismatch_detected() {
        let w = make_weight(WeightSpec::power(2.0)).unwrap();
        let r = build_profile(&w, &WeightClass::q(), 0.5, 1.0, ProfileOptions::default());
        assert!(matches!(r, Err(HardyError::ClassMismatch(_))));
    }

    #[test]
    fn admissibility_examples() {
        let verdict = |spec: &str| {
            let w = make_weight(spec.parse().unwrap()).unwrap();
            let c = classify(&w, 0.25).unwrap();
            check_admissible(&w, &c, 0.25, 0.25e-8).unwrap().verdict
        };
        assert_eq!(verdict("exppow:-1,1"), AdmissibilityVerdict::NotAdmissible);
        assert_eq!(verdict("exppow:1,1"), AdmissibilityVerdict::NotAdmissible);
        assert!(matches!(
            verdict("exppow:-1,0.5"),
            AdmissibilityVerdict::Admissible { .. }
        ));
        assert!(matches!(
            verdict("exppow:1,0.5"),
            AdmissibilityVerdict::Admissible { .. }
        ));
        assert!(matches!(
            verdict("power:0.5"),
            AdmissibilityVerdict::Admissible { .. }
        ));
    }
}
