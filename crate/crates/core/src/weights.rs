//! One-dimensional boundary weights `w(t)`, their P/Q classification and
//! shape diagnostics (doubling, monotonicity).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::expr::{Expr, ParseError};
use crate::quadrature::{sum_panels_to_zero, PanelRules, PanelTrend, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("invalid weight parameter: {0}")]
    InvalidParameter(String),
    #[error("expression weight is not strictly positive at t = {t:e} (value {value})")]
    NonPositiveExpression { t: f64, value: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("numeric P/Q classification inconclusive after {panels} panels (ln partial sum {ln_partial})")]
    Inconclusive { panels: usize, ln_partial: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("malformed weight specification: {0}")]
    Malformed(String),
}

/// `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    fn from_f64(v: f64) -> Result<Self, WeightError> {
        if v == 1.0 {
            Ok(Sign::Plus)
        } else if v == -1.0 {
            Ok(Sign::Minus)
        } else {
            Err(WeightError::InvalidParameter(format!(
                "sign must be +1 or -1, got {v}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightFamily {
    /// `t^α`
    Power { alpha: f64 },
    /// `exp(sign · t^{-β})`
    ExpPower { sign: Sign, beta: f64 },
    /// `t^α · exp(sign / t)`
    PowerTimesExp { alpha: f64, sign: Sign },
    /// `c`
    Constant { c: f64 },
    /// A user formula in `t`.
    Expression { text: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub family: WeightFamily,
    pub label: String,
}

impl WeightSpec {
    pub fn new(family: WeightFamily) -> Self {
        let label = default_label(&family);
        Self { family, label }
    }

    pub fn power(alpha: f64) -> Self {
        Self::new(WeightFamily::Power { alpha })
    }

    pub fn exp_power(sign: f64, beta: f64) -> Self {
        let sign = if sign < 0.0 { Sign::Minus } else { Sign::Plus };
        Self::new(WeightFamily::ExpPower { sign, beta })
    }

    pub fn power_times_exp(alpha: f64, sign: f64) -> Self {
        let sign = if sign < 0.0 { Sign::Minus } else { Sign::Plus };
        Self::new(WeightFamily::PowerTimesExp { alpha, sign })
    }

    pub fn constant(c: f64) -> Self {
        Self::new(WeightFamily::Constant { c })
    }

    pub fn expression(text: &str) -> Self {
        Self::new(WeightFamily::Expression {
            text: text.to_string(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `{"family": ..., "params": {...}, "label": ...}`
    pub fn to_json(&self) -> Value {
        let (family, params) = match &self.family {
            WeightFamily::Power { alpha } => ("power", json!({ "alpha": alpha })),
            WeightFamily::ExpPower { sign, beta } => {
                ("exp_power", json!({ "sign": sign.value(), "beta": beta }))
            }
            WeightFamily::PowerTimesExp { alpha, sign } => (
                "power_times_exp",
                json!({ "alpha": alpha, "sign": sign.value() }),
            ),
            WeightFamily::Constant { c } => ("constant", json!({ "c": c })),
            WeightFamily::Expression { text } => ("expression", json!({ "text": text })),
        };
        json!({ "family": family, "params": params, "label": self.label })
    }

    pub fn from_json(v: &Value) -> Result<Self, WeightError> {
        let obj = v
            .as_object()
            .ok_or_else(|| WeightError::Malformed("expected a JSON object".into()))?;
        let family = obj
            .get("family")
            .and_then(Value::as_str)
            .ok_or_else(|| WeightError::Malformed("missing string field 'family'".into()))?;
        let empty = Map::new();
        let params = match obj.get("params") {
            Some(Value::Object(m)) => m,
            None => &empty,
            Some(_) => return Err(WeightError::Malformed("'params' must be an object".into())),
        };
        let num = |key: &str| -> Result<f64, WeightError> {
            params
                .get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| WeightError::Malformed(format!("missing numeric param '{key}'")))
        };
        let fam = match family {
            "power" => WeightFamily::Power {
                alpha: num("alpha")?,
            },
            "exp_power" => WeightFamily::ExpPower {
                sign: Sign::from_f64(num("sign")?)?,
                beta: num("beta")?,
            },
            "power_times_exp" => WeightFamily::PowerTimesExp {
                alpha: num("alpha")?,
                sign: Sign::from_f64(num("sign")?)?,
            },
            "constant" => WeightFamily::Constant { c: num("c")? },
            "expression" => WeightFamily::Expression {
                text: params
                    .get("text")
                    .and_then(Value::as_str)
                    .ok_or_else(|| WeightError::Malformed("missing string param 'text'".into()))?
                    .to_string(),
            },
            other => return Err(WeightError::Malformed(format!("unknown family '{other}'"))),
        };
        let mut spec = WeightSpec::new(fam);
        if let Some(label) = obj.get("label").and_then(Value::as_str) {
            spec.label = label.to_string();
        }
        Ok(spec)
    }
}

fn default_label(f: &WeightFamily) -> String {
    match f {
        WeightFamily::Power { alpha } => format!("t^{alpha}"),
        WeightFamily::ExpPower { sign, beta } => {
            let s = if *sign == Sign::Plus { "" } else { "-" };
            format!("exp({s}t^-{beta})")
        }
        WeightFamily::PowerTimesExp { alpha, sign } => {
            let s = if *sign == Sign::Plus { "" } else { "-" };
            format!("t^{alpha}*exp({s}1/t)")
        }
        WeightFamily::Constant { c } => format!("{c}"),
        WeightFamily::Expression { text } => text.clone(),
    }
}

impl Serialize for WeightSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        match &v {
            Value::String(short) => short.parse().map_err(serde::de::Error::custom),
            _ => WeightSpec::from_json(&v).map_err(serde::de::Error::custom),
        }
    }
}

/// Short form used on the command line: `power:0.5`, `exppow:-1,1`,
/// `powexp:2,-1`, `const:1`, `expr:1+t^2`.
impl FromStr for WeightSpec {
    type Err = WeightError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, rest) = s
            .split_once(':')
            .ok_or_else(|| WeightError::Malformed(format!("expected family:params, got '{s}'")))?;
        let nums = || -> Result<Vec<f64>, WeightError> {
            rest.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| WeightError::Malformed(format!("bad number '{p}'")))
                })
                .collect()
        };
        let arity = |v: &[f64], n: usize| {
            if v.len() == n {
                Ok(())
            } else {
                Err(WeightError::Malformed(format!(
                    "'{head}' takes {n} parameter(s), got {}",
                    v.len()
                )))
            }
        };
        let family = match head {
            "power" | "pow" => {
                let v = nums()?;
                arity(&v, 1)?;
                WeightFamily::Power { alpha: v[0] }
            }
            "exppow" | "exp_power" => {
                let v = nums()?;
                arity(&v, 2)?;
                WeightFamily::ExpPower {
                    sign: Sign::from_f64(v[0])?,
                    beta: v[1],
                }
            }
            "powexp" | "power_times_exp" => {
                let v = nums()?;
                arity(&v, 2)?;
                WeightFamily::PowerTimesExp {
                    alpha: v[0],
                    sign: Sign::from_f64(v[1])?,
                }
            }
            "const" | "constant" => {
                let v = nums()?;
                arity(&v, 1)?;
                WeightFamily::Constant { c: v[0] }
            }
            "expr" | "expression" => WeightFamily::Expression {
                text: rest.to_string(),
            },
            other => return Err(WeightError::Malformed(format!("unknown family '{other}'"))),
        };
        Ok(WeightSpec::new(family))
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            WeightFamily::Power { alpha } => write!(f, "power:{alpha}"),
            WeightFamily::ExpPower { sign, beta } => write!(f, "exppow:{},{beta}", sign.value()),
            WeightFamily::PowerTimesExp { alpha, sign } => {
                write!(f, "powexp:{alpha},{}", sign.value())
            }
            WeightFamily::Constant { c } => write!(f, "const:{c}"),
            WeightFamily::Expression { text } => write!(f, "expr:{text}"),
        }
    }
}

/// A validated weight with evaluators for `w`, `w'` and `ln w`.
#[derive(Debug, Clone)]
pub struct Weight {
    spec: WeightSpec,
    expr: Option<Arc<Expr>>,
}

/// Points of the positivity probe for expression weights.
const PROBE_POINTS: usize = 400;

/// Builds a weight from its specification, validating parameters.
pub fn make_weight(spec: WeightSpec) -> Result<Weight, WeightError> {
    let mut expr = None;
    match &spec.family {
        WeightFamily::Power { alpha } => finite("alpha", *alpha)?,
        WeightFamily::ExpPower { beta, .. } => {
            finite("beta", *beta)?;
            if *beta <= 0.0 {
                return Err(WeightError::InvalidParameter(format!(
                    "beta must be positive, got {beta}"
                )));
            }
        }
        WeightFamily::PowerTimesExp { alpha, .. } => finite("alpha", *alpha)?,
        WeightFamily::Constant { c } => {
            finite("c", *c)?;
            if *c <= 0.0 {
                return Err(WeightError::InvalidParameter(format!(
                    "c must be positive, got {c}"
                )));
            }
        }
        WeightFamily::Expression { text } => {
            let e = Expr::parse(text)?;
            for t in log_grid(1e-12, 1.0, PROBE_POINTS) {
                let value = e.eval(t);
                if !(value > 0.0 && value.is_finite()) {
                    return Err(WeightError::NonPositiveExpression { t, value });
                }
            }
            expr = Some(Arc::new(e));
        }
    }
    Ok(Weight { spec, expr })
}

fn finite(name: &str, v: f64) -> Result<(), WeightError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(WeightError::InvalidParameter(format!(
            "{name} must be finite"
        )))
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

impl Weight {
    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn label(&self) -> &str {
        &self.spec.label
    }

    pub fn is_expression(&self) -> bool {
        self.expr.is_some()
    }

    /// `ln w(t)`.
    pub fn ln_w(&self, t: f64) -> f64 {
        match &self.spec.family {
            WeightFamily::Power { alpha } => alpha * t.ln(),
            WeightFamily::ExpPower { sign, beta } => sign.value() * t.powf(-beta),
            WeightFamily::PowerTimesExp { alpha, sign } => alpha * t.ln() + sign.value() / t,
            WeightFamily::Constant { c } => c.ln(),
            WeightFamily::Expression { .. } => self.eval_expr(t).ln(),
        }
    }

    /// `ln w(e^u)`, usable where `t = e^u` underflows.
    pub fn ln_w_at_ln_t(&self, u: f64) -> f64 {
        match &self.spec.family {
            WeightFamily::Power { alpha } => alpha * u,
            WeightFamily::ExpPower { sign, beta } => sign.value() * (-beta * u).exp(),
            WeightFamily::PowerTimesExp { alpha, sign } => alpha * u + sign.value() * (-u).exp(),
            WeightFamily::Constant { c } => c.ln(),
            WeightFamily::Expression { .. } => self.eval_expr(u.exp()).ln(),
        }
    }

    /// `w(t)`.
    pub fn w(&self, t: f64) -> f64 {
        match &self.spec.family {
            WeightFamily::Power { alpha } => t.powf(*alpha),
            WeightFamily::Constant { c } => *c,
            WeightFamily::Expression { .. } => self.eval_expr(t),
            _ => self.ln_w(t).exp(),
        }
    }

    /// `w'(t)`: closed form for the analytic families, central differences
    /// with step `max(1e-6·t, 1e-12)` for expressions.
    pub fn dw(&self, t: f64) -> f64 {
        match &self.spec.family {
            WeightFamily::Power { alpha } => {
                if *alpha == 0.0 {
                    0.0
                } else {
                    alpha * t.powf(alpha - 1.0)
                }
            }
            WeightFamily::Constant { .. } => 0.0,
            WeightFamily::Expression { .. } => self.fd_derivative(t),
            _ => self.w(t) * self.d_ln_w(t),
        }
    }

    /// `w'(t)/w(t)`; finite even where `w` itself over- or underflows.
    pub fn d_ln_w(&self, t: f64) -> f64 {
        match &self.spec.family {
            WeightFamily::Power { alpha } => alpha / t,
            WeightFamily::ExpPower { sign, beta } => -sign.value() * beta * t.powf(-beta - 1.0),
            WeightFamily::PowerTimesExp { alpha, sign } => alpha / t - sign.value() / (t * t),
            WeightFamily::Constant { .. } => 0.0,
            WeightFamily::Expression { .. } => self.fd_derivative(t) / self.eval_expr(t),
        }
    }

    fn eval_expr(&self, t: f64) -> f64 {
        self.expr.as_ref().map(|e| e.eval(t)).unwrap_or(f64::NAN)
    }

    fn fd_derivative(&self, t: f64) -> f64 {
        let h = (1e-6 * t).max(1e-12);
        if t - h > 0.0 {
            (self.eval_expr(t + h) - self.eval_expr(t - h)) / (2.0 * h)
        } else {
            (self.eval_expr(t + h) - self.eval_expr(t)) / h
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    /// `1/w` is not integrable at 0.
    P,
    /// `1/w` is integrable at 0.
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evidence {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightClass {
    pub kind: ClassKind,
    pub evidence: Evidence,
    /// `∫_0^η 1/w` when finite; for divergent integrals, the partial sum
    /// reached by the panel scan. `None` when it overflows.
    pub integral_estimate: Option<f64>,
    /// Natural log of `integral_estimate`; always finite for numeric verdicts.
    pub ln_integral_estimate: f64,
}

impl WeightClass {
    pub fn p() -> Self {
        Self {
            kind: ClassKind::P,
            evidence: Evidence::Analytic,
            integral_estimate: None,
            ln_integral_estimate: f64::INFINITY,
        }
    }

    pub fn q() -> Self {
        Self {
            kind: ClassKind::Q,
            evidence: Evidence::Analytic,
            integral_estimate: None,
            ln_integral_estimate: f64::NAN,
        }
    }

    /// The switching sign: −1 on P, +1 on Q.
    pub fn switching(&self) -> i32 {
        switching(self)
    }
}

/// The switching sign: −1 on P, +1 on Q.
pub fn switching(class: &WeightClass) -> i32 {
    match class.kind {
        ClassKind::P => -1,
        ClassKind::Q => 1,
    }
}

/// P/Q verdict: closed-form for the analytic families, numeric otherwise.
pub fn classify(w: &Weight, eta: f64) -> Result<WeightClass, WeightError> {
    if !(eta > 0.0) {
        return Err(WeightError::InvalidParameter(format!(
            "eta must be positive, got {eta}"
        )));
    }
    let kind = match &w.spec.family {
        WeightFamily::Power { alpha } => {
            if *alpha >= 1.0 {
                ClassKind::P
            } else {
                ClassKind::Q
            }
        }
        WeightFamily::ExpPower { sign, .. } | WeightFamily::PowerTimesExp { sign, .. } => {
            match sign {
                Sign::Minus => ClassKind::P,
                Sign::Plus => ClassKind::Q,
            }
        }
        WeightFamily::Constant { .. } => ClassKind::Q,
        WeightFamily::Expression { .. } => return classify_numeric(w, eta),
    };
    let (integral_estimate, ln_integral_estimate) = match (kind, &w.spec.family) {
        (ClassKind::Q, WeightFamily::Power { alpha }) => {
            let v = eta.powf(1.0 - alpha) / (1.0 - alpha);
            (Some(v), v.ln())
        }
        (ClassKind::Q, WeightFamily::Constant { c }) => (Some(eta / c), (eta / c).ln()),
        (ClassKind::P, _) => (None, f64::INFINITY),
        _ => match classify_numeric(w, eta) {
            Ok(c) => (c.integral_estimate, c.ln_integral_estimate),
            Err(_) => (None, f64::NAN),
        },
    };
    Ok(WeightClass {
        kind,
        evidence: Evidence::Analytic,
        integral_estimate,
        ln_integral_estimate,
    })
}

/// Numeric P/Q verdict from halving panels `[η·2^{-k-1}, η·2^{-k}]`,
/// `k < 60`, of `∫ 1/w`, summed in log-space.
pub fn classify_numeric(w: &Weight, eta: f64) -> Result<WeightClass, WeightError> {
    let rules = PanelRules::default();
    let trend = sum_panels_to_zero(|s| -w.ln_w(s), eta, &rules)?;
    let (kind, ln_est) = match trend {
        PanelTrend::Convergent { ln_total, .. } => (ClassKind::Q, ln_total),
        PanelTrend::Divergent { ln_partial, .. } => (ClassKind::P, ln_partial),
        PanelTrend::Ambiguous { ln_partial, panels } => {
            return Err(WeightError::Inconclusive { panels, ln_partial })
        }
    };
    let est = ln_est.exp();
    Ok(WeightClass {
        kind,
        evidence: Evidence::Numeric,
        integral_estimate: est.is_finite().then_some(est),
        ln_integral_estimate: ln_est,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DoublingVerdict {
    Doubling { c: f64 },
    NonDoubling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    /// min and max of `w(t)/w(2t)` over the probe grid (may under/overflow;
    /// the log fields are always finite).
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ln_ratio_min: f64,
    pub ln_ratio_max: f64,
    pub t_grid: Vec<f64>,
    pub verdict: DoublingVerdict,
}

/// Span of `w(t)/w(2t)` beyond which a weight is declared non-doubling.
pub const DEFAULT_BLOWUP: f64 = 1e6;

pub fn is_doubling(w: &Weight, t_min: f64, t_max: f64) -> DoublingReport {
    is_doubling_with(w, t_min, t_max, DEFAULT_BLOWUP)
}

pub fn is_doubling_with(w: &Weight, t_min: f64, t_max: f64, blowup: f64) -> DoublingReport {
    let t_grid = log_grid(t_min, t_max, 200);
    let ln_r: Vec<f64> = t_grid
        .iter()
        .map(|&t| w.ln_w(t) - w.ln_w(2.0 * t))
        .collect();
    let ln_min = ln_r.iter().copied().fold(f64::INFINITY, f64::min);
    let ln_max = ln_r.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let span_blows_up = ln_max - ln_min > blowup.ln();
    // Trend toward t_min over the finest decade: |ln ratio| strictly growing
    // as t decreases, with a power-law rate.
    let finest: Vec<usize> = (0..t_grid.len())
        .filter(|&i| t_grid[i] <= 10.0 * t_min)
        .collect();
    let mut trending = false;
    if finest.len() >= 3 {
        let mags: Vec<f64> = finest.iter().map(|&i| ln_r[i].abs()).collect();
        let growing = mags.windows(2).all(|p| p[0] > p[1]);
        if growing && mags[mags.len() - 1] > 0.0 {
            let i0 = finest[0];
            let i1 = *finest.last().unwrap();
            let rate =
                (mags[0].ln() - mags[mags.len() - 1].ln()) / (t_grid[i1].ln() - t_grid[i0].ln());
            trending = rate >= 0.05;
        }
    }
    let verdict = if span_blows_up || trending {
        DoublingVerdict::NonDoubling
    } else {
        DoublingVerdict::Doubling {
            c: ln_max.max(-ln_min).exp(),
        }
    };
    DoublingReport {
        ratio_min: ln_min.exp(),
        ratio_max: ln_max.exp(),
        ln_ratio_min: ln_min,
        ln_ratio_max: ln_max,
        t_grid,
        verdict,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub sign: Monotonicity,
    /// Up to three points where the sampled `w'` changes sign.
    pub witnesses: Vec<f64>,
}

/// Samples the sign of `w'` on a log grid in `(η0·1e-10, η0)`.
pub fn check_monotone(w: &Weight, eta0: f64) -> MonotoneReport {
    let lo = (eta0 * 1e-10).max(1e-12);
    let grid = log_grid(lo, eta0 * (1.0 - 1e-9), 1024);
    let signs: Vec<i8> = grid
        .iter()
        .map(|&t| {
            let d = w.d_ln_w(t);
            if d > 0.0 {
                1
            } else if d < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect();
    let has_pos = signs.contains(&1);
    let has_neg = signs.contains(&-1);
    let mut witnesses = Vec::new();
    if has_pos && has_neg {
        let mut last: Option<(usize, i8)> = None;
        for (i, &s) in signs.iter().enumerate() {
            if s == 0 {
                continue;
            }
            if let Some((j, ls)) = last {
                if ls != s && witnesses.len() < 3 {
                    witnesses.push((grid[i] * grid[j]).sqrt());
                }
            }
            last = Some((i, s));
        }
    }
    let sign = match (has_pos, has_neg) {
        (true, true) => Monotonicity::Mixed,
        (false, true) => Monotonicity::NonIncreasing,
        _ => Monotonicity::NonDecreasing,
    };
    MonotoneReport { sign, witnesses }
}

/// The analytic families exercised by the test suites, with labels.
pub fn registry() -> Vec<WeightSpec> {
    vec![
        WeightSpec::constant(1.0),
        WeightSpec::power(0.5),
        WeightSpec::power(1.0),
        WeightSpec::power(2.0),
        WeightSpec::exp_power(-1.0, 0.5),
        WeightSpec::exp_power(1.0, 0.5),
        WeightSpec::exp_power(-1.0, 1.0),
        WeightSpec::exp_power(1.0, 1.0),
        WeightSpec::power_times_exp(2.0, -1.0),
        WeightSpec::power_times_exp(2.0, 1.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weight(s: &str) -> Weight {
        make_weight(s.parse().unwrap()).unwrap()
    }

    #[test]
    fn evaluators_closed_forms() {
        let w = weight("power:2");
        assert_eq!(w.w(0.5), 0.25);
        assert_eq!(w.dw(0.5), 1.0);
        let w = weight("exppow:-1,0.5");
        assert!((w.ln_w(0.01) + 10.0).abs() < 1e-12);
        let w = weight("const:1");
        assert_eq!(w.w(0.3), 1.0);
        assert_eq!(w.dw(0.3), 0.0);
        let w = weight("exppow:1,1");
        assert!((w.ln_w_at_ln_t(0.01f64.ln()) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn expression_derivative_by_differences() {
        let w = weight("expr:1 + t^2");
        let d = w.dw(0.3);
        assert!((d - 0.6).abs() < 1e-8, "{d}");
        assert!((w.ln_w(0.3) - 1.09f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(
            make_weight(WeightSpec::exp_power(1.0, 0.0)),
            Err(WeightError::InvalidParameter(_))
        ));
        assert!(matches!(
            make_weight(WeightSpec::constant(-2.0)),
            Err(WeightError::InvalidParameter(_))
        ));
        assert!(matches!(
            make_weight(WeightSpec::expression("t - 0.5")),
            Err(WeightError::NonPositiveExpression { .. })
        ));
        assert!(matches!(
            make_weight(WeightSpec::expression("t +")),
            Err(WeightError::Parse(_))
        ));
    }

    #[test]
    fn classification_examples() {
        let k = |s: &str, eta| classify(&weight(s), eta).unwrap().kind;
        assert_eq!(k("power:1", 0.5), ClassKind::P);
        assert_eq!(k("power:0.5", 0.5), ClassKind::Q);
        assert_eq!(k("exppow:1,1", 0.5), ClassKind::Q);
        assert_eq!(k("powexp:3,-1", 0.5), ClassKind::P);
        let c = classify(&weight("const:1"), 0.5).unwrap();
        assert_eq!(c.switching(), 1);
        assert_eq!(switching(&WeightClass::p()), -1);
    }

    #[test]
    fn numeric_path_on_expressions() {
        let c = classify(&weight("expr:t^0.5"), 0.5).unwrap();
        assert_eq!((c.kind, c.evidence), (ClassKind::Q, Evidence::Numeric));
        let exact = 2.0 * 0.5f64.sqrt();
        assert!((c.integral_estimate.unwrap() - exact).abs() < 1e-9 * exact);
        let c = classify(&weight("expr:t*(1+t)"), 0.5).unwrap();
        assert_eq!(c.kind, ClassKind::P);
        let c = classify(&weight("expr:t^2*(2+cos(t))"), 0.5).unwrap();
        assert_eq!(c.kind, ClassKind::P);
        // Underflows to 0 on the probe grid: use the analytic family instead.
        assert!(make_weight(WeightSpec::expression("exp(-1/t)")).is_err());
    }

    #[test]
    fn doubling_examples() {
        let r = is_doubling(&weight("power:2"), 1e-8, 0.5);
        match r.verdict {
            DoublingVerdict::Doubling { c } => assert!((c - 4.0).abs() < 1e-12),
            v => panic!("{v:?}"),
        }
        let r = is_doubling(&weight("exppow:-1,1"), 1e-4, 0.5);
        assert_eq!(r.verdict, DoublingVerdict::NonDoubling);
        let r = is_doubling(&weight("const:1"), 1e-8, 0.5);
        assert_eq!(r.verdict, DoublingVerdict::Doubling { c: 1.0 });
        // A slowly varying factor keeps a weight doubling.
        let r = is_doubling(&weight("expr:t*log(2/t)"), 1e-8, 0.25);
        assert!(
            matches!(r.verdict, DoublingVerdict::Doubling { .. }),
            "{r:?}"
        );
    }

    #[test]
    fn monotonicity_examples() {
        assert_eq!(
            check_monotone(&weight("power:2"), 0.25).sign,
            Monotonicity::NonDecreasing
        );
        assert_eq!(
            check_monotone(&weight("exppow:1,0.5"), 0.25).sign,
            Monotonicity::NonIncreasing
        );
        let r = check_monotone(&weight("expr:1+sin(1/t)*t^2"), 0.25);
        assert_eq!(r.sign, Monotonicity::Mixed);
        assert!(!r.witnesses.is_empty() && r.witnesses.len() <= 3);
    }

    #[test]
    fn json_and_short_forms_agree() {
        for spec in registry() {
            let back = WeightSpec::from_json(&spec.to_json()).unwrap();
            assert_eq!(back, spec);
            let again: WeightSpec = spec.to_string().parse().unwrap();
            assert_eq!(again.family, spec.family);
        }
        let v: Value = serde_json::from_str(
            r#"{"family": "expression", "params": {"text": "1+t"}, "label": "lin"}"#,
        )
        .unwrap();
        let s = WeightSpec::from_json(&v).unwrap();
        assert_eq!(s.label, "lin");
    }
}
