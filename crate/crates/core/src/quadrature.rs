//! Quadrature and interpolation primitives.
//!
//! Everything that integrates a reciprocal weight works with the logarithm of
//! the integrand: weights such as `exp(1/t)` overflow long before the grids
//! used here reach their smallest nodes, so integrals are returned as `ln ∫`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature on [{a:e}, {b:e}] did not reach rtol {rtol:e} within {max_subdivisions} subdivisions (relative error estimate {estimate:e})")]
    Budget {
        a: f64,
        b: f64,
        rtol: f64,
        max_subdivisions: usize,
        estimate: f64,
    },
    #[error("integrand is not finite at t = {t:e}")]
    NonFinite { t: f64 },
}

/// `ln(e^a + e^b)` without overflow.
pub fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a >= b`; `-inf` when the difference vanishes.
pub fn ln_sub(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// `ln Σ e^{x_i}`.
pub fn ln_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on the Legendre recurrence; accurate to
    /// round-off for the orders used here (n ≤ 64).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// ∫_a^b g for a smooth `g`.
    pub fn integrate(&self, a: f64, b: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * g(c + h * x))
            .sum::<f64>()
            * h
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

// Gauss–Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a log-space integration: `ln ∫`, and `ln` of the absolute error
/// estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnIntegral {
    pub ln_value: f64,
    pub ln_error: f64,
    pub evaluations: usize,
}

impl LnIntegral {
    pub const ZERO: LnIntegral = LnIntegral {
        ln_value: f64::NEG_INFINITY,
        ln_error: f64::NEG_INFINITY,
        evaluations: 0,
    };

    pub fn relative_error(&self) -> f64 {
        if self.ln_value == f64::NEG_INFINITY {
            0.0
        } else {
            (self.ln_error - self.ln_value).exp()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    ln_value: f64,
    ln_error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.ln_error == other.ln_error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ln_error
            .partial_cmp(&other.ln_error)
            .unwrap_or(Ordering::Equal)
    }
}

fn gk15_ln(ln_g: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<Segment, QuadratureError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut vals = [f64::NEG_INFINITY; 15];
    for (k, x) in XGK.iter().enumerate() {
        if k == 7 {
            vals[7] = ln_g(c);
        } else {
            vals[k] = ln_g(c - h * x);
            vals[14 - k] = ln_g(c + h * x);
        }
    }
    for (k, v) in vals.iter().enumerate() {
        if v.is_nan() || *v == f64::INFINITY {
            let x = if k <= 7 {
                c - h * XGK[k]
            } else {
                c + h * XGK[14 - k]
            };
            return Err(QuadratureError::NonFinite { t: x });
        }
    }
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok(Segment {
            a,
            b,
            ln_value: f64::NEG_INFINITY,
            ln_error: f64::NEG_INFINITY,
        });
    }
    let e: Vec<f64> = vals.iter().map(|v| (v - m).exp()).collect();
    let mut kron = WGK[7] * e[7];
    let mut gauss = WG[3] * e[7];
    for k in 0..7 {
        let pair = e[k] + e[14 - k];
        kron += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    let ln_h = h.abs().ln();
    let mut diff = (kron - gauss).abs();
    // Rounding in ln g of size eps·|ln g| limits the attainable relative
    // accuracy; differences below that level are noise.
    let scale = vals.iter().map(|v| v.abs()).fold(1.0f64, f64::max);
    if diff <= 50.0 * f64::EPSILON * scale * kron {
        diff = 0.0;
    }
    Ok(Segment {
        a,
        b,
        ln_value: m + ln_h + kron.ln(),
        ln_error: if diff > 0.0 {
            m + ln_h + diff.ln()
        } else {
            m + ln_h + kron.ln() - 36.0 * std::f64::consts::LN_10 / 2.0
        },
    })
}

/// `ln ∫_a^b exp(ln_g(s)) ds` by globally adaptive Gauss–Kronrod 7/15
/// bisection, with the sum of segments accumulated in log-space.
///
/// Segments whose own contribution is negligible against the running total
/// stop being refined, so exponentially peaked integrands (the reciprocal of
/// `e^{-1/t}` near `t = 0`) cost a logarithmic number of bisections.
pub fn integrate_ln(
    mut ln_g: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rtol: f64,
    max_subdivisions: usize,
) -> Result<LnIntegral, QuadratureError> {
    if b <= a {
        return Ok(LnIntegral::ZERO);
    }
    let first = gk15_ln(&mut ln_g, a, b)?;
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let ln_rtol = rtol.ln();
    let mut subdivisions = 0;
    loop {
        let (ln_value, ln_error) = totals(&heap);
        if ln_value == f64::NEG_INFINITY || ln_error - ln_value <= ln_rtol {
            return Ok(LnIntegral {
                ln_value,
                ln_error,
                evaluations,
            });
        }
        if subdivisions >= max_subdivisions {
            return Err(QuadratureError::Budget {
                a,
                b,
                rtol,
                max_subdivisions,
                estimate: (ln_error - ln_value).exp(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // The segment cannot be split further in floating point; keep it.
            heap.push(Segment {
                ln_error: f64::NEG_INFINITY,
                ..worst
            });
            continue;
        }
        heap.push(gk15_ln(&mut ln_g, worst.a, mid)?);
        heap.push(gk15_ln(&mut ln_g, mid, worst.b)?);
        evaluations += 30;
        subdivisions += 1;
    }
}

fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    let mut v = f64::NEG_INFINITY;
    let mut e = f64::NEG_INFINITY;
    for s in heap.iter() {
        v = ln_add(v, s.ln_value);
        e = ln_add(e, s.ln_error);
    }
    (v, e)
}

/// Outcome of summing geometric panels `[t0·2^{-k-1}, t0·2^{-k}]` toward 0.
#[derive(Debug, Clone, PartialEq)]
pub enum PanelTrend {
    /// The series converges; `ln_total` includes the extrapolated tail.
    Convergent { ln_total: f64, panels: usize },
    /// Panels stop decaying (or partial sums keep doubling).
    Divergent { ln_partial: f64, panels: usize },
    /// Neither rule fired within the panel budget.
    Ambiguous { ln_partial: f64, panels: usize },
}

/// Thresholds for [`sum_panels_to_zero`].
#[derive(Debug, Clone, Copy)]
pub struct PanelRules {
    pub max_panels: usize,
    /// Declared convergent once the estimated tail falls below this fraction
    /// of the running sum.
    pub tail_rtol: f64,
    /// Panel ratios at or below this value over the trailing window certify a
    /// geometrically convergent tail.
    pub geometric_ratio: f64,
    /// Panel ratios at or above `1 - stall_tol` certify divergence.
    pub stall_tol: f64,
    /// Divergent when the partial sum grows by this factor over the window.
    pub growth_factor: f64,
    pub window: usize,
    pub rtol: f64,
}

impl Default for PanelRules {
    fn default() -> Self {
        Self {
            max_panels: 60,
            tail_rtol: 1e-14,
            geometric_ratio: 0.99,
            stall_tol: 1e-9,
            growth_factor: 2.0,
            window: 10,
            rtol: 1e-12,
        }
    }
}

/// Sums `∫_0^{t0} exp(ln_g)` over halving panels and classifies the trend.
pub fn sum_panels_to_zero(
    mut ln_g: impl FnMut(f64) -> f64,
    t0: f64,
    rules: &PanelRules,
) -> Result<PanelTrend, QuadratureError> {
    let mut ln_panels: Vec<f64> = Vec::with_capacity(rules.max_panels);
    let mut partial: Vec<f64> = Vec::with_capacity(rules.max_panels);
    let mut hi = t0;
    let mut running = f64::NEG_INFINITY;
    for k in 0..rules.max_panels {
        let lo = hi * 0.5;
        let panel = integrate_ln(&mut ln_g, lo, hi, rules.rtol, 4000)?;
        ln_panels.push(panel.ln_value);
        running = ln_add(running, panel.ln_value);
        partial.push(running);
        hi = lo;

        if panel.ln_value == f64::NEG_INFINITY || panel.ln_value - running < rules.tail_rtol.ln() {
            // Super-geometric decay: the next panel is smaller still.
            if k >= 2 && ln_panels[k] <= ln_panels[k - 1] {
                return Ok(PanelTrend::Convergent {
                    ln_total: running,
                    panels: k + 1,
                });
            }
        }
        if k + 1 >= rules.window + 1 {
            let w = rules.window;
            let ratios: Vec<f64> = (k + 1 - w..=k)
                .map(|j| ln_panels[j] - ln_panels[j - 1])
                .collect();
            let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            if max_ratio <= rules.geometric_ratio.ln() {
                let r = ratios[w - 1].exp();
                let ln_tail = ln_panels[k] + (r / (1.0 - r)).ln();
                return Ok(PanelTrend::Convergent {
                    ln_total: ln_add(running, ln_tail),
                    panels: k + 1,
                });
            }
            let grown = running - partial[k - w];
            if grown >= rules.growth_factor.ln() || min_ratio >= (1.0 - rules.stall_tol).ln() {
                return Ok(PanelTrend::Divergent {
                    ln_partial: running,
                    panels: k + 1,
                });
            }
        }
    }
    Ok(PanelTrend::Ambiguous {
        ln_partial: running,
        panels: rules.max_panels,
    })
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson
/// slopes) over strictly increasing abscissae.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(x.len() >= 2, "PCHIP needs at least two points");
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    d[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self { x, y, d }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Node slopes used by the interpolant.
    pub fn slopes(&self) -> &[f64] {
        &self.d
    }

    /// Evaluates inside `[x_0, x_{n-1}]`; clamps outside.
    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&xq).unwrap()) {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (xq - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Ordinary least squares line `y ≈ intercept + slope·x`; returns
/// `(slope, intercept)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in [2, 4, 8, 16] {
            let gl = GaussLegendre::new(n);
            let deg = 2 * n - 1;
            let v = gl.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((v - exact).abs() <= 1e-13 * exact, "n={n}: {v} vs {exact}");
            let wsum: f64 = gl.weights.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ln_integral_of_huge_integrand() {
        // ∫_a^b e^{1/s} ds for tiny a: the integral is ~ a² e^{1/a}.
        let a = 1e-6;
        let r = integrate_ln(|s| 1.0 / s, a, 2e-6, 1e-12, 4000).unwrap();
        let approx = 1.0 / a + 2.0 * a.ln();
        assert!(
            (r.ln_value - approx).abs() < 1e-4,
            "{} vs {}",
            r.ln_value,
            approx
        );
        assert!(r.ln_value.is_finite());
    }

    #[test]
    fn ln_integral_matches_closed_form_power() {
        let r = integrate_ln(|s| -0.5 * s.ln(), 0.25, 1.0, 1e-13, 1000).unwrap();
        let exact = (2.0 * (1.0 - 0.5f64)).ln();
        assert!((r.ln_value - exact).abs() < 1e-12);
    }

    #[test]
    fn panels_classify_power_laws() {
        let rules = PanelRules::default();
        let conv = sum_panels_to_zero(|s| -0.5 * s.ln(), 1.0, &rules).unwrap();
        match conv {
            PanelTrend::Convergent { ln_total, .. } => {
                assert!((ln_total - 2f64.ln()).abs() < 1e-10, "{ln_total}")
            }
            other => panic!("{other:?}"),
        }
        let div = sum_panels_to_zero(|s| -s.ln(), 1.0, &rules).unwrap();
        assert!(matches!(div, PanelTrend::Divergent { .. }), "{div:?}");
        let div = sum_panels_to_zero(|s| 1.0 / s, 0.5, &rules).unwrap();
        assert!(matches!(div, PanelTrend::Divergent { .. }), "{div:?}");
        let conv = sum_panels_to_zero(|s| -1.0 / s, 0.5, &rules).unwrap();
        assert!(matches!(conv, PanelTrend::Convergent { .. }), "{conv:?}");
    }

    #[test]
    fn pchip_reproduces_lines_and_preserves_monotonicity() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let p = Pchip::new(x, y);
        for q in [0.1, 0.77, 2.05] {
            assert!((p.eval(q) - (2.0 * q - 1.0)).abs() < 1e-14);
        }
        let x: Vec<f64> = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = vec![0.0, 0.0, 1.0, 1.0, 1.0];
        let p = Pchip::new(x, y);
        let mut prev = p.eval(0.0);
        for i in 1..400 {
            let v = p.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn log_helpers() {
        assert!((ln_add(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((ln_sub(2f64.ln(), 0.0) - 0.0).abs() < 1e-15);
        assert_eq!(ln_sub(1.0, 1.0), f64::NEG_INFINITY);
        assert!((ln_sum_exp(&[0.0, 0.0, 0.0]) - 3f64.ln()).abs() < 1e-15);
    }
}
