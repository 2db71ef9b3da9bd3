//! Concentration bounds for local observables.
//!
//! Every bound is evaluated in log space. The closed forms follow the
//! Chernoff argument with the substitution `s = t k ‖H‖_loc`:
//! `F(x) = max_{s>0} s(x - e^s + 1 + s/2)` drives all tail estimates.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::Geometry;
use crate::observable::{center_product, product_term_means, LocalObservable};
use crate::tensor::{self, DenseOperator, Spectrum};

/// Tolerance on `|g(s*)|` relative to `1 + x`.
const ROOT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    ProductOptimal,
    ProductExplicit,
    CorrelatedOptimal,
    CorrelatedExplicit,
    MgfProduct,
    MgfProductTermwise,
    MgfCorrelated,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub variant: BoundVariant,
    pub bound_value: f64,
    /// Natural log of `bound_value`, finite even when the value overflows.
    pub log_value: f64,
    pub parameters: BTreeMap<String, f64>,
    /// Set when the bound degenerates to its trivial ceiling.
    pub vacuous: bool,
}

impl BoundReport {
    fn new(variant: BoundVariant, log_value: f64, parameters: &[(&str, f64)]) -> Self {
        Self {
            variant,
            bound_value: log_value.exp(),
            log_value,
            parameters: parameters.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            vacuous: false,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} must be positive and finite")))
    }
}

/// `(e^s - 1)(s + 1) - x`.
fn g(s: f64, x: f64) -> f64 {
    s.exp_m1() * (s + 1.0) - x
}

/// `F(x)` together with the maximizer `s*(x)`.
#[allow(non_snake_case)]
pub fn F_and_sstar(x: f64) -> Result<(f64, f64)> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(invalid("x", format!("{x} must be finite and nonnegative")));
    }
    if x == 0.0 {
        return Ok((0.0, 0.0));
    }
    let s = sstar(x);
    Ok((s * (x - s.exp_m1() + s / 2.0), s))
}

fn sstar(x: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0 + x.ln_1p());
    let mut s = x.ln_1p();
    for _ in 0..200 {
        let gs = g(s, x);
        if gs.abs() <= ROOT_TOL * (1.0 + x) {
            return s;
        }
        if gs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let slope = s.exp() * (s + 2.0) - 1.0;
        let newton = s - gs / slope;
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            return s;
        }
    }
    s
}

/// `½ ln²(x + 1)`, the objective at `ŝ = ln(1 + x)`.
#[allow(non_snake_case)]
pub fn F_tilde(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(invalid("x", format!("{x} must be nonnegative")));
    }
    Ok(0.5 * x.ln_1p().powi(2))
}

/// `(F, s)` for the optimal or the explicit variant.
fn rate(x: f64, explicit: bool) -> Result<(f64, f64)> {
    if explicit {
        Ok((F_tilde(x)?, x.ln_1p()))
    } else {
        F_and_sstar(x)
    }
}

/// `P(H >= <H> + na) <= exp[-(n/k²) F(ak/‖H‖_loc)]` for product states.
pub fn tail_bound_product(a: f64, n: usize, k: usize, local_norm: f64, explicit: bool) -> Result<BoundReport> {
    positive("a", a)?;
    positive("local_norm", local_norm)?;
    if n == 0 || k == 0 {
        return Err(invalid("n/k", "site count and locality must be positive"));
    }
    let (nf, kf) = (n as f64, k as f64);
    let x = a * kf / local_norm;
    let (f, s) = rate(x, explicit)?;
    let variant = if explicit { BoundVariant::ProductExplicit } else { BoundVariant::ProductOptimal };
    Ok(BoundReport::new(
        variant,
        -(nf / (kf * kf)) * f,
        &[("a", a), ("n", nf), ("k", kf), ("local_norm", local_norm), ("s", s), ("F", f)],
    ))
}

/// The two MGF bounds for a product state.
#[derive(Clone, Debug, Serialize)]
pub struct ProductMgf {
    pub expectation: f64,
    pub termwise: BoundReport,
    pub k_local: BoundReport,
}

/// Bounds on `<e^H>` for a product state given by its single-site factors.
///
/// The term-wise form uses the centered decomposition,
/// `exp[<H> + Σ_Λ (e^{|Λ|L} - 1 - |Λ|L/2) ‖h_Λ‖]`; the k-local form replaces
/// the sum by `(n/k)(e^{kL} - 1 - kL/2) L`. `L` is the local norm of the
/// stored (uncentered) decomposition.
pub fn mgf_bound_product(h: &LocalObservable, factors: &[DenseOperator]) -> Result<ProductMgf> {
    let centered = center_product(h, factors)?;
    let mean = h.constant() + product_term_means(h, factors)?.iter().sum::<f64>();
    let l = h.local_norm();
    let n = h.n() as f64;
    let k = h.locality();
    let termwise_excess: f64 = centered
        .terms()
        .iter()
        .map(|t| {
            let m = t.region().len() as f64;
            excess(m * l) * t.norm()
        })
        .sum();
    let k_excess = if k == 0 { 0.0 } else { (n / k as f64) * excess(k as f64 * l) * l };
    let params = [("n", n), ("k", k as f64), ("local_norm", l), ("expectation", mean)];
    Ok(ProductMgf {
        expectation: mean,
        termwise: BoundReport::new(BoundVariant::MgfProductTermwise, mean + termwise_excess, &params),
        k_local: BoundReport::new(BoundVariant::MgfProduct, mean + k_excess, &params),
    })
}

/// `e^y - 1 - y/2`.
fn excess(y: f64) -> f64 {
    y.exp_m1() - y / 2.0
}

/// The two additive pieces of the correlated-state MGF bound, in log space.
#[derive(Clone, Debug, Serialize)]
pub struct CorrelatedMgf {
    pub log_first: f64,
    /// `-inf` when `C = 0`.
    pub log_second: f64,
    pub report: BoundReport,
}

/// Scalar form of the correlated MGF bound
/// `exp[<H> + (n/k)(e^{k(Al^d)²L} - 1 - k(Al^d)²L/2)L] + C e^{<H> + nL - l/ξ}`.
#[allow(clippy::too_many_arguments)]
pub fn mgf_bound_correlated_scalar(
    n: usize,
    k: usize,
    local_norm: f64,
    ball_a: f64,
    dim_d: f64,
    xi: f64,
    c: f64,
    l: f64,
    expectation: f64,
) -> Result<CorrelatedMgf> {
    positive("xi", xi)?;
    positive("l", l)?;
    if !(c >= 0.0) || !c.is_finite() {
        return Err(invalid("C", format!("{c} must be finite and nonnegative")));
    }
    if k == 0 || n == 0 {
        return Err(invalid("n/k", "site count and locality must be positive"));
    }
    let (nf, kf) = (n as f64, k as f64);
    let ball = ball_a * l.powf(dim_d);
    let y = kf * ball * ball * local_norm;
    let log_first = expectation + (nf / kf) * excess(y) * local_norm;
    let log_second = c.ln() + expectation + nf * local_norm - l / xi;
    let log_total = log_add(log_first, log_second);
    let report = BoundReport::new(
        BoundVariant::MgfCorrelated,
        log_total,
        &[
            ("n", nf),
            ("k", kf),
            ("local_norm", local_norm),
            ("A", ball_a),
            ("d", dim_d),
            ("xi", xi),
            ("C", c),
            ("l", l),
            ("expectation", expectation),
        ],
    );
    Ok(CorrelatedMgf { log_first, log_second, report })
}

pub fn mgf_bound_correlated(
    h: &LocalObservable,
    geom: &Geometry,
    xi: f64,
    c: f64,
    l: f64,
    state_expectation: f64,
) -> Result<CorrelatedMgf> {
    if h.n() != geom.n() {
        return Err(Error::DimensionMismatch { expected: geom.n(), found: h.n() });
    }
    mgf_bound_correlated_scalar(
        h.n(),
        h.locality().max(1),
        h.local_norm(),
        geom.ball_a(),
        geom.dim_d(),
        xi,
        c,
        l,
        state_expectation,
    )
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Tail bound for states with exponentially decaying correlations:
/// `(C+1) exp[-n^{1/(2d+1)} F / (k²A² [ξ/(kA²)(k s* + F)]^{2d/(2d+1)})]`
/// at `x = ak/‖H‖_loc`, together with the enlargement radius
/// `l = [ξ/(kA²)(k n s* + n F)]^{1/(2d+1)}`.
#[allow(clippy::too_many_arguments)]
pub fn tail_bound_correlated(
    a: f64,
    n: usize,
    k: usize,
    local_norm: f64,
    ball_a: f64,
    dim_d: f64,
    xi: f64,
    c: f64,
    explicit: bool,
) -> Result<BoundReport> {
    positive("a", a)?;
    positive("local_norm", local_norm)?;
    positive("A", ball_a)?;
    positive("xi", xi)?;
    if !(dim_d >= 1.0) {
        return Err(invalid("d", format!("{dim_d} must be at least 1")));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(invalid("C", format!("{c} must be finite and nonnegative")));
    }
    if n == 0 || k == 0 {
        return Err(invalid("n/k", "site count and locality must be positive"));
    }
    let (nf, kf) = (n as f64, k as f64);
    let x = a * kf / local_norm;
    let (f, s) = rate(x, explicit)?;
    let a2 = ball_a * ball_a;
    let bracket = xi / (kf * a2) * (kf * s + f);
    let p = 2.0 * dim_d + 1.0;
    let l = (nf * bracket).powf(1.0 / p);
    let ceiling = c.ln_1p();
    let exponent = -nf.powf(1.0 / p) * f / (kf * kf * a2 * bracket.powf(2.0 * dim_d / p));
    let (log_value, vacuous) = if bracket > 0.0 && exponent.is_finite() {
        (ceiling + exponent.min(0.0), false)
    } else {
        (ceiling, true)
    };
    let variant = if explicit { BoundVariant::CorrelatedExplicit } else { BoundVariant::CorrelatedOptimal };
    let mut report = BoundReport::new(
        variant,
        log_value,
        &[
            ("a", a),
            ("n", nf),
            ("k", kf),
            ("local_norm", local_norm),
            ("A", ball_a),
            ("d", dim_d),
            ("xi", xi),
            ("C", c),
            ("l", l),
            ("s", s),
            ("F", f),
        ],
    );
    report.vacuous = vacuous;
    Ok(report)
}

/// Log of the Chernoff two-term estimate
/// `e^{-tna}[exp((n/k)(e^{y} - 1 - y/2) tL) + C e^{ntL - l/ξ}]`
/// with `y = s` and `t = s/(k (A l^d)² L)`, evaluated at an arbitrary radius `l`.
/// The displayed correlated tail bound dominates this at its own `l`.
#[allow(clippy::too_many_arguments)]
pub fn correlated_tail_two_term(
    a: f64,
    n: usize,
    k: usize,
    local_norm: f64,
    ball_a: f64,
    dim_d: f64,
    xi: f64,
    c: f64,
    s: f64,
    l: f64,
) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    let ball = ball_a * l.powf(dim_d);
    let t = s / (kf * ball * ball * local_norm);
    let first = -t * nf * a + (nf / kf) * excess(s) * t * local_norm;
    let second = c.ln() + nf * t * (local_norm - a) - l / xi;
    log_add(first, second)
}

/// `P(H >= threshold)` in state `rho`, computed in the eigenbasis of `H`.
pub fn exact_tail(rho: &DenseOperator, h_full: &DenseOperator, threshold: f64) -> Result<f64> {
    let (spectrum, weights) = spectral_weights(rho, h_full)?;
    Ok(tail_from_weights(&spectrum.eigenvalues, &weights, threshold))
}

/// `Tr[rho e^{tH}]`.
pub fn exact_mgf(rho: &DenseOperator, h_full: &DenseOperator, t: f64) -> Result<f64> {
    let (spectrum, weights) = spectral_weights(rho, h_full)?;
    Ok(log_mgf_from_weights(&spectrum.eigenvalues, &weights, t).exp())
}

/// Spectrum of `H` and the weights `<v_i|rho|v_i>`, clamped at zero.
pub fn spectral_weights(rho: &DenseOperator, h_full: &DenseOperator) -> Result<(Spectrum, Vec<f64>)> {
    if rho.dim() != h_full.dim() {
        return Err(Error::DimensionMismatch { expected: h_full.dim(), found: rho.dim() });
    }
    let spectrum = tensor::herm_spectrum(h_full)?;
    let weights = spectrum.diagonal_weights(rho.matrix()).into_iter().map(|w| w.max(0.0)).collect();
    Ok((spectrum, weights))
}

/// Mass on eigenvalues at or above `threshold`. Eigenvalues within
/// `1e-10·max(1, |threshold|)` below the threshold are counted, which can only
/// enlarge the result.
pub fn tail_from_weights(eigenvalues: &[f64], weights: &[f64], threshold: f64) -> f64 {
    let cut = threshold - 1e-10 * threshold.abs().max(1.0);
    eigenvalues.iter().zip(weights).filter(|(l, _)| **l >= cut).map(|(_, w)| w).sum()
}

/// `ln Σ_i w_i e^{t λ_i}` by log-sum-exp.
pub fn log_mgf_from_weights(eigenvalues: &[f64], weights: &[f64], t: f64) -> f64 {
    let m = eigenvalues
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(l, _)| t * l)
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let sum: f64 = eigenvalues.iter().zip(weights).map(|(l, w)| w * (t * l - m).exp()).sum();
    m + sum.ln()
}
