//! Entropies (in nats) and the transportation-cost function `f` with its inverse.

use serde::Serialize;

use crate::concentration::{log_mgf_from_weights, F_and_sstar};
use crate::error::{invalid, Error, Result};
use crate::observable::{assemble, LocalObservable};
use crate::tensor::{expectation, herm_spectrum, spectrum_of, DenseOperator, Spectrum};

/// Eigenvalues of `σ` at or below this count as its kernel.
pub const KERNEL_TOL: f64 = 1e-13;

/// Weight of `ρ` on the kernel of `σ` tolerated before the relative entropy is infinite.
pub const SUPPORT_TOL: f64 = 1e-12;

pub const COMMUTATOR_TOL: f64 = 1e-10;

/// Positive scalars `t` for the witness family `A = e^{tH_w}`.
pub fn witness_scales() -> Vec<f64> {
    (0..16).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 15.0)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyReport {
    /// `S(ρ)`.
    pub von_neumann: f64,
    /// `S(σ)`.
    pub von_neumann_sigma: f64,
    /// `S(ρ‖σ)`; `+inf` when the support of `ρ` is not inside that of `σ`.
    pub relative: f64,
    pub measured_lb: f64,
    /// Scale `t` attaining `measured_lb` (0 when no witness improves on 0).
    pub measured_t: f64,
    pub measured_commuting: Option<f64>,
}

pub fn von_neumann(rho: &DenseOperator) -> Result<f64> {
    Ok(entropy_of(&herm_spectrum(rho)?.eigenvalues))
}

fn entropy_of(eigenvalues: &[f64]) -> f64 {
    eigenvalues.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum::<f64>().max(0.0)
}

fn check_dims(rho: &DenseOperator, sigma: &DenseOperator) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), found: rho.dim() });
    }
    Ok(())
}

/// `Tr ρ(ln ρ - ln σ)` from the two spectral decompositions.
pub fn relative_entropy(rho: &DenseOperator, sigma: &DenseOperator) -> Result<f64> {
    check_dims(rho, sigma)?;
    let rs = herm_spectrum(rho)?;
    let ss = herm_spectrum(sigma)?;
    Ok(relative_from_spectra(&rs, &ss, rho))
}

fn relative_from_spectra(rs: &Spectrum, ss: &Spectrum, rho: &DenseOperator) -> f64 {
    let weights = ss.diagonal_weights(rho.matrix());
    let mut cross = 0.0;
    let mut outside = 0.0;
    for (&mu, &w) in ss.eigenvalues.iter().zip(&weights) {
        if mu > KERNEL_TOL {
            cross += w * mu.ln();
        } else {
            outside += w;
        }
    }
    if outside > SUPPORT_TOL {
        return f64::INFINITY;
    }
    (-entropy_of(&rs.eigenvalues) - cross).max(0.0)
}

/// `max_t t·Tr(ρH) - ln Tr(σ e^{tH})` over `t ∈ {0} ∪` [`witness_scales`],
/// a lower bound on the measured relative entropy. Returns `(value, t)`.
pub fn measured_lower_bound(rho: &DenseOperator, sigma: &DenseOperator, witness: &DenseOperator) -> Result<(f64, f64)> {
    check_dims(rho, sigma)?;
    let spec = herm_spectrum(witness)?;
    let weights: Vec<f64> = spec.diagonal_weights(sigma.matrix()).into_iter().map(|w| w.max(0.0)).collect();
    let mean = expectation(rho, witness)?;
    let mut best = (0.0, 0.0);
    for t in witness_scales() {
        let v = t * mean - log_mgf_from_weights(&spec.eigenvalues, &weights, t);
        if v > best.0 {
            best = (v, t);
        }
    }
    Ok(best)
}

/// Classical KL divergence in a joint eigenbasis, when `‖[ρ,σ]‖_max` is negligible.
pub fn measured_commuting(rho: &DenseOperator, sigma: &DenseOperator) -> Result<Option<f64>> {
    check_dims(rho, sigma)?;
    if rho.commutator_max(sigma)? > COMMUTATOR_TOL {
        return Ok(None);
    }
    // a generic real combination separates the joint eigenspaces
    const MIX: f64 = std::f64::consts::PI;
    let combo = rho.add_scaled(sigma, MIX)?;
    let spec = spectrum_of(combo.matrix())?;
    let p = spec.diagonal_weights(rho.matrix());
    let q = spec.diagonal_weights(sigma.matrix());
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(&q) {
        if pi <= SUPPORT_TOL {
            continue;
        }
        if qi <= KERNEL_TOL {
            return Ok(Some(f64::INFINITY));
        }
        kl += pi * (pi / qi).ln();
    }
    Ok(Some(kl.max(0.0)))
}

/// All entropic quantities for `(ρ, σ)`; `witness` seeds the measured lower bound.
pub fn entropies(rho: &DenseOperator, sigma: &DenseOperator, witness: &LocalObservable) -> Result<EntropyReport> {
    check_dims(rho, sigma)?;
    let rs = herm_spectrum(rho)?;
    let ss = herm_spectrum(sigma)?;
    let relative = relative_from_spectra(&rs, &ss, rho);
    let (measured_lb, measured_t) = measured_lower_bound(rho, sigma, &assemble(witness)?)?;
    Ok(EntropyReport {
        von_neumann: entropy_of(&rs.eigenvalues),
        von_neumann_sigma: entropy_of(&ss.eigenvalues),
        relative,
        measured_lb,
        measured_t,
        measured_commuting: measured_commuting(rho, sigma)?,
    })
}

/// Parameters of the transportation-cost function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TciParams {
    pub k: usize,
    #[serde(rename = "A")]
    pub ball_a: f64,
    pub d: f64,
    pub xi: f64,
    /// Stand-in for the local norm inside `f`.
    pub t: f64,
}

impl TciParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("A", self.ball_a), ("xi", self.xi), ("t", self.t)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("{v} must be positive and finite")));
            }
        }
        if self.k == 0 {
            return Err(invalid("k", "must be positive"));
        }
        if !(self.d >= 1.0) {
            return Err(invalid("d", format!("{} must be at least 1", self.d)));
        }
        Ok(())
    }

    pub fn with_t(self, t: f64) -> Self {
        Self { t, ..self }
    }
}

/// `f(w) = F(kw) / (k²A²t [ξ/(kA²t)(k s*(kw) + F(kw))]^{2d/(2d+1)})`.
pub fn tci_f(w: f64, p: &TciParams) -> Result<f64> {
    p.validate()?;
    if !(w >= 0.0) {
        return Err(invalid("w", format!("{w} must be nonnegative")));
    }
    let k = p.k as f64;
    let (f, s) = F_and_sstar(k * w)?;
    if f == 0.0 {
        return Ok(0.0);
    }
    let a2t = p.ball_a * p.ball_a * p.t;
    let bracket = p.xi / (k * a2t) * (k * s + f);
    let expo = 2.0 * p.d / (2.0 * p.d + 1.0);
    Ok(f / (k * k * a2t * bracket.powf(expo)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TciInverse {
    pub w: f64,
    pub saturated: bool,
}

/// Upper end of the search interval for `f^{-1}`.
pub const W_MAX: f64 = 2.0;

/// Solves `f(w) = y` by bisection on `[0, W_MAX]` to `1e-10`.
pub fn tci_f_inverse(y: f64, p: &TciParams) -> Result<TciInverse> {
    p.validate()?;
    if !(y > 0.0) {
        return Ok(TciInverse { w: 0.0, saturated: false });
    }
    if tci_f(W_MAX, p)? < y {
        return Ok(TciInverse { w: W_MAX, saturated: true });
    }
    let (mut lo, mut hi) = (0.0f64, W_MAX);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if tci_f(mid, p)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TciInverse { w: 0.5 * (lo + hi), saturated: false })
}

/// `n^{1/(2d+1)} f(w) - ln(C+1)`, the right-hand side of the transportation-cost inequality.
pub fn tci_rhs(n: usize, w: f64, c: f64, p: &TciParams) -> Result<f64> {
    Ok((n as f64).powf(1.0 / (2.0 * p.d + 1.0)) * tci_f(w, p)? - c.ln_1p())
}

/// Golden-section search for the `t ∈ [1e-3, 10]` maximizing [`tci_rhs`].
pub fn auto_t(n: usize, w: f64, c: f64, p: &TciParams) -> Result<f64> {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let objective = |t: f64| tci_rhs(n, w, c, &p.with_t(t));
    let (mut a, mut b) = (1e-3f64, 10.0f64);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (objective(x1)?, objective(x2)?);
    while b - a > 1e-9 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = objective(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = objective(x2)?;
        }
    }
    let candidates = [(1e-3, objective(1e-3)?), (x1, f1), (x2, f2), (10.0, objective(10.0)?)];
    Ok(candidates.iter().fold(candidates[0], |best, &c| if c.1 > best.1 { c } else { best }).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, LN_2};

    fn diag(p: &[f64]) -> DenseOperator {
        DenseOperator::from_real_diagonal(p, vec![0], 2).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!((von_neumann(&diag(&[0.5, 0.5])).unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(von_neumann(&diag(&[1.0, 0.0])).unwrap(), 0.0);
        let rho = diag(&[0.3, 0.7]);
        assert!(relative_entropy(&rho, &rho).unwrap().abs() < 1e-14);
        let (lb, _) = measured_lower_bound(&rho, &rho, &diag(&[1.0, -1.0])).unwrap();
        assert!(lb <= 1e-9);
    }

    #[test]
    fn classical_kl_example() {
        let (p, q) = (diag(&[1.0, 0.0]), diag(&[0.5, 0.5]));
        assert!((relative_entropy(&p, &q).unwrap() - LN_2).abs() < 1e-14);
        assert!((measured_commuting(&p, &q).unwrap().unwrap() - LN_2).abs() < 1e-14);
        assert_eq!(relative_entropy(&q, &p).unwrap(), f64::INFINITY);
    }

    #[test]
    fn measured_bound_approaches_kl_for_the_optimal_observable() {
        // the optimal A for commuting states is σ^{-1}ρ; e^{t Z} reaches it at large t here
        let (p, q) = (diag(&[1.0, 0.0]), diag(&[0.5, 0.5]));
        let (lb, t) = measured_lower_bound(&p, &q, &diag(&[1.0, -1.0])).unwrap();
        assert!(lb <= LN_2 + 1e-12 && lb > LN_2 - 1e-12, "lb = {lb}");
        assert!(t > 10.0);
    }

    fn params() -> TciParams {
        TciParams { k: 2, ball_a: 3.0, d: 1.0, xi: 1.5, t: 1.0 }
    }

    #[test]
    fn tci_f_closed_form_point() {
        let p = params();
        let w = E - 1.0; // k w = 2(e - 1), where s* = 1
        let f = E - 0.5;
        let k = 2.0;
        let bracket = p.xi / (k * 9.0) * (k + f);
        let expected = f / (k * k * 9.0 * bracket.powf(2.0 / 3.0));
        assert!((tci_f(w, &p).unwrap() / expected - 1.0).abs() < 1e-10);
        assert_eq!(tci_f(0.0, &p).unwrap(), 0.0);
        let (a, b, c) = (tci_f(0.1, &p).unwrap(), tci_f(0.5, &p).unwrap(), tci_f(1.0, &p).unwrap());
        assert!(a < b && b < c);
    }

    #[test]
    fn tci_inverse_round_trip_and_saturation() {
        let p = params();
        for w in [0.0, 0.01, 0.2, 0.77, 1.5, 2.0] {
            let y = tci_f(w, &p).unwrap();
            let inv = tci_f_inverse(y, &p).unwrap();
            assert!((inv.w - w).abs() < 1e-8, "w = {w}");
        }
        let inv = tci_f_inverse(1e3, &p).unwrap();
        assert!(inv.saturated && inv.w == W_MAX);
    }

    #[test]
    fn auto_t_prefers_small_t() {
        // f scales like t^{-1/(2d+1)}, so the maximizer sits at the lower end
        let t = auto_t(8, 0.3, 0.5, &params()).unwrap();
        assert!((t - 1e-3).abs() < 1e-6);
    }
}
