//! Canonical versus microcanonical ensembles.

use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::{self, auto_t, entropies, tci_f_inverse, tci_rhs, EntropyReport, TciParams};
use crate::error::{invalid, Error, Result};
use crate::geometry::Geometry;
use crate::observable::{assemble, LocalObservable};
use crate::states::{
    default_probes, estimate_correlation_length, gibbs_from_spectrum, microcanonical_from_spectrum, rounded,
    shell_count, CorrelationFit,
};
use crate::tensor::{self, herm_spectrum, CMat, DenseOperator, Spectrum};
use crate::w1::{average_marginal, trace_distance, w1_primal, W1Result};

/// Downward shift of the shell grid origin below the smallest eigenvalue.
pub const GRID_OFFSET: f64 = 1e-9;

/// Relative tolerance for the equal-energy precondition.
pub const ENERGY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyShell {
    pub e_star: f64,
    pub shell_trace: usize,
    pub shells_scanned: usize,
}

/// Maximizes `e^{-βE} Tr P(E, Δ)` over the shells `(o + (ν-1)Δ, o + νΔ]`
/// with origin `o = λ_min - 1e-9`, for every shell whose lower edge lies
/// below `λ_max`.
pub fn e_star_from_spectrum(eigenvalues: &[f64], beta: f64, delta: f64) -> Result<EnergyShell> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid("delta", format!("shell width {delta} must be positive")));
    }
    if !(beta >= 0.0) {
        return Err(invalid("beta", format!("{beta} must be nonnegative")));
    }
    let lmin = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let origin = rounded(lmin) - GRID_OFFSET;
    let mut best: Option<(f64, f64, usize)> = None;
    let mut scanned = 0;
    let mut nu = 1usize;
    while origin + (nu - 1) as f64 * delta < rounded(lmax) {
        let e = origin + nu as f64 * delta;
        let count = shell_count(eigenvalues, e, delta);
        scanned += 1;
        if count > 0 {
            let score = -beta * e + (count as f64).ln();
            if best.is_none_or(|b| score > b.0) {
                best = Some((score, e, count));
            }
        }
        nu += 1;
    }
    let (_, e_star, shell_trace) = best.ok_or(Error::EmptyShell { lower: origin, upper: lmax })?;
    Ok(EnergyShell { e_star, shell_trace, shells_scanned: scanned })
}

pub fn e_star(h: &LocalObservable, beta: f64, delta: f64) -> Result<EnergyShell> {
    let spectrum = herm_spectrum(&assemble(h)?)?;
    e_star_from_spectrum(&spectrum.eigenvalues, beta, delta)
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub n: usize,
    /// W1 distance per spin.
    pub w: f64,
    pub w1: W1Result,
    /// `S(ω) - S(ρ)`.
    pub entropy_gap: f64,
    /// `ln(C + 1)`, standing in for the unnamed positive constant of the inequality.
    pub c: f64,
    pub f_params: TciParams,
    #[serde(rename = "C")]
    pub c_prefactor: f64,
    pub bound_on_w: f64,
    pub bound_saturated: bool,
    pub bound_holds: bool,
    pub energy_residual: f64,
    pub energy_ok: bool,
    /// `½‖Λ(ρ) - Λ(ω)‖₁` for the average single-site marginal `Λ`.
    pub average_marginal_distance: f64,
    pub average_marginal_ok: bool,
    pub e_star: Option<f64>,
    pub delta: Option<f64>,
    pub shell_dimension: Option<usize>,
}

/// Bound on the W1 distance per spin between a state `ρ` and a Gibbs state
/// `ω` of equal average energy, through the inverse transportation-cost function.
#[allow(clippy::too_many_arguments)]
pub fn equivalence_bound(
    omega: &DenseOperator,
    rho: &DenseOperator,
    h: &LocalObservable,
    geom: &Geometry,
    k: usize,
    xi: f64,
    c_prefactor: f64,
    t: f64,
) -> Result<EquivalenceReport> {
    let n = geom.n();
    let h_full = assemble(h)?;
    let energy_residual = tensor::expectation(rho, &h_full)? - tensor::expectation(omega, &h_full)?;
    let scale = tensor::operator_norm(&h_full)?.max(1.0);
    let entropy_gap = entropy::von_neumann(omega)? - entropy::von_neumann(rho)?;
    let w1 = w1_primal(rho, omega, k, geom)?;
    let w = w1.value / n as f64;
    let params = TciParams { k, ball_a: geom.ball_a(), d: geom.dim_d(), xi, t };
    let c = c_prefactor.ln_1p();
    let root = (n as f64).powf(1.0 / (2.0 * geom.dim_d() + 1.0));
    let inv = tci_f_inverse(((entropy_gap + c) / root).max(0.0), &params)?;
    let average_marginal_distance = trace_distance(&average_marginal(rho)?, &average_marginal(omega)?)?;
    Ok(EquivalenceReport {
        n,
        w,
        entropy_gap,
        c,
        f_params: params,
        c_prefactor,
        bound_on_w: inv.w,
        bound_saturated: inv.saturated,
        bound_holds: w <= inv.w + 1e-8,
        energy_residual,
        energy_ok: energy_residual.abs() <= ENERGY_TOL * scale,
        average_marginal_distance,
        average_marginal_ok: average_marginal_distance <= w + 1e-8,
        w1,
        e_star: None,
        delta: None,
        shell_dimension: None,
    })
}

/// `Σ_i <v_i|ρ|v_i> |v_i><v_i|` in the eigenbasis of `spectrum`.
pub fn dephase(rho: &DenseOperator, spectrum: &Spectrum) -> Result<DenseOperator> {
    let weights = spectrum.diagonal_weights(rho.matrix());
    let m = crate::states::spectrum_mix(spectrum, &weights);
    DenseOperator::density(m, rho.support().to_vec(), rho.q())
}

/// Diagonal part of `ρ` in the computational basis.
pub fn dephase_computational(rho: &DenseOperator) -> Result<DenseOperator> {
    let d = rho.dim();
    let m = CMat::from_fn(d, d, |i, j| if i == j { rho.matrix()[(i, i)] } else { tensor::c64::new(0.0, 0.0) });
    DenseOperator::density(m, rho.support().to_vec(), rho.q())
}

/// Evaluation of `relative >= n^{1/(2d+1)} f(w) - ln(C+1)` for one state pair.
#[derive(Clone, Debug, Serialize)]
pub struct TciCheck {
    pub label: String,
    pub w: f64,
    pub relative: f64,
    pub measured_lb: f64,
    /// `t` maximizing the right-hand side over `[1e-3, 10]`.
    pub t_auto: f64,
    pub rhs_auto: f64,
    pub holds_auto: bool,
    /// Right-hand side at `t` equal to the local norm of the normalized witness (1).
    pub rhs_unit: f64,
    pub holds_unit: bool,
    pub measured_holds_unit: bool,
}

pub fn tci_check(
    label: &str,
    n: usize,
    w: f64,
    ent: &EntropyReport,
    fit_c: f64,
    params: &TciParams,
) -> Result<TciCheck> {
    let t_auto = auto_t(n, w, fit_c, params)?;
    let rhs_auto = tci_rhs(n, w, fit_c, &params.with_t(t_auto))?;
    let rhs_unit = tci_rhs(n, w, fit_c, &params.with_t(1.0))?;
    Ok(TciCheck {
        label: label.to_string(),
        w,
        relative: ent.relative,
        measured_lb: ent.measured_lb,
        t_auto,
        rhs_auto,
        holds_auto: ent.relative >= rhs_auto - 1e-6,
        rhs_unit,
        holds_unit: ent.relative >= rhs_unit - 1e-6,
        measured_holds_unit: ent.measured_lb >= rhs_unit - 1e-6,
    })
}

/// One row of the ensemble-equivalence experiment.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleRow {
    pub n: usize,
    pub beta: f64,
    pub delta: f64,
    pub operator_norm: f64,
    pub local_norm: f64,
    pub locality: usize,
    /// `λ_max - λ_min`, equal to `2‖H‖` after the symmetrizing shift.
    pub spectral_width: f64,
    pub width_ok: bool,
    pub e_star: f64,
    pub shell_dimension: usize,
    /// `S(ω_{E*,Δ} ‖ ω)`.
    pub relative: f64,
    /// `ln[n‖H‖_loc/Δ + 1] + βΔ`.
    pub relative_bound: f64,
    pub relative_ok: bool,
    pub entropy: EntropyReport,
    pub data_processing_ok: bool,
    pub w: f64,
    pub w1_value: f64,
    pub w1_duality_gap: f64,
    pub correlation: Option<CorrelationFit>,
    pub correlation_error: Option<String>,
    pub tci: Vec<TciCheck>,
}

pub struct ExperimentConfig<'a> {
    pub family: &'a (dyn Fn(usize) -> Result<LocalObservable> + Sync),
    pub beta: f64,
    /// Shell width as a function of `(n, ‖H‖)`.
    pub delta_rule: &'a (dyn Fn(usize, f64) -> f64 + Sync),
    pub n_values: &'a [usize],
    pub k: usize,
}

/// Rows in the order of `n_values`; sizes with an empty shell are skipped.
pub fn ensemble_experiment(cfg: &ExperimentConfig) -> Result<Vec<EnsembleRow>> {
    let rows: Vec<Result<Option<EnsembleRow>>> = cfg.n_values.par_iter().map(|&n| experiment_row(cfg, n)).collect();
    let mut out = Vec::new();
    for r in rows {
        if let Some(row) = r? {
            out.push(row);
        }
    }
    Ok(out)
}

fn experiment_row(cfg: &ExperimentConfig, n: usize) -> Result<Option<EnsembleRow>> {
    let h = (cfg.family)(n)?;
    let q = h.q();
    let geom = Geometry::chain(n, q)?;
    let h_full = assemble(&h)?;
    let spectrum = herm_spectrum(&h_full)?;
    let lmax = spectrum.eigenvalues[0];
    let lmin = *spectrum.eigenvalues.last().expect("nonempty spectrum");
    let operator_norm = lmax.abs().max(lmin.abs());
    let local_norm = h.local_norm();
    let delta = (cfg.delta_rule)(n, operator_norm);
    let shell = match e_star_from_spectrum(&spectrum.eigenvalues, cfg.beta, delta) {
        Ok(s) => s,
        Err(Error::EmptyShell { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let omega = gibbs_from_spectrum(&spectrum, cfg.beta, q)?;
    let (micro, shell_dimension) = microcanonical_from_spectrum(&spectrum, shell.e_star, delta, q)?;

    let k = cfg.k.min(n);
    let w1 = w1_primal(&micro, &omega, k, &geom)?;
    let witness = w1.witness.clone().expect("w1_primal always builds a witness");
    let entropy = entropies(&micro, &omega, &witness)?;
    let nf = n as f64;
    let relative_bound = (nf * local_norm / delta).ln_1p() + cfg.beta * delta;

    let (correlation, correlation_error) = match estimate_correlation_length(&omega, &geom, &default_probes(q)) {
        Ok(fit) => (Some(fit), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let tci = match &correlation {
        Some(fit) if fit.xi.is_finite() => {
            let params = TciParams { k, ball_a: geom.ball_a(), d: geom.dim_d(), xi: fit.xi, t: 1.0 };
            tci_rows(n, k, fit.c, &params, &geom, &spectrum, &omega, &w1, &entropy)?
        }
        _ => Vec::new(),
    };

    Ok(Some(EnsembleRow {
        n,
        beta: cfg.beta,
        delta,
        operator_norm,
        local_norm,
        locality: h.locality(),
        spectral_width: lmax - lmin,
        width_ok: lmax - lmin <= nf * local_norm + 1e-8,
        e_star: shell.e_star,
        shell_dimension,
        relative: entropy.relative,
        relative_bound,
        relative_ok: entropy.relative <= relative_bound + 1e-8,
        data_processing_ok: entropy.measured_lb <= entropy.relative + 1e-8,
        w: w1.value / nf,
        w1_value: w1.value,
        w1_duality_gap: w1.duality_gap(),
        entropy,
        correlation,
        correlation_error,
        tci,
    }))
}

/// Transportation-cost checks against the Gibbs state for three states: the
/// Gibbs state dephased in the eigenbasis of `H` (which leaves it unchanged),
/// the Gibbs state dephased in the computational basis, and the
/// microcanonical state.
#[allow(clippy::too_many_arguments)]
fn tci_rows(
    n: usize,
    k: usize,
    fit_c: f64,
    params: &TciParams,
    geom: &Geometry,
    spectrum: &Spectrum,
    omega: &DenseOperator,
    micro_w1: &W1Result,
    micro_entropy: &EntropyReport,
) -> Result<Vec<TciCheck>> {
    let nf = n as f64;
    let mut out = Vec::new();
    for (label, rho) in [("dephased-energy", dephase(omega, spectrum)?), ("dephased-computational", dephase_computational(omega)?)] {
        let w1 = w1_primal(&rho, omega, k, geom)?;
        let witness = w1.witness.clone().expect("witness");
        let ent = entropies(&rho, omega, &witness)?;
        out.push(tci_check(label, n, w1.value / nf, &ent, fit_c, params)?);
    }
    out.push(tci_check("microcanonical", n, micro_w1.value / nf, micro_entropy, fit_c, params)?);
    Ok(out)
}

/// Transverse-field Ising chain `-J Σ Z_i Z_{i+1} - h Σ X_i` (open boundary).
pub fn ising_chain(n: usize, coupling: f64, field: f64) -> Result<LocalObservable> {
    LocalObservable::transverse_field_ising(n, coupling, field, false)
}
