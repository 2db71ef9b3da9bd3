//! Randomized soundness check of the product-state tail and MGF bounds against
//! exact diagonalization.
//!
//! Instance `i` draws everything from stream `i` of the seeded generator, and
//! instances run in parallel with an order-preserving collect, so the output
//! depends only on the seed and the configuration.

use rayon::prelude::*;
use serde::Serialize;

use crate::concentration::{
    log_mgf_from_weights, mgf_bound_product, spectral_weights, tail_bound_product, tail_from_weights, F_and_sstar,
};
use crate::error::{invalid, Result};
use crate::observable::assemble;
use crate::random::{instance_rng, random_local_observable, random_product_factors};
use crate::states::product_state;
use rand::Rng;

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    pub instances: usize,
    /// Deviations per spin as fractions of the local norm: `a = g·‖H‖_loc`.
    pub a_grid: Vec<f64>,
    pub n_min: usize,
    pub n_max: usize,
    pub k_choices: Vec<usize>,
    pub q: usize,
    pub max_depolarize: f64,
    /// Allowed excess of the exact tail over the bound.
    pub tail_slack: f64,
    /// Allowed relative excess of the exact MGF over the bound.
    pub mgf_slack: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            instances: 200,
            a_grid: linspace(0.02, 0.3, 10),
            n_min: 4,
            n_max: 10,
            k_choices: vec![1, 2],
            q: 2,
            max_depolarize: 0.5,
            tail_slack: 1e-12,
            mgf_slack: 1e-9,
        }
    }
}

pub fn linspace(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..steps).map(|i| start + (stop - start) * i as f64 / (steps - 1) as f64).collect(),
    }
}

/// One (instance, a) pair. The MGF columns test `t·H` at the Chernoff scale
/// `t = s*(ak/L)/(kL)` belonging to the same `a`.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyRow {
    pub instance: usize,
    pub n: usize,
    pub k_drawn: usize,
    pub k: usize,
    pub terms: usize,
    pub local_norm: f64,
    pub expectation: f64,
    pub a: f64,
    pub threshold: f64,
    pub exact_tail: f64,
    pub bound_optimal: f64,
    pub bound_explicit: f64,
    pub tail_ok: bool,
    pub mgf_t: f64,
    pub log_exact_mgf: f64,
    pub log_mgf_termwise: f64,
    pub log_mgf_klocal: f64,
    pub mgf_ok: bool,
    pub termwise_le_klocal: bool,
}

impl VerifyRow {
    pub fn ok(&self) -> bool {
        self.tail_ok && self.mgf_ok && self.termwise_le_klocal
    }
}

pub const CSV_HEADER: [&str; 19] = [
    "instance",
    "n",
    "k_drawn",
    "k",
    "terms",
    "local_norm",
    "expectation",
    "a",
    "threshold",
    "exact_tail",
    "bound_optimal",
    "bound_explicit",
    "tail_ok",
    "mgf_t",
    "log_exact_mgf",
    "log_mgf_termwise",
    "log_mgf_klocal",
    "mgf_ok",
    "termwise_le_klocal",
];

#[derive(Clone, Debug, Serialize)]
pub struct VerifySummary {
    pub seed: u64,
    pub instances: usize,
    pub rows: usize,
    pub tail_violations: usize,
    pub mgf_violations: usize,
    pub ordering_violations: usize,
    /// Smallest `bound - exact_tail` over all rows.
    pub min_tail_slack: f64,
    /// Largest `log exact MGF - log bound` over both forms.
    pub max_mgf_log_excess: f64,
}

impl VerifySummary {
    pub fn passed(&self) -> bool {
        self.tail_violations == 0 && self.mgf_violations == 0 && self.ordering_violations == 0
    }
}

pub fn verify(cfg: &VerifyConfig) -> Result<(Vec<VerifyRow>, VerifySummary)> {
    if cfg.n_min < 1 || cfg.n_max < cfg.n_min || cfg.k_choices.is_empty() || cfg.k_choices.contains(&0) {
        return Err(invalid("config", "need 1 <= n_min <= n_max and positive localities"));
    }
    if cfg.a_grid.iter().any(|&g| !(g > 0.0)) {
        return Err(invalid("a-grid", "deviations must be positive"));
    }
    let per_instance: Vec<Result<Vec<VerifyRow>>> =
        (0..cfg.instances).into_par_iter().map(|i| run_instance(cfg, i)).collect();
    let mut rows = Vec::with_capacity(cfg.instances * cfg.a_grid.len());
    for r in per_instance {
        rows.extend(r?);
    }
    let summary = VerifySummary {
        seed: cfg.seed,
        instances: cfg.instances,
        rows: rows.len(),
        tail_violations: rows.iter().filter(|r| !r.tail_ok).count(),
        mgf_violations: rows.iter().filter(|r| !r.mgf_ok).count(),
        ordering_violations: rows.iter().filter(|r| !r.termwise_le_klocal).count(),
        min_tail_slack: rows
            .iter()
            .map(|r| r.bound_optimal.min(r.bound_explicit) - r.exact_tail)
            .fold(f64::INFINITY, f64::min),
        max_mgf_log_excess: rows
            .iter()
            .map(|r| (r.log_exact_mgf - r.log_mgf_termwise).max(r.log_exact_mgf - r.log_mgf_klocal))
            .fold(f64::NEG_INFINITY, f64::max),
    };
    Ok((rows, summary))
}

pub fn run_instance(cfg: &VerifyConfig, index: usize) -> Result<Vec<VerifyRow>> {
    let mut rng = instance_rng(cfg.seed, index as u64);
    let n = rng.random_range(cfg.n_min..=cfg.n_max);
    let k_drawn = cfg.k_choices[rng.random_range(0..cfg.k_choices.len())].min(n);
    let factors = random_product_factors(&mut rng, n, cfg.q, cfg.max_depolarize)?;
    let h = random_local_observable(&mut rng, n, cfg.q, k_drawn)?;
    let k = h.locality().max(1);
    let l = h.local_norm();
    let rho = product_state(&factors)?;
    let (spectrum, weights) = spectral_weights(&rho, &assemble(&h)?)?;
    let mean = mgf_bound_product(&h, &factors)?.expectation;
    let nf = n as f64;

    let mut rows = Vec::with_capacity(cfg.a_grid.len());
    for &g in &cfg.a_grid {
        let a = g * l;
        let threshold = mean + nf * a;
        let exact_tail = tail_from_weights(&spectrum.eigenvalues, &weights, threshold);
        let optimal = tail_bound_product(a, n, k, l, false)?;
        let explicit = tail_bound_product(a, n, k, l, true)?;

        let (_, s) = F_and_sstar(a * k as f64 / l)?;
        let t = s / (k as f64 * l);
        let mgf = mgf_bound_product(&h.scaled(t), &factors)?;
        let log_exact = log_mgf_from_weights(&spectrum.eigenvalues, &weights, t);
        let mgf_tol = cfg.mgf_slack.ln_1p();

        rows.push(VerifyRow {
            instance: index,
            n,
            k_drawn,
            k,
            terms: h.terms().len(),
            local_norm: l,
            expectation: mean,
            a,
            threshold,
            exact_tail,
            bound_optimal: optimal.bound_value,
            bound_explicit: explicit.bound_value,
            tail_ok: exact_tail <= optimal.bound_value.min(explicit.bound_value) + cfg.tail_slack,
            mgf_t: t,
            log_exact_mgf: log_exact,
            log_mgf_termwise: mgf.termwise.log_value,
            log_mgf_klocal: mgf.k_local.log_value,
            mgf_ok: log_exact <= mgf.termwise.log_value.min(mgf.k_local.log_value) + mgf_tol,
            termwise_le_klocal: mgf.termwise.log_value <= mgf.k_local.log_value + 1e-12 * mgf.k_local.log_value.abs().max(1.0),
        });
    }
    Ok(rows)
}
