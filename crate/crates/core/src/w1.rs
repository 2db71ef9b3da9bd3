//! The k-local quantum W1 distance.
//!
//! The primal program is
//! `min Σ_x a_x  s.t.  ‖ρ_Λ - σ_Λ‖₁ <= 2 Σ_{x∈Λ} a_x  (|Λ| <= k),  a >= 0`.
//! We hand its LP dual to the simplex:
//! `max Σ_Λ b_Λ y_Λ  s.t.  Σ_{Λ∋x} 2 y_Λ <= 1,  y >= 0`, with `b_Λ = ‖ρ_Λ - σ_Λ‖₁`.
//! The slack basis is feasible, the simplex multipliers are the site weights
//! `a_x`, and `y` yields an explicit witness
//! `H_w = Σ_Λ y_Λ sign(ρ_Λ - σ_Λ)` with local norm at most one and
//! `Tr[(ρ - σ) H_w]` equal to the optimum.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::Geometry;
use crate::lp::{self, LpStatus};
use crate::observable::LocalObservable;
use crate::tensor::{self, expectation_complex, partial_trace, spectrum_of, CMat, DenseOperator};

/// Eigenvalues of a marginal difference below this magnitude get sign zero.
const SIGN_TOL: f64 = 1e-14;

/// A witness whose local norm exceeds one by at most this factor is rescaled.
const WITNESS_SLACK: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    InfeasibleReport,
    IterationLimit,
}

#[derive(Clone, Debug, Serialize)]
pub struct W1Result {
    pub value: f64,
    pub site_weights: Vec<f64>,
    pub k: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub solver_status: SolverStatus,
    pub active_regions: Vec<Vec<usize>>,
    pub iterations: usize,
    /// `Tr[(ρ - σ) H_w]` for the LP witness.
    pub witness_value: f64,
    /// Fixed-decomposition local norm of the LP witness.
    pub witness_local_norm: f64,
    #[serde(skip)]
    pub witness: Option<LocalObservable>,
}

impl W1Result {
    /// `value - witness_value`; zero up to rounding when the solve is optimal.
    pub fn duality_gap(&self) -> f64 {
        self.value - self.witness_value
    }
}

/// Every nonempty `Λ ⊆ {0..n}` with `|Λ| <= k`, in lexicographic order.
pub fn enumerate_regions(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > n {
        return Err(invalid("k", format!("locality {k} must lie in 1..={n}")));
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    extend_regions(0, n, k, &mut current, &mut out);
    Ok(out)
}

fn extend_regions(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    for x in start..n {
        current.push(x);
        out.push(current.clone());
        if current.len() < k {
            extend_regions(x + 1, n, k, current, out);
        }
        current.pop();
    }
}

fn check_pair(rho: &DenseOperator, sigma: &DenseOperator) -> Result<usize> {
    if rho.dim() != sigma.dim() || rho.q() != sigma.q() || rho.support() != sigma.support() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    let n = rho.support().len();
    if rho.support().iter().enumerate().any(|(i, &s)| i != s) {
        return Err(invalid("support", "states must be defined on sites 0..n in order"));
    }
    Ok(n)
}

struct Marginal {
    region: Vec<usize>,
    diff: CMat,
    trace_norm: f64,
}

fn marginal_differences(diff: &DenseOperator, regions: &[Vec<usize>]) -> Result<Vec<Marginal>> {
    regions
        .par_iter()
        .map(|region| {
            let m = partial_trace(diff, region)?;
            let trace_norm = spectrum_of(m.matrix())?.eigenvalues.iter().map(|x| x.abs()).sum();
            Ok(Marginal { region: region.clone(), diff: m.into_matrix(), trace_norm })
        })
        .collect()
}

fn sign_of(m: &CMat) -> Result<CMat> {
    let spec = spectrum_of(m)?;
    spec.apply(|x| if x > SIGN_TOL { 1.0 } else if x < -SIGN_TOL { -1.0 } else { 0.0 })
}

/// Solves the k-local W1 program for two density matrices on the sites of `geom`.
pub fn w1_primal(rho: &DenseOperator, sigma: &DenseOperator, k: usize, geom: &Geometry) -> Result<W1Result> {
    let n = check_pair(rho, sigma)?;
    if n != geom.n() || rho.q() != geom.q() {
        return Err(Error::DimensionMismatch { expected: geom.n(), found: n });
    }
    let regions = enumerate_regions(n, k)?;
    let diff = rho.sub(sigma)?;
    let marginals = marginal_differences(&diff, &regions)?;
    let b: Vec<f64> = marginals.iter().map(|m| m.trace_norm).collect();

    let rows: Vec<Vec<f64>> = (0..n)
        .map(|x| regions.iter().map(|r| if r.contains(&x) { 2.0 } else { 0.0 }).collect())
        .collect();
    let sol = lp::maximize(&b, &rows, &vec![1.0; n])?;

    let (lower_bound, upper_bound) = sandwich(n, &marginals);
    let (solver_status, value, site_weights) = match sol.status {
        LpStatus::Optimal => (SolverStatus::Optimal, sol.objective, sol.dual.clone()),
        // fall back to the feasible point behind the upper bound
        status => {
            let weights = upper_weights(n, &marginals);
            let status = if status == LpStatus::Unbounded {
                SolverStatus::InfeasibleReport
            } else {
                SolverStatus::IterationLimit
            };
            (status, weights.iter().sum(), weights)
        }
    };

    let active_regions = regions
        .iter()
        .zip(&b)
        .filter(|(r, &bl)| {
            let lhs: f64 = 2.0 * r.iter().map(|&x| site_weights[x]).sum::<f64>();
            (lhs - bl).abs() <= 1e-9 * (1.0 + bl)
        })
        .map(|(r, _)| r.clone())
        .collect();

    let mut terms = Vec::new();
    for (m, &y) in marginals.iter().zip(&sol.primal) {
        if y > 0.0 {
            let s = sign_of(&m.diff)?;
            terms.push((m.region.clone(), CMat::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] * y)));
        }
    }
    let witness = LocalObservable::new(n, rho.q(), 0.0, terms)?;
    let witness_value = witness_trace(&diff, &witness)?;

    Ok(W1Result {
        value,
        site_weights,
        k,
        lower_bound,
        upper_bound,
        solver_status,
        active_regions,
        iterations: sol.iterations,
        witness_value,
        witness_local_norm: witness.local_norm(),
        witness: Some(witness),
    })
}

fn upper_weights(n: usize, marginals: &[Marginal]) -> Vec<f64> {
    let mut a = vec![0.0f64; n];
    for m in marginals {
        let share = m.trace_norm / (2.0 * m.region.len() as f64);
        for &x in &m.region {
            a[x] = a[x].max(share);
        }
    }
    a
}

fn sandwich(n: usize, marginals: &[Marginal]) -> (f64, f64) {
    let lower = 0.5 * marginals.iter().filter(|m| m.region.len() == 1).map(|m| m.trace_norm).sum::<f64>();
    (lower, upper_weights(n, marginals).iter().sum())
}

/// `Tr[(ρ - σ) H]` evaluated term by term on marginals of the difference.
fn witness_trace(diff: &DenseOperator, h: &LocalObservable) -> Result<f64> {
    let mut acc = 0.0;
    for t in h.terms() {
        let m = partial_trace(diff, t.region())?;
        acc += expectation_complex(m.matrix(), t.operator().matrix())?.re;
    }
    Ok(acc)
}

/// `Tr[(ρ - σ) H]` for a witness of local norm at most one. Witnesses up to
/// 10% above one are rescaled to unit local norm; larger ones are rejected.
pub fn dual_witness_value(rho: &DenseOperator, sigma: &DenseOperator, h: &LocalObservable) -> Result<f64> {
    let n = check_pair(rho, sigma)?;
    if h.n() != n || h.q() != rho.q() {
        return Err(Error::DimensionMismatch { expected: n, found: h.n() });
    }
    let norm = h.local_norm();
    if norm > WITNESS_SLACK {
        return Err(Error::WitnessNorm(norm));
    }
    let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
    Ok(scale * witness_trace(&rho.sub(sigma)?, h)?)
}

/// Single-site lower bound and marginal upper bound on the k-local W1 distance.
pub fn w1_bounds(rho: &DenseOperator, sigma: &DenseOperator, k: usize) -> Result<(f64, f64)> {
    let n = check_pair(rho, sigma)?;
    let regions = enumerate_regions(n, k)?;
    let marginals = marginal_differences(&rho.sub(sigma)?, &regions)?;
    Ok(sandwich(n, &marginals))
}

/// Average single-site marginal `(1/n) Σ_x ρ_x`.
pub fn average_marginal(rho: &DenseOperator) -> Result<DenseOperator> {
    let n = rho.support().len();
    let q = rho.q();
    let mut acc = CMat::zeros(q, q);
    for &x in rho.support() {
        let m = partial_trace(rho, &[x])?;
        acc = &acc + m.matrix();
    }
    let scaled = CMat::from_fn(q, q, |i, j| acc[(i, j)] / n as f64);
    DenseOperator::new(scaled, vec![0], q)
}

/// `½‖ρ - σ‖₁`.
pub fn trace_distance(rho: &DenseOperator, sigma: &DenseOperator) -> Result<f64> {
    Ok(0.5 * tensor::trace_norm(&rho.sub(sigma)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observable::{parse_observable, TermSpec};

    fn basis(digits: &[usize]) -> DenseOperator {
        DenseOperator::basis_state(digits, (0..digits.len()).collect(), 2).unwrap()
    }

    #[test]
    fn region_enumeration() {
        assert_eq!(enumerate_regions(3, 1).unwrap(), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(enumerate_regions(3, 2).unwrap().len(), 6);
        assert_eq!(enumerate_regions(10, 2).unwrap().len(), 55);
        assert_eq!(enumerate_regions(3, 3).unwrap().len(), 7);
        assert_eq!(enumerate_regions(3, 2).unwrap()[..3], [vec![0], vec![0, 1], vec![0, 2]]);
        assert!(enumerate_regions(3, 4).is_err());
        assert!(enumerate_regions(3, 0).is_err());
    }

    #[test]
    fn hamming_pair() {
        let g = Geometry::chain(2, 2).unwrap();
        for k in 1..=2 {
            let r = w1_primal(&basis(&[0, 0]), &basis(&[1, 1]), k, &g).unwrap();
            assert_eq!(r.solver_status, SolverStatus::Optimal);
            assert!((r.value - 2.0).abs() < 1e-12);
            assert!((r.site_weights.iter().sum::<f64>() - r.value).abs() < 1e-12);
            assert!(r.duality_gap().abs() < 1e-12);
            assert!(r.witness_local_norm <= 1.0 + 1e-12);
        }
        assert_eq!(w1_bounds(&basis(&[0, 0]), &basis(&[1, 1]), 1).unwrap(), (2.0, 2.0));
    }

    #[test]
    fn identical_states() {
        let g = Geometry::chain(2, 2).unwrap();
        let rho = DenseOperator::maximally_mixed(vec![0, 1], 2).unwrap();
        let r = w1_primal(&rho, &rho, 2, &g).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.site_weights.iter().all(|&a| a == 0.0));
        assert_eq!(w1_bounds(&rho, &rho, 2).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn witness_examples() {
        let z = |s: usize| TermSpec { sites: vec![s], pauli: Some("Z".into()), matrix: None, coeff: 0.5 };
        let h = parse_observable(2, 2, &[z(0), z(1)]).unwrap();
        assert!((h.local_norm() - 1.0).abs() < 1e-15);
        assert!((dual_witness_value(&basis(&[0, 0]), &basis(&[1, 1]), &h).unwrap() - 2.0).abs() < 1e-14);
        let id = parse_observable(2, 2, &[TermSpec { sites: vec![0], pauli: Some("I".into()), matrix: None, coeff: 1.0 }])
            .unwrap();
        assert_eq!(dual_witness_value(&basis(&[0, 0]), &basis(&[1, 1]), &id).unwrap(), 0.0);
        let big = parse_observable(2, 2, &[TermSpec { sites: vec![0], pauli: Some("Z".into()), matrix: None, coeff: 1.0 }])
            .unwrap();
        assert!(matches!(dual_witness_value(&basis(&[0, 0]), &basis(&[1, 1]), &big), Err(Error::WitnessNorm(_))));
    }

    #[test]
    fn average_marginal_of_uniform_product() {
        let rho = basis(&[1, 1, 1]);
        let avg = average_marginal(&rho).unwrap();
        let single = partial_trace(&rho, &[2]).unwrap();
        assert_eq!(tensor::max_abs_diff(avg.matrix(), single.matrix()), 0.0);
    }
}
