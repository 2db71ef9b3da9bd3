//! State families on a lattice (product, Gibbs, microcanonical, explicit) and
//! an empirical correlation-length estimate.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{Geometry, METRIC_TOL};
use crate::observable::{assemble, LocalObservable};
use crate::tensor::{
    self, c64, expectation_complex, herm_spectrum, partial_trace, CMat, DenseOperator, Spectrum,
};

/// Grid to which eigenvalues are rounded before shell membership tests.
pub const SHELL_ROUNDING: f64 = 1e-10;

/// Covariances at or below this level count as zero in the correlation fit.
pub const COVARIANCE_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug)]
pub enum StateSpec {
    /// Single-site density matrices, one per site in site order.
    Product(Vec<DenseOperator>),
    Gibbs { observable: LocalObservable, beta: f64 },
    Microcanonical { observable: LocalObservable, energy: f64, delta: f64 },
    Explicit(DenseOperator),
}

pub fn build_state(spec: &StateSpec, geom: &Geometry) -> Result<DenseOperator> {
    let (n, q) = (geom.n(), geom.q());
    let check_system = |h: &LocalObservable| {
        if h.n() != n || h.q() != q {
            Err(invalid("observable", format!("defined on {} sites of dimension {}, geometry has {n} of {q}", h.n(), h.q())))
        } else {
            Ok(())
        }
    };
    match spec {
        StateSpec::Product(factors) => {
            if factors.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: factors.len() });
            }
            product_state(factors)
        }
        StateSpec::Gibbs { observable, beta } => {
            check_system(observable)?;
            let spectrum = herm_spectrum(&assemble(observable)?)?;
            gibbs_from_spectrum(&spectrum, *beta, q)
        }
        StateSpec::Microcanonical { observable, energy, delta } => {
            check_system(observable)?;
            let spectrum = herm_spectrum(&assemble(observable)?)?;
            Ok(microcanonical_from_spectrum(&spectrum, *energy, *delta, q)?.0)
        }
        StateSpec::Explicit(rho) => {
            let dim = tensor::checked_pow(q, n)?;
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: rho.dim() });
            }
            DenseOperator::density(rho.matrix().clone(), (0..n).collect(), q)
        }
    }
}

/// `⊗_x rho_x` on sites `0..n`; every factor must be a single-site density matrix.
pub fn product_state(factors: &[DenseOperator]) -> Result<DenseOperator> {
    let Some(first) = factors.first() else {
        return Err(invalid("factors", "empty product"));
    };
    let q = first.q();
    let mut out: Option<DenseOperator> = None;
    for (x, f) in factors.iter().enumerate() {
        if f.dim() != q || f.q() != q {
            return Err(Error::DimensionMismatch { expected: q, found: f.dim() });
        }
        let f = DenseOperator::density(f.matrix().clone(), vec![x], q)?;
        out = Some(match out {
            None => f,
            Some(acc) => acc.kron(&f)?,
        });
    }
    Ok(out.expect("nonempty"))
}

/// `e^{-βH}/Tr e^{-βH}` from a spectrum; the support is all `log_q(dim)` sites.
pub fn gibbs_from_spectrum(spectrum: &Spectrum, beta: f64, q: usize) -> Result<DenseOperator> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(invalid("beta", format!("inverse temperature {beta} must be finite and nonnegative")));
    }
    let weights = gibbs_weights(&spectrum.eigenvalues, beta);
    let matrix = spectrum_mix(spectrum, &weights);
    DenseOperator::density_unchecked(matrix, (0..sites_for(spectrum.dim(), q)?).collect(), q)
}

/// Normalized Boltzmann weights, shifted by the ground energy for stability.
pub fn gibbs_weights(eigenvalues: &[f64], beta: f64) -> Vec<f64> {
    let emin = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = eigenvalues.iter().map(|&e| (-beta * (e - emin)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Eigenvalue rounded to the shell grid.
pub fn rounded(lambda: f64) -> f64 {
    (lambda / SHELL_ROUNDING).round() * SHELL_ROUNDING
}

/// Membership in the half-open shell `(E - Δ, E]`.
pub fn in_shell(lambda: f64, energy: f64, delta: f64) -> bool {
    let r = rounded(lambda);
    energy - delta < r && r <= energy
}

pub fn shell_count(eigenvalues: &[f64], energy: f64, delta: f64) -> usize {
    eigenvalues.iter().filter(|&&l| in_shell(l, energy, delta)).count()
}

/// Normalized projector onto the eigenvalues in `(E - Δ, E]`, with the
/// shell dimension.
pub fn microcanonical_from_spectrum(
    spectrum: &Spectrum,
    energy: f64,
    delta: f64,
    q: usize,
) -> Result<(DenseOperator, usize)> {
    if !(delta > 0.0) {
        return Err(invalid("delta", format!("shell width {delta} must be positive")));
    }
    let count = shell_count(&spectrum.eigenvalues, energy, delta);
    if count == 0 {
        return Err(Error::EmptyShell { lower: energy - delta, upper: energy });
    }
    let weights: Vec<f64> = spectrum
        .eigenvalues
        .iter()
        .map(|&l| if in_shell(l, energy, delta) { 1.0 / count as f64 } else { 0.0 })
        .collect();
    let rho = DenseOperator::density_unchecked(
        spectrum_mix(spectrum, &weights),
        (0..sites_for(spectrum.dim(), q)?).collect(),
        q,
    )?;
    Ok((rho, count))
}

/// `Σ_i w_i |v_i><v_i|`, skipping zero weights.
pub(crate) fn spectrum_mix(spectrum: &Spectrum, weights: &[f64]) -> CMat {
    let d = spectrum.dim();
    let keep: Vec<usize> = (0..d).filter(|&i| weights[i] != 0.0).collect();
    let v = &spectrum.eigenvectors;
    let left = CMat::from_fn(d, keep.len(), |i, j| v[(i, keep[j])] * weights[keep[j]]);
    let right = CMat::from_fn(d, keep.len(), |i, j| v[(i, keep[j])]);
    &left * right.adjoint()
}

fn sites_for(dim: usize, q: usize) -> Result<usize> {
    let mut n = 0;
    let mut p = 1usize;
    while p < dim {
        p = p.checked_mul(q).ok_or(Error::DimensionCap { dim, cap: usize::MAX })?;
        n += 1;
    }
    if p != dim {
        return Err(invalid("dim", format!("{dim} is not a power of {q}")));
    }
    Ok(n)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationFit {
    #[serde(rename = "C")]
    pub c: f64,
    /// `f64::INFINITY` when no correlations were detected.
    pub xi: f64,
    pub residual: f64,
    /// Smallest prefactor with every sample below `C e^{-dist/ξ}` at the fitted ξ.
    pub c_envelope: f64,
    /// `(distance, max covariance)` per distance bin, increasing distance.
    pub samples: Vec<(f64, f64)>,
}

/// Generalized Gell-Mann matrices scaled to unit operator norm
/// (the Pauli matrices for `q = 2`).
pub fn default_probes(q: usize) -> Vec<CMat> {
    let zero = c64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(q * q - 1);
    for j in 0..q {
        for k in j + 1..q {
            out.push(CMat::from_fn(q, q, |a, b| {
                if (a, b) == (j, k) || (a, b) == (k, j) {
                    c64::new(1.0, 0.0)
                } else {
                    zero
                }
            }));
            out.push(CMat::from_fn(q, q, |a, b| {
                if (a, b) == (j, k) {
                    c64::new(0.0, -1.0)
                } else if (a, b) == (k, j) {
                    c64::new(0.0, 1.0)
                } else {
                    zero
                }
            }));
        }
    }
    for l in 1..q {
        // diag(1, ..., 1, -l, 0, ...) has operator norm l
        let s = 1.0 / l as f64;
        out.push(CMat::from_fn(q, q, |a, b| {
            if a != b {
                zero
            } else if a < l {
                c64::new(s, 0.0)
            } else if a == l {
                c64::new(-1.0, 0.0)
            } else {
                zero
            }
        }));
    }
    out
}

/// Max over probe pairs of `|<P_x P_y> - <P_x><P_y>|` for every site pair,
/// binned by distance and fitted to `C e^{-dist/ξ}` by least squares in log space.
pub fn estimate_correlation_length(rho: &DenseOperator, geom: &Geometry, probes: &[CMat]) -> Result<CorrelationFit> {
    let (n, q) = (geom.n(), geom.q());
    if n < 3 {
        return Err(invalid("n", "correlation fit needs at least 3 sites"));
    }
    let dim = tensor::checked_pow(q, n)?;
    if rho.dim() != dim || rho.support().len() != n {
        return Err(Error::DimensionMismatch { expected: dim, found: rho.dim() });
    }
    if probes.is_empty() {
        return Err(invalid("probes", "no probe operators"));
    }
    for p in probes {
        if p.nrows() != q || p.ncols() != q {
            return Err(Error::DimensionMismatch { expected: q, found: p.nrows() });
        }
        let norm = tensor::operator_norm(&DenseOperator::hermitian(p.clone(), vec![0], q)?)?;
        if (norm - 1.0).abs() > 1e-9 {
            return Err(invalid("probes", format!("probe operator norm {norm} is not 1")));
        }
    }

    let singles: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            let m = partial_trace(rho, &[x])?;
            probes.iter().map(|p| Ok(expectation_complex(m.matrix(), p)?.re)).collect()
        })
        .collect::<Result<_>>()?;

    let mut bins: Vec<(f64, f64)> = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let pair = partial_trace(rho, &[x, y])?;
            let mut worst = 0.0f64;
            for (i, p) in probes.iter().enumerate() {
                for (j, r) in probes.iter().enumerate() {
                    let pr = kron2(p, r);
                    let joint = expectation_complex(pair.matrix(), &pr)?.re;
                    worst = worst.max((joint - singles[x][i] * singles[y][j]).abs());
                }
            }
            let d = geom.dist(x, y);
            match bins.iter_mut().find(|(bd, _)| (bd - d).abs() <= METRIC_TOL) {
                Some(bin) => bin.1 = bin.1.max(worst),
                None => bins.push((d, worst)),
            }
        }
    }
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    fit_exponential(bins)
}

fn kron2(a: &CMat, b: &CMat) -> CMat {
    let (p, q) = (a.nrows(), b.nrows());
    CMat::from_fn(p * q, p * q, |i, j| a[(i / q, j / q)] * b[(i % q, j % q)])
}

/// Least-squares fit of `log cov = log C - dist/ξ` over the bins above the floor.
pub fn fit_exponential(samples: Vec<(f64, f64)>) -> Result<CorrelationFit> {
    let usable: Vec<(f64, f64)> =
        samples.iter().filter(|&&(_, c)| c > COVARIANCE_FLOOR).map(|&(d, c)| (d, c.ln())).collect();
    if usable.is_empty() {
        return Ok(CorrelationFit { c: 0.0, xi: f64::INFINITY, residual: 0.0, c_envelope: 0.0, samples });
    }
    if usable.len() < 2 {
        return Err(Error::FitUnderdetermined { usable: usable.len(), samples });
    }
    let m = usable.len() as f64;
    let mean_d = usable.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mean_d).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mean_d) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_d;
    if !(slope < 0.0) {
        return Err(Error::NotDecaying(slope));
    }
    let residual = (usable.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / m).sqrt();
    let xi = -1.0 / slope;
    let c_envelope = samples.iter().map(|&(d, c)| c * (d / xi).exp()).fold(0.0, f64::max);
    Ok(CorrelationFit { c: intercept.exp(), xi, residual, c_envelope, samples })
}
