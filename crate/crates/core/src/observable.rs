//! Local observables `H = c·I + Σ_Λ h_Λ` kept as an explicit decomposition.
//!
//! The local norm reported here is the one of the stored decomposition,
//! `2 max_x Σ_{Λ∋x} ‖h_Λ‖`. It upper-bounds the decomposition-minimizing
//! local norm, and every concentration bound downstream is monotone in it.
//!
//! Construction normalizes the decomposition in two ways that never increase
//! the norm: terms on the same region are merged, and terms proportional to
//! the identity are moved into the scalar `constant` (the empty-region term).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::{
    self, c64, config_offsets, expectation_complex, hermitian_deviation, partial_trace, pauli, CMat, DenseOperator,
    HERMITIAN_TOL,
};

/// Default cap on `q^n` for [`assemble`].
pub const DEFAULT_DIM_CAP: usize = 1 << 14;

/// One term of the external term schema.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub sites: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli: Option<String>,
    /// Row-major `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
    #[serde(default = "unit")]
    pub coeff: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug)]
pub struct Term {
    region: Vec<usize>,
    op: DenseOperator,
    norm: f64,
}

impl Term {
    pub fn region(&self) -> &[usize] {
        &self.region
    }

    pub fn operator(&self) -> &DenseOperator {
        &self.op
    }

    /// Operator norm of the term.
    pub fn norm(&self) -> f64 {
        self.norm
    }
}

#[derive(Clone, Debug)]
pub struct LocalObservable {
    n: usize,
    q: usize,
    constant: f64,
    terms: Vec<Term>,
    locality: usize,
    per_site: Vec<f64>,
    local_norm: f64,
}

/// Output of [`local_norm`].
#[derive(Clone, Debug, PartialEq)]
pub struct LocalNorm {
    pub norm: f64,
    pub k: usize,
    pub per_site: Vec<f64>,
}

/// Reorders the tensor factors of `m` from `from` (site order of `m`) to
/// ascending site order.
fn to_ascending(m: &CMat, from: &[usize], q: usize) -> (Vec<usize>, CMat) {
    let mut sorted = from.to_vec();
    sorted.sort_unstable();
    if sorted == from {
        return (sorted, m.clone());
    }
    let positions: Vec<usize> = sorted.iter().map(|s| from.iter().position(|x| x == s).unwrap()).collect();
    let map = config_offsets(&positions, from.len(), q);
    let d = m.nrows();
    (sorted, CMat::from_fn(d, d, |a, b| m[(map[a], map[b])]))
}

fn identity_part(m: &CMat) -> Option<f64> {
    let d = m.nrows();
    let c = (0..d).map(|i| m[(i, i)].re).sum::<f64>() / d as f64;
    let off = (0..d).all(|j| {
        (0..d).all(|i| {
            let target = if i == j { c64::new(c, 0.0) } else { c64::new(0.0, 0.0) };
            (m[(i, j)] - target).norm() <= HERMITIAN_TOL
        })
    });
    off.then_some(c)
}

impl LocalObservable {
    /// Builds an observable from `(region, matrix)` pairs; each matrix acts on
    /// its region with the first listed site most significant.
    pub fn new(n: usize, q: usize, constant: f64, terms: Vec<(Vec<usize>, CMat)>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "need at least one site"));
        }
        let mut constant = constant;
        let mut merged: Vec<(Vec<usize>, CMat)> = Vec::new();
        for (index, (region, m)) in terms.into_iter().enumerate() {
            let bad = |reason: String| Error::Term { index, reason };
            if region.is_empty() {
                return Err(bad("empty region".into()));
            }
            for &s in &region {
                if s >= n {
                    return Err(bad(format!("site {s} out of range for {n} sites")));
                }
            }
            let mut seen = region.clone();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(bad("repeated site".into()));
            }
            let d = tensor::checked_pow(q, region.len())?;
            if m.nrows() != d || m.ncols() != d {
                return Err(bad(format!("matrix is {}x{}, expected {d}x{d}", m.nrows(), m.ncols())));
            }
            let dev = hermitian_deviation(&m);
            if dev > HERMITIAN_TOL {
                return Err(bad(format!("matrix is not Hermitian (deviation {dev:e})")));
            }
            let (region, m) = to_ascending(&m, &region, q);
            if let Some(c) = identity_part(&m) {
                constant += c;
                continue;
            }
            match merged.iter_mut().find(|(r, _)| *r == region) {
                Some((_, acc)) => *acc = &*acc + &m,
                None => merged.push((region, m)),
            }
        }
        let mut out_terms = Vec::with_capacity(merged.len());
        for (region, m) in merged {
            if let Some(c) = identity_part(&m) {
                constant += c;
                continue;
            }
            let op = DenseOperator::hermitian(m, region.clone(), q)?;
            out_terms.push(Term { region, norm: tensor::operator_norm(&op)?, op });
        }
        Ok(Self::from_parts(n, q, constant, out_terms))
    }

    fn from_parts(n: usize, q: usize, constant: f64, terms: Vec<Term>) -> Self {
        let mut per_site = vec![0.0; n];
        for t in &terms {
            for &x in &t.region {
                per_site[x] += t.norm;
            }
        }
        let local_norm = 2.0 * per_site.iter().fold(0.0f64, |a, &b| a.max(b));
        let locality = terms.iter().map(|t| t.region.len()).max().unwrap_or(0);
        Self { n, q, constant, terms, locality, per_site, local_norm }
    }

    /// Transverse-field Ising chain `-J Σ Z_i Z_{i+1} - h Σ X_i`.
    pub fn transverse_field_ising(n: usize, coupling: f64, field: f64, periodic: bool) -> Result<Self> {
        let mut terms = Vec::new();
        let bonds = if periodic && n > 2 { n } else { n.saturating_sub(1) };
        for i in 0..bonds {
            terms.push((vec![i, (i + 1) % n], scaled(&pauli::string("ZZ").unwrap(), -coupling)));
        }
        for i in 0..n {
            terms.push((vec![i], scaled(&pauli::matrix('X').unwrap(), -field)));
        }
        Self::new(n, 2, 0.0, terms)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Coefficient of the identity (the empty-region term).
    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Largest region size; 0 for a multiple of the identity.
    pub fn locality(&self) -> usize {
        self.locality
    }

    pub fn local_norm(&self) -> f64 {
        self.local_norm
    }

    pub fn per_site(&self) -> &[f64] {
        &self.per_site
    }

    /// `t·H`.
    pub fn scaled(&self, t: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|term| Term { region: term.region.clone(), op: term.op.scaled(t), norm: term.norm * t.abs() })
            .collect();
        Self::from_parts(self.n, self.q, self.constant * t, terms)
    }

    /// Term-list concatenation (`H + G`), merged region by region.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.q != other.q {
            return Err(invalid("observable", "observables live on different systems"));
        }
        let terms = self
            .terms
            .iter()
            .chain(other.terms.iter())
            .map(|t| (t.region.clone(), t.op.matrix().clone()))
            .collect();
        Self::new(self.n, self.q, self.constant + other.constant, terms)
    }

    /// The stored decomposition in the external term schema.
    pub fn to_specs(&self) -> Vec<TermSpec> {
        let mut out: Vec<TermSpec> = self
            .terms
            .iter()
            .map(|t| {
                let m = t.op.matrix();
                let d = m.nrows();
                let flat = (0..d * d).map(|k| [m[(k / d, k % d)].re, m[(k / d, k % d)].im]).collect();
                TermSpec { sites: t.region.clone(), pauli: None, matrix: Some(flat), coeff: 1.0 }
            })
            .collect();
        if self.constant != 0.0 && self.q == 2 {
            out.push(TermSpec { sites: vec![0], pauli: Some("I".into()), matrix: None, coeff: self.constant });
        }
        out
    }

    /// `<H>` under `rho` computed term by term from marginals.
    pub fn expectation(&self, rho: &DenseOperator) -> Result<f64> {
        let mut acc = self.constant;
        for t in &self.terms {
            acc += term_expectation(t, rho)?;
        }
        Ok(acc)
    }
}

fn scaled(m: &CMat, s: f64) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

fn term_expectation(t: &Term, rho: &DenseOperator) -> Result<f64> {
    let marginal = partial_trace(rho, &t.region)?;
    Ok(expectation_complex(marginal.matrix(), t.op.matrix())?.re)
}

/// Parses the external term schema.
pub fn parse_observable(n: usize, q: usize, description: &[TermSpec]) -> Result<LocalObservable> {
    let mut terms = Vec::with_capacity(description.len());
    for (index, spec) in description.iter().enumerate() {
        let bad = |reason: String| Error::Term { index, reason };
        let m = match (&spec.pauli, &spec.matrix) {
            (Some(_), Some(_)) => return Err(bad("give either `pauli` or `matrix`, not both".into())),
            (None, None) => return Err(bad("missing `pauli` or `matrix`".into())),
            (Some(p), None) => {
                if q != 2 {
                    return Err(bad("Pauli strings require q = 2".into()));
                }
                if let Some(ch) = p.chars().find(|c| !"IXYZ".contains(*c)) {
                    return Err(Error::UnknownPauli(ch));
                }
                if p.chars().count() != spec.sites.len() {
                    return Err(bad(format!("Pauli string `{p}` does not match {} sites", spec.sites.len())));
                }
                pauli::string(p).expect("letters checked")
            }
            (None, Some(flat)) => {
                let d = tensor::checked_pow(q, spec.sites.len())?;
                if flat.len() != d * d {
                    return Err(bad(format!("matrix has {} entries, expected {}", flat.len(), d * d)));
                }
                CMat::from_fn(d, d, |i, j| c64::new(flat[i * d + j][0], flat[i * d + j][1]))
            }
        };
        if !spec.coeff.is_finite() {
            return Err(bad("coefficient is not finite".into()));
        }
        terms.push((spec.sites.clone(), scaled(&m, spec.coeff)));
    }
    LocalObservable::new(n, q, 0.0, terms)
}

/// Local norm of the stored decomposition, its locality and the per-site sums.
pub fn local_norm(h: &LocalObservable) -> LocalNorm {
    LocalNorm { norm: h.local_norm, k: h.locality, per_site: h.per_site.clone() }
}

/// Replaces every term by `h_Λ - <h_Λ>_rho` and drops the constant, so the
/// result is `H - <H>_rho` with each term of zero mean.
pub fn center(h: &LocalObservable, rho: &DenseOperator) -> Result<LocalObservable> {
    let expected = tensor::checked_pow(h.q, h.n)?;
    if rho.dim() != expected || rho.support().len() != h.n {
        return Err(Error::DimensionMismatch { expected, found: rho.dim() });
    }
    center_with(h, |t| term_expectation(t, rho))
}

/// Centering against a product state given by its single-site factors.
pub fn center_product(h: &LocalObservable, factors: &[DenseOperator]) -> Result<LocalObservable> {
    let means = product_term_means(h, factors)?;
    let mut it = means.into_iter();
    center_with(h, |_| Ok(it.next().expect("one mean per term")))
}

/// `<h_Λ>` for every stored term under the product of `factors`.
pub fn product_term_means(h: &LocalObservable, factors: &[DenseOperator]) -> Result<Vec<f64>> {
    if factors.len() != h.n {
        return Err(Error::DimensionMismatch { expected: h.n, found: factors.len() });
    }
    h.terms
        .iter()
        .map(|t| {
            let mut marginal: Option<DenseOperator> = None;
            for &x in &t.region {
                let f = DenseOperator::new(factors[x].matrix().clone(), vec![x], h.q)?;
                marginal = Some(match marginal {
                    None => f,
                    Some(m) => m.kron(&f)?,
                });
            }
            let marginal = marginal.expect("regions are nonempty");
            Ok(expectation_complex(marginal.matrix(), t.op.matrix())?.re)
        })
        .collect()
}

fn center_with(h: &LocalObservable, mut mean: impl FnMut(&Term) -> Result<f64>) -> Result<LocalObservable> {
    let mut terms = Vec::with_capacity(h.terms.len());
    for t in &h.terms {
        let mu = mean(t)?;
        let d = t.op.dim();
        let m = CMat::from_fn(d, d, |i, j| if i == j { t.op.matrix()[(i, j)] - mu } else { t.op.matrix()[(i, j)] });
        let op = DenseOperator::hermitian(m, t.region.clone(), h.q)?;
        terms.push(Term { region: t.region.clone(), norm: tensor::operator_norm(&op)?, op });
    }
    Ok(LocalObservable::from_parts(h.n, h.q, 0.0, terms))
}

/// Full `q^n`-dimensional matrix of `H` with the default cap.
pub fn assemble(h: &LocalObservable) -> Result<DenseOperator> {
    assemble_capped(h, DEFAULT_DIM_CAP)
}

pub fn assemble_capped(h: &LocalObservable, cap: usize) -> Result<DenseOperator> {
    let dim = tensor::checked_pow(h.q, h.n)?;
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    let mut m = CMat::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = c64::new(h.constant, 0.0);
    }
    let all: Vec<usize> = (0..h.n).collect();
    for t in &h.terms {
        let inner = config_offsets(&t.region, h.n, h.q);
        let rest: Vec<usize> = all.iter().copied().filter(|x| !t.region.contains(x)).collect();
        let outer = config_offsets(&rest, h.n, h.q);
        let tm = t.op.matrix();
        for &c in &outer {
            for (b, &ob) in inner.iter().enumerate() {
                for (a, &oa) in inner.iter().enumerate() {
                    m[(oa + c, ob + c)] += tm[(a, b)];
                }
            }
        }
    }
    DenseOperator::hermitian(m, all, h.q)
}
