//! Dense complex linear algebra on `q^m`-dimensional tensor-product spaces.
//!
//! Every operator carries the ordered list of sites it acts on. The first
//! site of the support is the most significant tensor factor: for a full
//! system of `n` sites this means site 0 is the leftmost factor, so
//! `Z` on site 0 of two qubits is `Z ⊗ I = diag(1, 1, -1, -1)`.

use faer::Mat;

use crate::error::{invalid, Error, Result};

pub use faer::c64;

/// Column-major dense complex matrix.
pub type CMat = Mat<c64>;

/// Absolute tolerance on `max |M - M†|` for an operator to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Largest trace deviation that is silently renormalized away.
pub const TRACE_RENORM_TOL: f64 = 1e-9;
/// Most negative eigenvalue tolerated in a density matrix.
pub const PSD_TOL: f64 = 1e-12;

/// A square complex matrix acting on an ordered set of sites.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    matrix: CMat,
    support: Vec<usize>,
    q: usize,
    hermitian: bool,
}

/// Eigen-decomposition of a Hermitian operator; eigenvalues are descending and
/// the columns of `eigenvectors` are the matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

/// Output of [`norms_and_expectation`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormReport {
    pub operator_norm: f64,
    pub trace_norm: f64,
    pub expectation: Option<f64>,
}

pub(crate) fn checked_pow(q: usize, m: usize) -> Result<usize> {
    u32::try_from(m)
        .ok()
        .and_then(|m| q.checked_pow(m))
        .ok_or_else(|| invalid("dim", format!("{q}^{m} overflows")))
}

fn validate_support(support: &[usize]) -> Result<()> {
    let mut seen = support.to_vec();
    seen.sort_unstable();
    for w in seen.windows(2) {
        if w[0] == w[1] {
            return Err(Error::RepeatedSite(w[0]));
        }
    }
    Ok(())
}

pub(crate) fn hermitian_deviation(m: &CMat) -> f64 {
    let d = m.nrows();
    let mut dev = 0.0f64;
    for j in 0..d {
        for i in j..d {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// For each configuration of the listed positions (first position most
/// significant) the linear offset it contributes to a full index over
/// `total` positions.
pub(crate) fn config_offsets(positions: &[usize], total: usize, q: usize) -> Vec<usize> {
    let mut offsets = vec![0usize];
    for &p in positions {
        let stride = q.pow((total - 1 - p) as u32);
        let mut next = Vec::with_capacity(offsets.len() * q);
        for &o in &offsets {
            for digit in 0..q {
                next.push(o + digit * stride);
            }
        }
        offsets = next;
    }
    offsets
}

fn complement(positions: &[usize], total: usize) -> Vec<usize> {
    (0..total).filter(|p| !positions.contains(p)).collect()
}

impl DenseOperator {
    /// Wraps a matrix. The Hermitian flag is set when the matrix is Hermitian
    /// within [`HERMITIAN_TOL`].
    pub fn new(matrix: CMat, support: Vec<usize>, q: usize) -> Result<Self> {
        if q < 2 {
            return Err(invalid("q", "local dimension must be at least 2"));
        }
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        validate_support(&support)?;
        let expected = checked_pow(q, support.len())?;
        if matrix.nrows() != expected {
            return Err(Error::DimensionMismatch { expected, found: matrix.nrows() });
        }
        let hermitian = hermitian_deviation(&matrix) <= HERMITIAN_TOL;
        Ok(Self { matrix, support, q, hermitian })
    }

    /// Like [`DenseOperator::new`] but rejects non-Hermitian input and
    /// symmetrizes away the residual asymmetry.
    pub fn hermitian(matrix: CMat, support: Vec<usize>, q: usize) -> Result<Self> {
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let mut op = Self::new(symmetrize(&matrix), support, q)?;
        op.hermitian = true;
        Ok(op)
    }

    /// Validated density matrix: Hermitian, positive semidefinite and of unit
    /// trace. A trace within [`TRACE_RENORM_TOL`] of one is renormalized.
    pub fn density(matrix: CMat, support: Vec<usize>, q: usize) -> Result<Self> {
        let op = Self::hermitian(matrix, support, q)?;
        let op = op.renormalized()?;
        let spec = herm_spectrum(&op)?;
        let min = spec.eigenvalues.last().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(op)
    }

    /// Density matrix known to be positive by construction; only the trace is
    /// checked and renormalized.
    pub(crate) fn density_unchecked(matrix: CMat, support: Vec<usize>, q: usize) -> Result<Self> {
        let mut op = Self::new(symmetrize(&matrix), support, q)?;
        op.hermitian = true;
        op.renormalized()
    }

    fn renormalized(mut self) -> Result<Self> {
        let tr = self.trace().re;
        if (tr - 1.0).abs() > TRACE_RENORM_TOL {
            return Err(Error::InvalidTrace(tr - 1.0));
        }
        let inv = 1.0 / tr;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                self.matrix[(i, j)] *= inv;
            }
        }
        Ok(self)
    }

    pub fn identity(support: Vec<usize>, q: usize) -> Result<Self> {
        let d = checked_pow(q, support.len())?;
        Self::new(CMat::identity(d, d), support, q)
    }

    pub fn zeros(support: Vec<usize>, q: usize) -> Result<Self> {
        let d = checked_pow(q, support.len())?;
        Self::new(CMat::zeros(d, d), support, q)
    }

    /// Maximally mixed state on the given sites.
    pub fn maximally_mixed(support: Vec<usize>, q: usize) -> Result<Self> {
        let d = checked_pow(q, support.len())?;
        let w = 1.0 / d as f64;
        Self::density_unchecked(CMat::from_fn(d, d, |i, j| if i == j { c64::new(w, 0.0) } else { c64::new(0.0, 0.0) }), support, q)
    }

    pub fn from_real_diagonal(diag: &[f64], support: Vec<usize>, q: usize) -> Result<Self> {
        let d = diag.len();
        Self::new(
            CMat::from_fn(d, d, |i, j| if i == j { c64::new(diag[i], 0.0) } else { c64::new(0.0, 0.0) }),
            support,
            q,
        )
    }

    /// `|psi><psi|` for a (not necessarily normalized) vector.
    pub fn pure_state(psi: &[c64], support: Vec<usize>, q: usize) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(invalid("psi", "zero vector"));
        }
        let d = psi.len();
        let m = CMat::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / norm2);
        Self::density_unchecked(m, support, q)
    }

    /// Computational basis projector `|digits><digits|` with `digits[i]` the
    /// level of the `i`-th support site.
    pub fn basis_state(digits: &[usize], support: Vec<usize>, q: usize) -> Result<Self> {
        if digits.len() != support.len() {
            return Err(Error::DimensionMismatch { expected: support.len(), found: digits.len() });
        }
        let mut idx = 0usize;
        for &x in digits {
            if x >= q {
                return Err(invalid("digits", format!("level {x} >= q = {q}")));
            }
            idx = idx * q + x;
        }
        let d = checked_pow(q, support.len())?;
        let mut diag = vec![0.0; d];
        diag[idx] = 1.0;
        let op = Self::from_real_diagonal(&diag, support, q)?;
        Ok(op)
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// Same support, new matrix; the Hermitian flag is recomputed.
    pub fn with_matrix(&self, matrix: CMat) -> Result<Self> {
        Self::new(matrix, self.support.clone(), self.q)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                out.matrix[(i, j)] *= s;
            }
        }
        out
    }

    fn same_frame(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        if self.support != other.support || self.q != other.q {
            return Err(invalid("support", "operators act on different sites"));
        }
        Ok(())
    }

    /// `self + s * other` on a common support.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Result<Self> {
        self.same_frame(other)?;
        let mut m = self.matrix.clone();
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                m[(i, j)] += other.matrix[(i, j)] * s;
            }
        }
        let mut out = Self::new(m, self.support.clone(), self.q)?;
        if self.hermitian && other.hermitian {
            out.matrix = symmetrize(&out.matrix);
            out.hermitian = true;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, -1.0)
    }

    /// Matrix product on a common support.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_frame(other)?;
        Self::new(&self.matrix * &other.matrix, self.support.clone(), self.q)
    }

    /// Tensor product; the supports must be disjoint and are concatenated.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        if self.q != other.q {
            return Err(invalid("q", "local dimensions differ"));
        }
        let (da, db) = (self.dim(), other.dim());
        let m = CMat::from_fn(da * db, da * db, |i, j| self.matrix[(i / db, j / db)] * other.matrix[(i % db, j % db)]);
        let mut support = self.support.clone();
        support.extend_from_slice(&other.support);
        let mut out = Self::new(m, support, self.q)?;
        out.hermitian |= self.hermitian && other.hermitian;
        Ok(out)
    }

    /// Entrywise max-norm of the difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_frame(other)?;
        Ok(max_abs_diff(&self.matrix, &other.matrix))
    }

    /// `max |[A, B]_{ij}|`.
    pub fn commutator_max(&self, other: &Self) -> Result<f64> {
        self.same_frame(other)?;
        let ab = &self.matrix * &other.matrix;
        let ba = &other.matrix * &self.matrix;
        Ok(max_abs_diff(&ab, &ba))
    }
}

pub(crate) fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub(crate) fn symmetrize(m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Extends `op` to all `total_sites` sites by tensoring with the identity.
pub fn embed(op: &DenseOperator, total_sites: usize, q: usize) -> Result<DenseOperator> {
    if op.q != q {
        return Err(Error::DimensionMismatch { expected: checked_pow(q, op.support.len())?, found: op.dim() });
    }
    for &s in &op.support {
        if s >= total_sites {
            return Err(Error::SiteOutOfRange { site: s, n: total_sites });
        }
    }
    let full = checked_pow(q, total_sites)?;
    let inner = config_offsets(&op.support, total_sites, q);
    let outer = config_offsets(&complement(&op.support, total_sites), total_sites, q);
    let mut m = CMat::zeros(full, full);
    for &c in &outer {
        for (b, &ob) in inner.iter().enumerate() {
            for (a, &oa) in inner.iter().enumerate() {
                m[(oa + c, ob + c)] = op.matrix[(a, b)];
            }
        }
    }
    let mut out = DenseOperator::new(m, (0..total_sites).collect(), q)?;
    out.hermitian = op.hermitian;
    Ok(out)
}

/// Reduces `rho` to the sites in `keep`, in the order listed.
pub fn partial_trace(rho: &DenseOperator, keep: &[usize]) -> Result<DenseOperator> {
    validate_support(keep)?;
    let total = rho.support.len();
    let positions = keep
        .iter()
        .map(|s| rho.support.iter().position(|x| x == s).ok_or(Error::NotInSupport(*s)))
        .collect::<Result<Vec<_>>>()?;
    if positions.len() == total && positions.iter().enumerate().all(|(i, &p)| i == p) {
        return Ok(rho.clone());
    }
    let inner = config_offsets(&positions, total, rho.q);
    let outer = config_offsets(&complement(&positions, total), total, rho.q);
    let d = inner.len();
    let mut m = CMat::zeros(d, d);
    for (b, &ob) in inner.iter().enumerate() {
        for (a, &oa) in inner.iter().enumerate() {
            let mut acc = c64::new(0.0, 0.0);
            for &c in &outer {
                acc += rho.matrix[(oa + c, ob + c)];
            }
            m[(a, b)] = acc;
        }
    }
    let mut out = DenseOperator::new(m, keep.to_vec(), rho.q)?;
    if rho.hermitian {
        out.matrix = symmetrize(&out.matrix);
        out.hermitian = true;
    }
    Ok(out)
}

fn is_real(m: &CMat) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0))
}

/// Spectral decomposition of a Hermitian matrix.
pub fn herm_spectrum(m: &DenseOperator) -> Result<Spectrum> {
    if !m.hermitian {
        return Err(Error::NotHermitian(hermitian_deviation(&m.matrix)));
    }
    spectrum_of(&m.matrix)
}

pub(crate) fn spectrum_of(m: &CMat) -> Result<Spectrum> {
    let d = m.nrows();
    let (values, vectors) = if is_real(m) {
        let real = Mat::<f64>::from_fn(d, d, |i, j| m[(i, j)].re);
        let evd = real
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| invalid("matrix", format!("eigensolver failed: {e:?}")))?;
        let values: Vec<f64> = evd.S().column_vector().iter().copied().collect();
        let u = evd.U();
        (values, CMat::from_fn(d, d, |i, j| c64::new(u[(i, j)], 0.0)))
    } else {
        let evd = m
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| invalid("matrix", format!("eigensolver failed: {e:?}")))?;
        let values: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
        (values, evd.U().to_owned())
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let eigenvalues = order.iter().map(|&k| values[k]).collect();
    let eigenvectors = CMat::from_fn(d, d, |i, j| vectors[(i, order[j])]);
    Ok(Spectrum { eigenvalues, eigenvectors })
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V f(diag λ) V†`; fails when `f` is not finite at some eigenvalue.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Result<CMat> {
        let fv = self
            .eigenvalues
            .iter()
            .map(|&l| {
                let y = f(l);
                if y.is_finite() {
                    Ok(y)
                } else {
                    Err(Error::Singular(l))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let v = &self.eigenvectors;
        let scaled = CMat::from_fn(self.dim(), self.dim(), |i, j| v[(i, j)] * fv[j]);
        Ok(&scaled * v.adjoint())
    }

    pub fn reconstruct(&self) -> CMat {
        self.apply(|x| x).expect("identity is finite on finite eigenvalues")
    }

    /// Diagonal of `V† rho V`, i.e. `<v_i|rho|v_i>` for every eigenvector.
    pub fn diagonal_weights(&self, rho: &CMat) -> Vec<f64> {
        let rv = rho * &self.eigenvectors;
        let v = &self.eigenvectors;
        (0..self.dim())
            .map(|j| (0..self.dim()).map(|i| (v[(i, j)].conj() * rv[(i, j)]).re).sum())
            .collect()
    }
}

/// `f(M)` for Hermitian `M` through its spectral decomposition.
pub fn func_of_hermitian(m: &DenseOperator, f: impl Fn(f64) -> f64) -> Result<DenseOperator> {
    let spec = herm_spectrum(m)?;
    let mut out = DenseOperator::new(symmetrize(&spec.apply(f)?), m.support.clone(), m.q)?;
    out.hermitian = true;
    Ok(out)
}

/// `Tr[rho M]` in `O(d²)`.
pub fn expectation_complex(rho: &CMat, m: &CMat) -> Result<c64> {
    if rho.nrows() != m.nrows() || rho.ncols() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: rho.nrows() });
    }
    let d = m.nrows();
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..d {
        for i in 0..d {
            acc += rho[(i, j)] * m[(j, i)];
        }
    }
    Ok(acc)
}

/// Real part of `Tr[rho M]`; exact for Hermitian `M`.
pub fn expectation(rho: &DenseOperator, m: &DenseOperator) -> Result<f64> {
    Ok(expectation_complex(&rho.matrix, &m.matrix)?.re)
}

/// Operator and trace norms, plus `Tr[rho M]` when a state is supplied.
pub fn norms_and_expectation(m: &DenseOperator, rho: Option<&DenseOperator>) -> Result<NormReport> {
    let (operator_norm, trace_norm) = if m.hermitian {
        let values = spectrum_of(&m.matrix)?.eigenvalues;
        (values.iter().fold(0.0f64, |a, x| a.max(x.abs())), values.iter().map(|x| x.abs()).sum())
    } else {
        let sv = m
            .matrix
            .singular_values()
            .map_err(|e| invalid("matrix", format!("svd failed: {e:?}")))?;
        (sv.iter().fold(0.0f64, |a, &x| a.max(x)), sv.iter().sum())
    };
    let expectation = match rho {
        Some(r) => {
            if r.dim() != m.dim() {
                return Err(Error::DimensionMismatch { expected: m.dim(), found: r.dim() });
            }
            Some(expectation_complex(&r.matrix, &m.matrix)?.re)
        }
        None => None,
    };
    Ok(NormReport { operator_norm, trace_norm, expectation })
}

pub fn operator_norm(m: &DenseOperator) -> Result<f64> {
    Ok(norms_and_expectation(m, None)?.operator_norm)
}

pub fn trace_norm(m: &DenseOperator) -> Result<f64> {
    Ok(norms_and_expectation(m, None)?.trace_norm)
}

/// Single-qubit Pauli matrices.
pub mod pauli {
    use super::{c64, CMat};

    pub fn matrix(letter: char) -> Option<CMat> {
        let z = c64::new(0.0, 0.0);
        let one = c64::new(1.0, 0.0);
        let i = c64::new(0.0, 1.0);
        let entries = match letter {
            'I' => [one, z, z, one],
            'X' => [z, one, one, z],
            'Y' => [z, -i, i, z],
            'Z' => [one, z, z, -one],
            _ => return None,
        };
        Some(CMat::from_fn(2, 2, |r, c| entries[2 * r + c]))
    }

    /// Tensor product of the letters, first letter most significant.
    pub fn string(letters: &str) -> Option<CMat> {
        let mut out = CMat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0));
        for ch in letters.chars() {
            let p = matrix(ch)?;
            let d = out.nrows();
            out = CMat::from_fn(2 * d, 2 * d, |r, c| out[(r / 2, c / 2)] * p[(r % 2, c % 2)]);
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(letters: &str, support: Vec<usize>) -> DenseOperator {
        DenseOperator::new(pauli::string(letters).unwrap(), support, 2).unwrap()
    }

    fn diag_of(m: &DenseOperator) -> Vec<f64> {
        (0..m.dim()).map(|i| m.matrix()[(i, i)].re).collect()
    }

    #[test]
    fn embed_follows_site_ordering() {
        let z0 = embed(&op("Z", vec![0]), 2, 2).unwrap();
        assert_eq!(diag_of(&z0), vec![1.0, 1.0, -1.0, -1.0]);
        let z1 = embed(&op("Z", vec![1]), 2, 2).unwrap();
        assert_eq!(diag_of(&z1), vec![1.0, -1.0, 1.0, -1.0]);
        let id = embed(&op("I", vec![0]), 3, 2).unwrap();
        assert!(max_abs_diff(id.matrix(), &CMat::identity(8, 8)) == 0.0);
    }

    #[test]
    fn embed_rejects_bad_support() {
        assert!(matches!(embed(&op("Z", vec![3]), 2, 2), Err(Error::SiteOutOfRange { .. })));
        assert!(embed(&op("Z", vec![0]), 2, 3).is_err());
    }

    #[test]
    fn embed_of_unsorted_support_matches_kron() {
        // X on site 2, Z on site 0, listed in that order
        let xz = op("XZ", vec![2, 0]);
        let full = embed(&xz, 3, 2).unwrap();
        let expected = pauli::string("ZIX").unwrap();
        assert!(max_abs_diff(full.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = c64::new(0.0, 0.0);
        let psi = [c64::new(s, 0.0), z, z, c64::new(s, 0.0)];
        let bell = DenseOperator::pure_state(&psi, vec![0, 1], 2).unwrap();
        let m = partial_trace(&bell, &[0]).unwrap();
        let half = DenseOperator::maximally_mixed(vec![0], 2).unwrap();
        assert!(m.max_abs_diff(&half).unwrap() < 1e-15);
    }

    #[test]
    fn product_marginal_and_identity_case() {
        let r0 = DenseOperator::from_real_diagonal(&[0.7, 0.3], vec![0], 2).unwrap();
        let r1 = DenseOperator::new(
            CMat::from_fn(2, 2, |i, j| match (i, j) {
                (0, 0) => c64::new(0.6, 0.0),
                (1, 1) => c64::new(0.4, 0.0),
                (0, 1) => c64::new(0.1, 0.2),
                _ => c64::new(0.1, -0.2),
            }),
            vec![1],
            2,
        )
        .unwrap();
        let rho = r0.kron(&r1).unwrap();
        let m1 = partial_trace(&rho, &[1]).unwrap();
        assert!(m1.max_abs_diff(&r1).unwrap() < 1e-15);
        let all = partial_trace(&rho, &[0, 1]).unwrap();
        assert!(all.max_abs_diff(&rho).unwrap() == 0.0);
        assert!(matches!(partial_trace(&rho, &[2]), Err(Error::NotInSupport(2))));
    }

    #[test]
    fn spectrum_examples() {
        assert_eq!(herm_spectrum(&op("Z", vec![0])).unwrap().eigenvalues, vec![1.0, -1.0]);
        let id = DenseOperator::identity(vec![0, 1], 2).unwrap();
        assert_eq!(herm_spectrum(&id).unwrap().eigenvalues, vec![1.0; 4]);
        let zz = herm_spectrum(&op("ZZ", vec![0, 1])).unwrap();
        for (a, b) in zz.eigenvalues.iter().zip([1.0, 1.0, -1.0, -1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let y = op("Y", vec![0]);
        let s = herm_spectrum(&y).unwrap();
        assert!(max_abs_diff(&s.reconstruct(), y.matrix()) < 1e-14);
    }

    #[test]
    fn spectrum_rejects_non_hermitian() {
        let m = CMat::from_fn(2, 2, |i, j| c64::new((i + 2 * j) as f64, 0.0));
        let op = DenseOperator::new(m, vec![0], 2).unwrap();
        assert!(!op.is_hermitian());
        assert!(matches!(herm_spectrum(&op), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn functional_calculus_examples() {
        let zero = DenseOperator::zeros(vec![0], 2).unwrap();
        let e0 = func_of_hermitian(&zero, f64::exp).unwrap();
        assert!(max_abs_diff(e0.matrix(), &CMat::identity(2, 2)) < 1e-15);

        let ez = func_of_hermitian(&op("Z", vec![0]), f64::exp).unwrap();
        let d = diag_of(&ez);
        assert!((d[0] - std::f64::consts::E).abs() < 1e-14 && (d[1] - 1.0 / std::f64::consts::E).abs() < 1e-15);

        let half = DenseOperator::maximally_mixed(vec![0], 2).unwrap();
        let l = func_of_hermitian(&half, f64::ln).unwrap();
        for x in diag_of(&l) {
            assert!((x + std::f64::consts::LN_2).abs() < 1e-15);
        }

        let pure = DenseOperator::basis_state(&[0], vec![0], 2).unwrap();
        assert!(matches!(func_of_hermitian(&pure, f64::ln), Err(Error::Singular(_))));
    }

    #[test]
    fn norm_examples() {
        let z = op("Z", vec![0]);
        let r = norms_and_expectation(&z, None).unwrap();
        assert_eq!((r.operator_norm, r.trace_norm, r.expectation), (1.0, 2.0, None));
        let half = DenseOperator::maximally_mixed(vec![0], 2).unwrap();
        assert_eq!(norms_and_expectation(&z, Some(&half)).unwrap().expectation, Some(0.0));
        let p0 = DenseOperator::basis_state(&[0], vec![0], 2).unwrap();
        let p1 = DenseOperator::basis_state(&[1], vec![0], 2).unwrap();
        assert!((trace_norm(&p0.sub(&p1).unwrap()).unwrap() - 2.0).abs() < 1e-15);
        assert!(norms_and_expectation(&z, Some(&DenseOperator::maximally_mixed(vec![0, 1], 2).unwrap())).is_err());
    }

    #[test]
    fn non_hermitian_norms_use_singular_values() {
        // |0><1| has a single unit singular value
        let m = CMat::from_fn(2, 2, |i, j| if i == 0 && j == 1 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
        let r = norms_and_expectation(&DenseOperator::new(m, vec![0], 2).unwrap(), None).unwrap();
        assert!((r.operator_norm - 1.0).abs() < 1e-14 && (r.trace_norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn density_validation() {
        let bad_trace = CMat::from_fn(2, 2, |i, j| if i == j { c64::new(0.6, 0.0) } else { c64::new(0.0, 0.0) });
        assert!(matches!(DenseOperator::density(bad_trace, vec![0], 2), Err(Error::InvalidTrace(_))));
        let negative = CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c64::new(1.2, 0.0),
            (1, 1) => c64::new(-0.2, 0.0),
            _ => c64::new(0.0, 0.0),
        });
        assert!(matches!(DenseOperator::density(negative, vec![0], 2), Err(Error::NotPositive(_))));
        let nearly = CMat::from_fn(2, 2, |i, j| if i == j { c64::new(0.5 + 2e-10, 0.0) } else { c64::new(0.0, 0.0) });
        let rho = DenseOperator::density(nearly, vec![0], 2).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
        assert!(matches!(
            DenseOperator::new(CMat::identity(3, 3), vec![0], 2),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(DenseOperator::identity(vec![1, 1], 2), Err(Error::RepeatedSite(1))));
    }
}
