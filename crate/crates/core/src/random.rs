//! Seeded random instances. Every instance draws from its own ChaCha8 stream
//! (`seed`, `stream = instance index`), so results do not depend on how
//! instances are scheduled across threads.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::observable::LocalObservable;
use crate::states::product_state;
use crate::tensor::{self, c64, spectrum_of, CMat, DenseOperator};

pub type InstanceRng = ChaCha8Rng;

pub fn instance_rng(seed: u64, stream: u64) -> InstanceRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_c64(rng: &mut impl Rng) -> c64 {
    c64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = gaussian_c64(rng);
        }
    }
    m
}

/// Gaussian Hermitian matrix scaled to unit operator norm.
pub fn gaussian_hermitian(rng: &mut impl Rng, d: usize) -> Result<CMat> {
    let g = ginibre(rng, d, d);
    let h = CMat::from_fn(d, d, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5);
    let norm = spectrum_of(&h)?.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    Ok(CMat::from_fn(d, d, |i, j| h[(i, j)] / norm))
}

/// Normalized Gaussian pure state of dimension `d`.
pub fn random_pure(rng: &mut impl Rng, d: usize) -> Vec<c64> {
    let v: Vec<c64> = (0..d).map(|_| gaussian_c64(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// `(1 - p)|ψ><ψ| + p I/q` with `p` uniform in `[0, max_depolarize]`.
pub fn random_site_state(rng: &mut impl Rng, q: usize, site: usize, max_depolarize: f64) -> Result<DenseOperator> {
    let psi = random_pure(rng, q);
    let p = if max_depolarize > 0.0 { rng.random_range(0.0..=max_depolarize) } else { 0.0 };
    let m = CMat::from_fn(q, q, |i, j| {
        let pure = psi[i] * psi[j].conj() * (1.0 - p);
        if i == j {
            pure + p / q as f64
        } else {
            pure
        }
    });
    DenseOperator::density(m, vec![site], q)
}

pub fn random_product_factors(rng: &mut impl Rng, n: usize, q: usize, max_depolarize: f64) -> Result<Vec<DenseOperator>> {
    (0..n).map(|x| random_site_state(rng, q, x, max_depolarize)).collect()
}

/// Full-rank-or-less random density matrix `G G†/Tr` with `G` of size `dim × rank`.
pub fn random_density(rng: &mut impl Rng, n: usize, q: usize, rank: usize) -> Result<DenseOperator> {
    let dim = tensor::checked_pow(q, n)?;
    let g = ginibre(rng, dim, rank.max(1));
    let m = &g * g.adjoint();
    let tr: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
    DenseOperator::density(CMat::from_fn(dim, dim, |i, j| m[(i, j)] / tr), (0..n).collect(), q)
}

pub fn random_product_density(rng: &mut impl Rng, n: usize, q: usize, max_depolarize: f64) -> Result<DenseOperator> {
    product_state(&random_product_factors(rng, n, q, max_depolarize)?)
}

/// Random k-local observable: between `n` and `2n` terms, each on `1..=k`
/// distinct random sites, a unit-norm Gaussian Hermitian matrix times a
/// coefficient uniform in `[0.1, 1]`.
pub fn random_local_observable(rng: &mut impl Rng, n: usize, q: usize, k: usize) -> Result<LocalObservable> {
    let count = rng.random_range(n..=2 * n);
    let kmax = k.min(n).max(1);
    let mut terms = Vec::with_capacity(count);
    for _ in 0..count {
        let size = rng.random_range(1..=kmax);
        let mut region = sample(rng, n, size).into_vec();
        region.sort_unstable();
        let coeff = rng.random_range(0.1..=1.0);
        let d = tensor::checked_pow(q, size)?;
        let h = gaussian_hermitian(rng, d)?;
        terms.push((region, CMat::from_fn(d, d, |i, j| h[(i, j)] * coeff)));
    }
    LocalObservable::new(n, q, 0.0, terms)
}

/// Random channel on one site with `kraus` Kraus operators:
/// `K_i = G_i S^{-1/2}` with `S = Σ G_i† G_i`.
pub fn random_channel(rng: &mut impl Rng, q: usize, kraus: usize) -> Result<Vec<CMat>> {
    let gs: Vec<CMat> = (0..kraus.max(1)).map(|_| ginibre(rng, q, q)).collect();
    let mut s = CMat::zeros(q, q);
    for g in &gs {
        s = &s + &(g.adjoint() * g);
    }
    let s_inv_half = spectrum_of(&s)?.apply(|x| 1.0 / x.sqrt())?;
    Ok(gs.iter().map(|g| g * &s_inv_half).collect())
}

/// Applies a single-site channel to `site` of a state on sites `0..n`.
pub fn apply_site_channel(rho: &DenseOperator, site: usize, kraus: &[CMat]) -> Result<DenseOperator> {
    let n = rho.support().len();
    let q = rho.q();
    let dim = rho.dim();
    let mut out = CMat::zeros(dim, dim);
    for k in kraus {
        let full = tensor::embed(&DenseOperator::new(k.clone(), vec![site], q)?, n, q)?;
        let step = full.matrix() * rho.matrix() * full.matrix().adjoint();
        out = &out + &step;
    }
    DenseOperator::density(out, rho.support().to_vec(), q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = instance_rng(42, 3).random();
        let b: f64 = instance_rng(42, 3).random();
        let c: f64 = instance_rng(42, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn generated_objects_are_valid() {
        let mut rng = instance_rng(7, 0);
        let h = random_local_observable(&mut rng, 5, 2, 3).unwrap();
        assert!(h.locality() <= 3 && h.local_norm() > 0.0);
        let rho = random_density(&mut rng, 2, 2, 2).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-14);
        let channel = random_channel(&mut rng, 2, 3).unwrap();
        let mut sum = CMat::zeros(2, 2);
        for k in &channel {
            sum = &sum + &(k.adjoint() * k);
        }
        assert!(tensor::max_abs_diff(&sum, &CMat::identity(2, 2)) < 1e-12);
        let out = apply_site_channel(&rho, 1, &channel).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-12);
    }
}
