//! Spin-lattice geometry: a metric on the sites plus ball-growth constants
//! `(A, d)` with `|B(v, r)| <= A r^d`.

use crate::error::{Error, Result};

/// Slack used for metric comparisons (ball membership, triangle inequality).
pub const METRIC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    n: usize,
    q: usize,
    dist: Vec<Vec<f64>>,
    ball_a: f64,
    dim_d: f64,
}

fn validate_metric(dist: &[Vec<f64>]) -> Result<()> {
    let n = dist.len();
    if n == 0 {
        return Err(Error::Geometry("no sites".into()));
    }
    for (x, row) in dist.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Geometry(format!("row {x} has {} entries, expected {n}", row.len())));
        }
        if row[x] != 0.0 {
            return Err(Error::Geometry(format!("dist({x},{x}) = {} is not zero", row[x])));
        }
        for (y, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Geometry(format!("dist({x},{y}) = {v} is not a nonnegative real")));
            }
            if (v - dist[y][x]).abs() > METRIC_TOL {
                return Err(Error::Geometry(format!("dist({x},{y}) != dist({y},{x})")));
            }
        }
    }
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if dist[x][z] > dist[x][y] + dist[y][z] + METRIC_TOL {
                    return Err(Error::Geometry(format!("triangle inequality fails for ({x},{y},{z})")));
                }
            }
        }
    }
    Ok(())
}

fn ball_count(row: &[f64], r: f64) -> usize {
    row.iter().filter(|&&v| v <= r + METRIC_TOL).count()
}

fn max_radius(dist: &[Vec<f64>]) -> usize {
    let m = dist.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    (m.ceil() as usize).max(1)
}

/// Smallest `A` with `|B(v, r)| <= A r^d` for every site `v` and every
/// integer radius `r >= 1`.
///
/// Radii beyond the diameter only shrink the ratio, so the scan stops there.
pub fn ball_constant(dist: &[Vec<f64>], d: f64) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(crate::error::invalid("d", format!("dimension exponent {d} < 1")));
    }
    let rmax = max_radius(dist);
    let mut a = 0.0f64;
    for row in dist {
        for r in 1..=rmax {
            let r = r as f64;
            a = a.max(ball_count(row, r) as f64 / r.powf(d));
        }
    }
    Ok(a)
}

impl Geometry {
    /// Geometry from an explicit distance matrix. With `ball_a = None` the
    /// minimal constant for exponent `d` is used; a supplied constant is
    /// verified exhaustively.
    pub fn from_distances(q: usize, dist: Vec<Vec<f64>>, d: f64, ball_a: Option<f64>) -> Result<Self> {
        if q < 2 {
            return Err(crate::error::invalid("q", "local dimension must be at least 2"));
        }
        validate_metric(&dist)?;
        let minimal = ball_constant(&dist, d)?;
        let ball_a = match ball_a {
            None => minimal,
            Some(a) if a > 0.0 && a + METRIC_TOL >= minimal => a,
            Some(a) => {
                return Err(Error::Geometry(format!(
                    "ball constant {a} is below the minimal admissible value {minimal} for d = {d}"
                )))
            }
        };
        Ok(Self { n: dist.len(), q, dist, ball_a, dim_d: d })
    }

    /// Open chain with unit spacing, `d = 1`.
    pub fn chain(n: usize, q: usize) -> Result<Self> {
        let dist = (0..n).map(|x| (0..n).map(|y| x.abs_diff(y) as f64).collect()).collect();
        Self::from_distances(q, dist, 1.0, None)
    }

    /// Periodic chain, `d = 1`.
    pub fn ring(n: usize, q: usize) -> Result<Self> {
        let dist = (0..n)
            .map(|x| {
                (0..n)
                    .map(|y| {
                        let k = x.abs_diff(y);
                        k.min(n - k) as f64
                    })
                    .collect()
            })
            .collect();
        Self::from_distances(q, dist, 1.0, None)
    }

    /// Rectangular grid with the graph (Manhattan) distance, `d = 2`.
    /// Sites are numbered row-major.
    pub fn grid2d(rows: usize, cols: usize, q: usize) -> Result<Self> {
        let n = rows * cols;
        let dist = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| ((a / cols).abs_diff(b / cols) + (a % cols).abs_diff(b % cols)) as f64)
                    .collect()
            })
            .collect();
        Self::from_distances(q, dist, 2.0, None)
    }

    /// Every pair of distinct sites at distance one.
    pub fn complete(n: usize, q: usize, d: f64) -> Result<Self> {
        let dist = (0..n).map(|x| (0..n).map(|y| if x == y { 0.0 } else { 1.0 }).collect()).collect();
        Self::from_distances(q, dist, d, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn ball_a(&self) -> f64 {
        self.ball_a
    }

    pub fn dim_d(&self) -> f64 {
        self.dim_d
    }

    pub fn dist(&self, x: usize, y: usize) -> f64 {
        self.dist[x][y]
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.dist
    }

    pub fn ball_size(&self, v: usize, r: f64) -> usize {
        ball_count(&self.dist[v], r)
    }

    /// Distance between two site sets (minimum over pairs).
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> f64 {
        a.iter()
            .flat_map(|&x| b.iter().map(move |&y| self.dist[x][y]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Re-checks `|B(v, r)| <= A r^d` for every site and integer radius.
    pub fn check_ball_bound(&self) -> bool {
        let rmax = max_radius(&self.dist);
        (0..self.n).all(|v| {
            (1..=rmax).all(|r| {
                let r = r as f64;
                self.ball_size(v, r) as f64 <= self.ball_a * r.powf(self.dim_d) + METRIC_TOL
            })
        })
    }
}
