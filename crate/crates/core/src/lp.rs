//! Dense tableau simplex for `max cᵀy  s.t.  A y <= b, y >= 0` with `b >= 0`.
//!
//! The slack basis is feasible from the start, so no phase one is needed.
//! Pivoting follows Bland's rule (lowest eligible index for both the entering
//! and the leaving variable), which rules out cycling.

use serde::Serialize;

use crate::error::{invalid, Result};

pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const OPTIMALITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// Values of the structural variables `y`.
    pub primal: Vec<f64>,
    /// Multipliers of the `A y <= b` rows; they solve `min bᵀa  s.t.  Aᵀa >= c, a >= 0`.
    pub dual: Vec<f64>,
    pub iterations: usize,
}

/// Solves the standard-form maximization. `a` is given row by row.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let (rows, cols) = (a.len(), c.len());
    if b.len() != rows {
        return Err(invalid("b", format!("{} entries for {rows} rows", b.len())));
    }
    if let Some(r) = a.iter().position(|row| row.len() != cols) {
        return Err(invalid("A", format!("row {r} has the wrong length")));
    }
    if let Some(&v) = b.iter().find(|&&v| !(v >= -FEASIBILITY_TOL)) {
        return Err(invalid("b", format!("right-hand side {v} is negative")));
    }
    let width = cols + rows;
    // tableau rows: constraints then the reduced-cost row; last column is the rhs
    let mut t: Vec<Vec<f64>> = (0..rows)
        .map(|i| {
            let mut row = vec![0.0; width + 1];
            row[..cols].copy_from_slice(&a[i]);
            row[cols + i] = 1.0;
            row[width] = b[i].max(0.0);
            row
        })
        .collect();
    let mut reduced = vec![0.0; width + 1];
    reduced[..cols].copy_from_slice(c);
    let mut basis: Vec<usize> = (cols..width).collect();

    let cap = 10 * (rows + cols);
    let mut iterations = 0;
    let status = loop {
        let Some(enter) = (0..width).find(|&j| reduced[j] > OPTIMALITY_TOL) else {
            break LpStatus::Optimal;
        };
        if iterations >= cap {
            break LpStatus::IterationLimit;
        }
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let coef = t[i][enter];
            if coef > FEASIBILITY_TOL {
                let ratio = t[i][width] / coef;
                let better = match leave {
                    None => true,
                    Some((li, lr)) => ratio < lr - FEASIBILITY_TOL || (ratio <= lr + FEASIBILITY_TOL && basis[i] < basis[li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((pr, _)) = leave else {
            break LpStatus::Unbounded;
        };
        pivot(&mut t, &mut reduced, pr, enter);
        basis[pr] = enter;
        iterations += 1;
    };

    let mut primal = vec![0.0; cols];
    for (i, &v) in basis.iter().enumerate() {
        if v < cols {
            primal[v] = t[i][width].max(0.0);
        }
    }
    let dual = (0..rows).map(|i| (-reduced[cols + i]).max(0.0)).collect();
    let objective = c.iter().zip(&primal).map(|(ci, yi)| ci * yi).sum();
    Ok(LpSolution { status, objective, primal, dual, iterations })
}

fn pivot(t: &mut [Vec<f64>], reduced: &mut [f64], pr: usize, pc: usize) {
    let p = t[pr][pc];
    for v in t[pr].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[pr].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != pr {
            eliminate(row, &pivot_row, pc);
        }
    }
    eliminate(reduced, &pivot_row, pc);
}

fn eliminate(row: &mut [f64], pivot_row: &[f64], pc: usize) {
    let f = row[pc];
    if f != 0.0 {
        for (v, p) in row.iter_mut().zip(pivot_row) {
            *v -= f * p;
        }
        row[pc] = 0.0;
    }
}
