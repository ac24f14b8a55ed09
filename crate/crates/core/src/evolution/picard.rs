//! Fixed-point solver for `κ(t) = I + ∫_0^t κ(s) γ(s) ds`.
//!
//! Iterates are represented by their values at the nodes and at the two
//! Gauss–Legendre points of every cell. One sweep replaces the iterate by
//! `I + ∫ κ_m γ`, integrating the product exactly for iterates that are
//! linear on each cell; the fixed point is the two-stage Gauss collocation
//! solution (fourth order, and it keeps quadratic invariants such as
//! `κᵀκ = I`).

use nalgebra::DMatrix;

use crate::algebra::Mat;
use crate::error::{Error, Result};

const SQRT3_6: f64 = 0.288_675_134_594_812_9;
const NODES: [f64; 2] = [0.5 - SQRT3_6, 0.5 + SQRT3_6];
const COEFFS: [[f64; 2]; 2] = [[0.25, 0.25 - SQRT3_6], [0.25 + SQRT3_6, 0.25]];

/// The interior points at which [`solve`] samples the integrand.
pub(crate) fn gauss_points(nodes: &[f64]) -> Vec<f64> {
    nodes
        .windows(2)
        .flat_map(|w| {
            let h = w[1] - w[0];
            [w[0] + NODES[0] * h, w[0] + NODES[1] * h]
        })
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct PicardOutcome {
    pub points: Vec<Mat>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves on `nodes` (relative to `κ(nodes[0]) = I`), evaluating the
/// integrand only at the interior Gauss points of each cell.
pub(crate) fn solve<F>(d: usize, integrand: F, nodes: &[f64], tol: f64, max_iter: usize) -> Result<PicardOutcome>
where
    F: Fn(f64) -> Mat,
{
    let id = DMatrix::<f64>::identity(d, d);
    let cells = nodes.len() - 1;
    let values: Vec<[Mat; 2]> = nodes
        .windows(2)
        .map(|w| {
            let h = w[1] - w[0];
            [integrand(w[0] + NODES[0] * h), integrand(w[0] + NODES[1] * h)]
        })
        .collect();

    let mut stages: Vec<[Mat; 2]> = vec![[id.clone(), id.clone()]; cells];
    let mut points: Vec<Mat> = vec![id.clone(); cells + 1];
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let mut change = 0.0f64;
        let mut acc = id.clone();
        for i in 0..cells {
            let h = nodes[i + 1] - nodes[i];
            let f0 = &stages[i][0] * &values[i][0];
            let f1 = &stages[i][1] * &values[i][1];
            let s0 = &acc + (&f0 * COEFFS[0][0] + &f1 * COEFFS[0][1]) * h;
            let s1 = &acc + (&f0 * COEFFS[1][0] + &f1 * COEFFS[1][1]) * h;
            acc += (&f0 + &f1) * (0.5 * h);
            change = change
                .max((&s0 - &stages[i][0]).amax())
                .max((&s1 - &stages[i][1]).amax())
                .max((&acc - &points[i + 1]).amax());
            stages[i] = [s0, s1];
            points[i + 1] = acc.clone();
        }
        residual = change;
        if change <= tol {
            return Ok(PicardOutcome { points, iterations: iteration, residual });
        }
        if !change.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual })
}
