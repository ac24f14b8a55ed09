//! Principal matrix logarithm near the identity.
//!
//! Inverse scaling and squaring: Denman–Beavers square roots pull the
//! argument towards `I`, then the Gregory series
//! `log X = 2 Σ Z^{2j+1}/(2j+1)`, `Z = (X - I)(X + I)^{-1}` finishes.

use nalgebra::DMatrix;

use super::{norm, Mat, NormKind};
use crate::error::{Error, Result};

const ROOT_THRESHOLD: f64 = 0.25;
const MAX_ROOTS: usize = 40;

fn inverse(a: &Mat) -> Result<Mat> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidElement("singular matrix in square-root iteration".into()))
}

/// Principal square root by the Denman–Beavers iteration.
pub(crate) fn sqrtm(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..60 {
        let y_inv = inverse(&y)?;
        let z_inv = inverse(&z)?;
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let change = (&y_next - &y).amax();
        y = y_next;
        z = z_next;
        if change <= 1e-16 * y.amax().max(1.0) {
            return Ok(y);
        }
    }
    Ok(y)
}

fn gregory_series(x: &Mat) -> Result<Mat> {
    let n = x.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let num = x - &id;
    let den = x + &id;
    let z = den
        .lu()
        .solve(&num)
        .ok_or_else(|| Error::InvalidElement("singular X + I".into()))?;
    let z2 = &z * &z;
    let mut power = z.clone();
    let mut sum = z.clone();
    for j in 1..200 {
        power = &power * &z2;
        let term = &power / (2 * j + 1) as f64;
        let size = term.amax();
        sum += term;
        if size <= 1e-18 * sum.amax().max(1e-300) {
            break;
        }
    }
    Ok(sum * 2.0)
}

/// Principal logarithm of `g`, defined for `‖g − I‖_op < 1`.
pub fn logm(g: &Mat) -> Result<Mat> {
    let n = g.nrows();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let dist = norm(&(g - &id), NormKind::Op);
    if dist >= 1.0 {
        return Err(Error::OutOfDomain(format!(
            "‖g − I‖_op = {dist:.6} ≥ 1; subdivide before taking logarithms"
        )));
    }
    if n == 1 {
        return Ok(DMatrix::from_element(1, 1, g[(0, 0)].ln()));
    }
    let mut x = g.clone();
    let mut roots = 0;
    while norm(&(&x - &id), NormKind::Op) > ROOT_THRESHOLD {
        if roots == MAX_ROOTS {
            return Err(Error::OutOfDomain("square-root iteration did not approach I".into()));
        }
        x = sqrtm(&x)?;
        roots += 1;
    }
    Ok(gregory_series(&x)? * 2f64.powi(roots as i32))
}
