use std::fmt::Write as _;
use std::sync::Arc;

use crate::algebra::{ensure_same, expm, logm, GroupDescriptor, GroupElement, Mat, NormKind};
use crate::error::{Error, Result};

/// Group-valued curve sampled on a time grid `0 = t_0 < … < t_N = 1`.
#[derive(Debug, Clone)]
pub struct Path {
    group: Arc<GroupDescriptor>,
    times: Vec<f64>,
    points: Vec<Mat>,
}

impl Path {
    pub fn new(group: &Arc<GroupDescriptor>, times: Vec<f64>, points: Vec<Mat>) -> Result<Self> {
        if times.len() < 2 || times.len() != points.len() {
            return Err(Error::InvalidInput(format!(
                "path needs matching times/points with at least two nodes (got {} and {})",
                times.len(),
                points.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("path times must increase strictly".into()));
        }
        let d = group.dim();
        if points.iter().any(|p| p.nrows() != d || p.ncols() != d) {
            return Err(Error::InvalidInput(format!("path points must be {d}×{d}")));
        }
        Ok(Path { group: Arc::clone(group), times, points })
    }

    pub(crate) fn from_parts(group: Arc<GroupDescriptor>, times: Vec<f64>, points: Vec<Mat>) -> Self {
        Path { group, times, points }
    }

    /// Samples `f` on a uniform grid with `n` cells.
    pub fn from_fn<F: Fn(f64) -> Mat>(group: &Arc<GroupDescriptor>, n: usize, f: F) -> Result<Self> {
        let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let points = times.iter().map(|&t| f(t)).collect();
        Self::new(group, times, points)
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Mat] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn final_point(&self) -> GroupElement {
        GroupElement::from_parts(Arc::clone(&self.group), self.points.last().unwrap().clone())
    }

    pub fn point(&self, i: usize) -> GroupElement {
        GroupElement::from_parts(Arc::clone(&self.group), self.points[i].clone())
    }

    /// Largest membership defect over all points.
    pub fn defect_max(&self) -> f64 {
        self.points
            .iter()
            .map(|p| self.group.membership_defect(p))
            .fold(0.0, f64::max)
    }

    /// Checks the path invariants: defects within `tol` and every
    /// consecutive quotient inside the logarithm's domain.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let defect = self.defect_max();
        if defect > tol {
            return Err(Error::InvalidElement(format!("path leaves the group (defect {defect:e} > {tol:e})")));
        }
        let id = self.group.identity_matrix();
        for (i, w) in self.points.windows(2).enumerate() {
            let q = quotient(&w[0], &w[1])?;
            if crate::algebra::norm(&(q - &id), NormKind::Op) >= 1.0 {
                return Err(Error::PathTooCoarse { cell: i });
            }
        }
        Ok(())
    }

    /// True when the grid is `i/N`, `i = 0..=N`.
    pub fn is_uniform(&self) -> bool {
        let n = (self.times.len() - 1) as f64;
        self.times
            .iter()
            .enumerate()
            .all(|(i, &t)| (t - i as f64 / n).abs() <= 1e-12)
    }

    pub fn pointwise_inverse(&self) -> Result<Path> {
        let points = self
            .points
            .iter()
            .map(|p| {
                p.clone()
                    .try_inverse()
                    .ok_or_else(|| Error::InvalidElement("singular path point".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Path::from_parts(Arc::clone(&self.group), self.times.clone(), points))
    }

    /// `t ↦ g·η(t)`.
    pub fn left_translate(&self, g: &GroupElement) -> Result<Path> {
        ensure_same(&self.group, g.group())?;
        let points = self.points.iter().map(|p| g.matrix() * p).collect();
        Ok(Path::from_parts(Arc::clone(&self.group), self.times.clone(), points))
    }

    /// `t ↦ η(t)·ζ(t)` on a shared grid.
    pub fn pointwise_mul(&self, other: &Path) -> Result<Path> {
        ensure_same(&self.group, &other.group)?;
        self.check_same_grid(other)?;
        let points = self.points.iter().zip(&other.points).map(|(a, b)| a * b).collect();
        Ok(Path::from_parts(Arc::clone(&self.group), self.times.clone(), points))
    }

    /// `sup_i ‖η(t_i) − ζ(t_i)‖_max` on a shared grid.
    pub fn sup_distance(&self, other: &Path) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max))
    }

    fn check_same_grid(&self, other: &Path) -> Result<()> {
        if self.times.len() != other.times.len()
            || self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::Incompatible("paths live on different grids".into()));
        }
        Ok(())
    }

    /// Value at an arbitrary time by geodesic interpolation inside the cell:
    /// `η(t_i)·exp(s·log(η(t_i)⁻¹η(t_{i+1})))`. Exact on cells where the
    /// underlying control is constant.
    pub fn value_at(&self, t: f64) -> Result<GroupElement> {
        let i = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return Ok(self.point(i)),
            Err(i) => i.clamp(1, self.times.len() - 1) - 1,
        };
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let q = quotient(&self.points[i], &self.points[i + 1])?;
        let l = logm(&q).map_err(|_| Error::PathTooCoarse { cell: i })?;
        let m = &self.points[i] * expm(&(l * s));
        Ok(GroupElement::from_parts(Arc::clone(&self.group), m))
    }

    /// CSV with header `t,m00,m01,...` and row-major entries in 17 significant digits.
    pub fn to_csv(&self) -> String {
        let d = self.group.dim();
        let mut out = String::from("t");
        for i in 0..d {
            for j in 0..d {
                write!(out, ",m{i}{j}").unwrap();
            }
        }
        out.push('\n');
        for (t, p) in self.times.iter().zip(&self.points) {
            out.push_str(&fmt_f64(*t));
            for i in 0..d {
                for j in 0..d {
                    out.push(',');
                    out.push_str(&fmt_f64(p[(i, j)]));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// `a⁻¹ b`.
pub(crate) fn quotient(a: &Mat, b: &Mat) -> Result<Mat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::InvalidElement("singular path point".into()))
}

/// Round-trip-safe decimal rendering with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x:.16e}")
}
