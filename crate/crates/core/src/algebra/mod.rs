//! Concrete matrix Lie groups and the primitive maps on them.
//!
//! A [`GroupDescriptor`] fixes the matrix size, a basis of the Lie algebra and
//! the membership-defect rule. Elements carry an `Arc` to their descriptor so
//! mixing groups is caught at the call site.

mod expm;
mod logm;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

pub use expm::expm;
pub use logm::logm;

pub type Mat = DMatrix<f64>;

/// Matrix norms used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// Operator norm induced by the max vector norm (maximum absolute row sum).
    Op,
    Frobenius,
    /// Largest absolute entry.
    Max,
}

pub fn norm(a: &Mat, kind: NormKind) -> f64 {
    match kind {
        NormKind::Op => a
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::Frobenius => a.norm(),
        NormKind::Max => a.amax(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroupKind {
    GL,
    SL,
    SO,
    SE2,
    Heisenberg,
    Scalar,
    /// Connected subgroup generated by an explicitly supplied subalgebra.
    Custom(String),
}

pub struct GroupDescriptor {
    kind: GroupKind,
    dim: usize,
    basis: Vec<Mat>,
    /// Least-squares map from vectorized matrices to basis coordinates.
    coord_map: Mat,
    abelian: bool,
}

impl fmt::Debug for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupDescriptor")
            .field("name", &self.name())
            .field("algebra_dim", &self.basis.len())
            .finish()
    }
}

impl PartialEq for GroupDescriptor {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.dim == other.dim && self.basis == other.basis
    }
}

fn unit(d: usize, i: usize, j: usize) -> Mat {
    let mut m = DMatrix::zeros(d, d);
    m[(i, j)] = 1.0;
    m
}

fn standard_basis(kind: &GroupKind, d: usize) -> Vec<Mat> {
    match kind {
        GroupKind::GL => (0..d)
            .flat_map(|i| (0..d).map(move |j| unit(d, i, j)))
            .collect(),
        GroupKind::SL => {
            let mut b = Vec::new();
            for i in 0..d {
                for j in i + 1..d {
                    b.push(unit(d, i, j));
                }
            }
            for i in 0..d {
                for j in 0..i {
                    b.push(unit(d, i, j));
                }
            }
            for k in 0..d.saturating_sub(1) {
                b.push(unit(d, k, k) - unit(d, k + 1, k + 1));
            }
            b
        }
        GroupKind::SO if d == 3 => vec![
            unit(3, 2, 1) - unit(3, 1, 2),
            unit(3, 0, 2) - unit(3, 2, 0),
            unit(3, 1, 0) - unit(3, 0, 1),
        ],
        GroupKind::SO => {
            let mut b = Vec::new();
            for i in 0..d {
                for j in i + 1..d {
                    b.push(unit(d, j, i) - unit(d, i, j));
                }
            }
            b
        }
        GroupKind::SE2 => vec![
            unit(3, 1, 0) - unit(3, 0, 1),
            unit(3, 0, 2),
            unit(3, 1, 2),
        ],
        GroupKind::Heisenberg => vec![unit(3, 0, 1), unit(3, 1, 2), unit(3, 0, 2)],
        GroupKind::Scalar => vec![unit(1, 0, 0)],
        GroupKind::Custom(_) => Vec::new(),
    }
}

impl GroupDescriptor {
    /// Builds one of the standard groups. `d` is ignored for the fixed-size kinds.
    pub fn new(kind: GroupKind, d: usize) -> Result<Arc<Self>> {
        let d = match kind {
            GroupKind::SE2 | GroupKind::Heisenberg => 3,
            GroupKind::Scalar => 1,
            GroupKind::Custom(_) => {
                return Err(Error::InvalidInput(
                    "custom groups need an explicit basis; use GroupDescriptor::custom".into(),
                ))
            }
            _ => d,
        };
        if d == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        if matches!(kind, GroupKind::SO | GroupKind::SL) && d < 2 {
            return Err(Error::InvalidInput(format!("{kind:?} needs d ≥ 2")));
        }
        let basis = standard_basis(&kind, d);
        Self::build(kind, d, basis)
    }

    /// A subgroup given by a basis of its Lie algebra inside `d×d` matrices.
    pub fn custom(name: &str, d: usize, basis: Vec<Mat>) -> Result<Arc<Self>> {
        Self::build(GroupKind::Custom(name.to_string()), d, basis)
    }

    fn build(kind: GroupKind, d: usize, basis: Vec<Mat>) -> Result<Arc<Self>> {
        if basis.is_empty() {
            return Err(Error::InvalidInput("empty algebra basis".into()));
        }
        if basis.iter().any(|b| b.nrows() != d || b.ncols() != d) {
            return Err(Error::InvalidInput(format!("basis matrices must be {d}×{d}")));
        }
        let k = basis.len();
        let mut stacked = DMatrix::<f64>::zeros(d * d, k);
        for (c, b) in basis.iter().enumerate() {
            stacked.column_mut(c).copy_from_slice(b.as_slice());
        }
        let svd = stacked.clone().svd(false, false);
        let smallest = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if smallest < 1e-10 {
            return Err(Error::InvalidInput("algebra basis is linearly dependent".into()));
        }
        let gram = stacked.transpose() * &stacked;
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("singular basis Gram matrix".into()))?;
        let coord_map = gram_inv * stacked.transpose();
        let mut desc = GroupDescriptor { kind, dim: d, basis, coord_map, abelian: true };
        for i in 0..k {
            for j in i + 1..k {
                let (a, b) = (&desc.basis[i], &desc.basis[j]);
                let c = a * b - b * a;
                if c.amax() > 1e-12 {
                    desc.abelian = false;
                }
                let (_, defect) = desc.project(&c);
                if defect > 1e-10 {
                    return Err(Error::InvalidInput(format!(
                        "basis not closed under the bracket (defect {defect:e} at pair {i},{j})"
                    )));
                }
            }
        }
        Ok(Arc::new(desc))
    }

    /// Parses names like `GL2`, `SL3`, `SO3`, `SE2`, `HEIS3`, `SCALAR`.
    pub fn from_name(name: &str) -> Result<Arc<Self>> {
        let upper = name.trim().to_ascii_uppercase();
        match upper.as_str() {
            "SE2" => return Self::new(GroupKind::SE2, 3),
            "HEIS3" | "HEISENBERG" => return Self::new(GroupKind::Heisenberg, 3),
            "SCALAR" | "R" => return Self::new(GroupKind::Scalar, 1),
            _ => {}
        }
        let (kind, rest) = if let Some(r) = upper.strip_prefix("GL") {
            (GroupKind::GL, r)
        } else if let Some(r) = upper.strip_prefix("SL") {
            (GroupKind::SL, r)
        } else if let Some(r) = upper.strip_prefix("SO") {
            (GroupKind::SO, r)
        } else {
            return Err(Error::InvalidInput(format!("unknown group '{name}'")));
        };
        let d: usize = rest
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad dimension in group '{name}'")))?;
        Self::new(kind, d)
    }

    pub fn gl(d: usize) -> Arc<Self> {
        Self::new(GroupKind::GL, d).expect("GL(d) basis is valid for d ≥ 1")
    }
    pub fn sl(d: usize) -> Arc<Self> {
        Self::new(GroupKind::SL, d).expect("SL(d) basis is valid for d ≥ 2")
    }
    pub fn so(d: usize) -> Arc<Self> {
        Self::new(GroupKind::SO, d).expect("SO(d) basis is valid for d ≥ 2")
    }
    pub fn se2() -> Arc<Self> {
        Self::new(GroupKind::SE2, 3).expect("SE(2) basis is valid")
    }
    pub fn heisenberg() -> Arc<Self> {
        Self::new(GroupKind::Heisenberg, 3).expect("Heisenberg basis is valid")
    }
    pub fn scalar() -> Arc<Self> {
        Self::new(GroupKind::Scalar, 1).expect("scalar basis is valid")
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    /// Matrix size `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn algebra_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Mat] {
        &self.basis
    }

    pub fn is_abelian(&self) -> bool {
        self.abelian
    }

    pub fn name(&self) -> String {
        match &self.kind {
            GroupKind::GL => format!("GL{}", self.dim),
            GroupKind::SL => format!("SL{}", self.dim),
            GroupKind::SO => format!("SO{}", self.dim),
            GroupKind::SE2 => "SE2".into(),
            GroupKind::Heisenberg => "HEIS3".into(),
            GroupKind::Scalar => "SCALAR".into(),
            GroupKind::Custom(n) => n.clone(),
        }
    }

    /// Least-squares basis coordinates of a matrix.
    pub fn coordinates(&self, m: &Mat) -> DVector<f64> {
        &self.coord_map * DVector::from_column_slice(m.as_slice())
    }

    pub fn from_coordinates(&self, coords: &[f64]) -> Result<Mat> {
        if coords.len() != self.basis.len() {
            return Err(Error::InvalidInput(format!(
                "{} needs {} coordinates, got {}",
                self.name(),
                self.basis.len(),
                coords.len()
            )));
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (c, b) in coords.iter().zip(&self.basis) {
            m += b * *c;
        }
        Ok(m)
    }

    /// Orthogonal projection onto the algebra and the max-norm defect it removed.
    pub fn project(&self, m: &Mat) -> (Mat, f64) {
        let coords = self.coordinates(m);
        let mut p = DMatrix::zeros(self.dim, self.dim);
        for (c, b) in coords.iter().zip(&self.basis) {
            p += b * *c;
        }
        let defect = (m - &p).amax();
        (p, defect)
    }

    pub fn identity_matrix(&self) -> Mat {
        DMatrix::identity(self.dim, self.dim)
    }

    pub fn zero_matrix(&self) -> Mat {
        DMatrix::zeros(self.dim, self.dim)
    }

    /// Membership defect of a raw matrix; see [`group_check`].
    pub fn membership_defect(&self, g: &Mat) -> f64 {
        if g.nrows() != self.dim || g.ncols() != self.dim || g.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let orth = |r: &Mat| {
            let n = r.nrows();
            (r.transpose() * r - DMatrix::<f64>::identity(n, n)).amax()
        };
        match self.kind {
            GroupKind::SO => orth(g),
            GroupKind::SL => (g.determinant() - 1.0).abs(),
            GroupKind::SE2 => {
                let rot: Mat = g.view((0, 0), (2, 2)).into_owned();
                let last = (g[(2, 0)].abs()).max(g[(2, 1)].abs()).max((g[(2, 2)] - 1.0).abs());
                orth(&rot) + last
            }
            GroupKind::Heisenberg => {
                let mut worst = 0.0f64;
                for i in 0..3 {
                    worst = worst.max((g[(i, i)] - 1.0).abs());
                    for j in 0..i {
                        worst = worst.max(g[(i, j)].abs());
                    }
                }
                worst
            }
            GroupKind::Scalar => 0.0,
            GroupKind::GL | GroupKind::Custom(_) => {
                if g.determinant() != 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn zero(self: &Arc<Self>) -> AlgebraElement {
        AlgebraElement { group: Arc::clone(self), matrix: self.zero_matrix() }
    }

    pub fn identity(self: &Arc<Self>) -> GroupElement {
        GroupElement { group: Arc::clone(self), matrix: self.identity_matrix() }
    }

    pub fn element(self: &Arc<Self>, coords: &[f64]) -> Result<AlgebraElement> {
        Ok(AlgebraElement { group: Arc::clone(self), matrix: self.from_coordinates(coords)? })
    }

    /// Random algebra element with coordinates uniform in `[-bound, bound]`.
    pub fn random_element<R: Rng + ?Sized>(self: &Arc<Self>, rng: &mut R, bound: f64) -> AlgebraElement {
        let coords: Vec<f64> = (0..self.algebra_dim())
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        self.element(&coords).expect("coordinate count matches")
    }
}

pub(crate) fn same_group(a: &Arc<GroupDescriptor>, b: &Arc<GroupDescriptor>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn ensure_same(a: &Arc<GroupDescriptor>, b: &Arc<GroupDescriptor>) -> Result<()> {
    if same_group(a, b) {
        Ok(())
    } else {
        Err(Error::Incompatible(format!("{} vs {}", a.name(), b.name())))
    }
}

/// Element of the Lie algebra of a matrix group.
#[derive(Debug, Clone)]
pub struct AlgebraElement {
    group: Arc<GroupDescriptor>,
    matrix: Mat,
}

impl AlgebraElement {
    /// Wraps a matrix after projecting it onto the algebra; rejects matrices
    /// whose relative projection defect exceeds `1e-10`.
    pub fn new(group: &Arc<GroupDescriptor>, matrix: Mat) -> Result<Self> {
        if matrix.nrows() != group.dim() || matrix.ncols() != group.dim() {
            return Err(Error::InvalidInput(format!(
                "expected a {0}×{0} matrix for {1}",
                group.dim(),
                group.name()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite algebra element".into()));
        }
        let (p, defect) = group.project(&matrix);
        if defect > 1e-10 * matrix.amax().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "matrix is not in the algebra of {} (defect {defect:e})",
                group.name()
            )));
        }
        Ok(AlgebraElement { group: Arc::clone(group), matrix: p })
    }

    pub(crate) fn from_parts(group: Arc<GroupDescriptor>, matrix: Mat) -> Self {
        AlgebraElement { group, matrix }
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }

    pub fn coordinates(&self) -> Vec<f64> {
        self.group.coordinates(&self.matrix).iter().cloned().collect()
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        norm(&self.matrix, kind)
    }

    pub fn scale(&self, s: f64) -> Self {
        AlgebraElement { group: Arc::clone(&self.group), matrix: &self.matrix * s }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        ensure_same(&self.group, &other.group)?;
        Ok(AlgebraElement { group: Arc::clone(&self.group), matrix: &self.matrix + &other.matrix })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        ensure_same(&self.group, &other.group)?;
        Ok(AlgebraElement { group: Arc::clone(&self.group), matrix: &self.matrix - &other.matrix })
    }
}

/// Element of a matrix group.
#[derive(Debug, Clone)]
pub struct GroupElement {
    group: Arc<GroupDescriptor>,
    matrix: Mat,
}

impl GroupElement {
    /// Wraps an invertible matrix. Membership is not enforced here; use
    /// [`group_check`] to measure it.
    pub fn new(group: &Arc<GroupDescriptor>, matrix: Mat) -> Result<Self> {
        if matrix.nrows() != group.dim() || matrix.ncols() != group.dim() {
            return Err(Error::InvalidElement(format!(
                "expected a {0}×{0} matrix for {1}",
                group.dim(),
                group.name()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidElement("non-finite entry".into()));
        }
        if matrix.determinant() == 0.0 {
            return Err(Error::InvalidElement("singular matrix".into()));
        }
        Ok(GroupElement { group: Arc::clone(group), matrix })
    }

    pub(crate) fn from_parts(group: Arc<GroupDescriptor>, matrix: Mat) -> Self {
        GroupElement { group, matrix }
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        ensure_same(&self.group, &other.group)?;
        Ok(GroupElement { group: Arc::clone(&self.group), matrix: &self.matrix * &other.matrix })
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidElement("singular group element".into()))?;
        Ok(GroupElement { group: Arc::clone(&self.group), matrix: inv })
    }

    /// `self^n` by binary exponentiation.
    pub fn pow(&self, mut n: u64) -> Self {
        let mut base = self.matrix.clone();
        let mut acc = self.group.identity_matrix();
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        GroupElement { group: Arc::clone(&self.group), matrix: acc }
    }
}

/// Matrix exponential of an algebra element.
pub fn mat_exp(x: &AlgebraElement) -> Result<GroupElement> {
    if x.matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite algebra element".into()));
    }
    Ok(GroupElement::from_parts(Arc::clone(&x.group), expm(&x.matrix)))
}

/// Principal logarithm, projected onto the algebra. Requires `‖g − I‖_op < 1`.
pub fn mat_log(g: &GroupElement) -> Result<AlgebraElement> {
    let raw = logm(&g.matrix)?;
    let (p, _) = g.group.project(&raw);
    Ok(AlgebraElement::from_parts(Arc::clone(&g.group), p))
}

/// `g X g⁻¹`, projected onto the algebra.
pub fn adjoint(g: &GroupElement, x: &AlgebraElement) -> Result<AlgebraElement> {
    ensure_same(&g.group, &x.group)?;
    let inv = g
        .matrix
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidElement("singular group element".into()))?;
    let conj = &g.matrix * &x.matrix * inv;
    let (p, _) = g.group.project(&conj);
    Ok(AlgebraElement::from_parts(Arc::clone(&g.group), p))
}

/// `XY − YX`, projected onto the algebra.
pub fn bracket(x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
    ensure_same(&x.group, &y.group)?;
    let c = &x.matrix * &y.matrix - &y.matrix * &x.matrix;
    let (p, _) = x.group.project(&c);
    Ok(AlgebraElement::from_parts(Arc::clone(&x.group), p))
}

/// Kind-specific membership defect (0 means exactly in the group).
pub fn group_check(g: &GroupElement) -> f64 {
    g.group.membership_defect(&g.matrix)
}
