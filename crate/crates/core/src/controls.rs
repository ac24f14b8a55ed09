//! Algebra-valued controls on `[0, 1]`.
//!
//! Two representations are supported. A [`StepControl`] is piecewise
//! constant on an explicit partition and is evaluated exactly everywhere. A
//! [`SampledControl`] stores the values of an underlying function at the
//! cell midpoints `(i + ½)/N`; seminorms and pointwise operations use the
//! midpoint rule, while the evolution engine reconstructs the function by
//! linear interpolation through the midpoints (see [`Control::eval`]).
//!
//! Controls are representatives of `L^p` classes; two controls are treated
//! as equal when their `L^1` distance is below a tolerance.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{ensure_same, norm, GroupDescriptor, Mat, NormKind};
use crate::error::{Error, Result};

/// Integrability exponent of a seminorm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exponent {
    One,
    Two,
    Inf,
}

/// Regularity class a sampled control is declared to represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PClass {
    L1,
    L2,
    LInf,
    Regulated,
}

const MERGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct StepControl {
    group: Arc<GroupDescriptor>,
    breakpoints: Vec<f64>,
    values: Vec<Mat>,
}

impl StepControl {
    pub fn new(group: &Arc<GroupDescriptor>, breakpoints: Vec<f64>, values: Vec<Mat>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidControl("need at least the breakpoints 0 and 1".into()));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidControl("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidControl("breakpoints must be strictly increasing".into()));
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidControl(format!(
                "{} breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                values.len()
            )));
        }
        let values = values
            .into_iter()
            .map(|v| check_value(group, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(StepControl { group: Arc::clone(group), breakpoints, values })
    }

    /// Values given as basis coordinates.
    pub fn from_coordinates(
        group: &Arc<GroupDescriptor>,
        breakpoints: Vec<f64>,
        coords: &[Vec<f64>],
    ) -> Result<Self> {
        let values = coords
            .iter()
            .map(|c| group.from_coordinates(c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(group, breakpoints, values)
    }

    pub fn constant(group: &Arc<GroupDescriptor>, value: Mat) -> Result<Self> {
        Self::new(group, vec![0.0, 1.0], vec![value])
    }

    pub fn zero(group: &Arc<GroupDescriptor>) -> Self {
        StepControl {
            group: Arc::clone(group),
            breakpoints: vec![0.0, 1.0],
            values: vec![group.zero_matrix()],
        }
    }

    pub(crate) fn from_parts(group: Arc<GroupDescriptor>, breakpoints: Vec<f64>, values: Vec<Mat>) -> Self {
        debug_assert_eq!(breakpoints.len(), values.len() + 1);
        StepControl { group, breakpoints, values }
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn pieces(&self) -> usize {
        self.values.len()
    }

    /// Index of the piece `[t_{j-1}, t_j[` containing `t`; `t = 1` belongs to the last piece.
    pub fn piece_index(&self, t: f64) -> usize {
        let m = self.values.len();
        match self.breakpoints.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
            Ok(j) => j.min(m - 1),
            Err(j) => j.saturating_sub(1).min(m - 1),
        }
    }

    pub fn value_at(&self, t: f64) -> &Mat {
        &self.values[self.piece_index(t)]
    }
}

fn check_value(group: &Arc<GroupDescriptor>, v: Mat) -> Result<Mat> {
    if v.nrows() != group.dim() || v.ncols() != group.dim() {
        return Err(Error::InvalidControl(format!("values must be {0}×{0}", group.dim())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidControl("non-finite control value".into()));
    }
    let (p, defect) = group.project(&v);
    if defect > 1e-10 * v.amax().max(1.0) {
        return Err(Error::InvalidControl(format!(
            "control value outside the algebra of {} (defect {defect:e})",
            group.name()
        )));
    }
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct SampledControl {
    group: Arc<GroupDescriptor>,
    samples: Vec<Mat>,
    p_class: PClass,
}

impl SampledControl {
    pub fn new(group: &Arc<GroupDescriptor>, samples: Vec<Mat>, p_class: PClass) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidControl("a sampled control needs N ≥ 1 samples".into()));
        }
        let samples = samples
            .into_iter()
            .map(|v| check_value(group, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(SampledControl { group: Arc::clone(group), samples, p_class })
    }

    /// Samples `f` at the midpoints of an `n`-cell grid.
    pub fn from_fn<F>(group: &Arc<GroupDescriptor>, n: usize, p_class: PClass, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Mat,
    {
        let samples = (0..n).map(|i| f((i as f64 + 0.5) / n as f64)).collect();
        Self::new(group, samples, p_class)
    }

    pub(crate) fn from_parts(group: Arc<GroupDescriptor>, samples: Vec<Mat>, p_class: PClass) -> Self {
        SampledControl { group, samples, p_class }
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn samples(&self) -> &[Mat] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn p_class(&self) -> PClass {
        self.p_class
    }

    pub fn cell_index(&self, t: f64) -> usize {
        let n = self.samples.len();
        ((t * n as f64).floor().max(0.0) as usize).min(n - 1)
    }

    /// Sample of the cell containing `t`.
    pub fn value_at(&self, t: f64) -> &Mat {
        &self.samples[self.cell_index(t)]
    }

    /// Piecewise-linear interpolation through the midpoint samples,
    /// extended linearly on the two boundary half-cells.
    pub fn interpolate(&self, t: f64) -> Mat {
        let n = self.samples.len();
        if n == 1 {
            return self.samples[0].clone();
        }
        let u = t * n as f64 - 0.5;
        let i = (u.floor().max(0.0) as usize).min(n - 2);
        let w = u - i as f64;
        &self.samples[i] * (1.0 - w) + &self.samples[i + 1] * w
    }
}

#[derive(Debug, Clone)]
pub enum Control {
    Step(StepControl),
    Sampled(SampledControl),
}

impl From<StepControl> for Control {
    fn from(s: StepControl) -> Self {
        Control::Step(s)
    }
}

impl From<SampledControl> for Control {
    fn from(s: SampledControl) -> Self {
        Control::Sampled(s)
    }
}

impl Control {
    pub fn zero(group: &Arc<GroupDescriptor>) -> Self {
        Control::Step(StepControl::zero(group))
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        match self {
            Control::Step(s) => &s.group,
            Control::Sampled(s) => &s.group,
        }
    }

    pub fn as_step(&self) -> Option<&StepControl> {
        match self {
            Control::Step(s) => Some(s),
            Control::Sampled(_) => None,
        }
    }

    pub fn is_step(&self) -> bool {
        matches!(self, Control::Step(_))
    }

    /// Value of the representative on the cell containing `t` (piece value or cell sample).
    pub fn value_at(&self, t: f64) -> &Mat {
        match self {
            Control::Step(s) => s.value_at(t),
            Control::Sampled(s) => s.value_at(t),
        }
    }

    /// Pointwise value used by the evolution engine: the exact piece value
    /// for step controls, the midpoint interpolant for sampled ones.
    pub fn eval(&self, t: f64) -> Mat {
        match self {
            Control::Step(s) => s.value_at(t).clone(),
            Control::Sampled(s) => s.interpolate(t),
        }
    }

    /// Cell boundaries of the representative: step breakpoints, or `i/N`.
    pub fn cell_edges(&self) -> Vec<f64> {
        match self {
            Control::Step(s) => s.breakpoints.clone(),
            Control::Sampled(s) => uniform_grid(s.len()),
        }
    }

    /// Points where [`Control::eval`] fails to be smooth; evolution grids include them.
    pub fn knots(&self) -> Vec<f64> {
        match self {
            Control::Step(s) => s.breakpoints.clone(),
            Control::Sampled(s) => {
                let n = s.len();
                let mut k = vec![0.0];
                if n > 1 {
                    k.extend((0..n).map(|i| (i as f64 + 0.5) / n as f64));
                }
                k.push(1.0);
                k
            }
        }
    }

    /// `∫_0^t` of [`Control::eval`], exact for both representations.
    pub fn integral_to(&self, t: f64) -> Mat {
        let t = t.clamp(0.0, 1.0);
        let g = self.group();
        let mut acc = g.zero_matrix();
        match self {
            Control::Step(s) => {
                for (j, v) in s.values.iter().enumerate() {
                    let (a, b) = (s.breakpoints[j], s.breakpoints[j + 1]);
                    if a >= t {
                        break;
                    }
                    acc += v * (b.min(t) - a);
                }
            }
            Control::Sampled(_) => {
                let knots = self.knots();
                for w in knots.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if a >= t {
                        break;
                    }
                    let b = b.min(t);
                    // eval is affine on [a, b]
                    acc += (self.eval(a) + self.eval(b)) * (0.5 * (b - a));
                }
            }
        }
        acc
    }

    /// Integral of [`Control::eval`] over `[a, b]`.
    pub fn integral_between(&self, a: f64, b: f64) -> Mat {
        self.integral_to(b) - self.integral_to(a)
    }

    pub fn scale(&self, s: f64) -> Control {
        self.map_values(|v| v * s)
    }

    pub fn neg(&self) -> Control {
        self.scale(-1.0)
    }

    /// Applies `f` to every stored value, keeping the representation.
    pub(crate) fn map_values<F: Fn(&Mat) -> Mat>(&self, f: F) -> Control {
        self.map_values_into(Arc::clone(self.group()), f)
    }

    pub(crate) fn map_values_into<F: Fn(&Mat) -> Mat>(&self, group: Arc<GroupDescriptor>, f: F) -> Control {
        match self {
            Control::Step(s) => Control::Step(StepControl::from_parts(
                group,
                s.breakpoints.clone(),
                s.values.iter().map(f).collect(),
            )),
            Control::Sampled(s) => Control::Sampled(SampledControl::from_parts(
                group,
                s.samples.iter().map(f).collect(),
                s.p_class,
            )),
        }
    }

    pub fn add(&self, other: &Control) -> Result<Control> {
        pointwise(&[self, other], |v| v[0] + v[1])
    }

    pub fn sub(&self, other: &Control) -> Result<Control> {
        pointwise(&[self, other], |v| v[0] - v[1])
    }

    pub fn lp_seminorm(&self, p: Exponent, q: NormKind) -> f64 {
        lp_seminorm(self, p, q)
    }

    /// `L^1` distance of the representatives.
    pub fn l1_distance(&self, other: &Control, q: NormKind) -> Result<f64> {
        Ok(self.sub(other)?.lp_seminorm(Exponent::One, q))
    }
}

pub(crate) fn uniform_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Sorted union of several node lists; nodes closer than `1e-12` collapse to the smaller one.
pub(crate) fn merge_nodes(lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().cloned()).collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for t in all {
        match out.last() {
            Some(&last) if t - last <= MERGE_EPS => {}
            _ => out.push(t),
        }
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    if let Some(first) = out.first_mut() {
        *first = 0.0;
    }
    out
}

/// Applies `f` to the values of several controls on their common cells.
///
/// Sampled controls of equal length give a sampled result on the same grid;
/// any other mix gives a step control on the merged cell edges.
pub(crate) fn pointwise<F>(controls: &[&Control], f: F) -> Result<Control>
where
    F: Fn(&[&Mat]) -> Mat,
{
    let group = Arc::clone(controls[0].group());
    for c in &controls[1..] {
        ensure_same(&group, c.group())?;
    }
    let sampled_len = controls.iter().try_fold(None, |acc: Option<usize>, c| match (acc, c) {
        (_, Control::Step(_)) => Err(()),
        (None, Control::Sampled(s)) => Ok(Some(s.len())),
        (Some(n), Control::Sampled(s)) if s.len() == n => Ok(Some(n)),
        _ => Err(()),
    });
    if let Ok(Some(n)) = sampled_len {
        let p_class = match controls[0] {
            Control::Sampled(s) => s.p_class,
            Control::Step(_) => unreachable!(),
        };
        let samples = (0..n)
            .map(|i| {
                let vals: Vec<&Mat> = controls
                    .iter()
                    .map(|c| match c {
                        Control::Sampled(s) => &s.samples[i],
                        Control::Step(_) => unreachable!(),
                    })
                    .collect();
                f(&vals)
            })
            .collect();
        return Ok(Control::Sampled(SampledControl::from_parts(group, samples, p_class)));
    }
    let edges: Vec<Vec<f64>> = controls.iter().map(|c| c.cell_edges()).collect();
    let refs: Vec<&[f64]> = edges.iter().map(|e| e.as_slice()).collect();
    let nodes = merge_nodes(&refs);
    let values = nodes
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let vals: Vec<&Mat> = controls.iter().map(|c| c.value_at(mid)).collect();
            f(&vals)
        })
        .collect();
    Ok(Control::Step(StepControl::from_parts(group, nodes, values)))
}

/// `‖γ‖_{L^p, q}`: exact on step controls, midpoint rule on sampled ones.
/// `p = ∞` is the maximum over pieces or samples.
pub fn lp_seminorm(gamma: &Control, p: Exponent, q: NormKind) -> f64 {
    let weighted: Vec<(f64, f64)> = match gamma {
        Control::Step(s) => s
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| (s.breakpoints[j + 1] - s.breakpoints[j], norm(v, q)))
            .collect(),
        Control::Sampled(s) => {
            let h = 1.0 / s.len() as f64;
            s.samples.iter().map(|v| (h, norm(v, q))).collect()
        }
    };
    match p {
        Exponent::One => weighted.iter().map(|(w, n)| w * n).sum(),
        Exponent::Two => weighted.iter().map(|(w, n)| w * n * n).sum::<f64>().sqrt(),
        Exponent::Inf => weighted.iter().map(|(_, n)| *n).fold(0.0, f64::max),
    }
}

/// Applies a linear map of the algebra, given on basis coordinates, to every value.
pub fn pushforward_linear(gamma: &Control, lambda: &Mat) -> Result<Control> {
    let group = gamma.group();
    let k = group.algebra_dim();
    if lambda.nrows() != k || lambda.ncols() != k {
        return Err(Error::InvalidInput(format!(
            "linear map must be {k}×{k} on the coordinates of {}",
            group.name()
        )));
    }
    Ok(gamma.map_values(|v| {
        let c: DVector<f64> = lambda * group.coordinates(v);
        group.from_coordinates(c.as_slice()).expect("coordinate count matches")
    }))
}

/// Reparametrizes the restriction of `gamma` to `[alpha, beta]` onto `[0, 1]`.
pub fn pullback_affine(gamma: &Control, alpha: f64, beta: f64) -> Result<Control> {
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) || !(alpha < beta) {
        return Err(Error::InvalidInput(format!(
            "window [{alpha}, {beta}] must satisfy 0 ≤ α < β ≤ 1"
        )));
    }
    let width = beta - alpha;
    let to_window = |s: f64| alpha + s * width;
    match gamma {
        Control::Step(s) => {
            let mut bps = vec![0.0];
            let mut vals = vec![s.value_at(alpha).clone()];
            for (j, &b) in s.breakpoints.iter().enumerate() {
                if b > alpha && b < beta {
                    let local = (b - alpha) / width;
                    if local <= MERGE_EPS || local >= 1.0 - MERGE_EPS {
                        continue;
                    }
                    bps.push(local);
                    vals.push(s.values[j.min(s.values.len() - 1)].clone());
                }
            }
            bps.push(1.0);
            Ok(Control::Step(StepControl::from_parts(Arc::clone(&s.group), bps, vals)))
        }
        Control::Sampled(s) => {
            let n = s.len();
            let samples = (0..n)
                .map(|i| s.value_at(to_window((i as f64 + 0.5) / n as f64)).clone())
                .collect();
            Ok(Control::Sampled(SampledControl::from_parts(Arc::clone(&s.group), samples, s.p_class)))
        }
    }
}

/// Places `pieces[k]` (each a control on `[0,1]`) on `[s_{k-1}, s_k]`.
pub fn concat(pieces: &[Control], partition: &[f64]) -> Result<Control> {
    if pieces.is_empty() || partition.len() != pieces.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "{} pieces need a partition of {} points",
            pieces.len(),
            pieces.len() + 1
        )));
    }
    if partition[0] != 0.0 || *partition.last().unwrap() != 1.0 || partition.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("partition must increase strictly from 0 to 1".into()));
    }
    let group = Arc::clone(pieces[0].group());
    for p in &pieces[1..] {
        ensure_same(&group, p.group())?;
    }
    let sampled_n = pieces
        .iter()
        .filter_map(|p| match p {
            Control::Sampled(s) => Some(s.len()),
            Control::Step(_) => None,
        })
        .max();
    let locate = |t: f64| -> (usize, f64) {
        let k = match partition.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
            Ok(j) => j,
            Err(j) => j.saturating_sub(1),
        }
        .min(pieces.len() - 1);
        let local = (t - partition[k]) / (partition[k + 1] - partition[k]);
        (k, local.clamp(0.0, 1.0))
    };
    match sampled_n {
        None => {
            let mut bps = vec![0.0];
            let mut vals = Vec::new();
            for (k, p) in pieces.iter().enumerate() {
                let s = p.as_step().expect("all pieces are step controls");
                let (a, b) = (partition[k], partition[k + 1]);
                for (j, v) in s.values.iter().enumerate() {
                    vals.push(v.clone());
                    let end = a + s.breakpoints[j + 1] * (b - a);
                    bps.push(if j + 1 == s.values.len() { b } else { end });
                }
            }
            Ok(Control::Step(StepControl::from_parts(group, bps, vals)))
        }
        Some(n) => {
            let p_class = pieces
                .iter()
                .find_map(|p| match p {
                    Control::Sampled(s) => Some(s.p_class),
                    Control::Step(_) => None,
                })
                .unwrap_or(PClass::L1);
            let samples = (0..n)
                .map(|i| {
                    let (k, local) = locate((i as f64 + 0.5) / n as f64);
                    pieces[k].value_at(local).clone()
                })
                .collect();
            Ok(Control::Sampled(SampledControl::from_parts(group, samples, p_class)))
        }
    }
}

/// The pieces `t ↦ (1/n) γ((k + t)/n)`, `k = 0, …, n-1`.
pub fn subdivide(gamma: &Control, n: usize) -> Result<Vec<Control>> {
    if n == 0 {
        return Err(Error::InvalidInput("subdivision count must be positive".into()));
    }
    let scale = 1.0 / n as f64;
    (0..n)
        .map(|k| {
            let a = k as f64 / n as f64;
            let b = if k + 1 == n { 1.0 } else { (k + 1) as f64 / n as f64 };
            Ok(pullback_affine(gamma, a, b)?.scale(scale))
        })
        .collect()
}

/// Step control on `m` equal pieces whose value on each piece is the sample
/// nearest to the piece midpoint. When the midpoint sits on a cell edge the
/// left and right neighbours alternate from piece to piece, so the half-cell
/// offsets cancel between neighbouring pieces.
pub fn step_approximate(gamma: &SampledControl, m: usize) -> Result<StepControl> {
    if m == 0 {
        return Err(Error::InvalidInput("piece count must be positive".into()));
    }
    let n = gamma.len();
    if m > n {
        return Err(Error::InvalidInput(format!("cannot take {m} pieces from {n} samples")));
    }
    let bps = uniform_grid(m);
    let values = (0..m)
        .map(|j| {
            // midpoint in units of cells: (2j + 1)·N / (2m)
            let num = (2 * j + 1) * n;
            let den = 2 * m;
            let cell = if num % den == 0 {
                let edge = num / den;
                if j % 2 == 0 { edge - 1 } else { edge }
            } else {
                num / den
            };
            gamma.samples[cell.min(n - 1)].clone()
        })
        .collect();
    Ok(StepControl::from_parts(Arc::clone(&gamma.group), bps, values))
}

/// Linear map on coordinates as a `k×k` matrix; convenience for [`pushforward_linear`].
pub fn coordinate_map(k: usize, entries: &[f64]) -> Result<Mat> {
    if entries.len() != k * k {
        return Err(Error::InvalidInput(format!("expected {} entries", k * k)));
    }
    Ok(DMatrix::from_row_slice(k, k, entries))
}
