//! Left and right evolutions, logarithmic derivatives and the group law they
//! induce on controls.
//!
//! The left evolution of a control `γ` solves `η'(t) = η(t)γ(t)`, `η(0) = e`.
//! Step controls are evolved exactly as products of exponentials. Other
//! controls go through the fixed-point solver in [`picard`] on pieces of
//! bounded `L^1` mass, which are then composed from the left.

mod extension;
mod path;
mod picard;

use std::sync::Arc;

use crate::algebra::{expm, logm, norm, AlgebraElement, GroupDescriptor, GroupKind, Mat, NormKind};
use crate::controls::{lp_seminorm, merge_nodes, uniform_grid, Control, Exponent, PClass, SampledControl, StepControl};
use crate::error::{Error, Result};

pub use extension::{ExtensionDescriptor, ExtensionEvolution};
pub use path::{fmt_f64, Path};
pub(crate) use path::quotient;

/// Solver settings shared by every evolution routine.
#[derive(Debug, Clone)]
pub struct Evolver {
    /// Cells of the uniform output grid.
    pub grid: usize,
    /// Largest `L^1` operator-norm mass handed to a single fixed-point solve.
    pub theta_max: f64,
    pub picard_tol: f64,
    pub max_iter: usize,
    /// Membership tolerance for reported paths.
    pub path_tol: f64,
    /// Project each fixed-point piece back onto `SO(d)` by its polar factor.
    /// Off by default so that the group defect stays observable.
    pub retract: bool,
}

impl Default for Evolver {
    fn default() -> Self {
        Evolver { grid: 1024, theta_max: 0.5, picard_tol: 1e-12, max_iter: 200, path_tol: 1e-8, retract: false }
    }
}

/// An evolved path together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub path: Path,
    /// Largest number of fixed-point sweeps used on any piece (0 for exact step evolution).
    pub picard_iters: usize,
    pub residual: f64,
    /// Piece boundaries used for the local-to-global composition.
    pub partition: Vec<f64>,
}

impl Evolution {
    pub fn defect_max(&self) -> f64 {
        self.path.defect_max()
    }
}

pub(crate) enum Source<'a> {
    Control(&'a Control),
    Func(&'a dyn Fn(f64) -> Mat),
}

impl Source<'_> {
    fn eval(&self, t: f64) -> Mat {
        match self {
            Source::Control(c) => c.eval(t),
            Source::Func(f) => f(t),
        }
    }

    fn cell_value(&self, a: f64, b: f64) -> Mat {
        let mid = 0.5 * (a + b);
        match self {
            Source::Control(c) => c.value_at(mid).clone(),
            Source::Func(f) => f(mid),
        }
    }

    fn step(&self) -> Option<&StepControl> {
        match self {
            Source::Control(Control::Step(s)) => Some(s),
            _ => None,
        }
    }
}

/// Exact evolution of a step control on `nodes`, relative to `nodes[0]`:
/// on each piece `η(t) = η(t_a)·exp((t − t_a)·v)` with `t_a` the piece start.
fn step_segment(step: &StepControl, nodes: &[f64]) -> Vec<Mat> {
    let d = step.group().dim();
    let mut points = vec![Mat::identity(d, d)];
    let mut anchor = Mat::identity(d, d);
    let mut anchor_t = nodes[0];
    let mut current = None;
    for w in nodes.windows(2) {
        let j = step.piece_index(0.5 * (w[0] + w[1]));
        if current != Some(j) {
            anchor = points.last().unwrap().clone();
            anchor_t = w[0];
            current = Some(j);
        }
        let v = &step.values()[j];
        points.push(&anchor * expm(&(v * (w[1] - anchor_t))));
    }
    points
}

/// Orthogonal polar factor `UVᵀ` of `m = UΣVᵀ`.
fn polar_factor(m: &Mat) -> Mat {
    let svd = m.clone().svd(true, true);
    svd.u.expect("requested U") * svd.v_t.expect("requested Vᵀ")
}

fn nearest_index(nodes: &[f64], t: f64) -> usize {
    match nodes.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
        Ok(i) => i,
        Err(i) => {
            if i == 0 {
                0
            } else if i >= nodes.len() {
                nodes.len() - 1
            } else if (nodes[i] - t).abs() < (t - nodes[i - 1]).abs() {
                i
            } else {
                i - 1
            }
        }
    }
}

fn cell_midpoints(cells: &[f64]) -> Vec<f64> {
    cells.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

impl Evolver {
    pub fn with_grid(grid: usize) -> Self {
        Evolver { grid, ..Default::default() }
    }

    /// Uniform output grid with the control's step breakpoints merged in.
    pub fn output_grid(&self, gamma: &Control) -> Vec<f64> {
        let uniform = uniform_grid(self.grid);
        match gamma {
            Control::Step(s) => merge_nodes(&[&uniform, s.breakpoints()]),
            Control::Sampled(_) => uniform,
        }
    }

    /// Exact left evolution of a step control, reported on [`Evolver::output_grid`].
    pub fn evolve_step(&self, gamma: &StepControl) -> Path {
        let uniform = uniform_grid(self.grid);
        let times = merge_nodes(&[&uniform, gamma.breakpoints()]);
        let points = step_segment(gamma, &times);
        Path::from_parts(Arc::clone(gamma.group()), times, points)
    }

    /// Single fixed-point solve on `[0, 1]`; requires `‖γ‖_{L^1,op} ≤ θ_max`.
    pub fn evolve_picard(&self, gamma: &Control) -> Result<Evolution> {
        let mass = lp_seminorm(gamma, Exponent::One, NormKind::Op);
        if mass > self.theta_max * (1.0 + 1e-12) {
            return Err(Error::ContractionBoundExceeded { mass, bound: self.theta_max });
        }
        let output = self.output_grid(gamma);
        let knots = gamma.knots();
        let nodes = merge_nodes(&[&knots, &output]);
        let d = gamma.group().dim();
        let out = picard::solve(d, |t| gamma.eval(t), &nodes, self.picard_tol, self.max_iter)?;
        let points = output.iter().map(|&t| out.points[nearest_index(&nodes, t)].clone()).collect();
        Ok(Evolution {
            path: Path::from_parts(Arc::clone(gamma.group()), output, points),
            picard_iters: out.iterations,
            residual: out.residual,
            partition: vec![0.0, 1.0],
        })
    }

    /// Left evolution of any control, by local solves on pieces of mass at most `θ_max`.
    pub fn evolve(&self, gamma: &Control) -> Result<Evolution> {
        let output = self.output_grid(gamma);
        self.evolve_on(gamma, &output)
    }

    pub(crate) fn evolve_on(&self, gamma: &Control, output: &[f64]) -> Result<Evolution> {
        let knots = gamma.knots();
        self.evolve_source(gamma.group(), &Source::Control(gamma), &knots, output)
    }

    pub(crate) fn evolve_source(
        &self,
        group: &Arc<GroupDescriptor>,
        src: &Source<'_>,
        knots: &[f64],
        output: &[f64],
    ) -> Result<Evolution> {
        let base = merge_nodes(&[knots, output]);
        let theta = self.theta_max;

        // split cells that alone exceed the mass bound
        let mut nodes = vec![base[0]];
        let mut masses = Vec::with_capacity(base.len());
        for w in base.windows(2) {
            let h = w[1] - w[0];
            let mass = h * norm(&src.cell_value(w[0], w[1]), NormKind::Op);
            let parts = if mass > theta { (mass / theta).ceil() as usize } else { 1 };
            for k in 1..=parts {
                nodes.push(if k == parts { w[1] } else { w[0] + h * k as f64 / parts as f64 });
                masses.push(mass / parts as f64);
            }
        }

        let mut pieces = Vec::new();
        let mut start = 0;
        let mut acc = 0.0;
        for (i, m) in masses.iter().enumerate() {
            if i > start && acc + m > theta * (1.0 + 1e-12) {
                pieces.push((start, i));
                start = i;
                acc = 0.0;
            }
            acc += m;
        }
        pieces.push((start, masses.len()));

        let d = group.dim();
        let mut points: Vec<Mat> = Vec::with_capacity(nodes.len());
        points.push(Mat::identity(d, d));
        let mut iterations = 0;
        let mut residual = 0.0f64;
        for &(a, b) in &pieces {
            let seg = &nodes[a..=b];
            let local = match src.step() {
                Some(step) => step_segment(step, seg),
                None => {
                    let out = picard::solve(d, |t| src.eval(t), seg, self.picard_tol, self.max_iter)?;
                    iterations = iterations.max(out.iterations);
                    residual = residual.max(out.residual);
                    if self.retract && *group.kind() == GroupKind::SO {
                        out.points.iter().map(polar_factor).collect()
                    } else {
                        out.points
                    }
                }
            };
            let anchor = points.last().unwrap().clone();
            points.extend(local.iter().skip(1).map(|p| &anchor * p));
        }

        let partition = pieces.iter().map(|&(a, _)| nodes[a]).chain(std::iter::once(1.0)).collect();
        let out_points = output.iter().map(|&t| points[nearest_index(&nodes, t)].clone()).collect();
        Ok(Evolution {
            path: Path::from_parts(Arc::clone(group), output.to_vec(), out_points),
            picard_iters: iterations,
            residual,
            partition,
        })
    }

    /// Right evolution `η' = γη`, computed as the pointwise inverse of the left evolution of `−γ`.
    pub fn evolve_right(&self, gamma: &Control) -> Result<Evolution> {
        let mut ev = self.evolve(&gamma.neg())?;
        ev.path = ev.path.pointwise_inverse()?;
        Ok(ev)
    }

    /// Common cells for pointwise products, and whether they coincide with a
    /// shared sample grid of all inputs.
    fn product_cells(&self, controls: &[&Control]) -> (Vec<f64>, Option<(usize, PClass)>) {
        let uniform = uniform_grid(self.grid);
        let edges: Vec<Vec<f64>> = controls.iter().map(|c| c.cell_edges()).collect();
        let mut lists: Vec<&[f64]> = vec![&uniform];
        lists.extend(edges.iter().map(|e| e.as_slice()));
        let cells = merge_nodes(&lists);
        let mut shared = None;
        for c in controls {
            match (c, shared) {
                (Control::Sampled(s), None) => shared = Some((s.len(), s.p_class())),
                (Control::Sampled(s), Some((n, _))) if s.len() == n => {}
                _ => return (cells, None),
            }
        }
        match shared {
            Some((n, _)) if cells.len() == n + 1 => (cells, shared),
            _ => (cells, None),
        }
    }

    fn assemble(
        &self,
        group: &Arc<GroupDescriptor>,
        cells: Vec<f64>,
        shared: Option<(usize, PClass)>,
        values: Vec<Mat>,
    ) -> Control {
        match shared {
            Some((_, p_class)) => Control::Sampled(SampledControl::from_parts(Arc::clone(group), values, p_class)),
            None => Control::Step(StepControl::from_parts(Arc::clone(group), cells, values)),
        }
    }

    /// Evolution of `gamma` evaluated at the midpoints of `cells`.
    fn midpoint_evolution(&self, gamma: &Control, cells: &[f64]) -> Result<Vec<Mat>> {
        let mids = cell_midpoints(cells);
        let output = merge_nodes(&[cells, &mids]);
        let ev = self.evolve_on(gamma, &output)?;
        let times = ev.path.times();
        Ok(mids
            .iter()
            .map(|&m| ev.path.points()[nearest_index(times, m)].clone())
            .collect())
    }

    /// The group law on controls: `t ↦ Ad(Evol(γ₂)(t))⁻¹γ₁(t) + γ₂(t)`.
    pub fn odot(&self, gamma1: &Control, gamma2: &Control) -> Result<Control> {
        crate::algebra::ensure_same(gamma1.group(), gamma2.group())?;
        let group = gamma1.group();
        let (cells, shared) = self.product_cells(&[gamma1, gamma2]);
        let eta = self.midpoint_evolution(gamma2, &cells)?;
        let values = cell_midpoints(&cells)
            .iter()
            .zip(&eta)
            .map(|(&m, e)| {
                let conj = quotient(e, &(gamma1.eval(m) * e))?;
                Ok(group.project(&(conj + gamma2.eval(m))).0)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.assemble(group, cells, shared, values))
    }

    /// Inverse for [`Evolver::odot`]: `t ↦ −Ad(Evol(γ)(t))γ(t)`.
    pub fn odot_inverse(&self, gamma: &Control) -> Result<Control> {
        let group = gamma.group();
        let (cells, shared) = self.product_cells(&[gamma]);
        let eta = self.midpoint_evolution(gamma, &cells)?;
        let values = cell_midpoints(&cells)
            .iter()
            .zip(&eta)
            .map(|(&m, e)| {
                let inv = e
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::InvalidElement("singular evolution value".into()))?;
                Ok(group.project(&-(e * gamma.eval(m) * inv)).0)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.assemble(group, cells, shared, values))
    }
}

fn log_derivative(path: &Path, left: bool) -> Result<Control> {
    let group = path.group();
    let times = path.times();
    let pts = path.points();
    let mut values = Vec::with_capacity(pts.len() - 1);
    for i in 0..pts.len() - 1 {
        let h = times[i + 1] - times[i];
        let q = if left {
            quotient(&pts[i], &pts[i + 1])?
        } else {
            let inv = pts[i]
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::InvalidElement("singular path point".into()))?;
            &pts[i + 1] * inv
        };
        let l = logm(&q).map_err(|e| match e {
            Error::OutOfDomain(_) => Error::PathTooCoarse { cell: i },
            other => other,
        })?;
        values.push(group.project(&l).0 / h);
    }
    if path.is_uniform() {
        Ok(Control::Sampled(SampledControl::from_parts(Arc::clone(group), values, PClass::L1)))
    } else {
        Ok(Control::Step(StepControl::from_parts(Arc::clone(group), times.to_vec(), values)))
    }
}

/// `δ^ℓ(η)` by one-step logarithms: cell `i` carries `log(η_i⁻¹η_{i+1})/h_i`.
///
/// Uniform paths give a sampled control (midpoint convention); other grids
/// give a step control on the path's own nodes.
pub fn left_log_derivative(path: &Path) -> Result<Control> {
    log_derivative(path, true)
}

/// `δ^r(η)`, cell `i` carrying `log(η_{i+1}η_i⁻¹)/h_i`.
pub fn right_log_derivative(path: &Path) -> Result<Control> {
    log_derivative(path, false)
}

/// Derivative of the evolution map at `0` in direction `γ`, evaluated at `t`: `∫_0^t γ`.
pub fn evol_tangent_at_zero(gamma: &Control, t: f64) -> Result<AlgebraElement> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("time {t} outside [0, 1]")));
    }
    let group = gamma.group();
    let (p, _) = group.project(&gamma.integral_to(t));
    AlgebraElement::new(group, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{mat_exp, GroupDescriptor};
    use crate::controls::SampledControl;
    use nalgebra::DMatrix;

    fn one(x: f64) -> Mat {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn polar_retraction_keeps_rotations_orthogonal() {
        let g = GroupDescriptor::so(3);
        let gamma = Control::Sampled(
            SampledControl::from_fn(&g, 32, PClass::L1, |t| g.from_coordinates(&[3.0, -2.0 * t, 1.0]).unwrap()).unwrap(),
        );
        let plain = Evolver::with_grid(32).evolve(&gamma).unwrap();
        let retracted = Evolver { retract: true, ..Evolver::with_grid(32) }.evolve(&gamma).unwrap();
        assert!(retracted.defect_max() < 1e-14);
        assert!(retracted.path.sup_distance(&plain.path).unwrap() < 1e-10);
    }

    #[test]
    fn zero_control_gives_identity_path() {
        let g = GroupDescriptor::so(3);
        let ev = Evolver::default();
        let path = ev.evolve_step(&StepControl::zero(&g));
        assert!(path.points().iter().all(|p| *p == DMatrix::identity(3, 3)));
        let pic = ev.evolve_picard(&Control::zero(&g)).unwrap();
        assert_eq!(pic.picard_iters, 0.max(pic.picard_iters));
        let sampled = Control::Sampled(SampledControl::from_fn(&g, 16, PClass::L1, |_| g.zero_matrix()).unwrap());
        let pic = ev.evolve_picard(&sampled).unwrap();
        assert_eq!(pic.picard_iters, 1);
        assert!(pic.path.points().iter().all(|p| *p == DMatrix::identity(3, 3)));
    }

    #[test]
    fn constant_and_two_piece_step_evolutions() {
        let g = GroupDescriptor::gl(2);
        let v = DMatrix::from_row_slice(2, 2, &[0.3, -1.1, 0.7, 0.2]);
        let w = DMatrix::from_row_slice(2, 2, &[-0.5, 0.4, 0.0, 0.9]);
        let ev = Evolver::with_grid(64);
        let k = StepControl::constant(&g, v.clone()).unwrap();
        let p = ev.evolve_step(&k);
        for (t, m) in p.times().iter().zip(p.points()) {
            assert!((m - expm(&(&v * *t))).amax() < 1e-14);
        }
        let two = StepControl::new(&g, vec![0.0, 0.5, 1.0], vec![v.clone(), w.clone()]).unwrap();
        let end = ev.evolve_step(&two).final_point();
        let want = expm(&(&v * 0.5)) * expm(&(&w * 0.5));
        assert!((end.matrix() - want).amax() < 1e-14);
    }

    #[test]
    fn picard_scalar_closed_form() {
        let s = GroupDescriptor::scalar();
        let ev = Evolver::default();
        for a in [0.5, -0.5, 0.3] {
            let c = Control::Sampled(SampledControl::from_fn(&s, 1024, PClass::LInf, |_| one(a)).unwrap());
            let out = ev.evolve_picard(&c).unwrap();
            for (t, p) in out.path.times().iter().zip(out.path.points()) {
                assert!((p[(0, 0)] - (a * t).exp()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn picard_nilpotent_truncates() {
        let g = GroupDescriptor::sl(2);
        let e = g.from_coordinates(&[1.0, 0.0, 0.0]).unwrap();
        let c = Control::Step(StepControl::constant(&g, &e * 0.5).unwrap());
        let out = Evolver::default().evolve_picard(&c).unwrap();
        let want = DMatrix::identity(2, 2) + &e * 0.5;
        assert!((out.path.final_point().matrix() - want).amax() < 1e-14);
    }

    #[test]
    fn picard_rejects_heavy_controls() {
        let s = GroupDescriptor::scalar();
        let c = Control::Step(StepControl::constant(&s, one(0.75)).unwrap());
        assert!(matches!(
            Evolver::default().evolve_picard(&c),
            Err(Error::ContractionBoundExceeded { .. })
        ));
    }

    #[test]
    fn heavy_constant_is_split_and_exact() {
        let g = GroupDescriptor::so(3);
        let v = g.from_coordinates(&[0.0, 0.0, 4.0]).unwrap();
        assert_eq!(norm(&v, NormKind::Op), 4.0);
        let c = Control::Sampled(SampledControl::from_fn(&g, 1024, PClass::LInf, |_| v.clone()).unwrap());
        let out = Evolver::default().evolve(&c).unwrap();
        assert!(out.partition.len() - 1 >= 8);
        let want = mat_exp(&AlgebraElement::new(&g, v).unwrap()).unwrap();
        assert!((out.path.final_point().matrix() - want.matrix()).amax() < 1e-7);
    }

    #[test]
    fn right_evolution_of_constant_matches_left() {
        let g = GroupDescriptor::sl(2);
        let v = g.from_coordinates(&[0.4, -0.2, 0.3]).unwrap();
        let c = Control::Step(StepControl::constant(&g, v.clone()).unwrap());
        let ev = Evolver::with_grid(32);
        let r = ev.evolve_right(&c).unwrap().path;
        let l = ev.evolve(&c).unwrap().path;
        assert!(r.sup_distance(&l).unwrap() < 1e-14);
        let z = ev.evolve_right(&Control::zero(&g)).unwrap().path;
        assert!(z.points().iter().all(|p| (p - DMatrix::identity(2, 2)).amax() == 0.0));
    }

    #[test]
    fn log_derivative_of_exponential_line() {
        let g = GroupDescriptor::so(3);
        let v = g.from_coordinates(&[0.3, -0.4, 1.2]).unwrap();
        let path = Path::from_fn(&g, 1024, |t| expm(&(&v * t))).unwrap();
        let left = left_log_derivative(&path).unwrap();
        let right = right_log_derivative(&path).unwrap();
        let k = Control::Sampled(SampledControl::from_fn(&g, 1024, PClass::L1, |_| v.clone()).unwrap());
        assert!(left.l1_distance(&k, NormKind::Max).unwrap() < 1e-6);
        assert!(right.l1_distance(&k, NormKind::Max).unwrap() < 1e-6);

        let flat = Path::from_fn(&g, 8, |_| DMatrix::identity(3, 3)).unwrap();
        assert_eq!(left_log_derivative(&flat).unwrap().lp_seminorm(Exponent::Inf, NormKind::Max), 0.0);
        assert_eq!(right_log_derivative(&flat).unwrap().lp_seminorm(Exponent::Inf, NormKind::Max), 0.0);
    }

    #[test]
    fn coarse_paths_are_rejected() {
        let g = GroupDescriptor::so(2);
        let j = g.from_coordinates(&[1.0]).unwrap();
        let path = Path::from_fn(&g, 2, |t| expm(&(&j * (4.0 * t)))).unwrap();
        assert!(matches!(left_log_derivative(&path), Err(Error::PathTooCoarse { cell: 0 })));
    }

    #[test]
    fn odot_identities() {
        let g = GroupDescriptor::gl(2);
        let ev = Evolver::with_grid(64);
        let a = DMatrix::from_row_slice(2, 2, &[0.2, -0.6, 0.5, 0.1]);
        let b = DMatrix::from_row_slice(2, 2, &[-0.3, 0.2, 0.4, 0.6]);
        let gamma = Control::Step(StepControl::new(&g, vec![0.0, 0.3, 1.0], vec![a, b]).unwrap());
        let zero = Control::zero(&g);
        assert!(ev.odot(&zero, &gamma).unwrap().l1_distance(&gamma, NormKind::Max).unwrap() < 1e-14);
        assert!(ev.odot(&gamma, &zero).unwrap().l1_distance(&gamma, NormKind::Max).unwrap() < 1e-14);
        assert!(ev.odot_inverse(&zero).unwrap().lp_seminorm(Exponent::One, NormKind::Max) == 0.0);

        let s = GroupDescriptor::scalar();
        let x = Control::Sampled(SampledControl::from_fn(&s, 64, PClass::L1, |t| one(t.sin())).unwrap());
        let y = Control::Sampled(SampledControl::from_fn(&s, 64, PClass::L1, |t| one(1.0 - t)).unwrap());
        let sum = ev.odot(&x, &y).unwrap();
        assert!(matches!(sum, Control::Sampled(_)));
        assert!(sum.l1_distance(&x.add(&y).unwrap(), NormKind::Max).unwrap() < 1e-15);
        let inv = ev.odot_inverse(&x).unwrap();
        assert!(inv.l1_distance(&x.neg(), NormKind::Max).unwrap() < 1e-15);
    }

    #[test]
    fn tangent_at_zero_examples() {
        let g = GroupDescriptor::sl(2);
        assert_eq!(evol_tangent_at_zero(&Control::zero(&g), 0.7).unwrap().matrix().amax(), 0.0);
        let v = g.from_coordinates(&[0.1, 0.2, -0.3]).unwrap();
        let k = Control::Step(StepControl::constant(&g, v.clone()).unwrap());
        assert!((evol_tangent_at_zero(&k, 1.0).unwrap().matrix() - &v).amax() < 1e-16);
        let lin = Control::Sampled(SampledControl::from_fn(&g, 100, PClass::L1, |t| &v * t).unwrap());
        assert!((evol_tangent_at_zero(&lin, 1.0).unwrap().matrix() - &v * 0.5).amax() < 1e-15);
        assert!(evol_tangent_at_zero(&k, 1.5).is_err());
    }
}
