//! Carathéodory flows of time-dependent vector fields on `R^n` whose
//! spatial Lipschitz constant is integrable in time.
//!
//! A [`TimeField`] is a finite sum `Σ_j p_j(t)·f_j(x)` of scalar time
//! profiles times autonomous shapes. Trajectories solve the integral
//! equation `κ(t) = x + ∫ F(s, κ(s)) ds` by fixed-point iteration with the
//! trapezoid rule on a node set that contains every profile breakpoint.
//! Time is split into pieces of Lipschitz mass at most `½` so that each
//! fixed-point map is a contraction.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controls::{merge_nodes, uniform_grid};
use crate::error::{Error, Result};
use crate::evolution::fmt_f64;

pub type Vector = DVector<f64>;

/// Scalar time profile on `[0, 1]`, piecewise constant.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Step { breakpoints: Vec<f64>, values: Vec<f64> },
    /// Values on the uniform cells `[i/N, (i+1)/N[`.
    Sampled { values: Vec<f64> },
}

impl Profile {
    pub fn constant(c: f64) -> Self {
        Profile::Step { breakpoints: vec![0.0, 1.0], values: vec![c] }
    }

    pub fn step(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidInput("profile breakpoints must run from 0 to 1".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("profile breakpoints must increase strictly".into()));
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidInput("profile needs one value per piece".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite profile value".into()));
        }
        Ok(Profile::Step { breakpoints, values })
    }

    pub fn sampled(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sampled profile needs finite values".into()));
        }
        Ok(Profile::Sampled { values })
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Profile::Step { breakpoints, values } => {
                let m = values.len();
                let j = match breakpoints.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
                    Ok(j) => j.min(m - 1),
                    Err(j) => j.saturating_sub(1).min(m - 1),
                };
                values[j]
            }
            Profile::Sampled { values } => {
                let n = values.len();
                values[((t * n as f64).floor().max(0.0) as usize).min(n - 1)]
            }
        }
    }

    /// Points where the profile may jump, including `0` and `1`.
    pub fn edges(&self) -> Vec<f64> {
        match self {
            Profile::Step { breakpoints, .. } => breakpoints.clone(),
            Profile::Sampled { values } => uniform_grid(values.len()),
        }
    }

    fn pieces(&self) -> (Vec<f64>, &[f64]) {
        match self {
            Profile::Step { breakpoints, values } => (breakpoints.clone(), values),
            Profile::Sampled { values } => (uniform_grid(values.len()), values),
        }
    }

    /// `∫_0^t p`.
    pub fn integral_to(&self, t: f64) -> f64 {
        let (edges, values) = self.pieces();
        edges
            .windows(2)
            .zip(values)
            .take_while(|(w, _)| w[0] < t)
            .map(|(w, v)| v * (w[1].min(t) - w[0]))
            .sum()
    }

    /// `t ↦ p(1 − t)`.
    pub fn reversed(&self) -> Self {
        match self {
            Profile::Step { breakpoints, values } => Profile::Step {
                breakpoints: breakpoints.iter().rev().map(|b| 1.0 - b).collect(),
                values: values.iter().rev().cloned().collect(),
            },
            Profile::Sampled { values } => Profile::Sampled { values: values.iter().rev().cloned().collect() },
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Profile::Step { breakpoints, values } => Profile::Step {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|v| v * s).collect(),
            },
            Profile::Sampled { values } => Profile::Sampled { values: values.iter().map(|v| v * s).collect() },
        }
    }
}

/// Autonomous vector field on `R^n` with a closed-form Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `x ↦ A·x`.
    Linear { a: DMatrix<f64> },
    /// `x ↦ b·exp(−‖x − c‖²/σ²)·v`.
    GaussianBump { b: f64, center: Vector, sigma: f64, v: Vector },
}

impl Shape {
    pub fn linear(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("linear shape needs a finite square matrix".into()));
        }
        Ok(Shape::Linear { a })
    }

    pub fn gaussian_bump(b: f64, center: Vector, sigma: f64, v: Vector) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput("bump width σ must be positive".into()));
        }
        if center.len() != v.len() {
            return Err(Error::InvalidInput("bump center and direction differ in dimension".into()));
        }
        if !b.is_finite() || center.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite bump parameter".into()));
        }
        Ok(Shape::GaussianBump { b, center, sigma, v })
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::Linear { a } => a.nrows(),
            Shape::GaussianBump { v, .. } => v.len(),
        }
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        match self {
            Shape::Linear { a } => a * x,
            Shape::GaussianBump { b, center, sigma, v } => {
                let r2 = (x - center).norm_squared();
                v * (b * (-r2 / (sigma * sigma)).exp())
            }
        }
    }

    pub fn jacobian(&self, x: &Vector) -> DMatrix<f64> {
        match self {
            Shape::Linear { a } => a.clone(),
            Shape::GaussianBump { b, center, sigma, v } => {
                let d = x - center;
                let s2 = sigma * sigma;
                let phi = b * (-d.norm_squared() / s2).exp();
                v * (d.transpose() * (-2.0 * phi / s2))
            }
        }
    }

    /// `sup_x ‖D shape(x)‖₂`: the largest singular value of `A`, or
    /// `|b|·‖v‖·√(2/e)/σ` for a bump.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Shape::Linear { a } => a.clone().svd(false, false).singular_values.max(),
            Shape::GaussianBump { b, sigma, v, .. } => {
                b.abs() * v.norm() * (2.0 / std::f64::consts::E).sqrt() / sigma
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub profile: Profile,
    pub shape: Shape,
}

/// `F(t)(x) = Σ_j p_j(t)·f_j(x)` on `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeField {
    n: usize,
    terms: Vec<Term>,
    lips: Vec<f64>,
}

impl TimeField {
    pub fn new(n: usize, terms: Vec<Term>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("spatial dimension must be positive".into()));
        }
        if let Some(t) = terms.iter().find(|t| t.shape.dim() != n) {
            return Err(Error::InvalidInput(format!(
                "shape of dimension {} in a field on R^{n}",
                t.shape.dim()
            )));
        }
        let lips = terms.iter().map(|t| t.shape.lipschitz()).collect();
        Ok(TimeField { n, terms, lips })
    }

    pub fn zero(n: usize) -> Self {
        TimeField { n, terms: Vec::new(), lips: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// `G(t) = −F(1 − t)`, whose flow undoes the flow of `F`.
    pub fn reversed_negated(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term { profile: t.profile.reversed().scaled(-1.0), shape: t.shape.clone() })
            .collect();
        TimeField { n: self.n, terms, lips: self.lips.clone() }
    }

    fn edges(&self) -> Vec<f64> {
        let all: Vec<Vec<f64>> = self.terms.iter().map(|t| t.profile.edges()).collect();
        let lists: Vec<&[f64]> = all.iter().map(|e| e.as_slice()).collect();
        if lists.is_empty() {
            vec![0.0, 1.0]
        } else {
            merge_nodes(&lists)
        }
    }

    /// `g(t) = Σ_j |p_j(t)|·Lip(f_j)`.
    fn lipschitz_rate(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .zip(&self.lips)
            .map(|(term, l)| term.profile.value_at(t).abs() * l)
            .sum()
    }
}

/// `F(t)(x)`.
pub fn field_eval(field: &TimeField, t: f64, x: &Vector) -> Vector {
    let mut out = Vector::zeros(field.n);
    for term in &field.terms {
        let p = term.profile.value_at(t);
        if p != 0.0 {
            out += term.shape.eval(x) * p;
        }
    }
    out
}

/// The Lipschitz profile `g` as a step profile on the merged profile edges,
/// and its integral `L = ∫_0^1 g`.
pub fn l1_lipschitz_data(field: &TimeField) -> (Profile, f64) {
    let edges = field.edges();
    let values: Vec<f64> = edges
        .windows(2)
        .map(|w| field.lipschitz_rate(0.5 * (w[0] + w[1])))
        .collect();
    let total = edges.windows(2).zip(&values).map(|(w, g)| (w[1] - w[0]) * g).sum();
    (Profile::Step { breakpoints: edges, values }, total)
}

/// Solver settings for flows.
#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Cells of the base uniform grid.
    pub grid: usize,
    pub flow_tol: f64,
    pub max_iter: usize,
    /// Largest Lipschitz mass of a glued piece.
    pub piece_mass: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { grid: 1024, flow_tol: 1e-12, max_iter: 200, piece_mass: 0.5 }
    }
}

impl FlowOptions {
    pub fn with_grid(grid: usize) -> Self {
        FlowOptions { grid, ..Default::default() }
    }
}

/// A trajectory `t ↦ x(t)` sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vector>,
}

impl Trajectory {
    pub fn final_point(&self) -> &Vector {
        self.points.last().unwrap()
    }

    /// The point at grid time `t`, if `t` is a node.
    pub fn point_at(&self, t: f64) -> Option<&Vector> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= 1e-12)
            .map(|i| &self.points[i])
    }

    /// `sup_i ‖x(t_i) − y(t_i)‖₂` on a shared grid.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.times.len() != other.times.len() {
            return Err(Error::Incompatible("trajectories live on different grids".into()));
        }
        Ok(self
            .points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// CSV with header `t,x1,...,xn`.
    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, |p| p.len());
        let mut out = String::from("t");
        for i in 1..=n {
            write!(out, ",x{i}").unwrap();
        }
        out.push('\n');
        for (t, p) in self.times.iter().zip(&self.points) {
            out.push_str(&fmt_f64(*t));
            for v in p.iter() {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Node set of a field: the uniform grid and all profile edges, with each
/// cell refined until its Lipschitz mass is at most `1/(4·grid)`.
pub fn flow_nodes(field: &TimeField, grid: usize) -> Vec<f64> {
    let base = merge_nodes(&[&uniform_grid(grid.max(1)), &field.edges()]);
    let cap = 0.25 / grid.max(1) as f64;
    let mut nodes = vec![base[0]];
    for w in base.windows(2) {
        let h = w[1] - w[0];
        let mass = h * field.lipschitz_rate(0.5 * (w[0] + w[1]));
        let parts = ((mass / cap) - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=parts {
            nodes.push(if k == parts { w[1] } else { w[0] + h * k as f64 / parts as f64 });
        }
    }
    nodes
}

fn restrict(nodes: &[f64], a: f64, b: f64) -> Vec<f64> {
    let inner: Vec<f64> = nodes.iter().cloned().filter(|&t| t > a && t < b).collect();
    let mut out = vec![a];
    for t in inner {
        if t - out.last().unwrap() > 1e-12 && b - t > 1e-12 {
            out.push(t);
        }
    }
    out.push(b);
    out
}

/// Per-cell profile values, one row per cell.
fn cell_profiles(field: &TimeField, nodes: &[f64]) -> Vec<Vec<f64>> {
    nodes
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            field.terms.iter().map(|t| t.profile.value_at(mid)).collect()
        })
        .collect()
}

/// One application of `Ψ(κ)(t_k) = x + Σ_{j<k} h_j/2·F_j(κ(t_j)) + F_j(κ(t_{j+1}))`,
/// where `F_j` uses the profile values of cell `j`.
fn apply_psi(field: &TimeField, nodes: &[f64], profiles: &[Vec<f64>], x: &Vector, kappa: &[Vector]) -> Vec<Vector> {
    let shapes: Vec<Vec<Vector>> = kappa
        .iter()
        .map(|k| field.terms.iter().map(|t| t.shape.eval(k)).collect())
        .collect();
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = x.clone();
    out.push(acc.clone());
    for (j, w) in nodes.windows(2).enumerate() {
        let h = w[1] - w[0];
        for (term, p) in profiles[j].iter().enumerate() {
            if *p != 0.0 {
                acc += (&shapes[j][term] + &shapes[j + 1][term]) * (0.5 * h * p);
            }
        }
        out.push(acc.clone());
    }
    out
}

/// `∫` of `g` over the nodes, i.e. the contraction constant of `Ψ` there.
fn nodes_mass(field: &TimeField, nodes: &[f64]) -> f64 {
    nodes
        .windows(2)
        .map(|w| (w[1] - w[0]) * field.lipschitz_rate(0.5 * (w[0] + w[1])))
        .sum()
}

fn iterate(
    field: &TimeField,
    nodes: &[f64],
    x: &Vector,
    mut kappa: Vec<Vector>,
    opts: &FlowOptions,
) -> Result<(Vec<Vector>, usize)> {
    let profiles = cell_profiles(field, nodes);
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let next = apply_psi(field, nodes, &profiles, x, &kappa);
        change = next
            .iter()
            .zip(&kappa)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        let scale = next.iter().map(|p| p.amax()).fold(1.0, f64::max);
        kappa = next;
        if !change.is_finite() {
            break;
        }
        if change <= opts.flow_tol * scale {
            return Ok((kappa, it));
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: change })
}

fn check_point(field: &TimeField, x: &Vector) -> Result<()> {
    if x.len() != field.n {
        return Err(Error::InvalidInput(format!("point in R^{} for a field on R^{}", x.len(), field.n)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite initial point".into()));
    }
    Ok(())
}

/// Single fixed-point solve on `[0, 1]`; requires `L < 1`.
pub fn picard_flow(field: &TimeField, x0: &Vector, opts: &FlowOptions) -> Result<Trajectory> {
    check_point(field, x0)?;
    let (_, l) = l1_lipschitz_data(field);
    if l >= 1.0 {
        return Err(Error::ContractionViolated { lipschitz: l });
    }
    let nodes = flow_nodes(field, opts.grid);
    let init = vec![x0.clone(); nodes.len()];
    let (points, _) = iterate(field, &nodes, x0, init, opts)?;
    Ok(Trajectory { times: nodes, points })
}

/// Greedy split of `nodes` into index ranges of mass at most `opts.piece_mass`.
fn pieces(field: &TimeField, nodes: &[f64], opts: &FlowOptions) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for (i, w) in nodes.windows(2).enumerate() {
        let m = (w[1] - w[0]) * field.lipschitz_rate(0.5 * (w[0] + w[1]));
        if m > opts.piece_mass {
            return Err(Error::ContractionViolated { lipschitz: m });
        }
        if i > start && acc + m > opts.piece_mass {
            out.push((start, i));
            start = i;
            acc = 0.0;
        }
        acc += m;
    }
    out.push((start, nodes.len() - 1));
    Ok(out)
}

fn glue_between(field: &TimeField, a: f64, b: f64, x: &Vector, opts: &FlowOptions) -> Result<Trajectory> {
    check_point(field, x)?;
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || b < a {
        return Err(Error::InvalidInput(format!("bad time interval [{a}, {b}]")));
    }
    if b - a <= 1e-12 {
        return Ok(Trajectory { times: vec![a], points: vec![x.clone()] });
    }
    let nodes = restrict(&flow_nodes(field, opts.grid), a, b);
    let mut points = vec![x.clone()];
    for (s, e) in pieces(field, &nodes, opts)? {
        let seg = &nodes[s..=e];
        let start = points.last().unwrap().clone();
        let (local, _) = iterate(field, seg, &start, vec![start.clone(); seg.len()], opts)?;
        points.extend(local.into_iter().skip(1));
    }
    Ok(Trajectory { times: nodes, points })
}

/// `t ↦ Φ_{t,0}(x0)` on `[0, 1]`, glued from contractive pieces.
pub fn glue_flow(field: &TimeField, x0: &Vector, opts: &FlowOptions) -> Result<Trajectory> {
    glue_between(field, 0.0, 1.0, x0, opts)
}

/// `t ↦ Φ_{t,t0}(x)` on `[t0, 1]`, on the same nodes as [`glue_flow`] after `t0`.
pub fn glue_flow_from(field: &TimeField, t0: f64, x: &Vector, opts: &FlowOptions) -> Result<Trajectory> {
    glue_between(field, t0, 1.0, x, opts)
}

/// `Φ_{t,0}(p)` for each point.
pub fn flow_map(field: &TimeField, t: f64, points: &[Vector], opts: &FlowOptions) -> Result<Vec<Vector>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("time {t} outside [0, 1]")));
    }
    points
        .iter()
        .map(|p| Ok(glue_between(field, 0.0, t, p, opts)?.final_point().clone()))
        .collect()
}

/// Runs the glued fixed-point iteration from each seed curve (used as the
/// initial iterate on every piece) and returns the largest pairwise
/// sup-distance between the converged trajectories.
pub fn uniqueness_check(
    field: &TimeField,
    x0: &Vector,
    seeds: &[&dyn Fn(f64) -> Vector],
    opts: &FlowOptions,
) -> Result<f64> {
    check_point(field, x0)?;
    let nodes = flow_nodes(field, opts.grid);
    let parts = pieces(field, &nodes, opts)?;
    let mut runs = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let mut points = vec![x0.clone()];
        for &(s, e) in &parts {
            let seg = &nodes[s..=e];
            let init: Vec<Vector> = seg.iter().map(|&t| seed(t)).collect();
            if init.iter().any(|p| p.len() != field.n) {
                return Err(Error::InvalidInput("seed curve has the wrong dimension".into()));
            }
            let start = points.last().unwrap().clone();
            let (local, _) = iterate(field, seg, &start, init, opts)?;
            points.extend(local.into_iter().skip(1));
        }
        runs.push(Trajectory { times: nodes.clone(), points });
    }
    let mut worst = 0.0f64;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            worst = worst.max(runs[i].sup_distance(&runs[j])?);
        }
    }
    Ok(worst)
}

/// Discrete integral operator `Ψ(κ)` on the field's nodes over `[0, 1]`.
pub fn integral_operator(field: &TimeField, x: &Vector, kappa: &[Vector], opts: &FlowOptions) -> Result<Vec<Vector>> {
    check_point(field, x)?;
    let nodes = flow_nodes(field, opts.grid);
    if kappa.len() != nodes.len() {
        return Err(Error::InvalidInput(format!("curve has {} nodes, expected {}", kappa.len(), nodes.len())));
    }
    Ok(apply_psi(field, &nodes, &cell_profiles(field, &nodes), x, kappa))
}

/// Largest observed ratio `sup‖Ψκ − Ψκ̃‖ / sup‖κ − κ̃‖` over random curve
/// pairs with entries uniform in `[−radius, radius]`, together with the bound `L`.
pub fn measured_lipschitz(
    field: &TimeField,
    x: &Vector,
    pairs: usize,
    radius: f64,
    seed: u64,
    opts: &FlowOptions,
) -> Result<(f64, f64)> {
    let nodes = flow_nodes(field, opts.grid);
    let l = nodes_mass(field, &nodes);
    let profiles = cell_profiles(field, &nodes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let curve = |rng: &mut ChaCha8Rng| -> Vec<Vector> {
        (0..nodes.len())
            .map(|_| Vector::from_fn(field.n, |_, _| rng.random_range(-radius..radius)))
            .collect()
    };
    let sup = |a: &[Vector], b: &[Vector]| a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let (k1, k2) = (curve(&mut rng), curve(&mut rng));
        let d = sup(&k1, &k2);
        if d == 0.0 {
            continue;
        }
        let p1 = apply_psi(field, &nodes, &profiles, x, &k1);
        let p2 = apply_psi(field, &nodes, &profiles, x, &k2);
        worst = worst.max(sup(&p1, &p2) / d);
    }
    Ok((worst, l))
}
