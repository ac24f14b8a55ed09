//! The invariant suite behind `lieflow verify`.
//!
//! Every check reports a nonnegative defect `value` and passes when
//! `value < bound`. Bounds come from [`DEFAULT_BOUNDS`] and may be overridden
//! by a check pack. All randomness is drawn from ChaCha8 streams derived from
//! the pack seed, so equal seeds give byte-identical tables.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use lieflow::algebra::{
    adjoint, bracket, group_check, mat_exp, mat_log, AlgebraElement, GroupDescriptor, Mat, NormKind,
};
use lieflow::controls::{
    concat, lp_seminorm, pullback_affine, step_approximate, subdivide, Control, Exponent, PClass,
    SampledControl, StepControl,
};
use lieflow::evolution::{
    evol_tangent_at_zero, fmt_f64, left_log_derivative, right_log_derivative, Evolver,
    ExtensionDescriptor, Path,
};
use lieflow::flows::{
    flow_map, glue_flow, glue_flow_from, measured_lipschitz, picard_flow, uniqueness_check,
    FlowOptions, Profile, Shape, Term, TimeField, Vector,
};
use lieflow::limits::{
    commutator_curve_quotient, commutator_sweep, trotter_power, trotter_sweep, C1Curve,
};
use lieflow::{Error, Result};

/// Check names and their default bounds, in report order.
pub const DEFAULT_BOUNDS: &[(&str, f64)] = &[
    ("algebra.exp_log_roundtrip", 1e-12),
    ("algebra.exp_membership", 1e-12),
    ("algebra.ad_homomorphism", 1e-12),
    ("algebra.jacobi", 1e-12),
    ("algebra.ad_bracket_order", 0.4),
    ("controls.seminorm_axioms", 1e-12),
    ("controls.subdivision_linf", 1e-15),
    ("controls.subdivision_l1", 1e-12),
    ("controls.concat_pullbacks", 1e-12),
    ("controls.step_approx_rate", 4.0),
    ("evolution.step_exactness", 1e-12),
    ("evolution.so3_closed_form", 1e-8),
    ("evolution.so3_defect", 1e-8),
    ("evolution.roundtrip_order_deficit", 0.2),
    ("evolution.odot_homomorphism", 1e-6),
    ("evolution.odot_axioms", 1e-8),
    ("evolution.subdivision_globalized", 1e-10),
    ("evolution.tangent_ratio", 0.4),
    ("evolution.scalar_closed_form", 1e-10),
    ("evolution.left_log_derivative", 1e-10),
    ("evolution.right_log_derivative", 1e-10),
    ("evolution.extension_se2", 1e-8),
    ("evolution.extension_tau", 1e-10),
    ("evolution.extension_heisenberg", 1e-10),
    ("evolution.regularity_final", 1e-3),
    ("evolution.regularity_monotone", 0.05),
    ("limits.one_parameter", 1e-12),
    ("limits.trotter_sup", 5e-2),
    ("limits.trotter_slope", 0.3),
    ("limits.commutator_error", 5e-2),
    ("limits.commutator_monotone", 0.1),
    ("limits.commutator_leading_ratio", 0.2),
    ("flows.scalar_glue", 1e-6),
    ("flows.rotation", 1e-7),
    ("flows.glue_vs_picard", 1e-12),
    ("flows.restart", 1e-9),
    ("flows.reversal", 1e-8),
    ("flows.flow_map_linear", 1e-7),
    ("flows.refinement_order", 0.6),
    ("flows.contraction_excess", 1e-9),
    ("flows.uniqueness", 1e-9),
];

/// A check pack: the seed and any bound overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pack {
    pub seed: u64,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct Context {
    pub seed: u64,
    /// Output grid for the checks that do not fix their own.
    pub grid: usize,
    pub picard_tol: f64,
    pub flow_tol: f64,
}

impl Context {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }

    fn evolver(&self, grid: usize) -> Evolver {
        Evolver {
            grid,
            picard_tol: self.picard_tol,
            ..Evolver::default()
        }
    }

    fn flow(&self, grid: usize) -> FlowOptions {
        FlowOptions {
            grid,
            flow_tol: self.flow_tol,
            ..FlowOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

type Probe = fn(&Context) -> Result<Vec<f64>>;

/// Probes with the checks they feed, in report order.
const PROBES: &[(&[&str], Probe)] = &[
    (
        &["algebra.exp_log_roundtrip", "algebra.exp_membership"],
        exp_log,
    ),
    (
        &["algebra.ad_homomorphism", "algebra.jacobi"],
        ad_and_jacobi,
    ),
    (&["algebra.ad_bracket_order"], ad_bracket_order),
    (&["controls.seminorm_axioms"], seminorm_axioms),
    (
        &[
            "controls.subdivision_linf",
            "controls.subdivision_l1",
            "evolution.subdivision_globalized",
        ],
        subdivision,
    ),
    (&["controls.concat_pullbacks"], concat_pullbacks),
    (&["controls.step_approx_rate"], step_approx_rate),
    (&["evolution.step_exactness"], step_exactness),
    (
        &["evolution.so3_closed_form", "evolution.so3_defect"],
        so3_closed_form,
    ),
    (&["evolution.roundtrip_order_deficit"], roundtrip_order),
    (
        &["evolution.odot_homomorphism", "evolution.odot_axioms"],
        odot_checks,
    ),
    (&["evolution.tangent_ratio"], tangent_ratio),
    (&["evolution.scalar_closed_form"], scalar_closed_form),
    (
        &[
            "evolution.left_log_derivative",
            "evolution.right_log_derivative",
        ],
        log_derivatives,
    ),
    (
        &[
            "evolution.extension_se2",
            "evolution.extension_tau",
            "evolution.extension_heisenberg",
        ],
        extensions,
    ),
    (
        &[
            "evolution.regularity_final",
            "evolution.regularity_monotone",
        ],
        regularity_chain,
    ),
    (&["limits.one_parameter"], one_parameter),
    (&["limits.trotter_sup", "limits.trotter_slope"], trotter),
    (
        &[
            "limits.commutator_error",
            "limits.commutator_monotone",
            "limits.commutator_leading_ratio",
        ],
        commutator,
    ),
    (
        &[
            "flows.scalar_glue",
            "flows.rotation",
            "flows.flow_map_linear",
        ],
        linear_flows,
    ),
    (
        &["flows.glue_vs_picard", "flows.restart", "flows.reversal"],
        flow_consistency,
    ),
    (&["flows.refinement_order"], flow_refinement),
    (
        &["flows.contraction_excess", "flows.uniqueness"],
        contraction,
    ),
];

/// Runs every probe (in parallel) and applies the bounds. Overrides naming
/// an unknown check are rejected.
pub fn run_checks(ctx: &Context, overrides: &BTreeMap<String, f64>) -> Result<Vec<Outcome>> {
    for (name, bound) in overrides {
        if !DEFAULT_BOUNDS.iter().any(|(n, _)| n == name) {
            return Err(Error::InvalidInput(format!("unknown check '{name}'")));
        }
        if bound.is_nan() {
            return Err(Error::InvalidInput(format!("bound of '{name}' is NaN")));
        }
    }
    let results: Vec<Result<Vec<f64>>> = std::thread::scope(|s| {
        let handles: Vec<_> = PROBES
            .iter()
            .map(|(_, probe)| s.spawn(move || probe(ctx)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("probe panicked"))
            .collect()
    });
    let mut values: BTreeMap<&str, f64> = BTreeMap::new();
    for ((names, _), result) in PROBES.iter().zip(results) {
        match result {
            Ok(vals) => {
                debug_assert_eq!(vals.len(), names.len());
                for (n, v) in names.iter().zip(vals) {
                    values.insert(n, v);
                }
            }
            Err(_) => {
                for n in names.iter() {
                    values.insert(n, f64::NAN);
                }
            }
        }
    }
    Ok(DEFAULT_BOUNDS
        .iter()
        .map(|(name, default)| {
            let bound = overrides.get(*name).copied().unwrap_or(*default);
            let value = values[name];
            Outcome {
                name: name.to_string(),
                value,
                bound,
                pass: value < bound,
            }
        })
        .collect())
}

/// CSV `check,value,bound,pass`.
pub fn to_csv(outcomes: &[Outcome]) -> String {
    let mut out = String::from("check,value,bound,pass\n");
    for o in outcomes {
        writeln!(
            out,
            "{},{},{},{}",
            o.name,
            fmt_f64(o.value),
            fmt_f64(o.bound),
            o.pass
        )
        .unwrap();
    }
    out
}

fn amax(m: &Mat) -> f64 {
    m.amax()
}

fn random_step<R: Rng>(
    rng: &mut R,
    group: &Arc<GroupDescriptor>,
    pieces: usize,
    bound: f64,
) -> Result<Control> {
    let mut bps: Vec<f64> = (1..pieces).map(|_| rng.random_range(0.05..0.95)).collect();
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup();
    bps.insert(0, 0.0);
    bps.push(1.0);
    let values = (0..bps.len() - 1)
        .map(|_| group.random_element(rng, bound).into_matrix())
        .collect();
    Ok(Control::Step(StepControl::new(group, bps, values)?))
}

/// `sin(2πt)·E + cos(2πt)·H` on `sl(2)`, sampled on `n` cells.
fn sl2_wave(n: usize, class: PClass) -> Result<Control> {
    let g = GroupDescriptor::sl(2);
    let gg = Arc::clone(&g);
    let s = SampledControl::from_fn(&g, n, class, move |t| {
        gg.from_coordinates(&[(2.0 * PI * t).sin(), 0.0, (2.0 * PI * t).cos()])
            .unwrap()
    })?;
    Ok(Control::Sampled(s))
}

/// `sup_t ‖a(t) − b(t)·c(t)‖_max` on `a`'s grid.
fn product_defect(a: &Path, b: &Path, c: &Path) -> Result<f64> {
    let mut worst = 0.0f64;
    for (t, p) in a.times().iter().zip(a.points()) {
        let q = b.value_at(*t)?.mul(&c.value_at(*t)?)?;
        worst = worst.max(amax(&(p - q.matrix())));
    }
    Ok(worst)
}

fn halving_order(errors: &[f64]) -> f64 {
    // order under halving, fitted from the first and last errors
    let halvings = (errors.len() - 1) as f64;
    (errors[0] / errors[errors.len() - 1]).log2() / halvings
}

fn worst_growth(errors: &[f64]) -> f64 {
    errors
        .windows(2)
        .map(|w| w[1] / w[0] - 1.0)
        .fold(0.0, f64::max)
}

fn exp_log(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(1);
    let mut roundtrip = 0.0f64;
    let mut membership = 0.0f64;
    for name in ["GL2", "SL2", "SO3", "SE2", "HEIS3", "GL3"] {
        let g = GroupDescriptor::from_name(name)?;
        for _ in 0..20 {
            let x = g.random_element(&mut rng, 0.2);
            let e = mat_exp(&x)?;
            membership = membership.max(group_check(&e));
            roundtrip = roundtrip.max(amax(&(mat_log(&e)?.matrix() - x.matrix())));
        }
    }
    Ok(vec![roundtrip, membership])
}

fn ad_and_jacobi(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(2);
    let mut hom = 0.0f64;
    let mut jac = 0.0f64;
    for name in ["GL2", "SL2", "SO3", "SE2"] {
        let g = GroupDescriptor::from_name(name)?;
        for _ in 0..20 {
            let a = mat_exp(&g.random_element(&mut rng, 1.0))?;
            let b = mat_exp(&g.random_element(&mut rng, 1.0))?;
            let x = g.random_element(&mut rng, 1.0);
            let y = g.random_element(&mut rng, 1.0);
            let z = g.random_element(&mut rng, 1.0);
            let lhs = adjoint(&a.mul(&b)?, &x)?;
            let rhs = adjoint(&a, &adjoint(&b, &x)?)?;
            hom = hom.max(amax(&(lhs.matrix() - rhs.matrix())));
            let s = bracket(&x, &bracket(&y, &z)?)?
                .add(&bracket(&y, &bracket(&z, &x)?)?)?
                .add(&bracket(&z, &bracket(&x, &y)?)?)?;
            jac = jac.max(amax(s.matrix()));
        }
    }
    Ok(vec![hom, jac])
}

fn ad_bracket_order(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(3);
    let g = GroupDescriptor::gl(3);
    let x = g.random_element(&mut rng, 1.0);
    let y = g.random_element(&mut rng, 1.0);
    let target = bracket(&x, &y)?;
    let err = |t: f64| -> Result<f64> {
        let plus = adjoint(&mat_exp(&x.scale(t))?, &y)?;
        let minus = adjoint(&mat_exp(&x.scale(-t))?, &y)?;
        let fd = (plus.matrix() - minus.matrix()) / (2.0 * t);
        Ok(amax(&(fd - target.matrix())))
    };
    let ratio = err(0.04)? / err(0.02)?;
    Ok(vec![(ratio - 4.0).abs()])
}

fn seminorm_axioms(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(4);
    let g = GroupDescriptor::gl(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = random_step(&mut rng, &g, 4, 2.0)?;
        let b = random_step(&mut rng, &g, 3, 2.0)?;
        let s: f64 = rng.random_range(-3.0..3.0);
        let sum = a.add(&b)?;
        for p in [Exponent::One, Exponent::Two, Exponent::Inf] {
            for q in [NormKind::Op, NormKind::Frobenius, NormKind::Max] {
                let (na, nb) = (lp_seminorm(&a, p, q), lp_seminorm(&b, p, q));
                let scale = 1.0 + na + nb;
                worst = worst.max((lp_seminorm(&sum, p, q) - na - nb).max(0.0) / scale);
                worst = worst.max((lp_seminorm(&a.scale(s), p, q) - s.abs() * na).abs() / scale);
            }
        }
    }
    Ok(vec![worst])
}

fn subdivision(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(5);
    let g = GroupDescriptor::gl(2);
    let ev = ctx.evolver(ctx.grid);
    let (mut linf, mut l1, mut glob) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..4 {
        let gamma = random_step(&mut rng, &g, 5, 1.0)?;
        let ninf = lp_seminorm(&gamma, Exponent::Inf, NormKind::Op);
        let n1 = lp_seminorm(&gamma, Exponent::One, NormKind::Op);
        let whole = ev.evolve(&gamma)?.path.final_point();
        for n in [2usize, 4, 8, 16] {
            let pieces = subdivide(&gamma, n)?;
            let m = pieces
                .iter()
                .map(|p| lp_seminorm(p, Exponent::Inf, NormKind::Op))
                .fold(0.0, f64::max);
            linf = linf.max((m - ninf / n as f64).abs() / ninf);
            let s: f64 = pieces
                .iter()
                .map(|p| lp_seminorm(p, Exponent::One, NormKind::Op))
                .sum();
            l1 = l1.max((s - n1).abs());
            let mut prod = Mat::identity(2, 2);
            for p in &pieces {
                prod *= ev.evolve(p)?.path.final_point().matrix();
            }
            glob = glob.max(amax(&(prod - whole.matrix())));
        }
    }
    Ok(vec![linf, l1, glob])
}

fn concat_pullbacks(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(6);
    let g = GroupDescriptor::so(3);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let gamma = random_step(&mut rng, &g, 6, 1.0)?;
        let cut: f64 = rng.random_range(0.1..0.45);
        let cut2: f64 = rng.random_range(0.55..0.9);
        let part = [0.0, cut, cut2, 1.0];
        let pieces = part
            .windows(2)
            .map(|w| pullback_affine(&gamma, w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        worst = worst.max(concat(&pieces, &part)?.l1_distance(&gamma, NormKind::Max)?);
    }
    Ok(vec![worst])
}

fn step_approx_rate(_ctx: &Context) -> Result<Vec<f64>> {
    let gamma = sl2_wave(1024, PClass::Regulated)?;
    let Control::Sampled(s) = &gamma else {
        unreachable!()
    };
    let mut worst = 0.0f64;
    for m in [8usize, 32, 128] {
        let approx = Control::Step(step_approximate(s, m)?);
        worst = worst.max(m as f64 * approx.l1_distance(&gamma, NormKind::Frobenius)?);
    }
    Ok(vec![worst])
}

fn step_exactness(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(7);
    let g = GroupDescriptor::gl(2);
    let ev = ctx.evolver(ctx.grid);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let gamma = random_step(&mut rng, &g, 5, 1.0)?;
        let step = gamma.as_step().expect("step control");
        let mut expected = DMatrix::<f64>::identity(2, 2);
        for (w, v) in step.breakpoints().windows(2).zip(step.values()) {
            expected *= (v * (w[1] - w[0])).exp();
        }
        worst = worst.max(amax(
            &(ev.evolve_step(step).final_point().matrix() - expected),
        ));
    }
    Ok(vec![worst])
}

fn so3_closed_form(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(8);
    let g = GroupDescriptor::so(3);
    let mut axis: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let len = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
    axis.iter_mut().for_each(|a| *a /= len);
    let v = g.from_coordinates(&axis)?;
    let vv = v.clone();
    let gamma = Control::Sampled(SampledControl::from_fn(&g, 1024, PClass::L1, move |_| {
        vv.clone()
    })?);
    let ev = ctx.evolver(1024).evolve(&gamma)?;
    // Rodrigues: exp(θK) = I + sin θ K + (1 − cos θ) K² with θ = 1 and |axis| = 1
    let rodrigues = Mat::identity(3, 3) + &v * 1f64.sin() + &v * &v * (1.0 - 1f64.cos());
    Ok(vec![
        amax(&(ev.path.final_point().matrix() - rodrigues)),
        ev.defect_max(),
    ])
}

fn roundtrip_order(ctx: &Context) -> Result<Vec<f64>> {
    let mut errors = Vec::new();
    for n in [512usize, 1024, 2048] {
        let gamma = sl2_wave(n, PClass::L1)?;
        let path = ctx.evolver(n).evolve(&gamma)?.path;
        errors.push(left_log_derivative(&path)?.l1_distance(&gamma, NormKind::Frobenius)?);
    }
    Ok(vec![(2.0 - halving_order(&errors)).max(0.0)])
}

fn odot_checks(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(9);
    let g = GroupDescriptor::gl(2);
    let ev = ctx.evolver(4096);
    let zero = Control::zero(&g);
    let (mut hom, mut axioms) = (0.0f64, 0.0f64);
    for _ in 0..3 {
        let g1 = random_step(&mut rng, &g, 4, 0.5)?;
        let g2 = random_step(&mut rng, &g, 3, 0.5)?;
        let prod = ev.odot(&g1, &g2)?;
        hom = hom.max(product_defect(
            &ev.evolve(&prod)?.path,
            &ev.evolve(&g1)?.path,
            &ev.evolve(&g2)?.path,
        )?);
        let inv = ev.odot_inverse(&g1)?;
        for (lhs, rhs) in [
            (ev.odot(&zero, &g1)?, &g1),
            (ev.odot(&g1, &zero)?, &g1),
            (ev.odot(&g1, &inv)?, &zero),
            (ev.odot(&inv, &g1)?, &zero),
        ] {
            axioms = axioms.max(lhs.l1_distance(rhs, NormKind::Max)?);
        }
    }
    Ok(vec![hom, axioms])
}

fn tangent_ratio(ctx: &Context) -> Result<Vec<f64>> {
    let gamma = sl2_wave(256, PClass::L1)?;
    let ev = ctx.evolver(256);
    let err = |eps: f64| -> Result<f64> {
        let path = ev.evolve(&gamma.scale(eps))?.path;
        let mut worst = 0.0f64;
        for (i, &t) in path.times().iter().enumerate() {
            let lhs = mat_log(&path.point(i))?.scale(1.0 / eps);
            worst = worst.max(amax(
                &(lhs.matrix() - evol_tangent_at_zero(&gamma, t)?.matrix()),
            ));
        }
        Ok(worst)
    };
    let ratio = err(1e-3)? / err(5e-4)?;
    Ok(vec![(ratio - 2.0).abs()])
}

fn scalar_closed_form(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(10);
    let g = GroupDescriptor::scalar();
    let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
    let c = coeffs.clone();
    let gamma = Control::Sampled(SampledControl::from_fn(&g, 128, PClass::L1, move |t| {
        Mat::from_element(1, 1, c[0] + c[1] * (2.0 * PI * t).sin() + c[2] * t * t)
    })?);
    let path = ctx.evolver(ctx.grid).evolve(&gamma)?.path;
    let mut worst = 0.0f64;
    for (i, &t) in path.times().iter().enumerate() {
        let exact = gamma.integral_to(t)[(0, 0)].exp();
        worst = worst.max((path.points()[i][(0, 0)] - exact).abs() / exact);
    }
    Ok(vec![worst])
}

fn log_derivatives(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(11);
    let g = GroupDescriptor::sl(2);
    let ev = ctx.evolver(ctx.grid);
    let (mut left, mut right) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let gamma = random_step(&mut rng, &g, 4, 1.0)?;
        let l = left_log_derivative(&ev.evolve(&gamma)?.path)?;
        left = left.max(l.l1_distance(&gamma, NormKind::Max)?);
        let r = right_log_derivative(&ev.evolve_right(&gamma)?.path)?;
        right = right.max(r.l1_distance(&gamma, NormKind::Max)?);
    }
    Ok(vec![left, right])
}

fn extensions(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(12);
    let ev = ctx.evolver(ctx.grid);
    let se2 = ExtensionDescriptor::se2();
    let gamma = random_step(&mut rng, &se2.g, 3, 1.5)?;
    let split = ev.evolve_via_extension(&gamma, &se2)?;
    let direct = ev.evolve(&gamma)?.path;
    let se2_err = split.path.sup_distance(&direct)?;

    let heis = ExtensionDescriptor::heisenberg();
    let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let hg = Arc::clone(&heis.g);
    let gamma = Control::Sampled(SampledControl::from_fn(
        &heis.g,
        256,
        PClass::L1,
        move |t| {
            hg.from_coordinates(&[c[0] * (2.0 * PI * t).cos(), c[1] + t, c[2] * t])
                .unwrap()
        },
    )?);
    let ev = ctx.evolver(256);
    let split_h = ev.evolve_via_extension(&gamma, &heis)?;
    let heis_err = split_h.path.sup_distance(&ev.evolve(&gamma)?.path)?;
    Ok(vec![se2_err, split.tau_defect, heis_err])
}

fn regularity_chain(ctx: &Context) -> Result<Vec<f64>> {
    let gamma = sl2_wave(1024, PClass::Regulated)?;
    let Control::Sampled(s) = &gamma else {
        unreachable!()
    };
    let ev = ctx.evolver(1024);
    let reference = ev.evolve(&gamma)?.path;
    let mut errors = Vec::new();
    for m in [4usize, 16, 64, 256] {
        let approx = Control::Step(step_approximate(s, m)?);
        errors.push(ev.evolve(&approx)?.path.sup_distance(&reference)?);
    }
    Ok(vec![errors[errors.len() - 1], worst_growth(&errors)])
}

fn sl2_pair() -> Result<(AlgebraElement, AlgebraElement)> {
    let g = GroupDescriptor::sl(2);
    Ok((g.element(&[1.0, 0.0, 0.0])?, g.element(&[0.0, 1.0, 0.0])?))
}

fn one_parameter(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(13);
    let g = GroupDescriptor::so(3);
    let v = g.random_element(&mut rng, 1.0);
    let line = C1Curve::exp_line(&v);
    let mut worst = 0.0f64;
    for n in [1u64, 3, 7, 16] {
        let p = trotter_power(&line, 1.0, n)?;
        worst = worst.max(amax(&(p.matrix() - mat_exp(&v)?.matrix())));
    }
    Ok(vec![worst])
}

fn trotter(_ctx: &Context) -> Result<Vec<f64>> {
    let (e, f) = sl2_pair()?;
    let zeta = C1Curve::product(&e, &f)?;
    let ns = [8u64, 16, 32, 64, 128, 256, 512, 1024];
    let report = trotter_sweep(&zeta, 1.0, &ns, 33)?;
    Ok(vec![report.errors[5], (report.slope + 1.0).abs()])
}

fn commutator(_ctx: &Context) -> Result<Vec<f64>> {
    let (e, f) = sl2_pair()?;
    let (gamma, eta) = (C1Curve::exp_line(&e), C1Curve::exp_line(&f));
    let report = commutator_sweep(&gamma, &eta, 1.0, &[8, 16, 32, 64, 128, 256])?;
    let target = bracket(&e, &f)?;
    let lead = |eps: f64| -> Result<f64> {
        Ok(amax(
            &(commutator_curve_quotient(&gamma, &eta, eps)?.matrix() - target.matrix()),
        ))
    };
    let ratio = lead(1e-4)? / lead(2.5e-5)?;
    Ok(vec![
        report.errors[5],
        worst_growth(&report.errors),
        (ratio - 2.0).abs(),
    ])
}

fn scalar_field(profile: Profile) -> Result<TimeField> {
    TimeField::new(
        1,
        vec![Term {
            profile,
            shape: Shape::linear(DMatrix::from_element(1, 1, 1.0))?,
        }],
    )
}

fn linear_flows(ctx: &Context) -> Result<Vec<f64>> {
    let mut rng = ctx.rng(14);
    let opts = ctx.flow(ctx.grid);
    // scalar field with a step coefficient of total mass 3
    let a = [
        rng.random_range(1.0..3.0),
        rng.random_range(1.0..3.0),
        rng.random_range(1.0..3.0),
    ];
    let bps = vec![0.0, 0.25, 0.6, 1.0];
    let mass: f64 = bps.windows(2).zip(&a).map(|(w, v)| (w[1] - w[0]) * v).sum();
    let vals: Vec<f64> = a.iter().map(|v| v * 3.0 / mass).collect();
    let x0: f64 = rng.random_range(0.5..2.0);
    let tr = glue_flow(
        &scalar_field(Profile::step(bps, vals)?)?,
        &DVector::from_element(1, x0),
        &opts,
    )?;
    let scalar = (tr.final_point()[0] - x0 * 3f64.exp()).abs() / x0;

    let j = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let profile = Profile::sampled((0..8).map(|_| rng.random_range(-3.0..3.0)).collect())?;
    let angle = profile.integral_to(1.0);
    let rot = TimeField::new(
        2,
        vec![Term {
            profile,
            shape: Shape::linear(j.clone())?,
        }],
    )?;
    let p0 = DVector::from_vec(vec![
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ]);
    let tr = glue_flow(&rot, &p0, &opts)?;
    let expected = (&j * angle).exp() * &p0;
    let rotation = (tr.final_point() - expected).norm();

    let a_mat = DMatrix::from_row_slice(2, 2, &[0.3, -0.8, 0.5, -0.2]);
    let profile = Profile::step(vec![0.0, 0.5, 1.0], vec![1.5, -0.5])?;
    let t = 0.75;
    let flow = expm_nalgebra(&(&a_mat * profile.integral_to(t)));
    let field = TimeField::new(
        2,
        vec![Term {
            profile,
            shape: Shape::linear(a_mat)?,
        }],
    )?;
    let points: Vec<Vector> = (0..5)
        .map(|_| {
            DVector::from_vec(vec![
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ])
        })
        .collect();
    let mapped = flow_map(&field, t, &points, &opts)?;
    let map_err = points
        .iter()
        .zip(&mapped)
        .map(|(p, q)| (&flow * p - q).norm())
        .fold(0.0, f64::max);
    Ok(vec![scalar, rotation, map_err])
}

fn expm_nalgebra(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().exp()
}

fn mixed_field(ctx: &Context) -> Result<TimeField> {
    let mut rng = ctx.rng(15);
    let center = DVector::from_vec(vec![
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
    ]);
    let bump = Shape::gaussian_bump(2.0, center, 0.5, DVector::from_vec(vec![0.0, 1.0]))?;
    let rot = Shape::linear(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]))?;
    TimeField::new(
        2,
        vec![
            Term {
                profile: Profile::step(vec![0.0, 0.5, 1.0], vec![1.0, -2.0])?,
                shape: bump,
            },
            Term {
                profile: Profile::sampled(vec![0.5, 1.5, 2.5])?,
                shape: rot,
            },
        ],
    )
}

fn flow_consistency(ctx: &Context) -> Result<Vec<f64>> {
    let opts = ctx.flow(256);
    let light = scalar_field(Profile::sampled(vec![0.1, 0.3, -0.2, 0.4])?)?;
    let x = DVector::from_element(1, 1.0);
    let glue_vs_picard =
        picard_flow(&light, &x, &opts)?.sup_distance(&glue_flow(&light, &x, &opts)?)?;

    let f = mixed_field(ctx)?;
    let x0 = DVector::from_vec(vec![1.0, 0.5]);
    let full = glue_flow(&f, &x0, &opts)?;
    let mid = full
        .point_at(0.5)
        .ok_or_else(|| Error::InvalidInput("0.5 is not a flow node".into()))?
        .clone();
    let rest = glue_flow_from(&f, 0.5, &mid, &opts)?;
    let restart = (rest.final_point() - full.final_point()).norm();
    let back = glue_flow(&f.reversed_negated(), full.final_point(), &opts)?;
    let reversal = (back.final_point() - &x0).norm();
    Ok(vec![glue_vs_picard, restart, reversal])
}

fn flow_refinement(ctx: &Context) -> Result<Vec<f64>> {
    let f = mixed_field(ctx)?;
    let x0 = DVector::from_vec(vec![1.0, 0.5]);
    let reference = glue_flow(&f, &x0, &ctx.flow(2048))?;
    let err = |grid: usize| -> Result<f64> {
        Ok((glue_flow(&f, &x0, &ctx.flow(grid))?.final_point() - reference.final_point()).norm())
    };
    let ratio = err(16)? / err(32)?;
    Ok(vec![(ratio - 4.0).abs()])
}

fn contraction(ctx: &Context) -> Result<Vec<f64>> {
    let bump = Shape::gaussian_bump(
        1.0,
        DVector::zeros(2),
        1.0,
        DVector::from_vec(vec![1.0, -1.0]),
    )?;
    let f = TimeField::new(
        2,
        vec![Term {
            profile: Profile::constant(0.8),
            shape: bump,
        }],
    )?;
    let x0 = DVector::from_vec(vec![0.3, 0.4]);
    let opts = ctx.flow(128);
    let (measured, l) = measured_lipschitz(&f, &x0, 100, 2.0, ctx.seed, &opts)?;
    let c = x0.clone();
    let constant = move |_: f64| c.clone();
    let c = x0.clone();
    let line = move |t: f64| &c * (1.0 - t);
    let wave = |t: f64| DVector::from_vec(vec![(5.0 * t).sin(), (3.0 * t).cos()]);
    let spread = uniqueness_check(&f, &x0, &[&constant, &line, &wave], &opts)?;
    Ok(vec![(measured - l).max(0.0), spread])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_names_match_bounds() {
        let from_probes: Vec<&str> = PROBES.iter().flat_map(|(n, _)| n.iter().copied()).collect();
        let mut a = from_probes.clone();
        let mut b: Vec<&str> = DEFAULT_BOUNDS.iter().map(|(n, _)| *n).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_override_is_rejected() {
        let ctx = Context {
            seed: 1,
            grid: 64,
            picard_tol: 1e-12,
            flow_tol: 1e-12,
        };
        let mut o = BTreeMap::new();
        o.insert("no.such.check".to_string(), 1.0);
        assert!(matches!(run_checks(&ctx, &o), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn slope_helpers() {
        assert!((halving_order(&[4.0, 1.0, 0.25]) - 2.0).abs() < 1e-15);
        assert_eq!(worst_growth(&[1.0, 0.5, 0.25]), 0.0);
        assert!((worst_growth(&[1.0, 1.04, 0.5]) - 0.04).abs() < 1e-12);
    }
}
