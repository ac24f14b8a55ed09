//! Trotter and commutator limits of `C¹` curves through the identity, with
//! log-log convergence-rate fits.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::algebra::{bracket, ensure_same, expm, logm, norm, AlgebraElement, GroupDescriptor, GroupElement, Mat, NormKind};
use crate::controls::Control;
use crate::error::{Error, Result};
use crate::evolution::{fmt_f64, Evolver, Path};

/// How a [`C1Curve`] is generated.
#[derive(Debug, Clone)]
pub enum CurveRule {
    /// `t ↦ exp(t·v)`.
    ExpLine(Mat),
    /// `t ↦ exp(t·v)·exp(t·w)`.
    Product(Mat, Mat),
    /// `t ↦ Evol(γ)(t)` on `[0, 1]`.
    Evolution { control: Control, path: Path },
}

/// A `C¹` curve `ζ` with `ζ(0) = e`.
#[derive(Debug, Clone)]
pub struct C1Curve {
    group: Arc<GroupDescriptor>,
    rule: CurveRule,
}

impl C1Curve {
    pub fn exp_line(v: &AlgebraElement) -> Self {
        C1Curve { group: Arc::clone(v.group()), rule: CurveRule::ExpLine(v.matrix().clone()) }
    }

    pub fn product(v: &AlgebraElement, w: &AlgebraElement) -> Result<Self> {
        ensure_same(v.group(), w.group())?;
        Ok(C1Curve {
            group: Arc::clone(v.group()),
            rule: CurveRule::Product(v.matrix().clone(), w.matrix().clone()),
        })
    }

    /// The evolution of `control`, computed once by `evolver`.
    pub fn evolution(evolver: &Evolver, control: &Control) -> Result<Self> {
        let path = evolver.evolve(control)?.path;
        Ok(C1Curve {
            group: Arc::clone(control.group()),
            rule: CurveRule::Evolution { control: control.clone(), path },
        })
    }

    pub fn group(&self) -> &Arc<GroupDescriptor> {
        &self.group
    }

    pub fn rule(&self) -> &CurveRule {
        &self.rule
    }

    /// `ζ(t)`; evolution curves are defined on `[0, 1]` only.
    pub fn eval(&self, t: f64) -> Result<GroupElement> {
        if !t.is_finite() {
            return Err(Error::InvalidInput("non-finite curve parameter".into()));
        }
        let m = match &self.rule {
            CurveRule::ExpLine(v) => expm(&(v * t)),
            CurveRule::Product(v, w) => expm(&(v * t)) * expm(&(w * t)),
            CurveRule::Evolution { path, .. } => {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::OutOfDomain(format!("evolution curve evaluated at {t}")));
                }
                return path.value_at(t);
            }
        };
        Ok(GroupElement::from_parts(Arc::clone(&self.group), m))
    }

    /// `ζ'(0)`: `v`, `v + w`, or `γ(0⁺)`.
    pub fn derivative_at_zero(&self) -> AlgebraElement {
        let m = match &self.rule {
            CurveRule::ExpLine(v) => v.clone(),
            CurveRule::Product(v, w) => v + w,
            CurveRule::Evolution { control, .. } => control.eval(0.0),
        };
        AlgebraElement::from_parts(Arc::clone(&self.group), m)
    }
}

fn check_power_args(t: f64, n: u64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite and ≥ 0 (got {t})")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("power n must be ≥ 1".into()));
    }
    Ok(())
}

/// `ζ(t/n)^n`.
pub fn trotter_power(zeta: &C1Curve, t: f64, n: u64) -> Result<GroupElement> {
    check_power_args(t, n)?;
    Ok(zeta.eval(t / n as f64)?.pow(n))
}

/// `‖ζ(t/n)^n − exp(t·ζ'(0))‖_op` at `samples` uniform times in `[0, T]`.
pub fn trotter_error_profile(zeta: &C1Curve, horizon: f64, n: u64, samples: usize) -> Result<Vec<(f64, f64)>> {
    if !(horizon > 0.0) || samples < 2 {
        return Err(Error::InvalidInput("need T > 0 and at least two samples".into()));
    }
    let v = zeta.derivative_at_zero().into_matrix();
    (0..samples)
        .map(|i| {
            let t = horizon * i as f64 / (samples - 1) as f64;
            let p = trotter_power(zeta, t, n)?;
            Ok((t, norm(&(p.matrix() - expm(&(&v * t))), NormKind::Op)))
        })
        .collect()
}

/// Supremum of [`trotter_error_profile`].
pub fn strong_trotter_error(zeta: &C1Curve, horizon: f64, n: u64, samples: usize) -> Result<f64> {
    Ok(trotter_error_profile(zeta, horizon, n, samples)?
        .into_iter()
        .map(|(_, e)| e)
        .fold(0.0, f64::max))
}

fn group_commutator(a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
    a.mul(b)?.mul(&a.inverse()?)?.mul(&b.inverse()?)
}

/// `(γ(s)η(s)γ(s)⁻¹η(s)⁻¹)^{n²}` with `s = √t/n`.
pub fn commutator_power(gamma: &C1Curve, eta: &C1Curve, t: f64, n: u64) -> Result<GroupElement> {
    ensure_same(gamma.group(), eta.group())?;
    check_power_args(t, n)?;
    let s = t.max(0.0).sqrt() / n as f64;
    let c = group_commutator(&gamma.eval(s)?, &eta.eval(s)?)?;
    Ok(c.pow(n * n))
}

/// `[γ'(0), η'(0)]`, the derivative at `0` of `t ↦ γ(√t)η(√t)γ(√t)⁻¹η(√t)⁻¹`.
pub fn commutator_derivative(gamma: &C1Curve, eta: &C1Curve) -> Result<AlgebraElement> {
    bracket(&gamma.derivative_at_zero(), &eta.derivative_at_zero())
}

/// `‖commutator_power(γ, η, t, n) − exp(t[γ'(0), η'(0)])‖_op`.
pub fn commutator_error(gamma: &C1Curve, eta: &C1Curve, t: f64, n: u64) -> Result<f64> {
    let p = commutator_power(gamma, eta, t, n)?;
    let target = expm(&(commutator_derivative(gamma, eta)?.into_matrix() * t));
    Ok(norm(&(p.matrix() - target), NormKind::Op))
}

/// Difference quotient `log(ζ(ε))/ε` of the root-reparametrised commutator
/// curve `ζ(t) = γ(√t)η(√t)γ(√t)⁻¹η(√t)⁻¹`.
pub fn commutator_curve_quotient(gamma: &C1Curve, eta: &C1Curve, eps: f64) -> Result<AlgebraElement> {
    ensure_same(gamma.group(), eta.group())?;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("ε must be positive".into()));
    }
    let s = eps.sqrt();
    let c = group_commutator(&gamma.eval(s)?, &eta.eval(s)?)?;
    let l = logm(c.matrix())? / eps;
    let (p, _) = gamma.group().project(&l);
    Ok(AlgebraElement::from_parts(Arc::clone(gamma.group()), p))
}

/// Least-squares slope of `log(error)` against `log(n)`; nonpositive errors are dropped.
pub fn convergence_rate(ns: &[f64], errors: &[f64]) -> Result<f64> {
    if ns.len() != errors.len() {
        return Err(Error::InvalidInput("n list and error list differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errors)
        .filter(|(n, e)| **e > 0.0 && e.is_finite() && **n > 0.0)
        .map(|(n, e)| (n.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable points, need 3", pts.len())));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all n values coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Errors of a limit experiment over an increasing `n` sweep.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub ns: Vec<u64>,
    pub errors: Vec<f64>,
    /// Fitted log-log slope over the whole sweep (`NaN` with fewer than three usable points).
    pub slope: f64,
    /// Errors are suprema over sampled times rather than single-time values.
    pub sup_over_t: bool,
}

impl ConvergenceReport {
    pub fn new(ns: Vec<u64>, errors: Vec<f64>, sup_over_t: bool) -> Result<Self> {
        if ns.len() != errors.len() {
            return Err(Error::InvalidInput("n list and error list differ in length".into()));
        }
        if ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("n values must increase strictly".into()));
        }
        if errors.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::InvalidInput("errors must be nonnegative".into()));
        }
        let slope = Self::fit(&ns, &errors);
        Ok(ConvergenceReport { ns, errors, slope, sup_over_t })
    }

    fn fit(ns: &[u64], errors: &[f64]) -> f64 {
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        convergence_rate(&xs, errors).unwrap_or(f64::NAN)
    }

    /// True when each error is at most `(1 + noise)` times its predecessor.
    pub fn nonincreasing_within(&self, noise: f64) -> bool {
        self.errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + noise))
    }

    /// CSV `n,error,slope_so_far`; the running slope is `nan` until three points exist.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,error,slope_so_far\n");
        for i in 0..self.ns.len() {
            let slope = Self::fit(&self.ns[..=i], &self.errors[..=i]);
            let slope = if slope.is_nan() { "nan".to_string() } else { fmt_f64(slope) };
            writeln!(out, "{},{},{}", self.ns[i], fmt_f64(self.errors[i]), slope).unwrap();
        }
        out
    }
}

/// [`strong_trotter_error`] over an `n` sweep.
pub fn trotter_sweep(zeta: &C1Curve, horizon: f64, ns: &[u64], samples: usize) -> Result<ConvergenceReport> {
    let errors = ns
        .iter()
        .map(|&n| strong_trotter_error(zeta, horizon, n, samples))
        .collect::<Result<Vec<_>>>()?;
    ConvergenceReport::new(ns.to_vec(), errors, true)
}

/// [`commutator_error`] at time `t` over an `n` sweep.
pub fn commutator_sweep(gamma: &C1Curve, eta: &C1Curve, t: f64, ns: &[u64]) -> Result<ConvergenceReport> {
    let errors = ns
        .iter()
        .map(|&n| commutator_error(gamma, eta, t, n))
        .collect::<Result<Vec<_>>>()?;
    ConvergenceReport::new(ns.to_vec(), errors, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controls::StepControl;

    fn sl2() -> (Arc<GroupDescriptor>, AlgebraElement, AlgebraElement) {
        let g = GroupDescriptor::sl(2);
        let e = g.element(&[1.0, 0.0, 0.0]).unwrap();
        let f = g.element(&[0.0, 1.0, 0.0]).unwrap();
        (g, e, f)
    }

    #[test]
    fn one_parameter_groups_are_exact() {
        let (_, e, f) = sl2();
        let line = C1Curve::exp_line(&e.add(&f).unwrap());
        assert!(strong_trotter_error(&line, 1.0, 7, 9).unwrap() <= 1e-12);
        assert_eq!(trotter_power(&line, 0.0, 5).unwrap().matrix(), &Mat::identity(2, 2));
    }

    #[test]
    fn product_curve_trotter_example() {
        let (_, e, f) = sl2();
        let prod = C1Curve::product(&e, &f).unwrap();
        let p = trotter_power(&prod, 1.0, 64).unwrap();
        let target = expm(&(e.matrix() + f.matrix()));
        assert!((p.matrix() - &target).amax() < 2e-2);
        let r = strong_trotter_error(&prod, 1.0, 64, 9).unwrap() / strong_trotter_error(&prod, 1.0, 128, 9).unwrap();
        assert!((1.8..2.2).contains(&r), "ratio {r}");
    }

    #[test]
    fn commutator_of_equal_or_commuting_curves_is_trivial() {
        let (_, e, _) = sl2();
        let line = C1Curve::exp_line(&e);
        let p = commutator_power(&line, &line, 1.0, 16).unwrap();
        assert!((p.matrix() - Mat::identity(2, 2)).amax() < 1e-13);
        let s = GroupDescriptor::scalar();
        let a = C1Curve::exp_line(&s.element(&[0.7]).unwrap());
        let b = C1Curve::exp_line(&s.element(&[-1.3]).unwrap());
        assert!((commutator_power(&a, &b, 1.0, 9).unwrap().matrix()[(0, 0)] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn commutator_example_sl2() {
        let (g, e, f) = sl2();
        let h = g.element(&[0.0, 0.0, 1.0]).unwrap();
        let err = commutator_error(&C1Curve::exp_line(&e), &C1Curve::exp_line(&f), 1.0, 32).unwrap();
        assert!(err < 5e-2);
        let d = commutator_derivative(&C1Curve::exp_line(&e), &C1Curve::exp_line(&f)).unwrap();
        assert!((d.matrix() - h.matrix()).amax() < 1e-15);
    }

    #[test]
    fn evolution_curve_derivative() {
        let (g, e, f) = sl2();
        let c = Control::Step(StepControl::new(&g, vec![0.0, 0.5, 1.0], vec![e.matrix().clone(), f.matrix().clone()]).unwrap());
        let curve = C1Curve::evolution(&Evolver::with_grid(64), &c).unwrap();
        assert_eq!(curve.derivative_at_zero().matrix(), e.matrix());
        assert!(strong_trotter_error(&curve, 1.0, 8, 5).unwrap() < 1e-12);
        assert!(curve.eval(1.5).is_err());
    }

    #[test]
    fn rate_fits() {
        let ns = [8.0, 16.0, 32.0, 64.0];
        let first: Vec<f64> = ns.iter().map(|n| 3.0 / n).collect();
        let second: Vec<f64> = ns.iter().map(|n| 0.5 / (n * n)).collect();
        assert!((convergence_rate(&ns, &first).unwrap() + 1.0).abs() < 1e-12);
        assert!((convergence_rate(&ns, &second).unwrap() + 2.0).abs() < 1e-12);
        assert!(matches!(
            convergence_rate(&ns, &[1.0, 0.0, -1.0, 0.5]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn report_csv_layout() {
        let r = ConvergenceReport::new(vec![2, 4, 8], vec![0.5, 0.25, 0.125], false).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,error,slope_so_far");
        assert!(lines[1].ends_with(",nan"));
        assert!(lines[3].starts_with("8,1.2500000000000000e-1,"));
        assert!(ConvergenceReport::new(vec![4, 2], vec![0.1, 0.2], false).is_err());
    }
}
