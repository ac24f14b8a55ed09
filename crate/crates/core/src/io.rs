//! JSON input schemas for controls and vector fields.
//!
//! Control values are coordinate vectors in the group's algebra basis.
//!
//! ```json
//! {"type": "step", "group": "SL2", "breakpoints": [0, 0.5, 1], "values": [[1, 0, 0], [0, 1, 0]]}
//! {"type": "sampled", "group": "SL2", "N": 1024, "p_class": "L1",
//!  "expr": {"generator": "sinusoid", "sin": [1, 0, 0], "cos": [0, 0, 1], "frequency": 1}}
//! ```
//!
//! Fields follow `{"n": 2, "terms": [{"profile": …, "shape": …}]}` with
//! profiles `{"type": "constant", "value": c}`, `{"type": "step", …}` or
//! `{"type": "sampled", "values": […]}` and shapes `{"type": "linear", "A": [[…]]}`
//! or `{"type": "gaussian-bump", "b": …, "center": […], "sigma": …, "v": […]}`.
//!
//! Curves for the limit experiments are `{"type": "exp-line", "v": […]}`,
//! `{"type": "product", "v": […], "w": […]}` or `{"type": "evolution", "control": …}`.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::GroupDescriptor;
use crate::controls::{Control, PClass, SampledControl, StepControl};
use crate::error::{Error, Result};
use crate::evolution::Evolver;
use crate::flows::{Profile, Shape, Term, TimeField};
use crate::limits::C1Curve;

/// Generators for sampled controls; `t` runs over the cell midpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Generator {
    /// `t ↦ value`.
    Constant { value: Vec<f64> },
    /// `t ↦ intercept + t·slope`.
    Linear { intercept: Vec<f64>, slope: Vec<f64> },
    /// `t ↦ sin(2π f t)·sin + cos(2π f t)·cos`.
    Sinusoid { sin: Vec<f64>, cos: Vec<f64>, frequency: f64 },
    /// Independent uniform coordinates in `[−scale, scale]` per sample.
    RandomSeeded { seed: u64, scale: f64 },
    /// Explicit samples, one coordinate vector per cell.
    Samples { values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControlSpec {
    Step {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        group: Option<String>,
        breakpoints: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    Sampled {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        group: Option<String>,
        #[serde(rename = "N")]
        n: usize,
        #[serde(default = "default_class")]
        p_class: PClass,
        expr: Generator,
    },
}

fn default_class() -> PClass {
    PClass::L1
}

fn check_len(k: usize, v: &[f64], what: &str) -> Result<()> {
    if v.len() != k {
        return Err(Error::InvalidInput(format!("{what} has {} coordinates, expected {k}", v.len())));
    }
    Ok(())
}

impl ControlSpec {
    pub fn group_name(&self) -> Option<&str> {
        match self {
            ControlSpec::Step { group, .. } | ControlSpec::Sampled { group, .. } => group.as_deref(),
        }
    }

    /// Builds the control; `group` overrides the group named in the document.
    pub fn build(&self, group: Option<&Arc<GroupDescriptor>>) -> Result<Control> {
        let group = match (group, self.group_name()) {
            (Some(g), _) => Arc::clone(g),
            (None, Some(name)) => GroupDescriptor::from_name(name)?,
            (None, None) => return Err(Error::InvalidInput("control names no group".into())),
        };
        let k = group.algebra_dim();
        match self {
            ControlSpec::Step { breakpoints, values, .. } => {
                let coords: Vec<&[f64]> = values.iter().map(|v| v.as_slice()).collect();
                for c in &coords {
                    check_len(k, c, "step value")?;
                }
                let mats = coords
                    .iter()
                    .map(|c| group.from_coordinates(c))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Control::Step(StepControl::new(&group, breakpoints.clone(), mats)?))
            }
            ControlSpec::Sampled { n, p_class, expr, .. } => {
                if *n == 0 {
                    return Err(Error::InvalidInput("N must be positive".into()));
                }
                let coords = sample_generator(expr, k, *n)?;
                let mats = coords
                    .iter()
                    .map(|c| group.from_coordinates(c))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Control::Sampled(SampledControl::new(&group, mats, *p_class)?))
            }
        }
    }
}

fn sample_generator(expr: &Generator, k: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    let mids = (0..n).map(|i| (i as f64 + 0.5) / n as f64);
    Ok(match expr {
        Generator::Constant { value } => {
            check_len(k, value, "constant value")?;
            vec![value.clone(); n]
        }
        Generator::Linear { intercept, slope } => {
            check_len(k, intercept, "intercept")?;
            check_len(k, slope, "slope")?;
            mids.map(|t| intercept.iter().zip(slope).map(|(a, b)| a + t * b).collect())
                .collect()
        }
        Generator::Sinusoid { sin, cos, frequency } => {
            check_len(k, sin, "sin coefficients")?;
            check_len(k, cos, "cos coefficients")?;
            mids.map(|t| {
                let (s, c) = (TAU * frequency * t).sin_cos();
                sin.iter().zip(cos).map(|(a, b)| s * a + c * b).collect()
            })
            .collect()
        }
        Generator::RandomSeeded { seed, scale } => {
            if !(*scale >= 0.0) {
                return Err(Error::InvalidInput("random scale must be nonnegative".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n)
                .map(|_| (0..k).map(|_| if *scale == 0.0 { 0.0 } else { rng.random_range(-*scale..=*scale) }).collect())
                .collect()
        }
        Generator::Samples { values } => {
            if values.len() != n {
                return Err(Error::InvalidInput(format!("{} samples for N = {n}", values.len())));
            }
            for v in values {
                check_len(k, v, "sample")?;
            }
            values.clone()
        }
    })
}

pub fn control_from_json(text: &str, group: Option<&Arc<GroupDescriptor>>) -> Result<Control> {
    parse_json::<ControlSpec>(text, "control")?.build(group)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant { value: f64 },
    Step { breakpoints: Vec<f64>, values: Vec<f64> },
    Sampled { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeSpec {
    Linear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
    },
    GaussianBump { b: f64, center: Vec<f64>, sigma: f64, v: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub profile: ProfileSpec,
    pub shape: ShapeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub n: usize,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<Profile> {
        match self {
            ProfileSpec::Constant { value } => Profile::step(vec![0.0, 1.0], vec![*value]),
            ProfileSpec::Step { breakpoints, values } => Profile::step(breakpoints.clone(), values.clone()),
            ProfileSpec::Sampled { values } => Profile::sampled(values.clone()),
        }
    }
}

impl ShapeSpec {
    pub fn build(&self) -> Result<Shape> {
        match self {
            ShapeSpec::Linear { a } => {
                let n = a.len();
                if n == 0 || a.iter().any(|row| row.len() != n) {
                    return Err(Error::InvalidInput("linear shape needs a square matrix A".into()));
                }
                Shape::linear(DMatrix::from_fn(n, n, |i, j| a[i][j]))
            }
            ShapeSpec::GaussianBump { b, center, sigma, v } => Shape::gaussian_bump(
                *b,
                DVector::from_column_slice(center),
                *sigma,
                DVector::from_column_slice(v),
            ),
        }
    }
}

impl FieldSpec {
    pub fn build(&self) -> Result<TimeField> {
        let terms = self
            .terms
            .iter()
            .map(|t| Ok(Term { profile: t.profile.build()?, shape: t.shape.build()? }))
            .collect::<Result<Vec<_>>>()?;
        TimeField::new(self.n, terms)
    }
}

pub fn field_from_json(text: &str) -> Result<TimeField> {
    parse_json::<FieldSpec>(text, "field")?.build()
}

/// A `C¹` curve through the identity for the limit experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurveSpec {
    ExpLine { v: Vec<f64> },
    Product { v: Vec<f64>, w: Vec<f64> },
    /// Evolution of a control; the control inherits the curve's group.
    Evolution { control: ControlSpec },
}

impl CurveSpec {
    pub fn build(&self, group: &Arc<GroupDescriptor>, evolver: &Evolver) -> Result<C1Curve> {
        let k = group.algebra_dim();
        let el = |c: &[f64], what: &str| {
            check_len(k, c, what)?;
            group.element(c)
        };
        match self {
            CurveSpec::ExpLine { v } => Ok(C1Curve::exp_line(&el(v, "v")?)),
            CurveSpec::Product { v, w } => C1Curve::product(&el(v, "v")?, &el(w, "w")?),
            CurveSpec::Evolution { control } => C1Curve::evolution(evolver, &control.build(Some(group))?),
        }
    }
}

/// Input of a Trotter experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrotterSpec {
    #[serde(default)]
    pub group: Option<String>,
    pub curve: CurveSpec,
}

/// Input of a commutator experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutatorSpec {
    #[serde(default)]
    pub group: Option<String>,
    pub gamma: CurveSpec,
    pub eta: CurveSpec,
}

/// Parses any of the input documents, mapping syntax errors to [`Error::InvalidInput`].
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("{what} JSON: {e}")))
}
