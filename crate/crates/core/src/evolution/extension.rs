//! Evolution through a split extension `N → G → Q`.
//!
//! With a section `σ: Q → G`, the evolution of `γ` factors as `θ·ζ` where
//! `ζ = σ(Evol_Q(qγ))` and `θ` is the evolution in `N` of the conjugated
//! remainder `t ↦ ζ(t)·τ(t)·ζ(t)⁻¹`, `τ = γ − δ^ℓζ`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{nearest_index, picard, quotient, Evolver, Path, Source};
use crate::algebra::{ensure_same, expm, logm, GroupDescriptor, Mat};
use crate::controls::{merge_nodes, Control};
use crate::error::{Error, Result};

/// A split extension of matrix groups, all realised inside `G`'s matrices
/// (`N`) or their own (`Q`).
#[derive(Clone)]
pub struct ExtensionDescriptor {
    pub g: Arc<GroupDescriptor>,
    pub n: Arc<GroupDescriptor>,
    pub q: Arc<GroupDescriptor>,
    /// Coordinates of `q_*: 𝔤 → 𝔮` (`k_q × k_g`).
    pub project_algebra: Mat,
    /// Coordinates of `σ_*: 𝔮 → 𝔤` (`k_g × k_q`).
    pub section_algebra: Mat,
    pub project_group: fn(&Mat) -> Mat,
    pub section_group: fn(&Mat) -> Mat,
}

impl std::fmt::Debug for ExtensionDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExtensionDescriptor")
            .field("g", &self.g.name())
            .field("n", &self.n.name())
            .field("q", &self.q.name())
            .finish()
    }
}

fn se2_project(g: &Mat) -> Mat {
    g.view((0, 0), (2, 2)).into_owned()
}

fn se2_section(r: &Mat) -> Mat {
    let mut m = DMatrix::identity(3, 3);
    m.view_mut((0, 0), (2, 2)).copy_from(r);
    m
}

fn heisenberg_project(g: &Mat) -> Mat {
    DMatrix::from_element(1, 1, g[(0, 1)].exp())
}

fn heisenberg_section(x: &Mat) -> Mat {
    let mut m = DMatrix::identity(3, 3);
    m[(0, 1)] = x[(0, 0)].ln();
    m
}

fn unit(d: usize, i: usize, j: usize) -> Mat {
    let mut m = DMatrix::zeros(d, d);
    m[(i, j)] = 1.0;
    m
}

impl ExtensionDescriptor {
    /// `R² → SE(2) → SO(2)`, split by `R ↦ diag(R, 1)`.
    pub fn se2() -> Self {
        let g = GroupDescriptor::se2();
        let n = GroupDescriptor::custom("R2", 3, vec![unit(3, 0, 2), unit(3, 1, 2)]).expect("translations");
        let q = GroupDescriptor::so(2);
        ExtensionDescriptor {
            g,
            n,
            q,
            project_algebra: DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            section_algebra: DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]),
            project_group: se2_project,
            section_group: se2_section,
        }
    }

    /// `span(Q, Z) → H₃ → (R_{>0}, ·)`, split by `x ↦ I + ln(x)·P`.
    pub fn heisenberg() -> Self {
        let g = GroupDescriptor::heisenberg();
        let n = GroupDescriptor::custom("QZ", 3, vec![unit(3, 1, 2), unit(3, 0, 2)]).expect("abelian ideal");
        let q = GroupDescriptor::scalar();
        ExtensionDescriptor {
            g,
            n,
            q,
            project_algebra: DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            section_algebra: DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]),
            project_group: heisenberg_project,
            section_group: heisenberg_section,
        }
    }

    /// `q_*` on matrices of `𝔤`.
    pub fn project_algebra_matrix(&self, m: &Mat) -> Result<Mat> {
        let c = &self.project_algebra * self.g.coordinates(m);
        self.q.from_coordinates(c.as_slice())
    }

    /// `σ_*` on matrices of `𝔮`.
    pub fn section_algebra_matrix(&self, m: &Mat) -> Result<Mat> {
        let c = &self.section_algebra * self.q.coordinates(m);
        self.g.from_coordinates(c.as_slice())
    }

    /// Randomised consistency checks: `q∘σ = id` on both levels, `σ` is a
    /// homomorphism, `N` lands in `G` and projects to the identity. Returns the largest defect seen.
    pub fn validate(&self, seed: u64) -> Result<f64> {
        if self.n.dim() != self.g.dim() {
            return Err(Error::InvalidExtension("N must be realised in G's matrices".into()));
        }
        let kg = self.g.algebra_dim();
        let kq = self.q.algebra_dim();
        if self.project_algebra.shape() != (kq, kg) || self.section_algebra.shape() != (kg, kq) {
            return Err(Error::InvalidExtension("algebra maps have the wrong shape".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let id_q = self.q.identity_matrix();
        for _ in 0..16 {
            let coords: Vec<f64> = (0..kq).map(|_| rng.random_range(-0.5..0.5)).collect();
            let x = self.q.from_coordinates(&coords)?;
            let back = self.project_algebra_matrix(&self.section_algebra_matrix(&x)?)?;
            worst = worst.max((&back - &x).amax());
            let h = expm(&x);
            let lifted = (self.section_group)(&h);
            worst = worst.max(self.g.membership_defect(&lifted));
            worst = worst.max(((self.project_group)(&lifted) - &h).amax());

            let coords: Vec<f64> = (0..kq).map(|_| rng.random_range(-0.5..0.5)).collect();
            let h2 = expm(&self.q.from_coordinates(&coords)?);
            let split = (self.section_group)(&(&h * &h2)) - &lifted * (self.section_group)(&h2);
            worst = worst.max(split.amax());

            let coords: Vec<f64> = (0..self.n.algebra_dim()).map(|_| rng.random_range(-0.5..0.5)).collect();
            let y = self.n.from_coordinates(&coords)?;
            let (_, in_g) = self.g.project(&y);
            worst = worst.max(in_g);
            worst = worst.max(self.project_algebra_matrix(&y)?.amax());
            worst = worst.max(((self.project_group)(&expm(&y)) - &id_q).amax());
        }
        if worst > 1e-10 {
            return Err(Error::InvalidExtension(format!("extension maps inconsistent (defect {worst:e})")));
        }
        Ok(worst)
    }
}

/// Result of [`Evolver::evolve_via_extension`].
#[derive(Debug, Clone)]
pub struct ExtensionEvolution {
    /// `θ·ζ` on the output grid.
    pub path: Path,
    /// `ζ = σ(Evol_Q(qγ))`.
    pub zeta: Path,
    /// Evolution in `N` of the conjugated remainder.
    pub theta: Path,
    /// Largest distance of `τ` from `𝔫`.
    pub tau_defect: f64,
}

impl Evolver {
    /// Left evolution of `γ` assembled from an evolution in `Q` and one in `N`.
    pub fn evolve_via_extension(&self, gamma: &Control, ext: &ExtensionDescriptor) -> Result<ExtensionEvolution> {
        ensure_same(gamma.group(), &ext.g)?;
        let output = self.output_grid(gamma);

        let (kg, kq) = (ext.g.algebra_dim(), ext.q.algebra_dim());
        if ext.project_algebra.shape() != (kq, kg) || ext.section_algebra.shape() != (kg, kq) {
            return Err(Error::InvalidExtension("algebra maps have the wrong shape".into()));
        }
        let q_gamma = gamma.map_values_into(Arc::clone(&ext.q), |m| {
            ext.project_algebra_matrix(m).expect("shape checked above")
        });
        let knots = gamma.knots();
        let gauss = picard::gauss_points(&merge_nodes(&[&knots, &output]));
        let fine = merge_nodes(&[&output, &gauss]);
        let zq = self.evolve_on(&q_gamma, &fine)?.path;
        let lift = |i: usize| (ext.section_group)(&zq.points()[i]);
        let zeta: Vec<Mat> = output.iter().map(|&t| lift(nearest_index(&fine, t))).collect();

        // τ̄ from one-step logarithms of ζ, used to certify the factorisation
        let cells = output.len() - 1;
        let mut tau_defect = 0.0f64;
        for i in 0..cells {
            let (a, b) = (output[i], output[i + 1]);
            let h = b - a;
            let step = logm(&quotient(&zeta[i], &zeta[i + 1])?)
                .map_err(|_| Error::PathTooCoarse { cell: i })?;
            let tau = gamma.integral_between(a, b) / h - ext.g.project(&step).0 / h;
            let (_, off_n) = ext.n.project(&tau);
            let q_part = ext.project_algebra_matrix(&tau)?.amax();
            tau_defect = tau_defect.max(off_n.max(q_part));
        }
        if tau_defect > 1e-8 {
            return Err(Error::InvalidExtension(format!(
                "remainder leaves the kernel algebra (defect {tau_defect:e})"
            )));
        }

        // σ is a homomorphism, so δ^ℓζ = σ_*(qγ) pointwise
        let integrand = |t: f64| -> Mat {
            let i = nearest_index(&fine, t);
            let z = if (fine[i] - t).abs() <= 1e-13 {
                lift(i)
            } else {
                let zt = zq.value_at(t).expect("Q path resolves its own cells");
                (ext.section_group)(zt.matrix())
            };
            let g = gamma.eval(t);
            let q = ext.project_algebra_matrix(&g).expect("shape checked above");
            let tau = g - ext.section_algebra_matrix(&q).expect("shape checked above");
            let z_inv = z.clone().try_inverse().expect("section values are invertible");
            &z * tau * z_inv
        };
        let theta = self
            .evolve_source(&ext.n, &Source::Func(&integrand), &knots, &output)?
            .path;
        let points = theta.points().iter().zip(&zeta).map(|(th, z)| th * z).collect();

        Ok(ExtensionEvolution {
            path: Path::from_parts(Arc::clone(&ext.g), output.clone(), points),
            zeta: Path::from_parts(Arc::clone(&ext.g), output.clone(), zeta),
            theta,
            tau_defect,
        })
    }
}
