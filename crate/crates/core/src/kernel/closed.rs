use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{ProfileKind, RadialProfile};
use crate::error::{LabError, Result};
use crate::jet::Jet;

/// Catalog kernels with elementary closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ClosedForm {
    /// Product of disc kernels `1/(πR²(1 − zζ̄/R²)²)`.
    Polydisc { radii: Vec<f64> },
    /// `n!/(π^n R^{2n} (1 − ⟨z,ζ⟩/R²)^{n+1})`.
    Ball { dim: usize, radius: f64 },
}

impl ClosedForm {
    pub fn for_profile(profile: &RadialProfile) -> Result<Self> {
        let radii = profile.radii();
        match profile.kind() {
            ProfileKind::Polydisc => Ok(ClosedForm::Polydisc { radii: radii.to_vec() }),
            ProfileKind::Ball if radii.iter().all(|r| *r == radii[0]) => Ok(ClosedForm::Ball {
                dim: profile.dim(),
                radius: radii[0],
            }),
            _ => Err(LabError::InvalidParameter(
                "no closed-form kernel for this profile; use the monomial series".into(),
            )),
        }
    }

    pub fn profile(&self) -> RadialProfile {
        match self {
            ClosedForm::Polydisc { radii } => RadialProfile::new(ProfileKind::Polydisc, radii.clone()),
            ClosedForm::Ball { dim, radius } => RadialProfile::new(ProfileKind::Ball, vec![*radius; *dim]),
        }
        .expect("closed forms are built from valid profiles")
    }

    pub fn dim(&self) -> usize {
        match self {
            ClosedForm::Polydisc { radii } => radii.len(),
            ClosedForm::Ball { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, z: &[Complex64], zeta: &[Complex64]) -> Complex64 {
        match self {
            ClosedForm::Polydisc { radii } => radii
                .iter()
                .zip(z.iter().zip(zeta))
                .map(|(r, (a, b))| {
                    let r2 = r * r;
                    let d = Complex64::new(1.0, 0.0) - a * b.conj() / r2;
                    (PI * r2 * d * d).inv()
                })
                .product(),
            ClosedForm::Ball { dim, radius } => {
                let r2 = radius * radius;
                let ip: Complex64 = z.iter().zip(zeta).map(|(a, b)| a * b.conj()).sum();
                let d = Complex64::new(1.0, 0.0) - ip / r2;
                Complex64::new(ball_constant(*dim, *radius), 0.0) / d.powi(*dim as i32 + 1)
            }
        }
    }

    pub fn eval_jets(&self, z: &[Jet], zeta: &[Complex64]) -> Jet {
        let layout = z[0].layout().clone();
        match self {
            ClosedForm::Polydisc { radii } => {
                let mut out = Jet::constant(&layout, Complex64::new(1.0, 0.0));
                for (r, (a, b)) in radii.iter().zip(z.iter().zip(zeta)) {
                    let r2 = r * r;
                    let d = a.scale(-b.conj() / r2).add_const(Complex64::new(1.0, 0.0));
                    out = out.mul_jet(&d.powi(-2).scale(Complex64::new(1.0 / (PI * r2), 0.0)));
                }
                out
            }
            ClosedForm::Ball { dim, radius } => {
                let r2 = radius * radius;
                let mut ip = Jet::zero(&layout);
                for (a, b) in z.iter().zip(zeta) {
                    ip = ip + a.scale(b.conj() / r2);
                }
                let d = ip.scale(Complex64::new(-1.0, 0.0)).add_const(Complex64::new(1.0, 0.0));
                d.powi(-(*dim as i32 + 1))
                    .scale(Complex64::new(ball_constant(*dim, *radius), 0.0))
            }
        }
    }
}

fn ball_constant(dim: usize, radius: f64) -> f64 {
    let fact: f64 = (1..=dim).map(|i| i as f64).product();
    fact / (PI.powi(dim as i32) * radius.powi(2 * dim as i32))
}
