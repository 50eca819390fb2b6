use std::f64::consts::PI;

use num_complex::Complex64;

use super::expansion::{expand_operator, OperatorExpansion};
use super::{ClosedForm, KernelModel};
use crate::domain::{f_alpha, norm_sqr, one_minus_inner, Region, SuccessorSpec};
use crate::error::{LabError, Result};
use crate::jet::Jet;

/// Guard on `|1 − ⟨w,η⟩|` below which evaluation is refused.
pub const BRANCH_FLOOR: f64 = 1e-12;

fn fiber_gap(eta: &[Complex64]) -> Result<f64> {
    let s = one_minus_inner(eta, eta).re;
    if s <= 0.0 {
        return Err(LabError::OutsideFiberBall { norm: norm_sqr(eta).sqrt() });
    }
    Ok(s)
}

fn branch_base(w: &[Complex64], eta: &[Complex64]) -> Result<Complex64> {
    let d = one_minus_inner(w, eta);
    if d.norm() < BRANCH_FLOOR {
        return Err(LabError::BranchFloor(d.norm()));
    }
    Ok(d)
}

/// `h_j = z_j ((1 − ‖η‖²)/(1 − ⟨w,η⟩))^{α_j}` on the principal branch.
pub fn h_point(spec: &SuccessorSpec, z: &[Complex64], w: &[Complex64], eta: &[Complex64]) -> Result<Vec<Complex64>> {
    check(spec, z, w, eta)?;
    let s = fiber_gap(eta)?;
    let d = branch_base(w, eta)?;
    Ok(z.iter()
        .zip(spec.alpha())
        .map(|(z, a)| z * s.powf(*a) * d.powf(-*a))
        .collect())
}

/// `h′_j = z_j (1 − ‖η‖²)^{α_j/2} / (1 − ⟨w,η⟩)^{α_j}`, i.e. `f_α(h, η)`.
pub fn h_prime_point(spec: &SuccessorSpec, z: &[Complex64], w: &[Complex64], eta: &[Complex64]) -> Result<Vec<Complex64>> {
    check(spec, z, w, eta)?;
    let s = fiber_gap(eta)?;
    let d = branch_base(w, eta)?;
    Ok(z.iter()
        .zip(spec.alpha())
        .map(|(z, a)| z * s.powf(a / 2.0) * d.powf(-*a))
        .collect())
}

fn check(spec: &SuccessorSpec, z: &[Complex64], w: &[Complex64], eta: &[Complex64]) -> Result<()> {
    for (expected, got) in [(spec.n(), z.len()), (spec.k(), w.len()), (spec.k(), eta.len())] {
        if expected != got {
            return Err(LabError::DimensionMismatch { expected, got });
        }
    }
    if norm_sqr(w) >= 1.0 {
        return Err(LabError::OutsideFiberBall { norm: norm_sqr(w).sqrt() });
    }
    Ok(())
}

/// Kernel of the slice `U^α_η = {z : f_α(z, η) ∈ Ω}`:
/// `(1 − ‖η‖²)^{−|α|} K_Ω(f_α(z,η); conj f_α(ζ,η))`.
pub fn slice_kernel(
    inner_model: &KernelModel,
    spec: &SuccessorSpec,
    eta: &[Complex64],
    z: &[Complex64],
    zeta: &[Complex64],
) -> Result<Complex64> {
    let s = fiber_gap(eta)?;
    let fz = f_alpha(spec, z, eta)?;
    let fzeta = f_alpha(spec, zeta, eta)?;
    Ok(inner_model.eval(&fz, &fzeta)? * s.powf(-spec.alpha_sum()))
}

/// `K_{U^α}` assembled from an inner kernel by the transformation formula:
/// `D_{U^α}` applied to the slice kernel at `h(z,w,η)`.
#[derive(Debug, Clone)]
pub struct SuccessorComposite {
    inner: KernelModel,
    spec: SuccessorSpec,
    expansion: OperatorExpansion,
    region: Region,
}

impl SuccessorComposite {
    pub fn new(inner: KernelModel, spec: SuccessorSpec) -> Result<Self> {
        let region = match inner.region() {
            Region::Domain(p) => Region::successor(p, spec.clone())?,
            _ => {
                return Err(LabError::InvalidParameter(
                    "successor of a successor: build it with KernelModel::iterated".into(),
                ))
            }
        };
        Self::with_region(inner, spec, region)
    }

    pub(crate) fn with_region(inner: KernelModel, spec: SuccessorSpec, region: Region) -> Result<Self> {
        if inner.dim() != spec.n() {
            return Err(LabError::DimensionMismatch {
                expected: inner.dim(),
                got: spec.n(),
            });
        }
        let expansion = expand_operator(spec.alpha(), spec.k())?;
        Ok(Self {
            inner,
            spec,
            expansion,
            region,
        })
    }

    pub fn inner(&self) -> &KernelModel {
        &self.inner
    }

    pub fn spec(&self) -> &SuccessorSpec {
        &self.spec
    }

    pub fn expansion(&self) -> &OperatorExpansion {
        &self.expansion
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.spec.n() + self.spec.k()
    }

    /// Scalar value without jets when the inner kernel is a closed form, whose
    /// Taylor coefficients in `δ` are explicit. `None` for other inner kernels.
    pub(crate) fn eval_closed(&self, zw: &[Complex64], zeta_eta: &[Complex64]) -> Option<Result<Complex64>> {
        match &self.inner {
            KernelModel::ClosedForm(cf) => Some(self.closed_value(cf, zw, zeta_eta)),
            _ => None,
        }
    }

    fn closed_value(&self, cf: &ClosedForm, zw: &[Complex64], zeta_eta: &[Complex64]) -> Result<Complex64> {
        let (n, k) = (self.spec.n(), self.spec.k());
        let (z, w) = zw.split_at(n);
        let (zeta, eta) = zeta_eta.split_at(n);
        let s = fiber_gap(eta)?;
        let d = branch_base(w, eta)?;
        let alpha = self.spec.alpha();
        let total = self.spec.alpha_sum();
        // Inner argument at δ = 0: u_j = h_j s^{−α_j/2}.
        let u: Vec<Complex64> = z
            .iter()
            .zip(alpha)
            .map(|(z, a)| z * s.powf(a / 2.0) * d.powf(-*a))
            .collect();
        let zp = f_alpha(&self.spec, zeta, eta)?;
        let one = Complex64::new(1.0, 0.0);
        let sum = match cf {
            ClosedForm::Ball { dim, radius } => {
                // [v^β] c (D − Σ v_j ζ̄_j/r²)^{−m} = c D^{−m} (m)_{|β|}/β! Π (ζ̄_j/(r² D))^{β_j}
                let r2 = radius * radius;
                let ip: Complex64 = u.iter().zip(&zp).map(|(a, b)| a * b.conj()).sum();
                let big_d = one - ip / r2;
                let x: Vec<Complex64> = u.iter().zip(&zp).map(|(a, b)| a * b.conj() / (r2 * big_d)).collect();
                let m = *dim as f64 + 1.0;
                let mut acc = Complex64::new(0.0, 0.0);
                for (beta, c) in self.expansion.coeffs() {
                    let order: u32 = beta.iter().map(|b| *b as u32).sum();
                    let rising: f64 = (0..order).map(|i| m + i as f64).product();
                    let mono: Complex64 = x.iter().zip(beta).map(|(x, b)| x.powu(*b as u32)).product();
                    acc += mono * (c * rising);
                }
                acc * cf.eval(&u, &zp)
            }
            ClosedForm::Polydisc { radii } => {
                // Per factor: [v^b] (π r²)^{−1} (D − v ζ̄/r²)^{−2} = (π r² D²)^{−1} (b+1) (ζ̄/(r² D))^b
                let x: Vec<Complex64> = u
                    .iter()
                    .zip(&zp)
                    .zip(radii)
                    .map(|((a, b), r)| {
                        let r2 = r * r;
                        let t = a * b.conj() / r2;
                        t / (one - t)
                    })
                    .collect();
                let mut acc = Complex64::new(0.0, 0.0);
                for (beta, c) in self.expansion.coeffs() {
                    let mut term = Complex64::new(*c, 0.0);
                    for (x, b) in x.iter().zip(beta) {
                        let b = *b as u32;
                        let fact: f64 = (1..=b).map(|i| i as f64).product();
                        term *= x.powu(b) * (fact * (b + 1) as f64);
                    }
                    acc += term;
                }
                acc * cf.eval(&u, &zp)
            }
        };
        Ok(sum * d.powf(-(1.0 + k as f64 + total)) / PI.powi(k as i32))
    }

    pub fn eval_jets(&self, zw: &[Jet], zeta_eta: &[Complex64]) -> Result<Jet> {
        let (n, k) = (self.spec.n(), self.spec.k());
        let (z, w) = zw.split_at(n);
        let (zeta, eta) = zeta_eta.split_at(n);
        let layout = zw[0].layout().clone();
        let (vars, order) = (layout.nvars(), layout.order());
        let s = fiber_gap(eta)?;
        let alpha = self.spec.alpha();
        let total = self.spec.alpha_sum();

        let mut ip = Jet::zero(&layout);
        for (wj, ej) in w.iter().zip(eta) {
            ip = ip + wj.scale(ej.conj());
        }
        let d = ip.scale(Complex64::new(-1.0, 0.0)).add_const(Complex64::new(1.0, 0.0));
        if d.value().norm() < BRANCH_FLOOR {
            return Err(LabError::BranchFloor(d.value().norm()));
        }

        let h: Vec<Jet> = z
            .iter()
            .zip(alpha)
            .map(|(zj, a)| zj.mul_jet(&d.powf(-a)).scale(Complex64::new(s.powf(*a), 0.0)))
            .collect();

        // G(h + δ) with δ as extra jet variables, G the slice kernel.
        let wide = order + k;
        let args: Vec<Jet> = h
            .iter()
            .zip(alpha)
            .enumerate()
            .map(|(j, (hj, a))| {
                let u = hj.lift(n, wide) + Jet::variable(&crate::jet::JetLayout::get(vars + n, wide), vars + j, Complex64::new(0.0, 0.0));
                u.scale(Complex64::new(s.powf(-a / 2.0), 0.0))
            })
            .collect();
        let mapped_zeta = f_alpha(&self.spec, zeta, eta)?;
        let g = self
            .inner
            .eval_jets(&args, &mapped_zeta)?
            .scale(Complex64::new(s.powf(-total), 0.0));

        let pref = d
            .powf(-(1.0 + k as f64 + total))
            .scale(Complex64::new(s.powf(total) / PI.powi(k as i32), 0.0));
        Ok(pref.mul_jet(&self.expansion.contract(&h, &g)))
    }
}
