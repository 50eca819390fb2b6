use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::domain::sampling::rng_for;
use crate::domain::{inner, norm_sqr, one_minus_inner, DefiningFunction, SampleScheme, SuccessorSpec};
use crate::error::{LabError, Result};
use crate::jet::{Jet, JetLayout};
use crate::kernel::h_prime_point;
use crate::report::{Check, EstimateReport};

/// Floor on `|1 − ⟨z,w⟩|` in the Möbius map.
pub const MOBIUS_FLOOR: f64 = 1e-14;

/// The involutive automorphism `φ_w` of `𝔹^k` exchanging `0` and `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobiusMap {
    w: Vec<Complex64>,
    w2: f64,
    s: f64,
}

impl MobiusMap {
    /// `w = 0` is rejected: the projections `P_w`, `Q_w` are undefined there.
    pub fn new(w: Vec<Complex64>) -> Result<Self> {
        let w2 = norm_sqr(&w);
        let gap = one_minus_inner(&w, &w).re;
        if gap <= 0.0 {
            return Err(LabError::OutsideFiberBall { norm: w2.sqrt() });
        }
        if w2 == 0.0 {
            return Err(LabError::InvalidParameter(
                "the Möbius map is not defined at the center w = 0".into(),
            ));
        }
        Ok(Self {
            s: gap.sqrt(),
            w,
            w2,
        })
    }

    pub fn center(&self) -> &[Complex64] {
        &self.w
    }

    pub fn k(&self) -> usize {
        self.w.len()
    }

    /// `s_w = sqrt(1 − ‖w‖²)`.
    pub fn s(&self) -> f64 {
        self.s
    }

    /// `P_w z = ⟨z,w⟩ w / ‖w‖²`.
    pub fn project(&self, z: &[Complex64]) -> Vec<Complex64> {
        let c = inner(z, &self.w) / self.w2;
        self.w.iter().map(|w| w * c).collect()
    }

    /// `φ_w(z) = (w − P_w z − s_w Q_w z) / (1 − ⟨z,w⟩)`.
    pub fn apply(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        if z.len() != self.k() {
            return Err(LabError::DimensionMismatch {
                expected: self.k(),
                got: z.len(),
            });
        }
        let d = one_minus_inner(z, &self.w);
        if d.norm() < MOBIUS_FLOOR {
            return Err(LabError::BranchFloor(d.norm()));
        }
        let p = self.project(z);
        Ok(self
            .w
            .iter()
            .zip(z.iter().zip(&p))
            .map(|(w, (z, p))| (w - p - (z - p) * self.s) / d)
            .collect())
    }

    /// `φ_w` on jets in the holomorphic variables.
    pub fn apply_jets(&self, z: &[Jet]) -> Vec<Jet> {
        let layout = z[0].layout().clone();
        let mut ip = Jet::zero(&layout);
        for (zj, wj) in z.iter().zip(&self.w) {
            ip = ip + zj.scale(wj.conj());
        }
        let inv = ip.scale(Complex64::new(-1.0, 0.0)).add_const(Complex64::new(1.0, 0.0)).recip();
        let coef = ip.scale(Complex64::new(1.0 / self.w2, 0.0));
        self.w
            .iter()
            .zip(z)
            .map(|(w, zj)| {
                let p = coef.scale(*w);
                let q = zj - &p;
                let num = (p + q.scale(Complex64::new(self.s, 0.0))).scale(Complex64::new(-1.0, 0.0)).add_const(*w);
                num.mul_jet(&inv)
            })
            .collect()
    }

    /// Real Jacobian determinant of `φ_w` at `z`, from the complex Jacobian
    /// read off a first-order jet.
    pub fn real_jacobian(&self, z: &[Complex64]) -> f64 {
        let k = self.k();
        let layout = JetLayout::get(k, 1);
        let vars: Vec<Jet> = z.iter().enumerate().map(|(j, c)| Jet::variable(&layout, j, *c)).collect();
        let image = self.apply_jets(&vars);
        let mut m = DMatrix::<f64>::zeros(2 * k, 2 * k);
        for (i, f) in image.iter().enumerate() {
            for j in 0..k {
                let mut e = vec![0u8; k];
                e[j] = 1;
                let a = f.coeff(&e);
                // Holomorphic: d(u+iv) = a d(x+iy).
                m[(2 * i, 2 * j)] = a.re;
                m[(2 * i, 2 * j + 1)] = -a.im;
                m[(2 * i + 1, 2 * j)] = a.im;
                m[(2 * i + 1, 2 * j + 1)] = a.re;
            }
        }
        m.determinant()
    }
}

pub fn mobius_apply(map: &MobiusMap, z: &[Complex64]) -> Result<Vec<Complex64>> {
    map.apply(z)
}

/// Uniform point of the open ball `r·𝔹^k`.
pub fn ball_sample(rng: &mut ChaCha8Rng, k: usize, r: f64) -> Vec<Complex64> {
    loop {
        let p: Vec<Complex64> = (0..k)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let n2 = norm_sqr(&p);
        if n2 < 1.0 && n2 > 0.0 {
            return p.into_iter().map(|c| c * r).collect();
        }
    }
}

fn mixed_residual(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Default sampling radius for `w`, `η`, `τ` in the identity sweeps.
///
/// Rounding in `τ = φ_w(η)` is amplified by `|Dφ_w(τ)| ≤ 4/(1 − ‖w‖²)`, so
/// residuals at machine precision are only expected while `1 − ‖w‖²` is not tiny.
pub const SAMPLE_RADIUS: f64 = 0.99;

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(LabError::InvalidParameter(format!("sampling radius {radius} outside (0, 1]")));
    }
    Ok(())
}

/// Residuals of the change-of-variables identities for `τ = φ_w(η)`:
/// involution, `1 − ⟨η,w⟩`, `1 − ‖η‖²` and the volume Jacobian.
/// `w` and `η` are uniform in the ball of the given radius.
pub fn identity_check(k: usize, scheme: &SampleScheme, tol: f64, radius: f64) -> Result<EstimateReport> {
    scheme.validate()?;
    check_radius(radius)?;
    let mut report = EstimateReport::new(
        "mobius",
        "Möbius automorphism identities",
        "eta = phi_w(tau); 1-<eta,w> = (1-|w|^2)/(1-<tau,w>); 1-|eta|^2 = (1-|w|^2)(1-|tau|^2)/|1-<tau,w>|^2; Jacobian ((1-|w|^2)/|1-<tau,w>|^2)^(k+1)",
        &["identity", "max_residual", "tolerance"],
    );
    report.param("k", k);
    report.param("samples", scheme.samples);
    report.param("seed", scheme.seed);
    report.param("radius", radius);
    let mut rng = rng_for(scheme.seed, &[0x40b, k as u64]);
    let mut worst = [0.0f64; 5];
    for _ in 0..scheme.samples {
        let w = ball_sample(&mut rng, k, radius);
        let eta = ball_sample(&mut rng, k, radius);
        let map = MobiusMap::new(w.clone())?;
        let tau = map.apply(&eta)?;
        let back = map.apply(&tau)?;
        let gap_w = one_minus_inner(&w, &w).re;
        let d = one_minus_inner(&tau, &w);

        let inv = eta.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let lhs = one_minus_inner(&eta, &w);
        let rhs = gap_w / d;
        let ip = (lhs - rhs).norm() / rhs.norm().max(1.0);
        let norm_id = mixed_residual(one_minus_inner(&eta, &eta).re, gap_w * one_minus_inner(&tau, &tau).re / d.norm_sqr());
        let jac = mixed_residual(map.real_jacobian(&tau), (gap_w / d.norm_sqr()).powi(k as i32 + 1));
        let zero = map.apply(&vec![Complex64::new(0.0, 0.0); k])?;
        let sends = zero.iter().zip(&w).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        for (slot, v) in worst.iter_mut().zip([inv, ip, norm_id, jac, sends]) {
            *slot = slot.max(v);
        }
    }
    let names = [
        "involution",
        "inner_product_identity",
        "norm_identity",
        "volume_jacobian",
        "origin_to_center",
    ];
    for (name, v) in names.iter().zip(worst) {
        report.table.push(vec![(*name).into(), v.into(), tol.into()]);
        report.check(Check::at_most(*name, v, tol));
    }
    Ok(report)
}

/// `(1 − ‖η‖²)/|1 − ⟨w,η⟩| < 2` and the Cauchy–Schwarz bound
/// `|z_j| (1−‖η‖²)^{α_j/2} / |1−⟨w,η⟩|^{α_j} ≤ |z_j| / (1−‖w‖²)^{α_j/2}`.
pub fn elementary_bounds_check(k: usize, scheme: &SampleScheme) -> Result<EstimateReport> {
    scheme.validate()?;
    let mut report = EstimateReport::new(
        "mobius",
        "elementary ball bounds",
        "(1-|eta|^2)/|1-<w,eta>| < 2 and ((1-|eta|^2)(1-|w|^2))^(a/2)/|1-<w,eta>|^a <= 1",
        &["bound", "sup_observed", "limit"],
    );
    report.param("k", k);
    report.param("samples", scheme.samples);
    report.param("seed", scheme.seed);
    let chunks = 64usize;
    let per = scheme.samples.div_ceil(chunks);
    use rayon::prelude::*;
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(scheme.seed, &[0xe1, k as u64, c as u64]);
            let (mut two, mut cs) = (0.0f64, 0.0f64);
            for _ in 0..per {
                // Half the pairs sit on a common ray near the sphere, where the
                // first bound is nearly attained.
                let (w, eta) = if rng.gen::<bool>() {
                    (ball_sample(&mut rng, k, 1.0), ball_sample(&mut rng, k, 1.0))
                } else {
                    let u = 1e-6 + 0.5 * rng.gen::<f64>().powi(3);
                    let dir = ball_sample(&mut rng, k, 1.0);
                    let n = norm_sqr(&dir).sqrt();
                    let theta = rng.gen_range(-FRAC_PI_2..FRAC_PI_2) * rng.gen::<f64>().powi(3);
                    let w: Vec<Complex64> = dir.iter().map(|d| d / n * (1.0 - u * u)).collect();
                    let eta = dir.iter().map(|d| d / n * (1.0 - u) * Complex64::from_polar(1.0, theta)).collect();
                    (w, eta)
                };
                let d = (Complex64::new(1.0, 0.0) - inner(&w, &eta)).norm();
                let e2 = 1.0 - norm_sqr(&eta);
                let w2 = 1.0 - norm_sqr(&w);
                two = two.max(e2 / d);
                let a = rng.gen_range(0.1..4.0);
                cs = cs.max((e2 * w2).powf(a / 2.0) / d.powf(a));
            }
            (two, cs)
        })
        .collect();
    let two = partial.iter().map(|p| p.0).fold(0.0, f64::max);
    let cs = partial.iter().map(|p| p.1).fold(0.0, f64::max);
    report.table.push(vec!["ratio_below_two".into(), two.into(), 2.0.into()]);
    report.table.push(vec!["cauchy_schwarz_ratio".into(), cs.into(), 1.0.into()]);
    report.check(Check::below("ratio_below_two", two, 2.0));
    report.check(Check::at_most("cauchy_schwarz_ratio", cs, 1.0));
    Ok(report)
}

/// `max |ρ(h′(z, w, φ_w(τ))) − ρ(l(z, w, τ))|` with
/// `l_j = |z_j| (1 − ‖τ‖²)^{α_j/2} / (1 − ‖w‖²)^{α_j/2}`.
pub fn radial_reduction_check(
    rho: &DefiningFunction,
    spec: &SuccessorSpec,
    scheme: &SampleScheme,
    tol: f64,
    radius: f64,
) -> Result<EstimateReport> {
    scheme.validate()?;
    check_radius(radius)?;
    rho.profile().check_dim(spec.n())?;
    let mut report = EstimateReport::new(
        "mobius",
        "radial reduction identity",
        "rho(h'(z,w,phi_w(tau))) = rho(l(z,w,tau)), l_j = |z_j|(1-|tau|^2)^(a_j/2)/(1-|w|^2)^(a_j/2)",
        &["quantity", "value", "tolerance"],
    );
    report.param("profile", rho.profile());
    report.param("rho_mode", rho.mode());
    report.param("alpha", spec.alpha());
    report.param("k", spec.k());
    report.param("samples", scheme.samples);
    report.param("seed", scheme.seed);
    report.param("radius", radius);
    let mut rng = rng_for(scheme.seed, &[0x4ad]);
    let radii = rho.profile().radii().to_vec();
    let mut worst = 0.0f64;
    let mut drawn = 0usize;
    while drawn < scheme.samples {
        let w = ball_sample(&mut rng, spec.k(), radius);
        let tau = ball_sample(&mut rng, spec.k(), radius);
        let s = one_minus_inner(&w, &w).re;
        let z: Vec<Complex64> = radii
            .iter()
            .zip(spec.alpha())
            .map(|(r, a)| Complex64::from_polar(rng.gen::<f64>() * r * s.powf(a / 2.0), rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect();
        if !crate::domain::successor_contains(rho.profile(), spec, &z, &w)? {
            continue;
        }
        drawn += 1;
        let map = MobiusMap::new(w.clone())?;
        let eta = map.apply(&tau)?;
        let hp = h_prime_point(spec, &z, &w, &eta)?;
        let t2 = one_minus_inner(&tau, &tau).re;
        let l: Vec<f64> = z
            .iter()
            .zip(spec.alpha())
            .map(|(z, a)| z.norm() * (t2 / s).powf(a / 2.0))
            .collect();
        let lhs = rho.rho(&hp)?;
        let rhs = rho.rho_moduli(&l);
        worst = worst.max((lhs - rhs).abs());
    }
    report.table.push(vec!["max_residual".into(), worst.into(), tol.into()]);
    report.check(Check::at_most("radial_reduction_residual", worst, tol));
    Ok(report)
}
