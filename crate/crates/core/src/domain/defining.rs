use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::profile::{tabulated_knots, ProfileKind, RadialProfile};
use super::region::Region;
use super::sampling::{near_boundary_points, rng_for, SampleScheme};
use crate::error::{LabError, Result};
use crate::report::{Check, EstimateReport};

/// Relative finite-difference step for Wirtinger gradients of ρ.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMode {
    /// `±dist(z, bΩ)`; closed form for the disc, ball and polydisc.
    SignedDistance,
    /// `gauge(z) - 1` with the Minkowski gauge of the shadow.
    Gauge,
}

/// Rotation-invariant defining function of a complete Reinhardt domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefiningFunction {
    profile: RadialProfile,
    mode: RhoMode,
}

impl DefiningFunction {
    pub fn signed_distance(profile: RadialProfile) -> Result<Self> {
        if !profile.has_exact_distance() {
            return Err(LabError::InvalidParameter(
                "signed distance is only available for the disc, round ball and polydisc".into(),
            ));
        }
        Ok(Self {
            profile,
            mode: RhoMode::SignedDistance,
        })
    }

    pub fn gauge(profile: RadialProfile) -> Self {
        Self {
            profile,
            mode: RhoMode::Gauge,
        }
    }

    /// Signed distance where it is exact, gauge otherwise.
    pub fn auto(profile: RadialProfile) -> Self {
        if profile.has_exact_distance() {
            Self {
                profile,
                mode: RhoMode::SignedDistance,
            }
        } else {
            Self::gauge(profile)
        }
    }

    pub fn mode(&self) -> RhoMode {
        self.mode
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn rho(&self, z: &[Complex64]) -> Result<f64> {
        self.profile.check_dim(z.len())?;
        let t: Vec<f64> = z.iter().map(|c| c.norm()).collect();
        Ok(self.rho_moduli(&t))
    }

    /// ρ as a function of the modulus vector.
    pub fn rho_moduli(&self, t: &[f64]) -> f64 {
        match self.mode {
            RhoMode::Gauge => self.profile.gauge(t) - 1.0,
            RhoMode::SignedDistance => {
                let radii = self.profile.radii();
                match self.profile.kind() {
                    ProfileKind::Ball => t.iter().map(|x| x * x).sum::<f64>().sqrt() - radii[0],
                    ProfileKind::Polydisc => {
                        let excess: Vec<f64> = t.iter().zip(radii).map(|(t, r)| t.abs() - r).collect();
                        if excess.iter().all(|e| *e < 0.0) {
                            excess.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                        } else {
                            excess.iter().map(|e| e.max(0.0).powi(2)).sum::<f64>().sqrt()
                        }
                    }
                    _ => unreachable!("signed distance mode is only built for catalog shapes"),
                }
            }
        }
    }

    /// Refuses points within `10·h_fd` of a locus where ρ is not smooth.
    fn check_smooth(&self, z: &[Complex64]) -> Result<()> {
        let t: Vec<f64> = z.iter().map(|c| c.norm()).collect();
        let steps: Vec<f64> = t.iter().map(|m| 10.0 * FD_STEP * (1.0 + m)).collect();
        let near_origin = t.iter().zip(&steps).all(|(t, s)| *t < *s);
        if near_origin {
            return Err(LabError::NonSmooth("origin".into()));
        }
        let radii = self.profile.radii();
        match self.profile.kind() {
            ProfileKind::Ball => Ok(()),
            ProfileKind::Polydisc => {
                let mut scaled: Vec<(f64, f64)> = t
                    .iter()
                    .zip(radii)
                    .zip(&steps)
                    .map(|((t, r), s)| (t / r, s / r))
                    .collect();
                scaled.sort_by(|a, b| b.0.total_cmp(&a.0));
                if scaled.len() > 1 && scaled[0].0 - scaled[1].0 < scaled[0].1.max(scaled[1].1) {
                    return Err(LabError::NonSmooth("polydisc edge |z_i|/R_i = |z_j|/R_j".into()));
                }
                Ok(())
            }
            ProfileKind::Egg { exponents } => {
                for ((t, p), s) in t.iter().zip(exponents).zip(&steps) {
                    let q = 2.0 / p;
                    let smooth_power = (q / 2.0).fract() == 0.0;
                    if *t < *s && !smooth_power {
                        return Err(LabError::NonSmooth(format!(
                            "coordinate axis z_j = 0 with |z_j|^{q}"
                        )));
                    }
                }
                Ok(())
            }
            ProfileKind::Tabulated { .. } => {
                if t.iter().zip(&steps).any(|(t, s)| *t < *s) {
                    return Err(LabError::NonSmooth("coordinate axis of a tabulated profile".into()));
                }
                let g = self.profile.gauge(&t);
                let b1 = t[0] / g;
                let knots = tabulated_knots(self.profile.kind()).unwrap_or(&[]);
                if knots.iter().any(|k| (k.0 - b1).abs() < steps[0] / g) {
                    return Err(LabError::NonSmooth("kink of the tabulated boundary".into()));
                }
                Ok(())
            }
        }
    }

    /// Wirtinger gradient `(ρ_{z_1}, …, ρ_{z_n})` by fourth-order central
    /// differences, `ρ_z = (∂_x − i∂_y)ρ / 2` with step `h = 1e-5 (1 + |z_j|)`.
    pub fn gradient(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        self.profile.check_dim(z.len())?;
        self.check_smooth(z)?;
        let mut out = Vec::with_capacity(z.len());
        let mut probe = z.to_vec();
        for j in 0..z.len() {
            let h = FD_STEP * (1.0 + z[j].norm());
            let mut diff = |dir: Complex64| -> Result<f64> {
                let mut at = |s: f64| -> Result<f64> {
                    probe[j] = z[j] + dir * s;
                    let v = self.rho(&probe);
                    probe[j] = z[j];
                    v
                };
                stencil(&mut at, h)
            };
            let dx = diff(Complex64::new(1.0, 0.0))?;
            let dy = diff(Complex64::new(0.0, 1.0))?;
            out.push(Complex64::new(0.5 * dx, -0.5 * dy));
        }
        Ok(out)
    }

    /// `t_j ∂ρ/∂t_j` along the modulus of coordinate `j`, same stencil.
    pub fn radial_derivative(&self, z: &[Complex64], j: usize) -> Result<f64> {
        let mut t: Vec<f64> = z.iter().map(|c| c.norm()).collect();
        let h = FD_STEP * (1.0 + t[j]);
        let t0 = t[j];
        let d = stencil(
            &mut |s| {
                t[j] = t0 + s;
                Ok(self.rho_moduli(&t))
            },
            h,
        )?;
        Ok(t0 * d)
    }
}

/// Five-point first derivative at 0, truncation `O(h^4)`.
fn stencil(f: &mut impl FnMut(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let (p1, m1) = (f(h)?, f(-h)?);
    let (p2, m2) = (f(2.0 * h)?, f(-2.0 * h)?);
    Ok((8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h))
}

/// Samples near the boundary and checks rotation invariance, monotonicity,
/// `Re(z_j ρ_{z_j}) ≥ 0`, the polar identities and `Σ_j z_j ρ_{z_j} > 0`.
pub fn check_defining_properties(df: &DefiningFunction, scheme: &SampleScheme, tol: f64) -> Result<EstimateReport> {
    scheme.validate()?;
    let mut report = EstimateReport::new(
        "defining",
        "defining-function properties",
        "rotation invariance, modulus monotonicity, Re(z_j rho_{z_j}) >= 0, polar identities, positivity of sum z_j rho_{z_j} near the boundary",
        &["property", "max_violation", "tolerance"],
    );
    report.param("rho_mode", df.mode());
    report.param("profile", df.profile());
    report.param("samples", scheme.samples);
    report.param("seed", scheme.seed);
    report.param("tolerance", tol);

    let region: Region = df.profile().clone().into();
    let points = near_boundary_points(&region, scheme.samples, 1e-6, 0.1, scheme.seed);
    let mut rng = rng_for(scheme.seed, &[0xde]);

    let mut rotation: f64 = 0.0;
    let mut monotone: f64 = 0.0;
    let mut d_violation: f64 = 0.0;
    let mut polar_imag: f64 = 0.0;
    let mut polar_radial: f64 = 0.0;
    let mut e_min = f64::INFINITY;
    let mut skipped = 0usize;
    let mut used = 0usize;

    for z in &points {
        let rho = df.rho(z)?;
        let rotated: Vec<Complex64> = z
            .iter()
            .map(|c| c * Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI)))
            .collect();
        rotation = rotation.max((df.rho(&rotated)? - rho).abs());
        let shrunk: Vec<Complex64> = z
            .iter()
            .map(|c| c * Complex64::from_polar(rng.gen::<f64>(), rng.gen_range(0.0..2.0 * PI)))
            .collect();
        monotone = monotone.max(df.rho(&shrunk)? - rho);

        let grad = match df.gradient(z) {
            Ok(g) => g,
            Err(LabError::NonSmooth(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        used += 1;
        let mut sum = 0.0;
        for (j, (zj, gj)) in z.iter().zip(&grad).enumerate() {
            let euler = zj * gj;
            d_violation = d_violation.max(-euler.re);
            polar_imag = polar_imag.max(euler.im.abs());
            let radial = df.radial_derivative(z, j)?;
            polar_radial = polar_radial.max((radial - 2.0 * euler.re).abs());
            sum += euler.re;
        }
        e_min = e_min.min(sum);
    }

    let rows: [(&str, f64); 5] = [
        ("rotation_invariance", rotation),
        ("monotonicity", monotone.max(0.0)),
        ("re_z_rho_z_nonnegative", d_violation.max(0.0)),
        ("im_z_rho_z_vanishes", polar_imag),
        ("radial_derivative_identity", polar_radial),
    ];
    for (name, v) in rows {
        report.table.push(vec![name.into(), v.into(), tol.into()]);
        report.check(Check::at_most(name, v, tol));
    }
    report.check(Check::above("min_sum_re_z_rho_z", e_min, 0.0));
    report.check(Check::at_least("gradient_samples_used", used as f64, 1.0));
    report.param("gradient_samples_skipped_nonsmooth", skipped);
    report.param("min_sum_re_z_rho_z", e_min);
    Ok(report)
}
