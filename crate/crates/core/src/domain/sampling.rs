//! Point sets over Reinhardt regions: rejection sampling, stratified radial
//! node sets, and the polar parametrization shared by the Monte Carlo code.
//!
//! Every region here is complete Reinhardt, hence star-shaped. A point is
//! written `ζ_j = (1-u) R(ω) ω_j e^{iθ_j}` with `ω` on the positive orthant of
//! the unit sphere in `ℝ^N` (hyperspherical angles `ψ ∈ [0, π/2]^{N-1}`),
//! `R(ω) = 1/gauge(ω)` and `u ∈ (0, 1]` the gauge gap. The volume element is
//! `R^{2N} (1-u)^{2N-1} Π_j ω_j dσ(ω) du dθ`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::region::Region;
use crate::error::{LabError, Result};
use crate::report::write_atomic;

/// Sample counts, boundary stratification depth and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleScheme {
    pub samples: usize,
    /// Number of dyadic boundary layers `2^{-m}`.
    pub strata: usize,
    pub seed: u64,
}

impl SampleScheme {
    pub const DEFAULT_STRATA: usize = 12;

    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            strata: Self::DEFAULT_STRATA,
            seed,
        }
    }

    pub fn with_strata(mut self, strata: usize) -> Self {
        self.strata = strata;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(LabError::InvalidParameter("sample count must be >= 1".into()));
        }
        if self.strata == 0 {
            return Err(LabError::InvalidParameter("stratum count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Deterministic stream seed for `(seed, stream ids...)` (splitmix64 finalizer).
pub fn stream_seed(seed: u64, ids: &[u64]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &id in ids {
        h = mix(h ^ mix(id.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn rng_for(seed: u64, ids: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, ids))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub point: Vec<Complex64>,
    pub weight: f64,
    /// Gauge gap `1 - gauge`, the boundary distance in gauge units.
    pub boundary_distance: f64,
}

/// Unit direction on the positive orthant of `S^{N-1}` from hyperspherical angles.
pub fn direction(psi: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(psi.len() + 1);
    let mut sin_prod = 1.0;
    for &p in psi {
        out.push(sin_prod * p.cos());
        sin_prod *= p.sin();
    }
    out.push(sin_prod);
    out
}

/// Surface element of `S^{N-1}` in hyperspherical angles.
pub fn sphere_jacobian(psi: &[f64]) -> f64 {
    let m = psi.len();
    psi.iter()
        .enumerate()
        .map(|(i, p)| p.sin().powi((m - 1 - i) as i32))
        .product()
}

/// Inverse of [`direction`] for a nonnegative modulus vector.
pub fn angles_of(t: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut psi = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n.saturating_sub(1) {
        let tail: f64 = t[i + 1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        psi.push(tail.atan2(t[i]));
    }
    psi
}

/// A point in polar coordinates with its volume Jacobian.
#[derive(Debug, Clone)]
pub struct PolarPoint {
    pub point: Vec<Complex64>,
    /// `R^{2N} (1-u)^{2N-1} Π ω_j · dσ/dψ`.
    pub jacobian: f64,
    pub gap: f64,
}

pub fn polar_point(region: &Region, u: f64, psi: &[f64], theta: &[f64]) -> Option<PolarPoint> {
    let n = region.dim();
    debug_assert_eq!(psi.len() + 1, n);
    debug_assert_eq!(theta.len(), n);
    let omega = direction(psi);
    let g = region.gauge(&omega);
    if !(g.is_finite() && g > 0.0) {
        return None;
    }
    let radius = 1.0 / g;
    let s = 1.0 - u;
    let point = omega
        .iter()
        .zip(theta)
        .map(|(w, th)| Complex64::from_polar(s * radius * w, *th))
        .collect();
    let jacobian = radius.powi(2 * n as i32)
        * s.powi(2 * n as i32 - 1)
        * omega.iter().product::<f64>()
        * sphere_jacobian(psi);
    Some(PolarPoint {
        point,
        jacobian,
        gap: u,
    })
}

/// Polar coordinates `(u, ψ, θ)` of a point of the region.
pub fn polar_coords(region: &Region, point: &[Complex64]) -> (f64, Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = point.iter().map(|c| c.norm()).collect();
    let theta = point.iter().map(|c| c.arg().rem_euclid(2.0 * PI)).collect();
    let psi = angles_of(&t);
    let u = 1.0 - region.gauge(&t);
    (u, psi, theta)
}

/// Uniform rejection sampling from the product of coordinate discs.
///
/// Every returned point lies in the region and carries weight
/// `vol(box) / attempts`, so the weights sum to the Monte Carlo volume estimate.
pub fn sample_interior(region: &Region, scheme: &SampleScheme) -> Result<Vec<WeightedPoint>> {
    const ACCEPTANCE_FLOOR: f64 = 1e-3;
    const CHUNK: usize = 4096;
    scheme.validate()?;
    let radii = region.bounding_radii();
    let box_volume: f64 = radii.iter().map(|r| PI * r * r).product();
    let chunks = scheme.samples.div_ceil(CHUNK);
    let results: Vec<Result<(Vec<Vec<Complex64>>, u64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let quota = CHUNK.min(scheme.samples - c * CHUNK);
            let mut rng = rng_for(scheme.seed, &[0x5a, c as u64]);
            let mut pts = Vec::with_capacity(quota);
            let mut attempts = 0u64;
            let budget = ((quota as f64) / ACCEPTANCE_FLOOR).ceil() as u64;
            while pts.len() < quota {
                attempts += 1;
                if attempts > budget {
                    return Err(LabError::DegenerateRegion {
                        rate: pts.len() as f64 / attempts as f64,
                        floor: ACCEPTANCE_FLOOR,
                    });
                }
                let p: Vec<Complex64> = radii
                    .iter()
                    .map(|r| {
                        let rad = r * rng.gen::<f64>().sqrt();
                        Complex64::from_polar(rad, rng.gen_range(0.0..2.0 * PI))
                    })
                    .collect();
                if region.contains(&p)? {
                    pts.push(p);
                }
            }
            Ok((pts, attempts))
        })
        .collect();
    let mut all = Vec::with_capacity(scheme.samples);
    let mut attempts = 0u64;
    for r in results {
        let (pts, a) = r?;
        attempts += a;
        all.extend(pts);
    }
    let weight = box_volume / attempts as f64;
    Ok(all
        .into_iter()
        .map(|p| {
            let t: Vec<f64> = p.iter().map(|c| c.norm()).collect();
            let boundary_distance = 1.0 - region.gauge(&t);
            WeightedPoint {
                point: p,
                weight,
                boundary_distance,
            }
        })
        .collect())
}

/// Volume-uniform jittered grid over `(v = (1-u)^{2N}, ψ, θ)`, one node per cell.
/// The grid has `p^{2N} >= target` cells for the smallest such `p`.
pub fn jittered_nodes(region: &Region, target: usize, seed: u64) -> Result<Vec<WeightedPoint>> {
    if target == 0 {
        return Err(LabError::InvalidParameter("node count must be >= 1".into()));
    }
    let n = region.dim();
    let dims = 2 * n;
    let mut per_dim = 1usize;
    while per_dim.pow(dims as u32) < target {
        per_dim += 1;
    }
    let total = per_dim.pow(dims as u32);
    let cell_volume = (1.0 / per_dim as f64)
        * (FRAC_PI_2 / per_dim as f64).powi(n as i32 - 1)
        * (2.0 * PI / per_dim as f64).powi(n as i32);
    let chunk = 8192usize;
    let nodes: Vec<Vec<WeightedPoint>> = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(seed, &[0x71, c as u64]);
            let mut out = Vec::with_capacity(chunk);
            for idx in c * chunk..((c + 1) * chunk).min(total) {
                let mut rem = idx;
                let mut coords = Vec::with_capacity(dims);
                for _ in 0..dims {
                    let cell = rem % per_dim;
                    rem /= per_dim;
                    coords.push((cell as f64 + rng.gen::<f64>()) / per_dim as f64);
                }
                let v = coords[0];
                let psi: Vec<f64> = coords[1..n].iter().map(|x| x * FRAC_PI_2).collect();
                let theta: Vec<f64> = coords[n..].iter().map(|x| x * 2.0 * PI).collect();
                let s = v.powf(1.0 / dims as f64);
                let omega = direction(&psi);
                let g = region.gauge(&omega);
                let radius = 1.0 / g;
                let point = omega
                    .iter()
                    .zip(&theta)
                    .map(|(w, th)| Complex64::from_polar(s * radius * w, *th))
                    .collect();
                let jac = radius.powi(dims as i32) / dims as f64
                    * omega.iter().product::<f64>()
                    * sphere_jacobian(&psi);
                out.push(WeightedPoint {
                    point,
                    weight: jac * cell_volume,
                    boundary_distance: 1.0 - s,
                });
            }
            out
        })
        .collect();
    Ok(nodes.into_iter().flatten().collect())
}

/// Node set stratified by boundary layers `u ∈ [2^{-m-1}, 2^{-m}]`, `m < M`.
/// Equal node count per layer, jittered in `u`, uniform in the angles. The
/// core `u < 2^{-M}` next to the boundary is not sampled.
pub fn layered_nodes(region: &Region, scheme: &SampleScheme) -> Result<Vec<WeightedPoint>> {
    scheme.validate()?;
    let n = region.dim();
    let layers = scheme.strata;
    let per_layer = scheme.samples.div_ceil(layers);
    let angle_volume = FRAC_PI_2.powi(n as i32 - 1) * (2.0 * PI).powi(n as i32);
    let out: Vec<Vec<WeightedPoint>> = (0..layers)
        .into_par_iter()
        .map(|m| {
            let mut rng = rng_for(scheme.seed, &[0x1a, m as u64]);
            let (lo, hi) = layer_bounds(m, layers);
            let du = (hi - lo) / per_layer as f64;
            let mut pts = Vec::with_capacity(per_layer);
            for i in 0..per_layer {
                let u = lo + (i as f64 + rng.gen::<f64>()) * du;
                let psi: Vec<f64> = (0..n - 1).map(|_| rng.gen::<f64>() * FRAC_PI_2).collect();
                let theta: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 * PI).collect();
                if let Some(pp) = polar_point(region, u, &psi, &theta) {
                    pts.push(WeightedPoint {
                        point: pp.point,
                        weight: pp.jacobian * du * angle_volume,
                        boundary_distance: u,
                    });
                }
            }
            pts
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// `[lo, hi]` of boundary layer `m` out of `layers`; layer 0 is `[1/2, 1]`.
pub fn layer_bounds(m: usize, layers: usize) -> (f64, f64) {
    debug_assert!(m < layers);
    let hi = 0.5f64.powi(m as i32);
    (0.5 * hi, hi)
}

/// Points with gauge gap log-uniform in `[gap_min, gap_max]` and uniform angles.
pub fn near_boundary_points(region: &Region, count: usize, gap_min: f64, gap_max: f64, seed: u64) -> Vec<Vec<Complex64>> {
    let n = region.dim();
    let mut rng = rng_for(seed, &[0xb0]);
    let (a, b) = (gap_min.ln(), gap_max.ln());
    (0..count)
        .filter_map(|_| {
            let u = if gap_max > 0.0 {
                (a + (b - a) * rng.gen::<f64>()).exp()
            } else {
                0.0
            };
            let psi: Vec<f64> = (0..n - 1).map(|_| rng.gen::<f64>() * FRAC_PI_2).collect();
            let theta: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 * PI).collect();
            polar_point(region, u, &psi, &theta).map(|p| p.point)
        })
        .collect()
}

/// Writes a sample set as line-delimited records.
pub fn export_samples(path: &Path, points: &[WeightedPoint]) -> Result<()> {
    let mut out = String::new();
    for p in points {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{RadialProfile, SuccessorSpec};

    fn disc() -> Region {
        RadialProfile::unit_disc().into()
    }

    fn ball2() -> Region {
        RadialProfile::unit_ball(2).into()
    }

    #[test]
    fn rejection_volume_disc() {
        let pts = sample_interior(&disc(), &SampleScheme::new(100_000, 11)).unwrap();
        assert_eq!(pts.len(), 100_000);
        let vol: f64 = pts.iter().map(|p| p.weight).sum();
        assert!((vol - PI).abs() < 0.01 * PI, "{vol}");
        assert!(pts.iter().all(|p| disc().contains(&p.point).unwrap()));
    }

    #[test]
    fn rejection_volume_ball() {
        let pts = sample_interior(&ball2(), &SampleScheme::new(100_000, 5)).unwrap();
        let vol: f64 = pts.iter().map(|p| p.weight).sum();
        let exact = PI * PI / 2.0;
        assert!((vol - exact).abs() < 0.01 * exact, "{vol}");
    }

    #[test]
    fn empty_scheme_is_rejected() {
        assert!(sample_interior(&disc(), &SampleScheme::new(0, 1)).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_interior(&ball2(), &SampleScheme::new(5000, 3)).unwrap();
        let b = sample_interior(&ball2(), &SampleScheme::new(5000, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_region_aborts() {
        // A very thin egg occupies a tiny fraction of its bounding box.
        let thin = RadialProfile::new(
            crate::domain::ProfileKind::Egg {
                exponents: vec![50.0, 50.0, 50.0],
            },
            vec![1.0; 3],
        )
        .unwrap();
        let err = sample_interior(&thin.into(), &SampleScheme::new(100, 1)).unwrap_err();
        assert!(matches!(err, LabError::DegenerateRegion { .. }));
    }

    #[test]
    fn jittered_and_layered_volumes() {
        let egg: Region = Region::successor(RadialProfile::unit_disc(), SuccessorSpec::new(vec![2.0], 1).unwrap()).unwrap();
        // vol = ∫_{|w|<1} π (1-|w|²)² dV(w) = π · π/3
        let exact = PI * PI / 3.0;
        let nodes = jittered_nodes(&egg, 20_000, 2).unwrap();
        let vol: f64 = nodes.iter().map(|p| p.weight).sum();
        assert!((vol - exact).abs() < 2e-3 * exact, "{vol}");
        let layered = layered_nodes(&egg, &SampleScheme::new(40_000, 2)).unwrap();
        let vol: f64 = layered.iter().map(|p| p.weight).sum();
        assert!((vol - exact).abs() < 0.02 * exact, "{vol}");
        assert!(layered.iter().all(|p| egg.contains(&p.point).unwrap()));
    }

    #[test]
    fn polar_round_trip() {
        let r = ball2();
        let psi = [0.4];
        let theta = [1.0, 5.0];
        let p = polar_point(&r, 0.25, &psi, &theta).unwrap();
        let (u, psi2, theta2) = polar_coords(&r, &p.point);
        assert!((u - 0.25).abs() < 1e-14);
        assert!((psi2[0] - 0.4).abs() < 1e-14);
        assert!((theta2[1] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn layer_bounds_cover_unit_interval() {
        let layers = 5;
        let mut top = 1.0;
        for m in 0..layers {
            let (lo, hi) = layer_bounds(m, layers);
            assert_eq!(hi, top);
            top = lo;
        }
        assert_eq!(top, 0.5f64.powi(5));
    }
}
