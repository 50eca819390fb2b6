use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::profile::{ray_gauge, RadialProfile};
use super::successor::{iterated_contains, successor_contains, SuccessorChain, SuccessorSpec};
use crate::error::{LabError, Result};

/// A Reinhardt region in `ℂ^N`: an initial domain, a successor `U^α(Ω)` or an
/// iterated successor `𝐔(Ω)`. Coordinates are ordered `(z, w₁, …, w_l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "region", rename_all = "snake_case")]
pub enum Region {
    Domain(RadialProfile),
    Successor { base: RadialProfile, spec: SuccessorSpec },
    Iterated { base: RadialProfile, chain: SuccessorChain },
}

impl Region {
    pub fn successor(base: RadialProfile, spec: SuccessorSpec) -> Result<Self> {
        base.check_dim(spec.n())?;
        Ok(Region::Successor { base, spec })
    }

    pub fn iterated(base: RadialProfile, chain: SuccessorChain) -> Result<Self> {
        base.check_dim(chain.steps()[0].n())?;
        Ok(Region::Iterated { base, chain })
    }

    pub fn base(&self) -> &RadialProfile {
        match self {
            Region::Domain(p) => p,
            Region::Successor { base, .. } | Region::Iterated { base, .. } => base,
        }
    }

    /// Total complex dimension `N`.
    pub fn dim(&self) -> usize {
        match self {
            Region::Domain(p) => p.dim(),
            Region::Successor { base, spec } => base.dim() + spec.k(),
            Region::Iterated { base, chain } => base.dim() + chain.total_fiber_dim(),
        }
    }

    /// Splits a point into the base coordinates and the fiber blocks.
    pub fn split<'a>(&self, point: &'a [Complex64]) -> Result<(&'a [Complex64], Vec<&'a [Complex64]>)> {
        if point.len() != self.dim() {
            return Err(LabError::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        let n = self.base().dim();
        let (z, mut rest) = point.split_at(n);
        let mut blocks = Vec::new();
        let dims = match self {
            Region::Domain(_) => vec![],
            Region::Successor { spec, .. } => vec![spec.k()],
            Region::Iterated { chain, .. } => chain.fiber_dims(),
        };
        for k in dims {
            let (w, r) = rest.split_at(k);
            blocks.push(w);
            rest = r;
        }
        Ok((z, blocks))
    }

    pub fn contains(&self, point: &[Complex64]) -> Result<bool> {
        let (z, ws) = self.split(point)?;
        match self {
            Region::Domain(p) => p.contains(z),
            Region::Successor { base, spec } => successor_contains(base, spec, z, ws[0]),
            Region::Iterated { base, chain } => {
                if ws.iter().any(|w| super::successor::norm_sqr(w) >= 1.0) {
                    return Ok(false);
                }
                let owned: Vec<Vec<Complex64>> = ws.iter().map(|w| w.to_vec()).collect();
                iterated_contains(base, chain, z, &owned)
            }
        }
    }

    /// Membership of a modulus vector `(|z|, |w₁|, …)`.
    pub fn shadow_contains(&self, t: &[f64]) -> bool {
        let n = self.base().dim();
        match self {
            Region::Domain(p) => p.shadow_contains(t),
            Region::Successor { base, spec } => {
                let w2: f64 = t[n..].iter().map(|x| x * x).sum();
                if w2 >= 1.0 {
                    return false;
                }
                let scaled: Vec<f64> = t[..n]
                    .iter()
                    .zip(spec.alpha())
                    .map(|(t, a)| t / (1.0 - w2).powf(a / 2.0))
                    .collect();
                base.shadow_contains(&scaled)
            }
            Region::Iterated { base, chain } => {
                let mut scaled = t[..n].to_vec();
                let mut offset = n;
                for step in chain.steps() {
                    let w2: f64 = t[offset..offset + step.k()].iter().map(|x| x * x).sum();
                    if w2 >= 1.0 {
                        return false;
                    }
                    for (s, a) in scaled.iter_mut().zip(step.alpha()) {
                        *s /= (1.0 - w2).powf(a / 2.0);
                    }
                    offset += step.k();
                }
                base.shadow_contains(&scaled)
            }
        }
    }

    /// Minkowski gauge of the shadow.
    pub fn gauge(&self, t: &[f64]) -> f64 {
        match self {
            Region::Domain(p) => p.gauge(t),
            _ => ray_gauge(t, |s| self.shadow_contains(s)),
        }
    }

    /// Per-coordinate modulus bounds of the region.
    pub fn bounding_radii(&self) -> Vec<f64> {
        let mut radii = self.base().radii().to_vec();
        radii.resize(self.dim(), 1.0);
        radii
    }
}

impl From<RadialProfile> for Region {
    fn from(p: RadialProfile) -> Self {
        Region::Domain(p)
    }
}
