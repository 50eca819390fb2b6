use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::profile::RadialProfile;
use crate::error::{LabError, Result};

/// Exponents `α ∈ ℝⁿ₊` and fiber dimension `k` of a successor domain `U^α(Ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessorSpec {
    alpha: Vec<f64>,
    k: usize,
}

impl SuccessorSpec {
    pub fn new(alpha: Vec<f64>, k: usize) -> Result<Self> {
        if alpha.is_empty() {
            return Err(LabError::InvalidParameter("alpha must be nonempty".into()));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(LabError::InvalidParameter("every alpha_j must be > 0".into()));
        }
        if k == 0 {
            return Err(LabError::InvalidParameter("fiber dimension k must be >= 1".into()));
        }
        Ok(Self { alpha, k })
    }

    /// Spec whose exponents may vanish on some coordinates. Used when an earlier
    /// fiber of an iterated successor is carried along as an unscaled variable.
    pub(crate) fn with_zero_exponents(alpha: Vec<f64>, k: usize) -> Self {
        debug_assert!(alpha.iter().all(|a| *a >= 0.0) && k >= 1);
        Self { alpha, k }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// `|α| = Σ α_j`.
    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// Ordered list of successor steps `(α⁽¹⁾, k₁), …, (α⁽ˡ⁾, k_l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessorChain {
    steps: Vec<SuccessorSpec>,
}

impl SuccessorChain {
    pub fn new(steps: Vec<SuccessorSpec>) -> Result<Self> {
        if steps.is_empty() {
            return Err(LabError::InvalidParameter("successor chain must be nonempty".into()));
        }
        let n = steps[0].n();
        if steps.iter().any(|s| s.n() != n) {
            return Err(LabError::InvalidParameter(
                "every chain step needs alpha of the base dimension".into(),
            ));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[SuccessorSpec] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn fiber_dims(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.k()).collect()
    }

    pub fn total_fiber_dim(&self) -> usize {
        self.steps.iter().map(|s| s.k()).sum()
    }
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// `⟨a, b⟩ = Σ a_j conj(b_j)`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `Σ x_i y_i` with one extra level of precision (Ogita–Rump–Oishi).
fn dot2(terms: &[(f64, f64)]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for &(x, y) in terms {
        let p = x * y;
        let pe = x.mul_add(y, -p);
        let (t, e) = two_sum(s, p);
        s = t;
        c += e + pe;
    }
    s + c
}

/// `1 − ⟨z,w⟩` without cancellation loss near the sphere.
pub fn one_minus_inner(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    let mut re = vec![(1.0, 1.0)];
    let mut im = Vec::with_capacity(2 * z.len());
    for (a, b) in z.iter().zip(w) {
        re.push((-a.re, b.re));
        re.push((-a.im, b.im));
        im.push((-a.im, b.re));
        im.push((a.re, b.im));
    }
    Complex64::new(dot2(&re), dot2(&im))
}

/// `f_α(z, w) = (z_j / (1 − ‖w‖²)^{α_j/2})_j`.
pub fn f_alpha(spec: &SuccessorSpec, z: &[Complex64], w: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len(spec.n(), z.len())?;
    check_len(spec.k(), w.len())?;
    let w2 = norm_sqr(w);
    if w2 >= 1.0 {
        return Err(LabError::OutsideFiberBall { norm: w2.sqrt() });
    }
    let base = one_minus_inner(w, w).re;
    Ok(z.iter()
        .zip(spec.alpha())
        .map(|(z, a)| z / base.powf(a / 2.0))
        .collect())
}

/// Membership in `U^α(Ω)`.
pub fn successor_contains(
    domain: &RadialProfile,
    spec: &SuccessorSpec,
    z: &[Complex64],
    w: &[Complex64],
) -> Result<bool> {
    domain.check_dim(z.len())?;
    check_len(spec.n(), z.len())?;
    check_len(spec.k(), w.len())?;
    if norm_sqr(w) >= 1.0 {
        return Ok(false);
    }
    domain.contains(&f_alpha(spec, z, w)?)
}

/// `𝐟_α(z, w₁, …, w_l)` with the product of fiber factors per coordinate.
pub fn f_alpha_chain(chain: &SuccessorChain, z: &[Complex64], ws: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
    check_len(chain.len(), ws.len())?;
    let mut out = z.to_vec();
    for (spec, w) in chain.steps().iter().zip(ws) {
        check_len(spec.k(), w.len())?;
        let w2 = norm_sqr(w);
        if w2 >= 1.0 {
            return Err(LabError::OutsideFiberBall { norm: w2.sqrt() });
        }
        let base = one_minus_inner(w, w).re;
        for (o, a) in out.iter_mut().zip(spec.alpha()) {
            *o /= base.powf(a / 2.0);
        }
    }
    Ok(out)
}

/// Membership in the iterated successor `𝐔(Ω)`.
pub fn iterated_contains(
    domain: &RadialProfile,
    chain: &SuccessorChain,
    z: &[Complex64],
    ws: &[Vec<Complex64>],
) -> Result<bool> {
    domain.check_dim(z.len())?;
    domain.contains(&f_alpha_chain(chain, z, ws)?)
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(LabError::DimensionMismatch { expected, got });
    }
    Ok(())
}
