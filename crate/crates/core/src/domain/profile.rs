use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Shape of the Reinhardt shadow, before per-coordinate scaling by the radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Polydisc,
    Ball,
    /// `Σ_j (t_j / R_j)^{2/p_j} < 1`.
    Egg { exponents: Vec<f64> },
    /// Decreasing boundary curve `t₂ = φ(t₁)` through the knots, piecewise linear (n = 2 only).
    Tabulated { knots: Vec<(f64, f64)> },
}

/// A bounded complete Reinhardt domain, represented by its shadow in modulus space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    dim: usize,
    kind: ProfileKind,
    radii: Vec<f64>,
}

impl RadialProfile {
    pub fn new(kind: ProfileKind, radii: Vec<f64>) -> Result<Self> {
        let dim = radii.len();
        if dim == 0 {
            return Err(LabError::InvalidParameter("profile dimension must be positive".into()));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(LabError::InvalidParameter("bounding radii must be positive".into()));
        }
        match &kind {
            ProfileKind::Egg { exponents } => {
                if exponents.len() != dim {
                    return Err(LabError::DimensionMismatch {
                        expected: dim,
                        got: exponents.len(),
                    });
                }
                if exponents.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                    return Err(LabError::InvalidParameter("egg exponents must be positive".into()));
                }
            }
            ProfileKind::Tabulated { knots } => {
                if dim != 2 {
                    return Err(LabError::InvalidParameter(
                        "tabulated profiles are supported for n = 2 only".into(),
                    ));
                }
                validate_knots(knots)?;
            }
            ProfileKind::Polydisc | ProfileKind::Ball => {}
        }
        Ok(Self { dim, kind, radii })
    }

    pub fn unit_disc() -> Self {
        Self::new(ProfileKind::Ball, vec![1.0]).expect("valid")
    }

    pub fn unit_ball(dim: usize) -> Self {
        Self::new(ProfileKind::Ball, vec![1.0; dim]).expect("valid")
    }

    pub fn unit_polydisc(dim: usize) -> Self {
        Self::new(ProfileKind::Polydisc, vec![1.0; dim]).expect("valid")
    }

    /// `Σ |z_j|^{2/p_j} < 1`.
    pub fn egg(exponents: Vec<f64>) -> Result<Self> {
        let dim = exponents.len();
        Self::new(ProfileKind::Egg { exponents }, vec![1.0; dim])
    }

    /// Profile from a tabulated boundary curve; radii are read off the curve's endpoints.
    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        validate_knots(&knots)?;
        let r1 = knots.last().map(|k| k.0).unwrap_or(1.0);
        let r2 = knots.first().map(|k| k.1).unwrap_or(1.0);
        Self::new(ProfileKind::Tabulated { knots }, vec![r1, r2])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Catalog shapes with a closed-form signed distance.
    pub fn has_exact_distance(&self) -> bool {
        match self.kind {
            ProfileKind::Polydisc => true,
            ProfileKind::Ball => self.radii.iter().all(|r| *r == self.radii[0]),
            _ => false,
        }
    }

    pub fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(LabError::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// Membership of a modulus vector in the open shadow.
    pub fn shadow_contains(&self, t: &[f64]) -> bool {
        match &self.kind {
            ProfileKind::Polydisc => t.iter().zip(&self.radii).all(|(t, r)| t.abs() < *r),
            ProfileKind::Ball => {
                t.iter()
                    .zip(&self.radii)
                    .map(|(t, r)| (t / r) * (t / r))
                    .sum::<f64>()
                    < 1.0
            }
            ProfileKind::Egg { exponents } => {
                t.iter()
                    .zip(&self.radii)
                    .zip(exponents)
                    .map(|((t, r), p)| (t.abs() / r).powf(2.0 / p))
                    .sum::<f64>()
                    < 1.0
            }
            ProfileKind::Tabulated { knots } => {
                let (t1, t2) = (t[0].abs(), t[1].abs());
                t1 < self.radii[0] && t2 < boundary_curve(knots, t1)
            }
        }
    }

    pub fn contains(&self, z: &[Complex64]) -> Result<bool> {
        self.check_dim(z.len())?;
        let t: Vec<f64> = z.iter().map(|c| c.norm()).collect();
        Ok(self.shadow_contains(&t))
    }

    /// Minkowski gauge of the shadow: the unique `λ ≥ 0` with `t/λ` on the boundary.
    pub fn gauge(&self, t: &[f64]) -> f64 {
        match &self.kind {
            ProfileKind::Polydisc => t
                .iter()
                .zip(&self.radii)
                .map(|(t, r)| t.abs() / r)
                .fold(0.0, f64::max),
            ProfileKind::Ball => t
                .iter()
                .zip(&self.radii)
                .map(|(t, r)| (t / r) * (t / r))
                .sum::<f64>()
                .sqrt(),
            ProfileKind::Egg { exponents } => egg_gauge(t, &self.radii, exponents),
            ProfileKind::Tabulated { .. } => ray_gauge(t, |s| self.shadow_contains(s)),
        }
    }
}

fn validate_knots(knots: &[(f64, f64)]) -> Result<()> {
    if knots.len() < 2 {
        return Err(LabError::InvalidParameter("tabulated curve needs at least two knots".into()));
    }
    if knots[0].0 != 0.0 || knots[knots.len() - 1].1 != 0.0 {
        return Err(LabError::InvalidParameter(
            "tabulated curve must start on the t2 axis and end on the t1 axis".into(),
        ));
    }
    for w in knots.windows(2) {
        if !(w[1].0 > w[0].0 && w[1].1 <= w[0].1) {
            return Err(LabError::InvalidParameter(
                "tabulated curve must be strictly increasing in t1 and nonincreasing in t2".into(),
            ));
        }
    }
    if knots[0].1 <= 0.0 {
        return Err(LabError::InvalidParameter("tabulated curve must enclose the origin".into()));
    }
    Ok(())
}

fn boundary_curve(knots: &[(f64, f64)], t1: f64) -> f64 {
    if t1 >= knots[knots.len() - 1].0 {
        return 0.0;
    }
    let i = knots.partition_point(|k| k.0 <= t1).max(1);
    let (a, b) = (knots[i - 1], knots[i]);
    let s = (t1 - a.0) / (b.0 - a.0);
    a.1 + s * (b.1 - a.1)
}

/// Indices of knots, used to flag kinks of a tabulated boundary.
pub(crate) fn tabulated_knots(kind: &ProfileKind) -> Option<&[(f64, f64)]> {
    match kind {
        ProfileKind::Tabulated { knots } => Some(knots),
        _ => None,
    }
}

fn egg_gauge(t: &[f64], radii: &[f64], exponents: &[f64]) -> f64 {
    // Solve Σ (t_j/(λ R_j))^{q_j} = 1; the left side is decreasing in λ.
    let scaled: Vec<(f64, f64)> = t
        .iter()
        .zip(radii)
        .zip(exponents)
        .map(|((t, r), p)| (t.abs() / r, 2.0 / p))
        .filter(|(s, _)| *s > 0.0)
        .collect();
    if scaled.is_empty() {
        return 0.0;
    }
    let level = |lam: f64| scaled.iter().map(|(s, q)| (s / lam).powf(*q)).sum::<f64>();
    let mut hi = scaled.iter().map(|(s, _)| *s).fold(0.0, f64::max);
    let mut lo = hi;
    // At λ = max s_j the sum is ≥ 1; grow until it drops below 1.
    while level(hi) > 1.0 {
        hi *= 2.0;
    }
    while level(lo) < 1.0 {
        lo *= 0.5;
    }
    bisect(lo, hi, |lam| level(lam) > 1.0)
}

/// Bisection to machine precision for the switch point of a monotone predicate
/// (`pred(lo)` true, `pred(hi)` false).
fn bisect(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Gauge of a star-shaped monotone shadow from its membership predicate.
pub(crate) fn ray_gauge(t: &[f64], contains: impl Fn(&[f64]) -> bool) -> f64 {
    let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let dir: Vec<f64> = t.iter().map(|x| x.abs() / norm).collect();
    let at = |r: f64| -> Vec<f64> { dir.iter().map(|d| d * r).collect() };
    // Boundary radius along the ray: contains(at(r)) is true for r < R.
    let mut hi = 1.0;
    while contains(&at(hi)) {
        hi *= 2.0;
    }
    let mut lo = hi * 0.5;
    while !contains(&at(lo)) {
        lo *= 0.5;
        if lo < 1e-300 {
            return f64::INFINITY;
        }
    }
    let radius = bisect(lo, hi, |r| contains(&at(r)));
    norm / radius
}
