use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{ProfileKind, RadialProfile, Region};
use crate::error::{LabError, Result};
use crate::jet::Jet;
use crate::quadrature::{integrate, QuadTolerance};
use crate::report::write_atomic;

/// Relative tolerance of each monomial-norm quadrature.
pub const NORM_REL_TOL: f64 = 1e-11;
/// Diagonal-tail stabilization target of the truncation rule.
pub const TAIL_REL_TOL: f64 = 1e-8;

/// Concurrent cache of monomial norms `‖z^γ‖²` keyed by `(region, γ)`.
#[derive(Debug, Default)]
pub struct NormCache {
    map: RwLock<HashMap<(String, Vec<u16>), f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NormRow {
    region: String,
    gamma: String,
    norm: f64,
}

impl NormCache {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("norm cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str, gamma: &[u16]) -> Option<f64> {
        self.map
            .read()
            .expect("norm cache poisoned")
            .get(&(key.to_string(), gamma.to_vec()))
            .copied()
    }

    pub fn insert(&self, key: &str, gamma: &[u16], norm: f64) {
        self.map
            .write()
            .expect("norm cache poisoned")
            .insert((key.to_string(), gamma.to_vec()), norm);
    }

    /// Flat table `region,gamma,norm` with `γ` written as `a-b-c`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let map = self.map.read().expect("norm cache poisoned");
        let mut entries: Vec<_> = map.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        let mut w = csv::Writer::from_writer(Vec::new());
        for ((region, gamma), norm) in entries {
            w.serialize(NormRow {
                region: region.clone(),
                gamma: gamma.iter().map(|g| g.to_string()).collect::<Vec<_>>().join("-"),
                norm: *norm,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Io(e.into_error()))?;
        write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Arc<Self>> {
        let cache = Self::default();
        let mut r = csv::Reader::from_path(path)?;
        for row in r.deserialize() {
            let row: NormRow = row?;
            let gamma = row
                .gamma
                .split('-')
                .map(|g| g.parse::<u16>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| LabError::Config(format!("bad gamma in norm table: {e}")))?;
            cache.insert(&row.region, &gamma, row.norm);
        }
        Ok(Arc::new(cache))
    }
}

pub fn region_key(region: &Region) -> String {
    serde_json::to_string(region).expect("regions serialize")
}

/// `sup { s : (prefix, s, 0, …) ∈ closure of the shadow }`.
pub fn coordinate_bound(region: &Region, prefix: &[f64]) -> f64 {
    let j = prefix.len();
    let base = region.base();
    let n = base.dim();
    if j < n || matches!(region, Region::Domain(_)) {
        return profile_bound(base, prefix);
    }
    let (blocks, alphas): (Vec<usize>, Vec<&[f64]>) = match region {
        Region::Successor { spec, .. } => (vec![spec.k()], vec![spec.alpha()]),
        Region::Iterated { chain, .. } => (chain.fiber_dims(), chain.steps().iter().map(|s| s.alpha()).collect()),
        Region::Domain(_) => unreachable!(),
    };
    let mut y = prefix[..n].to_vec();
    let mut offset = n;
    for (b, (k, alpha)) in blocks.iter().zip(&alphas).enumerate() {
        if j < offset + k {
            let q: f64 = prefix[offset..j].iter().map(|x| x * x).sum();
            let c_min = min_fiber_factor(base, &y, alpha);
            return (1.0 - q - c_min).max(0.0).sqrt();
        }
        let c: f64 = 1.0 - prefix[offset..offset + k].iter().map(|x| x * x).sum::<f64>();
        if c <= 0.0 {
            return 0.0;
        }
        for (yi, a) in y.iter_mut().zip(alphas[b]) {
            *yi /= c.powf(a / 2.0);
        }
        offset += k;
    }
    unreachable!("prefix longer than the region dimension")
}

/// Smallest `c ∈ [0, 1]` with `y / c^{α/2}` in the closed base shadow, or 1 if none.
fn min_fiber_factor(base: &RadialProfile, y: &[f64], alpha: &[f64]) -> f64 {
    let g = base.gauge(y);
    if g >= 1.0 {
        return 1.0;
    }
    if g == 0.0 {
        return 0.0;
    }
    if alpha.iter().all(|a| *a == alpha[0]) {
        return g.powf(2.0 / alpha[0]);
    }
    let fits = |c: f64| {
        let s: Vec<f64> = y.iter().zip(alpha).map(|(y, a)| y / c.powf(a / 2.0)).collect();
        base.gauge(&s) <= 1.0
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            hi = mid
        } else {
            lo = mid
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    hi
}

fn profile_bound(profile: &RadialProfile, prefix: &[f64]) -> f64 {
    let j = prefix.len();
    let radii = profile.radii();
    match profile.kind() {
        ProfileKind::Polydisc => {
            if prefix.iter().zip(radii).any(|(t, r)| t >= r) {
                0.0
            } else {
                radii[j]
            }
        }
        ProfileKind::Ball if radii.iter().all(|r| *r == radii[0]) => {
            (radii[0] * radii[0] - prefix.iter().map(|t| t * t).sum::<f64>()).max(0.0).sqrt()
        }
        ProfileKind::Egg { exponents } => {
            let s = 1.0
                - prefix
                    .iter()
                    .zip(radii)
                    .zip(exponents)
                    .map(|((t, r), p)| (t / r).powf(2.0 / p))
                    .sum::<f64>();
            if s <= 0.0 {
                0.0
            } else {
                radii[j] * s.powf(exponents[j] / 2.0)
            }
        }
        _ => {
            let inside = |s: f64| {
                let mut full = prefix.to_vec();
                full.push(s);
                full.resize(profile.dim(), 0.0);
                profile.shadow_contains(&full)
            };
            if !inside(0.0) {
                return 0.0;
            }
            let mut hi = radii[j].max(1.0);
            while inside(hi) {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if inside(mid) {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            lo
        }
    }
}

/// `‖z^γ‖² = (2π)^N ∫_shadow t^{2γ+1} dt` by nested adaptive quadrature, the
/// last coordinate integrated in closed form.
pub fn shadow_moment(region: &Region, gamma: &[u16]) -> Result<f64> {
    if gamma.len() != region.dim() {
        return Err(LabError::DimensionMismatch {
            expected: region.dim(),
            got: gamma.len(),
        });
    }
    let mut prefix = Vec::with_capacity(gamma.len());
    let inner = nested_moment(region, gamma, &mut prefix)?;
    let value = (2.0 * PI).powi(gamma.len() as i32) * inner;
    if !(value.is_finite() && value > 0.0) {
        return Err(LabError::NormUnderflow(format!("monomial norm {value} for gamma {gamma:?}")));
    }
    Ok(value)
}

fn nested_moment(region: &Region, gamma: &[u16], prefix: &mut Vec<f64>) -> Result<f64> {
    let j = prefix.len();
    let b = coordinate_bound(region, prefix);
    if b <= 0.0 {
        return Ok(0.0);
    }
    let g = gamma[j] as i32;
    if j + 1 == gamma.len() {
        return Ok(b.powi(2 * g + 2) / (2 * g + 2) as f64);
    }
    let failure: RefCell<Option<LabError>> = RefCell::new(None);
    let stack = RefCell::new(prefix.clone());
    let tol = QuadTolerance {
        abs: 0.0,
        rel: NORM_REL_TOL * 0.1f64.powi(j as i32),
        max_intervals: 20_000,
    };
    let result = integrate(
        |t| {
            let mut p = stack.borrow_mut();
            p.truncate(j);
            p.push(t);
            match nested_moment(region, gamma, &mut p) {
                Ok(v) => t.powi(2 * g + 1) * v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        b,
        tol,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(result.value)
}

/// `‖z^γ‖²` on a domain given by its shadow.
pub fn monomial_norm(domain: &RadialProfile, gamma: &[u16]) -> Result<f64> {
    shadow_moment(&Region::Domain(domain.clone()), gamma)
}

/// Multi-indices of total degree exactly `d` in `n` variables, lexicographically descending.
pub fn shell(n: usize, d: usize) -> Vec<Vec<u16>> {
    fn rec(n: usize, d: usize, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if cur.len() + 1 == n {
            cur.push(d as u16);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=d).rev() {
            cur.push(e as u16);
            rec(n, d - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(n, d, &mut Vec::new(), &mut out);
    out
}

/// `K(z;ζ̄) = Σ_{|γ| ≤ D} z^γ ζ̄^γ / ‖z^γ‖²`, the orthogonal-monomial oracle.
#[derive(Debug, Clone)]
pub struct MonomialSeries {
    region: Region,
    degree: usize,
    terms: Vec<(Vec<u16>, f64)>,
    shells: Vec<std::ops::Range<usize>>,
}

/// A series value and its diagonal tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    pub tail_bound: f64,
    pub truncation_warning: bool,
}

impl MonomialSeries {
    pub fn new(region: Region, degree: usize, cache: &NormCache) -> Result<Self> {
        let mut s = Self {
            region,
            degree: 0,
            terms: Vec::new(),
            shells: Vec::new(),
        };
        for d in 0..=degree {
            s.push_shell(d, cache)?;
        }
        Ok(s)
    }

    /// Truncation degree from the diagonal-tail rule at every point in `points`.
    pub fn with_tail_rule(region: Region, points: &[Vec<Complex64>], max_degree: usize, cache: &NormCache) -> Result<Self> {
        let moduli: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|c| c.norm()).collect()).collect();
        let mut s = Self::new(region, 2, cache)?;
        loop {
            if s.degree >= 4 && moduli.iter().all(|t| s.diagonal_tail(t) <= TAIL_REL_TOL * s.diagonal(t)) {
                return Ok(s);
            }
            if s.degree >= max_degree {
                return Err(LabError::UnsupportedOrder {
                    requested: s.degree + 1,
                    supported: max_degree,
                });
            }
            s.push_shell(s.degree + 1, cache)?;
        }
    }

    fn push_shell(&mut self, d: usize, cache: &NormCache) -> Result<()> {
        let key = region_key(&self.region);
        let gammas = shell(self.region.dim(), d);
        let norms: Vec<Result<f64>> = gammas
            .par_iter()
            .map(|g| match cache.get(&key, g) {
                Some(v) => Ok(v),
                None => {
                    let v = shadow_moment(&self.region, g)?;
                    cache.insert(&key, g, v);
                    Ok(v)
                }
            })
            .collect();
        let start = self.terms.len();
        for (g, n) in gammas.into_iter().zip(norms) {
            self.terms.push((g, n?));
        }
        self.shells.push(start..self.terms.len());
        self.degree = d;
        Ok(())
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn norms(&self) -> impl Iterator<Item = (&[u16], f64)> {
        self.terms.iter().map(|(g, n)| (g.as_slice(), *n))
    }

    fn shell_sum(&self, d: usize, t: &[f64]) -> f64 {
        self.terms[self.shells[d].clone()]
            .iter()
            .map(|(g, n)| g.iter().zip(t).map(|(&e, t)| t.powi(2 * e as i32)).product::<f64>() / n)
            .sum()
    }

    /// `K_D(t; t)` on the modulus vector `t`.
    pub fn diagonal(&self, t: &[f64]) -> f64 {
        (0..=self.degree).map(|d| self.shell_sum(d, t)).sum()
    }

    /// Geometric extrapolation of the omitted shells from the last two.
    pub fn diagonal_tail(&self, t: &[f64]) -> f64 {
        let last = self.shell_sum(self.degree, t);
        let prev = self.shell_sum(self.degree - 1, t);
        if last == 0.0 {
            return 0.0;
        }
        let q = last / prev;
        if !(q < 1.0) {
            return f64::INFINITY;
        }
        last * q / (1.0 - q)
    }

    pub fn eval(&self, z: &[Complex64], zeta: &[Complex64]) -> Complex64 {
        let zp = power_table(z, self.degree);
        let cp = power_table(&zeta.iter().map(|c| c.conj()).collect::<Vec<_>>(), self.degree);
        self.terms
            .iter()
            .map(|(g, n)| {
                let mut v = Complex64::new(1.0 / n, 0.0);
                for (j, &e) in g.iter().enumerate() {
                    v *= zp[j][e as usize] * cp[j][e as usize];
                }
                v
            })
            .sum()
    }

    /// Value with the Cauchy–Schwarz tail bound `sqrt(tail(z) tail(ζ))`.
    pub fn eval_with_tail(&self, z: &[Complex64], zeta: &[Complex64]) -> SeriesValue {
        let value = self.eval(z, zeta);
        let tz: Vec<f64> = z.iter().map(|c| c.norm()).collect();
        let tw: Vec<f64> = zeta.iter().map(|c| c.norm()).collect();
        let tail_bound = (self.diagonal_tail(&tz) * self.diagonal_tail(&tw)).sqrt();
        SeriesValue {
            value,
            tail_bound,
            truncation_warning: !(tail_bound <= TAIL_REL_TOL * value.norm()),
        }
    }

    pub fn eval_jets(&self, z: &[Jet], zeta: &[Complex64]) -> Result<Jet> {
        let layout = z[0].layout().clone();
        if layout.order() > self.degree {
            return Err(LabError::UnsupportedOrder {
                requested: layout.order(),
                supported: self.degree,
            });
        }
        let mut zp: Vec<Vec<Jet>> = Vec::with_capacity(z.len());
        for zj in z {
            let mut row = vec![Jet::constant(&layout, Complex64::new(1.0, 0.0))];
            for e in 1..=self.degree {
                let next = row[e - 1].mul_jet(zj);
                row.push(next);
            }
            zp.push(row);
        }
        let cp = power_table(&zeta.iter().map(|c| c.conj()).collect::<Vec<_>>(), self.degree);
        let mut out = Jet::zero(&layout);
        for (g, n) in &self.terms {
            let mut scalar = Complex64::new(1.0 / n, 0.0);
            let mut term: Option<Jet> = None;
            for (j, &e) in g.iter().enumerate() {
                scalar *= cp[j][e as usize];
                if e > 0 {
                    let f = &zp[j][e as usize];
                    term = Some(match term {
                        None => f.clone(),
                        Some(t) => t.mul_jet(f),
                    });
                }
            }
            out = out + match term {
                None => Jet::constant(&layout, scalar),
                Some(t) => t.scale(scalar),
            };
        }
        Ok(out)
    }
}

fn power_table(z: &[Complex64], degree: usize) -> Vec<Vec<Complex64>> {
    z.iter()
        .map(|zj| {
            let mut row = vec![Complex64::new(1.0, 0.0)];
            for e in 1..=degree {
                row.push(row[e - 1] * zj);
            }
            row
        })
        .collect()
}
