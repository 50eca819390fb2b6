use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::jet::{multi_factorial, Jet, JetLayout};

/// Coefficients `c_β` of `∏_{l=1..k} (l + Σ_j α_j (1 + z_j∂_j)) = Σ_β c_β z^β D^β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorExpansion {
    alpha: Vec<f64>,
    k: usize,
    coeffs: BTreeMap<Vec<u8>, f64>,
}

/// Stirling numbers of the second kind `S(m, s)` for `m ≤ max`.
pub fn stirling2(max: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; max + 1]; max + 1];
    s[0][0] = 1.0;
    for m in 1..=max {
        for j in 1..=m {
            s[m][j] = j as f64 * s[m - 1][j] + s[m - 1][j - 1];
        }
    }
    s
}

pub fn expand_operator(alpha: &[f64], k: usize) -> Result<OperatorExpansion> {
    if k == 0 {
        return Err(LabError::InvalidParameter("k must be >= 1".into()));
    }
    let n = alpha.len();
    let total: f64 = alpha.iter().sum();
    // P(θ) = ∏ (l + |α| + Σ α_j θ_j) in commuting Euler operators θ_j.
    let mut poly: BTreeMap<Vec<u8>, f64> = BTreeMap::from([(vec![0u8; n], 1.0)]);
    for l in 1..=k {
        let mut next: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
        for (m, p) in &poly {
            *next.entry(m.clone()).or_default() += p * (l as f64 + total);
            for (j, a) in alpha.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let mut e = m.clone();
                e[j] += 1;
                *next.entry(e).or_default() += p * a;
            }
        }
        poly = next;
    }
    // θ^m = Σ_s S(m, s) z^s ∂^s, coordinatewise.
    let s = stirling2(k);
    let mut coeffs: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    for (m, p) in &poly {
        let mut betas: Vec<(Vec<u8>, f64)> = vec![(Vec::new(), *p)];
        for &mj in m {
            let mut grown = Vec::new();
            for (b, c) in &betas {
                for bj in 0..=mj {
                    let st = s[mj as usize][bj as usize];
                    if st == 0.0 {
                        continue;
                    }
                    let mut e = b.clone();
                    e.push(bj);
                    grown.push((e, c * st));
                }
            }
            betas = grown;
        }
        for (b, c) in betas {
            *coeffs.entry(b).or_default() += c;
        }
    }
    coeffs.retain(|_, c| *c != 0.0);
    Ok(OperatorExpansion {
        alpha: alpha.to_vec(),
        k,
        coeffs,
    })
}

impl OperatorExpansion {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<u8>, f64> {
        &self.coeffs
    }

    pub fn coeff(&self, beta: &[u8]) -> f64 {
        self.coeffs.get(beta).copied().unwrap_or(0.0)
    }

    /// `Σ_β c_β (z₀+x)^β D^β f` for a jet `f` at `z0`; the result has order `order − k`.
    pub fn apply(&self, f: &Jet, z0: &[Complex64]) -> Result<Jet> {
        let order = f.layout().order();
        if order < self.k {
            return Err(LabError::UnsupportedOrder {
                requested: self.k,
                supported: order,
            });
        }
        let n = self.alpha.len();
        let out_layout = JetLayout::get(n, order - self.k);
        let vars = coordinate_jets(&out_layout, z0);
        let mut out = Jet::zero(&out_layout);
        for (beta, c) in &self.coeffs {
            let mut d = f.clone();
            for (j, &b) in beta.iter().enumerate() {
                for _ in 0..b {
                    d = d.derivative(j);
                }
            }
            let mut term = d.truncate(out_layout.order());
            for (j, &b) in beta.iter().enumerate() {
                term = term.mul_jet(&vars[j].powi(b as i32));
            }
            out = out + term.scale(Complex64::new(*c, 0.0));
        }
        Ok(out)
    }

    /// The same operator applied factor by factor, `(l + |α|) f + Σ α_j z_j ∂_j f`.
    pub fn apply_sequential(&self, f: &Jet, z0: &[Complex64]) -> Result<Jet> {
        let order = f.layout().order();
        if order < self.k {
            return Err(LabError::UnsupportedOrder {
                requested: self.k,
                supported: order,
            });
        }
        let total: f64 = self.alpha.iter().sum();
        let mut g = f.clone();
        for l in 1..=self.k {
            let lower = JetLayout::get(self.alpha.len(), g.layout().order() - 1);
            let vars = coordinate_jets(&lower, z0);
            let mut next = g.truncate(lower.order()).scale(Complex64::new(l as f64 + total, 0.0));
            for (j, a) in self.alpha.iter().enumerate() {
                next = next + vars[j].mul_jet(&g.derivative(j)).scale(Complex64::new(*a, 0.0));
            }
            g = next;
        }
        Ok(g)
    }

    /// `Σ_β c_β β! h^β g_β` where `g_β` is the `δ^β` coefficient of `G(h + δ)`.
    pub(crate) fn contract(&self, h: &[Jet], lifted: &Jet) -> Jet {
        let layout = h[0].layout().clone();
        let leading = layout.nvars();
        let mut out = Jet::zero(&layout);
        for (beta, c) in &self.coeffs {
            let mut term = lifted.extract(leading, beta).truncate(layout.order());
            for (hj, &b) in h.iter().zip(beta) {
                if b > 0 {
                    term = term.mul_jet(&hj.powi(b as i32));
                }
            }
            out = out + term.scale(Complex64::new(c * multi_factorial(beta), 0.0));
        }
        out
    }
}

fn coordinate_jets(layout: &Arc<JetLayout>, z0: &[Complex64]) -> Vec<Jet> {
    z0.iter()
        .enumerate()
        .map(|(j, z)| Jet::variable(layout, j, *z))
        .collect()
}
