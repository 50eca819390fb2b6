//! Truncated multivariate Taylor polynomials ("jets") with complex coefficients.
//!
//! A [`Jet`] over `nvars` variables and total order `order` stores the Taylor
//! coefficients `c_γ` of `f(x₀ + x) = Σ_{|γ| ≤ order} c_γ x^γ`. Arithmetic is
//! exact up to the truncation order, so mixed holomorphic partials are read off
//! as `D^γ f(x₀) = γ! c_γ` without any finite differencing.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

/// Monomial bookkeeping shared by every jet with the same `(nvars, order)`.
pub struct JetLayout {
    nvars: usize,
    order: usize,
    monomials: Vec<Vec<u8>>,
    degrees: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    products: Vec<(u32, u32, u32)>,
}

impl JetLayout {
    fn build(nvars: usize, order: usize) -> Self {
        let mut monomials = Vec::new();
        for total in 0..=order {
            let mut current = vec![0u8; nvars];
            push_compositions(total, 0, &mut current, &mut monomials);
            if nvars == 0 {
                break;
            }
        }
        let degrees: Vec<usize> = monomials
            .iter()
            .map(|m| m.iter().map(|&e| e as usize).sum())
            .collect();
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if degrees[i] + degrees[j] > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, index[&sum] as u32));
            }
        }
        Self {
            nvars,
            order,
            monomials,
            degrees,
            index,
            products,
        }
    }

    /// Shared layout for `(nvars, order)`; layouts are built once per process.
    pub fn get(nvars: usize, order: usize) -> Arc<JetLayout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetLayout>>>> = OnceLock::new();
        let order = if nvars == 0 { 0 } else { order };
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet layout cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetLayout::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monomials
    }

    pub fn index_of(&self, exponents: &[u8]) -> Option<usize> {
        self.index.get(exponents).copied()
    }
}

fn push_compositions(remaining: usize, pos: usize, current: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos == current.len() {
        if remaining == 0 {
            out.push(current.clone());
        }
        return;
    }
    if pos + 1 == current.len() {
        current[pos] = remaining as u8;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e as u8;
        push_compositions(remaining - e, pos + 1, current, out);
    }
    current[pos] = 0;
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Multi-index factorial `γ! = Π γ_j!`.
pub fn multi_factorial(gamma: &[u8]) -> f64 {
    gamma.iter().map(|&g| factorial(g as usize)).product()
}

#[derive(Clone)]
pub struct Jet {
    layout: Arc<JetLayout>,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.layout.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn zero(layout: &Arc<JetLayout>) -> Self {
        Self {
            layout: layout.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); layout.len()],
        }
    }

    pub fn constant(layout: &Arc<JetLayout>, value: Complex64) -> Self {
        let mut jet = Self::zero(layout);
        jet.coeffs[0] = value;
        jet
    }

    /// The coordinate function `x₀ + x_var` expanded at `base`.
    pub fn variable(layout: &Arc<JetLayout>, var: usize, base: Complex64) -> Self {
        assert!(var < layout.nvars, "variable index out of range");
        let mut jet = Self::constant(layout, base);
        if layout.order >= 1 {
            let mut e = vec![0u8; layout.nvars];
            e[var] = 1;
            jet.coeffs[layout.index[&e]] = Complex64::new(1.0, 0.0);
        }
        jet
    }

    pub fn from_coeffs(layout: &Arc<JetLayout>, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), layout.len(), "coefficient count mismatch");
        Self {
            layout: layout.clone(),
            coeffs,
        }
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn coeff(&self, exponents: &[u8]) -> Complex64 {
        self.layout
            .index_of(exponents)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Mixed partial `D^γ f(x₀) = γ! c_γ`.
    pub fn partial(&self, exponents: &[u8]) -> Complex64 {
        self.coeff(exponents) * multi_factorial(exponents)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add_const(mut self, c: Complex64) -> Self {
        self.coeffs[0] += c;
        self
    }

    fn check_layout(&self, other: &Jet) {
        assert!(
            Arc::ptr_eq(&self.layout, &other.layout)
                || (self.layout.nvars == other.layout.nvars && self.layout.order == other.layout.order),
            "jet layout mismatch"
        );
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        self.check_layout(other);
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len()];
        for &(i, j, k) in &self.layout.products {
            out[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet {
            layout: self.layout.clone(),
            coeffs: out,
        }
    }

    /// Principal-branch power `f^p` via the binomial series around `f(x₀)`.
    pub fn powc(&self, p: Complex64) -> Jet {
        let a = self.value();
        let lead = a.powc(p);
        let mut g = self.clone();
        g.coeffs[0] = Complex64::new(0.0, 0.0);
        let g = g.scale(a.inv());
        let mut out = Jet::constant(&self.layout, Complex64::new(1.0, 0.0));
        let mut power = Jet::constant(&self.layout, Complex64::new(1.0, 0.0));
        let mut binom = Complex64::new(1.0, 0.0);
        for m in 1..=self.layout.order {
            power = power.mul_jet(&g);
            binom = binom * (p - (m as f64 - 1.0)) / m as f64;
            for (o, c) in out.coeffs.iter_mut().zip(&power.coeffs) {
                *o += binom * c;
            }
        }
        out.scale(lead)
    }

    pub fn powf(&self, p: f64) -> Jet {
        self.powc(Complex64::new(p, 0.0))
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n >= 0 {
            let mut out = Jet::constant(&self.layout, Complex64::new(1.0, 0.0));
            for _ in 0..n {
                out = out.mul_jet(self);
            }
            out
        } else {
            self.recip().powi(-n)
        }
    }

    pub fn recip(&self) -> Jet {
        self.powc(Complex64::new(-1.0, 0.0))
    }

    /// `∂f/∂x_var`, returned at order `order - 1`.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(var < self.layout.nvars);
        let lower = JetLayout::get(self.layout.nvars, self.layout.order.saturating_sub(1));
        let mut out = Jet::zero(&lower);
        for (i, m) in self.layout.monomials.iter().enumerate() {
            if m[var] == 0 || self.layout.degrees[i] > lower.order + 1 {
                continue;
            }
            let mut e = m.clone();
            e[var] -= 1;
            if let Some(k) = lower.index_of(&e) {
                out.coeffs[k] += self.coeffs[i] * m[var] as f64;
            }
        }
        out
    }

    /// Restriction to a lower total order.
    pub fn truncate(&self, order: usize) -> Jet {
        let lower = JetLayout::get(self.layout.nvars, order.min(self.layout.order));
        let coeffs = lower
            .monomials
            .iter()
            .map(|m| self.coeffs[self.layout.index[m]])
            .collect();
        Jet {
            layout: lower,
            coeffs,
        }
    }

    /// Embeds this jet into a layout with `extra` trailing variables of total order `order`.
    pub fn lift(&self, extra: usize, order: usize) -> Jet {
        let wide = JetLayout::get(self.layout.nvars + extra, order);
        let mut out = Jet::zero(&wide);
        for (i, m) in self.layout.monomials.iter().enumerate() {
            if self.layout.degrees[i] > order {
                continue;
            }
            let mut e = m.clone();
            e.extend(std::iter::repeat_n(0, extra));
            out.coeffs[wide.index[&e]] = self.coeffs[i];
        }
        out
    }

    /// Coefficient series of `δ^β` in the trailing variables, as a jet in the
    /// leading `leading` variables of order `order - |β|`.
    pub fn extract(&self, leading: usize, beta: &[u8]) -> Jet {
        assert_eq!(leading + beta.len(), self.layout.nvars);
        let beta_deg: usize = beta.iter().map(|&b| b as usize).sum();
        let order = self.layout.order.saturating_sub(beta_deg);
        let narrow = JetLayout::get(leading, order);
        let mut out = Jet::zero(&narrow);
        for (k, m) in narrow.monomials.iter().enumerate() {
            let mut e = m.clone();
            e.extend_from_slice(beta);
            if let Some(i) = self.layout.index_of(&e) {
                out.coeffs[k] = self.coeffs[i];
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Jet) -> f64 {
        self.check_layout(other);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.check_layout(rhs);
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.check_layout(rhs);
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs)
    }
}
