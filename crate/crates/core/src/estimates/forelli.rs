use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::sampling::rng_for;
use crate::domain::{inner, norm_sqr, SampleScheme};
use crate::error::{LabError, Result};
use crate::quadrature::{integrate_breaks, QuadTolerance};
use crate::report::{Check, EstimateReport};
use crate::stats::linear_fit;

const INNER_TOL: QuadTolerance = QuadTolerance {
    abs: 0.0,
    rel: 1e-12,
    max_intervals: 4000,
};
const OUTER_TOL: QuadTolerance = QuadTolerance {
    abs: 0.0,
    rel: 1e-10,
    max_intervals: 4000,
};

/// `∫₀^{2π} |1 − x e^{iθ}|^{−c} dθ` for `0 ≤ x < 1`.
pub fn angular_integral(x: f64, c: f64) -> Result<f64> {
    let gap = (1.0 - x).max(1e-300);
    let mut breaks = vec![0.0];
    let mut b = gap;
    while b < PI {
        breaks.push(b);
        b *= 4.0;
    }
    breaks.push(PI);
    let f = |t: f64| {
        let s = (0.5 * t).sin();
        // |1 − x e^{it}|² = (1 − x)² + 4x sin²(t/2)
        (gap * gap + 4.0 * x * s * s).powf(-0.5 * c)
    };
    Ok(2.0 * integrate_breaks(f, &breaks, INNER_TOL)?.value)
}

fn beta_fn(a: f64, b: f64) -> f64 {
    // B(a, b) by the reflection-free product for the small arguments used here.
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Lanczos approximation of `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `a_{ε,δ}(w) = ∫_{𝔹^k} (1 − ‖η‖²)^{−ε} |1 − ⟨w,η⟩|^{−(1+k−ε−δ)} dV(η)`.
///
/// Rotating `w` onto the first axis and integrating out `η′ ∈ ℂ^{k−1}` leaves
/// `F ∫₀¹ r (1 − r²)^{k−1−ε} Θ(‖w‖r) dr`; the substitution
/// `y = (1 − r²)^{k−ε}` removes the endpoint singularity.
pub fn forelli_rudin_a(eps: f64, delta: f64, w: &[Complex64]) -> Result<f64> {
    let k = w.len();
    if k == 0 {
        return Err(LabError::InvalidParameter("k must be >= 1".into()));
    }
    if !(eps < 1.0) {
        return Err(LabError::InvalidParameter("epsilon must be < 1".into()));
    }
    let w2 = norm_sqr(w);
    if w2 >= 1.0 {
        return Err(LabError::OutsideFiberBall { norm: w2.sqrt() });
    }
    let wn = w2.sqrt();
    let c = 1.0 + k as f64 - eps - delta;
    let kf = k as f64;
    let fiber = if k == 1 {
        1.0
    } else {
        PI.powi(k as i32 - 1) / (ln_gamma(kf - 1.0).exp()) * beta_fn(kf - 1.0, 1.0 - eps)
    };
    let p = kf - eps;
    let mut breaks = vec![0.0];
    let mut g = (1.0 - w2).max(1e-300);
    while g.powf(p) < 1.0 {
        breaks.push(g.powf(p));
        g *= 4.0;
    }
    breaks.push(1.0);
    let failure = std::cell::RefCell::new(None);
    let f = |y: f64| {
        let x = y.powf(1.0 / p);
        let r = (1.0 - x).max(0.0).sqrt();
        match angular_integral(wn * r, c) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let value = integrate_breaks(f, &breaks, OUTER_TOL)?.value;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(fiber * value / (2.0 * p))
}

/// `a_{ε,δ}(0) = π^k B(k, 1 − ε)/(k − 1)!`.
pub fn forelli_rudin_a_at_center(eps: f64, k: usize) -> f64 {
    let kf = k as f64;
    PI.powi(k as i32) / ln_gamma(kf).exp() * beta_fn(kf, 1.0 - eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `b_δ(w) = ∫_{𝕊^k} |1 − ⟨w,η⟩|^{−(k−δ)} dσ(η)` by normalized Gaussian samples.
pub fn forelli_rudin_b(delta: f64, w: &[Complex64], scheme: &SampleScheme) -> Result<McEstimate> {
    scheme.validate()?;
    let k = w.len();
    if norm_sqr(w) >= 1.0 {
        return Err(LabError::OutsideFiberBall { norm: norm_sqr(w).sqrt() });
    }
    let area = 2.0 * PI.powi(k as i32) / ln_gamma(k as f64).exp();
    let mut rng = rng_for(scheme.seed, &[0xb5, k as u64]);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..scheme.samples {
        let g: Vec<Complex64> = (0..k)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let n = norm_sqr(&g).sqrt();
        let eta: Vec<Complex64> = g.iter().map(|x| x / n).collect();
        let v = (Complex64::new(1.0, 0.0) - inner(w, &eta)).norm().powf(-(k as f64 - delta));
        s += v;
        s2 += v * v;
    }
    let n = scheme.samples as f64;
    let mean = s / n;
    let var = if n > 1.0 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate {
        value: area * mean,
        std_error: area * (var / n).sqrt(),
    })
}

/// Parameters of the asymptotic sweep in `‖w‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSweep {
    pub k: usize,
    pub eps: f64,
    pub deltas: Vec<f64>,
    /// Values of `1 − ‖w‖²`.
    pub gaps: Vec<f64>,
    pub slope_tol: f64,
    pub r_squared_min: f64,
    pub bounded_ratio_max: f64,
    /// Sphere samples for `b_δ`; zero skips it.
    pub sphere_samples: usize,
    pub seed: u64,
}

impl AsymptoticSweep {
    pub fn default_for(k: usize) -> Self {
        Self {
            k,
            eps: 0.9,
            deltas: vec![-0.5, -0.25, 0.0, 0.25],
            gaps: vec![1e-1, 1e-2, 1e-3, 0.5f64.powi(12)],
            slope_tol: 0.05,
            r_squared_min: 0.99,
            bounded_ratio_max: 2.0,
            sphere_samples: 0,
            seed: 0,
        }
    }
}

/// Regression of `a_{ε,δ}` along `‖w‖ → 1` against the three regimes:
/// power `(1−‖w‖²)^δ` for `δ < 0`, `−log(1−‖w‖²)` for `δ = 0`, bounded for `δ > 0`.
pub fn asymptotic_sweep(sweep: &AsymptoticSweep) -> Result<EstimateReport> {
    let mut report = EstimateReport::new(
        "lemma34",
        "Forelli-Rudin asymptotics",
        "a_{eps,delta}(w), b_delta(w): ~(1-|w|^2)^delta for delta<0, ~-log(1-|w|^2) for delta=0, bounded for delta>0",
        &["delta", "one_minus_w2", "a", "b", "b_std_error"],
    );
    report.param("k", sweep.k);
    report.param("eps", sweep.eps);
    report.param("gaps", &sweep.gaps);
    report.param("slope_tol", sweep.slope_tol);
    report.param("r_squared_min", sweep.r_squared_min);
    report.param("bounded_ratio_max", sweep.bounded_ratio_max);
    report.param("sphere_samples", sweep.sphere_samples);
    report.param("seed", sweep.seed);
    let mut gaps = sweep.gaps.clone();
    gaps.sort_by(|a, b| b.total_cmp(a));
    for &delta in &sweep.deltas {
        let mut a_vals = Vec::new();
        let mut b_vals = Vec::new();
        for &gap in &gaps {
            let mut w = vec![Complex64::new(0.0, 0.0); sweep.k];
            w[0] = Complex64::new((1.0 - gap).sqrt(), 0.0);
            let a = forelli_rudin_a(sweep.eps, delta, &w)?;
            let b = if sweep.sphere_samples > 0 {
                forelli_rudin_b(delta, &w, &SampleScheme::new(sweep.sphere_samples, sweep.seed))?
            } else {
                McEstimate {
                    value: f64::NAN,
                    std_error: f64::NAN,
                }
            };
            report.table.push(vec![delta.into(), gap.into(), a.into(), b.value.into(), b.std_error.into()]);
            a_vals.push(a);
            b_vals.push(b);
        }
        let tag = format!("delta={delta}");
        if delta <= 0.0 {
            let monotone = a_vals.windows(2).all(|p| p[1] >= p[0]);
            report.check(Check::at_least(format!("a_nondecreasing {tag}"), monotone as u8 as f64, 1.0));
            if sweep.sphere_samples > 0 {
                let ok = b_vals.windows(2).all(|p| p[1].value + 3.0 * p[1].std_error >= p[0].value - 3.0 * p[0].std_error);
                report.check(Check::at_least(format!("b_nondecreasing {tag}"), ok as u8 as f64, 1.0));
            }
        }
        if delta < 0.0 {
            let x: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
            let y: Vec<f64> = a_vals.iter().map(|a| a.ln()).collect();
            let fit = linear_fit(&x, &y);
            report.param(&format!("slope {tag}"), fit.slope);
            report.check(Check::within(format!("power_slope {tag}"), fit.slope, delta, sweep.slope_tol));
        } else if delta == 0.0 {
            let x: Vec<f64> = gaps.iter().map(|g| -g.ln()).collect();
            let fit = linear_fit(&x, &a_vals);
            report.param(&format!("log_fit_slope {tag}"), fit.slope);
            report.check(Check::at_least(format!("log_fit_r_squared {tag}"), fit.r_squared, sweep.r_squared_min));
            report.check(Check::above(format!("log_fit_slope_positive {tag}"), fit.slope, 0.0));
        } else {
            let max = a_vals.iter().copied().fold(f64::MIN, f64::max);
            let min = a_vals.iter().copied().fold(f64::MAX, f64::min);
            report.check(Check::at_most(format!("bounded_max_over_min {tag}"), max / min, sweep.bounded_ratio_max));
        }
    }
    Ok(report)
}
