use std::f64::consts::PI;

use bergman_lab::domain::{DefiningFunction, RadialProfile, SampleScheme, SuccessorSpec};
use bergman_lab::estimates::forelli::ln_gamma;
use bergman_lab::estimates::regularity::finalize;
use bergman_lab::estimates::*;
use bergman_lab::kernel::KernelModel;
use bergman_lab::report::{merge_reports, ReportHeader, Verdict};
use bergman_lab::C64;
use proptest::prelude::*;

fn disc_setup() -> (KernelModel, WeightFunction) {
    let disc = RadialProfile::unit_disc();
    let kernel = KernelModel::closed_form(&disc).unwrap();
    let h = WeightFunction::neg_rho(DefiningFunction::signed_distance(disc).unwrap());
    (kernel, h)
}

fn ball_successor_setup() -> (KernelModel, WeightFunction) {
    let disc = RadialProfile::unit_disc();
    let spec = SuccessorSpec::new(vec![1.0], 1).unwrap();
    let kernel = KernelModel::successor(KernelModel::closed_form(&disc).unwrap(), spec.clone()).unwrap();
    let h = WeightFunction::successor(spec, DefiningFunction::signed_distance(disc).unwrap()).unwrap();
    (kernel, h)
}

fn small_probe(seed: u64) -> RegularityProbe {
    RegularityProbe {
        eps_grid: vec![0.2, 0.5, 0.8],
        depth: 8,
        layers: 32,
        samples_per_layer: 2000,
        seed,
        ..Default::default()
    }
}

/// Series for `a_{ε,δ}(w)`: expand `|1 − ⟨w,η⟩|^{−c}` in powers of `⟨w,η⟩`
/// and integrate term by term against the ball moments
/// `∫ |η₁|^{2n} (1 − ‖η‖²)^{−ε} dV = π^k n! Γ(1−ε)/Γ(n+k+1−ε)`.
fn a_series(eps: f64, delta: f64, k: usize, w2: f64) -> f64 {
    let kf = k as f64;
    let half_c = 0.5 * (1.0 + kf - eps - delta);
    let mut term = PI.powi(k as i32) * (ln_gamma(1.0 - eps) - ln_gamma(kf + 1.0 - eps)).exp();
    let mut sum = term;
    for n in 0..1_000_000 {
        let nf = n as f64;
        term *= (half_c + nf).powi(2) / ((nf + 1.0) * (nf + kf + 1.0 - eps)) * w2;
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

/// Same expansion on the sphere: `∫_{𝕊^k} |η₁|^{2n} dσ = 2π^k n!/(n+k−1)!`.
fn b_series(delta: f64, k: usize, w2: f64) -> f64 {
    let kf = k as f64;
    let half_c = 0.5 * (kf - delta);
    let mut term = 2.0 * PI.powi(k as i32) / ln_gamma(kf).exp();
    let mut sum = term;
    for n in 0..1_000_000 {
        let nf = n as f64;
        term *= (half_c + nf).powi(2) / ((nf + 1.0) * (nf + kf)) * w2;
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

fn on_axis(k: usize, w2: f64) -> Vec<C64> {
    let mut w = vec![C64::new(0.0, 0.0); k];
    w[0] = C64::new(w2.sqrt(), 0.0);
    w
}

#[test]
fn volume_integral_matches_series() {
    for k in 1..=3 {
        for &(eps, delta) in &[(0.5, -0.5), (0.9, -0.25), (0.3, 0.0), (0.7, 0.25)] {
            for &w2 in &[0.0, 0.5, 0.9, 0.99] {
                let got = forelli_rudin_a(eps, delta, &on_axis(k, w2)).unwrap();
                let exp = a_series(eps, delta, k, w2);
                assert!((got / exp - 1.0).abs() < 1e-8, "k={k} eps={eps} delta={delta} w2={w2}: {got} vs {exp}");
            }
        }
    }
}

#[test]
fn volume_integral_depends_on_norm_only() {
    let w = vec![C64::new(0.3, 0.4), C64::new(-0.2, 0.5)];
    let w2: f64 = w.iter().map(|x| x.norm_sqr()).sum();
    let a = forelli_rudin_a(0.4, -0.1, &w).unwrap();
    assert!((a / a_series(0.4, -0.1, 2, w2) - 1.0).abs() < 1e-8);
}

#[test]
fn sphere_integral_matches_series() {
    for k in 1..=3 {
        for &(delta, w2) in &[(-0.5, 0.5), (0.0, 0.8), (0.25, 0.9)] {
            let b = forelli_rudin_b(delta, &on_axis(k, w2), &SampleScheme::new(400_000, 11)).unwrap();
            let exp = b_series(delta, k, w2);
            assert!(
                (b.value - exp).abs() < 4.0 * b.std_error,
                "k={k} delta={delta}: {} ± {} vs {exp}",
                b.value,
                b.std_error
            );
        }
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(forelli_rudin_a(1.0, 0.0, &on_axis(1, 0.5)).is_err());
    assert!(forelli_rudin_a(0.5, 0.0, &[C64::new(1.0, 0.0)]).is_err());
    assert!(forelli_rudin_b(0.0, &[C64::new(1.0, 0.0)], &SampleScheme::new(10, 0)).is_err());
}

#[test]
fn asymptotic_regimes_in_dimension_one() {
    let report = asymptotic_sweep(&AsymptoticSweep::default_for(1)).unwrap();
    assert_eq!(report.verdict(), Verdict::Pass, "{:?}", report.checks);
}

#[test]
fn log_regime_ratio_stabilizes() {
    let ratios: Vec<f64> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|g: &f64| forelli_rudin_a(0.5, 0.0, &on_axis(1, 1.0 - g)).unwrap() / -g.ln())
        .collect();
    assert!(ratios.iter().all(|r| *r > 0.0));
    assert!((ratios[2] / ratios[1] - 1.0).abs() < (ratios[1] / ratios[0] - 1.0).abs());
}

#[test]
fn sphere_integral_is_monotone_on_grid() {
    let mut sweep = AsymptoticSweep::default_for(2);
    sweep.deltas = vec![-0.5, 0.0];
    sweep.sphere_samples = 100_000;
    let report = asymptotic_sweep(&sweep).unwrap();
    for c in report.checks.iter().filter(|c| c.name.contains("nondecreasing")) {
        assert_eq!(c.verdict, Verdict::Pass, "{}", c.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn volume_integral_is_monotone_for_nonpositive_delta(
        eps in 0.05f64..0.95, delta in -0.6f64..=0.0, a in 0.0f64..0.98, b in 0.0f64..0.98, k in 1usize..=2,
    ) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let f_lo = forelli_rudin_a(eps, delta, &on_axis(k, lo)).unwrap();
        let f_hi = forelli_rudin_a(eps, delta, &on_axis(k, hi)).unwrap();
        prop_assert!(f_hi >= f_lo * (1.0 - 1e-10));
    }

    #[test]
    fn mobius_involution_and_center(re in prop::collection::vec(-0.5f64..0.5, 6), k in 1usize..=3) {
        let w: Vec<C64> = (0..k).map(|j| C64::new(re[2 * j], re[2 * j + 1])).collect();
        prop_assume!(w.iter().map(|x| x.norm_sqr()).sum::<f64>() > 1e-6);
        let map = MobiusMap::new(w.clone()).unwrap();
        let z: Vec<C64> = w.iter().map(|x| x * C64::new(0.3, -0.7)).collect();
        let back = map.apply(&map.apply(&z).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&z) {
            prop_assert!((a - b).norm() < 1e-12);
        }
        let zero = vec![C64::new(0.0, 0.0); k];
        for (a, b) in map.apply(&zero).unwrap().iter().zip(&w) {
            prop_assert!((a - b).norm() < 1e-15);
        }
    }
}

#[test]
fn mobius_suites_pass() {
    for k in 1..=3 {
        let ids = identity_check(k, &SampleScheme::new(1000, 3), 1e-12, SAMPLE_RADIUS).unwrap();
        assert!(ids.passed(), "{:?}", ids.checks);
        let bounds = elementary_bounds_check(k, &SampleScheme::new(100_000, 3)).unwrap();
        assert!(bounds.passed(), "{:?}", bounds.checks);
    }
}

#[test]
fn elementary_bound_trivial_cases() {
    let eta = [C64::new(0.6, 0.3)];
    let n: f64 = 1.0 - eta[0].norm_sqr();
    assert!((n / (C64::new(1.0, 0.0) - eta[0] * eta[0].conj()).norm() - 1.0).abs() < 1e-15);
}

#[test]
fn radial_reduction_on_disc_and_egg() {
    let disc = DefiningFunction::signed_distance(RadialProfile::unit_disc()).unwrap();
    for alpha in [1.0, 2.0, 0.5] {
        for k in 1..=2 {
            let spec = SuccessorSpec::new(vec![alpha], k).unwrap();
            let r = radial_reduction_check(&disc, &spec, &SampleScheme::new(1000, 5), 1e-12, SAMPLE_RADIUS).unwrap();
            assert!(r.passed(), "{:?}", r.checks);
        }
    }
    let egg = DefiningFunction::gauge(RadialProfile::egg(vec![1.0, 0.5]).unwrap());
    let spec = SuccessorSpec::new(vec![2.0, 1.0], 2).unwrap();
    let r = radial_reduction_check(&egg, &spec, &SampleScheme::new(1000, 5), 1e-10, SAMPLE_RADIUS).unwrap();
    assert!(r.passed(), "{:?}", r.checks);
}

#[test]
fn disc_regularity_is_stable() {
    let (kernel, h) = disc_setup();
    let report = h_regularity_ratio(&kernel, &h, &RegularityProbe::default()).unwrap();
    assert_eq!(report.verdict(), Verdict::Pass, "{:?}", report.checks);
    assert_eq!(report.table.rows.len(), 9 * 10);
}

#[test]
fn disc_ratio_matches_polar_oracle() {
    // (1−|z|) ∫ |1 − z ζ̄|^{−2} (1−|ζ|)^{−1/2} dA/π, angular part in closed form:
    // ∫₀^{2π} |1 − r x e^{iθ}|^{−2} dθ = 2π/(1 − r²x²).
    let (kernel, h) = disc_setup();
    let mut probe = small_probe(21);
    probe.eps_grid = vec![0.5];
    probe.layers = 50;
    probe.samples_per_layer = 8000;
    let report = h_regularity_ratio(&kernel, &h, &probe).unwrap();
    for m in [2usize, 5, 8] {
        let x = 1.0 - 0.5f64.powi(m as i32);
        // r = 1 − s² removes the endpoint singularity.
        let f = |s: f64| {
            let r = 1.0 - s * s;
            4.0 * r / (1.0 - r * r * x * x)
        };
        let knee = (1.0 - x).sqrt();
        let mut breaks: Vec<f64> = [0.0, 0.25 * knee, knee, 4.0 * knee].into_iter().filter(|b| *b < 1.0).collect();
        breaks.push(1.0);
        let tol = bergman_lab::quadrature::QuadTolerance { abs: 0.0, rel: 1e-12, max_intervals: 4000 };
        let integral = bergman_lab::quadrature::integrate_breaks(f, &breaks, tol).unwrap().value;
        let oracle = (1.0 - x).sqrt() * integral;
        let cell = report.cells.iter().find(|c| c.key == format!("eps=0.5/m={m}")).unwrap();
        let (r, se) = cell.estimate();
        assert!((r - oracle).abs() < 4.0 * se + 1e-6 * oracle, "m={m}: {r} ± {se} vs {oracle}");
    }
}

#[test]
fn ball_successor_regularity_is_stable() {
    let (kernel, h) = ball_successor_setup();
    let report = h_regularity_ratio(&kernel, &h, &RegularityProbe::default()).unwrap();
    assert_eq!(report.verdict(), Verdict::Pass, "{:?}", report.checks);
}

#[test]
fn ratio_is_invariant_under_scaling_of_h_for_type_zero() {
    let (kernel, h) = disc_setup();
    let probe = small_probe(4);
    let a = h_regularity_ratio(&kernel, &h, &probe).unwrap();
    let b = h_regularity_ratio(&kernel, &h.clone().scaled(3.7), &probe).unwrap();
    for (ca, cb) in a.cells.iter().zip(&b.cells) {
        let (ra, _) = ca.estimate();
        let (rb, _) = cb.estimate();
        assert!((ra / rb - 1.0).abs() < 1e-12, "{}: {ra} vs {rb}", ca.key);
    }
}

#[test]
fn transposed_ratio_is_statistically_indistinguishable() {
    let (kernel, h) = disc_setup();
    let a = h_regularity_ratio(&kernel, &h, &small_probe(8)).unwrap();
    let b = h_regularity_ratio(&kernel, &h, &RegularityProbe { transpose: true, ..small_probe(9) }).unwrap();
    for (ca, cb) in a.cells.iter().zip(&b.cells) {
        let (ra, sa) = ca.estimate();
        let (rb, sb) = cb.estimate();
        assert!((ra - rb).abs() < 4.5 * (sa * sa + sb * sb).sqrt(), "{}: {ra} vs {rb}", ca.key);
    }
}

#[test]
fn squared_weight_is_caught_by_the_divergence_check() {
    let (kernel, h) = disc_setup();
    let probe = RegularityProbe {
        eps_grid: vec![0.3, 0.6, 0.8],
        ..small_probe(2)
    };
    let report = h_regularity_ratio(&kernel, &h.powered(2.0), &probe).unwrap();
    assert_eq!(report.find_check("tail_decay eps=0.3").unwrap().verdict, Verdict::Pass);
    assert_eq!(report.find_check("tail_decay eps=0.6").unwrap().verdict, Verdict::Fail);
    assert_eq!(report.find_check("tail_decay eps=0.8").unwrap().verdict, Verdict::Fail);
    assert_eq!(report.verdict(), Verdict::Fail);
}

#[test]
fn partial_block_runs_merge_to_the_full_run() {
    let (kernel, h) = disc_setup();
    let full_probe = small_probe(6);
    let full = h_regularity_ratio(&kernel, &h, &full_probe).unwrap();
    let header = |blocks| ReportHeader {
        schema_version: 1,
        config_hash: "x".into(),
        created_unix_secs: 0,
        seed: 6,
        blocks,
    };
    let parts: Vec<_> = [(0, 1), (1, 4)]
        .iter()
        .map(|&r| {
            let p = RegularityProbe { block_range: Some(r), ..full_probe.clone() };
            (header(r), vec![h_regularity_ratio(&kernel, &h, &p).unwrap()])
        })
        .collect();
    let (_, mut merged) = merge_reports(&parts).unwrap();
    finalize(&mut merged[0], &full_probe).unwrap();
    assert_eq!(merged[0].table, full.table);
    assert_eq!(merged[0].checks, full.checks);
}

#[test]
fn probe_validation() {
    let bad = RegularityProbe { eps_grid: vec![1.0], ..Default::default() };
    assert!(bad.validate().is_err());
    let bad = RegularityProbe { block_range: Some((2, 9)), ..Default::default() };
    assert!(bad.validate().is_err());
}

