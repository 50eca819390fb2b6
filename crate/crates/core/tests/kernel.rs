use std::f64::consts::PI;

use bergman_lab::domain::{f_alpha, ProfileKind, RadialProfile, Region, SuccessorChain, SuccessorSpec};
use bergman_lab::jet::{Jet, JetLayout};
use bergman_lab::kernel::{
    expand_operator, h_point, h_prime_point, kernel_eval, kernel_jet, monomial_norm, slice_kernel, successor_kernel,
    KernelModel, MonomialSeries, NormCache,
};
use bergman_lab::LabError;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ball_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<Complex64> {
    loop {
        let p: Vec<Complex64> = (0..dim)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let n2: f64 = p.iter().map(|x| x.norm_sqr()).sum();
        if n2 < 1.0 {
            return p.into_iter().map(|x| x * radius).collect();
        }
    }
}

/// Independent oracle: `n!/(π^n (1 − ⟨z,ζ⟩)^{n+1})`.
fn ball_oracle(z: &[Complex64], zeta: &[Complex64]) -> Complex64 {
    let n = z.len();
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    let ip: Complex64 = z.iter().zip(zeta).map(|(a, b)| a * b.conj()).sum();
    fact / (PI.powi(n as i32) * (c(1.0, 0.0) - ip).powi(n as i32 + 1))
}

#[test]
fn closed_form_examples() {
    let disc = KernelModel::closed_form(&RadialProfile::unit_disc()).unwrap();
    assert!((kernel_eval(&disc, &[c(0.0, 0.0)], &[c(0.0, 0.0)]).unwrap() - 1.0 / PI).norm() < 1e-15);
    let v = kernel_eval(&disc, &[c(0.5, 0.0)], &[c(0.5, 0.0)]).unwrap();
    assert!((v - 16.0 / (9.0 * PI)).norm() < 1e-14);
    let ball = KernelModel::closed_form(&RadialProfile::unit_ball(2)).unwrap();
    let zero = [c(0.0, 0.0); 2];
    assert!((kernel_eval(&ball, &zero, &zero).unwrap() - 2.0 / (PI * PI)).norm() < 1e-15);
    assert!(matches!(kernel_eval(&disc, &[c(1.0, 0.0)], &[c(0.0, 0.0)]), Err(LabError::OutsideRegion)));
}

#[test]
fn disc_series_at_degree_sixty() {
    let cache = NormCache::new();
    let series = MonomialSeries::new(Region::Domain(RadialProfile::unit_disc()), 60, &cache).unwrap();
    for (_, n) in series.norms() {
        assert!(n.is_finite() && n > 0.0);
    }
    let model = KernelModel::series(series);
    let v = kernel_eval(&model, &[c(0.5, 0.0)], &[c(0.5, 0.0)]).unwrap();
    assert!((v.re - 16.0 / (9.0 * PI)).abs() < 1e-12);
}

#[test]
fn monomial_norm_examples() {
    let disc = RadialProfile::unit_disc();
    assert!((monomial_norm(&disc, &[0]).unwrap() - PI).abs() < 1e-13);
    assert!((monomial_norm(&disc, &[1]).unwrap() - PI / 2.0).abs() < 1e-13);
    assert!((monomial_norm(&RadialProfile::unit_ball(2), &[1, 0]).unwrap() - PI * PI / 6.0).abs() < 1e-12);
}

#[test]
fn disc_jet_examples() {
    let disc = KernelModel::closed_form(&RadialProfile::unit_disc()).unwrap();
    let j = kernel_jet(&disc, &[c(0.0, 0.0)], &[c(0.0, 0.0)], 3).unwrap();
    assert!(j.partial(&[1]).norm() < 1e-15);
    let j = kernel_jet(&disc, &[c(0.0, 0.0)], &[c(0.5, 0.0)], 3).unwrap();
    assert!((j.partial(&[1]) - 1.0 / PI).norm() < 1e-14);
}

#[test]
fn closed_form_jets_match_analytic_derivatives() {
    // ∂^m of 1/(π(1 − zā)²) is (m+1)! ā^m / (π (1 − zā)^{m+2}).
    let disc = KernelModel::closed_form(&RadialProfile::unit_disc()).unwrap();
    let (z, a) = (c(0.3, -0.2), c(-0.1, 0.6));
    let j = kernel_jet(&disc, &[z], &[a], 4).unwrap();
    for m in 0..=4u8 {
        let fact: f64 = (1..=m as usize + 1).map(|i| i as f64).product();
        let exact = fact * a.conj().powi(m as i32) / (PI * (c(1.0, 0.0) - z * a.conj()).powi(m as i32 + 2));
        assert!((j.partial(&[m]) - exact).norm() <= 1e-10 * exact.norm());
    }
    // Ball 𝔹²: D^β of 2/(π²(1 − ⟨z,ζ⟩)³) is (|β|+2)! ζ̄^β / (π² (1 − ⟨z,ζ⟩)^{|β|+3}).
    let ball = KernelModel::closed_form(&RadialProfile::unit_ball(2)).unwrap();
    let z = [c(0.2, 0.1), c(-0.3, 0.4)];
    let zeta = [c(0.5, -0.1), c(0.1, 0.2)];
    let j = kernel_jet(&ball, &z, &zeta, 4).unwrap();
    let ip: Complex64 = z.iter().zip(&zeta).map(|(a, b)| a * b.conj()).sum();
    for b0 in 0..=4u8 {
        for b1 in 0..=(4 - b0) {
            let m = (b0 + b1) as usize;
            let fact: f64 = (1..=m + 2).map(|i| i as f64).product();
            let exact = fact * zeta[0].conj().powi(b0 as i32) * zeta[1].conj().powi(b1 as i32)
                / (PI * PI * (c(1.0, 0.0) - ip).powi(m as i32 + 3));
            assert!((j.partial(&[b0, b1]) - exact).norm() <= 1e-10 * exact.norm());
        }
    }
}

#[test]
fn series_jets_match_differentiated_series() {
    let cache = NormCache::new();
    let region = Region::Domain(RadialProfile::egg(vec![1.0, 2.0]).unwrap());
    let series = MonomialSeries::new(region, 30, &cache).unwrap();
    let norms: Vec<(Vec<u16>, f64)> = series.norms().map(|(g, n)| (g.to_vec(), n)).collect();
    let model = KernelModel::series(series);
    let z = [c(0.1, 0.05), c(-0.1, 0.1)];
    let zeta = [c(0.15, 0.0), c(0.05, -0.2)];
    let jet = kernel_jet(&model, &z, &zeta, 3).unwrap();
    let falling = |e: u16, m: u8| (0..m as u16).map(|i| (e - i) as f64).product::<f64>();
    for b0 in 0..=3u8 {
        for b1 in 0..=(3 - b0) {
            let mut oracle = c(0.0, 0.0);
            for (g, n) in &norms {
                if g[0] < b0 as u16 || g[1] < b1 as u16 {
                    continue;
                }
                oracle += falling(g[0], b0)
                    * falling(g[1], b1)
                    * z[0].powi((g[0] - b0 as u16) as i32)
                    * z[1].powi((g[1] - b1 as u16) as i32)
                    * zeta[0].conj().powi(g[0] as i32)
                    * zeta[1].conj().powi(g[1] as i32)
                    / *n;
            }
            assert!((jet.partial(&[b0, b1]) - oracle).norm() <= 1e-10 * oracle.norm().max(1e-3));
        }
    }
    assert!(matches!(kernel_jet(&model, &z, &zeta, 31), Err(LabError::UnsupportedOrder { .. })));
}

#[test]
fn successor_of_disc_matches_ball_closed_form() {
    let disc = KernelModel::closed_form(&RadialProfile::unit_disc()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 1..=3 {
        let spec = SuccessorSpec::new(vec![1.0], k).unwrap();
        let zero = vec![c(0.0, 0.0); k + 1];
        let v = successor_kernel(&disc, &spec, &zero, &zero).unwrap();
        assert!((v - ball_oracle(&zero, &zero)).norm() < 1e-14);
        for _ in 0..100 {
            let p = ball_point(&mut rng, k + 1, 0.99);
            let q = ball_point(&mut rng, k + 1, 0.99);
            let v = successor_kernel(&disc, &spec, &p, &q).unwrap();
            let o = ball_oracle(&p, &q);
            assert!((v - o).norm() <= 1e-8 * o.norm(), "k={k}: {v} vs {o}");
        }
    }
}

#[test]
fn successor_is_hermitian_and_positive() {
    let egg = KernelModel::closed_form(&RadialProfile::unit_polydisc(2)).unwrap();
    let model = KernelModel::successor(egg, SuccessorSpec::new(vec![0.7, 1.6], 2).unwrap()).unwrap();
    let region = model.region();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut draw = || loop {
        let p: Vec<Complex64> = (0..4)
            .map(|_| c(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)))
            .collect();
        if region.contains(&p).unwrap() {
            return p;
        }
    };
    for _ in 0..200 {
        let (p, q) = (draw(), draw());
        let a = model.eval(&p, &q).unwrap();
        let b = model.eval(&q, &p).unwrap().conj();
        assert!((a - b).norm() <= 1e-10 * a.norm());
        let d = model.eval(&p, &p).unwrap();
        assert!(d.re > 0.0 && d.im.abs() <= 1e-10 * d.re);
    }
}

#[test]
fn egg_successor_matches_series_oracle() {
    let disc = KernelModel::closed_form(&RadialProfile::unit_disc()).unwrap();
    let spec = SuccessorSpec::new(vec![2.0], 1).unwrap();
    let model = KernelModel::successor(disc, spec.clone()).unwrap();
    let region = model.region();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pts = Vec::new();
    for _ in 0..20 {
        let tw: f64 = 0.6 * rng.gen::<f64>();
        let tz = 0.6 * (1.0 - tw * tw) * rng.gen::<f64>();
        let (a, b) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
        pts.push(vec![Complex64::from_polar(tz, a), Complex64::from_polar(tw, b)]);
    }
    let series = MonomialSeries::with_tail_rule(region, &pts, 300, &NormCache::new()).unwrap();
    let oracle = KernelModel::series(series);
    for pair in pts.chunks(2) {
        let v = model.eval(&pair[0], &pair[1]).unwrap();
        let o = oracle.eval(&pair[0], &pair[1]).unwrap();
        assert!((v - o).norm() <= 1e-5 * o.norm(), "{v} vs {o}");
    }
}

#[test]
fn iterated_successor_matches_series_oracle() {
    let disc = KernelModel::closed_form(&RadialProfile::unit_disc()).unwrap();
    let chain = SuccessorChain::new(vec![
        SuccessorSpec::new(vec![1.0], 1).unwrap(),
        SuccessorSpec::new(vec![0.5], 1).unwrap(),
    ])
    .unwrap();
    let model = KernelModel::iterated(disc, &chain).unwrap();
    let region = model.region();
    assert_eq!(region, Region::iterated(RadialProfile::unit_disc(), chain).unwrap());
    let pts = vec![
        vec![c(0.1, 0.1), c(0.2, 0.0), c(0.0, -0.15)],
        vec![c(-0.1, 0.15), c(0.0, 0.1), c(0.2, 0.1)],
        vec![c(0.25, 0.0), c(0.1, -0.1), c(0.1, 0.1)],
    ];
    let series = MonomialSeries::with_tail_rule(region, &pts, 80, &NormCache::new()).unwrap();
    let oracle = KernelModel::series(series);
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            let v = model.eval(&pts[i], &pts[j]).unwrap();
            let o = oracle.eval(&pts[i], &pts[j]).unwrap();
            assert!((v - o).norm() <= 1e-5 * o.norm(), "{v} vs {o}");
        }
    }
    let wide = SuccessorChain::new(vec![SuccessorSpec::new(vec![1.0], 2).unwrap()]).unwrap();
    assert!(KernelModel::iterated(KernelModel::closed_form(&RadialProfile::unit_disc()).unwrap(), &wide).is_err());
}

#[test]
fn slice_kernel_examples() {
    let disc = KernelModel::closed_form(&RadialProfile::unit_disc()).unwrap();
    let spec = SuccessorSpec::new(vec![1.0], 1).unwrap();
    let (z, zeta) = ([c(0.2, 0.1)], [c(-0.3, 0.2)]);
    let v = slice_kernel(&disc, &spec, &[c(0.0, 0.0)], &z, &zeta).unwrap();
    assert!((v - kernel_eval(&disc, &z, &zeta).unwrap()).norm() < 1e-15);
    let eta = [c(0.6, 0.0)];
    let v = slice_kernel(&disc, &spec, &eta, &[c(0.0, 0.0)], &[c(0.0, 0.0)]).unwrap();
    assert!((v.re - 1.0 / (PI * 0.64)).abs() < 1e-14);
    assert!(matches!(
        slice_kernel(&disc, &spec, &eta, &[c(0.85, 0.0)], &[c(0.0, 0.0)]),
        Err(LabError::OutsideRegion)
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = SuccessorSpec::new(vec![1.3], 1).unwrap();
    for _ in 0..1000 {
        let eta = ball_point(&mut rng, 1, 1.0);
        let r = (1.0 - eta[0].norm_sqr()).powf(0.65);
        let z = ball_point(&mut rng, 1, r);
        let zeta = ball_point(&mut rng, 1, r);
        let a = slice_kernel(&disc, &spec, &eta, &z, &zeta).unwrap();
        let b = slice_kernel(&disc, &spec, &eta, &zeta, &z).unwrap().conj();
        assert!((a - b).norm() <= 1e-12 * a.norm());
    }
}

#[test]
fn h_point_identities() {
    let spec = SuccessorSpec::new(vec![0.7, 2.5], 2).unwrap();
    let z = [c(0.3, -0.1), c(0.2, 0.2)];
    let w = [c(0.3, 0.1), c(-0.2, 0.4)];
    assert!(h_point(&spec, &z, &w, &w).unwrap().iter().zip(&z).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) < 1e-15);
    let zero = [c(0.0, 0.0); 2];
    assert_eq!(h_point(&spec, &z, &w, &zero).unwrap(), z.to_vec());
    assert_eq!(h_prime_point(&spec, &z, &w, &zero).unwrap(), z.to_vec());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let w = ball_point(&mut rng, 2, 1.0);
        let eta = ball_point(&mut rng, 2, 1.0);
        let h = h_point(&spec, &z, &w, &eta).unwrap();
        let hp = h_prime_point(&spec, &z, &w, &eta).unwrap();
        let f = f_alpha(&spec, &h, &eta).unwrap();
        for (a, b) in f.iter().zip(&hp) {
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
        }
    }
}

#[test]
fn branch_floor_is_enforced() {
    let disc = KernelModel::closed_form(&RadialProfile::unit_disc()).unwrap();
    let spec = SuccessorSpec::new(vec![1.0], 1).unwrap();
    let w = [c(1.0 - 1e-13, 0.0)];
    assert!(matches!(h_point(&spec, &[c(0.0, 0.0)], &w, &w), Err(LabError::BranchFloor(_))));
    let model = KernelModel::successor(disc, spec).unwrap();
    let layout = JetLayout::get(2, 0);
    let jets: Vec<Jet> = [c(0.0, 0.0), w[0]].iter().map(|v| Jet::constant(&layout, *v)).collect();
    assert!(matches!(model.eval_jets(&jets, &[c(0.0, 0.0), w[0]]), Err(LabError::BranchFloor(_))));
}

fn random_jet(rng: &mut ChaCha8Rng, n: usize, order: usize) -> Jet {
    let layout = JetLayout::get(n, order);
    let coeffs = (0..layout.len()).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    Jet::from_coeffs(&layout, coeffs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn expansion_equals_sequential_application(
        n in 1usize..=3, k in 1usize..=4, seed in any::<u64>(),
        a0 in 0.05f64..3.0, a1 in 0.05f64..3.0, a2 in 0.05f64..3.0,
    ) {
        let alpha = [a0, a1, a2][..n].to_vec();
        let e = expand_operator(&alpha, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_jet(&mut rng, n, k + 2);
        let z0: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let a = e.apply(&f, &z0).unwrap();
        let b = e.apply_sequential(&f, &z0).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-10 * (1.0 + e.coeff(&vec![0; n])));
    }
}

#[test]
fn closed_form_fast_path_matches_jet_path() {
    let cases = [
        (RadialProfile::unit_disc(), vec![1.0], 1),
        (RadialProfile::unit_disc(), vec![2.0], 2),
        (RadialProfile::unit_ball(2), vec![0.5, 1.5], 3),
        (RadialProfile::unit_polydisc(2), vec![0.7, 1.6], 2),
        (RadialProfile::new(ProfileKind::Polydisc, vec![0.5, 2.0]).unwrap(), vec![1.0, 3.0], 1),
        (RadialProfile::new(ProfileKind::Ball, vec![1.5]).unwrap(), vec![0.3], 4),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (profile, alpha, k) in cases {
        let inner = KernelModel::closed_form(&profile).unwrap();
        let model = KernelModel::successor(inner, SuccessorSpec::new(alpha, k).unwrap()).unwrap();
        let region = model.region();
        let radii = region.bounding_radii();
        let mut draw = || loop {
            let p: Vec<Complex64> = radii
                .iter()
                .map(|r| c(rng.gen_range(-*r..*r), rng.gen_range(-*r..*r)))
                .collect();
            if region.contains(&p).unwrap() {
                return p;
            }
        };
        for _ in 0..50 {
            let (p, q) = (draw(), draw());
            let fast = model.eval(&p, &q).unwrap();
            let layout = JetLayout::get(p.len(), 0);
            let jets: Vec<Jet> = p.iter().map(|v| Jet::constant(&layout, *v)).collect();
            let slow = model.eval_jets(&jets, &q).unwrap().value();
            assert!((fast - slow).norm() <= 1e-11 * slow.norm(), "{fast} vs {slow}");
        }
    }
}
