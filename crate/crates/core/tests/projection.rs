use bergman_lab::domain::{DefiningFunction, RadialProfile, SuccessorSpec};
use bergman_lab::estimates::{RegularityProbe, WeightFunction};
use bergman_lab::kernel::KernelModel;
use bergman_lab::projection::*;
use bergman_lab::report::Verdict;
use bergman_lab::{LabError, C64};

fn disc_kernel() -> KernelModel {
    KernelModel::closed_form(&RadialProfile::unit_disc()).unwrap()
}

fn disc_weight() -> WeightFunction {
    WeightFunction::neg_rho(DefiningFunction::signed_distance(RadialProfile::unit_disc()).unwrap())
}

fn ball_successor() -> (KernelModel, WeightFunction) {
    let disc = RadialProfile::unit_disc();
    let spec = SuccessorSpec::new(vec![1.0], 1).unwrap();
    let kernel = KernelModel::successor(KernelModel::closed_form(&disc).unwrap(), spec.clone()).unwrap();
    let h = WeightFunction::successor(spec, DefiningFunction::signed_distance(disc).unwrap()).unwrap();
    (kernel, h)
}

fn quick_probe() -> RegularityProbe {
    RegularityProbe {
        samples_per_layer: 3000,
        ..Default::default()
    }
}

#[test]
fn constants_are_reproduced_and_antiholomorphic_terms_vanish() {
    let op = ProjectionOperator::jittered(disc_kernel(), 100_000, 1, ProjectionMode::Signed).unwrap();
    for z in [C64::new(0.0, 0.0), C64::new(0.3, -0.2), C64::new(-0.5, 0.4)] {
        let one = project(&op, |_| C64::new(1.0, 0.0), &[z]).unwrap();
        assert!((one - 1.0).norm() < 1e-3, "{one}");
        let anti = project(&op, |x| x[0].conj(), &[z]).unwrap();
        assert!(anti.norm() < 1e-3, "{anti}");
    }
}

#[test]
fn points_outside_are_rejected() {
    let op = ProjectionOperator::jittered(disc_kernel(), 100, 1, ProjectionMode::Signed).unwrap();
    let err = project(&op, |_| C64::new(1.0, 0.0), &[C64::new(1.2, 0.0)]).unwrap_err();
    assert!(matches!(err, LabError::OutsideRegion));
}

#[test]
fn reproducing_on_disc_and_ball() {
    for profile in [RadialProfile::unit_disc(), RadialProfile::unit_ball(2)] {
        let kernel = KernelModel::closed_form(&profile).unwrap();
        let study = ReproducingStudy {
            node_counts: vec![4_000, 40_000, 400_000],
            tol: 5e-3,
            ..Default::default()
        };
        let report = reproducing_check(&kernel, &study).unwrap();
        assert!(report.passed(), "{:?}", report.checks);
    }
}

#[test]
fn reproducing_with_successor_kernel() {
    let (kernel, _) = ball_successor();
    let family = TestFamily::polynomials(2, 5, 3, 4);
    let probes = interior_probes(&kernel.region(), 6, 0.3, 4);
    let op = ProjectionOperator::jittered(kernel, 50_000, 4, ProjectionMode::Signed).unwrap();
    let err = reproducing_error(&op, &family, &probes).unwrap();
    assert!(err < 5e-3, "{err}");
}

#[test]
fn signed_ratio_is_one_for_holomorphic_polynomials_at_p_two() {
    let op = ProjectionOperator::jittered(disc_kernel(), 4096, 2, ProjectionMode::Signed).unwrap();
    let family = TestFamily::polynomials(1, 5, 3, 7);
    let report = lp_ratio(&op, &family, &[2.0]).unwrap();
    for r in report.table.column("ratio").unwrap() {
        assert!((r - 1.0).abs() < 0.02, "{r}");
    }
}

#[test]
fn absolute_mode_dominates_signed_mode() {
    let op = ProjectionOperator::jittered(disc_kernel(), 2500, 3, ProjectionMode::Signed).unwrap();
    let mut family = TestFamily::mixed(1, 4, 3, 1);
    family.members.extend(TestFamily::bumps(&disc_weight(), &[0.3, 0.8]).members);
    for row in ratio_rows(&op, &family, &[1.5, 2.0, 3.0, 6.0]).unwrap() {
        assert!(row.signed <= row.absolute * (1.0 + 1e-12), "{row:?}");
    }
    let abs = lp_ratio(&op.with_mode(ProjectionMode::Absolute), &TestFamily::polynomials(1, 3, 2, 5), &[2.0]).unwrap();
    let sig = lp_ratio(&op, &TestFamily::polynomials(1, 3, 2, 5), &[2.0]).unwrap();
    let (a, s) = (abs.table.column("ratio").unwrap(), sig.table.column("ratio").unwrap());
    for (a, s) in a.iter().zip(&s) {
        assert!(a.is_finite() && a > s);
    }
}

#[test]
fn idempotence_and_self_adjointness() {
    let op = ProjectionOperator::jittered(disc_kernel(), 6400, 5, ProjectionMode::Signed).unwrap();
    let report = structure_check(&op, 5, 3, 9, 2e-2).unwrap();
    assert!(report.passed(), "{:?}", report.checks);
}

#[test]
fn invalid_exponents_and_degenerate_functions() {
    let op = ProjectionOperator::jittered(disc_kernel(), 100, 1, ProjectionMode::Absolute).unwrap();
    let family = TestFamily::polynomials(1, 2, 1, 1);
    for p in [1.0, 0.5, f64::INFINITY] {
        assert!(matches!(lp_ratio(&op, &family, &[p]), Err(LabError::InvalidParameter(_))));
    }
    let empty = TestFamily {
        name: "empty".into(),
        members: vec![],
    };
    assert!(lp_ratio(&op, &empty, &[2.0]).is_err());
    let zero = TestFamily {
        name: "zero".into(),
        members: vec![("zero".into(), TestFunction::Holomorphic { poly: Polynomial { terms: vec![] } })],
    };
    assert!(matches!(lp_ratio(&op, &zero, &[2.0]), Err(LabError::NormUnderflow(_))));
}

#[test]
fn schur_pipeline_on_disc() {
    let p_list = [1.1, 1.5, 3.0, 6.0, 10.0];
    let report = schur_pipeline(&disc_kernel(), &disc_weight(), &quick_probe(), &resolved_scheme(2048, 3, 1), &p_list, 1.5).unwrap();
    assert_eq!(report.verdict(), Verdict::Pass, "{:?}", report.checks);
    assert!(report.notes.iter().any(|n| n.contains("p = 1.1")));
    assert!(report.find_check("conclusion_within_schur_bound p=3").is_some());
}

#[test]
fn schur_pipeline_on_ball_successor() {
    let (kernel, h) = ball_successor();
    let report = schur_pipeline(&kernel, &h, &quick_probe(), &resolved_scheme(1024, 3, 2), &[1.5, 3.0, 6.0], 1.5).unwrap();
    assert_eq!(report.verdict(), Verdict::Pass, "{:?}", report.checks);
}

#[test]
fn squared_weight_degrades_the_premise() {
    let probe = RegularityProbe {
        eps_grid: vec![0.2, 0.8],
        ..quick_probe()
    };
    let good = schur_pipeline(&disc_kernel(), &disc_weight(), &probe, &resolved_scheme(512, 3, 1), &[2.0], 1.5).unwrap();
    let bad = schur_pipeline(&disc_kernel(), &disc_weight().powered(2.0), &probe, &resolved_scheme(512, 3, 1), &[2.0], 1.5).unwrap();
    let slope = |r: &bergman_lab::report::EstimateReport| r.params["premise trend_slope eps=0.8"].as_f64().unwrap();
    assert!(slope(&good).abs() < 0.2);
    // h² at ε = 0.8: the deep layers contribute C ∫|K(z, e^{iθ})| dθ ~ C/d,
    // so R ~ d^{1.6} d^{−1} and the trend slope tends to 0.6.
    assert!((slope(&bad) - 0.6).abs() < 0.15, "{}", slope(&bad));
    assert_eq!(bad.verdict(), Verdict::Fail);
}
