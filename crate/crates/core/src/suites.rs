//! Verification suites driven by a [`RunConfig`], report persistence and
//! merging of partial runs.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{KernelVariant, RunConfig, Suite};
use crate::domain::sampling::rng_for;
use crate::domain::{check_defining_properties, norm_sqr, DefiningFunction, ProfileKind, RadialProfile, Region};
use crate::error::{LabError, Result};
use crate::estimates::regularity::finalize;
use crate::estimates::{
    asymptotic_sweep, elementary_bounds_check, h_regularity_ratio, identity_check, radial_reduction_check,
    AsymptoticSweep, RegularityProbe, WeightFunction,
};
use crate::kernel::{ClosedForm, KernelModel, MonomialSeries, NormCache};
use crate::projection::{
    apply_premise, lp_ratio, reproducing_check, resolved_scheme, schur_conclusion, structure_check,
    ProjectionMode, ProjectionOperator, ReproducingStudy, TestFamily,
};
use crate::report::{
    merge_reports, read_report_file, write_atomic, write_report_file, EstimateReport, ReportHeader, Verdict,
    REPORT_SCHEMA_VERSION,
};

/// Kernel of the base domain: closed form where one exists, else the series.
fn base_kernel(profile: &RadialProfile, config: &RunConfig) -> Result<KernelModel> {
    match ClosedForm::for_profile(profile) {
        Ok(c) => Ok(KernelModel::ClosedForm(c)),
        Err(_) => Ok(KernelModel::series(MonomialSeries::new(
            Region::Domain(profile.clone()),
            config.kernel.series_degree,
            &NormCache::new(),
        )?)),
    }
}

pub fn build_kernel(config: &RunConfig) -> Result<KernelModel> {
    let region = config.region.region()?;
    let variant = config.kernel.variant;
    match (&region, variant) {
        (_, KernelVariant::Series) => Ok(KernelModel::series(MonomialSeries::new(
            region.clone(),
            config.kernel.series_degree,
            &NormCache::new(),
        )?)),
        (Region::Domain(p), KernelVariant::ClosedForm) => KernelModel::closed_form(p),
        (Region::Domain(p), KernelVariant::Auto) => base_kernel(p, config),
        (Region::Domain(_), KernelVariant::Successor) => {
            Err(LabError::Config("the successor kernel needs a successor or chain in the region".into()))
        }
        (_, KernelVariant::ClosedForm) => Err(LabError::Config(
            "no closed form for successor regions; use auto, successor or series".into(),
        )),
        (Region::Successor { base, spec }, _) => KernelModel::successor(base_kernel(base, config)?, spec.clone()),
        (Region::Iterated { base, chain }, _) => KernelModel::iterated(base_kernel(base, config)?, chain),
    }
}

/// Runs one concrete suite. Suites never record wall-clock time, so equal
/// configs give equal reports.
pub fn run_suite(config: &RunConfig, suite: Suite) -> Result<Vec<EstimateReport>> {
    match suite {
        Suite::Thm22 => thm22(config),
        Suite::Lemma34 => lemma34(config),
        Suite::Mobius => mobius(config),
        Suite::Defining => defining(config),
        Suite::Schur => schur(config),
        Suite::Project => project(config),
        Suite::All => Err(LabError::Config("'all' is not a concrete suite".into())),
    }
}

pub fn verdict_of(reports: &[EstimateReport]) -> Verdict {
    reports.iter().fold(Verdict::Pass, |acc, r| acc.combine(r.verdict()))
}

/// `B^{n+k}` when the region is the successor of the unit ball with `α = 1`.
fn ball_successor_dim(region: &Region) -> Option<usize> {
    match region {
        Region::Successor { base, spec }
            if matches!(base.kind(), ProfileKind::Ball)
                && base.radii().iter().all(|r| *r == 1.0)
                && spec.alpha().iter().all(|a| *a == 1.0) =>
        {
            Some(region.dim())
        }
        _ => None,
    }
}

fn phase(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Uniform point of the ball of the given radius in `ℂ^dim`.
pub fn ball_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<Complex64> {
    let g: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let n = norm_sqr(&g).sqrt();
    let r = radius * rng.gen::<f64>().powf(1.0 / (2 * dim) as f64);
    g.iter().map(|x| x * (r / n)).collect()
}

/// A point whose moduli are at most `frac` of their local bounds: each fiber
/// has `‖w‖ ≤ frac`, and the base coordinates sit at gauge at most `frac`
/// of the slice over the drawn fibers.
pub fn local_bound_point(region: &Region, frac: f64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let base = region.base();
    let n = base.dim();
    let omega: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
    let s = omega.iter().map(|x| x * x).sum::<f64>().sqrt();
    let omega: Vec<f64> = omega.iter().map(|x| x / s).collect();
    let reach = frac * rng.gen::<f64>() / base.gauge(&omega);
    let mut point: Vec<Complex64> = omega.iter().map(|o| phase(rng) * (o * reach)).collect();
    let steps: Vec<(Vec<f64>, usize)> = match region {
        Region::Domain(_) => vec![],
        Region::Successor { spec, .. } => vec![(spec.alpha().to_vec(), spec.k())],
        Region::Iterated { chain, .. } => chain.steps().iter().map(|s| (s.alpha().to_vec(), s.k())).collect(),
    };
    for (alpha, k) in steps {
        let dir = ball_point(rng, k, 1.0);
        let dn = norm_sqr(&dir).sqrt();
        let r = frac * rng.gen::<f64>();
        let w: Vec<Complex64> = dir.iter().map(|d| d * (r / dn)).collect();
        let g = 1.0 - r * r;
        for (z, a) in point.iter_mut().zip(&alpha) {
            *z *= g.powf(a / 2.0);
        }
        point.extend(w);
    }
    point
}

fn thm22(config: &RunConfig) -> Result<Vec<EstimateReport>> {
    let region = config.region.region()?;
    if matches!(region, Region::Domain(_)) {
        return Err(LabError::Config("thm22 needs a successor or chain in the region".into()));
    }
    let model = build_kernel(config)?;
    let seed = config.sampling.seed;
    let mut rng = rng_for(seed, &[0x22]);
    let ball = ball_successor_dim(&region);
    let pairs = config.samples_or(if ball.is_some() { 100 } else { 50 });
    let (oracle, name, tol, points) = match ball {
        Some(dim) => {
            let points: Vec<Vec<Complex64>> = (0..2 * pairs).map(|_| ball_point(&mut rng, dim, 0.99)).collect();
            let oracle = KernelModel::closed_form(&RadialProfile::unit_ball(dim))?;
            (oracle, format!("closed-form kernel of the unit ball in C^{dim}"), config.tolerances.thm22_ball, points)
        }
        None => {
            let points: Vec<Vec<Complex64>> =
                (0..2 * pairs).map(|_| local_bound_point(&region, 0.6, &mut rng)).collect();
            let series =
                MonomialSeries::with_tail_rule(region.clone(), &points, config.kernel.series_max_degree, &NormCache::new())?;
            let name = format!("monomial series of degree {} (diagonal-tail rule)", series.degree());
            (KernelModel::series(series), name, config.tolerances.thm22_series, points)
        }
    };
    let mut report = EstimateReport::new(
        "thm22",
        "successor kernel against an independent oracle",
        "K_U(z,w;zeta,eta) = pref * D_U[K_Omega(h(z,w,eta), zeta)] agrees with the kernel of U",
        &["pair", "abs_z", "abs_zeta", "value_re", "value_im", "oracle_re", "oracle_im", "rel_error"],
    );
    report.param("region", &region);
    report.param("oracle", &name);
    report.param("pairs", pairs);
    report.param("seed", seed);
    report.param("tolerance", tol);
    let mut worst: f64 = 0.0;
    for (i, pair) in points.chunks(2).enumerate() {
        let v = model.eval(&pair[0], &pair[1])?;
        let o = oracle.eval(&pair[0], &pair[1])?;
        let rel = (v - o).norm() / o.norm();
        worst = worst.max(rel);
        report.table.push(vec![
            i.into(),
            norm_sqr(&pair[0]).sqrt().into(),
            norm_sqr(&pair[1]).sqrt().into(),
            v.re.into(),
            v.im.into(),
            o.re.into(),
            o.im.into(),
            rel.into(),
        ]);
    }
    report.param("max_rel_error", worst);
    report.check(crate::report::Check::at_most("max_rel_error", worst, tol));
    Ok(vec![report])
}

fn lemma34(config: &RunConfig) -> Result<Vec<EstimateReport>> {
    let l = &config.lemma34;
    let t = &config.tolerances;
    let sweep = AsymptoticSweep {
        k: l.k,
        eps: l.eps,
        deltas: l.deltas.clone(),
        gaps: l.gaps.clone(),
        slope_tol: t.slope,
        r_squared_min: t.r_squared,
        bounded_ratio_max: t.bounded_ratio,
        sphere_samples: config.samples_or(20_000),
        seed: config.sampling.seed,
    };
    Ok(vec![asymptotic_sweep(&sweep)?])
}

fn mobius(config: &RunConfig) -> Result<Vec<EstimateReport>> {
    let scheme = config.scheme(1000);
    let mut out = Vec::new();
    for &k in &config.mobius.k_list {
        out.push(identity_check(k, &scheme, config.tolerances.mobius, config.mobius.radius)?);
        out.push(elementary_bounds_check(k, &scheme)?);
    }
    if let Region::Successor { base, spec } = config.region.region()? {
        let rho = DefiningFunction::auto(base);
        out.push(radial_reduction_check(
            &rho,
            &spec,
            &scheme,
            config.tolerances.radial_reduction,
            config.mobius.radius,
        )?);
    }
    Ok(out)
}

fn defining(config: &RunConfig) -> Result<Vec<EstimateReport>> {
    let region = config.region.region()?;
    let df = DefiningFunction::auto(region.base().clone());
    let mut report = check_defining_properties(&df, &config.scheme(10_000), config.tolerances.defining)?;
    if !matches!(region, Region::Domain(_)) {
        report.note("checked on the base domain of the successor region");
    }
    Ok(vec![report])
}

/// The auxiliary function `h` for the region: `−ρ` on a domain, the
/// successor weight on `U^α(Ω)`.
pub fn weight_for(region: &Region) -> Result<WeightFunction> {
    match region {
        Region::Domain(p) => Ok(WeightFunction::neg_rho(DefiningFunction::auto(p.clone()))),
        Region::Successor { base, spec } => WeightFunction::successor(spec.clone(), DefiningFunction::auto(base.clone())),
        Region::Iterated { .. } => Err(LabError::Config("no regularity weight is defined for iterated successors".into())),
    }
}

fn schur(config: &RunConfig) -> Result<Vec<EstimateReport>> {
    let region = config.region.region()?;
    let h = weight_for(&region)?;
    let kernel = build_kernel(config)?;
    let probe = config.probe();
    let premise = h_regularity_ratio(&kernel, &h, &probe)?;
    let nodes = resolved_scheme(config.samples_or(2048), config.sampling.seed, region.dim());
    let mut joint = schur_conclusion(
        &kernel,
        &h,
        &probe,
        &nodes,
        &config.projection.p_list,
        config.tolerances.schur_slack,
    )?;
    apply_premise(&mut joint, &premise)?;
    Ok(vec![premise, joint])
}

fn project(config: &RunConfig) -> Result<Vec<EstimateReport>> {
    let kernel = build_kernel(config)?;
    let p = &config.projection;
    let seed = config.sampling.seed;
    let study = ReproducingStudy {
        degree: p.degree,
        node_counts: p.node_counts.clone(),
        seed,
        tol: config.tolerances.reproducing,
        max_slope: config.tolerances.refinement_slope,
        ..ReproducingStudy::default()
    };
    let mut out = vec![reproducing_check(&kernel, &study)?];
    let op = ProjectionOperator::jittered(kernel.clone(), config.samples_or(2000), seed, ProjectionMode::Signed)?;
    out.push(structure_check(&op, p.degree, 4, seed, config.tolerances.idempotence)?);
    let family = TestFamily::mixed(kernel.dim(), p.degree, 4, seed);
    out.push(lp_ratio(&op, &family, &p.p_list)?);
    Ok(out)
}

/// Report file stem for a suite; partial block ranges get their own name.
pub fn report_stem(config: &RunConfig, suite: Suite) -> String {
    match config.sampling.block_range {
        Some((lo, hi)) => format!("{}.blocks-{lo}-{hi}", suite.name()),
        None => suite.name().to_string(),
    }
}

pub fn header_for(config: &RunConfig, created_unix_secs: u64) -> ReportHeader {
    ReportHeader {
        schema_version: REPORT_SCHEMA_VERSION,
        config_hash: config.hash(),
        created_unix_secs,
        seed: config.sampling.seed,
        blocks: config.blocks(),
    }
}

/// Writes `<stem>.jsonl`, a check summary `<stem>.csv` and one
/// `<stem>.table<i>.csv` per report into `dir`. Returns the report path.
pub fn write_outputs(dir: &Path, stem: &str, header: &ReportHeader, reports: &[EstimateReport]) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.jsonl"));
    write_report_file(&path, header, reports)?;
    write_atomic(&dir.join(format!("{stem}.csv")), &check_summary_csv(reports)?)?;
    for (i, r) in reports.iter().enumerate() {
        r.write_csv(&dir.join(format!("{stem}.table{i}.csv")))?;
    }
    Ok(path)
}

fn check_summary_csv(reports: &[EstimateReport]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["report", "suite", "title", "check", "value", "relation", "threshold", "verdict"])?;
        for (i, r) in reports.iter().enumerate() {
            for c in &r.checks {
                let verdict = serde_json::to_value(c.verdict)?;
                w.write_record([
                    i.to_string(),
                    r.suite.clone(),
                    r.title.clone(),
                    c.name.clone(),
                    format!("{:e}", c.value),
                    c.relation.clone(),
                    format!("{:e}", c.threshold),
                    verdict.as_str().unwrap_or_default().to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Merges report files from runs of one config over disjoint block ranges.
///
/// Monte Carlo cells are pooled by block; regularity reports are then
/// re-finalized, and a Schur report re-reads the merged premise preceding it.
/// Reports without cells are deterministic and taken from the first file.
pub fn merge_files(paths: &[PathBuf]) -> Result<(ReportHeader, Vec<EstimateReport>)> {
    let inputs = paths.iter().map(|p| read_report_file(p)).collect::<Result<Vec<_>>>()?;
    let (header, pooled) = merge_reports(&inputs)?;
    let mut out: Vec<EstimateReport> = Vec::with_capacity(pooled.len());
    for (idx, merged) in pooled.into_iter().enumerate() {
        let base = &inputs[0].1[idx];
        let report = if base.cells.is_empty() {
            if base.suite == "schur" {
                let mut r = base.clone();
                if let Some(premise) = out.last().filter(|p| p.suite == "regularity") {
                    if let (Some(probe), true) = (premise.params.get("probe"), r.params.contains_key("probe")) {
                        r.params.insert("probe".into(), probe.clone());
                    }
                    apply_premise(&mut r, premise)?;
                }
                r
            } else {
                base.clone()
            }
        } else if base.suite == "regularity" {
            let mut r = base.clone();
            let mut probe: RegularityProbe = serde_json::from_value(
                r.params
                    .get("probe")
                    .cloned()
                    .ok_or_else(|| LabError::Merge("regularity report lacks its probe".into()))?,
            )?;
            probe.block_range = if header.blocks == (0, probe.blocks) {
                None
            } else {
                Some(header.blocks)
            };
            r.param("probe", &probe);
            r.cells = merged.cells;
            finalize(&mut r, &probe)?;
            r
        } else {
            merged
        };
        out.push(report);
    }
    Ok((header, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DomainName, RegionSpec, SuccessorConfig};

    fn region(domain: DomainName, successor: Option<(Vec<f64>, usize)>) -> Region {
        let mut spec = RegionSpec::domain(domain);
        if domain == DomainName::Egg {
            spec.exponents = Some(vec![1.0, 2.0]);
        }
        spec.successor = successor.map(|(alpha, k)| SuccessorConfig { alpha, k });
        spec.region().unwrap()
    }

    #[test]
    fn local_points_stay_inside() {
        let mut chain = RegionSpec::domain(DomainName::Disc);
        chain.chain = Some(vec![
            SuccessorConfig { alpha: vec![1.0], k: 1 },
            SuccessorConfig { alpha: vec![0.5], k: 2 },
        ]);
        let regions = [
            region(DomainName::Disc, Some((vec![2.0], 1))),
            region(DomainName::Egg, Some((vec![1.0, 0.5], 2))),
            region(DomainName::Egg, None),
            chain.region().unwrap(),
        ];
        let mut rng = rng_for(1, &[]);
        for r in &regions {
            for _ in 0..500 {
                let p = local_bound_point(r, 0.6, &mut rng);
                assert_eq!(p.len(), r.dim());
                assert!(r.contains(&p).unwrap());
                let mut q = p.clone();
                for z in q.iter_mut().take(r.base().dim()) {
                    *z /= 0.6;
                }
                // Pushing the base part to its local bound must stay (weakly) inside.
                let t: Vec<f64> = q.iter().map(|c| c.norm() * (1.0 - 1e-12)).collect();
                assert!(r.shadow_contains(&t));
            }
        }
    }

    #[test]
    fn ball_points_are_uniform_in_radius() {
        let mut rng = rng_for(2, &[]);
        let n = 20_000;
        let mean: f64 = (0..n).map(|_| norm_sqr(&ball_point(&mut rng, 2, 1.0)).sqrt()).sum::<f64>() / n as f64;
        // E|z| = 4/5 for the uniform ball in R^4.
        assert!((mean - 0.8).abs() < 0.01, "{mean}");
    }

    #[test]
    fn ball_successors_are_recognized() {
        assert_eq!(ball_successor_dim(&region(DomainName::Disc, Some((vec![1.0], 2)))), Some(3));
        assert_eq!(ball_successor_dim(&region(DomainName::Disc, Some((vec![2.0], 1)))), None);
        assert_eq!(ball_successor_dim(&region(DomainName::Disc, None)), None);
    }
}
