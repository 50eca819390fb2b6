use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::weight::WeightFunction;
use crate::domain::sampling::{layer_bounds, polar_point, rng_for};
use crate::domain::Region;
use crate::error::{LabError, Result};
use crate::kernel::KernelModel;
use crate::report::{BlockStats, Check, EstimateReport, McCell, Stratum, Table};
use crate::stats::{linear_fit, weighted_linear_fit};

/// Probe configuration for the ratio
/// `R(z, ε) = h(z)^{ε+l} ∫ |K(z; ζ̄)| h(ζ)^{−ε} dV(ζ)`.
///
/// The integral is split into dyadic gauge-gap layers `[2^{−m−1}, 2^{−m}]`,
/// `m < layers`; the sliver `u < 2^{−layers}` is not sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityProbe {
    pub eps_grid: Vec<f64>,
    /// Upper end of the admissible ε window.
    pub a: f64,
    /// Type parameter `l`.
    pub l: f64,
    /// Probes sit at gauge gaps `2^{−m}`, `m = 1..=depth`.
    pub depth: usize,
    /// Hyperspherical angles of the probe ray (one value repeated).
    pub probe_psi: f64,
    pub include_center: bool,
    pub layers: usize,
    pub samples_per_layer: usize,
    pub blocks: u32,
    /// Half-open range of blocks computed by this run; `None` means all.
    pub block_range: Option<(u32, u32)>,
    pub seed: u64,
    pub stability_factor: f64,
    /// Integrate `|K(ζ; z̄)|` instead of `|K(z; ζ̄)|`.
    pub transpose: bool,
}

impl Default for RegularityProbe {
    fn default() -> Self {
        Self {
            eps_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            a: 1.0,
            l: 0.0,
            depth: 10,
            probe_psi: FRAC_PI_4,
            include_center: false,
            layers: 40,
            samples_per_layer: 8000,
            blocks: 4,
            block_range: None,
            seed: 0,
            stability_factor: 3.0,
            transpose: false,
        }
    }
}

impl RegularityProbe {
    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() {
            return Err(LabError::InvalidParameter("empty epsilon grid".into()));
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(**e > 0.0 && **e < self.a)) {
            return Err(LabError::InvalidParameter(format!("epsilon {e} outside (0, {})", self.a)));
        }
        if self.l < 0.0 {
            return Err(LabError::InvalidParameter("type l must be >= 0".into()));
        }
        if self.depth < 4 {
            return Err(LabError::InvalidParameter("probe depth must be >= 4".into()));
        }
        if self.layers < 8 || self.layers > 60 {
            return Err(LabError::InvalidParameter("layer count must be in 8..=60".into()));
        }
        if self.samples_per_layer == 0 || self.blocks == 0 {
            return Err(LabError::InvalidParameter("sample budget must be positive".into()));
        }
        if let Some((lo, hi)) = self.block_range {
            if lo >= hi || hi > self.blocks {
                return Err(LabError::InvalidParameter(format!("block range {lo}..{hi} invalid")));
            }
        }
        Ok(())
    }

    fn probe_levels(&self) -> Vec<usize> {
        let start = if self.include_center { 0 } else { 1 };
        (start..=self.depth).collect()
    }

    fn window_levels(&self) -> usize {
        self.depth + 2
    }

    fn block_range(&self) -> (u32, u32) {
        self.block_range.unwrap_or((0, self.blocks))
    }
}

const COLUMNS: &[&str] = &["eps", "distance", "h_at_probe", "ratio", "std_error", "samples"];

fn cell_key(eps: f64, m: usize) -> String {
    format!("eps={eps}/m={m}")
}

struct Probe {
    m: usize,
    point: Vec<Complex64>,
    distance: f64,
    h: f64,
}

fn probes(region: &Region, h: &WeightFunction, probe: &RegularityProbe) -> Result<Vec<Probe>> {
    let n = region.dim();
    let psi = vec![probe.probe_psi; n - 1];
    let theta = vec![0.0; n];
    probe
        .probe_levels()
        .into_iter()
        .map(|m| {
            let distance = if m == 0 { 1.0 } else { 0.5f64.powi(m as i32) };
            let pp = polar_point(region, distance, &psi, &theta).ok_or(LabError::OutsideRegion)?;
            let hv = h.eval(&pp.point)?;
            if !(hv > 0.0 && hv.is_finite()) {
                return Err(LabError::InvalidParameter(format!("weight is {hv} at probe level {m}")));
            }
            Ok(Probe {
                m,
                point: pp.point,
                distance,
                h: hv,
            })
        })
        .collect()
}

/// Mixture proposal over `(ψ, θ)`: half uniform, half a window of random
/// dyadic level centred on the probe ray.
struct AngleProposal {
    n: usize,
    psi0: f64,
    levels: usize,
}

impl AngleProposal {
    fn box_volume(&self) -> f64 {
        FRAC_PI_2.powi(self.n as i32 - 1) * (2.0 * PI).powi(self.n as i32)
    }

    fn psi_window(&self, i: usize) -> (f64, f64) {
        let half = FRAC_PI_2 * 0.5f64.powi(i as i32);
        ((self.psi0 - half).max(0.0), (self.psi0 + half).min(FRAC_PI_2))
    }

    fn theta_half(i: usize) -> f64 {
        PI * 0.5f64.powi(i as i32)
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        if rng.gen::<bool>() {
            let psi = (0..self.n - 1).map(|_| rng.gen::<f64>() * FRAC_PI_2).collect();
            let theta = (0..self.n).map(|_| rng.gen::<f64>() * 2.0 * PI).collect();
            (psi, theta)
        } else {
            let i = rng.gen_range(1..=self.levels);
            let (lo, hi) = self.psi_window(i);
            let psi = (0..self.n - 1).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect();
            let half = Self::theta_half(i);
            let theta = (0..self.n)
                .map(|_| ((2.0 * rng.gen::<f64>() - 1.0) * half).rem_euclid(2.0 * PI))
                .collect();
            (psi, theta)
        }
    }

    fn density(&self, psi: &[f64], theta: &[f64]) -> f64 {
        let mut windows = 0.0;
        for i in 1..=self.levels {
            let (lo, hi) = self.psi_window(i);
            let half = Self::theta_half(i);
            let inside = psi.iter().all(|p| *p >= lo && *p <= hi)
                && theta.iter().all(|t| t.min(2.0 * PI - t) <= half);
            if inside {
                windows += 1.0 / ((hi - lo).powi(psi.len() as i32) * (2.0 * half).powi(theta.len() as i32));
            }
        }
        0.5 / self.box_volume() + 0.5 * windows / self.levels as f64
    }
}

/// Stratified Monte Carlo estimate of `R(z, ε)` along a probe ray.
///
/// One sample set serves every `(ε, z)` cell. Layers are independent streams
/// keyed by `(seed, layer, block)`, so partial block ranges merge exactly.
pub fn h_regularity_ratio(kernel: &KernelModel, h: &WeightFunction, probe: &RegularityProbe) -> Result<EstimateReport> {
    probe.validate()?;
    let region = kernel.region();
    let n = region.dim();
    if h.dim() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            got: h.dim(),
        });
    }
    let probes = probes(&region, h, probe)?;
    let proposal = AngleProposal {
        n,
        psi0: probe.probe_psi,
        levels: probe.window_levels(),
    };
    let n_cells = probe.eps_grid.len() * probes.len();
    let (b0, b1) = probe.block_range();
    let per_block = probe.samples_per_layer.div_ceil(probe.blocks as usize);
    let jobs: Vec<(usize, u32)> = (0..probe.layers).flat_map(|m| (b0..b1).map(move |b| (m, b))).collect();
    let results: Vec<Result<Vec<BlockStats>>> = jobs
        .par_iter()
        .map(|&(layer, block)| {
            let mut rng = rng_for(probe.seed, &[0x4e, layer as u64, block as u64]);
            let (lo, hi) = layer_bounds(layer, probe.layers);
            let width = hi - lo;
            let mut stats = vec![BlockStats::new(block); n_cells];
            let mut kabs = vec![0.0; probes.len()];
            for _ in 0..per_block {
                let u = lo + width * rng.gen::<f64>();
                let (psi, theta) = proposal.draw(&mut rng);
                let q = proposal.density(&psi, &theta);
                let Some(pp) = polar_point(&region, u, &psi, &theta) else {
                    stats.iter_mut().for_each(|s| s.push(0.0));
                    continue;
                };
                let hz = h.eval(&pp.point)?;
                if !(hz > 0.0) {
                    stats.iter_mut().for_each(|s| s.push(0.0));
                    continue;
                }
                for (slot, pr) in kabs.iter_mut().zip(&probes) {
                    let k = if probe.transpose {
                        kernel.eval_unchecked(&pp.point, &pr.point)?
                    } else {
                        kernel.eval_unchecked(&pr.point, &pp.point)?
                    };
                    *slot = k.norm();
                }
                let base = pp.jacobian * width / q;
                for (e, &eps) in probe.eps_grid.iter().enumerate() {
                    let he = hz.powf(-eps);
                    for (p, k) in kabs.iter().enumerate() {
                        stats[e * probes.len() + p].push(k * he * base);
                    }
                }
            }
            Ok(stats)
        })
        .collect();
    let mut cells: Vec<McCell> = Vec::with_capacity(n_cells);
    for &eps in &probe.eps_grid {
        for pr in &probes {
            cells.push(McCell {
                key: cell_key(eps, pr.m),
                strata: (0..probe.layers)
                    .map(|m| Stratum {
                        id: m as u32,
                        weight: pr.h.powf(eps + probe.l),
                        blocks: Vec::new(),
                    })
                    .collect(),
            });
        }
    }
    for (&(layer, _), res) in jobs.iter().zip(results) {
        for (cell, st) in cells.iter_mut().zip(res?) {
            cell.strata[layer].blocks.push(st);
        }
    }
    let mut report = EstimateReport::new(
        "regularity",
        "h-regularity ratio",
        "R(z,eps) = h(z)^(eps+l) * int |K(z;conj zeta)| h(zeta)^(-eps) dV(zeta); bounded along z -> boundary",
        COLUMNS,
    );
    report.param("probe", probe);
    report.param("weight", h);
    report.param("region", &region);
    report.param("probe_distances", probes.iter().map(|p| p.distance).collect::<Vec<_>>());
    report.param("probe_levels", probes.iter().map(|p| p.m).collect::<Vec<_>>());
    report.param("probe_h", probes.iter().map(|p| p.h).collect::<Vec<_>>());
    report.cells = cells;
    finalize(&mut report, probe)?;
    report.note(format!(
        "gauge gaps below 2^-{} are not sampled; the neglected sliver is O(2^(-{}(1-eps)))",
        probe.layers, probe.layers
    ));
    Ok(report)
}

/// Rebuilds table, checks and summary parameters from the Monte Carlo cells.
/// Used after sampling and again after merging partial runs.
pub fn finalize(report: &mut EstimateReport, probe: &RegularityProbe) -> Result<()> {
    let missing = |k: &str| LabError::Merge(format!("regularity report lacks parameter {k}"));
    let get = |k: &str| -> Result<Vec<f64>> {
        let v = report.params.get(k).ok_or_else(|| missing(k))?;
        Ok(serde_json::from_value(v.clone())?)
    };
    let distances = get("probe_distances")?;
    let hs = get("probe_h")?;
    let levels: Vec<usize> = get("probe_levels")?.into_iter().map(|x| x as usize).collect();
    report.table = Table::new(COLUMNS);
    report.checks.clear();
    let cutoff = probe.depth.saturating_sub(3);
    for &eps in &probe.eps_grid {
        let mut last_decade = Vec::new();
        let mut worst_rel_err: f64 = 0.0;
        let mut trend = (Vec::new(), Vec::new());
        for (p, &m) in levels.iter().enumerate() {
            let key = cell_key(eps, m);
            let cell = report
                .cells
                .iter()
                .find(|c| c.key == key)
                .ok_or_else(|| LabError::Merge(format!("missing cell {key}")))?;
            let (r, se) = cell.estimate();
            report.table.push(vec![
                eps.into(),
                distances[p].into(),
                hs[p].into(),
                r.into(),
                se.into(),
                (cell.samples() as usize).into(),
            ]);
            if m == 0 {
                continue;
            }
            worst_rel_err = worst_rel_err.max(se / r);
            trend.0.push(distances[p].ln());
            trend.1.push(r.ln());
            if m >= cutoff {
                last_decade.push(r);
            }
        }
        let max = last_decade.iter().copied().fold(f64::MIN, f64::max);
        let min = last_decade.iter().copied().fold(f64::MAX, f64::min);
        let tag = format!("eps={eps}");
        report.check(Check::at_most(format!("stability {tag}"), max / min, probe.stability_factor));
        report.check(Check::below(format!("error_bar_over_ratio {tag}"), worst_rel_err, 0.5).inconclusive());
        let fit = linear_fit(&trend.0, &trend.1);
        report.param(&format!("trend_slope {tag}"), fit.slope);
        report.param(&format!("sup_ratio {tag}"), trend.1.iter().map(|x| x.exp()).fold(f64::MIN, f64::max));
        if let Some(deepest) = levels.iter().max().filter(|m| **m > 0) {
            let cell = report
                .cells
                .iter()
                .find(|c| c.key == cell_key(eps, *deepest))
                .ok_or_else(|| LabError::Merge("missing deepest cell".into()))?;
            let tail = tail_decay(cell);
            report.param(&format!("tail_log_slope {tag}"), tail.0);
            report.check(Check::below(format!("tail_decay {tag}"), tail.0 + 2.0 * tail.1, 0.0));
        }
    }
    Ok(())
}

/// Weighted fit of `log(layer mean)` against the layer index over the sixteen
/// deepest layers: `(slope, slope std error)`. A nonnegative slope means the
/// layer contributions are not summable.
fn tail_decay(cell: &McCell) -> (f64, f64) {
    let mut strata: Vec<&Stratum> = cell.strata.iter().collect();
    strata.sort_by_key(|s| s.id);
    let start = strata.len().saturating_sub(16);
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for s in &strata[start..] {
        let (_, mean, var) = s.pooled();
        if mean > 0.0 {
            x.push(s.id as f64);
            y.push(mean.ln());
            let rel = var.sqrt() / mean;
            w.push(1.0 / (rel * rel).max(1e-12));
        }
    }
    if x.len() < 3 {
        return (f64::NAN, f64::NAN);
    }
    let fit = weighted_linear_fit(&x, &y, &w);
    (fit.slope, fit.slope_stderr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DefiningFunction, RadialProfile};

    #[test]
    fn proposal_density_is_consistent_with_draws() {
        // E_q[1/q] is the volume of the angle box when q is the density of the draws.
        let prop = AngleProposal {
            n: 2,
            psi0: FRAC_PI_4,
            levels: 6,
        };
        let mut rng = rng_for(1, &[]);
        let draws = 200_000;
        let mut s = 0.0;
        for _ in 0..draws {
            let (psi, theta) = prop.draw(&mut rng);
            s += 1.0 / prop.density(&psi, &theta);
        }
        let ratio = s / draws as f64 / prop.box_volume();
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn center_probe_equals_plain_integral() {
        let disc = RadialProfile::unit_disc();
        let kernel = KernelModel::closed_form(&disc).unwrap();
        let h = WeightFunction::neg_rho(DefiningFunction::signed_distance(disc).unwrap());
        let probe = RegularityProbe {
            eps_grid: vec![0.5],
            include_center: true,
            depth: 4,
            layers: 30,
            samples_per_layer: 4000,
            ..Default::default()
        };
        let report = h_regularity_ratio(&kernel, &h, &probe).unwrap();
        // K(0; ζ̄) = 1/π, so R(0) = (1/π) ∫ (1−|ζ|)^{−1/2} dA = 2 ∫₀¹ r (1−r)^{−1/2} dr = 8/3.
        let (r, se) = report.cells[0].estimate();
        let sliver = 2.0 * 2.0 * 0.5f64.powf(15.0);
        assert!((r + sliver - 8.0 / 3.0).abs() < 4.0 * se + 1e-12, "{r} ± {se}");
    }
}
