//! Run configuration: a TOML document naming the region, kernel variant,
//! suite, sampling scheme and tolerances. All quantities are dimensionless
//! (boundary distances and radii are in units of the bounding radius).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{ProfileKind, RadialProfile, Region, SampleScheme, SuccessorChain, SuccessorSpec};
use crate::error::{LabError, Result};
use crate::estimates::{RegularityProbe, SAMPLE_RADIUS};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Thm22,
    Lemma34,
    Mobius,
    Defining,
    Schur,
    Project,
    All,
}

impl Suite {
    pub const CONCRETE: [Suite; 6] = [
        Suite::Thm22,
        Suite::Lemma34,
        Suite::Mobius,
        Suite::Defining,
        Suite::Schur,
        Suite::Project,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Thm22 => "thm22",
            Suite::Lemma34 => "lemma34",
            Suite::Mobius => "mobius",
            Suite::Defining => "defining",
            Suite::Schur => "schur",
            Suite::Project => "project",
            Suite::All => "all",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::CONCRETE
            .iter()
            .chain(&[Suite::All])
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                LabError::Config(format!(
                    "unknown suite '{s}' (expected thm22, lemma34, mobius, defining, schur, project or all)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainName {
    Disc,
    Ball,
    Polydisc,
    Egg,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessorConfig {
    pub alpha: Vec<f64>,
    pub k: usize,
}

impl SuccessorConfig {
    fn spec(&self) -> Result<SuccessorSpec> {
        SuccessorSpec::new(self.alpha.clone(), self.k)
    }
}

/// The initial domain plus an optional successor step or chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub domain: DomainName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub successor: Option<SuccessorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<Vec<SuccessorConfig>>,
}

impl RegionSpec {
    pub fn domain(domain: DomainName) -> Self {
        Self {
            domain,
            dim: None,
            radii: None,
            exponents: None,
            knots: None,
            successor: None,
            chain: None,
        }
    }

    pub fn profile(&self) -> Result<RadialProfile> {
        let dim = match (&self.radii, &self.exponents, self.dim) {
            (Some(r), _, _) => r.len(),
            (None, Some(e), _) if self.domain == DomainName::Egg => e.len(),
            (None, _, Some(d)) => d,
            _ => match self.domain {
                DomainName::Disc => 1,
                DomainName::Tabulated => 2,
                _ => return Err(LabError::Config(format!("region '{:?}' needs dim or radii", self.domain))),
            },
        };
        if let Some(d) = self.dim {
            if d != dim {
                return Err(LabError::Config(format!("dim = {d} disagrees with the {dim} radii/exponents given")));
            }
        }
        let radii = self.radii.clone().unwrap_or_else(|| vec![1.0; dim]);
        let kind = match self.domain {
            DomainName::Disc => {
                if dim != 1 {
                    return Err(LabError::Config("the disc has dim = 1".into()));
                }
                ProfileKind::Ball
            }
            DomainName::Ball => ProfileKind::Ball,
            DomainName::Polydisc => ProfileKind::Polydisc,
            DomainName::Egg => ProfileKind::Egg {
                exponents: self
                    .exponents
                    .clone()
                    .ok_or_else(|| LabError::Config("egg region needs exponents".into()))?,
            },
            DomainName::Tabulated => ProfileKind::Tabulated {
                knots: self
                    .knots
                    .clone()
                    .ok_or_else(|| LabError::Config("tabulated region needs knots".into()))?,
            },
        };
        RadialProfile::new(kind, radii)
    }

    pub fn region(&self) -> Result<Region> {
        let base = self.profile()?;
        match (&self.successor, &self.chain) {
            (Some(_), Some(_)) => Err(LabError::Config("give either successor or chain, not both".into())),
            (Some(s), None) => Region::successor(base, s.spec()?),
            (None, Some(c)) => {
                let steps = c.iter().map(|s| s.spec()).collect::<Result<Vec<_>>>()?;
                Region::iterated(base, SuccessorChain::new(steps)?)
            }
            (None, None) => Ok(Region::Domain(base)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    /// Closed form where available, the successor formula over it otherwise,
    /// the monomial series as last resort.
    #[default]
    Auto,
    ClosedForm,
    Series,
    Successor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub variant: KernelVariant,
    /// Fixed truncation degree for the series variant.
    #[serde(default = "defaults::series_degree")]
    pub series_degree: usize,
    /// Cap for the diagonal-tail rule used by series oracles.
    #[serde(default = "defaults::series_max_degree")]
    pub series_max_degree: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            variant: KernelVariant::Auto,
            series_degree: defaults::series_degree(),
            series_max_degree: defaults::series_max_degree(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Sample count; each suite has its own default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default = "defaults::strata")]
    pub strata: usize,
    /// Required: there is no nondeterministic default.
    pub seed: u64,
    #[serde(default = "defaults::blocks")]
    pub blocks: u32,
    /// Half-open range of Monte Carlo blocks computed by this run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_range: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub thm22_ball: f64,
    pub thm22_series: f64,
    pub mobius: f64,
    pub radial_reduction: f64,
    pub defining: f64,
    pub reproducing: f64,
    pub refinement_slope: f64,
    pub idempotence: f64,
    pub stability_factor: f64,
    pub schur_slack: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub bounded_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            thm22_ball: 1e-8,
            thm22_series: 1e-5,
            mobius: 1e-12,
            radial_reduction: 1e-10,
            defining: 1e-8,
            reproducing: 1e-3,
            refinement_slope: -0.4,
            idempotence: 2e-2,
            stability_factor: 3.0,
            schur_slack: 1.5,
            slope: 0.05,
            r_squared: 0.99,
            bounded_ratio: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lemma34Config {
    pub k: usize,
    pub eps: f64,
    pub deltas: Vec<f64>,
    /// Values of `1 − ‖w‖²`.
    pub gaps: Vec<f64>,
}

impl Default for Lemma34Config {
    fn default() -> Self {
        Self {
            k: 1,
            eps: 0.9,
            deltas: vec![-0.5, -0.25, 0.0, 0.25],
            gaps: vec![1e-1, 1e-2, 1e-3, 0.5f64.powi(12)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobiusConfig {
    pub k_list: Vec<usize>,
    /// Radius of the ball the random `w`, `η` are drawn from.
    pub radius: f64,
}

impl Default for MobiusConfig {
    fn default() -> Self {
        Self {
            k_list: vec![1, 2, 3],
            radius: SAMPLE_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularityConfig {
    pub eps_grid: Vec<f64>,
    pub a: f64,
    pub l: f64,
    pub depth: usize,
    pub layers: usize,
    pub samples_per_layer: usize,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        let p = RegularityProbe::default();
        Self {
            eps_grid: p.eps_grid,
            a: p.a,
            l: p.l,
            depth: p.depth,
            layers: p.layers,
            samples_per_layer: p.samples_per_layer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionConfig {
    pub p_list: Vec<f64>,
    pub degree: u32,
    /// Node targets of the reproducing-property refinement study.
    pub node_counts: Vec<usize>,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            p_list: vec![1.1, 1.5, 2.0, 3.0, 6.0, 10.0],
            degree: 5,
            node_counts: vec![10_000, 100_000, 1_000_000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub suite: Suite,
    pub region: RegionSpec,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub lemma34: Lemma34Config,
    #[serde(default)]
    pub mobius: MobiusConfig,
    #[serde(default)]
    pub regularity: RegularityConfig,
    #[serde(default)]
    pub projection: ProjectionConfig,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn series_degree() -> usize {
        40
    }
    pub fn series_max_degree() -> usize {
        300
    }
    pub fn strata() -> usize {
        crate::domain::SampleScheme::DEFAULT_STRATA
    }
    pub fn blocks() -> u32 {
        4
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("reports")
    }
}

impl RunConfig {
    /// A config with every knob at its default.
    pub fn new(suite: Suite, region: RegionSpec, seed: u64) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            suite,
            region,
            kernel: KernelConfig::default(),
            sampling: SamplingConfig {
                samples: None,
                strata: defaults::strata(),
                seed,
                blocks: defaults::blocks(),
                block_range: None,
            },
            tolerances: Tolerances::default(),
            lemma34: Lemma34Config::default(),
            mobius: MobiusConfig::default(),
            regularity: RegularityConfig::default(),
            projection: ProjectionConfig::default(),
            output_dir: defaults::output_dir(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: LabError| match e {
            LabError::Config(_) => e,
            other => LabError::Config(other.to_string()),
        };
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(LabError::Config(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.region.region().map_err(cfg)?;
        if self.sampling.samples == Some(0) {
            return Err(LabError::Config("samples must be >= 1".into()));
        }
        if self.sampling.strata == 0 || self.sampling.blocks == 0 {
            return Err(LabError::Config("strata and blocks must be >= 1".into()));
        }
        if let Some((lo, hi)) = self.sampling.block_range {
            if lo >= hi || hi > self.sampling.blocks {
                return Err(LabError::Config(format!(
                    "block_range [{lo}, {hi}) must be a nonempty subrange of [0, {})",
                    self.sampling.blocks
                )));
            }
        }
        if self.lemma34.k == 0 || self.mobius.k_list.contains(&0) {
            return Err(LabError::Config("ball dimensions must be >= 1".into()));
        }
        if self.projection.p_list.iter().any(|p| !(*p > 1.0 && p.is_finite())) {
            return Err(LabError::Config("exponents p must lie in (1, inf)".into()));
        }
        self.probe().validate().map_err(cfg)?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, ignoring the output directory
    /// and the block range so partial runs of one config share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.sampling.block_range = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn samples_or(&self, default: usize) -> usize {
        self.sampling.samples.unwrap_or(default)
    }

    pub fn scheme(&self, default_samples: usize) -> SampleScheme {
        SampleScheme::new(self.samples_or(default_samples), self.sampling.seed).with_strata(self.sampling.strata)
    }

    pub fn blocks(&self) -> (u32, u32) {
        self.sampling.block_range.unwrap_or((0, self.sampling.blocks))
    }

    pub fn probe(&self) -> RegularityProbe {
        let r = &self.regularity;
        RegularityProbe {
            eps_grid: r.eps_grid.clone(),
            a: r.a,
            l: r.l,
            depth: r.depth,
            layers: r.layers,
            samples_per_layer: r.samples_per_layer,
            blocks: self.sampling.blocks,
            block_range: self.sampling.block_range,
            seed: self.sampling.seed,
            stability_factor: self.tolerances.stability_factor,
            ..RegularityProbe::default()
        }
    }

    pub fn suites(&self) -> Vec<Suite> {
        match self.suite {
            Suite::All => Suite::CONCRETE.to_vec(),
            s => vec![s],
        }
    }
}
