//! `bergman-lab`: batch front-end for the verification suites.
//!
//! Exit codes: 0 pass, 1 fail (or a runtime error), 2 parse or config error,
//! 3 inconclusive.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use bergman_lab::config::{DomainName, KernelVariant, RegionSpec, RunConfig, Suite, SuccessorConfig};
use bergman_lab::report::{EstimateReport, Verdict};
use bergman_lab::suites::{build_kernel, header_for, merge_files, report_stem, run_suite, verdict_of, write_outputs};
use bergman_lab::{LabError, C64};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bergman-lab", version, about = "Bergman kernels of successor domains: evaluation and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite (thm22, lemma34, mobius, defining, schur, project or all).
    Verify {
        suite: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Kernel evaluations.
    Kernel {
        #[command(subcommand)]
        command: KernelCommand,
    },
    /// L^p ratios of the discretized projection on a jittered node set.
    Project {
        #[command(flatten)]
        run: RunArgs,
        /// Projection mode: signed or absolute.
        #[arg(long, default_value = "signed")]
        mode: String,
    },
    /// Merge report files from partial runs of one config.
    Merge {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum KernelCommand {
    /// Evaluate K(z, zeta); points are comma-separated complex numbers such as `0.1+0.2i,0.3`.
    Eval {
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long = "kernel")]
        variant: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, allow_hyphen_values = true)]
        zeta: String,
    },
}

#[derive(Args, Clone, Default)]
struct RegionArgs {
    /// disc, ball, polydisc, egg or tabulated.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    radii: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    exponents: Vec<f64>,
    /// Successor exponents; with --k this selects the successor region.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Fiber dimension of the successor (and the ball dimension for lemma34).
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML run config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    region: RegionArgs,
    /// Seed of every random stream. Defaults to 0 when no config is given.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    strata: Option<usize>,
    #[arg(long)]
    blocks: Option<u32>,
    /// Half-open block range `lo:hi` computed by this run.
    #[arg(long, value_parser = parse_range)]
    block_range: Option<(u32, u32)>,
    /// Kernel variant: auto, closed_form, series or successor.
    #[arg(long = "kernel")]
    variant: Option<String>,
    /// Exponents delta of the Forelli-Rudin sweep.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    delta: Vec<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Exponents p of the L^p ratios.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

/// Errors that map to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

fn lab(e: LabError) -> anyhow::Error {
    match e {
        LabError::Config(_) | LabError::Merge(_) => usage(e),
        other => other.into(),
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> anyhow::Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| usage(format!("unknown {what} '{s}'")))
}

fn region_from(args: &RegionArgs, base: Option<RegionSpec>) -> anyhow::Result<RegionSpec> {
    let mut spec = match (&args.domain, base) {
        (Some(d), _) => RegionSpec::domain(parse_enum::<DomainName>("domain", d)?),
        (None, Some(b)) => b,
        (None, None) => RegionSpec::domain(DomainName::Disc),
    };
    if args.dim.is_some() {
        spec.dim = args.dim;
    }
    if !args.radii.is_empty() {
        spec.radii = Some(args.radii.clone());
    }
    if !args.exponents.is_empty() {
        spec.exponents = Some(args.exponents.clone());
    }
    if !args.alpha.is_empty() {
        spec.successor = Some(SuccessorConfig {
            alpha: args.alpha.clone(),
            k: args.k.unwrap_or(1),
        });
        spec.chain = None;
    } else if let (Some(k), Some(s)) = (args.k, spec.successor.as_mut()) {
        s.k = k;
    }
    Ok(spec)
}

fn build_config(suite: Suite, args: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let mut c = RunConfig::load(path).map_err(lab)?;
            c.suite = suite;
            c.region = region_from(&args.region, Some(c.region.clone()))?;
            if let Some(seed) = args.seed {
                c.sampling.seed = seed;
            }
            c
        }
        None => RunConfig::new(suite, region_from(&args.region, None)?, args.seed.unwrap_or(0)),
    };
    if args.samples.is_some() {
        config.sampling.samples = args.samples;
    }
    if let Some(s) = args.strata {
        config.sampling.strata = s;
    }
    if let Some(b) = args.blocks {
        config.sampling.blocks = b;
    }
    if args.block_range.is_some() {
        config.sampling.block_range = args.block_range;
    }
    if let Some(v) = &args.variant {
        config.kernel.variant = parse_enum::<KernelVariant>("kernel variant", v)?;
    }
    if let Some(k) = args.region.k {
        config.lemma34.k = k;
    }
    if !args.delta.is_empty() {
        config.lemma34.deltas = args.delta.clone();
    }
    if let Some(eps) = args.eps {
        config.lemma34.eps = eps;
    }
    if !args.p.is_empty() {
        config.projection.p_list = args.p.clone();
    }
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    config.validate().map_err(lab)?;
    Ok(config)
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn print_reports(reports: &[EstimateReport]) {
    for r in reports {
        println!("{}", r.summary_line());
        for c in r.checks.iter().filter(|c| c.verdict != Verdict::Pass) {
            println!("    {:?}: {} = {:e} (needs {} {:e})", c.verdict, c.name, c.value, c.relation, c.threshold);
        }
    }
}

fn verify(suite: &str, args: &RunArgs) -> anyhow::Result<Verdict> {
    let suite: Suite = suite.parse().map_err(lab)?;
    let config = build_config(suite, args)?;
    let created = now_secs();
    let mut overall = Verdict::Pass;
    for s in config.suites() {
        if config.suite == Suite::All && s == Suite::Thm22 && config.region.successor.is_none() && config.region.chain.is_none() {
            println!("[SKIP] thm22: region has no successor step");
            continue;
        }
        let start = Instant::now();
        let reports = run_suite(&config, s).map_err(lab).with_context(|| format!("suite {}", s.name()))?;
        let path = write_outputs(&config.output_dir, &report_stem(&config, s), &header_for(&config, created), &reports)?;
        print_reports(&reports);
        println!("  -> {} ({:.1} s)", path.display(), start.elapsed().as_secs_f64());
        overall = overall.combine(verdict_of(&reports));
    }
    Ok(overall)
}

fn parse_point(s: &str) -> anyhow::Result<Vec<C64>> {
    s.split(',')
        .map(|t| t.trim().parse::<C64>().map_err(|e| usage(format!("bad complex number '{t}': {e}"))))
        .collect()
}

fn kernel_eval(region: &RegionArgs, variant: &Option<String>, z: &str, zeta: &str) -> anyhow::Result<Verdict> {
    let mut config = RunConfig::new(Suite::Thm22, region_from(region, None)?, 0);
    if let Some(v) = variant {
        config.kernel.variant = parse_enum::<KernelVariant>("kernel variant", v)?;
    }
    config.validate().map_err(lab)?;
    let model = build_kernel(&config).map_err(lab)?;
    let (z, zeta) = (parse_point(z)?, parse_point(zeta)?);
    let v = model.eval(&z, &zeta).map_err(|e| match e {
        LabError::DimensionMismatch { .. } | LabError::OutsideRegion => usage(e),
        other => other.into(),
    })?;
    println!("{}", serde_json::json!({ "z": z, "zeta": zeta, "value": [v.re, v.im] }));
    Ok(Verdict::Pass)
}

fn project(args: &RunArgs, mode: &str) -> anyhow::Result<Verdict> {
    use bergman_lab::projection::{lp_ratio, ProjectionMode, ProjectionOperator, TestFamily};
    let mode = match mode {
        "signed" => ProjectionMode::Signed,
        "absolute" => ProjectionMode::Absolute,
        other => return Err(usage(format!("unknown projection mode '{other}'"))),
    };
    let config = build_config(Suite::Project, args)?;
    let kernel = build_kernel(&config).map_err(lab)?;
    let seed = config.sampling.seed;
    let op = ProjectionOperator::jittered(kernel.clone(), config.samples_or(2000), seed, mode)?;
    let family = TestFamily::mixed(kernel.dim(), config.projection.degree, 4, seed);
    let reports = vec![lp_ratio(&op, &family, &config.projection.p_list)?];
    let path = write_outputs(&config.output_dir, "project-lp", &header_for(&config, now_secs()), &reports)?;
    print_reports(&reports);
    println!("  -> {}", path.display());
    Ok(verdict_of(&reports))
}

fn merge(inputs: &[PathBuf], output: &Path) -> anyhow::Result<Verdict> {
    let (header, reports) = merge_files(inputs).map_err(lab)?;
    let dir = output.parent().map(PathBuf::from).unwrap_or_default();
    let stem = output
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("output needs a file name"))?;
    let path = write_outputs(&dir, stem, &header, &reports)?;
    print_reports(&reports);
    println!("  -> {} (blocks {}..{})", path.display(), header.blocks.0, header.blocks.1);
    Ok(verdict_of(&reports))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify { suite, run } => verify(suite, run),
        Command::Kernel {
            command: KernelCommand::Eval { region, variant, z, zeta },
        } => kernel_eval(region, variant, z, zeta),
        Command::Project { run, mode } => project(run, mode),
        Command::Merge { inputs, output } => merge(inputs, output),
    };
    match result {
        Ok(v) => ExitCode::from(v.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<UsageError>().is_some() { 2 } else { 1 })
        }
    }
}
