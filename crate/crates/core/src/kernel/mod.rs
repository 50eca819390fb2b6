//! Bergman kernels: closed forms, the monomial-series oracle and the
//! successor transformation formula.

pub mod closed;
pub mod expansion;
pub mod series;
pub mod successor;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use closed::ClosedForm;
pub use expansion::{expand_operator, stirling2, OperatorExpansion};
pub use series::{monomial_norm, shadow_moment, MonomialSeries, NormCache, SeriesValue};
pub use successor::{h_point, h_prime_point, slice_kernel, SuccessorComposite, BRANCH_FLOOR};

use crate::domain::{RadialProfile, Region, SuccessorChain, SuccessorSpec};
use crate::error::{LabError, Result};
use crate::jet::{Jet, JetLayout};
use crate::report::write_atomic;

/// An evaluable Bergman kernel `K(z; ζ̄)`, holomorphic in `z`.
#[derive(Debug, Clone)]
pub enum KernelModel {
    ClosedForm(ClosedForm),
    MonomialSeries(Arc<MonomialSeries>),
    Successor(Box<SuccessorComposite>),
}

impl KernelModel {
    pub fn closed_form(profile: &RadialProfile) -> Result<Self> {
        Ok(KernelModel::ClosedForm(ClosedForm::for_profile(profile)?))
    }

    pub fn series(series: MonomialSeries) -> Self {
        KernelModel::MonomialSeries(Arc::new(series))
    }

    pub fn successor(inner: KernelModel, spec: SuccessorSpec) -> Result<Self> {
        Ok(KernelModel::Successor(Box::new(SuccessorComposite::new(inner, spec)?)))
    }

    /// Iterated successor with one-dimensional fibers: each step is a successor
    /// of the previous complete Reinhardt domain whose earlier fibers carry a
    /// zero exponent.
    pub fn iterated(base: KernelModel, chain: &SuccessorChain) -> Result<Self> {
        if chain.steps().iter().any(|s| s.k() != 1) {
            return Err(LabError::InvalidParameter(
                "iterated kernels are only available when every fiber has dimension 1".into(),
            ));
        }
        let profile = match base.region() {
            Region::Domain(p) => p,
            _ => return Err(LabError::InvalidParameter("iterated kernels start from a domain kernel".into())),
        };
        let n = profile.dim();
        let mut model = base;
        for (i, step) in chain.steps().iter().enumerate() {
            let mut alpha = step.alpha().to_vec();
            alpha.resize(n + i, 0.0);
            let spec = SuccessorSpec::with_zero_exponents(alpha, 1);
            let partial = SuccessorChain::new(chain.steps()[..=i].to_vec())?;
            let region = if i == 0 {
                Region::successor(profile.clone(), step.clone())?
            } else {
                Region::iterated(profile.clone(), partial)?
            };
            model = KernelModel::Successor(Box::new(SuccessorComposite::with_region(model, spec, region)?));
        }
        Ok(model)
    }

    pub fn region(&self) -> Region {
        match self {
            KernelModel::ClosedForm(c) => Region::Domain(c.profile()),
            KernelModel::MonomialSeries(s) => s.region().clone(),
            KernelModel::Successor(s) => s.region().clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            KernelModel::ClosedForm(c) => c.dim(),
            KernelModel::MonomialSeries(s) => s.region().dim(),
            KernelModel::Successor(s) => s.dim(),
        }
    }

    fn check_points(&self, z: &[Complex64], zeta: &[Complex64]) -> Result<()> {
        let region = self.region();
        for p in [z, zeta] {
            if p.len() != region.dim() {
                return Err(LabError::DimensionMismatch {
                    expected: region.dim(),
                    got: p.len(),
                });
            }
            if !region.contains(p)? {
                return Err(LabError::OutsideRegion);
            }
        }
        Ok(())
    }

    /// `K(z; ζ̄)` for interior points.
    pub fn eval(&self, z: &[Complex64], zeta: &[Complex64]) -> Result<Complex64> {
        self.check_points(z, zeta)?;
        self.eval_unchecked(z, zeta)
    }

    pub(crate) fn eval_unchecked(&self, z: &[Complex64], zeta: &[Complex64]) -> Result<Complex64> {
        match self {
            KernelModel::ClosedForm(c) => Ok(c.eval(z, zeta)),
            KernelModel::MonomialSeries(s) => Ok(s.eval(z, zeta)),
            KernelModel::Successor(s) => {
                if let Some(v) = s.eval_closed(z, zeta) {
                    return v;
                }
                let layout = JetLayout::get(z.len(), 0);
                let jets: Vec<Jet> = z.iter().map(|c| Jet::constant(&layout, *c)).collect();
                Ok(self.eval_jets(&jets, zeta)?.value())
            }
        }
    }

    /// Kernel with the holomorphic slot given as jets, conjugate slot fixed.
    pub fn eval_jets(&self, z: &[Jet], zeta: &[Complex64]) -> Result<Jet> {
        match self {
            KernelModel::ClosedForm(c) => Ok(c.eval_jets(z, zeta)),
            KernelModel::MonomialSeries(s) => s.eval_jets(z, zeta),
            KernelModel::Successor(s) => s.eval_jets(z, zeta),
        }
    }

    /// Taylor jet of `z ↦ K(z; ζ̄)` at `z` up to total order `order`.
    pub fn jet(&self, z: &[Complex64], zeta: &[Complex64], order: usize) -> Result<Jet> {
        self.check_points(z, zeta)?;
        if let KernelModel::MonomialSeries(s) = self {
            if order > s.degree() {
                return Err(LabError::UnsupportedOrder {
                    requested: order,
                    supported: s.degree(),
                });
            }
        }
        let layout = JetLayout::get(z.len(), order);
        let vars: Vec<Jet> = z
            .iter()
            .enumerate()
            .map(|(j, c)| Jet::variable(&layout, j, *c))
            .collect();
        self.eval_jets(&vars, zeta)
    }
}

pub fn kernel_eval(model: &KernelModel, z: &[Complex64], zeta: &[Complex64]) -> Result<Complex64> {
    model.eval(z, zeta)
}

pub fn kernel_jet(model: &KernelModel, z: &[Complex64], zeta: &[Complex64], order: usize) -> Result<Jet> {
    model.jet(z, zeta, order)
}

/// `K_{U^α}((z,w); conj(ζ,η))` via the transformation formula.
pub fn successor_kernel(
    inner: &KernelModel,
    spec: &SuccessorSpec,
    zw: &[Complex64],
    zeta_eta: &[Complex64],
) -> Result<Complex64> {
    KernelModel::successor(inner.clone(), spec.clone())?.eval(zw, zeta_eta)
}

/// One line of an exported evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub z: Vec<[f64; 2]>,
    pub zeta: Vec<[f64; 2]>,
    pub value: [f64; 2],
    pub oracle: [f64; 2],
    pub rel_err: f64,
}

impl GridRecord {
    pub fn new(z: &[Complex64], zeta: &[Complex64], value: Complex64, oracle: Complex64) -> Self {
        let pair = |c: &Complex64| [c.re, c.im];
        Self {
            z: z.iter().map(pair).collect(),
            zeta: zeta.iter().map(pair).collect(),
            value: pair(&value),
            oracle: pair(&oracle),
            rel_err: (value - oracle).norm() / oracle.norm(),
        }
    }
}

pub fn export_grid(path: &Path, records: &[GridRecord]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.write_all(b"\n")?;
    }
    write_atomic(path, &buf)
}
