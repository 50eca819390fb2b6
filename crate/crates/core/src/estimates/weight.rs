use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{f_alpha, norm_sqr, DefiningFunction, SuccessorSpec};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "weight", rename_all = "snake_case")]
pub enum WeightKind {
    /// `−ρ` on the domain itself.
    NegRho { rho: DefiningFunction },
    /// `(1 − ‖w‖²)(−ρ(f_α(z, w)))` on `U^α(Ω)`.
    SuccessorWeight { spec: SuccessorSpec, rho: DefiningFunction },
}

/// The auxiliary function `h` of the regularity estimate, `scale · base^power`.
/// `power ≠ 1` is only meant for negative controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub kind: WeightKind,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "one")]
    pub power: f64,
}

fn one() -> f64 {
    1.0
}

impl WeightFunction {
    pub fn neg_rho(rho: DefiningFunction) -> Self {
        Self {
            kind: WeightKind::NegRho { rho },
            scale: 1.0,
            power: 1.0,
        }
    }

    pub fn successor(spec: SuccessorSpec, rho: DefiningFunction) -> Result<Self> {
        rho.profile().check_dim(spec.n())?;
        Ok(Self {
            kind: WeightKind::SuccessorWeight { spec, rho },
            scale: 1.0,
            power: 1.0,
        })
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    pub fn powered(mut self, power: f64) -> Self {
        self.power *= power;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            WeightKind::NegRho { rho } => rho.profile().dim(),
            WeightKind::SuccessorWeight { spec, .. } => spec.n() + spec.k(),
        }
    }

    pub fn eval(&self, point: &[Complex64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(LabError::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        let base = match &self.kind {
            WeightKind::NegRho { rho } => -rho.rho(point)?,
            WeightKind::SuccessorWeight { spec, rho } => {
                let (z, w) = point.split_at(spec.n());
                (1.0 - norm_sqr(w)) * -rho.rho(&f_alpha(spec, z, w)?)?
            }
        };
        Ok(self.scale * base.powf(self.power))
    }
}
