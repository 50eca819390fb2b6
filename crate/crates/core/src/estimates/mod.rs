//! Estimate machinery: h-regularity ratios, Forelli–Rudin integrals, the
//! ball automorphisms and the radial reduction.

pub mod forelli;
pub mod mobius;
pub mod regularity;
pub mod weight;

pub use forelli::{
    angular_integral, asymptotic_sweep, forelli_rudin_a, forelli_rudin_a_at_center, forelli_rudin_b, AsymptoticSweep,
    McEstimate,
};
pub use mobius::{SAMPLE_RADIUS, 
    elementary_bounds_check, identity_check, mobius_apply, radial_reduction_check, MobiusMap, MOBIUS_FLOOR,
};
pub use regularity::{h_regularity_ratio, RegularityProbe};
pub use weight::{WeightFunction, WeightKind};
