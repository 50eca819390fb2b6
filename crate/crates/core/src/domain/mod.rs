//! Reinhardt domains, successors and their defining functions.

pub mod defining;
pub mod profile;
pub mod region;
pub mod sampling;
pub mod successor;

pub use defining::{check_defining_properties, DefiningFunction, RhoMode};
pub use profile::{ProfileKind, RadialProfile};
pub use region::Region;
pub use sampling::{SampleScheme, WeightedPoint};
pub use successor::{f_alpha, f_alpha_chain, inner, iterated_contains, norm_sqr, one_minus_inner, successor_contains, SuccessorChain, SuccessorSpec};
