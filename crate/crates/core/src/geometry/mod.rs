//! Domain and target manifolds with their metric and curvature data.

pub mod curvature;
pub mod descriptor;
pub mod domain;
pub mod target;

pub use curvature::{sec_max_over_region, sectional_curvature, CurvatureSample, SecMax, SecMaxOptions};
pub use descriptor::Descriptor;
pub use domain::{DomainKind, DomainModel};
pub use target::{TargetKind, TargetModel};
