//! Closed-form geometry of the intrinsic cost.

mod cost;
mod geodesic;
mod path;
mod point;

pub use cost::{
    cone_contains, cone_threshold, cost, distance, hamiltonian, interior_rate, lagrangian,
    sticky_rate, sticky_rate_profile,
};
pub use geodesic::{geodesic, GeodesicCase, GeodesicDescription, Segment};
pub use path::{action, check_partition, discrete_cost, sliced_cost, Path};
pub use point::{HalfSpacePoint, ModelParams};
