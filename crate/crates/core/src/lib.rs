//! Exact angle statistics for lattice point configurations.
//!
//! The crate generates grids, middle blocks and lattice spheres, classifies
//! angles among triples with exact integer arithmetic, computes Riesz
//! energies and dyadic shell counts, estimates the windowed angle
//! distribution ν^ε(t), probes Fourier decay of the angle-shell measure and
//! fits log-log scaling exponents across size ladders.
//!
//! Counting convention: a configuration is a vertex `q` together with an
//! unordered pair `{p, r}` of two further distinct points, so an `N`-point
//! set has `N(N-1)(N-2)/2` configurations.

pub mod census;
pub mod cli;
pub mod energy;
pub mod error;
pub mod exact_angles;
pub mod lattice;
pub mod oscillatory;
pub mod scaling;
pub mod spectrum;

mod numeric;

pub use census::{CensusReport, SphereDecomposition};
pub use energy::{EnergyReport, ShellCountReport};
pub use error::{Error, Result};
pub use exact_angles::AngleKey;
pub use lattice::{
    LatticePoint, LatticePointSet, NestedGridSchedule, SetKind, WeightedPointMeasure,
};
pub use oscillatory::{DecayFit, ShellMeasureGrid};
pub use scaling::{Direction, ScalingReport};
pub use spectrum::{AngleHistogram, AngleSetEstimate};
