//! Density fields and their heat-equation limit.

mod field;
mod heat;
mod profile;
mod testfn;

pub use field::{
    consistency_check, density_field, hdl_experiment, lattice_values, limit_field, macroscopic_periods,
    projected_events, record_density_series, sample_profile, variance_bound_check, variance_bound_scan,
    ConsistencyReport, DensityFieldSeries, ExperimentReport, HdlEntry, HdlParams, HdlSample, InitialLaw, ScaleError,
    VarianceBoundReport,
};
pub use heat::{
    cholesky, crank_nicolson_1d, gauss_legendre, heat_kernel_density, integrate_box, spd_inverse, GaussianSemigroup,
    PeriodicGaussian,
};
pub use profile::{heat_solution, HeatSolution, MacroscopicProfile};
pub use testfn::{TestFunction, TestFunctionKind};
