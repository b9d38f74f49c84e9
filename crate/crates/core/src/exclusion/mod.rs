//! SEP(alpha): configurations, two simulators, duality and checks.

mod checks;
mod config;
mod direct;
mod duality;
mod ladder;

pub use checks::{
    ladder_direct_comparison, martingale_covariation_check, mean_density_evolution_check, reversibility_check,
    single_particle_histogram, CovariationReport, MarginalComparison, MeanDensityReport, PairCovariation,
    ReversibilityReport, TimeDeviation,
};
pub use config::{
    apply_move, binomial_measure_sampler, move_rate, sample_binomial_with, sep_trajectories_to_csv, LadderConfig,
    ParticleConfig, SepTrajectory,
};
pub use direct::{simulate_sep_direct, DirectSep, SumTree};
pub use duality::{
    duality_check, duality_function, multi_duality_check, single_duality_function, DualityReport, WorstCase,
    MAX_DUAL_PARTICLES,
};
pub use ladder::{lift, simulate_sep_ladder, LadderSep};
