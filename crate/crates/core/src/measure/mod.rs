//! Statistics of the invariant measure estimated from long trajectories.

mod accumulator;
mod dissipation;
mod functionals;
mod gevrey;

pub use accumulator::{AccumulatorSummary, MomentAccumulator};
pub use dissipation::{
    dissipation_scale_fit, DissipationFit, ShellBin, ShellSpectrum, SpectrumAccumulator,
    MIN_SHELLS, NOISE_FLOOR,
};
pub use functionals::{
    energy_balance_residual, epsilon, holder_recursion_bound, log_plus_moment, m_p_statistic,
    r_p_statistic, regularity_statistic, EnergyBalance,
};
pub use gevrey::{
    check_interpolation, estimate_alpha_nu, gevrey_budget, interp_constant, interp_exponent,
    log_gevrey_sq, GevreyBudget, GevreyBudgetEvaluator, StoppingRecord, TauFit, TauObserver,
    TauSample,
};
