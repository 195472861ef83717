//! Arrival-process statistics for flight-plan transit records.
//!
//! The pipeline: parse records ([`records`]), find stationary periods in
//! traffic intensity ([`profile`]), cut per-route inter-arrival intervals
//! inside a period ([`intervals`]) and fit them ([`distfit`]): exponential
//! with a chi-square goodness-of-fit test, or an exponential + normal
//! mixture by the method of moments. [`streamgen`] produces seeded synthetic
//! streams with known truth for checking every step.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distfit;
pub mod exec;
pub mod intervals;
pub mod profile;
pub mod records;
pub mod simplex;
pub mod special;
pub mod streamgen;

pub use distfit::{
    chi_square_gof, empirical_raw_moment, empirical_raw_moments, fit_exponential, fit_exponential_values,
    fit_mixture_mom, mixture_density, mixture_theoretical_moments, ExponentialFit, FitError, FitReport,
    GofBinning, GofModel, GofResult, MixtureFit, MixtureParams, SolverConfig,
};
pub use exec::Execution;
pub use intervals::{extract_intervals, IntervalError, IntervalSample};
pub use profile::{
    homogeneity_test, hourly_profile, monthly_profile, segment_stationary, weekday_profile, BinKind, BinProfile,
    HomogeneityResult, PeriodKind, ProfileError, StationaryPeriod,
};
pub use records::{group_by_route, parse_records, route_key, FlightRecord, ParseReport, RecordsError, RouteKey, Schema};
pub use streamgen::{gen_homogeneous_poisson, gen_mixture_renewal, gen_nhpp, GeneratedStream, IntensityProfile, StreamTruth};
