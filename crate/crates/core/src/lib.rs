//! Capacity planning and dispatch optimization for renewable-powered
//! green-hydrogen production, solid direct-air capture, and their
//! sector-coupled integration.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`domain`] — facility economics, energy intensities, and the JSON
//!    configuration schema.
//! 2. [`scenario`] — weighted annual weather scenarios as hourly wind/solar
//!    capacity-factor series (CSV ingestion or a synthetic generator).
//! 3. [`formulator`] — translates a configuration plus scenarios into a
//!    two-stage stochastic linear program: first-stage capacity decisions,
//!    per-scenario hourly dispatch recourse.
//! 4. [`simplex`] — a revised simplex solver for sparse bounded-variable
//!    LPs, with MPS export and solution auditing.
//! 5. [`metrics`] — levelized costs (LCOH/LCOD), improvement and synergy of
//!    coupling, capacity factors, and grouped cost breakdowns.
//! 6. [`experiments`] — batch campaigns: removal-rate sweeps, cost
//!    sensitivity, heat-pump flexibility, and bus-topology comparison.

pub mod domain;
pub mod error;
pub mod experiments;
pub mod formulator;
pub mod lp;
pub mod metrics;
pub mod scenario;
pub mod simplex;

pub use domain::{
    BusMode, Co2Enforcement, ConverterEfficiencies, EconomicParams, EnergyIntensities,
    FacilityKind, FacilitySpec, SystemConfig, annualized_cost, crf,
};
pub use error::Error;
pub use formulator::{DesignResult, DispatchVar, ModelKind, VarCatalog, extract_design};
pub use lp::{LpProblem, RowSense};
pub use metrics::{MetricsReport, TacBreakdown};
pub use scenario::{Scenario, ScenarioSet, SynthParams};
pub use simplex::{SolveOptions, SolveResult, SolveStatus};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Hours in a (non-leap) year; the annualization basis for all rates.
pub const HOURS_PER_YEAR: f64 = 8760.0;
