//! Exact inference for equivalence testing of paired binary data.
//!
//! The crate covers the bivariate binary model and its null parameter space,
//! binomial and chi-square primitives, the McNemar and margin tests, and
//! exact size/power evaluation over the discordant-count sample space.
//!
//! Everything here is `no_std` (with `alloc`); file formats, the CLI and
//! parallel sweeps live in the `paired-equiv` crate.

#![no_std]

extern crate alloc;

mod error;

pub mod evaluation;
pub mod hypothesis;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
pub use evaluation::{
    decision_map, exact_power, exact_size, mc_estimate, mc_estimate_stream, power_surface,
    region_boundary, size_surface, DecisionMap, McEstimate, PowerGrid, SizeGrid, SurfaceGrid,
    SurfaceKind,
};
pub use hypothesis::{
    confidence_region, disturb, margin_bounds, margin_pvalue, margin_test, mcnemar_test,
    ConfidenceRegion, Decision, DisturbanceReport, MarginBounds, Method, PairedCounts,
    Recommendation, TestResult, Variant, VariantOutcome,
};
pub use model::{AltParams, JointTable, MarginalParams, NullParams};
pub use numerics::BinomialSpec;

/// Absolute tolerance used for probability-sum and domain-boundary checks.
pub const TOLERANCE: f64 = 1e-12;
