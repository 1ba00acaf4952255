//! Spatial search with discrete-time coined quantum walks on Apollonian
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] builds deterministic and seeded random Apollonian networks,
//!   keeps per-node generation labels and reads/writes the graph document.
//! * [`walk`] indexes directed arcs into the direct-sum coin space and
//!   applies the flip-flop shift and block Grover coins in `O(arcs)` per step.
//! * [`search`] runs the search experiments: probability traces, the
//!   projection onto last-generation nodes, seeded protocol sampling,
//!   generation-grouped sweeps, peak detection and the `alpha * 3^(K/2)` fit.
//! * [`spectral`] assembles the dense step operator and checks its spectrum
//!   and invariant-subspace structure.
//! * [`format`] holds the plain-text trace and summary table writers.
//!
//! Walk and search code is generic over the amplitude scalar ([`Real`]);
//! the aliases below fix it to `f64`, which is what every experiment uses.

pub mod error;
pub mod format;
pub mod graph;
pub mod scalar;
pub mod search;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
pub use graph::{
    build_apollonian, build_random_apollonian, closed_form_counts, ApollonianGraph,
    ClosedFormCounts, GraphDocument, GraphKind, NodeId,
};
pub use scalar::Real;
pub use search::{
    evolve_and_trace, expected_cost, find_first_lobe_peak, find_peak, fit_alpha,
    project_last_generation, restricted_search, sweep, Channel, ComplexityFit, InitSet,
    MarkedSet, PeakReport, SearchConfig, SweepConfig,
};
pub use spectral::{dense_step_matrix, eigen_analysis, verify_fact1, SpectralReport};
pub use walk::{grover_coin, ArcSpace, CoinSpec};

/// Seed used whenever a caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5EED_A901_1041_0001;

pub type WalkState = walk::WalkState<f64>;
pub type WalkStateF32 = walk::WalkState<f32>;
pub type ProbabilityTrace = search::ProbabilityTrace<f64>;
pub type ProbabilityTraceF32 = search::ProbabilityTrace<f32>;
pub type Projection = search::Projection<f64>;
pub type SweepResult = search::SweepResult<f64>;
pub type GroupTrace = search::GroupTrace<f64>;
pub type RestrictedSearch = search::RestrictedSearch<f64>;
