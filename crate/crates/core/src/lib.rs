//! Analysis toolkit for fixed-cycle traffic-light (FCTL) queues with
//! within-cycle-correlated arrivals.
//!
//! The model: time is divided into unit slots, a signal alternates between a
//! green period of `g` slots and a red period of `r` slots (cycle `c = g + r`).
//! One delayed vehicle departs per green slot; vehicles arriving during green
//! while the queue is empty pass through without delay. Arrivals in slot `i` of
//! a cycle may depend on arrivals in other slots of the same cycle, but
//! successive cycles are independent.
//!
//! The crate provides:
//!
//! * [`arrival`] — arrival processes as finite mixtures of per-slot
//!   shifted-Poisson scenarios, closed under superposition and slot shifting;
//! * [`lattice`] — enumeration of the queue-emptying patterns that drive the
//!   transform solution;
//! * [`numerics`] — roots of `z^g = Y(z,…,z)` inside the unit circle and
//!   pgf-to-pmf inversion;
//! * [`solver`] — the stationary queue-length pgfs, boundary probabilities and
//!   mean queue lengths of a single queue;
//! * [`output`] — the joint law of per-slot departures and the effective green
//!   time;
//! * [`network`] — decomposition of an acyclic line network of intersections;
//! * [`sim`] — a slot-based discrete-event simulator used as ground truth.

pub mod arrival;
mod complex_ext;
pub mod error;
pub mod lattice;
pub mod network;
pub mod numerics;
pub mod output;
pub mod sim;
pub mod solver;
#[cfg(feature = "testutil")]
pub mod testutil;

pub use arrival::{ArrivalProcess, Scenario, SlotDistribution};
pub use error::{Error, Result};
pub use lattice::{enumerate_g_sets, indicator_t, GTable};
pub use network::{analyze_network, embed_output, FeedEdge, NetworkNode, NetworkSolution, NetworkSpec};
pub use numerics::{find_roots, invert_pgf, taylor_coeffs, RootSet};
pub use output::OutputProcess;
pub use sim::{simulate_network, simulate_single, SimConfig, SimStats};
pub use solver::{solve_queue, QueueSolution, SignalPlan};

/// Complex double used throughout the transform machinery.
pub type Complex = num_complex::Complex64;
