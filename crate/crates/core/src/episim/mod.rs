//! Best-case contact-tracing-app efficacy simulation.
//!
//! [`run_cohort`] propagates expected values from one index case on a
//! half-day grid. The agent side ([`generate_contact_graph`],
//! [`run_agent_sim`], [`trace_contacts`]) works on explicit contact events
//! and serves both as a cross-check for the cohort model and as the home of
//! the four tracing strategies.

mod agent;
mod cohort;
mod graph;
mod sweetspot;
mod table;
mod trace;
mod uptake;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agent::{run_agent_sim, AgentSummary, ReplicateOutcome, ALERT_LOOKBACK_DAYS};
pub use cohort::{run_cohort, CohortParams, CohortRow, CohortTimeSeries, GenerationStats};
pub use graph::{
    generate_contact_graph, Contact, ContactGraph, GraphParams, Individual, Infection, InfectionKind, CLOSE_CONTACT_M,
};
pub use sweetspot::{sweet_spot_search, Criterion, SWEET_SPOT_RESOLUTION};
pub use table::{table1, Table1Row, TABLE1_ADOPTIONS, TABLE1_DAYS};
pub use trace::{trace_contacts, Notification, TraceResult};
pub use uptake::{required_install_fraction, UptakeInputs, UptakePlan};

#[derive(Debug, Error, PartialEq)]
pub enum EpiError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("criterion is not satisfied even at full adoption")]
    CriterionNeverSatisfied,
    #[error("criterion is not monotone in adoption: satisfied at {satisfied_at} but not at {fails_at}")]
    CriterionNotMonotone { satisfied_at: f64, fails_at: f64 },
    #[error("infeasible: at most {ceiling:.4} of the population can run the app, target is {target:.4}")]
    Infeasible { ceiling: f64, target: f64 },
    #[error("unknown index case {0}")]
    UnknownIndexCase(u32),
    #[error("invalid graph operation: {0}")]
    InvalidGraph(String),
}

/// Which pairs an app alert can travel between.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkModel {
    /// Reporter and contact must both run the app.
    #[default]
    BothNeedApp,
    /// Only the contact needs the app; reporters without it still report
    /// through testing.
    ContactNeedsApp,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStrategy {
    /// Only the index case's direct contacts.
    FirstOrder,
    /// Contacts of contacts, once those contacts show symptoms.
    SingleStep,
    /// Contacts are tested straight away and expansion repeats until no new
    /// infections turn up.
    #[default]
    Iterative,
    /// Iterative plus identification of each case's infector.
    Retrospective,
}

impl TraceStrategy {
    pub const ALL: [TraceStrategy; 4] = [
        TraceStrategy::FirstOrder,
        TraceStrategy::SingleStep,
        TraceStrategy::Iterative,
        TraceStrategy::Retrospective,
    ];
}

pub(crate) fn check_unit(name: &str, v: f64) -> Result<(), EpiError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(EpiError::InvalidParams(format!("{name} = {v} must lie in [0,1]")))
    }
}
