//! Core models for the contact-tracing laboratory.
//!
//! * [`bn`] – discrete Bayesian networks with exact inference and
//!   value-of-information ranking.
//! * [`covid`] – the COVID-19 diagnostic network, alert policy and case
//!   assessment built on top of [`bn`].
//! * [`episim`] – best-case cohort model of app-based tracing, uptake
//!   arithmetic, contact graphs, tracing strategies and an agent simulator.
// `!(x >= 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bn;
pub mod covid;
pub mod episim;
