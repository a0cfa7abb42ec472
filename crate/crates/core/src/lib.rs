//! LSTM text classifier for threat detection in underground forum posts.
//!
//! The pipeline runs forum-post ingestion ([`corpus`]), entity tagging and
//! encoding ([`textprep`]), a single-layer LSTM classifier ([`model`]),
//! BPTT training with Adam ([`training`]), metrics ([`evaluation`]) and
//! versioned archives ([`persistence`]). [`cli`] wires them into the
//! `threatlstm` command.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod persistence;
pub mod textprep;
pub mod training;
