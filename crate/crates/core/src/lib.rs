//! Aggressive cut-in screening on highway trajectories, next-step subject
//! vehicle acceleration predictors (LSTM, ANN, MPC) and closed-loop replay.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod evaluation;
pub mod detect;
pub mod ingest;
pub mod neural;
pub mod pipeline;
pub mod predictors;
pub mod synth;
