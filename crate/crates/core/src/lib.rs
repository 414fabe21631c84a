//! Event-triggered stabilization of unstable linear plants over a
//! finite-rate channel with bounded, unknown delay.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod codec;
pub mod model;
pub mod sim;
