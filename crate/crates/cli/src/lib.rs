//! Bringup, record/replay and WebSocket bridge for the MIR vehicle twin.

pub mod bridge;
pub mod run;
