//! Software twin of a ride-on-car drive-by-wire research platform.
//!
//! The crate emulates the dual-microcontroller control unit ([`firmware`]),
//! the serial framing between it and the host ([`wire`]), the vehicle and its
//! sensors ([`plant`]), and the host-side node graph ([`bus`], [`teleop`],
//! [`daq`]). [`sim`] wires all of it together on a deterministic 1 kHz clock.

pub mod msgs;
pub mod wire;
pub mod firmware;
pub mod plant;
pub mod bus;
pub mod teleop;
pub mod daq;
pub mod config;
pub mod sim;
