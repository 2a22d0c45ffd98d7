//! Server side of the gridops simulator: the in-process message bus, the
//! role-based gateway, scenario sessions with record and replay, and the
//! WebSocket and phasor transports.

pub mod bus;
pub mod gateway;
pub mod notify;
pub mod phasor_stream;
pub mod session;
pub mod wire;
