//! Simulation core for the gridops operator-training simulator: the static
//! network model, the quasi-steady-state AC power-flow engine, the GIC
//! overlay and the synchrophasor frame codec.

pub mod clock;
pub mod gmd;
pub mod grid;
pub mod phasor;
pub mod powerflow;

pub use grid::NetworkCase;
