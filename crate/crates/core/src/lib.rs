//! Simulation and bit-train compilation for hydrogenic spin qubits: an
//! electron and a donor nucleus sharing one logical qubit, driven only by
//! switching hyperfine couplings on and off under a static field.

pub mod acceptance;
pub mod analysis;
pub mod config;
pub mod device;
pub mod error;
pub mod evolution;
pub mod gates;
pub mod protocols;
pub mod spinspace;
mod trainfile;

pub use config::DeviceConfig;
pub use device::{Coupling, DeviceLayout, PhysicalParams};
pub use error::{Error, Result};
pub use evolution::{execute, exact_propagator, ideal_pulse, train_unitary, BitTrain, Generator, TrainEvent, UnitaryOperator};
pub use gates::{compile, CompileOptions, GateKind, GateSetup, LogicalQubit, Pulse, PulseSeq};
pub use spinspace::{DensityState, HermitianOperator, SpinRegister, SpinState};
