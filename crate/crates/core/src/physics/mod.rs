//! Domain types, units and the coupled momentum-ladder equations.

pub mod config;
pub mod ladder;
pub mod state;
pub mod units;
pub mod wavepacket;

pub use config::{
    gaussian_envelope, peak_coupling_from_area, resonance_detuning, DiffractionConfig, Envelope, Geometry, Mechanism,
    PulseKind, PulseShape, TruncationOrder,
};
pub use ladder::{rhs, GratingWeights, Ladder};
pub use state::{internal_states, AmplitudeState, InternalState, C64};
pub use units::{doppler_frequency, AtomPreset, UnitSystem};
pub use wavepacket::{MomentumGrid, WavePacket};
