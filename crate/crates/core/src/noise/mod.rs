//! Noise spectra, coherent modulations, trajectory synthesis and estimators.

pub mod estimate;
pub mod modulation;
pub mod psd;
pub mod synth;

pub use estimate::{autocorrelation, estimate_psd, periodogram_power, CorrelationTable};
pub use modulation::{sample_modulation, ModulationSpec, Tone};
pub use psd::{
    convert_psd, Conversion, Lookup, ParametricPsd, Peak, PowerLaw, PsdModel, TabulatedPsd,
};
pub use synth::{derive_seed, synthesize_trajectory, NoiseTrajectory, Synthesizer};
