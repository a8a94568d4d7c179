//! Non-uniform quantization (NUQ) beamsteering codebooks and NUQ-based hybrid
//! analog/digital precoding for millimeter-wave MIMO links.
//!
//! The crate is organised the way a link-level simulation runs:
//!
//! - [`channel`]: ULA steering vectors, spatial-lobe profiles and channel draws.
//! - [`codebooks`]: uniform and non-uniform beamsteering codebooks for the
//!   full-connected and sub-connected RF structures, plus feedback accounting.
//! - [`precoding_full`]: NUQ hybrid design for the full-connected structure,
//!   the uniform-codebook OMP baseline and the fully-digital SVD reference.
//! - [`precoding_sub`]: NUQ hybrid design for the sub-connected structure.
//! - [`metrics`]: log-det spectral efficiency.
//! - [`harness`]: seeded Monte Carlo scenarios, sweeps and CSV/JSON output.

pub mod channel;
pub mod codebooks;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod precoding_full;
pub mod precoding_sub;

pub use channel::{
    array_response, generate_channel, generate_channel_clustered, sample_lobe_profile,
    ChannelRealization, SpatialLobeProfile, SteeringVector,
};
pub use codebooks::{
    build_nuq_codebook_full, build_nuq_codebook_sub, build_uq_codebook, equivalent_bits,
    feedback_bits, Codebook, CodebookStructure, LobeGrid,
};
pub use error::{CoverageConstraint, Error, Result};
pub use harness::{
    run_scenario, sweep, write_results, QuantRangePolicy, ResultRecord, ScenarioConfig, Scheme,
    SweepAxis,
};
pub use metrics::{relative_efficiency, spectral_efficiency, LinkBudget};
pub use precoding_full::{fully_digital, nuq_hyp_full, uq_omp, PrecoderSet, PrecoderStructure};
pub use precoding_sub::{nuq_hyp_sub, SubArrayLayout};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
