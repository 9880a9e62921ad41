//! Simulation and analysis of two heralded single-photon memories driven by
//! a conditional write/read protocol.

pub mod analytics;
pub mod config;
pub mod control;
pub mod engine;
pub mod eventlog;
pub mod error;
pub mod hom;
pub mod model;
pub mod oracle;
pub mod photon;
pub mod reproduce;
pub mod rng;
pub mod types;

pub use control::{
    p1122_decohered, p1122_ideal, p1122_ideal_exact, p11_exact, p11_small, p22c_model, p2c_model,
    ControlAction, ControlMode,
};
pub use config::RunConfig;
pub use engine::run;
pub use eventlog::{EventLog, LogSummary};
pub use error::{Error, Result};
pub use hom::{
    coincidence_density, coincidence_probabilities, cross_trial_ratio, effective_visibility,
    sample_detection_times, visibility_from_w, CoincidenceDensityParams, CoincidenceProbabilities,
    CrossTrialRatio, Origin, PairDistribution, SampledTimes,
};
pub use reproduce::{reproduce, selfcheck, Check, Figure, FigureReport};
pub use rng::seed_stream;
pub use photon::{conditional_distribution, retrieval_decay, sample_photon_number, two_photon_w, Field2Distribution};
pub use types::{
    quantize_time, validate, AnalysisWindows, ControlConfig, ControlState, Detection, Detector, Ensemble,
    EnsembleParams, EventKind, InterferenceConfig, Polarization, Status, TimeWindow, TrialRecord,
    ValidatedParams,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/interference.md")]
    mod interference {}
    #[doc = include_str!("../../../book/src/reproducing.md")]
    mod reproducing {}
    #[doc = include_str!("../../../book/src/discrepancies.md")]
    mod discrepancies {}
}
