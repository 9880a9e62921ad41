//! Estimators, histograms, fits and data tables over event logs.

pub mod estimate;
pub mod fit;
pub mod histogram;
pub mod summary;
pub mod synthetic;
pub mod tables;

pub use estimate::{
    coincidence_histogram, coincidence_histogram_in, cross_peak_ratio, detector_asymmetry, estimate_p1122, estimate_p1122_in, estimate_p11,
    estimate_p11_normalized, estimate_p22c, estimate_p2c, is_coincidence, side_peak_visibility, visibility,
    visibility_from_histograms, wavepacket_profiles, DetectorPair, Estimate, PeakSelector, TrialNormalization,
};
pub use fit::{fit, FitData, FitModel, FitResult};
pub use histogram::{Histogram, Normalization};
pub use summary::{analyze, Analysis};
pub use synthetic::{fit_recovery_study, RecoveryStudy};
pub use tables::Table;
