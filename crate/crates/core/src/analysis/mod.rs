//! Fitting and measurement analysis: PL maps, background profiles, ZPL
//! spectra, g² histograms and yield extraction.

pub mod background;
pub mod fit;
pub mod g2;
pub mod spectrum;
pub mod spots;
pub mod yields;

use thiserror::Error;

use crate::stats::StatsError;

pub use background::{
    exponential_background, fit_exponential_background, radial_rate_profile, runs_test, BackgroundFit, RunsTest,
};
pub use fit::{nlls_fit, FitOptions, FitResult, FitStatus, Sample};
pub use g2::{fit_g2, g2_model, G2Fit, G2Options};
pub use spectrum::{fit_lorentzian_zpl, lorentzian, Spectrum, ZplFit, ZplOutcome};
pub use spots::{detect_spots, mark_plan_positions, BackgroundLevel, SpotDetection, SpotOptions, SpotRecord};
pub use yields::{extract_yield_curve, SpotMeasurement, YieldCurve, YieldRow, YieldSettings};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("cannot normalize: {0}")]
    Normalization(String),
    #[error("detection threshold undefined: {0}")]
    ThresholdUndefined(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}
