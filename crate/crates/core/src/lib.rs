//! Order-selective removal of second- and third-order phase nonlinearities
//! from modulated signals.
//!
//! The pipeline: [`sigmodel`] synthesizes interferograms, [`stack`] turns
//! each one into a matrix of compensated spectra, [`net`] regresses the
//! corrected spectrum from that matrix, and [`metrics`] scores the result.
//! [`baseline`] is the classical two-mirror calibration used for comparison.

pub mod baseline;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod interp;
pub mod metrics;
pub mod net;
pub mod rng;
pub mod sigmodel;
pub mod spectral;
pub mod stack;

pub use baseline::{calibrate, linearize, CalibrationMap};
pub use dataset::{DatasetConfig, DatasetHeader, Sample};
pub use error::{Error, Result};
pub use experiments::{assemble_bscan, mirror_study, BScan, MirrorStudyResult, NetPipeline, Pipeline, SystemDistortion};
pub use metrics::{evaluate, fwhm, gof, peak_asymmetry, GofReport};
pub use net::{NetConfig, Network, OutputActivation, TrainOptions, TrainReport};
pub use rng::SampleRng;
pub use sigmodel::{ground_truth, synthesize_signal, Grid, Interface, ObjectSpec, Order, RawSignal};
pub use spectral::{analytic_signal, compensation_exponent, fft, ComplexSpectrum, FftPlan, PhaseProfile};
pub use stack::{build_stack, CoeffLadder, Stack};
