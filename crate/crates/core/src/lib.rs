//! Phase-dependent spectral conditional extremes for multichannel time
//! series: block periodograms, two-state spectral clustering of blocks,
//! Laplace margins, a phase-dependent conditional extremes model and
//! bootstrap inference with false coverage-statement rate control.

// Negated comparisons also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cemodel;
pub mod clustering;
pub mod error;
pub mod inference;
pub mod io;
pub mod margins;
pub mod optim;
pub mod pipeline;
pub mod series;
pub mod simgen;
pub mod spectral;

pub use cemodel::{fit_spexcon, CEFit, ComponentFit, ComponentParams, ExceedanceSet};
pub use clustering::{cluster_phases, PhaseClustering, PhaseLabels};
pub use error::{Error, ErrorKind, Result};
pub use inference::{BootstrapConfig, HStar, IntervalSet};
pub use margins::LaplaceSample;
pub use pipeline::{run_pipeline, PipelineConfig, Report};
pub use series::MultiChannelSeries;
pub use simgen::{synthesize_eeg, Scenario, SimConfig, SyntheticData, TruthTable};
pub use spectral::{BandDefinition, BlockSpec, PeriodogramTensor};
