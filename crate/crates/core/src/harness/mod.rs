//! Experiment runner: configuration, the (strategy, seed, budget) grid and
//! the curve artifacts it writes.

pub mod config;
pub mod output;
pub mod run;

pub use config::{DataSource, ExperimentConfig, GammaChoice};
pub use output::{
    curve_to_csv, curve_to_svg, emit_csv, emit_svg, parse_curve_csv, read_curve_csv, CurveRow, ErrorCurve,
    MeanPoint, CSV_HEADER,
};
pub use run::{repeat_seed, run_experiment, CellSelection, ExperimentOutcome, StageTiming};
