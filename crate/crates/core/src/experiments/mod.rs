//! Configuration files, parameter sweeps, figure presets and plotting.

pub mod config_file;
pub mod figures;
pub mod plot;
pub mod sweep;

pub use config_file::{load_config, parse_config, render_config};
pub use figures::{FIGURES, FigureOutput, Scale, figure_plan, reproduce_figure};
pub use sweep::{
    Metric, Row, SweepParameter, SweepResult, SweepSpec, load_sweep, parse_sweep, run_sweep,
};
