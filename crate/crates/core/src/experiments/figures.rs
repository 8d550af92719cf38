//! Preset sweeps for the five standard figures.
//!
//! | name  | swept        | series             | metrics                          |
//! |-------|--------------|--------------------|----------------------------------|
//! | fig1  | T (dB)       | lambda_ap 20/40/80 | coverage (bound, CF MC, SC MC)   |
//! | fig2  | lambda_ap    | T 0/5/10 dB        | coverage (bound, CF MC, SC MC)   |
//! | fig3  | K            | tau_tr 5/10/20     | rate (bound, CF MC, SC MC)       |
//! | fig4  | lambda_ap    | tau_tr 5/10/20     | rate (bound, CF MC, SC MC)       |
//! | fig5a | alpha        | lambda_ap 60       | rate (bound, CF MC, SC MC)       |
//! | fig5b | alpha        | lambda_ap 120      | rate (bound, CF MC, SC MC)       |
//!
//! The grids approximate the axis ranges of the published plots.

use std::path::{Path, PathBuf};

use super::plot::render_svg;
use super::sweep::{
    Metric, SweepParameter, SweepResult, SweepSpec, parse_values, run_sweep, series_of, y_label,
};
use crate::config::{MonteCarlo, SystemConfig};
use crate::error::{Error, Result};

pub const FIGURES: &[&str] = &["fig1", "fig2", "fig3", "fig4", "fig5a", "fig5b"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "desk" => Some(Self::Desk),
            "paper" => Some(Self::Paper),
            _ => None,
        }
    }

    pub fn replicates(self) -> MonteCarlo {
        match self {
            Self::Desk => MonteCarlo {
                n_topologies: 1000,
                n_channel_draws: 50,
            },
            Self::Paper => MonteCarlo {
                n_topologies: 10_000,
                n_channel_draws: 10_000,
            },
        }
    }
}

/// One curve family of a figure.
#[derive(Clone, Debug)]
pub struct FigureSeries {
    pub label: String,
    pub stem: String,
    pub config: SystemConfig,
    pub spec: SweepSpec,
}

const COVERAGE: [Metric; 3] = [
    Metric::CoverageAnalytical,
    Metric::CoverageMc,
    Metric::ScCoverageMc,
];
const RATE: [Metric; 3] = [Metric::RateAnalytical, Metric::RateMc, Metric::ScRateMc];

fn grid(s: &str) -> Vec<f64> {
    parse_values(s).expect("static grid")
}

/// Series definitions of a figure, with `base` supplying everything not fixed by the figure.
pub fn figure_plan(name: &str, scale: Scale, base: &SystemConfig) -> Result<Vec<FigureSeries>> {
    let mc = scale.replicates();
    let lambda_grid = grid("10:120:10");
    let series = |label: String, config: SystemConfig, spec: SweepSpec| FigureSeries {
        stem: format!("{name}_{}", label.replace(['=', ' '], "")),
        label,
        config,
        spec,
    };
    let plan = match name {
        "fig1" => [20.0, 40.0, 80.0]
            .into_iter()
            .map(|lambda| {
                let c = SystemConfig {
                    lambda_ap: lambda,
                    ..base.clone()
                };
                let spec = SweepSpec::new(
                    SweepParameter::Threshold,
                    grid("-10:20:2"),
                    COVERAGE.to_vec(),
                    mc,
                );
                series(format!("lambda={lambda}"), c, spec)
            })
            .collect(),
        "fig2" => [0.0, 5.0, 10.0]
            .into_iter()
            .map(|t| {
                let mut spec = SweepSpec::new(
                    SweepParameter::LambdaAp,
                    lambda_grid.clone(),
                    COVERAGE.to_vec(),
                    mc,
                );
                spec.threshold_db = t;
                series(format!("T={t}dB"), base.clone(), spec)
            })
            .collect(),
        "fig3" => [5usize, 10, 20]
            .into_iter()
            .map(|tau| {
                let c = SystemConfig {
                    lambda_ap: 80.0,
                    tau_tr: tau,
                    ..base.clone()
                };
                let spec = SweepSpec::new(SweepParameter::Users, grid("5:55:5"), RATE.to_vec(), mc);
                series(format!("tau={tau}"), c, spec)
            })
            .collect(),
        "fig4" => [5usize, 10, 20]
            .into_iter()
            .map(|tau| {
                let c = SystemConfig {
                    tau_tr: tau,
                    ..base.clone()
                };
                let spec =
                    SweepSpec::new(SweepParameter::LambdaAp, lambda_grid.clone(), RATE.to_vec(), mc);
                series(format!("tau={tau}"), c, spec)
            })
            .collect(),
        "fig5a" | "fig5b" => {
            let lambda = if name == "fig5a" { 60.0 } else { 120.0 };
            let c = SystemConfig {
                lambda_ap: lambda,
                ..base.clone()
            };
            let spec = SweepSpec::new(SweepParameter::Alpha, grid("2.5:5:0.25"), RATE.to_vec(), mc);
            vec![series(format!("lambda={lambda}"), c, spec)]
        }
        other => {
            return Err(Error::config(
                "figure",
                format!("unknown figure `{other}`; expected one of {}", FIGURES.join(", ")),
            ));
        }
    };
    Ok(plan)
}

#[derive(Clone, Debug)]
pub struct FigureOutput {
    pub name: String,
    pub series: Vec<(FigureSeries, SweepResult)>,
    pub svg: PathBuf,
}

/// Runs every series of a figure, writing one CSV/SVG/JSON set per series and a
/// combined `<name>.svg`.
pub fn reproduce_figure(
    name: &str,
    scale: Scale,
    base: &SystemConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<FigureOutput> {
    let plan = figure_plan(name, scale, base)?;
    let mut series = Vec::with_capacity(plan.len());
    for s in plan {
        let r = run_sweep(&s.config, &s.spec, out_dir, &s.stem, threads)?;
        series.push((s, r));
    }
    let curves: Vec<_> = series
        .iter()
        .flat_map(|(s, r)| series_of(r, &s.label))
        .collect();
    let first = &series[0].0.spec;
    let svg = render_svg(
        name,
        first.parameter.axis_label(),
        y_label(&first.metrics),
        &curves,
    );
    let svg_path = out_dir.join(format!("{name}.svg"));
    std::fs::write(&svg_path, svg).map_err(|e| Error::io(&svg_path, e))?;
    Ok(FigureOutput {
        name: name.to_string(),
        series,
        svg: svg_path,
    })
}
