//! Parameter sweeps: spec files, evaluation and CSV / SVG / JSON output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::config_file::{Fields, embedded_or_plain, parse_entries, render_config};
use super::plot::{Series, render_svg};
use crate::channel::{PilotBook, make_pilot_book};
use crate::closed_form::{coverage_lower_bound, db_to_linear, rate_lower_bound};
use crate::config::{MonteCarlo, SystemConfig};
use crate::downlink::{SinrSource, TYPICAL_USER, sc_baseline_sinr, typical_user_sinr};
use crate::error::{Error, Result};
use crate::geometry::sample_ppp;
use crate::seed;

pub const MAX_TOPOLOGIES: usize = 10_000;
pub const MAX_CHANNEL_DRAWS: usize = 10_000;
pub const CSV_HEADER: &str = "param,metric,mean,stderr";

pub const SWEEP_KEYS: &[&str] = &[
    "parameter",
    "values",
    "metrics",
    "n_topologies",
    "n_channel_draws",
    "threshold_db",
    "sinr_source",
    "time_budget_s",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParameter {
    /// SINR threshold in dB.
    Threshold,
    LambdaAp,
    Users,
    TauTr,
    Alpha,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Threshold => "T",
            Self::LambdaAp => "lambda_ap",
            Self::Users => "K",
            Self::TauTr => "tau_tr",
            Self::Alpha => "alpha",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::Threshold,
            Self::LambdaAp,
            Self::Users,
            Self::TauTr,
            Self::Alpha,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }

    pub fn axis_label(self) -> &'static str {
        match self {
            Self::Threshold => "SINR threshold T (dB)",
            Self::LambdaAp => "AP density (APs/km^2)",
            Self::Users => "users K",
            Self::TauTr => "training length (samples)",
            Self::Alpha => "path-loss exponent",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, Self::Users | Self::TauTr)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    CoverageAnalytical,
    CoverageMc,
    RateAnalytical,
    RateMc,
    ScRateMc,
    ScCoverageMc,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Self::CoverageAnalytical,
        Self::CoverageMc,
        Self::RateAnalytical,
        Self::RateMc,
        Self::ScRateMc,
        Self::ScCoverageMc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::CoverageAnalytical => "coverage_analytical",
            Self::CoverageMc => "coverage_mc",
            Self::RateAnalytical => "rate_analytical",
            Self::RateMc => "rate_mc",
            Self::ScRateMc => "sc_rate_mc",
            Self::ScCoverageMc => "sc_coverage_mc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    fn needs_topologies(self) -> bool {
        !matches!(self, Self::CoverageAnalytical | Self::RateAnalytical)
    }

    fn needs_sc(self) -> bool {
        matches!(self, Self::ScRateMc | Self::ScCoverageMc)
    }

    pub fn is_rate(self) -> bool {
        matches!(self, Self::RateAnalytical | Self::RateMc | Self::ScRateMc)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub metrics: Vec<Metric>,
    pub mc: MonteCarlo,
    /// Threshold for coverage metrics when the swept parameter is not `T`.
    pub threshold_db: f64,
    pub sinr_source: SinrSource,
    /// Wall-clock budget; points not started before it runs out are dropped.
    pub time_budget_s: Option<f64>,
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, values: Vec<f64>, metrics: Vec<Metric>, mc: MonteCarlo) -> Self {
        Self {
            parameter,
            values,
            metrics,
            mc,
            threshold_db: 0.0,
            sinr_source: SinrSource::Deterministic,
            time_budget_s: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("values", "need at least one value"));
        }
        let up = self.values.windows(2).all(|w| w[0] < w[1]);
        let down = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return Err(Error::config("values", "must be strictly monotone"));
        }
        if self.values.iter().any(|v| v.is_nan()) {
            return Err(Error::config("values", "NaN is not a valid value"));
        }
        if self.parameter.is_integer()
            && self.values.iter().any(|v| *v < 1.0 || v.fract() != 0.0)
        {
            return Err(Error::config("values", "must be positive integers"));
        }
        if self.metrics.is_empty() {
            return Err(Error::config("metrics", "need at least one metric"));
        }
        if !(1..=MAX_TOPOLOGIES).contains(&self.mc.n_topologies) {
            return Err(Error::config(
                "n_topologies",
                format!("must lie in 1..={MAX_TOPOLOGIES}"),
            ));
        }
        if !(1..=MAX_CHANNEL_DRAWS).contains(&self.mc.n_channel_draws) {
            return Err(Error::config(
                "n_channel_draws",
                format!("must lie in 1..={MAX_CHANNEL_DRAWS}"),
            ));
        }
        if !self.threshold_db.is_finite() {
            return Err(Error::config("threshold_db", "must be finite"));
        }
        if let Some(b) = self.time_budget_s {
            if !(b > 0.0) {
                return Err(Error::config("time_budget_s", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Parses `a, b, c` or an inclusive range `start:stop:step`.
pub fn parse_values(v: &str) -> Option<Vec<f64>> {
    if v.contains(':') {
        let parts: Vec<f64> = v.split(':').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
        let [start, stop, step] = parts[..] else {
            return None;
        };
        if !(step.is_finite() && step != 0.0) || (stop - start) / step < 0.0 {
            return None;
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if n > 100_000 {
            return None;
        }
        Some((0..n).map(|i| start + i as f64 * step).collect())
    } else {
        v.split(',').map(|p| p.trim().parse().ok()).collect()
    }
}

/// Parses sweep-spec text; replicate counts default to `defaults`.
pub fn parse_sweep(text: &str, defaults: MonteCarlo) -> Result<SweepSpec> {
    let entries = parse_entries(text, SWEEP_KEYS)?;
    let f = Fields::new(&entries);
    let bad = |key: &str, reason: String| Error::Parse {
        line: f.line(key).unwrap_or(0),
        key: key.to_string(),
        reason,
    };
    let parameter = match f.raw("parameter") {
        None => return Err(bad("parameter", "missing".into())),
        Some(p) => SweepParameter::parse(p)
            .ok_or_else(|| bad("parameter", format!("unknown parameter `{p}`")))?,
    };
    let values = match f.raw("values") {
        None => return Err(bad("values", "missing".into())),
        Some(v) => parse_values(v).ok_or_else(|| bad("values", format!("cannot parse `{v}`")))?,
    };
    let metrics = match f.raw("metrics") {
        None => return Err(bad("metrics", "missing".into())),
        Some(v) => v
            .split(',')
            .map(|m| {
                let m = m.trim();
                Metric::parse(m).ok_or_else(|| bad("metrics", format!("unknown metric `{m}`")))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let sinr_source = match f.raw("sinr_source") {
        None | Some("de") => SinrSource::Deterministic,
        Some("statistical") => SinrSource::Statistical,
        Some(v) => {
            return Err(bad(
                "sinr_source",
                format!("expected `de` or `statistical`, got `{v}`"),
            ));
        }
    };
    let spec = SweepSpec {
        parameter,
        values,
        metrics,
        mc: MonteCarlo {
            n_topologies: f.parsed("n_topologies")?.unwrap_or(defaults.n_topologies),
            n_channel_draws: f.parsed("n_channel_draws")?.unwrap_or(defaults.n_channel_draws),
        },
        threshold_db: f.f64("threshold_db")?.unwrap_or(0.0),
        sinr_source,
        time_budget_s: f.f64("time_budget_s")?,
    };
    spec.validate().map_err(|e| match &e {
        Error::InvalidConfig { key, .. } => match f.line(key) {
            Some(l) => e.at_line(l),
            None => e,
        },
        _ => e,
    })?;
    Ok(spec)
}

pub fn load_sweep(path: &Path, defaults: MonteCarlo) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sweep(&embedded_or_plain(&text, "sweep"), defaults)
}

pub fn render_sweep(s: &SweepSpec) -> String {
    let values: Vec<String> = s.values.iter().map(|v| format!("{v:?}")).collect();
    let metrics: Vec<&str> = s.metrics.iter().map(|m| m.name()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "parameter = {}", s.parameter.name());
    let _ = writeln!(out, "values = {}", values.join(", "));
    let _ = writeln!(out, "metrics = {}", metrics.join(", "));
    let _ = writeln!(out, "n_topologies = {}", s.mc.n_topologies);
    let _ = writeln!(out, "n_channel_draws = {}", s.mc.n_channel_draws);
    let _ = writeln!(out, "threshold_db = {:?}", s.threshold_db);
    let _ = writeln!(out, "sinr_source = {}", s.sinr_source.name());
    if let Some(b) = s.time_budget_s {
        let _ = writeln!(out, "time_budget_s = {b:?}");
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub param: f64,
    pub metric: Metric,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<Row>,
    pub config: SystemConfig,
    pub spec: SweepSpec,
    pub seed: u64,
    pub version: &'static str,
    pub wall_time_s: f64,
    pub truncated: bool,
    pub completed_points: usize,
    pub files: Vec<PathBuf>,
}

impl SweepResult {
    /// `(param, mean)` pairs of one metric in sweep order.
    pub fn curve(&self, metric: Metric) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.param, r.mean))
            .collect()
    }

    pub fn stderr(&self, metric: Metric) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.stderr)
            .collect()
    }
}

/// Config for one sweep point plus the coverage threshold in dB.
pub fn point_config(base: &SystemConfig, spec: &SweepSpec, value: f64) -> Result<(SystemConfig, f64)> {
    let mut c = base.clone();
    c.mc = spec.mc;
    let mut t_db = spec.threshold_db;
    match spec.parameter {
        SweepParameter::Threshold => t_db = value,
        SweepParameter::LambdaAp => c.lambda_ap = value,
        SweepParameter::Users => c.users = value as usize,
        SweepParameter::TauTr => c.tau_tr = value as usize,
        SweepParameter::Alpha => c.alpha = value,
    }
    c.validate()?;
    Ok((c, t_db))
}

/// Typical-user SINRs of the cell-free system and, optionally, the small-cell
/// baseline on the same topologies.
#[derive(Clone, Debug)]
pub struct TopologySamples {
    pub cf: Vec<f64>,
    pub sc: Option<Vec<f64>>,
}

pub fn topology_samples(
    config: &SystemConfig,
    book: &PilotBook,
    source: SinrSource,
    with_sc: bool,
    master_seed: u64,
) -> Result<TopologySamples> {
    let pairs: Vec<(f64, f64)> = (0..config.mc.n_topologies)
        .into_par_iter()
        .map(|t| {
            let ts = seed::topology_seed(master_seed, t);
            let net = sample_ppp(config, ts)?;
            let ds = seed::draw_seed(ts);
            let n = config.mc.n_channel_draws;
            let cf = typical_user_sinr(&net, config, book, source, n, ds);
            let sc = if with_sc {
                sc_baseline_sinr(&net, config, book, n, ds, Some(TYPICAL_USER)).sinr[TYPICAL_USER]
            } else {
                f64::NAN
            };
            Ok((cf, sc))
        })
        .collect::<Result<_>>()?;
    let (cf, sc): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(TopologySamples {
        cf,
        sc: with_sc.then_some(sc),
    })
}

fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn coverage_of(samples: &[f64], t_db: f64) -> (f64, f64) {
    let t = db_to_linear(t_db);
    let n = samples.len() as f64;
    let p = samples.iter().filter(|&&s| s > t).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Evaluates every metric at every swept value in the current rayon pool.
/// Returns the rows and whether the time budget cut the sweep short.
pub fn evaluate(config: &SystemConfig, spec: &SweepSpec, master_seed: u64) -> Result<(Vec<Row>, bool)> {
    spec.validate()?;
    let start = Instant::now();
    let need_topologies = spec.metrics.iter().any(|m| m.needs_topologies());
    let need_sc = spec.metrics.iter().any(|m| m.needs_sc());
    let mut rows = Vec::new();
    let mut cached: Option<TopologySamples> = None;
    let mut truncated = false;
    for &value in &spec.values {
        if let Some(budget) = spec.time_budget_s {
            if start.elapsed().as_secs_f64() > budget {
                truncated = true;
                break;
            }
        }
        let (c, t_db) = point_config(config, spec, value)?;
        let book = make_pilot_book(c.tau_tr, c.users, &c.pilot_assignment)?;
        let samples = if !need_topologies {
            None
        } else if spec.parameter == SweepParameter::Threshold && cached.is_some() {
            cached.clone()
        } else {
            let s = topology_samples(&c, &book, spec.sinr_source, need_sc, master_seed)?;
            if spec.parameter == SweepParameter::Threshold {
                cached = Some(s.clone());
            }
            Some(s)
        };
        for &metric in &spec.metrics {
            let (mean, stderr) = match metric {
                Metric::CoverageAnalytical => {
                    (coverage_lower_bound(db_to_linear(t_db), &c, &book)?.p_cov, 0.0)
                }
                Metric::RateAnalytical => (rate_lower_bound(&c, &book)?.se, 0.0),
                Metric::CoverageMc => coverage_of(&samples.as_ref().unwrap().cf, t_db),
                Metric::ScCoverageMc => {
                    coverage_of(samples.as_ref().unwrap().sc.as_ref().unwrap(), t_db)
                }
                Metric::RateMc => {
                    let p = c.cf_prelog();
                    mean_se(samples.as_ref().unwrap().cf.iter().map(|g| p * (1.0 + g).log2()))
                }
                Metric::ScRateMc => {
                    let p = c.sc_prelog();
                    let sc = samples.as_ref().unwrap().sc.as_ref().unwrap();
                    mean_se(sc.iter().map(|g| p * (1.0 + g).log2()))
                }
            };
            rows.push(Row {
                param: value,
                metric,
                mean,
                stderr,
            });
        }
    }
    Ok((rows, truncated))
}

/// CSV text: header, one row per (value, metric), then `#` metadata lines that
/// hold the resolved config and sweep spec.
pub fn render_csv(rows: &[Row], config: &SystemConfig, spec: &SweepSpec, seed: u64, truncated: bool) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{:.6},{},{:.9},{:.9}",
            r.param,
            r.metric.name(),
            r.mean,
            r.stderr
        );
    }
    let _ = writeln!(s, "# cfsg {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# seed = {seed}");
    let _ = writeln!(s, "# truncated = {truncated}");
    let resolved = SystemConfig {
        seed,
        ..config.clone()
    };
    for line in render_config(&resolved).lines() {
        let _ = writeln!(s, "# config: {line}");
    }
    for line in render_sweep(spec).lines() {
        let _ = writeln!(s, "# sweep: {line}");
    }
    s
}

pub fn series_of(result: &SweepResult, prefix: &str) -> Vec<Series> {
    result
        .spec
        .metrics
        .iter()
        .map(|&m| Series {
            label: if prefix.is_empty() {
                m.name().to_string()
            } else {
                format!("{prefix} {}", m.name())
            },
            points: result.curve(m),
            dashed: matches!(m, Metric::CoverageAnalytical | Metric::RateAnalytical),
        })
        .collect()
}

pub fn y_label(metrics: &[Metric]) -> &'static str {
    if metrics.iter().all(|m| m.is_rate()) {
        "rate (b/s/Hz)"
    } else if metrics.iter().all(|m| !m.is_rate()) {
        "coverage probability"
    } else {
        "value"
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs a sweep in a pool of `threads` workers (0 = rayon default) and writes
/// `<stem>.csv`, `<stem>.svg` and `<stem>.json` into `out_dir`.
pub fn run_sweep(
    config: &SystemConfig,
    spec: &SweepSpec,
    out_dir: &Path,
    stem: &str,
    threads: usize,
) -> Result<SweepResult> {
    config.validate()?;
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let seed = config.seed;
    let start = Instant::now();
    let (rows, truncated) = pool.install(|| evaluate(config, spec, seed))?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let completed_points = rows.len() / spec.metrics.len();

    let mut result = SweepResult {
        rows,
        config: config.clone(),
        spec: spec.clone(),
        seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s,
        truncated,
        completed_points,
        files: Vec::new(),
    };

    let csv_path = out_dir.join(format!("{stem}.csv"));
    write(&csv_path, &render_csv(&result.rows, config, spec, seed, truncated))?;
    let svg_path = out_dir.join(format!("{stem}.svg"));
    let svg = render_svg(
        stem,
        spec.parameter.axis_label(),
        y_label(&spec.metrics),
        &series_of(&result, ""),
    );
    write(&svg_path, &svg)?;
    let json_path = out_dir.join(format!("{stem}.json"));
    write(&json_path, &metadata_json(&result, pool.current_num_threads()))?;
    result.files = vec![csv_path, svg_path, json_path];
    Ok(result)
}

pub fn metadata_json(r: &SweepResult, threads: usize) -> String {
    let c = &r.config;
    let doc = json!({
        "tool": "cfsg",
        "version": r.version,
        "seed": r.seed,
        "threads": threads,
        "wall_time_s": r.wall_time_s,
        "truncated": r.truncated,
        "completed_points": r.completed_points,
        "requested_points": r.spec.values.len(),
        "config": {
            "K": c.users,
            "N": c.antennas,
            "lambda_ap": c.lambda_ap,
            "side_km": c.area.side_km,
            "wrap": c.area.wrap,
            "alpha": c.alpha,
            "tau_tr": c.tau_tr,
            "tau_d": c.tau_d,
            "tau_c": c.tau_c,
            "bandwidth_hz": c.bandwidth_hz,
            "rho_tr": c.rho_tr,
            "rho_d": c.rho_d,
            "pilot_assignment": c.pilot_assignment.name(),
        },
        "sweep": {
            "parameter": r.spec.parameter.name(),
            "values": r.spec.values,
            "metrics": r.spec.metrics.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "n_topologies": r.spec.mc.n_topologies,
            "n_channel_draws": r.spec.mc.n_channel_draws,
            "threshold_db": r.spec.threshold_db,
            "sinr_source": r.spec.sinr_source.name(),
            "time_budget_s": r.spec.time_budget_s,
        },
        "units": {
            "rate": "b/s/Hz; multiply by bandwidth_hz for bits/s",
            "coverage": "probability",
        },
        "small_cell_metrics": "baseline, reduced fidelity: nearest-AP single-AP service, Monte Carlo only",
        "typical_user": TYPICAL_USER,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}
