//! Flat `key = value` configuration files.
//!
//! Keys not present keep their default values. Physical powers (`p_tr_mW`,
//! `p_d_mW`) are turned into noise-normalized values using the noise power of
//! `bandwidth_hz`, `noise_figure_db` and `noise_temp_k`; a normalized value may be
//! given instead, but not both.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::closed_form::{noise_power, normalize_power};
use crate::config::{
    PilotPolicy, SystemConfig, DEFAULT_COHERENCE_BANDWIDTH_HZ, DEFAULT_COHERENCE_TIME_S,
    DEFAULT_NOISE_FIGURE_DB, DEFAULT_NOISE_TEMP_K, DEFAULT_P_D_W, DEFAULT_P_TR_W,
};
use crate::error::{Error, Result};
use crate::geometry::AreaSpec;

pub const CONFIG_KEYS: &[&str] = &[
    "K",
    "N",
    "lambda_ap",
    "side_km",
    "wrap",
    "alpha",
    "tau_tr",
    "tau_d",
    "tau_c",
    "coherence_bandwidth_hz",
    "coherence_time_s",
    "bandwidth_hz",
    "noise_figure_db",
    "noise_temp_k",
    "p_tr_mW",
    "p_d_mW",
    "rho_tr",
    "rho_d",
    "pilot_assignment",
    "seed",
    "n_topologies",
    "n_channel_draws",
];

/// One `key = value` entry with the 1-based line it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub value: String,
}

/// Splits `key = value` lines, dropping blank lines and `#` comments.
/// Duplicate keys and keys outside `allowed` are rejected.
pub fn parse_entries(text: &str, allowed: &[&str]) -> Result<BTreeMap<String, Entry>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::Parse {
                line,
                key: body.to_string(),
                reason: "expected `key = value`".into(),
            });
        };
        let key = key.trim();
        if !allowed.contains(&key) {
            return Err(Error::Parse {
                line,
                key: key.to_string(),
                reason: "unknown key".into(),
            });
        }
        let entry = Entry {
            line,
            value: value.trim().to_string(),
        };
        if let Some(prev) = out.insert(key.to_string(), entry) {
            return Err(Error::Parse {
                line,
                key: key.to_string(),
                reason: format!("already set on line {}", prev.line),
            });
        }
    }
    Ok(out)
}

pub(crate) struct Fields<'a> {
    entries: &'a BTreeMap<String, Entry>,
}

impl<'a> Fields<'a> {
    pub(crate) fn new(entries: &'a BTreeMap<String, Entry>) -> Self {
        Self { entries }
    }

    pub(crate) fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn err(&self, key: &str, reason: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line(key).unwrap_or(0),
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn raw(&self, key: &str) -> Option<&'a str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub(crate) fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.err(key, format!("cannot parse `{v}`"))),
        }
    }

    pub(crate) fn f64(&self, key: &str) -> Result<Option<f64>> {
        let v = self.parsed::<f64>(key)?;
        match v {
            Some(x) if !x.is_finite() => Err(self.err(key, "must be finite")),
            other => Ok(other),
        }
    }

    pub(crate) fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some("true" | "yes" | "on" | "1") => Ok(Some(true)),
            Some("false" | "no" | "off" | "0") => Ok(Some(false)),
            Some(v) => Err(self.err(key, format!("expected a boolean, got `{v}`"))),
        }
    }

    fn power(&self, normalized: &str, physical_mw: &str, noise: f64, default_w: f64) -> Result<f64> {
        match (self.f64(normalized)?, self.f64(physical_mw)?) {
            (Some(_), Some(_)) => Err(self.err(
                normalized,
                format!("conflicts with `{physical_mw}`; give only one of them"),
            )),
            (Some(rho), None) => Ok(rho),
            (None, Some(mw)) => Ok(normalize_power(mw / 1e3, noise)),
            (None, None) => Ok(normalize_power(default_w, noise)),
        }
    }
}

pub fn parse_pilot_policy(v: &str) -> Option<PilotPolicy> {
    match v {
        "orthogonal" => Some(PilotPolicy::OrthogonalIfFits),
        "round-robin" => Some(PilotPolicy::RoundRobin),
        _ => None,
    }
}

/// Parses configuration text. Errors name the offending key and line.
pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let entries = parse_entries(text, CONFIG_KEYS)?;
    let f = Fields::new(&entries);
    let mut c = SystemConfig::default();

    if let Some(v) = f.parsed("K")? {
        c.users = v;
    }
    if let Some(v) = f.parsed("N")? {
        c.antennas = v;
    }
    if let Some(v) = f.f64("lambda_ap")? {
        c.lambda_ap = v;
    }
    c.area = AreaSpec {
        side_km: f.f64("side_km")?.unwrap_or(c.area.side_km),
        wrap: f.bool("wrap")?.unwrap_or(c.area.wrap),
    };
    if let Some(v) = f.f64("alpha")? {
        c.alpha = v;
    }
    if let Some(v) = f.parsed("tau_tr")? {
        c.tau_tr = v;
    }
    if let Some(v) = f.parsed("tau_d")? {
        c.tau_d = v;
    }
    let coherence = (f.f64("coherence_bandwidth_hz")?, f.f64("coherence_time_s")?);
    c.tau_c = match (f.parsed::<usize>("tau_c")?, coherence) {
        (Some(_), (Some(_), _) | (_, Some(_))) => {
            return Err(f.err(
                "tau_c",
                "conflicts with coherence_bandwidth_hz / coherence_time_s",
            ));
        }
        (Some(t), _) => t,
        (None, (b, t)) => {
            let b = b.unwrap_or(DEFAULT_COHERENCE_BANDWIDTH_HZ);
            let t = t.unwrap_or(DEFAULT_COHERENCE_TIME_S);
            (b * t).round() as usize
        }
    };
    if let Some(v) = f.f64("bandwidth_hz")? {
        c.bandwidth_hz = v;
    }
    let noise = noise_power(
        c.bandwidth_hz,
        f.f64("noise_figure_db")?.unwrap_or(DEFAULT_NOISE_FIGURE_DB),
        f.f64("noise_temp_k")?.unwrap_or(DEFAULT_NOISE_TEMP_K),
    );
    c.rho_tr = f.power("rho_tr", "p_tr_mW", noise, DEFAULT_P_TR_W)?;
    c.rho_d = f.power("rho_d", "p_d_mW", noise, DEFAULT_P_D_W)?;
    if let Some(v) = f.raw("pilot_assignment") {
        c.pilot_assignment = parse_pilot_policy(v).ok_or_else(|| {
            f.err(
                "pilot_assignment",
                format!("expected `orthogonal` or `round-robin`, got `{v}`"),
            )
        })?;
    }
    if let Some(v) = f.parsed("seed")? {
        c.seed = v;
    }
    if let Some(v) = f.parsed("n_topologies")? {
        c.mc.n_topologies = v;
    }
    if let Some(v) = f.parsed("n_channel_draws")? {
        c.mc.n_channel_draws = v;
    }

    c.validate().map_err(|e| attach_line(e, &f))?;
    Ok(c)
}

fn attach_line(e: Error, f: &Fields<'_>) -> Error {
    let line = match &e {
        Error::InvalidConfig { key, .. } => {
            let alias = match key.as_str() {
                "rho_tr" if f.line("rho_tr").is_none() => "p_tr_mW",
                "rho_d" if f.line("rho_d").is_none() => "p_d_mW",
                k => k,
            };
            f.line(alias)
        }
        _ => None,
    };
    match line {
        Some(l) => e.at_line(l),
        None => e,
    }
}

/// Reads a configuration file. A results CSV is accepted too: its embedded
/// `# config:` lines are used.
pub fn load_config(path: &Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&embedded_or_plain(&text, "config"))
}

/// Lines of the form `# <section>: key = value` if present, else the text itself.
pub fn embedded_or_plain(text: &str, section: &str) -> String {
    let prefix = format!("# {section}: ");
    let embedded: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix(prefix.as_str()))
        .collect();
    if embedded.is_empty() {
        text.to_string()
    } else {
        embedded.join("\n")
    }
}

/// Canonical text of a fully resolved configuration; parsing it gives the same value.
pub fn render_config(c: &SystemConfig) -> String {
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    put("K", c.users.to_string());
    put("N", c.antennas.to_string());
    put("lambda_ap", format!("{:?}", c.lambda_ap));
    put("side_km", format!("{:?}", c.area.side_km));
    put("wrap", c.area.wrap.to_string());
    put("alpha", format!("{:?}", c.alpha));
    put("tau_tr", c.tau_tr.to_string());
    put("tau_d", c.tau_d.to_string());
    put("tau_c", c.tau_c.to_string());
    put("bandwidth_hz", format!("{:?}", c.bandwidth_hz));
    put("rho_tr", format!("{:?}", c.rho_tr));
    put("rho_d", format!("{:?}", c.rho_d));
    put("pilot_assignment", c.pilot_assignment.name().to_string());
    put("seed", c.seed.to_string());
    put("n_topologies", c.mc.n_topologies.to_string());
    put("n_channel_draws", c.mc.n_channel_draws.to_string());
    s
}
