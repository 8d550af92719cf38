//! Scalar system parameters shared by every module.

use ndarray::Array2;
use num_complex::Complex64;

use crate::closed_form::{noise_power, normalize_power};
use crate::error::{Error, Result};
use crate::geometry::AreaSpec;

/// How pilot sequences are handed out to users.
#[derive(Clone, Debug, PartialEq)]
pub enum PilotPolicy {
    /// Distinct canonical sequences while `K <= tau_tr`, round-robin reuse beyond.
    OrthogonalIfFits,
    /// User `k` gets canonical sequence `k mod tau_tr`.
    RoundRobin,
    /// Caller-supplied `tau_tr x K` matrix with unit-norm columns.
    Explicit(Array2<Complex64>),
}

impl PilotPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::OrthogonalIfFits => "orthogonal",
            Self::RoundRobin => "round-robin",
            Self::Explicit(_) => "explicit",
        }
    }
}

/// Monte Carlo replicate counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonteCarlo {
    pub n_topologies: usize,
    pub n_channel_draws: usize,
}

/// All model parameters. Powers are normalized by the receiver noise power.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    /// AP density in APs/km^2.
    pub lambda_ap: f64,
    pub area: AreaSpec,
    /// Antennas per AP (N).
    pub antennas: usize,
    /// Users (K).
    pub users: usize,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Uplink training length in samples.
    pub tau_tr: usize,
    /// Downlink training length charged to the small-cell baseline.
    pub tau_d: usize,
    /// Coherence interval in samples.
    pub tau_c: usize,
    pub rho_tr: f64,
    pub rho_d: f64,
    /// Communication bandwidth used to turn spectral efficiency into bits/s.
    pub bandwidth_hz: f64,
    pub pilot_assignment: PilotPolicy,
    pub seed: u64,
    pub mc: MonteCarlo,
}

pub const DEFAULT_BANDWIDTH_HZ: f64 = 20e6;
pub const DEFAULT_NOISE_FIGURE_DB: f64 = 9.0;
pub const DEFAULT_NOISE_TEMP_K: f64 = 290.0;
pub const DEFAULT_P_TR_W: f64 = 0.1;
pub const DEFAULT_P_D_W: f64 = 0.2;
pub const DEFAULT_COHERENCE_BANDWIDTH_HZ: f64 = 200e3;
pub const DEFAULT_COHERENCE_TIME_S: f64 = 1e-3;

impl Default for SystemConfig {
    fn default() -> Self {
        let np = noise_power(DEFAULT_BANDWIDTH_HZ, DEFAULT_NOISE_FIGURE_DB, DEFAULT_NOISE_TEMP_K);
        Self {
            lambda_ap: 40.0,
            area: AreaSpec {
                side_km: 1.0,
                wrap: true,
            },
            antennas: 5,
            users: 10,
            alpha: 3.5,
            tau_tr: 10,
            tau_d: 10,
            tau_c: (DEFAULT_COHERENCE_BANDWIDTH_HZ * DEFAULT_COHERENCE_TIME_S).round() as usize,
            rho_tr: normalize_power(DEFAULT_P_TR_W, np),
            rho_d: normalize_power(DEFAULT_P_D_W, np),
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            pilot_assignment: PilotPolicy::OrthogonalIfFits,
            seed: 1,
            mc: MonteCarlo {
                n_topologies: 1000,
                n_channel_draws: 1000,
            },
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        fn positive(key: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, got {v}")))
            }
        }
        positive("lambda_ap", self.lambda_ap)?;
        self.area.validate()?;
        if self.antennas == 0 {
            return Err(Error::config("N", "need at least one antenna per AP"));
        }
        if self.users == 0 {
            return Err(Error::config("K", "need at least one user"));
        }
        if !(self.alpha.is_finite() && self.alpha > 2.0) {
            return Err(Error::config(
                "alpha",
                format!("path-loss exponent must exceed 2, got {}", self.alpha),
            ));
        }
        if self.tau_tr == 0 {
            return Err(Error::config("tau_tr", "training needs at least one sample"));
        }
        if self.tau_tr > self.tau_c {
            return Err(Error::config(
                "tau_tr",
                format!("tau_tr = {} exceeds tau_c = {}", self.tau_tr, self.tau_c),
            ));
        }
        if self.tau_tr + self.tau_d > self.tau_c {
            return Err(Error::config(
                "tau_d",
                format!(
                    "tau_tr + tau_d = {} exceeds tau_c = {}",
                    self.tau_tr + self.tau_d,
                    self.tau_c
                ),
            ));
        }
        positive("rho_tr", self.rho_tr)?;
        positive("rho_d", self.rho_d)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        if self.mc.n_topologies == 0 {
            return Err(Error::config("n_topologies", "must be at least 1"));
        }
        if self.mc.n_channel_draws == 0 {
            return Err(Error::config("n_channel_draws", "must be at least 1"));
        }
        Ok(())
    }

    /// Mean AP count over the area.
    pub fn mean_aps(&self) -> f64 {
        self.lambda_ap * self.area.area_km2()
    }

    /// Mean total antenna count, the gamma shape used by the coverage bound.
    pub fn mean_antennas(&self) -> f64 {
        self.mean_aps() * self.antennas as f64
    }

    /// Pre-log factor of the cell-free rate.
    pub fn cf_prelog(&self) -> f64 {
        1.0 - self.tau_tr as f64 / self.tau_c as f64
    }

    /// Pre-log factor of the small-cell rate, which also pays for downlink training.
    pub fn sc_prelog(&self) -> f64 {
        1.0 - (self.tau_tr + self.tau_d) as f64 / self.tau_c as f64
    }
}
