//! Analytical expressions: per-topology deterministic-equivalent SINR, the
//! coverage lower bound over PPP deployments, the mean-field SINR and the
//! achievable-rate lower bound.

use statrs::function::gamma::ln_gamma;

use crate::channel::{EstimationStats, PilotBook};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::NetworkRealization;

pub const BOLTZMANN: f64 = 1.381e-23;

/// Largest mean antenna count for which the alternating binomial sum is offered.
pub const BINOMIAL_MAX: u32 = 60;

/// Thermal noise power `W_c k_B T_0 10^(NF/10)` in watts.
pub fn noise_power(bandwidth_hz: f64, noise_figure_db: f64, temperature_k: f64) -> f64 {
    bandwidth_hz * BOLTZMANN * temperature_k * 10f64.powf(noise_figure_db / 10.0)
}

pub fn normalize_power(power_w: f64, noise_w: f64) -> f64 {
    power_w / noise_w
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// A SINR value that may have degenerated to `+inf` because its
/// denominator was non-positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sinr {
    pub value: f64,
    pub degenerate: bool,
}

impl Sinr {
    fn from_ratio(num: f64, den: f64) -> Self {
        if den > 0.0 {
            Self {
                value: num / den,
                degenerate: false,
            }
        } else {
            Self {
                value: f64::INFINITY,
                degenerate: true,
            }
        }
    }
}

/// Deterministic-equivalent SINR of every user on one topology.
pub fn de_sinr(net: &NetworkRealization, config: &SystemConfig, book: &PilotBook) -> Vec<Sinr> {
    let stats = EstimationStats::new(net, book, config.rho_tr);
    (0..net.user_count())
        .map(|k| de_sinr_user(net, &stats, config.antennas, config.rho_d, k))
        .collect()
}

/// `MN / ((1/M) sum_i sum_m d_mi l_mi^-2 (l_mk + MN/rho_d) - 1)`.
pub fn de_sinr_user(
    net: &NetworkRealization,
    stats: &EstimationStats,
    antennas: usize,
    rho_d: f64,
    k: usize,
) -> Sinr {
    let l = &net.path_loss;
    let m_aps = net.ap_count();
    let w = (m_aps * antennas) as f64;
    let noise = w / rho_d;
    // The i = k term contributes d_mk / l_mk = 1 + excess_mk / l_mk; its unit
    // part cancels the trailing -1 and is dropped analytically.
    let mut acc = 0.0;
    for m in 0..m_aps {
        let mut cross = stats.excess[[m, k]] / l[[m, k]];
        let mut total = 0.0;
        for i in 0..net.user_count() {
            let t = stats.d[[m, i]] / (l[[m, i]] * l[[m, i]]);
            total += t;
            if i != k {
                cross += t * l[[m, k]];
            }
        }
        acc += cross + total * noise;
    }
    Sinr::from_ratio(w, acc / m_aps as f64)
}

/// Deterministic equivalents of the moments entering the statistical SINR of user `k`,
/// before division by `W^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeMoments {
    /// `E[h_k^H C_k h^_k]`, equal to `W`.
    pub desired_mean: f64,
    /// `tr(D L_k^-1 - I)`.
    pub variance: f64,
    /// `tr(D_i L_i^-2 L_k)` per user `i` (the entry for `k` is included).
    pub interference: Vec<f64>,
    /// `(1/W) sum_i tr C_i`, the inverse normalization.
    pub inverse_mu: f64,
}

pub fn de_moments(
    net: &NetworkRealization,
    stats: &EstimationStats,
    antennas: usize,
    k: usize,
) -> DeMoments {
    let l = &net.path_loss;
    let n = antennas as f64;
    let m_aps = net.ap_count();
    let w = m_aps as f64 * n;
    let variance = (0..m_aps)
        .map(|m| n * stats.excess[[m, k]] / l[[m, k]])
        .sum();
    let interference = (0..net.user_count())
        .map(|i| {
            (0..m_aps)
                .map(|m| n * stats.d[[m, i]] * l[[m, k]] / (l[[m, i]] * l[[m, i]]))
                .sum()
        })
        .collect();
    let trace_c: f64 = stats.sigma2.iter().map(|s| n / s).sum();
    DeMoments {
        desired_mean: w,
        variance,
        interference,
        inverse_mu: trace_c / w,
    }
}

/// `W (W!)^(-1/W)` through the log-gamma function, so `W` need not be an integer.
pub fn eta(w_tilde: f64) -> f64 {
    w_tilde * (-ln_gamma(w_tilde + 1.0) / w_tilde).exp()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 2.0 {
        Ok(())
    } else {
        Err(Error::config(
            "alpha",
            format!("path-loss exponent must exceed 2, got {alpha}"),
        ))
    }
}

/// Bracketed interference-plus-noise factor shared by the coverage and rate bounds,
/// evaluated for the typical user (index 0) with `w` in the antenna slot.
pub fn bracket(config: &SystemConfig, book: &PilotBook, w: f64) -> f64 {
    let a = config.alpha;
    let rho_d = config.rho_d;
    let contamination = book.contamination(0);
    let training = ((a - 2.0) * rho_d + w * (a - 1.0)) / (config.tau_tr as f64 * config.rho_tr);
    let k = config.users as f64;
    k / (a * std::f64::consts::PI * rho_d) * (contamination * (a * rho_d + w * (a - 2.0)) + training)
        - 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverageForm {
    Product,
    BinomialSum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoveragePoint {
    /// Linear SINR threshold.
    pub threshold: f64,
    pub p_cov: f64,
    pub form: CoverageForm,
    /// Set when the bracket was non-positive and the bound was clamped to 1.
    pub clamped: bool,
}

/// Lower bound `1 - (1 - exp(-eta T X))^W` on the coverage probability.
pub fn coverage_lower_bound(
    threshold: f64,
    config: &SystemConfig,
    book: &PilotBook,
) -> Result<CoveragePoint> {
    check_alpha(config.alpha)?;
    let w = config.mean_antennas();
    let x = bracket(config, book, w);
    let point = |p_cov, clamped| CoveragePoint {
        threshold,
        p_cov,
        form: CoverageForm::Product,
        clamped,
    };
    if x <= 0.0 {
        return Ok(point(1.0, true));
    }
    let miss = -(eta(w) * threshold * x);
    let p = -(w * (-miss.exp()).ln_1p()).exp_m1();
    Ok(point(p.clamp(0.0, 1.0), false))
}

/// Same bound written as `sum_n C(W, n) (-1)^(n+1) exp(-n eta T X)`; only for integer `W <= 60`.
pub fn coverage_lower_bound_binomial(
    threshold: f64,
    config: &SystemConfig,
    book: &PilotBook,
) -> Result<CoveragePoint> {
    check_alpha(config.alpha)?;
    let w = config.mean_antennas();
    if !(w >= 1.0 && w <= BINOMIAL_MAX as f64 && w.fract() == 0.0) {
        return Err(Error::BinomialFormUnavailable { mean_antennas: w });
    }
    let x = bracket(config, book, w);
    if x <= 0.0 {
        return Ok(CoveragePoint {
            threshold,
            p_cov: 1.0,
            form: CoverageForm::BinomialSum,
            clamped: true,
        });
    }
    let w_int = w as u32;
    let rate = eta(w) * threshold * x;
    let mut binom: u128 = 1;
    let mut sum = 0.0;
    let mut comp = 0.0;
    for n in 1..=w_int {
        binom = binom * u128::from(w_int - n + 1) / u128::from(n);
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * binom as f64 * (-(n as f64) * rate).exp();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    Ok(CoveragePoint {
        threshold,
        p_cov: sum + comp,
        form: CoverageForm::BinomialSum,
        clamped: false,
    })
}

/// Closed-form SINR `lambda N / X_N` obtained by averaging the inverse DE SINR over
/// AP positions.
pub fn mean_field_sinr(config: &SystemConfig, book: &PilotBook) -> Result<Sinr> {
    check_alpha(config.alpha)?;
    let n = config.antennas as f64;
    Ok(Sinr::from_ratio(
        config.lambda_ap * n,
        bracket(config, book, n),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateReport {
    pub gamma_check: f64,
    /// Spectral efficiency in b/s/Hz.
    pub se: f64,
    /// `se` times the communication bandwidth, in bits/s.
    pub throughput: f64,
    pub degenerate: bool,
}

pub fn rate_lower_bound(config: &SystemConfig, book: &PilotBook) -> Result<RateReport> {
    if config.tau_tr > config.tau_c {
        return Err(Error::config(
            "tau_tr",
            format!("tau_tr = {} exceeds tau_c = {}", config.tau_tr, config.tau_c),
        ));
    }
    let g = mean_field_sinr(config, book)?;
    let se = config.cf_prelog() * (1.0 + g.value).log2();
    Ok(RateReport {
        gamma_check: g.value,
        se,
        throughput: se * config.bandwidth_hz,
        degenerate: g.degenerate,
    })
}
