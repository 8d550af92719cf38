//! Conjugate beamforming with statistical channel inversion, Monte Carlo
//! estimation of the use-and-forget SINR, and the small-cell baseline.
//!
//! Channel draws for one topology are split into fixed-size chunks, each with
//! its own seed derived from the topology's draw seed. Chunks may run on any
//! thread; their partial sums are merged in chunk order, so results do not
//! depend on the thread count.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::channel::{ChannelDraw, EstimationStats, PilotBook, cn01, make_pilot_book};
use crate::closed_form::{Sinr, de_sinr_user};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::{NetworkRealization, sample_ppp};
use crate::seed::{self, SimRng};

/// Channel draws per independently seeded chunk.
pub const CHUNK_DRAWS: usize = 128;

/// Below this many draws the moment estimates are flagged as unreliable.
pub const MIN_RELIABLE_DRAWS: usize = 100;

/// Index of the user whose statistics represent the network.
pub const TYPICAL_USER: usize = 0;

/// Precoders `f_mk = h^_mk / sigma2_mk`, laid out like the channels (`[k, m, n]`).
pub fn precoder(draw: &ChannelDraw) -> Array3<Complex64> {
    let mut f = draw.h_hat.clone();
    let (_, m_aps, n_ant) = f.dim();
    let data = f.as_slice_mut().expect("standard layout");
    for (idx, link) in data.chunks_exact_mut(n_ant.max(1)).enumerate() {
        let c = 1.0 / draw.sigma2[[idx % m_aps, idx / m_aps]];
        for z in link {
            *z *= c;
        }
    }
    f
}

/// `((1/W) sum_i tr C_i)^-1` with `tr C_i = sum_m N / sigma2_mi`.
pub fn normalization_mu(
    net: &NetworkRealization,
    config: &SystemConfig,
    book: &PilotBook,
) -> f64 {
    mu_from_stats(&EstimationStats::new(net, book, config.rho_tr))
}

pub fn mu_from_stats(stats: &EstimationStats) -> f64 {
    let m_aps = stats.sigma2.nrows() as f64;
    m_aps / stats.sigma2.iter().map(|s| 1.0 / s).sum::<f64>()
}

/// Which normalization enters the statistical SINR.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuMode {
    /// The closed-form value from the estimate variances.
    Deterministic,
    /// `W` over the sample mean of `sum_i ||f_i||^2`.
    Empirical,
}

/// Where a per-topology SINR comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SinrSource {
    Deterministic,
    Statistical,
}

impl SinrSource {
    pub fn name(self) -> &'static str {
        match self {
            Self::Deterministic => "de",
            Self::Statistical => "statistical",
        }
    }
}

/// Effective gains of one channel draw.
#[derive(Clone, Debug)]
pub struct LinkGains {
    /// `[k, i] = h_k^H C_i h^_i`.
    pub effective: Array2<Complex64>,
    /// `e_k^H C_k h^_k` with `e_k = h_k - h^_k`.
    pub error: Vec<Complex64>,
    /// `sum_i ||C_i h^_i||^2`.
    pub precoder_power: f64,
}

fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut re = [0.0; 4];
    let mut im = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            re[j] += x[j].re * y[j].re + x[j].im * y[j].im;
            im[j] += x[j].re * y[j].im - x[j].im * y[j].re;
        }
    }
    let mut acc = Complex64::new(re.iter().sum(), im.iter().sum());
    for (x, y) in ra.iter().zip(rb) {
        acc += x.conj() * y;
    }
    acc
}

fn rows(a: &Array3<Complex64>) -> Vec<&[Complex64]> {
    let w = a.dim().1 * a.dim().2;
    a.as_slice()
        .expect("standard layout")
        .chunks(w.max(1))
        .collect()
}

/// Gains of one draw. With `focus = Some(k)` only row `k` of the effective
/// matrix and the error gain of user `k` are computed; the rest are NaN.
pub fn link_gains(draw: &ChannelDraw, focus: Option<usize>) -> LinkGains {
    let f = precoder(draw);
    let k_users = f.dim().0;
    let h = rows(&draw.h);
    let hh = rows(&draw.h_hat);
    let fr = rows(&f);
    let wanted = |k: usize| focus.is_none_or(|j| j == k);
    let effective = Array2::from_shape_fn((k_users, k_users), |(k, i)| {
        if wanted(k) {
            dot_conj(h[k], fr[i])
        } else {
            Complex64::new(f64::NAN, f64::NAN)
        }
    });
    let error = (0..k_users)
        .map(|k| {
            if !wanted(k) {
                return Complex64::new(f64::NAN, f64::NAN);
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for ((a, b), c) in h[k].iter().zip(hh[k]).zip(fr[k]) {
                acc += (a - b).conj() * c;
            }
            acc
        })
        .collect();
    let precoder_power = f.iter().map(|z| z.norm_sqr()).sum();
    LinkGains {
        effective,
        error,
        precoder_power,
    }
}

/// Sample moments of the effective gains over channel draws on one topology.
#[derive(Clone, Debug)]
pub struct MomentEstimates {
    pub n_draws: usize,
    /// `E[h_k^H C_k h^_k]` per user.
    pub desired_mean: Vec<Complex64>,
    /// Standard error of the real part of `desired_mean`.
    pub desired_mean_se: Vec<f64>,
    /// `var[h_k^H C_k h^_k]`, unbiased two-pass estimate.
    pub desired_var: Vec<f64>,
    pub desired_var_se: Vec<f64>,
    /// `[k, i] = E|h_k^H C_i h^_i|^2`.
    pub cross_power: Array2<f64>,
    pub cross_power_se: Array2<f64>,
    /// `E|e_k^H C_k h^_k|^2`.
    pub error_power: Vec<f64>,
    pub error_power_se: Vec<f64>,
    /// `E[sum_i ||C_i h^_i||^2]`.
    pub precoder_power: f64,
    pub precoder_power_se: f64,
}

#[derive(Clone, Debug)]
struct Accumulator {
    /// Only this user's row is meaningful when set.
    focus: Option<usize>,
    /// Set once a draw contributed only the focus row, leaving no error or
    /// precoder-power sample.
    rows_only: bool,
    n: usize,
    desired: Vec<Vec<Complex64>>,
    cross: Array2<f64>,
    cross_sq: Array2<f64>,
    error: Vec<f64>,
    error_sq: Vec<f64>,
    power: f64,
    power_sq: f64,
}

impl Accumulator {
    fn new(k: usize, focus: Option<usize>) -> Self {
        Self {
            focus,
            rows_only: false,
            n: 0,
            desired: vec![Vec::new(); k],
            cross: Array2::zeros((k, k)),
            cross_sq: Array2::zeros((k, k)),
            error: vec![0.0; k],
            error_sq: vec![0.0; k],
            power: 0.0,
            power_sq: 0.0,
        }
    }

    fn push(&mut self, g: &LinkGains) {
        self.n += 1;
        for (k, d) in self.desired.iter_mut().enumerate() {
            d.push(g.effective[[k, k]]);
        }
        let sums = self.cross.as_slice_mut().expect("standard layout");
        let squares = self.cross_sq.as_slice_mut().expect("standard layout");
        for ((s, q), z) in sums.iter_mut().zip(squares).zip(g.effective.iter()) {
            let p = z.norm_sqr();
            *s += p;
            *q += p * p;
        }
        for (k, e) in g.error.iter().enumerate() {
            let p = e.norm_sqr();
            self.error[k] += p;
            self.error_sq[k] += p * p;
        }
        self.power += g.precoder_power;
        self.power_sq += g.precoder_power * g.precoder_power;
    }

    /// Adds one draw given only `x_fi = h_f^H C_i h^_i` for the focus user `f`.
    fn push_row(&mut self, row: &[Complex64]) {
        let f = self.focus.expect("row pushes need a focus user");
        self.n += 1;
        self.rows_only = true;
        self.desired[f].push(row[f]);
        let k = row.len();
        let sums = &mut self.cross.as_slice_mut().expect("standard layout")[f * k..(f + 1) * k];
        let squares = &mut self.cross_sq.as_slice_mut().expect("standard layout")[f * k..(f + 1) * k];
        for ((s, q), z) in sums.iter_mut().zip(squares).zip(row) {
            let p = z.norm_sqr();
            *s += p;
            *q += p * p;
        }
    }

    fn merge(&mut self, other: Self) {
        self.rows_only |= other.rows_only;
        self.n += other.n;
        for (a, b) in self.desired.iter_mut().zip(other.desired) {
            a.extend(b);
        }
        self.cross += &other.cross;
        self.cross_sq += &other.cross_sq;
        for k in 0..self.error.len() {
            self.error[k] += other.error[k];
            self.error_sq[k] += other.error_sq[k];
        }
        self.power += other.power;
        self.power_sq += other.power_sq;
    }

    fn finish(self) -> MomentEstimates {
        let n = self.n as f64;
        let mean_se = |sum: f64, sq: f64| {
            let mean = sum / n;
            let var = if self.n > 1 {
                ((sq - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean, (var / n).sqrt())
        };
        let k = self.desired.len();
        let mut desired_mean: Vec<Complex64> = Vec::with_capacity(k);
        let mut desired_mean_se = Vec::with_capacity(k);
        let mut desired_var = Vec::with_capacity(k);
        let mut desired_var_se = Vec::with_capacity(k);
        for xs in &self.desired {
            let mean = xs.iter().sum::<Complex64>() / n;
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean).norm_sqr()).collect();
            let re_ss: f64 = xs.iter().map(|x| (x.re - mean.re).powi(2)).sum();
            let denom = (n - 1.0).max(1.0);
            let var = dev.iter().sum::<f64>() / denom;
            let dev_mean = dev.iter().sum::<f64>() / n;
            let dev_var = dev.iter().map(|v| (v - dev_mean).powi(2)).sum::<f64>() / denom;
            desired_mean.push(mean);
            desired_mean_se.push((re_ss / denom / n).sqrt());
            desired_var.push(var);
            desired_var_se.push((dev_var / n).sqrt());
        }
        let mut cross_power = Array2::zeros((k, k));
        let mut cross_power_se = Array2::zeros((k, k));
        for (idx, &s) in self.cross.indexed_iter() {
            let (m, se) = mean_se(s, self.cross_sq[idx]);
            cross_power[idx] = m;
            cross_power_se[idx] = se;
        }
        let (mut error_power, mut error_power_se): (Vec<f64>, Vec<f64>) = self
            .error
            .iter()
            .zip(&self.error_sq)
            .map(|(&s, &q)| mean_se(s, q))
            .unzip();
        let (mut precoder_power, mut precoder_power_se) = mean_se(self.power, self.power_sq);
        if let Some(f) = self.focus {
            let nan = f64::NAN;
            let cnan = Complex64::new(nan, nan);
            for u in (0..k).filter(|&u| u != f) {
                desired_mean[u] = cnan;
                desired_mean_se[u] = nan;
                desired_var[u] = nan;
                desired_var_se[u] = nan;
                cross_power.row_mut(u).fill(nan);
                cross_power_se.row_mut(u).fill(nan);
                error_power[u] = nan;
                error_power_se[u] = nan;
            }
            if self.rows_only {
                error_power[f] = nan;
                error_power_se[f] = nan;
                precoder_power = nan;
                precoder_power_se = nan;
            }
        }
        MomentEstimates {
            n_draws: self.n,
            desired_mean,
            desired_mean_se,
            desired_var,
            desired_var_se,
            cross_power,
            cross_power_se,
            error_power,
            error_power_se,
            precoder_power,
            precoder_power_se,
        }
    }
}

fn chunked<T, F>(n_draws: usize, draw_seed: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng, usize) -> T + Sync,
{
    let chunks = n_draws.div_ceil(CHUNK_DRAWS);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_DRAWS.min(n_draws - c * CHUNK_DRAWS);
            let mut rng = seed::rng(seed::derive(draw_seed, seed::CHUNK, c as u64));
            work(&mut rng, len)
        })
        .collect()
}

/// Per-draw output of a gain sampler.
enum Sample {
    Full(LinkGains),
    /// Row `x_fi` of the focus user only.
    Row(Vec<Complex64>),
}

fn accumulate<F>(
    k: usize,
    focus: Option<usize>,
    n_draws: usize,
    draw_seed: u64,
    gains: F,
) -> MomentEstimates
where
    F: Fn(&mut SimRng) -> Sample + Sync,
{
    let parts = chunked(n_draws, draw_seed, |rng, len| {
        let mut acc = Accumulator::new(k, focus);
        for _ in 0..len {
            match gains(rng) {
                Sample::Full(g) => acc.push(&g),
                Sample::Row(r) => acc.push_row(&r),
            }
        }
        acc
    });
    let mut total = Accumulator::new(k, focus);
    for p in parts {
        total.merge(p);
    }
    total.finish()
}

/// Pilot group of each user (the lowest index sharing its sequence) when any
/// two sequences are either equal up to a phase or orthogonal.
fn pilot_groups(book: &PilotBook) -> Option<Vec<usize>> {
    const TOL: f64 = 1e-12;
    let k = book.users();
    let mut group: Vec<usize> = (0..k).collect();
    for i in 0..k {
        for j in 0..i {
            let g = book.gram[[j, i]];
            if (g - 1.0).abs() < TOL {
                group[i] = group[j];
                break;
            } else if g.abs() >= TOL {
                return None;
            }
        }
    }
    Some(group)
}

/// Channel statistics the focus user's gains depend on, for pilot books
/// split into groups of identical sequences.
///
/// Given `q_m = ||h_fm||^2`, the projection `z_tm = h_fm^H y_tm` of the
/// focus user's channel on the observation of pilot group `t` is
/// `q_m + CN(0, (d_mf - l_mf) q_m)` for the focus user's own group and
/// `CN(0, d_mt q_m)` otherwise, and `x_fi = sum_m z_(t(i), m) / l_mi`.
/// Sampling `q_m ~ l_mf Gamma(N, 1)` and the `z` scalars reproduces the joint
/// law of the row without drawing any channel vector.
struct RowSampler {
    focus: usize,
    groups: Vec<usize>,
    /// Distinct groups in increasing order.
    reps: Vec<usize>,
    norm: Gamma<f64>,
}

impl RowSampler {
    fn new(book: &PilotBook, antennas: usize, focus: usize) -> Option<Self> {
        let groups = pilot_groups(book)?;
        let mut reps = groups.clone();
        reps.sort_unstable();
        reps.dedup();
        let norm = Gamma::new(antennas as f64, 1.0).expect("positive antenna count");
        Some(Self {
            focus,
            groups,
            reps,
            norm,
        })
    }

    /// `z` for the focus user against pilot group `t` at one AP with `q = ||h_fm||^2`.
    fn projection(&self, stats: &EstimationStats, m: usize, t: usize, q: f64, rng: &mut SimRng) -> Complex64 {
        let xi = cn01(rng);
        if t == self.groups[self.focus] {
            q + xi * (stats.excess[[m, self.focus]] * q).sqrt()
        } else {
            xi * (stats.d[[m, t]] * q).sqrt()
        }
    }

    /// Cell-free row: every AP serves every user.
    fn cell_free(&self, net: &NetworkRealization, stats: &EstimationStats, rng: &mut SimRng) -> Vec<Complex64> {
        let l = &net.path_loss;
        let (m_aps, k_users) = l.dim();
        let f = self.focus;
        let mut row = vec![Complex64::new(0.0, 0.0); k_users];
        let mut z = vec![Complex64::new(0.0, 0.0); k_users];
        for m in 0..m_aps {
            let q = l[[m, f]] * self.norm.sample(rng);
            for &t in &self.reps {
                z[t] = self.projection(stats, m, t, q, rng);
            }
            for (i, x) in row.iter_mut().enumerate() {
                *x += z[self.groups[i]] / l[[m, i]];
            }
        }
        row
    }

    /// Small-cell row: user `j` is served only by AP row `serving[j]` of `net`,
    /// each row holding an independent channel.
    fn small_cell(
        &self,
        net: &NetworkRealization,
        stats: &EstimationStats,
        serving: &[Option<usize>],
        rng: &mut SimRng,
    ) -> Vec<Complex64> {
        let l = &net.path_loss;
        let f = self.focus;
        serving
            .iter()
            .enumerate()
            .map(|(j, r)| match *r {
                Some(r) => {
                    let q = l[[r, f]] * self.norm.sample(rng);
                    self.projection(stats, r, self.groups[j], q, rng) / l[[r, j]]
                }
                None => Complex64::new(0.0, 0.0),
            })
            .collect()
    }
}

/// Moments of the cell-free effective gains over `n_draws` channel draws, for
/// every user or only for `focus` (see [`link_gains`]).
pub fn estimate_moments(
    net: &NetworkRealization,
    book: &PilotBook,
    stats: &EstimationStats,
    antennas: usize,
    n_draws: usize,
    draw_seed: u64,
    focus: Option<usize>,
) -> MomentEstimates {
    accumulate(net.user_count(), focus, n_draws.max(1), draw_seed, |rng| {
        Sample::Full(link_gains(
            &ChannelDraw::sample_with(net, book, stats, antennas, rng),
            focus,
        ))
    })
}

#[derive(Clone, Debug)]
pub struct SinrReport {
    /// Monte Carlo use-and-forget SINR per user.
    pub statistical: Vec<f64>,
    /// Deterministic equivalent per user on the same topology.
    pub deterministic: Vec<Sinr>,
    pub mu: f64,
    pub mu_mode: MuMode,
    pub moments: MomentEstimates,
    /// Set when fewer than [`MIN_RELIABLE_DRAWS`] draws were used.
    pub low_draw_warning: bool,
}

/// `|E x_kk|^2 / (var x_kk + sum_{i != k} E|x_ki|^2 + 1/(mu rho_d))`.
pub fn assemble_sinr(moments: &MomentEstimates, mu: f64, rho_d: f64, k: usize) -> f64 {
    let interference: f64 = (0..moments.desired_mean.len())
        .filter(|&i| i != k)
        .map(|i| moments.cross_power[[k, i]])
        .sum();
    moments.desired_mean[k].norm_sqr()
        / (moments.desired_var[k] + interference + 1.0 / (mu * rho_d))
}

/// Statistical SINR of every user on a fixed topology from `n_draws` channel draws
/// seeded by `draw_seed`.
pub fn statistical_sinr(
    net: &NetworkRealization,
    config: &SystemConfig,
    book: &PilotBook,
    n_draws: usize,
    draw_seed: u64,
    mu_mode: MuMode,
) -> SinrReport {
    let stats = EstimationStats::new(net, book, config.rho_tr);
    let moments = estimate_moments(net, book, &stats, config.antennas, n_draws, draw_seed, None);
    let w = (net.ap_count() * config.antennas) as f64;
    let mu = match mu_mode {
        MuMode::Deterministic => mu_from_stats(&stats),
        MuMode::Empirical => w / moments.precoder_power,
    };
    let statistical = (0..net.user_count())
        .map(|k| assemble_sinr(&moments, mu, config.rho_d, k))
        .collect();
    let deterministic = (0..net.user_count())
        .map(|k| de_sinr_user(net, &stats, config.antennas, config.rho_d, k))
        .collect();
    SinrReport {
        statistical,
        deterministic,
        mu,
        mu_mode,
        moments,
        low_draw_warning: n_draws < MIN_RELIABLE_DRAWS,
    }
}

/// SINR of the typical user on one topology.
pub fn typical_user_sinr(
    net: &NetworkRealization,
    config: &SystemConfig,
    book: &PilotBook,
    source: SinrSource,
    n_draws: usize,
    draw_seed: u64,
) -> f64 {
    let stats = EstimationStats::new(net, book, config.rho_tr);
    match source {
        SinrSource::Deterministic => {
            de_sinr_user(net, &stats, config.antennas, config.rho_d, TYPICAL_USER).value
        }
        SinrSource::Statistical => {
            let moments = match RowSampler::new(book, config.antennas, TYPICAL_USER) {
                Some(rows) => accumulate(
                    net.user_count(),
                    Some(TYPICAL_USER),
                    n_draws.max(1),
                    draw_seed,
                    |rng| Sample::Row(rows.cell_free(net, &stats, rng)),
                ),
                None => estimate_moments(
                    net,
                    book,
                    &stats,
                    config.antennas,
                    n_draws,
                    draw_seed,
                    Some(TYPICAL_USER),
                ),
            };
            assemble_sinr(&moments, mu_from_stats(&stats), config.rho_d, TYPICAL_USER)
        }
    }
}

/// Empirical CCDF of the typical user's SINR.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageCurve {
    pub thresholds_db: Vec<f64>,
    pub coverage: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_topologies: usize,
}

pub fn coverage_from_samples(samples: &[f64], thresholds_db: &[f64]) -> CoverageCurve {
    let n = samples.len() as f64;
    let mut coverage = Vec::with_capacity(thresholds_db.len());
    let mut stderr = Vec::with_capacity(thresholds_db.len());
    for &t_db in thresholds_db {
        let t = 10f64.powf(t_db / 10.0);
        let p = samples.iter().filter(|&&s| s > t).count() as f64 / n;
        coverage.push(p);
        stderr.push((p * (1.0 - p) / n).sqrt());
    }
    CoverageCurve {
        thresholds_db: thresholds_db.to_vec(),
        coverage,
        stderr,
        n_topologies: samples.len(),
    }
}

/// Typical-user SINR on each of `config.mc.n_topologies` PPP topologies.
pub fn typical_user_samples(
    config: &SystemConfig,
    source: SinrSource,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let book = make_pilot_book(config.tau_tr, config.users, &config.pilot_assignment)?;
    (0..config.mc.n_topologies)
        .into_par_iter()
        .map(|t| {
            let ts = seed::topology_seed(master_seed, t);
            let net = sample_ppp(config, ts)?;
            Ok(typical_user_sinr(
                &net,
                config,
                &book,
                source,
                config.mc.n_channel_draws,
                seed::draw_seed(ts),
            ))
        })
        .collect()
}

/// Fraction of topologies whose typical-user SINR exceeds each threshold.
pub fn coverage_mc(
    config: &SystemConfig,
    thresholds_db: &[f64],
    source: SinrSource,
    master_seed: u64,
) -> Result<CoverageCurve> {
    if thresholds_db.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::config("thresholds", "must be sorted ascending"));
    }
    let samples = typical_user_samples(config, source, master_seed)?;
    Ok(coverage_from_samples(&samples, thresholds_db))
}

/// Nearest-AP association with one user per AP. Pairs are granted in order of
/// increasing distance (ties by AP index, then user index); a user left without
/// a free AP is unserved.
pub fn associate_nearest(net: &NetworkRealization) -> Vec<Option<usize>> {
    let (m_aps, k_users) = net.distances.dim();
    let mut pairs: Vec<(f64, usize, usize)> = net
        .distances
        .indexed_iter()
        .map(|((m, k), &r)| (r, m, k))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut ap_taken = vec![false; m_aps];
    let mut serving = vec![None; k_users];
    let mut left = k_users.min(m_aps);
    for (_, m, k) in pairs {
        if left == 0 {
            break;
        }
        if !ap_taken[m] && serving[k].is_none() {
            ap_taken[m] = true;
            serving[k] = Some(m);
            left -= 1;
        }
    }
    serving
}

/// Small-cell baseline on one topology.
#[derive(Clone, Debug)]
pub struct ScReport {
    pub sinr: Vec<f64>,
    /// Spectral efficiency in b/s/Hz after the uplink and downlink training overhead.
    pub se: Vec<f64>,
    pub serving: Vec<Option<usize>>,
    /// Per-AP downlink power, `(M/K) rho_d`.
    pub rho_sc: f64,
    pub moments: MomentEstimates,
}

/// Each user is served by one AP with conjugate beamforming on that AP's own
/// estimate; every other serving AP interferes. With `focus = Some(k)` only
/// user `k` is evaluated and the other SINRs are NaN.
pub fn sc_baseline_sinr(
    net: &NetworkRealization,
    config: &SystemConfig,
    book: &PilotBook,
    n_draws: usize,
    draw_seed: u64,
    focus: Option<usize>,
) -> ScReport {
    let k_users = net.user_count();
    let serving = associate_nearest(net);
    let served: Vec<usize> = (0..k_users).filter(|&k| serving[k].is_some()).collect();
    let rows: Vec<usize> = served.iter().map(|&k| serving[k].unwrap()).collect();
    let rho_sc = net.ap_count() as f64 / k_users as f64 * config.rho_d;
    let sub = net.select_aps(&rows);
    let stats = EstimationStats::new(&sub, book, config.rho_tr);
    let wanted = |k: usize| focus.is_none_or(|j| j == k);
    let fast = focus.and_then(|f| RowSampler::new(book, config.antennas, f));
    let mut sub_row = vec![None; k_users];
    for (r, &j) in served.iter().enumerate() {
        sub_row[j] = Some(r);
    }
    let moments = accumulate(k_users, focus, n_draws.max(1), draw_seed, |rng| {
        if let Some(rows) = &fast {
            return Sample::Row(rows.small_cell(&sub, &stats, &sub_row, rng));
        }
        let draw = ChannelDraw::sample_with(&sub, book, &stats, config.antennas, rng);
        let mut effective = Array2::zeros((k_users, k_users));
        for k in (0..k_users).filter(|&k| !wanted(k)) {
            effective.row_mut(k).fill(Complex64::new(f64::NAN, f64::NAN));
        }
        for (r, &j) in served.iter().enumerate() {
            let c = 1.0 / stats.sigma2[[r, j]];
            for k in (0..k_users).filter(|&k| wanted(k)) {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..config.antennas {
                    acc += draw.h[[k, r, n]].conj() * draw.h_hat[[j, r, n]];
                }
                effective[[k, j]] = acc * c;
            }
        }
        Sample::Full(LinkGains {
            effective,
            error: vec![Complex64::new(0.0, 0.0); k_users],
            precoder_power: 0.0,
        })
    });
    let mut mu = vec![0.0; k_users];
    for (r, &j) in served.iter().enumerate() {
        mu[j] = stats.sigma2[[r, j]];
    }
    let sinr: Vec<f64> = (0..k_users)
        .map(|k| {
            if !wanted(k) {
                return f64::NAN;
            }
            if serving[k].is_none() {
                return 0.0;
            }
            let interference: f64 = served
                .iter()
                .filter(|&&j| j != k)
                .map(|&j| mu[j] * moments.cross_power[[k, j]])
                .sum();
            mu[k] * moments.desired_mean[k].norm_sqr()
                / (mu[k] * moments.desired_var[k] + interference + 1.0 / rho_sc)
        })
        .collect();
    let prelog = config.sc_prelog();
    let se = sinr.iter().map(|g| prelog * (1.0 + g).log2()).collect();
    ScReport {
        sinr,
        se,
        serving,
        rho_sc,
        moments,
    }
}
