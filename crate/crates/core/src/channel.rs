//! Uplink training with (possibly) shared pilots and per-AP linear MMSE
//! channel estimation.
//!
//! Complex vectors for link `(m, k)` live in `Array3` tensors indexed
//! `[k, m, n]`, so the stacked channel of user `k` over all APs is one
//! contiguous row of length `M * N`.

use ndarray::{Array2, Array3, ArrayView1};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::PilotPolicy;
use crate::error::{Error, Result};
use crate::geometry::NetworkRealization;

const UNIT_NORM_TOL: f64 = 1e-9;

/// Pilot sequences `psi_k` (columns) and their overlap `|psi_j^H psi_k|^2`.
#[derive(Clone, Debug)]
pub struct PilotBook {
    pub tau_tr: usize,
    /// `tau_tr x K`, unit-norm columns.
    pub sequences: Array2<Complex64>,
    /// `K x K`, entry `[j, k] = |psi_j^H psi_k|^2`.
    pub gram: Array2<f64>,
    // For each k, every i with psi_i^H psi_k != 0 together with that product.
    couplings: Vec<Vec<(usize, Complex64)>>,
    // For each k, the nonzero entries of psi_k.
    support: Vec<Vec<(usize, Complex64)>>,
}

impl PilotBook {
    /// Wraps a caller-supplied pilot matrix after checking column norms.
    pub fn from_sequences(sequences: Array2<Complex64>) -> Result<Self> {
        let (tau, k) = sequences.dim();
        if tau == 0 || k == 0 {
            return Err(Error::InvalidPilots("empty pilot matrix".into()));
        }
        for (col, psi) in sequences.columns().into_iter().enumerate() {
            let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            if (norm2 - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidPilots(format!(
                    "column {col} has squared norm {norm2}, expected 1"
                )));
            }
        }
        let inner = |i: usize, j: usize| -> Complex64 {
            sequences
                .column(i)
                .iter()
                .zip(sequences.column(j))
                .map(|(a, b)| a.conj() * b)
                .sum()
        };
        let mut gram = Array2::zeros((k, k));
        let mut couplings = vec![Vec::new(); k];
        for j in 0..k {
            for i in 0..k {
                let p = inner(i, j);
                gram[[i, j]] = p.norm_sqr().min(1.0);
                if p.norm_sqr() > 0.0 {
                    couplings[j].push((i, p));
                }
            }
        }
        let support = sequences
            .columns()
            .into_iter()
            .map(|psi| {
                psi.iter()
                    .enumerate()
                    .filter(|(_, z)| z.norm_sqr() > 0.0)
                    .map(|(t, z)| (t, *z))
                    .collect()
            })
            .collect();
        Ok(Self {
            tau_tr: tau,
            sequences,
            gram,
            couplings,
            support,
        })
    }

    pub fn users(&self) -> usize {
        self.sequences.ncols()
    }

    /// `sum_j |psi_j^H psi_k|^2`: 1 for a private pilot, the group size under reuse.
    pub fn contamination(&self, k: usize) -> f64 {
        self.gram.column(k).sum()
    }

    /// Users whose pilots overlap user `k`'s (including `k`), with `psi_i^H psi_k`.
    pub fn couplings(&self, k: usize) -> &[(usize, Complex64)] {
        &self.couplings[k]
    }
}

/// Builds `K` pilots of length `tau_tr` from canonical basis vectors or an explicit matrix.
pub fn make_pilot_book(tau_tr: usize, users: usize, policy: &PilotPolicy) -> Result<PilotBook> {
    if tau_tr == 0 {
        return Err(Error::InvalidPilots("tau_tr must be at least 1".into()));
    }
    let canonical = |slot: &dyn Fn(usize) -> usize| {
        Array2::from_shape_fn((tau_tr, users), |(t, k)| {
            if slot(k) == t {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    };
    let sequences = match policy {
        PilotPolicy::OrthogonalIfFits | PilotPolicy::RoundRobin => canonical(&|k| k % tau_tr),
        PilotPolicy::Explicit(m) => {
            if m.dim() != (tau_tr, users) {
                return Err(Error::InvalidPilots(format!(
                    "expected a {tau_tr} x {users} matrix, got {:?}",
                    m.dim()
                )));
            }
            m.clone()
        }
    };
    PilotBook::from_sequences(sequences)
}

/// Per-link estimation statistics, fixed by the topology and the pilot book.
#[derive(Clone, Debug)]
pub struct EstimationStats {
    pub tau_tr: usize,
    pub rho_tr: f64,
    /// `M x K`: `d_mk = sum_i |psi_i^H psi_k|^2 l_mi + 1 / (tau_tr rho_tr)`.
    pub d: Array2<f64>,
    /// `M x K`: `d_mk - l_mk`, accumulated without the subtraction.
    pub excess: Array2<f64>,
    /// `M x K`: estimate variance `l_mk^2 / d_mk`.
    pub sigma2: Array2<f64>,
    /// `M x K`: error variance `l_mk (1 - l_mk / d_mk)`.
    pub sigma2_err: Array2<f64>,
}

impl EstimationStats {
    pub fn new(net: &NetworkRealization, book: &PilotBook, rho_tr: f64) -> Self {
        let l = &net.path_loss;
        let (m, k) = l.dim();
        assert_eq!(book.users(), k, "pilot book and realization disagree on K");
        let noise = 1.0 / (book.tau_tr as f64 * rho_tr);
        let excess = Array2::from_shape_fn((m, k), |(ap, user)| {
            book.gram
                .column(user)
                .iter()
                .zip(l.row(ap))
                .enumerate()
                .map(|(i, (g, lmi))| if i == user { (g - 1.0) * lmi } else { g * lmi })
                .sum::<f64>()
                + noise
        });
        let d = &excess + l;
        let sigma2 = Array2::from_shape_fn((m, k), |(ap, user)| {
            let lmk = l[[ap, user]];
            lmk * lmk / d[[ap, user]]
        });
        let sigma2_err = Array2::from_shape_fn((m, k), |(ap, user)| {
            let lmk = l[[ap, user]];
            lmk * excess[[ap, user]] / d[[ap, user]]
        });
        Self {
            tau_tr: book.tau_tr,
            rho_tr,
            d,
            excess,
            sigma2,
            sigma2_err,
        }
    }
}

/// Standard circularly-symmetric complex Gaussian sample, `CN(0, 1)`.
#[inline]
pub(crate) fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Small-scale fading `g_mk`, i.i.d. `CN(0, 1)` entries stored as `[k, m, n]`.
#[derive(Clone, Debug)]
pub struct SmallScaleFading(pub Array3<Complex64>);

impl SmallScaleFading {
    pub fn link(&self, m: usize, k: usize) -> ArrayView1<'_, Complex64> {
        self.0.slice(ndarray::s![k, m, ..])
    }
}

pub fn draw_small_scale<R: Rng + ?Sized>(
    net: &NetworkRealization,
    antennas: usize,
    rng: &mut R,
) -> SmallScaleFading {
    let shape = (net.user_count(), net.ap_count(), antennas);
    SmallScaleFading(Array3::from_shape_simple_fn(shape, || cn01(rng)))
}

/// True channels `h_mk = l_mk^(1/2) g_mk`.
pub fn true_channels(fading: &SmallScaleFading, net: &NetworkRealization) -> Array3<Complex64> {
    let mut h = fading.0.clone();
    scale_links(&mut h, |m, k| net.path_loss[[m, k]].sqrt());
    h
}

/// Multiplies every length-`N` link vector `[k, m, ..]` by `factor(m, k)`.
fn scale_links(a: &mut Array3<Complex64>, factor: impl Fn(usize, usize) -> f64) {
    let (_, m_aps, n_ant) = a.dim();
    let data = a.as_slice_mut().expect("standard layout");
    for (idx, link) in data.chunks_exact_mut(n_ant.max(1)).enumerate() {
        let f = factor(idx % m_aps, idx / m_aps);
        for z in link {
            *z *= f;
        }
    }
}

/// Projected training observation
/// `y_mk = sum_i l_mi^(1/2) g_mi (psi_i^H psi_k) + n_m psi_k / sqrt(tau_tr rho_tr)`,
/// where `n_m` is a fresh `N x tau_tr` matrix of `CN(0, 1)` receiver noise.
/// Observations are stored `[k, m, n]`.
pub fn training_observation<R: Rng + ?Sized>(
    fading: &SmallScaleFading,
    net: &NetworkRealization,
    book: &PilotBook,
    rho_tr: f64,
    rng: &mut R,
) -> Array3<Complex64> {
    let (k_users, m_aps, n_ant) = fading.0.dim();
    let tau = book.tau_tr;
    let noise_scale = 1.0 / (tau as f64 * rho_tr).sqrt();
    // Received pilot block per AP, [m, t, n].
    let mut rx = Array3::from_shape_simple_fn((m_aps, tau, n_ant), || cn01(rng) * noise_scale);
    let g = fading.0.as_slice().expect("standard layout");
    let r = rx.as_slice_mut().expect("standard layout");
    for i in 0..k_users {
        for m in 0..m_aps {
            let src = &g[(i * m_aps + m) * n_ant..][..n_ant];
            let amp = net.path_loss[[m, i]].sqrt();
            for &(t, psi) in &book.support[i] {
                let w = psi.conj() * amp;
                let dst = &mut r[(m * tau + t) * n_ant..][..n_ant];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * w;
                }
            }
        }
    }
    let mut y = Array3::zeros((k_users, m_aps, n_ant));
    let out = y.as_slice_mut().expect("standard layout");
    for k in 0..k_users {
        for m in 0..m_aps {
            let dst = &mut out[(k * m_aps + m) * n_ant..][..n_ant];
            for &(t, psi) in &book.support[k] {
                let src = &r[(m * tau + t) * n_ant..][..n_ant];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * psi;
                }
            }
        }
    }
    y
}

/// Linear MMSE estimate `h^_mk = (l_mk / d_mk) y_mk` with its variances.
#[derive(Clone, Debug)]
pub struct ChannelEstimate {
    pub h_hat: Array3<Complex64>,
    pub stats: EstimationStats,
}

pub fn mmse_estimate(
    observation: &Array3<Complex64>,
    net: &NetworkRealization,
    book: &PilotBook,
    rho_tr: f64,
) -> ChannelEstimate {
    let stats = EstimationStats::new(net, book, rho_tr);
    let h_hat = apply_mmse(observation.clone(), net, &stats);
    ChannelEstimate { h_hat, stats }
}

pub(crate) fn apply_mmse(
    observation: Array3<Complex64>,
    net: &NetworkRealization,
    stats: &EstimationStats,
) -> Array3<Complex64> {
    let mut h_hat = observation;
    scale_links(&mut h_hat, |m, k| net.path_loss[[m, k]] / stats.d[[m, k]]);
    h_hat
}

/// One small-scale fading instance with its training-based estimates.
#[derive(Clone, Debug)]
pub struct ChannelDraw {
    pub g: SmallScaleFading,
    pub h: Array3<Complex64>,
    pub h_hat: Array3<Complex64>,
    pub d: Array2<f64>,
    pub sigma2: Array2<f64>,
    pub sigma2_err: Array2<f64>,
}

impl ChannelDraw {
    pub fn sample<R: Rng + ?Sized>(
        net: &NetworkRealization,
        book: &PilotBook,
        antennas: usize,
        rho_tr: f64,
        rng: &mut R,
    ) -> Self {
        let stats = EstimationStats::new(net, book, rho_tr);
        Self::sample_with(net, book, &stats, antennas, rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(
        net: &NetworkRealization,
        book: &PilotBook,
        stats: &EstimationStats,
        antennas: usize,
        rng: &mut R,
    ) -> Self {
        let g = draw_small_scale(net, antennas, rng);
        let y = training_observation(&g, net, book, stats.rho_tr, rng);
        let h = true_channels(&g, net);
        let h_hat = apply_mmse(y, net, stats);
        Self {
            g,
            h,
            h_hat,
            d: stats.d.clone(),
            sigma2: stats.sigma2.clone(),
            sigma2_err: stats.sigma2_err.clone(),
        }
    }

    pub fn antennas(&self) -> usize {
        self.h.dim().2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::array;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn orthogonal_book_has_identity_gram() {
        let book = make_pilot_book(10, 10, &PilotPolicy::OrthogonalIfFits).unwrap();
        assert_eq!(book.gram, Array2::<f64>::eye(10));
        for k in 0..10 {
            assert_eq!(book.contamination(k), 1.0);
        }
    }

    #[test]
    fn round_robin_reuse_pattern() {
        let book = make_pilot_book(10, 20, &PilotPolicy::RoundRobin).unwrap();
        assert_eq!(book.gram[[0, 10]], 1.0);
        assert_eq!(book.gram[[0, 1]], 0.0);
        assert_eq!(book.contamination(3), 2.0);
        assert_eq!(book.gram, book.gram.t());
    }

    #[test]
    fn orthogonal_policy_falls_back_to_reuse() {
        let book = make_pilot_book(4, 6, &PilotPolicy::OrthogonalIfFits).unwrap();
        assert_eq!(book.gram[[1, 5]], 1.0);
    }

    #[test]
    fn explicit_non_unit_columns_are_rejected() {
        let bad = array![[c(1.0), c(0.5)], [c(0.0), c(0.5)]];
        assert!(matches!(
            make_pilot_book(2, 2, &PilotPolicy::Explicit(bad)),
            Err(Error::InvalidPilots(_))
        ));
    }

    #[test]
    fn explicit_partial_overlap() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = array![[c(1.0), c(s)], [c(0.0), c(s)]];
        let book = make_pilot_book(2, 2, &PilotPolicy::Explicit(m)).unwrap();
        assert!((book.gram[[0, 1]] - 0.5).abs() < 1e-12);
        assert!((book.gram[[1, 1]] - 1.0).abs() < 1e-12);
    }

    fn small_net() -> NetworkRealization {
        NetworkRealization::from_path_loss(array![[1.0, 0.2], [0.05, 0.7], [0.3, 0.01]], 3.5)
            .unwrap()
    }

    #[test]
    fn variances_split_the_path_loss() {
        let net = small_net();
        let book = make_pilot_book(1, 2, &PilotPolicy::RoundRobin).unwrap();
        let stats = EstimationStats::new(&net, &book, 3.0);
        for ((m, k), &l) in net.path_loss.indexed_iter() {
            let s = stats.sigma2[[m, k]];
            assert!((s + stats.sigma2_err[[m, k]] - l).abs() < 1e-15);
            assert!(s > 0.0 && s <= l);
            assert!((s - l * l / stats.d[[m, k]]).abs() < 1e-15);
        }
    }

    #[test]
    fn noise_free_orthogonal_observation_is_the_channel() {
        let net = small_net();
        let book = make_pilot_book(2, 2, &PilotPolicy::OrthogonalIfFits).unwrap();
        let mut rng = seed::rng(5);
        let g = draw_small_scale(&net, 4, &mut rng);
        let y = training_observation(&g, &net, &book, 1e300, &mut rng);
        let h = true_channels(&g, &net);
        for (a, b) in y.iter().zip(h.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        let est = mmse_estimate(&y, &net, &book, 1e300);
        for (a, b) in est.h_hat.iter().zip(h.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(est.stats.sigma2_err.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn shared_pilot_adds_the_other_channel() {
        let net = small_net();
        let book = make_pilot_book(1, 2, &PilotPolicy::RoundRobin).unwrap();
        let mut rng = seed::rng(6);
        let g = draw_small_scale(&net, 3, &mut rng);
        let y = training_observation(&g, &net, &book, 1e300, &mut rng);
        let h = true_channels(&g, &net);
        for m in 0..3 {
            for n in 0..3 {
                let want = h[[0, m, n]] + h[[1, m, n]];
                assert!((y[[0, m, n]] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn contamination_lowers_estimate_variance() {
        let net = small_net();
        let alone = make_pilot_book(2, 2, &PilotPolicy::OrthogonalIfFits).unwrap();
        let shared = make_pilot_book(1, 2, &PilotPolicy::RoundRobin).unwrap();
        let a = EstimationStats::new(&net, &alone, 10.0);
        let b = EstimationStats::new(&net, &shared, 10.0);
        for (x, y) in a.sigma2.iter().zip(b.sigma2.iter()) {
            assert!(y < x);
        }
    }

    #[test]
    fn more_training_power_improves_estimates() {
        let net = small_net();
        let book = make_pilot_book(2, 2, &PilotPolicy::OrthogonalIfFits).unwrap();
        let mut prev = EstimationStats::new(&net, &book, 0.01).sigma2;
        for rho in [0.1, 1.0, 10.0, 100.0] {
            let next = EstimationStats::new(&net, &book, rho).sigma2;
            for (p, n) in prev.iter().zip(next.iter()) {
                assert!(n > p);
            }
            prev = next;
        }
    }
}
