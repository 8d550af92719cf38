//! PPP deployments on a square, optionally wrapped into a torus, and the
//! bounded single-slope path-loss model.
//!
//! Lengths are in km. The path-loss breakpoint sits at 1 km, so
//! `l(r) = min(1, r^-alpha)` with `r` in km.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Square simulation window `[0, side) x [0, side)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaSpec {
    pub side_km: f64,
    /// Measure distances on the torus obtained by gluing opposite edges.
    pub wrap: bool,
}

impl AreaSpec {
    pub fn new(side_km: f64, wrap: bool) -> Result<Self> {
        let area = Self { side_km, wrap };
        area.validate()?;
        Ok(area)
    }

    pub fn validate(&self) -> Result<()> {
        if self.side_km.is_finite() && self.side_km > 0.0 {
            Ok(())
        } else {
            Err(Error::config(
                "side_km",
                format!("area side must be positive, got {}", self.side_km),
            ))
        }
    }

    pub fn area_km2(&self) -> f64 {
        self.side_km * self.side_km
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..self.side_km).contains(&p.x) && (0.0..self.side_km).contains(&p.y)
    }

    pub fn distance(&self, p: Point, q: Point) -> f64 {
        if self.wrap {
            torus_distance(p, q, self)
        } else {
            (p.x - q.x).hypot(p.y - q.y)
        }
    }

    fn uniform_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            rng.random::<f64>() * self.side_km,
            rng.random::<f64>() * self.side_km,
        )
    }
}

/// Shortest distance between `p` and the nine periodic images of `q`.
///
/// Per axis the nearest image is at offset `min(|d|, side - |d|)`, which gives
/// the same minimum as enumerating the images.
pub fn torus_distance(p: Point, q: Point, area: &AreaSpec) -> f64 {
    let s = area.side_km;
    let wrap = |d: f64| {
        let d = d.abs() % s;
        d.min(s - d)
    };
    wrap(p.x - q.x).hypot(wrap(p.y - q.y))
}

/// Bounded path loss `min(1, r^-alpha)`.
pub fn path_loss(r: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 2.0) {
        return Err(Error::config(
            "alpha",
            format!("path-loss exponent must exceed 2, got {alpha}"),
        ));
    }
    Ok(bounded_gain(r, alpha))
}

#[inline]
fn bounded_gain(r: f64, alpha: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else {
        r.powf(-alpha)
    }
}

/// Polar integral `2 pi (int_0^1 y dy + int_1^inf y^(1 - v alpha) dy)` of the
/// v-th power of the path loss over the plane, in closed form.
pub fn path_loss_spatial_moment(order: u32, alpha: f64) -> Result<f64> {
    let va = order as f64 * alpha;
    if order == 0 || !(va > 2.0) {
        return Err(Error::DivergentMoment { order, alpha });
    }
    Ok(va * std::f64::consts::PI / (va - 2.0))
}

/// One PPP realization with its users and link path losses.
#[derive(Clone, Debug)]
pub struct NetworkRealization {
    pub area: AreaSpec,
    pub alpha: f64,
    pub ap_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    /// `M x K` AP-to-user distances in km.
    pub distances: Array2<f64>,
    /// `M x K` path losses `l_mk` in (0, 1].
    pub path_loss: Array2<f64>,
    /// Number of empty (M = 0) draws that were rejected before this one.
    pub rejected_empty: u32,
}

impl NetworkRealization {
    /// Builds a realization from explicit positions.
    pub fn from_positions(
        area: AreaSpec,
        alpha: f64,
        ap_positions: Vec<Point>,
        user_positions: Vec<Point>,
    ) -> Result<Self> {
        area.validate()?;
        path_loss(1.0, alpha)?;
        if ap_positions.is_empty() {
            return Err(Error::config("ap_positions", "need at least one AP"));
        }
        if user_positions.is_empty() {
            return Err(Error::config("user_positions", "need at least one user"));
        }
        if let Some(p) = ap_positions
            .iter()
            .chain(&user_positions)
            .find(|p| !area.contains(**p))
        {
            return Err(Error::config(
                "positions",
                format!("point ({}, {}) lies outside the area", p.x, p.y),
            ));
        }
        let (m, k) = (ap_positions.len(), user_positions.len());
        let distances =
            Array2::from_shape_fn((m, k), |(i, j)| area.distance(ap_positions[i], user_positions[j]));
        let path_loss = distances.mapv(|r| bounded_gain(r, alpha));
        Ok(Self {
            area,
            alpha,
            ap_positions,
            user_positions,
            distances,
            path_loss,
            rejected_empty: 0,
        })
    }

    /// Builds a synthetic realization directly from an `M x K` path-loss matrix.
    /// Distances are back-filled as `l^(-1/alpha)` (1 km on the bounded branch).
    pub fn from_path_loss(path_loss: Array2<f64>, alpha: f64) -> Result<Self> {
        path_loss_check(&path_loss)?;
        let (m, k) = path_loss.dim();
        if m == 0 || k == 0 {
            return Err(Error::config("path_loss", "need at least one AP and one user"));
        }
        let distances = path_loss.mapv(|l: f64| l.powf(-1.0 / alpha));
        let side = distances.iter().cloned().fold(1.0, f64::max) * 2.0;
        Ok(Self {
            area: AreaSpec {
                side_km: side,
                wrap: false,
            },
            alpha,
            ap_positions: vec![Point::new(0.0, 0.0); m],
            user_positions: vec![Point::new(0.0, 0.0); k],
            distances,
            path_loss,
            rejected_empty: 0,
        })
    }

    pub fn ap_count(&self) -> usize {
        self.path_loss.nrows()
    }

    pub fn user_count(&self) -> usize {
        self.path_loss.ncols()
    }

    /// The same users seen by a subset of the APs, in the order given.
    pub fn select_aps(&self, rows: &[usize]) -> Self {
        let pick = |a: &Array2<f64>| a.select(ndarray::Axis(0), rows);
        let ap_positions = if self.ap_positions.len() == self.ap_count() {
            rows.iter().map(|&m| self.ap_positions[m]).collect()
        } else {
            Vec::new()
        };
        Self {
            area: self.area,
            alpha: self.alpha,
            ap_positions,
            user_positions: self.user_positions.clone(),
            distances: pick(&self.distances),
            path_loss: pick(&self.path_loss),
            rejected_empty: self.rejected_empty,
        }
    }
}

fn path_loss_check(l: &Array2<f64>) -> Result<()> {
    if l.iter().all(|&v| v > 0.0 && v <= 1.0) {
        Ok(())
    } else {
        Err(Error::config("path_loss", "entries must lie in (0, 1]"))
    }
}

/// Draws a PPP realization: Poisson AP count with mean `lambda_ap * area`,
/// uniform AP and user positions. Empty draws are rejected and counted.
pub fn sample_ppp(config: &SystemConfig, seed: u64) -> Result<NetworkRealization> {
    config.validate()?;
    let mut rng = seed::rng(seed);
    let poisson = Poisson::new(config.mean_aps())
        .map_err(|e| Error::config("lambda_ap", e.to_string()))?;
    let mut rejected = 0u32;
    let m = loop {
        let m = poisson.sample(&mut rng) as usize;
        if m > 0 {
            break m;
        }
        rejected += 1;
    };
    let mut net = place_uniform(config, m, &mut rng)?;
    net.rejected_empty = rejected;
    Ok(net)
}

/// Draws a deployment conditioned on exactly `ap_count` APs. Given its count,
/// a PPP's points are i.i.d. uniform.
pub fn sample_with_ap_count(
    config: &SystemConfig,
    ap_count: usize,
    seed: u64,
) -> Result<NetworkRealization> {
    config.validate()?;
    let mut rng = seed::rng(seed);
    place_uniform(config, ap_count, &mut rng)
}

fn place_uniform<R: Rng + ?Sized>(
    config: &SystemConfig,
    ap_count: usize,
    rng: &mut R,
) -> Result<NetworkRealization> {
    let area = config.area;
    let aps = (0..ap_count).map(|_| area.uniform_point(rng)).collect();
    let users = (0..config.users).map(|_| area.uniform_point(rng)).collect();
    NetworkRealization::from_positions(area, config.alpha, aps, users)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(wrap: bool) -> AreaSpec {
        AreaSpec::new(1.0, wrap).unwrap()
    }

    #[test]
    fn wrap_across_an_edge() {
        let d = torus_distance(Point::new(0.05, 0.5), Point::new(0.95, 0.5), &unit(true));
        assert!((d - 0.10).abs() < 1e-12);
    }

    #[test]
    fn identity_distance_is_zero() {
        let p = Point::new(0.3, 0.8);
        assert_eq!(torus_distance(p, p, &unit(true)), 0.0);
    }

    #[test]
    fn half_diagonal_is_not_shortened() {
        let d = torus_distance(Point::new(0.0, 0.0), Point::new(0.5, 0.5), &unit(true));
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn flat_metric_does_not_wrap() {
        let area = unit(false);
        let d = area.distance(Point::new(0.05, 0.5), Point::new(0.95, 0.5));
        assert!((d - 0.9).abs() < 1e-12);
    }

    #[test]
    fn path_loss_branches() {
        assert_eq!(path_loss(0.5, 3.5).unwrap(), 1.0);
        assert_eq!(path_loss(1.0, 3.5).unwrap(), 1.0);
        assert_eq!(path_loss(1.0, 4.2).unwrap(), 1.0);
        assert!((path_loss(2.0, 3.5).unwrap() - 0.088_388_347_648_318_44).abs() < 1e-15);
        assert!(path_loss(2.0, 2.0).is_err());
        assert!(path_loss(2.0, 1.5).is_err());
    }

    #[test]
    fn spatial_moment_closed_form() {
        let pi = std::f64::consts::PI;
        let m1 = path_loss_spatial_moment(1, 3.5).unwrap();
        assert!((m1 - 3.5 * pi / 1.5).abs() < 1e-12);
        assert!((m1 - 7.330_382_858_376_184).abs() < 1e-12);
        let m2 = path_loss_spatial_moment(2, 3.5).unwrap();
        assert!((m2 - 7.0 * pi / 5.0).abs() < 1e-12);
        assert!(matches!(
            path_loss_spatial_moment(1, 2.0),
            Err(Error::DivergentMoment { order: 1, .. })
        ));
    }

    #[test]
    fn zero_side_is_rejected() {
        assert!(AreaSpec::new(0.0, true).is_err());
        let cfg = SystemConfig {
            area: AreaSpec {
                side_km: 0.0,
                wrap: true,
            },
            ..Default::default()
        };
        assert!(sample_ppp(&cfg, 1).is_err());
    }

    #[test]
    fn realization_invariants() {
        let cfg = SystemConfig::default();
        let net = sample_ppp(&cfg, 42).unwrap();
        let m = net.ap_count();
        assert!(m > 0);
        assert_eq!(net.ap_positions.len(), m);
        assert_eq!(net.user_positions.len(), cfg.users);
        assert!(net.ap_positions.iter().all(|p| cfg.area.contains(*p)));
        for ((i, j), &l) in net.path_loss.indexed_iter() {
            let r = net.distances[[i, j]];
            assert!(l > 0.0 && l <= 1.0);
            assert_eq!(l, if r <= 1.0 { 1.0 } else { r.powf(-cfg.alpha) });
            assert!(r <= cfg.area.side_km * std::f64::consts::SQRT_2 / 2.0 + 1e-12);
        }
    }

    #[test]
    fn conditioned_sampler_hits_count() {
        let cfg = SystemConfig::default();
        let net = sample_with_ap_count(&cfg, 20, 3).unwrap();
        assert_eq!(net.ap_count(), 20);
    }

    #[test]
    fn same_seed_same_realization() {
        let cfg = SystemConfig::default();
        let a = sample_ppp(&cfg, 9).unwrap();
        let b = sample_ppp(&cfg, 9).unwrap();
        assert_eq!(a.ap_positions, b.ap_positions);
        assert_eq!(a.user_positions, b.user_positions);
    }

    #[test]
    fn rare_empty_draws_are_rejected() {
        // mean 0.05 APs: most draws are empty and must be resampled
        let cfg = SystemConfig {
            lambda_ap: 0.05,
            ..Default::default()
        };
        let mut rejected = 0;
        for s in 0..50 {
            let net = sample_ppp(&cfg, s).unwrap();
            assert!(net.ap_count() >= 1);
            rejected += net.rejected_empty;
        }
        assert!(rejected > 0);
    }
}
