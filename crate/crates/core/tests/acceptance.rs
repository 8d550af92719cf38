//! Acceptance checks. Each criterion prints one `PASS` or `FAIL` line; a failed
//! criterion does not abort the run.

use std::time::Instant;

use cfsg::channel::{EstimationStats, make_pilot_book};
use cfsg::closed_form::{
    coverage_lower_bound, coverage_lower_bound_binomial, de_moments, de_sinr, mean_field_sinr,
    rate_lower_bound,
};
use cfsg::downlink::{
    MuMode, SinrSource, TYPICAL_USER, coverage_mc, estimate_moments, statistical_sinr,
    typical_user_samples,
};
use cfsg::experiments::sweep::{Metric, SweepResult, parse_sweep};
use cfsg::experiments::{Scale, reproduce_figure, run_sweep};
use cfsg::geometry::{path_loss_spatial_moment, sample_ppp, sample_with_ap_count};
use cfsg::{MonteCarlo, SystemConfig, seed};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn defaults() -> (SystemConfig, cfsg::channel::PilotBook) {
    let c = SystemConfig::default();
    let b = make_pilot_book(c.tau_tr, c.users, &c.pilot_assignment).unwrap();
    (c, b)
}

fn de_tightness() -> Outcome {
    let (c, book) = defaults();
    let (n_topologies, draws, master) = (200, 10_000, 101);
    let mut good_topologies = 0;
    let mut good_pairs = 0;
    let mut worst: f64 = 0.0;
    for t in 0..n_topologies {
        let ts = seed::topology_seed(master, t);
        let net = sample_with_ap_count(&c, 20, ts).unwrap();
        let r = statistical_sinr(&net, &c, &book, draws, seed::draw_seed(ts), MuMode::Deterministic);
        let de = de_sinr(&net, &c, &book);
        let errs: Vec<f64> = r
            .statistical
            .iter()
            .zip(&de)
            .map(|(s, d)| ((s - d.value) / d.value).abs())
            .collect();
        good_pairs += errs.iter().filter(|&&e| e <= 0.10).count();
        if errs.iter().all(|&e| e <= 0.10) {
            good_topologies += 1;
        }
        worst = errs.iter().fold(worst, |a, &b| a.max(b));
    }
    let frac = good_topologies as f64 / n_topologies as f64;
    let pair_frac = good_pairs as f64 / (n_topologies * c.users) as f64;
    outcome(
        frac >= 0.95,
        format!(
            "M=20, {draws} draws: {:.1}% of {n_topologies} topologies have every user within 10% \
             ({:.1}% of user-topology pairs), worst relative error {:.3}",
            100.0 * frac,
            100.0 * pair_frac,
            worst
        ),
    )
}

fn coverage_direction() -> Outcome {
    let thresholds: Vec<f64> = (-5..=20).map(f64::from).collect();
    let mut violations = Vec::new();
    let mut tightest = f64::INFINITY;
    let mut largest_violating_bound: f64 = 0.0;
    let mut violations_at_empty_tail = 0;
    for lambda in [20.0, 40.0] {
        let c = SystemConfig {
            lambda_ap: lambda,
            mc: MonteCarlo {
                n_topologies: 1000,
                n_channel_draws: 1,
            },
            ..SystemConfig::default()
        };
        let book = make_pilot_book(c.tau_tr, c.users, &c.pilot_assignment).unwrap();
        let sim = coverage_mc(&c, &thresholds, SinrSource::Deterministic, 202).unwrap();
        for (i, &t_db) in thresholds.iter().enumerate() {
            let bound = coverage_lower_bound(10f64.powf(t_db / 10.0), &c, &book).unwrap().p_cov;
            let slack = sim.coverage[i] + 2.0 * sim.stderr[i] - bound;
            tightest = tightest.min(slack);
            if slack < 0.0 {
                largest_violating_bound = largest_violating_bound.max(bound);
                if sim.coverage[i] == 0.0 {
                    violations_at_empty_tail += 1;
                }
                violations.push(format!("lambda={lambda} T={t_db}dB"));
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "52 grid points, smallest slack {tightest:.3e}{}",
            if violations.is_empty() {
                String::new()
            } else {
                format!(
                    "; {} violations ({}), largest violating bound {largest_violating_bound:.1e}, \
                     {violations_at_empty_tail} of them where no topology reached T so the plug-in SE is 0",
                    violations.len(),
                    violations.join(", ")
                )
            }
        ),
    )
}

fn form_equivalence() -> Outcome {
    let grid: Vec<f64> = (0..20).map(|i| -5.0 + 25.0 * i as f64 / 19.0).collect();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for w in 1..=60u32 {
        let c = SystemConfig {
            lambda_ap: f64::from(w),
            antennas: 1,
            ..SystemConfig::default()
        };
        let book = make_pilot_book(c.tau_tr, c.users, &c.pilot_assignment).unwrap();
        for &t_db in &grid {
            let t = 10f64.powf(t_db / 10.0);
            let p = coverage_lower_bound(t, &c, &book).unwrap().p_cov;
            let b = coverage_lower_bound_binomial(t, &c, &book).unwrap().p_cov;
            worst = worst.max((p - b).abs() / p.abs());
            checked += 1;
        }
    }
    outcome(
        worst <= 1e-9,
        format!("W = 1..60 on 20 thresholds ({checked} pairs), worst relative gap {worst:.2e}"),
    )
}

fn moment_oracles() -> Outcome {
    let (c, book) = defaults();
    let (draws, master) = (10_000, 303);
    let k = TYPICAL_USER;
    let mut checks = 0;
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let ts = seed::topology_seed(master, t);
        let net = sample_ppp(&c, ts).unwrap();
        let stats = EstimationStats::new(&net, &book, c.rho_tr);
        let est = estimate_moments(&net, &book, &stats, c.antennas, draws, seed::draw_seed(ts), None);
        let de = de_moments(&net, &stats, c.antennas, k);
        let w = (net.ap_count() * c.antennas) as f64;
        let mut check = |name: String, value: f64, se: f64, oracle: f64| {
            let z = (value - oracle).abs() / se;
            worst = worst.max(z);
            checks += 1;
            if !(z <= 3.0) {
                misses.push(format!("topology {t} {name}: {z:.2} SE"));
            }
        };
        check(
            "desired mean / W".into(),
            est.desired_mean[k].re / w,
            est.desired_mean_se[k] / w,
            1.0,
        );
        check(
            "variance".into(),
            est.error_power[k] / (w * w),
            est.error_power_se[k] / (w * w),
            de.variance / (w * w),
        );
        for i in (0..c.users).filter(|&i| i != k) {
            check(
                format!("interference from user {i}"),
                est.cross_power[[k, i]] / (w * w),
                est.cross_power_se[[k, i]] / (w * w),
                de.interference[i] / (w * w),
            );
        }
    }
    outcome(
        misses.is_empty(),
        format!(
            "{checks} moment checks on 20 topologies, largest deviation {worst:.2} SE{}",
            if misses.is_empty() {
                String::new()
            } else {
                format!("; outside 3 SE: {}", misses.join(", "))
            }
        ),
    )
}

/// Adaptive Simpson rule on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rule(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = rule(fa, flm, fm, a, m);
        let right = rule(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    step(f, a, b, fa, fm, fb, rule(fa, fm, fb, a, b), tol, 50)
}

fn spatial_moment() -> Outcome {
    let mut worst: f64 = 0.0;
    for v in [1u32, 2, 3] {
        for alpha in [2.5, 3.5, 4.5] {
            let va = f64::from(v) * alpha;
            // Integral of min(1, r^-alpha)^v over the plane: the unit disc, plus
            // 2 pi int_1^inf r^(1 - v alpha) dr written with r = e^u.
            let disc = 2.0 * std::f64::consts::PI * simpson(&|r| r, 0.0, 1.0, 1e-15);
            let upper = 80.0 / (va - 2.0);
            let tail = 2.0 * std::f64::consts::PI * simpson(&|u: f64| ((2.0 - va) * u).exp(), 0.0, upper, 1e-15);
            let quad = disc + tail;
            let closed = path_loss_spatial_moment(v, alpha).unwrap();
            worst = worst.max((closed - quad).abs() / quad);
        }
    }
    outcome(
        worst <= 1e-8,
        format!("9 (v, alpha) pairs, worst relative gap to quadrature {worst:.2e}"),
    )
}

fn limits() -> Outcome {
    let (c, book) = defaults();
    let low = coverage_lower_bound(1e-30, &c, &book).unwrap().p_cov;
    let high = coverage_lower_bound(1e30, &c, &book).unwrap().p_cov;
    let saturated = SystemConfig {
        tau_tr: c.tau_c,
        ..c.clone()
    };
    let sat_book = make_pilot_book(saturated.tau_tr, saturated.users, &saturated.pilot_assignment).unwrap();
    let se = rate_lower_bound(&saturated, &sat_book).unwrap().se;
    let mut doubling = true;
    for lambda in [5.0, 20.0, 40.0, 77.7, 300.0] {
        let one = SystemConfig {
            lambda_ap: lambda,
            ..c.clone()
        };
        let two = SystemConfig {
            lambda_ap: 2.0 * lambda,
            ..c.clone()
        };
        let g1 = mean_field_sinr(&one, &book).unwrap().value;
        let g2 = mean_field_sinr(&two, &book).unwrap().value;
        doubling &= g2 == 2.0 * g1;
    }
    let pass = (low - 1.0).abs() <= 1e-12 && high.abs() <= 1e-12 && se == 0.0 && doubling;
    outcome(
        pass,
        format!(
            "P_c(1e-30) = {low}, P_c(1e30) = {high:e}, se(tau_tr = tau_c) = {se}, \
             mean-field SINR doubles with density: {doubling}"
        ),
    )
}

fn strictly_decreasing(xs: &[(f64, f64)]) -> bool {
    xs.windows(2).all(|w| w[1].1 < w[0].1)
}

/// Points where `upper` is not strictly above `lower`, and how many of those are
/// ties at 0 or 1.
fn not_above(r: &SweepResult, upper: Metric, lower: Metric) -> (usize, usize) {
    let a = r.curve(upper);
    let b = r.curve(lower);
    let bad: Vec<_> = a.iter().zip(&b).filter(|(x, y)| x.1 <= y.1).collect();
    let saturated = bad
        .iter()
        .filter(|(x, y)| x.1 == y.1 && (x.1 == 0.0 || x.1 == 1.0))
        .count();
    (bad.len(), saturated)
}

fn figure_ordering() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let base = SystemConfig::default();
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, upper, lower) in [
        ("fig1", Metric::CoverageMc, Metric::ScCoverageMc),
        ("fig3", Metric::RateMc, Metric::ScRateMc),
        ("fig4", Metric::RateMc, Metric::ScRateMc),
    ] {
        let fig = reproduce_figure(name, Scale::Desk, &base, dir.path(), 0).unwrap();
        let (mut points, mut bad, mut saturated) = (0, 0, 0);
        for (_, r) in &fig.series {
            points += r.curve(upper).len();
            let (b, z) = not_above(r, upper, lower);
            bad += b;
            saturated += z;
        }
        pass &= bad == 0;
        let ties = if bad > 0 {
            format!(" ({saturated} of the {bad} others are ties with both at 0 or both at 1)")
        } else {
            String::new()
        };
        notes.push(format!("{name} CF > SC at {}/{points} points{ties}", points - bad));
    }
    for name in ["fig5a", "fig5b"] {
        let fig = reproduce_figure(name, Scale::Desk, &base, dir.path(), 0).unwrap();
        let r = &fig.series[0].1;
        let cf = strictly_decreasing(&r.curve(Metric::RateMc));
        let sc = strictly_decreasing(&r.curve(Metric::ScRateMc));
        let cf_span = span(&r.curve(Metric::RateMc));
        let sc_span = span(&r.curve(Metric::ScRateMc));
        pass &= cf && sc;
        notes.push(format!(
            "{name} decreasing in alpha: CF {cf} (range {cf_span:.2e}), SC {sc} (range {sc_span:.2e})"
        ));
    }
    outcome(pass, format!("desk scale, 1000 topologies: {}", notes.join("; ")))
}

fn span(xs: &[(f64, f64)]) -> f64 {
    let hi = xs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = xs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    hi - lo
}

fn jensen_chain() -> Outcome {
    let c = SystemConfig {
        mc: MonteCarlo {
            n_topologies: 10_000,
            n_channel_draws: 1,
        },
        ..SystemConfig::default()
    };
    let book = make_pilot_book(c.tau_tr, c.users, &c.pilot_assignment).unwrap();
    let bound = rate_lower_bound(&c, &book).unwrap().se;
    let samples = typical_user_samples(&c, SinrSource::Deterministic, 404).unwrap();
    let rates: Vec<f64> = samples.iter().map(|g| c.cf_prelog() * (1.0 + g).log2()).collect();
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    outcome(
        bound <= mean + 2.0 * se,
        format!("closed-form rate {bound:.4} vs simulated {mean:.4} (SE {se:.1e}) over 10^4 topologies"),
    )
}

fn determinism() -> Outcome {
    let spec = parse_sweep(
        "parameter = K\nvalues = 5, 10\nmetrics = coverage_mc, rate_mc, sc_rate_mc\n\
         n_topologies = 100\nn_channel_draws = 50\nsinr_source = statistical\n",
        SystemConfig::default().mc,
    )
    .unwrap();
    let c = SystemConfig::default();
    let csv: Vec<Vec<u8>> = [1, 2, 4, 7]
        .into_iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            run_sweep(&c, &spec, dir.path(), "d", threads).unwrap();
            std::fs::read(dir.path().join("d.csv")).unwrap()
        })
        .collect();
    let same = csv.iter().all(|x| x == &csv[0]);
    outcome(same, format!("CSV at 1, 2, 4 and 7 threads identical: {same}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("DE tightness", de_tightness),
        ("coverage bound direction", coverage_direction),
        ("form equivalence", form_equivalence),
        ("moment oracles", moment_oracles),
        ("spatial moment", spatial_moment),
        ("limits", limits),
        ("figure ordering", figure_ordering),
        ("Jensen chain", jensen_chain),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
}
