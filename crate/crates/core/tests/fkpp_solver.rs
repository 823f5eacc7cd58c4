use std::f64::consts::SQRT_2;

use bbm_ldp::fkpp::{self, front_position, Probe, Reaction, SolveOutput, SolverSettings};
use bbm_ldp::rates::bramson_centering;
use bbm_ldp::varopt::{log_normal_cdf, normal_pdf};
use bbm_ldp::{Error, ModelParams};

fn unit() -> ModelParams {
    ModelParams::default()
}

fn quiet(dx: f64) -> SolverSettings {
    SolverSettings {
        dx,
        front_interval: None,
        ..SolverSettings::default()
    }
}

fn rays(alphas: &[f64], times: &[f64]) -> Vec<Probe> {
    alphas
        .iter()
        .flat_map(|&alpha| times.iter().map(move |&t| Probe { alpha, t }))
        .collect()
}

#[test]
fn heat_mode_matches_heat_kernel() {
    let settings = SolverSettings {
        dt: Some(1e-5),
        domain: Some((-8.0, 8.0)),
        snapshot_times: vec![1.0],
        reaction: Reaction::Disabled,
        ..quiet(0.005)
    };
    let out = fkpp::solve(&unit(), 1.0, &[], &settings).unwrap();
    let field = out.snapshot_at(1.0).unwrap();
    let s = (out.eps * out.eps + 1.0).sqrt();
    let mut worst: f64 = 0.0;
    for (i, x) in field.grid.xs().enumerate() {
        if x.abs() <= 6.0 {
            let want = log_normal_cdf(x / s).exp();
            worst = worst.max((field.log_u[i].exp() - want).abs());
        }
    }
    assert!(worst <= 1e-6, "max |u - heat kernel| = {worst:e}");
}

#[test]
fn zero_horizon_returns_initial_condition() {
    let probes = [Probe { alpha: 0.0, t: 0.0 }];
    let out = fkpp::solve(&unit(), 0.0, &probes, &quiet(0.1)).unwrap();
    assert_eq!(out.steps, 0);
    assert!((out.samples[0].ln_u - 0.5f64.ln()).abs() < 1e-15);
    assert_eq!(out.front.samples, vec![]);
}

#[test]
fn probes_outside_domain_overflow() {
    let settings = SolverSettings {
        domain: Some((-5.0, 20.0)),
        ..quiet(0.1)
    };
    let err = fkpp::solve(&unit(), 10.0, &[Probe { alpha: -1.0, t: 10.0 }], &settings).unwrap_err();
    assert!(matches!(err, Error::DomainOverflow { .. }), "{err:?}");
}

#[test]
fn rejects_bad_probes() {
    let s = quiet(0.1);
    assert!(fkpp::solve(&unit(), 5.0, &[Probe { alpha: 1.0, t: 2.0 }], &s).is_err());
    assert!(fkpp::solve(&unit(), 5.0, &[Probe { alpha: 0.0, t: 6.0 }], &s).is_err());
}

/// Lower and upper bounds for data smoothed at scale `eps`, where the
/// initial maximum is spread as `N(0, eps^2)`.
fn bounds(x: f64, t: f64, eps: f64) -> (f64, f64) {
    let s = (eps * eps + t).sqrt();
    let no_branch = -t + log_normal_cdf(x / s);
    let first_moment = {
        let m = t + log_normal_cdf(-x / s);
        if m < 0.0 {
            (-m.exp()).ln_1p()
        } else {
            f64::NEG_INFINITY
        }
    };
    (no_branch.max(first_moment), log_normal_cdf(x / s))
}

#[test]
fn bounds_sandwich_on_rays() {
    let times = [1.0, 2.0, 5.0, 10.0];
    let alphas = [0.99, 0.9, 0.5, 0.0, -0.5, -1.0, -1.8];
    let out = fkpp::solve(&unit(), 10.0, &rays(&alphas, &times), &quiet(0.05)).unwrap();
    for s in &out.samples {
        let (lo, hi) = bounds(s.x_probe, s.t, out.eps);
        let slack = 1e-4 * lo.abs();
        assert!(s.ln_u >= lo - slack, "alpha {} t {}: {} < lower {lo}", s.alpha, s.t, s.ln_u);
        assert!(s.ln_u <= hi + 1e-12, "alpha {} t {}: {} > upper {hi}", s.alpha, s.t, s.ln_u);
    }
}

#[test]
fn renewal_inequality_at_half_time() {
    let t = 10.0;
    let tau = t / 2.0;
    let settings = SolverSettings {
        snapshot_times: vec![tau, t],
        ..quiet(0.05)
    };
    let out = fkpp::solve(&unit(), t, &[Probe { alpha: -1.0, t }], &settings).unwrap();
    let (half, full) = (out.snapshot_at(tau).unwrap(), out.snapshot_at(t).unwrap());
    let (lo, hi) = (half.grid.x_min, half.grid.x_max);
    let u_half = |z: f64| {
        if z >= hi {
            1.0
        } else if z <= lo {
            0.0
        } else {
            half.interpolate(z).unwrap().exp()
        }
    };
    let sd = tau.sqrt();
    let n = 20_000;
    let h = 28.0 * sd / n as f64;
    for x in [-10.0, -5.0, 0.0, 3.0, 8.0] {
        let mut acc = 0.0;
        for i in 0..=n {
            let y = -14.0 * sd + i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * normal_pdf(y / sd) / sd * u_half(x - y);
        }
        let renewal = (-tau).exp() * acc * h / 3.0;
        let u = full.interpolate(x).unwrap().exp();
        assert!(renewal <= u * (1.0 + 1e-3), "x {x}: renewal {renewal:e} > u {u:e}");
    }
}

#[test]
fn fields_stay_monotone_log_cdfs() {
    let settings = SolverSettings {
        snapshot_times: vec![0.5, 3.0, 8.0],
        ..SolverSettings::default()
    };
    let out = fkpp::solve(&unit(), 8.0, &rays(&[-1.0], &[8.0]), &settings).unwrap();
    for f in &out.snapshots {
        f.check_invariants().unwrap();
    }
    assert!(out.max_repair <= bbm_ldp::fkpp::REPAIR_TOLERANCE);
    let later: Vec<f64> = out.front.samples.iter().filter(|s| s.0 >= 1.0).map(|s| s.1).collect();
    assert!(later.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn tail_samples_decrease_in_time() {
    let times = [2.0, 4.0, 6.0, 8.0];
    let out = fkpp::solve(&unit(), 8.0, &rays(&[0.5, 0.0, -1.0], &times), &quiet(0.1)).unwrap();
    for alpha in [0.5, 0.0, -1.0] {
        let series = out.tail_series(alpha);
        assert!(series.samples.iter().all(|s| s.1 <= 0.0));
        assert!(series.samples.windows(2).all(|w| w[1].1 < w[0].1), "{series:?}");
    }
}

fn probe_values(out: &SolveOutput) -> Vec<f64> {
    out.samples.iter().map(|s| s.ln_u).collect()
}

#[test]
fn grid_convergence_under_one_percent() {
    let probes = rays(&[0.5, 0.0, -0.5, -1.0], &[5.0, 10.0]);
    let coarse = SolverSettings {
        dt: Some(0.0025),
        ..quiet(0.1)
    };
    let fine = SolverSettings {
        dt: Some(0.00125),
        ..quiet(0.05)
    };
    let a = fkpp::solve(&unit(), 10.0, &probes, &coarse).unwrap();
    let b = fkpp::solve(&unit(), 10.0, &probes, &fine).unwrap();
    for (x, y) in probe_values(&a).iter().zip(probe_values(&b)) {
        if y.abs() >= 1.0 {
            assert!(((x - y) / y).abs() < 0.01, "{x} vs {y}");
        }
    }
}

#[test]
fn brownian_scaling_in_sigma() {
    // The same alpha is the point 2x when sigma doubles.
    let probes = rays(&[0.5, 0.0, -0.5, -1.0], &[4.0, 8.0]);
    let a = fkpp::solve(&unit(), 8.0, &probes, &quiet(0.1)).unwrap();
    let b = fkpp::solve(&ModelParams::new(4.0).unwrap(), 8.0, &probes, &quiet(0.1)).unwrap();
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        assert!((sb.x_probe - 2.0 * sa.x_probe).abs() < 1e-12);
        assert!(((sa.ln_u - sb.ln_u) / sa.ln_u).abs() < 0.01, "{sa:?} vs {sb:?}");
    }
}

#[test]
fn heat_mode_needs_the_startup_scheme() {
    // The log scheme alone leaves an O(dx^2 / eps) shift from the first
    // few steps, when the step is only a couple of cells wide.
    let run = |startup_time: f64| {
        let settings = SolverSettings {
            dt: Some(1e-4),
            domain: Some((-8.0, 8.0)),
            reaction: Reaction::Disabled,
            startup_time,
            ..quiet(0.02)
        };
        let out = fkpp::solve(&unit(), 1.0, &[Probe { alpha: 0.0, t: 1.0 }], &settings).unwrap();
        (out.samples[0].ln_u.exp() - 0.5).abs()
    };
    assert!(run(1.0) < 1e-12);
    assert!(run(0.0) > 1e-4);
}

#[test]
fn front_examples() {
    // x_front(t) = m(t) + O(1): at t = 50 the log correction alone puts
    // the front 5.9% behind sqrt(2) t, so the position is compared with
    // the Bramson centering instead.
    let settings = SolverSettings::default();
    let a = fkpp::solve(&unit(), 50.0, &[], &settings).unwrap();
    let b = fkpp::solve(&ModelParams::new(4.0).unwrap(), 50.0, &[], &settings).unwrap();
    let xa = a.front.position_at(50.0).unwrap();
    let xb = b.front.position_at(50.0).unwrap();
    let m = bramson_centering(50.0).unwrap();
    assert!((xa - m).abs() < 3.0, "front {xa} vs m(50) = {m}");
    assert!(xa / 50.0 < SQRT_2);
    assert!((xb / xa - 2.0).abs() < 0.02, "ratio {}", xb / xa);
    assert!(a.front.position_at(0.0).unwrap().abs() < 1e-12);
}

#[test]
fn front_from_initial_field_is_origin() {
    let grid = bbm_ldp::fkpp::Grid::new(-5.0, 5.0, 0.1, 1.0).unwrap();
    let field = bbm_ldp::fkpp::init_field(&grid, 0.1).unwrap();
    assert!(front_position(&field).unwrap().abs() < 1e-12);
}

#[test]
fn smoothing_width_moves_only_the_prefactor() {
    let probes = rays(&[0.0, -1.0], &[10.0, 15.0, 20.0, 25.0, 30.0, 40.0]);
    let run = |eps: f64| {
        let s = SolverSettings {
            eps: Some(eps),
            ..quiet(0.1)
        };
        fkpp::solve(&unit(), 40.0, &probes, &s).unwrap()
    };
    let (a, b) = (run(0.1), run(0.2));
    for alpha in [0.0, -1.0] {
        let fa = fkpp::fit_tail_series(&a.tail_series(alpha), true).unwrap();
        let fb = fkpp::fit_tail_series(&b.tail_series(alpha), true).unwrap();
        assert!(((fa.a - fb.a) / fa.a).abs() < 0.002, "{} vs {}", fa.a, fb.a);
    }
}
