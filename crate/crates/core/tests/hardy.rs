use hardy_core::hardy::{
    build_profile, check_admissible, check_fg2_vanishes, check_lim_f_zero, closed_form_mu,
    estimate_f_asymptotics, eta_sensitivity, verify_identities, verify_identities_on,
    AdmissibilityVerdict, HardyError, HardyProfile, ProfileOptions,
};
use hardy_core::weights::{
    check_monotone, classify, make_weight, registry, ClassKind, Weight, WeightSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn weight(s: &str) -> Weight {
    make_weight(s.parse().unwrap()).unwrap()
}

fn profile_with(spec: &str, eta: f64, mu: f64, opts: ProfileOptions) -> HardyProfile {
    let w = weight(spec);
    let c = classify(&w, eta).unwrap();
    build_profile(&w, &c, eta, mu, opts).unwrap()
}

fn profile(spec: &str, eta: f64, mu: f64) -> HardyProfile {
    profile_with(spec, eta, mu, ProfileOptions::default())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn closed_forms_for_powers() {
    let p = profile("power:2", 0.5, 2.0);
    let q = profile("power:0.5", 0.5, 1.0);
    let c = profile("const:1", 0.25, 1.0);
    for &t in p.grid().iter().filter(|&&t| t < 0.5) {
        assert!(rel(p.hardy(t).unwrap().value, t) <= 1e-8);
        assert!(rel(q.hardy(t).unwrap().value, 2.0 * t) <= 1e-8);
        assert!(rel(q.remainder(t).unwrap().value, 1.0 + 0.5 * (0.5 / t).ln()) <= 1e-6);
    }
    assert!(rel(c.hardy(0.1).unwrap().value, 0.1) <= 1e-10);
    assert!(rel(c.tails().f_cap_tail, 0.25) <= 1e-12);
}

#[test]
fn tail_constants_beyond_eta() {
    let p = profile("power:2", 0.5, 2.0);
    assert!(rel(p.hardy(0.7).unwrap().value, 0.5) <= 1e-12);
    for spec in ["power:2", "const:1", "exppow:-1,0.5"] {
        let p = profile(spec, 0.5, 2.0);
        assert_eq!(p.remainder(0.9).unwrap().value, 2.0);
    }
    assert!(matches!(p.hardy(0.0), Err(HardyError::NonPositiveT(_))));
}

#[test]
fn below_grid_values_are_flagged() {
    let p = profile("const:1", 0.25, 1.0);
    let v = p.hardy(p.min_t() * 0.1).unwrap();
    assert!(v.extrapolated);
    assert!(!p.hardy(p.min_t() * 2.0).unwrap().extrapolated);
}

#[test]
fn derivative_identities() {
    let c = profile("const:1", 0.25, 1.0);
    assert!(verify_identities(&c, 1e-6).is_ok());
    let p = profile("power:2", 0.5, 2.0);
    let r = verify_identities(&p, 1e-5).unwrap();
    assert!(r.checks.iter().all(|c| c.max_rel_error <= 1e-5));
    let e = profile("exppow:-1,0.5", 0.25, 1.0);
    assert!(verify_identities_on(&e, 1e-4, Some((1e-4, 0.125))).is_ok());
}

#[test]
fn identity_violation_reports_worst_node() {
    let p = profile("exppow:-1,0.5", 0.25, 1.0);
    match verify_identities(&p, 1e-15) {
        Err(HardyError::ToleranceExceeded { t, .. }) => assert!(t > 0.0 && t < 0.25),
        r => panic!("{r:?}"),
    }
}

#[test]
fn asymptotic_fits() {
    let fit = estimate_f_asymptotics(&profile("exppow:-1,1", 0.25, 1.0)).unwrap();
    assert!((fit.exponent - 2.0).abs() < 0.02, "{fit:?}");
    let fit = estimate_f_asymptotics(&profile("exppow:1,0.5", 0.25, 1.0)).unwrap();
    assert!(
        (fit.exponent - 1.5).abs() < 0.02 && rel(fit.coefficient, 2.0) < 0.05,
        "{fit:?}"
    );
    let fit = estimate_f_asymptotics(&profile("power:2", 0.5, 2.0)).unwrap();
    assert!(
        (fit.exponent - 1.0).abs() < 1e-6 && rel(fit.coefficient, 1.0) < 1e-6,
        "{fit:?}"
    );
}

#[test]
fn shallow_grids_rejected() {
    let w = weight("const:1");
    let c = classify(&w, 0.25).unwrap();
    let shallow = ProfileOptions {
        decades: 4.0,
        ..ProfileOptions::default()
    };
    assert!(build_profile(&w, &c, 0.25, 1.0, shallow).is_err());
}

#[test]
fn admissibility_examples() {
    let verdict = |spec: &str| {
        let w = weight(spec);
        let c = classify(&w, 0.25).unwrap();
        check_admissible(&w, &c, 0.25, 0.25e-8).unwrap().verdict
    };
    assert_eq!(verdict("exppow:-1,1"), AdmissibilityVerdict::NotAdmissible);
    assert!(matches!(
        verdict("exppow:-1,0.5"),
        AdmissibilityVerdict::Admissible { .. }
    ));
    assert!(matches!(
        verdict("exppow:1,0.5"),
        AdmissibilityVerdict::Admissible { .. }
    ));
}

#[test]
fn fg2_vanishing() {
    let e = check_fg2_vanishes(&profile("exppow:-1,0.5", 0.25, 1.0));
    assert!(e.verdict);
    // F·G² ~ t^{1/2}: three decades of t give about 1.5 decades of decay.
    let (t0, v0) = e.trace[0];
    let (t1, v1) = *e.trace.iter().find(|(t, _)| *t >= 1e3 * t0).unwrap();
    let slope = (v1 / v0).ln() / (t1 / t0).ln();
    assert!((slope - 0.5).abs() < 0.1, "slope {slope}");
    // Power(α p/(p−1)) at p = 2 is Power(2).
    assert!(check_fg2_vanishes(&profile("power:2", 0.5, 2.0)).verdict);
    assert!(check_fg2_vanishes(&profile("const:1", 0.25, 1.0)).verdict);
}

#[test]
fn lim_f_zero() {
    let p = profile("power:2", 0.5, 2.0);
    assert!(check_lim_f_zero(&p, &check_monotone(p.weight(), 0.5)).unwrap());
    let q = profile("exppow:1,0.5", 0.25, 1.0);
    assert!(check_lim_f_zero(&q, &check_monotone(q.weight(), 0.25)).unwrap());
    let osc = make_weight(WeightSpec::expression("1+sin(1/t)*t^2")).unwrap();
    let c = classify(&osc, 0.25).unwrap();
    let o = build_profile(&osc, &c, 0.25, 1.0, ProfileOptions::default()).unwrap();
    let mono = check_monotone(&osc, 0.25);
    assert!(matches!(
        check_lim_f_zero(&o, &mono),
        Err(HardyError::HypothesisNotMet(_))
    ));
}

#[test]
fn product_identity_and_monotone_g_on_registry() {
    for spec in registry() {
        let w = make_weight(spec).unwrap();
        let c = classify(&w, 0.25).unwrap();
        let mu = closed_form_mu(&w, 0.25).unwrap_or(1.0);
        let p = build_profile(&w, &c, 0.25, mu, ProfileOptions::default()).unwrap();
        let grid = p.grid();
        for i in 0..grid.len() {
            let lhs = p.ln_f_cap_values()[i];
            let rhs = w.ln_w(grid[i]) + p.ln_f_values()[i];
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
                "{}: t={}",
                w.label(),
                grid[i]
            );
        }
        let g = p.g_values();
        assert!(g.windows(2).all(|x| x[0] >= x[1]), "{}", w.label());
        assert_eq!(*g.last().unwrap(), mu);
        assert!(g.iter().all(|&v| v >= mu));
        let f = p.f_values();
        match c.kind {
            ClassKind::P => assert!(f.iter().all(|&v| v >= mu * (1.0 - 1e-12))),
            ClassKind::Q => assert!(f.iter().all(|&v| v >= 0.0)),
        }
    }
}

#[test]
fn q_class_f_vanishes_at_zero_when_mass_concentrates_there() {
    for spec in ["const:1", "power:0.5", "exppow:1,0.5"] {
        let p = profile(spec, 0.25, 1.0);
        let f = p.f_values();
        assert!(f[0] <= 1e-3 * f[f.len() - 1], "{spec}");
    }
}

#[test]
fn refinement_stability() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in ["const:1", "exppow:-1,0.5", "exppow:1,0.5", "power:2"] {
        let coarse = profile(spec, 0.25, 1.0);
        let fine = profile_with(
            spec,
            0.25,
            1.0,
            ProfileOptions {
                n_nodes: 8192,
                ..ProfileOptions::default()
            },
        );
        for _ in 0..100 {
            let t = 10f64.powf(rng.gen_range(-9.0..(0.25f64).log10()));
            let (a, b) = (coarse.hardy(t).unwrap().value, fine.hardy(t).unwrap().value);
            assert!(rel(a, b) <= 1e-6, "{spec} F({t}): {a} vs {b}");
            let (a, b) = (
                coarse.remainder(t).unwrap().value,
                fine.remainder(t).unwrap().value,
            );
            assert!(rel(a, b) <= 1e-6, "{spec} G({t}): {a} vs {b}");
        }
    }
}

/// Trapezoid of `g(t)·t` against `ln t` from each decade mark up to `η`.
fn decade_increments(p: &HardyProfile, integrand: impl Fn(usize) -> f64) -> Vec<f64> {
    let grid = p.grid();
    let mut cum = vec![0.0; grid.len()];
    for i in (0..grid.len() - 1).rev() {
        let h = (grid[i + 1] / grid[i]).ln();
        cum[i] = cum[i + 1] + 0.5 * h * (integrand(i) * grid[i] + integrand(i + 1) * grid[i + 1]);
    }
    let eta = *grid.last().unwrap();
    let mut marks = Vec::new();
    let mut t = eta / 10.0;
    while t >= grid[0] {
        marks.push(cum[grid.partition_point(|&g| g < t).min(grid.len() - 1)]);
        t /= 10.0;
    }
    let mut inc: Vec<f64> = marks.windows(2).map(|m| m[1] - m[0]).collect();
    inc.push(*marks.last().unwrap());
    inc
}

#[test]
fn reciprocal_f_diverges() {
    for spec in ["const:1", "exppow:-1,0.5", "power:2"] {
        let p = profile(spec, 0.25, 1.0);
        let fc = p.f_cap_values();
        let inc = decade_increments(&p, |i| 1.0 / fc[i]);
        let k = inc.len() - 1;
        assert!(inc[k - 1] >= 0.5 * inc[k - 2], "{spec}: {inc:?}");
    }
}

#[test]
fn reciprocal_fg2_is_cauchy() {
    // The tail of ∫ dt/(F G²) decays like 1/G, so the last-decade increment
    // drops below 10⁻³ of the total only once G is of order 40 or more.
    let p = profile_with(
        "const:1",
        0.25,
        1.0,
        ProfileOptions::reaching(0.25, 0.25e-40),
    );
    let fc = p.f_cap_values();
    let g = p.g_values();
    let inc = decade_increments(&p, |i| 1.0 / (fc[i] * g[i] * g[i]));
    let total = *inc.last().unwrap();
    let last = inc[inc.len() - 2];
    assert!(last <= 1e-3 * total, "last {last}, total {total}");
}

#[test]
fn sensitivity_to_cutoff() {
    let w = weight("const:1");
    let c = classify(&w, 0.25).unwrap();
    let rows =
        eta_sensitivity(&w, &c, 0.25, 1.0, &[1e-3, 1e-2], ProfileOptions::default()).unwrap();
    for r in rows {
        assert!(rel(r.f_cap_eta0, r.t) < 1e-9 && rel(r.f_cap_half, r.t) < 1e-9);
        assert!(rel(r.g_eta0 - r.g_half, 2f64.ln()) < 1e-8);
    }
}
