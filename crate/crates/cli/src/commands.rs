use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hardy_core::discretization::{assemble, make_graded_mesh, GridFunction, Mesh};
use hardy_core::hardy::{
    build_profile, check_admissible, estimate_f_asymptotics, verify_identities, AdmissibilityVerdict,
    HardyProfile, ProfileOptions,
};
use hardy_core::variational::{
    chi_described, concentration_diagnostic, euler_lagrange_residual, lambda_star as bracket_lambda_star,
    minimize_quotient, sharp_constant, supersolution_check, ueps_comparison, ConcentrationVerdict,
    LambdaStarOptions, MinimizeOptions, MinimizeResult, VariationalError,
};
use hardy_core::weights::{
    check_monotone, classify as classify_weight, is_doubling, make_weight, ClassKind, DoublingVerdict,
    WeightError,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub enum Outcome {
    Verdict,
    Inconclusive,
}

pub fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = match &cfg.out {
        Some(d) => d.clone(),
        None => {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            PathBuf::from("runs").join(secs.to_string())
        }
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json(dir: &Path, name: &str, command: &str, cfg: &RunConfig, result: impl Serialize) -> Result<()> {
    let doc = json!({
        "version": VERSION,
        "command": command,
        "config": cfg,
        "result": result,
    });
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_csv(dir: &Path, name: &str, cfg: &RunConfig, body: &str) -> Result<()> {
    let header = format!("# hardy-lab {VERSION}\n# config {}\n", serde_json::to_string(cfg)?);
    let path = dir.join(name);
    std::fs::write(&path, header + body).with_context(|| format!("writing {}", path.display()))
}

fn minimize_options(cfg: &RunConfig) -> MinimizeOptions {
    MinimizeOptions {
        max_iter: cfg.tolerances.max_iter,
        rq_tol: cfg.tolerances.rq_tol,
        stall_rtol: cfg.tolerances.stall_rtol,
        ..MinimizeOptions::default()
    }
}

fn ladder(cfg: &RunConfig) -> Result<Vec<Mesh>> {
    let mut levels = vec![make_graded_mesh(&cfg.domain, cfg.mesh.n, cfg.mesh.boundary_resolution)?];
    for _ in 1..cfg.mesh.levels {
        let last = levels.last().expect("non-empty");
        let next = last.refine(Some(last.boundary_resolution() * cfg.mesh.refine_factor));
        levels.push(next);
    }
    Ok(levels)
}

/// Profile reaching far enough below `finest_res` for every quadrature point.
fn profile_for(cfg: &RunConfig, finest_res: Option<f64>) -> Result<HardyProfile> {
    let w = make_weight(cfg.weight.clone())?;
    let eta0 = cfg.eta0();
    let class = classify_weight(&w, eta0)?;
    let t_min = match finest_res {
        Some(r) => cfg.profile_t_min.min(r * 1e-3),
        None => cfg.profile_t_min,
    };
    Ok(build_profile(&w, &class, eta0, cfg.mu(), ProfileOptions::reaching(eta0, t_min))?)
}

fn finest_res(levels: &[Mesh]) -> f64 {
    levels.iter().map(|m| m.boundary_resolution()).fold(f64::INFINITY, f64::min)
}

pub fn classify(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let w = make_weight(cfg.weight.clone())?;
    let eta0 = cfg.eta0();
    let class = match classify_weight(&w, eta0) {
        Ok(c) => c,
        Err(WeightError::Inconclusive { panels, ln_partial }) => {
            let body = json!({ "class": "Inconclusive", "panels": panels, "ln_partial": ln_partial });
            write_json(out, "classify.json", "classify", cfg, &body)?;
            println!("{}", serde_json::to_string(&body)?);
            return Ok(Outcome::Inconclusive);
        }
        Err(e) => return Err(e.into()),
    };
    let doubling = is_doubling(&w, 1e-8, eta0);
    let monotone = check_monotone(&w, eta0);
    let admissible = check_admissible(&w, &class, eta0, eta0 * 1e-8)?;
    let mut body = json!({
        "class": match class.kind { ClassKind::P => "P", ClassKind::Q => "Q" },
        "switching": class.switching(),
        "evidence": class.evidence,
        "integral_estimate": class.integral_estimate,
        "monotone": monotone.sign,
        "monotone_witnesses": monotone.witnesses,
    });
    let map = body.as_object_mut().expect("object");
    match doubling.verdict {
        DoublingVerdict::Doubling { c } => {
            map.insert("doubling".into(), json!("Doubling"));
            map.insert("C".into(), json!(c));
        }
        DoublingVerdict::NonDoubling => {
            map.insert("doubling".into(), json!("NonDoubling"));
        }
    }
    map.insert("doubling_ln_ratio_range".into(), json!([doubling.ln_ratio_min, doubling.ln_ratio_max]));
    let inconclusive = matches!(admissible.verdict, AdmissibilityVerdict::Inconclusive);
    match admissible.verdict {
        AdmissibilityVerdict::Admissible { k } => {
            map.insert("admissible".into(), json!("Admissible"));
            map.insert("k".into(), json!(k));
        }
        AdmissibilityVerdict::NotAdmissible => {
            map.insert("admissible".into(), json!("NotAdmissible"));
        }
        AdmissibilityVerdict::Inconclusive => {
            map.insert("admissible".into(), json!("Inconclusive"));
        }
    }
    map.insert("admissibility_trend_slope".into(), json!(admissible.trend_slope));
    write_json(out, "classify.json", "classify", cfg, &body)?;
    println!("{}", serde_json::to_string(&body)?);
    Ok(if inconclusive { Outcome::Inconclusive } else { Outcome::Verdict })
}

pub fn profile(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let profile = profile_for(cfg, None)?;
    let identities = match verify_identities(&profile, cfg.tolerances.identity) {
        Ok(r) => serde_json::to_value(r)?,
        Err(e) => json!({ "error": e.to_string() }),
    };
    let asymptotics = match estimate_f_asymptotics(&profile) {
        Ok(fit) => serde_json::to_value(fit)?,
        Err(e) => json!({ "error": e.to_string() }),
    };
    let body = json!({
        "profile": profile.to_json(),
        "identities": identities,
        "asymptotics": asymptotics,
    });
    write_json(out, "profile.json", "profile", cfg, &body)?;
    write_csv(out, "profile.csv", cfg, &profile.to_csv())?;
    println!("{}", serde_json::to_string(&json!({ "asymptotics": asymptotics }))?);
    Ok(Outcome::Verdict)
}

fn minimizer_csv(mesh: &Mesh, u: &GridFunction) -> String {
    u.to_csv(mesh)
}

pub fn minimize(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let mesh = make_graded_mesh(&cfg.domain, cfg.mesh.n, cfg.mesh.boundary_resolution)?;
    let profile = profile_for(cfg, Some(mesh.boundary_resolution()))?;
    let forms = assemble(&mesh, profile.weight(), &profile, cfg.p, cfg.lambda)?;
    let (result, outcome): (MinimizeResult, Outcome) = match minimize_quotient(&forms, &minimize_options(cfg)) {
        Ok(r) => (r, Outcome::Verdict),
        Err(VariationalError::NoConvergence(r)) => (*r, Outcome::Inconclusive),
        Err(e) => return Err(e.into()),
    };
    let quotient = chi_described(&result.minimizer, &forms, "minimizer")?;
    let el = euler_lagrange_residual(&result, &forms)?;
    let body = json!({
        "j_estimate": result.j_estimate,
        "lambda_p": sharp_constant(cfg.p),
        "converged": result.converged,
        "method": result.method,
        "iterations": result.iterations,
        "residual": result.residual,
        "euler_lagrange_residual": el,
        "initial_guess": result.initial_guess,
        "terms": quotient.terms,
        "n_nodes": mesh.n_nodes(),
        "boundary_resolution": mesh.boundary_resolution(),
        "trace": result.trace,
    });
    write_json(out, "minimize.json", "minimize", cfg, &body)?;
    write_csv(out, "minimizer.csv", cfg, &minimizer_csv(&mesh, &result.minimizer))?;
    println!("{}", serde_json::to_string(&json!({ "j_estimate": result.j_estimate, "converged": result.converged }))?);
    Ok(outcome)
}

pub fn lambda_star(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let levels = ladder(cfg)?;
    let profile = profile_for(cfg, Some(finest_res(&levels)))?;
    let opts = LambdaStarOptions {
        detect_tol: cfg.tolerances.detect,
        tol: cfg.tolerances.lambda_bracket,
        minimize: minimize_options(cfg),
        ..LambdaStarOptions::default()
    };
    let report = bracket_lambda_star(cfg.p, &levels, &profile, cfg.lambda_range, &opts)?;
    write_json(out, "lambda_star.json", "lambda-star", cfg, &report)?;
    write_csv(out, "j_curve.csv", cfg, &report.j_curve_csv())?;
    println!(
        "{}",
        serde_json::to_string(&json!({
            "lambda_star": report.lambda_star,
            "half_width": report.half_width,
            "monotone_ok": report.monotone_ok,
            "lipschitz_ok": report.lipschitz_ok,
        }))?
    );
    Ok(Outcome::Verdict)
}

pub fn diagnose(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let levels = ladder(cfg)?;
    let profile = profile_for(cfg, Some(finest_res(&levels)))?;
    let report = concentration_diagnostic(cfg.p, cfg.lambda, &levels, &profile, cfg.eta_probe, &minimize_options(cfg))?;
    let mut super_rows = Vec::new();
    let mut super_csv = String::from("s,t,bracket\n");
    if cfg.p == 2.0 {
        for &s in &cfg.s {
            match supersolution_check(&profile, s, cfg.m, &cfg.domain) {
                Ok(r) => {
                    for (t, v) in &r.trace {
                        super_csv.push_str(&format!("{s:.16e},{t:.16e},{v:.16e}\n"));
                    }
                    super_rows.push(serde_json::to_value(r)?);
                }
                Err(e) => super_rows.push(json!({ "s": s, "error": e.to_string() })),
            }
        }
    }
    let supersolution: Value = if cfg.p == 2.0 {
        Value::Array(super_rows)
    } else {
        json!({ "skipped": "the supersolution audit is defined for p = 2" })
    };
    let body = json!({ "concentration": &report, "supersolution": supersolution });
    write_json(out, "diagnose.json", "diagnose", cfg, &body)?;
    write_csv(out, "concentration.csv", cfg, &report.to_csv())?;
    if cfg.p == 2.0 {
        write_csv(out, "supersolution.csv", cfg, &super_csv)?;
    }
    println!("{}", serde_json::to_string(&json!({ "verdict": report.verdict }))?);
    Ok(match report.verdict {
        ConcentrationVerdict::Undetermined => Outcome::Inconclusive,
        _ => Outcome::Verdict,
    })
}

pub fn ueps(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let mesh = make_graded_mesh(&cfg.domain, cfg.mesh.n, cfg.mesh.boundary_resolution)?;
    let profile = profile_for(cfg, Some(mesh.boundary_resolution()))?;
    let forms = assemble(&mesh, profile.weight(), &profile, cfg.p, cfg.lambda)?;
    let mut rows = Vec::new();
    let mut csv = String::from(
        "eps,closed_ratio,quadrature_ratio,closed_quotient,quadrature_quotient,mesh_quotient,lambda_p\n",
    );
    let lp = sharp_constant(cfg.p);
    for &eps in &cfg.eps {
        let c = ueps_comparison(eps, cfg.eta(), &profile, Some(&forms), cfg.p, cfg.lambda)?;
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            eps,
            c.closed.ratio,
            c.quadrature_ratio,
            c.closed_quotient,
            c.quadrature.quotient,
            c.mesh_quotient.unwrap_or(f64::NAN),
            lp
        ));
        rows.push(c);
    }
    write_json(out, "ueps.json", "ueps", cfg, json!({ "lambda_p": lp, "rows": &rows }))?;
    write_csv(out, "ueps.csv", cfg, &csv)?;
    let summary: Vec<Value> = rows
        .iter()
        .map(|c| json!({ "eps": c.eps, "quotient": c.quadrature.quotient, "mesh_quotient": c.mesh_quotient }))
        .collect();
    println!("{}", serde_json::to_string(&summary)?);
    Ok(Outcome::Verdict)
}
