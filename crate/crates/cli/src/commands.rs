//! One function per subcommand. Each reads what it needs from the merged
//! configuration, writes its artifacts and returns the exit status.

use crate::config::{GroupName, RunConfig};
use crate::error::CliError;
use crate::report::Report;
use carnot::audit::{commutator_checks, group_axiom_checks, invariance_checks, AlgebraCheck};
use carnot::bounds::{
    verify_engel_gradient_bound, verify_engel_laplacian_bound, verify_engel_x2_lower, verify_filiform_bounds,
    verify_filiform_x1_lower, BoundReport,
};
use carnot::geodesics::{approx_distance, equivalence_scan, scan_points, GeodesicConfig, RESIDUAL_TOLERANCE};
use carnot::lab::{
    ball_poincare_check, default_family, gap_calibration, localization_decomposition, poincare_scan,
    spectral_gap_galerkin, translation_trick_check, ubound_fit, LocalizationParams, PoincareReport, UBoundReport,
};
use carnot::measures::{
    check_perturbation_certificate, estimate_z, sample, write_batch, write_batch_csv, SampleBatch, SamplerConfig, ZMethod,
};
use carnot::norms::NormKind;
use carnot::seed;
use serde_json::json;

/// Tolerance on the localisation partition identity.
const PARTITION_TOLERANCE: f64 = 1e-12;
/// Allowed distance of the calibration gap from 1.
const CALIBRATION_TOLERANCE: f64 = 0.05;
/// Points used to audit a perturbation certificate.
const CERTIFICATE_POINTS: usize = 10_000;

fn algebra_steps(cfg: &RunConfig) -> Vec<usize> {
    match (cfg.group, cfg.n) {
        (_, Some(n)) => vec![n],
        (Some(GroupName::Engel), None) => vec![3],
        _ => (3..=6).collect(),
    }
}

pub fn verify_algebra(cfg: &RunConfig) -> Result<u8, CliError> {
    let mut report = Report::new("verify-algebra", cfg)?;
    let instances = cfg.samples_or(100_000);
    let pairs = cfg.points.unwrap_or(1_000);
    let seed = cfg.seed();
    let mut checks: Vec<AlgebraCheck> = Vec::new();
    for step in algebra_steps(cfg) {
        if !(3..=carnot::group::MAX_STEP).contains(&step) {
            return Err(CliError::Input(format!("step must lie in 3..={}, got {step}", carnot::group::MAX_STEP)));
        }
        let s = seed::child_seed(seed, step as u64);
        checks.extend(group_axiom_checks(step, instances, seed::named_seed(s, "group"))?);
        checks.extend(commutator_checks(step, 4, seed::named_seed(s, "brackets"))?);
        checks.extend(invariance_checks(step, pairs, seed::named_seed(s, "invariance"))?);
    }
    for c in &checks {
        report.check(
            &format!("{}[n={}]", c.name, c.step),
            c.pass,
            format!("max error {:e} <= {:e}", c.max_error, c.tolerance),
        );
    }
    report.csv("algebra.csv", AlgebraCheck::CSV_HEADER, checks.iter().map(AlgebraCheck::csv_row))?;
    report.json("algebra.json", &checks)?;
    report.finish()
}

pub fn verify_bounds(cfg: &RunConfig) -> Result<u8, CliError> {
    let mut report = Report::new("verify-bounds", cfg)?;
    let samples = cfg.samples_or(1_000_000);
    let seed = cfg.seed();
    let kind = cfg.kind()?;
    let reports: Vec<BoundReport> = match kind {
        NormKind::Engel => vec![
            verify_engel_gradient_bound(samples, seed)?,
            verify_engel_laplacian_bound(samples, seed)?,
            verify_engel_x2_lower(samples, seed)?,
        ],
        NormKind::Filiform(d) => {
            let (g, l) = verify_filiform_bounds(d.step(), samples, seed)?;
            vec![g, l, verify_filiform_x1_lower(d.step(), samples, seed)?]
        }
    };
    for r in &reports {
        report.line(&format!("{}.sup", r.name), format!("{:e}", r.sup));
        report.line(&format!("{}.inf", r.name), format!("{:e}", r.inf));
        match (r.pass(), r.target) {
            (Some(pass), Some(t)) => report.check(&r.name, pass, format!("extreme {:e} against {t:e}", r.extreme())),
            _ => report.line(&format!("{}.constant", r.name), "recorded"),
        }
    }
    report.csv("bounds.csv", BoundReport::CSV_HEADER, reports.iter().map(BoundReport::csv_row))?;
    let records: Vec<String> = reports.iter().map(BoundReport::to_record).collect();
    report.text("bounds.txt", &records.join("\n"))?;
    report.finish()
}

fn batch_summary(report: &mut Report, batch: &SampleBatch) {
    report.line("samples", batch.len());
    report.line("acceptance_rate", batch.acceptance_rate());
    report.line("effective_sample_size", batch.effective_sample_size());
    for w in &batch.warnings {
        report.line("warning", w);
    }
}

pub fn sample_measure(cfg: &RunConfig) -> Result<u8, CliError> {
    let mut report = Report::new("sample", cfg)?;
    let spec = cfg.measure()?;
    let seed = cfg.seed();
    let batch = sample(&spec, &SamplerConfig::new(cfg.samples_or(100_000)), seed)?;
    write_batch(&report.path("samples.ccmb"), &spec, &batch)?;
    report.attach("samples.ccmb");
    write_batch_csv(&report.path("samples.csv"), &batch)?;
    report.attach("samples.csv");
    batch_summary(&mut report, &batch);
    let budget = match (&spec.perturbation, spec.kind) {
        (Some(_), _) => 200_000,
        (None, NormKind::Engel) => 24,
        (None, NormKind::Filiform(_)) => 12,
    };
    let z = estimate_z(&spec, budget, seed::named_seed(seed, "normalization"))?;
    report.line("z", format!("{:e}", z.value));
    report.line("z_se", format!("{:e}", z.se));
    report.line(
        "z_method",
        match z.method {
            ZMethod::Quadrature => "quadrature",
            ZMethod::Importance => "importance",
        },
    );
    for w in &z.warnings {
        report.line("warning", w);
    }
    let chains: Vec<_> = batch
        .chains
        .iter()
        .map(|c| {
            json!({
                "acceptance_rate": c.acceptance_rate,
                "effective_sample_size": c.effective_sample_size,
                "burn_in": c.burn_in,
                "step_scale": c.step_scale,
                "tail_hits": c.tail_hits,
            })
        })
        .collect();
    let mut certificate = serde_json::Value::Null;
    if spec.perturbation.is_some() {
        let points: Vec<Vec<f64>> = batch.points().take(CERTIFICATE_POINTS).map(<[f64]>::to_vec).collect();
        let cert = check_perturbation_certificate(&spec, &points);
        report.check(
            "perturbation_certificate",
            cert.holds,
            format!(
                "gradient excess {:e}, growth excess {:e}",
                cert.gradient_violation, cert.growth_violation
            ),
        );
        certificate = json!({
            "points": cert.points,
            "gradient_violation": cert.gradient_violation,
            "growth_violation": cert.growth_violation,
            "holds": cert.holds,
        });
    }
    report.json(
        "sample.json",
        &json!({
            "samples": batch.len(),
            "seed": batch.seed,
            "chains": chains,
            "warnings": batch.warnings,
            "z": { "value": z.value, "se": z.se, "warnings": z.warnings },
            "certificate": certificate,
        }),
    )?;
    report.finish()
}

fn regime_line(report: &mut Report, in_regime: bool) {
    report.line("regime", if in_regime { "p >= n" } else { "exploratory (p < n), checks are not asserted" });
}

pub fn ubound(cfg: &RunConfig) -> Result<u8, CliError> {
    let mut report = Report::new("ubound", cfg)?;
    let spec = cfg.measure()?;
    let family = default_family(spec.kind);
    let r = ubound_fit(&spec, &family, cfg.samples_or(1_000_000), cfg.seed())?;
    regime_line(&mut report, r.in_proven_regime);
    report.line("q", r.q);
    report.line("C", format!("{:e}", r.c));
    report.line("D", format!("{:e}", r.d));
    report.line("D_cap", format!("{:e}", r.d_cap));
    report.line("train_functions", r.train.len());
    report.line("holdout_functions", r.holdout.len());
    let failed: Vec<String> = r.holdout.iter().filter(|h| !h.pass).map(|h| h.name.clone()).collect();
    let detail = format!("train violations {:?}, failing holdout {:?}", r.violations, failed);
    if r.in_proven_regime {
        report.check("ubound_feasible", r.feasible, "two-constant fit on the training family");
        report.check("ubound_holdout", r.holdout_pass, detail);
    } else {
        report.note("ubound_feasible", r.feasible, "two-constant fit on the training family");
        report.note("ubound_holdout", r.holdout_pass, detail);
    }
    report.csv("ubound.csv", UBoundReport::CSV_HEADER, r.csv_rows())?;
    report.json("ubound.json", &r)?;
    report.finish()
}

pub fn poincare(cfg: &RunConfig) -> Result<u8, CliError> {
    let mut report = Report::new("poincare", cfg)?;
    let spec = cfg.measure()?;
    let family = default_family(spec.kind);
    let r = poincare_scan(&spec, &family, cfg.samples_or(1_000_000), cfg.seed())?;
    regime_line(&mut report, r.in_proven_regime);
    report.line("q", r.q);
    report.line("sup_ratio", format!("{:e}", r.sup_ratio));
    report.line(
        "argsup",
        r.argsup.map(|id| family.members[id].name.clone()).unwrap_or_else(|| "none".into()),
    );
    report.line("c0", format!("{:e}", r.c0));
    report.line("excluded", format!("{:?}", r.excluded));
    let failed: Vec<String> = r.holdout.iter().filter(|h| !h.pass).map(|h| h.name.clone()).collect();
    let finite = r.sup_ratio.is_finite() && r.argsup.is_some();
    if r.in_proven_regime {
        report.check("poincare_sup_finite", finite, format!("sup {:e}", r.sup_ratio));
        report.check("poincare_holdout", r.holdout_pass, format!("failing holdout {failed:?}"));
    } else {
        report.note("poincare_sup_finite", finite, format!("sup {:e}", r.sup_ratio));
        report.note("poincare_holdout", r.holdout_pass, format!("failing holdout {failed:?}"));
    }
    report.csv("poincare.csv", PoincareReport::CSV_HEADER, r.csv_rows())?;
    report.json("poincare.json", &r)?;
    report.finish()
}

pub fn gap(cfg: &RunConfig) -> Result<u8, CliError> {
    let mut report = Report::new("gap", cfg)?;
    let seed = cfg.seed();
    let r = if cfg.calibration.unwrap_or(false) {
        let r = gap_calibration(cfg.degree.unwrap_or(4), cfg.samples_or(1_000_000), seed)?;
        report.check(
            "calibration_gap",
            (r.gap - 1.0).abs() <= CALIBRATION_TOLERANCE,
            format!("gap {} against 1 ± {CALIBRATION_TOLERANCE}", r.gap),
        );
        r
    } else {
        let spec = cfg.measure()?;
        let r = spectral_gap_galerkin(&spec, cfg.degree.unwrap_or(3), cfg.samples_or(200_000), seed)?;
        report.check("gap_positive", r.gap > 0.0, format!("gap {} ± {}", r.gap, r.se));
        r
    };
    report.line("degree", r.degree);
    report.line("basis_size", r.basis_size);
    report.line("gap", r.gap);
    report.line("se", r.se);
    report.csv(
        "gap.csv",
        "subgroup,gap",
        r.subgroup_gaps.iter().enumerate().map(|(i, g)| format!("{i},{g}")),
    )?;
    report.json("gap.json", &r)?;
    report.finish()
}

pub fn ball_check(cfg: &RunConfig) -> Result<u8, CliError> {
    let mut report = Report::new("ball-check", cfg)?;
    let kind = cfg.kind()?;
    let exponent = match cfg.exponent {
        Some(e) => e,
        None => cfg.measure()?.q(),
    };
    let family = default_family(kind);
    let r = ball_poincare_check(kind, cfg.radius.unwrap_or(1.0), exponent, &family, cfg.samples_or(100_000), cfg.seed())?;
    report.line("radius", r.radius);
    report.line("exponent", r.exponent);
    report.line("acceptance_rate", r.acceptance_rate);
    report.line("sup_ratio", format!("{:e}", r.sup_ratio));
    report.check(
        "ball_sup_finite",
        r.sup_ratio.is_finite() && r.argsup.is_some(),
        format!("sup {:e} over {} functions", r.sup_ratio, r.ratios.len()),
    );
    report.csv(
        "ball.csv",
        "function_id,ratio,ratio_se",
        r.ratios.iter().map(|e| format!("{},{},{}", e.id, e.ratio, e.ratio_se)),
    )?;
    report.json("ball.json", &r)?;
    report.finish()
}

pub fn localize(cfg: &RunConfig) -> Result<u8, CliError> {
    let mut report = Report::new("localize", cfg)?;
    let spec = cfg.measure()?;
    let kind = spec.kind;
    let (r, l) = (cfg.r.unwrap_or(1.0), cfg.l.unwrap_or(2.0));
    let samples = cfg.samples_or(100_000);
    let seed = cfg.seed();
    let trick = translation_trick_check(kind, r, l, cfg.points.unwrap_or(10_000), seed::named_seed(seed, "translation"))?;
    report.check(
        "translation_trick",
        trick.pass(),
        format!(
            "norm grows on {}/{}, aux floor on {}/{}",
            trick.norm_holds, trick.samples, trick.aux_holds, trick.samples
        ),
    );
    let family = default_family(kind);
    let id = cfg.function.unwrap_or(1);
    let member = family
        .members
        .get(id)
        .ok_or_else(|| CliError::Input(format!("function id {id} out of range 0..{}", family.members.len())))?;
    let params = LocalizationParams::new(kind, r, l)?;
    let batch = sample(&spec, &SamplerConfig::new(samples), seed::named_seed(seed, "measure"))?;
    let loc = localization_decomposition(&spec, &member.f, &params, &batch, samples, seed::named_seed(seed, "ball"))?;
    report.line("function", &member.name);
    report.line("total", format!("{:e}", loc.total));
    report.line("terms", format!("{:e} {:e} {:e}", loc.terms[0], loc.terms[1], loc.terms[2]));
    report.check(
        "partition",
        loc.partition_error <= PARTITION_TOLERANCE,
        format!("relative error {:e}", loc.partition_error),
    );
    report.check(
        "term1_chebyshev",
        loc.term1_holds,
        format!("{:e} <= {:e}", loc.terms[0], loc.term1_bound),
    );
    if let Some(b) = loc.term2_bound {
        report.line("term2_bound", format!("{b:e}"));
    }
    for w in &loc.warnings {
        report.line("warning", w);
    }
    report.json("localize.json", &json!({ "translation": trick, "decomposition": loc }))?;
    report.finish()
}

pub fn geodesic(cfg: &RunConfig) -> Result<u8, CliError> {
    let mut report = Report::new("geodesic", cfg)?;
    let config = GeodesicConfig {
        segments: cfg.segments.unwrap_or(16),
        restarts: cfg.restarts.unwrap_or(4),
    };
    let seed = cfg.seed();
    if let Some(target) = &cfg.target {
        let est = approx_distance(target, &config, seed)?;
        report.line("distance", est.value);
        report.line("residual", format!("{:e}", est.residual));
        report.check(
            "endpoint_reached",
            est.residual <= RESIDUAL_TOLERANCE,
            format!("residual {:e}", est.residual),
        );
        let mut buf = Vec::new();
        est.path.write_csv(&mut buf)?;
        report.text("path.csv", &String::from_utf8_lossy(&buf))?;
        report.json("geodesic.json", &est)?;
    } else {
        let kind = cfg.kind()?;
        let points = scan_points(kind, cfg.points.unwrap_or(100), seed::named_seed(seed, "points"));
        let scan = equivalence_scan(kind, &points, &config, seed)?;
        report.line("min_ratio", scan.min_ratio);
        report.line("max_ratio", scan.max_ratio);
        report.line("band", scan.band);
        report.check(
            "equivalence_band",
            scan.min_ratio > 0.0 && scan.band.is_finite(),
            format!("distance/norm in [{}, {}]", scan.min_ratio, scan.max_ratio),
        );
        let d = kind.dimension();
        let header: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["distance", "norm", "ratio"].map(String::from)).collect();
        report.csv(
            "geodesic.csv",
            &header.join(","),
            scan.points.iter().map(|p| {
                let xs: Vec<String> = p.point.iter().map(f64::to_string).collect();
                format!("{},{},{},{}", xs.join(","), p.distance, p.norm, p.ratio)
            }),
        )?;
        report.json("geodesic.json", &scan)?;
    }
    report.finish()
}
