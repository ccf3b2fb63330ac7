//! Invariant suites run by `verify` on every solved step of a run.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use regenera::continuation::ContinuationStep;
use regenera::differentials::{period_index_even_zero, period_index_odd_one};
use regenera::exec::Execution;
use regenera::forms::contour_integral;
use regenera::geometry::{regularity_check, translation_measure};
use regenera::residuals::{golden_entries, residual_vector};
use regenera::surface_model::{NodedSurfaceConfig, SLOT_INF, SLOT_ONE, SLOT_ZERO};
use regenera::tolerances::CIRCLE_POINTS;
use regenera::weierstrass::{assemble_triple, ends, flux_at_end, WeierstrassTriple};
use serde::{Deserialize, Serialize};

/// Tolerance of the flux suite.
pub const FLUX_TOL: f64 = 1e-8;
/// Tolerance of the golden Jacobian comparison.
pub const GOLDEN_TOL: f64 = 1e-6;
/// Residual bound at x = 0, where the seed solves the equations exactly.
pub const SEED_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub x: Option<f64>,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub run: String,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

fn result(suite: &str, x: Option<f64>, passed: bool, value: f64, detail: String) -> SuiteResult {
    SuiteResult { suite: suite.into(), x, passed, value, detail }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Every sphere form has vanishing residue sum.
fn residue_theorem(triple: &WeierstrassTriple) -> f64 {
    triple.phi.iter().flat_map(|f| f.spheres.iter().map(|s| s.residue_sum().norm())).fold(0.0, f64::max)
}

/// Contour integrals around the prescribed circles against the prescribed periods.
fn period_prescriptions(triple: &WeierstrassTriple, step: &ContinuationStep) -> anyhow::Result<f64> {
    let n = triple.surface.n;
    let eps = triple.surface.epsilon;
    let mut worst: f64 = 0.0;
    for j in 0..3 {
        let periods = step.params.periods(j);
        let form = &triple.phi[j];
        let mut places = vec![(0usize, SLOT_ZERO, 0usize), (0, SLOT_INF, 1)];
        for k in 1..=n {
            places.push((2 * k - 1, SLOT_ZERO, period_index_even_zero(k)));
            places.push((2 * k - 2, SLOT_ONE, period_index_odd_one(k)));
        }
        for (sphere, slot, idx) in places {
            let point = triple.surface.spheres[sphere][slot];
            let got = contour_integral(&form.spheres[sphere], point, eps, CIRCLE_POINTS)?;
            worst = worst.max((got - periods[idx]).norm() / periods[idx].norm().max(1.0));
        }
    }
    Ok(worst)
}

/// Lengths, orthogonality to the lattice direction and sum of the end fluxes.
fn flux_suite(triple: &WeierstrassTriple, step: &ContinuationStep) -> (f64, String) {
    let p = &step.params;
    let n = triple.surface.n;
    let expected = 2.0 * PI * (p.t1 * p.t1 + p.t2 * p.t2).sqrt();
    let dir = [2.0 * PI * p.t1, 2.0 * PI * p.t2, 0.0];
    let mut sum = [0.0; 3];
    let (mut len_err, mut orth_err): (f64, f64) = (0.0, 0.0);
    for (sphere, slot) in ends(n) {
        let f = flux_at_end(triple, sphere, slot);
        len_err = len_err.max((norm3(f) - expected).abs());
        let dot = f[0] * dir[0] + f[1] * dir[1] + f[2] * dir[2];
        orth_err = orth_err.max(dot.abs() / norm3(dir));
        for c in 0..3 {
            sum[c] += f[c];
        }
    }
    let worst = len_err.max(orth_err).max(norm3(sum));
    (worst, format!("length {len_err:.2e}, orthogonality {orth_err:.2e}, sum {:.2e}", norm3(sum)))
}

/// Limit of the translation across neck (k, 1) for the configured seed.
fn seed_limit(config: &NodedSurfaceConfig, k: usize) -> C {
    let v = config.neck(k, 1).v;
    if k % 2 == 1 {
        C::new(v, 0.0)
    } else {
        let t2 = config.t2_0;
        v * C::new((1.0 - t2 * t2).sqrt(), t2)
    }
}

pub fn verify_run(name: &str, config: &NodedSurfaceConfig, steps: &[ContinuationStep], tol: f64, exec: Execution) -> anyhow::Result<VerifyReport> {
    let mut suites = Vec::new();
    let mut translations: Vec<(f64, Vec<f64>)> = Vec::new();
    for step in steps {
        let x = Some(step.x);
        let cfg = config.at_x(step.x);
        let triple = assemble_triple(&cfg, &step.params)?;
        let rt = residue_theorem(&triple);
        suites.push(result("residue theorem", x, rt <= 1e-12, rt, format!("max |sum of residues| {rt:.2e}")));
        let pp = period_prescriptions(&triple, step)?;
        suites.push(result("period prescriptions", x, pp <= 1e-9, pp, format!("max relative deviation {pp:.2e}")));
        let res = residual_vector(&cfg, &step.params)?;
        let bound = if step.x == 0.0 { SEED_TOL } else { tol };
        let period = res.period.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let conf = res.conformality.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        suites.push(result("period residuals", x, period <= bound, period, format!("sup {period:.2e} (bound {bound:.0e})")));
        suites.push(result("conformality L(Q)", x, conf <= bound, conf, format!("sup {conf:.2e} (bound {bound:.0e})")));
        let emb = res.embeddedness.abs();
        suites.push(result("embeddedness", x, emb <= bound, emb, format!("|residual| {emb:.2e}")));
        let (flux, detail) = flux_suite(&triple, step);
        suites.push(result("flux", x, flux <= FLUX_TOL, flux, detail));
        let delta = 2.0 * cfg.epsilon;
        match regularity_check(&triple, delta, 32, exec) {
            Ok(reg) => {
                let ok = reg.zero_counts_ok() && reg.min_metric > 0.0;
                let detail = format!("zeros per sphere {:?}, min metric {:.3e}", reg.zero_counts, reg.min_metric);
                suites.push(result("regularity", x, ok, reg.min_metric, detail));
            }
            Err(e) => suites.push(result("regularity", x, false, f64::NAN, e.to_string())),
        }
        if step.x > 0.0 {
            let mut defects = Vec::new();
            for k in 1..2 * config.n {
                let tm = translation_measure(&triple, &step.params, step.x, k)?;
                defects.push((tm.value - seed_limit(config, k)).norm());
            }
            translations.push((step.x, defects));
        }
    }
    let goldens = golden_entries(config, exec)?;
    let worst = goldens.iter().map(|g| g.rel_error).fold(0.0, f64::max);
    suites.push(result(
        "golden jacobians",
        Some(0.0),
        worst <= GOLDEN_TOL,
        worst,
        format!("{} entries, max relative error {worst:.2e}", goldens.len()),
    ));
    translations.sort_by(|a, b| b.0.total_cmp(&a.0));
    for k in 1..2 * config.n {
        let series: Vec<f64> = translations.iter().map(|t| t.1[k - 1]).collect();
        let monotone = series.windows(2).all(|w| w[1] <= w[0]);
        let last = series.last().copied().unwrap_or(0.0);
        let detail = format!("defects along decreasing x: {}", series.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", "));
        suites.push(result(&format!("translation trend k={k}"), None, monotone, last, detail));
    }
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport { run: name.into(), passed, suites })
}
