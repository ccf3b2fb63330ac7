//! Free/dependent split of the parameters, the damped Gauss–Newton solver and
//! continuation in x from the exact x = 0 seed.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::residuals::{jacobian_fd, residual_count, residual_vector};
use crate::surface_model::NodedSurfaceConfig;
use crate::tolerances;
use crate::weierstrass::{initial_parameters, parameter_count, ParameterVector};

/// Named split of the 18n + 4 parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// Solved for; one per real equation.
    pub dependent: Vec<String>,
    /// Held at their configured values.
    pub free: Vec<String>,
    /// Not parameters of the solve.
    pub inputs: Vec<String>,
}

impl Partition {
    /// Flat indices of the dependent parameters.
    pub fn dependent_indices(&self, n: usize) -> Vec<usize> {
        let labels = ParameterVector::labels(n);
        self.dependent.iter().map(|d| labels.iter().position(|l| l == d).expect("dependent label")).collect()
    }
}

/// Dependent unknowns are everything except (u_{1,2}, v_{1,2}).
pub fn parameter_partition(n: usize) -> Partition {
    let free = vec!["u_1,2".to_string(), "v_1,2".to_string()];
    let dependent = ParameterVector::labels(n).into_iter().filter(|l| !free.contains(l)).collect();
    let inputs = ["n", "T2_0", "x", "epsilon", "neck seeds"].iter().map(|s| s.to_string()).collect();
    Partition { dependent, free, inputs }
}

/// Solver options.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: tolerances::NEWTON_TOL, max_iter: tolerances::NEWTON_MAX_ITER, exec: Execution::default() }
    }
}

/// One accepted iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub residual: f64,
    pub damping: f64,
    pub step_norm: f64,
    pub rank: usize,
}

/// Outcome of one Newton solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub x: f64,
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub history: Vec<IterateRecord>,
    /// σ_max/σ_min of the last Jacobian, if one was formed.
    pub condition_estimate: Option<f64>,
    pub singular_values: Vec<f64>,
    /// Bisection depth needed to reach this x.
    pub substeps: usize,
    pub elapsed_ms: f64,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn residual_norm(config: &NodedSurfaceConfig, p: &ParameterVector) -> Option<f64> {
    residual_vector(config, p).ok().map(|r| r.sup_norm()).filter(|v| v.is_finite())
}

fn admissible(p: &ParameterVector) -> bool {
    p.necks.iter().all(|(u, v)| *u > 0.0 && u.is_finite() && v.is_finite()) && p.t2.abs() < 1.0
}

/// Candidate steps from the SVD of J: truncated pseudo-inverses at several
/// cutoffs and two Levenberg–Marquardt regularizations.
fn candidate_steps(jac: &DMatrix<f64>, r: &DVector<f64>) -> (Vec<(DVector<f64>, usize)>, Vec<f64>) {
    let svd = jac.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u");
    let vt = svd.v_t.as_ref().expect("v_t");
    let s = &svd.singular_values;
    let smax = s.max();
    let utr = u.transpose() * r;
    let mut out = Vec::new();
    let build = |filter: &dyn Fn(f64) -> f64| {
        let mut coeff = DVector::zeros(s.len());
        let mut rank = 0;
        for i in 0..s.len() {
            let f = filter(s[i]);
            if f != 0.0 {
                rank += 1;
            }
            coeff[i] = -f * utr[i];
        }
        (vt.transpose() * coeff, rank)
    };
    for rcond in [1e-14, 1e-12, tolerances::SVD_RCOND, 1e-8, 1e-6, 1e-4] {
        let cut = rcond * smax;
        out.push(build(&|si| if si > cut { 1.0 / si } else { 0.0 }));
    }
    for lambda in [1e-6, 1e-3] {
        let mu = (lambda * smax).powi(2);
        out.push(build(&|si| if si > 0.0 { si / (si * si + mu) } else { 0.0 }));
    }
    let mut sv: Vec<f64> = s.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (out, sv)
}

/// Numerical rank below which the Jacobian counts as singular. Each neck may
/// contribute two directions of size |t|/x², exponentially small in 1/x², and
/// the two remaining parameter directions of the family may be flat as well.
pub fn minimum_rank(n: usize) -> usize {
    residual_count(n) - 2 * 2 * (2 * n - 1) - 2
}

/// Damped Gauss–Newton on the dependent parameters at `config.x`.
///
/// Each iteration forms the central-difference Jacobian, tries the candidate
/// steps with halving down to 2⁻²⁰, and accepts the best decrease.
pub fn newton_solve(config: &NodedSurfaceConfig, guess: &ParameterVector, opts: &NewtonOptions) -> Result<(ParameterVector, SolveReport)> {
    let start = Instant::now();
    let n = config.n;
    let cols = parameter_partition(n).dependent_indices(n);
    debug_assert_eq!(cols.len(), residual_count(n));
    let mut p = guess.clone();
    let r0 = residual_vector(config, &p)?.to_vec();
    if !r0.iter().all(|v| v.is_finite()) {
        return Err(Error::NoProgress { norm: f64::INFINITY });
    }
    let mut norm = sup(&r0);
    let mut r = DVector::from_vec(r0);
    let mut report = SolveReport {
        x: config.x,
        iterations: 0,
        initial_residual: norm,
        final_residual: norm,
        history: Vec::new(),
        condition_estimate: None,
        singular_values: Vec::new(),
        substeps: 0,
        elapsed_ms: 0.0,
    };
    while norm > opts.tol {
        if report.iterations >= opts.max_iter {
            return Err(Error::IterationLimit { max_iter: opts.max_iter, norm });
        }
        let jac = jacobian_fd(config, &p, &cols, opts.exec)?;
        let (steps, sv) = candidate_steps(&jac, &r);
        let smax = sv.first().copied().unwrap_or(0.0);
        let smin = sv.last().copied().unwrap_or(0.0);
        report.condition_estimate = Some(if smin > 0.0 { smax / smin } else { f64::INFINITY });
        report.singular_values = sv;
        let rank = report.singular_values.iter().filter(|v| **v > tolerances::SVD_RCOND * smax).count();
        if !(smax > 0.0) || !smax.is_finite() || rank < minimum_rank(n) {
            return Err(Error::SingularJacobian);
        }
        let base = p.to_vec();
        let trial = |step: &DVector<f64>, damping: f64| -> Option<(ParameterVector, f64)> {
            let mut v = base.clone();
            for (c, &idx) in cols.iter().enumerate() {
                v[idx] += damping * step[c];
            }
            let q = ParameterVector::from_vec(n, &v);
            if !admissible(&q) {
                return None;
            }
            residual_norm(config, &q).map(|nr| (q, nr))
        };
        let mut best: Option<(ParameterVector, f64, f64, f64, usize)> = None;
        for (step, rank) in &steps {
            let mut damping = 1.0;
            while damping >= tolerances::MIN_DAMPING {
                if let Some((q, nr)) = trial(step, damping) {
                    if nr < norm {
                        if best.as_ref().map_or(true, |b| nr < b.1) {
                            best = Some((q, nr, damping, damping * step.norm(), *rank));
                        }
                        break;
                    }
                }
                damping *= 0.5;
            }
        }
        let Some((q, nr, damping, step_norm, rank)) = best else {
            return Err(Error::NoProgress { norm });
        };
        p = q;
        r = DVector::from_vec(residual_vector(config, &p)?.to_vec());
        norm = nr;
        report.iterations += 1;
        report.history.push(IterateRecord { residual: nr, damping, step_norm, rank });
    }
    report.final_residual = norm;
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((p, report))
}

/// One solved point of a family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationStep {
    pub x: f64,
    pub params: ParameterVector,
    pub report: SolveReport,
}

/// Values of the free parameters (u_{1,2}, v_{1,2}).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeValues {
    pub u12: f64,
    pub v12: f64,
}

/// Solves at every x of `x_targets`, which must start at 0 and be monotone.
/// The free values default to the configured seeds of neck (1,2).
pub fn continue_family(
    config: &NodedSurfaceConfig,
    x_targets: &[f64],
    free: Option<FreeValues>,
    opts: &NewtonOptions,
) -> Result<Vec<ContinuationStep>> {
    match continue_family_partial(config, x_targets, free, opts) {
        (steps, None) => Ok(steps),
        (_, Some(e)) => Err(e),
    }
}

/// As [`continue_family`], returning the steps solved before a failure
/// together with the failure.
pub fn continue_family_partial(
    config: &NodedSurfaceConfig,
    x_targets: &[f64],
    free: Option<FreeValues>,
    opts: &NewtonOptions,
) -> (Vec<ContinuationStep>, Option<Error>) {
    let mut out = Vec::new();
    let err = family_seed(config, x_targets, free)
        .and_then(|seed| match seed {
            Some(seed) => continue_into(config, 0.0, &seed, x_targets, opts, &mut out),
            None => Ok(()),
        })
        .err();
    (out, err)
}

fn family_seed(config: &NodedSurfaceConfig, x_targets: &[f64], free: Option<FreeValues>) -> Result<Option<ParameterVector>> {
    let Some(&first) = x_targets.first() else {
        return Ok(None);
    };
    if first != 0.0 {
        return Err(Error::InvalidConfig(format!("schedule must start at x = 0, got {first}")));
    }
    let mut seed = initial_parameters(&config.at_x(0.0))?;
    if let Some(f) = free {
        if !(f.u12 > 0.0) {
            return Err(Error::InvalidConfig("u_1,2 must be positive".into()));
        }
        seed.necks[1] = (f.u12, f.v12);
    }
    Ok(Some(seed))
}

/// Continuation from a solved (or exact) point at `x0` through `x_targets`.
/// Failed steps are bisected up to twelve times.
pub fn continue_from(
    config: &NodedSurfaceConfig,
    x0: f64,
    start: &ParameterVector,
    x_targets: &[f64],
    opts: &NewtonOptions,
) -> Result<Vec<ContinuationStep>> {
    let mut out = Vec::with_capacity(x_targets.len());
    continue_into(config, x0, start, x_targets, opts, &mut out)?;
    Ok(out)
}

fn continue_into(
    config: &NodedSurfaceConfig,
    x0: f64,
    start: &ParameterVector,
    x_targets: &[f64],
    opts: &NewtonOptions,
    out: &mut Vec<ContinuationStep>,
) -> Result<()> {
    check_monotone(x0, x_targets)?;
    let mut history: Vec<(f64, ParameterVector)> = vec![(x0, start.clone())];
    for &target in x_targets {
        let (x_last, p_last) = history.last().cloned().expect("history");
        if target == x_last {
            let (p, report) = newton_solve(&config.at_x(target), &p_last, opts)?;
            *history.last_mut().unwrap() = (target, p.clone());
            out.push(ContinuationStep { x: target, params: p, report });
            continue;
        }
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        loop {
            let x_prev = history.last().expect("history").0;
            let step = target - x_prev;
            let x_try = x_prev + step / f64::powi(2.0, depth as i32);
            let guess = extrapolate(&history, x_try);
            match newton_solve(&config.at_x(x_try), &guess, opts) {
                Ok((p, mut report)) => {
                    history.push((x_try, p.clone()));
                    if x_try == target {
                        report.substeps = max_depth;
                        out.push(ContinuationStep { x: target, params: p, report });
                        break;
                    }
                    depth = depth.saturating_sub(1);
                }
                Err(_) => {
                    depth += 1;
                    max_depth = max_depth.max(depth);
                    if depth > tolerances::MAX_BISECTIONS {
                        return Err(Error::ContinuationStalled { x: x_try, levels: tolerances::MAX_BISECTIONS });
                    }
                }
            }
        }
    }
    Ok(())
}

fn check_monotone(x0: f64, xs: &[f64]) -> Result<()> {
    let mut all = vec![x0];
    all.extend_from_slice(xs);
    if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidConfig("schedule values must be finite and nonnegative".into()));
    }
    let inc = all.windows(2).all(|w| w[1] >= w[0]);
    let dec = all.windows(2).all(|w| w[1] <= w[0]);
    if !(inc || dec) {
        return Err(Error::InvalidConfig("schedule must be monotone".into()));
    }
    Ok(())
}

/// Linear extrapolation in x from the last two accepted points.
fn extrapolate(history: &[(f64, ParameterVector)], x: f64) -> ParameterVector {
    let (x1, p1) = &history[history.len() - 1];
    if history.len() < 2 {
        return p1.clone();
    }
    let (x0, p0) = &history[history.len() - 2];
    if x1 == x0 {
        return p1.clone();
    }
    let s = (x - x1) / (x1 - x0);
    let a = p0.to_vec();
    let b = p1.to_vec();
    let v: Vec<f64> = a.iter().zip(&b).map(|(a, b)| b + s * (b - a)).collect();
    let q = ParameterVector::from_vec(p1.n, &v);
    if admissible(&q) {
        q
    } else {
        p1.clone()
    }
}

/// Reals in the solve: 18n + 4 parameters, 18n + 2 equations, 2 free.
pub fn count_summary(n: usize) -> (usize, usize, usize) {
    let params = parameter_count(n);
    let eqs = residual_count(n);
    (params, eqs, params - eqs)
}
