//! Regular 1-differentials on Σ_t with prescribed periods, their derivatives in
//! a neck parameter, and regularized integrals through necks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{robust_div, RationalOneForm, Tail, C, I};
use crate::surface_model::{Neck, Surface, SLOT_INF, SLOT_ONE, SLOT_SECOND, SLOT_ZERO};
use crate::tolerances;

/// A 1-form on Σ_t stored as its restrictions to the spheres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalOneForm {
    pub spheres: Vec<RationalOneForm>,
    /// Prescribed integrals over C(0₁), C(∞₁), then C(0_{2k}), C(a_{2k−1,1}) for k = 1..n.
    pub periods: Vec<C>,
    pub truncation: usize,
    pub matching: MatchingReport,
}

/// Outcome of the Laurent matching iteration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    pub iterations: usize,
    pub final_change: f64,
    /// Ratio of the last two coefficient changes, when at least two were seen.
    pub contraction: Option<f64>,
}

impl GlobalOneForm {
    /// Residue at (sphere, slot).
    pub fn residue(&self, sphere: usize, slot: usize) -> C {
        self.spheres[sphere].poles[slot].residue
    }

    /// Largest coefficient difference to another form, sphere by sphere.
    pub fn coefficient_distance(&self, other: &GlobalOneForm) -> f64 {
        self.spheres.iter().zip(&other.spheres).map(|(a, b)| a.coefficient_distance(b)).fold(0.0, f64::max)
    }
}

/// Index of the period prescribed on C(0_{2k}) in the period vector.
pub fn period_index_even_zero(k: usize) -> usize {
    2 + 2 * (k - 1)
}

/// Index of the period prescribed on C(a_{2k−1,1}).
pub fn period_index_odd_one(k: usize) -> usize {
    3 + 2 * (k - 1)
}

/// Residues on every sphere forced by the prescribed periods, the residue
/// theorem on each sphere and Res_b = −Res_a across each node.
pub fn residue_chain(n: usize, periods: &[C]) -> Result<Vec<[C; 4]>> {
    if periods.len() != 2 * n + 2 {
        return Err(Error::InvalidConfig(format!("expected {} periods, got {}", 2 * n + 2, periods.len())));
    }
    let r: Vec<C> = periods.iter().map(|p| p / (2.0 * PI * I)).collect();
    let mut out: Vec<[C; 4]> = Vec::with_capacity(2 * n);
    for k in 1..=n {
        // odd sphere 2k−1
        let (zero, inf) = if k == 1 {
            (r[0], r[1])
        } else {
            let prev = out[2 * k - 3];
            (-prev[SLOT_INF], -prev[SLOT_ZERO])
        };
        let a1 = r[period_index_odd_one(k)];
        let a2 = -(zero + inf + a1);
        out.push([a1, a2, zero, inf]);
        // even sphere 2k
        let b1 = -a1;
        let b2 = -a2;
        let z = r[period_index_even_zero(k)];
        let w = -(b1 + b2 + z);
        out.push([b1, b2, z, w]);
    }
    Ok(out)
}

/// Taylor coefficients d_0..d_{count−1} of the regular part at (sphere, slot),
/// by the trapezoid rule on the radius-`radius` circle of the local chart.
pub fn taylor_coefficients(form: &RationalOneForm, chart: crate::forms::Chart, slot: usize, radius: f64, count: usize) -> Vec<C> {
    let m = tolerances::TAYLOR_POINTS;
    let values: Vec<(C, C)> = (0..m)
        .map(|k| {
            let r = C::from_polar(radius, 2.0 * PI * k as f64 / m as f64);
            (r, form.eval_regular(chart, r, slot))
        })
        .collect();
    (0..count)
        .map(|j| {
            let mut acc = C::new(0.0, 0.0);
            for (r, g) in &values {
                acc += g * r.powi(-(j as i32));
            }
            acc / m as f64
        })
        .collect()
}

/// The unique regular differential with the given periods.
///
/// Residues come from [`residue_chain`]; at open necks the higher principal
/// parts follow from the partner side by c_{−m−2} = −t^{m+1}·d_m, iterated to
/// a fixed point.
pub fn solve_one_form(surface: &Surface, periods: &[C]) -> Result<GlobalOneForm> {
    solve_one_form_with(surface, periods, tolerances::TRUNCATION_ORDER)
}

pub fn solve_one_form_with(surface: &Surface, periods: &[C], truncation: usize) -> Result<GlobalOneForm> {
    let residues = residue_chain(surface.n, periods)?;
    let mut spheres: Vec<RationalOneForm> =
        surface.spheres.iter().zip(&residues).map(|(pts, res)| RationalOneForm::with_residues(pts, res)).collect();
    let matching = match_necks(surface, &mut spheres, truncation)?;
    Ok(GlobalOneForm { spheres, periods: periods.to_vec(), truncation, matching })
}

fn open_necks(surface: &Surface) -> Vec<&Neck> {
    surface.necks.iter().filter(|nk| nk.state.t != C::new(0.0, 0.0)).collect()
}

fn match_necks(surface: &Surface, spheres: &mut [RationalOneForm], truncation: usize) -> Result<MatchingReport> {
    let open = open_necks(surface);
    let mut report = MatchingReport::default();
    if open.is_empty() || truncation < 2 {
        return Ok(report);
    }
    let eps = surface.epsilon;
    let count = truncation - 1;
    let mut previous_change: Option<f64> = None;
    for iter in 1..=tolerances::MATCHING_MAX_ITER {
        let updates: Vec<(Vec<C>, Vec<C>)> = open
            .iter()
            .map(|nk| {
                let da = taylor_coefficients(&spheres[nk.a.sphere], nk.a.chart, nk.a.slot, eps, count);
                let db = taylor_coefficients(&spheres[nk.b.sphere], nk.b.chart, nk.b.slot, eps, count);
                (da, db)
            })
            .collect();
        let mut change: f64 = 0.0;
        for (nk, (da, db)) in open.iter().zip(updates) {
            let t = nk.state.t;
            let ratio = t.norm() / eps;
            let new_a: Vec<C> = db.iter().map(|d| -d).collect();
            let new_b: Vec<C> = da.iter().map(|d| -d).collect();
            for (side, coeffs) in [(nk.a, new_a), (nk.b, new_b)] {
                let tail = &mut spheres[side.sphere].poles[side.slot].tail;
                let mut weight = ratio / eps;
                for (m, c) in coeffs.iter().enumerate() {
                    let old = tail.coeffs.get(m).copied().unwrap_or(C::new(0.0, 0.0));
                    change = change.max((c - old).norm() * weight);
                    weight *= ratio;
                }
                *tail = Tail { coeffs, scale: t };
            }
        }
        report.iterations = iter;
        report.final_change = change;
        if let Some(prev) = previous_change {
            if prev > 0.0 {
                report.contraction = Some(change / prev);
            }
        }
        if change < tolerances::MATCHING_TOL {
            return Ok(report);
        }
        previous_change = Some(change);
    }
    Err(Error::NoConvergence { iterations: tolerances::MATCHING_MAX_ITER, change: report.final_change })
}

/// ∂ω/∂t_{k,i} at t = 0: double poles −d⁰_b·dr/r² at a_{k,i} and −d⁰_a·ds/s²
/// at b_{k,i}, where d⁰ is the value of the partner's regular part; all
/// prescribed periods vanish.
pub fn derivative_one_form(surface: &Surface, omega0: &GlobalOneForm, k: usize, i: usize) -> Result<GlobalOneForm> {
    if omega0.spheres.iter().any(|f| f.poles.iter().any(|p| !p.tail.is_zero())) {
        return Err(Error::InvalidConfig("derivative form needs the closed-node form".into()));
    }
    let nk = surface.neck(k, i);
    let da = omega0.spheres[nk.a.sphere].eval_regular(nk.a.chart, C::new(0.0, 0.0), nk.a.slot);
    let db = omega0.spheres[nk.b.sphere].eval_regular(nk.b.chart, C::new(0.0, 0.0), nk.b.slot);
    let mut spheres: Vec<RationalOneForm> = surface.spheres.iter().map(|pts| RationalOneForm::zero(pts)).collect();
    let one = C::new(1.0, 0.0);
    spheres[nk.a.sphere].poles[nk.a.slot].tail = Tail { coeffs: vec![-db], scale: one };
    spheres[nk.b.sphere].poles[nk.b.slot].tail = Tail { coeffs: vec![-da], scale: one };
    Ok(GlobalOneForm {
        spheres,
        periods: vec![C::new(0.0, 0.0); 2 * surface.n + 2],
        truncation: 2,
        matching: MatchingReport::default(),
    })
}

/// ∫ ω through neck (k, i) from |r| = ε to |s| = ε minus c·log t, where c is the
/// residue on the A side; analytic in t and equal to its limit at t = 0.
pub fn neck_regularized_integral(surface: &Surface, omega: &GlobalOneForm, k: usize, i: usize) -> Result<C> {
    let nk = surface.neck(k, i);
    let eps = surface.epsilon;
    let fa = &omega.spheres[nk.a.sphere];
    let fb = &omega.spheres[nk.b.sphere];
    let c = fa.poles[nk.a.slot].residue;
    let rho = match nk.state.log_t {
        Some(l) => (l * 0.5).exp(),
        None => C::new(0.0, 0.0),
    };
    let e = C::new(eps, 0.0);
    // own tails have scale t, so t/ρ = ρ on the waist
    let own = |form: &RationalOneForm, slot: usize, at_waist: bool| -> C {
        let tail = &form.poles[slot].tail;
        if tail.is_zero() {
            return C::new(0.0, 0.0);
        }
        let u = if at_waist { rho * robust_div(tail.scale, nk.state.t) } else { tail.scale / e };
        -tail.primitive_series(u)
    };
    let ia = fa.segment_integral_regular(nk.a.chart, e, rho, nk.a.slot) + own(fa, nk.a.slot, true) - own(fa, nk.a.slot, false);
    let ib = fb.segment_integral_regular(nk.b.chart, rho, e, nk.b.slot) + own(fb, nk.b.slot, false) - own(fb, nk.b.slot, true);
    Ok(-2.0 * c * eps.ln() + ia + ib)
}

/// Slot of the A-side point of neck (k, i) on sphere k.
pub fn a_slot(k: usize, i: usize) -> usize {
    match (k % 2 == 1, i) {
        (true, 1) => SLOT_ONE,
        (true, _) => SLOT_SECOND,
        (false, 1) => SLOT_ZERO,
        (false, _) => SLOT_INF,
    }
}
