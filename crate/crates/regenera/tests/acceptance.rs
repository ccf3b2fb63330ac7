//! Acceptance criteria, one pass/fail line each. Runs with `harness = false`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regenera::continuation::{continue_family, ContinuationStep, NewtonOptions};
use regenera::differentials::{derivative_one_form, solve_one_form};
use regenera::geometry::{
    hausdorff, integrate_sphere, integrate_surface, limit_distance, regularity_check, scherk_mesh, translation_measure, Basepoint,
    MeshOptions,
};
use regenera::residuals::{golden_entries, residual_vector};
use regenera::surface_model::{build_config, NeckParameter, NeckState, NodedSurfaceConfig};
use regenera::weierstrass::{assemble_triple, ends, flux_at_end, initial_parameters, WeierstrassTriple};
use regenera::{Error, Execution};

const SCHEDULE: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];
const SEED_TOL: f64 = 1e-12;
const GOLDEN_TOL: f64 = 1e-6;
const SOLVE_TOL: f64 = 1e-10;
const SOLVE_BUDGET: Duration = Duration::from_secs(300);
const CLOSURE_TOL: f64 = 1e-6;
const HAUSDORFF_TOL: f64 = 0.05;
const FLUX_TOL: f64 = 1e-8;

type Outcome = Result<String, String>;

struct Run {
    label: &'static str,
    config: NodedSurfaceConfig,
    steps: Vec<ContinuationStep>,
    elapsed: Duration,
}

impl Run {
    fn solve(label: &'static str, n: usize, t2: f64, seeds: &[NeckParameter]) -> Result<Run, String> {
        let config = build_config(n, t2, 0.0, seeds, None).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let steps = continue_family(&config, &SCHEDULE, None, &NewtonOptions::default()).map_err(|e| format!("{label}: {e}"))?;
        Ok(Run { label, config, steps, elapsed: start.elapsed() })
    }

    fn triple(&self, step: &ContinuationStep) -> WeierstrassTriple {
        assemble_triple(&self.config.at_x(step.x), &step.params).expect("triple")
    }

    fn delta(&self) -> f64 {
        2.0 * self.config.epsilon
    }

    fn positive_steps_descending(&self) -> Vec<&ContinuationStep> {
        let mut v: Vec<&ContinuationStep> = self.steps.iter().filter(|s| s.x > 0.0).collect();
        v.sort_by(|a, b| b.x.total_cmp(&a.x));
        v
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sample_point(rng: &mut ChaCha8Rng, avoid: &[C], delta: f64) -> C {
    loop {
        let r = (rng.gen_range(-1.5f64..1.5)).exp();
        let z = C::from_polar(r, rng.gen_range(0.0..2.0 * PI));
        if avoid.iter().all(|p| (z - p).norm() >= delta) {
            return z;
        }
    }
}

fn seed_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_res, mut worst_q): (f64, f64) = (0.0, 0.0);
    for n in 1..=3 {
        for t2 in [0.3, 0.5, 0.7] {
            let cfg = build_config(n, t2, 0.0, &[], None).map_err(|e| e.to_string())?;
            let params = initial_parameters(&cfg).map_err(|e| e.to_string())?;
            let res = residual_vector(&cfg, &params).map_err(|e| e.to_string())?;
            worst_res = worst_res.max(res.sup_norm());
            let triple = assemble_triple(&cfg, &params).map_err(|e| e.to_string())?;
            for m in 0..2 * n {
                let marked: Vec<C> = triple.surface.spheres[m].iter().filter_map(|p| p.finite()).collect();
                for _ in 0..100 {
                    let z = sample_point(&mut rng, &marked, 0.05);
                    let q: C = triple.eval(m, z).iter().map(|f| f * f).sum();
                    worst_q = worst_q.max(q.norm());
                }
            }
        }
    }
    let detail = format!("max |residual| {worst_res:.2e}, max |Q| {worst_q:.2e} (bound {SEED_TOL:.0e})");
    check(worst_res <= SEED_TOL && worst_q <= SEED_TOL, detail)
}

fn golden_jacobians() -> Outcome {
    let required: [(&str, fn(f64) -> C); 8] = [
        ("−2πi(T₂−1)³/(T₂+1)", |t| C::new(0.0, -2.0 * PI * (t - 1.0).powi(3) / (t + 1.0))),
        ("16πiT₂(T₂−1)/(T₂+1)²", |t| C::new(0.0, 16.0 * PI * t * (t - 1.0) / (t + 1.0).powi(2))),
        ("2πi(T₂+1)²", |t| C::new(0.0, 2.0 * PI * (t + 1.0).powi(2))),
        ("4πi(1−T₂²)", |t| C::new(0.0, 4.0 * PI * (1.0 - t * t))),
        ("4π", |_| C::new(4.0 * PI, 0.0)),
        ("−4πi", |_| C::new(0.0, -4.0 * PI)),
        ("−4πiT₂", |t| C::new(0.0, -4.0 * PI * t)),
        ("4πT₂", |t| C::new(4.0 * PI * t, 0.0)),
    ];
    let mut worst: f64 = 0.0;
    let mut ids = std::collections::BTreeSet::new();
    for t2 in [0.3, 0.5, 0.7] {
        let cfg = build_config(2, t2, 0.0, &[], None).map_err(|e| e.to_string())?;
        let rows = golden_entries(&cfg, Execution::default()).map_err(|e| e.to_string())?;
        for (formula, oracle) in &required {
            let row = rows.iter().find(|r| r.formula == *formula).ok_or(format!("no entry {formula}"))?;
            let want = oracle(t2);
            if (row.value - want).norm() > 1e-12 * want.norm() {
                return Err(format!("{formula} at T2={t2}: table {} vs {want}", row.value));
            }
        }
        for r in &rows {
            worst = worst.max(r.rel_error);
            ids.insert(r.id.clone());
        }
    }
    check(
        worst <= GOLDEN_TOL && ids.len() >= 10,
        format!("{} distinct entries at T2 = 0.3, 0.5, 0.7; max relative error vs central differences {worst:.2e}", ids.len()),
    )
}

fn order_check() -> Outcome {
    let cfg = build_config(1, 0.5, 0.0, &[], Some(0.1)).map_err(|e| e.to_string())?;
    let surf0 = cfg.surface();
    let delta = 2.0 * surf0.epsilon;
    let mut ratios = Vec::new();
    for j in 0..3 {
        let periods = initial_parameters(&cfg).map_err(|e| e.to_string())?.periods(j);
        let w0 = solve_one_form(&surf0, &periods).map_err(|e| e.to_string())?;
        let dw = derivative_one_form(&surf0, &w0, 1, 1).map_err(|e| e.to_string())?;
        let mut defects = Vec::new();
        for abs_t in [1e-5, 1e-6] {
            let t = C::from_polar(abs_t, 0.7);
            let mut surf = surf0.clone();
            surf.necks[0].state = NeckState::from_t(t);
            let wt = solve_one_form(&surf, &periods).map_err(|e| e.to_string())?;
            let mut worst: f64 = 0.0;
            for m in 0..2 {
                let centers: Vec<C> = surf0.spheres[m].iter().filter_map(|p| p.finite()).collect();
                for l in 0..=40 {
                    let r = delta * (1.0 / (delta * delta)).powf(l as f64 / 40.0);
                    for q in 0..48 {
                        let z = C::from_polar(r, 2.0 * PI * (q as f64 + 0.5) / 48.0);
                        if centers.iter().any(|c| (z - c).norm() < delta) {
                            continue;
                        }
                        let d = wt.spheres[m].eval(z) - w0.spheres[m].eval(z) - t * dw.spheres[m].eval(z);
                        worst = worst.max(d.norm() * z.norm_sqr().max(1.0));
                    }
                }
            }
            defects.push(worst);
        }
        ratios.push(defects[0] / defects[1]);
    }
    let ok = ratios.iter().all(|r| (50.0..=200.0).contains(r));
    check(ok, format!("defect ratio |t| = 1e-5 over 1e-6 for the three forms: {ratios:.2?} (quadratic: 100)"))
}

fn end_to_end(runs: &[&Run]) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for run in runs {
        let worst = run.steps.iter().map(|s| s.report.final_residual).fold(0.0, f64::max);
        ok &= worst <= SOLVE_TOL && run.elapsed <= SOLVE_BUDGET && run.steps.len() == SCHEDULE.len();
        parts.push(format!("{}: residual {worst:.2e} in {:.1} s", run.label, run.elapsed.as_secs_f64()));
    }
    check(ok, parts.join("; "))
}

fn period_closure(runs: &[&Run]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for run in runs {
        for step in run.positive_steps_descending() {
            let triple = run.triple(step);
            let (_, report) = integrate_surface(&triple, &step.params, Basepoint::default(), &MeshOptions::default())
                .map_err(|e| format!("{} x={}: {e}", run.label, step.x))?;
            let p = &step.params;
            let lattice = [[0.0, 2.0 * PI, 0.0], [2.0 * PI * p.t1, 2.0 * PI * p.t2, 0.0]];
            for c in &report.cycles {
                // A_k,1 closes on the k-th lattice vector; B cycles vanish up to whole lattice translations
                let want = if let Some(rest) = c.label.strip_prefix("A_") {
                    let k: usize = rest.split(',').next().and_then(|s| s.parse().ok()).ok_or("bad label")?;
                    lattice[(k + 1) % 2]
                } else {
                    let [a, b] = c.lattice_coefficients.map(|v| v as f64);
                    [0, 1, 2].map(|i| a * lattice[0][i] + b * lattice[1][i])
                };
                let d = (0..3).map(|i| (c.closure[i] - want[i]).powi(2)).sum::<f64>().sqrt();
                worst = worst.max(d);
                count += 1;
            }
        }
    }
    check(worst <= CLOSURE_TOL, format!("{count} A and B cycle closures on meshes of n = 1, 2; max defect {worst:.2e}"))
}

fn scherk_convergence(run: &Run) -> Outcome {
    let steps = run.positive_steps_descending();
    let n = run.config.n;
    let mut series = vec![Vec::new(); 2 * n];
    for step in &steps {
        let d = limit_distance(&run.triple(step), run.config.t2_0, run.delta(), 32, Execution::default());
        for (m, v) in d.into_iter().enumerate() {
            series[m].push(v);
        }
    }
    let monotone = series.iter().all(|s| s.windows(2).all(|w| w[1] < w[0]));
    let smallest = steps.last().ok_or("no steps")?;
    let triple = run.triple(smallest);
    let opts = MeshOptions::default();
    let base = C::new(0.0, 1.0);
    let mut worst: f64 = 0.0;
    for m in 0..2 * n {
        let (a, _) = integrate_sphere(&triple, &smallest.params, m, run.delta(), base, &opts).map_err(|e| e.to_string())?;
        let (b, _) = scherk_mesh(n, run.config.t2_0, m, run.delta(), base, &opts).map_err(|e| e.to_string())?;
        worst = worst.max(hausdorff(&a.vertices, &b.vertices, Execution::default()));
    }
    let listing: Vec<String> = series.iter().map(|s| format!("[{}]", s.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(", "))).collect();
    check(
        monotone && worst <= HAUSDORFF_TOL,
        format!("sup distance per sphere along x = 0.2..0.05: {}; Hausdorff at x = {} is {worst:.2e}", listing.join(" "), smallest.x),
    )
}

fn twist_measurement(run: &Run) -> Outcome {
    let target = run.config.neck(1, 1).v;
    let mut values = Vec::new();
    for step in run.positive_steps_descending() {
        let tm = translation_measure(&run.triple(step), &step.params, step.x, 1).map_err(|e| e.to_string())?;
        values.push(tm.value.re);
    }
    let defects: Vec<f64> = values.iter().map(|v| (v - target).abs()).collect();
    let monotone = defects.windows(2).all(|w| w[1] < w[0]);
    check(monotone, format!("measured translation {values:.4?} toward {target}"))
}

fn flux_suite(runs: &[&Run]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for run in runs {
        for step in &run.steps {
            let triple = run.triple(step);
            let p = &step.params;
            let len = 2.0 * PI * (p.t1 * p.t1 + p.t2 * p.t2).sqrt();
            let dir = [2.0 * PI * p.t1, 2.0 * PI * p.t2];
            let dir_len = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
            let mut sum = [0.0; 3];
            for (sphere, slot) in ends(run.config.n) {
                let f = flux_at_end(&triple, sphere, slot);
                let norm = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
                worst = worst.max((norm - len).abs());
                worst = worst.max((f[0] * dir[0] + f[1] * dir[1]).abs() / dir_len);
                for c in 0..3 {
                    sum[c] += f[c];
                }
            }
            worst = worst.max(sum.iter().map(|s| s * s).sum::<f64>().sqrt());
            points += 1;
        }
    }
    check(worst <= FLUX_TOL, format!("{points} solved points; max deviation {worst:.2e}"))
}

fn degenerate_inputs(kmr: &Result<Run, String>) -> Outcome {
    let rejected = [(2, 0.0), (3, 0.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)];
    for (n, t2) in rejected {
        match build_config(n, t2, 0.0, &[], None) {
            Err(Error::InvalidAngle { .. }) => {}
            other => return Err(format!("n={n}, T2={t2} gave {other:?}")),
        }
    }
    let run = kmr.as_ref().map_err(|e| e.clone())?;
    let worst = run.steps.iter().map(|s| s.report.final_residual).fold(0.0, f64::max);
    check(worst <= SOLVE_TOL, format!("T2 = 0 and ±1 rejected where required; n = 1, T2 = 0 solves to x = 0.2 with residual {worst:.2e}"))
}

fn regularity_counts(runs: &[&Run]) -> Outcome {
    let mut points = 0;
    for run in runs {
        for step in &run.steps {
            let reg = regularity_check(&run.triple(step), run.delta(), 32, Execution::default())
                .map_err(|e| format!("{} x={}: {e}", run.label, step.x))?;
            if !reg.zero_counts_ok() {
                return Err(format!("{} x={}: zero counts {:?}", run.label, step.x, reg.zero_counts));
            }
            points += 1;
        }
    }
    check(true, format!("2 zeros on every sphere region at {points} solved points"))
}

fn report(index: usize, name: &str, outcome: Outcome, failures: &mut usize) {
    match outcome {
        Ok(detail) => println!("PASS {index:>2} {name}: {detail}"),
        Err(detail) => {
            *failures += 1;
            println!("FAIL {index:>2} {name}: {detail}");
        }
    }
}

fn main() {
    let mut failures = 0;
    report(1, "seed exactness", seed_exactness(), &mut failures);
    report(2, "golden jacobians", golden_jacobians(), &mut failures);
    report(3, "differential solver order", order_check(), &mut failures);

    let n1 = Run::solve("n=1", 1, 0.5, &[]);
    let n2 = Run::solve("n=2", 2, 0.5, &[]);
    let twisted = Run::solve("n=2, v=0.4", 2, 0.5, &[NeckParameter { k: 1, i: 1, u: 1.0, v: 0.4 }]);
    let kmr = Run::solve("n=1, T2=0", 1, 0.0, &[]);

    let both: Result<Vec<&Run>, String> = [&n1, &n2].iter().map(|r| r.as_ref().map_err(|e| e.clone())).collect();
    let all: Vec<&Run> = [&n1, &n2, &twisted, &kmr].iter().filter_map(|r| r.as_ref().ok()).collect();

    report(4, "end-to-end solve", both.clone().and_then(|r| end_to_end(&r)), &mut failures);
    report(5, "period closure of meshes", both.and_then(|r| period_closure(&r)), &mut failures);
    report(6, "Scherk convergence", n2.as_ref().map_err(|e| e.clone()).and_then(scherk_convergence), &mut failures);
    report(7, "twist measurement", twisted.as_ref().map_err(|e| e.clone()).and_then(twist_measurement), &mut failures);
    report(8, "flux suite", flux_suite(&all), &mut failures);
    report(9, "degenerate-input contract", degenerate_inputs(&kmr), &mut failures);
    report(10, "regularity counts", regularity_counts(&all), &mut failures);

    if failures > 0 {
        println!("{failures} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
