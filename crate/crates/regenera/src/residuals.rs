//! The nonlinear system: B-period equations, the conformality functionals of
//! Q = φ₁² + φ₂² + φ₃², and the embeddedness constraint. Also the central
//! finite-difference Jacobian and the table of closed-form Jacobian entries.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::differentials::neck_regularized_integral;
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::forms::{functional_split, path_integral, QuadraticDifferential, Weight, C, I};
use crate::surface_model::{neck_index, NeckState, NodedSurfaceConfig, Surface, SLOT_ONE, SLOT_SECOND, SLOT_ZERO};
use crate::tolerances;
use crate::weierstrass::{assemble_on, parameter_count, surface_for, ParameterVector, WeierstrassTriple};

/// Weight attached to an L-component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    Plain,
    Z,
    /// (z − p) with p the center of the circle.
    Centered,
}

/// One conformality functional ∮_{C(p)} w·Q/dz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub label: String,
    pub sphere: usize,
    pub slot: usize,
    pub weight: WeightKind,
}

/// The 6n+2 components in their fixed order.
pub fn conformality_components(n: usize) -> Vec<ComponentSpec> {
    let spec = |label: String, sphere, slot, weight| ComponentSpec { label, sphere, slot, weight };
    let mut out = vec![
        spec("z C(0_1)".into(), 0, SLOT_ZERO, WeightKind::Z),
        spec(format!("z C(0_{})", 2 * n), 2 * n - 1, SLOT_ZERO, WeightKind::Z),
    ];
    for k in 1..=n {
        for (i, slot) in [(1, SLOT_ONE), (2, SLOT_SECOND)] {
            let m = 2 * k - 1;
            out.push(spec(format!("(z-a) C(a_{m},{i})"), m - 1, slot, WeightKind::Centered));
            out.push(spec(format!("plain C(a_{m},{i})"), m - 1, slot, WeightKind::Plain));
        }
    }
    for k in 1..=n {
        out.push(spec(format!("plain C(0_{})", 2 * k), 2 * k - 1, SLOT_ZERO, WeightKind::Plain));
        out.push(spec(format!("plain C(b_{},2)", 2 * k - 1), 2 * k - 1, SLOT_SECOND, WeightKind::Plain));
    }
    out
}

/// Residual vector split by block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualVector {
    /// 3(2n−1) entries, K = 1..2n−1 then j.
    pub period: Vec<f64>,
    /// 6n+2 complex entries in [`conformality_components`] order.
    pub conformality: Vec<C>,
    pub embeddedness: f64,
}

impl ResidualVector {
    /// Flat real vector: periods, (Re, Im) pairs, embeddedness.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.period.clone();
        for c in &self.conformality {
            v.push(c.re);
            v.push(c.im);
        }
        v.push(self.embeddedness);
        v
    }

    pub fn sup_norm(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Number of real equations, 18n + 2.
pub fn residual_count(n: usize) -> usize {
    18 * n + 2
}

/// Names of the flat residual entries.
pub fn residual_labels(n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for k in 1..2 * n {
        for j in 1..=3 {
            out.push(format!("B_{k},1 phi_{j}"));
        }
    }
    for c in conformality_components(n) {
        out.push(format!("Re {}", c.label));
        out.push(format!("Im {}", c.label));
    }
    out.push("embeddedness".into());
    out
}

/// −x²·Re∮_{B_{k,1}} φ_j. With w = u + iv and log t = −w/x² this equals
/// Re[w₁c₁ − w₂c₂] − x²·Re(N₁ + path_B − N₂ + path_A), where c_i is the A-side
/// residue at neck (k,i) and N_i its regularized neck integral; at x = 0 only
/// the first term survives.
pub fn period_residuals(triple: &WeierstrassTriple, params: &ParameterVector, x: f64) -> Result<Vec<f64>> {
    let surface = &triple.surface;
    let mut out = Vec::with_capacity(3 * (2 * surface.n - 1));
    for k in 1..2 * surface.n {
        let n1 = surface.neck(k, 1);
        let n2 = surface.neck(k, 2);
        let (u1, v1) = params.neck(k, 1);
        let (u2, v2) = params.neck(k, 2);
        for j in 0..3 {
            let form = &triple.phi[j];
            let c1 = form.residue(n1.a.sphere, n1.a.slot);
            let c2 = form.residue(n2.a.sphere, n2.a.slot);
            let leading = (C::new(u1, v1) * c1 - C::new(u2, v2) * c2).re;
            if x == 0.0 {
                out.push(leading);
                continue;
            }
            let rest = b_cycle_regular_part(surface, triple, j, k)?;
            out.push(leading - x * x * rest.re);
        }
    }
    Ok(out)
}

/// N₁ + path_B − N₂ + path_A for φ_j along B_{k,1}.
pub fn b_cycle_regular_part(surface: &Surface, triple: &WeierstrassTriple, j: usize, k: usize) -> Result<C> {
    let form = &triple.phi[j];
    let n1 = surface.neck(k, 1);
    let n2 = surface.neck(k, 2);
    let min_d = 0.5 * surface.epsilon;
    let nn1 = neck_regularized_integral(surface, form, k, 1)?;
    let nn2 = neck_regularized_integral(surface, form, k, 2)?;
    let pb = path_integral(&form.spheres[n1.b.sphere], &surface.anchor_path(n1.b.sphere, n1.b.slot, n2.b.slot), min_d)?;
    let pa = path_integral(&form.spheres[n1.a.sphere], &surface.anchor_path(n1.a.sphere, n2.a.slot, n1.a.slot), min_d)?;
    Ok(nn1 + pb - nn2 + pa)
}

/// L(Q) in component order: the exact residue formula for the simple poles
/// plus trapezoid quadrature of the tail correction on radius-ε circles.
pub fn conformality_residuals(triple: &WeierstrassTriple) -> Result<Vec<C>> {
    let surface = &triple.surface;
    conformality_components(surface.n)
        .iter()
        .map(|spec| {
            let p = surface.spheres[spec.sphere][spec.slot].finite().ok_or(Error::UnknownPoint)?;
            let weight = match spec.weight {
                WeightKind::Plain => Weight::Plain,
                WeightKind::Z => Weight::Z,
                WeightKind::Centered => Weight::ZMinus(p),
            };
            let q = QuadraticDifferential::new(triple.sphere(spec.sphere));
            functional_split(&q, weight, p, surface.epsilon)
        })
        .collect()
}

/// γ_{2n,0,1} + (γ_{1,0,1} + γ_{1,∞,1})/2.
pub fn embeddedness_residual(params: &ParameterVector) -> f64 {
    params.gamma_even[params.n - 1][0] + 0.5 * (params.gamma_10[0] + params.gamma_1inf[0])
}

/// Full residual on the Σ_t of `config` at these parameters.
pub fn residual_vector(config: &NodedSurfaceConfig, params: &ParameterVector) -> Result<ResidualVector> {
    residual_on(surface_for(config, params), params, config.x)
}

/// Full residual on an explicitly given Σ_t (used to perturb t directly).
pub fn residual_on(surface: Surface, params: &ParameterVector, x: f64) -> Result<ResidualVector> {
    let triple = assemble_on(surface, params)?;
    Ok(ResidualVector {
        period: period_residuals(&triple, params, x)?,
        conformality: conformality_residuals(&triple)?,
        embeddedness: embeddedness_residual(params),
    })
}

/// Central-difference step for a parameter value.
pub fn fd_step(value: f64) -> f64 {
    (tolerances::FD_REL_STEP * value.abs()).max(tolerances::FD_ABS_STEP)
}

/// Central-difference Jacobian of the flat residual with respect to the
/// listed entries of the flat parameter vector, columns evaluated per `exec`.
pub fn jacobian_fd(config: &NodedSurfaceConfig, params: &ParameterVector, columns: &[usize], exec: Execution) -> Result<DMatrix<f64>> {
    let base = params.to_vec();
    let n = params.n;
    let first_neck = parameter_count(n) - 4 * (2 * n - 1);
    let cols: Vec<Result<Vec<f64>>> = map_slice(exec, columns, |&idx| {
        let mut h = fd_step(base[idx]);
        if idx >= first_neck {
            // t = exp(−(u+iv)/x²) moves by a relative h/x²
            h = h.max(tolerances::FD_NECK_STEP * config.x * config.x);
        }
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[idx] += h;
        minus[idx] -= h;
        if plus[idx] == base[idx] || minus[idx] == base[idx] {
            return Err(Error::StepUnderflow { index: idx });
        }
        let h2 = plus[idx] - minus[idx];
        let rp = residual_vector(config, &ParameterVector::from_vec(n, &plus))?.to_vec();
        let rm = residual_vector(config, &ParameterVector::from_vec(n, &minus))?.to_vec();
        Ok(rp.iter().zip(&rm).map(|(a, b)| (a - b) / h2).collect())
    });
    let rows = residual_count(n);
    let mut jac = DMatrix::zeros(rows, columns.len());
    for (c, col) in cols.into_iter().enumerate() {
        let col = col?;
        for (r, v) in col.into_iter().enumerate() {
            jac[(r, c)] = v;
        }
    }
    Ok(jac)
}

/// What a golden entry differentiates with respect to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GoldenVariable {
    /// A named entry of the parameter vector.
    Parameter(String),
    /// The complex gluing parameter t_{k,i} at t = 0.
    NeckT { k: usize, i: usize },
}

/// Which residual entry is differentiated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GoldenTarget {
    /// Label from [`conformality_components`].
    Conformality(String),
    /// Period row (k, j) with j in 1..=3.
    Period { k: usize, j: usize },
}

/// One closed-form Jacobian entry at x = 0 and its finite-difference check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenEntry {
    pub id: String,
    pub formula: String,
    pub t2: f64,
    pub value: C,
    pub fd: C,
    pub rel_error: f64,
}

struct GoldenSpec {
    id: &'static str,
    formula: &'static str,
    target: GoldenTarget,
    variable: GoldenVariable,
    value: fn(f64, f64) -> C,
    min_n: usize,
}

fn conf(label: &str) -> GoldenTarget {
    GoldenTarget::Conformality(label.into())
}

fn par(label: &str) -> GoldenVariable {
    GoldenVariable::Parameter(label.into())
}

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn golden_specs(n: usize) -> Vec<GoldenSpec> {
    let zz = &format!("z C(0_{})", 2 * n);
    let zp = &format!("plain C(0_{})", 2 * n);
    let g2 = &format!("gamma_{},0,2", 2 * n);
    let g3 = &format!("gamma_{},0,3", 2 * n);
    vec![
        GoldenSpec { id: "b-derivative", formula: "−2πi(T₂−1)³/(T₂+1)", target: conf("plain C(b_1,2)"), variable: par("Re b_1,2"),
            value: |t2, _| -2.0 * PI * I * (t2 - 1.0).powi(3) / (t2 + 1.0), min_n: 1 },
        GoldenSpec { id: "t_{2k,1}-derivative", formula: "16πiT₂(T₂−1)/(T₂+1)²", target: conf("plain C(0_2)"), variable: GoldenVariable::NeckT { k: 2, i: 1 },
            value: |t2, _| 16.0 * PI * I * t2 * (t2 - 1.0) / (t2 + 1.0).powi(2), min_n: 2 },
        GoldenSpec { id: "a-derivative", formula: "2πi(T₂+1)²", target: conf("plain C(a_1,1)"), variable: par("Re a_1,2"),
            value: |t2, _| 2.0 * PI * I * (t2 + 1.0).powi(2), min_n: 1 },
        GoldenSpec { id: "(z−1)-weighted t-derivative", formula: "4πi(1−T₂²)", target: conf("(z-a) C(a_1,1)"), variable: GoldenVariable::NeckT { k: 1, i: 1 },
            value: |t2, _| 4.0 * PI * I * (1.0 - t2 * t2), min_n: 1 },
        GoldenSpec { id: "alpha_2-derivative (z-a2)-weighted", formula: "4π", target: conf("(z-a) C(a_1,2)"), variable: par("alpha_1,1,2"),
            value: |_, _| c(4.0 * PI, 0.0), min_n: 1 },
        GoldenSpec { id: "alpha_3-derivative (z-a2)-weighted", formula: "−4πi", target: conf("(z-a) C(a_1,2)"), variable: par("alpha_1,1,3"),
            value: |_, _| c(0.0, -4.0 * PI), min_n: 1 },
        GoldenSpec { id: "T2-derivative z-weighted C(0_2n)", formula: "−4πiT₂", target: conf(zz), variable: par("T2"),
            value: |t2, _| c(0.0, -4.0 * PI * t2), min_n: 1 },
        GoldenSpec { id: "gamma_2n,0,2-derivative z-weighted C(0_2n)", formula: "4πT₂", target: conf(zz), variable: par(g2),
            value: |t2, _| c(4.0 * PI * t2, 0.0), min_n: 1 },
        GoldenSpec { id: "gamma_2n,0,3-derivative z-weighted C(0_2n)", formula: "4πi", target: conf(zz), variable: par(g3),
            value: |_, _| c(0.0, 4.0 * PI), min_n: 1 },
        GoldenSpec { id: "gamma_1,inf,2-derivative plain C(0_2n)", formula: "−4πT₂(T₂−1)/(T₂+1)", target: conf(zp), variable: par("gamma_1,inf,2"),
            value: |t2, _| c(-4.0 * PI * t2 * (t2 - 1.0) / (t2 + 1.0), 0.0), min_n: 1 },
        GoldenSpec { id: "T2-derivative plain C(0_2n)", formula: "−8πi/(T₂+1)", target: conf(zp), variable: par("T2"),
            value: |t2, _| c(0.0, -8.0 * PI / (t2 + 1.0)), min_n: 1 },
        GoldenSpec { id: "gamma_2n,0,2-derivative plain C(0_2n)", formula: "8π/(T₂+1)", target: conf(zp), variable: par(g2),
            value: |t2, _| c(8.0 * PI / (t2 + 1.0), 0.0), min_n: 1 },
        GoldenSpec { id: "gamma_2n,0,3-derivative plain C(0_2n)", formula: "8πiT₂/(T₂+1)", target: conf(zp), variable: par(g3),
            value: |t2, _| c(0.0, 8.0 * PI * t2 / (t2 + 1.0)), min_n: 1 },
        GoldenSpec { id: "gamma_1,inf,1-derivative plain C(a_1,2)", formula: "−4πT₁(T₂+1)/(T₂−1)", target: conf("plain C(a_1,2)"), variable: par("gamma_1,inf,1"),
            value: |t2, t1| c(-4.0 * PI * t1 * (t2 + 1.0) / (t2 - 1.0), 0.0), min_n: 1 },
        GoldenSpec { id: "gamma_1,0,1-derivative plain C(a_1,2)", formula: "−4πT₁(T₂+1)/(T₂−1)", target: conf("plain C(a_1,2)"), variable: par("gamma_1,0,1"),
            value: |t2, t1| c(-4.0 * PI * t1 * (t2 + 1.0) / (t2 - 1.0), 0.0), min_n: 1 },
        GoldenSpec { id: "gamma_1,inf,3-derivative plain C(a_1,2)", formula: "2πi(T₂+1)²/(T₂−1)", target: conf("plain C(a_1,2)"), variable: par("gamma_1,inf,3"),
            value: |t2, _| c(0.0, 2.0 * PI * (t2 + 1.0).powi(2) / (t2 - 1.0)), min_n: 1 },
        GoldenSpec { id: "gamma_1,0,1-derivative z-weighted C(0_1)", formula: "4πT₁", target: conf("z C(0_1)"), variable: par("gamma_1,0,1"),
            value: |_, t1| c(4.0 * PI * t1, 0.0), min_n: 1 },
        GoldenSpec { id: "T1-derivative z-weighted C(0_1)", formula: "−4πiT₁", target: conf("z C(0_1)"), variable: par("T1"),
            value: |_, t1| c(0.0, -4.0 * PI * t1), min_n: 1 },
        GoldenSpec { id: "gamma_2k-2,0,2-derivative plain C(a_2k-1,2)", formula: "−4π(T₂+1)/(T₂−1)", target: conf("plain C(a_3,2)"), variable: par("gamma_2,0,2"),
            value: |t2, _| c(-4.0 * PI * (t2 + 1.0) / (t2 - 1.0), 0.0), min_n: 2 },
        GoldenSpec { id: "gamma_2k-2,0,3-derivative plain C(a_2k-1,2)", formula: "4πi(T₂+1)/(T₂−1)", target: conf("plain C(a_3,2)"), variable: par("gamma_2,0,3"),
            value: |t2, _| c(0.0, 4.0 * PI * (t2 + 1.0) / (t2 - 1.0)), min_n: 2 },
        GoldenSpec { id: "alpha_1,1,1-derivative B_1,1 phi_1", formula: "2u₁,₁", target: GoldenTarget::Period { k: 1, j: 1 }, variable: par("alpha_1,1,1"),
            value: |_, _| c(2.0, 0.0), min_n: 1 },
        GoldenSpec { id: "v_2,2-derivative B_2,1 phi_1", formula: "T₁", target: GoldenTarget::Period { k: 2, j: 1 }, variable: par("v_2,2"),
            value: |_, t1| c(t1, 0.0), min_n: 2 },
        GoldenSpec { id: "v_2,2-derivative B_2,1 phi_2", formula: "T₂", target: GoldenTarget::Period { k: 2, j: 2 }, variable: par("v_2,2"),
            value: |t2, _| c(t2, 0.0), min_n: 2 },
        GoldenSpec { id: "u_2,2-derivative B_2,1 phi_3", formula: "−1", target: GoldenTarget::Period { k: 2, j: 3 }, variable: par("u_2,2"),
            value: |_, _| c(-1.0, 0.0), min_n: 2 },
        GoldenSpec { id: "v_2k-1,2-derivative B_2k-1,1 phi_2", formula: "1", target: GoldenTarget::Period { k: 1, j: 2 }, variable: par("v_1,2"),
            value: |_, _| c(1.0, 0.0), min_n: 1 },
        GoldenSpec { id: "u_2k-1,2-derivative B_2k-1,1 phi_3", formula: "−1", target: GoldenTarget::Period { k: 1, j: 3 }, variable: par("u_1,2"),
            value: |_, _| c(-1.0, 0.0), min_n: 1 },
    ]
}

fn read_target(res: &ResidualVector, n: usize, target: &GoldenTarget) -> Result<C> {
    match target {
        GoldenTarget::Conformality(label) => {
            let idx = conformality_components(n)
                .iter()
                .position(|c| &c.label == label)
                .ok_or_else(|| Error::InvalidConfig(format!("no component {label}")))?;
            Ok(res.conformality[idx])
        }
        GoldenTarget::Period { k, j } => Ok(C::new(res.period[3 * (k - 1) + (j - 1)], 0.0)),
    }
}

/// The closed-form Jacobian entries at the x = 0 seed of `config`, each with
/// its central finite-difference value. Entries needing k ≥ 2 appear when
/// n ≥ 2; the seed must have u_{k,i} = 1 for the period rows.
pub fn golden_entries(config: &NodedSurfaceConfig, exec: Execution) -> Result<Vec<GoldenEntry>> {
    let config = config.at_x(0.0);
    let params = crate::weierstrass::initial_parameters(&config)?;
    let n = config.n;
    let t2 = params.t2;
    let t1 = params.t1;
    let specs: Vec<GoldenSpec> = golden_specs(n).into_iter().filter(|s| s.min_n <= n).collect();
    let rows = map_slice(exec, &specs, |spec| -> Result<GoldenEntry> {
        let fd = match &spec.variable {
            GoldenVariable::Parameter(label) => {
                let idx = ParameterVector::index_of(n, label).ok_or_else(|| Error::InvalidConfig(format!("no parameter {label}")))?;
                let base = params.to_vec();
                let h = fd_step(base[idx]);
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus[idx] += h;
                minus[idx] -= h;
                let rp = residual_vector(&config, &ParameterVector::from_vec(n, &plus))?;
                let rm = residual_vector(&config, &ParameterVector::from_vec(n, &minus))?;
                (read_target(&rp, n, &spec.target)? - read_target(&rm, n, &spec.target)?) / (plus[idx] - minus[idx])
            }
            GoldenVariable::NeckT { k, i } => {
                let h = tolerances::FD_T_STEP;
                let eval = |t: f64| -> Result<C> {
                    let mut surface = surface_for(&config, &params);
                    surface.necks[neck_index(*k, *i)].state = NeckState::from_t(C::new(t, 0.0));
                    read_target(&residual_on(surface, &params, 0.0)?, n, &spec.target)
                };
                (eval(h)? - eval(-h)?) / (2.0 * h)
            }
        };
        let mut value = (spec.value)(t2, t1);
        if let GoldenTarget::Period { k, .. } = spec.target {
            // entries scale with the seed u of the neck pair
            value *= params.neck(k, 1).0;
        }
        let rel_error = (fd - value).norm() / value.norm();
        Ok(GoldenEntry { id: spec.id.into(), formula: spec.formula.into(), t2, value, fd, rel_error })
    });
    rows.into_iter().collect()
}
