//! The Weierstrass triple (φ₁, φ₂, φ₃): parameters, period prescriptions,
//! initial Scherk data, Gauss map and flux at the ends.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::differentials::{solve_one_form, GlobalOneForm};
use crate::error::{Error, Result};
use crate::forms::{Point, RationalOneForm, C, I};
use crate::surface_model::{check_angle, initial_positions, neck_index, NeckState, NodedSurfaceConfig, Surface, SLOT_INF, SLOT_ZERO};

/// Every real unknown of the construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub n: usize,
    /// α_{2k−1,1,j}
    pub alpha: Vec<[f64; 3]>,
    /// γ_{2k,0,j}
    pub gamma_even: Vec<[f64; 3]>,
    /// γ_{1,0,j}
    pub gamma_10: [f64; 3],
    /// γ_{1,∞,j}
    pub gamma_1inf: [f64; 3],
    pub t1: f64,
    pub t2: f64,
    /// a_{2k−1,2}
    pub a2: Vec<C>,
    /// b_{2k−1,2}
    pub b2: Vec<C>,
    /// (u_{k,i}, v_{k,i}) in neck order.
    pub necks: Vec<(f64, f64)>,
}

/// Real dimension 18n + 4.
pub fn parameter_count(n: usize) -> usize {
    18 * n + 4
}

impl ParameterVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(parameter_count(self.n));
        for a in &self.alpha {
            v.extend_from_slice(a);
        }
        for g in &self.gamma_even {
            v.extend_from_slice(g);
        }
        v.extend_from_slice(&self.gamma_10);
        v.extend_from_slice(&self.gamma_1inf);
        v.push(self.t1);
        v.push(self.t2);
        for k in 0..self.n {
            v.extend_from_slice(&[self.a2[k].re, self.a2[k].im, self.b2[k].re, self.b2[k].im]);
        }
        for (u, w) in &self.necks {
            v.push(*u);
            v.push(*w);
        }
        v
    }

    pub fn from_vec(n: usize, v: &[f64]) -> Self {
        assert_eq!(v.len(), parameter_count(n));
        let mut it = v.iter().copied();
        let take3 = |it: &mut dyn Iterator<Item = f64>| [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
        let alpha = (0..n).map(|_| take3(&mut it)).collect();
        let gamma_even = (0..n).map(|_| take3(&mut it)).collect();
        let gamma_10 = take3(&mut it);
        let gamma_1inf = take3(&mut it);
        let t1 = it.next().unwrap();
        let t2 = it.next().unwrap();
        let mut a2 = Vec::with_capacity(n);
        let mut b2 = Vec::with_capacity(n);
        for _ in 0..n {
            a2.push(C::new(it.next().unwrap(), it.next().unwrap()));
            b2.push(C::new(it.next().unwrap(), it.next().unwrap()));
        }
        let necks = (0..2 * (2 * n - 1)).map(|_| (it.next().unwrap(), it.next().unwrap())).collect();
        ParameterVector { n, alpha, gamma_even, gamma_10, gamma_1inf, t1, t2, a2, b2, necks }
    }

    /// Human-readable names in [`ParameterVector::to_vec`] order.
    pub fn labels(n: usize) -> Vec<String> {
        let mut out = Vec::with_capacity(parameter_count(n));
        for k in 1..=n {
            for j in 1..=3 {
                out.push(format!("alpha_{},1,{j}", 2 * k - 1));
            }
        }
        for k in 1..=n {
            for j in 1..=3 {
                out.push(format!("gamma_{},0,{j}", 2 * k));
            }
        }
        for j in 1..=3 {
            out.push(format!("gamma_1,0,{j}"));
        }
        for j in 1..=3 {
            out.push(format!("gamma_1,inf,{j}"));
        }
        out.push("T1".into());
        out.push("T2".into());
        for k in 1..=n {
            let m = 2 * k - 1;
            out.push(format!("Re a_{m},2"));
            out.push(format!("Im a_{m},2"));
            out.push(format!("Re b_{m},2"));
            out.push(format!("Im b_{m},2"));
        }
        for k in 1..2 * n {
            for i in 1..=2 {
                out.push(format!("u_{k},{i}"));
                out.push(format!("v_{k},{i}"));
            }
        }
        out
    }

    /// Position of a named entry in the flat vector.
    pub fn index_of(n: usize, label: &str) -> Option<usize> {
        Self::labels(n).iter().position(|l| l == label)
    }

    /// T = (T₁, T₂, 0).
    pub fn t_vec(&self) -> [f64; 3] {
        [self.t1, self.t2, 0.0]
    }

    /// Second marked point of every sphere.
    pub fn seconds(&self) -> Vec<C> {
        (0..2 * self.n).map(|m| if m % 2 == 0 { self.a2[m / 2] } else { self.b2[m / 2] }).collect()
    }

    /// Neck states at the given x.
    pub fn neck_states(&self, x: f64) -> Vec<NeckState> {
        self.necks.iter().map(|(u, v)| NeckState::from_uv(*u, *v, x)).collect()
    }

    pub fn neck(&self, k: usize, i: usize) -> (f64, f64) {
        self.necks[neck_index(k, i)]
    }

    /// γ_{2k−2,0,j} with γ_{0,0,j} = −γ_{1,∞,j}.
    pub fn gamma_prev(&self, k: usize, j: usize) -> f64 {
        if k == 1 {
            -self.gamma_1inf[j]
        } else {
            self.gamma_even[k - 2][j]
        }
    }

    /// Lattice generators (0, 2π, 0) and (2πT₁, 2πT₂, 0).
    pub fn lattice(&self) -> [[f64; 3]; 2] {
        [[0.0, 2.0 * PI, 0.0], [2.0 * PI * self.t1, 2.0 * PI * self.t2, 0.0]]
    }

    /// Angle between the top and bottom ends.
    pub fn scherk_angle(&self) -> f64 {
        self.t2.clamp(-1.0, 1.0).acos()
    }

    /// Period vector (length 2n+2) prescribed for φ_j, j ∈ {0, 1, 2}.
    pub fn periods(&self, j: usize) -> Vec<C> {
        let tj = self.t_vec()[j];
        let two_pi_i = 2.0 * PI * I;
        let mut p = vec![two_pi_i * C::new(self.gamma_10[j], -tj), two_pi_i * C::new(self.gamma_1inf[j], tj)];
        for k in 0..self.n {
            p.push(two_pi_i * C::new(self.gamma_even[k][j], -tj));
            let shift = if j == 1 { -1.0 } else { 0.0 };
            p.push(two_pi_i * C::new(self.alpha[k][j], shift));
        }
        p
    }
}

/// Initial values of the degenerate Scherk configuration, with the neck
/// seeds of `config`.
pub fn initial_parameters(config: &NodedSurfaceConfig) -> Result<ParameterVector> {
    let n = config.n;
    let t2 = config.t2_0;
    check_angle(n, t2)?;
    let (a0, b0) = initial_positions(t2);
    Ok(ParameterVector {
        n,
        alpha: vec![[0.0, 0.0, 1.0]; n],
        gamma_even: vec![[0.0, 0.0, 1.0]; n],
        gamma_10: [0.0, 0.0, -1.0],
        gamma_1inf: [0.0, 0.0, -1.0],
        t1: (1.0 - t2 * t2).sqrt(),
        t2,
        a2: vec![C::new(a0, 0.0); n],
        b2: vec![C::new(b0, 0.0); n],
        necks: config.necks.iter().map(|nk| (nk.u, nk.v)).collect(),
    })
}

/// The three global forms on one Σ_t.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeierstrassTriple {
    pub surface: Surface,
    pub phi: [GlobalOneForm; 3],
}

impl WeierstrassTriple {
    /// Restrictions of (φ₁, φ₂, φ₃) to a sphere.
    pub fn sphere(&self, m: usize) -> [&RationalOneForm; 3] {
        [&self.phi[0].spheres[m], &self.phi[1].spheres[m], &self.phi[2].spheres[m]]
    }

    /// (φ₁, φ₂, φ₃)(z) on sphere m.
    pub fn eval(&self, m: usize, z: C) -> [C; 3] {
        let s = self.sphere(m);
        [s[0].eval(z), s[1].eval(z), s[2].eval(z)]
    }

    /// Residues of the three forms at (sphere, slot).
    pub fn residues(&self, sphere: usize, slot: usize) -> [C; 3] {
        [self.phi[0].residue(sphere, slot), self.phi[1].residue(sphere, slot), self.phi[2].residue(sphere, slot)]
    }
}

/// Σ_t for the given parameters at the configured x.
pub fn surface_for(config: &NodedSurfaceConfig, params: &ParameterVector) -> Surface {
    Surface::new(config.n, config.epsilon, &params.seconds(), &params.neck_states(config.x))
}

/// Solves for φ₁, φ₂, φ₃ with the prescribed periods.
pub fn assemble_triple(config: &NodedSurfaceConfig, params: &ParameterVector) -> Result<WeierstrassTriple> {
    assemble_on(surface_for(config, params), params)
}

/// As [`assemble_triple`] on an explicitly given Σ_t.
pub fn assemble_on(surface: Surface, params: &ParameterVector) -> Result<WeierstrassTriple> {
    if params.n != surface.n {
        return Err(Error::InvalidConfig("parameter vector and surface disagree on n".into()));
    }
    let phi = [
        solve_one_form(&surface, &params.periods(0))?,
        solve_one_form(&surface, &params.periods(1))?,
        solve_one_form(&surface, &params.periods(2))?,
    ];
    Ok(WeierstrassTriple { surface, phi })
}

/// The limit data Φ_k written out directly: index m is sphere m+1.
pub fn scherk_limit(n: usize, t2: f64) -> Vec<[RationalOneForm; 3]> {
    let t1 = (1.0 - t2 * t2).sqrt();
    let (a, b) = initial_positions(t2);
    let c = |re: f64, im: f64| C::new(re, im);
    (0..2 * n)
        .map(|m| {
            let odd = m % 2 == 0;
            let second = if odd { a } else { b };
            let pts = [Point::Finite(c(1.0, 0.0)), Point::Finite(c(second, 0.0)), Point::Finite(c(0.0, 0.0)), Point::Infinity];
            let sgn = if odd { 1.0 } else { -1.0 };
            let zero = c(0.0, 0.0);
            [
                RationalOneForm::with_residues(&pts, &[zero, zero, c(0.0, -t1), zero]),
                RationalOneForm::with_residues(&pts, &[c(0.0, -sgn), c(0.0, sgn), c(0.0, -t2), zero]),
                RationalOneForm::with_residues(&pts, &[c(sgn, 0.0), c(sgn, 0.0), c(-sgn, 0.0), zero]),
            ]
        })
        .collect()
}

/// Flux Im∮ (φ₁, φ₂, φ₃) around an end, i.e. 2π·Re of the residues.
pub fn flux_at_end(triple: &WeierstrassTriple, sphere: usize, slot: usize) -> [f64; 3] {
    let r = triple.residues(sphere, slot);
    [2.0 * PI * r[0].re, 2.0 * PI * r[1].re, 2.0 * PI * r[2].re]
}

/// Re∮ (φ₁, φ₂, φ₃) around an end: the translation it generates.
pub fn period_at_end(triple: &WeierstrassTriple, sphere: usize, slot: usize) -> [f64; 3] {
    let r = triple.residues(sphere, slot);
    let p = |c: C| (2.0 * PI * I * c).re;
    [p(r[0]), p(r[1]), p(r[2])]
}

/// Limiting unit normal at an end from g = −(R₁ + iR₂)/R₃, oriented so that
/// the normal at a_{1,1} points along +x₁.
pub fn gauss_map_at_end(triple: &WeierstrassTriple, sphere: usize, slot: usize) -> Result<[f64; 3]> {
    let r = triple.residues(sphere, slot);
    if r[2].norm() < 1e-14 {
        return Err(Error::ZeroResidue { end: format!("sphere {} slot {}", sphere + 1, slot) });
    }
    let g = -(r[0] + I * r[1]) / r[2];
    let nrm = stereographic(g);
    Ok([-nrm[0], -nrm[1], -nrm[2]])
}

/// Unit normal from the Gauss map value g: (2Re g, 2Im g, |g|²−1)/(|g|²+1).
pub fn stereographic(g: C) -> [f64; 3] {
    let m = g.norm_sqr();
    [2.0 * g.re / (m + 1.0), 2.0 * g.im / (m + 1.0), (m - 1.0) / (m + 1.0)]
}

/// The four ends in the order 0₁, ∞₁, 0_{2n}, ∞_{2n}.
pub fn ends(n: usize) -> [(usize, usize); 4] {
    let last = 2 * n - 1;
    [(0, SLOT_ZERO), (0, SLOT_INF), (last, SLOT_ZERO), (last, SLOT_INF)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_model::build_config;

    #[test]
    fn layout_round_trip() {
        for n in 1..=3 {
            let cfg = build_config(n, 0.3, 0.0, &[], None).unwrap();
            let p = initial_parameters(&cfg).unwrap();
            let v = p.to_vec();
            assert_eq!(v.len(), parameter_count(n));
            assert_eq!(ParameterVector::labels(n).len(), v.len());
            assert_eq!(ParameterVector::from_vec(n, &v), p);
        }
    }

    #[test]
    fn initial_values() {
        let cfg = build_config(2, 0.5, 0.0, &[], None).unwrap();
        let p = initial_parameters(&cfg).unwrap();
        assert!((p.t1 - 0.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.gamma_even[1][2], 1.0);
        assert_eq!(p.alpha[0][0], 0.0);
        assert!((p.scherk_angle() - (0.5f64).acos()).abs() < 1e-15);
    }

    #[test]
    fn triple_equals_scherk_limit() {
        for n in 1..=3 {
            for t2 in [0.3, 0.5, 0.7, -0.4] {
                let cfg = build_config(n, t2, 0.0, &[], None).unwrap();
                let p = initial_parameters(&cfg).unwrap();
                let tri = assemble_triple(&cfg, &p).unwrap();
                let lim = scherk_limit(n, t2);
                for m in 0..2 * n {
                    for j in 0..3 {
                        let d = tri.phi[j].spheres[m].coefficient_distance(&lim[m][j]);
                        assert!(d < 1e-14, "n={n} T2={t2} sphere {} j={j}: {d}", m + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn general_parameters_match_explicit_sphere_formulas() {
        // perturbed values against the explicit per-sphere formulas at x = 0
        let cfg = build_config(2, 0.5, 0.0, &[], None).unwrap();
        let mut p = initial_parameters(&cfg).unwrap();
        p.alpha[1] = [0.1, -0.2, 0.9];
        p.gamma_even[0] = [0.3, 0.05, 1.1];
        p.gamma_10 = [0.02, -0.07, -1.05];
        p.gamma_1inf = [-0.04, 0.03, -0.95];
        let tri = assemble_triple(&cfg, &p).unwrap();
        let g = |a: [f64; 3], b: [f64; 3], j: usize| a[j] + b[j];
        let s = |j| g(p.gamma_10, p.gamma_1inf, j);
        let tv = p.t_vec();
        for k in 1..=2 {
            let odd = &tri.phi;
            for j in 0..3 {
                let shift = if j == 1 { C::new(0.0, -1.0) } else { C::new(0.0, 0.0) };
                let a1 = C::new(p.alpha[k - 1][j], 0.0) + shift;
                let want_odd = [a1, -a1 - s(j), C::new(p.gamma_prev(k, j) + s(j), -tv[j])];
                let want_even = [-a1, a1 + s(j), C::new(p.gamma_even[k - 1][j], -tv[j])];
                for slot in 0..3 {
                    assert!((odd[j].spheres[2 * k - 2].poles[slot].residue - want_odd[slot]).norm() < 1e-14);
                    assert!((odd[j].spheres[2 * k - 1].poles[slot].residue - want_even[slot]).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn q_vanishes_on_seed() {
        let cfg = build_config(2, 0.7, 0.0, &[], None).unwrap();
        let tri = assemble_triple(&cfg, &initial_parameters(&cfg).unwrap()).unwrap();
        for m in 0..4 {
            let z = C::new(0.37, -0.81);
            let q: C = tri.eval(m, z).iter().map(|f| f * f).sum();
            assert!(q.norm() < 1e-13);
        }
    }

    #[test]
    fn flux_and_normals_at_seed() {
        let t2: f64 = 0.5;
        let t1 = (1.0 - t2 * t2).sqrt();
        let cfg = build_config(2, t2, 0.0, &[], None).unwrap();
        let tri = assemble_triple(&cfg, &initial_parameters(&cfg).unwrap()).unwrap();
        let mut sum = [0.0; 3];
        for (sphere, slot) in ends(2) {
            let f = flux_at_end(&tri, sphere, slot);
            let len = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
            assert!((len - 2.0 * PI).abs() < 1e-12);
            let dot = f[0] * 2.0 * PI * t1 + f[1] * 2.0 * PI * t2;
            assert!(dot.abs() < 1e-12);
            for j in 0..3 {
                sum[j] += f[j];
            }
        }
        assert!(sum.iter().all(|s| s.abs() < 1e-12));
        // g = −(R₁+iR₂)/R₃ at 0₁ with R = (−iT₁, −iT₂, −1)
        let nrm = gauss_map_at_end(&tri, 0, SLOT_ZERO).unwrap();
        assert!((nrm[0] + t2).abs() < 1e-14 && (nrm[1] - t1).abs() < 1e-14 && nrm[2].abs() < 1e-14, "{nrm:?}");
        // normal is perpendicular to the period (2πT₁, 2πT₂, 0) of that end
        let per = period_at_end(&tri, 0, SLOT_ZERO);
        assert!((nrm[0] * per[0] + nrm[1] * per[1]).abs() < 1e-12);
        let odd_neck = gauss_map_at_end(&tri, 0, 0).unwrap();
        assert!((odd_neck[0] - 1.0).abs() < 1e-14, "{odd_neck:?}");
    }
}
