//! Rational 1-forms on a single sphere, their charts, residues, contour and path
//! integrals, and the quadratic differential built from a triple of them.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances;

pub type C = Complex64;

pub(crate) const I: C = C::new(0.0, 1.0);

/// A marked point of the Riemann sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Finite(C),
    Infinity,
}

impl Point {
    pub fn finite(&self) -> Option<C> {
        match self {
            Point::Finite(z) => Some(*z),
            Point::Infinity => None,
        }
    }
}

/// Local coordinate on a sphere. `Affine(p)` is r = z − p, `Infinity` is r = 1/z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Chart {
    Affine(C),
    Infinity,
}

impl Chart {
    /// The chart in which `p` sits at the origin.
    pub fn centered_at(p: Point) -> Chart {
        match p {
            Point::Finite(z) => Chart::Affine(z),
            Point::Infinity => Chart::Infinity,
        }
    }

    pub fn to_z(&self, r: C) -> C {
        match self {
            Chart::Affine(p) => p + r,
            Chart::Infinity => r.inv(),
        }
    }

    pub fn from_z(&self, z: C) -> C {
        match self {
            Chart::Affine(p) => z - p,
            Chart::Infinity => z.inv(),
        }
    }
}

/// Higher-order principal part c_{−j} = coeffs[j−2]·scale^{j−1} for j ≥ 2.
///
/// Keeping the scale separate lets tails built from tiny neck parameters be
/// evaluated as powers of (scale/r) without underflow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub coeffs: Vec<C>,
    pub scale: C,
}

impl Tail {
    pub fn zero() -> Self {
        Tail { coeffs: Vec::new(), scale: C::new(0.0, 0.0) }
    }

    pub fn is_zero(&self) -> bool {
        self.scale == C::new(0.0, 0.0) || self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    /// The Laurent coefficient of r^{−j}.
    pub fn coefficient(&self, j: usize) -> C {
        if j < 2 || j - 2 >= self.coeffs.len() {
            return C::new(0.0, 0.0);
        }
        self.coeffs[j - 2] * self.scale.powu(j as u32 - 1)
    }

    /// Σ_j c_{−j} d^{−j} written as (1/d)·Σ coeffs[m]·u^{m+1} with u = scale/d.
    fn series(&self, u: C) -> C {
        let mut acc = C::new(0.0, 0.0);
        let mut pow = u;
        for c in &self.coeffs {
            acc += c * pow;
            pow *= u;
        }
        acc
    }

    /// Σ coeffs[m]·u^m.
    fn series_shifted(&self, u: C) -> C {
        self.coeffs.iter().rev().fold(C::new(0.0, 0.0), |acc, c| acc * u + c)
    }

    /// Σ coeffs[m]·u^{m+1}/(m+1).
    pub(crate) fn primitive_series(&self, u: C) -> C {
        let mut acc = C::new(0.0, 0.0);
        let mut pow = u;
        for (m, c) in self.coeffs.iter().enumerate() {
            acc += c * pow / (m as f64 + 1.0);
            pow *= u;
        }
        acc
    }
}

/// a/b by Smith's algorithm, safe when |b|² under- or overflows.
pub fn robust_div(a: C, b: C) -> C {
    if b.re.abs() >= b.im.abs() {
        let q = b.im / b.re;
        let den = b.re + b.im * q;
        C::new((a.re + a.im * q) / den, (a.im - a.re * q) / den)
    } else {
        let q = b.re / b.im;
        let den = b.re * q + b.im;
        C::new((a.re * q + a.im) / den, (a.im * q - a.re) / den)
    }
}

/// A pole with simple part `residue` and higher-order `tail`.
///
/// For the pole at ∞ the residue is implied by the finite ones; the stored value
/// is kept equal to −Σ finite residues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub point: Point,
    pub residue: C,
    pub tail: Tail,
}

/// A meromorphic 1-form on one sphere with poles only at its listed points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalOneForm {
    pub poles: Vec<Pole>,
}

impl RationalOneForm {
    /// Simple poles with the given residues. Any `Infinity` entry gets the
    /// residue forced by the residue theorem.
    pub fn with_residues(points: &[Point], residues: &[C]) -> Self {
        assert_eq!(points.len(), residues.len());
        let finite_sum: C = points
            .iter()
            .zip(residues)
            .filter(|(p, _)| matches!(p, Point::Finite(_)))
            .map(|(_, r)| *r)
            .sum();
        let poles = points
            .iter()
            .zip(residues)
            .map(|(p, r)| Pole {
                point: *p,
                residue: if matches!(p, Point::Infinity) { -finite_sum } else { *r },
                tail: Tail::zero(),
            })
            .collect();
        RationalOneForm { poles }
    }

    pub fn zero(points: &[Point]) -> Self {
        Self::with_residues(points, &vec![C::new(0.0, 0.0); points.len()])
    }

    pub fn index_of(&self, p: Point) -> Option<usize> {
        self.poles.iter().position(|q| q.point == p)
    }

    /// Residue at a marked point; at ∞ it is minus the sum of the finite residues.
    pub fn residue(&self, p: Point) -> Result<C> {
        let idx = self.index_of(p).ok_or(Error::UnknownPoint)?;
        Ok(match p {
            Point::Infinity => -self.finite_residue_sum(),
            Point::Finite(_) => self.poles[idx].residue,
        })
    }

    pub fn finite_residue_sum(&self) -> C {
        self.poles
            .iter()
            .filter(|p| matches!(p.point, Point::Finite(_)))
            .map(|p| p.residue)
            .sum()
    }

    /// Sum of all residues including ∞, zero up to rounding by construction.
    pub fn residue_sum(&self) -> C {
        self.poles.iter().map(|p| p.residue).sum()
    }

    /// Coefficient f(z) of the form f(z)dz.
    pub fn eval(&self, z: C) -> C {
        self.eval_chart(Chart::Affine(C::new(0.0, 0.0)), z)
    }

    /// Coefficient g(r) of the form g(r)dr in `chart`.
    pub fn eval_chart(&self, chart: Chart, r: C) -> C {
        self.eval_in(chart, r, None)
    }

    /// The form minus the principal part of pole `idx`, in `chart`.
    pub fn eval_regular(&self, chart: Chart, r: C, idx: usize) -> C {
        self.eval_in(chart, r, Some(idx))
    }

    fn eval_in(&self, chart: Chart, r: C, skip: Option<usize>) -> C {
        let mut acc = C::new(0.0, 0.0);
        match chart {
            Chart::Affine(p) => {
                for (k, pole) in self.poles.iter().enumerate() {
                    if Some(k) == skip {
                        continue;
                    }
                    match pole.point {
                        Point::Finite(q) => {
                            let d = (p - q) + r;
                            let mut term = pole.residue;
                            if !pole.tail.is_zero() {
                                term += pole.tail.series(pole.tail.scale / d);
                            }
                            acc += term / d;
                        }
                        Point::Infinity => {
                            if !pole.tail.is_zero() {
                                let z = p + r;
                                // Σ c_{−j} w^{−j} dw with w = 1/z
                                let s = pole.tail.scale;
                                let mut pow = s;
                                for c in &pole.tail.coeffs {
                                    acc -= c * pow;
                                    pow *= s * z;
                                }
                            }
                        }
                    }
                }
            }
            Chart::Infinity => {
                let skip_inf = skip.map(|k| matches!(self.poles[k].point, Point::Infinity)).unwrap_or(false);
                for (k, pole) in self.poles.iter().enumerate() {
                    if Some(k) == skip {
                        continue;
                    }
                    match pole.point {
                        Point::Finite(q) => {
                            let den = C::new(1.0, 0.0) - q * r;
                            if skip_inf {
                                acc -= pole.residue * q / den;
                            } else {
                                acc -= pole.residue / (r * den);
                            }
                            if !pole.tail.is_zero() {
                                let s = pole.tail.scale;
                                let u = s * r / den;
                                acc -= s / (den * den) * pole.tail.series_shifted(u);
                            }
                        }
                        Point::Infinity => {
                            if !pole.tail.is_zero() {
                                acc += pole.tail.series(pole.tail.scale / r) / r;
                            }
                        }
                    }
                }
            }
        }
        acc
    }

    /// ∫ g(r)dr along the straight segment r0 → r1 of `chart`, exact.
    pub fn segment_integral(&self, chart: Chart, r0: C, r1: C) -> C {
        self.primitive_in(chart, r0, r1, None)
    }

    /// Straight-segment integral of the regular part at pole `idx`.
    pub fn segment_integral_regular(&self, chart: Chart, r0: C, r1: C, idx: usize) -> C {
        self.primitive_in(chart, r0, r1, Some(idx))
    }

    fn primitive_in(&self, chart: Chart, r0: C, r1: C, skip: Option<usize>) -> C {
        let mut acc = C::new(0.0, 0.0);
        match chart {
            Chart::Affine(p) => {
                for (k, pole) in self.poles.iter().enumerate() {
                    if Some(k) == skip {
                        continue;
                    }
                    match pole.point {
                        Point::Finite(q) => {
                            let d0 = (p - q) + r0;
                            let d1 = (p - q) + r1;
                            if pole.residue != C::new(0.0, 0.0) {
                                acc += pole.residue * (d1 / d0).ln();
                            }
                            if !pole.tail.is_zero() {
                                let s = pole.tail.scale;
                                acc -= pole.tail.primitive_series(s / d1) - pole.tail.primitive_series(s / d0);
                            }
                        }
                        Point::Infinity => {
                            if !pole.tail.is_zero() {
                                let s = pole.tail.scale;
                                let z0 = p + r0;
                                let z1 = p + r1;
                                acc -= pole.tail.primitive_series(s * z1) - pole.tail.primitive_series(s * z0);
                            }
                        }
                    }
                }
            }
            Chart::Infinity => {
                let skip_inf = skip.map(|k| matches!(self.poles[k].point, Point::Infinity)).unwrap_or(false);
                for (k, pole) in self.poles.iter().enumerate() {
                    if Some(k) == skip {
                        continue;
                    }
                    match pole.point {
                        Point::Finite(q) => {
                            let one = C::new(1.0, 0.0);
                            let den0 = one - q * r0;
                            let den1 = one - q * r1;
                            if pole.residue != C::new(0.0, 0.0) {
                                let mut v = (den1 / den0).ln();
                                if !skip_inf {
                                    v += (r0 / r1).ln();
                                }
                                acc += pole.residue * v;
                            }
                            if !pole.tail.is_zero() {
                                let s = pole.tail.scale;
                                let u0 = s * r0 / den0;
                                let u1 = s * r1 / den1;
                                acc -= pole.tail.primitive_series(u1) - pole.tail.primitive_series(u0);
                            }
                        }
                        Point::Infinity => {
                            if !pole.tail.is_zero() {
                                let s = pole.tail.scale;
                                acc -= pole.tail.primitive_series(s / r1) - pole.tail.primitive_series(s / r0);
                            }
                        }
                    }
                }
            }
        }
        acc
    }

    /// The same residues with every higher principal part removed.
    pub fn without_tails(&self) -> RationalOneForm {
        let mut f = self.clone();
        for p in &mut f.poles {
            p.tail = Tail::zero();
        }
        f
    }

    /// Only the higher principal parts.
    pub fn tails_only(&self) -> RationalOneForm {
        let mut f = self.clone();
        for p in &mut f.poles {
            p.residue = C::new(0.0, 0.0);
        }
        f
    }

    /// Distance from `z` to the nearest finite pole.
    pub fn distance_to_poles(&self, z: C) -> f64 {
        self.poles
            .iter()
            .filter_map(|p| p.point.finite())
            .map(|q| (z - q).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Max coefficient-wise distance to another form on the same points.
    pub fn coefficient_distance(&self, other: &RationalOneForm) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b) in self.poles.iter().zip(&other.poles) {
            worst = worst.max((a.residue - b.residue).norm());
            let n = a.tail.coeffs.len().max(b.tail.coeffs.len());
            for j in 2..n + 2 {
                worst = worst.max((a.tail.coefficient(j) - b.tail.coefficient(j)).norm());
            }
        }
        worst
    }
}

/// Trapezoid rule for ∮ g(r)dr on |r| = radius, counter-clockwise, `m` nodes,
/// nodes rotated by `phase`.
pub fn trapezoid_circle<F: Fn(C) -> C>(radius: f64, m: usize, phase: f64, g: F) -> C {
    let mut acc = C::new(0.0, 0.0);
    for k in 0..m {
        let r = C::from_polar(radius, phase + 2.0 * PI * k as f64 / m as f64);
        acc += g(r) * r;
    }
    acc * I * (2.0 * PI / m as f64)
}

/// Trapezoid rule with doubling until successive values agree.
pub fn adaptive_circle<F: Fn(C) -> C>(radius: f64, m0: usize, g: F) -> Result<C> {
    let mut m = m0.max(8);
    let mut prev = trapezoid_circle(radius, m, 0.0, &g);
    while m < tolerances::CIRCLE_MAX_POINTS {
        // reuse the previous nodes, add the midpoints
        let mid = trapezoid_circle(radius, m, PI / m as f64, &g);
        let next = (prev + mid) * 0.5;
        m *= 2;
        let scale = next.norm().max(1.0);
        if (next - prev).norm() <= tolerances::CIRCLE_DOUBLING_TOL * scale {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged { points: m })
}

/// Trapezoid approximation of ∮_{C(p)} form over the radius-`radius` circle
/// around the marked point `p` (for ∞ the circle |1/z| = radius, positively
/// oriented about ∞).
pub fn contour_integral(form: &RationalOneForm, p: Point, radius: f64, points: usize) -> Result<C> {
    let idx = form.index_of(p).ok_or(Error::UnknownPoint)?;
    check_isolated(form, idx, radius)?;
    let chart = Chart::centered_at(p);
    Ok(trapezoid_circle(radius, points, 0.0, |r| form.eval_chart(chart, r)))
}

fn check_isolated(form: &RationalOneForm, idx: usize, radius: f64) -> Result<()> {
    let center = form.poles[idx].point;
    for (k, pole) in form.poles.iter().enumerate() {
        if k == idx {
            continue;
        }
        let inside = match (center, pole.point) {
            (Point::Finite(c), Point::Finite(q)) => (q - c).norm() <= radius,
            (Point::Infinity, Point::Finite(q)) => q.norm() * radius >= 1.0,
            (_, Point::Infinity) => false,
        };
        if inside {
            return Err(Error::CircleEnclosesMultiplePoints { center: format!("{center:?}"), radius });
        }
    }
    Ok(())
}

/// ∫ form along a polyline in the z-plane using the exact primitive.
///
/// Each vertex-to-vertex piece is a straight segment; the precondition is that
/// the polyline keeps distance above `min_distance` from every finite pole.
pub fn path_integral(form: &RationalOneForm, polyline: &[C], min_distance: f64) -> Result<C> {
    check_path(form, polyline, min_distance)?;
    let chart = Chart::Affine(C::new(0.0, 0.0));
    Ok(polyline.windows(2).map(|w| form.segment_integral(chart, w[0], w[1])).sum())
}

fn check_path(form: &RationalOneForm, polyline: &[C], min_distance: f64) -> Result<()> {
    for w in polyline.windows(2) {
        for q in form.poles.iter().filter_map(|p| p.point.finite()) {
            let d = segment_distance(w[0], w[1], q);
            if d <= min_distance {
                return Err(Error::PathTooClose { distance: d, minimum: min_distance });
            }
        }
    }
    Ok(())
}

/// Distance from `q` to the segment a → b.
pub fn segment_distance(a: C, b: C, q: C) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (q - a).norm();
    }
    let s = ((q - a) * ab.conj()).re / len2;
    let s = s.clamp(0.0, 1.0);
    (a + ab * s - q).norm()
}

// 7-point Gauss / 15-point Kronrod nodes and weights on [−1, 1].
const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GK_WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk_segment<F: Fn(C) -> C>(f: &F, a: C, b: C) -> (C, f64) {
    let half = (b - a) * 0.5;
    let mid = (a + b) * 0.5;
    let fc = f(mid);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for j in 0..7 {
        let x = GK_NODES[j];
        let s = f(mid + half * x) + f(mid - half * x);
        kron += s * GK_WK[j];
        if j % 2 == 1 {
            gauss += s * GK_WG[j / 2];
        }
    }
    (kron * half, ((kron - gauss) * half).norm())
}

/// Adaptive Gauss–Kronrod integral of g(z)dz along a straight segment.
pub fn gauss_kronrod_segment<F: Fn(C) -> C>(g: &F, a: C, b: C, rel_tol: f64) -> Result<C> {
    let mut stack = vec![(a, b, 0usize)];
    let (whole, _) = gk_segment(g, a, b);
    let scale = whole.norm().max(1e-300);
    let mut total = C::new(0.0, 0.0);
    let mut evaluations = 0usize;
    while let Some((x0, x1, depth)) = stack.pop() {
        let (val, err) = gk_segment(g, x0, x1);
        evaluations += 15;
        let share = (x1 - x0).norm() / (b - a).norm();
        if err <= rel_tol * scale * share.max(1e-3) || err <= 1e-15 * val.norm() || depth > 50 {
            total += val;
        } else {
            let m = (x0 + x1) * 0.5;
            stack.push((m, x1, depth + 1));
            stack.push((x0, m, depth + 1));
        }
        if evaluations > 5_000_000 {
            return Err(Error::QuadratureNotConverged { points: evaluations });
        }
    }
    Ok(total)
}

/// Independent quadrature of a polyline integral, used to cross-check the
/// exact primitive.
pub fn path_integral_adaptive(form: &RationalOneForm, polyline: &[C], min_distance: f64) -> Result<C> {
    check_path(form, polyline, min_distance)?;
    let g = |z: C| form.eval(z);
    let mut acc = C::new(0.0, 0.0);
    for w in polyline.windows(2) {
        acc += gauss_kronrod_segment(&g, w[0], w[1], tolerances::PATH_REL_TOL)?;
    }
    Ok(acc)
}

/// Weight applied to Q/dz in an L-functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    Plain,
    Z,
    ZMinus(C),
}

impl Weight {
    pub fn at(&self, z: C) -> C {
        match self {
            Weight::Plain => C::new(1.0, 0.0),
            Weight::Z => z,
            Weight::ZMinus(a) => z - a,
        }
    }

    pub fn derivative(&self) -> C {
        match self {
            Weight::Plain => C::new(0.0, 0.0),
            _ => C::new(1.0, 0.0),
        }
    }
}

/// Q = φ₁² + φ₂² + φ₃², held as its three factors.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticDifferential<'a> {
    pub forms: [&'a RationalOneForm; 3],
}

impl<'a> QuadraticDifferential<'a> {
    pub fn new(forms: [&'a RationalOneForm; 3]) -> Self {
        QuadraticDifferential { forms }
    }

    /// Coefficient of dz².
    pub fn eval(&self, z: C) -> C {
        self.forms.iter().map(|f| f.eval(z).powu(2)).sum()
    }

    /// Coefficient of dr² in `chart`.
    pub fn eval_chart(&self, chart: Chart, r: C) -> C {
        self.forms.iter().map(|f| f.eval_chart(chart, r).powu(2)).sum()
    }

    /// Exact L-component when all three forms have simple poles only:
    /// 2πi·[w(p)·2Σ R_j h_j(p) + w'(p)·Σ R_j²] with h_j the regular part at p.
    pub fn functional_simple(&self, weight: Weight, p: C) -> Result<C> {
        let mut cross = C::new(0.0, 0.0);
        let mut square = C::new(0.0, 0.0);
        for f in &self.forms {
            let idx = f.index_of(Point::Finite(p)).ok_or(Error::UnknownPoint)?;
            if !f.poles[idx].tail.is_zero() {
                return Err(Error::InvalidConfig("closed-form L-component needs simple poles".into()));
            }
            let r = f.poles[idx].residue;
            cross += r * f.eval_regular(Chart::Affine(p), C::new(0.0, 0.0), idx);
            square += r * r;
        }
        Ok(2.0 * PI * I * (weight.at(p) * 2.0 * cross + weight.derivative() * square))
    }
}

/// ∮_{C(p)} w(z)·Q/dz on the radius-`radius` circle, trapezoid with doubling.
pub fn functional_l_component(psi: &QuadraticDifferential, weight: Weight, p: C, radius: f64) -> Result<C> {
    for f in &psi.forms {
        let idx = f.index_of(Point::Finite(p)).ok_or(Error::UnknownPoint)?;
        check_isolated(f, idx, radius)?;
    }
    adaptive_circle(radius, tolerances::CIRCLE_POINTS, |r| {
        let z = p + r;
        weight.at(z) * psi.eval_chart(Chart::Affine(p), r)
    })
}

/// ∮_{C(p)} w(z)·Q/dz split as the exact simple-pole value plus quadrature
/// of the tail correction Σ ψ_j(2φ⁰_j + ψ_j), where φ⁰_j keeps only the
/// residues and ψ_j only the higher principal parts. The quadrature then acts
/// on a quantity of the size of the tails, so its rounding error does too.
pub fn functional_split(psi: &QuadraticDifferential, weight: Weight, p: C, radius: f64) -> Result<C> {
    let simple: Vec<RationalOneForm> = psi.forms.iter().map(|f| f.without_tails()).collect();
    let exact = QuadraticDifferential::new([&simple[0], &simple[1], &simple[2]]).functional_simple(weight, p)?;
    if psi.forms.iter().all(|f| f.poles.iter().all(|q| q.tail.is_zero())) {
        return Ok(exact);
    }
    for f in &psi.forms {
        let idx = f.index_of(Point::Finite(p)).ok_or(Error::UnknownPoint)?;
        check_isolated(f, idx, radius)?;
    }
    let tails: Vec<RationalOneForm> = psi.forms.iter().map(|f| f.tails_only()).collect();
    let chart = Chart::Affine(p);
    let correction = adaptive_circle(radius, tolerances::CIRCLE_POINTS, |r| {
        let mut acc = C::new(0.0, 0.0);
        for (s, t) in simple.iter().zip(&tails) {
            let tv = t.eval_chart(chart, r);
            acc += tv * (2.0 * s.eval_chart(chart, r) + tv);
        }
        weight.at(p + r) * acc
    })?;
    Ok(exact + correction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn phi3_odd(t2: f64) -> RationalOneForm {
        let a = (t2 - 1.0) / (t2 + 1.0);
        let pts = [Point::Finite(c(1.0, 0.0)), Point::Finite(c(a, 0.0)), Point::Finite(c(0.0, 0.0)), Point::Infinity];
        RationalOneForm::with_residues(&pts, &[c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)])
    }

    #[test]
    fn residue_at_infinity_is_implied() {
        let f = phi3_odd(0.5);
        assert_eq!(f.residue(Point::Infinity).unwrap(), c(-1.0, 0.0));
        assert_eq!(f.residue(Point::Finite(c(1.0, 0.0))).unwrap(), c(1.0, 0.0));
        assert_eq!(f.residue_sum(), c(0.0, 0.0));
        assert!(matches!(f.residue(Point::Finite(c(7.0, 0.0))), Err(Error::UnknownPoint)));
    }

    #[test]
    fn contour_matches_residue() {
        let f = phi3_odd(0.5);
        for p in f.poles.iter().map(|p| p.point) {
            let v = contour_integral(&f, p, 0.05, 256).unwrap();
            let want = 2.0 * PI * I * f.residue(p).unwrap();
            assert!((v - want).norm() < 1e-12, "{p:?} {v} {want}");
        }
    }

    #[test]
    fn circle_enclosing_two_poles_is_rejected() {
        let f = phi3_odd(0.5);
        assert!(contour_integral(&f, Point::Finite(c(0.0, 0.0)), 0.5, 64).is_err());
    }

    #[test]
    fn log_primitive_real_segment() {
        let pts = [Point::Finite(c(0.0, 0.0)), Point::Infinity];
        let f = RationalOneForm::with_residues(&pts, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let v = path_integral(&f, &[c(1.0, 0.0), c(std::f64::consts::E, 0.0)], 0.1).unwrap();
        assert_relative_eq!(v.re, 1.0, epsilon = 1e-15);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn charts_agree() {
        let mut f = phi3_odd(0.3);
        f.poles[0].tail = Tail { coeffs: vec![c(0.3, 0.1), c(-0.2, 0.4)], scale: c(1e-3, 2e-3) };
        f.poles[3].tail = Tail { coeffs: vec![c(0.5, -0.1), c(0.1, 0.1)], scale: c(2e-3, -1e-3) };
        let z = c(0.7, 0.9);
        let g_z = f.eval(z);
        let g_r = f.eval_chart(Chart::Infinity, z.inv());
        // g(r)dr = f(z)dz with dz = −dr/r²
        assert!((g_r - g_z * (-(z * z))).norm() < 1e-13);
        let g_a = f.eval_chart(Chart::Affine(c(1.0, 0.0)), z - 1.0);
        assert!((g_a - g_z).norm() < 1e-13);
    }

    #[test]
    fn primitive_matches_quadrature() {
        let mut f = phi3_odd(0.5);
        f.poles[0].tail = Tail { coeffs: vec![c(0.3, 0.1), c(-0.2, 0.4)], scale: c(1e-2, 2e-2) };
        f.poles[3].tail = Tail { coeffs: vec![c(0.5, -0.1)], scale: c(2e-2, -1e-2) };
        let path = [c(2.0, 0.0), c(2.0, 1.0), c(-0.2, 1.0), c(-0.2, -0.3)];
        let exact = path_integral(&f, &path, 0.05).unwrap();
        let quad = path_integral_adaptive(&f, &path, 0.05).unwrap();
        assert!((exact - quad).norm() < 1e-11, "{exact} {quad}");
        // the infinity chart primitive along a segment near ∞
        let (r0, r1) = (c(0.05, 0.01), c(0.02, -0.04));
        let e = f.segment_integral(Chart::Infinity, r0, r1);
        let q = gauss_kronrod_segment(&|r| f.eval_chart(Chart::Infinity, r), r0, r1, 1e-13).unwrap();
        assert!((e - q).norm() < 1e-11, "{e} {q}");
    }

    #[test]
    fn regular_part_has_no_pole() {
        let f = phi3_odd(0.5);
        let idx = f.index_of(Point::Infinity).unwrap();
        let g0 = f.eval_regular(Chart::Infinity, c(1e-9, 0.0), idx);
        // Σ −R q at r = 0: −(1·1 + 1·a) with a = −1/3
        assert!((g0 - c(-(1.0 - 1.0 / 3.0), 0.0)).norm() < 1e-8);
    }

    #[test]
    fn functionals_on_double_pole() {
        // ψ = dz²/z² is the square of dz/z
        let pts = [Point::Finite(c(0.0, 0.0)), Point::Infinity];
        let f = RationalOneForm::with_residues(&pts, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let z0 = RationalOneForm::zero(&pts);
        let q = QuadraticDifferential::new([&f, &z0, &z0]);
        let plain = functional_l_component(&q, Weight::Plain, c(0.0, 0.0), 0.5).unwrap();
        let weighted = functional_l_component(&q, Weight::Z, c(0.0, 0.0), 0.5).unwrap();
        assert!(plain.norm() < 1e-13);
        assert!((weighted - 2.0 * PI * I).norm() < 1e-13);
        let closed = q.functional_simple(Weight::Z, c(0.0, 0.0)).unwrap();
        assert!((closed - 2.0 * PI * I).norm() < 1e-13);
    }

    #[test]
    fn segment_distance_clamps() {
        assert_relative_eq!(segment_distance(c(0.0, 0.0), c(1.0, 0.0), c(0.5, 2.0)), 2.0);
        assert_relative_eq!(segment_distance(c(0.0, 0.0), c(1.0, 0.0), c(3.0, 0.0)), 2.0);
    }
}
