//! The noded surface: a chain of 2n marked spheres glued at 2(2n−1) necks by
//! r·s = t with t = exp(−(u+iv)/x²), plus charts and a homology basis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{Chart, Point, C};
use crate::tolerances;

/// Slot of a marked point inside a sphere's point array.
pub const SLOT_ONE: usize = 0;
pub const SLOT_SECOND: usize = 1;
pub const SLOT_ZERO: usize = 2;
pub const SLOT_INF: usize = 3;

/// Height of the detour used by sphere paths between neck points.
pub const PATH_HEIGHT: f64 = 1.0;

/// What a marked point is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    End,
    Neck { k: usize, i: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub label: &'static str,
    pub point: Point,
    pub role: Role,
}

/// Sphere k (1-based) with its four marked points in slot order
/// [a_{k,1} or b_{k−1,1}, a_{k,2} or b_{k−1,2}, 0_k, ∞_k].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarkedSphere {
    pub index: usize,
    pub points: [MarkedPoint; 4],
}

impl MarkedSphere {
    fn new(n: usize, k: usize, second: C) -> Self {
        let odd = k % 2 == 1;
        let (l1, l2) = if odd { ("a1", "a2") } else { ("b1", "b2") };
        let odd_neck = if odd { k } else { k - 1 };
        let zero_role = if k == 1 || k == 2 * n {
            Role::End
        } else if k % 2 == 0 {
            Role::Neck { k, i: 1 }
        } else {
            Role::Neck { k: k - 1, i: 2 }
        };
        let inf_role = if k == 1 || k == 2 * n {
            Role::End
        } else if k % 2 == 0 {
            Role::Neck { k, i: 2 }
        } else {
            Role::Neck { k: k - 1, i: 1 }
        };
        MarkedSphere {
            index: k,
            points: [
                MarkedPoint { label: l1, point: Point::Finite(C::new(1.0, 0.0)), role: Role::Neck { k: odd_neck, i: 1 } },
                MarkedPoint { label: l2, point: Point::Finite(second), role: Role::Neck { k: odd_neck, i: 2 } },
                MarkedPoint { label: "0", point: Point::Finite(C::new(0.0, 0.0)), role: zero_role },
                MarkedPoint { label: "inf", point: Point::Infinity, role: inf_role },
            ],
        }
    }

    pub fn point_array(&self) -> [Point; 4] {
        [self.points[0].point, self.points[1].point, self.points[2].point, self.points[3].point]
    }
}

/// Seed data (u, v) of one neck.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeckParameter {
    pub k: usize,
    pub i: usize,
    pub u: f64,
    pub v: f64,
}

impl NeckParameter {
    /// t = exp(−(u+iv)/x²); closed at x = 0.
    pub fn state(&self, x: f64) -> NeckState {
        NeckState::from_uv(self.u, self.v, x)
    }
}

/// The gluing parameter of one neck. `log_t` fixes the branch of log t and is
/// `None` for a closed node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeckState {
    pub t: C,
    pub log_t: Option<C>,
}

impl NeckState {
    pub fn closed() -> Self {
        NeckState { t: C::new(0.0, 0.0), log_t: None }
    }

    pub fn from_uv(u: f64, v: f64, x: f64) -> Self {
        if x == 0.0 {
            return Self::closed();
        }
        let log_t = -C::new(u, v) / (x * x);
        NeckState { t: log_t.exp(), log_t: Some(log_t) }
    }

    /// An explicitly given t, with the principal branch of its logarithm.
    pub fn from_t(t: C) -> Self {
        if t == C::new(0.0, 0.0) {
            Self::closed()
        } else {
            NeckState { t, log_t: Some(t.ln()) }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.log_t.is_none()
    }

    /// Waist radius √|t|, computed from log t so it survives underflow of t.
    pub fn waist(&self) -> f64 {
        match self.log_t {
            Some(l) => (l.re * 0.5).exp(),
            None => 0.0,
        }
    }
}

/// One side of a neck: the sphere (0-based), the slot of the glued point and
/// the chart centered there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeckSide {
    pub sphere: usize,
    pub slot: usize,
    pub chart: Chart,
}

/// A neck of Σ_t with both sides resolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neck {
    pub k: usize,
    pub i: usize,
    pub state: NeckState,
    pub a: NeckSide,
    pub b: NeckSide,
}

/// Position of neck (k, i) in the flat neck list.
pub fn neck_index(k: usize, i: usize) -> usize {
    2 * (k - 1) + (i - 1)
}

/// The concrete Riemann surface Σ_t used by every evaluation: marked points of
/// each sphere and the state of each neck.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub n: usize,
    pub epsilon: f64,
    pub spheres: Vec<[Point; 4]>,
    pub necks: Vec<Neck>,
}

impl Surface {
    /// `seconds[m]` is the second point of sphere m+1; `states` follow
    /// [`neck_index`].
    pub fn new(n: usize, epsilon: f64, seconds: &[C], states: &[NeckState]) -> Self {
        assert_eq!(seconds.len(), 2 * n);
        assert_eq!(states.len(), 2 * (2 * n - 1));
        let spheres: Vec<[Point; 4]> = seconds
            .iter()
            .map(|s| [Point::Finite(C::new(1.0, 0.0)), Point::Finite(*s), Point::Finite(C::new(0.0, 0.0)), Point::Infinity])
            .collect();
        let mut necks = Vec::with_capacity(states.len());
        for k in 1..2 * n {
            for i in 1..=2 {
                let (a, b) = neck_sides(&spheres, k, i);
                necks.push(Neck { k, i, state: states[neck_index(k, i)], a, b });
            }
        }
        Surface { n, epsilon, spheres, necks }
    }

    pub fn neck(&self, k: usize, i: usize) -> &Neck {
        &self.necks[neck_index(k, i)]
    }

    pub fn is_closed(&self) -> bool {
        self.necks.iter().all(|n| n.state.is_closed())
    }

    /// The neck glued at (sphere, slot), if any, and whether it is the A side.
    pub fn neck_at(&self, sphere: usize, slot: usize) -> Option<(usize, bool)> {
        self.necks.iter().enumerate().find_map(|(idx, nk)| {
            if nk.a.sphere == sphere && nk.a.slot == slot {
                Some((idx, true))
            } else if nk.b.sphere == sphere && nk.b.slot == slot {
                Some((idx, false))
            } else {
                None
            }
        })
    }

    /// Smallest distance between finite marked points on any sphere.
    pub fn min_separation(&self) -> f64 {
        self.spheres.iter().map(|pts| min_separation(pts)).fold(f64::INFINITY, f64::min)
    }

    /// Largest modulus of a finite marked point.
    pub fn max_modulus(&self) -> f64 {
        self.spheres
            .iter()
            .flat_map(|pts| pts.iter().filter_map(|p| p.finite()).map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    /// The removed disks of radius ε must be disjoint and sit inside |z| < 1/ε.
    pub fn check_separation(&self) -> Result<()> {
        let d = self.min_separation();
        if d <= 2.0 * self.epsilon || self.max_modulus() * self.epsilon >= 0.5 {
            return Err(Error::SeparationViolation { epsilon: self.epsilon, distance: d });
        }
        Ok(())
    }

    pub fn check_necks(&self) -> Result<()> {
        let eps_sq = self.epsilon * self.epsilon;
        for nk in &self.necks {
            if let Some(l) = nk.state.log_t {
                let abs_t = l.re.exp();
                if !(abs_t < eps_sq) {
                    return Err(Error::NeckTooWide { k: nk.k, i: nk.i, abs_t, eps_sq });
                }
            }
        }
        Ok(())
    }

    /// s = t/r across neck (k, i).
    pub fn chart_transition(&self, k: usize, i: usize, r: C) -> Result<C> {
        let nk = self.neck(k, i);
        if nk.state.is_closed() || nk.state.t == C::new(0.0, 0.0) {
            return Err(Error::ClosedNode { k, i });
        }
        let abs_t = nk.state.t.norm();
        let m = r.norm();
        if !(m < self.epsilon && m > abs_t / self.epsilon) {
            return Err(Error::OutsideAnnulus { k, i, r: format!("{r}") });
        }
        Ok(nk.state.t / r)
    }

    /// z-plane polyline from `z0` to `z1` that rises by [`PATH_HEIGHT`], runs
    /// horizontally and drops back.
    pub fn sphere_path(z0: C, z1: C) -> Vec<C> {
        let h = C::new(0.0, PATH_HEIGHT);
        vec![z0, z0 + h, z1 + h, z1]
    }

    /// Start of a sphere path at a neck point: the point shifted by ε, or 1/ε
    /// for the point at ∞.
    pub fn path_anchor(&self, sphere: usize, slot: usize) -> C {
        match self.spheres[sphere][slot] {
            Point::Finite(p) => p + self.epsilon,
            Point::Infinity => C::new(1.0 / self.epsilon, 0.0),
        }
    }

    /// Sphere path from the anchor of `from_slot` to the anchor of `to_slot`.
    pub fn anchor_path(&self, sphere: usize, from_slot: usize, to_slot: usize) -> Vec<C> {
        Self::sphere_path(self.path_anchor(sphere, from_slot), self.path_anchor(sphere, to_slot))
    }

    /// The four segments of B_{k,1}: neck (k,1) from A to B, the path on the B
    /// sphere to neck (k,2), neck (k,2) back from B to A, the path on the A
    /// sphere back to the start.
    pub fn b_cycle(&self, k: usize) -> Cycle {
        let n1 = self.neck(k, 1);
        let n2 = self.neck(k, 2);
        let segments = vec![
            CycleSegment::NeckCrossing { k, i: 1, from_a: true },
            CycleSegment::Polyline { sphere: n1.b.sphere, points: self.anchor_path(n1.b.sphere, n1.b.slot, n2.b.slot) },
            CycleSegment::NeckCrossing { k, i: 2, from_a: false },
            CycleSegment::Polyline { sphere: n1.a.sphere, points: self.anchor_path(n1.a.sphere, n2.a.slot, n1.a.slot) },
        ];
        Cycle { kind: CycleKind::B, k, i: 1, segments }
    }

    /// A_{k,1}: the ε-circle around the A side of neck (k, 1).
    pub fn a_cycle(&self, k: usize) -> Cycle {
        let nk = self.neck(k, 1);
        Cycle {
            kind: CycleKind::A,
            k,
            i: 1,
            segments: vec![CycleSegment::Circle { sphere: nk.a.sphere, slot: nk.a.slot, radius: self.epsilon }],
        }
    }

    /// Basis {A_{k,1}, B_{k,1}} followed by the four end circles.
    pub fn homology_basis(&self) -> Vec<Cycle> {
        let mut out = Vec::new();
        for k in 1..2 * self.n {
            out.push(self.a_cycle(k));
            out.push(self.b_cycle(k));
        }
        for (sphere, slot) in self.ends() {
            out.push(Cycle {
                kind: CycleKind::PunctureCircle,
                k: sphere + 1,
                i: slot,
                segments: vec![CycleSegment::Circle { sphere, slot, radius: self.epsilon }],
            });
        }
        out
    }

    /// The four ends 0₁, ∞₁, 0_{2n}, ∞_{2n} as (sphere, slot).
    pub fn ends(&self) -> [(usize, usize); 4] {
        let last = 2 * self.n - 1;
        [(0, SLOT_ZERO), (0, SLOT_INF), (last, SLOT_ZERO), (last, SLOT_INF)]
    }

    /// First Betti number of the node graph: genus of Σ_t.
    pub fn genus(&self) -> usize {
        self.necks.len() + 1 - self.spheres.len()
    }
}

fn neck_sides(spheres: &[[Point; 4]], k: usize, i: usize) -> (NeckSide, NeckSide) {
    let sa = k - 1;
    let sb = k;
    let side = |sphere: usize, slot: usize| NeckSide { sphere, slot, chart: Chart::centered_at(spheres[sphere][slot]) };
    if k % 2 == 1 {
        (side(sa, i - 1), side(sb, i - 1))
    } else if i == 1 {
        (side(sa, SLOT_ZERO), side(sb, SLOT_INF))
    } else {
        (side(sa, SLOT_INF), side(sb, SLOT_ZERO))
    }
}

fn min_separation(pts: &[Point; 4]) -> f64 {
    let finite: Vec<C> = pts.iter().filter_map(|p| p.finite()).collect();
    let mut d = f64::INFINITY;
    for a in 0..finite.len() {
        for b in a + 1..finite.len() {
            d = d.min((finite[a] - finite[b]).norm());
        }
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleKind {
    A,
    B,
    PunctureCircle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CycleSegment {
    /// Positively oriented circle of the given radius in the chart of the slot.
    Circle { sphere: usize, slot: usize, radius: f64 },
    /// z-plane polyline inside one sphere.
    Polyline { sphere: usize, points: Vec<C> },
    /// Passage through a neck from |r| = ε to |s| = ε (or back), winding fixed
    /// by the branch of log t.
    NeckCrossing { k: usize, i: usize, from_a: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub kind: CycleKind,
    pub k: usize,
    pub i: usize,
    pub segments: Vec<CycleSegment>,
}

/// Initial positions a⁰_{2k−1,2} = (T₂−1)/(T₂+1) and b⁰ = 1/a⁰.
pub fn initial_positions(t2: f64) -> (f64, f64) {
    ((t2 - 1.0) / (t2 + 1.0), (t2 + 1.0) / (t2 - 1.0))
}

/// Checks the admissible range of T₂⁰.
pub fn check_angle(n: usize, t2: f64) -> Result<()> {
    let ok = t2.is_finite() && t2 > -1.0 && t2 < 1.0 && (n == 1 || t2 != 0.0);
    if ok {
        Ok(())
    } else if n == 1 {
        Err(Error::InvalidAngle { t2, range: "-1 < T2 < 1" })
    } else {
        Err(Error::InvalidAngle { t2, range: "0 < |T2| < 1 (T2 = 0 only for n = 1)" })
    }
}

/// Inputs of the noded surface: the chain, its seed layout, ε and neck seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodedSurfaceConfig {
    pub n: usize,
    pub t2_0: f64,
    pub x: f64,
    pub epsilon: f64,
    pub spheres: Vec<MarkedSphere>,
    pub necks: Vec<NeckParameter>,
}

impl NodedSurfaceConfig {
    pub fn genus(&self) -> usize {
        2 * self.n - 1
    }

    pub fn end_count(&self) -> usize {
        4
    }

    pub fn neck(&self, k: usize, i: usize) -> &NeckParameter {
        &self.necks[neck_index(k, i)]
    }

    pub fn seconds(&self) -> Vec<C> {
        self.spheres.iter().map(|s| s.points[SLOT_SECOND].point.finite().unwrap()).collect()
    }

    /// Σ_t at the configured x with the seed layout.
    pub fn surface(&self) -> Surface {
        let states: Vec<NeckState> = self.necks.iter().map(|nk| nk.state(self.x)).collect();
        Surface::new(self.n, self.epsilon, &self.seconds(), &states)
    }

    /// Same inputs at a different x.
    pub fn at_x(&self, x: f64) -> NodedSurfaceConfig {
        NodedSurfaceConfig { x, ..self.clone() }
    }
}

/// Builds and validates a configuration.
///
/// `neck_seed` lists (k, i, u, v). Missing necks get u = 1, v = 0; a missing
/// i = 2 entry is completed from i = 1 by u_{k,2} = u_{k,1}, v_{k,2} = −v_{k,1},
/// and an explicit i = 2 entry must agree with that relation.
pub fn build_config(n: usize, t2_0: f64, x: f64, neck_seed: &[NeckParameter], epsilon: Option<f64>) -> Result<NodedSurfaceConfig> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    check_angle(n, t2_0)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidConfig(format!("x must be a finite nonnegative number, got {x}")));
    }
    let count = 2 * (2 * n - 1);
    let mut slots: Vec<Option<NeckParameter>> = vec![None; count];
    for seed in neck_seed {
        if seed.k == 0 || seed.k >= 2 * n || !(seed.i == 1 || seed.i == 2) {
            return Err(Error::InvalidConfig(format!("no neck ({}, {}) when n = {n}", seed.k, seed.i)));
        }
        if !(seed.u > 0.0 && seed.u.is_finite() && seed.v.is_finite()) {
            return Err(Error::InvalidConfig(format!("neck ({}, {}) needs u > 0 and finite v", seed.k, seed.i)));
        }
        let idx = neck_index(seed.k, seed.i);
        if slots[idx].is_some() {
            return Err(Error::InvalidConfig(format!("neck ({}, {}) given twice", seed.k, seed.i)));
        }
        slots[idx] = Some(*seed);
    }
    let mut necks = Vec::with_capacity(count);
    for k in 1..2 * n {
        let first = slots[neck_index(k, 1)];
        let second = slots[neck_index(k, 2)];
        let (p1, p2) = match (first, second) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (a, NeckParameter { k, i: 2, u: a.u, v: -a.v }),
            (None, Some(b)) => (NeckParameter { k, i: 1, u: b.u, v: -b.v }, b),
            (None, None) => (NeckParameter { k, i: 1, u: 1.0, v: 0.0 }, NeckParameter { k, i: 2, u: 1.0, v: 0.0 }),
        };
        if (p1.u - p2.u).abs() > 1e-12 * p1.u.max(1.0) || (p1.v + p2.v).abs() > 1e-12 * p1.v.abs().max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "neck seeds of ({k},1) and ({k},2) must satisfy u2 = u1 and v2 = -v1"
            )));
        }
        necks.push(p1);
        necks.push(p2);
    }
    let (a0, b0) = initial_positions(t2_0);
    let spheres: Vec<MarkedSphere> = (1..=2 * n)
        .map(|k| MarkedSphere::new(n, k, C::new(if k % 2 == 1 { a0 } else { b0 }, 0.0)))
        .collect();
    let seconds: Vec<C> = spheres.iter().map(|s| s.points[SLOT_SECOND].point.finite().unwrap()).collect();
    let closed = vec![NeckState::closed(); count];
    let probe = Surface::new(n, 1.0, &seconds, &closed);
    let min_dist = probe.min_separation();
    let epsilon = match epsilon {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(Error::InvalidConfig(format!("epsilon must be positive, got {e}"))),
        None => tolerances::EPSILON_FRACTION * min_dist,
    };
    let config = NodedSurfaceConfig { n, t2_0, x, epsilon, spheres, necks };
    let surface = config.surface();
    surface.check_separation()?;
    surface.check_necks()?;
    Ok(config)
}
