//! Integration of f = Re∫(φ₁, φ₂, φ₃) over a triangulated Σ_t, periodic OBJ
//! meshes, translation measurements and regularity spot checks.

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use delaunator::{triangulate, Point as DPoint};
use serde::{Deserialize, Serialize};

use crate::differentials::neck_regularized_integral;
use crate::error::{Error, Result};
use crate::exec::{map_range, map_slice, Execution};
use crate::forms::{path_integral, segment_distance, Chart, Point, RationalOneForm, C, I};
use crate::surface_model::{Surface, SLOT_INF, SLOT_ONE, SLOT_SECOND, SLOT_ZERO};
use crate::tolerances;
use crate::weierstrass::{scherk_limit, ParameterVector, WeierstrassTriple};

/// Component whose zeros are counted: on every sphere of the limit it has
/// simple poles at all four marked points, hence two zeros.
pub const ZERO_COUNT_COMPONENT: usize = 2;

/// Zeros of [`ZERO_COUNT_COMPONENT`] expected in each Ω_{k,δ}.
pub const EXPECTED_ZEROS_PER_SPHERE: i64 = 2;

/// Coordinate patch of a mesh vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Patch {
    /// Sphere m (0-based) in its z coordinate.
    Sphere(usize),
    /// One half of a neck (neck order) in the chart of that side.
    Neck { neck: usize, a_side: bool },
}

/// Where a mesh vertex comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexSource {
    pub patch: Patch,
    pub coord: C,
}

/// A vertex that is the lattice translate of another one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identification {
    pub vertex: usize,
    pub original: usize,
    /// Coefficients of the two lattice generators.
    pub shift: [i64; 2],
}

/// A triangulated piece of the surface in R³.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub sources: Vec<VertexSource>,
    pub identifications: Vec<Identification>,
    /// Generators (0, 2π, 0) and (2πT₁, 2πT₂, 0).
    pub lattice: [[f64; 3]; 2],
}

/// Grid resolution of the domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    /// Points on every ring.
    pub angular: usize,
    /// Cap on the number of rings in each half of a neck.
    pub max_neck_rings: usize,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions { angular: 48, max_neck_rings: 120, exec: Execution::default() }
    }
}

/// Base point of the integration: f vanishes at z on `sphere`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basepoint {
    pub sphere: usize,
    pub z: C,
}

impl Default for Basepoint {
    fn default() -> Self {
        Basepoint { sphere: 0, z: I }
    }
}

/// Change of f along one cycle of the mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleClosure {
    pub label: String,
    pub closure: [f64; 3],
    pub expected: [f64; 3],
    pub lattice_coefficients: [i64; 2],
    pub defect: f64,
}

/// Period closure of an integrated mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub cycles: Vec<CycleClosure>,
    pub max_defect: f64,
    /// Largest non-tree edge defect after lattice reduction.
    pub audit_defect: f64,
    pub non_tree_edges: usize,
}

// ---------------------------------------------------------------------------
// Lattice and mesh utilities

/// Writes d = m₁L₁ + m₂L₂ + rest with integer m; returns (m, rest).
pub fn reduce_mod_lattice(d: [f64; 3], lattice: &[[f64; 3]; 2]) -> ([i64; 2], [f64; 3]) {
    let [l1, l2] = lattice;
    let det = l1[0] * l2[1] - l1[1] * l2[0];
    let m1 = ((d[0] * l2[1] - d[1] * l2[0]) / det).round();
    let m2 = ((l1[0] * d[1] - l1[1] * d[0]) / det).round();
    let rest = [d[0] - m1 * l1[0] - m2 * l2[0], d[1] - m1 * l1[1] - m2 * l2[1], d[2] - m1 * l1[2] - m2 * l2[2]];
    ([m1 as i64, m2 as i64], rest)
}

fn lattice_vector(lattice: &[[f64; 3]; 2], m: [i64; 2]) -> [f64; 3] {
    let (a, b) = (m[0] as f64, m[1] as f64);
    [a * lattice[0][0] + b * lattice[1][0], a * lattice[0][1] + b * lattice[1][1], a * lattice[0][2] + b * lattice[1][2]]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn triangle_area(v: &[[f64; 3]], t: &[usize; 3]) -> f64 {
    0.5 * norm(cross(sub(v[t[1]], v[t[0]]), sub(v[t[2]], v[t[0]])))
}

impl SurfaceMesh {
    /// A mesh without chart data, e.g. for export of external geometry.
    pub fn from_parts(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>, lattice: [[f64; 3]; 2]) -> Self {
        SurfaceMesh { vertices, triangles, sources: Vec::new(), identifications: Vec::new(), lattice }
    }

    /// Non-empty, valid indices, every triangle above 1e−12 of the mean area.
    pub fn validate(&self) -> Result<()> {
        if self.triangles.is_empty() || self.vertices.len() < 3 {
            return Err(Error::DegenerateMesh(format!(
                "{} vertices and {} triangles",
                self.vertices.len(),
                self.triangles.len()
            )));
        }
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i >= self.vertices.len())) {
            return Err(Error::DegenerateMesh(format!("triangle {t:?} has an index out of range")));
        }
        if self.vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::DegenerateMesh("non-finite vertex".into()));
        }
        let areas: Vec<f64> = self.triangles.iter().map(|t| triangle_area(&self.vertices, t)).collect();
        let mean = areas.iter().sum::<f64>() / areas.len() as f64;
        if let Some((i, a)) = areas.iter().enumerate().find(|(_, a)| !(**a > 1e-12 * mean)) {
            return Err(Error::DegenerateMesh(format!("triangle {i} has area {a:e} against mean {mean:e}")));
        }
        Ok(())
    }

    /// `a × b` copies translated by i·L₁ + j·L₂.
    pub fn replicate(&self, a: usize, b: usize) -> SurfaceMesh {
        let nv = self.vertices.len();
        let mut out = SurfaceMesh {
            vertices: Vec::with_capacity(nv * a * b),
            triangles: Vec::with_capacity(self.triangles.len() * a * b),
            sources: Vec::new(),
            identifications: Vec::new(),
            lattice: self.lattice,
        };
        for i in 0..a {
            for j in 0..b {
                let shift = lattice_vector(&self.lattice, [i as i64, j as i64]);
                let base = out.vertices.len();
                out.vertices.extend(self.vertices.iter().map(|v| add(*v, shift)));
                out.triangles.extend(self.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
                out.sources.extend_from_slice(&self.sources);
            }
        }
        out
    }

    /// Wavefront OBJ: "v x y z" lines then 1-based "f i j k" lines.
    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Vertices with their duplicates for seam triangles removed.
    pub fn base_vertex_count(&self) -> usize {
        self.vertices.len() - self.identifications.len()
    }
}

/// Writes `mesh` replicated `replicate.0 × replicate.1` times to `path`.
pub fn export_obj(mesh: &SurfaceMesh, path: &Path, replicate: (usize, usize)) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let w = std::io::BufWriter::new(file);
    if replicate == (1, 1) {
        mesh.write_obj(w)
    } else {
        mesh.replicate(replicate.0, replicate.1).write_obj(w)
    }
}

/// Symmetric Hausdorff distance between two point sets.
pub fn hausdorff(a: &[[f64; 3]], b: &[[f64; 3]], exec: Execution) -> f64 {
    let one_sided = |p: &[[f64; 3]], q: &[[f64; 3]]| -> f64 {
        map_slice(exec, p, |x| q.iter().map(|y| norm(sub(*x, *y))).fold(f64::INFINITY, f64::min))
            .into_iter()
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

// ---------------------------------------------------------------------------
// Domain

/// A hole of a sphere domain: the circle |r| = radius in `chart`, sampled at
/// the given chart angles.
#[derive(Clone, Debug)]
struct Hole {
    chart: Chart,
    radius: f64,
    angles: Vec<f64>,
    neck: Option<(usize, bool)>,
}

#[derive(Clone, Debug, Default)]
struct DomainVertex {
    reps: Vec<(Patch, C)>,
}

/// Triangulated parameter domain: spheres and neck annuli glued along rings.
#[derive(Clone, Debug, Default)]
struct Domain {
    vertices: Vec<DomainVertex>,
    triangles: Vec<[usize; 3]>,
    /// Hole ring vertex ids per sphere and slot, in angle order.
    rings: Vec<[Vec<usize>; 4]>,
    /// Per neck: vertex ids of rings l = 0..=2L.
    necks: Vec<Option<Vec<Vec<usize>>>>,
    /// (sphere, chart) of the A and B side of every neck.
    neck_sides: Vec<[(usize, Chart); 2]>,
}

impl Domain {
    fn push(&mut self, reps: Vec<(Patch, C)>) -> usize {
        self.vertices.push(DomainVertex { reps });
        self.vertices.len() - 1
    }

    fn patch_chart(&self, patch: Patch) -> (usize, Chart) {
        match patch {
            Patch::Sphere(m) => (m, Chart::Affine(C::new(0.0, 0.0))),
            Patch::Neck { neck, a_side } => self.neck_sides[neck][if a_side { 0 } else { 1 }],
        }
    }

    fn common_patch(&self, vs: &[usize]) -> Option<Patch> {
        self.vertices[vs[0]]
            .reps
            .iter()
            .map(|r| r.0)
            .find(|p| vs[1..].iter().all(|&v| self.vertices[v].reps.iter().any(|r| r.0 == *p)))
    }

    fn coord(&self, v: usize, patch: Patch) -> C {
        self.vertices[v].reps.iter().find(|r| r.0 == patch).map(|r| r.1).expect("vertex lies in patch")
    }

    fn on_sphere(&self, v: usize, m: usize) -> bool {
        self.vertices[v].reps.iter().any(|r| r.0 == Patch::Sphere(m))
    }
}

fn uniform_angles(m: usize, phase: f64) -> Vec<f64> {
    (0..m).map(|j| phase + 2.0 * PI * j as f64 / m as f64).collect()
}

/// Points of a sphere domain {ε ≤ |z| ≤ 1/ε} minus the disks at 1 and the
/// second point: the four hole rings, polar rings around 1 and the second
/// point, and a log-polar background around 0. Returns z and the (slot, j)
/// of hole-ring points.
fn sphere_points(points: &[Point; 4], holes: &[Hole; 4], angular: usize) -> Result<(Vec<C>, Vec<Option<(usize, usize)>>)> {
    let finite: Vec<C> = points.iter().filter_map(|p| p.finite()).collect();
    let mut dmin = f64::INFINITY;
    for i in 0..finite.len() {
        for j in i + 1..finite.len() {
            dmin = dmin.min((finite[i] - finite[j]).norm());
        }
    }
    let eps = holes.iter().map(|h| h.radius).fold(0.0, f64::max);
    let reach = 0.4 * dmin;
    let max_mod = finite.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(reach > 1.5 * eps) || (max_mod + reach) * eps >= 0.5 {
        return Err(Error::DomainTouchesPuncture(format!("hole radius {eps} against marked point distance {dmin}")));
    }
    let step = 2.0 * PI / angular as f64;
    let mut zs = Vec::new();
    let mut tags = Vec::new();
    for (slot, hole) in holes.iter().enumerate() {
        for (j, th) in hole.angles.iter().enumerate() {
            zs.push(hole.chart.to_z(C::from_polar(hole.radius, *th)));
            tags.push(Some((slot, j)));
        }
    }
    let local = [SLOT_ONE, SLOT_SECOND];
    for &slot in &local {
        let p = points[slot].finite().ok_or(Error::UnknownPoint)?;
        let h = &holes[slot];
        let rings = ((reach / h.radius).ln() / step).ceil().max(1.0) as usize;
        for l in 1..=rings {
            let rad = h.radius * (reach / h.radius).powf(l as f64 / rings as f64);
            let phase = h.angles.first().copied().unwrap_or(0.0) + 0.5 * step * l as f64;
            for th in uniform_angles(angular, phase) {
                zs.push(p + C::from_polar(rad, th));
                tags.push(None);
            }
        }
    }
    let inner = holes[SLOT_ZERO].radius;
    let outer = 1.0 / holes[SLOT_INF].radius;
    let rings = ((outer / inner).ln() / step).ceil().max(2.0) as usize;
    let centers: Vec<C> = local.iter().filter_map(|&s| points[s].finite()).collect();
    for l in 1..rings {
        let rad = inner * (outer / inner).powf(l as f64 / rings as f64);
        for th in uniform_angles(angular, 0.5 * step * l as f64) {
            let z = C::from_polar(rad, th);
            if centers.iter().all(|c| (z - c).norm() > 1.15 * reach) {
                zs.push(z);
                tags.push(None);
            }
        }
    }
    Ok((zs, tags))
}

/// Delaunay triangles of the sphere domain, counter-clockwise in z, with the
/// hole interiors removed.
fn sphere_triangles(zs: &[C], points: &[Point; 4], holes: &[Hole; 4], angular: usize) -> Vec<[usize; 3]> {
    let pts: Vec<DPoint> = zs.iter().map(|z| DPoint { x: z.re, y: z.im }).collect();
    let tri = triangulate(&pts);
    let cut: Vec<(C, f64)> = [SLOT_ONE, SLOT_SECOND, SLOT_ZERO]
        .iter()
        .filter_map(|&s| points[s].finite().map(|p| (p, holes[s].radius * (PI / angular as f64).cos() * (1.0 - 1e-9))))
        .collect();
    let scale = holes.iter().map(|h| h.radius).fold(f64::INFINITY, f64::min).powi(2);
    let mut out = Vec::with_capacity(tri.triangles.len() / 3);
    for t in tri.triangles.chunks_exact(3) {
        let (a, b, c) = (zs[t[0]], zs[t[1]], zs[t[2]]);
        let area = 0.5 * ((b - a).conj() * (c - a)).im;
        if area.abs() < 1e-12 * scale {
            continue;
        }
        let crosses = cut.iter().any(|(p, r)| {
            segment_distance(a, b, *p) < *r || segment_distance(b, c, *p) < *r || segment_distance(c, a, *p) < *r
        });
        if crosses {
            continue;
        }
        out.push(if area > 0.0 { [t[0], t[1], t[2]] } else { [t[0], t[2], t[1]] });
    }
    out
}

/// Adds the triangulated domain of sphere m to `domain`.
fn add_sphere(domain: &mut Domain, m: usize, points: &[Point; 4], holes: &[Hole; 4], angular: usize) -> Result<()> {
    let (zs, tags) = sphere_points(points, holes, angular)?;
    let tris = sphere_triangles(&zs, points, holes, angular);
    let mut ids = Vec::with_capacity(zs.len());
    let mut rings: [Vec<usize>; 4] = Default::default();
    for (z, tag) in zs.iter().zip(&tags) {
        let mut reps = vec![(Patch::Sphere(m), *z)];
        if let Some((slot, j)) = tag {
            let h = &holes[*slot];
            if let Some((neck, a_side)) = h.neck {
                reps.push((Patch::Neck { neck, a_side }, C::from_polar(h.radius, h.angles[*j])));
            }
        }
        let id = domain.push(reps);
        if let Some((slot, _)) = tag {
            rings[*slot].push(id);
        }
        ids.push(id);
    }
    domain.triangles.extend(tris.iter().map(|t| [ids[t[0]], ids[t[1]], ids[t[2]]]));
    domain.rings[m] = rings;
    Ok(())
}

/// Hole rings, background and neck annuli of Σ_t with holes of radius ε.
fn surface_domain(surface: &Surface, opts: &MeshOptions) -> Result<Domain> {
    let m_ang = opts.angular.max(8);
    let eps = surface.epsilon;
    let mut domain = Domain {
        rings: vec![Default::default(); surface.spheres.len()],
        necks: vec![None; surface.necks.len()],
        neck_sides: surface.necks.iter().map(|nk| [(nk.a.sphere, nk.a.chart), (nk.b.sphere, nk.b.chart)]).collect(),
        ..Default::default()
    };
    let theta = uniform_angles(m_ang, 0.0);
    for (m, pts) in surface.spheres.iter().enumerate() {
        let holes: [Hole; 4] = std::array::from_fn(|slot| {
            let chart = Chart::centered_at(pts[slot]);
            match surface.neck_at(m, slot) {
                Some((idx, a_side)) if !surface.necks[idx].state.is_closed() => {
                    let arg_t = surface.necks[idx].state.log_t.map(|l| l.im).unwrap_or(0.0);
                    let angles = if a_side { theta.clone() } else { theta.iter().map(|th| arg_t - th).collect() };
                    Hole { chart, radius: eps, angles, neck: Some((idx, a_side)) }
                }
                _ => Hole { chart, radius: eps, angles: theta.clone(), neck: None },
            }
        });
        add_sphere(&mut domain, m, pts, &holes, m_ang)?;
    }
    for (idx, nk) in surface.necks.iter().enumerate() {
        let Some(log_t) = nk.state.log_t else { continue };
        let ln_eps = eps.ln();
        let ln_waist = 0.5 * log_t.re;
        if !(ln_waist < ln_eps) {
            return Err(Error::NeckTooWide { k: nk.k, i: nk.i, abs_t: log_t.re.exp(), eps_sq: eps * eps });
        }
        let half = (((ln_eps - ln_waist) / (2.0 * PI / m_ang as f64)).ceil() as usize).clamp(1, opts.max_neck_rings.max(1));
        let ring_a = domain.rings[nk.a.sphere][nk.a.slot].clone();
        let ring_b = domain.rings[nk.b.sphere][nk.b.slot].clone();
        let pa = Patch::Neck { neck: idx, a_side: true };
        let pb = Patch::Neck { neck: idx, a_side: false };
        let mut grid = vec![ring_a];
        for l in 1..2 * half {
            let ring: Vec<usize> = theta
                .iter()
                .map(|th| {
                    let la = (l as f64 / half as f64).min(1.0);
                    let lb = ((2 * half - l) as f64 / half as f64).min(1.0);
                    let r = C::from_polar((ln_eps + la * (ln_waist - ln_eps)).exp(), *th);
                    let s = C::from_polar((ln_eps + lb * (ln_waist - ln_eps)).exp(), log_t.im - th);
                    let reps = match l.cmp(&half) {
                        std::cmp::Ordering::Less => vec![(pa, r)],
                        std::cmp::Ordering::Equal => vec![(pa, r), (pb, s)],
                        std::cmp::Ordering::Greater => vec![(pb, s)],
                    };
                    domain.push(reps)
                })
                .collect();
            grid.push(ring);
        }
        grid.push(ring_b);
        for l in 0..2 * half {
            for j in 0..m_ang {
                let j1 = (j + 1) % m_ang;
                let quad = [grid[l][j], grid[l + 1][j], grid[l + 1][j1], grid[l][j1]];
                for t in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
                    let tri = orient(&domain, t)?;
                    domain.triangles.push(tri);
                }
            }
        }
        domain.necks[idx] = Some(grid);
    }
    Ok(domain)
}

/// Counter-clockwise order in a chart shared by the three vertices.
fn orient(domain: &Domain, t: [usize; 3]) -> Result<[usize; 3]> {
    let patch = domain.common_patch(&t).ok_or_else(|| Error::DegenerateMesh(format!("triangle {t:?} spans no common chart")))?;
    let c: Vec<C> = t.iter().map(|&v| domain.coord(v, patch)).collect();
    let area = ((c[1] - c[0]).conj() * (c[2] - c[0])).im;
    Ok(if area >= 0.0 { t } else { [t[0], t[2], t[1]] })
}

/// Single sphere with all four holes of radius `radius` left open.
fn sphere_domain(points: &[Point; 4], radius: f64, opts: &MeshOptions) -> Result<Domain> {
    let m_ang = opts.angular.max(8);
    let mut domain = Domain { rings: vec![Default::default()], ..Default::default() };
    let holes: [Hole; 4] = std::array::from_fn(|slot| Hole {
        chart: Chart::centered_at(points[slot]),
        radius,
        angles: uniform_angles(m_ang, 0.0),
        neck: None,
    });
    add_sphere(&mut domain, 0, points, &holes, m_ang)?;
    Ok(domain)
}

// ---------------------------------------------------------------------------
// Integration

struct Graph {
    values: Vec<[f64; 3]>,
    index: HashMap<(usize, usize), usize>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Re∫ from u to v along the shared edge.
    fn value(&self, u: usize, v: usize) -> [f64; 3] {
        let e = self.index[&(u.min(v), u.max(v))];
        let val = self.values[e];
        if u < v {
            val
        } else {
            [-val[0], -val[1], -val[2]]
        }
    }

    fn path_value(&self, path: &[usize]) -> [f64; 3] {
        path.windows(2).fold([0.0; 3], |acc, w| add(acc, self.value(w[0], w[1])))
    }

    fn bfs_path(&self, from: usize, to: usize, allowed: impl Fn(usize) -> bool) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.adj.len()];
        prev[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for &(v, _) in &self.adj[u] {
                if prev[v] == usize::MAX && allowed(v) {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        None
    }
}

fn build_graph(domain: &Domain, forms: &[[&RationalOneForm; 3]], exec: Execution) -> Result<Graph> {
    let mut set = HashSet::new();
    for t in &domain.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            set.insert((a.min(b), a.max(b)));
        }
    }
    let mut edges: Vec<(usize, usize)> = set.into_iter().collect();
    edges.sort_unstable();
    let values = map_slice(exec, &edges, |&(u, v)| {
        let patch = domain
            .common_patch(&[u, v])
            .ok_or_else(|| Error::DegenerateMesh(format!("edge ({u}, {v}) spans no common chart")))?;
        let (m, chart) = domain.patch_chart(patch);
        let (r0, r1) = (domain.coord(u, patch), domain.coord(v, patch));
        let f = forms[m];
        Ok([
            f[0].segment_integral(chart, r0, r1).re,
            f[1].segment_integral(chart, r0, r1).re,
            f[2].segment_integral(chart, r0, r1).re,
        ])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut adj = vec![Vec::new(); domain.vertices.len()];
    let mut index = HashMap::with_capacity(edges.len());
    for (e, &(u, v)) in edges.iter().enumerate() {
        adj[u].push((v, e));
        adj[v].push((u, e));
        index.insert((u, v), e);
    }
    Ok(Graph { values, index, adj })
}

struct Integration {
    mesh: SurfaceMesh,
    graph: Graph,
    audit_defect: f64,
    non_tree_edges: usize,
}

/// Spanning-tree integration from the lowest vertex of every component, the
/// non-tree audit, and seam duplication of triangles.
fn integrate_domain(
    domain: &Domain,
    forms: &[[&RationalOneForm; 3]],
    lattice: [[f64; 3]; 2],
    basepoint: Basepoint,
    exec: Execution,
) -> Result<Integration> {
    let graph = build_graph(domain, forms, exec)?;
    let nv = domain.vertices.len();
    let mut pos = vec![[f64::NAN; 3]; nv];
    let mut tree_edge = vec![false; graph.values.len()];
    let mut component = vec![usize::MAX; nv];
    let mut used = vec![false; nv];
    for t in &domain.triangles {
        for &v in t {
            used[v] = true;
        }
    }
    let mut comps = 0;
    for root in 0..nv {
        if component[root] != usize::MAX || !used[root] {
            continue;
        }
        pos[root] = [0.0; 3];
        component[root] = comps;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, e) in &graph.adj[u] {
                if component[v] == usize::MAX {
                    component[v] = comps;
                    tree_edge[e] = true;
                    pos[v] = add(pos[u], graph.value(u, v));
                    queue.push_back(v);
                }
            }
        }
        comps += 1;
    }
    // f vanishes at the base point
    let base_vertex = (0..nv)
        .filter(|&v| used[v] && domain.on_sphere(v, basepoint.sphere))
        .min_by(|&a, &b| {
            let da = (domain.coord(a, Patch::Sphere(basepoint.sphere)) - basepoint.z).norm();
            let db = (domain.coord(b, Patch::Sphere(basepoint.sphere)) - basepoint.z).norm();
            da.total_cmp(&db)
        })
        .ok_or_else(|| Error::DegenerateMesh(format!("no vertex on sphere {}", basepoint.sphere + 1)))?;
    let zb = domain.coord(base_vertex, Patch::Sphere(basepoint.sphere));
    let f = forms[basepoint.sphere];
    let seg = [zb, basepoint.z];
    let tail = [path_integral(f[0], &seg, 0.0)?.re, path_integral(f[1], &seg, 0.0)?.re, path_integral(f[2], &seg, 0.0)?.re];
    let offset = add(pos[base_vertex], tail);
    let base_comp = component[base_vertex];
    for v in 0..nv {
        if component[v] == base_comp {
            pos[v] = sub(pos[v], offset);
        }
    }
    let mut audit: f64 = 0.0;
    let mut non_tree = 0;
    for (&(u, v), &e) in &graph.index {
        if tree_edge[e] {
            continue;
        }
        non_tree += 1;
        let d = sub(add(pos[u], graph.values[e]), pos[v]);
        let (_, rest) = reduce_mod_lattice(d, &lattice);
        audit = audit.max(norm(rest));
    }
    if !(audit <= tolerances::CYCLE_DEFECT_TOL) {
        return Err(Error::PeriodNotClosed { defect: audit, tolerance: tolerances::CYCLE_DEFECT_TOL });
    }
    // triangles: keep the lowest vertex, translate the others where a seam cuts
    let mut remap: Vec<usize> = vec![usize::MAX; nv];
    let mut vertices = Vec::new();
    let mut sources = Vec::new();
    for v in 0..nv {
        if used[v] {
            remap[v] = vertices.len();
            vertices.push(pos[v]);
            let (patch, coord) = domain.vertices[v].reps[0];
            sources.push(VertexSource { patch, coord });
        }
    }
    let mut copies: HashMap<(usize, [i64; 2]), usize> = HashMap::new();
    let mut identifications = Vec::new();
    let mut triangles = Vec::with_capacity(domain.triangles.len());
    for t in &domain.triangles {
        let base = *t.iter().min().expect("three vertices");
        let mut out = [0usize; 3];
        for (slot, &v) in t.iter().enumerate() {
            if v == base {
                out[slot] = remap[v];
                continue;
            }
            let d = sub(add(pos[base], graph.value(base, v)), pos[v]);
            let (m, _) = reduce_mod_lattice(d, &lattice);
            out[slot] = if m == [0, 0] {
                remap[v]
            } else {
                *copies.entry((v, m)).or_insert_with(|| {
                    vertices.push(add(pos[v], lattice_vector(&lattice, m)));
                    sources.push(sources[remap[v]]);
                    identifications.push(Identification { vertex: vertices.len() - 1, original: remap[v], shift: m });
                    vertices.len() - 1
                })
            };
        }
        triangles.push(out);
    }
    let mesh = SurfaceMesh { vertices, triangles, sources, identifications, lattice };
    Ok(Integration { mesh, graph, audit_defect: audit, non_tree_edges: non_tree })
}

fn triple_forms(triple: &WeierstrassTriple) -> Vec<[&RationalOneForm; 3]> {
    (0..triple.surface.spheres.len()).map(|m| triple.sphere(m)).collect()
}

/// Sum of edge values around a hole ring in angle order.
fn ring_closure(graph: &Graph, ring: &[usize], reverse: bool) -> [f64; 3] {
    let mut cyc: Vec<usize> = ring.to_vec();
    if reverse {
        cyc.reverse();
    }
    cyc.push(cyc[0]);
    graph.path_value(&cyc)
}

/// f = Re∫(φ₁, φ₂, φ₃) on the whole triangulated Σ_t, with A- and B-cycle
/// closures. On a noded surface every sphere is its own component.
pub fn integrate_surface(
    triple: &WeierstrassTriple,
    params: &ParameterVector,
    basepoint: Basepoint,
    opts: &MeshOptions,
) -> Result<(SurfaceMesh, ClosureReport)> {
    let surface = &triple.surface;
    surface.check_necks()?;
    let domain = surface_domain(surface, opts)?;
    let forms = triple_forms(triple);
    let lattice = params.lattice();
    let integ = integrate_domain(&domain, &forms, lattice, basepoint, opts.exec)?;
    let graph = &integ.graph;
    let mut cycles = Vec::new();
    for k in 1..2 * surface.n {
        let nk = surface.neck(k, 1);
        // hole rings follow the chart angle, which is counter-clockwise about the point
        let closure = ring_closure(graph, &domain.rings[nk.a.sphere][nk.a.slot], false);
        let coeff = if k % 2 == 1 { [1, 0] } else { [0, 1] };
        let expected = lattice_vector(&lattice, coeff);
        cycles.push(CycleClosure {
            label: format!("A_{k},1"),
            closure,
            expected,
            lattice_coefficients: coeff,
            defect: norm(sub(closure, expected)),
        });
    }
    for k in 1..2 * surface.n {
        let (i1, i2) = (crate::surface_model::neck_index(k, 1), crate::surface_model::neck_index(k, 2));
        let (Some(g1), Some(g2)) = (&domain.necks[i1], &domain.necks[i2]) else { continue };
        let (sa, sb) = (surface.neck(k, 1).a.sphere, surface.neck(k, 1).b.sphere);
        let col = |g: &Vec<Vec<usize>>| -> Vec<usize> { g.iter().map(|ring| ring[0]).collect() };
        let c1 = col(g1);
        let mut c2 = col(g2);
        c2.reverse();
        let on_b = graph
            .bfs_path(*c1.last().unwrap(), c2[0], |v| domain.on_sphere(v, sb))
            .ok_or_else(|| Error::DegenerateMesh(format!("sphere {} is disconnected", sb + 1)))?;
        let on_a = graph
            .bfs_path(*c2.last().unwrap(), c1[0], |v| domain.on_sphere(v, sa))
            .ok_or_else(|| Error::DegenerateMesh(format!("sphere {} is disconnected", sa + 1)))?;
        let closure = add(add(graph.path_value(&c1), graph.path_value(&on_b)), add(graph.path_value(&c2), graph.path_value(&on_a)));
        let (coeff, rest) = reduce_mod_lattice(closure, &lattice);
        cycles.push(CycleClosure {
            label: format!("B_{k},1"),
            closure,
            expected: lattice_vector(&lattice, coeff),
            lattice_coefficients: coeff,
            defect: norm(rest),
        });
    }
    let max_defect = cycles.iter().map(|c| c.defect).fold(0.0, f64::max);
    let report = ClosureReport { cycles, max_defect, audit_defect: integ.audit_defect, non_tree_edges: integ.non_tree_edges };
    Ok((integ.mesh, report))
}

/// Mesh of one sphere of the triple with all four holes of radius `radius`,
/// together with the closure of f around each hole (slot order).
pub fn integrate_sphere(
    triple: &WeierstrassTriple,
    params: &ParameterVector,
    sphere: usize,
    radius: f64,
    base_z: C,
    opts: &MeshOptions,
) -> Result<(SurfaceMesh, [[f64; 3]; 4])> {
    let points = triple.surface.spheres.get(sphere).ok_or(Error::UnknownPoint)?;
    mesh_sphere_forms(points, triple.sphere(sphere), params.lattice(), radius, base_z, opts)
}

/// The same mesh for the exact Scherk data of sphere `sphere` at angle T₂.
pub fn scherk_mesh(n: usize, t2: f64, sphere: usize, radius: f64, base_z: C, opts: &MeshOptions) -> Result<(SurfaceMesh, [[f64; 3]; 4])> {
    let limit = scherk_limit(n, t2);
    let forms = limit.get(sphere).ok_or(Error::UnknownPoint)?;
    let mut points = [Point::Infinity; 4];
    for (slot, p) in points.iter_mut().enumerate() {
        *p = forms[0].poles[slot].point;
    }
    let t1 = (1.0 - t2 * t2).sqrt();
    let lattice = [[0.0, 2.0 * PI, 0.0], [2.0 * PI * t1, 2.0 * PI * t2, 0.0]];
    mesh_sphere_forms(&points, [&forms[0], &forms[1], &forms[2]], lattice, radius, base_z, opts)
}

fn mesh_sphere_forms(
    points: &[Point; 4],
    forms: [&RationalOneForm; 3],
    lattice: [[f64; 3]; 2],
    radius: f64,
    base_z: C,
    opts: &MeshOptions,
) -> Result<(SurfaceMesh, [[f64; 3]; 4])> {
    let domain = sphere_domain(points, radius, opts)?;
    let integ = integrate_domain(&domain, &[forms], lattice, Basepoint { sphere: 0, z: base_z }, opts.exec)?;
    let closures = std::array::from_fn(|slot| ring_closure(&integ.graph, &domain.rings[0][slot], false));
    Ok((integ.mesh, closures))
}

// ---------------------------------------------------------------------------
// Self-intersection sampling

/// Triangle pairs of a mesh and its lattice neighbours that cross.
/// Heuristic: pairs sharing a vertex position and coplanar contacts are not
/// reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub triangles: usize,
    pub pairs_tested: usize,
    pub intersections: usize,
    /// Up to ten crossing pairs (base triangle, other triangle, lattice shift).
    pub examples: Vec<(usize, usize, [i64; 2])>,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Segment p→q against a triangle, Möller–Trumbore with open parameter ranges.
fn segment_hits_triangle(p: [f64; 3], q: [f64; 3], tri: &[[f64; 3]; 3]) -> bool {
    let d = sub(q, p);
    let e1 = sub(tri[1], tri[0]);
    let e2 = sub(tri[2], tri[0]);
    let h = cross(d, e2);
    let det = dot(e1, h);
    let scale = norm(d) * norm(e1) * norm(e2);
    if det.abs() <= 1e-12 * scale {
        return false;
    }
    let s = sub(p, tri[0]);
    let u = dot(s, h) / det;
    let qv = cross(s, e1);
    let v = dot(d, qv) / det;
    let t = dot(e2, qv) / det;
    let open = 1e-9;
    u > open && v > open && u + v < 1.0 - open && t > open && t < 1.0 - open
}

fn triangles_cross(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> bool {
    (0..3).any(|i| segment_hits_triangle(a[i], a[(i + 1) % 3], b) || segment_hits_triangle(b[i], b[(i + 1) % 3], a))
}

/// Samples every pair of nearby triangles for transversal crossings, using a
/// uniform grid with cells of twice the median edge length.
pub fn self_intersections(mesh: &SurfaceMesh, exec: Execution) -> IntersectionReport {
    let corners = |t: &[usize; 3], shift: [f64; 3]| -> [[f64; 3]; 3] { t.map(|v| add(mesh.vertices[v], shift)) };
    let mut edges: Vec<f64> = mesh.triangles.iter().map(|t| norm(sub(mesh.vertices[t[0]], mesh.vertices[t[1]]))).collect();
    edges.sort_by(f64::total_cmp);
    let cell = 2.0 * edges.get(edges.len() / 2).copied().unwrap_or(1.0).max(1e-9);
    let key = |p: [f64; 3]| p.map(|c| (c / cell).floor() as i64);
    let bbox = |c: &[[f64; 3]; 3]| {
        let lo = [0, 1, 2].map(|i| c.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min));
        let hi = [0, 1, 2].map(|i| c.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max));
        (key(lo), key(hi))
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (j, t) in mesh.triangles.iter().enumerate() {
        let (lo, hi) = bbox(&corners(t, [0.0; 3]));
        if (0..3).map(|i| hi[i] - lo[i] + 1).product::<i64>() > 4096 {
            continue;
        }
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    grid.entry([x, y, z]).or_default().push(j);
                }
            }
        }
    }
    // (i + s, j) and (j − s, i) are the same pair, so half the shifts suffice
    let shifts: Vec<[i64; 2]> = (-1..=1).flat_map(|a| (-1..=1).map(move |b| [a, b])).filter(|s| *s >= [0, 0]).collect();
    let [l1, l2] = mesh.lattice;
    let same = |p: [f64; 3], q: [f64; 3]| norm(sub(p, q)) <= 1e-9 * (1.0 + norm(p));
    let per_triangle = map_range(exec, mesh.triangles.len(), |i| {
        let mut tested = 0usize;
        let mut hits = Vec::new();
        for s in &shifts {
            let shift = [0, 1, 2].map(|c| s[0] as f64 * l1[c] + s[1] as f64 * l2[c]);
            let a = corners(&mesh.triangles[i], shift);
            let (lo, hi) = bbox(&a);
            if (0..3).map(|c| hi[c] - lo[c] + 1).product::<i64>() > 4096 {
                continue;
            }
            let mut seen = HashSet::new();
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        for &j in grid.get(&[x, y, z]).map(Vec::as_slice).unwrap_or(&[]) {
                            // each unshifted pair once
                            if (*s == [0, 0] && j <= i) || !seen.insert(j) {
                                continue;
                            }
                            let b = corners(&mesh.triangles[j], [0.0; 3]);
                            if a.iter().any(|p| b.iter().any(|q| same(*p, *q))) {
                                continue;
                            }
                            tested += 1;
                            if triangles_cross(&a, &b) {
                                hits.push((i, j, *s));
                            }
                        }
                    }
                }
            }
        }
        (tested, hits)
    });
    let mut report = IntersectionReport { triangles: mesh.triangles.len(), pairs_tested: 0, intersections: 0, examples: Vec::new() };
    for (tested, hits) in per_triangle {
        report.pairs_tested += tested;
        report.intersections += hits.len();
        report.examples.extend(hits.into_iter().take(10 - report.examples.len().min(10)));
    }
    report
}

// ---------------------------------------------------------------------------
// Translation between consecutive copies

/// −x²·Re∫ across neck (k, 1) between the base points of spheres k and k+1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationMeasure {
    pub k: usize,
    pub x: f64,
    /// Real for odd k, complex for even k.
    pub value: C,
    /// v_{k,1} for odd k, v_{k,1}(T₁ + iT₂) for even k.
    pub limit: C,
    /// The same limit plus the u_{k,1} term that vanishes with x.
    pub leading: C,
    pub defect: f64,
    /// −x²·Re∫φ₃ along the same path; tends to u_{k,1}.
    pub separation: f64,
}

/// ∫ φ_j from the anchor of `from` on sphere A through neck (k, 1) to the
/// anchor of `to` on sphere B, with the c·log t term restored.
fn crossing_integral(triple: &WeierstrassTriple, k: usize, from: usize, to: usize, j: usize) -> Result<C> {
    let surface = &triple.surface;
    let nk = surface.neck(k, 1);
    let log_t = nk.state.log_t.ok_or(Error::ClosedNode { k, i: 1 })?;
    let form = &triple.phi[j];
    let fa = &form.spheres[nk.a.sphere];
    let fb = &form.spheres[nk.b.sphere];
    let min_d = 0.5 * surface.epsilon;
    let pa = path_integral(fa, &surface.anchor_path(nk.a.sphere, from, nk.a.slot), min_d)?;
    let pb = path_integral(fb, &surface.anchor_path(nk.b.sphere, nk.b.slot, to), min_d)?;
    let c = fa.poles[nk.a.slot].residue;
    Ok(pa + neck_regularized_integral(surface, form, k, 1)? + c * log_t + pb)
}

/// Translation between the copies of Scherk's surface on spheres k and k+1.
pub fn translation_measure(triple: &WeierstrassTriple, params: &ParameterVector, x: f64, k: usize) -> Result<TranslationMeasure> {
    let n = triple.surface.n;
    if k == 0 || k >= 2 * n {
        return Err(Error::InvalidConfig(format!("no neck ({k}, 1) when n = {n}")));
    }
    if !(x > 0.0) {
        return Err(Error::ClosedNode { k, i: 1 });
    }
    let (u, v) = params.neck(k, 1);
    let x2 = x * x;
    let (from, to) = if k % 2 == 1 { (SLOT_ZERO, SLOT_INF) } else { (SLOT_ONE, SLOT_ONE) };
    let separation = -x2 * crossing_integral(triple, k, from, to, 2)?.re;
    let (value, limit, leading) = if k % 2 == 1 {
        let value = -x2 * crossing_integral(triple, k, from, to, 1)?.re;
        let alpha2 = params.alpha[(k - 1) / 2][1];
        (C::new(value, 0.0), C::new(v, 0.0), C::new(u * alpha2 + v, 0.0))
    } else {
        let r1 = crossing_integral(triple, k, from, to, 0)?.re;
        let r2 = crossing_integral(triple, k, from, to, 1)?.re;
        let value = -x2 * C::new(r1, r2);
        let t = C::new(params.t1, params.t2);
        let g = params.gamma_even[k / 2 - 1];
        (value, v * t, u * C::new(g[0], g[1]) + v * t)
    };
    Ok(TranslationMeasure { k, x, value, limit, leading, defect: (value - limit).norm(), separation })
}

// ---------------------------------------------------------------------------
// Limit distance, zero counts and regularity

/// Sample points of Ω_δ on sphere `points`: log-polar rings from δ to 1/δ
/// outside the δ-disks of the finite marked points and of `extra` points.
fn omega_samples(points: &[Point; 4], extra: &[C], delta: f64, density: usize) -> Vec<C> {
    let density = density.max(4);
    let rings = 2 * density;
    let centers: Vec<C> = points.iter().filter_map(|p| p.finite()).chain(extra.iter().copied()).collect();
    let mut out = Vec::with_capacity(rings * density);
    for l in 0..=rings {
        let rad = delta * (1.0 / (delta * delta)).powf(l as f64 / rings as f64);
        for j in 0..density {
            let z = C::from_polar(rad, 2.0 * PI * (j as f64 + 0.5 * (l % 2) as f64) / density as f64);
            if centers.iter().all(|c| (z - c).norm() >= delta) && z.norm() <= 1.0 / delta {
                out.push(z);
            }
        }
    }
    out
}

/// Largest coefficient size in the chart z (|z| ≤ 1) or 1/z (|z| > 1).
fn chart_weight(z: C) -> f64 {
    if z.norm() <= 1.0 {
        1.0
    } else {
        z.norm_sqr()
    }
}

/// Per sphere: sup over Ω_δ of max_j |φ_j − Φ_j|, Φ the Scherk data at T₂⁰.
pub fn limit_distance(triple: &WeierstrassTriple, t2_0: f64, delta: f64, density: usize, exec: Execution) -> Vec<f64> {
    let n = triple.surface.n;
    let limit = scherk_limit(n, t2_0);
    map_range(exec, 2 * n, |m| {
        let phi = triple.sphere(m);
        let lim = &limit[m];
        let extra: Vec<C> = lim[0].poles.iter().filter_map(|p| p.point.finite()).collect();
        omega_samples(&triple.surface.spheres[m], &extra, delta, density)
            .into_iter()
            .map(|z| {
                let w = chart_weight(z);
                (0..3).map(|j| (phi[j].eval(z) - lim[j].eval(z)).norm() * w).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    })
}

/// Winding number of f around the circle |z − center| = radius, tracking the
/// argument with adaptive subdivision.
pub fn winding_number<F: Fn(C) -> C>(f: &F, center: C, radius: f64) -> Result<i64> {
    const BASE: usize = 512;
    let at = |th: f64| f(center + C::from_polar(radius, th));
    let samples: Vec<C> = (0..=BASE).map(|j| at(2.0 * PI * j as f64 / BASE as f64)).collect();
    let scale = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let floor = 1e-13 * scale;
    let bad = |v: C| !(v.norm() > floor) || !v.re.is_finite() || !v.im.is_finite();
    if scale == 0.0 || samples.iter().any(|v| bad(*v)) {
        return Err(Error::ZeroOnContour);
    }
    fn refine<G: Fn(f64) -> C, B: Fn(C) -> bool>(g: &G, bad: &B, t0: f64, t1: f64, v0: C, v1: C, depth: usize) -> Result<f64> {
        let d = (v1 / v0).arg();
        if d.abs() < PI / 8.0 {
            return Ok(d);
        }
        if depth == 0 {
            return Err(Error::ZeroOnContour);
        }
        let tm = 0.5 * (t0 + t1);
        let vm = g(tm);
        if bad(vm) {
            return Err(Error::ZeroOnContour);
        }
        Ok(refine(g, bad, t0, tm, v0, vm, depth - 1)? + refine(g, bad, tm, t1, vm, v1, depth - 1)?)
    }
    let mut total = 0.0;
    for j in 0..BASE {
        let t0 = 2.0 * PI * j as f64 / BASE as f64;
        let t1 = 2.0 * PI * (j + 1) as f64 / BASE as f64;
        total += refine(&at, &bad, t0, t1, samples[j], samples[j + 1], 30)?;
    }
    let w = total / (2.0 * PI);
    if (w - w.round()).abs() > 1e-3 {
        return Err(Error::ZeroOnContour);
    }
    Ok(w.round() as i64)
}

/// Zeros minus poles of f in the disk `outer` with the disks `inner` removed.
pub fn zero_count<F: Fn(C) -> C>(f: &F, outer: (C, f64), inner: &[(C, f64)]) -> Result<i64> {
    let mut count = winding_number(f, outer.0, outer.1)?;
    for (c, r) in inner {
        count -= winding_number(f, *c, *r)?;
    }
    Ok(count)
}

/// Outcome of the regularity spot checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub delta: f64,
    pub samples: usize,
    /// Minimum of |φ₁|² + |φ₂|² + |φ₃|² in the local chart.
    pub min_metric: f64,
    pub min_metric_at: String,
    /// Zeros of the counted component in Ω_{k,δ}, per sphere.
    pub zero_counts: Vec<i64>,
    pub total_zeros: i64,
    /// Largest deviation from a right angle of the image of a small
    /// coordinate square.
    pub max_angle_defect: f64,
}

impl RegularityReport {
    pub fn zero_counts_ok(&self) -> bool {
        self.zero_counts.iter().all(|&c| c == EXPECTED_ZEROS_PER_SPHERE)
    }
}

fn metric(v: [C; 3]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Samples |φ|² over Ω_δ and the neck annuli, counts zeros per sphere by the
/// argument principle and measures conformality of small coordinate squares.
pub fn regularity_check(triple: &WeierstrassTriple, delta: f64, density: usize, exec: Execution) -> Result<RegularityReport> {
    let surface = &triple.surface;
    let spheres = surface.spheres.len();
    struct SphereCheck {
        min: (f64, String),
        samples: usize,
        zeros: Result<i64>,
        angle: f64,
    }
    let per_sphere = map_range(exec, spheres, |m| {
        let phi = triple.sphere(m);
        let pts = &surface.spheres[m];
        let samples = omega_samples(pts, &[], delta, density);
        let mut min = (f64::INFINITY, String::new());
        let mut angle: f64 = 0.0;
        for (idx, z) in samples.iter().enumerate() {
            let w = chart_weight(*z);
            let g = metric([phi[0].eval(*z), phi[1].eval(*z), phi[2].eval(*z)]) * w * w;
            if g < min.0 {
                min = (g, format!("sphere {} z = {:.6}", m + 1, z));
            }
            if idx % 4 == 0 {
                let h = 1e-6 * z.norm().max(1.0);
                let chart = Chart::Affine(C::new(0.0, 0.0));
                let d1: Vec<f64> = phi.iter().map(|f| f.segment_integral(chart, *z, z + h).re).collect();
                let d2: Vec<f64> = phi.iter().map(|f| f.segment_integral(chart, *z, z + I * h).re).collect();
                let dot: f64 = d1.iter().zip(&d2).map(|(a, b)| a * b).sum();
                let c = norm(cross([d1[0], d1[1], d1[2]], [d2[0], d2[1], d2[2]]));
                angle = angle.max((c.atan2(dot) - 0.5 * PI).abs());
            }
        }
        let f = |z: C| phi[ZERO_COUNT_COMPONENT].eval(z);
        let inner: Vec<(C, f64)> = pts.iter().filter_map(|p| p.finite()).map(|p| (p, delta)).collect();
        let zeros = zero_count(&f, (C::new(0.0, 0.0), 1.0 / delta), &inner);
        SphereCheck { min, samples: samples.len(), zeros, angle }
    });
    let mut min = (f64::INFINITY, String::new());
    let mut samples = 0;
    let mut zero_counts = Vec::with_capacity(spheres);
    let mut max_angle_defect: f64 = 0.0;
    for s in per_sphere {
        if s.min.0 < min.0 {
            min = s.min;
        }
        samples += s.samples;
        zero_counts.push(s.zeros?);
        max_angle_defect = max_angle_defect.max(s.angle);
    }
    for nk in &surface.necks {
        let Some(log_t) = nk.state.log_t else { continue };
        let rings = density.max(4);
        for (side, own) in [(nk.a, true), (nk.b, false)] {
            let phi = triple.sphere(side.sphere);
            for l in 0..=rings {
                let ln_r = surface.epsilon.ln() + (l as f64 / rings as f64) * (0.5 * log_t.re - surface.epsilon.ln());
                for j in 0..density.max(4) {
                    let r = C::from_polar(ln_r.exp(), 2.0 * PI * j as f64 / density.max(4) as f64);
                    let g = metric([phi[0].eval_chart(side.chart, r), phi[1].eval_chart(side.chart, r), phi[2].eval_chart(side.chart, r)]);
                    samples += 1;
                    if g < min.0 {
                        min = (g, format!("neck ({},{}) {} side r = {:.3e}", nk.k, nk.i, if own { "A" } else { "B" }, r));
                    }
                }
            }
        }
    }
    let total_zeros = zero_counts.iter().sum();
    Ok(RegularityReport { delta, samples, min_metric: min.0, min_metric_at: min.1, zero_counts, total_zeros, max_angle_defect })
}
