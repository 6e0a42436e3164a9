//! Perforated periodic unit cell `Y* = [0,1]² \ S`.
//!
//! The mesh starts from a structured `n × n` grid split along `/` diagonals. Grid
//! vertices close to the hole boundary are warped onto it, remaining crossing edges
//! are cut at their exact intersection with ∂S, and cut triangles are split by fixed
//! stencils, keeping only the part outside the hole. Vertices on ∂Y never move, so
//! opposite sides carry identical node layouts.

use crate::error::{Error, Result};
use crate::fem::dofmap::periodic_masters;
use crate::fem::quadrature::QuadratureRule;
use crate::fem::space::{P2Space, TriMesh};
use crate::material::Weight;
use std::collections::BTreeMap;

pub type Vec2 = [f64; 2];

/// Warp a grid vertex onto ∂S when the crossing lies within this fraction of an edge.
const WARP_FRACTION: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HoleSpec {
    None,
    Disk { center: Vec2, radius: f64 },
    Ellipse { center: Vec2, semi_axes: Vec2 },
    Rectangle { center: Vec2, half_widths: Vec2 },
}

impl HoleSpec {
    fn center_and_half_extent(&self) -> Option<(Vec2, Vec2)> {
        match *self {
            HoleSpec::None => None,
            HoleSpec::Disk { center, radius } => Some((center, [radius, radius])),
            HoleSpec::Ellipse { center, semi_axes } => Some((center, semi_axes)),
            HoleSpec::Rectangle { center, half_widths } => Some((center, half_widths)),
        }
    }

    /// Distance from the hole to the cell boundary.
    pub fn clearance(&self) -> f64 {
        match self.center_and_half_extent() {
            None => f64::INFINITY,
            Some((c, r)) => (c[0] - r[0]).min(1.0 - c[0] - r[0]).min(c[1] - r[1]).min(1.0 - c[1] - r[1]),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            HoleSpec::None => 0.0,
            HoleSpec::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            HoleSpec::Ellipse { semi_axes, .. } => std::f64::consts::PI * semi_axes[0] * semi_axes[1],
            HoleSpec::Rectangle { half_widths, .. } => 4.0 * half_widths[0] * half_widths[1],
        }
    }

    /// Invariant under `y ↦ (y₂, y₁)`.
    pub fn is_transpose_symmetric(&self) -> bool {
        match self.center_and_half_extent() {
            None => true,
            Some((c, r)) => c[0] == c[1] && r[0] == r[1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((c, r)) = self.center_and_half_extent() {
            if !(c[0].is_finite() && c[1].is_finite() && r[0] > 0.0 && r[1] > 0.0) {
                return Err(Error::config("hole needs a finite center and positive size"));
            }
            if !(self.clearance() > 0.0) {
                return Err(Error::config("hole must lie strictly inside the open unit cell"));
            }
        }
        Ok(())
    }

    /// Sign-exact level function: negative inside S, zero on ∂S, positive outside.
    pub fn level(&self, p: Vec2) -> f64 {
        match *self {
            HoleSpec::None => 1.0,
            HoleSpec::Disk { center, radius } => (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) - radius * radius,
            HoleSpec::Ellipse { center, semi_axes } => {
                ((p[0] - center[0]) / semi_axes[0]).powi(2) + ((p[1] - center[1]) / semi_axes[1]).powi(2) - 1.0
            }
            HoleSpec::Rectangle { center, half_widths } => ((p[0] - center[0]).abs() - half_widths[0]).max((p[1] - center[1]).abs() - half_widths[1]),
        }
    }

    /// Parameter `t ∈ [0, 1]` where the segment `p + t (q − p)` crosses ∂S, given that
    /// `p` and `q` lie on opposite sides.
    fn crossing(&self, p: Vec2, q: Vec2) -> f64 {
        let d = [q[0] - p[0], q[1] - p[1]];
        let t = match *self {
            HoleSpec::None => unreachable!("no crossing without a hole"),
            HoleSpec::Disk { center, radius } => quadratic_crossing(p, d, center, [radius, radius]),
            HoleSpec::Ellipse { center, semi_axes } => quadratic_crossing(p, d, center, semi_axes),
            HoleSpec::Rectangle { .. } => {
                // the box is convex: bisect on the sign-exact level function
                let (mut lo, mut hi) = (0.0, 1.0);
                let inside_at_lo = self.level(p) < 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let x = [p[0] + mid * d[0], p[1] + mid * d[1]];
                    if (self.level(x) < 0.0) == inside_at_lo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-17 {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        };
        t.clamp(0.0, 1.0)
    }
}

fn quadratic_crossing(p: Vec2, d: Vec2, c: Vec2, r: Vec2) -> f64 {
    let u = [(p[0] - c[0]) / r[0], (p[1] - c[1]) / r[1]];
    let v = [d[0] / r[0], d[1] / r[1]];
    let a = v[0] * v[0] + v[1] * v[1];
    let b = 2.0 * (u[0] * v[0] + u[1] * v[1]);
    let cc = u[0] * u[0] + u[1] * u[1] - 1.0;
    let disc = (b * b - 4.0 * a * cc).max(0.0).sqrt();
    // numerically stable roots
    let qq = -0.5 * (b + b.signum() * disc);
    let mut roots = [qq / a, if qq != 0.0 { cc / qq } else { f64::NAN }];
    roots.sort_by(|x, y| x.total_cmp(y));
    roots
        .into_iter()
        .filter(|t| t.is_finite())
        .min_by(|x, y| (x - x.clamp(0.0, 1.0)).abs().total_cmp(&(y - y.clamp(0.0, 1.0)).abs()).then(x.total_cmp(y)))
        .unwrap_or(0.5)
}

/// Triangulated perforated cell with periodic identification.
#[derive(Debug, Clone)]
pub struct PeriodicCellMesh {
    pub hole: HoleSpec,
    pub n: usize,
    /// Background grid spacing.
    pub h: f64,
    pub space: P2Space,
    /// Edge indices (into `space.edges`) on the hole boundary.
    pub hole_boundary: Vec<usize>,
    /// P2 node pairs `(node on x = 1, partner on x = 0)`, for `0 ≤ y < 1`.
    pub periodic_x: Vec<(usize, usize)>,
    /// P2 node pairs `(node on y = 1, partner on y = 0)`, for `0 ≤ x < 1`.
    pub periodic_y: Vec<(usize, usize)>,
    /// Corner nodes `(0,0), (1,0), (0,1), (1,1)`.
    pub corners: [usize; 4],
    /// Representative node under periodic identification.
    pub masters: Vec<usize>,
    /// Boundary edge pairs `(edge on the far side, partner on the near side, translation far → near)`.
    pub periodic_faces: Vec<(usize, usize, Vec2)>,
}

impl PeriodicCellMesh {
    pub fn vertices(&self) -> &[Vec2] {
        &self.space.mesh.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.space.mesh.triangles
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.space.mesh
    }

    pub fn area(&self) -> f64 {
        self.space.mesh.total_area()
    }
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn min_angle_sin(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let area2 = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
    let l = |p: Vec2, q: Vec2| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
    let (ab, bc, ca) = (l(a, b), l(b, c), l(c, a));
    // sin of the angle at each vertex = 2A / (product of adjacent sides)
    (area2 / (ab * ca)).min(area2 / (ab * bc)).min(area2 / (bc * ca))
}

pub fn build_cell_mesh(hole: HoleSpec, n: usize) -> Result<PeriodicCellMesh> {
    if n < 4 {
        return Err(Error::config(format!("cell resolution n = {n} below the minimum of 4")));
    }
    hole.validate()?;
    let h = 1.0 / n as f64;
    if let Some((_, r)) = hole.center_and_half_extent() {
        if hole.clearance() < h {
            return Err(Error::config(format!(
                "hole clearance {:.4} to the cell boundary is below the grid spacing {h:.4}; refine n or shrink the hole",
                hole.clearance()
            )));
        }
        if r[0].min(r[1]) < h {
            return Err(Error::config(format!("n = {n} too coarse to resolve a hole of half-width {:.4}", r[0].min(r[1]))));
        }
    }
    let grid = TriMesh::structured(n, n, [0.0, 0.0], [1.0, 1.0]);
    let mesh = if matches!(hole, HoleSpec::None) { grid } else { cut_grid(&hole, grid, h)? };
    finish(hole, n, mesh)
}

/// Warp, cut and stencil-split the background grid.
fn cut_grid(hole: &HoleSpec, grid: TriMesh, h: f64) -> Result<TriMesh> {
    let mut pos = grid.vertices.clone();
    let mut sign: Vec<i8> = pos.iter().map(|p| sign_of(hole.level(*p))).collect();

    // unique grid edges in deterministic order
    let mut edges: BTreeMap<(usize, usize), ()> = BTreeMap::new();
    for t in &grid.triangles {
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let (a, b) = (t[i].min(t[j]), t[i].max(t[j]));
            edges.insert((a, b), ());
        }
    }

    // warp: each vertex moves to its nearest close crossing
    let mut best: Vec<Option<(f64, Vec2)>> = vec![None; pos.len()];
    for &(a, b) in edges.keys() {
        if sign[a] * sign[b] >= 0 {
            continue;
        }
        let t = hole.crossing(pos[a], pos[b]);
        let x = [pos[a][0] + t * (pos[b][0] - pos[a][0]), pos[a][1] + t * (pos[b][1] - pos[a][1])];
        for (v, frac) in [(a, t), (b, 1.0 - t)] {
            if frac < WARP_FRACTION && best[v].is_none_or(|(f, _)| frac < f) {
                best[v] = Some((frac, x));
            }
        }
    }
    for (v, b) in best.iter().enumerate() {
        if let Some((_, x)) = b {
            pos[v] = *x;
            sign[v] = 0;
        }
    }

    // cut points on the remaining crossing edges
    let mut cut: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(a, b) in edges.keys() {
        if sign[a] * sign[b] < 0 {
            let t = hole.crossing(pos[a], pos[b]);
            pos.push([pos[a][0] + t * (pos[b][0] - pos[a][0]), pos[a][1] + t * (pos[b][1] - pos[a][1])]);
            sign.push(0);
            cut.insert((a, b), pos.len() - 1);
        }
    }
    let cut_of = |a: usize, b: usize| cut[&(a.min(b), a.max(b))];

    let mut tris: Vec<[usize; 3]> = Vec::with_capacity(grid.triangles.len());
    for t in &grid.triangles {
        let s = [sign[t[0]], sign[t[1]], sign[t[2]]];
        let n_pos = s.iter().filter(|&&x| x > 0).count();
        let n_neg = s.iter().filter(|&&x| x < 0).count();
        if n_neg == 0 {
            if n_pos == 0 {
                let c = [(pos[t[0]][0] + pos[t[1]][0] + pos[t[2]][0]) / 3.0, (pos[t[0]][1] + pos[t[1]][1] + pos[t[2]][1]) / 3.0];
                if hole.level(c) <= 0.0 {
                    continue;
                }
            }
            tris.push(*t);
            continue;
        }
        if n_pos == 0 {
            continue;
        }
        // rotate so that the local pattern starts at a canonical vertex
        let rot = |k: usize| [t[k % 3], t[(k + 1) % 3], t[(k + 2) % 3]];
        let sr = |k: usize| [s[k % 3], s[(k + 1) % 3], s[(k + 2) % 3]];
        match (n_pos, n_neg) {
            (1, 2) => {
                let k = (0..3).find(|&k| s[k] > 0).unwrap();
                let [a, b, c] = rot(k);
                tris.push([a, cut_of(a, b), cut_of(a, c)]);
            }
            (2, 1) => {
                let k = (0..3).find(|&k| s[k] < 0).unwrap();
                let [m, a, b] = rot(k);
                let (ca, cb) = (cut_of(m, a), cut_of(m, b));
                // quad a, b, cb, ca (counter-clockwise)
                let q1 = min_angle_sin(pos[a], pos[b], pos[cb]).min(min_angle_sin(pos[a], pos[cb], pos[ca]));
                let q2 = min_angle_sin(pos[a], pos[b], pos[ca]).min(min_angle_sin(pos[b], pos[cb], pos[ca]));
                if q1 >= q2 {
                    tris.push([a, b, cb]);
                    tris.push([a, cb, ca]);
                } else {
                    tris.push([a, b, ca]);
                    tris.push([b, cb, ca]);
                }
            }
            (1, 1) => {
                let k = (0..3).find(|&k| sr(k)[0] > 0).unwrap();
                let [p, b, c] = rot(k);
                let sl = sr(k);
                if sl[1] < 0 {
                    // pattern (+, −, 0)
                    tris.push([p, cut_of(p, b), c]);
                } else {
                    // pattern (+, 0, −)
                    tris.push([p, b, cut_of(p, c)]);
                }
            }
            _ => unreachable!(),
        }
    }

    // compact and order vertices lexicographically by (y, x)
    let mut used = vec![false; pos.len()];
    for t in &tris {
        for &v in t {
            used[v] = true;
        }
    }
    let mut order: Vec<usize> = (0..pos.len()).filter(|&v| used[v]).collect();
    order.sort_by(|&a, &b| pos[a][1].total_cmp(&pos[b][1]).then(pos[a][0].total_cmp(&pos[b][0])));
    let mut renum = vec![usize::MAX; pos.len()];
    for (new, &old) in order.iter().enumerate() {
        renum[old] = new;
    }
    let vertices: Vec<Vec2> = order.iter().map(|&v| pos[v]).collect();
    let triangles: Vec<[usize; 3]> = tris.iter().map(|t| [renum[t[0]], renum[t[1]], renum[t[2]]]).collect();
    let mesh = TriMesh { vertices, triangles };

    for k in 0..mesh.triangles.len() {
        let e = mesh.element(k);
        let [a, b, c] = e.vertices;
        if !(e.area > 1e-6 * h * h) || min_angle_sin(a, b, c) < 1e-3 {
            return Err(Error::config(format!(
                "degenerate triangle near the hole boundary at ({:.4}, {:.4}); change n",
                e.centroid()[0],
                e.centroid()[1]
            )));
        }
    }
    Ok(mesh)
}

fn finish(hole: HoleSpec, n: usize, mesh: TriMesh) -> Result<PeriodicCellMesh> {
    let h = 1.0 / n as f64;
    let space = P2Space::new(mesh);
    let masters = periodic_masters(&space.nodes, [0.0, 0.0], [1.0, 1.0])?;
    let on = |v: f64, c: f64| (v - c).abs() < 1e-12;
    let find = |p: Vec2| space.nodes.iter().position(|q| on(q[0], p[0]) && on(q[1], p[1]));
    let corners = [find([0.0, 0.0]).unwrap(), find([1.0, 0.0]).unwrap(), find([0.0, 1.0]).unwrap(), find([1.0, 1.0]).unwrap()];
    let mut periodic_x = Vec::new();
    let mut periodic_y = Vec::new();
    for (i, p) in space.nodes.iter().enumerate() {
        if on(p[0], 1.0) && !on(p[1], 1.0) {
            periodic_x.push((i, masters[i]));
        }
        if on(p[1], 1.0) && !on(p[0], 1.0) {
            periodic_y.push((i, masters[i]));
        }
    }
    periodic_x.sort_by(|a, b| space.nodes[a.0][1].total_cmp(&space.nodes[b.0][1]));
    periodic_y.sort_by(|a, b| space.nodes[a.0][0].total_cmp(&space.nodes[b.0][0]));

    let mut hole_boundary = Vec::new();
    let mut near: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut far: Vec<(usize, Vec2)> = Vec::new();
    let key = |p: Vec2| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
    for (ei, e) in space.boundary_edges() {
        let m = space.nodes[e.node];
        if on(m[0], 0.0) || on(m[1], 0.0) {
            near.insert(key(m), ei);
        } else if on(m[0], 1.0) {
            far.push((ei, [-1.0, 0.0]));
        } else if on(m[1], 1.0) {
            far.push((ei, [0.0, -1.0]));
        } else {
            hole_boundary.push(ei);
        }
    }
    let mut periodic_faces = Vec::with_capacity(far.len());
    for (ei, shift) in far {
        let m = space.nodes[space.edges[ei].node];
        let target = [m[0] + shift[0], m[1] + shift[1]];
        let partner = near
            .get(&key(target))
            .copied()
            .ok_or_else(|| Error::Internal(format!("no periodic partner for boundary edge at ({}, {})", m[0], m[1])))?;
        periodic_faces.push((ei, partner, shift));
    }
    if periodic_faces.len() != near.len() {
        return Err(Error::Internal("unmatched periodic boundary edges".into()));
    }
    if !matches!(hole, HoleSpec::None) && hole_boundary.is_empty() {
        return Err(Error::config(format!("n = {n} too coarse to resolve the hole")));
    }
    Ok(PeriodicCellMesh { hole, n, h, space, hole_boundary, periodic_x, periodic_y, corners, masters, periodic_faces })
}

/// `|Y*|_a = ∫_{Y*} √a dy` by element quadrature.
pub fn cell_measure(mesh: &PeriodicCellMesh, weight: &Weight, rule: &QuadratureRule) -> f64 {
    let mut total = 0.0;
    for k in 0..mesh.space.n_elements() {
        let e = mesh.space.element(k);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            total += 2.0 * e.area * w * weight.at(e.point(*l));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_cell_structure() {
        let m = build_cell_mesh(HoleSpec::None, 4).unwrap();
        assert_eq!(m.triangles().len(), 32);
        assert_eq!(m.periodic_x.len(), 8);
        assert_eq!(m.periodic_y.len(), 8);
        assert!(m.hole_boundary.is_empty());
        assert_eq!(m.periodic_faces.len(), 8);
        let c = m.corners;
        assert!(c.iter().all(|&v| m.masters[v] == c[0]));
    }

    #[test]
    fn too_coarse_or_touching_holes_rejected() {
        let r = build_cell_mesh(HoleSpec::Disk { center: [0.5, 0.5], radius: 0.49 }, 8);
        assert!(matches!(r, Err(Error::Config(_))));
        let r = build_cell_mesh(HoleSpec::Disk { center: [0.5, 0.5], radius: 0.02 }, 8);
        assert!(matches!(r, Err(Error::Config(_))));
        let r = build_cell_mesh(HoleSpec::Disk { center: [0.9, 0.5], radius: 0.2 }, 16);
        assert!(matches!(r, Err(Error::Config(_))));
        assert!(build_cell_mesh(HoleSpec::None, 3).is_err());
    }

    #[test]
    fn disk_mesh_valid() {
        let hole = HoleSpec::Disk { center: [0.5, 0.5], radius: 0.25 };
        let m = build_cell_mesh(hole, 32).unwrap();
        assert!(m.hole_boundary.len() >= 32);
        for k in 0..m.triangles().len() {
            assert!(m.mesh().signed_area(k) > 0.0);
            let c = m.space.element(k).centroid();
            assert!(hole.level(c) > 0.0);
        }
        for &e in &m.hole_boundary {
            for v in m.space.edges[e].vertices {
                assert!(hole.level(m.vertices()[v]).abs() < 1e-12);
            }
        }
        let exact = 1.0 - std::f64::consts::PI / 16.0;
        assert!((m.area() - exact).abs() / exact < 5e-3);
    }

    #[test]
    fn other_shapes_mesh() {
        for hole in
            [HoleSpec::Ellipse { center: [0.45, 0.55], semi_axes: [0.3, 0.15] }, HoleSpec::Rectangle { center: [0.5, 0.5], half_widths: [0.2, 0.3] }]
        {
            let m = build_cell_mesh(hole, 24).unwrap();
            let exact = 1.0 - hole.area();
            assert!((m.area() - exact).abs() / exact < 1e-2, "{hole:?}: {}", m.area());
            assert_eq!(m.periodic_x.len(), 48);
        }
    }
}
