//! C0 interior-penalty discretization of weighted fourth-order (plate) problems on P2.
//!
//! Bilinear form on a face set `F`:
//! `Σ_K ∫ C w ∇²u:∇²v − Σ_F ∫ ({M(u)} J(v) + {M(v)} J(u)) + Σ_F γ ∫ J(u) J(v)`
//! with `J(v) = Σ_sides ∇v·n`, `{M(v)}` the side average of `n·(C w ∇²v) n`, and
//! `γ = σ κ |e| / (2 min|K|)`. Interior, periodic and Nitsche (clamped slope) faces share
//! this expression; free boundaries carry no face.

use super::assembly::{add_mean_constraints, FieldLayout};
use super::dofmap::{periodic_masters, DofMap};
use super::p2::P2Element;
use super::quadrature::{gauss_legendre_unit, QuadratureRule};
use super::solver::SparseSymSystem;
use super::space::{P2Space, TriMesh};
use super::sparse::TripletBuilder;
use crate::error::{Error, Result};
use crate::material::{Mat2, Stiffness};

pub type Vec2 = [f64; 2];

pub const DEFAULT_PENALTY: f64 = 20.0;
const FACE_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    Periodic,
    Nitsche,
}

/// A face with its sides `(element, local edge)`; `shifts[s]` maps side-0 coordinates
/// to side-`s` coordinates.
#[derive(Debug, Clone)]
pub struct Face {
    pub kind: FaceKind,
    pub sides: Vec<(usize, usize)>,
    pub shifts: Vec<Vec2>,
    pub length: f64,
}

pub fn interior_faces(space: &P2Space) -> Vec<Face> {
    space
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| e.sides.len() == 2)
        .map(|(i, e)| Face { kind: FaceKind::Interior, sides: e.sides.clone(), shifts: vec![[0.0; 2]; 2], length: space.edge_length(i) })
        .collect()
}

/// Faces glued across the cell boundary from `(far edge, near edge, shift far → near)`.
pub fn periodic_faces(space: &P2Space, pairs: &[(usize, usize, Vec2)]) -> Vec<Face> {
    pairs
        .iter()
        .map(|&(far, near, shift)| Face {
            kind: FaceKind::Periodic,
            sides: vec![space.edges[far].sides[0], space.edges[near].sides[0]],
            shifts: vec![[0.0; 2], shift],
            length: space.edge_length(far),
        })
        .collect()
}

/// Boundary edges selected by `keep(edge index)` as Nitsche faces.
pub fn nitsche_faces(space: &P2Space, keep: impl Fn(usize) -> bool) -> Vec<Face> {
    space
        .boundary_edges()
        .filter(|(i, _)| keep(*i))
        .map(|(i, e)| Face { kind: FaceKind::Nitsche, sides: e.sides.clone(), shifts: vec![[0.0; 2]], length: space.edge_length(i) })
        .collect()
}

/// Per-quadrature-point data of one face: weight, and per side the outward normal,
/// the moment factor `C w` and the element.
struct FacePoint {
    weight: f64,
    sides: Vec<SidePoint>,
}

struct SidePoint {
    normal: Vec2,
    bary: [f64; 3],
    stiffness: Stiffness,
}

fn nn(c: &Stiffness, h: &Mat2, n: Vec2) -> f64 {
    let m = c.apply(h);
    n[0] * (m[0][0] * n[0] + m[0][1] * n[1]) + n[1] * (m[1][0] * n[0] + m[1][1] * n[1])
}

fn sym_contract(c: &Stiffness, a: &Mat2, b: &Mat2) -> f64 {
    c.quadratic(a, b)
}

/// Plate form with per-element stiffness and a pointwise weight.
pub struct PlateForm<'a> {
    pub space: &'a P2Space,
    pub rule: &'a QuadratureRule,
    pub stiffness: &'a dyn Fn(usize) -> Stiffness,
    pub weight: &'a dyn Fn(usize, Vec2) -> f64,
    pub faces: &'a [Face],
    pub sigma: f64,
}

impl PlateForm<'_> {
    fn elements(&self) -> Vec<P2Element> {
        (0..self.space.n_elements()).map(|k| self.space.element(k)).collect()
    }

    pub fn penalty(&self, f: &Face) -> f64 {
        let mut kappa = 0.0f64;
        let mut min_area = f64::INFINITY;
        for &(k, le) in &f.sides {
            let [a, b] = self.space.edge_endpoints(k, le);
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            kappa = kappa.max((self.stiffness)(k).scale() * (self.weight)(k, mid));
            min_area = min_area.min(self.space.element(k).area);
        }
        self.sigma * kappa * f.length / (2.0 * min_area)
    }

    fn face_points(&self, f: &Face, elems: &[P2Element]) -> Vec<FacePoint> {
        let (k0, le0) = f.sides[0];
        let [a, b] = self.space.edge_endpoints(k0, le0);
        let (ts, ws) = gauss_legendre_unit(FACE_POINTS);
        ts.iter()
            .zip(&ws)
            .map(|(t, w)| {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let sides = f
                    .sides
                    .iter()
                    .zip(&f.shifts)
                    .map(|(&(k, le), sh)| {
                        let xs = [x[0] + sh[0], x[1] + sh[1]];
                        SidePoint {
                            normal: self.space.outward_normal(k, le),
                            bary: elems[k].barycentric(xs),
                            stiffness: (self.stiffness)(k).scaled((self.weight)(k, xs)),
                        }
                    })
                    .collect();
                FacePoint { weight: w * f.length, sides }
            })
            .collect()
    }

    /// Assemble the plate system on `map`. `hessian_loads` yields right-hand sides
    /// `−[Σ_K ∫ C w E:∇²v − Σ_F ∫ {C w E}_nn J(v)]` for constant Hessians `E`; `body`
    /// adds `scale · ∫ f v w`.
    pub fn assemble(&self, map: &DofMap, mean_zero: bool, hessian_loads: &[Mat2], body: &[&dyn Fn(Vec2) -> f64], body_scale: f64) -> SparseSymSystem {
        let layout = FieldLayout::new(vec![map.clone()], if mean_zero { vec![0] } else { vec![] });
        let n = layout.n_total();
        let ne = self.space.n_elements();
        let elems = self.elements();
        let mut trip = TripletBuilder::with_capacity(n, n, ne * 36 + self.faces.len() * 144);
        let mut rhs = vec![vec![0.0; n]; hessian_loads.len() + body.len()];
        for k in 0..ne {
            let el = &elems[k];
            let hs = el.hessians();
            let c = (self.stiffness)(k);
            let nodes = &self.space.elem_nodes[k];
            let mut wsum = 0.0;
            for (l, w) in self.rule.points.iter().zip(&self.rule.weights) {
                wsum += 2.0 * el.area * w * (self.weight)(k, el.point(*l));
            }
            for i in 0..6 {
                let Some(gi) = layout.global(0, nodes[i]) else { continue };
                for j in 0..6 {
                    if let Some(gj) = layout.global(0, nodes[j]) {
                        trip.push(gi, gj, wsum * sym_contract(&c, &hs[i], &hs[j]));
                    }
                }
                for (r, e) in hessian_loads.iter().enumerate() {
                    rhs[r][gi] -= wsum * sym_contract(&c, e, &hs[i]);
                }
            }
            for (bi, f) in body.iter().enumerate() {
                let b = &mut rhs[hessian_loads.len() + bi];
                for (l, w) in self.rule.points.iter().zip(&self.rule.weights) {
                    let x = el.point(*l);
                    let v = el.values(*l);
                    let scale = body_scale * 2.0 * el.area * w * (self.weight)(k, x) * f(x);
                    for i in 0..6 {
                        if let Some(gi) = layout.global(0, nodes[i]) {
                            b[gi] += scale * v[i];
                        }
                    }
                }
            }
        }
        for f in self.faces {
            let gamma = self.penalty(f);
            let ns = f.sides.len();
            let avg = 1.0 / ns as f64;
            let mut gidx = Vec::with_capacity(6 * ns);
            for &(k, _) in &f.sides {
                for &nd in &self.space.elem_nodes[k] {
                    gidx.push(layout.global(0, nd));
                }
            }
            let nl = 6 * ns;
            let mut local = vec![0.0; nl * nl];
            let mut load_local = vec![vec![0.0; nl]; hessian_loads.len()];
            for fp in self.face_points(f, &elems) {
                let mut jump = vec![0.0; nl];
                let mut moment = vec![0.0; nl];
                let mut load_moment = vec![0.0; hessian_loads.len()];
                for (s, sp) in fp.sides.iter().enumerate() {
                    let k = f.sides[s].0;
                    let g = elems[k].grads(sp.bary);
                    let hs = elems[k].hessians();
                    for i in 0..6 {
                        jump[s * 6 + i] = g[i][0] * sp.normal[0] + g[i][1] * sp.normal[1];
                        moment[s * 6 + i] = avg * nn(&sp.stiffness, &hs[i], sp.normal);
                    }
                    for (r, e) in hessian_loads.iter().enumerate() {
                        load_moment[r] += avg * nn(&sp.stiffness, e, sp.normal);
                    }
                }
                let w = fp.weight;
                for r in 0..nl {
                    for c in 0..nl {
                        local[r * nl + c] += w * (-moment[c] * jump[r] - moment[r] * jump[c] + gamma * jump[r] * jump[c]);
                    }
                    for (li, lm) in load_local.iter_mut().zip(&load_moment) {
                        li[r] += w * lm * jump[r];
                    }
                }
            }
            for r in 0..nl {
                let Some(gr) = gidx[r] else { continue };
                for c in 0..nl {
                    if let Some(gc) = gidx[c] {
                        trip.push(gr, gc, local[r * nl + c]);
                    }
                }
                for (li, b) in load_local.iter().zip(rhs.iter_mut()) {
                    b[gr] += li[r];
                }
            }
        }
        add_mean_constraints(self.space, &layout, self.rule, &mut trip);
        SparseSymSystem { matrix: trip.build(), rhs, multipliers: layout.mean_constraints() }
    }

    /// Extended form `ã(E + u, F + v)` evaluated from nodal values, with constant
    /// Hessian parts `E`, `F` carrying no gradient jumps.
    pub fn extended_energy(&self, e: &Mat2, u: &[f64], f_hess: &Mat2, v: &[f64]) -> f64 {
        let elems = self.elements();
        let mut total = 0.0;
        for (k, el) in elems.iter().enumerate() {
            let c = (self.stiffness)(k);
            let hu = add2(e, &self.space.eval_hessian(u, k));
            let hv = add2(f_hess, &self.space.eval_hessian(v, k));
            for (l, w) in self.rule.points.iter().zip(&self.rule.weights) {
                total += 2.0 * el.area * w * (self.weight)(k, el.point(*l)) * sym_contract(&c, &hu, &hv);
            }
        }
        for f in self.faces {
            let gamma = self.penalty(f);
            let avg = 1.0 / f.sides.len() as f64;
            for fp in self.face_points(f, &elems) {
                let (mut ju, mut jv, mut mu, mut mv) = (0.0, 0.0, 0.0, 0.0);
                for (s, sp) in fp.sides.iter().enumerate() {
                    let k = f.sides[s].0;
                    let gu = self.space.eval_grad(u, k, sp.bary);
                    let gv = self.space.eval_grad(v, k, sp.bary);
                    ju += gu[0] * sp.normal[0] + gu[1] * sp.normal[1];
                    jv += gv[0] * sp.normal[0] + gv[1] * sp.normal[1];
                    mu += avg * nn(&sp.stiffness, &add2(e, &self.space.eval_hessian(u, k)), sp.normal);
                    mv += avg * nn(&sp.stiffness, &add2(f_hess, &self.space.eval_hessian(v, k)), sp.normal);
                }
                total += fp.weight * (-mu * jv - mv * ju + gamma * ju * jv);
            }
        }
        total
    }
}

fn add2(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

/// Broken `‖∇²u‖_{L²}` over the elements.
pub fn broken_hessian_norm(space: &P2Space, u: &[f64]) -> f64 {
    (0..space.n_elements())
        .map(|k| {
            let h = space.eval_hessian(u, k);
            space.element(k).area * (h[0][0].powi(2) + h[1][1].powi(2) + 2.0 * h[0][1].powi(2))
        })
        .sum::<f64>()
        .sqrt()
}

/// Check coercivity of the periodic form on a structured probe mesh with the material
/// sampled at element centroids. Fails with a configuration error when the form has a
/// non-positive eigenvalue on the mean-zero complement.
pub fn stability_probe(material: &dyn Fn(Vec2) -> (Stiffness, f64), sigma: f64) -> Result<f64> {
    let mesh = TriMesh::structured(4, 4, [0.0, 0.0], [1.0, 1.0]);
    let space = P2Space::new(mesh);
    let masters = periodic_masters(&space.nodes, [0.0, 0.0], [1.0, 1.0])?;
    let map = DofMap::from_masters(&masters);
    let mut pairs = Vec::new();
    let mut near = std::collections::BTreeMap::new();
    let key = |p: Vec2| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
    let mut far = Vec::new();
    for (i, e) in space.boundary_edges() {
        let m = space.nodes[e.node];
        if m[0].abs() < 1e-12 || m[1].abs() < 1e-12 {
            near.insert(key(m), i);
        } else if (m[0] - 1.0).abs() < 1e-12 {
            far.push((i, [-1.0, 0.0]));
        } else {
            far.push((i, [0.0, -1.0]));
        }
    }
    for (i, sh) in far {
        let m = space.nodes[space.edges[i].node];
        pairs.push((i, near[&key([m[0] + sh[0], m[1] + sh[1]])], sh));
    }
    let mut faces = interior_faces(&space);
    faces.extend(periodic_faces(&space, &pairs));
    let samples: Vec<(Stiffness, f64)> = (0..space.n_elements()).map(|k| material(space.element(k).centroid())).collect();
    let rule = QuadratureRule::triangle(2)?;
    let form = PlateForm { space: &space, rule: &rule, stiffness: &|k| samples[k].0, weight: &|k, _| samples[k].1, faces: &faces, sigma };
    let sys = form.assemble(&map, false, &[], &[], 0.0);
    let mut k = sys.matrix.to_dense();
    let n = k.nrows();
    let scale = k.amax();
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] += scale / n as f64;
        }
    }
    let eig = k.symmetric_eigenvalues();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(0.0f64, f64::max);
    let ratio = min / max;
    if !(ratio > 1e-10) {
        return Err(Error::config(format!("interior penalty σ = {sigma} is unstable: probe eigenvalue ratio {ratio:e} is not positive")));
    }
    Ok(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso() -> Stiffness {
        Stiffness::isotropic(1.0, 1.0)
    }

    #[test]
    fn constant_hessian_energy_on_unconstrained_cell() {
        let space = P2Space::new(TriMesh::structured(4, 4, [0.0, 0.0], [1.0, 1.0]));
        let faces = interior_faces(&space);
        let rule = QuadratureRule::triangle(2).unwrap();
        let c = iso();
        let form = PlateForm { space: &space, rule: &rule, stiffness: &|_| c, weight: &|_, _| 1.0, faces: &faces, sigma: DEFAULT_PENALTY };
        let sys = form.assemble(&DofMap::identity(space.n_nodes()), false, &[], &[], 0.0);
        let u = space.interpolate(|y| 0.5 * y[0] * y[0]);
        let a = sys.matrix.bilinear(&u, &u);
        assert!((a - c.0[0][0][0][0]).abs() < 1e-10, "{a}");
        let affine = space.interpolate(|y| 1.0 + 2.0 * y[0] - 0.5 * y[1]);
        let r = sys.matrix.matvec(&affine);
        assert!(r.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn penalty_twenty_is_stable_and_tiny_is_not() {
        let m = |_: Vec2| (iso(), 1.0);
        assert!(stability_probe(&m, DEFAULT_PENALTY).is_ok());
        assert!(matches!(stability_probe(&m, 0.01), Err(Error::Config(_))));
    }
}
