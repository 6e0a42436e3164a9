//! Global assembly of multi-field P2 systems and the coupled membrane kernel.
//!
//! Unknown layout: field blocks in order, each numbered by its [`DofMap`], followed by
//! one Lagrange multiplier per mean-constrained field.

use super::dofmap::DofMap;
use super::p2::P2Element;
use super::quadrature::QuadratureRule;
use super::solver::{MeanConstraint, SparseSymSystem};
use super::space::P2Space;
use super::sparse::{CsrMatrix, TripletBuilder};
use crate::geometry::GeometryCoefficients;
use crate::material::{Coupling, Mat2, Stiffness};

pub type Vec2 = [f64; 2];

/// Block layout of several scalar P2 fields plus mean-value multipliers.
#[derive(Debug, Clone)]
pub struct FieldLayout {
    pub maps: Vec<DofMap>,
    pub offsets: Vec<usize>,
    /// Fields carrying a zero-mean constraint, in multiplier order.
    pub constrained: Vec<usize>,
    pub n_field_dofs: usize,
}

impl FieldLayout {
    pub fn new(maps: Vec<DofMap>, constrained: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(maps.len());
        let mut n = 0;
        for m in &maps {
            offsets.push(n);
            n += m.n_dofs;
        }
        FieldLayout { maps, offsets, constrained, n_field_dofs: n }
    }

    pub fn n_fields(&self) -> usize {
        self.maps.len()
    }

    pub fn n_total(&self) -> usize {
        self.n_field_dofs + self.constrained.len()
    }

    #[inline]
    pub fn global(&self, field: usize, node: usize) -> Option<usize> {
        self.maps[field].node_dof[node].map(|d| d + self.offsets[field])
    }

    /// Nodal values of one field from a full solution vector.
    pub fn field_nodal(&self, field: usize, x: &[f64]) -> Vec<f64> {
        let m = &self.maps[field];
        let off = self.offsets[field];
        m.lift(&x[off..off + m.n_dofs])
    }

    pub fn mean_constraints(&self) -> Vec<MeanConstraint> {
        self.constrained
            .iter()
            .enumerate()
            .map(|(i, &f)| MeanConstraint { row: self.n_field_dofs + i, field: self.offsets[f]..self.offsets[f] + self.maps[f].n_dofs })
            .collect()
    }
}

/// Quadrature data of one element: physical points, weights `2|K| ω_q`, basis values and gradients.
#[derive(Debug, Clone)]
pub struct ElementQuad {
    pub element: P2Element,
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub values: Vec<[f64; 6]>,
    pub grads: Vec<[Vec2; 6]>,
}

impl ElementQuad {
    pub fn new(space: &P2Space, k: usize, rule: &QuadratureRule) -> Self {
        let element = space.element(k);
        let mut q = ElementQuad {
            element,
            points: Vec::with_capacity(rule.len()),
            weights: Vec::with_capacity(rule.len()),
            values: Vec::with_capacity(rule.len()),
            grads: Vec::with_capacity(rule.len()),
        };
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            q.points.push(element.point(*l));
            q.weights.push(2.0 * element.area * w);
            q.values.push(element.values(*l));
            q.grads.push(element.grads(*l));
        }
        q
    }
}

/// Scatter a local matrix `local[(f·6 + i)·nl + (g·6 + j)]` into the global system and
/// subtract its action on the nodal load liftings from each right-hand side.
#[allow(clippy::too_many_arguments)]
pub fn scatter(
    layout: &FieldLayout,
    nodes: &[usize; 6],
    fields: &[usize],
    local: &[f64],
    trip: &mut TripletBuilder,
    liftings: &[Vec<Vec<f64>>],
    rhs: &mut [Vec<f64>],
) {
    let nl = fields.len() * 6;
    debug_assert_eq!(local.len(), nl * nl);
    let mut gidx = [None; 24];
    for (fi, &f) in fields.iter().enumerate() {
        for i in 0..6 {
            gidx[fi * 6 + i] = layout.global(f, nodes[i]);
        }
    }
    for r in 0..nl {
        let Some(gr) = gidx[r] else { continue };
        for c in 0..nl {
            let v = local[r * nl + c];
            if let Some(gc) = gidx[c] {
                trip.push(gr, gc, v);
            }
        }
        for (lift, b) in liftings.iter().zip(rhs.iter_mut()) {
            let mut s = 0.0;
            for (fi, &f) in fields.iter().enumerate() {
                let lf = &lift[f];
                if lf.is_empty() {
                    continue;
                }
                for j in 0..6 {
                    s += local[r * nl + fi * 6 + j] * lf[nodes[j]];
                }
            }
            b[gr] -= s;
        }
    }
}

/// Append the mean-value constraint rows `∫ field = 0` (unweighted) to a triplet set.
pub fn add_mean_constraints(space: &P2Space, layout: &FieldLayout, rule: &QuadratureRule, trip: &mut TripletBuilder) {
    for (mi, &f) in layout.constrained.iter().enumerate() {
        let row = layout.n_field_dofs + mi;
        for k in 0..space.n_elements() {
            let q = ElementQuad::new(space, k, rule);
            let nodes = &space.elem_nodes[k];
            for (w, v) in q.weights.iter().zip(&q.values) {
                for i in 0..6 {
                    if let Some(g) = layout.global(f, nodes[i]) {
                        trip.push(g, row, w * v[i]);
                        trip.push(row, g, w * v[i]);
                    }
                }
            }
        }
    }
}

/// Effective or pointwise coefficients of the coupled membrane problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneCoeffs {
    pub c: Stiffness,
    pub e: Coupling,
    pub d: Mat2,
}

impl MembraneCoeffs {
    pub fn scaled(&self, s: f64) -> Self {
        MembraneCoeffs { c: self.c.scaled(s), e: self.e.scaled(s), d: [[self.d[0][0] * s, self.d[0][1] * s], [self.d[1][0] * s, self.d[1][1] * s]] }
    }
}

/// Inputs of a coupled membrane assembly.
///
/// Fields are the displacement components (two, or three when `geometry` is given)
/// followed by the potential. The assembled symmetric form is
/// `[[c(γu, γv), e(γv, ∇φ)], [e(γu, ∇ψ), −d(∇φ, ∇ψ)]]`, each integrand weighted.
pub struct MembraneAssembly<'a> {
    pub space: &'a P2Space,
    pub rule: &'a QuadratureRule,
    pub coeffs: &'a dyn Fn(usize) -> MembraneCoeffs,
    /// Integration weight at a point of an element (products of √a factors).
    pub weight: &'a dyn Fn(usize, Vec2) -> f64,
    /// Chart geometry at a point; `None` means flat with in-plane displacements only.
    pub geometry: Option<&'a dyn Fn(Vec2) -> GeometryCoefficients>,
    pub layout: &'a FieldLayout,
}

/// `γ(N_j e_b)` for every node `j` and displacement component `b`.
pub fn basis_strains(grads: &[Vec2; 6], values: &[f64; 6], geo: Option<&GeometryCoefficients>, ncomp: usize) -> [[Mat2; 6]; 3] {
    let mut out = [[[[0.0; 2]; 2]; 6]; 3];
    for j in 0..6 {
        for b in 0..ncomp {
            let mut g = [[0.0; 2]; 2];
            if b < 2 {
                for a in 0..2 {
                    g[a][b] += 0.5 * grads[j][a];
                    g[b][a] += 0.5 * grads[j][a];
                }
            }
            if let Some(geo) = geo {
                for a in 0..2 {
                    for c in 0..2 {
                        g[a][c] -= geo.gamma[b][a][c] * values[j];
                    }
                }
            }
            out[b][j] = g;
        }
    }
    out
}

impl MembraneAssembly<'_> {
    pub fn n_disp(&self) -> usize {
        if self.geometry.is_some() {
            3
        } else {
            2
        }
    }

    /// Local `(n_disp + 1)·6` square matrix of element `k`.
    pub fn local_matrix(&self, k: usize, q: &ElementQuad, out: &mut Vec<f64>) {
        let nd = self.n_disp();
        let nf = nd + 1;
        let nl = nf * 6;
        out.clear();
        out.resize(nl * nl, 0.0);
        let co = (self.coeffs)(k);
        for iq in 0..q.weights.len() {
            let x = q.points[iq];
            let w = q.weights[iq] * (self.weight)(k, x);
            let geo = self.geometry.map(|g| g(x));
            let gr = &q.grads[iq];
            let strains = basis_strains(gr, &q.values[iq], geo.as_ref(), nd);
            let mut cs = [[[[0.0; 2]; 2]; 6]; 3];
            let mut es = [[[0.0; 2]; 6]; 3];
            for b in 0..nd {
                for j in 0..6 {
                    cs[b][j] = co.c.apply(&strains[b][j]);
                    for l in 0..2 {
                        let mut s = 0.0;
                        for a in 0..2 {
                            for c in 0..2 {
                                s += co.e.0[l][a][c] * strains[b][j][a][c];
                            }
                        }
                        es[b][j][l] = s;
                    }
                }
            }
            for a in 0..nd {
                for i in 0..6 {
                    let r = a * 6 + i;
                    for b in 0..nd {
                        for j in 0..6 {
                            let s = &strains[a][i];
                            let c = &cs[b][j];
                            out[r * nl + b * 6 + j] += w * (s[0][0] * c[0][0] + s[0][1] * c[0][1] + s[1][0] * c[1][0] + s[1][1] * c[1][1]);
                        }
                    }
                }
            }
            let pf = nd * 6;
            for i in 0..6 {
                for b in 0..nd {
                    for j in 0..6 {
                        let v = w * (gr[i][0] * es[b][j][0] + gr[i][1] * es[b][j][1]);
                        out[(pf + i) * nl + b * 6 + j] += v;
                        out[(b * 6 + j) * nl + pf + i] += v;
                    }
                }
                for j in 0..6 {
                    let mut dd = 0.0;
                    for a in 0..2 {
                        for l in 0..2 {
                            dd += gr[i][a] * co.d[a][l] * gr[j][l];
                        }
                    }
                    out[(pf + i) * nl + pf + j] -= w * dd;
                }
            }
        }
    }

    /// Assemble the saddle system. `liftings[r][field]` are nodal load fields whose
    /// action is moved to the right-hand side (empty vectors skip a field);
    /// `body` adds `scale · ∫ F·v · weight` for each extra right-hand side closure.
    pub fn assemble(&self, liftings: &[Vec<Vec<f64>>], body: &[&dyn Fn(Vec2) -> [f64; 3]], body_scale: f64) -> SparseSymSystem {
        let nd = self.n_disp();
        let nf = nd + 1;
        let n = self.layout.n_total();
        let fields: Vec<usize> = (0..nf).collect();
        let ne = self.space.n_elements();
        let mut trip = TripletBuilder::with_capacity(n, n, ne * (nf * 6) * (nf * 6));
        let n_rhs = liftings.len() + body.len();
        let mut rhs = vec![vec![0.0; n]; n_rhs];
        let mut local = Vec::new();
        for k in 0..ne {
            let q = ElementQuad::new(self.space, k, self.rule);
            self.local_matrix(k, &q, &mut local);
            let nodes = &self.space.elem_nodes[k];
            let (lift_rhs, body_rhs) = rhs.split_at_mut(liftings.len());
            scatter(self.layout, nodes, &fields, &local, &mut trip, liftings, lift_rhs);
            for (bf, b) in body.iter().zip(body_rhs.iter_mut()) {
                for iq in 0..q.weights.len() {
                    let x = q.points[iq];
                    let w = body_scale * q.weights[iq] * (self.weight)(k, x);
                    let f = bf(x);
                    for a in 0..nd {
                        if f[a] == 0.0 {
                            continue;
                        }
                        for i in 0..6 {
                            if let Some(g) = self.layout.global(a, nodes[i]) {
                                b[g] += w * f[a] * q.values[iq][i];
                            }
                        }
                    }
                }
            }
        }
        add_mean_constraints(self.space, self.layout, self.rule, &mut trip);
        SparseSymSystem { matrix: trip.build(), rhs, multipliers: self.layout.mean_constraints() }
    }
}

/// Sub-block `rows × cols` of a CSR matrix.
pub fn block(m: &CsrMatrix, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> CsrMatrix {
    let mut t = TripletBuilder::new(rows.len(), cols.len());
    for r in rows.clone() {
        for (c, v) in m.row(r) {
            if cols.contains(&c) {
                t.push(r - rows.start, c - cols.start, v);
            }
        }
    }
    t.build()
}
