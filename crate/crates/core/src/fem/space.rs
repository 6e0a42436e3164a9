//! Triangle meshes and the P2 node/edge layer built on top of them.

use super::p2::{P2Element, LOCAL_EDGES};
use std::collections::HashMap;

pub type Vec2 = [f64; 2];

/// Straight-sided triangulation with counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn element(&self, k: usize) -> P2Element {
        let t = self.triangles[k];
        P2Element::new([self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]])
    }

    pub fn signed_area(&self, k: usize) -> f64 {
        self.element(k).area
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|k| self.signed_area(k)).sum()
    }

    /// Structured `nx × ny` grid over `[x0, x0 + lx] × [y0, y0 + ly]`, each square split
    /// along its `/` diagonal. Vertex `(i, j)` has index `j * (nx + 1) + i`.
    pub fn structured(nx: usize, ny: usize, origin: Vec2, size: Vec2) -> TriMesh {
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([origin[0] + size[0] * i as f64 / nx as f64, origin[1] + size[1] * j as f64 / ny as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        TriMesh { vertices, triangles }
    }
}

/// An edge of the triangulation with the one or two elements that share it.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// P2 node at the edge midpoint.
    pub node: usize,
    /// `(element, local edge)` pairs; one entry for boundary edges.
    pub sides: Vec<(usize, usize)>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.sides.len() == 1
    }
}

/// Quadratic Lagrange node layer: vertices first, then one node per edge.
#[derive(Debug, Clone)]
pub struct P2Space {
    pub mesh: TriMesh,
    pub nodes: Vec<Vec2>,
    pub n_vertices: usize,
    pub elem_nodes: Vec<[usize; 6]>,
    pub edges: Vec<Edge>,
    /// Local edge index to global edge index per element.
    pub elem_edges: Vec<[usize; 3]>,
}

impl P2Space {
    pub fn new(mesh: TriMesh) -> Self {
        let nv = mesh.vertices.len();
        let mut nodes = mesh.vertices.clone();
        let mut edges: Vec<Edge> = Vec::with_capacity(nv * 3);
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(nv * 3);
        let mut elem_nodes = Vec::with_capacity(mesh.triangles.len());
        let mut elem_edges = Vec::with_capacity(mesh.triangles.len());
        for (k, t) in mesh.triangles.iter().enumerate() {
            let mut en = [t[0], t[1], t[2], 0, 0, 0];
            let mut ee = [0; 3];
            for (le, [i, j]) in LOCAL_EDGES.iter().enumerate() {
                let (a, b) = (t[*i], t[*j]);
                let key = (a.min(b), a.max(b));
                let idx = *lookup.entry(key).or_insert_with(|| {
                    let pa = mesh.vertices[a];
                    let pb = mesh.vertices[b];
                    nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    edges.push(Edge { vertices: [key.0, key.1], node: nodes.len() - 1, sides: Vec::with_capacity(2) });
                    edges.len() - 1
                });
                edges[idx].sides.push((k, le));
                en[3 + le] = edges[idx].node;
                ee[le] = idx;
            }
            elem_nodes.push(en);
            elem_edges.push(ee);
        }
        P2Space { mesh, nodes, n_vertices: nv, elem_nodes, edges, elem_edges }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elem_nodes.len()
    }

    pub fn element(&self, k: usize) -> P2Element {
        self.mesh.element(k)
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|x| f(*x)).collect()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_boundary())
    }

    /// Endpoints of an edge as seen from element `k`, ordered counter-clockwise for `k`.
    pub fn edge_endpoints(&self, k: usize, local_edge: usize) -> [Vec2; 2] {
        let t = self.mesh.triangles[k];
        let [i, j] = LOCAL_EDGES[local_edge];
        [self.mesh.vertices[t[i]], self.mesh.vertices[t[j]]]
    }

    /// Outward unit normal of element `k` on its local edge.
    pub fn outward_normal(&self, k: usize, local_edge: usize) -> Vec2 {
        let [a, b] = self.edge_endpoints(k, local_edge);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = (dx * dx + dy * dy).sqrt();
        [dy / len, -dx / len]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.nodes[a], self.nodes[b]);
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    /// Evaluate a nodal P2 field at barycentric point `l` of element `k`.
    pub fn eval(&self, coef: &[f64], k: usize, l: [f64; 3]) -> f64 {
        let v = self.element(k).values(l);
        self.elem_nodes[k].iter().zip(v).map(|(n, b)| coef[*n] * b).sum()
    }

    pub fn eval_grad(&self, coef: &[f64], k: usize, l: [f64; 3]) -> Vec2 {
        let g = self.element(k).grads(l);
        let mut out = [0.0; 2];
        for (i, n) in self.elem_nodes[k].iter().enumerate() {
            out[0] += coef[*n] * g[i][0];
            out[1] += coef[*n] * g[i][1];
        }
        out
    }

    pub fn eval_hessian(&self, coef: &[f64], k: usize) -> [[f64; 2]; 2] {
        let h = self.element(k).hessians();
        let mut out = [[0.0; 2]; 2];
        for (i, n) in self.elem_nodes[k].iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    out[a][b] += coef[*n] * h[i][a][b];
                }
            }
        }
        out
    }

    /// `‖∇u‖_{L²}` over the mesh with the given rule.
    pub fn grad_l2_norm(&self, coef: &[f64], rule: &super::QuadratureRule) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.n_elements() {
            let area2 = 2.0 * self.mesh.signed_area(k);
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let g = self.eval_grad(coef, k, *l);
                acc += area2 * w * (g[0] * g[0] + g[1] * g[1]);
            }
        }
        acc.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structured_counts() {
        let m = TriMesh::structured(4, 4, [0.0, 0.0], [1.0, 1.0]);
        assert_eq!(m.triangles.len(), 32);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        for k in 0..m.triangles.len() {
            assert!(m.signed_area(k) > 0.0);
        }
        let s = P2Space::new(m);
        assert_eq!(s.n_nodes(), 81);
        assert_eq!(s.edges.len(), 56);
        assert_eq!(s.boundary_edges().count(), 16);
    }

    #[test]
    fn outward_normals_point_away() {
        let s = P2Space::new(TriMesh::structured(2, 2, [0.0, 0.0], [1.0, 1.0]));
        for k in 0..s.n_elements() {
            let c = s.element(k).centroid();
            for le in 0..3 {
                let [a, b] = s.edge_endpoints(k, le);
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let n = s.outward_normal(k, le);
                assert!((mid[0] - c[0]) * n[0] + (mid[1] - c[1]) * n[1] > 0.0);
            }
        }
    }
}
