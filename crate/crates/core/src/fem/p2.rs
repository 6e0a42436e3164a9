//! Quadratic Lagrange triangle on straight-sided elements.
//!
//! Local node order: vertices 0, 1, 2, then midpoints of edges (0,1), (1,2), (2,0).

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Local vertex pairs of the three edges; edge `i` carries local node `3 + i`.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

#[derive(Debug, Clone, Copy)]
pub struct P2Element {
    pub vertices: [Vec2; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad_bary: [Vec2; 3],
}

impl P2Element {
    /// Signed area determines orientation; callers keep counter-clockwise elements.
    pub fn new(vertices: [Vec2; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let area = 0.5 * det;
        // ∇λ_i = rot(p_{i+2} - p_{i+1}) / (2A)
        let mut grad_bary = [[0.0; 2]; 3];
        for i in 0..3 {
            let a = vertices[(i + 1) % 3];
            let b = vertices[(i + 2) % 3];
            grad_bary[i] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        }
        P2Element { vertices, area, grad_bary }
    }

    pub fn point(&self, bary: [f64; 3]) -> Vec2 {
        let mut x = [0.0; 2];
        for i in 0..3 {
            x[0] += bary[i] * self.vertices[i][0];
            x[1] += bary[i] * self.vertices[i][1];
        }
        x
    }

    pub fn barycentric(&self, x: Vec2) -> [f64; 3] {
        let p0 = self.vertices[0];
        let l1 = self.grad_bary[1][0] * (x[0] - p0[0]) + self.grad_bary[1][1] * (x[1] - p0[1]);
        let l2 = self.grad_bary[2][0] * (x[0] - p0[0]) + self.grad_bary[2][1] * (x[1] - p0[1]);
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn centroid(&self) -> Vec2 {
        self.point([1.0 / 3.0; 3])
    }

    pub fn values(&self, l: [f64; 3]) -> [f64; 6] {
        [l[0] * (2.0 * l[0] - 1.0), l[1] * (2.0 * l[1] - 1.0), l[2] * (2.0 * l[2] - 1.0), 4.0 * l[0] * l[1], 4.0 * l[1] * l[2], 4.0 * l[2] * l[0]]
    }

    pub fn grads(&self, l: [f64; 3]) -> [Vec2; 6] {
        let g = &self.grad_bary;
        let mut out = [[0.0; 2]; 6];
        for i in 0..3 {
            let s = 4.0 * l[i] - 1.0;
            out[i] = [s * g[i][0], s * g[i][1]];
        }
        for (e, [i, j]) in LOCAL_EDGES.iter().enumerate() {
            out[3 + e] = [4.0 * (l[*i] * g[*j][0] + l[*j] * g[*i][0]), 4.0 * (l[*i] * g[*j][1] + l[*j] * g[*i][1])];
        }
        out
    }

    /// Hessians are constant on the element.
    pub fn hessians(&self) -> [Mat2; 6] {
        let g = &self.grad_bary;
        let mut out = [[[0.0; 2]; 2]; 6];
        for i in 0..3 {
            for a in 0..2 {
                for b in 0..2 {
                    out[i][a][b] = 4.0 * g[i][a] * g[i][b];
                }
            }
        }
        for (e, [i, j]) in LOCAL_EDGES.iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    out[3 + e][a][b] = 4.0 * (g[*i][a] * g[*j][b] + g[*j][a] * g[*i][b]);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::QuadratureRule;

    fn tri() -> P2Element {
        P2Element::new([[0.1, 0.2], [0.9, 0.35], [0.3, 0.8]])
    }

    #[test]
    fn nodal_basis_is_kronecker() {
        let e = tri();
        let bary = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
        for (j, b) in bary.iter().enumerate() {
            let v = e.values(*b);
            for (i, vi) in v.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vi - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn basis_integrals() {
        let e = tri();
        let q = QuadratureRule::triangle(4).unwrap();
        let mut ints = [0.0; 6];
        for (p, w) in q.points.iter().zip(&q.weights) {
            let v = e.values(*p);
            for i in 0..6 {
                ints[i] += 2.0 * e.area * w * v[i];
            }
        }
        for (i, val) in ints.iter().enumerate() {
            let expect = if i < 3 { 0.0 } else { e.area / 3.0 };
            assert!((val - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn reproduces_quadratics() {
        let e = tri();
        let f = |x: Vec2| 1.0 + 2.0 * x[0] - x[1] + 3.0 * x[0] * x[0] - x[0] * x[1] + 0.5 * x[1] * x[1];
        let nodes: Vec<Vec2> = (0..3)
            .map(|i| e.vertices[i])
            .chain(LOCAL_EDGES.iter().map(|[i, j]| [0.5 * (e.vertices[*i][0] + e.vertices[*j][0]), 0.5 * (e.vertices[*i][1] + e.vertices[*j][1])]))
            .collect();
        let coef: Vec<f64> = nodes.iter().map(|x| f(*x)).collect();
        let l = [0.2, 0.3, 0.5];
        let x = e.point(l);
        let val: f64 = e.values(l).iter().zip(&coef).map(|(a, b)| a * b).sum();
        assert!((val - f(x)).abs() < 1e-13);
        let g = e.grads(l);
        let gx: f64 = (0..6).map(|i| g[i][0] * coef[i]).sum();
        let gy: f64 = (0..6).map(|i| g[i][1] * coef[i]).sum();
        assert!((gx - (2.0 + 6.0 * x[0] - x[1])).abs() < 1e-12);
        assert!((gy - (-1.0 - x[0] + x[1])).abs() < 1e-12);
        let h = e.hessians();
        let hxx: f64 = (0..6).map(|i| h[i][0][0] * coef[i]).sum();
        let hxy: f64 = (0..6).map(|i| h[i][0][1] * coef[i]).sum();
        let hyy: f64 = (0..6).map(|i| h[i][1][1] * coef[i]).sum();
        assert!((hxx - 6.0).abs() < 1e-11 && (hxy + 1.0).abs() < 1e-11 && (hyy - 1.0).abs() < 1e-11);
        let back = e.barycentric(x);
        for i in 0..3 {
            assert!((back[i] - l[i]).abs() < 1e-14);
        }
    }
}
