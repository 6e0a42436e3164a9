//! Mid-surface charts and the strain operators built on them.
//!
//! Curvature sign: `b_{αβ} = a3 · ∂²_{αβ}φ`, with `a3 = a1 × a2 / |a1 × a2|`.
//! The out-of-plane Christoffel symbol `Γ³_{αβ}` is identified with `b_{αβ}`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];
pub type Mat2 = [[f64; 2]; 2];

const DEGENERATE_TOL: f64 = 1e-12;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]` in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Rect::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn square(side: f64) -> Self {
        Rect::new(0.0, 0.0, side, side)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: [f64; 2], tol: f64) -> bool {
        x[0] >= self.x0 - tol && x[0] <= self.x1 + tol && x[1] >= self.y0 - tol && x[1] <= self.y1 + tol
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [[self.x0, self.y0], [self.x1, self.y0], [self.x1, self.y1], [self.x0, self.y1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartKind {
    Plane,
    /// `φ = (R cos(x₁/R), R sin(x₁/R), x₂)`.
    Cylinder {
        radius: f64,
    },
    /// Graph chart over the tangent plane at the north pole:
    /// `φ = (x₁, x₂, sqrt(R² − x₁² − x₂²))`.
    SpherePatch {
        radius: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceChart {
    pub kind: ChartKind,
    pub domain: Rect,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFrame {
    pub a1: Vec3,
    pub a2: Vec3,
    pub a3: Vec3,
    pub a: f64,
    pub sqrt_a: f64,
}

/// Christoffel symbols and curvature tensors at a point.
///
/// `gamma[k][α][β] = Γ^k_{αβ}`, `b_mixed[ρ][α] = b^ρ_α`,
/// `grad_b_mixed[ρ][α][β] = ∂_β b^ρ_α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryCoefficients {
    pub gamma: [Mat2; 3],
    pub b_mixed: Mat2,
    pub b_cov: Mat2,
    pub c_ab: Mat2,
    pub grad_b_mixed: [[[f64; 2]; 2]; 2],
}

impl GeometryCoefficients {
    pub fn flat() -> Self {
        GeometryCoefficients {
            gamma: [[[0.0; 2]; 2]; 3],
            b_mixed: [[0.0; 2]; 2],
            b_cov: [[0.0; 2]; 2],
            c_ab: [[0.0; 2]; 2],
            grad_b_mixed: [[[0.0; 2]; 2]; 2],
        }
    }
}

/// Value and first/second derivatives of a displacement `v = (v₁, v₂, v₃)`.
///
/// `grad[i][α] = ∂_α v_i`; `hess3[α][β] = ∂²_{αβ} v₃`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisplacementJet {
    pub value: Vec3,
    pub grad: [[f64; 2]; 3],
    pub hess3: Mat2,
}

impl DisplacementJet {
    pub fn add(&self, other: &DisplacementJet) -> DisplacementJet {
        let mut out = *self;
        for i in 0..3 {
            out.value[i] += other.value[i];
            for a in 0..2 {
                out.grad[i][a] += other.grad[i][a];
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                out.hess3[a][b] += other.hess3[a][b];
            }
        }
        out
    }
}

fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn inv2(m: Mat2) -> Option<Mat2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() <= f64::MIN_POSITIVE {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

impl SurfaceChart {
    pub fn new(kind: ChartKind, domain: Rect) -> Result<Self> {
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(Error::Geometry("chart domain must have positive extent".into()));
        }
        match kind {
            ChartKind::Plane => {}
            ChartKind::Cylinder { radius } | ChartKind::SpherePatch { radius } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::Geometry(format!("radius must be positive, got {radius}")));
                }
            }
        }
        if let ChartKind::SpherePatch { radius } = kind {
            for c in domain.corners() {
                if c[0] * c[0] + c[1] * c[1] >= radius * radius * (1.0 - 1e-6) {
                    return Err(Error::Geometry(format!("sphere patch domain reaches the equator of the radius-{radius} sphere")));
                }
            }
        }
        Ok(SurfaceChart { kind, domain })
    }

    pub fn plane(domain: Rect) -> Self {
        SurfaceChart { kind: ChartKind::Plane, domain }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, ChartKind::Plane)
    }

    fn check_domain(&self, x: [f64; 2]) -> Result<()> {
        if !(x[0].is_finite() && x[1].is_finite()) || !self.domain.contains(x, 1e-12) {
            return Err(Error::Geometry(format!("point ({}, {}) outside chart domain", x[0], x[1])));
        }
        Ok(())
    }

    /// The embedding `φ(x)`.
    pub fn point(&self, x: [f64; 2]) -> Vec3 {
        match self.kind {
            ChartKind::Plane => [x[0], x[1], 0.0],
            ChartKind::Cylinder { radius: r } => {
                let t = x[0] / r;
                [r * t.cos(), r * t.sin(), x[1]]
            }
            ChartKind::SpherePatch { radius: r } => {
                let w2 = r * r - x[0] * x[0] - x[1] * x[1];
                [x[0], x[1], w2.max(0.0).sqrt()]
            }
        }
    }

    /// Tangent vectors `(∂₁φ, ∂₂φ)`.
    pub fn tangents(&self, x: [f64; 2]) -> [Vec3; 2] {
        match self.kind {
            ChartKind::Plane => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            ChartKind::Cylinder { radius: r } => {
                let t = x[0] / r;
                [[-t.sin(), t.cos(), 0.0], [0.0, 0.0, 1.0]]
            }
            ChartKind::SpherePatch { radius: r } => {
                let w = (r * r - x[0] * x[0] - x[1] * x[1]).sqrt();
                [[1.0, 0.0, -x[0] / w], [0.0, 1.0, -x[1] / w]]
            }
        }
    }

    /// Second derivatives `∂²_{αβ}φ`, indexed `[α][β]`.
    pub fn second_derivatives(&self, x: [f64; 2]) -> [[Vec3; 2]; 2] {
        let z = [0.0; 3];
        match self.kind {
            ChartKind::Plane => [[z; 2]; 2],
            ChartKind::Cylinder { radius: r } => {
                let t = x[0] / r;
                [[[-t.cos() / r, -t.sin() / r, 0.0], z], [z, z]]
            }
            ChartKind::SpherePatch { radius: r } => {
                let w2 = r * r - x[0] * x[0] - x[1] * x[1];
                let w3 = w2 * w2.sqrt();
                let d11 = -(r * r - x[1] * x[1]) / w3;
                let d12 = -x[0] * x[1] / w3;
                let d22 = -(r * r - x[0] * x[0]) / w3;
                [[[0.0, 0.0, d11], [0.0, 0.0, d12]], [[0.0, 0.0, d12], [0.0, 0.0, d22]]]
            }
        }
    }

    pub fn frame_at(&self, x: [f64; 2]) -> Result<SurfaceFrame> {
        self.check_domain(x)?;
        let [a1, a2] = self.tangents(x);
        let n = cross3(a1, a2);
        let a = dot3(a1, a1) * dot3(a2, a2) - dot3(a1, a2).powi(2);
        if !(a > DEGENERATE_TOL) {
            return Err(Error::Geometry(format!("degenerate metric a = {a:e} at ({}, {})", x[0], x[1])));
        }
        let len = dot3(n, n).sqrt();
        let a3 = [n[0] / len, n[1] / len, n[2] / len];
        Ok(SurfaceFrame { a1, a2, a3, a, sqrt_a: a.sqrt() })
    }

    /// Covariant metric `a_{αβ}`.
    pub fn metric(&self, x: [f64; 2]) -> Mat2 {
        let t = self.tangents(x);
        let mut m = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] = dot3(t[a], t[b]);
            }
        }
        m
    }

    pub fn geometry_coeffs(&self, x: [f64; 2]) -> Result<GeometryCoefficients> {
        let frame = self.frame_at(x)?;
        let cov = self.metric(x);
        let contra = inv2(cov).ok_or_else(|| Error::Geometry("singular metric".into()))?;
        let t = [frame.a1, frame.a2];
        // dual basis a^σ = a^{σρ} a_ρ
        let mut dual = [[0.0; 3]; 2];
        for s in 0..2 {
            for r in 0..2 {
                for i in 0..3 {
                    dual[s][i] += contra[s][r] * t[r][i];
                }
            }
        }
        let d2 = self.second_derivatives(x);
        let mut gamma = [[[0.0; 2]; 2]; 3];
        for a in 0..2 {
            for b in 0..2 {
                for s in 0..2 {
                    gamma[s][a][b] = dot3(dual[s], d2[a][b]);
                }
                gamma[2][a][b] = dot3(frame.a3, d2[a][b]);
            }
        }
        let b_cov = gamma[2];
        let mut b_mixed = [[0.0; 2]; 2];
        for r in 0..2 {
            for a in 0..2 {
                for s in 0..2 {
                    b_mixed[r][a] += contra[r][s] * b_cov[s][a];
                }
            }
        }
        let mut c_ab = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for g in 0..2 {
                    c_ab[a][b] += b_mixed[g][a] * b_cov[g][b];
                }
            }
        }
        // Every built-in chart has constant mixed curvature: the cylinder trivially,
        // the sphere because b^ρ_α = −δ^ρ_α / R everywhere.
        let grad_b_mixed = [[[0.0; 2]; 2]; 2];
        Ok(GeometryCoefficients { gamma, b_mixed, b_cov, c_ab, grad_b_mixed })
    }
}

/// `γ_{αβ}(v) = ½(∂_α v_β + ∂_β v_α) − Γ^k_{αβ} v_k`.
pub fn membrane_strain(geom: &GeometryCoefficients, v: &DisplacementJet) -> Mat2 {
    let mut g = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut s = 0.5 * (v.grad[b][a] + v.grad[a][b]);
            for k in 0..3 {
                s -= geom.gamma[k][a][b] * v.value[k];
            }
            g[a][b] = s;
        }
    }
    g
}

/// Bending strain `Υ_{αβ}(v)`, including every curvature and Christoffel term.
pub fn bending_strain(geom: &GeometryCoefficients, v: &DisplacementJet) -> Mat2 {
    let gm = &geom.gamma;
    let bm = &geom.b_mixed;
    let mut u = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut inner = v.hess3[a][b];
            for r in 0..2 {
                let mut coef = -geom.grad_b_mixed[r][a][b];
                for g in 0..2 {
                    coef += bm[g][b] * gm[r][a][g];
                    coef += gm[g][a][b] * bm[r][g];
                }
                inner -= v.value[r] * coef;
                inner += bm[r][a] * v.grad[r][b];
            }
            inner -= geom.c_ab[a][b] * v.value[2];
            for d in 0..2 {
                inner -= gm[d][a][b] * v.grad[2][d];
            }
            u[a][b] = -inner;
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn plane_frame_is_canonical() {
        let c = SurfaceChart::plane(Rect::unit());
        let f = c.frame_at([0.3, 0.7]).unwrap();
        assert_eq!(f.a1, [1.0, 0.0, 0.0]);
        assert_eq!(f.a2, [0.0, 1.0, 0.0]);
        assert_eq!(f.a3, [0.0, 0.0, 1.0]);
        assert_eq!(f.a, 1.0);
        assert_eq!(c.geometry_coeffs([0.3, 0.7]).unwrap(), GeometryCoefficients::flat());
    }

    #[test]
    fn cylinder_frame_and_curvature() {
        let c = SurfaceChart::new(ChartKind::Cylinder { radius: 2.0 }, Rect::new(-1.0, 0.0, 1.0, 1.0)).unwrap();
        let f = c.frame_at([0.0, 0.5]).unwrap();
        assert!(close(f.a, 1.0, 1e-15));
        // φ(0, x₂) = (2, 0, x₂): radial direction is e₁
        assert!(close(f.a3[0], 1.0, 1e-15) && f.a3[1].abs() < 1e-15 && f.a3[2].abs() < 1e-15);
        let g = c.geometry_coeffs([0.0, 0.5]).unwrap();
        let nonzero: Vec<f64> = g.b_cov.iter().flatten().copied().filter(|v| v.abs() > 1e-14).collect();
        assert_eq!(nonzero.len(), 1);
        assert!(close(nonzero[0].abs(), 0.5, 1e-14));
        assert!(close(g.c_ab[0][0], 0.25, 1e-14));
        assert!(g.c_ab[0][1].abs() < 1e-15 && g.c_ab[1][1].abs() < 1e-15);
    }

    #[test]
    fn sphere_center() {
        let c = SurfaceChart::new(ChartKind::SpherePatch { radius: 1.0 }, Rect::new(-0.5, -0.5, 0.5, 0.5)).unwrap();
        let f = c.frame_at([0.0, 0.0]).unwrap();
        assert_eq!(f.a3, [0.0, 0.0, 1.0]);
        assert!(close(f.a, 1.0, 1e-15));
        let g = c.geometry_coeffs([0.0, 0.0]).unwrap();
        for r in 0..2 {
            for a in 0..2 {
                let d = if r == a { 1.0 } else { 0.0 };
                assert!(close(g.b_mixed[r][a], -d, 1e-14));
                assert!(close(g.c_ab[r][a], d, 1e-14));
            }
        }
    }

    #[test]
    fn sphere_rejects_equator() {
        assert!(SurfaceChart::new(ChartKind::SpherePatch { radius: 1.0 }, Rect::new(0.0, 0.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn outside_domain_is_error() {
        let c = SurfaceChart::plane(Rect::unit());
        assert!(matches!(c.frame_at([1.5, 0.0]), Err(Error::Geometry(_))));
    }

    #[test]
    fn membrane_strain_examples() {
        let flat = GeometryCoefficients::flat();
        let mut v = DisplacementJet { value: [0.4, 0.0, 0.0], ..Default::default() };
        v.grad[0] = [1.0, 0.0];
        let g = membrane_strain(&flat, &v);
        assert_eq!(g, [[1.0, 0.0], [0.0, 0.0]]);

        let rigid = DisplacementJet { value: [1.0, -2.0, 3.0], ..Default::default() };
        assert_eq!(membrane_strain(&flat, &rigid), [[0.0; 2]; 2]);

        let c = SurfaceChart::new(ChartKind::Cylinder { radius: 2.0 }, Rect::new(-1.0, 0.0, 1.0, 1.0)).unwrap();
        let geo = c.geometry_coeffs([0.2, 0.3]).unwrap();
        let normal = DisplacementJet { value: [0.0, 0.0, 1.0], ..Default::default() };
        let g = membrane_strain(&geo, &normal);
        for a in 0..2 {
            for b in 0..2 {
                assert!(close(g[a][b], -geo.b_cov[a][b], 1e-15));
            }
        }
    }

    #[test]
    fn bending_strain_examples() {
        let flat = GeometryCoefficients::flat();
        let v = DisplacementJet { value: [0.0, 0.0, 0.09], grad: [[0.0; 2], [0.0; 2], [0.6, 0.0]], hess3: [[2.0, 0.0], [0.0, 0.0]] };
        assert_eq!(bending_strain(&flat, &v), [[-2.0, 0.0], [0.0, 0.0]]);
        let affine = DisplacementJet { value: [0.0, 0.0, 1.0], grad: [[0.0; 2], [0.0; 2], [2.0, -1.0]], hess3: [[0.0; 2]; 2] };
        assert_eq!(bending_strain(&flat, &affine), [[0.0; 2]; 2]);

        let c = SurfaceChart::new(ChartKind::Cylinder { radius: 3.0 }, Rect::new(-1.0, 0.0, 1.0, 1.0)).unwrap();
        let geo = c.geometry_coeffs([0.1, 0.1]).unwrap();
        let normal = DisplacementJet { value: [0.0, 0.0, 1.0], ..Default::default() };
        let u = bending_strain(&geo, &normal);
        for a in 0..2 {
            for b in 0..2 {
                assert!(close(u[a][b], geo.c_ab[a][b], 1e-15));
            }
        }
    }
}
