//! Homogenized membrane and bending problems on the unperforated mid-surface domain.

use crate::error::{Error, Result, StageExt};
use crate::fem::assembly::{ElementQuad, FieldLayout, MembraneAssembly, MembraneCoeffs};
use crate::fem::c0ip::{interior_faces, nitsche_faces, stability_probe, PlateForm};
use crate::fem::quadrature::gauss_legendre;
use crate::fem::solver::{factorize, SolveSettings};
use crate::fem::{DofMap, P2Space, QuadratureRule, TriMesh};
use crate::geometry::{Rect, SurfaceChart};
use crate::material::{Mat2, Stiffness};
use serde::{Deserialize, Serialize};

pub type Vec2 = [f64; 2];

/// Thickness integral `∫_{-1}^{1} f(t) dt` by Gauss–Legendre with `points ≥ 3` nodes.
pub fn thickness_reduce(f: impl Fn(f64) -> f64, points: usize) -> f64 {
    let (t, w) = gauss_legendre(points.max(3));
    t.iter().zip(&w).map(|(t, w)| w * f(*t)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

pub const ALL_SIDES: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

impl Side {
    pub fn contains(&self, domain: &Rect, x: Vec2) -> bool {
        let tol = 1e-10 * domain.width().max(domain.height());
        match self {
            Side::Left => (x[0] - domain.x0).abs() <= tol,
            Side::Right => (x[0] - domain.x1).abs() <= tol,
            Side::Bottom => (x[1] - domain.y0).abs() <= tol,
            Side::Top => (x[1] - domain.y1).abs() <= tol,
        }
    }
}

/// Boundary parts: mechanical clamp, electric ground, and the electrode region
/// (potential free inside, grounded outside; `None` means all of `ω`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Markers {
    #[serde(default = "all_sides")]
    pub clamp: Vec<Side>,
    #[serde(default = "all_sides")]
    pub ground: Vec<Side>,
    #[serde(default)]
    pub electrode: Option<Rect>,
}

fn all_sides() -> Vec<Side> {
    ALL_SIDES.to_vec()
}

impl Default for Markers {
    fn default() -> Self {
        Markers { clamp: all_sides(), ground: all_sides(), electrode: None }
    }
}

impl Markers {
    pub fn clamped(&self, domain: &Rect, x: Vec2) -> bool {
        self.clamp.iter().any(|s| s.contains(domain, x))
    }

    pub fn grounded(&self, domain: &Rect, x: Vec2) -> bool {
        self.ground.iter().any(|s| s.contains(domain, x)) || self.electrode.is_some_and(|r| !r.contains(x, 1e-12))
    }
}

/// Structured triangulation of the macro rectangle with boundary markers.
#[derive(Debug, Clone)]
pub struct MacroMesh {
    pub domain: Rect,
    pub n: [usize; 2],
    pub space: P2Space,
    pub markers: Markers,
}

impl MacroMesh {
    pub fn new(domain: Rect, n: [usize; 2], markers: Markers) -> Result<Self> {
        if n[0] == 0 || n[1] == 0 {
            return Err(Error::config("macro mesh needs at least one cell per side"));
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(Error::Geometry("macro domain has zero area".into()));
        }
        let mesh = TriMesh::structured(n[0], n[1], [domain.x0, domain.y0], [domain.width(), domain.height()]);
        Ok(MacroMesh { domain, n, space: P2Space::new(mesh), markers })
    }

    /// Element containing `x` and its barycentric coordinates.
    pub fn locate(&self, x: Vec2) -> (usize, [f64; 3]) {
        let s = (x[0] - self.domain.x0) / self.domain.width() * self.n[0] as f64;
        let t = (x[1] - self.domain.y0) / self.domain.height() * self.n[1] as f64;
        let i = (s.floor().max(0.0) as usize).min(self.n[0] - 1);
        let j = (t.floor().max(0.0) as usize).min(self.n[1] - 1);
        let (fs, ft) = (s - i as f64, t - j as f64);
        let k = 2 * (j * self.n[0] + i) + usize::from(ft > fs);
        (k, self.space.element(k).barycentric(x))
    }

    fn clamp_map(&self) -> DofMap {
        DofMap::dirichlet(self.space.n_nodes(), |i| self.markers.clamped(&self.domain, self.space.nodes[i]))
    }

    fn ground_map(&self) -> DofMap {
        DofMap::dirichlet(self.space.n_nodes(), |i| self.markers.grounded(&self.domain, self.space.nodes[i]))
    }
}

/// Nodal membrane solution; `u[2]` is zero on flat charts, where it decouples.
#[derive(Debug, Clone)]
pub struct MembraneSolution {
    pub u: [Vec<f64>; 3],
    pub phi: Vec<f64>,
    pub residual: f64,
    /// Virtual work of the load on the solution, and `|x·Kx − b·x| / |b·x|`.
    pub load_work: f64,
    pub energy_defect: f64,
}

fn energy_balance(k: &crate::fem::CsrMatrix, b: &[f64], x: &[f64]) -> (f64, f64) {
    let work: f64 = b.iter().zip(x).map(|(b, x)| b * x).sum();
    let e = k.bilinear(x, x);
    let defect = if work != 0.0 { (e - work).abs() / work.abs() } else { e.abs() };
    (work, defect)
}

/// Coupled homogenized membrane problem with coefficients `(c̄, ē, d̄)` and load density
/// `F` (per mid-surface area, already reduced through the thickness), scaled by `|Y*|_a`.
pub fn solve_homogenized_membrane(
    mesh: &MacroMesh,
    coeffs: &MembraneCoeffs,
    ystar_measure: f64,
    chart: &SurfaceChart,
    load: &dyn Fn(Vec2) -> [f64; 3],
    settings: &SolveSettings,
) -> Result<MembraneSolution> {
    if mesh.markers.clamp.is_empty() {
        return Err(Error::BoundaryCondition("no clamped boundary part: rigid motions are not controlled".into()));
    }
    if mesh.markers.ground.is_empty() && mesh.markers.electrode.is_none() {
        return Err(Error::BoundaryCondition("no grounded boundary part: the potential is determined only up to a constant".into()));
    }
    let rule = QuadratureRule::triangle(settings.quadrature_degree)?;
    let curved = !chart.is_flat();
    for x in mesh.domain.corners() {
        chart.frame_at(x).stage("macro chart")?;
    }
    let nd = if curved { 3 } else { 2 };
    let clamp = mesh.clamp_map();
    let mut maps = vec![clamp; nd];
    maps.push(mesh.ground_map());
    let layout = FieldLayout::new(maps, vec![]);
    let geometry = |x: Vec2| chart.geometry_coeffs(x).expect("macro domain checked inside the chart domain");
    let asm = MembraneAssembly {
        space: &mesh.space,
        rule: &rule,
        coeffs: &|_| *coeffs,
        weight: &|_, x| if curved { chart.frame_at(x).expect("macro domain checked inside the chart domain").sqrt_a } else { 1.0 },
        geometry: if curved { Some(&geometry) } else { None },
        layout: &layout,
    };
    let sys = asm.assemble(&[], &[load], ystar_measure);
    let fac = factorize(&sys.matrix)
        .map_err(|e| Error::BoundaryCondition(format!("homogenized membrane system is singular; check clamp and ground markers ({})", e.root())))?;
    let solved = fac.solve(&sys.rhs, settings.residual_tol).stage("homogenized membrane solve")?;
    let x = &solved.solutions[0];
    let (load_work, energy_defect) = energy_balance(&sys.matrix, &sys.rhs[0], x);
    let zero = vec![0.0; mesh.space.n_nodes()];
    Ok(MembraneSolution {
        u: [layout.field_nodal(0, x), layout.field_nodal(1, x), if curved { layout.field_nodal(2, x) } else { zero }],
        phi: layout.field_nodal(nd, x),
        residual: solved.residuals[0],
        load_work,
        energy_defect,
    })
}

#[derive(Debug, Clone)]
pub struct BendingSolution {
    pub deflection: Vec<f64>,
    pub residual: f64,
    pub load_work: f64,
    pub energy_defect: f64,
}

/// Clamped homogenized plate `(2/3) C̄` on a flat chart: deflection fixed strongly on the
/// clamp, slope through boundary penalty faces; load scaled by `|Y*|_a`.
pub fn solve_homogenized_bending(
    mesh: &MacroMesh,
    bending: &Stiffness,
    ystar_measure: f64,
    chart: &SurfaceChart,
    load: &dyn Fn(Vec2) -> f64,
    settings: &SolveSettings,
) -> Result<BendingSolution> {
    let sigma = settings.penalty;
    if !chart.is_flat() {
        return Err(Error::config("bending is implemented for the flat chart only"));
    }
    if mesh.markers.clamp.is_empty() {
        return Err(Error::BoundaryCondition("bending needs a clamped boundary part".into()));
    }
    let plate = bending.scaled(2.0 / 3.0);
    stability_probe(&|_| (plate, 1.0), sigma)?;
    let rule = QuadratureRule::triangle(settings.quadrature_degree)?;
    let mut faces = interior_faces(&mesh.space);
    faces.extend(nitsche_faces(&mesh.space, |e| {
        let ed = &mesh.space.edges[e];
        mesh.markers.clamped(&mesh.domain, mesh.space.nodes[ed.vertices[0]])
            && mesh.markers.clamped(&mesh.domain, mesh.space.nodes[ed.vertices[1]])
            && mesh.markers.clamped(&mesh.domain, mesh.space.nodes[ed.node])
    }));
    let form = PlateForm { space: &mesh.space, rule: &rule, stiffness: &|_| plate, weight: &|_, _| 1.0, faces: &faces, sigma };
    let map = mesh.clamp_map();
    let sys = form.assemble(&map, false, &[], &[load], ystar_measure);
    let fac = factorize(&sys.matrix).map_err(|e| Error::BoundaryCondition(format!("homogenized plate system is singular ({})", e.root())))?;
    let solved = fac.solve(&sys.rhs, settings.residual_tol).stage("homogenized bending solve")?;
    let x = &solved.solutions[0];
    let (load_work, energy_defect) = energy_balance(&sys.matrix, &sys.rhs[0], x);
    Ok(BendingSolution { deflection: map.lift(x), residual: solved.residuals[0], load_work, energy_defect })
}

/// Pointwise jets of a nodal P2 field on a macro mesh.
pub fn eval_value(mesh: &MacroMesh, u: &[f64], x: Vec2) -> f64 {
    let (k, l) = mesh.locate(x);
    mesh.space.eval(u, k, l)
}

pub fn eval_grad(mesh: &MacroMesh, u: &[f64], x: Vec2) -> Vec2 {
    let (k, l) = mesh.locate(x);
    mesh.space.eval_grad(u, k, l)
}

pub fn eval_hessian(mesh: &MacroMesh, u: &[f64], x: Vec2) -> Mat2 {
    let (k, _) = mesh.locate(x);
    mesh.space.eval_hessian(u, k)
}

/// `‖u − exact‖_{L²}` over the mesh with the given rule.
pub fn l2_error(space: &P2Space, u: &[f64], exact: impl Fn(Vec2) -> f64, rule: &QuadratureRule) -> f64 {
    let mut total = 0.0;
    for k in 0..space.n_elements() {
        let q = ElementQuad::new(space, k, rule);
        let nodes = &space.elem_nodes[k];
        for iq in 0..q.weights.len() {
            let v: f64 = (0..6).map(|i| u[nodes[i]] * q.values[iq][i]).sum();
            total += q.weights[iq] * (v - exact(q.points[iq])).powi(2);
        }
    }
    total.sqrt()
}

/// Broken `‖∇²(u − exact)‖_{L²}` with the exact Hessian supplied.
pub fn broken_h2_error(space: &P2Space, u: &[f64], exact_hessian: impl Fn(Vec2) -> Mat2, rule: &QuadratureRule) -> f64 {
    let mut total = 0.0;
    for k in 0..space.n_elements() {
        let h = space.eval_hessian(u, k);
        let q = ElementQuad::new(space, k, rule);
        for iq in 0..q.weights.len() {
            let e = exact_hessian(q.points[iq]);
            let d: f64 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| (h[a][b] - e[a][b]).powi(2)).sum();
            total += q.weights[iq] * d;
        }
    }
    total.sqrt()
}
