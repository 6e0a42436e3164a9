//! Direct solves of the oscillating problems on the perforated domain and the corrector
//! error study against the homogenized solutions.

use crate::cell::PeriodicCellMesh;
use crate::error::{Error, Result, StageExt};
use crate::fem::assembly::{FieldLayout, MembraneAssembly, MembraneCoeffs};
use crate::fem::c0ip::{interior_faces, nitsche_faces, stability_probe, PlateForm};
use crate::fem::solver::{factorize, SolveSettings};
use crate::fem::{DofMap, P2Space, QuadratureRule, TriMesh};
use crate::geometry::{Rect, SurfaceChart};
use crate::homogenize::{
    bending_tensor, membrane_tensors_direct, solve_bending_cells, solve_membrane_cells, BendingCellSolutions, CellMaterial, MembraneCellSolutions,
};
use crate::macro_solver::{solve_homogenized_bending, solve_homogenized_membrane, MacroMesh, Markers};
use crate::material::{Mat2, MaterialField};
use crate::unfold::{cell_averages, EpsField, EpsGrid};
use serde::Serialize;
use std::collections::HashMap;
use std::time::Instant;

pub type Vec2 = [f64; 2];

/// `ω^ε` as an `m₁ × m₂` tiling of the scaled cell mesh. Element `k·n_cell + j` is cell
/// element `j` of tile `k`, matching the [`EpsGrid`] slot layout.
#[derive(Debug, Clone)]
pub struct PerforatedMacroMesh {
    pub grid: EpsGrid,
    pub space: P2Space,
    pub n_cell_elements: usize,
    pub markers: Markers,
}

pub fn build_perforated_macro(
    cell: &PeriodicCellMesh,
    eps: f64,
    domain: Rect,
    markers: Markers,
    rule: &QuadratureRule,
) -> Result<PerforatedMacroMesh> {
    let grid = EpsGrid::new(cell, rule, domain, eps)?;
    let eps = grid.eps;
    let cv = cell.vertices();
    let mut vertices: Vec<Vec2> = Vec::new();
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut triangles = Vec::with_capacity(grid.n_cells() * cell.triangles().len());
    let quant = |x: Vec2| (((x[0] - domain.x0) / eps * 1e8).round() as i64, ((x[1] - domain.y0) / eps * 1e8).round() as i64);
    let mut local = vec![0usize; cv.len()];
    for k in 0..grid.n_cells() {
        let o = grid.cell_origin(k);
        for (i, v) in cv.iter().enumerate() {
            let x = [o[0] + eps * v[0], o[1] + eps * v[1]];
            let next = vertices.len();
            let id = *index.entry(quant(x)).or_insert(next);
            if id == next {
                vertices.push(x);
            }
            local[i] = id;
        }
        for t in cell.triangles() {
            triangles.push([local[t[0]], local[t[1]], local[t[2]]]);
        }
    }
    let space = P2Space::new(TriMesh { vertices, triangles });
    let boundary_per_side: [usize; 2] = {
        let on = |e: usize, axis: usize| {
            let m = cell.space.nodes[cell.space.edges[e].node];
            m[axis].abs() < 1e-12
        };
        let near: Vec<usize> = cell.periodic_faces.iter().map(|f| f.1).collect();
        [near.iter().filter(|&&e| on(e, 1)).count(), near.iter().filter(|&&e| on(e, 0)).count()]
    };
    let expected = 2 * (grid.cells[0] * boundary_per_side[0] + grid.cells[1] * boundary_per_side[1]) + grid.n_cells() * cell.hole_boundary.len();
    let found = space.boundary_edges().count();
    if found != expected {
        return Err(Error::Internal(format!("tiling mismatch: {found} boundary edges, expected {expected}; the cell mesh is not periodic")));
    }
    Ok(PerforatedMacroMesh { grid, space, n_cell_elements: cell.triangles().len(), markers })
}

impl PerforatedMacroMesh {
    pub fn tile_of(&self, e: usize) -> (usize, usize) {
        (e / self.n_cell_elements, e % self.n_cell_elements)
    }

    /// `{x/ε}` of a point inside element `e`.
    pub fn micro(&self, e: usize, x: Vec2) -> Vec2 {
        let o = self.grid.cell_origin(e / self.n_cell_elements);
        [(x[0] - o[0]) / self.grid.eps, (x[1] - o[1]) / self.grid.eps]
    }

    fn clamp_map(&self) -> DofMap {
        let d = &self.grid.domain;
        DofMap::dirichlet(self.space.n_nodes(), |i| self.markers.clamped(d, self.space.nodes[i]))
    }

    fn ground_map(&self) -> DofMap {
        let d = &self.grid.domain;
        DofMap::dirichlet(self.space.n_nodes(), |i| self.markers.grounded(d, self.space.nodes[i]))
    }
}

#[derive(Debug, Clone)]
pub struct EpsMembraneSolution {
    pub u: [Vec<f64>; 2],
    pub phi: Vec<f64>,
    pub residual: f64,
    pub load_work: f64,
}

/// Flat-chart coupled problem with materials at `{x/ε}` and load density `F`.
pub fn solve_eps_membrane(
    perf: &PerforatedMacroMesh,
    cell: &PeriodicCellMesh,
    material: &MaterialField,
    chart: &SurfaceChart,
    load: &dyn Fn(Vec2) -> [f64; 3],
    settings: &SolveSettings,
) -> Result<EpsMembraneSolution> {
    if !chart.is_flat() {
        return Err(Error::config("the oscillating-problem study runs on the flat chart"));
    }
    if perf.markers.clamp.is_empty() || (perf.markers.ground.is_empty() && perf.markers.electrode.is_none()) {
        return Err(Error::BoundaryCondition("ε-problem needs clamped and grounded boundary parts".into()));
    }
    let rule = QuadratureRule::triangle(settings.quadrature_degree)?;
    let mat = CellMaterial::new(cell, material);
    let clamp = perf.clamp_map();
    let layout = FieldLayout::new(vec![clamp.clone(), clamp, perf.ground_map()], vec![]);
    let nce = perf.n_cell_elements;
    let asm = MembraneAssembly {
        space: &perf.space,
        rule: &rule,
        coeffs: &|e| mat.membrane(e % nce),
        weight: &|e, x| mat.weight(perf.micro(e, x)),
        geometry: None,
        layout: &layout,
    };
    let sys = asm.assemble(&[], &[load], 1.0);
    let solved =
        factorize(&sys.matrix).and_then(|f| f.solve(&sys.rhs, settings.residual_tol)).stage(format!("ε = {} membrane solve", perf.grid.eps))?;
    let x = &solved.solutions[0];
    let load_work = sys.rhs[0].iter().zip(x).map(|(b, x)| b * x).sum();
    Ok(EpsMembraneSolution {
        u: [layout.field_nodal(0, x), layout.field_nodal(1, x)],
        phi: layout.field_nodal(2, x),
        residual: solved.residuals[0],
        load_work,
    })
}

#[derive(Debug, Clone)]
pub struct EpsBendingSolution {
    pub deflection: Vec<f64>,
    pub residual: f64,
    pub load_work: f64,
}

/// Clamped plate `(2/3) C({x/ε}) √a({x/ε})` on `ω^ε`; hole boundaries are free.
pub fn solve_eps_bending(
    perf: &PerforatedMacroMesh,
    cell: &PeriodicCellMesh,
    material: &MaterialField,
    load: &dyn Fn(Vec2) -> f64,
    settings: &SolveSettings,
) -> Result<EpsBendingSolution> {
    let sigma = settings.penalty;
    if perf.markers.clamp.is_empty() {
        return Err(Error::BoundaryCondition("ε-plate needs a clamped boundary part".into()));
    }
    stability_probe(
        &|y| {
            let p = material.phase(material.phase_index_at(y));
            (p.bending.scaled(2.0 / 3.0), material.sqrt_a(y))
        },
        sigma,
    )?;
    let rule = QuadratureRule::triangle(settings.quadrature_degree)?;
    let mat = CellMaterial::new(cell, material);
    let nce = perf.n_cell_elements;
    let d = perf.grid.domain;
    let mut faces = interior_faces(&perf.space);
    faces.extend(nitsche_faces(&perf.space, |e| {
        let ed = &perf.space.edges[e];
        [ed.vertices[0], ed.vertices[1], ed.node].iter().all(|&n| perf.markers.clamped(&d, perf.space.nodes[n]))
    }));
    let form = PlateForm {
        space: &perf.space,
        rule: &rule,
        stiffness: &|e| mat.bending(e % nce).scaled(2.0 / 3.0),
        weight: &|e, x| mat.weight(perf.micro(e, x)),
        faces: &faces,
        sigma,
    };
    let map = perf.clamp_map();
    let sys = form.assemble(&map, false, &[], &[load], 1.0);
    let solved =
        factorize(&sys.matrix).and_then(|f| f.solve(&sys.rhs, settings.residual_tol)).stage(format!("ε = {} bending solve", perf.grid.eps))?;
    let x = &solved.solutions[0];
    let load_work = sys.rhs[0].iter().zip(x).map(|(b, x)| b * x).sum();
    Ok(EpsBendingSolution { deflection: map.lift(x), residual: solved.residuals[0], load_work })
}

/// Voigt coefficients `(v₁₁, v₂₂, 2v₁₂)` of a symmetric tensor in the unit-strain basis.
fn unit_coeffs(m: &Mat2) -> [f64; 3] {
    [m[0][0], m[1][1], m[0][1] + m[1][0]]
}

fn sym(g0: Vec2, g1: Vec2) -> Mat2 {
    let off = 0.5 * (g0[1] + g1[0]);
    [[g0[0], off], [off, g1[1]]]
}

/// Per-slot micro data of the cell correctors: strains, potential gradients, Hessians.
struct MicroData {
    sw: Vec<[Mat2; 3]>,
    gzeta: Vec<[Vec2; 3]>,
    sz: Vec<[Mat2; 2]>,
    geta: Vec<[Vec2; 2]>,
}

fn micro_data(cell: &PeriodicCellMesh, grid: &EpsGrid, rule: &QuadratureRule, m: &MembraneCellSolutions) -> MicroData {
    let ns = grid.n_slots();
    let mut d = MicroData { sw: Vec::with_capacity(ns), gzeta: Vec::with_capacity(ns), sz: Vec::with_capacity(ns), geta: Vec::with_capacity(ns) };
    for s in 0..ns {
        let j = grid.slot_element[s];
        let l = rule.points[s % grid.points_per_element];
        let g = |u: &[f64]| cell.space.eval_grad(u, j, l);
        d.sw.push(std::array::from_fn(|p| sym(g(&m.w[p][0]), g(&m.w[p][1]))));
        d.gzeta.push(std::array::from_fn(|p| g(&m.zeta[p])));
        d.sz.push(std::array::from_fn(|q| sym(g(&m.z[q][0]), g(&m.z[q][1]))));
        d.geta.push(std::array::from_fn(|q| g(&m.eta[q])));
    }
    d
}

/// Macro membrane data sampled on the layout: `γ(u)` as Voigt coefficients and `∇φ`.
pub struct MacroSamples {
    pub strain: EpsField,
    pub field: EpsField,
}

/// `U^ε(s_y(u¹))` (Voigt `11, 22, 12`) and `U^ε(∇_y φ¹)` from
/// `u¹ = γ_{τθ}(u) w^{τθ} + ∂_σφ z^σ`, `φ¹ = γ_{τθ}(u) ζ^{τθ} + ∂_σφ η^σ`.
pub fn reconstruct_membrane_corrector(
    macro_samples: &MacroSamples,
    cells: &MembraneCellSolutions,
    cell: &PeriodicCellMesh,
    grid: &EpsGrid,
    rule: &QuadratureRule,
) -> Result<(EpsField, EpsField)> {
    if macro_samples.strain.ncomp != 3 || macro_samples.field.ncomp != 2 {
        return Err(Error::Shape("macro samples must carry 3 strain and 2 field components".into()));
    }
    let gbar = cell_averages(&macro_samples.strain, grid)?;
    let fbar = cell_averages(&macro_samples.field, grid)?;
    let md = micro_data(cell, grid, rule, cells);
    let ns = grid.n_slots();
    let mut strain = Vec::with_capacity(grid.len() * 3);
    let mut field = Vec::with_capacity(grid.len() * 2);
    for k in 0..grid.n_cells() {
        let g = &gbar[3 * k..3 * k + 3];
        let f = &fbar[2 * k..2 * k + 2];
        for s in 0..ns {
            let mut e = [[0.0; 2]; 2];
            let mut p_grad = [0.0; 2];
            for p in 0..3 {
                for a in 0..2 {
                    for b in 0..2 {
                        e[a][b] += g[p] * md.sw[s][p][a][b];
                    }
                    p_grad[a] += g[p] * md.gzeta[s][p][a];
                }
            }
            for q in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        e[a][b] += f[q] * md.sz[s][q][a][b];
                    }
                    p_grad[a] += f[q] * md.geta[s][q][a];
                }
            }
            strain.extend([e[0][0], e[1][1], e[0][1]]);
            field.extend(p_grad);
        }
    }
    Ok((EpsField { ncomp: 3, values: strain }, EpsField { ncomp: 2, values: field }))
}

/// Full-domain and interior (cells at least `2ε` from `∂ω`) L² norms of a Voigt strain
/// (shear counted twice) or vector field.
fn norms(values: &[f64], ncomp: usize, grid: &EpsGrid, voigt: bool) -> (f64, f64) {
    let ns = grid.n_slots();
    let e2 = grid.eps * grid.eps;
    let (mut full, mut inner) = (0.0, 0.0);
    for k in 0..grid.n_cells() {
        let [k1, k2] = grid.cell_index(k);
        let interior = k1 >= 2 && k2 >= 2 && k1 + 3 <= grid.cells[0] && k2 + 3 <= grid.cells[1];
        for s in 0..ns {
            let v = &values[(k * ns + s) * ncomp..(k * ns + s + 1) * ncomp];
            let sq = if voigt { v[0] * v[0] + v[1] * v[1] + 2.0 * v[2] * v[2] } else { v.iter().map(|x| x * x).sum() };
            let c = e2 * grid.micro_weights[s] * sq;
            full += c;
            if interior {
                inner += c;
            }
        }
    }
    (full.sqrt(), inner.sqrt())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ErrorPair {
    pub corrected: f64,
    pub plain: f64,
    pub corrected_interior: f64,
    pub plain_interior: f64,
}

/// Compare `γ(u^ε)`, `∇φ^ε` with `γ(u) + U^ε(s_y(u¹))`, `∇φ + U^ε(∇_y φ¹)`.
pub fn corrector_error_membrane(
    perf: &PerforatedMacroMesh,
    rule: &QuadratureRule,
    eps_sol: &EpsMembraneSolution,
    macro_samples: &MacroSamples,
    corrector: &(EpsField, EpsField),
) -> (ErrorPair, ErrorPair) {
    let grid = &perf.grid;
    let ns = grid.n_slots();
    let n = grid.len();
    let (mut sc, mut sp) = (Vec::with_capacity(3 * n), Vec::with_capacity(3 * n));
    let (mut fc, mut fp) = (Vec::with_capacity(2 * n), Vec::with_capacity(2 * n));
    for k in 0..grid.n_cells() {
        for s in 0..ns {
            let e = k * perf.n_cell_elements + grid.slot_element[s];
            let l = rule.points[s % grid.points_per_element];
            let g0 = perf.space.eval_grad(&eps_sol.u[0], e, l);
            let g1 = perf.space.eval_grad(&eps_sol.u[1], e, l);
            let st = sym(g0, g1);
            let eps_v = [st[0][0], st[1][1], st[0][1]];
            let gp = perf.space.eval_grad(&eps_sol.phi, e, l);
            let idx = k * ns + s;
            let m = &macro_samples.strain.values[3 * idx..3 * idx + 3];
            let macro_v = [m[0], m[1], 0.5 * m[2]];
            let c = &corrector.0.values[3 * idx..3 * idx + 3];
            for a in 0..3 {
                sp.push(eps_v[a] - macro_v[a]);
                sc.push(eps_v[a] - macro_v[a] - c[a]);
            }
            let mf = &macro_samples.field.values[2 * idx..2 * idx + 2];
            let cf = &corrector.1.values[2 * idx..2 * idx + 2];
            for a in 0..2 {
                fp.push(gp[a] - mf[a]);
                fc.push(gp[a] - mf[a] - cf[a]);
            }
        }
    }
    let pair = |c: &[f64], p: &[f64], nc: usize, voigt: bool| {
        let (cf, ci) = norms(c, nc, grid, voigt);
        let (pf, pi) = norms(p, nc, grid, voigt);
        ErrorPair { corrected: cf, plain: pf, corrected_interior: ci, plain_interior: pi }
    };
    (pair(&sc, &sp, 3, true), pair(&fc, &fp, 2, false))
}

/// Compare `Υ(u^ε) = −∇²u^ε` with `Υ(u) + U^ε(Υ_{τθ}(u) ∇²_y w^{τθ})`.
pub fn corrector_error_bending(
    perf: &PerforatedMacroMesh,
    cell: &PeriodicCellMesh,
    eps_sol: &EpsBendingSolution,
    macro_curvature: &EpsField,
    cells: &BendingCellSolutions,
) -> Result<ErrorPair> {
    let grid = &perf.grid;
    let ns = grid.n_slots();
    let ybar = cell_averages(macro_curvature, grid)?;
    let cell_hess: Vec<[Mat2; 3]> = (0..cell.space.n_elements()).map(|j| std::array::from_fn(|p| cell.space.eval_hessian(&cells.w[p], j))).collect();
    let eps_hess: Vec<Mat2> = (0..perf.space.n_elements()).map(|e| perf.space.eval_hessian(&eps_sol.deflection, e)).collect();
    let n = grid.len();
    let (mut c, mut p) = (Vec::with_capacity(3 * n), Vec::with_capacity(3 * n));
    for k in 0..grid.n_cells() {
        let yb = &ybar[3 * k..3 * k + 3];
        for s in 0..ns {
            let j = grid.slot_element[s];
            let h = eps_hess[k * perf.n_cell_elements + j];
            let ue = [-h[0][0], -h[1][1], -h[0][1]];
            let idx = k * ns + s;
            let m = &macro_curvature.values[3 * idx..3 * idx + 3];
            let um = [m[0], m[1], 0.5 * m[2]];
            let mut corr = [0.0; 3];
            for q in 0..3 {
                let hw = cell_hess[j][q];
                corr[0] += yb[q] * hw[0][0];
                corr[1] += yb[q] * hw[1][1];
                corr[2] += yb[q] * hw[0][1];
            }
            for a in 0..3 {
                p.push(ue[a] - um[a]);
                c.push(ue[a] - um[a] - corr[a]);
            }
        }
    }
    let (cf, ci) = norms(&c, 3, grid, true);
    let (pf, pi) = norms(&p, 3, grid, true);
    Ok(ErrorPair { corrected: cf, plain: pf, corrected_interior: ci, plain_interior: pi })
}

/// One microstructure and load case for the corrector study.
pub struct StudyCase<'a> {
    pub cell: &'a PeriodicCellMesh,
    pub material: &'a MaterialField,
    pub domain: Rect,
    pub markers: Markers,
    pub membrane_load: &'a dyn Fn(Vec2) -> [f64; 3],
    pub bending_load: &'a dyn Fn(Vec2) -> f64,
    pub macro_n: usize,
    pub settings: SolveSettings,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub strain: ErrorPair,
    pub field: ErrorPair,
    pub bending: ErrorPair,
    pub eps_membrane_work: f64,
    pub eps_bending_work: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub macro_membrane_work: f64,
    pub macro_bending_work: f64,
    /// Wall-clock seconds per row; kept out of the deterministic artifacts.
    #[serde(skip)]
    pub runtimes: Vec<f64>,
}

pub const REPORT_HEADER: &str = "eps,strain_corrected,strain_plain,field_corrected,field_plain,bending_corrected,bending_plain,\
strain_corrected_interior,strain_plain_interior,field_corrected_interior,field_plain_interior,bending_corrected_interior,bending_plain_interior,\
eps_membrane_work,eps_bending_work";

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            let v = [
                r.eps,
                r.strain.corrected,
                r.strain.plain,
                r.field.corrected,
                r.field.plain,
                r.bending.corrected,
                r.bending.plain,
                r.strain.corrected_interior,
                r.strain.plain_interior,
                r.field.corrected_interior,
                r.field.plain_interior,
                r.bending.corrected_interior,
                r.bending.plain_interior,
                r.eps_membrane_work,
                r.eps_bending_work,
            ];
            s.push_str(&v.iter().map(|x| format!("{x:.12e}")).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

/// Homogenize, solve the macro problems once, then for each `ε` (sorted decreasing)
/// solve the oscillating problems and measure corrected and plain errors.
pub fn run_convergence_study(case: &StudyCase, eps_list: &[f64]) -> Result<ConvergenceReport> {
    let chart = SurfaceChart::plane(case.domain);
    let st = &case.settings;
    let rule = QuadratureRule::triangle(st.quadrature_degree)?;
    let mcells = solve_membrane_cells(case.cell, case.material, st).stage("membrane cell problems")?;
    let mt = membrane_tensors_direct(&mcells, case.cell, case.material)?;
    let bcells = solve_bending_cells(case.cell, case.material, st).stage("bending cell problems")?;
    let (cbar_b, _) = bending_tensor(&bcells, case.cell, case.material)?;
    let ystar = crate::cell::cell_measure(case.cell, &case.material.weight, &rule);
    let mm = MacroMesh::new(case.domain, [case.macro_n, case.macro_n], case.markers.clone())?;
    let coeffs = MembraneCoeffs { c: mt.c, e: mt.e, d: mt.d };
    let msol = solve_homogenized_membrane(&mm, &coeffs, ystar, &chart, case.membrane_load, st).stage("homogenized membrane")?;
    let bsol = solve_homogenized_bending(&mm, &cbar_b, ystar, &chart, case.bending_load, st).stage("homogenized bending")?;
    let mut eps_sorted: Vec<f64> = eps_list.to_vec();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    let mut runtimes = Vec::new();
    for &eps in &eps_sorted {
        let t0 = Instant::now();
        let perf = build_perforated_macro(case.cell, eps, case.domain, case.markers.clone(), &rule)?;
        let grid = &perf.grid;
        let strain = EpsField::sample(grid, 3, |x| {
            let (k, l) = mm.locate(x);
            let g0 = mm.space.eval_grad(&msol.u[0], k, l);
            let g1 = mm.space.eval_grad(&msol.u[1], k, l);
            unit_coeffs(&sym(g0, g1)).to_vec()
        })?;
        let field = EpsField::sample(grid, 2, |x| {
            let (k, l) = mm.locate(x);
            mm.space.eval_grad(&msol.phi, k, l).to_vec()
        })?;
        let curvature = EpsField::sample(grid, 3, |x| {
            let (k, _) = mm.locate(x);
            let h = mm.space.eval_hessian(&bsol.deflection, k);
            unit_coeffs(&[[-h[0][0], -h[0][1]], [-h[1][0], -h[1][1]]]).to_vec()
        })?;
        let samples = MacroSamples { strain, field };
        let corr = reconstruct_membrane_corrector(&samples, &mcells, case.cell, grid, &rule)?;
        let es = solve_eps_membrane(&perf, case.cell, case.material, &chart, case.membrane_load, st)?;
        let (se, fe) = corrector_error_membrane(&perf, &rule, &es, &samples, &corr);
        let eb = solve_eps_bending(&perf, case.cell, case.material, case.bending_load, st)?;
        let be = corrector_error_bending(&perf, case.cell, &eb, &curvature, &bcells)?;
        rows.push(ConvergenceRow {
            eps: grid.eps,
            strain: se,
            field: fe,
            bending: be,
            eps_membrane_work: es.load_work,
            eps_bending_work: eb.load_work,
            max_residual: es.residual.max(eb.residual),
        });
        runtimes.push(t0.elapsed().as_secs_f64());
    }
    Ok(ConvergenceReport { rows, macro_membrane_work: msol.load_work, macro_bending_work: bsol.load_work, runtimes })
}
