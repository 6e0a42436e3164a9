//! Periodic cell problems and homogenized coefficients.
//!
//! Membrane: five coupled saddle solves for unit strains and unit fields. Bending: three
//! interior-penalty solves for unit curvatures. Every tensor is produced twice, once from
//! the direct formulas and once from the symmetric energy forms, and both are reported.

use crate::cell::{cell_measure, PeriodicCellMesh};
use crate::error::{Error, Result, StageExt};
use crate::fem::assembly::{block, ElementQuad, FieldLayout, MembraneAssembly, MembraneCoeffs};
use crate::fem::c0ip::{interior_faces, periodic_faces, stability_probe, Face, PlateForm};
use crate::fem::solver::{factorize_system, SolveSettings};
use crate::fem::{CsrMatrix, DofMap, QuadratureRule, SparseSymSystem};
use crate::material::{sym2_eigenvalues, unit_strain, voigt_index, Coupling, Mat2, MaterialField, Stiffness, VOIGT};
use serde::Serialize;

pub type Vec2 = [f64; 2];

pub const CELL_QUADRATURE_DEGREE: usize = 4;

/// Material data resolved per element (phase at the centroid) with the pointwise weight.
pub struct CellMaterial<'a> {
    pub field: &'a MaterialField,
    pub phase_of: Vec<usize>,
}

impl<'a> CellMaterial<'a> {
    pub fn new(mesh: &PeriodicCellMesh, field: &'a MaterialField) -> Self {
        let phase_of = (0..mesh.space.n_elements()).map(|k| field.phase_index_at(mesh.space.element(k).centroid())).collect();
        CellMaterial { field, phase_of }
    }

    pub fn membrane(&self, k: usize) -> MembraneCoeffs {
        let p = self.field.phase(self.phase_of[k]);
        MembraneCoeffs { c: p.c, e: p.e, d: p.d }
    }

    pub fn bending(&self, k: usize) -> Stiffness {
        self.field.phase(self.phase_of[k]).bending
    }

    pub fn weight(&self, y: Vec2) -> f64 {
        self.field.sqrt_a(y)
    }
}

/// `Σ^{τθ} = ½(y_τ e_θ + y_θ e_τ)`, whose symmetric gradient is the unit strain of pair `p`.
fn strain_lifting(mesh: &PeriodicCellMesh, p: usize) -> Vec<Vec<f64>> {
    let (t, h) = VOIGT[p];
    let comp = |a: usize| -> Vec<f64> {
        mesh.space.nodes.iter().map(|y| 0.5 * (if h == a { y[t] } else { 0.0 } + if t == a { y[h] } else { 0.0 })).collect()
    };
    vec![comp(0), comp(1), vec![]]
}

fn field_lifting(mesh: &PeriodicCellMesh, s: usize) -> Vec<Vec<f64>> {
    vec![vec![], vec![], mesh.space.nodes.iter().map(|y| y[s]).collect()]
}

/// Coupled cell system with its block views `A` (elastic), `B` (coupling), `D` (dielectric).
pub struct CellForms {
    pub layout: FieldLayout,
    pub system: SparseSymSystem,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub d: CsrMatrix,
}

pub fn assemble_coupled_cell_forms(mesh: &PeriodicCellMesh, material: &MaterialField) -> Result<CellForms> {
    material.validate()?;
    let rule = QuadratureRule::triangle(CELL_QUADRATURE_DEGREE)?;
    let mat = CellMaterial::new(mesh, material);
    let map = DofMap::from_masters(&mesh.masters);
    let n = map.n_dofs;
    let layout = FieldLayout::new(vec![map.clone(), map.clone(), map], vec![0, 1, 2]);
    let mut liftings: Vec<Vec<Vec<f64>>> = (0..3).map(|p| strain_lifting(mesh, p)).collect();
    liftings.extend((0..2).map(|s| field_lifting(mesh, s)));
    let asm = MembraneAssembly {
        space: &mesh.space,
        rule: &rule,
        coeffs: &|k| mat.membrane(k),
        weight: &|_, y| mat.weight(y),
        geometry: None,
        layout: &layout,
    };
    let system = asm.assemble(&liftings, &[], 0.0);
    let a = block(&system.matrix, 0..2 * n, 0..2 * n);
    let b = block(&system.matrix, 2 * n..3 * n, 0..2 * n);
    let mut d = block(&system.matrix, 2 * n..3 * n, 2 * n..3 * n);
    d.values.iter_mut().for_each(|v| *v = -*v);
    Ok(CellForms { layout, system, a, b, d })
}

/// Nodal correctors: `w[p]`, `zeta[p]` for unit strains, `z[s]`, `eta[s]` for unit fields.
#[derive(Debug, Clone)]
pub struct MembraneCellSolutions {
    pub w: [[Vec<f64>; 2]; 3],
    pub zeta: [Vec<f64>; 3],
    pub z: [[Vec<f64>; 2]; 2],
    pub eta: [Vec<f64>; 2],
    pub residuals: Vec<f64>,
}

pub fn solve_membrane_cells(mesh: &PeriodicCellMesh, material: &MaterialField, settings: &SolveSettings) -> Result<MembraneCellSolutions> {
    let forms = assemble_coupled_cell_forms(mesh, material)?;
    let asym = forms.system.matrix.asymmetry();
    if asym > 1e-12 {
        return Err(Error::Internal(format!("membrane cell matrix asymmetric ({asym:e})")));
    }
    let fac = factorize_system(&forms.system).stage("membrane cell factorization")?;
    let mut sols = Vec::with_capacity(5);
    let mut residuals = Vec::with_capacity(5);
    for (i, rhs) in forms.system.rhs.iter().enumerate() {
        let s = fac.solve(std::slice::from_ref(rhs), settings.residual_tol).map_err(|e| {
            let which = if i < 3 { format!("strain load {}", i + 1) } else { format!("field load {}", i - 2) };
            e.in_stage(format!("membrane cell problem ({which})"))
        })?;
        residuals.push(s.residuals[0]);
        sols.push(s.solutions.into_iter().next().unwrap());
    }
    let l = &forms.layout;
    let nodal = |x: &Vec<f64>, f: usize| l.field_nodal(f, x);
    Ok(MembraneCellSolutions {
        w: std::array::from_fn(|p| [nodal(&sols[p], 0), nodal(&sols[p], 1)]),
        zeta: std::array::from_fn(|p| nodal(&sols[p], 2)),
        z: std::array::from_fn(|s| [nodal(&sols[3 + s], 0), nodal(&sols[3 + s], 1)]),
        eta: std::array::from_fn(|s| nodal(&sols[3 + s], 2)),
        residuals,
    })
}

/// At one quadrature point: total strain and field of each problem.
struct PointFields {
    /// `E^{p} + s(w^p)` and `∇ζ^p`.
    strain_t: [Mat2; 3],
    grad_zeta: [Vec2; 3],
    /// `s(z^σ)` and `e_σ + ∇η^σ`.
    strain_z: [Mat2; 2],
    field_f: [Vec2; 2],
}

fn grad_at(q: &ElementQuad, iq: usize, nodes: &[usize; 6], u: &[f64]) -> Vec2 {
    let mut g = [0.0; 2];
    for i in 0..6 {
        g[0] += u[nodes[i]] * q.grads[iq][i][0];
        g[1] += u[nodes[i]] * q.grads[iq][i][1];
    }
    g
}

fn sym_grad(q: &ElementQuad, iq: usize, nodes: &[usize; 6], u: &[Vec<f64>; 2]) -> Mat2 {
    let g0 = grad_at(q, iq, nodes, &u[0]);
    let g1 = grad_at(q, iq, nodes, &u[1]);
    let off = 0.5 * (g0[1] + g1[0]);
    [[g0[0], off], [off, g1[1]]]
}

fn for_each_point(
    mesh: &PeriodicCellMesh,
    mat: &CellMaterial,
    cells: &MembraneCellSolutions,
    mut f: impl FnMut(f64, &MembraneCoeffs, &PointFields),
) -> Result<()> {
    let rule = QuadratureRule::triangle(CELL_QUADRATURE_DEGREE)?;
    for k in 0..mesh.space.n_elements() {
        let q = ElementQuad::new(&mesh.space, k, &rule);
        let nodes = &mesh.space.elem_nodes[k];
        let co = mat.membrane(k);
        for iq in 0..q.weights.len() {
            let w = q.weights[iq] * mat.weight(q.points[iq]);
            let pf = PointFields {
                strain_t: std::array::from_fn(|p| {
                    let s = sym_grad(&q, iq, nodes, &cells.w[p]);
                    let e = unit_strain(p);
                    [[e[0][0] + s[0][0], e[0][1] + s[0][1]], [e[1][0] + s[1][0], e[1][1] + s[1][1]]]
                }),
                grad_zeta: std::array::from_fn(|p| grad_at(&q, iq, nodes, &cells.zeta[p])),
                strain_z: std::array::from_fn(|s| sym_grad(&q, iq, nodes, &cells.z[s])),
                field_f: std::array::from_fn(|s| {
                    let g = grad_at(&q, iq, nodes, &cells.eta[s]);
                    let mut f = g;
                    f[s] += 1.0;
                    f
                }),
            };
            f(w, &co, &pf);
        }
    }
    Ok(())
}

fn e_contract(e: &Coupling, l: usize, s: &Mat2) -> f64 {
    let t = &e.0[l];
    t[0][0] * s[0][0] + t[0][1] * s[0][1] + t[1][0] * s[1][0] + t[1][1] * s[1][1]
}

fn d_form(d: &Mat2, a: &Vec2, b: &Vec2) -> f64 {
    a[0] * (d[0][0] * b[0] + d[0][1] * b[1]) + a[1] * (d[1][0] * b[0] + d[1][1] * b[1])
}

/// Expand a tensor indexed by (Voigt pair, Voigt pair) to four indices.
fn four_index(v: &[[f64; 3]; 3]) -> Stiffness {
    let mut c = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for l in 0..2 {
                for m in 0..2 {
                    c[a][b][l][m] = v[voigt_index(a, b)][voigt_index(l, m)];
                }
            }
        }
    }
    Stiffness(c)
}

fn three_index(v: &[[f64; 3]; 2]) -> Coupling {
    let mut e = [[[0.0; 2]; 2]; 2];
    for l in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                e[l][a][b] = v[l][voigt_index(a, b)];
            }
        }
    }
    Coupling(e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneTensors {
    pub c: Stiffness,
    pub e: Coupling,
    pub f: Coupling,
    pub d: Mat2,
}

/// Direct formulas: `c̄ = ∫ c T:E + e·∇ζ`, `ē = ∫ c s(z):E + e·F`, `f̄ = ∫ e:T − d∇ζ`,
/// `d̄ = ∫ −e:s(z) + dF`, all weighted.
pub fn membrane_tensors_direct(cells: &MembraneCellSolutions, mesh: &PeriodicCellMesh, material: &MaterialField) -> Result<MembraneTensors> {
    let mat = CellMaterial::new(mesh, material);
    let mut cv = [[0.0; 3]; 3];
    let mut ev = [[0.0; 3]; 2];
    let mut fv = [[0.0; 3]; 2];
    let mut d = [[0.0; 2]; 2];
    for_each_point(mesh, &mat, cells, |w, co, pf| {
        for (i, &(a, b)) in VOIGT.iter().enumerate() {
            let eab = unit_strain(i);
            for p in 0..3 {
                let mut v = co.c.quadratic(&pf.strain_t[p], &eab);
                for l in 0..2 {
                    v += co.e.0[l][a][b] * pf.grad_zeta[p][l];
                }
                cv[i][p] += w * v;
            }
            for s in 0..2 {
                let mut v = co.c.quadratic(&pf.strain_z[s], &eab);
                for l in 0..2 {
                    v += co.e.0[l][a][b] * pf.field_f[s][l];
                }
                ev[s][i] += w * v;
                let dz: f64 = (0..2).map(|l| co.d[s][l] * pf.grad_zeta[i][l]).sum();
                fv[s][i] += w * (e_contract(&co.e, s, &pf.strain_t[i]) - dz);
            }
        }
        for a in 0..2 {
            for s in 0..2 {
                let df: f64 = (0..2).map(|l| co.d[a][l] * pf.field_f[s][l]).sum();
                d[a][s] += w * (-e_contract(&co.e, a, &pf.strain_z[s]) + df);
            }
        }
    })?;
    Ok(MembraneTensors { c: four_index(&cv), e: three_index(&ev), f: three_index(&fv), d })
}

/// Energy forms `c̄ = ∫ c(T, T') + d(∇ζ', ∇ζ)` and `d̄ = ∫ c(s(z), s(z')) + d(F', F)`.
pub fn membrane_tensors_energy(cells: &MembraneCellSolutions, mesh: &PeriodicCellMesh, material: &MaterialField) -> Result<(Stiffness, Mat2)> {
    let mat = CellMaterial::new(mesh, material);
    let mut cv = [[0.0; 3]; 3];
    let mut d = [[0.0; 2]; 2];
    for_each_point(mesh, &mat, cells, |w, co, pf| {
        for i in 0..3 {
            for p in 0..3 {
                cv[i][p] += w * (co.c.quadratic(&pf.strain_t[p], &pf.strain_t[i]) + d_form(&co.d, &pf.grad_zeta[i], &pf.grad_zeta[p]));
            }
        }
        for a in 0..2 {
            for s in 0..2 {
                d[a][s] += w * (co.c.quadratic(&pf.strain_z[a], &pf.strain_z[s]) + d_form(&co.d, &pf.field_f[s], &pf.field_f[a]));
            }
        }
    })?;
    Ok((four_index(&cv), d))
}

/// Periodic interior-penalty faces of the cell: interior edges plus glued boundary edges.
pub fn cell_faces(mesh: &PeriodicCellMesh) -> Vec<Face> {
    let mut faces = interior_faces(&mesh.space);
    faces.extend(periodic_faces(&mesh.space, &mesh.periodic_faces));
    faces
}

#[derive(Debug, Clone)]
pub struct BendingCellSolutions {
    /// Nodal correctors per Voigt pair.
    pub w: [Vec<f64>; 3],
    pub residuals: Vec<f64>,
    /// Assembled curvature loads restricted to field dofs, and the corrector dofs.
    loads: Vec<Vec<f64>>,
    dofs: Vec<Vec<f64>>,
    pub sigma: f64,
}

pub fn solve_bending_cells(mesh: &PeriodicCellMesh, material: &MaterialField, settings: &SolveSettings) -> Result<BendingCellSolutions> {
    material.validate()?;
    let sigma = settings.penalty;
    stability_probe(
        &|y| {
            let p = material.phase(material.phase_index_at(y));
            (p.bending, material.sqrt_a(y))
        },
        sigma,
    )?;
    let rule = QuadratureRule::triangle(CELL_QUADRATURE_DEGREE)?;
    let mat = CellMaterial::new(mesh, material);
    let faces = cell_faces(mesh);
    let form = PlateForm { space: &mesh.space, rule: &rule, stiffness: &|k| mat.bending(k), weight: &|_, y| mat.weight(y), faces: &faces, sigma };
    let map = DofMap::from_masters(&mesh.masters);
    let loads: Vec<Mat2> = (0..3).map(unit_strain).collect();
    let sys = form.assemble(&map, true, &loads, &[], 0.0);
    let asym = sys.matrix.asymmetry();
    if asym > 1e-12 {
        return Err(Error::Internal(format!("bending cell matrix asymmetric ({asym:e})")));
    }
    let solved = factorize_system(&sys).stage("bending cell factorization")?.solve(&sys.rhs, settings.residual_tol).stage("bending cell problems")?;
    let n = map.n_dofs;
    let dofs: Vec<Vec<f64>> = solved.solutions.iter().map(|x| x[..n].to_vec()).collect();
    Ok(BendingCellSolutions {
        w: std::array::from_fn(|p| map.lift(&dofs[p])),
        residuals: solved.residuals,
        loads: sys.rhs.iter().map(|b| b[..n].to_vec()).collect(),
        dofs,
        sigma,
    })
}

/// `C̄` by the direct formula (constant part plus the distributional-Hessian pairing of
/// the corrector, read off the assembled load) and by the extended energy form.
pub fn bending_tensor(cells: &BendingCellSolutions, mesh: &PeriodicCellMesh, material: &MaterialField) -> Result<(Stiffness, Stiffness)> {
    let rule = QuadratureRule::triangle(CELL_QUADRATURE_DEGREE)?;
    let mat = CellMaterial::new(mesh, material);
    let faces = cell_faces(mesh);
    let form = PlateForm {
        space: &mesh.space,
        rule: &rule,
        stiffness: &|k| mat.bending(k),
        weight: &|_, y| mat.weight(y),
        faces: &faces,
        sigma: cells.sigma,
    };
    let mut base = [[0.0; 3]; 3];
    for k in 0..mesh.space.n_elements() {
        let el = mesh.space.element(k);
        let c = mat.bending(k);
        let w: f64 = rule.points.iter().zip(&rule.weights).map(|(l, w)| 2.0 * el.area * w * mat.weight(el.point(*l))).sum();
        for i in 0..3 {
            for j in 0..3 {
                base[i][j] += w * c.quadratic(&unit_strain(i), &unit_strain(j));
            }
        }
    }
    let mut direct = [[0.0; 3]; 3];
    let mut energy = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let pairing: f64 = -cells.loads[j].iter().zip(&cells.dofs[i]).map(|(b, x)| b * x).sum::<f64>();
            direct[i][j] = base[i][j] + pairing;
            energy[i][j] = form.extended_energy(&unit_strain(i), &cells.w[i], &unit_strain(j), &cells.w[j]);
        }
    }
    Ok((four_index(&direct), four_index(&energy)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpdReport {
    pub cbar_min: f64,
    pub dbar_min: f64,
    pub bending_min: f64,
}

impl SpdReport {
    pub fn is_positive(&self) -> bool {
        self.cbar_min > 0.0 && self.dbar_min > 0.0 && self.bending_min > 0.0
    }
}

/// Homogenized tensors from the direct formulas with the energy-path results alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizedTensors {
    pub cbar: Stiffness,
    pub ebar: Coupling,
    pub fbar: Coupling,
    pub dbar: Mat2,
    pub bending: Stiffness,
    pub cbar_energy: Stiffness,
    pub dbar_energy: Mat2,
    pub bending_energy: Stiffness,
    /// `|Y*|_a`.
    pub ystar_measure: f64,
    pub membrane_residuals: Vec<f64>,
    pub bending_residuals: Vec<f64>,
}

/// Dual-path and symmetry discrepancies, each relative to the tensor's magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancies {
    pub cbar_direct_vs_energy: f64,
    pub dbar_direct_vs_energy: f64,
    pub bending_direct_vs_energy: f64,
    pub ebar_vs_fbar: f64,
    pub cbar_energy_asymmetry: f64,
    pub bending_energy_asymmetry: f64,
}

pub(crate) fn rel_diff<const N: usize, const M: usize>(a: &[[f64; M]; N], b: &[[f64; M]; N]) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..N {
        for j in 0..M {
            diff = diff.max((a[i][j] - b[i][j]).abs());
            scale = scale.max(a[i][j].abs()).max(b[i][j].abs());
        }
    }
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn asym3(v: &[[f64; 3]; 3]) -> f64 {
    let t = std::array::from_fn(|i| std::array::from_fn(|j| v[j][i]));
    rel_diff(v, &t)
}

impl HomogenizedTensors {
    pub fn discrepancies(&self) -> Discrepancies {
        let ev = self.ebar.to_voigt();
        let fv = self.fbar.to_voigt();
        let ef_scale = ev.iter().chain(fv.iter()).flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let ef = ev.iter().flatten().zip(fv.iter().flatten()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let c_scale = self.cbar.to_voigt().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        Discrepancies {
            cbar_direct_vs_energy: rel_diff(&self.cbar.to_voigt(), &self.cbar_energy.to_voigt()),
            dbar_direct_vs_energy: rel_diff(&self.dbar, &self.dbar_energy),
            bending_direct_vs_energy: rel_diff(&self.bending.to_voigt(), &self.bending_energy.to_voigt()),
            // relative to c̄ when the coupling vanishes identically
            ebar_vs_fbar: if ef_scale > 0.0 { ef / ef_scale } else { ef / c_scale.max(f64::MIN_POSITIVE) },
            cbar_energy_asymmetry: asym3(&self.cbar_energy.to_voigt()),
            bending_energy_asymmetry: asym3(&self.bending_energy.to_voigt()),
        }
    }
}

pub fn spd_report(t: &HomogenizedTensors) -> SpdReport {
    let min3 = |s: &Stiffness| s.voigt_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    let d = sym2_eigenvalues(t.dbar);
    SpdReport { cbar_min: min3(&t.cbar), dbar_min: d[0].min(d[1]), bending_min: min3(&t.bending) }
}

/// Run every cell problem and both tensor paths.
pub fn homogenize(mesh: &PeriodicCellMesh, material: &MaterialField, settings: &SolveSettings) -> Result<HomogenizedTensors> {
    material.validate()?;
    let membrane = solve_membrane_cells(mesh, material, settings)?;
    let direct = membrane_tensors_direct(&membrane, mesh, material)?;
    let (cbar_energy, dbar_energy) = membrane_tensors_energy(&membrane, mesh, material)?;
    let bending_cells = solve_bending_cells(mesh, material, settings)?;
    let (bending, bending_energy) = bending_tensor(&bending_cells, mesh, material)?;
    let rule = QuadratureRule::triangle(CELL_QUADRATURE_DEGREE)?;
    Ok(HomogenizedTensors {
        cbar: direct.c,
        ebar: direct.e,
        fbar: direct.f,
        dbar: direct.d,
        bending,
        cbar_energy,
        dbar_energy,
        bending_energy,
        ystar_measure: cell_measure(mesh, &material.weight, &rule),
        membrane_residuals: membrane.residuals,
        bending_residuals: bending_cells.residuals,
    })
}
