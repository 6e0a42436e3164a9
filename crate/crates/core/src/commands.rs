//! The four pipelines behind the CLI subcommands. Each writes deterministic artifacts into
//! the output directory; wall-clock timings go to a separate `timings.txt`.

use crate::config::RunConfig;
use crate::error::{Error, Result, StageExt};
use crate::fem::assembly::MembraneCoeffs;
use crate::fem::QuadratureRule;
use crate::homogenize::{
    homogenize, solve_bending_cells, solve_membrane_cells, spd_report, CellMaterial, Discrepancies, HomogenizedTensors, SpdReport,
};
use crate::io::{tensors_csv, vtk_string, ArtifactDir, NodalData};
use crate::macro_solver::{solve_homogenized_bending, solve_homogenized_membrane};
use crate::validation::{run_convergence_study, ConvergenceReport, StudyCase};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

struct Timings(Vec<(String, f64)>);

impl Timings {
    fn run<T>(&mut self, label: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f()?;
        self.0.push((label.to_string(), t.elapsed().as_secs_f64()));
        Ok(out)
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let mut s = String::new();
        for (l, t) in &self.0 {
            let _ = writeln!(s, "{l}\t{t:.3}");
        }
        std::fs::write(dir.join("timings.txt"), s)?;
        Ok(())
    }
}

fn prepare(config: &RunConfig, out: Option<&Path>) -> Result<ArtifactDir> {
    config.validate()?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::config("no output directory: pass --out or set output_dir"))?;
    ArtifactDir::create(&dir)
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("summary serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct CellSummary {
    nodes: usize,
    elements: usize,
    hole_boundary_edges: usize,
    perforated_area: f64,
    membrane_corrector_grad_norms: Vec<f64>,
    bending_corrector_grad_norms: Vec<f64>,
    membrane_residuals: Vec<f64>,
    bending_residuals: Vec<f64>,
}

const STRAIN_NAMES: [&str; 3] = ["11", "22", "12"];

/// Cell mesh, the five membrane cell solutions, the bending correctors and the coupled
/// cell matrix in Matrix Market form.
pub fn cmd_cell(config: &RunConfig, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut dir = prepare(config, out)?;
    let mut timings = Timings(vec![]);
    let mesh = config.cell_mesh()?;
    let material = config.material_field()?;
    let settings = config.settings();
    let m = timings.run("membrane cell problems", || solve_membrane_cells(&mesh, &material, &settings))?;
    let b = timings.run("bending cell problems", || solve_bending_cells(&mesh, &material, &settings))?;
    let cm = CellMaterial::new(&mesh, &material);
    let phase: Vec<f64> = cm.phase_of.iter().map(|&p| p as f64).collect();
    dir.write("cell_mesh.vtk", &vtk_string("cell mesh", &mesh.space, &[], &[("phase", phase)])?)?;
    for p in 0..3 {
        let data = [NodalData::Vector("displacement", vec![&m.w[p][0], &m.w[p][1]]), NodalData::Scalar("potential", &m.zeta[p])];
        let name = format!("cell_strain_{}.vtk", STRAIN_NAMES[p]);
        dir.write(&name, &vtk_string(&format!("strain load {}", STRAIN_NAMES[p]), &mesh.space, &data, &[])?)?;
    }
    for q in 0..2 {
        let data = [NodalData::Vector("displacement", vec![&m.z[q][0], &m.z[q][1]]), NodalData::Scalar("potential", &m.eta[q])];
        dir.write(&format!("cell_field_{}.vtk", q + 1), &vtk_string(&format!("field load {}", q + 1), &mesh.space, &data, &[])?)?;
    }
    let bdata: Vec<NodalData> = (0..3).map(|p| NodalData::Scalar(["w11", "w22", "w12"][p], &b.w[p])).collect();
    dir.write("cell_bending.vtk", &vtk_string("bending correctors", &mesh.space, &bdata, &[])?)?;
    let forms = crate::homogenize::assemble_coupled_cell_forms(&mesh, &material)?;
    let mut mtx = Vec::new();
    forms.system.matrix.write_matrix_market(&mut mtx)?;
    dir.write("cell_matrix.mtx", &String::from_utf8(mtx).expect("ascii output"))?;
    let rule = QuadratureRule::triangle(settings.quadrature_degree)?;
    let g = |u: &[f64]| mesh.space.grad_l2_norm(u, &rule);
    let mut membrane_norms = Vec::with_capacity(15);
    for p in 0..3 {
        membrane_norms.extend([g(&m.w[p][0]), g(&m.w[p][1]), g(&m.zeta[p])]);
    }
    for q in 0..2 {
        membrane_norms.extend([g(&m.z[q][0]), g(&m.z[q][1]), g(&m.eta[q])]);
    }
    let summary = CellSummary {
        nodes: mesh.space.n_nodes(),
        elements: mesh.space.n_elements(),
        hole_boundary_edges: mesh.hole_boundary.len(),
        perforated_area: mesh.area(),
        membrane_corrector_grad_norms: membrane_norms,
        bending_corrector_grad_norms: b.w.iter().map(|w| g(w)).collect(),
        membrane_residuals: m.residuals.clone(),
        bending_residuals: b.residuals.clone(),
    };
    dir.write("cell_summary.json", &json(&summary))?;
    timings.write(&dir.root)?;
    Ok(dir.written)
}

#[derive(Serialize)]
struct TensorSummary {
    cbar: [[f64; 3]; 3],
    ebar: [[f64; 3]; 2],
    fbar: [[f64; 3]; 2],
    dbar: [[f64; 2]; 2],
    bending: [[f64; 3]; 3],
    ystar_measure: f64,
    min_eigenvalues: SpdReport,
    positive_definite: bool,
    discrepancies: Discrepancies,
    max_membrane_residual: f64,
    max_bending_residual: f64,
}

fn tensor_summary(t: &HomogenizedTensors) -> TensorSummary {
    let spd = spd_report(t);
    TensorSummary {
        cbar: t.cbar.to_voigt(),
        ebar: t.ebar.to_voigt(),
        fbar: t.fbar.to_voigt(),
        dbar: t.dbar,
        bending: t.bending.to_voigt(),
        ystar_measure: t.ystar_measure,
        positive_definite: spd.is_positive(),
        min_eigenvalues: spd,
        discrepancies: t.discrepancies(),
        max_membrane_residual: t.membrane_residuals.iter().fold(0.0, |a, b| a.max(*b)),
        max_bending_residual: t.bending_residuals.iter().fold(0.0, |a, b| a.max(*b)),
    }
}

pub fn cmd_homogenize(config: &RunConfig, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut dir = prepare(config, out)?;
    let mut timings = Timings(vec![]);
    let mesh = config.cell_mesh()?;
    let material = config.material_field()?;
    let t = timings.run("homogenize", || homogenize(&mesh, &material, &config.settings()))?;
    dir.write("tensors.csv", &tensors_csv(&t))?;
    dir.write("summary.json", &json(&tensor_summary(&t)))?;
    timings.write(&dir.root)?;
    Ok(dir.written)
}

#[derive(Serialize)]
struct MacroSummary {
    tensors: TensorSummary,
    membrane_residual: f64,
    membrane_load_work: f64,
    membrane_energy_defect: f64,
    /// Absent on curved charts, where only the membrane problem is solved.
    bending: Option<BendingSummary>,
}

#[derive(Serialize)]
struct BendingSummary {
    residual: f64,
    load_work: f64,
    energy_defect: f64,
}

pub fn cmd_macro(config: &RunConfig, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut dir = prepare(config, out)?;
    let mut timings = Timings(vec![]);
    let mesh = config.cell_mesh()?;
    let material = config.material_field()?;
    let settings = config.settings();
    let chart = config.chart()?;
    let t = timings.run("homogenize", || homogenize(&mesh, &material, &settings))?;
    let mm = config.macro_mesh()?;
    let load = config.load_density();
    let coeffs = MembraneCoeffs { c: t.cbar, e: t.ebar, d: t.dbar };
    let ms = timings.run("homogenized membrane", || {
        solve_homogenized_membrane(&mm, &coeffs, t.ystar_measure, &chart, &load, &settings).stage("homogenized membrane")
    })?;
    let bs = if chart.is_flat() {
        let f3 = |x: [f64; 2]| load(x)[2];
        Some(timings.run("homogenized bending", || {
            solve_homogenized_bending(&mm, &t.bending, t.ystar_measure, &chart, &f3, &settings).stage("homogenized bending")
        })?)
    } else {
        None
    };
    let zero = vec![0.0; mm.space.n_nodes()];
    let deflection = bs.as_ref().map_or(&zero, |b| &b.deflection);
    let data = [
        NodalData::Vector("displacement", vec![&ms.u[0], &ms.u[1], &ms.u[2]]),
        NodalData::Scalar("potential", &ms.phi),
        NodalData::Scalar("deflection", deflection),
    ];
    dir.write("macro_solution.vtk", &vtk_string("homogenized solution", &mm.space, &data, &[])?)?;
    let mut csv = String::from("x1,x2,u1,u2,u3,phi,deflection\n");
    for (i, p) in mm.space.nodes.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{},{},{},{},{}", p[0], p[1], ms.u[0][i], ms.u[1][i], ms.u[2][i], ms.phi[i], deflection[i]);
    }
    dir.write("macro_nodes.csv", &csv)?;
    let summary = MacroSummary {
        tensors: tensor_summary(&t),
        membrane_residual: ms.residual,
        membrane_load_work: ms.load_work,
        membrane_energy_defect: ms.energy_defect,
        bending: bs.as_ref().map(|b| BendingSummary { residual: b.residual, load_work: b.load_work, energy_defect: b.energy_defect }),
    };
    dir.write("macro_summary.json", &json(&summary))?;
    timings.write(&dir.root)?;
    Ok(dir.written)
}

#[derive(Serialize)]
struct ValidationSummary<'a> {
    report: &'a ConvergenceReport,
    corrected_decreasing: [bool; 3],
    corrected_below_plain_at_smallest_eps: [bool; 3],
}

/// Monotone decrease of the corrected (strain, field, bending) errors as ε decreases.
pub fn corrected_decreasing(r: &ConvergenceReport) -> [bool; 3] {
    let col = |f: fn(&crate::validation::ConvergenceRow) -> f64| r.rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    [col(|x| x.strain.corrected), col(|x| x.field.corrected), col(|x| x.bending.corrected)]
}

pub fn corrected_below_plain(r: &ConvergenceReport) -> [bool; 3] {
    match r.rows.last() {
        Some(x) => [x.strain.corrected < x.strain.plain, x.field.corrected < x.field.plain, x.bending.corrected < x.bending.plain],
        None => [false; 3],
    }
}

pub fn cmd_validate(config: &RunConfig, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut dir = prepare(config, out)?;
    let chart = config.chart()?;
    if !chart.is_flat() {
        return Err(Error::config("validate runs on the plane chart"));
    }
    let mesh = config.cell_mesh()?;
    let material = config.material_field()?;
    let load = config.load_density();
    let f3 = |x: [f64; 2]| load(x)[2];
    let case = StudyCase {
        cell: &mesh,
        material: &material,
        domain: config.macro_problem.domain,
        markers: config.macro_problem.markers.clone(),
        membrane_load: &load,
        bending_load: &f3,
        macro_n: config.validation.macro_n,
        settings: config.settings(),
    };
    let t = Instant::now();
    let report = run_convergence_study(&case, &config.validation.eps)?;
    dir.write("convergence.csv", &report.to_csv())?;
    let summary = ValidationSummary {
        report: &report,
        corrected_decreasing: corrected_decreasing(&report),
        corrected_below_plain_at_smallest_eps: corrected_below_plain(&report),
    };
    dir.write("validation_summary.json", &json(&summary))?;
    let mut timings = Timings(report.rows.iter().zip(&report.runtimes).map(|(r, t)| (format!("eps={}", r.eps), *t)).collect());
    timings.0.push(("total".into(), t.elapsed().as_secs_f64()));
    timings.write(&dir.root)?;
    Ok(dir.written)
}
