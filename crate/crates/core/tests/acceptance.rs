//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p piezoshell --test acceptance`.

mod common;

use common::{disk_cell, full_cell, iso_phase, max_abs_diff, piezo_phase};
use piezoshell::cell::PeriodicCellMesh;
use piezoshell::commands::{corrected_below_plain, corrected_decreasing};
use piezoshell::config::RunConfig;
use piezoshell::fem::assembly::MembraneCoeffs;
use piezoshell::fem::{QuadratureRule, SolveSettings};
use piezoshell::geometry::{Rect, SurfaceChart};
use piezoshell::homogenize::{
    homogenize, solve_bending_cells, solve_membrane_cells, spd_report, BendingCellSolutions, HomogenizedTensors, MembraneCellSolutions,
};
use piezoshell::macro_solver::{broken_h2_error, l2_error, solve_homogenized_bending, solve_homogenized_membrane, MacroMesh, Markers};
use piezoshell::material::{Coupling, MaterialField, Stiffness};
use piezoshell::unfold::{average, integration_identity_check, unfold, unfold_product_check, EpsField, EpsGrid};
use piezoshell::validation::{run_convergence_study, StudyCase};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

type Check = Result<String, String>;

fn require(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(start: Instant, budget: f64, detail: String) -> Check {
    let t = start.elapsed().as_secs_f64();
    require(t < budget, format!("{detail}; {t:.2} s of {budget} s"))
}

fn flat<const R: usize, const C: usize>(m: &[[f64; C]; R]) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn unfolding_identities() -> Check {
    let start = Instant::now();
    let rule = QuadratureRule::triangle(4).unwrap();
    let mut rng = StdRng::seed_from_u64(2024);
    let (mut product, mut linear, mut inverse, mut integral) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for cell in [full_cell(8), disk_cell(0.25, 8)] {
        for eps in [0.5, 0.25, 0.125] {
            let g = EpsGrid::new(&cell, &rule, Rect::unit(), eps).map_err(|e| e.to_string())?;
            for _ in 0..4 {
                let mut field = || EpsField { ncomp: 1, values: (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect() };
                let (v, w) = (field(), field());
                let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                product = product.max(unfold_product_check(&v, &w, &g).unwrap());
                let combo = v.zip_with(&w, |x, y| a * x + b * y).unwrap();
                let (tc, tv, tw) = (unfold(&combo, &g).unwrap(), unfold(&v, &g).unwrap(), unfold(&w, &g).unwrap());
                linear = linear.max(max_of(tc.values.iter().zip(tv.values.iter().zip(&tw.values)).map(|(c, (x, y))| (c - a * x - b * y).abs())));
                inverse = inverse.max(max_abs_diff(&average(&tv, &g).unwrap().values, &v.values));
                let (phys, two) = integration_identity_check(&v, &g).unwrap();
                integral = integral.max((phys - two).abs());
            }
        }
    }
    let detail = format!("product {product:.1e}, linearity {linear:.1e}, U∘T {inverse:.1e}, integral {integral:.1e}");
    require(max_of([product, linear, inverse, integral]) <= 1e-14, detail.clone())?;
    within_budget(start, 5.0, detail)
}

fn corrector_fields(c: &MembraneCellSolutions, b: &BendingCellSolutions) -> Vec<Vec<f64>> {
    c.w.iter().flatten().chain(&c.zeta).chain(c.z.iter().flatten()).chain(&c.eta).chain(b.w.iter()).cloned().collect()
}

fn constant_identity() -> Check {
    let start = Instant::now();
    let mesh = full_cell(32);
    let p = piezo_phase(1.0);
    let mat = MaterialField::uniform(p);
    let set = SolveSettings::default();
    let rule = QuadratureRule::triangle(4).unwrap();
    let t = homogenize(&mesh, &mat, &set).map_err(|e| e.to_string())?;
    let cells = solve_membrane_cells(&mesh, &mat, &set).map_err(|e| e.to_string())?;
    let bend = solve_bending_cells(&mesh, &mat, &set).map_err(|e| e.to_string())?;
    let grad = max_of(corrector_fields(&cells, &bend).iter().map(|f| mesh.space.grad_l2_norm(f, &rule)));
    let tensors = max_of([
        max_abs_diff(&flat(&t.cbar.to_voigt()), &flat(&p.c.to_voigt())),
        max_abs_diff(&flat(&t.ebar.to_voigt()), &flat(&p.e.to_voigt())),
        max_abs_diff(&flat(&t.dbar), &flat(&p.d)),
        max_abs_diff(&flat(&t.bending.to_voigt()), &flat(&p.bending.to_voigt())),
    ]);
    let detail = format!("n = 32: max corrector gradient {grad:.1e}, tensor defect {tensors:.1e}");
    require(grad <= 1e-9 && tensors <= 1e-9, detail.clone())?;
    within_budget(start, 10.0, detail)
}

fn laminate_oracle() -> Check {
    // e = 0 and layers along y₁: d (1, 4), c and C from two isotropic phases
    let (a, b) = (iso_phase(1.0, 1.0, 1.0), iso_phase(2.0, 5.0, 4.0));
    let t = homogenize(&full_cell(16), &MaterialField::bilayer(0, a, b), &SolveSettings::default()).map_err(|e| e.to_string())?;
    let d = max_of([(t.dbar[0][0] - 1.6).abs(), (t.dbar[1][1] - 2.5).abs(), t.dbar[0][1].abs(), t.dbar[1][0].abs()]);
    let harmonic = |x: f64, y: f64| 2.0 * x * y / (x + y);
    let c = (t.cbar.0[0][0][0][0] - harmonic(a.c.0[0][0][0][0], b.c.0[0][0][0][0])).abs();
    let bend = (t.bending.0[0][0][0][0] - harmonic(a.bending.0[0][0][0][0], b.bending.0[0][0][0][0])).abs();
    require(d <= 1e-8 && c <= 1e-6 && bend <= 1e-6, format!("d̄ defect {d:.1e}, c̄₁₁₁₁ {c:.1e}, C̄₁₁₁₁ {bend:.1e}"))
}

struct MatrixRun {
    name: String,
    tensors: HomogenizedTensors,
    scale: f64,
}

fn test_matrix() -> Result<Vec<MatrixRun>, String> {
    let mut runs = vec![];
    for (cell_name, cell) in [("full", full_cell(16)), ("disk 0.1", disk_cell(0.1, 16)), ("disk 0.25", disk_cell(0.25, 16))] {
        for (mat_name, mat) in
            [("constant", MaterialField::uniform(piezo_phase(1.0))), ("layered", MaterialField::bilayer(0, piezo_phase(1.0), piezo_phase(3.0)))]
        {
            let tensors = homogenize(&cell, &mat, &SolveSettings::default()).map_err(|e| format!("{cell_name} {mat_name}: {e}"))?;
            runs.push(MatrixRun { name: format!("{cell_name} {mat_name}"), tensors, scale: mat.membrane_scale() });
        }
    }
    Ok(runs)
}

fn worst(runs: &[MatrixRun], f: impl Fn(&MatrixRun) -> f64) -> (f64, &str) {
    runs.iter().map(|r| (f(r), r.name.as_str())).fold((0.0, ""), |m, x| if x.0 > m.0 { x } else { m })
}

fn coupling_identity(runs: &[MatrixRun]) -> Check {
    let (v, at) = worst(runs, |r| r.tensors.discrepancies().ebar_vs_fbar);
    require(v <= 1e-9, format!("max ē vs f̄ {v:.1e} ({at}) over {} runs", runs.len()))
}

fn dual_paths(runs: &[MatrixRun]) -> Check {
    let (paths, at) = worst(runs, |r| {
        let d = r.tensors.discrepancies();
        max_of([d.cbar_direct_vs_energy, d.dbar_direct_vs_energy, d.bending_direct_vs_energy])
    });
    let (asym, asym_at) = worst(runs, |r| {
        let d = r.tensors.discrepancies();
        let de = r.tensors.dbar_energy;
        let dbar = (de[0][1] - de[1][0]).abs() / de[0][0].abs().max(de[1][1].abs());
        max_of([d.cbar_energy_asymmetry, d.bending_energy_asymmetry, dbar])
    });
    require(paths <= 1e-8 && asym <= 1e-14, format!("direct vs energy {paths:.1e} ({at}), energy asymmetry {asym:.1e} ({asym_at})"))
}

fn coercivity(runs: &[MatrixRun]) -> Check {
    let (ratio, at) = runs
        .iter()
        .map(|r| {
            let s = spd_report(&r.tensors);
            (s.cbar_min.min(s.dbar_min).min(s.bending_min) / r.scale, r.name.as_str())
        })
        .fold((f64::INFINITY, ""), |m, x| if x.0 < m.0 { x } else { m });
    require(ratio > 1e-6, format!("smallest eigenvalue / input scale {ratio:.3e} ({at})"))
}

fn scaling_case(name: &str, cell: &PeriodicCellMesh, mat: &MaterialField, s: f64) -> Result<(f64, f64), String> {
    let set = SolveSettings::default();
    let scaled = mat.scaled(s);
    let err = |e: piezoshell::Error| format!("{name}: {e}");
    let a = corrector_fields(&solve_membrane_cells(cell, mat, &set).map_err(err)?, &solve_bending_cells(cell, mat, &set).map_err(err)?);
    let b = corrector_fields(&solve_membrane_cells(cell, &scaled, &set).map_err(err)?, &solve_bending_cells(cell, &scaled, &set).map_err(err)?);
    let fields = max_of(a.iter().zip(&b).map(|(x, y)| max_abs_diff(x, y)));
    let (ta, tb) = (homogenize(cell, mat, &set).map_err(err)?, homogenize(cell, &scaled, &set).map_err(err)?);
    let rel = |x: Vec<f64>, y: Vec<f64>| max_of(x.iter().zip(&y).map(|(x, y)| (s * x - y).abs())) / (s * max_of(x.iter().map(|v| v.abs())));
    let tensors = max_of([
        rel(flat(&ta.cbar.to_voigt()), flat(&tb.cbar.to_voigt())),
        rel(flat(&ta.ebar.to_voigt()), flat(&tb.ebar.to_voigt())),
        rel(flat(&ta.dbar), flat(&tb.dbar)),
        rel(flat(&ta.bending.to_voigt()), flat(&tb.bending.to_voigt())),
    ]);
    Ok((fields, tensors))
}

fn scaling_invariance() -> Check {
    let layered = MaterialField::bilayer(1, piezo_phase(1.0), piezo_phase(2.0));
    let (pf, pt) = scaling_case("perforated", &disk_cell(0.25, 16), &layered, 7.0)?;
    let (lf, lt) = scaling_case("full", &full_cell(16), &layered, 7.0)?;
    require(pf.max(lf) <= 1e-12 && pt.max(lt) <= 1e-10, format!("s = 7, n = 16: solutions {:.1e}, tensors {:.1e} relative", pf.max(lf), pt.max(lt)))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn corrector_study() -> Check {
    let start = Instant::now();
    let mut lines = vec![];
    let mut ok = true;
    for name in ["layered_piezo", "perforated_piezo"] {
        let config = RunConfig::load(&configs_dir().join(format!("{name}.json"))).map_err(|e| e.to_string())?;
        let mesh = config.cell_mesh().map_err(|e| e.to_string())?;
        let material = config.material_field().map_err(|e| e.to_string())?;
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
        let report = run_convergence_study(&case, &config.validation.eps).map_err(|e| format!("{name}: {e}"))?;
        let (dec, below) = (corrected_decreasing(&report), corrected_below_plain(&report));
        let last = report.rows.last().ok_or("empty study")?;
        ok &= config.cell.n == 16 && config.validation.eps == [0.5, 0.25, 0.125] && dec.iter().chain(&below).all(|b| *b);
        let ratio = |e: piezoshell::validation::ErrorPair| e.corrected / e.plain;
        lines.push(format!(
            "{name}: decreasing {dec:?}, below plain {below:?}, corrected/plain at ε = 1/8 {:.2}/{:.2}/{:.2}",
            ratio(last.strain),
            ratio(last.field),
            ratio(last.bending)
        ));
    }
    let detail = lines.join("; ");
    require(ok, detail.clone())?;
    within_budget(start, 180.0, detail)
}

fn rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn manufactured_convergence() -> Check {
    let start = Instant::now();
    let (lambda, mu) = (1.5, 0.8);
    let rule = QuadratureRule::triangle(5).unwrap();
    let chart = SurfaceChart::plane(Rect::unit());
    let set = SolveSettings::default();
    let coeffs = MembraneCoeffs { c: Stiffness::isotropic(lambda, mu), e: Coupling::zero(), d: [[1.0, 0.0], [0.0, 1.0]] };
    let sines = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let cosines = |x: [f64; 2]| (PI * x[0]).cos() * (PI * x[1]).cos();
    // u = (sin πx sin πy, 0)
    let membrane_load = |x: [f64; 2]| [(lambda + 3.0 * mu) * PI * PI * sines(x), -(lambda + mu) * PI * PI * cosines(x), 0.0];
    // w = sin²πx sin²πy: factor a(t) = sin²πt with its derivatives a, a', a'', a''''
    let jet = |t: f64| {
        let (s, c) = ((2.0 * PI * t).sin(), (2.0 * PI * t).cos());
        [(PI * t).sin().powi(2), PI * s, 2.0 * PI * PI * c, -8.0 * PI.powi(4) * c]
    };
    let plate_load = |x: [f64; 2]| {
        let (ax, ay) = (jet(x[0]), jet(x[1]));
        2.0 / 3.0 * (lambda + 2.0 * mu) * (ax[3] * ay[0] + 2.0 * ax[2] * ay[2] + ax[0] * ay[3])
    };
    let hessian = |x: [f64; 2]| {
        let (ax, ay) = (jet(x[0]), jet(x[1]));
        [[ax[2] * ay[0], ax[1] * ay[1]], [ax[1] * ay[1], ax[0] * ay[2]]]
    };
    let (mut l2, mut h2) = (vec![], vec![]);
    for n in [4, 8, 16, 32] {
        let mesh = MacroMesh::new(Rect::unit(), [n, n], Markers::default()).map_err(|e| e.to_string())?;
        let m = solve_homogenized_membrane(&mesh, &coeffs, 1.0, &chart, &membrane_load, &set).map_err(|e| e.to_string())?;
        let (e1, e2) = (l2_error(&mesh.space, &m.u[0], sines, &rule), l2_error(&mesh.space, &m.u[1], |_| 0.0, &rule));
        l2.push(e1.hypot(e2));
        let b = solve_homogenized_bending(&mesh, &coeffs.c, 1.0, &chart, &plate_load, &set).map_err(|e| e.to_string())?;
        h2.push(broken_h2_error(&mesh.space, &b.deflection, hessian, &rule));
    }
    let membrane = rates(&l2);
    let decreasing = h2.windows(2).all(|w| w[1] < w[0]);
    let detail = format!("membrane L² rates {membrane:.2?}, broken H² errors {h2:.3?}");
    require(membrane.iter().all(|r| (2.7..3.4).contains(r)) && decreasing, detail.clone())?;
    within_budget(start, 60.0, detail)
}

const SMALL_STUDY: &str = r#"{
  "cell": { "n": 8, "hole": { "kind": "disk", "center": [0.5, 0.5], "radius": 0.25 } },
  "material": {
    "base": {
      "c": [[4.0, 1.2, 0.3], [1.2, 3.0, -0.2], [0.3, -0.2, 1.5]],
      "e": [[0.6, -0.2, 0.15], [0.1, 0.5, -0.3]],
      "d": [[2.0, 0.3], [0.3, 1.5]]
    }
  },
  "macro": { "n": 8 },
  "loads": { "shape": "sine_product", "body": [0.5, 0.25, 0.5] },
  "validation": { "eps": [0.5, 0.25], "macro_n": 16 }
}"#;

/// CSV, JSON and VTK artifacts of one run, by file name; the timing log is excluded.
fn artifacts(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut v = vec![];
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        if name != "timings.txt" {
            v.push((name, fs::read(&p).map_err(|e| e.to_string())?));
        }
    }
    v.sort();
    Ok(v)
}

fn cli_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let small = tmp.path().join("small_study.json");
    fs::write(&small, SMALL_STUDY).map_err(|e| e.to_string())?;
    let mut runs: Vec<(PathBuf, &str)> = vec![];
    for name in ["layered_piezo", "perforated_piezo", "cylinder_membrane"] {
        for cmd in ["cell", "homogenize", "macro"] {
            runs.push((configs_dir().join(format!("{name}.json")), cmd));
        }
    }
    runs.push((small, "validate"));
    let (mut files, mut bytes) = (0, 0);
    for (i, (config, cmd)) in runs.iter().enumerate() {
        let mut outputs = vec![];
        for rep in 0..2 {
            let out = tmp.path().join(format!("{i}_{rep}"));
            let o = Command::new(env!("CARGO_BIN_EXE_piezoshell")).arg(cmd).arg(config).arg("--out").arg(&out).output().map_err(|e| e.to_string())?;
            if !o.status.success() {
                return Err(format!("{cmd} {}: {}", config.display(), String::from_utf8_lossy(&o.stderr)));
            }
            outputs.push(artifacts(&out)?);
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            return Err(format!("{cmd} {} differs between runs", config.display()));
        }
        files += outputs[0].len();
        bytes += outputs[0].iter().map(|(_, b)| b.len()).sum::<usize>();
    }
    Ok(format!("{} runs repeated, {files} artifacts ({bytes} bytes) identical", runs.len()))
}

fn report(id: usize, name: &str, check: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = check();
    let t = start.elapsed().as_secs_f64();
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} [{id:>2}] {name}: {detail} [{t:.2} s]");
    outcome.is_ok()
}

fn main() -> ExitCode {
    let mut all = true;
    all &= report(1, "unfolding identities", unfolding_identities);
    all &= report(2, "constant-coefficient identity", constant_identity);
    all &= report(3, "laminate oracle", laminate_oracle);
    let start = Instant::now();
    let matrix = test_matrix();
    println!("     test matrix homogenized [{:.2} s]", start.elapsed().as_secs_f64());
    let matrix = &matrix;
    let on_matrix = |f: fn(&[MatrixRun]) -> Check| move || matrix.as_ref().map_err(|e| e.clone()).and_then(|m| f(m));
    all &= report(4, "coupling identity ē = f̄", on_matrix(coupling_identity));
    all &= report(5, "dual-path tensor equivalence", on_matrix(dual_paths));
    all &= report(6, "coercivity", on_matrix(coercivity));
    all &= report(7, "scaling invariance", scaling_invariance);
    all &= report(8, "corrector convergence study", corrector_study);
    all &= report(9, "manufactured-solution convergence", manufactured_convergence);
    all &= report(10, "CLI determinism", cli_determinism);
    println!("acceptance: {}", if all { "all criteria pass" } else { "some criteria FAIL" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
