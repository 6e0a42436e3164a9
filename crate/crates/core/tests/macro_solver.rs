use piezoshell::fem::assembly::MembraneCoeffs;
use piezoshell::fem::{QuadratureRule, SolveSettings};
use piezoshell::geometry::{ChartKind, Rect, SurfaceChart};
use piezoshell::macro_solver::*;
use piezoshell::material::{Coupling, Stiffness};
use piezoshell::Error;
use std::f64::consts::PI;
use std::time::Instant;

const LAMBDA: f64 = 1.5;
const MU: f64 = 0.8;

fn coeffs() -> MembraneCoeffs {
    MembraneCoeffs { c: Stiffness::isotropic(LAMBDA, MU), e: Coupling::zero(), d: [[1.0, 0.0], [0.0, 1.0]] }
}

fn mesh(n: usize) -> MacroMesh {
    MacroMesh::new(Rect::unit(), [n, n], Markers::default()).unwrap()
}

fn rule() -> QuadratureRule {
    QuadratureRule::triangle(5).unwrap()
}

fn rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn membrane_manufactured_solution_converges_at_third_order() {
    // u = (sin πx sin πy, 0): −div(λ tr γ I + 2μγ) = ((λ+3μ)π² sin πx sin πy, −(λ+μ)π² cos πx cos πy)
    let start = Instant::now();
    let load = |x: [f64; 2]| {
        let (s, c) = ((PI * x[0]).sin() * (PI * x[1]).sin(), (PI * x[0]).cos() * (PI * x[1]).cos());
        [(LAMBDA + 3.0 * MU) * PI * PI * s, -(LAMBDA + MU) * PI * PI * c, 0.0]
    };
    let mut errors = vec![];
    for n in [4, 8, 16] {
        let m = mesh(n);
        let sol = solve_homogenized_membrane(&m, &coeffs(), 1.0, &SurfaceChart::plane(Rect::unit()), &load, &SolveSettings::default()).unwrap();
        let e1 = l2_error(&m.space, &sol.u[0], |x| (PI * x[0]).sin() * (PI * x[1]).sin(), &rule());
        let e2 = l2_error(&m.space, &sol.u[1], |_| 0.0, &rule());
        assert!(sol.phi.iter().all(|v| v.abs() < 1e-14) && sol.u[2].iter().all(|v| *v == 0.0));
        assert!(sol.energy_defect < 1e-10);
        errors.push((e1 * e1 + e2 * e2).sqrt());
    }
    let r = rates(&errors);
    assert!(r.iter().all(|r| (2.7..3.4).contains(r)), "errors {errors:?} rates {r:?}");
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn membrane_load_scales_with_the_perforated_measure() {
    // the homogenized load is |Y*|·F, so halving |Y*| halves the displacement
    let load = |x: [f64; 2]| [(PI * x[0]).sin() * (PI * x[1]).sin(), 0.3, 0.0];
    let m = mesh(6);
    let chart = SurfaceChart::plane(Rect::unit());
    let full = solve_homogenized_membrane(&m, &coeffs(), 1.0, &chart, &load, &SolveSettings::default()).unwrap();
    let half = solve_homogenized_membrane(&m, &coeffs(), 0.5, &chart, &load, &SolveSettings::default()).unwrap();
    for (a, b) in full.u[0].iter().zip(&half.u[0]) {
        assert!((0.5 * a - b).abs() < 1e-13);
    }
}

fn plate_exact(x: [f64; 2]) -> ([f64; 3], [f64; 3]) {
    // a(t) = sin² πt and its derivatives a, a', a'', a''''
    let d = |t: f64| {
        let (s, c) = ((2.0 * PI * t).sin(), (2.0 * PI * t).cos());
        [(PI * t).sin().powi(2), PI * s, 2.0 * PI * PI * c, -8.0 * PI.powi(4) * c]
    };
    let (ax, ay) = (d(x[0]), d(x[1]));
    let bilaplacian = ax[3] * ay[0] + 2.0 * ax[2] * ay[2] + ax[0] * ay[3];
    ([ax[2] * ay[0], ax[1] * ay[1], ax[0] * ay[2]], [ax[0] * ay[0], bilaplacian, 0.0])
}

#[test]
fn plate_manufactured_solution_broken_h2_error_decreases() {
    // w = sin²πx sin²πy is clamped; div div((2/3) C ∇²w) = (2/3)(λ+2μ) Δ²w for isotropic C
    let start = Instant::now();
    let c = Stiffness::isotropic(LAMBDA, MU);
    let load = |x: [f64; 2]| 2.0 / 3.0 * (LAMBDA + 2.0 * MU) * plate_exact(x).1[1];
    let mut h2 = vec![];
    let mut l2 = vec![];
    for n in [4, 8, 16] {
        let m = mesh(n);
        let sol = solve_homogenized_bending(&m, &c, 1.0, &SurfaceChart::plane(Rect::unit()), &load, &SolveSettings::default()).unwrap();
        h2.push(broken_h2_error(
            &m.space,
            &sol.deflection,
            |x| {
                let h = plate_exact(x).0;
                [[h[0], h[1]], [h[1], h[2]]]
            },
            &rule(),
        ));
        l2.push(l2_error(&m.space, &sol.deflection, |x| plate_exact(x).1[0], &rule()));
        assert!(sol.energy_defect < 1e-9);
    }
    assert!(h2[0] > h2[1] && h2[1] > h2[2], "{h2:?}");
    // the coarsest step is preasymptotic; the optimal broken-H² rate of P2 is 1
    assert!(rates(&h2)[1] > 0.9, "{h2:?}");
    assert!(l2[2] < l2[0], "{l2:?}");
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn zero_loads_give_zero_solutions() {
    let m = mesh(4);
    let chart = SurfaceChart::plane(Rect::unit());
    let s = solve_homogenized_membrane(&m, &coeffs(), 1.0, &chart, &|_| [0.0; 3], &SolveSettings::default()).unwrap();
    assert!(s.u.iter().flatten().chain(&s.phi).all(|v| *v == 0.0));
    let b = solve_homogenized_bending(&m, &coeffs().c, 1.0, &chart, &|_| 0.0, &SolveSettings::default()).unwrap();
    assert!(b.deflection.iter().all(|v| *v == 0.0));
}

#[test]
fn missing_boundary_conditions_are_reported() {
    let chart = SurfaceChart::plane(Rect::unit());
    let free = MacroMesh::new(Rect::unit(), [4, 4], Markers { clamp: vec![], ..Markers::default() }).unwrap();
    let r = solve_homogenized_membrane(&free, &coeffs(), 1.0, &chart, &|_| [1.0, 0.0, 0.0], &SolveSettings::default());
    assert!(matches!(r, Err(Error::BoundaryCondition(_))));
    let floating = MacroMesh::new(Rect::unit(), [4, 4], Markers { ground: vec![], ..Markers::default() }).unwrap();
    let r = solve_homogenized_membrane(&floating, &coeffs(), 1.0, &chart, &|_| [1.0, 0.0, 0.0], &SolveSettings::default());
    assert!(matches!(r, Err(Error::BoundaryCondition(_))));
    let r = solve_homogenized_bending(&free, &coeffs().c, 1.0, &chart, &|_| 1.0, &SolveSettings::default());
    assert!(matches!(r, Err(Error::BoundaryCondition(_))));
}

#[test]
fn curved_membrane_uses_three_displacements() {
    let domain = Rect::new(-0.5, 0.0, 0.5, 1.0);
    let chart = SurfaceChart::new(ChartKind::Cylinder { radius: 2.0 }, domain).unwrap();
    let m = MacroMesh::new(domain, [6, 6], Markers::default()).unwrap();
    let s = solve_homogenized_membrane(&m, &coeffs(), 1.0, &chart, &|_| [0.0, 0.0, 1.0], &SolveSettings::default()).unwrap();
    assert!(s.u[2].iter().any(|v| v.abs() > 1e-6), "normal load must deflect the curved shell");
    assert!(s.residual <= 1e-10 && s.energy_defect < 1e-9);
    let r = solve_homogenized_bending(&m, &coeffs().c, 1.0, &chart, &|_| 1.0, &SolveSettings::default());
    assert!(matches!(r, Err(Error::Config(_))));
}
