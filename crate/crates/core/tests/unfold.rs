mod common;

use common::{disk_cell, full_cell};
use piezoshell::cell::PeriodicCellMesh;
use piezoshell::fem::QuadratureRule;
use piezoshell::geometry::Rect;
use piezoshell::unfold::*;
use piezoshell::Error;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use std::f64::consts::PI;

const EPS: [f64; 3] = [0.5, 0.25, 0.125];

fn rule() -> QuadratureRule {
    QuadratureRule::triangle(4).unwrap()
}

fn cells() -> [PeriodicCellMesh; 2] {
    [full_cell(8), disk_cell(0.25, 8)]
}

fn grid(cell: &PeriodicCellMesh, eps: f64) -> EpsGrid {
    EpsGrid::new(cell, &rule(), Rect::unit(), eps).unwrap()
}

/// Deterministic samples in [−1, 1).
fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_field(g: &EpsGrid, ncomp: usize, seed: u64) -> EpsField {
    EpsField { ncomp, values: noise(seed, g.len() * ncomp) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn product_rule_linearity_and_inverse(seed in any::<u64>(), a in -5.0..5.0f64, b in -5.0..5.0f64) {
        for cell in &cells() {
            for eps in EPS {
                let g = grid(cell, eps);
                let v = random_field(&g, 1, seed);
                let w = random_field(&g, 1, seed ^ 0xABCD);
                prop_assert!(unfold_product_check(&v, &w, &g).unwrap() <= 1e-14);

                let combo = v.zip_with(&w, |x, y| a * x + b * y).unwrap();
                let (tc, tv, tw) = (unfold(&combo, &g).unwrap(), unfold(&v, &g).unwrap(), unfold(&w, &g).unwrap());
                let lin = tc.values.iter().zip(tv.values.iter().zip(&tw.values)).fold(0.0f64, |m, (c, (x, y))| m.max((c - a * x - b * y).abs()));
                prop_assert!(lin <= 1e-14);

                let back = average(&unfold(&v, &g).unwrap(), &g).unwrap();
                prop_assert!(back.values.iter().zip(&v.values).all(|(x, y)| (x - y).abs() <= 1e-14));

                let (phys, two) = integration_identity_check(&v, &g).unwrap();
                prop_assert!((phys - two).abs() <= 1e-14, "{} vs {}", phys, two);
            }
        }
    }
}

#[test]
fn layout_matches_closed_form_unfolding() {
    let f = |x: [f64; 2]| (3.0 * x[0]).sin() + x[0] * x[1] * x[1];
    for cell in &cells() {
        for eps in EPS {
            let g = grid(cell, eps);
            let t = unfold(&EpsField::scalar(&g, f), &g).unwrap();
            let ns = g.n_slots();
            for k in 0..g.n_cells() {
                for s in (0..ns).step_by(7) {
                    let exact = unfold_at(f, &g, g.cell_index(k), g.micro_points[s]);
                    assert!((t.values[k * ns + s] - exact).abs() <= 1e-14);
                }
            }
        }
    }
}

#[test]
fn constant_integrand_measures_the_perforated_domain() {
    let cell = disk_cell(0.25, 16);
    let g = grid(&cell, 0.25);
    let (phys, two) = integration_identity_check(&EpsField::scalar(&g, |_| 1.0), &g).unwrap();
    assert!((phys - cell.area()).abs() < 1e-13, "{phys} vs {}", cell.area());
    assert!((two - phys).abs() < 1e-14);
    // polygonal hole boundary: area differs from the exact disk by O(h²)
    assert!((phys - (1.0 - PI / 16.0)).abs() < 5e-3);
}

#[test]
fn unfolding_a_constant_is_constant() {
    let cell = disk_cell(0.25, 8);
    let g = grid(&cell, 0.25);
    let t = unfold(&EpsField::scalar(&g, |_| 2.5), &g).unwrap();
    assert!(t.values.iter().all(|v| *v == 2.5));
}

#[test]
fn unfolding_an_affine_function_of_x1() {
    // T^ε(x₁)(x, y) = ε[x₁/ε] + ε y₁
    let cell = full_cell(8);
    let g = grid(&cell, 0.25);
    let t = unfold(&EpsField::scalar(&g, |x| x[0]), &g).unwrap();
    let ns = g.n_slots();
    for k in 0..g.n_cells() {
        let k1 = g.cell_index(k)[0] as f64;
        for s in 0..ns {
            assert!((t.values[k * ns + s] - 0.25 * (k1 + g.micro_points[s][0])).abs() < 1e-15);
        }
    }
}

#[test]
fn averaging_a_micro_oscillation_has_zero_cell_means() {
    // U^ε(sin 2πy₁) = sin(2π{x/ε}₁): not zero pointwise, but every cell mean and the
    // integral over ω^ε vanish (up to quadrature of sin on the mesh)
    let cell = full_cell(8);
    let rule = rule();
    let g = EpsGrid::new(&cell, &rule, Rect::unit(), 0.25).unwrap();
    let h: Vec<f64> = g.micro_points.iter().map(|y| (2.0 * PI * y[0]).sin()).collect();
    let one = EpsField::scalar(&g, |_| 1.0);
    let u = average_separable(&one, &h, &g).unwrap();
    let means = cell_averages(&u, &g).unwrap();
    assert!(means.iter().all(|m| m.abs() < 1e-14), "{means:?}");
    let (phys, _) = integration_identity_check(&u, &g).unwrap();
    assert!(phys.abs() < 1e-14);
    let ns = g.n_slots();
    let s = (0..ns).max_by(|a, b| h[*a].total_cmp(&h[*b])).unwrap();
    assert!((u.values[s] - h[s]).abs() < 1e-15 && h[s] > 0.9);
}

#[test]
fn separable_average_uses_cell_means_of_the_macro_factor() {
    let cell = disk_cell(0.25, 8);
    let g = grid(&cell, 0.5);
    let gx = EpsField::scalar(&g, |x| x[0] + 2.0 * x[1]);
    let h: Vec<f64> = g.micro_points.iter().map(|y| 1.0 + y[1]).collect();
    let u = average_separable(&gx, &h, &g).unwrap();
    let means = cell_averages(&gx, &g).unwrap();
    // cell centroid of the symmetric perforated cell: ε(k + ½)
    for k in 0..g.n_cells() {
        let [k1, k2] = g.cell_index(k);
        let centroid = 0.5 * (k1 as f64 + 0.5) + 2.0 * 0.5 * (k2 as f64 + 0.5);
        assert!((means[k] - centroid).abs() < 1e-12, "{} vs {centroid}", means[k]);
        for s in 0..g.n_slots() {
            assert!((u.values[k * g.n_slots() + s] - means[k] * h[s]).abs() < 1e-15);
        }
    }
}

#[test]
fn eps_must_be_a_reciprocal_integer() {
    let cell = full_cell(8);
    let err = EpsGrid::new(&cell, &rule(), Rect::unit(), 0.3).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert_eq!(EpsGrid::new(&cell, &rule(), Rect::unit(), 1.0 / 3.0).unwrap().cells, [3, 3]);
    assert!(matches!(cells_along(1.0, 0.0), Err(Error::Config(_))));
}

#[test]
fn mismatched_layouts_are_shape_errors() {
    let cell = full_cell(8);
    let g = grid(&cell, 0.5);
    let short = EpsField { ncomp: 1, values: vec![0.0; 3] };
    assert!(matches!(unfold(&short, &g), Err(Error::Shape(_))));
    assert!(matches!(cell_averages(&short, &g), Err(Error::Shape(_))));
}

#[test]
fn two_scale_csv_round_trips() {
    let cell = full_cell(4);
    let g = grid(&cell, 0.5);
    let v = random_field(&g, 2, 7);
    let t = unfold(&v, &g).unwrap();
    let mut buf = Vec::new();
    write_two_scale_csv(&t, &g, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k1,k2,y1,y2,v0,v1"));
    let parsed: Vec<f64> = lines.flat_map(|l| l.split(',').skip(4).map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect();
    assert_eq!(parsed, t.values);
}
