use piezoshell::geometry::*;
use proptest::prelude::*;

type V3 = [f64; 3];

fn charts() -> Vec<SurfaceChart> {
    vec![
        SurfaceChart::new(ChartKind::Cylinder { radius: 1.7 }, Rect::new(-0.8, 0.0, 0.9, 1.0)).unwrap(),
        SurfaceChart::new(ChartKind::SpherePatch { radius: 1.3 }, Rect::new(-0.5, -0.4, 0.6, 0.5)).unwrap(),
        SurfaceChart::plane(Rect::unit()),
    ]
}

fn samples(c: &SurfaceChart) -> Vec<[f64; 2]> {
    let d = c.domain;
    [(0.2, 0.3), (0.5, 0.5), (0.8, 0.15), (0.35, 0.9)].iter().map(|(s, t)| [d.x0 + s * d.width(), d.y0 + t * d.height()]).collect()
}

fn lin(a: V3, s: f64, b: V3) -> V3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn shift(x: [f64; 2], a: usize, h: f64) -> [f64; 2] {
    let mut y = x;
    y[a] += h;
    y
}

/// Central difference of a vector map along coordinate `a`.
fn fd(f: impl Fn([f64; 2]) -> V3, x: [f64; 2], a: usize, h: f64) -> V3 {
    let (p, m) = (f(shift(x, a, h)), f(shift(x, a, -h)));
    lin(p, -1.0, m).map(|v| v / (2.0 * h))
}

#[test]
fn tangents_and_second_derivatives_match_finite_differences() {
    let h = 1e-4;
    for c in charts() {
        for x in samples(&c) {
            let t = c.tangents(x);
            let d2 = c.second_derivatives(x);
            for a in 0..2 {
                let g = fd(|y| c.point(y), x, a, h);
                assert!((0..3).all(|i| (g[i] - t[a][i]).abs() < 1e-7), "{:?} {x:?}", c.kind);
                for b in 0..2 {
                    let g2 = fd(|y| c.tangents(y)[b], x, a, h);
                    assert!((0..3).all(|i| (g2[i] - d2[a][b][i]).abs() < 1e-6), "{:?} {x:?} {a}{b}", c.kind);
                }
            }
        }
    }
}

/// Displacement with covariant components `v_α` and normal component `v₃`.
fn field(x: [f64; 2]) -> (V3, [[f64; 2]; 3]) {
    let v = [0.3 * x[0] * x[1] + 0.1, (1.3 * x[0]).sin() * 0.2, 0.05 + 0.4 * x[1] * x[1]];
    let g = [[0.3 * x[1], 0.3 * x[0]], [0.26 * (1.3 * x[0]).cos(), 0.0], [0.0, 0.8 * x[1]]];
    (v, g)
}

fn embedded(c: &SurfaceChart, x: [f64; 2]) -> V3 {
    // V = v_σ a^σ + v₃ a₃
    let (v, _) = field(x);
    let f = c.frame_at(x).unwrap();
    let m = c.metric(x);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    let t = [f.a1, f.a2];
    let mut out = f.a3.map(|z| z * v[2]);
    for s in 0..2 {
        for r in 0..2 {
            out = lin(out, v[s] * inv[s][r], t[r]);
        }
    }
    out
}

#[test]
fn membrane_strain_is_the_linearized_metric_change() {
    // γ_{αβ} = ½(a_α·∂_β V + a_β·∂_α V) for the embedded displacement V
    for c in charts() {
        for x in samples(&c) {
            let (value, grad) = field(x);
            let jet = DisplacementJet { value, grad, hess3: [[0.0; 2]; 2] };
            let g = membrane_strain(&c.geometry_coeffs(x).unwrap(), &jet);
            let t = c.tangents(x);
            let dv = [fd(|y| embedded(&c, y), x, 0, 1e-5), fd(|y| embedded(&c, y), x, 1, 1e-5)];
            for a in 0..2 {
                for b in 0..2 {
                    let oracle = 0.5 * (dot(t[a], dv[b]) + dot(t[b], dv[a]));
                    assert!((g[a][b] - oracle).abs() < 1e-8, "{:?} {x:?} ({a}{b}): {} vs {oracle}", c.kind, g[a][b]);
                }
            }
        }
    }
}

#[test]
fn cylinder_normal_displacement_gives_the_third_fundamental_form() {
    let c = &charts()[0];
    for x in samples(c) {
        let geom = c.geometry_coeffs(x).unwrap();
        let jet = DisplacementJet { value: [0.0, 0.0, 1.0], ..Default::default() };
        let u = bending_strain(&geom, &jet);
        for a in 0..2 {
            for b in 0..2 {
                assert!((u[a][b] - geom.c_ab[a][b]).abs() < 1e-14);
            }
        }
    }
}

fn jet_from(v: &[f64]) -> DisplacementJet {
    DisplacementJet { value: [v[0], v[1], v[2]], grad: [[v[3], v[4]], [v[5], v[6]], [v[7], v[8]]], hess3: [[v[9], v[10]], [v[10], v[11]]] }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn strain_operators_are_linear(
        v in proptest::collection::vec(-2.0..2.0f64, 12),
        w in proptest::collection::vec(-2.0..2.0f64, 12),
        which in 0..3usize,
        s in 0.05..0.95f64,
        t in 0.05..0.95f64,
    ) {
        let c = &charts()[which];
        let x = [c.domain.x0 + s * c.domain.width(), c.domain.y0 + t * c.domain.height()];
        let g = c.geometry_coeffs(x).unwrap();
        let (jv, jw) = (jet_from(&v), jet_from(&w));
        let sum = jv.add(&jw);
        for op in [membrane_strain, bending_strain] {
            let (a, b, ab) = (op(&g, &jv), op(&g, &jw), op(&g, &sum));
            for i in 0..2 {
                for j in 0..2 {
                    let scale = a[i][j].abs() + b[i][j].abs() + 1.0;
                    prop_assert!((ab[i][j] - a[i][j] - b[i][j]).abs() <= 32.0 * f64::EPSILON * scale);
                }
            }
        }
    }
}
