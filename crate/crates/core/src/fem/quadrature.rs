//! Triangle and interval quadrature.
// tabulated abscissae keep the digits of the published rules
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

/// Symmetric rule on the reference triangle `{(s, t): s, t ≥ 0, s + t ≤ 1}`.
///
/// Points are barycentric `(λ₀, λ₁, λ₂)`; weights sum to the reference area ½.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

fn orbit3(a: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        pts.push(p);
        wts.push(w);
    }
}

impl QuadratureRule {
    /// Smallest built-in rule of at least the requested degree (2, 4 or 5).
    pub fn triangle(degree: usize) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let degree = match degree {
            0..=2 => {
                orbit3(1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights);
                2
            }
            3 | 4 => {
                orbit3(0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_70, &mut points, &mut weights);
                orbit3(0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64, &mut points, &mut weights);
                4
            }
            5 => {
                points.push([1.0 / 3.0; 3]);
                weights.push(0.225);
                orbit3(0.470_142_064_105_115_089_77, 0.132_394_152_788_506_180_74, &mut points, &mut weights);
                orbit3(0.101_286_507_323_456_338_80, 0.125_939_180_544_827_152_60, &mut points, &mut weights);
                5
            }
            d => return Err(Error::config(format!("no triangle rule of degree {d} (supported: 2, 4, 5)"))),
        };
        for w in &mut weights {
            *w *= 0.5;
        }
        Ok(QuadratureRule { points, weights, degree })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
}
