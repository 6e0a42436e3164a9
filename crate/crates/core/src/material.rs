//! Piecewise-constant periodic material tensors on the unit cell.
//!
//! Voigt pairs are ordered (11, 22, 12) and stored without shear factors; the 4-index
//! arrays are the source of truth and Voigt matrices are only a view.

use crate::error::{Error, Result};
use nalgebra::{Matrix2, Matrix3};

pub type Mat2 = [[f64; 2]; 2];
pub type Tensor3 = [[[f64; 2]; 2]; 2];
pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

/// Voigt index pairs.
pub const VOIGT: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];

pub fn voigt_index(a: usize, b: usize) -> usize {
    if a == b {
        a
    } else {
        2
    }
}

/// Symmetric 2×2 unit tensor of Voigt index `i`: `E^{τθ}_{λμ} = ½(δ_{τλ}δ_{θμ} + δ_{τμ}δ_{θλ})`.
pub fn unit_strain(i: usize) -> Mat2 {
    let (t, h) = VOIGT[i];
    let mut e = [[0.0; 2]; 2];
    e[t][h] += 0.5;
    e[h][t] += 0.5;
    e
}

pub fn contract22(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Rank-4 tensor with minor and major symmetries (membrane or bending stiffness).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stiffness(pub Tensor4);

impl Stiffness {
    pub fn from_voigt(v: [[f64; 3]; 3]) -> Self {
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

    pub fn isotropic(lambda: f64, mu: f64) -> Self {
        let p = lambda + 2.0 * mu;
        Stiffness::from_voigt([[p, lambda, 0.0], [lambda, p, 0.0], [0.0, 0.0, mu]])
    }

    pub fn zero() -> Self {
        Stiffness([[[[0.0; 2]; 2]; 2]; 2])
    }

    pub fn to_voigt(&self) -> [[f64; 3]; 3] {
        let mut v = [[0.0; 3]; 3];
        for (i, (a, b)) in VOIGT.iter().enumerate() {
            for (j, (l, m)) in VOIGT.iter().enumerate() {
                v[i][j] = self.0[*a][*b][*l][*m];
            }
        }
        v
    }

    /// `(c : s)_{αβ} = c^{αβλμ} s_{λμ}`.
    pub fn apply(&self, s: &Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let mut v = 0.0;
                for l in 0..2 {
                    for m in 0..2 {
                        v += self.0[a][b][l][m] * s[l][m];
                    }
                }
                out[a][b] = v;
            }
        }
        out
    }

    /// `s : c : t`.
    pub fn quadratic(&self, s: &Mat2, t: &Mat2) -> f64 {
        contract22(&self.apply(t), s)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut c = self.0;
        c.iter_mut().flatten().flatten().flatten().for_each(|v| *v *= s);
        Stiffness(c)
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        let c = &self.0;
        let mut worst = 0.0f64;
        for a in 0..2 {
            for b in 0..2 {
                for l in 0..2 {
                    for m in 0..2 {
                        let v = c[a][b][l][m];
                        worst = worst.max((v - c[b][a][l][m]).abs()).max((v - c[a][b][m][l]).abs()).max((v - c[l][m][a][b]).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn voigt_eigenvalues(&self) -> [f64; 3] {
        sym3_eigenvalues(self.to_voigt())
    }

    /// Largest Voigt eigenvalue magnitude; a homogeneous material scale.
    pub fn scale(&self) -> f64 {
        self.voigt_eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Piezoelectric coupling `e^{λαβ}`, symmetric in `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling(pub Tensor3);

impl Coupling {
    /// Rows indexed by `λ`, columns by Voigt pair.
    pub fn from_voigt(v: [[f64; 3]; 2]) -> Self {
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

    pub fn zero() -> Self {
        Coupling([[[0.0; 2]; 2]; 2])
    }

    pub fn to_voigt(&self) -> [[f64; 3]; 2] {
        let mut v = [[0.0; 3]; 2];
        for l in 0..2 {
            for (i, (a, b)) in VOIGT.iter().enumerate() {
                v[l][i] = self.0[l][*a][*b];
            }
        }
        v
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut e = self.0;
        e.iter_mut().flatten().flatten().for_each(|v| *v *= s);
        Coupling(e)
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for l in 0..2 {
            worst = worst.max((self.0[l][0][1] - self.0[l][1][0]).abs());
        }
        worst
    }
}

pub fn sym2_eigenvalues(m: Mat2) -> [f64; 2] {
    let e = Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]).symmetric_eigenvalues();
    let (a, b) = (e[0], e[1]);
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

pub fn sym3_eigenvalues(v: [[f64; 3]; 3]) -> [f64; 3] {
    let m = Matrix3::from_fn(|i, j| v[i][j]);
    let e = m.symmetric_eigenvalues();
    let mut out = [e[0], e[1], e[2]];
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Material constants of one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub c: Stiffness,
    pub e: Coupling,
    pub d: Mat2,
    /// Bending stiffness.
    pub bending: Stiffness,
}

impl Phase {
    pub fn scaled(&self, s: f64) -> Self {
        Phase {
            c: self.c.scaled(s),
            e: self.e.scaled(s),
            d: [[self.d[0][0] * s, self.d[0][1] * s], [self.d[1][0] * s, self.d[1][1] * s]],
            bending: self.bending.scaled(s),
        }
    }

    pub fn validate(&self, label: &str) -> Result<()> {
        let all_finite = self.c.0.iter().flatten().flatten().flatten().all(|v| v.is_finite())
            && self.bending.0.iter().flatten().flatten().flatten().all(|v| v.is_finite())
            && self.e.0.iter().flatten().flatten().all(|v| v.is_finite())
            && self.d.iter().flatten().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Material(format!("{label}: non-finite tensor entry")));
        }
        for (name, t) in [("membrane elasticity", &self.c), ("bending stiffness", &self.bending)] {
            let scale = t.scale().max(f64::MIN_POSITIVE);
            if t.max_symmetry_defect() > 1e-12 * scale {
                return Err(Error::Material(format!("{label}: {name} lacks minor/major symmetry")));
            }
            let ev = t.voigt_eigenvalues();
            if !(ev[0] > 1e-12 * scale) {
                return Err(Error::Material(format!("{label}: {name} not coercive (min Voigt eigenvalue {:e})", ev[0])));
            }
        }
        if self.e.max_symmetry_defect() > 0.0 {
            return Err(Error::Material(format!("{label}: piezo coupling not symmetric in its last two indices")));
        }
        if self.d[0][1] != self.d[1][0] {
            return Err(Error::Material(format!("{label}: dielectric tensor not symmetric")));
        }
        let ev = sym2_eigenvalues(self.d);
        let dscale = ev[1].abs().max(f64::MIN_POSITIVE);
        if !(ev[0] > 1e-12 * dscale) || ev[1] <= 0.0 {
            return Err(Error::Material(format!("{label}: dielectric tensor not positive definite (eigenvalues {:e}, {:e})", ev[0], ev[1])));
        }
        Ok(())
    }
}

/// Subset of the cell occupied by an inclusion phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// `from ≤ y_axis < to`, `axis ∈ {0, 1}`.
    Layer {
        axis: usize,
        from: f64,
        to: f64,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    Rectangle {
        center: [f64; 2],
        half_widths: [f64; 2],
    },
}

impl Region {
    pub fn contains(&self, y: [f64; 2]) -> bool {
        match *self {
            Region::Layer { axis, from, to } => y[axis] >= from && y[axis] < to,
            Region::Disk { center, radius } => (y[0] - center[0]).powi(2) + (y[1] - center[1]).powi(2) < radius * radius,
            Region::Rectangle { center, half_widths } => (y[0] - center[0]).abs() < half_widths[0] && (y[1] - center[1]).abs() < half_widths[1],
        }
    }
}

/// Periodic positive weight `√a(y)` used in cell integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Constant(f64),
    /// `1 + amplitude · sin(2π y_axis)`.
    Sine {
        amplitude: f64,
        axis: usize,
    },
}

impl Weight {
    pub fn at(&self, y: [f64; 2]) -> f64 {
        match *self {
            Weight::Constant(v) => v,
            Weight::Sine { amplitude, axis } => 1.0 + amplitude * (2.0 * std::f64::consts::PI * y[axis]).sin(),
        }
    }

    pub fn lower_bound(&self) -> f64 {
        match *self {
            Weight::Constant(v) => v,
            Weight::Sine { amplitude, .. } => 1.0 - amplitude.abs(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Weight::Constant(_))
    }
}

/// `c(y), e(y), d(y), C(y)` and `√a(y)` on the unit cell. Later inclusions override
/// earlier ones; phase index 0 is the base.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    pub base: Phase,
    pub inclusions: Vec<(Region, Phase)>,
    pub weight: Weight,
}

impl MaterialField {
    pub fn uniform(phase: Phase) -> Self {
        MaterialField { base: phase, inclusions: vec![], weight: Weight::Constant(1.0) }
    }

    /// `a` on `y_axis < ½`, `b` on `y_axis ≥ ½`.
    pub fn bilayer(axis: usize, a: Phase, b: Phase) -> Self {
        MaterialField { base: a, inclusions: vec![(Region::Layer { axis, from: 0.5, to: 1.0 + 1e-12 }, b)], weight: Weight::Constant(1.0) }
    }

    pub fn n_phases(&self) -> usize {
        1 + self.inclusions.len()
    }

    pub fn phase(&self, i: usize) -> &Phase {
        if i == 0 {
            &self.base
        } else {
            &self.inclusions[i - 1].1
        }
    }

    pub fn phase_index_at(&self, y: [f64; 2]) -> usize {
        let mut idx = 0;
        for (i, (r, _)) in self.inclusions.iter().enumerate() {
            if r.contains(y) {
                idx = i + 1;
            }
        }
        idx
    }

    pub fn sqrt_a(&self, y: [f64; 2]) -> f64 {
        self.weight.at(y)
    }

    pub fn scaled(&self, s: f64) -> Self {
        MaterialField { base: self.base.scaled(s), inclusions: self.inclusions.iter().map(|(r, p)| (*r, p.scaled(s))).collect(), weight: self.weight }
    }

    /// Largest membrane stiffness scale over the phases.
    pub fn membrane_scale(&self) -> f64 {
        (0..self.n_phases()).map(|i| self.phase(i).c.scale()).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate("base phase")?;
        for (i, (r, p)) in self.inclusions.iter().enumerate() {
            p.validate(&format!("inclusion {i}"))?;
            if let Region::Layer { axis, .. } = r {
                if *axis > 1 {
                    return Err(Error::Material(format!("inclusion {i}: layer axis must be 1 or 2")));
                }
            }
        }
        match self.weight {
            Weight::Constant(v) if !(v.is_finite() && v > 0.0) => Err(Error::Material(format!("weight √a must be positive, got {v}"))),
            Weight::Sine { amplitude, axis } if !(amplitude.abs() < 1.0) || axis > 1 => {
                Err(Error::Material(format!("sine weight needs |amplitude| < 1 and axis 1 or 2 (got {amplitude}, {})", axis + 1)))
            }
            _ => Ok(()),
        }
    }
}
