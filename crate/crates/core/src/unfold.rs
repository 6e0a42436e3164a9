//! Discrete unfolding `T^ε` and averaging `U^ε` on the tiled quadrature layout.
//!
//! Physical samples on `ω^ε` live at `x = ε(k + y_s)` for every ε-cell `k` (row-major,
//! `k = k₂ m₁ + k₁`) and every micro quadrature slot `s` of the perforated cell
//! (element-major, then point). A field on `ω^ε` and a two-scale field therefore share one
//! index layout `(k, s, component)`; holes carry no slots.

use crate::cell::PeriodicCellMesh;
use crate::error::{Error, Result};
use crate::fem::QuadratureRule;
use crate::geometry::Rect;
use std::io::Write;

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone)]
pub struct EpsGrid {
    pub eps: f64,
    pub domain: Rect,
    /// Number of ε-cells along each axis.
    pub cells: [usize; 2],
    /// Micro slot positions `y_s ∈ Y*` and unit-cell weights `ω_s`.
    pub micro_points: Vec<Vec2>,
    pub micro_weights: Vec<f64>,
    /// Cell element of each slot and slots per element.
    pub slot_element: Vec<usize>,
    pub points_per_element: usize,
}

/// `m` with `side = m·ε` exactly, or a configuration error.
pub fn cells_along(side: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("ε = {eps} must be positive")));
    }
    let inv = 1.0 / eps;
    let m = inv.round();
    if (inv - m).abs() > 1e-9 * inv || m < 1.0 {
        return Err(Error::config(format!("ε = {eps} is not of the form 1/m")));
    }
    let cells = side * m;
    let c = cells.round();
    if (cells - c).abs() > 1e-9 * cells.max(1.0) || c < 1.0 {
        return Err(Error::config(format!("ε = {eps} does not divide the domain side {side}")));
    }
    Ok(c as usize)
}

impl EpsGrid {
    pub fn new(cell: &PeriodicCellMesh, rule: &QuadratureRule, domain: Rect, eps: f64) -> Result<Self> {
        let mx = cells_along(domain.width(), eps)?;
        let my = cells_along(domain.height(), eps)?;
        let eps = 1.0 / (1.0 / eps).round();
        let mut micro_points = Vec::new();
        let mut micro_weights = Vec::new();
        let mut slot_element = Vec::new();
        for k in 0..cell.space.n_elements() {
            let el = cell.space.element(k);
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                micro_points.push(el.point(*l));
                micro_weights.push(2.0 * el.area * w);
                slot_element.push(k);
            }
        }
        Ok(EpsGrid { eps, domain, cells: [mx, my], micro_points, micro_weights, slot_element, points_per_element: rule.len() })
    }

    pub fn n_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn n_slots(&self) -> usize {
        self.micro_points.len()
    }

    pub fn len(&self) -> usize {
        self.n_cells() * self.n_slots()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `|Y*|` from the slot weights.
    pub fn ystar(&self) -> f64 {
        self.micro_weights.iter().sum()
    }

    pub fn cell_index(&self, k: usize) -> [usize; 2] {
        [k % self.cells[0], k / self.cells[0]]
    }

    pub fn cell_origin(&self, k: usize) -> Vec2 {
        let [k1, k2] = self.cell_index(k);
        [self.domain.x0 + self.eps * k1 as f64, self.domain.y0 + self.eps * k2 as f64]
    }

    /// `ε[x/ε] + εy` for cell `k`.
    pub fn physical(&self, k: usize, y: Vec2) -> Vec2 {
        let o = self.cell_origin(k);
        [o[0] + self.eps * y[0], o[1] + self.eps * y[1]]
    }

    pub fn sample_point(&self, k: usize, s: usize) -> Vec2 {
        self.physical(k, self.micro_points[s])
    }

    /// `([x/ε], {x/ε})` as a cell number and micro position; points on cell interfaces
    /// go to the upper cell except on the domain's far edges.
    pub fn split(&self, x: Vec2) -> (usize, Vec2) {
        let mut idx = [0usize; 2];
        let mut y = [0.0; 2];
        for a in 0..2 {
            let o = if a == 0 { self.domain.x0 } else { self.domain.y0 };
            let t = (x[a] - o) / self.eps;
            let c = (t.floor().max(0.0) as usize).min(self.cells[a] - 1);
            idx[a] = c;
            y[a] = t - c as f64;
        }
        (idx[1] * self.cells[0] + idx[0], y)
    }

    fn check(&self, len: usize, ncomp: usize, what: &str) -> Result<()> {
        if ncomp == 0 || len != self.len() * ncomp {
            return Err(Error::Shape(format!(
                "{what}: {len} values do not match {} cells × {} slots × {ncomp} components",
                self.n_cells(),
                self.n_slots()
            )));
        }
        Ok(())
    }
}

/// Values on `ω^ε` at the physical sample points, layout `(k, s, component)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsField {
    pub ncomp: usize,
    pub values: Vec<f64>,
}

/// Values on `(ε-cells) × Y*`, layout `(k, s, component)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleField {
    pub ncomp: usize,
    pub values: Vec<f64>,
}

impl EpsField {
    pub fn sample(grid: &EpsGrid, ncomp: usize, f: impl Fn(Vec2) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * ncomp);
        for k in 0..grid.n_cells() {
            for s in 0..grid.n_slots() {
                let v = f(grid.sample_point(k, s));
                if v.len() != ncomp {
                    return Err(Error::Shape(format!("sampled {} components, expected {ncomp}", v.len())));
                }
                values.extend(v);
            }
        }
        Ok(EpsField { ncomp, values })
    }

    pub fn scalar(grid: &EpsGrid, f: impl Fn(Vec2) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.n_cells() {
            for s in 0..grid.n_slots() {
                values.push(f(grid.sample_point(k, s)));
            }
        }
        EpsField { ncomp: 1, values }
    }

    pub fn zip_with(&self, other: &EpsField, f: impl Fn(f64, f64) -> f64) -> Result<EpsField> {
        if self.ncomp != other.ncomp || self.values.len() != other.values.len() {
            return Err(Error::Shape("fields on different layouts".into()));
        }
        Ok(EpsField { ncomp: self.ncomp, values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect() })
    }
}

/// `T^ε(f)(k, y_s) = f(ε k + ε y_s)`, read on the shared layout.
pub fn unfold(f: &EpsField, grid: &EpsGrid) -> Result<TwoScaleField> {
    grid.check(f.values.len(), f.ncomp, "unfold")?;
    Ok(TwoScaleField { ncomp: f.ncomp, values: f.values.clone() })
}

/// `T^ε(f)(x, y)` at an arbitrary micro position for a function given in closed form.
pub fn unfold_at(f: impl Fn(Vec2) -> f64, grid: &EpsGrid, cell: [usize; 2], y: Vec2) -> f64 {
    f(grid.physical(cell[1] * grid.cells[0] + cell[0], y))
}

/// `U^ε(Φ)(x) = (1/|Y*|) ∫_{Y*} Φ(ε[x/ε] + εz, {x/ε}) dz` for `Φ` whose macro dependence
/// is through the ε-cell, i.e. `Φ(k, {x/ε})`.
pub fn average(phi: &TwoScaleField, grid: &EpsGrid) -> Result<EpsField> {
    grid.check(phi.values.len(), phi.ncomp, "average")?;
    // Φ is constant in z over the ε-cell, so the z-average is the value at ({x/ε})
    Ok(EpsField { ncomp: phi.ncomp, values: phi.values.clone() })
}

/// Per-cell micro averages `(1/|Y*|) ∫_{Y*} g(εk + εz) dz`, layout `(k, component)`.
pub fn cell_averages(g: &EpsField, grid: &EpsGrid) -> Result<Vec<f64>> {
    grid.check(g.values.len(), g.ncomp, "cell average")?;
    let ystar = grid.ystar();
    let (nc, ns) = (g.ncomp, grid.n_slots());
    let mut out = vec![0.0; grid.n_cells() * nc];
    for k in 0..grid.n_cells() {
        for s in 0..ns {
            for c in 0..nc {
                out[k * nc + c] += grid.micro_weights[s] * g.values[(k * ns + s) * nc + c];
            }
        }
        for c in 0..nc {
            out[k * nc + c] /= ystar;
        }
    }
    Ok(out)
}

/// `U^ε(g ⊗ h)` for `Φ(x, y) = g(x) h(y)`: the cell average of `g` times `h({x/ε})`.
/// `h` holds one value per micro slot.
pub fn average_separable(g: &EpsField, h: &[f64], grid: &EpsGrid) -> Result<EpsField> {
    if g.ncomp != 1 || h.len() != grid.n_slots() {
        return Err(Error::Shape(format!("separable average needs a scalar g and {} micro values", grid.n_slots())));
    }
    let gbar = cell_averages(g, grid)?;
    let ns = grid.n_slots();
    let mut values = Vec::with_capacity(grid.len());
    for gk in &gbar {
        values.extend(h.iter().take(ns).map(|hs| gk * hs));
    }
    Ok(EpsField { ncomp: 1, values })
}

/// `max |T^ε(vw) − T^ε(v) T^ε(w)|` for scalar fields.
pub fn unfold_product_check(v: &EpsField, w: &EpsField, grid: &EpsGrid) -> Result<f64> {
    let vw = v.zip_with(w, |a, b| a * b)?;
    let (tvw, tv, tw) = (unfold(&vw, grid)?, unfold(v, grid)?, unfold(w, grid)?);
    Ok(tvw.values.iter().zip(tv.values.iter().zip(&tw.values)).fold(0.0f64, |m, (p, (a, b))| m.max((p - a * b).abs())))
}

/// `(∫_{ω^ε} w, (1/|Y*|) ∬_{ω^ε×Y*} T^ε(w))` with the shared quadrature. The left side
/// sums physical samples with weights `ε² ω_s`; the right side integrates the
/// two-scale field in `y`, then in `x` over each perforated ε-cell of measure `ε²|Y*|`.
pub fn integration_identity_check(w: &EpsField, grid: &EpsGrid) -> Result<(f64, f64)> {
    grid.check(w.values.len(), 1, "integration identity")?;
    let e2 = grid.eps * grid.eps;
    let ns = grid.n_slots();
    let mut physical = CompensatedSum::default();
    for k in 0..grid.n_cells() {
        for s in 0..ns {
            physical.add(e2 * grid.micro_weights[s] * w.values[k * ns + s]);
        }
    }
    let t = unfold(w, grid)?;
    let ystar = grid.ystar();
    let mut two_scale = CompensatedSum::default();
    for k in 0..grid.n_cells() {
        let mut inner = CompensatedSum::default();
        for s in 0..ns {
            inner.add(grid.micro_weights[s] * t.values[k * ns + s]);
        }
        two_scale.add(e2 * ystar * inner.value());
    }
    let (physical, two_scale) = (physical.value(), two_scale.value());
    Ok((physical, two_scale / ystar))
}

/// Neumaier summation; keeps long quadrature sums accurate to a few ulps.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.carry += if self.sum.abs() >= x.abs() { (self.sum - t) + x } else { (x - t) + self.sum };
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// L² norm on `ω^ε` of a multi-component field (Euclidean norm over components).
pub fn l2_norm(f: &EpsField, grid: &EpsGrid) -> f64 {
    let e2 = grid.eps * grid.eps;
    let (nc, ns) = (f.ncomp, grid.n_slots());
    let mut total = 0.0;
    for k in 0..grid.n_cells() {
        for s in 0..ns {
            let base = (k * ns + s) * nc;
            total += e2 * grid.micro_weights[s] * f.values[base..base + nc].iter().map(|v| v * v).sum::<f64>();
        }
    }
    total.sqrt()
}

/// Two-scale field as CSV: `k1,k2,y1,y2,v0,…`, cells then slots.
pub fn write_two_scale_csv(phi: &TwoScaleField, grid: &EpsGrid, out: &mut impl Write) -> Result<()> {
    grid.check(phi.values.len(), phi.ncomp, "csv dump")?;
    write!(out, "k1,k2,y1,y2")?;
    for c in 0..phi.ncomp {
        write!(out, ",v{c}")?;
    }
    writeln!(out)?;
    let ns = grid.n_slots();
    for k in 0..grid.n_cells() {
        let [k1, k2] = grid.cell_index(k);
        for s in 0..ns {
            let y = grid.micro_points[s];
            write!(out, "{k1},{k2},{:.17e},{:.17e}", y[0], y[1])?;
            for c in 0..phi.ncomp {
                write!(out, ",{:.17e}", phi.values[(k * ns + s) * phi.ncomp + c])?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
