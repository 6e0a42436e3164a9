//! Run configuration: a single JSON document, unknown keys rejected, every downstream
//! precondition checked by [`RunConfig::validate`] before any solve.

use crate::cell::{build_cell_mesh, HoleSpec, PeriodicCellMesh};
use crate::error::{Error, Result};
use crate::fem::{QuadratureRule, SolveSettings};
use crate::geometry::{ChartKind, Rect, SurfaceChart};
use crate::macro_solver::{thickness_reduce, MacroMesh, Markers};
use crate::material::{Coupling, MaterialField, Phase, Region, Stiffness, Weight};
use crate::unfold::cells_along;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub chart: ChartConfig,
    #[serde(default)]
    pub cell: CellConfig,
    pub material: MaterialConfig,
    #[serde(default, rename = "macro")]
    pub macro_problem: MacroConfig,
    #[serde(default)]
    pub loads: LoadConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartConfig {
    #[default]
    Plane,
    Cylinder {
        radius: f64,
    },
    SpherePatch {
        radius: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    #[serde(default = "default_cell_n")]
    pub n: usize,
    #[serde(default)]
    pub hole: HoleConfig,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig { n: default_cell_n(), hole: HoleConfig::None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HoleConfig {
    #[default]
    None,
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
    },
    Rectangle {
        center: [f64; 2],
        half_widths: [f64; 2],
    },
}

/// Tensors in Voigt form `(11, 22, 12)`, shear entries unscaled. `bending` defaults to `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub c: [[f64; 3]; 3],
    #[serde(default)]
    pub e: [[f64; 3]; 2],
    pub d: [[f64; 2]; 2],
    #[serde(default)]
    pub bending: Option<[[f64; 3]; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionConfig {
    /// `from ≤ y_axis < to` with `axis ∈ {1, 2}`.
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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionConfig {
    pub region: RegionConfig,
    pub phase: PhaseConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    Constant {
        value: f64,
    },
    /// `1 + amplitude · sin(2π y_axis)`, `axis ∈ {1, 2}`.
    Sine {
        amplitude: f64,
        axis: usize,
    },
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub base: PhaseConfig,
    /// Later entries override earlier ones where regions overlap.
    #[serde(default)]
    pub inclusions: Vec<InclusionConfig>,
    #[serde(default)]
    pub weight: WeightConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroConfig {
    #[serde(default = "Rect::unit")]
    pub domain: Rect,
    #[serde(default = "default_macro_n")]
    pub n: usize,
    #[serde(default)]
    pub markers: Markers,
}

impl Default for MacroConfig {
    fn default() -> Self {
        MacroConfig { domain: Rect::unit(), n: default_macro_n(), markers: Markers::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadShape {
    #[default]
    Zero,
    Constant,
    /// `sin(π x̂₁) sin(π x̂₂)` in coordinates normalized to the macro domain.
    SineProduct,
}

/// Volumetric force `shape(x) · body · t^thickness_power` across `t ∈ [−1, 1]` plus face
/// tractions `shape(x) · traction_top/bottom`; reduced to mid-surface densities `F^i`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    #[serde(default)]
    pub shape: LoadShape,
    #[serde(default)]
    pub body: [f64; 3],
    #[serde(default)]
    pub thickness_power: u32,
    #[serde(default)]
    pub traction_top: [f64; 3],
    #[serde(default)]
    pub traction_bottom: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Macro mesh for the homogenized reference solutions of the corrector study.
    #[serde(default = "default_validation_macro_n")]
    pub macro_n: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { eps: default_eps(), macro_n: default_validation_macro_n() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "default_quadrature_degree")]
    pub quadrature_degree: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolveSettings::default();
        SolverConfig { residual_tol: s.residual_tol, penalty: s.penalty, quadrature_degree: s.quadrature_degree }
    }
}

fn default_cell_n() -> usize {
    16
}
fn default_macro_n() -> usize {
    32
}
fn default_eps() -> Vec<f64> {
    vec![0.5, 0.25, 0.125]
}
fn default_validation_macro_n() -> usize {
    128
}
fn default_residual_tol() -> f64 {
    SolveSettings::default().residual_tol
}
fn default_penalty() -> f64 {
    SolveSettings::default().penalty
}
fn default_quadrature_degree() -> usize {
    SolveSettings::default().quadrature_degree
}

impl PhaseConfig {
    pub fn to_phase(&self) -> Phase {
        Phase {
            c: Stiffness::from_voigt(self.c),
            e: Coupling::from_voigt(self.e),
            d: self.d,
            bending: Stiffness::from_voigt(self.bending.unwrap_or(self.c)),
        }
    }
}

fn axis_index(axis: usize, what: &str) -> Result<usize> {
    match axis {
        1 | 2 => Ok(axis - 1),
        _ => Err(Error::config(format!("{what}: axis must be 1 or 2, got {axis}"))),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hole(&self) -> HoleSpec {
        match self.cell.hole {
            HoleConfig::None => HoleSpec::None,
            HoleConfig::Disk { center, radius } => HoleSpec::Disk { center, radius },
            HoleConfig::Ellipse { center, semi_axes } => HoleSpec::Ellipse { center, semi_axes },
            HoleConfig::Rectangle { center, half_widths } => HoleSpec::Rectangle { center, half_widths },
        }
    }

    pub fn cell_mesh(&self) -> Result<PeriodicCellMesh> {
        build_cell_mesh(self.hole(), self.cell.n)
    }

    pub fn material_field(&self) -> Result<MaterialField> {
        let m = &self.material;
        let mut inclusions = Vec::with_capacity(m.inclusions.len());
        for (i, inc) in m.inclusions.iter().enumerate() {
            let region = match inc.region {
                RegionConfig::Layer { axis, from, to } => {
                    Region::Layer { axis: axis_index(axis, &format!("material.inclusions[{i}].region"))?, from, to }
                }
                RegionConfig::Disk { center, radius } => Region::Disk { center, radius },
                RegionConfig::Rectangle { center, half_widths } => Region::Rectangle { center, half_widths },
            };
            inclusions.push((region, inc.phase.to_phase()));
        }
        let weight = match m.weight {
            WeightConfig::Constant { value } => Weight::Constant(value),
            WeightConfig::Sine { amplitude, axis } => Weight::Sine { amplitude, axis: axis_index(axis, "material.weight")? },
        };
        let field = MaterialField { base: m.base.to_phase(), inclusions, weight };
        field.validate()?;
        Ok(field)
    }

    pub fn chart(&self) -> Result<SurfaceChart> {
        let kind = match self.chart {
            ChartConfig::Plane => ChartKind::Plane,
            ChartConfig::Cylinder { radius } => ChartKind::Cylinder { radius },
            ChartConfig::SpherePatch { radius } => ChartKind::SpherePatch { radius },
        };
        SurfaceChart::new(kind, self.macro_problem.domain)
    }

    pub fn macro_mesh(&self) -> Result<MacroMesh> {
        let m = &self.macro_problem;
        MacroMesh::new(m.domain, [m.n, m.n], m.markers.clone())
    }

    pub fn settings(&self) -> SolveSettings {
        SolveSettings { residual_tol: self.solver.residual_tol, penalty: self.solver.penalty, quadrature_degree: self.solver.quadrature_degree }
    }

    /// Mid-surface load density `F(x) = (F¹, F², F³)`.
    pub fn load_density(&self) -> impl Fn([f64; 2]) -> [f64; 3] + '_ {
        let l = self.loads;
        let p = l.thickness_power as i32;
        let through = thickness_reduce(|t| t.powi(p), l.thickness_power as usize / 2 + 3);
        let amp: [f64; 3] = std::array::from_fn(|i| l.body[i] * through + l.traction_top[i] + l.traction_bottom[i]);
        let d = self.macro_problem.domain;
        move |x| {
            let s = match l.shape {
                LoadShape::Zero => 0.0,
                LoadShape::Constant => 1.0,
                LoadShape::SineProduct => (PI * (x[0] - d.x0) / d.width()).sin() * (PI * (x[1] - d.y0) / d.height()).sin(),
            };
            [s * amp[0], s * amp[1], s * amp[2]]
        }
    }

    /// Check every precondition of the pipeline without solving anything.
    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        if !(s.residual_tol.is_finite() && s.residual_tol > 0.0 && s.residual_tol < 1.0) {
            return Err(Error::config(format!("solver.residual_tol must lie in (0, 1), got {}", s.residual_tol)));
        }
        if !(s.penalty.is_finite() && s.penalty > 0.0) {
            return Err(Error::config(format!("solver.penalty must be positive, got {}", s.penalty)));
        }
        QuadratureRule::triangle(s.quadrature_degree).map_err(|e| Error::config(format!("solver.quadrature_degree: {e}")))?;
        self.cell_mesh()?;
        self.material_field()?;
        self.chart()?;
        let m = &self.macro_problem;
        if m.n == 0 || self.validation.macro_n == 0 {
            return Err(Error::config("macro mesh resolution must be at least 1"));
        }
        if let Some(r) = m.markers.electrode {
            if !(r.x0 < r.x1 && r.y0 < r.y1) {
                return Err(Error::config("macro.markers.electrode must be a non-empty rectangle"));
            }
        }
        let l = &self.loads;
        if l.body.iter().chain(&l.traction_top).chain(&l.traction_bottom).any(|v| !v.is_finite()) {
            return Err(Error::config("loads must be finite"));
        }
        if self.validation.eps.is_empty() {
            return Err(Error::config("validation.eps must list at least one ε"));
        }
        for &eps in &self.validation.eps {
            cells_along(m.domain.width(), eps).and_then(|_| cells_along(m.domain.height(), eps))?;
        }
        Ok(())
    }
}
