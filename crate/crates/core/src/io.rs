//! Artifact writers: legacy ASCII VTK for P2 meshes and nodal fields, CSV tables.
//!
//! Floats use Rust's shortest round-trip formatting, so output is deterministic and
//! parses back to the identical value.

use crate::error::{Error, Result};
use crate::fem::P2Space;
use crate::homogenize::HomogenizedTensors;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// VTK cell type of the 6-node quadratic triangle; node order matches the P2 layout.
const VTK_QUADRATIC_TRIANGLE: u8 = 22;

pub enum NodalData<'a> {
    Scalar(&'a str, &'a [f64]),
    /// Planar or 3D vector; missing components are written as 0.
    Vector(&'a str, Vec<&'a [f64]>),
}

pub fn vtk_string(title: &str, space: &P2Space, point_data: &[NodalData], cell_scalars: &[(&str, Vec<f64>)]) -> Result<String> {
    let n = space.n_nodes();
    for d in point_data {
        let ok = match d {
            NodalData::Scalar(_, v) => v.len() == n,
            NodalData::Vector(_, c) => c.len() <= 3 && c.iter().all(|v| v.len() == n),
        };
        if !ok {
            return Err(Error::Shape(format!("nodal field length does not match {n} nodes")));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for p in &space.nodes {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let ne = space.n_elements();
    let _ = writeln!(s, "CELLS {ne} {}", ne * 7);
    for e in &space.elem_nodes {
        let _ = writeln!(s, "6 {} {} {} {} {} {}", e[0], e[1], e[2], e[3], e[4], e[5]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "{VTK_QUADRATIC_TRIANGLE}");
    }
    if !cell_scalars.is_empty() {
        let _ = writeln!(s, "CELL_DATA {ne}");
        for (name, v) in cell_scalars {
            if v.len() != ne {
                return Err(Error::Shape(format!("cell field {name} has {} entries for {ne} elements", v.len())));
            }
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for x in v {
                let _ = writeln!(s, "{x}");
            }
        }
    }
    if !point_data.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
        for d in point_data {
            match d {
                NodalData::Scalar(name, v) => {
                    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                    for x in *v {
                        let _ = writeln!(s, "{x}");
                    }
                }
                NodalData::Vector(name, c) => {
                    let _ = writeln!(s, "VECTORS {name} double");
                    for i in 0..n {
                        let comp = |k: usize| c.get(k).map_or(0.0, |v| v[i]);
                        let _ = writeln!(s, "{} {} {}", comp(0), comp(1), comp(2));
                    }
                }
            }
        }
    }
    Ok(s)
}

/// Counts recovered from a legacy VTK file: points, cells, and named data arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkSummary {
    pub points: usize,
    pub cells: usize,
    pub arrays: Vec<String>,
}

/// Minimal reader of the subset written by [`vtk_string`]; errors on any structural
/// inconsistency.
pub fn parse_vtk(text: &str) -> Result<VtkSummary> {
    let bad = |m: &str| Error::Shape(format!("malformed VTK: {m}"));
    let mut lines = text.lines();
    if !lines.next().is_some_and(|l| l.starts_with("# vtk DataFile")) {
        return Err(bad("missing header"));
    }
    lines.next();
    if lines.next() != Some("ASCII") || lines.next() != Some("DATASET UNSTRUCTURED_GRID") {
        return Err(bad("expected ASCII unstructured grid"));
    }
    let count = |line: Option<&str>, key: &str| -> Result<usize> {
        let l = line.ok_or_else(|| bad("truncated"))?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(bad(&format!("expected {key}")));
        }
        it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(&format!("{key} count")))
    };
    let np = count(lines.next(), "POINTS")?;
    for _ in 0..np {
        let l = lines.next().ok_or_else(|| bad("points"))?;
        let v: Vec<f64> = l.split_whitespace().map(|x| x.parse().map_err(|_| bad("point coordinate"))).collect::<Result<_>>()?;
        if v.len() != 3 {
            return Err(bad("point arity"));
        }
    }
    let nc = count(lines.next(), "CELLS")?;
    for _ in 0..nc {
        let l = lines.next().ok_or_else(|| bad("cells"))?;
        let v: Vec<usize> = l.split_whitespace().map(|x| x.parse().map_err(|_| bad("cell index"))).collect::<Result<_>>()?;
        if v.first() != Some(&6) || v.len() != 7 || v[1..].iter().any(|&i| i >= np) {
            return Err(bad("cell connectivity"));
        }
    }
    if count(lines.next(), "CELL_TYPES")? != nc {
        return Err(bad("cell type count"));
    }
    for _ in 0..nc {
        lines.next().ok_or_else(|| bad("cell types"))?;
    }
    let mut arrays = Vec::new();
    let mut expected = 0usize;
    while let Some(l) = lines.next() {
        let mut it = l.split_whitespace();
        match it.next() {
            Some("CELL_DATA") => expected = nc,
            Some("POINT_DATA") => expected = np,
            Some("SCALARS") => {
                arrays.push(it.next().ok_or_else(|| bad("array name"))?.to_string());
                lines.next();
                for _ in 0..expected {
                    lines.next().and_then(|x| x.trim().parse::<f64>().ok()).ok_or_else(|| bad("scalar value"))?;
                }
            }
            Some("VECTORS") => {
                arrays.push(it.next().ok_or_else(|| bad("array name"))?.to_string());
                for _ in 0..expected {
                    let l = lines.next().ok_or_else(|| bad("vector value"))?;
                    if l.split_whitespace().filter(|x| x.parse::<f64>().is_ok()).count() != 3 {
                        return Err(bad("vector arity"));
                    }
                }
            }
            Some(other) => return Err(bad(&format!("unexpected section {other}"))),
            None => {}
        }
    }
    Ok(VtkSummary { points: np, cells: nc, arrays })
}

/// `tensor,route,row,col,value` in Voigt form for both computation routes.
pub fn tensors_csv(t: &HomogenizedTensors) -> String {
    let mut s = String::from("tensor,route,row,col,value\n");
    let mut emit = |name: &str, route: &str, rows: &[&[f64]]| {
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                let _ = writeln!(s, "{name},{route},{},{},{v}", i + 1, j + 1);
            }
        }
    };
    let c = t.cbar.to_voigt();
    let ce = t.cbar_energy.to_voigt();
    let e = t.ebar.to_voigt();
    let f = t.fbar.to_voigt();
    let b = t.bending.to_voigt();
    let be = t.bending_energy.to_voigt();
    emit("cbar", "direct", &[&c[0], &c[1], &c[2]]);
    emit("cbar", "energy", &[&ce[0], &ce[1], &ce[2]]);
    emit("ebar", "direct", &[&e[0], &e[1]]);
    emit("fbar", "direct", &[&f[0], &f[1]]);
    emit("dbar", "direct", &[&t.dbar[0], &t.dbar[1]]);
    emit("dbar", "energy", &[&t.dbar_energy[0], &t.dbar_energy[1]]);
    emit("bending", "direct", &[&b[0], &b[1], &b[2]]);
    emit("bending", "energy", &[&be[0], &be[1], &be[2]]);
    s
}

/// Output directory with serialized writes; records every artifact path in order.
pub struct ArtifactDir {
    pub root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(ArtifactDir { root: root.to_path_buf(), written: vec![] })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let p = self.root.join(name);
        fs::write(&p, contents)?;
        self.written.push(p.clone());
        Ok(p)
    }
}
