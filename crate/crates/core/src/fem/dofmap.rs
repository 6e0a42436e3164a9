//! Node-to-unknown maps: periodic identification and strong Dirichlet removal.

use crate::error::{Error, Result};
use std::collections::HashMap;

pub type Vec2 = [f64; 2];

/// Scalar-field degree-of-freedom map over the nodes of a P2 space.
///
/// `node_dof[i] = None` marks a node fixed to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub node_dof: Vec<Option<usize>>,
    pub n_dofs: usize,
}

impl DofMap {
    pub fn identity(n_nodes: usize) -> Self {
        DofMap { node_dof: (0..n_nodes).map(Some).collect(), n_dofs: n_nodes }
    }

    /// Every node shares the unknown of its master; masters are numbered in node order.
    pub fn from_masters(masters: &[usize]) -> Self {
        let mut node_dof = vec![None; masters.len()];
        let mut n = 0;
        for (i, &m) in masters.iter().enumerate() {
            if m == i {
                node_dof[i] = Some(n);
                n += 1;
            }
        }
        for (i, &m) in masters.iter().enumerate() {
            node_dof[i] = node_dof[m];
        }
        DofMap { node_dof, n_dofs: n }
    }

    pub fn dirichlet(n_nodes: usize, fixed: impl Fn(usize) -> bool) -> Self {
        let mut n = 0;
        let node_dof = (0..n_nodes)
            .map(|i| {
                if fixed(i) {
                    None
                } else {
                    n += 1;
                    Some(n - 1)
                }
            })
            .collect();
        DofMap { node_dof, n_dofs: n }
    }

    /// Expand reduced unknowns to nodal values (fixed nodes read zero).
    pub fn lift(&self, reduced: &[f64]) -> Vec<f64> {
        self.node_dof.iter().map(|d| d.map_or(0.0, |d| reduced[d])).collect()
    }

    /// Pick reduced unknowns from a nodal vector (first node wins for shared unknowns).
    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        let mut seen = vec![false; self.n_dofs];
        for (i, d) in self.node_dof.iter().enumerate() {
            if let Some(d) = d {
                if !seen[*d] {
                    out[*d] = nodal[i];
                    seen[*d] = true;
                }
            }
        }
        out
    }
}

fn quantize(v: f64) -> i64 {
    (v * 1e9).round() as i64
}

/// Master node of every node under periodic identification of the rectangle
/// `[x0, x0 + lx] × [y0, y0 + ly]`: points on the far sides map to their translate
/// on the near sides, and all four corners map to the lower-left corner.
pub fn periodic_masters(nodes: &[Vec2], origin: Vec2, size: Vec2) -> Result<Vec<usize>> {
    let tol = 1e-10 * size[0].max(size[1]);
    let mut index: HashMap<(i64, i64), usize> = HashMap::with_capacity(nodes.len());
    for (i, p) in nodes.iter().enumerate() {
        if index.insert((quantize(p[0]), quantize(p[1])), i).is_some() {
            return Err(Error::Internal(format!("duplicate node at ({}, {})", p[0], p[1])));
        }
    }
    let mut masters = Vec::with_capacity(nodes.len());
    for (i, p) in nodes.iter().enumerate() {
        let mut c = *p;
        if (p[0] - origin[0] - size[0]).abs() <= tol {
            c[0] = origin[0];
        }
        if (p[1] - origin[1] - size[1]).abs() <= tol {
            c[1] = origin[1];
        }
        if c == *p {
            masters.push(i);
            continue;
        }
        match index.get(&(quantize(c[0]), quantize(c[1]))) {
            Some(&m) => masters.push(m),
            None => return Err(Error::Internal(format!("periodic partner of node ({}, {}) missing", p[0], p[1]))),
        }
    }
    Ok(masters)
}
