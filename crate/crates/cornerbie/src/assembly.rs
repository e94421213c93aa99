//! Dense Nystrom system matrices for the four boundary integral equations.
//!
//! Entry `(i, j)` is `c * delta_ij + sqrt(w_i w_j) * [kernel quadrature]`
//! with `c = -1/2` for the interior Dirichlet and exterior Neumann forms and
//! `+1/2` for the exterior Dirichlet and interior Neumann forms; the latter
//! two also carry the rank-one `+sqrt(w_i w_j)` term. Dirichlet kinds use
//! the source-normal kernel, Neumann kinds the target-normal kernel, so the
//! Neumann matrices are the transposes of their Dirichlet duals
//! (interior Dirichlet <-> exterior Neumann, exterior Dirichlet <-> interior
//! Neumann) up to the accuracy of the near-panel upgrades.
//!
//! Smooth-source blocks use the discretization nodes and weights; the corner
//! self-block comes from the singular weight tables; panels closer to a
//! target than their own length are integrated adaptively against the
//! panel's interpolation basis.


use crate::geometry::{Discretization, PanelKind, Point};
use crate::kernels::bie_kernel_raw;
use crate::quadrature::{adaptive_integrate_vec, gauss_legendre};
use crate::solve::DensityVector;
use crate::{linalg, Error, Result};
use rayon::prelude::*;
use std::io::Write;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BieKind {
    InteriorDirichlet,
    ExteriorDirichlet,
    InteriorNeumann,
    ExteriorNeumann,
}

impl BieKind {
    pub fn is_dirichlet(self) -> bool {
        matches!(self, BieKind::InteriorDirichlet | BieKind::ExteriorDirichlet)
    }

    /// The Dirichlet form whose transpose is this Neumann form (and vice
    /// versa): interior Dirichlet <-> exterior Neumann, exterior Dirichlet
    /// <-> interior Neumann.
    pub fn dual(self) -> BieKind {
        match self {
            BieKind::InteriorDirichlet => BieKind::ExteriorNeumann,
            BieKind::ExteriorNeumann => BieKind::InteriorDirichlet,
            BieKind::ExteriorDirichlet => BieKind::InteriorNeumann,
            BieKind::InteriorNeumann => BieKind::ExteriorDirichlet,
        }
    }

    pub fn identity_coeff(self) -> f64 {
        match self {
            BieKind::InteriorDirichlet | BieKind::ExteriorNeumann => -0.5,
            BieKind::ExteriorDirichlet | BieKind::InteriorNeumann => 0.5,
        }
    }

    pub fn has_rank_one(self) -> bool {
        matches!(self, BieKind::ExteriorDirichlet | BieKind::InteriorNeumann)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BieKind::InteriorDirichlet => "interior-dirichlet",
            BieKind::ExteriorDirichlet => "exterior-dirichlet",
            BieKind::InteriorNeumann => "interior-neumann",
            BieKind::ExteriorNeumann => "exterior-neumann",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Direction {
    SourceNormal,
    TargetNormal,
}

/// Assembly options; `near_factor` scales the distance threshold below
/// which a panel is integrated adaptively (`0.0` disables upgrades,
/// `paranoid` doubles the zone for validation runs).
#[derive(Debug, Clone)]
pub struct AssembleOptions {
    pub near_factor: f64,
    pub paranoid: bool,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            near_factor: 1.0,
            paranoid: false,
        }
    }
}

/// A dense sqrt-weight-scaled system matrix.
pub struct SystemMatrix {
    pub kind: BieKind,
    n: usize,
    /// Row-major entries.
    data: Vec<f64>,
    pub disc: Arc<Discretization>,
}

impl SystemMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Dense matrix-vector product.
    pub fn apply(&self, density: &DensityVector) -> Result<Vec<f64>> {
        self.apply_slice(&density.values)
    }

    pub fn apply_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self
            .data
            .par_chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn apply_transpose_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        for (i, row) in self.data.chunks(self.n).enumerate() {
            let xi = x[i];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    /// The square submatrix on `idx x idx`.
    pub fn submatrix(&self, idx: &[usize]) -> faer::Mat<f64> {
        faer::Mat::from_fn(idx.len(), idx.len(), |i, j| self.entry(idx[i], idx[j]))
    }

    /// View as a column-major faer matrix of the transpose (zero-copy).
    pub fn transpose_view(&self) -> faer::MatRef<'_, f64> {
        faer::MatRef::from_column_major_slice(&self.data, self.n, self.n)
    }

    /// Binary dump: `u64` n, `u8` kind tag, then row-major `f64` entries
    /// (little endian).
    pub fn dump_binary<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(&(self.n as u64).to_le_bytes())?;
        let tag: u8 = match self.kind {
            BieKind::InteriorDirichlet => 0,
            BieKind::ExteriorDirichlet => 1,
            BieKind::InteriorNeumann => 2,
            BieKind::ExteriorNeumann => 3,
        };
        out.write_all(&[tag])?;
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

struct NodeCache {
    rel: Vec<Point>,
    corner: Vec<usize>,
    edge: Vec<usize>,
    normal: Vec<Point>,
    sqrt_w: Vec<f64>,
}

impl NodeCache {
    fn new(disc: &Discretization) -> Self {
        let n = disc.n();
        let mut c = NodeCache {
            rel: Vec::with_capacity(n),
            corner: Vec::with_capacity(n),
            edge: Vec::with_capacity(n),
            normal: Vec::with_capacity(n),
            sqrt_w: Vec::with_capacity(n),
        };
        for node in &disc.nodes {
            c.rel.push(node.rel);
            c.corner.push(node.corner);
            c.edge.push(node.edge);
            c.normal.push(disc.polygon.inward_normal(node.edge));
            c.sqrt_w.push(node.sqrt_w);
        }
        c
    }
}

/// Assemble the system matrix for `kind` with default options.
pub fn assemble(disc: &Arc<Discretization>, kind: BieKind) -> Result<SystemMatrix> {
    assemble_with(disc, kind, &AssembleOptions::default())
}

pub fn assemble_with(
    disc: &Arc<Discretization>,
    kind: BieKind,
    opts: &AssembleOptions,
) -> Result<SystemMatrix> {
    for c in 0..disc.polygon.num_vertices() {
        if disc.corner_panel(c).is_some() && disc.tables.get(c).is_none() {
            return Err(Error::MissingTable(disc.polygon.alpha(c)));
        }
    }
    let n = disc.n();
    let cache = NodeCache::new(disc);
    let direction = if kind.is_dirichlet() {
        Direction::SourceNormal
    } else {
        Direction::TargetNormal
    };
    let mut data = vec![0.0f64; n * n];
    let result: Result<Vec<()>> = data
        .par_chunks_mut(n)
        .enumerate()
        .map(|(i, row)| assemble_row(disc, &cache, direction, opts, i, row))
        .collect();
    result?;
    // Identity and rank-one terms.
    let c = kind.identity_coeff();
    for i in 0..n {
        data[i * n + i] += c;
    }
    if kind.has_rank_one() {
        for i in 0..n {
            let si = cache.sqrt_w[i];
            let row = &mut data[i * n..(i + 1) * n];
            for (v, sj) in row.iter_mut().zip(&cache.sqrt_w) {
                *v += si * *sj;
            }
        }
    }
    Ok(SystemMatrix {
        kind,
        n,
        data,
        disc: disc.clone(),
    })
}

fn assemble_row(
    disc: &Discretization,
    cache: &NodeCache,
    direction: Direction,
    opts: &AssembleOptions,
    i: usize,
    row: &mut [f64],
) -> Result<()> {
    let poly = &disc.polygon;
    let near = if opts.paranoid {
        2.0 * opts.near_factor.max(1.0)
    } else {
        opts.near_factor
    };
    for (pi, panel) in disc.panels.iter().enumerate() {
        let tgt = poly.change_frame(cache.rel[i], cache.corner[i], panel.corner);
        match panel.kind {
            PanelKind::Corner => {
                if panel.node_range().contains(&i) {
                    corner_self_block(disc, panel, i, direction, row);
                    continue;
                }
                let d = disc.delta[panel.corner];
                let leg_prev = poly.prev_edge(panel.corner);
                let leg_next = panel.corner;
                let origin = Point::new(0.0, 0.0);
                let a = poly.rel_position(panel.corner, panel.a);
                let b = poly.rel_position(panel.corner, panel.b);
                let near_neg = cache.edge[i] != leg_prev
                    && crate::geometry::point_segment_distance(tgt, a, origin) < near * d;
                let near_pos = cache.edge[i] != leg_next
                    && crate::geometry::point_segment_distance(tgt, origin, b) < near * d;
                if near_neg || near_pos {
                    corner_near_block(disc, panel, i, tgt, direction, cache, row)?;
                } else {
                    plain_block(cache, panel.node_range(), i, tgt, panel.corner, poly, direction, row);
                }
            }
            PanelKind::Smooth => {
                let edge = panel.edge.expect("smooth panel edge");
                if cache.edge[i] == edge {
                    continue; // straight-edge kernel vanishes identically
                }
                let a = poly.rel_position(panel.corner, panel.a);
                let b = poly.rel_position(panel.corner, panel.b);
                let dist = crate::geometry::point_segment_distance(tgt, a, b);
                if dist < near * panel.len() {
                    smooth_near_block(disc, pi, i, tgt, direction, cache, row)?;
                } else {
                    plain_block(cache, panel.node_range(), i, tgt, panel.corner, poly, direction, row);
                }
            }
        }
    }
    Ok(())
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn plain_block(
    cache: &NodeCache,
    range: std::ops::Range<usize>,
    i: usize,
    tgt: Point,
    _frame: usize,
    _poly: &crate::geometry::Polygon,
    direction: Direction,
    row: &mut [f64],
) {
    let swi = cache.sqrt_w[i];
    let nu_t = cache.normal[i];
    for j in range {
        if j == i {
            continue;
        }
        let diff = cache.rel[j] - tgt;
        let k = match direction {
            Direction::SourceNormal => bie_kernel_raw(cache.normal[j], diff),
            Direction::TargetNormal => bie_kernel_raw(nu_t, Point::new(-diff.x, -diff.y)),
        };
        row[j] += swi * cache.sqrt_w[j] * k;
    }
}

/// Corner-panel self-interaction from the singular weight tables (exact
/// transposition for the Neumann direction).
fn corner_self_block(
    disc: &Discretization,
    panel: &crate::geometry::Panel,
    i: usize,
    direction: Direction,
    row: &mut [f64],
) {
    let tables = &disc.tables[panel.corner];
    let il = i - panel.first_node;
    for (jl, j) in panel.node_range().enumerate() {
        row[j] += match direction {
            Direction::SourceNormal => tables.block[(il, jl)],
            Direction::TargetNormal => tables.block[(jl, il)],
        };
    }
}

/// Near target off the corner panel: integrate the kernel against the
/// two-sided basis adaptively and convert through `U^{-1}`.
fn corner_near_block(
    disc: &Discretization,
    panel: &crate::geometry::Panel,
    i: usize,
    tgt: Point,
    direction: Direction,
    cache: &NodeCache,
    row: &mut [f64],
) -> Result<()> {
    let basis = disc.basis.as_ref().expect("corner panels require a basis");
    let poly = &disc.polygon;
    let c = panel.corner;
    let d = disc.delta[c];
    let k2 = 2 * basis.k();
    let nu_t = cache.normal[i];
    let tol = basis.eps * 0.1;
    let mut integrals = vec![0.0; k2];
    for (leg_sign, leg_edge) in [(-1.0, poly.prev_edge(c)), (1.0, c)] {
        if cache.edge[i] == leg_edge {
            continue; // same straight edge: kernel is identically zero
        }
        let nu_s = poly.inward_normal(leg_edge);
        let mut integrand = |t: f64, out: &mut [f64]| {
            let ts = leg_sign * t;
            let pos = poly.rel_position(c, ts);
            let kv = match direction {
                Direction::SourceNormal => bie_kernel_raw(nu_s, pos - tgt),
                Direction::TargetNormal => bie_kernel_raw(nu_t, tgt - pos),
            };
            for (m, o) in out.iter_mut().enumerate() {
                *o = kv * basis.eval_two_sided(m, ts, d);
            }
        };
        let part = adaptive_integrate_vec(&mut integrand, k2, 0.0, d, tol, Some(0.0))?;
        for (acc, v) in integrals.iter_mut().zip(&part) {
            *acc += v;
        }
    }
    // Row over corner nodes: sqrt(w_i) * (U^{-1} I)_j.
    let y = basis.solve_u(&integrals);
    let swi = cache.sqrt_w[i];
    for (jl, j) in panel.node_range().enumerate() {
        row[j] += swi * y[jl];
    }
    Ok(())
}

/// Near target off a smooth panel: adaptive integration against the panel's
/// Legendre interpolation basis.
fn smooth_near_block(
    disc: &Discretization,
    pi: usize,
    i: usize,
    tgt: Point,
    direction: Direction,
    cache: &NodeCache,
    row: &mut [f64],
) -> Result<()> {
    let panel = &disc.panels[pi];
    let poly = &disc.polygon;
    let m = panel.n_nodes;
    let rule = gauss_legendre(m)?;
    let bary = crate::corner_basis::bary_weights_for(m);
    let nu_s = poly.inward_normal(panel.edge.expect("smooth"));
    let nu_t = cache.normal[i];
    let (a, b) = (panel.a, panel.b);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let tol = 1e-14;
    let mut integrand = |t: f64, out: &mut [f64]| {
        let pos = poly.rel_position(panel.corner, t);
        let kv = match direction {
            Direction::SourceNormal => bie_kernel_raw(nu_s, pos - tgt),
            Direction::TargetNormal => bie_kernel_raw(nu_t, tgt - pos),
        };
        // Lagrange basis values at t via barycentric weights.
        let xi = (t - mid) / half;
        let mut hit = None;
        let mut den = 0.0;
        for q in 0..m {
            let dq = xi - rule.nodes[q];
            if dq == 0.0 {
                hit = Some(q);
                break;
            }
            den += bary[q] / dq;
        }
        match hit {
            Some(qh) => {
                for (q, o) in out.iter_mut().enumerate() {
                    *o = if q == qh { kv } else { 0.0 };
                }
            }
            None => {
                for (q, o) in out.iter_mut().enumerate() {
                    *o = kv * (bary[q] / (xi - rule.nodes[q])) / den;
                }
            }
        }
    };
    let vals = adaptive_integrate_vec(&mut integrand, m, a, b, tol, None)?;
    let swi = cache.sqrt_w[i];
    for (q, j) in panel.node_range().enumerate() {
        row[j] += swi * vals[q] / cache.sqrt_w[j];
    }
    Ok(())
}

/// Spot-check of conditioning: 2-norm condition number via SVD (dense;
/// intended for moderate sizes in tests).
pub fn condition_number(m: &SystemMatrix) -> Result<f64> {
    let a = linalg::mat_from_row_major(m.n, m.n, &m.data);
    linalg::cond_2(&a)
}
