//! Certified singular quadrature weights for corner-panel self-interaction.
//!
//! For a corner of interior angle `pi alpha`, the table row of target node
//! `s_i` holds weights `W~_ij` over the 2K corner nodes such that
//! `sum_j W~_ij phi~_m(t_j)` reproduces `int_{-d}^{d} k(t, s_i) phi~_m(t) dt`
//! for every two-sided basis member to the build tolerance. The integrals
//! are computed by dyadic adaptive quadrature (the kernel vanishes on the
//! target's own leg, so only the opposite leg contributes) and the weights
//! solve the square interpolation system exactly. With the L2-normalized
//! basis the tables are independent of the corner-panel half width, so one
//! table per angle serves every re-solve level.

use crate::corner_basis::CornerBasis;
use crate::geometry::Point;
use crate::kernels::bie_kernel_raw;
use crate::quadrature::adaptive_integrate_vec;
use crate::{Error, Result};
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Wedge geometry for a corner of interior angle `pi alpha`: the outgoing
/// leg lies on the positive x axis and the incoming leg at angle `pi alpha`.
#[derive(Debug, Clone, Copy)]
pub struct Wedge {
    pub alpha: f64,
    u_prev: Point,
    nu_prev: Point,
}

impl Wedge {
    pub fn new(alpha: f64) -> Self {
        let (s, c) = (std::f64::consts::PI * alpha).sin_cos();
        Self {
            alpha,
            u_prev: Point::new(c, s),
            nu_prev: Point::new(s, -c),
        }
    }

    /// Position at signed arclength `t` from the vertex.
    pub fn position(&self, t: f64) -> Point {
        if t >= 0.0 {
            Point::new(t, 0.0)
        } else {
            self.u_prev.scale(-t)
        }
    }

    /// Inward normal on the leg containing `t`.
    pub fn inward_normal(&self, t: f64) -> Point {
        if t >= 0.0 {
            Point::new(0.0, 1.0)
        } else {
            self.nu_prev
        }
    }

    /// Assembly kernel (outward-normal convention) between wedge parameters:
    /// source `t`, target `s`; exactly zero on a shared leg.
    pub fn bie_kernel(&self, t: f64, s: f64) -> f64 {
        if t.signum() == s.signum() {
            return 0.0;
        }
        let diff = self.position(t) - self.position(s);
        bie_kernel_raw(self.inward_normal(t), diff)
    }
}

/// Singular quadrature tables for one corner angle.
#[derive(Debug)]
pub struct CornerTables {
    pub alpha: f64,
    pub k: usize,
    /// `W~` (2K x 2K): row = target corner node, column = corner node.
    pub w_tilde: Mat<f64>,
    /// `sqrt(w_i / w_j) W~_ij`, the corner self-block of the sqrt-w-scaled
    /// Dirichlet system (before the identity term).
    pub block: Mat<f64>,
    /// Max interpolation-system residual observed at build time.
    pub resid_bound: f64,
}

/// Build the singular weight tables for interior angle `pi alpha` on a
/// corner panel of half width `delta`. The returned `w_tilde`/`block` are
/// independent of `delta` (scale invariance of the Laplace kernel); `delta`
/// only selects the wedge on which the oracle integrals are evaluated.
pub fn build_singular_weights(
    alpha: f64,
    basis: &CornerBasis,
    delta: f64,
) -> Result<CornerTables> {
    if !(alpha > 0.0 && alpha < 2.0) || (alpha - 1.0).abs() < 1e-14 {
        return Err(Error::DegenerateAngle {
            vertex: 0,
            alpha,
        });
    }
    let k = basis.k();
    let k2 = 2 * k;
    let wedge = Wedge::new(alpha);
    let nodes = basis.two_sided_nodes(delta);
    let weights = basis.two_sided_weights(delta);
    let tol = basis.eps * 0.05;

    // One-leg integrals J_m(s) = int_0^delta k(t, s) phi~_m(t) dt for the K
    // negative-side targets; the kernel vanishes on the target's own leg.
    // Positive-side targets follow from the wedge's leg-swap symmetry.
    let neg_rows: Vec<Result<Vec<f64>>> = (0..k)
        .into_par_iter()
        .map(|row| {
            let s = nodes[row]; // negative side, |s| descending
            let mut integrand = |t: f64, out: &mut [f64]| {
                let kv = wedge.bie_kernel(t, s);
                for (m, o) in out.iter_mut().enumerate() {
                    *o = kv * basis.eval_two_sided(m, t, delta);
                }
            };
            adaptive_integrate_vec(&mut integrand, k, 0.0, delta, tol, Some(0.0))
        })
        .collect();

    let mut rhs = Mat::zeros(k2, k2); // column i = I~(s_i)
    for (row, res) in neg_rows.into_iter().enumerate() {
        let j = res?;
        for m in 0..k {
            // Even and odd members agree on the positive leg.
            rhs[(m, row)] = j[m];
            rhs[(m + k, row)] = j[m];
        }
    }
    // Mirror to positive-side targets: even integrals are symmetric, odd
    // ones flip sign together with the leg swap.
    for row in 0..k {
        let src = k - 1 - row; // mirrored negative-side target
        for m in 0..k {
            rhs[(m, k + row)] = rhs[(m, src)];
            rhs[(m + k, k + row)] = -rhs[(m + k, src)];
        }
    }

    // Solve Phi W~_i = I~(s_i) with Phi = U D^{-1}, D = diag(sqrt(w_j)):
    // W~_i = D U^{-1} I~(s_i), via the refined LU solve.
    let mut w_tilde = Mat::zeros(k2, k2);
    for i in 0..k2 {
        let col: Vec<f64> = (0..k2).map(|m| rhs[(m, i)]).collect();
        let y = basis.solve_u(&col);
        for j in 0..k2 {
            w_tilde[(i, j)] = weights[j].sqrt() * y[j];
        }
    }

    // Residual of the interpolation system (certification at build time).
    let u = basis.u_two();
    let mut resid: f64 = 0.0;
    for i in 0..k2 {
        for m in 0..k2 {
            let mut acc = 0.0;
            for j in 0..k2 {
                // phi~_m(t_j) = U_mj / sqrt(w_j)
                acc += u[(m, j)] / weights[j].sqrt() * w_tilde[(i, j)];
            }
            resid = resid.max((acc - rhs[(m, i)]).abs());
        }
    }
    if resid > basis.eps {
        return Err(Error::ResidualTooLarge {
            resid,
            tol: basis.eps,
        });
    }

    let block = Mat::from_fn(k2, k2, |i, j| {
        (weights[i] / weights[j]).sqrt() * w_tilde[(i, j)]
    });

    Ok(CornerTables {
        alpha,
        k,
        w_tilde,
        block,
        resid_bound: resid + tol,
    })
}

#[derive(Serialize, Deserialize)]
struct TablesDto {
    alpha: f64,
    k: usize,
    eps: f64,
    delta: f64,
    w_tilde: Vec<f64>,
    weights: Vec<f64>,
    resid_bound: f64,
}

fn quantize_alpha(alpha: f64) -> i64 {
    (alpha / 1e-12).round() as i64
}

/// Cached singular tables for a corner angle (in-process memo plus the
/// optional `CORNERBIE_CACHE` directory, keyed by quantized angle,
/// tolerance, basis size, and build half-width).
pub fn corner_tables(alpha: f64, basis: &Arc<CornerBasis>) -> Result<Arc<CornerTables>> {
    type Key = (i64, u64, usize);
    static MEMO: OnceLock<Mutex<HashMap<Key, Arc<CornerTables>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (quantize_alpha(alpha), basis.eps.to_bits(), basis.k());
    if let Some(t) = memo.lock().unwrap().get(&key) {
        return Ok(t.clone());
    }
    let path = crate::corner_basis::cache_dir().map(|d| {
        d.join(format!(
            "singular_a{}_eps{:.6e}_k{}_d1.json",
            quantize_alpha(alpha),
            basis.eps,
            basis.k()
        ))
    });
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            if let Ok(dto) = serde_json::from_str::<TablesDto>(&text) {
                if dto.k == basis.k() && dto.w_tilde.len() == 4 * dto.k * dto.k {
                    let k2 = 2 * dto.k;
                    let w_tilde = crate::linalg::mat_from_row_major(k2, k2, &dto.w_tilde);
                    let block = Mat::from_fn(k2, k2, |i, j| {
                        (dto.weights[i] / dto.weights[j]).sqrt() * w_tilde[(i, j)]
                    });
                    let t = Arc::new(CornerTables {
                        alpha: dto.alpha,
                        k: dto.k,
                        w_tilde,
                        block,
                        resid_bound: dto.resid_bound,
                    });
                    memo.lock().unwrap().insert(key, t.clone());
                    return Ok(t);
                }
            }
        }
    }
    let tables = Arc::new(build_singular_weights(alpha, basis, 1.0)?);
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            let _ = std::fs::create_dir_all(dir);
        }
        let k2 = 2 * basis.k();
        let dto = TablesDto {
            alpha,
            k: basis.k(),
            eps: basis.eps,
            delta: 1.0,
            w_tilde: (0..k2)
                .flat_map(|i| (0..k2).map(move |j| (i, j)))
                .map(|(i, j)| tables.w_tilde[(i, j)])
                .collect(),
            weights: basis.two_sided_weights(1.0),
            resid_bound: tables.resid_bound,
        };
        if let Ok(text) = serde_json::to_string(&dto) {
            let _ = std::fs::write(p, text);
        }
    }
    memo.lock().unwrap().insert(key, tables.clone());
    Ok(tables)
}
