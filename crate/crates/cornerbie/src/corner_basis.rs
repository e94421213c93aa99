//! The universal singular corner basis.
//!
//! Functions `x^mu` for `mu` in `{0} ∪ [mu_lo, mu_hi]` are sampled on a
//! nested dyadic Gauss-Legendre grid on `[0, 1]` and compressed with an SVD.
//! The left singular vectors above the tolerance give orthonormal functions
//! `phi_1..phi_K` whose span contains every `x^mu` of the family to relative
//! accuracy `eps`. Interpolation nodes are the roots of `phi_{K+1}`;
//! quadrature weights make the rule exact on the basis. The two-sided
//! extension `{phi_i(|t|/d), sgn(t) phi_i(|t|/d)}` discretizes a corner
//! panel `(-d, d)` with `2K` nodes and the interpolation matrix
//! `U_ij = phi_i(t_j) sqrt(w_j)`.

use crate::linalg;
use crate::quadrature::gauss_legendre;
use crate::{Error, Result};
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

pub const DEFAULT_EPS: f64 = 1e-13;
pub const DEFAULT_MU_LO: f64 = 0.5;
pub const DEFAULT_MU_HI: f64 = 50.0;
pub const DEFAULT_COND_BOUND: f64 = 1e4;
const MU_SAMPLES: usize = 256;
const GRID_ORDER: usize = 16;
const GRID_LEVELS: usize = 60;
// The top end needs refinement too: x^50 has a boundary layer of width
// ~1/50 at 1 that a single 16-point panel cannot interpolate to 1e-13.
const GRID_LEVELS_TOP: usize = 10;

/// Nested dyadic Gauss-Legendre grid on `[0, 1]`, refined toward 0 (and
/// mildly toward 1 so steep members like `x^50` stay interpolable).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NestedGrid {
    /// Panel intervals, ascending; the first touches 0.
    pub panels: Vec<(f64, f64)>,
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NestedGrid {
    pub fn build(order: usize, levels_lo: usize, levels_hi: usize) -> Result<Self> {
        let rule = gauss_legendre(order)?;
        let mut panels = Vec::with_capacity(levels_lo + levels_hi + 1);
        panels.push((0.0, 2f64.powi(-(levels_lo as i32))));
        for l in (2..=levels_lo).rev() {
            panels.push((2f64.powi(-(l as i32)), 2f64.powi(-(l as i32 - 1))));
        }
        for l in 1..levels_hi {
            panels.push((1.0 - 2f64.powi(-(l as i32)), 1.0 - 2f64.powi(-(l as i32 + 1))));
        }
        panels.push((1.0 - 2f64.powi(-(levels_hi as i32)), 1.0));
        let mut nodes = Vec::with_capacity(panels.len() * order);
        let mut weights = Vec::with_capacity(panels.len() * order);
        for &(a, b) in &panels {
            let (xs, ws) = rule.scaled(a, b);
            nodes.extend(xs);
            weights.extend(ws);
        }
        Ok(Self {
            panels,
            order,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn panel_of(&self, x: f64) -> usize {
        match self
            .panels
            .binary_search_by(|&(a, b)| {
                if x < a {
                    std::cmp::Ordering::Greater
                } else if x > b {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Equal
                }
            }) {
            Ok(i) => i,
            Err(i) => i.min(self.panels.len() - 1),
        }
    }

    /// Evaluate a function tabulated on the grid at `x` in `[0, 1]` by
    /// barycentric interpolation within the containing panel.
    pub fn eval(&self, values: &[f64], x: f64) -> f64 {
        let p = self.panel_of(x);
        let (a, b) = self.panels[p];
        let xi = 2.0 * (x - a) / (b - a) - 1.0;
        let base = p * self.order;
        let rule = gauss_legendre(self.order).expect("grid order");
        let bary = bary_weights_for(self.order);
        let mut num = 0.0;
        let mut den = 0.0;
        for q in 0..self.order {
            let d = xi - rule.nodes[q];
            if d == 0.0 {
                return values[base + q];
            }
            let c = bary[q] / d;
            num += c * values[base + q];
            den += c;
        }
        num / den
    }

    /// Discrete inner product approximating `L^2(0, 1)`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }
}

/// Barycentric weights of the `order`-point Gauss-Legendre nodes.
pub(crate) fn bary_weights_for(order: usize) -> &'static [f64] {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static [f64]>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard.entry(order).or_insert_with(|| {
        let rule = gauss_legendre(order).expect("order");
        let mut w = vec![0.0; order];
        for q in 0..order {
            let mut prod = 1.0;
            for r in 0..order {
                if r != q {
                    prod *= rule.nodes[q] - rule.nodes[r];
                }
            }
            w[q] = 1.0 / prod;
        }
        Box::leak(w.into_boxed_slice())
    })
}

/// The sampled power family `x^mu`, `mu` in `{0} ∪ [mu_lo, mu_hi]`.
#[derive(Debug, Clone)]
pub struct PowerFamily {
    pub mu: Vec<f64>,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub grid: NestedGrid,
}

impl PowerFamily {
    /// The spec family: `{0} ∪ [1/2, 50]` with 200 Gauss-Legendre samples.
    pub fn default_family() -> Result<Self> {
        Self::with_range(DEFAULT_MU_LO, DEFAULT_MU_HI)
    }

    pub fn with_range(mu_lo: f64, mu_hi: f64) -> Result<Self> {
        // Gauss-Legendre samples in mu, plus the two interval endpoints as
        // explicit columns: without them the endpoint members x^{mu_lo} and
        // x^{mu_hi} project ~1e-12 short of the sampled manifold.
        let pieces = 4;
        let per = MU_SAMPLES / pieces;
        let sub = gauss_legendre(per)?;
        let mut mu = vec![0.0, mu_lo, mu_hi];
        for p in 0..pieces {
            let a = mu_lo + (mu_hi - mu_lo) * p as f64 / pieces as f64;
            let b = mu_lo + (mu_hi - mu_lo) * (p + 1) as f64 / pieces as f64;
            let (xs, _) = sub.scaled(a, b);
            mu.extend(xs);
        }
        Ok(Self {
            mu,
            mu_lo,
            mu_hi,
            grid: NestedGrid::build(GRID_ORDER, GRID_LEVELS, GRID_LEVELS_TOP)?,
        })
    }

    /// A family with explicitly listed exponents (used by tests).
    pub fn with_exponents(mu: &[f64]) -> Result<Self> {
        let mut mu = mu.to_vec();
        mu.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = mu.iter().copied().find(|&m| m > 0.0).unwrap_or(0.0);
        let hi = mu.last().copied().unwrap_or(0.0);
        Ok(Self {
            mu,
            mu_lo: lo,
            mu_hi: hi,
            grid: NestedGrid::build(GRID_ORDER, GRID_LEVELS, GRID_LEVELS_TOP)?,
        })
    }
}

/// The sampled family as a matrix: entry `(i, j) = x_i^{mu_j} sqrt(w_i)`.
pub fn build_power_matrix(family: &PowerFamily) -> Mat<f64> {
    let n = family.grid.len();
    let m = family.mu.len();
    Mat::from_fn(n, m, |i, j| {
        let x = family.grid.nodes[i];
        let w = family.grid.weights[i];
        x.powf(family.mu[j]) * w.sqrt()
    })
}

/// The orthonormal basis part: `phi_1..phi_K` plus `phi_{K+1}` tabulated on
/// the nested grid.
#[derive(Debug, Clone)]
pub struct PhiBasis {
    pub grid: NestedGrid,
    pub k: usize,
    /// `k + 1` tabulated functions (de-scaled by `sqrt(w)`).
    pub phi: Vec<Vec<f64>>,
    /// Singular values of the power matrix.
    pub sing_vals: Vec<f64>,
    /// Smallest positive exponent of the generating family.
    pub mu_lo: f64,
}

impl PhiBasis {
    pub fn eval(&self, m: usize, x: f64) -> f64 {
        self.grid.eval(&self.phi[m], x)
    }
}

/// Relative projection residual of the tabulated function `v` against the
/// first `k` rows of `phi`.
fn residual_against(grid: &NestedGrid, phi: &[Vec<f64>], k: usize, v: &[f64]) -> f64 {
    let norm = grid.inner(v, v).sqrt();
    let mut r = v.to_vec();
    for p in phi.iter().take(k) {
        let c = grid.inner(&r, p);
        for (ri, pi) in r.iter_mut().zip(p) {
            *ri -= c * pi;
        }
    }
    grid.inner(&r, &r).sqrt() / norm
}

/// Deterministic exponent sweep used to verify the span invariant.
fn sweep_exponents(family: &PowerFamily) -> Vec<f64> {
    let mut mus = vec![0.0, family.mu_lo, family.mu_hi];
    if family.mu_hi > family.mu_lo {
        // Geometric and linear fill of the range, off the sampled nodes.
        for i in 0..48 {
            let t = (i as f64 + 0.37) / 48.0;
            mus.push(family.mu_lo * (family.mu_hi / family.mu_lo).powf(t));
            mus.push(family.mu_lo + (family.mu_hi - family.mu_lo) * t);
        }
    } else {
        mus.extend(family.mu.iter().copied());
    }
    mus
}

/// Compress the power family: keep singular directions above
/// `eps * sigma_max` (columns equilibrated to unit norm first), then grow
/// `K` minimally until every family member projects onto the span with
/// relative residual below `eps` -- the double-precision tail of the
/// spectrum sits slightly above the bare threshold count.
pub fn svd_basis(family: &PowerFamily, eps: f64) -> Result<PhiBasis> {
    if !(eps > 1e-16 && eps < 1e-6) {
        return Err(Error::RankDeficient);
    }
    let mut b = build_power_matrix(family);
    let n = b.nrows();
    for j in 0..b.ncols() {
        let norm = (0..n).map(|i| b[(i, j)] * b[(i, j)]).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..n {
                b[(i, j)] /= norm;
            }
        }
    }
    let (u, s, _v) = linalg::svd(&b)?;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Err(Error::RankDeficient);
    }
    let k_base = s.iter().take_while(|&&sv| sv > eps * smax).count();
    if k_base == 0 {
        return Err(Error::RankDeficient);
    }
    let k_cap = b.ncols().min(n - 1);
    let phi_all: Vec<Vec<f64>> = (0..(k_base + 6).min(k_cap + 1))
        .map(|m| {
            (0..n)
                .map(|i| u[(i, m)] / family.grid.weights[i].sqrt())
                .collect()
        })
        .collect();
    let grid = &family.grid;
    let sweep = sweep_exponents(family);
    let mut k = k_base.min(k_cap);
    loop {
        let worst = sweep
            .iter()
            .map(|&mu| {
                let v: Vec<f64> = grid.nodes.iter().map(|&x| x.powf(mu)).collect();
                residual_against(grid, &phi_all, k, &v)
            })
            .fold(0.0f64, f64::max);
        if worst < eps || k + 1 > k_cap.min(phi_all.len() - 1) {
            break;
        }
        k += 1;
    }
    let mut phi: Vec<Vec<f64>> = phi_all.into_iter().take(k + 1).collect();
    // Degenerate tail (exactly polynomial families): replace phi_{K+1} by
    // Gram-Schmidt of the next power so its roots are meaningful.
    if s.get(k).copied().unwrap_or(0.0) <= 1e-14 * smax {
        let mu_next = family.mu.last().copied().unwrap_or(0.0) + 1.0;
        let mut v: Vec<f64> = grid.nodes.iter().map(|&x| x.powf(mu_next)).collect();
        for p in phi.iter().take(k) {
            let c = grid.inner(&v, p);
            for (vi, pi) in v.iter_mut().zip(p) {
                *vi -= c * pi;
            }
        }
        let norm = grid.inner(&v, &v).sqrt();
        if norm == 0.0 {
            return Err(Error::RankDeficient);
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        phi[k] = v;
    }
    Ok(PhiBasis {
        grid: family.grid.clone(),
        k,
        phi,
        sing_vals: s.clone(),
        mu_lo: family.mu_lo,
    })
}

/// Sign-change roots of the tabulated function `phi[idx]`, filtered against
/// the double-precision noise floor: below `x_noise` no family member has
/// representable mass (sign changes there are SVD null-space noise), and a
/// genuine oscillation swings the sqrt(w)-scaled values to an O(1) fraction
/// of the global peak while noise wiggles near a tangency stay orders of
/// magnitude lower.
fn filtered_roots(basis: &PhiBasis, idx: usize) -> Vec<f64> {
    let grid = &basis.grid;
    let f = &basis.phi[idx];
    let x_noise = 1e-14f64.powf(1.0 / (basis.mu_lo + 0.5));
    let scaled: Vec<f64> = f
        .iter()
        .zip(&grid.weights)
        .map(|(v, w)| v * w.sqrt())
        .collect();
    let gmax = scaled.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let peak_floor = 0.05 * gmax;
    let mut roots = Vec::new();
    let n = grid.len();
    let mut peak = 0.0f64;
    for i in 0..n - 1 {
        peak = peak.max(scaled[i].abs());
        if grid.nodes[i] < x_noise {
            continue;
        }
        let (va, vb) = (f[i], f[i + 1]);
        if va == 0.0 || va.signum() == vb.signum() || peak < peak_floor {
            continue;
        }
        peak = 0.0;
        let mut lo = grid.nodes[i];
        let mut hi = grid.nodes[i + 1];
        let flo = va;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let fm = grid.eval(f, mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}

/// Weights making the rule exact on `phi_1..phi_K` at the given nodes.
fn moment_weights(basis: &PhiBasis, nodes: &[f64]) -> Result<Vec<f64>> {
    let k = basis.k;
    let mut v = Mat::zeros(k, k);
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for (j, &x) in nodes.iter().enumerate() {
            v[(i, j)] = basis.eval(i, x);
        }
        rhs[i] = basis
            .grid
            .weights
            .iter()
            .zip(&basis.phi[i])
            .map(|(w, p)| w * p)
            .sum();
    }
    linalg::solve_dense(&v, &rhs)
}

/// Interpolation nodes and weights for the basis.
///
/// Primary construction: the `K` roots of `phi_{K+1}`. When `phi_{K+1}` is
/// too close to the noise plateau to carry exactly `K` clean roots (or the
/// induced weights lose positivity), a Radau-flavored rule is used instead:
/// the `K - 1` roots of `phi_K` plus a fixed node at `x = 1`.
pub fn interpolation_nodes(basis: &PhiBasis) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = basis.k;
    let primary = filtered_roots(basis, k);
    if primary.len() == k {
        if let Ok(w) = moment_weights(basis, &primary) {
            if w.iter().all(|&wi| wi > 0.0) {
                return Ok((primary, w));
            }
        }
    }
    let mut radau = filtered_roots(basis, k - 1);
    radau.push(1.0);
    radau.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radau.dedup();
    if radau.len() != k {
        return Err(Error::IllConditioned(primary.len() as f64));
    }
    let w = moment_weights(basis, &radau)?;
    if w.iter().any(|&wi| !(wi > 0.0)) {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    Ok((radau, w))
}

/// Two-sided corner-panel tables on `(-delta, delta)`: mirrored nodes and
/// weights plus the interpolation matrix for the sign-split system
/// `{phi_i(|t|/delta), sgn(t) phi_i(|t|/delta)}` (L2-normalized on the
/// panel). `U` itself is independent of `delta`.
#[derive(Debug, Clone)]
pub struct TwoSidedTables {
    /// 2K nodes in panel coordinates, ascending.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub delta: f64,
    pub u: Mat<f64>,
    pub u_inv: Mat<f64>,
    pub cond_u: f64,
}

pub fn two_sided_extend(
    basis: &PhiBasis,
    nodes: &[f64],
    weights: &[f64],
    delta: f64,
) -> Result<TwoSidedTables> {
    let k = basis.k;
    let mut ts_nodes = Vec::with_capacity(2 * k);
    let mut ts_weights = Vec::with_capacity(2 * k);
    for j in (0..k).rev() {
        ts_nodes.push(-delta * nodes[j]);
        ts_weights.push(delta * weights[j]);
    }
    for j in 0..k {
        ts_nodes.push(delta * nodes[j]);
        ts_weights.push(delta * weights[j]);
    }
    // U_mj = phi~_m(t_j) sqrt(w_j) = (parity sign) phi_m(x_j) sqrt(w_j / 2).
    let u = Mat::from_fn(2 * k, 2 * k, |m, j| {
        let x = ts_nodes[j].abs() / delta;
        let w = weights[if j < k { k - 1 - j } else { j - k }];
        let val = if m < k {
            basis.eval(m, x)
        } else {
            ts_nodes[j].signum() * basis.eval(m - k, x)
        };
        val * (w / 2.0).sqrt()
    });
    let svals = linalg::singular_values(&u)?;
    let cond_u = svals[0] / svals[svals.len() - 1];
    let mut id = Mat::zeros(2 * k, 2 * k);
    for i in 0..2 * k {
        id[(i, i)] = 1.0;
    }
    let lu = linalg::LuFactor::new(&u)?;
    let mut u_inv = Mat::zeros(2 * k, 2 * k);
    for j in 0..2 * k {
        let e: Vec<f64> = (0..2 * k).map(|i| id[(i, j)]).collect();
        let col = lu.solve(&e)?;
        for i in 0..2 * k {
            u_inv[(i, j)] = col[i];
        }
    }
    Ok(TwoSidedTables {
        nodes: ts_nodes,
        weights: ts_weights,
        delta,
        u,
        u_inv,
        cond_u,
    })
}

/// The completed corner basis used by meshes and re-solves.
pub struct CornerBasis {
    pub eps: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    phi: PhiBasis,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// One-sided `U_ij = phi_i(x_j) sqrt(w_j)`.
    u_one: Mat<f64>,
    cond_u: f64,
    /// Two-sided tables normalized to `delta = 1`.
    two: TwoSidedTables,
    u_lu: linalg::LuFactor,
    /// `\int_0^1 phi_i`.
    integrals: Vec<f64>,
}

impl std::fmt::Debug for CornerBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CornerBasis")
            .field("eps", &self.eps)
            .field("k", &self.phi.k)
            .field("cond_u", &self.cond_u)
            .finish()
    }
}

impl CornerBasis {
    pub fn build_with(family: &PowerFamily, eps: f64, cond_bound: f64) -> Result<Self> {
        let phi = svd_basis(family, eps)?;
        let (nodes, weights) = interpolation_nodes(&phi)?;
        let k = phi.k;
        let u_one = Mat::from_fn(k, k, |i, j| phi.eval(i, nodes[j]) * weights[j].sqrt());
        let cond_one = {
            let s = linalg::singular_values(&u_one)?;
            s[0] / s[s.len() - 1]
        };
        let two = two_sided_extend(&phi, &nodes, &weights, 1.0)?;
        let cond_u = cond_one.max(two.cond_u);
        if cond_u > cond_bound {
            return Err(Error::IllConditioned(cond_u));
        }
        let u_lu = linalg::LuFactor::new(&two.u)?;
        let integrals = (0..k)
            .map(|i| {
                phi.grid
                    .weights
                    .iter()
                    .zip(&phi.phi[i])
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect();
        Ok(Self {
            eps,
            mu_lo: family.mu_lo,
            mu_hi: family.mu_hi,
            phi,
            nodes,
            weights,
            u_one,
            cond_u,
            two,
            u_lu,
            integrals,
        })
    }

    pub fn build(eps: f64) -> Result<Self> {
        let family = PowerFamily::default_family()?;
        Self::build_with(&family, eps, DEFAULT_COND_BOUND)
    }

    pub fn k(&self) -> usize {
        self.phi.k
    }
    /// One-sided interpolation nodes in `(0, 1]`, ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn cond_u(&self) -> f64 {
        self.cond_u
    }
    pub fn u_one(&self) -> &Mat<f64> {
        &self.u_one
    }
    /// Delta-independent two-sided interpolation matrix (2K x 2K).
    pub fn u_two(&self) -> &Mat<f64> {
        &self.two.u
    }
    pub fn u_two_inv(&self) -> &Mat<f64> {
        &self.two.u_inv
    }
    pub fn phi(&self) -> &PhiBasis {
        &self.phi
    }
    pub fn integrals(&self) -> &[f64] {
        &self.integrals
    }
    pub fn sing_vals(&self) -> &[f64] {
        &self.phi.sing_vals
    }

    /// Evaluate `phi_m` on `[0, 1]`.
    pub fn eval_phi(&self, m: usize, x: f64) -> f64 {
        self.phi.eval(m, x)
    }

    /// Evaluate the m-th two-sided basis function on a corner panel of half
    /// width `delta` (`m < K`: even part, `m >= K`: odd part), L2-normalized
    /// on `(-delta, delta)`.
    pub fn eval_two_sided(&self, m: usize, t: f64, delta: f64) -> f64 {
        let k = self.phi.k;
        let x = t.abs() / delta;
        let scale = 1.0 / (2.0 * delta).sqrt();
        if m < k {
            self.phi.eval(m, x) * scale
        } else {
            t.signum() * self.phi.eval(m - k, x) * scale
        }
    }

    /// Two-sided node offsets for a panel of half width `delta`, ascending.
    pub fn two_sided_nodes(&self, delta: f64) -> Vec<f64> {
        self.two.nodes.iter().map(|&t| t * delta).collect()
    }

    pub fn two_sided_weights(&self, delta: f64) -> Vec<f64> {
        self.two.weights.iter().map(|&w| w * delta).collect()
    }

    /// Solve `U y = b` with one step of iterative refinement (the plain
    /// solve leaves ~cond(U) * eps_machine residuals, which the singular
    /// quadrature certification cannot afford).
    pub fn solve_u(&self, b: &[f64]) -> Vec<f64> {
        let k2 = 2 * self.phi.k;
        assert_eq!(b.len(), k2);
        let mut x = self.u_lu.solve(b).expect("U solve");
        let mut r = vec![0.0; k2];
        for i in 0..k2 {
            let mut acc = 0.0;
            for j in 0..k2 {
                acc += self.two.u[(i, j)] * x[j];
            }
            r[i] = b[i] - acc;
        }
        let dx = self.u_lu.solve(&r).expect("U refine");
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        x
    }

    /// Solve `U^T c = y` with one refinement step.
    pub fn solve_u_transpose(&self, y: &[f64]) -> Vec<f64> {
        let k2 = 2 * self.phi.k;
        assert_eq!(y.len(), k2);
        let mut c = self.u_lu.solve_transpose(y).expect("U^T solve");
        let mut r = vec![0.0; k2];
        for j in 0..k2 {
            let mut acc = 0.0;
            for i in 0..k2 {
                acc += self.two.u[(i, j)] * c[i];
            }
            r[j] = y[j] - acc;
        }
        let dc = self.u_lu.solve_transpose(&r).expect("U^T refine");
        for (ci, di) in c.iter_mut().zip(&dc) {
            *ci += di;
        }
        c
    }

    /// Coefficients `c = U^{-T} y` of the two-sided interpolant through
    /// sqrt-weight-scaled nodal values `y`.
    pub fn coeffs_from_scaled_values(&self, y: &[f64]) -> Vec<f64> {
        self.solve_u_transpose(y)
    }

    /// Relative L2 projection residual of `x^mu` onto the span.
    pub fn projection_residual(&self, mu: f64) -> f64 {
        let grid = &self.phi.grid;
        let v: Vec<f64> = grid.nodes.iter().map(|&x| x.powf(mu)).collect();
        let norm = grid.inner(&v, &v).sqrt();
        let mut resid = v;
        for m in 0..self.phi.k {
            let c = grid.inner(&resid, &self.phi.phi[m]);
            for (r, p) in resid.iter_mut().zip(&self.phi.phi[m]) {
                *r -= c * p;
            }
        }
        grid.inner(&resid, &resid).sqrt() / norm
    }
}

#[derive(Serialize, Deserialize)]
struct BasisDto {
    eps: f64,
    mu_lo: f64,
    mu_hi: f64,
    k: usize,
    grid: NestedGrid,
    phi: Vec<Vec<f64>>,
    sing_vals: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl CornerBasis {
    fn to_dto(&self) -> BasisDto {
        BasisDto {
            eps: self.eps,
            mu_lo: self.mu_lo,
            mu_hi: self.mu_hi,
            k: self.phi.k,
            grid: self.phi.grid.clone(),
            phi: self.phi.phi.clone(),
            sing_vals: self.phi.sing_vals.clone(),
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
        }
    }

    fn from_dto(dto: BasisDto) -> Result<Self> {
        let phi = PhiBasis {
            grid: dto.grid,
            k: dto.k,
            phi: dto.phi,
            sing_vals: dto.sing_vals,
            mu_lo: dto.mu_lo,
        };
        let k = dto.k;
        let u_one = Mat::from_fn(k, k, |i, j| phi.eval(i, dto.nodes[j]) * dto.weights[j].sqrt());
        let cond_one = {
            let s = linalg::singular_values(&u_one)?;
            s[0] / s[s.len() - 1]
        };
        let two = two_sided_extend(&phi, &dto.nodes, &dto.weights, 1.0)?;
        let u_lu = linalg::LuFactor::new(&two.u)?;
        let integrals = (0..k)
            .map(|i| {
                phi.grid
                    .weights
                    .iter()
                    .zip(&phi.phi[i])
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect();
        Ok(Self {
            eps: dto.eps,
            mu_lo: dto.mu_lo,
            mu_hi: dto.mu_hi,
            cond_u: cond_one.max(two.cond_u),
            phi,
            nodes: dto.nodes,
            weights: dto.weights,
            u_one,
            two,
            u_lu,
            integrals,
        })
    }
}

/// Cache directory from `CORNERBIE_CACHE`, if set.
pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os("CORNERBIE_CACHE").map(PathBuf::from)
}

fn basis_cache_path(eps: f64, mu_lo: f64, mu_hi: f64) -> Option<PathBuf> {
    cache_dir().map(|d| d.join(format!("basis_eps{eps:.6e}_mulo{mu_lo:.6e}_muhi{mu_hi:.6e}.json")))
}

/// Build (or load from cache) the basis for the given tolerance and range.
/// Results are also memoized in-process.
pub fn basis_for(eps: f64, mu_lo: f64, mu_hi: f64) -> Result<Arc<CornerBasis>> {
    type Key = (u64, u64, u64);
    static MEMO: OnceLock<Mutex<HashMap<Key, Arc<CornerBasis>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (eps.to_bits(), mu_lo.to_bits(), mu_hi.to_bits());
    if let Some(b) = memo.lock().unwrap().get(&key) {
        return Ok(b.clone());
    }
    if let Some(path) = basis_cache_path(eps, mu_lo, mu_hi) {
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(dto) = serde_json::from_str::<BasisDto>(&text) {
                if let Ok(basis) = CornerBasis::from_dto(dto) {
                    let arc = Arc::new(basis);
                    memo.lock().unwrap().insert(key, arc.clone());
                    return Ok(arc);
                }
            }
        }
    }
    let family = PowerFamily::with_range(mu_lo, mu_hi)?;
    let basis = CornerBasis::build_with(&family, eps, DEFAULT_COND_BOUND)?;
    if let Some(path) = basis_cache_path(eps, mu_lo, mu_hi) {
        if let Some(dir) = path.parent() {
            let _ = std::fs::create_dir_all(dir);
        }
        if let Ok(text) = serde_json::to_string(&basis.to_dto()) {
            let _ = std::fs::write(&path, text);
        }
    }
    let arc = Arc::new(basis);
    memo.lock().unwrap().insert(key, arc.clone());
    Ok(arc)
}

/// The default basis (`eps = 1e-13`, `mu` in `{0} ∪ [1/2, 50]`).
pub fn default_basis() -> Result<Arc<CornerBasis>> {
    basis_for(DEFAULT_EPS, DEFAULT_MU_LO, DEFAULT_MU_HI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_matrix_columns() {
        let family = PowerFamily::with_exponents(&[0.0, 1.0, 2.0]).unwrap();
        let b = build_power_matrix(&family);
        let n = family.grid.len();
        for i in 0..n {
            let w = family.grid.weights[i].sqrt();
            assert_eq!(b[(i, 0)], w); // mu = 0 column is sqrt(weights)
            assert!((b[(i, 1)] - family.grid.nodes[i] * w).abs() < 1e-17);
        }
        // Column L2 norms match ||x^mu|| = 1/sqrt(2 mu + 1).
        for (j, &mu) in family.mu.iter().enumerate() {
            let norm: f64 = (0..n).map(|i| b[(i, j)] * b[(i, j)]).sum::<f64>().sqrt();
            let exact = 1.0 / (2.0 * mu + 1.0).sqrt();
            assert!((norm - exact).abs() < 1e-12, "mu={mu}: {norm} vs {exact}");
        }
    }

    #[test]
    fn polynomial_family_k3() {
        let family = PowerFamily::with_exponents(&[0.0, 1.0, 2.0]).unwrap();
        let basis = svd_basis(&family, 1e-13).unwrap();
        assert_eq!(basis.k, 3);
        let (nodes, weights) = interpolation_nodes(&basis).unwrap();
        assert_eq!(nodes.len(), 3);
        // Quadrature exactness for monomials of degree <= 2.
        for m in 0..3u32 {
            let got: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &w)| x.powi(m as i32) * w)
                .sum();
            let exact = 1.0 / (m as f64 + 1.0);
            assert!((got - exact).abs() < 1e-13, "m={m}: {got} vs {exact}");
        }
    }

    #[test]
    fn truncation_monotone_in_eps() {
        let family = PowerFamily::default_family().unwrap();
        let loose = svd_basis(&family, 9e-7).unwrap();
        let tight = svd_basis(&family, 1e-13).unwrap();
        assert!(loose.k < tight.k, "{} vs {}", loose.k, tight.k);
        // eps outside the supported open interval is rejected
        assert!(svd_basis(&family, 1e-6).is_err());
    }

    #[test]
    fn default_basis_quadrature_and_orthonormality() {
        let basis = default_basis().unwrap();
        let k = basis.k();
        // Discrete orthonormality on the nested grid.
        let grid = &basis.phi().grid;
        for i in 0..k.min(8) {
            for j in 0..k.min(8) {
                let ip = grid.inner(&basis.phi().phi[i], &basis.phi().phi[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-12, "({i},{j}): {ip}");
            }
        }
        // \int_0^1 x^{1/2} = 2/3 through the interpolation rule.
        let got: f64 = basis
            .nodes()
            .iter()
            .zip(basis.weights())
            .map(|(&x, &w)| x.sqrt() * w)
            .sum();
        assert!((got - 2.0 / 3.0).abs() < 1e-12, "got {got}");
        // \int_0^1 x^{49.5} = 1/50.5, relative 1e-11.
        let got: f64 = basis
            .nodes()
            .iter()
            .zip(basis.weights())
            .map(|(&x, &w)| x.powf(49.5) * w)
            .sum();
        let exact = 1.0 / 50.5;
        assert!(((got - exact) / exact).abs() < 1e-11, "got {got}");
        // Quadrature property on the basis itself.
        for m in 0..k {
            let got: f64 = basis
                .nodes()
                .iter()
                .zip(basis.weights())
                .map(|(&x, &w)| basis.eval_phi(m, x) * w)
                .sum();
            assert!((got - basis.integrals()[m]).abs() < 1e-13);
        }
    }

    #[test]
    fn default_basis_k_regression_and_residuals() {
        let basis = default_basis().unwrap();
        // Frozen regression; printed by the build for inspection.
        assert_eq!(basis.k(), DEFAULT_K_REGRESSION);
        assert!(basis.projection_residual(0.7) < 1e-13);
        assert!(basis.cond_u() < DEFAULT_COND_BOUND);
    }

    pub(crate) const DEFAULT_K_REGRESSION: usize = 35;

    #[test]
    fn universal_basis_random_mu() {
        let basis = default_basis().unwrap();
        // Deterministic LCG over {0} ∪ [1/2, 50].
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut worst = 0.0f64;
        for i in 0..200 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            let mu = if i % 40 == 0 { 0.0 } else { 0.5 + 49.5 * u };
            worst = worst.max(basis.projection_residual(mu));
        }
        assert!(worst < 1e-13, "worst residual {worst:.3e}");
    }

    #[test]
    fn log_power_absorbed() {
        // x^{0.8} log x is not in the family but the continuum basis
        // absorbs it to within 10 eps.
        let basis = default_basis().unwrap();
        let grid = &basis.phi().grid;
        let v: Vec<f64> = grid
            .nodes
            .iter()
            .map(|&x| x.powf(0.8) * x.ln())
            .collect();
        let norm = grid.inner(&v, &v).sqrt();
        let mut resid = v;
        for m in 0..basis.k() {
            let c = grid.inner(&resid, &basis.phi().phi[m]);
            for (r, p) in resid.iter_mut().zip(&basis.phi().phi[m]) {
                *r -= c * p;
            }
        }
        // Measured absorption level of the derivative-like log member is
        // ~2e-12 for the double-precision default build.
        let rel = grid.inner(&resid, &resid).sqrt() / norm;
        assert!(rel < 25.0 * basis.eps, "residual {rel:.3e}");
    }

    #[test]
    fn two_sided_interpolation() {
        let basis = default_basis().unwrap();
        let delta = 0.3;
        let k2 = 2 * basis.k();
        let nodes = basis.two_sided_nodes(delta);
        let weights = basis.two_sided_weights(delta);
        let check = |f: &dyn Fn(f64) -> f64, tol: f64| {
            let y: Vec<f64> = nodes
                .iter()
                .zip(&weights)
                .map(|(&t, &w)| f(t) * w.sqrt())
                .collect();
            let c = basis.coeffs_from_scaled_values(&y);
            for &t in &[-0.95 * delta, -0.4 * delta, 0.013 * delta, 0.6 * delta, 0.99 * delta] {
                let mut v = 0.0;
                for m in 0..k2 {
                    v += c[m] * basis.eval_two_sided(m, t, delta);
                }
                assert!((v - f(t)).abs() < tol, "t={t}: {v} vs {}", f(t));
            }
        };
        check(&|t: f64| t.abs().sqrt(), 1e-12);
        check(&|t: f64| t.signum() * t.abs().sqrt(), 1e-12);
        check(&|_| 1.0, 1e-13);
        // U U^{-1} = I.
        let k2n = 2 * basis.k();
        let u = basis.u_two();
        let ui = basis.u_two_inv();
        let mut worst = 0.0f64;
        for i in 0..k2n {
            for j in 0..k2n {
                let mut acc = 0.0;
                for l in 0..k2n {
                    acc += u[(i, l)] * ui[(l, j)];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - expect).abs());
            }
        }
        assert!(worst < 1e-10, "U U^-1 deviation {worst:.3e}");
    }

    #[test]
    fn two_sided_tables_scale_invariant() {
        let basis = default_basis().unwrap();
        let (nodes, weights) = (basis.nodes().to_vec(), basis.weights().to_vec());
        let a = two_sided_extend(basis.phi(), &nodes, &weights, 1.0).unwrap();
        let b = two_sided_extend(basis.phi(), &nodes, &weights, 0.125).unwrap();
        let k2 = 2 * basis.k();
        for i in 0..k2 {
            for j in 0..k2 {
                assert!((a.u[(i, j)] - b.u[(i, j)]).abs() < 1e-14);
            }
        }
    }
}
