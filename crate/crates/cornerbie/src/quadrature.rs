//! Smooth quadrature rules and adaptive dyadic integration.

use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// A quadrature rule on a reference interval.
#[derive(Debug, Clone)]
pub struct Rule {
    /// Nodes on `[-1, 1]`.
    pub nodes: Vec<f64>,
    /// Positive weights summing to the interval length 2.
    pub weights: Vec<f64>,
    pub order: usize,
    /// Polynomials up to this degree are integrated exactly.
    pub exactness: usize,
}

impl Rule {
    /// Nodes and weights mapped to `[a, b]`.
    pub fn scaled(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let nodes = self.nodes.iter().map(|&t| mid + half * t).collect();
        let weights = self.weights.iter().map(|&w| w * half).collect();
        (nodes, weights)
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * t);
        }
        acc * half
    }
}

/// Legendre polynomial value and derivative at `x`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_gauss_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, dp) = legendre_pair(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    Rule {
        nodes,
        weights,
        order: n,
        exactness: 2 * n - 1,
    }
}

/// The `n`-point Gauss-Legendre rule on `[-1, 1]`, `1 <= n <= 64`.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    if n == 0 || n > 64 {
        return Err(Error::UnsupportedOrder(n));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    Ok(guard.entry(n).or_insert_with(|| compute_gauss_legendre(n)).clone())
}

/// Default maximum recursion depth; intervals are stored corner-relative so
/// panels down to `2^-200` of the original interval stay representable.
pub const MAX_ADAPTIVE_DEPTH: usize = 200;

struct Adaptive<'a, F: ?Sized> {
    f: &'a mut F,
    dim: usize,
    lo: Rule,
    hi: Rule,
    leaf_tol: f64,
    max_depth: usize,
    buf_lo: Vec<f64>,
    buf_hi: Vec<f64>,
    scratch: Vec<f64>,
}

impl<F: FnMut(f64, &mut [f64]) + ?Sized> Adaptive<'_, F> {
    fn rule_sum(&mut self, a: f64, b: f64, hi: bool, out: &mut [f64]) {
        let rule = if hi { &self.hi } else { &self.lo };
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        out.fill(0.0);
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            (self.f)(mid + half * t, &mut self.scratch);
            for (o, s) in out.iter_mut().zip(&self.scratch) {
                *o += w * half * *s;
            }
        }
    }

    fn recurse(&mut self, a: f64, b: f64, depth: usize, acc: &mut [f64]) -> Result<()> {
        let mut lo = std::mem::take(&mut self.buf_lo);
        let mut hi = std::mem::take(&mut self.buf_hi);
        lo.resize(self.dim, 0.0);
        hi.resize(self.dim, 0.0);
        self.rule_sum(a, b, false, &mut lo);
        self.rule_sum(a, b, true, &mut hi);
        let err = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| (l - h).abs())
            .fold(0.0f64, f64::max);
        if err <= self.leaf_tol || (b - a) == 0.0 {
            for (acc_i, h) in acc.iter_mut().zip(&hi) {
                *acc_i += *h;
            }
            self.buf_lo = lo;
            self.buf_hi = hi;
            return Ok(());
        }
        if depth >= self.max_depth {
            return Err(Error::MaxDepthExceeded(self.max_depth));
        }
        self.buf_lo = lo;
        self.buf_hi = hi;
        let mid = 0.5 * (a + b);
        self.recurse(a, mid, depth + 1, acc)?;
        self.recurse(mid, b, depth + 1, acc)
    }
}

/// Adaptively integrate a vector-valued integrand over `[a, b]`.
///
/// Refinement halves intervals using an embedded Gauss pair as the error
/// estimate, which grades dyadically toward any endpoint singularity. The
/// `singular_endpoint` hint pre-splits the interval so the singular end is
/// isolated early.
pub fn adaptive_integrate_vec<F>(
    f: &mut F,
    dim: usize,
    a: f64,
    b: f64,
    tol: f64,
    singular_endpoint: Option<f64>,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]) + ?Sized,
{
    let lo = gauss_legendre(16)?;
    let hi = gauss_legendre(32)?;
    // Rough global scale from the coarse rule.
    let mut scale = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (&t, &w) in lo.nodes.iter().zip(&lo.weights) {
            f(mid + half * t, &mut scratch);
            for (s, v) in scale.iter_mut().zip(&scratch) {
                *s += w * half * *v;
            }
        }
    }
    let mag = scale.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let leaf_tol = tol * (1.0 + mag) / 32.0;
    let mut ctx = Adaptive {
        f,
        dim,
        lo,
        hi,
        leaf_tol,
        max_depth: MAX_ADAPTIVE_DEPTH,
        buf_lo: Vec::new(),
        buf_hi: Vec::new(),
        scratch,
    };
    let mut acc = vec![0.0; dim];
    match singular_endpoint {
        Some(s) if (s - a).abs() < (b - a) * 1e-12 || (s - b).abs() < (b - a) * 1e-12 => {
            // Singular endpoint: peel a thin layer so grading starts at once.
            if (s - a).abs() < (b - a) * 1e-12 {
                let cut = a + 0.25 * (b - a);
                ctx.recurse(a, cut, 1, &mut acc)?;
                ctx.recurse(cut, b, 1, &mut acc)?;
            } else {
                let cut = b - 0.25 * (b - a);
                ctx.recurse(a, cut, 1, &mut acc)?;
                ctx.recurse(cut, b, 1, &mut acc)?;
            }
        }
        _ => ctx.recurse(a, b, 0, &mut acc)?,
    }
    Ok(acc)
}

/// Adaptively integrate a scalar integrand over `[a, b]` to estimated error
/// below `tol * (1 + |value|)`.
pub fn adaptive_integrate<F>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    singular_endpoint: Option<f64>,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut wrapped = |t: f64, out: &mut [f64]| out[0] = f(t);
    let v = adaptive_integrate_vec(&mut wrapped, 1, a, b, tol, singular_endpoint)?;
    Ok(v[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gauss_legendre_low_orders() {
        let r1 = gauss_legendre(1).unwrap();
        assert_eq!(r1.nodes, vec![0.0]);
        assert_eq!(r1.weights, vec![2.0]);

        let r2 = gauss_legendre(2).unwrap();
        let inv_sqrt3 = 1.0 / 3.0f64.sqrt();
        assert!((r2.nodes[0] + inv_sqrt3).abs() < 1e-15);
        assert!((r2.nodes[1] - inv_sqrt3).abs() < 1e-15);
        assert!((r2.weights[0] - 1.0).abs() < 1e-15);
        assert!((r2.weights[1] - 1.0).abs() < 1e-15);

        // n=3 integrates t^4 over [-1,1] to 2/5 exactly (exactness degree 5).
        let r3 = gauss_legendre(3).unwrap();
        let v = r3.integrate(-1.0, 1.0, |t| t.powi(4));
        assert!((v - 0.4).abs() < 1e-15);

        assert!(matches!(gauss_legendre(0), Err(Error::UnsupportedOrder(0))));
        assert!(matches!(gauss_legendre(65), Err(Error::UnsupportedOrder(65))));
    }

    #[test]
    fn gauss_legendre_properties() {
        for n in [4, 8, 16, 24, 32, 48, 64] {
            let r = gauss_legendre(n).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            let sum: f64 = r.weights.iter().sum();
            assert!((sum - 2.0).abs() < 1e-13, "n={n} sum={sum}");
            for w in r.nodes.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    proptest! {
        // Exactness up to degree 2n-1 for random monomials.
        #[test]
        fn gauss_exactness(n in 2usize..20, d_frac in 0.0f64..1.0) {
            let r = gauss_legendre(n).unwrap();
            let d = ((2 * n - 1) as f64 * d_frac) as usize;
            let got = r.integrate(-1.0, 1.0, |t| t.powi(d as i32));
            let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
            prop_assert!((got - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_closed_forms() {
        // Endpoint algebraic singularity: ∫_0^1 x^{-1/4} dx = 4/3.
        let v = adaptive_integrate(|x| x.powf(-0.25), 0.0, 1.0, 1e-14, Some(0.0)).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-13, "got {v}");

        // Constant integrand needs no refinement.
        let v = adaptive_integrate(|_| 1.0, 0.0, 1.0, 1e-14, None).unwrap();
        assert!((v - 1.0).abs() < 1e-15);

        // Logarithmic singularity: ∫_0^1 log x dx = -1.
        let v = adaptive_integrate(|x| x.ln(), 0.0, 1.0, 1e-14, Some(0.0)).unwrap();
        assert!((v + 1.0).abs() < 1e-13, "got {v}");
    }

    #[test]
    fn adaptive_vector_matches_scalar() {
        let mut f = |t: f64, out: &mut [f64]| {
            out[0] = t.sqrt();
            out[1] = (3.0 * t).sin();
        };
        let v = adaptive_integrate_vec(&mut f, 2, 0.0, 1.0, 1e-14, Some(0.0)).unwrap();
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-13);
        let exact = (1.0 - (3.0f64).cos()) / 3.0;
        assert!((v[1] - exact).abs() < 1e-13);
    }

    #[test]
    fn adaptive_depth_cap() {
        // A non-integrable singularity never converges; the depth cap must
        // fire rather than hanging.
        let r = adaptive_integrate(|x| 1.0 / x, 0.0, 1.0, 1e-15, Some(0.0));
        assert!(matches!(r, Err(Error::MaxDepthExceeded(_))));
    }

    proptest! {
        // Random algebraic endpoint singularities against the closed form.
        #[test]
        fn adaptive_power_integrals(p in -0.45f64..3.0) {
            let v = adaptive_integrate(|x: f64| x.powf(p), 0.0, 1.0, 1e-14, Some(0.0)).unwrap();
            let exact = 1.0 / (p + 1.0);
            prop_assert!((v - exact).abs() < 1e-12 * (1.0 + exact.abs()));
        }
    }
}
