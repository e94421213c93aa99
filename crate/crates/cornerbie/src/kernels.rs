//! Laplace fundamental solution, the double-layer kernel, and jump
//! relations.
//!
//! `dlp_kernel` carries the inward-pointing normal at its first argument.
//! The assembled systems use the negated kernel ([`bie_kernel_raw`], i.e.
//! the outward normal); each boundary integral equation's overall sign is
//! pinned by end-to-end point-charge oracle tests.

use crate::geometry::{param_point, Point, Polygon};
use crate::{Error, Result};

const INV_2PI: f64 = 1.0 / (2.0 * std::f64::consts::PI);

/// Fundamental solution `G(x, y) = -log|x - y| / 2 pi`.
pub fn green(x: Point, y: Point) -> Result<f64> {
    let d = (x - y).norm();
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(-INV_2PI * d.ln())
}

/// `G` from the difference vector `x - y`.
#[inline]
pub fn green_raw(diff: Point) -> f64 {
    -INV_2PI * diff.norm().ln()
}

/// Double-layer kernel with the inward normal at the first point:
/// `K(x, y) = nu_in(x) . grad_x G(x, y)`, from `diff = x - y`.
#[inline]
pub fn dlp_kernel_raw(nu_in: Point, diff: Point) -> f64 {
    -INV_2PI * nu_in.dot(diff) / diff.norm_sq()
}

/// The kernel used in system assembly: the outward normal variant
/// `-K(x, y)`.
#[inline]
pub fn bie_kernel_raw(nu_in: Point, diff: Point) -> f64 {
    INV_2PI * nu_in.dot(diff) / diff.norm_sq()
}

/// Source/target pair of the parametrized kernel `k(s, t)`.
#[derive(Debug, Clone)]
pub struct KernelPoint {
    pub s: f64,
    pub t: f64,
    pub source: Point,
    pub target: Point,
    pub source_inward_normal: Point,
    pub same_edge: bool,
}

/// Assemble the kernel geometry for parameters `(s, t)`.
pub fn kernel_point(polygon: &Polygon, s: f64, t: f64) -> Result<KernelPoint> {
    let (source, nu, es) = param_point(polygon, s)?;
    let (target, _, et) = param_point(polygon, t)?;
    Ok(KernelPoint {
        s,
        t,
        source,
        target,
        source_inward_normal: nu,
        same_edge: es == et,
    })
}

/// Parametrized double-layer kernel `k(s, t) = K(gamma(s), gamma(t))` with
/// the inward normal at `gamma(s)`.
///
/// Exactly zero when both parameters lie on the same straight edge.
pub fn dlp_kernel(polygon: &Polygon, s: f64, t: f64) -> Result<f64> {
    let kp = kernel_point(polygon, s, t)?;
    if kp.same_edge {
        return Ok(0.0);
    }
    let diff = kp.source - kp.target;
    if diff.norm_sq() == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(dlp_kernel_raw(kp.source_inward_normal, diff))
}

/// Normal derivative of the single-layer potential at `gamma(t)`, sourced at
/// `gamma(s)`, with the inward normal at the target. Equals
/// `dlp_kernel(t, s)` for the Laplace kernel; kept as an independent closed
/// form for the adjoint-symmetry check.
pub fn slp_normal_kernel(polygon: &Polygon, t: f64, s: f64) -> Result<f64> {
    let (target, nu_t, et) = param_point(polygon, t)?;
    let (source, _, es) = param_point(polygon, s)?;
    if es == et {
        return Ok(0.0);
    }
    let diff = target - source;
    if diff.norm_sq() == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    // nu(target) . grad_y G(source, y) at y = target.
    Ok(-INV_2PI * nu_t.dot(diff) / diff.norm_sq())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    /// Value of the single-layer potential (continuous across the boundary).
    Single,
    /// Normal derivative of the single-layer potential.
    SingleNormalDerivative,
    /// Value of the double-layer potential.
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Interior,
    Exterior,
}

/// One-sided limits of layer potentials at a smooth boundary point:
/// `boundary_value` is the principal value and `density_value` the density
/// at the point. Double layer: interior `b - sigma/2`, exterior
/// `b + sigma/2`. Normal derivative of the single layer: interior
/// `b + sigma/2`, exterior `b - sigma/2`. Single-layer value: continuous.
pub fn trace_limits(layer: Layer, side: Side, boundary_value: f64, density_value: f64) -> f64 {
    match (layer, side) {
        (Layer::Single, _) => boundary_value,
        (Layer::Double, Side::Interior) => boundary_value - 0.5 * density_value,
        (Layer::Double, Side::Exterior) => boundary_value + 0.5 * density_value,
        (Layer::SingleNormalDerivative, Side::Interior) => boundary_value + 0.5 * density_value,
        (Layer::SingleNormalDerivative, Side::Exterior) => boundary_value - 0.5 * density_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tests::{proxy_triangle, unit_square};
    use crate::quadrature::adaptive_integrate;

    #[test]
    fn green_closed_forms() {
        let origin = Point::new(0.0, 0.0);
        assert_eq!(green(Point::new(1.0, 0.0), origin).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let v = green(Point::new(e, 0.0), origin).unwrap();
        assert!((v + INV_2PI).abs() < 1e-16);
        assert!(matches!(green(origin, origin), Err(Error::CoincidentPoints)));
    }

    #[test]
    fn dlp_same_edge_zero() {
        let p = unit_square();
        // Both parameters on the bottom edge.
        assert_eq!(dlp_kernel(&p, 0.25, 0.75).unwrap(), 0.0);
    }

    #[test]
    fn dlp_square_closed_form() {
        let p = unit_square();
        // Source mid-bottom (normal (0,1)), target mid-top, distance 1:
        // K = -(1/2pi) * (0,1).(0,-1) / 1 = +1/(2pi).
        let v = dlp_kernel(&p, 0.5, 2.5).unwrap();
        assert!((v - INV_2PI).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn dlp_matches_normal_finite_difference() {
        let p = proxy_triangle();
        let h = 1e-6;
        for &(s, t) in &[(0.3, 1.5), (0.7, 2.6), (1.2, 0.45), (2.4, 0.9)] {
            let v = dlp_kernel(&p, s, t).unwrap();
            let (xs, nu, _) = param_point(&p, s).unwrap();
            let (xt, _, _) = param_point(&p, t).unwrap();
            let gp = green(xs + nu.scale(h), xt).unwrap();
            let gm = green(xs - nu.scale(h), xt).unwrap();
            let fd = (gp - gm) / (2.0 * h);
            assert!((v - fd).abs() < 1e-8, "s={s} t={t}: {v} vs {fd}");
        }
    }

    #[test]
    fn adjoint_symmetry() {
        let p = proxy_triangle();
        for &(s, t) in &[(0.3, 1.5), (0.7, 2.6), (1.2, 0.45), (2.4, 0.9), (0.2, 2.9)] {
            let a = slp_normal_kernel(&p, t, s).unwrap();
            let b = dlp_kernel(&p, t, s).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_identity_square() {
        // Interior double layer of unit density is +1 with the inward
        // normal; computed with brute-force adaptive integration per edge.
        let p = unit_square();
        let y = Point::new(0.37, 0.54);
        let mut total = 0.0;
        for e in 0..4 {
            let a = p.corner_param(e);
            let b = a + p.edge_len(e);
            total += adaptive_integrate(
                |t| {
                    let (x, nu, _) = param_point(&p, t).unwrap();
                    dlp_kernel_raw(nu, x - y)
                },
                a + 1e-14,
                b - 1e-14,
                1e-13,
                None,
            )
            .unwrap();
        }
        assert!((total - 1.0).abs() < 1e-10, "got {total}");
        // Exterior point: identically zero.
        let y = Point::new(2.5, -1.3);
        let mut total = 0.0;
        for e in 0..4 {
            let a = p.corner_param(e);
            let b = a + p.edge_len(e);
            total += adaptive_integrate(
                |t| {
                    let (x, nu, _) = param_point(&p, t).unwrap();
                    dlp_kernel_raw(nu, x - y)
                },
                a + 1e-14,
                b - 1e-14,
                1e-13,
                None,
            )
            .unwrap();
        }
        assert!(total.abs() < 1e-10, "got {total}");
    }

    #[test]
    fn trace_limit_values() {
        // Thm-style jump relations, outward-normal convention.
        assert_eq!(trace_limits(Layer::Double, Side::Interior, 0.0, 1.0), -0.5);
        assert_eq!(trace_limits(Layer::Double, Side::Exterior, 0.0, 1.0), 0.5);
        assert_eq!(trace_limits(Layer::Single, Side::Interior, 0.7, 123.0), 0.7);
        assert_eq!(trace_limits(Layer::Single, Side::Exterior, 0.7, -9.0), 0.7);
        assert_eq!(
            trace_limits(Layer::SingleNormalDerivative, Side::Interior, 0.2, 1.0),
            0.7
        );
        assert_eq!(
            trace_limits(Layer::SingleNormalDerivative, Side::Exterior, 0.2, 1.0),
            -0.3
        );
    }

    #[test]
    fn kernel_point_same_edge_flag() {
        let p = unit_square();
        assert!(kernel_point(&p, 0.2, 0.8).unwrap().same_edge);
        assert!(!kernel_point(&p, 0.2, 1.8).unwrap().same_edge);
    }
}
