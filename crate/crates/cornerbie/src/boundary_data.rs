//! Boundary data generators and their analytic fields for oracle tests.

use crate::geometry::{point_segment_distance, Discretization, Point, Polygon};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Declarative boundary data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum BoundaryData {
    /// Point charges with potential `v(x) = sum_j c_j log|x - x_j|`.
    /// Dirichlet data is the trace of `v`; Neumann data is the scattering
    /// form `-grad(v) . nu_out`.
    PointCharges { charges: Vec<Charge> },
    /// `u = sum_k a_k Re z^k + b_k Im z^k`; Dirichlet data is the trace,
    /// Neumann data the outward normal derivative.
    Harmonic { coeffs: Vec<[f64; 2]> },
    /// The outward normal component `nu_axis` (polarization tensor data).
    NormalComponent { axis: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Charge {
    pub pos: [f64; 2],
    pub strength: f64,
}

impl BoundaryData {
    /// Pointwise Dirichlet trace at `x`.
    pub fn dirichlet_at(&self, x: Point) -> f64 {
        match self {
            BoundaryData::PointCharges { charges } => charge_potential(charges, x),
            BoundaryData::Harmonic { coeffs } => harmonic_value(coeffs, x),
            BoundaryData::NormalComponent { .. } => {
                panic!("normal-component data is Neumann-only")
            }
        }
    }

    /// Pointwise Neumann data at `x` with outward normal `nu_out`.
    pub fn neumann_at(&self, x: Point, nu_out: Point) -> f64 {
        match self {
            BoundaryData::PointCharges { charges } => {
                let g = charge_gradient(charges, x);
                -(g.dot(nu_out))
            }
            BoundaryData::Harmonic { coeffs } => harmonic_gradient(coeffs, x).dot(nu_out),
            BoundaryData::NormalComponent { axis } => {
                if *axis == 0 {
                    nu_out.x
                } else {
                    nu_out.y
                }
            }
        }
    }

    /// sqrt-w-scaled Dirichlet samples on the mesh.
    pub fn dirichlet_values(&self, disc: &Discretization) -> Vec<f64> {
        (0..disc.n())
            .map(|i| self.dirichlet_at(disc.node_position(i)) * disc.nodes[i].sqrt_w)
            .collect()
    }

    /// sqrt-w-scaled Neumann samples on the mesh.
    pub fn neumann_values(&self, disc: &Discretization) -> Vec<f64> {
        (0..disc.n())
            .map(|i| {
                let nu_out = disc.inward_normal_of_node(i).scale(-1.0);
                self.neumann_at(disc.node_position(i), nu_out) * disc.nodes[i].sqrt_w
            })
            .collect()
    }

    /// The exact solution of the exterior Neumann scattering problem with
    /// this data (charges inside the domain): `u = -v`.
    pub fn scattering_exact(&self, y: Point) -> f64 {
        match self {
            BoundaryData::PointCharges { charges } => -charge_potential(charges, y),
            _ => panic!("scattering oracle needs point charges"),
        }
    }

    /// The harmonic extension (oracle for Dirichlet problems).
    pub fn harmonic_exact(&self, y: Point) -> f64 {
        match self {
            BoundaryData::PointCharges { charges } => charge_potential(charges, y),
            BoundaryData::Harmonic { coeffs } => harmonic_value(coeffs, y),
            BoundaryData::NormalComponent { .. } => panic!("no pointwise oracle"),
        }
    }

    /// Total integral of the Neumann data over the boundary (for the
    /// exterior far-field condition): for charges inside the domain this is
    /// `-2 pi * sum(strengths)`.
    pub fn neumann_total_flux(&self, disc: &Discretization) -> f64 {
        (0..disc.n())
            .map(|i| {
                let nu_out = disc.inward_normal_of_node(i).scale(-1.0);
                self.neumann_at(disc.node_position(i), nu_out) * disc.nodes[i].weight
            })
            .sum()
    }
}

pub fn charge_potential(charges: &[Charge], x: Point) -> f64 {
    charges
        .iter()
        .map(|c| c.strength * (x - Point::new(c.pos[0], c.pos[1])).norm().ln())
        .sum()
}

fn charge_gradient(charges: &[Charge], x: Point) -> Point {
    let mut g = Point::new(0.0, 0.0);
    for c in charges {
        let d = x - Point::new(c.pos[0], c.pos[1]);
        let r2 = d.norm_sq();
        g = g + d.scale(c.strength / r2);
    }
    g
}

fn harmonic_value(coeffs: &[[f64; 2]], x: Point) -> f64 {
    let z = Complex64::new(x.x, x.y);
    let mut f = Complex64::new(0.0, 0.0);
    let mut zk = Complex64::new(1.0, 0.0);
    for c in coeffs {
        f += Complex64::new(c[0], -c[1]) * zk;
        zk *= z;
    }
    f.re
}

fn harmonic_gradient(coeffs: &[[f64; 2]], x: Point) -> Point {
    // u = Re F with F' = sum k c_k z^{k-1}: grad u = (Re F', -Im F').
    let z = Complex64::new(x.x, x.y);
    let mut d = Complex64::new(0.0, 0.0);
    let mut zk = Complex64::new(1.0, 0.0); // z^{k-1}
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        d += Complex64::new(c[0], -c[1]) * (k as f64) * zk;
        zk *= z;
    }
    Point::new(d.re, -d.im)
}

/// Point-in-polygon by winding (boundary points count as outside).
pub fn polygon_contains(polygon: &Polygon, p: Point) -> bool {
    let n = polygon.num_vertices();
    let mut winding = 0i32;
    for e in 0..n {
        let a = polygon.vertex(e);
        let b = polygon.vertex(polygon.next_corner(e));
        if a.y <= p.y {
            if b.y > p.y && (b - a).cross(p - a) > 0.0 {
                winding += 1;
            }
        } else if b.y <= p.y && (b - a).cross(p - a) < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

/// Distance from a point to the polygon boundary.
pub fn boundary_distance(polygon: &Polygon, p: Point) -> f64 {
    let n = polygon.num_vertices();
    (0..n)
        .map(|e| {
            point_segment_distance(p, polygon.vertex(e), polygon.vertex(polygon.next_corner(e)))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Seeded interior charges with a margin from the boundary; strengths drawn
/// in `[-1, 1]` and optionally shifted to zero mean.
pub fn random_interior_charges(
    polygon: &Polygon,
    count: usize,
    seed: u64,
    margin: f64,
    zero_mean: bool,
) -> Vec<Charge> {
    let mut state = seed ^ 0x9E3779B97F4A7C15;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let (mut lo, mut hi) = (polygon.vertex(0), polygon.vertex(0));
    for &v in polygon.vertices() {
        lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Point::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    let mut charges = Vec::with_capacity(count);
    let mut guard = 0;
    while charges.len() < count {
        guard += 1;
        assert!(guard < 1_000_000, "polygon interior too thin for charge margin");
        let p = Point::new(lo.x + (hi.x - lo.x) * next(), lo.y + (hi.y - lo.y) * next());
        if polygon_contains(polygon, p) && boundary_distance(polygon, p) >= margin {
            charges.push(Charge {
                pos: [p.x, p.y],
                strength: 2.0 * next() - 1.0,
            });
        }
    }
    if zero_mean {
        let mean: f64 = charges.iter().map(|c| c.strength).sum::<f64>() / count as f64;
        for c in &mut charges {
            c.strength -= mean;
        }
    }
    charges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_polygon;

    fn square() -> Polygon {
        build_polygon(&[
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn harmonic_gradient_matches_fd() {
        let data = BoundaryData::Harmonic {
            coeffs: vec![[0.3, -0.1], [1.0, 0.5], [0.2, -0.7], [0.05, 0.4]],
        };
        let h = 1e-6;
        for &(x, y) in &[(0.3, 0.4), (-1.2, 0.7), (2.0, -0.5)] {
            let p = Point::new(x, y);
            let g = match &data {
                BoundaryData::Harmonic { coeffs } => harmonic_gradient(coeffs, p),
                _ => unreachable!(),
            };
            let vx = (data.harmonic_exact(Point::new(x + h, y))
                - data.harmonic_exact(Point::new(x - h, y)))
                / (2.0 * h);
            let vy = (data.harmonic_exact(Point::new(x, y + h))
                - data.harmonic_exact(Point::new(x, y - h)))
                / (2.0 * h);
            assert!((g.x - vx).abs() < 1e-7 && (g.y - vy).abs() < 1e-7);
        }
    }

    #[test]
    fn containment_and_margins() {
        let p = square();
        assert!(polygon_contains(&p, Point::new(0.5, 0.5)));
        assert!(!polygon_contains(&p, Point::new(1.5, 0.5)));
        assert!((boundary_distance(&p, Point::new(0.5, 0.7)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn random_charges_deterministic_and_interior() {
        let p = square();
        let a = random_interior_charges(&p, 10, 42, 0.2, true);
        let b = random_interior_charges(&p, 10, 42, 0.2, true);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.pos, y.pos);
            assert_eq!(x.strength, y.strength);
        }
        let total: f64 = a.iter().map(|c| c.strength).sum();
        assert!(total.abs() < 1e-13);
        for c in &a {
            let pt = Point::new(c.pos[0], c.pos[1]);
            assert!(polygon_contains(&p, pt));
            assert!(boundary_distance(&p, pt) >= 0.2);
        }
    }
}
