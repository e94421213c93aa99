//! Direct Dirichlet solves and adjoint (transposed) Neumann solves.
//!
//! One LU factorization of a Dirichlet matrix serves both directions: the
//! Dirichlet solve `A sigma = f` yields densities that are interpolable
//! everywhere (including corner panels), while the transposed solve
//! `A^T sigma = f` yields the weak solution of the dual Neumann problem --
//! accurate under inner products with interpolable functions but not
//! pointwise near corners.

use crate::assembly::{BieKind, SystemMatrix};
use crate::geometry::{Discretization, Point};
use crate::linalg::LuFactor;
use crate::{Error, Result};
use std::io::Write;
use std::sync::Arc;

/// A sqrt-weight-scaled boundary density `sigma_i = sigma(s_i) sqrt(w_i)`.
#[derive(Debug, Clone)]
pub struct DensityVector {
    pub kind: BieKind,
    /// Adjoint-solved Neumann densities are valid only weakly on corner
    /// panels.
    pub weak_only: bool,
    pub values: Vec<f64>,
}

impl DensityVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Dump as CSV: `s, w, sigma_sqrt_w, weak_only`.
    pub fn dump_csv<W: Write>(&self, disc: &Discretization, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "s,w,sigma_sqrt_w,weak_only")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{}",
                disc.node_param(i),
                disc.nodes[i].weight,
                v,
                self.weak_only as u8
            )?;
        }
        Ok(())
    }
}

/// An LU-factorized Dirichlet system, reusable for many right-hand sides in
/// both the plain and the transposed direction.
pub struct Factorized {
    pub matrix: Arc<SystemMatrix>,
    lu: LuFactor,
}

impl Factorized {
    pub fn new(matrix: SystemMatrix) -> Result<Self> {
        // The row-major entries viewed column-major are A^T; factor that.
        let lu = LuFactor::from_ref(matrix.transpose_view())?;
        Ok(Self {
            matrix: Arc::new(matrix),
            lu,
        })
    }

    pub fn kind(&self) -> BieKind {
        self.matrix.kind
    }
    pub fn disc(&self) -> &Arc<Discretization> {
        &self.matrix.disc
    }
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    /// Solve `A x = b`.
    pub fn solve_plain(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve_transpose(b)
    }

    /// Solve `A^T x = b`.
    pub fn solve_transposed(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(b)
    }
}

/// Solve a Dirichlet system for sqrt-w-scaled boundary data `f`.
pub fn solve_dirichlet(fac: &Factorized, f: &[f64]) -> Result<DensityVector> {
    if !fac.kind().is_dirichlet() {
        return Err(Error::MeshInfeasible(format!(
            "solve_dirichlet needs a Dirichlet system, got {}",
            fac.kind().as_str()
        )));
    }
    let values = fac.solve_plain(f)?;
    Ok(DensityVector {
        kind: fac.kind(),
        weak_only: false,
        values,
    })
}

/// Solve the Neumann problem dual to the factorized Dirichlet system by the
/// transposed solve `A^T sigma = f`: interior Dirichlet yields the exterior
/// Neumann density, exterior Dirichlet the interior Neumann density. The
/// result is weak-only near corners.
pub fn solve_neumann_adjoint(fac: &Factorized, f: &[f64]) -> Result<DensityVector> {
    if !fac.kind().is_dirichlet() {
        return Err(Error::MeshInfeasible(format!(
            "solve_neumann_adjoint needs a Dirichlet system, got {}",
            fac.kind().as_str()
        )));
    }
    let kind = fac.kind().dual();
    if kind == BieKind::InteriorNeumann {
        // Compatibility: \int f = 0.
        let disc = fac.disc();
        let mean: f64 = f
            .iter()
            .enumerate()
            .map(|(i, v)| disc.nodes[i].sqrt_w * v)
            .sum();
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if mean.abs() > 1e-12 * norm.max(1.0) {
            return Err(Error::IncompatibleData(mean));
        }
    }
    let values = fac.solve_transposed(f)?;
    Ok(DensityVector {
        kind,
        weak_only: true,
        values,
    })
}

/// Weak inner product `<g, sigma> = sum_i g(gamma(s_i)) sqrt(w_i) sigma_i`.
pub fn weak_inner_product<F: Fn(Point) -> f64>(
    disc: &Discretization,
    sigma: &DensityVector,
    g: F,
) -> f64 {
    sigma
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| g(disc.node_position(i)) * disc.nodes[i].sqrt_w * v)
        .sum()
}

/// Discrete sqrt-w-weighted 2-norm of scaled boundary data.
pub fn data_norm(f: &[f64]) -> f64 {
    f.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::boundary_data::BoundaryData;
    use crate::corner_basis::default_basis;
    use crate::geometry::tests::unit_square;
    use crate::geometry::{build_mesh, MeshParams};

    fn square_fac(kind: BieKind) -> Factorized {
        let poly = unit_square();
        let basis = default_basis().unwrap();
        let params = MeshParams {
            delta: Some(1.0 / 16.0),
            ..Default::default()
        };
        let disc = Arc::new(build_mesh(&poly, &basis, &params).unwrap());
        Factorized::new(assemble(&disc, kind).unwrap()).unwrap()
    }

    #[test]
    fn zero_data_zero_density() {
        let fac = square_fac(BieKind::InteriorDirichlet);
        let f = vec![0.0; fac.n()];
        let sigma = solve_dirichlet(&fac, &f).unwrap();
        assert!(sigma.values.iter().all(|&v| v == 0.0));
        let sigma = solve_neumann_adjoint(&fac, &f).unwrap();
        assert!(sigma.values.iter().all(|&v| v == 0.0));
        assert_eq!(sigma.kind, BieKind::ExteriorNeumann);
        assert!(sigma.weak_only);
    }

    #[test]
    fn interior_neumann_compatibility() {
        let fac = square_fac(BieKind::ExteriorDirichlet);
        let disc = fac.disc().clone();
        let f: Vec<f64> = (0..fac.n()).map(|i| disc.nodes[i].sqrt_w).collect();
        assert!(matches!(
            solve_neumann_adjoint(&fac, &f),
            Err(Error::IncompatibleData(_))
        ));
        // nu_1 data integrates to zero over a closed curve.
        let f = BoundaryData::NormalComponent { axis: 0 }.neumann_values(&disc);
        let sigma = solve_neumann_adjoint(&fac, &f).unwrap();
        assert_eq!(sigma.kind, BieKind::InteriorNeumann);
    }

    #[test]
    fn inverse_consistency() {
        let fac = square_fac(BieKind::InteriorDirichlet);
        let n = fac.n();
        let f: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 / 11.0 - 0.4).collect();
        let sigma = solve_dirichlet(&fac, &f).unwrap();
        let back = fac.matrix.apply_slice(&sigma.values).unwrap();
        let scale = f.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        for i in 0..n {
            assert!((back[i] - f[i]).abs() < 1e-11 * scale.max(1.0));
        }
    }

    #[test]
    fn weak_inner_product_basics() {
        let fac = square_fac(BieKind::InteriorDirichlet);
        let disc = fac.disc().clone();
        let zero = DensityVector {
            kind: BieKind::ExteriorNeumann,
            weak_only: true,
            values: vec![0.0; fac.n()],
        };
        assert_eq!(weak_inner_product(&disc, &zero, |_| 1.0), 0.0);
        // <1, sqrt(w)> recovers the boundary length.
        let unit = DensityVector {
            kind: BieKind::ExteriorNeumann,
            weak_only: true,
            values: disc.nodes.iter().map(|n| n.sqrt_w).collect(),
        };
        let l = weak_inner_product(&disc, &unit, |_| 1.0);
        assert!((l - 4.0).abs() < 1e-12);
    }
}
