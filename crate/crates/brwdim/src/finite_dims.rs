//! Dimension formulas for free products of finite groups under the block
//! metric: Perron-Frobenius eigenvalues of the F-weighted and size-weighted
//! coupling matrices.

use crate::error::PfError;
use crate::genfun::Analyzer;
pub use crate::pf::{pf_eigenvalue, PFMatrix};

/// Dimensions of the accumulation set and the full boundary under the
/// block-length metric.
#[derive(Debug, Clone)]
pub struct BlockMetricDims {
    pub lambda: f64,
    /// Perron-Frobenius eigenvalue of the F-matrix (off-diagonal F_j^+(lambda)).
    pub theta: f64,
    /// Perron-Frobenius eigenvalue of the size matrix (off-diagonal |Gamma_j| - 1).
    pub rho: f64,
    pub hd_lambda: f64,
    pub hd_omega: f64,
    /// xi_i(lambda) per factor; all must stay below 1 when the step laws are
    /// nonsymmetric, which is checked and reported here.
    pub xi: Vec<f64>,
}

impl Analyzer<'_> {
    /// The matrix with off-diagonal entries F_j^+(lambda) := F_j^+(lambda | 1).
    pub fn f_matrix(&self, lambda: f64) -> Result<PFMatrix, PfError> {
        let xi = self.xi_converged(lambda)?;
        let r = self.spec().factor_count();
        let mut entries = vec![vec![0.0; r]; r];
        for j in 0..r {
            let fj = self.script_fi_plus(&xi, j, 1.0)?;
            for i in 0..r {
                if i != j {
                    entries[i][j] = fj;
                }
            }
        }
        Ok(PFMatrix::new(entries, "M"))
    }

    /// The matrix with off-diagonal entries |Gamma_j| - 1.
    pub fn size_matrix(&self) -> Result<PFMatrix, PfError> {
        let r = self.spec().factor_count();
        let mut entries = vec![vec![0.0; r]; r];
        for j in 0..r {
            if self.spec().factor(j).is_truncated() {
                return Err(PfError::InfiniteFactor(j));
            }
            let size = self.spec().factor(j).order() as f64 - 1.0;
            for i in 0..r {
                if i != j {
                    entries[i][j] = size;
                }
            }
        }
        Ok(PFMatrix::new(entries, "D"))
    }

    /// HD^fin(Lambda) = -log theta / log a and HD^fin(Omega) = -log rho / log a
    /// for a free product of finite groups.
    pub fn hd_fin(&self, lambda: f64) -> Result<BlockMetricDims, PfError> {
        if let Some(i) = (0..self.spec().factor_count())
            .find(|&i| self.spec().factor(i).is_truncated())
        {
            return Err(PfError::InfiniteFactor(i));
        }
        let xi = self.xi_converged(lambda)?;
        let m = self.f_matrix(lambda)?;
        let d = self.size_matrix()?;
        let (theta, _) = pf_eigenvalue(&m)?;
        let (rho, _) = pf_eigenvalue(&d)?;
        let log_a = self.spec().metric_base().ln();
        Ok(BlockMetricDims {
            lambda,
            theta,
            rho,
            hd_lambda: -theta.ln() / log_a,
            hd_omega: -rho.ln() / log_a,
            xi: xi.xi,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::SolverConfig;
    use crate::group::{FactorGroup, FreeProduct};

    fn z3z2() -> FreeProduct {
        let f1 = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
        FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap()
    }

    #[test]
    fn size_eigenvalue_of_z3z2_is_sqrt_two() {
        let spec = z3z2();
        let an = Analyzer::new(&spec, SolverConfig::default());
        let d = an.size_matrix().unwrap();
        let (rho, _) = pf_eigenvalue(&d).unwrap();
        assert!((rho - 2f64.sqrt()).abs() < 1e-12);
        let dims = an.hd_fin(1.005).unwrap();
        assert!((dims.hd_omega - 0.5).abs() < 1e-12, "HD^fin(Omega) = 1/2");
    }

    #[test]
    fn two_factor_closed_form() {
        // theta = sqrt(F_1^+ F_2^+) for r = 2.
        let spec = z3z2();
        let an = Analyzer::new(&spec, SolverConfig::default());
        let lambda = 1.008;
        let dims = an.hd_fin(lambda).unwrap();
        let xi = an.xi_converged(lambda).unwrap();
        let f1 = an.script_fi_plus(&xi, 0, 1.0).unwrap();
        let f2 = an.script_fi_plus(&xi, 1, 1.0).unwrap();
        assert!((dims.theta - (f1 * f2).sqrt()).abs() < 1e-11);
        let log_a = 0.5f64.ln();
        assert!((dims.hd_lambda + (f1 * f2).sqrt().ln() / log_a).abs() < 1e-11);
    }

    #[test]
    fn lambda_side_sits_below_omega_side() {
        // Every F(e, x | lambda) < 1, so each F_j^+ < |Gamma_j| - 1.
        let spec = z3z2();
        let an = Analyzer::new(&spec, SolverConfig::default());
        for lambda in [1.0, 1.005, 1.01] {
            let dims = an.hd_fin(lambda).unwrap();
            assert!(dims.hd_lambda < dims.hd_omega);
            assert!(dims.theta < dims.rho);
        }
    }

    #[test]
    fn theta_increases_with_lambda() {
        let spec = z3z2();
        let an = Analyzer::new(&spec, SolverConfig::default());
        let mut last = 0.0;
        for lambda in [1.0, 1.004, 1.008, 1.012] {
            let dims = an.hd_fin(lambda).unwrap();
            assert!(dims.theta > last);
            last = dims.theta;
        }
    }

    #[test]
    fn nonsymmetric_steps_allowed_and_xi_below_one() {
        // Remark-3.9 regime: finite factors with asymmetric step masses.
        let f1 = FactorGroup::cyclic(3, &[(1, 0.7), (2, 0.3)]).unwrap();
        let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
        let spec = FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap();
        let an = Analyzer::new(&spec, SolverConfig::default());
        let edge = an.resolvable_edge().unwrap();
        let dims = an.hd_fin(edge).unwrap();
        for &x in &dims.xi {
            assert!(x < 1.0, "finite factors keep xi(R) < 1, got {x}");
        }
        assert!(dims.hd_lambda < dims.hd_omega);
    }

    #[test]
    fn truncated_factor_rejected() {
        let f1 = FactorGroup::ladder(4).unwrap();
        let f2 = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        let spec = FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap();
        let an = Analyzer::new(&spec, SolverConfig::default());
        assert!(matches!(an.hd_fin(1.01), Err(PfError::InfiniteFactor(0))));
    }
}
