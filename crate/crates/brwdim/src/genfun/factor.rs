use crate::error::GenfunError;
use crate::group::FactorGroup;
use nalgebra::{DMatrix, DVector};

/// First-visit generating functions of one factor at evaluation point `w`:
/// `to_identity[x]` is F_i(x, e_i | w), with `to_identity[0] = 1`.
///
/// For untruncated factors left invariance gives F_i(e_i, x | w) =
/// `to_identity[inv(x)]`. For truncated factors the table is the last-visit
/// analogue L_i(e_i, x | w) of the killed walk (the kernel inside the ball is
/// symmetric, so the two linear systems coincide).
#[derive(Debug, Clone)]
pub struct FactorFirstVisit {
    pub factor: usize,
    pub w: f64,
    pub to_identity: Vec<f64>,
}

/// Linear-system solver for one factor, target the identity.
///
/// States are the non-identity ball elements; the system is
/// (I - w Q) f = w b with Q the step kernel among them and b the one-step
/// mass into the identity. Symmetric kernels are eigendecomposed once, so a
/// solve at any `w` is a pair of matrix-vector products.
pub(crate) struct FactorSolver {
    n: usize,
    rho: f64,
    sym: Option<SymSolver>,
    q: DMatrix<f64>,
    b: DVector<f64>,
    supp: Vec<(u32, f64)>,
}

struct SymSolver {
    basis: DMatrix<f64>,
    eigs: DVector<f64>,
    basis_t_b: DVector<f64>,
}

impl FactorSolver {
    pub fn new(factor: &FactorGroup) -> FactorSolver {
        let n = factor.order() - 1;
        let mut q = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for x in 1..factor.order() as u32 {
            for (s, p) in factor.support() {
                match factor.mul(x, s) {
                    Some(0) => b[(x - 1) as usize] += p,
                    Some(y) => q[((x - 1) as usize, (y - 1) as usize)] += p,
                    None => {}
                }
            }
        }
        let symmetric = {
            let mut ok = true;
            'outer: for i in 0..n {
                for j in (i + 1)..n {
                    let d: f64 = q[(i, j)] - q[(j, i)];
                    if d.abs() > 1e-14 {
                        ok = false;
                        break 'outer;
                    }
                }
            }
            ok
        };
        let (rho, sym) = if n == 0 {
            (0.0, None)
        } else if symmetric {
            let eig = q.clone().symmetric_eigen();
            let rho = eig.eigenvalues.iter().fold(0.0f64, |m, &e: &f64| m.max(e.abs()));
            let basis_t_b = eig.eigenvectors.transpose() * &b;
            (
                rho,
                Some(SymSolver {
                    basis: eig.eigenvectors,
                    eigs: eig.eigenvalues,
                    basis_t_b,
                }),
            )
        } else {
            let rho = q
                .complex_eigenvalues()
                .iter()
                .fold(0.0f64, |m, e| m.max(e.norm()));
            (rho, None)
        };
        FactorSolver {
            n,
            rho,
            sym,
            q,
            b,
            supp: factor.support().collect(),
        }
    }

    /// Radius of convergence of the first-visit series, 1/rho(Q).
    pub fn radius(&self) -> f64 {
        if self.rho <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.rho
        }
    }

    /// Solve the first-visit system at `w >= 0`.
    pub fn table(&self, factor_index: usize, w: f64) -> Result<FactorFirstVisit, GenfunError> {
        if w < 0.0 || !w.is_finite() {
            return Err(GenfunError::DivergedAtW {
                factor: factor_index,
                w,
                radius: self.radius(),
            });
        }
        if w * self.rho >= 1.0 - 1e-13 {
            return Err(GenfunError::DivergedAtW {
                factor: factor_index,
                w,
                radius: self.radius(),
            });
        }
        let f = if self.n == 0 {
            DVector::zeros(0)
        } else if let Some(sym) = &self.sym {
            let scaled = DVector::from_iterator(
                self.n,
                sym.basis_t_b
                    .iter()
                    .zip(sym.eigs.iter())
                    .map(|(&c, &e)| w * c / (1.0 - w * e)),
            );
            &sym.basis * scaled
        } else {
            let mut m = -(&self.q) * w;
            for i in 0..self.n {
                m[(i, i)] += 1.0;
            }
            let rhs = &self.b * w;
            m.lu().solve(&rhs).ok_or(GenfunError::DivergedAtW {
                factor: factor_index,
                w,
                radius: self.radius(),
            })?
        };
        let mut to_identity = Vec::with_capacity(self.n + 1);
        to_identity.push(1.0);
        to_identity.extend(f.iter().copied());
        Ok(FactorFirstVisit {
            factor: factor_index,
            w,
            to_identity,
        })
    }

    /// Derivatives dF_i(x, e | w)/dw alongside the table, for Jacobian-based
    /// divergence certificates.
    pub fn table_derivative(
        &self,
        factor_index: usize,
        w: f64,
    ) -> Result<Vec<f64>, GenfunError> {
        if w < 0.0 || !w.is_finite() || w * self.rho >= 1.0 - 1e-13 {
            return Err(GenfunError::DivergedAtW {
                factor: factor_index,
                w,
                radius: self.radius(),
            });
        }
        let df = if self.n == 0 {
            DVector::zeros(0)
        } else if let Some(sym) = &self.sym {
            let scaled = DVector::from_iterator(
                self.n,
                sym.basis_t_b
                    .iter()
                    .zip(sym.eigs.iter())
                    .map(|(&c, &e)| {
                        let d = 1.0 - w * e;
                        c / (d * d)
                    }),
            );
            &sym.basis * scaled
        } else {
            // Differentiate (I - wQ) f = w b: f' = (I - wQ)^{-1} (b + Q f).
            let table = self.table(factor_index, w)?;
            let f = DVector::from_iterator(self.n, table.to_identity[1..].iter().copied());
            let mut m = -(&self.q) * w;
            for i in 0..self.n {
                m[(i, i)] += 1.0;
            }
            let rhs = &self.b + &self.q * f;
            m.lu().solve(&rhs).ok_or(GenfunError::DivergedAtW {
                factor: factor_index,
                w,
                radius: self.radius(),
            })?
        };
        let mut out = Vec::with_capacity(self.n + 1);
        out.push(0.0);
        out.extend(df.iter().copied());
        Ok(out)
    }

    /// First-return generating function U_i(w) = w sum_s mu(s) F_i(s, e | w).
    pub fn first_return(&self, table: &FactorFirstVisit) -> f64 {
        table.w
            * self
                .supp
                .iter()
                .map(|&(s, p)| p * table.to_identity[s as usize])
                .sum::<f64>()
    }

    /// Green function G_i(w) = 1 / (1 - U_i(w)).
    pub fn green(&self, table: &FactorFirstVisit) -> f64 {
        let u = self.first_return(table);
        1.0 / (1.0 - u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FactorGroup;

    #[test]
    fn z2_first_visit_is_w() {
        let f = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
        let solver = FactorSolver::new(&f);
        for w in [0.0, 0.3, 0.9, 1.2] {
            let t = solver.table(0, w).unwrap();
            assert!((t.to_identity[1] - w).abs() < 1e-14);
        }
    }

    #[test]
    fn z3_symmetric_closed_form() {
        // F_1(e, a | w) = w / (2 - w) for the uniform step law on {a, a^2}.
        let f = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        let solver = FactorSolver::new(&f);
        for w in [0.1, 0.5, 1.0, 1.5] {
            let t = solver.table(0, w).unwrap();
            let expected = w / (2.0 - w);
            assert!((t.to_identity[1] - expected).abs() < 1e-13);
            assert!((t.to_identity[2] - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn w_zero_vanishes_off_target() {
        let f = FactorGroup::cyclic(5, &[(1, 0.5), (4, 0.5)]).unwrap();
        let solver = FactorSolver::new(&f);
        let t = solver.table(0, 0.0).unwrap();
        assert_eq!(t.to_identity[0], 1.0);
        for x in 1..5 {
            assert_eq!(t.to_identity[x], 0.0);
        }
    }

    #[test]
    fn divergence_past_the_radius() {
        let f = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        let solver = FactorSolver::new(&f);
        // rho(Q) = 1/2 here, so the radius is 2.
        assert!((solver.radius() - 2.0).abs() < 1e-12);
        assert!(matches!(
            solver.table(0, 2.0),
            Err(GenfunError::DivergedAtW { .. })
        ));
    }

    #[test]
    fn monotone_in_w() {
        let f = FactorGroup::ladder(8).unwrap();
        let solver = FactorSolver::new(&f);
        let t1 = solver.table(0, 0.4).unwrap();
        let t2 = solver.table(0, 0.8).unwrap();
        for x in 0..f.order() {
            assert!(t2.to_identity[x] >= t1.to_identity[x] - 1e-15);
        }
    }

    #[test]
    fn finite_factor_hits_identity_surely_at_one() {
        // Recurrence: F_i(x, e | 1) = 1 for every x of a finite factor.
        let f = FactorGroup::cyclic(6, &[(1, 0.3), (5, 0.3), (2, 0.2), (4, 0.2)]).unwrap();
        let solver = FactorSolver::new(&f);
        let t = solver.table(0, 1.0).unwrap();
        for x in 0..6 {
            assert!((t.to_identity[x] - 1.0).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn truncated_factor_leaks_mass() {
        let f = FactorGroup::ladder(4).unwrap();
        let solver = FactorSolver::new(&f);
        let t = solver.table(0, 1.0).unwrap();
        // Killed walk: return to e is not certain.
        for x in 1..f.order() {
            assert!(t.to_identity[x] < 1.0);
        }
        // The killed kernel is strictly substochastic somewhere, so R_i > 1.
        assert!(solver.radius() > 1.0);
    }

    #[test]
    fn nonsymmetric_directed_cycle() {
        // supp {a} on Z/3: F(a^2, e | w) = w, F(a, e | w) = w^2.
        let f = FactorGroup::cyclic(3, &[(1, 1.0)]).unwrap();
        let solver = FactorSolver::new(&f);
        let t = solver.table(0, 0.7).unwrap();
        assert!((t.to_identity[2] - 0.7).abs() < 1e-13);
        assert!((t.to_identity[1] - 0.49).abs() < 1e-13);
    }

    #[test]
    fn green_function_of_z3() {
        // G_1(w) = (2 - w) / ((1 - w)(2 + w)): check U = w^2/(2-w).
        let f = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        let solver = FactorSolver::new(&f);
        let t = solver.table(0, 0.5).unwrap();
        let u = solver.first_return(&t);
        assert!((u - 0.25 / 1.5).abs() < 1e-13);
        let g = solver.green(&t);
        assert!((g - 1.0 / (1.0 - 0.25 / 1.5)).abs() < 1e-12);
    }
}
