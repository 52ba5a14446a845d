use super::Analyzer;
use crate::error::GenfunError;

/// The vector xi_i(z) of first-passage generating functions into each
/// factor's non-identity elements, as the minimal nonnegative fixed point of
/// the one-equation-per-factor system.
#[derive(Debug, Clone)]
pub struct XiSolution {
    pub z: f64,
    pub xi: Vec<f64>,
    /// Sup-norm distance between the returned vector and one more sweep.
    pub residual: f64,
    pub iterations: u64,
    pub converged: bool,
    /// Set when the iteration crossed a divergence threshold.
    pub divergence: Option<String>,
    /// Truncation depth per factor, `None` for finite factors.
    pub depths: Vec<Option<u32>>,
}

enum SweepOutcome {
    Next(Vec<f64>),
    Diverged(String),
}

/// Certified side of a point z relative to R.
pub(crate) enum ZClass {
    Convergent,
    Divergent,
    Undecided,
}

impl Analyzer<'_> {
    /// One sweep of the fixed-point map: re-solve every factor's first-visit
    /// system at the current xi_j and recombine.
    fn xi_sweep(&self, z: f64, xi: &[f64]) -> SweepOutcome {
        let r = self.spec.factor_count();
        // Per factor j: alpha_j z sum_s mu_j(s) F_j(s, e_j | xi_j).
        let mut passage = vec![0.0; r];
        for j in 0..r {
            let table = match self.solvers[j].table(j, xi[j]) {
                Ok(t) => t,
                Err(e) => return SweepOutcome::Diverged(e.to_string()),
            };
            let inner: f64 = self
                .spec
                .factor(j)
                .support()
                .map(|(s, p)| p * table.to_identity[s as usize])
                .sum();
            passage[j] = self.spec.weight(j) * z * inner;
        }
        let total: f64 = passage.iter().sum();
        let mut next = vec![0.0; r];
        for i in 0..r {
            let denom = 1.0 - (total - passage[i]);
            if denom <= 0.0 {
                return SweepOutcome::Diverged(format!(
                    "conditioning denominator of xi_{i} is {denom}"
                ));
            }
            next[i] = self.spec.weight(i) * z / denom;
        }
        SweepOutcome::Next(next)
    }

    /// Minimal nonnegative solution of the xi fixed-point system by monotone
    /// iteration from zero, with a damped secant tail jump once plain sweeps
    /// pass the configured threshold.
    ///
    /// Divergence (unbounded iterates, a collapsing denominator, or a factor
    /// system pushed past its radius) is reported in the solution with
    /// `converged = false`; a bounded but unconverged iteration is the
    /// distinct `SlowConvergence` error.
    pub fn xi_solve(&self, z: f64) -> Result<XiSolution, GenfunError> {
        let cfg = &self.cfg;
        let depths: Vec<Option<u32>> = self.spec.factors().iter().map(|f| f.depth()).collect();
        let r = self.spec.factor_count();
        let mut xi = vec![0.0; r];
        if z == 0.0 {
            return Ok(XiSolution {
                z,
                xi,
                residual: 0.0,
                iterations: 0,
                converged: true,
                divergence: None,
                depths,
            });
        }
        if z < 0.0 || !z.is_finite() {
            return Err(GenfunError::LambdaOutOfRange {
                lambda: z,
                low: 0.0,
                high: f64::INFINITY,
            });
        }
        let mut growth_strikes = 0u32;
        let mut iterations = 0u64;
        let mut residual = f64::INFINITY;
        while iterations < cfg.max_iter {
            let next = match self.xi_sweep(z, &xi) {
                SweepOutcome::Next(v) => v,
                SweepOutcome::Diverged(reason) => {
                    return Ok(XiSolution {
                        z,
                        xi,
                        residual,
                        iterations,
                        converged: false,
                        divergence: Some(reason),
                        depths,
                    })
                }
            };
            iterations += 1;
            residual = xi
                .iter()
                .zip(&next)
                .map(|(a, b)| (b - a).abs())
                .fold(0.0, f64::max);
            // Divergence thresholds: magnitude, and sustained fast growth.
            if next.iter().any(|&v| v > cfg.divergence_threshold) {
                return Ok(XiSolution {
                    z,
                    xi: next,
                    residual,
                    iterations,
                    converged: false,
                    divergence: Some(format!(
                        "iterate exceeded the divergence threshold {}",
                        cfg.divergence_threshold
                    )),
                    depths,
                });
            }
            let fast_growth = xi
                .iter()
                .zip(&next)
                .any(|(&a, &b)| a > 0.0 && (b - a) / a > cfg.growth_factor);
            growth_strikes = if fast_growth { growth_strikes + 1 } else { 0 };
            if growth_strikes >= 3 {
                return Ok(XiSolution {
                    z,
                    xi: next,
                    residual,
                    iterations,
                    converged: false,
                    divergence: Some(format!(
                        "three consecutive sweeps grew faster than x{}",
                        cfg.growth_factor
                    )),
                    depths,
                });
            }
            let delta: Vec<f64> = xi.iter().zip(&next).map(|(a, b)| b - a).collect();
            xi = next;
            if residual < cfg.fixed_point_tol {
                return Ok(XiSolution {
                    z,
                    xi,
                    residual,
                    iterations,
                    converged: true,
                    divergence: None,
                    depths,
                });
            }
            // Newton step on xi - T(xi) with the analytic Jacobian. By
            // convexity of the sweep map a Newton step from a point below the
            // minimal fixed point lands below it again, so monotone sweeps
            // from the accepted candidate still squeeze to the minimal
            // solution. The step is kept only when it cuts the residual.
            if iterations >= cfg.accel_after && iterations % 16 == 0 {
                if let Some(cand) = self.newton_candidate(z, &xi, &delta) {
                    if let SweepOutcome::Next(swept) = self.xi_sweep(z, &cand) {
                        let new_res = swept
                            .iter()
                            .zip(&cand)
                            .map(|(s, c)| (s - c).abs())
                            .fold(0.0, f64::max);
                        if new_res < 0.999 * residual {
                            xi = swept;
                            iterations += 1;
                            residual = new_res;
                        }
                    }
                }
            }
        }
        // Budget exhausted. Right at the branch point the iteration stalls
        // before the residual target; a post-fixed-point probe can still
        // certify the value to a wider width, which is reported in place of
        // the sweep residual. The stalled iterate sits below the minimal
        // fixed point, so downstream roots err on the safe side.
        if residual < 1e-8 {
            let mut width = (4.0 * residual).max(1e-12);
            while width <= 2e-4 {
                if self.perron_bump_certificate(z, &xi, width) {
                    return Ok(XiSolution {
                        z,
                        xi,
                        residual: width,
                        iterations,
                        converged: true,
                        divergence: None,
                        depths,
                    });
                }
                width *= 10.0;
            }
        }
        Err(GenfunError::SlowConvergence {
            iterations,
            residual,
        })
    }

    /// Jacobian of the fixed-point map at `xi` (zero diagonal, nonnegative).
    /// `None` when a derivative evaluation is unavailable.
    fn xi_jacobian(&self, z: f64, xi: &[f64]) -> Option<Vec<Vec<f64>>> {
        let r = self.spec.factor_count();
        let mut c = vec![0.0; r];
        let mut c_prime = vec![0.0; r];
        for j in 0..r {
            let table = self.solvers[j].table(j, xi[j]).ok()?;
            let deriv = self.solvers[j].table_derivative(j, xi[j]).ok()?;
            for (s, p) in self.spec.factor(j).support() {
                c[j] += p * table.to_identity[s as usize];
                c_prime[j] += p * deriv[s as usize];
            }
        }
        let mut entries = vec![vec![0.0; r]; r];
        for i in 0..r {
            let denom = 1.0
                - (0..r)
                    .filter(|&j| j != i)
                    .map(|j| self.spec.weight(j) * z * c[j])
                    .sum::<f64>();
            if denom <= 0.0 {
                return None;
            }
            for j in 0..r {
                if j != i {
                    entries[i][j] = self.spec.weight(i) * z * self.spec.weight(j) * z
                        * c_prime[j]
                        / (denom * denom);
                }
            }
        }
        Some(entries)
    }

    /// Spectral radius of the fixed-point map's Jacobian at `xi`.
    fn xi_jacobian_rho(&self, z: f64, xi: &[f64]) -> Option<f64> {
        let entries = self.xi_jacobian(z, xi)?;
        let m = crate::pf::PFMatrix::new(entries, "xi-jacobian");
        crate::pf::pf_eigenvalue(&m).ok().map(|(v, _)| v)
    }

    /// One Newton step on xi - T(xi) = 0 from below: solve (I - J) d = delta.
    fn newton_candidate(&self, z: f64, xi: &[f64], delta: &[f64]) -> Option<Vec<f64>> {
        let r = self.spec.factor_count();
        let j = self.xi_jacobian(z, xi)?;
        let mut m = nalgebra::DMatrix::zeros(r, r);
        for a in 0..r {
            for b in 0..r {
                m[(a, b)] = if a == b { 1.0 } else { 0.0 } - j[a][b];
            }
        }
        let rhs = nalgebra::DVector::from_iterator(r, delta.iter().copied());
        let d = m.lu().solve(&rhs)?;
        if d.iter().any(|&v| !v.is_finite()) {
            return None;
        }
        Some(
            xi.iter()
                .zip(d.iter())
                .map(|(&x, &dx)| (x + dx).max(0.0))
                .collect(),
        )
    }

    /// Post-fixed-point probe: does one sweep pull `cand` down? If so a fixed
    /// point exists below `cand` and z is on the convergent side.
    fn bump_certificate(&self, z: f64, x: &[f64], delta: &[f64], k: f64) -> bool {
        let cand: Vec<f64> = x
            .iter()
            .zip(delta)
            .map(|(&xi, &d)| xi + k * d + 1e-14 * (1.0 + xi))
            .collect();
        match self.xi_sweep(z, &cand) {
            SweepOutcome::Next(swept) => swept.iter().zip(&cand).all(|(s, c)| s <= c),
            SweepOutcome::Diverged(_) => false,
        }
    }

    /// Bump probe along the Perron direction of the Jacobian; off the Perron
    /// direction one component of the probe is pushed back up even below the
    /// fixed point, so the direction matters.
    fn perron_bump_certificate(&self, z: f64, x: &[f64], width: f64) -> bool {
        let Some(j) = self.xi_jacobian(z, x) else {
            return false;
        };
        let m = crate::pf::PFMatrix::new(j, "xi-jacobian");
        let Ok((_, v)) = crate::pf::pf_eigenvalue(&m) else {
            return false;
        };
        let deltas: Vec<f64> = v.iter().map(|&c| c * width).collect();
        self.bump_certificate(z, x, &deltas, 1.0)
    }

    /// Certified classification of z against R, for the radius bisection.
    ///
    /// Convergence is certified by a post-fixed-point probe (the minimal
    /// fixed point then exists below it); divergence by the iteration
    /// crossing a factor radius or denominator, or by the Jacobian of the
    /// map reaching spectral radius 1 at an orbit point, which convexity
    /// forbids below a fixed point. Budget exhaustion without either
    /// certificate is Undecided.
    pub(crate) fn classify_z(&self, z: f64) -> ZClass {
        let cfg = &self.cfg;
        let r = self.spec.factor_count();
        let mut x = vec![0.0; r];
        // Two-steps-ago iterate: the sweep map can alternate with period 2,
        // so extrapolation works on the squared map.
        let mut x2 = vec![0.0; r];
        let mut x4 = vec![0.0; r];
        for n in 1..=cfg.max_iter {
            let next = match self.xi_sweep(z, &x) {
                SweepOutcome::Next(v) => v,
                SweepOutcome::Diverged(_) => return ZClass::Divergent,
            };
            if next.iter().any(|&v| v > cfg.divergence_threshold) {
                return ZClass::Divergent;
            }
            let residual = x
                .iter()
                .zip(&next)
                .map(|(a, b)| (b - a).abs())
                .fold(0.0, f64::max);
            x = next;
            if n % 2 == 0 {
                if n % 32 == 0 {
                    if let Some(rho) = self.xi_jacobian_rho(z, &x) {
                        if rho >= 1.0 + 1e-10 {
                            return ZClass::Divergent;
                        }
                    }
                    // Per-component geometric tail of the squared map:
                    // gap_i ~ d2_i * r_i / (1 - r_i).
                    let mut gap = vec![0.0; r];
                    let mut usable = n >= 6;
                    for i in 0..r {
                        let d1 = x2[i] - x4[i];
                        let d2 = x[i] - x2[i];
                        if d1 > 0.0 && d2 > 0.0 && d2 < d1 {
                            let rt = d2 / d1;
                            gap[i] = d2 * rt / (1.0 - rt);
                        } else if d2 > 0.0 {
                            usable = false;
                        }
                    }
                    if usable {
                        let deltas: Vec<f64> = gap.iter().map(|&g| g.max(residual)).collect();
                        for kk in [2.0, 16.0] {
                            if self.bump_certificate(z, &x, &deltas, kk) {
                                return ZClass::Convergent;
                            }
                        }
                        let scale = deltas.iter().fold(0.0f64, |m, &d| m.max(d));
                        for kk in [2.0, 16.0] {
                            if self.perron_bump_certificate(z, &x, kk * scale) {
                                return ZClass::Convergent;
                            }
                        }
                    }
                }
                x4 = std::mem::replace(&mut x2, x.clone());
            }
            if residual < cfg.fixed_point_tol {
                for kk in [4.0, 64.0, 1024.0] {
                    if self.perron_bump_certificate(z, &x, kk * residual.max(1e-15)) {
                        return ZClass::Convergent;
                    }
                }
            }
        }
        ZClass::Undecided
    }

    /// `xi_solve` that insists on convergence.
    pub fn xi_converged(&self, z: f64) -> Result<XiSolution, GenfunError> {
        let sol = self.xi_solve(z)?;
        if !sol.converged {
            return Err(GenfunError::Diverged { z });
        }
        Ok(sol)
    }

    /// Green function of the product at the root, G(e, e | z), recovered from
    /// the first-passage decomposition at a converged xi vector.
    pub fn green_ee(&self, sol: &XiSolution) -> Result<f64, GenfunError> {
        if !sol.converged {
            return Err(GenfunError::XiNotConverged(sol.z));
        }
        let mut total = 0.0;
        for j in 0..self.spec.factor_count() {
            let table = self.solvers[j].table(j, sol.xi[j])?;
            let inner: f64 = self
                .spec
                .factor(j)
                .support()
                .map(|(s, p)| p * table.to_identity[s as usize])
                .sum();
            total += self.spec.weight(j) * sol.z * inner;
        }
        Ok(1.0 / (1.0 - total))
    }

    /// Absolute gaps |alpha_i z G(z) - xi_i(z) G_i(xi_i(z))| per factor.
    pub fn green_identity_gaps(&self, sol: &XiSolution) -> Result<Vec<f64>, GenfunError> {
        let g = self.green_ee(sol)?;
        let mut gaps = Vec::with_capacity(self.spec.factor_count());
        for i in 0..self.spec.factor_count() {
            let table = self.solvers[i].table(i, sol.xi[i])?;
            let gi = self.solvers[i].green(&table);
            gaps.push((self.spec.weight(i) * sol.z * g - sol.xi[i] * gi).abs());
        }
        Ok(gaps)
    }
}
