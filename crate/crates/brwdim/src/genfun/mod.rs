//! Analytic layer: first-visit generating functions, the xi fixed-point
//! system, the Green radius R, the dimension roots z* and z*_S, phase
//! classification, sweeps, and the critical-exponent probe.

mod dims;
mod factor;
mod radius;
mod scripts;
mod sweep;
mod xi;
mod zstar;

pub use dims::{DimensionReport, PhaseFlag, PhaseReport};
pub use factor::FactorFirstVisit;
pub use radius::RadiusReport;
pub use sweep::{truncation_convergence, ExponentFit, SweepReport, SweepRow};
pub use xi::XiSolution;
pub use zstar::{ZStar, ZStarS};

pub(crate) use factor::FactorSolver;

use crate::group::FreeProduct;
use std::sync::OnceLock;

/// Numeric knobs shared by the analytic operations. All scalar computation is
/// double precision.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Sup-norm residual at which the xi iteration is declared converged.
    pub fixed_point_tol: f64,
    /// Bracket width for every bisection (z*, z*_S, and R).
    pub bisection_tol: f64,
    /// Iteration budget for the xi fixed point.
    pub max_iter: u64,
    /// Any xi iterate above this is divergence.
    pub divergence_threshold: f64,
    /// Relative per-sweep growth that counts as a divergence strike.
    pub growth_factor: f64,
    /// Plain sweeps before the damped secant tail jump is tried.
    pub accel_after: u64,
    /// Upper-bracket cap for the R doubling search.
    pub r_cap: f64,
    /// Word-length cap for the path-series oracle dynamic programs.
    pub oracle_ball_cap: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            fixed_point_tol: 1e-13,
            bisection_tol: 1e-12,
            max_iter: 100_000,
            divergence_threshold: 1e9,
            growth_factor: 10.0,
            accel_after: 10_000,
            r_cap: 65_536.0,
            oracle_ball_cap: 32,
        }
    }
}

/// Reusable analytic context for one free product: factor linear systems are
/// decomposed once, R is computed at most once. All methods take `&self`, so
/// an analyzer can be shared across worker threads.
pub struct Analyzer<'a> {
    pub(crate) spec: &'a FreeProduct,
    pub(crate) cfg: SolverConfig,
    pub(crate) solvers: Vec<FactorSolver>,
    pub(crate) radius_cache: OnceLock<RadiusReport>,
}

impl<'a> Analyzer<'a> {
    pub fn new(spec: &'a FreeProduct, cfg: SolverConfig) -> Analyzer<'a> {
        let solvers = spec.factors().iter().map(FactorSolver::new).collect();
        Analyzer {
            spec,
            cfg,
            solvers,
            radius_cache: OnceLock::new(),
        }
    }

    pub fn spec(&self) -> &FreeProduct {
        self.spec
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Exact per-factor first-visit table at evaluation point `w`.
    pub fn factor_first_visit(
        &self,
        factor: usize,
        w: f64,
    ) -> Result<FactorFirstVisit, crate::error::GenfunError> {
        self.solvers[factor].table(factor, w)
    }

    /// Radius of convergence of factor `i`'s own first-visit system.
    pub fn factor_radius(&self, factor: usize) -> f64 {
        self.solvers[factor].radius()
    }

    /// Largest growth parameter at which the xi iteration resolves cleanly
    /// in double precision. Within a relative sliver below R the square-root
    /// branch point makes fixed-point existence depend on sub-epsilon signs;
    /// grids and endpoint evaluations use this edge instead of R itself.
    pub fn resolvable_edge(&self) -> Result<f64, crate::error::GenfunError> {
        let r = self.radius()?;
        Ok(r.lo - 1e-3 * (r.lo - 1.0))
    }
}
