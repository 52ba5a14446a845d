use super::{Analyzer, SolverConfig};
use crate::error::GenfunError;
use crate::group::FreeProduct;
use rayon::prelude::*;

/// One grid point of a lambda sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub lambda: f64,
    pub z_star: f64,
    pub phi: f64,
    /// Per-factor boundary-piece flags (xi_i > 1).
    pub flags: Vec<bool>,
    /// Phi strictly exceeds the previous row.
    pub increased: bool,
    /// The step to the previous row is within the secant-modulus bound.
    pub continuous: bool,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub hd_omega: f64,
    pub radius: f64,
    /// Gap HD(Omega)/2 - Phi(last row), the endpoint report.
    pub half_gap_at_end: f64,
    pub monotone: bool,
    pub continuous: bool,
}

/// Least-squares exponent of Phi(R) - Phi(lambda) ~ C (R - lambda)^c.
#[derive(Debug, Clone)]
pub struct ExponentFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    /// (log eps, log diff) points that entered the fit.
    pub points: Vec<(f64, f64)>,
    pub phi_at_r: f64,
    pub r_used: f64,
}

/// Plain least squares on y = c x + b; returns (c, b, rms residual).
pub(crate) fn fit_line(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let c = (n * sxy - sx * sy) / denom;
    let b = (sy - c * sx) / n;
    let rms = (points
        .iter()
        .map(|&(x, y)| (y - (c * x + b)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (c, b, rms)
}

impl Analyzer<'_> {
    /// Phi over a sorted grid inside [1, R], with monotonicity and
    /// grid-level continuity diagnostics. Rows are computed in parallel and
    /// are deterministic per row.
    pub fn phi_sweep(&self, grid: &[f64]) -> Result<SweepReport, GenfunError> {
        let radius = self.radius()?;
        for window in grid.windows(2) {
            if window[1] <= window[0] {
                return Err(GenfunError::LambdaOutOfRange {
                    lambda: window[1],
                    low: window[0],
                    high: f64::INFINITY,
                });
            }
        }
        if let (Some(&first), Some(&last)) = (grid.first(), grid.last()) {
            if first < 1.0 || last > radius.value {
                return Err(GenfunError::LambdaOutOfRange {
                    lambda: if first < 1.0 { first } else { last },
                    low: 1.0,
                    high: radius.value,
                });
            }
        }
        let z_star_s = self.z_star_s()?;
        let log_a = self.spec.metric_base().ln();
        let hd_omega = z_star_s.value.ln() / log_a;
        let computed: Vec<(f64, f64, Vec<bool>)> = grid
            .par_iter()
            .map(|&lambda| -> Result<_, GenfunError> {
                let z = self.z_star(lambda)?;
                let phi = (z.value.ln() / log_a).max(0.0);
                let flags = z.xi.xi.iter().map(|&v| v > 1.0).collect();
                Ok((z.value, phi, flags))
            })
            .collect::<Result<_, _>>()?;
        let mut rows: Vec<SweepRow> = Vec::with_capacity(grid.len());
        for (k, &lambda) in grid.iter().enumerate() {
            let (z_star, phi, flags) = computed[k].clone();
            rows.push(SweepRow {
                lambda,
                z_star,
                phi,
                flags,
                increased: k == 0 || phi > rows[k - 1].phi,
                continuous: true,
            });
        }
        // Continuity at grid level: a step may not exceed 8x the larger of
        // its neighbouring secant slopes (the square-root approach to R keeps
        // the ratio of consecutive secants bounded).
        let slopes: Vec<f64> = rows
            .windows(2)
            .map(|w| (w[1].phi - w[0].phi) / (w[1].lambda - w[0].lambda))
            .collect();
        for k in 1..slopes.len() {
            let neighbour = slopes[k - 1].max(if k + 1 < slopes.len() {
                slopes[k + 1]
            } else {
                0.0
            });
            if slopes[k] > 8.0 * neighbour.max(1e-12) {
                rows[k + 1].continuous = false;
            }
        }
        let monotone = rows.iter().skip(1).all(|r| r.increased);
        let continuous = rows.iter().all(|r| r.continuous);
        let half_gap_at_end = rows
            .last()
            .map(|r| hd_omega / 2.0 - r.phi)
            .unwrap_or(f64::NAN);
        Ok(SweepReport {
            rows,
            hd_omega,
            radius: radius.value,
            half_gap_at_end,
            monotone,
            continuous,
        })
    }

    /// Exponent of the dimension drop near R: least-squares slope of
    /// log(Phi(R) - Phi(lambda)) against log(R - lambda). The estimate is
    /// reported, never asserted against the dichotomy.
    pub fn critical_exponent_fit(
        &self,
        eps_grid: Option<&[f64]>,
    ) -> Result<ExponentFit, GenfunError> {
        // Evaluate at the resolvable edge just inside the certified bracket.
        let r_used = self.resolvable_edge()?;
        let log_a = self.spec.metric_base().ln();
        let default_grid: Vec<f64> = (1..=9)
            .map(|k| (r_used - 1.0) * 10f64.powf(-(k as f64) * 0.25))
            .collect();
        let eps: Vec<f64> = match eps_grid {
            Some(g) => g.to_vec(),
            None => default_grid,
        };
        let phi_at = |lambda: f64| -> Result<f64, GenfunError> {
            let z = self.z_star(lambda)?;
            Ok((z.value.ln() / log_a).max(0.0))
        };
        let phi_r = phi_at(r_used)?;
        let mut points = Vec::with_capacity(eps.len());
        for &e in &eps {
            let lambda = r_used - e;
            if lambda <= 1.0 {
                continue;
            }
            let diff = phi_r - phi_at(lambda)?;
            if diff <= 1e-12 {
                return Err(GenfunError::InsufficientResolution);
            }
            points.push((e.ln(), diff.ln()));
        }
        if points.len() < 3 {
            return Err(GenfunError::InsufficientResolution);
        }
        let (c, b, rms) = fit_line(&points);
        Ok(ExponentFit {
            exponent: c,
            intercept: b,
            residual: rms,
            points,
            phi_at_r: phi_r,
            r_used,
        })
    }
}

/// z*_d over a ladder of truncation depths at fixed lambda. Strictly
/// decreasing when a truncated factor is present; constant for all-finite
/// specs. A non-monotone sequence is an internal-consistency failure.
pub fn truncation_convergence(
    spec: &FreeProduct,
    depths: &[u32],
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<Vec<(u32, f64)>, GenfunError> {
    let mut out = Vec::with_capacity(depths.len());
    for &d in depths {
        let respec = spec.at_depth(d)?;
        let analyzer = Analyzer::new(&respec, cfg.clone());
        let z = analyzer.z_star(lambda)?;
        out.push((d, z.value));
    }
    let has_truncated = spec.factors().iter().any(|f| f.is_truncated());
    let tol = cfg.bisection_tol * 10.0;
    for w in out.windows(2) {
        let decreasing = w[1].1 < w[0].1 - tol;
        let constant = (w[1].1 - w[0].1).abs() <= tol;
        let ok = if has_truncated { decreasing } else { constant };
        if !ok {
            return Err(GenfunError::NonMonotoneTruncation(
                out.iter().map(|&(_, z)| z).collect(),
            ));
        }
    }
    Ok(out)
}
