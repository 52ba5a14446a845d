use super::{Analyzer, RadiusReport, SolverConfig, XiSolution, ZStar, ZStarS};
use crate::error::GenfunError;

/// Whether the branching random walk accumulates at ends of one factor's
/// boundary copies.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFlag {
    pub factor: usize,
    /// xi_i(lambda) when it is defined (transient regime).
    pub xi: Option<f64>,
    /// Lambda meets the factor's boundary pieces: xi_i(lambda) > 1, or the
    /// recurrent regime with an infinite factor.
    pub hits_omega_i: bool,
    /// Finite factors have no ends of their own.
    pub factor_is_finite: bool,
}

/// Per-factor phase flags plus the global regime.
#[derive(Debug, Clone)]
pub struct PhaseReport {
    pub lambda: f64,
    pub radius: RadiusReport,
    pub transient: bool,
    pub flags: Vec<PhaseFlag>,
}

/// Everything the dimension pipeline knows at one growth parameter.
#[derive(Debug, Clone)]
pub struct DimensionReport {
    pub lambda: f64,
    pub radius: RadiusReport,
    /// Root of the F-series equation; absent in the recurrent regime.
    pub z_star: Option<ZStar>,
    pub z_star_s: ZStarS,
    /// HD(Lambda) = log z* / log a, clamped at 0; equals hd_omega beyond R.
    pub phi: f64,
    /// HD(Omega) = log z*_S / log a.
    pub hd_omega: f64,
    pub flags: Vec<PhaseFlag>,
    /// Upper bound for the dimension of each factor's boundary piece,
    /// log R(F_i^+) / log a clamped at 0.
    pub omega_piece_bounds: Vec<f64>,
    /// The per-factor series radii behind those bounds.
    pub fi_plus_radii: Vec<f64>,
    pub depths: Vec<Option<u32>>,
    pub tolerances: SolverConfig,
}

impl Analyzer<'_> {
    fn flags_from(&self, xi: Option<&XiSolution>, transient: bool) -> Vec<PhaseFlag> {
        (0..self.spec.factor_count())
            .map(|i| {
                let finite = !self.spec.factor(i).is_truncated();
                let xi_i = xi.map(|s| s.xi[i]);
                let hits = if finite {
                    false
                } else if transient {
                    xi_i.is_some_and(|v| v > 1.0)
                } else {
                    // Recurrent: Lambda = Omega, so every infinite factor
                    // contributes its ends.
                    true
                };
                PhaseFlag {
                    factor: i,
                    xi: xi_i,
                    hits_omega_i: hits,
                    factor_is_finite: finite,
                }
            })
            .collect()
    }

    /// Theorem-level phase classification at growth parameter `lambda > 1`.
    pub fn phase_classify(&self, lambda: f64) -> Result<PhaseReport, GenfunError> {
        if lambda <= 1.0 {
            return Err(GenfunError::LambdaOutOfRange {
                lambda,
                low: 1.0 + f64::EPSILON,
                high: f64::INFINITY,
            });
        }
        let radius = self.radius()?;
        let transient = lambda <= radius.value;
        let xi = if transient {
            Some(self.xi_converged(lambda)?)
        } else {
            None
        };
        Ok(PhaseReport {
            lambda,
            radius: radius.clone(),
            transient,
            flags: self.flags_from(xi.as_ref(), transient),
        })
    }

    /// Full dimension report at `lambda`. Inside the transient window the
    /// accumulation-set dimension comes from z*; beyond R it equals HD(Omega).
    pub fn dimensions(&self, lambda: f64) -> Result<DimensionReport, GenfunError> {
        if lambda < 1.0 {
            return Err(GenfunError::LambdaOutOfRange {
                lambda,
                low: 1.0,
                high: f64::INFINITY,
            });
        }
        let radius = self.radius()?;
        let z_star_s = self.z_star_s()?;
        let log_a = self.spec.metric_base().ln();
        let hd_omega = z_star_s.value.ln() / log_a;
        let depths = self.spec.factors().iter().map(|f| f.depth()).collect();
        let transient = lambda <= radius.value;
        if !transient {
            let flags = self.flags_from(None, false);
            let n = self.spec.factor_count();
            return Ok(DimensionReport {
                lambda,
                radius,
                z_star: None,
                z_star_s,
                phi: hd_omega,
                hd_omega,
                flags,
                omega_piece_bounds: vec![hd_omega; n],
                fi_plus_radii: vec![f64::NAN; n],
                depths,
                tolerances: self.cfg.clone(),
            });
        }
        let z_star = self.z_star(lambda)?;
        let phi = (z_star.value.ln() / log_a).max(0.0);
        let flags = self.flags_from(Some(&z_star.xi), true);
        let mut fi_plus_radii = Vec::new();
        let mut omega_piece_bounds = Vec::new();
        for i in 0..self.spec.factor_count() {
            let r_i = self.fi_plus_radius(&z_star.xi, i)?;
            fi_plus_radii.push(r_i);
            let bound = if r_i.is_finite() {
                (r_i.ln() / log_a).max(0.0)
            } else {
                0.0
            };
            omega_piece_bounds.push(bound);
        }
        Ok(DimensionReport {
            lambda,
            radius,
            z_star: Some(z_star),
            z_star_s,
            phi,
            hd_omega,
            flags,
            omega_piece_bounds,
            fi_plus_radii,
            depths,
            tolerances: self.cfg.clone(),
        })
    }
}
