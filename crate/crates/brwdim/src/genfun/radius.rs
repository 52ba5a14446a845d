use super::xi::ZClass;
use super::Analyzer;
use crate::error::GenfunError;

/// The Green-function radius R with its certified bracket: a fixed point of
/// the xi system is certified to exist at `lo` and certified absent at `hi`.
#[derive(Debug, Clone)]
pub struct RadiusReport {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    /// Midpoints that exhausted their budget without a certificate. The
    /// bracket only ever moves on certified classifications, so undecided
    /// points widen the final bracket instead of skewing it.
    pub undecided: u32,
}

impl RadiusReport {
    pub fn bracket_width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl Analyzer<'_> {
    /// R by bisection on the convergence/divergence boundary of the xi
    /// iteration; the initial bracket [1, hi] comes from doubling.
    pub fn radius(&self) -> Result<RadiusReport, GenfunError> {
        if let Some(r) = self.radius_cache.get() {
            return Ok(r.clone());
        }
        let cfg = &self.cfg;
        let mut lo = 1.0;
        let mut undecided = 0u32;
        match self.classify_z(lo) {
            ZClass::Convergent => {}
            ZClass::Divergent => return Err(GenfunError::Diverged { z: 1.0 }),
            ZClass::Undecided => {
                return Err(GenfunError::SlowConvergence {
                    iterations: cfg.max_iter,
                    residual: f64::NAN,
                })
            }
        }
        let mut hi = 2.0;
        loop {
            match self.classify_z(hi) {
                ZClass::Divergent => break,
                ZClass::Convergent => lo = hi,
                ZClass::Undecided => undecided += 1,
            }
            hi *= 2.0;
            if hi > cfg.r_cap {
                return Err(GenfunError::RExceedsCap { cap: cfg.r_cap });
            }
        }
        while hi - lo > cfg.bisection_tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match self.classify_z(mid) {
                ZClass::Divergent => {
                    hi = mid;
                    continue;
                }
                ZClass::Convergent => {
                    lo = mid;
                    continue;
                }
                ZClass::Undecided => undecided += 1,
            }
            // Salvage with quarter points; stop once neither side certifies.
            let mut progressed = false;
            let q1 = lo + 0.25 * (hi - lo);
            if q1 > lo && q1 < hi {
                match self.classify_z(q1) {
                    ZClass::Convergent => {
                        lo = q1;
                        progressed = true;
                    }
                    ZClass::Divergent => {
                        hi = q1;
                        progressed = true;
                    }
                    ZClass::Undecided => undecided += 1,
                }
            }
            let q3 = lo + 0.75 * (hi - lo);
            if q3 > lo && q3 < hi {
                match self.classify_z(q3) {
                    ZClass::Convergent => {
                        lo = lo.max(q3);
                        progressed = true;
                    }
                    ZClass::Divergent => {
                        hi = hi.min(q3);
                        progressed = true;
                    }
                    ZClass::Undecided => undecided += 1,
                }
            }
            if !progressed {
                break;
            }
        }
        let report = RadiusReport {
            value: 0.5 * (lo + hi),
            lo,
            hi,
            undecided,
        };
        debug_assert!(report.value > 1.0, "R must exceed 1");
        let _ = self.radius_cache.set(report.clone());
        Ok(report)
    }
}
