use super::{Analyzer, XiSolution};
use crate::error::GenfunError;
use crate::group::SphereTail;

/// Root of sum_i F_i^+(lambda | z) / (1 + F_i^+(lambda | z)) = 1.
#[derive(Debug, Clone)]
pub struct ZStar {
    pub lambda: f64,
    pub value: f64,
    pub bracket: (f64, f64),
    /// Left-hand side minus one, evaluated at the returned root.
    pub residual: f64,
    pub xi: XiSolution,
}

/// Root of sum_i S_i^+(z) / (1 + S_i^+(z)) = 1.
#[derive(Debug, Clone)]
pub struct ZStarS {
    pub value: f64,
    pub bracket: (f64, f64),
    pub residual: f64,
    /// Factors whose sphere series used a closed-form tail.
    pub tails_used: Vec<usize>,
}

/// f/(1+f), saturating at 1 when the series value overflows.
fn fraction(fi: f64) -> f64 {
    if fi.is_finite() {
        fi / (1.0 + fi)
    } else {
        1.0
    }
}

fn bisect_increasing(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    mut g: impl FnMut(f64) -> f64,
) -> (f64, (f64, f64)) {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), (lo, hi))
}

impl Analyzer<'_> {
    /// The dimension root z*(lambda). The left-hand side is strictly
    /// increasing in z, so the root is bracketed by growing the upper end and
    /// then bisected.
    pub fn z_star(&self, lambda: f64) -> Result<ZStar, GenfunError> {
        let xi = self.xi_converged(lambda)?;
        self.z_star_at(xi)
    }

    pub(crate) fn z_star_at(&self, xi: XiSolution) -> Result<ZStar, GenfunError> {
        let tables = self.tables_at(&xi)?;
        let g = |z: f64| -> f64 {
            let mut acc = 0.0;
            for (i, table) in tables.iter().enumerate() {
                acc += fraction(self.fi_plus_from_table(table, i, z));
            }
            acc - 1.0
        };
        let mut hi = 1.0;
        let mut guard = 0;
        while g(hi) < 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 60 {
                return Err(GenfunError::NoRoot);
            }
        }
        let (value, bracket) = bisect_increasing(0.0, hi, self.cfg.bisection_tol, g);
        let residual = g(value);
        // Lemma-level sanity: the root must sit below every factor radius.
        for i in 0..self.spec.factor_count() {
            let r_i = self.fi_plus_radius(&xi, i)?;
            if value >= r_i {
                return Err(GenfunError::NoRoot);
            }
        }
        Ok(ZStar {
            lambda: xi.z,
            value,
            bracket,
            residual,
            xi,
        })
    }

    /// The boundary root z*_S from the sphere series, using exact counts for
    /// finite factors and the constructor's closed-form tail for truncated
    /// ones.
    pub fn z_star_s(&self) -> Result<ZStarS, GenfunError> {
        let mut tails_used = Vec::new();
        let mut evals: Vec<Box<dyn Fn(f64) -> f64>> = Vec::new();
        for (i, f) in self.spec.factors().iter().enumerate() {
            if f.is_truncated() {
                let tail: SphereTail = f
                    .sphere_tail()
                    .ok_or(GenfunError::MissingSphereTail { factor: i })?;
                tails_used.push(i);
                evals.push(Box::new(move |z| tail.eval(z)));
            } else {
                let max_len = (1..f.order() as u32).map(|g| f.length(g)).max().unwrap_or(0);
                let counts = f.sphere_sizes(max_len);
                evals.push(Box::new(move |z| {
                    counts
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(m, &c)| c as f64 * z.powi(m as i32))
                        .sum()
                }));
            }
        }
        let has_tail = !tails_used.is_empty();
        let g = |z: f64| -> f64 {
            let mut acc = 0.0;
            for e in &evals {
                acc += fraction(e(z));
            }
            acc - 1.0
        };
        // Closed-form tails diverge at z = 1, so the root lies in (0, 1); for
        // all-finite products the excluded degenerate case guarantees g(1) >= 0.
        let mut hi = if has_tail { 1.0 - 1e-12 } else { 1.0 };
        let mut guard = 0;
        while g(hi) < 0.0 {
            if has_tail {
                return Err(GenfunError::NoRoot);
            }
            hi *= 2.0;
            guard += 1;
            if guard > 60 {
                return Err(GenfunError::NoRoot);
            }
        }
        let (value, bracket) = bisect_increasing(0.0, hi, self.cfg.bisection_tol, g);
        Ok(ZStarS {
            value,
            bracket,
            residual: g(value),
            tails_used,
        })
    }
}
