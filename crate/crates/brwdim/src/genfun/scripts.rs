use super::{Analyzer, FactorFirstVisit, XiSolution};
use crate::error::GenfunError;
use crate::group::Word;

impl Analyzer<'_> {
    /// Per-factor tables at the converged xi vector.
    pub(crate) fn tables_at(&self, sol: &XiSolution) -> Result<Vec<FactorFirstVisit>, GenfunError> {
        if !sol.converged {
            return Err(GenfunError::XiNotConverged(sol.z));
        }
        (0..self.spec.factor_count())
            .map(|j| self.solvers[j].table(j, sol.xi[j]))
            .collect()
    }

    /// The weight carried by a single block in the product formula: for an
    /// untruncated factor this is F_i(e, g | xi_i), via left invariance; for a
    /// truncated factor it is the last-visit value L_i(e, g | xi_i) of the
    /// killed walk, whose series define the truncated dimension root.
    fn block_weight(&self, table: &FactorFirstVisit, factor: usize, g: u32) -> f64 {
        let f = self.spec.factor(factor);
        if f.is_truncated() {
            table.to_identity[g as usize]
        } else {
            table.to_identity[f.inv(g) as usize]
        }
    }

    /// F(e, x | lambda) as the product of per-block first-visit values.
    pub fn f_word(&self, sol: &XiSolution, x: &Word) -> Result<f64, GenfunError> {
        let tables = self.tables_at(sol)?;
        let mut acc = 1.0;
        for &(i, g) in x.blocks() {
            acc *= self.block_weight(&tables[i as usize], i as usize, g);
        }
        Ok(acc)
    }

    /// The factor series F_i^+(lambda | z) = sum over the factor's
    /// non-identity elements of F(e, x | lambda) z^l(x), a finite sum over the
    /// live elements (the truncated analogue is tagged by the factor depth).
    pub fn script_fi_plus(&self, sol: &XiSolution, factor: usize, z: f64) -> Result<f64, GenfunError> {
        let table = self.solvers[factor].table(factor, sol.xi[factor])?;
        if !sol.converged {
            return Err(GenfunError::XiNotConverged(sol.z));
        }
        Ok(self.fi_plus_from_table(&table, factor, z))
    }

    pub(crate) fn fi_plus_from_table(
        &self,
        table: &FactorFirstVisit,
        factor: usize,
        z: f64,
    ) -> f64 {
        let f = self.spec.factor(factor);
        let mut acc = 0.0;
        for g in 1..f.order() as u32 {
            acc += self.block_weight(table, factor, g) * z.powi(f.length(g) as i32);
        }
        acc
    }

    /// Per-length F-sums of one factor: b[m] = sum_{l(x)=m} F(e, x | lambda).
    pub(crate) fn factor_length_sums(&self, table: &FactorFirstVisit, factor: usize) -> Vec<f64> {
        let f = self.spec.factor(factor);
        let max_len = (1..f.order() as u32).map(|g| f.length(g)).max().unwrap_or(0);
        let mut sums = vec![0.0; max_len as usize + 1];
        for g in 1..f.order() as u32 {
            sums[f.length(g) as usize] += self.block_weight(table, factor, g);
        }
        sums
    }

    /// Radius of convergence of F_i^+ for the underlying factor: infinite for
    /// finite factors; for truncated factors, when xi_i < 1 the series
    /// converges at least to 1, otherwise 1/R is estimated as the Fekete
    /// infimum of the available n-th roots of the per-length F-sums.
    pub fn fi_plus_radius(&self, sol: &XiSolution, factor: usize) -> Result<f64, GenfunError> {
        let f = self.spec.factor(factor);
        if !f.is_truncated() {
            return Ok(f64::INFINITY);
        }
        let table = self.solvers[factor].table(factor, sol.xi[factor])?;
        let sums = self.factor_length_sums(&table, factor);
        let mut inv_radius: f64 = 0.0;
        let mut fekete = f64::INFINITY;
        for (m, &b) in sums.iter().enumerate().skip(1) {
            if b > 0.0 {
                fekete = fekete.min(b.powf(1.0 / m as f64));
            }
        }
        if fekete.is_finite() {
            inv_radius = fekete;
        }
        let mut radius = if inv_radius > 0.0 {
            1.0 / inv_radius
        } else {
            f64::INFINITY
        };
        if sol.xi[factor] < 1.0 {
            radius = radius.max(1.0);
        }
        Ok(radius)
    }

    /// Coefficients H_m = sum_{l(x)=m} F(e, x | lambda) of the full product
    /// series, for m = 0..=m_max, via the block-composition recurrence.
    pub fn h_coefficients(&self, sol: &XiSolution, m_max: u32) -> Result<Vec<f64>, GenfunError> {
        let tables = self.tables_at(sol)?;
        let n = m_max as usize + 1;
        // C_i = P_i / (1 + P_i); H = 1 / (1 - sum_i C_i).
        let mut total = vec![0.0; n];
        for (i, table) in tables.iter().enumerate() {
            let sums = self.factor_length_sums(table, i);
            let mut p = vec![0.0; n];
            for (m, &b) in sums.iter().enumerate().take(n) {
                if m >= 1 {
                    p[m] = b;
                }
            }
            let mut one_plus = p.clone();
            one_plus[0] += 1.0;
            let c = series_div(&p, &one_plus);
            for m in 0..n {
                total[m] += c[m];
            }
        }
        let mut denom = vec![0.0; n];
        denom[0] = 1.0;
        for m in 0..n {
            denom[m] -= total[m];
        }
        let mut one = vec![0.0; n];
        one[0] = 1.0;
        Ok(series_div(&one, &denom))
    }
}

/// Coefficients of a(z)/b(z) with b(0) != 0, to the common length.
fn series_div(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for m in 0..n {
        let mut acc = a[m];
        for k in 1..=m {
            acc -= b[k] * out[m - k];
        }
        out[m] = acc / b[0];
    }
    out
}
