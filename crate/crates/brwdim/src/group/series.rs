use super::FreeProduct;
use crate::error::GroupError;

/// Truncated integer power series, coefficient of z^m at index m.
#[derive(Debug, Clone, PartialEq)]
pub struct IntSeries(pub Vec<i128>);

impl IntSeries {
    pub fn zero(len: usize) -> IntSeries {
        IntSeries(vec![0; len])
    }

    pub fn add(&self, other: &IntSeries) -> IntSeries {
        IntSeries(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn mul(&self, other: &IntSeries) -> IntSeries {
        let n = self.0.len();
        let mut out = vec![0i128; n];
        for (i, &a) in self.0.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.0.iter().take(n - i).enumerate() {
                out[i + j] += a * b;
            }
        }
        IntSeries(out)
    }

    /// Multiplicative inverse; requires constant term +-1.
    pub fn inverse(&self) -> IntSeries {
        let n = self.0.len();
        assert!(self.0[0] == 1 || self.0[0] == -1, "constant term must be a unit");
        let c0 = self.0[0];
        let mut out = vec![0i128; n];
        out[0] = c0;
        for m in 1..n {
            let mut acc = 0i128;
            for k in 1..=m {
                acc += self.0[k] * out[m - k];
            }
            out[m] = -c0 * acc;
        }
        IntSeries(out)
    }
}

/// Sphere tables for a free product, cross-checked two ways.
#[derive(Debug, Clone)]
pub struct SphereCounts {
    /// S_i(m) per factor, m = 0..=m_max.
    pub per_factor: Vec<Vec<u64>>,
    /// S(m) for the product, m = 0..=m_max.
    pub product: Vec<u64>,
}

/// S_i(m) and S(m), computed both by enumerating the ball and by the
/// block-composition recurrence on the factor sphere series; the two must
/// agree exactly.
pub fn sphere_counts(spec: &FreeProduct, m_max: u32) -> Result<SphereCounts, GroupError> {
    let per_factor: Vec<Vec<u64>> = spec
        .factors()
        .iter()
        .map(|f| f.sphere_sizes(m_max))
        .collect();

    // Recurrence: S(z) = 1 / (1 - sum_i B_i/(1+B_i)) with B_i the factor series.
    let n = m_max as usize + 1;
    let mut total = IntSeries::zero(n);
    for counts in &per_factor {
        let mut b = IntSeries::zero(n);
        for (m, &c) in counts.iter().enumerate().skip(1) {
            b.0[m] = c as i128;
        }
        let mut one_plus = b.clone();
        one_plus.0[0] += 1;
        total = total.add(&b.mul(&one_plus.inverse()));
    }
    let mut denom = IntSeries::zero(n);
    denom.0[0] = 1;
    for m in 0..n {
        denom.0[m] -= total.0[m];
    }
    let product_series = denom.inverse();

    // Enumeration side.
    let ball = spec.ball_enumerate(m_max)?;
    let mut enumerated = vec![0u64; n];
    for w in &ball {
        enumerated[spec.word_length(w) as usize] += 1;
    }

    for m in 0..n {
        let rec = product_series.0[m];
        if rec < 0 || enumerated[m] != rec as u64 {
            return Err(GroupError::SphereMismatch {
                m: m as u32,
                enumerated: enumerated[m],
                recurrence: rec.max(0) as u64,
            });
        }
    }
    Ok(SphereCounts {
        per_factor,
        product: enumerated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FactorGroup;

    fn z3z2() -> FreeProduct {
        let f1 = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
        FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap()
    }

    #[test]
    fn z3z2_small_spheres() {
        let counts = sphere_counts(&z3z2(), 6).unwrap();
        assert_eq!(counts.product[0], 1);
        assert_eq!(counts.product[1], 3);
        assert_eq!(counts.per_factor[0][1], 2);
        assert_eq!(counts.per_factor[1][1], 1);
    }

    #[test]
    fn finite_factor_spheres_sum_to_order() {
        let spec = z3z2();
        let counts = sphere_counts(&spec, 8).unwrap();
        for (i, f) in spec.factors().iter().enumerate() {
            let total: u64 = counts.per_factor[i][1..].iter().sum();
            assert_eq!(total, f.order() as u64 - 1);
        }
    }

    #[test]
    fn spheres_are_submultiplicative() {
        let counts = sphere_counts(&z3z2(), 12).unwrap();
        let s = &counts.product;
        for m in 1..=6 {
            for k in 1..=6 {
                assert!(s[m + k] <= s[m] * s[k], "S({})S({}) < S({})", m, k, m + k);
            }
        }
    }

    #[test]
    fn recurrence_matches_enumeration_with_truncated_factor() {
        let f1 = FactorGroup::ladder(12).unwrap();
        let f2 = FactorGroup::ladder(12).unwrap();
        let spec = FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap();
        let counts = sphere_counts(&spec, 8).unwrap();
        // S(1) = 3 + 3 generators.
        assert_eq!(counts.product[1], 6);
    }

    #[test]
    fn nonsymmetric_sphere_series() {
        // Directed supp {a} on Z/3: S_1 = z + z^2.
        let f1 = FactorGroup::cyclic(3, &[(1, 1.0)]).unwrap();
        let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
        let spec = FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap();
        let counts = sphere_counts(&spec, 6).unwrap();
        assert_eq!(counts.per_factor[0][1], 1);
        assert_eq!(counts.per_factor[0][2], 1);
        assert_eq!(counts.product[1], 2);
    }
}
