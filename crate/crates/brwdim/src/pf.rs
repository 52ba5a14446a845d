//! Perron-Frobenius eigenvalue of a nonnegative irreducible matrix by power
//! iteration. A unit shift breaks the periodicity of zero-diagonal matrices
//! without moving the eigenvectors.

use crate::error::PfError;

/// A square nonnegative matrix with zero diagonal, tagged by its role in the
/// dimension formulas.
#[derive(Debug, Clone)]
pub struct PFMatrix {
    pub entries: Vec<Vec<f64>>,
    pub role: &'static str,
}

impl PFMatrix {
    pub fn new(entries: Vec<Vec<f64>>, role: &'static str) -> PFMatrix {
        PFMatrix { entries, role }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }
}

/// Dominant eigenvalue and positive eigenvector (unit max entry) of a
/// nonnegative irreducible matrix.
pub fn pf_eigenvalue(m: &PFMatrix) -> Result<(f64, Vec<f64>), PfError> {
    let n = m.dim();
    for (i, row) in m.entries.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v < 0.0 || !v.is_finite() {
                return Err(PfError::NegativeEntry(i, j));
            }
        }
    }
    if !irreducible(&m.entries) {
        return Err(PfError::Reducible);
    }
    // Power iteration on M + I from the all-ones vector, with a
    // Rayleigh-quotient convergence test.
    let mut v = vec![1.0; n];
    let mut rayleigh = 0.0;
    for _ in 0..200_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let mut acc = v[i]; // the +I shift
            for j in 0..n {
                acc += m.entries[i][j] * v[j];
            }
            next[i] = acc;
        }
        let dot_vv: f64 = v.iter().map(|x| x * x).sum();
        let dot_vn: f64 = v.iter().zip(&next).map(|(a, b)| a * b).sum();
        let r = dot_vn / dot_vv;
        let max = next.iter().fold(0.0f64, |a, &b| a.max(b));
        if max == 0.0 || !max.is_finite() {
            return Err(PfError::NoConvergence);
        }
        for x in &mut next {
            *x /= max;
        }
        let done = (r - rayleigh).abs() <= 1e-13 * r.abs().max(1.0);
        rayleigh = r;
        v = next;
        if done {
            return Ok((rayleigh - 1.0, v));
        }
    }
    Err(PfError::NoConvergence)
}

fn irreducible(m: &[Vec<f64>]) -> bool {
    let n = m.len();
    if n == 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    let reach = |forward: bool| -> bool {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let edge = if forward { m[i][j] } else { m[j][i] };
                if edge > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    reach(true) && reach(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antidiagonal_two_by_two() {
        // Eigenvalue sqrt(c d) despite the period-2 structure.
        let m = PFMatrix::new(vec![vec![0.0, 3.0], vec![12.0, 0.0]], "test");
        let (v, vec_) = pf_eigenvalue(&m).unwrap();
        assert!((v - 6.0).abs() < 1e-10);
        assert!(vec_.iter().all(|&x| x > 0.0));
        assert!((vec_.iter().fold(0.0f64, |a, &b| a.max(b)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_ones_off_diagonal() {
        // J - I on r = 3 has dominant eigenvalue 2.
        let m = PFMatrix::new(
            vec![
                vec![0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0],
                vec![1.0, 1.0, 0.0],
            ],
            "test",
        );
        let (v, _) = pf_eigenvalue(&m).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn reducible_detected() {
        let m = PFMatrix::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]], "test");
        assert!(matches!(pf_eigenvalue(&m), Err(PfError::Reducible)));
    }

    #[test]
    fn characteristic_polynomial_cross_check_r3() {
        // Zero-diagonal 3x3: lambda^3 = (ab'c'' terms); compare against the
        // largest real root found by bisection on the characteristic poly.
        let e = vec![
            vec![0.0, 2.0, 0.5],
            vec![1.5, 0.0, 1.0],
            vec![0.7, 2.5, 0.0],
        ];
        let m = PFMatrix::new(e.clone(), "test");
        let (v, _) = pf_eigenvalue(&m).unwrap();
        let charpoly = |l: f64| -> f64 {
            // det(lI - A) for zero-diagonal A.
            l * l * l
                - l * (e[0][1] * e[1][0] + e[0][2] * e[2][0] + e[1][2] * e[2][1])
                - (e[0][1] * e[1][2] * e[2][0] + e[0][2] * e[1][0] * e[2][1])
        };
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if charpoly(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((v - lo).abs() < 1e-10, "power {v} vs root {lo}");
    }
}
