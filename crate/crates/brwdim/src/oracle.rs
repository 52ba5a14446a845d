//! Brute-force validation layer: truncated convolution series, first-visit
//! coefficients, and first-passage-to-set coefficients. Every partial sum
//! produced here is a certified lower bound of its analytic counterpart.

use crate::error::OracleError;
use crate::group::{FreeProduct, Word};
use std::collections::HashMap;

/// Indexed state space for walk dynamic programs: all words of the object
/// with length at most `radius`, with one-step transitions resolved to state
/// indices. Steps beyond the radius (or into a tomb) are killed.
pub(crate) struct WalkSpace {
    pub states: Vec<Word>,
    pub index: HashMap<Word, usize>,
    /// Per state: (target index or KILLED, probability).
    pub steps: Vec<Vec<(u32, f64)>>,
}

pub(crate) const KILLED: u32 = u32::MAX;

impl WalkSpace {
    /// Ball of the (possibly truncated) object itself: per-factor block
    /// lengths are capped at the factor depth, so no error is raised for
    /// truncated factors. Killing at the cap boundary is intentional.
    pub fn new(spec: &FreeProduct, radius: u32) -> WalkSpace {
        let by_len: Vec<Vec<Vec<u32>>> = spec
            .factors()
            .iter()
            .map(|f| {
                let lim = f.depth().map_or(radius, |d| d.min(radius));
                let mut buckets = vec![Vec::new(); lim as usize + 1];
                for g in 1..f.order() as u32 {
                    let l = f.length(g);
                    if l <= lim {
                        buckets[l as usize].push(g);
                    }
                }
                buckets
            })
            .collect();
        let mut states: Vec<(Word, u32)> = vec![(spec.identity(), 0)];
        let mut cursor = 0;
        while cursor < states.len() {
            let (word, used) = states[cursor].clone();
            cursor += 1;
            let last = word.word_type();
            for i in 0..spec.factor_count() as u16 {
                if Some(i) == last {
                    continue;
                }
                let buckets = &by_len[i as usize];
                for l in 1..=(radius - used).min(buckets.len() as u32 - 1) {
                    for &g in &buckets[l as usize] {
                        let mut blocks = word.blocks().to_vec();
                        blocks.push((i, g));
                        let w = spec.word(&blocks).unwrap();
                        states.push((w, used + l));
                    }
                }
            }
        }
        states.sort_by(|a, b| (a.1, a.0.blocks()).cmp(&(b.1, b.0.blocks())));
        let states: Vec<Word> = states.into_iter().map(|(w, _)| w).collect();
        let index: HashMap<Word, usize> = states
            .iter()
            .enumerate()
            .map(|(k, w)| (w.clone(), k))
            .collect();
        let steps = states
            .iter()
            .map(|w| {
                let mut out = Vec::new();
                for i in 0..spec.factor_count() {
                    for (g, p) in spec.factor(i).support() {
                        let prob = spec.weight(i) * p;
                        let target = match spec.step(w, i as u16, g) {
                            Some(next) => index.get(&next).map_or(KILLED, |&k| k as u32),
                            None => KILLED,
                        };
                        out.push((target, prob));
                    }
                }
                out
            })
            .collect();
        WalkSpace {
            states,
            index,
            steps,
        }
    }

    pub fn advance(&self, cur: &[f64], next: &mut [f64]) {
        next.fill(0.0);
        for (s, &mass) in cur.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for &(t, p) in &self.steps[s] {
                if t != KILLED {
                    next[t as usize] += mass * p;
                }
            }
        }
    }
}

/// Exact n-step laws p^(n)(e, .) for n <= horizon.
///
/// The state space is the reachable ball at the horizon, so every row sums to
/// one; truncated factors must be deep enough that no path can reach a tomb.
pub struct ConvolutionPowers {
    space: WalkSpace,
    rows: Vec<Vec<f64>>,
}

pub fn convolution_powers(
    spec: &FreeProduct,
    horizon: u32,
) -> Result<ConvolutionPowers, OracleError> {
    for (i, f) in spec.factors().iter().enumerate() {
        if let Some(d) = f.depth() {
            if d < horizon {
                return Err(OracleError::DepthInsufficient {
                    factor: i,
                    depth: d,
                    needed: horizon,
                });
            }
        }
    }
    let space = WalkSpace::new(spec, horizon);
    let n_states = space.states.len();
    let mut rows = Vec::with_capacity(horizon as usize + 1);
    let mut cur = vec![0.0; n_states];
    cur[0] = 1.0;
    rows.push(cur.clone());
    let mut next = vec![0.0; n_states];
    for _ in 0..horizon {
        space.advance(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        rows.push(cur.clone());
    }
    Ok(ConvolutionPowers { space, rows })
}

impl ConvolutionPowers {
    pub fn horizon(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn prob(&self, n: usize, word: &Word) -> f64 {
        self.space
            .index
            .get(word)
            .map_or(0.0, |&k| self.rows[n][k])
    }

    pub fn row_sum(&self, n: usize) -> f64 {
        self.rows[n].iter().sum()
    }

    /// The full distribution at step n as (word, probability) pairs.
    pub fn distribution(&self, n: usize) -> impl Iterator<Item = (&Word, f64)> + '_ {
        self.space
            .states
            .iter()
            .zip(&self.rows[n])
            .filter(|(_, &p)| p > 0.0)
            .map(|(w, &p)| (w, p))
    }

    /// Total-variation distance between p^(n) and an empirical histogram.
    pub fn tv_distance(&self, n: usize, histogram: &HashMap<Word, u64>) -> f64 {
        let total: u64 = histogram.values().sum();
        if total == 0 {
            return 1.0;
        }
        let mut tv = 0.0;
        let mut seen_mass = 0.0;
        for (w, p) in self.distribution(n) {
            let emp = histogram.get(w).copied().unwrap_or(0) as f64 / total as f64;
            tv += (p - emp).abs();
            seen_mass += emp;
        }
        tv += 1.0 - seen_mass;
        tv / 2.0
    }
}

/// A truncated coefficient series with query-time partial sums.
#[derive(Debug, Clone)]
pub struct SeriesTable {
    /// Coefficient of lambda^n at index n (index 0 unused, kept at 0).
    pub coeffs: Vec<f64>,
    /// Number of coefficients clamped up to zero.
    pub clamped: usize,
    /// Most negative raw coefficient seen before clamping.
    pub min_raw: f64,
}

/// Raw coefficients below this are reported as a warning by callers.
pub const CANCELLATION_WARN: f64 = -1e-9;

impl SeriesTable {
    pub fn horizon(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// sum_{n<=N} c_n lambda^n.
    pub fn partial_sum(&self, lambda: f64) -> f64 {
        let mut acc = 0.0;
        let mut pow = 1.0;
        for &c in &self.coeffs {
            acc += c * pow;
            pow *= lambda;
        }
        acc
    }

    /// Partial sums after each term, for monotonicity diagnostics.
    pub fn partial_sums(&self, lambda: f64) -> Vec<f64> {
        let mut acc = 0.0;
        let mut pow = 1.0;
        self.coeffs
            .iter()
            .map(|&c| {
                acc += c * pow;
                pow *= lambda;
                acc
            })
            .collect()
    }
}

/// Default word-length cap for the long-horizon dynamic programs. Mass that
/// leaves the cap is killed, which only lowers the (lower-bound) partial sums.
pub const DEFAULT_BALL_CAP: u32 = 32;

/// Shared dynamic-program workspace: build the capped ball once, then run any
/// number of first-visit or first-passage series over it.
pub struct PathOracle<'a> {
    spec: &'a FreeProduct,
    space: WalkSpace,
}

impl<'a> PathOracle<'a> {
    pub fn new(spec: &'a FreeProduct, ball_cap: Option<u32>) -> PathOracle<'a> {
        let cap = ball_cap.unwrap_or(DEFAULT_BALL_CAP);
        PathOracle {
            spec,
            space: WalkSpace::new(spec, cap),
        }
    }

    pub fn state_count(&self) -> usize {
        self.space.states.len()
    }

    /// First-visit coefficients f^(n)(e, x) for several targets from one
    /// forward pass, by deconvolving p^(n)(e, x) = sum_k f^(k) p^(n-k)(x, x)
    /// with p^(m)(x, x) = p^(m)(e, e) by transitivity.
    pub fn first_visit_series_batch(
        &self,
        targets: &[Word],
        horizon: u32,
    ) -> Result<Vec<SeriesTable>, OracleError> {
        let mut target_idx = Vec::with_capacity(targets.len());
        for t in targets {
            if t.is_identity() {
                return Err(OracleError::IdentityTarget);
            }
            let idx = self.space.index.get(t).ok_or(OracleError::Group(
                crate::error::GroupError::MalformedWord {
                    position: 0,
                    message: "target outside the oracle ball cap".into(),
                },
            ))?;
            target_idx.push(*idx);
        }
        let n = horizon as usize;
        let mut p_target = vec![vec![0.0; n + 1]; targets.len()];
        let mut p_origin = vec![0.0; n + 1];
        let mut cur = vec![0.0; self.space.states.len()];
        cur[0] = 1.0;
        p_origin[0] = 1.0;
        let mut next = vec![0.0; self.space.states.len()];
        for step in 1..=n {
            self.space.advance(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            p_origin[step] = cur[0];
            for (t, &idx) in target_idx.iter().enumerate() {
                p_target[t][step] = cur[idx];
            }
        }
        Ok(p_target
            .into_iter()
            .map(|pt| deconvolve(&pt, &p_origin))
            .collect())
    }

    pub fn first_visit_series(
        &self,
        target: &Word,
        horizon: u32,
    ) -> Result<SeriesTable, OracleError> {
        Ok(self
            .first_visit_series_batch(std::slice::from_ref(target), horizon)?
            .pop()
            .unwrap())
    }

    /// First-passage coefficients of U(e, Gamma_i^x | z): mass absorbed on
    /// first entry into the non-identity elements of factor `factor`.
    pub fn first_passage_set_series(&self, factor: usize, horizon: u32) -> SeriesTable {
        let absorbing: Vec<bool> = self
            .space
            .states
            .iter()
            .map(|w| w.block_len() == 1 && w.blocks()[0].0 as usize == factor)
            .collect();
        let n = horizon as usize;
        let mut coeffs = vec![0.0; n + 1];
        let mut cur = vec![0.0; self.space.states.len()];
        cur[0] = 1.0;
        let mut next = vec![0.0; self.space.states.len()];
        for step in 1..=n {
            next.fill(0.0);
            for (s, &mass) in cur.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                for &(t, p) in &self.space.steps[s] {
                    if t == KILLED {
                        continue;
                    }
                    if absorbing[t as usize] {
                        coeffs[step] += mass * p;
                    } else {
                        next[t as usize] += mass * p;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        SeriesTable {
            coeffs,
            clamped: 0,
            min_raw: 0.0,
        }
    }
}

fn deconvolve(p_target: &[f64], p_origin: &[f64]) -> SeriesTable {
    let n = p_target.len() - 1;
    let mut coeffs = vec![0.0; n + 1];
    let mut clamped = 0;
    let mut min_raw = 0.0;
    for m in 1..=n {
        let mut f = p_target[m];
        for k in 1..m {
            f -= coeffs[k] * p_origin[m - k];
        }
        if f < 0.0 {
            min_raw = f.min(min_raw);
            clamped += 1;
            f = 0.0;
        }
        coeffs[m] = f;
    }
    SeriesTable {
        coeffs,
        clamped,
        min_raw,
    }
}

/// One-shot convenience wrapper around [`PathOracle::first_visit_series`].
pub fn first_visit_series(
    spec: &FreeProduct,
    target: &Word,
    horizon: u32,
    ball_cap: Option<u32>,
) -> Result<SeriesTable, OracleError> {
    let cap = ball_cap
        .unwrap_or(DEFAULT_BALL_CAP)
        .max(spec.word_length(target) + 2);
    PathOracle::new(spec, Some(cap)).first_visit_series(target, horizon)
}

/// One-shot convenience wrapper around [`PathOracle::first_passage_set_series`].
pub fn first_passage_set_series(
    spec: &FreeProduct,
    factor: usize,
    horizon: u32,
    ball_cap: Option<u32>,
) -> Result<SeriesTable, OracleError> {
    Ok(PathOracle::new(spec, ball_cap).first_passage_set_series(factor, horizon))
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
    fn step_zero_is_point_mass() {
        let spec = z3z2();
        let conv = convolution_powers(&spec, 4).unwrap();
        assert_eq!(conv.prob(0, &spec.identity()), 1.0);
        assert!((conv.row_sum(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn step_one_matches_the_lifted_law() {
        let spec = z3z2();
        let conv = convolution_powers(&spec, 4).unwrap();
        let a = spec.word(&[(0, 1)]).unwrap();
        let a2 = spec.word(&[(0, 2)]).unwrap();
        let b = spec.word(&[(1, 1)]).unwrap();
        assert!((conv.prob(1, &a) - 0.25).abs() < 1e-15);
        assert!((conv.prob(1, &a2) - 0.25).abs() < 1e-15);
        assert!((conv.prob(1, &b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rows_sum_to_one() {
        let spec = z3z2();
        let conv = convolution_powers(&spec, 8).unwrap();
        for n in 0..=8 {
            assert!(
                (conv.row_sum(n) - 1.0).abs() < 1e-12,
                "row {n} sums to {}",
                conv.row_sum(n)
            );
        }
    }

    #[test]
    fn first_visit_single_step() {
        let spec = z3z2();
        let b = spec.word(&[(1, 1)]).unwrap();
        let table = first_visit_series(&spec, &b, 12, Some(10)).unwrap();
        assert!((table.coeffs[1] - 0.5).abs() < 1e-15, "f^(1) = alpha mu(b)");
        assert_eq!(table.clamped, 0);
    }

    #[test]
    fn first_visit_partial_sums_bounded_by_one() {
        let spec = z3z2();
        let ab = spec.word(&[(0, 1), (1, 1)]).unwrap();
        let table = first_visit_series(&spec, &ab, 80, Some(16)).unwrap();
        let sums = table.partial_sums(1.0);
        for w in sums.windows(2) {
            assert!(w[1] >= w[0] - 1e-15, "partial sums must be nondecreasing");
        }
        assert!(*sums.last().unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn first_passage_one_step_mass() {
        let spec = z3z2();
        let oracle = PathOracle::new(&spec, Some(12));
        let table = oracle.first_passage_set_series(0, 10);
        assert!((table.coeffs[1] - 0.5).abs() < 1e-15, "alpha_1 = 1/2");
        let table2 = oracle.first_passage_set_series(1, 10);
        assert!((table2.coeffs[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identity_target_rejected() {
        let spec = z3z2();
        let e = spec.identity();
        assert!(matches!(
            first_visit_series(&spec, &e, 10, Some(8)),
            Err(OracleError::IdentityTarget)
        ));
    }

    #[test]
    fn depth_guard_on_exact_convolutions() {
        let f1 = FactorGroup::ladder(3).unwrap();
        let f2 = FactorGroup::ladder(3).unwrap();
        let spec = FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap();
        assert!(convolution_powers(&spec, 3).is_ok());
        assert!(matches!(
            convolution_powers(&spec, 4),
            Err(OracleError::DepthInsufficient { .. })
        ));
    }

    #[test]
    fn ball_cap_only_lowers_partial_sums() {
        let spec = z3z2();
        let ab = spec.word(&[(0, 1), (1, 1)]).unwrap();
        let coarse = first_visit_series(&spec, &ab, 60, Some(8)).unwrap();
        let fine = first_visit_series(&spec, &ab, 60, Some(20)).unwrap();
        assert!(coarse.partial_sum(1.01) <= fine.partial_sum(1.01) + 1e-15);
    }

    #[test]
    fn batch_matches_single_runs() {
        let spec = z3z2();
        let ab = spec.word(&[(0, 1), (1, 1)]).unwrap();
        let ba = spec.word(&[(1, 1), (0, 2)]).unwrap();
        let oracle = PathOracle::new(&spec, Some(14));
        let batch = oracle
            .first_visit_series_batch(&[ab.clone(), ba.clone()], 40)
            .unwrap();
        let single_ab = oracle.first_visit_series(&ab, 40).unwrap();
        assert_eq!(batch[0].coeffs, single_ab.coeffs);
    }
}
