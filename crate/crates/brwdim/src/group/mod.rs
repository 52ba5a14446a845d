//! Factor groups and their free product: multiplication, word lengths by
//! breadth-first search, sphere enumeration.

mod series;
mod word;

pub use series::{sphere_counts, IntSeries, SphereCounts};
pub use word::{Block, Word};

use crate::error::GroupError;
use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};

static SPEC_COUNTER: AtomicU64 = AtomicU64::new(1);

/// Closed-form tail of a truncated factor's sphere series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SphereTail {
    /// L1 spheres of the rank-k lattice: sum_m S(m) z^m = ((1+z)/(1-z))^k - 1.
    Lattice { rank: u32 },
    /// Spheres of the ladder Z x Z/2: (1+z)^2/(1-z) - 1.
    Ladder,
}

impl SphereTail {
    /// Full series value sum_{m>=1} S(m) z^m; valid for |z| < 1.
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            SphereTail::Lattice { rank } => ((1.0 + z) / (1.0 - z)).powi(*rank as i32) - 1.0,
            SphereTail::Ladder => (1.0 + z) * (1.0 + z) / (1.0 - z) - 1.0,
        }
    }
}

/// Which constructor produced a factor; retained so truncated factors can be
/// rebuilt at another depth.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorKind {
    Cyclic { n: u32 },
    Table { name: String },
    Lattice { rank: u32, depth: u32 },
    Ladder { depth: u32 },
}

/// One free factor: a finite group, or the ball of a truncated infinite one.
///
/// Elements are canonical indices `0..order` with `0` the identity. For
/// truncated factors, products that leave the ball are `None` (the tomb).
#[derive(Debug, Clone)]
pub struct FactorGroup {
    kind: FactorKind,
    order: usize,
    mult: Vec<Option<u32>>,
    inv: Vec<u32>,
    step_pmf: Vec<f64>,
    lengths: Vec<u32>,
    depth: Option<u32>,
    sphere_tail: Option<SphereTail>,
    symmetric: bool,
}

const PMF_TOL: f64 = 1e-12;

impl FactorGroup {
    /// Cyclic group Z/n with a step pmf over the nonzero residues.
    pub fn cyclic(n: u32, pmf: &[(u32, f64)]) -> Result<FactorGroup, GroupError> {
        if n < 2 {
            return Err(GroupError::InvalidFactor {
                index: 0,
                message: format!("cyclic order must be >= 2, got {n}"),
            });
        }
        let order = n as usize;
        let mut step_pmf = vec![0.0; order];
        for &(g, p) in pmf {
            if g == 0 || g >= n {
                return Err(GroupError::InvalidFactor {
                    index: 0,
                    message: format!("pmf entry {g} outside 1..{n}"),
                });
            }
            if p <= 0.0 {
                return Err(GroupError::InvalidFactor {
                    index: 0,
                    message: format!("pmf weight for {g} must be positive"),
                });
            }
            step_pmf[g as usize] += p;
        }
        let mut mult = vec![None; order * order];
        for a in 0..order {
            for b in 0..order {
                mult[a * order + b] = Some(((a + b) % order) as u32);
            }
        }
        let inv = (0..order).map(|a| ((order - a) % order) as u32).collect();
        Self::finish(
            FactorKind::Cyclic { n },
            order,
            mult,
            inv,
            step_pmf,
            None,
            None,
        )
    }

    /// Finite group given by an explicit multiplication table (row 0 = identity)
    /// and a step pmf over element indices.
    pub fn from_table(
        name: &str,
        table: &[Vec<u32>],
        pmf: &[(u32, f64)],
    ) -> Result<FactorGroup, GroupError> {
        let order = table.len();
        if order < 2 {
            return Err(GroupError::InvalidFactor {
                index: 0,
                message: "table group must have order >= 2".into(),
            });
        }
        let mut mult = vec![None; order * order];
        for (a, row) in table.iter().enumerate() {
            if row.len() != order {
                return Err(GroupError::InvalidFactor {
                    index: 0,
                    message: format!("row {a} has {} entries, expected {order}", row.len()),
                });
            }
            for (b, &c) in row.iter().enumerate() {
                if c as usize >= order {
                    return Err(GroupError::InvalidFactor {
                        index: 0,
                        message: format!("entry ({a},{b}) = {c} out of range"),
                    });
                }
                mult[a * order + b] = Some(c);
            }
        }
        // Group axioms on the table: identity row/column, associativity, inverses.
        for a in 0..order {
            if mult[a] != Some(a as u32) || mult[a * order] != Some(a as u32) {
                return Err(GroupError::InvalidFactor {
                    index: 0,
                    message: "row/column 0 must be the identity".into(),
                });
            }
        }
        for a in 0..order {
            for b in 0..order {
                for c in 0..order {
                    let ab = mult[a * order + b].unwrap() as usize;
                    let bc = mult[b * order + c].unwrap() as usize;
                    if mult[ab * order + c] != mult[a * order + bc] {
                        return Err(GroupError::InvalidFactor {
                            index: 0,
                            message: format!("associativity fails at ({a},{b},{c})"),
                        });
                    }
                }
            }
        }
        let mut inv = vec![u32::MAX; order];
        for a in 0..order {
            for b in 0..order {
                if mult[a * order + b] == Some(0) {
                    inv[a] = b as u32;
                }
            }
            if inv[a] == u32::MAX {
                return Err(GroupError::InvalidFactor {
                    index: 0,
                    message: format!("element {a} has no inverse"),
                });
            }
        }
        let mut step_pmf = vec![0.0; order];
        for &(g, p) in pmf {
            if g == 0 || g as usize >= order {
                return Err(GroupError::InvalidFactor {
                    index: 0,
                    message: format!("pmf entry {g} out of range"),
                });
            }
            step_pmf[g as usize] += p;
        }
        Self::finish(
            FactorKind::Table { name: name.into() },
            order,
            mult,
            inv,
            step_pmf,
            None,
            None,
        )
    }

    /// Ball of radius `depth` of the lattice Z^rank with uniform steps on
    /// the 2*rank standard generators. Exiting steps lead to the tomb.
    pub fn lattice(rank: u32, depth: u32) -> Result<FactorGroup, GroupError> {
        if rank == 0 {
            return Err(GroupError::InvalidFactor {
                index: 0,
                message: "lattice rank must be >= 1".into(),
            });
        }
        if depth < 1 {
            return Err(GroupError::InvalidFactor {
                index: 0,
                message: "lattice depth must be >= 1".into(),
            });
        }
        let mut points: Vec<Vec<i32>> = Vec::new();
        enumerate_l1_ball(rank as usize, depth as i32, &mut points);
        points.sort_by_key(|p| (p.iter().map(|c| c.unsigned_abs()).sum::<u32>(), p.clone()));
        let index_of = |q: &[i32]| points.binary_search_by(|p| {
            let kp = (p.iter().map(|c| c.unsigned_abs()).sum::<u32>(), p.clone());
            let kq = (q.iter().map(|c| c.unsigned_abs()).sum::<u32>(), q.to_vec());
            kp.cmp(&kq)
        });
        let order = points.len();
        let mut mult = vec![None; order * order];
        for (a, pa) in points.iter().enumerate() {
            for (b, pb) in points.iter().enumerate() {
                let sum: Vec<i32> = pa.iter().zip(pb).map(|(x, y)| x + y).collect();
                let l1: u32 = sum.iter().map(|c| c.unsigned_abs()).sum();
                if l1 <= depth {
                    mult[a * order + b] = Some(index_of(&sum).unwrap() as u32);
                }
            }
        }
        let inv = points
            .iter()
            .map(|p| {
                let neg: Vec<i32> = p.iter().map(|c| -c).collect();
                index_of(&neg).unwrap() as u32
            })
            .collect();
        let mut step_pmf = vec![0.0; order];
        let w = 1.0 / (2.0 * rank as f64);
        for axis in 0..rank as usize {
            for sign in [1i32, -1] {
                let mut gen = vec![0i32; rank as usize];
                gen[axis] = sign;
                step_pmf[index_of(&gen).unwrap()] = w;
            }
        }
        Self::finish(
            FactorKind::Lattice { rank, depth },
            order,
            mult,
            inv,
            step_pmf,
            Some(depth),
            Some(SphereTail::Lattice { rank }),
        )
    }

    /// Ball of radius `depth` of the ladder Z x Z/2 with uniform steps on
    /// {(1,0), (-1,0), (0,1)}.
    pub fn ladder(depth: u32) -> Result<FactorGroup, GroupError> {
        if depth < 1 {
            return Err(GroupError::InvalidFactor {
                index: 0,
                message: "ladder depth must be >= 1".into(),
            });
        }
        let mut points: Vec<(i32, u8)> = Vec::new();
        for t in 0..=1u8 {
            let span = depth as i32 - t as i32;
            for x in -span..=span {
                points.push((x, t));
            }
        }
        points.sort_by_key(|&(x, t)| (x.unsigned_abs() + t as u32, x, t));
        let index_of = |q: (i32, u8)| {
            points.binary_search_by_key(&(q.0.unsigned_abs() + q.1 as u32, q.0, q.1), |&(x, t)| {
                (x.unsigned_abs() + t as u32, x, t)
            })
        };
        let order = points.len();
        let mut mult = vec![None; order * order];
        for (a, &(xa, ta)) in points.iter().enumerate() {
            for (b, &(xb, tb)) in points.iter().enumerate() {
                let sum = (xa + xb, (ta + tb) % 2);
                if sum.0.unsigned_abs() + sum.1 as u32 <= depth {
                    mult[a * order + b] = Some(index_of(sum).unwrap() as u32);
                }
            }
        }
        let inv = points
            .iter()
            .map(|&(x, t)| index_of((-x, t)).unwrap() as u32)
            .collect();
        let mut step_pmf = vec![0.0; order];
        for gen in [(1, 0), (-1, 0), (0, 1)] {
            step_pmf[index_of(gen).unwrap()] = 1.0 / 3.0;
        }
        Self::finish(
            FactorKind::Ladder { depth },
            order,
            mult,
            inv,
            step_pmf,
            Some(depth),
            Some(SphereTail::Ladder),
        )
    }

    fn finish(
        kind: FactorKind,
        order: usize,
        mult: Vec<Option<u32>>,
        inv: Vec<u32>,
        step_pmf: Vec<f64>,
        depth: Option<u32>,
        sphere_tail: Option<SphereTail>,
    ) -> Result<FactorGroup, GroupError> {
        if step_pmf[0] != 0.0 {
            return Err(GroupError::InvalidFactor {
                index: 0,
                message: "step pmf must vanish on the identity".into(),
            });
        }
        let total: f64 = step_pmf.iter().sum();
        if (total - 1.0).abs() > PMF_TOL {
            return Err(GroupError::InvalidFactor {
                index: 0,
                message: format!("step pmf sums to {total}, expected 1"),
            });
        }
        let symmetric = (0..order).all(|g| {
            let d = step_pmf[g] - step_pmf[inv[g] as usize];
            d.abs() <= PMF_TOL
        });
        let mut factor = FactorGroup {
            kind,
            order,
            mult,
            inv,
            step_pmf,
            lengths: Vec::new(),
            depth,
            sphere_tail,
            symmetric,
        };
        factor.lengths = factor.bfs_lengths()?;
        Ok(factor)
    }

    /// Graph distances from the identity in the Cayley graph of the support,
    /// following right multiplication (directed when the pmf is nonsymmetric).
    fn bfs_lengths(&self) -> Result<Vec<u32>, GroupError> {
        let mut dist = vec![u32::MAX; self.order];
        dist[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let supp: Vec<usize> = (0..self.order).filter(|&g| self.step_pmf[g] > 0.0).collect();
        while let Some(x) = queue.pop_front() {
            for &s in &supp {
                if let Some(y) = self.mult[x * self.order + s] {
                    let y = y as usize;
                    if dist[y] == u32::MAX {
                        dist[y] = dist[x] + 1;
                        queue.push_back(y);
                    }
                }
            }
        }
        if let Some(g) = dist.iter().position(|&d| d == u32::MAX) {
            return Err(GroupError::InvalidFactor {
                index: 0,
                message: format!("support does not generate: element {g} unreachable"),
            });
        }
        Ok(dist)
    }

    pub fn kind(&self) -> &FactorKind {
        &self.kind
    }

    /// Number of live elements (ball size for truncated factors), identity included.
    pub fn order(&self) -> usize {
        self.order
    }

    /// `None` when the product leaves the truncated ball.
    pub fn mul(&self, a: u32, b: u32) -> Option<u32> {
        self.mult[a as usize * self.order + b as usize]
    }

    pub fn inv(&self, a: u32) -> u32 {
        self.inv[a as usize]
    }

    pub fn step_pmf(&self, g: u32) -> f64 {
        self.step_pmf[g as usize]
    }

    /// Elements of the support together with their step probabilities.
    pub fn support(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.step_pmf
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(g, &p)| (g as u32, p))
    }

    /// Intra-factor word length (BFS distance to the identity).
    pub fn length(&self, g: u32) -> u32 {
        self.lengths[g as usize]
    }

    /// Mass escaping the ball in one step from `g` (zero for finite factors).
    pub fn exit_mass(&self, g: u32) -> f64 {
        self.support()
            .filter(|&(s, _)| self.mul(g, s).is_none())
            .map(|(_, p)| p)
            .sum()
    }

    pub fn depth(&self) -> Option<u32> {
        self.depth
    }

    pub fn is_truncated(&self) -> bool {
        self.depth.is_some()
    }

    pub fn sphere_tail(&self) -> Option<SphereTail> {
        self.sphere_tail
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Sphere sizes S_i(m) for m = 0..=m_max over the live elements.
    pub fn sphere_sizes(&self, m_max: u32) -> Vec<u64> {
        let mut counts = vec![0u64; m_max as usize + 1];
        for g in 0..self.order {
            let l = self.lengths[g];
            if l <= m_max {
                counts[l as usize] += 1;
            }
        }
        counts
    }

    /// Rebuild a truncated constructor at another depth. Finite factors are
    /// returned unchanged.
    pub fn at_depth(&self, depth: u32) -> Result<FactorGroup, GroupError> {
        match self.kind {
            FactorKind::Cyclic { .. } | FactorKind::Table { .. } => Ok(self.clone()),
            FactorKind::Lattice { rank, .. } => FactorGroup::lattice(rank, depth),
            FactorKind::Ladder { .. } => FactorGroup::ladder(depth),
        }
    }
}

fn enumerate_l1_ball(rank: usize, depth: i32, out: &mut Vec<Vec<i32>>) {
    let mut point = vec![0i32; rank];
    fn rec(axis: usize, budget: i32, point: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if axis == point.len() {
            out.push(point.clone());
            return;
        }
        for v in -budget..=budget {
            point[axis] = v;
            rec(axis + 1, budget - v.abs(), point, out);
        }
        point[axis] = 0;
    }
    rec(0, depth, &mut point, out);
}

/// The free product: factor list, mixing weights, and the boundary-metric base.
#[derive(Debug, Clone)]
pub struct FreeProduct {
    id: u64,
    factors: Vec<FactorGroup>,
    weights: Vec<f64>,
    metric_base: f64,
}

impl FreeProduct {
    pub fn new(
        factors: Vec<FactorGroup>,
        weights: Vec<f64>,
        metric_base: f64,
    ) -> Result<FreeProduct, GroupError> {
        if factors.len() < 2 {
            return Err(GroupError::InvalidSpec(format!(
                "need at least 2 factors, got {}",
                factors.len()
            )));
        }
        if factors.len() != weights.len() {
            return Err(GroupError::InvalidSpec(format!(
                "{} factors but {} weights",
                factors.len(),
                weights.len()
            )));
        }
        if factors.len() == 2
            && factors.iter().all(|f| !f.is_truncated() && f.order() == 2)
        {
            return Err(GroupError::DegenerateProduct);
        }
        if weights.iter().any(|&a| a <= 0.0) {
            return Err(GroupError::InvalidSpec("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > PMF_TOL {
            return Err(GroupError::InvalidSpec(format!(
                "weights must sum to 1, got {total}"
            )));
        }
        if !(0.0 < metric_base && metric_base < 1.0) {
            return Err(GroupError::InvalidSpec(format!(
                "metric base must lie in (0,1), got {metric_base}"
            )));
        }
        let all_finite = factors.iter().all(|f| !f.is_truncated());
        if !all_finite && factors.iter().any(|f| !f.is_symmetric()) {
            return Err(GroupError::NonsymmetricStep);
        }
        Ok(FreeProduct {
            id: SPEC_COUNTER.fetch_add(1, Ordering::Relaxed),
            factors,
            weights,
            metric_base,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, i: usize) -> &FactorGroup {
        &self.factors[i]
    }

    pub fn factors(&self) -> &[FactorGroup] {
        &self.factors
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn metric_base(&self) -> f64 {
        self.metric_base
    }

    pub fn is_symmetric(&self) -> bool {
        self.factors.iter().all(|f| f.is_symmetric())
    }

    pub fn all_finite(&self) -> bool {
        self.factors.iter().all(|f| !f.is_truncated())
    }

    /// Rebuild with every truncated factor re-truncated at `depth`.
    pub fn at_depth(&self, depth: u32) -> Result<FreeProduct, GroupError> {
        let factors = self
            .factors
            .iter()
            .map(|f| f.at_depth(depth))
            .collect::<Result<Vec<_>, _>>()?;
        FreeProduct::new(factors, self.weights.clone(), self.metric_base)
    }

    /// Lifted one-step law: probability of the single-block word (i, g).
    pub fn step_prob(&self, i: usize, g: u32) -> f64 {
        self.weights[i] * self.factors[i].step_pmf(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn z3z2() -> FreeProduct {
        let f1 = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
        FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap()
    }

    #[test]
    fn cyclic_lengths_follow_support() {
        let f = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(f.length(0), 0);
        assert_eq!(f.length(1), 1);
        assert_eq!(f.length(2), 1);

        // Directed support {a}: a^2 is two steps away.
        let g = FactorGroup::cyclic(3, &[(1, 1.0)]).unwrap();
        assert_eq!(g.length(2), 2);
        assert!(!g.is_symmetric());
    }

    #[test]
    fn ladder_sphere_sizes_match_closed_form() {
        let f = FactorGroup::ladder(6).unwrap();
        let s = f.sphere_sizes(6);
        assert_eq!(s[0], 1);
        assert_eq!(s[1], 3);
        for m in 2..=6 {
            assert_eq!(s[m as usize], 4, "S(m) should be 4 for m >= 2");
        }
    }

    #[test]
    fn lattice_ball_is_inverse_closed() {
        let f = FactorGroup::lattice(2, 4).unwrap();
        for g in 0..f.order() as u32 {
            let gi = f.inv(g);
            assert_eq!(f.length(g), f.length(gi));
            assert_eq!(f.mul(g, gi), Some(0));
        }
    }

    #[test]
    fn exit_mass_appears_only_on_the_boundary() {
        let f = FactorGroup::ladder(3).unwrap();
        for g in 0..f.order() as u32 {
            let exit = f.exit_mass(g);
            if f.length(g) < 3 {
                assert_eq!(exit, 0.0);
            } else {
                assert!(exit > 0.0);
            }
        }
    }

    #[test]
    fn degenerate_two_by_two_rejected() {
        let f1 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
        let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
        let err = FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap_err();
        assert!(matches!(err, GroupError::DegenerateProduct));
    }

    #[test]
    fn nonsymmetric_needs_all_finite() {
        let f1 = FactorGroup::cyclic(3, &[(1, 0.7), (2, 0.3)]).unwrap();
        let f2 = FactorGroup::ladder(3).unwrap();
        let err = FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap_err();
        assert!(matches!(err, GroupError::NonsymmetricStep));

        let f1 = FactorGroup::cyclic(3, &[(1, 0.7), (2, 0.3)]).unwrap();
        let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
        assert!(FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).is_ok());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let f1 = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
        assert!(FreeProduct::new(vec![f1, f2], vec![0.6, 0.6], 0.5).is_err());
    }

    #[test]
    fn z3z2_builds() {
        let spec = z3z2();
        assert_eq!(spec.factor_count(), 2);
        assert!(spec.is_symmetric());
    }
}
