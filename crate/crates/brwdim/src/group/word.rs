use super::FreeProduct;
use crate::error::GroupError;

/// One block of a normal-form word: (factor index, non-identity element).
pub type Block = (u16, u32);

/// Normal-form element of the free product: alternating blocks, each a
/// non-identity element of its factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    spec_id: u64,
    blocks: Vec<Block>,
}

impl Word {
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Block length ||x||.
    pub fn block_len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_identity(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Type tau(x): factor of the last block, or `None` for the identity.
    pub fn word_type(&self) -> Option<u16> {
        self.blocks.last().map(|&(i, _)| i)
    }

    pub(crate) fn spec_id(&self) -> u64 {
        self.spec_id
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.blocks.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|&(i, g)| format!("{}.{}", i + 1, g))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FreeProduct {
    /// The empty word.
    pub fn identity(&self) -> Word {
        Word {
            spec_id: self.id(),
            blocks: Vec::new(),
        }
    }

    /// Build a word from blocks, normalizing adjacent same-factor blocks.
    pub fn word(&self, blocks: &[Block]) -> Result<Word, GroupError> {
        let mut w = self.identity();
        for (pos, &(i, g)) in blocks.iter().enumerate() {
            if i as usize >= self.factor_count() {
                return Err(GroupError::MalformedWord {
                    position: pos,
                    message: format!("factor index {} out of range", i),
                });
            }
            if g as usize >= self.factor(i as usize).order() {
                return Err(GroupError::MalformedWord {
                    position: pos,
                    message: format!("element {} out of range in factor {}", g, i),
                });
            }
            w = self.append_block(&w, i, g)?;
        }
        Ok(w)
    }

    /// Append one factor element on the right, merging or cancelling at the seam.
    pub(crate) fn append_block(&self, w: &Word, i: u16, g: u32) -> Result<Word, GroupError> {
        let mut blocks = w.blocks.clone();
        if g == 0 {
            return Ok(Word {
                spec_id: self.id(),
                blocks,
            });
        }
        match blocks.last().copied() {
            Some((j, h)) if j == i => {
                let factor = self.factor(i as usize);
                match factor.mul(h, g) {
                    Some(0) => {
                        blocks.pop();
                    }
                    Some(c) => {
                        *blocks.last_mut().unwrap() = (i, c);
                    }
                    None => return Err(GroupError::LeftBall { factor: i as usize }),
                }
            }
            _ => blocks.push((i, g)),
        }
        Ok(Word {
            spec_id: self.id(),
            blocks,
        })
    }

    /// Normal form of the group product `uv`.
    pub fn concat(&self, u: &Word, v: &Word) -> Result<Word, GroupError> {
        if u.spec_id != self.id() || v.spec_id != self.id() {
            return Err(GroupError::SpecMismatch(u.spec_id, v.spec_id));
        }
        let mut w = u.clone();
        for &(i, g) in &v.blocks {
            w = self.append_block(&w, i, g)?;
        }
        Ok(w)
    }

    pub fn inverse(&self, u: &Word) -> Result<Word, GroupError> {
        if u.spec_id != self.id() {
            return Err(GroupError::SpecMismatch(u.spec_id, self.id()));
        }
        let blocks = u
            .blocks
            .iter()
            .rev()
            .map(|&(i, g)| (i, self.factor(i as usize).inv(g)))
            .collect();
        Ok(Word {
            spec_id: self.id(),
            blocks,
        })
    }

    /// Word length l(x): sum of intra-factor block lengths.
    pub fn word_length(&self, u: &Word) -> u32 {
        u.blocks
            .iter()
            .map(|&(i, g)| self.factor(i as usize).length(g))
            .sum()
    }

    /// One random-walk step: multiply by the single letter (i, g) on the right.
    /// `None` when the seam product leaves a truncated ball (tomb).
    pub fn step(&self, w: &Word, i: u16, g: u32) -> Option<Word> {
        match self.append_block(w, i, g) {
            Ok(next) => Some(next),
            Err(_) => None,
        }
    }

    /// The exact ball { x : l(x) <= m }, each word once.
    pub fn ball_enumerate(&self, m: u32) -> Result<Vec<Word>, GroupError> {
        for (idx, f) in self.factors().iter().enumerate() {
            if let Some(d) = f.depth() {
                if d < m {
                    return Err(GroupError::TruncationExceeded {
                        factor: idx,
                        depth: d,
                        requested: m,
                    });
                }
            }
        }
        // Per factor, elements bucketed by intra-factor length.
        let by_len: Vec<Vec<Vec<u32>>> = self
            .factors()
            .iter()
            .map(|f| {
                let mut buckets = vec![Vec::new(); m as usize + 1];
                for g in 1..f.order() as u32 {
                    let l = f.length(g);
                    if l <= m {
                        buckets[l as usize].push(g);
                    }
                }
                buckets
            })
            .collect();
        let mut out = vec![self.identity()];
        let mut frontier: Vec<(Vec<Block>, u32)> = vec![(Vec::new(), 0)];
        while let Some((blocks, used)) = frontier.pop() {
            let last = blocks.last().map(|&(i, _)| i);
            for i in 0..self.factor_count() as u16 {
                if Some(i) == last {
                    continue;
                }
                for l in 1..=(m - used) {
                    for &g in &by_len[i as usize][l as usize] {
                        let mut next = blocks.clone();
                        next.push((i, g));
                        out.push(Word {
                            spec_id: self.id(),
                            blocks: next.clone(),
                        });
                        frontier.push((next, used + l));
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            (self.word_length(a), &a.blocks).cmp(&(self.word_length(b), &b.blocks))
        });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FactorGroup;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn z3z2() -> FreeProduct {
        let f1 = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        let f2 = FactorGroup::cyclic(2, &[(1, 1.0)]).unwrap();
        FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap()
    }

    fn z4z3() -> FreeProduct {
        let f1 = FactorGroup::cyclic(4, &[(1, 0.5), (3, 0.5)]).unwrap();
        let f2 = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap()
    }

    #[test]
    fn concat_contracts_in_the_middle() {
        // u = aba, v = abc with a of order 2 and b^2 != e: uv = a b^2 c.
        // In Z/4 * Z/3 take a = 2 (order 2), c = 1, b = 1.
        let spec = z4z3();
        let u = spec.word(&[(0, 2), (1, 1), (0, 2)]).unwrap();
        let v = spec.word(&[(0, 2), (1, 1), (0, 1)]).unwrap();
        let uv = spec.concat(&u, &v).unwrap();
        let expected = spec.word(&[(0, 2), (1, 2), (0, 1)]).unwrap();
        assert_eq!(uv, expected);
    }

    #[test]
    fn identity_and_inverse_laws() {
        let spec = z3z2();
        let u = spec.word(&[(0, 1), (1, 1), (0, 2)]).unwrap();
        let e = spec.identity();
        assert_eq!(spec.concat(&e, &u).unwrap(), u);
        assert_eq!(spec.concat(&u, &e).unwrap(), u);
        let ui = spec.inverse(&u).unwrap();
        assert!(spec.concat(&u, &ui).unwrap().is_identity());
    }

    #[test]
    fn ball_radius_zero_and_one() {
        let spec = z3z2();
        let b0 = spec.ball_enumerate(0).unwrap();
        assert_eq!(b0.len(), 1);
        assert!(b0[0].is_identity());

        let b1 = spec.ball_enumerate(1).unwrap();
        assert_eq!(b1.len(), 4, "e, a, a^2, b");
        let sphere1 = b1.iter().filter(|w| spec.word_length(w) == 1).count();
        assert_eq!(sphere1, 3);
    }

    #[test]
    fn ball_words_are_unique_and_lengths_correct() {
        let spec = z4z3();
        let ball = spec.ball_enumerate(5).unwrap();
        let set: HashSet<&Word> = ball.iter().collect();
        assert_eq!(set.len(), ball.len());
        for w in &ball {
            assert!(spec.word_length(w) <= 5);
            let renorm = spec.word(w.blocks()).unwrap();
            assert_eq!(&renorm, w, "normalization must be idempotent");
        }
    }

    #[test]
    fn ball_lengths_agree_with_generator_bfs() {
        // Independent check: BFS in the Cayley graph of supp(mu), one letter
        // per edge, must reproduce the block-sum lengths.
        let spec = z4z3();
        let m = 5;
        let ball = spec.ball_enumerate(m).unwrap();
        let mut dist: std::collections::HashMap<Word, u32> =
            std::collections::HashMap::from([(spec.identity(), 0)]);
        let mut queue = std::collections::VecDeque::from([spec.identity()]);
        while let Some(w) = queue.pop_front() {
            let d = dist[&w];
            if d == m {
                continue;
            }
            for i in 0..spec.factor_count() {
                let supp: Vec<u32> = spec.factor(i).support().map(|(g, _)| g).collect();
                for g in supp {
                    if let Some(next) = spec.step(&w, i as u16, g) {
                        dist.entry(next).or_insert_with(|| {
                            queue.push_back(spec.step(&w, i as u16, g).unwrap());
                            d + 1
                        });
                    }
                }
            }
        }
        for w in &ball {
            assert_eq!(
                dist.get(w).copied(),
                Some(spec.word_length(w)),
                "length mismatch for {w}"
            );
        }
    }

    #[test]
    fn truncated_ball_depth_check() {
        let f1 = FactorGroup::ladder(3).unwrap();
        let f2 = FactorGroup::cyclic(3, &[(1, 0.5), (2, 0.5)]).unwrap();
        let spec = FreeProduct::new(vec![f1, f2], vec![0.5, 0.5], 0.5).unwrap();
        assert!(spec.ball_enumerate(3).is_ok());
        let err = spec.ball_enumerate(4).unwrap_err();
        assert!(matches!(err, GroupError::TruncationExceeded { .. }));
    }

    #[test]
    fn concat_agrees_with_generator_walk() {
        // Multiply u by v expanded into generator letters (via BFS parents in
        // the factor) and compare against concat.
        let spec = z3z2();
        let ball = spec.ball_enumerate(4).unwrap();
        let letters_of = |w: &Word| -> Vec<(u16, u32)> {
            // Every block of either factor is a single support letter here.
            w.blocks().to_vec()
        };
        for u in ball.iter().take(40) {
            for v in ball.iter().take(40) {
                let direct = spec.concat(u, v).unwrap();
                let mut acc = u.clone();
                for (i, g) in letters_of(v) {
                    acc = spec.step(&acc, i, g).unwrap();
                }
                assert_eq!(direct, acc);
            }
        }
    }

    proptest! {
        #[test]
        fn associativity_on_random_triples(seed in 0u64..500) {
            let spec = z4z3();
            let ball = spec.ball_enumerate(4).unwrap();
            let n = ball.len();
            let pick = |s: u64| &ball[(s as usize * 2654435761) % n];
            let (u, v, w) = (pick(seed), pick(seed + 1), pick(seed + 2));
            let left = spec.concat(&spec.concat(u, v).unwrap(), w).unwrap();
            let right = spec.concat(u, &spec.concat(v, w).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn length_subadditive(seed in 0u64..500) {
            let spec = z4z3();
            let ball = spec.ball_enumerate(4).unwrap();
            let n = ball.len();
            let u = &ball[(seed as usize * 2654435761) % n];
            let v = &ball[((seed + 7) as usize * 2654435761) % n];
            let uv = spec.concat(u, v).unwrap();
            prop_assert!(spec.word_length(&uv) <= spec.word_length(u) + spec.word_length(v));
        }
    }
}
