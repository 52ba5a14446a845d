//! Seeded Monte Carlo engine for branching random walks and the coloured
//! (freezing) variant. Replicas are independent ChaCha streams; merged
//! statistics are integer sums, so aggregates are bit-identical for a fixed
//! (seed, replica count) regardless of worker scheduling.

use crate::error::SimError;
use crate::group::{FreeProduct, Word};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::{HashMap, HashSet};

/// Finite-support offspring distribution on {0, 1, 2, ...}.
#[derive(Debug, Clone)]
pub struct OffspringDistribution {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    second_moment: f64,
}

impl OffspringDistribution {
    pub fn new(pmf: Vec<f64>) -> Result<OffspringDistribution, SimError> {
        if pmf.is_empty() {
            return Err(SimError::InvalidOffspring("empty pmf".into()));
        }
        if pmf.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(SimError::InvalidOffspring("negative or non-finite mass".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(SimError::InvalidOffspring(format!(
                "pmf sums to {total}, expected 1"
            )));
        }
        if pmf[0] > 0.0 {
            return Err(SimError::InvalidOffspring(
                "nu(0) > 0 is excluded (survival must be certain)".into(),
            ));
        }
        if pmf.len() > 1 && (pmf[1] - 1.0).abs() <= 1e-12 {
            return Err(SimError::InvalidOffspring(
                "nu(1) = 1 is excluded (the walk would not branch)".into(),
            ));
        }
        if pmf.len() == 1 {
            return Err(SimError::InvalidOffspring("support is empty".into()));
        }
        let mean = pmf.iter().enumerate().map(|(k, &p)| k as f64 * p).sum();
        let second_moment = pmf
            .iter()
            .enumerate()
            .map(|(k, &p)| (k * k) as f64 * p)
            .sum();
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(OffspringDistribution {
            pmf,
            cdf,
            mean,
            second_moment,
        })
    }

    /// Point mass at `k` (k >= 2; smaller values are excluded).
    pub fn point(k: usize) -> Result<OffspringDistribution, SimError> {
        let mut pmf = vec![0.0; k + 1];
        pmf[k] = 1.0;
        OffspringDistribution::new(pmf)
    }

    /// Truncated geometric on {1..max_k} with the weight ratio tuned so the
    /// mean hits `mean`.
    pub fn geometric_truncated(mean: f64, max_k: usize) -> Result<OffspringDistribution, SimError> {
        if max_k < 2 || mean <= 1.0 || mean >= (max_k as f64 + 1.0) / 2.0 {
            return Err(SimError::InvalidOffspring(format!(
                "mean {mean} unreachable on support 1..{max_k}"
            )));
        }
        let mean_of = |q: f64| -> f64 {
            let mut num = 0.0;
            let mut den = 0.0;
            let mut w = 1.0;
            for k in 1..=max_k {
                num += k as f64 * w;
                den += w;
                w *= q;
            }
            num / den
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_of(mid) < mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = 0.5 * (lo + hi);
        let mut pmf = vec![0.0; max_k + 1];
        let mut w = 1.0;
        for k in 1..=max_k {
            pmf[k] = w;
            w *= q;
        }
        let total: f64 = pmf.iter().sum();
        for p in &mut pmf {
            *p /= total;
        }
        OffspringDistribution::new(pmf)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c < u)
    }
}

/// Precomputed cumulative table for one lifted step of the walk.
struct StepSampler {
    cum: Vec<f64>,
    letters: Vec<(u16, u32)>,
}

impl StepSampler {
    fn new(spec: &FreeProduct) -> StepSampler {
        let mut cum = Vec::new();
        let mut letters = Vec::new();
        let mut acc = 0.0;
        for i in 0..spec.factor_count() {
            for (g, p) in spec.factor(i).support() {
                acc += spec.weight(i) * p;
                cum.push(acc);
                letters.push((i as u16, g));
            }
        }
        StepSampler { cum, letters }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (u16, u32) {
        let u: f64 = rng.random();
        let idx = self.cum.partition_point(|&c| c < u).min(self.letters.len() - 1);
        self.letters[idx]
    }
}

fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// One plain BRW run: per-generation populations and the visited-site index.
#[derive(Debug, Clone)]
pub struct BrwRun {
    pub seed: u64,
    pub generations: u32,
    pub particle_cap: u64,
    /// Population per generation, index 0 = the initial particle.
    pub populations: Vec<u64>,
    /// First-visit generation per site.
    pub visited: HashMap<Word, u32>,
    /// The particle cap was hit and the run stopped early.
    pub truncated: bool,
}

/// Run one branching random walk. Branch-then-move per generation: every
/// particle draws offspring and dies, then each descendant makes one step
/// (dying at the tomb of a truncated factor).
pub fn run_brw(
    spec: &FreeProduct,
    nu: &OffspringDistribution,
    generations: u32,
    particle_cap: u64,
    seed: u64,
) -> Result<BrwRun, SimError> {
    if particle_cap == 0 {
        return Err(SimError::InvalidParams("particle cap must be positive".into()));
    }
    let sampler = StepSampler::new(spec);
    let mut rng = replica_rng(seed, 0);
    let mut particles = vec![spec.identity()];
    let mut visited = HashMap::new();
    visited.insert(spec.identity(), 0u32);
    let mut populations = vec![1u64];
    let mut truncated = false;
    for gen in 1..=generations {
        let mut next = Vec::with_capacity(particles.len() * 2);
        'outer: for particle in &particles {
            let k = nu.sample(&mut rng);
            for _ in 0..k {
                let (i, g) = sampler.sample(&mut rng);
                if let Some(pos) = spec.step(particle, i, g) {
                    visited.entry(pos.clone()).or_insert(gen);
                    next.push(pos);
                    if next.len() as u64 > particle_cap {
                        truncated = true;
                        break 'outer;
                    }
                }
            }
        }
        populations.push(next.len() as u64);
        particles = next;
        if truncated || particles.is_empty() {
            break;
        }
    }
    Ok(BrwRun {
        seed,
        generations,
        particle_cap,
        populations,
        visited,
        truncated,
    })
}

/// Coloured-BRW estimate of the expected total frozen count in a target set.
#[derive(Debug, Clone)]
pub struct ZInftyEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: u64,
    /// Replicas dropped because they hit the particle cap.
    pub excluded: u64,
    /// Frozen-count increments per generation, aggregated over replicas.
    pub frozen_by_gen: Vec<u64>,
    /// Fraction of the total frozen mass arriving in the last quarter of the
    /// generation window; the capped estimator is trusted when this is small.
    pub stabilization: f64,
    pub stabilized: bool,
}

/// Mean and standard error of Z_infinity(M) under a generation cap. The
/// estimator is lower-biased by the cap; the stabilization diagnostic reports
/// the trailing-window share.
pub fn estimate_z_infty(
    spec: &FreeProduct,
    nu: &OffspringDistribution,
    targets: &[Word],
    replicas: u64,
    generations: u32,
    particle_cap: u64,
    seed: u64,
) -> Result<ZInftyEstimate, SimError> {
    if replicas == 0 {
        return Err(SimError::InvalidParams("need at least one replica".into()));
    }
    let target_set: HashSet<&Word> = targets.iter().collect();
    let sampler = StepSampler::new(spec);
    let gens = generations as usize;
    #[derive(Clone)]
    struct Acc {
        count_sum: u64,
        count_sq_sum: u128,
        by_gen: Vec<u64>,
        excluded: u64,
        valid: u64,
    }
    let zero = Acc {
        count_sum: 0,
        count_sq_sum: 0,
        by_gen: vec![0; gens + 1],
        excluded: 0,
        valid: 0,
    };
    let merge = |mut a: Acc, b: Acc| {
        a.count_sum += b.count_sum;
        a.count_sq_sum += b.count_sq_sum;
        for (x, y) in a.by_gen.iter_mut().zip(&b.by_gen) {
            *x += y;
        }
        a.excluded += b.excluded;
        a.valid += b.valid;
        a
    };
    let result = (0..replicas)
        .into_par_iter()
        .fold(
            || zero.clone(),
            |mut acc, rep| {
                let mut rng = replica_rng(seed, rep + 1);
                let mut frozen = 0u64;
                let mut by_gen = vec![0u64; gens + 1];
                let mut truncated = false;
                let mut particles = Vec::new();
                let start = spec.identity();
                if target_set.contains(&start) {
                    frozen += 1;
                    by_gen[0] += 1;
                } else {
                    particles.push(start);
                }
                'gens: for gen in 1..=gens {
                    if particles.is_empty() {
                        break;
                    }
                    let mut next = Vec::with_capacity(particles.len() * 2);
                    for particle in &particles {
                        let k = nu.sample(&mut rng);
                        for _ in 0..k {
                            let (i, g) = sampler.sample(&mut rng);
                            if let Some(pos) = spec.step(particle, i, g) {
                                if target_set.contains(&pos) {
                                    frozen += 1;
                                    by_gen[gen] += 1;
                                } else {
                                    next.push(pos);
                                    if next.len() as u64 > particle_cap {
                                        truncated = true;
                                        break 'gens;
                                    }
                                }
                            }
                        }
                    }
                    particles = next;
                }
                if truncated {
                    acc.excluded += 1;
                } else {
                    acc.valid += 1;
                    acc.count_sum += frozen;
                    acc.count_sq_sum += (frozen as u128) * (frozen as u128);
                    for (x, y) in acc.by_gen.iter_mut().zip(&by_gen) {
                        *x += y;
                    }
                }
                acc
            },
        )
        .reduce(|| zero.clone(), merge);
    let valid = result.valid.max(1);
    let mean = result.count_sum as f64 / valid as f64;
    let var = (result.count_sq_sum as f64 / valid as f64 - mean * mean).max(0.0);
    let stderr = (var / valid as f64).sqrt();
    let total: u64 = result.by_gen.iter().sum();
    let tail_start = gens - gens / 4;
    let tail: u64 = result.by_gen[tail_start..].iter().sum();
    let stabilization = if total == 0 {
        0.0
    } else {
        tail as f64 / total as f64
    };
    Ok(ZInftyEstimate {
        mean,
        stderr,
        replicas: result.valid,
        excluded: result.excluded,
        frozen_by_gen: result.by_gen,
        stabilization,
        stabilized: stabilization < 0.01,
    })
}

/// Per-stage statistics of the embedded Galton-Watson process that freezes
/// at one factor's non-identity elements.
#[derive(Debug, Clone)]
pub struct GwReport {
    /// (total parents, total children) per stage, across replicas.
    pub stages: Vec<(u64, u64)>,
    pub stage1_mean: f64,
    pub stage1_stderr: f64,
    /// Fraction of replicas still alive at the final stage.
    pub survival_fraction: f64,
    pub excluded: u64,
    pub replicas: u64,
}

/// Simulate the freezing construction stage by stage: generation n+1 consists
/// of the particles frozen in Gamma_i minus the parent's own site, over a
/// fresh coloured BRW per parent.
pub fn embedded_gw(
    spec: &FreeProduct,
    nu: &OffspringDistribution,
    factor: usize,
    stages: u32,
    replicas: u64,
    generations_per_stage: u32,
    particle_budget: u64,
    seed: u64,
) -> Result<GwReport, SimError> {
    if factor >= spec.factor_count() {
        return Err(SimError::InvalidParams(format!(
            "factor {factor} out of range"
        )));
    }
    let sampler = StepSampler::new(spec);
    #[derive(Clone)]
    struct Acc {
        stages: Vec<(u64, u64)>,
        stage1_sum: u64,
        stage1_sq: u128,
        survived: u64,
        excluded: u64,
        valid: u64,
    }
    let zero = Acc {
        stages: vec![(0, 0); stages as usize],
        stage1_sum: 0,
        stage1_sq: 0,
        survived: 0,
        excluded: 0,
        valid: 0,
    };
    let merge = |mut a: Acc, b: Acc| {
        for (x, y) in a.stages.iter_mut().zip(&b.stages) {
            x.0 += y.0;
            x.1 += y.1;
        }
        a.stage1_sum += b.stage1_sum;
        a.stage1_sq += b.stage1_sq;
        a.survived += b.survived;
        a.excluded += b.excluded;
        a.valid += b.valid;
        a
    };
    let fi = factor as u16;
    let result = (0..replicas)
        .into_par_iter()
        .fold(
            || zero.clone(),
            |mut acc, rep| {
                let mut rng = replica_rng(seed, rep + 1);
                let mut parents = vec![spec.identity()];
                let mut budget = particle_budget;
                let mut stage_data = Vec::with_capacity(stages as usize);
                let mut overran = false;
                for _stage in 0..stages {
                    let mut children: Vec<Word> = Vec::new();
                    'parents: for parent in &parents {
                        // Freeze on Gamma_i (identity included) minus the
                        // parent's own site.
                        let mut particles = vec![parent.clone()];
                        for _gen in 0..generations_per_stage {
                            if particles.is_empty() {
                                break;
                            }
                            let mut moving = Vec::with_capacity(particles.len() * 2);
                            for p in &particles {
                                let k = nu.sample(&mut rng);
                                for _ in 0..k {
                                    if budget == 0 {
                                        overran = true;
                                        break 'parents;
                                    }
                                    budget -= 1;
                                    let (i, g) = sampler.sample(&mut rng);
                                    if let Some(pos) = spec.step(p, i, g) {
                                        let in_factor = pos.is_identity()
                                            || (pos.block_len() == 1
                                                && pos.blocks()[0].0 == fi);
                                        if in_factor && &pos != parent {
                                            children.push(pos);
                                        } else if !in_factor {
                                            moving.push(pos);
                                        } else {
                                            // stepping back onto the parent's
                                            // site: that cannot happen in one
                                            // step from the parent, and later
                                            // visits to it are not frozen,
                                            // so the particle keeps moving.
                                            moving.push(pos);
                                        }
                                    }
                                }
                            }
                            particles = moving;
                        }
                        if overran {
                            break;
                        }
                    }
                    stage_data.push((parents.len() as u64, children.len() as u64));
                    parents = children;
                    if overran || parents.is_empty() {
                        break;
                    }
                }
                if overran {
                    acc.excluded += 1;
                    return acc;
                }
                acc.valid += 1;
                for (k, &(p, c)) in stage_data.iter().enumerate() {
                    acc.stages[k].0 += p;
                    acc.stages[k].1 += c;
                }
                if let Some(&(_, c1)) = stage_data.first() {
                    acc.stage1_sum += c1;
                    acc.stage1_sq += (c1 as u128) * (c1 as u128);
                }
                let alive = stage_data.len() == stages as usize
                    && stage_data.last().is_some_and(|&(_, c)| c > 0);
                if alive {
                    acc.survived += 1;
                }
                acc
            },
        )
        .reduce(|| zero.clone(), merge);
    let valid = result.valid.max(1);
    let mean = result.stage1_sum as f64 / valid as f64;
    let var = (result.stage1_sq as f64 / valid as f64 - mean * mean).max(0.0);
    Ok(GwReport {
        stages: result.stages,
        stage1_mean: mean,
        stage1_stderr: (var / valid as f64).sqrt(),
        survival_fraction: result.survived as f64 / valid as f64,
        excluded: result.excluded,
        replicas: result.valid,
    })
}

/// Visited-site counts per radius, averaged over replicas.
#[derive(Debug, Clone)]
pub struct TraceReport {
    /// (m, mean visited count at radius m, mean^(1/m)).
    pub per_m: Vec<(u32, f64, f64)>,
    pub replicas: u64,
}

pub fn trace_spheres(
    spec: &FreeProduct,
    nu: &OffspringDistribution,
    replicas: u64,
    generations: u32,
    particle_cap: u64,
    seed: u64,
) -> Result<TraceReport, SimError> {
    let m_max = generations;
    let counts = (0..replicas)
        .into_par_iter()
        .fold(
            || vec![0u64; m_max as usize + 1],
            |mut acc, rep| {
                let run = run_brw(spec, nu, generations, particle_cap, seed ^ (rep + 1))
                    .expect("validated parameters");
                for word in run.visited.keys() {
                    let l = spec.word_length(word);
                    if l <= m_max {
                        acc[l as usize] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; m_max as usize + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    let per_m = counts
        .iter()
        .enumerate()
        .map(|(m, &c)| {
            let mean = c as f64 / replicas as f64;
            let root = if m == 0 { mean } else { mean.powf(1.0 / m as f64) };
            (m as u32, mean, root)
        })
        .collect();
    Ok(TraceReport {
        per_m,
        replicas,
    })
}

/// Aggregated histogram of generation-n particle positions over replicas.
pub fn generation_marginal(
    spec: &FreeProduct,
    nu: &OffspringDistribution,
    generation: u32,
    replicas: u64,
    particle_cap: u64,
    seed: u64,
) -> Result<HashMap<Word, u64>, SimError> {
    let sampler = StepSampler::new(spec);
    let result = (0..replicas)
        .into_par_iter()
        .fold(HashMap::new, |mut acc: HashMap<Word, u64>, rep| {
            let mut rng = replica_rng(seed, rep + 1);
            let mut particles = vec![spec.identity()];
            for _ in 0..generation {
                let mut next = Vec::with_capacity(particles.len() * 2);
                'outer: for p in &particles {
                    let k = nu.sample(&mut rng);
                    for _ in 0..k {
                        let (i, g) = sampler.sample(&mut rng);
                        if let Some(pos) = spec.step(p, i, g) {
                            next.push(pos);
                            if next.len() as u64 > particle_cap {
                                break 'outer;
                            }
                        }
                    }
                }
                particles = next;
            }
            for p in particles {
                *acc.entry(p).or_insert(0) += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    Ok(result)
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
    fn offspring_validation() {
        assert!(OffspringDistribution::new(vec![0.1, 0.9]).is_err(), "nu(0) > 0");
        assert!(OffspringDistribution::new(vec![0.0, 1.0]).is_err(), "nu(1) = 1");
        assert!(OffspringDistribution::point(1).is_err());
        let nu = OffspringDistribution::new(vec![0.0, 0.95, 0.05]).unwrap();
        assert!((nu.mean() - 1.05).abs() < 1e-12);
        assert!((nu.second_moment() - (0.95 + 4.0 * 0.05)).abs() < 1e-12);
    }

    #[test]
    fn geometric_truncated_hits_the_mean() {
        let nu = OffspringDistribution::geometric_truncated(1.05, 8).unwrap();
        assert!((nu.mean() - 1.05).abs() < 1e-9);
        assert_eq!(nu.pmf()[0], 0.0);
    }

    #[test]
    fn deterministic_doubling() {
        let spec = z3z2();
        let nu = OffspringDistribution::point(2).unwrap();
        let run = run_brw(&spec, &nu, 3, 1_000_000, 7).unwrap();
        assert_eq!(run.populations, vec![1, 2, 4, 8]);
        assert!(!run.truncated);
    }

    #[test]
    fn reproducible_aggregates() {
        let spec = z3z2();
        let nu = OffspringDistribution::geometric_truncated(1.05, 6).unwrap();
        let b = spec.word(&[(1, 1)]).unwrap();
        let e1 = estimate_z_infty(&spec, &nu, &[b.clone()], 500, 30, 100_000, 42).unwrap();
        let e2 = estimate_z_infty(&spec, &nu, &[b], 500, 30, 100_000, 42).unwrap();
        assert_eq!(e1.mean.to_bits(), e2.mean.to_bits());
        assert_eq!(e1.frozen_by_gen, e2.frozen_by_gen);
    }

    #[test]
    fn population_mean_tracks_lambda_power() {
        let spec = z3z2();
        let nu = OffspringDistribution::new(vec![0.0, 0.8, 0.2]).unwrap();
        let lambda = nu.mean();
        let reps = 3000u64;
        let gens = 4u32;
        let mut sum = 0u64;
        let mut sumsq = 0u128;
        for rep in 0..reps {
            let run = run_brw(&spec, &nu, gens, 1_000_000, 1000 + rep).unwrap();
            let p = run.populations[gens as usize];
            sum += p;
            sumsq += (p as u128) * (p as u128);
        }
        let mean = sum as f64 / reps as f64;
        let var = sumsq as f64 / reps as f64 - mean * mean;
        let stderr = (var / reps as f64).sqrt();
        let expect = lambda.powi(gens as i32);
        assert!(
            (mean - expect).abs() <= 3.0 * stderr + 1e-9,
            "E|T_n| = lambda^n: {mean} vs {expect} (3se = {})",
            3.0 * stderr
        );
    }

    #[test]
    fn marginal_matches_convolution_at_small_n() {
        let spec = z3z2();
        let nu = OffspringDistribution::new(vec![0.0, 0.9, 0.1]).unwrap();
        let hist = generation_marginal(&spec, &nu, 2, 40_000, 1_000_000, 5).unwrap();
        let conv = crate::oracle::convolution_powers(&spec, 2).unwrap();
        let tv = conv.tv_distance(2, &hist);
        assert!(tv < 0.02, "TV distance {tv}");
    }

    #[test]
    fn z_infty_counts_first_visits_once() {
        // nu = point mass at 2, freeze on b: with only 2 generations the
        // frozen increments live in generations 1..=2 and never exceed the
        // population bound.
        let spec = z3z2();
        let nu = OffspringDistribution::point(2).unwrap();
        let est = estimate_z_infty(
            &spec,
            &nu,
            &[spec.word(&[(1, 1)]).unwrap()],
            2000,
            2,
            10_000,
            11,
        )
        .unwrap();
        assert_eq!(est.frozen_by_gen[0], 0, "the start site is not in M");
        let total: u64 = est.frozen_by_gen.iter().sum();
        assert!(total > 0);
        assert!(est.mean <= 2.0 + 1.0, "cannot exceed the two-generation population");
    }

    #[test]
    fn subcritical_embedded_gw_dies_out() {
        let spec = z3z2();
        let nu = OffspringDistribution::new(vec![0.0, 0.99, 0.01]).unwrap();
        let report = embedded_gw(&spec, &nu, 0, 26, 400, 40, 2_000_000, 99).unwrap();
        assert!(report.survival_fraction < 0.08, "xi < 1 forces extinction");
        assert!(report.stage1_mean < 1.0);
    }

    #[test]
    fn trace_starts_at_the_origin() {
        let spec = z3z2();
        let nu = OffspringDistribution::point(2).unwrap();
        let report = trace_spheres(&spec, &nu, 50, 0, 1000, 3).unwrap();
        assert_eq!(report.per_m[0].1, 1.0, "H_0 = {{e}}");
    }
}
