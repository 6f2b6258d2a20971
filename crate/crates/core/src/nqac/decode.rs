use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};
use crate::rng::{stream, StreamRng};
use crate::samples::{Level, SampleSet};

use super::embed::Embedding;
use super::nest::NestedProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    MajorityVote,
    DiscardBroken,
}

/// How physical reads become logical states.
///
/// Ties are settled by a fair coin. The coin for the `k`-th read (counting
/// through the sample set in state order) comes from sub-stream `k` of
/// `tie_seed`, so decoding does not depend on evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodePolicy {
    pub mode: DecodeMode,
    pub tie_seed: u64,
}

impl DecodePolicy {
    pub fn majority(tie_seed: u64) -> Self {
        DecodePolicy {
            mode: DecodeMode::MajorityVote,
            tie_seed,
        }
    }

    pub fn discard(tie_seed: u64) -> Self {
        DecodePolicy {
            mode: DecodeMode::DiscardBroken,
            tie_seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainBreakStats {
    /// Reads presented for decoding.
    pub n_reads: u64,
    /// Reads in which every chain was unanimous.
    pub n_unbroken: u64,
    /// Reads dropped by discard mode.
    pub n_discarded: u64,
    /// Broken chains summed over all reads.
    pub broken_chains: u64,
}

impl ChainBreakStats {
    pub fn unbroken_fraction(&self) -> f64 {
        if self.n_reads == 0 {
            return 0.0;
        }
        self.n_unbroken as f64 / self.n_reads as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub code: SampleSet,
    pub logical: SampleSet,
    pub stats: ChainBreakStats,
}

/// Lazily created coin for one read.
struct Coin<'a> {
    seed: u64,
    index: u64,
    rng: &'a mut Option<StreamRng>,
}

impl Coin<'_> {
    fn vote(&mut self, sum: i32) -> i8 {
        match sum.signum() {
            1 => 1,
            -1 => -1,
            _ => {
                let (seed, index) = (self.seed, self.index);
                let rng = self.rng.get_or_insert_with(|| stream(seed, &[index]));
                if rng.random::<bool>() {
                    1
                } else {
                    -1
                }
            }
        }
    }
}

fn vote_groups(spins: &[i8], groups: &[Vec<usize>], out: &mut [i8], coin: &mut Coin<'_>) {
    for (o, g) in out.iter_mut().zip(groups) {
        let sum: i32 = g.iter().map(|&q| spins[q] as i32).sum();
        *o = coin.vote(sum);
    }
}

fn has_tie(spins: &[i8], groups: &[Vec<usize>]) -> bool {
    groups
        .iter()
        .any(|g| g.iter().map(|&q| spins[q] as i32).sum::<i32>() == 0)
}

/// Physical reads → code states (chain vote) → logical states (code vote).
pub fn decode(
    samples: &SampleSet,
    embedding: &Embedding,
    nested: &NestedProblem,
    policy: DecodePolicy,
) -> Result<Decoded> {
    check_width(embedding.n_physical(), samples.width())?;
    if embedding.n_code() != nested.code_vars() {
        return Err(Error::Dimension {
            expected: nested.code_vars(),
            actual: embedding.n_code(),
        });
    }
    let chains = embedding.compact_chains();
    let groups = code_groups(nested.logical_vars(), nested.config().level());
    run(samples, chains, &groups, policy)
}

/// Code-level reads → logical states, for pipelines without an embedding.
///
/// Discard mode drops reads in which any logical qubit's code copies
/// disagree.
pub fn decode_code_to_logical(
    samples: &SampleSet,
    level: usize,
    policy: DecodePolicy,
) -> Result<Decoded> {
    if level == 0 || samples.width() % level != 0 {
        return Err(Error::domain(format!(
            "code width {} is not a multiple of nesting level {level}",
            samples.width()
        )));
    }
    let chains: Vec<Vec<usize>> = (0..samples.width()).map(|q| vec![q]).collect();
    let groups = code_groups(samples.width() / level, level);
    if policy.mode == DecodeMode::DiscardBroken {
        // Code copies play the role of chains here.
        let logical_chains = groups.clone();
        let identity: Vec<Vec<usize>> = (0..groups.len()).map(|i| vec![i]).collect();
        let mut out = run(samples, &logical_chains, &identity, policy)?;
        let mut code = SampleSet::new(Level::Code, samples.width());
        let mut kept = Vec::new();
        for (s, c) in samples.iter() {
            if !groups.iter().any(|g| g.iter().any(|&q| s.get(q) != s.get(g[0]))) {
                kept.push((s.clone(), c));
            }
        }
        for (s, c) in kept {
            code.insert(s, c)?;
        }
        out.code = code;
        return Ok(out);
    }
    run(samples, &chains, &groups, policy)
}

fn code_groups(n_logical: usize, level: usize) -> Vec<Vec<usize>> {
    (0..n_logical)
        .map(|i| (i * level..(i + 1) * level).collect())
        .collect()
}

fn run(
    samples: &SampleSet,
    chains: &[Vec<usize>],
    groups: &[Vec<usize>],
    policy: DecodePolicy,
) -> Result<Decoded> {
    let mut code_set = SampleSet::new(Level::Code, chains.len());
    let mut logical_set = SampleSet::new(Level::Logical, groups.len());
    let mut stats = ChainBreakStats::default();
    let mut code = vec![0i8; chains.len()];
    let mut logical = vec![0i8; groups.len()];
    let mut index = 0u64;

    for (state, count) in samples.iter() {
        let spins = state.as_slice();
        let first = index;
        index += count;
        stats.n_reads += count;
        let broken = chains
            .iter()
            .filter(|c| c.iter().any(|&q| spins[q] != spins[c[0]]))
            .count() as u64;
        stats.broken_chains += broken * count;
        if broken == 0 {
            stats.n_unbroken += count;
        } else if policy.mode == DecodeMode::DiscardBroken {
            stats.n_discarded += count;
            continue;
        }

        let mut no_rng = None;
        let needs_coin = has_tie(spins, chains) || {
            let mut coin = Coin {
                seed: policy.tie_seed,
                index: first,
                rng: &mut no_rng,
            };
            vote_groups(spins, chains, &mut code, &mut coin);
            has_tie(&code, groups)
        };
        if !needs_coin {
            let mut coin = Coin {
                seed: policy.tie_seed,
                index: first,
                rng: &mut no_rng,
            };
            vote_groups(&code, groups, &mut logical, &mut coin);
            code_set.insert_raw(&code, count);
            logical_set.insert_raw(&logical, count);
            continue;
        }
        for k in first..first + count {
            let mut rng = None;
            let mut coin = Coin {
                seed: policy.tie_seed,
                index: k,
                rng: &mut rng,
            };
            vote_groups(spins, chains, &mut code, &mut coin);
            vote_groups(&code, groups, &mut logical, &mut coin);
            code_set.insert_raw(&code, 1);
            logical_set.insert_raw(&logical, 1);
        }
    }
    Ok(Decoded {
        code: code_set,
        logical: logical_set,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::{IsingProblem, SpinVector};
    use crate::nqac::{chimera, minor_embed, nest, NestingConfig};
    use proptest::prelude::*;

    fn single_chain(n_phys: usize) -> (Embedding, NestedProblem) {
        // One code qubit on a path inside a 2x2 lattice.
        let hw = chimera(2, 2, 4, []).unwrap();
        let path = [hw.id(0, 0, 0, 0), hw.id(0, 0, 1, 0), hw.id(0, 1, 1, 0)];
        let emb = Embedding::new(vec![path[..n_phys].to_vec()], 1.0, &hw).unwrap();
        let nested = nest(&IsingProblem::new(1), NestingConfig::new(1, 1.0).unwrap()).unwrap();
        (emb, nested)
    }

    fn phys(emb: &Embedding, by_hw: &[(usize, i8)]) -> SampleSet {
        let mut s = vec![1i8; emb.n_physical()];
        for &(q, v) in by_hw {
            let k = emb.physical_ids().iter().position(|&p| p == q).unwrap();
            s[k] = v;
        }
        SampleSet::from_states(Level::Physical, s.len(), [SpinVector::new(s).unwrap()]).unwrap()
    }

    #[test]
    fn chain_majority() {
        let (emb, nested) = single_chain(3);
        let chain = emb.chains()[0].clone();
        let all_up = decode(&phys(&emb, &[]), &emb, &nested, DecodePolicy::majority(0)).unwrap();
        assert_eq!(all_up.logical.iter().next().unwrap().0.as_slice(), &[1]);
        assert_eq!(all_up.stats.unbroken_fraction(), 1.0);

        let one_down = phys(&emb, &[(chain[2], -1)]);
        let d = decode(&one_down, &emb, &nested, DecodePolicy::majority(0)).unwrap();
        assert_eq!(d.logical.iter().next().unwrap().0.as_slice(), &[1]);
        assert_eq!(d.stats.n_unbroken, 0);
        assert_eq!(d.stats.broken_chains, 1);
    }

    #[test]
    fn discard_drops_exactly_broken_reads() {
        let (emb, nested) = single_chain(3);
        let chain = emb.chains()[0].clone();
        let mut samples = phys(&emb, &[]);
        samples.merge(&phys(&emb, &[(chain[1], -1)])).unwrap();
        samples
            .merge(&phys(&emb, &[(chain[0], -1), (chain[1], -1), (chain[2], -1)]))
            .unwrap();
        let d = decode(&samples, &emb, &nested, DecodePolicy::discard(0)).unwrap();
        assert_eq!(d.logical.n_total(), 2);
        assert_eq!(d.stats.n_discarded, 1);
        assert!((d.stats.unbroken_fraction() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tie_coin_is_fair() {
        let code = SpinVector::new(vec![1, -1]).unwrap();
        let mut samples = SampleSet::new(Level::Code, 2);
        let trials = 100_000u64;
        samples.insert(code, trials).unwrap();
        let d = decode_code_to_logical(&samples, 2, DecodePolicy::majority(11)).unwrap();
        let up = d.logical.count(&SpinVector::new(vec![1]).unwrap()) as f64;
        let n = trials as f64;
        let sigma = (n * 0.25).sqrt();
        assert!((up - n / 2.0).abs() <= 4.0 * sigma, "up = {up}");
        let again = decode_code_to_logical(&samples, 2, DecodePolicy::majority(11)).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn code_level_discard() {
        let mut samples = SampleSet::new(Level::Code, 4);
        samples.insert(SpinVector::new(vec![1, 1, -1, -1]).unwrap(), 3).unwrap();
        samples.insert(SpinVector::new(vec![1, -1, -1, -1]).unwrap(), 2).unwrap();
        let d = decode_code_to_logical(&samples, 2, DecodePolicy::discard(0)).unwrap();
        assert_eq!(d.logical.n_total(), 3);
        assert_eq!(d.code.n_total(), 3);
        assert_eq!(d.stats.n_discarded, 2);
    }

    #[test]
    fn width_mismatch() {
        let (emb, nested) = single_chain(3);
        let wrong = SampleSet::new(Level::Physical, 2);
        assert!(matches!(
            decode(&wrong, &emb, &nested, DecodePolicy::majority(0)),
            Err(Error::Dimension { .. })
        ));
    }

    fn lift(code: &[i8], emb: &Embedding) -> Vec<i8> {
        let mut out = vec![0i8; emb.n_physical()];
        for (c, chain) in emb.compact_chains().iter().enumerate() {
            for &q in chain {
                out[q] = code[c];
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn majority_is_idempotent_on_unbroken_reads(
            flips in proptest::collection::vec(any::<bool>(), 6),
            seed in any::<u64>(),
        ) {
            let hw = chimera(2, 2, 4, []).unwrap();
            let logical = IsingProblem::new(3);
            let nested = nest(&logical, NestingConfig::new(2, 0.5).unwrap()).unwrap();
            let (_, emb) = minor_embed(&nested, &hw, 0.5).unwrap();
            let code: Vec<i8> = flips.iter().map(|&f| if f { 1 } else { -1 }).collect();
            let reads = SampleSet::from_states(
                Level::Physical,
                emb.n_physical(),
                [SpinVector::new(lift(&code, &emb)).unwrap()],
            ).unwrap();
            let once = decode(&reads, &emb, &nested, DecodePolicy::majority(seed)).unwrap();
            let decoded_code = once.code.iter().next().unwrap().0.clone();
            prop_assert_eq!(decoded_code.as_slice(), &code[..]);
            let relifted = SampleSet::from_states(
                Level::Physical,
                emb.n_physical(),
                [SpinVector::new(lift(decoded_code.as_slice(), &emb)).unwrap()],
            ).unwrap();
            let twice = decode(&relifted, &emb, &nested, DecodePolicy::majority(seed)).unwrap();
            prop_assert_eq!(once.code, twice.code);
        }
    }
}
