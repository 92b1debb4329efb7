use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator of test sets of annulus indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Singletons,
    /// Aligned blocks `{j : (j - 1) >> m = c}` of length `2^m ≥ 2`.
    Dyadic,
    /// Singletons followed by dyadic blocks.
    #[default]
    Default,
    /// `count` unions of one to four singletons or dyadic blocks.
    RandomUnions { seed: u64, count: usize },
}

/// Nonempty sorted index sets inside `1..=window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetFamily {
    pub spec: FamilySpec,
    pub window: usize,
    pub sets: Vec<Vec<usize>>,
}

fn singletons(window: usize) -> Vec<Vec<usize>> {
    (1..=window).map(|j| vec![j]).collect()
}

fn dyadic(window: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut len = 2;
    while len <= window {
        let mut start = 1;
        while start + len - 1 <= window {
            out.push((start..start + len).collect());
            start += len;
        }
        len *= 2;
    }
    out
}

impl SetFamily {
    pub fn generate(spec: &FamilySpec, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Unsupported("empty window leaves no test sets".into()));
        }
        let sets = match spec {
            FamilySpec::Singletons => singletons(window),
            FamilySpec::Dyadic => dyadic(window),
            FamilySpec::Default => {
                let mut s = singletons(window);
                s.extend(dyadic(window));
                s
            }
            FamilySpec::RandomUnions { seed, count } => {
                let mut pool = singletons(window);
                pool.extend(dyadic(window));
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count)
                    .map(|_| {
                        let mut set: Vec<usize> = (0..rng.random_range(1..=4))
                            .flat_map(|_| pool[rng.random_range(0..pool.len())].clone())
                            .collect();
                        set.sort_unstable();
                        set.dedup();
                        set
                    })
                    .collect()
            }
        };
        if sets.is_empty() {
            return Err(Error::Unsupported(format!("family {spec:?} is empty on window {window}")));
        }
        Ok(SetFamily {
            spec: spec.clone(),
            window,
            sets,
        })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}
