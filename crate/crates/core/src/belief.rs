//! Exact belief over which of the agent's dots the partner can also see.
//!
//! A world is a bitmask over the agent's dots in scene order; the belief is a
//! dense vector over all `2^N` worlds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{DotId, Scene};
use crate::perception::{circumradius, Config, PerceptionError};

pub const MAX_DOTS: usize = 12;

const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum BeliefError {
    #[error("belief supports at most {MAX_DOTS} dots, scene has {0}")]
    TooManyDots(usize),
    #[error("unknown dot id {0}")]
    UnknownDot(DotId),
    #[error("observation leaves no probability mass")]
    Degenerate,
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

/// Heuristic model of how the partner talks about and answers for dots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartnerModel {
    /// Probability that an answer contradicts the partner's actual view.
    pub confirm_noise: f64,
    /// Rate of the compactness factor for configurations the partner mentions.
    pub compact_rate: f64,
}

impl Default for PartnerModel {
    fn default() -> Self {
        PartnerModel { confirm_noise: 0.1, compact_rate: 5.0 }
    }
}

impl PartnerModel {
    /// Probability of a "yes" to a question about a configuration, given
    /// whether the configuration is contained in the world.
    pub fn p_yes(&self, contained: bool) -> f64 {
        if contained {
            1.0 - self.confirm_noise
        } else {
            self.confirm_noise
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    /// The partner described this configuration (most likely reading).
    PartnerAsserts(Config),
    PartnerConfirms {
        answer: bool,
        config: Config,
    },
    PartnerDeniesAll(Config),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorOptions {
    /// Zero the mass of worlds whose size differs from the known shared count.
    pub condition_on_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    ids: Vec<DotId>,
    probs: Vec<f64>,
}

impl BeliefState {
    pub fn uniform(ids: Vec<DotId>) -> Result<Self, BeliefError> {
        if ids.len() > MAX_DOTS {
            return Err(BeliefError::TooManyDots(ids.len()));
        }
        let n = 1usize << ids.len();
        Ok(BeliefState { ids, probs: vec![1.0 / n as f64; n] })
    }

    /// Builds a belief from raw (unnormalized) world weights.
    pub fn from_weights(ids: Vec<DotId>, weights: Vec<f64>) -> Result<Self, BeliefError> {
        if ids.len() > MAX_DOTS {
            return Err(BeliefError::TooManyDots(ids.len()));
        }
        assert_eq!(weights.len(), 1 << ids.len(), "one weight per world");
        let mut b = BeliefState { ids, probs: weights };
        b.normalize()?;
        Ok(b)
    }

    pub fn ids(&self) -> &[DotId] {
        &self.ids
    }

    pub fn n_dots(&self) -> usize {
        self.ids.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn is_normalized(&self) -> bool {
        self.probs.iter().all(|p| *p >= 0.0) && (self.probs.iter().sum::<f64>() - 1.0).abs() <= NORM_TOL
    }

    pub fn bit(&self, id: DotId) -> Result<usize, BeliefError> {
        self.ids.iter().position(|d| *d == id).ok_or(BeliefError::UnknownDot(id))
    }

    pub fn mask_of(&self, cfg: &Config) -> Result<u32, BeliefError> {
        cfg.ids().iter().try_fold(0u32, |m, id| Ok(m | 1 << self.bit(*id)?))
    }

    /// Sparse snapshot of the worlds with non-zero mass.
    pub fn snapshot(&self) -> Vec<(u32, f64)> {
        self.probs.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(z, p)| (z as u32, *p)).collect()
    }

    /// Probability that every dot of `cfg` is shared.
    pub fn prob_contains(&self, cfg: &Config) -> Result<f64, BeliefError> {
        let m = self.mask_of(cfg)? as usize;
        Ok(self.probs.iter().enumerate().filter(|(z, _)| z & m == m).map(|(_, p)| p).sum())
    }

    fn normalize(&mut self) -> Result<(), BeliefError> {
        let total: f64 = self.probs.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(BeliefError::Degenerate);
        }
        self.probs.iter_mut().for_each(|p| *p /= total);
        Ok(())
    }

    /// Per-world likelihood of an observation.
    pub fn likelihood(&self, obs: &Observation, model: &PartnerModel, scene: &Scene) -> Result<Vec<f64>, BeliefError> {
        let eps = model.confirm_noise;
        let (cfg, inside, outside) = match obs {
            Observation::PartnerAsserts(c) => {
                let gate = (-model.compact_rate * circumradius(c, scene)?).exp();
                (c, gate * (1.0 - eps), eps)
            }
            Observation::PartnerConfirms { answer: true, config } => (config, 1.0 - eps, eps),
            Observation::PartnerConfirms { answer: false, config } | Observation::PartnerDeniesAll(config) => {
                (config, eps, 1.0 - eps)
            }
        };
        let m = self.mask_of(cfg)? as usize;
        Ok((0..self.probs.len()).map(|z| if z & m == m { inside } else { outside }).collect())
    }

    /// Posterior after one observation: prior times likelihood, renormalized.
    pub fn update(&self, obs: &Observation, model: &PartnerModel, scene: &Scene) -> Result<BeliefState, BeliefError> {
        let lik = self.likelihood(obs, model, scene)?;
        let mut next = self.clone();
        next.probs.iter_mut().zip(&lik).for_each(|(p, l)| *p *= l);
        next.normalize()?;
        Ok(next)
    }

    pub fn marginal(&self, id: DotId) -> Result<f64, BeliefError> {
        let b = 1usize << self.bit(id)?;
        Ok(self.probs.iter().enumerate().filter(|(z, _)| z & b != 0).map(|(_, p)| p).sum())
    }

    pub fn marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ids.len()];
        for (z, p) in self.probs.iter().enumerate() {
            for (i, m) in out.iter_mut().enumerate() {
                if z >> i & 1 == 1 {
                    *m += p;
                }
            }
        }
        out
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.probs)
    }
}

pub(crate) fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|p| **p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

/// Undirected nearest-neighbor rank weights: `min(rank_i(j), rank_j(i))`,
/// where rank 0 is the nearest neighbor.
pub fn rank_weights(scene: &Scene) -> Vec<Vec<u32>> {
    let n = scene.len();
    let mut rank = vec![vec![0u32; n]; n];
    for (i, row) in rank.iter_mut().enumerate() {
        let mut others: Vec<usize> = (0..n).filter(|j| *j != i).collect();
        others.sort_by(|a, b| {
            let da = scene.dots[i].distance_to(&scene.dots[*a]);
            let db = scene.dots[i].distance_to(&scene.dots[*b]);
            da.total_cmp(&db).then(a.cmp(b))
        });
        for (r, j) in others.into_iter().enumerate() {
            row[j] = r as u32;
        }
    }
    (0..n).map(|i| (0..n).map(|j| rank[i][j].min(rank[j][i])).collect()).collect()
}

/// Weight of the minimum spanning tree over the dots in world `z`.
pub fn mst_weight(weights: &[Vec<u32>], z: u32) -> u32 {
    let nodes: Vec<usize> = (0..weights.len()).filter(|i| z >> i & 1 == 1).collect();
    if nodes.len() <= 1 {
        return 0;
    }
    // Prim's algorithm on the induced complete graph.
    let mut in_tree = vec![false; nodes.len()];
    let mut best = vec![u32::MAX; nodes.len()];
    best[0] = 0;
    let mut total = 0;
    for _ in 0..nodes.len() {
        let (u, _) =
            best.iter().enumerate().filter(|(i, _)| !in_tree[*i]).min_by_key(|(_, w)| **w).expect("a vertex remains");
        in_tree[u] = true;
        total += best[u];
        for v in 0..nodes.len() {
            if !in_tree[v] {
                best[v] = best[v].min(weights[nodes[u]][nodes[v]]);
            }
        }
    }
    total
}

pub fn build_prior(scene: &Scene) -> Result<BeliefState, BeliefError> {
    build_prior_with(scene, &PriorOptions::default())
}

/// Proximity prior `p(z) ∝ exp(-f(z))` where `f` is the rank-weighted MST
/// over the dots in `z`: tight clusters are likely to be shared together.
pub fn build_prior_with(scene: &Scene, opts: &PriorOptions) -> Result<BeliefState, BeliefError> {
    let n = scene.len();
    if n > MAX_DOTS {
        return Err(BeliefError::TooManyDots(n));
    }
    let w = rank_weights(scene);
    let weights = (0..1u32 << n)
        .map(|z| match opts.condition_on_k {
            Some(k) if z.count_ones() as usize != k => 0.0,
            _ => (-(mst_weight(&w, z) as f64)).exp(),
        })
        .collect();
    BeliefState::from_weights(scene.ids().collect(), weights)
}
