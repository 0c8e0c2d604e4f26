//! Game boards: a global set of dots, two overlapping circular views, and the
//! hidden set of dots visible to both players.
//!
//! Each view is stored in its owner's frame: coordinates are re-centered on
//! the owner's viewport, so the overlap cannot be read off raw positions.
//! Dot ids are drawn from a shuffled global range and are identical for a
//! dot seen by both players; only the adjudicator compares ids across views.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a dot, shared by both views when the dot is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DotId(pub u32);

impl fmt::Display for DotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dot {
    pub id: DotId,
    pub x: f64,
    pub y: f64,
    /// Normalized size in [-1, 1]; lower is smaller.
    pub size: f64,
    /// Normalized darkness in [-1, 1]; lower is darker.
    pub color: f64,
}

impl Dot {
    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance_to(&self, other: &Dot) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One player's view of the board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub dots: Vec<Dot>,
    pub center: [f64; 2],
    pub radius: f64,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.dots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dots.is_empty()
    }

    pub fn dot(&self, id: DotId) -> Option<&Dot> {
        self.dots.iter().find(|d| d.id == id)
    }

    /// Position of `id` within `dots`, which is also its bit in a world mask.
    pub fn index_of(&self, id: DotId) -> Option<usize> {
        self.dots.iter().position(|d| d.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = DotId> + '_ {
        self.dots.iter().map(|d| d.id)
    }

    /// Checks the scene invariants against a minimum dot separation.
    pub fn validate(&self, min_dot_distance: f64) -> Result<(), ContextError> {
        let mut seen = BTreeSet::new();
        for d in &self.dots {
            if !seen.insert(d.id) {
                return Err(ContextError::Invalid(format!("duplicate dot id {}", d.id)));
            }
            for (name, v) in [("x", d.x), ("y", d.y), ("size", d.size), ("color", d.color)] {
                if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                    return Err(ContextError::Invalid(format!("dot {} field {name} = {v} outside [-1, 1]", d.id)));
                }
            }
            let r = (d.x - self.center[0]).hypot(d.y - self.center[1]);
            if r >= self.radius {
                return Err(ContextError::Invalid(format!("dot {} lies outside the viewport (r = {r})", d.id)));
            }
        }
        for (i, a) in self.dots.iter().enumerate() {
            for b in &self.dots[i + 1..] {
                if a.distance_to(b) < min_dot_distance {
                    return Err(ContextError::Invalid(format!(
                        "dots {} and {} closer than {min_dot_distance}",
                        a.id, b.id
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameContext {
    pub seed: u64,
    pub k: usize,
    pub agent_scene: Scene,
    pub partner_scene: Scene,
    pub shared: Vec<DotId>,
}

impl GameContext {
    pub fn is_shared(&self, id: DotId) -> bool {
        self.shared.binary_search(&id).is_ok()
    }

    pub fn validate(&self, geometry: &ContextConfig) -> Result<(), ContextError> {
        self.agent_scene.validate(geometry.min_dot_distance)?;
        self.partner_scene.validate(geometry.min_dot_distance)?;
        let a: BTreeSet<DotId> = self.agent_scene.ids().collect();
        let b: BTreeSet<DotId> = self.partner_scene.ids().collect();
        let inter: Vec<DotId> = a.intersection(&b).copied().collect();
        if inter != self.shared {
            return Err(ContextError::Invalid(format!(
                "shared {:?} does not match view intersection {:?}",
                self.shared, inter
            )));
        }
        if self.shared.len() != self.k {
            return Err(ContextError::Invalid(format!("|shared| = {} but k = {}", self.shared.len(), self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("cannot construct context: {0}")]
    Infeasible(String),
    #[error("malformed context record: {0}")]
    Malformed(String),
    #[error("invalid context: {0}")]
    Invalid(String),
}

/// Board geometry used by [`generate_context`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub n_per_view: usize,
    pub view_radius: f64,
    /// Distance between the two viewport centers on the global board.
    pub center_distance: f64,
    pub min_dot_distance: f64,
    /// Dots keep at least this distance from every viewport edge they are inside.
    pub edge_margin: f64,
    /// Total point samples allowed before giving up.
    pub max_samples: usize,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            n_per_view: 7,
            view_radius: 1.0,
            center_distance: 1.0,
            min_dot_distance: 0.12,
            edge_margin: 0.05,
            max_samples: 20_000,
        }
    }
}

/// Builds a board: `k` dots in the lens where both views overlap and
/// `n_per_view - k` private dots per view outside the other player's circle.
pub fn generate_context(seed: u64, k: usize, cfg: &ContextConfig) -> Result<GameContext, ContextError> {
    let n = cfg.n_per_view;
    if k == 0 || k > n {
        return Err(ContextError::Infeasible(format!("shared count k = {k} must be in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = cfg.view_radius;
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let half = cfg.center_distance / 2.0;
    let ca = [-half * angle.cos(), -half * angle.sin()];
    let cb = [half * angle.cos(), half * angle.sin()];
    let inner = r - cfg.edge_margin;
    let inside = |p: [f64; 2], c: [f64; 2]| (p[0] - c[0]).hypot(p[1] - c[1]) < inner;
    // Private dots must stay clearly outside the other circle so they are never
    // visible to the other player.
    let outside = |p: [f64; 2], c: [f64; 2]| (p[0] - c[0]).hypot(p[1] - c[1]) > r + cfg.edge_margin;

    let mut placed: Vec<[f64; 2]> = Vec::with_capacity(2 * n - k);
    let mut budget = cfg.max_samples;
    let mut place = |rng: &mut ChaCha8Rng,
                     placed: &mut Vec<[f64; 2]>,
                     center: [f64; 2],
                     accept: &dyn Fn([f64; 2]) -> bool|
     -> Result<[f64; 2], ContextError> {
        loop {
            if budget == 0 {
                return Err(ContextError::Infeasible(format!(
                    "retry budget of {} samples exhausted (k = {k}, n = {n}, d_min = {})",
                    cfg.max_samples, cfg.min_dot_distance
                )));
            }
            budget -= 1;
            let p = sample_disk(rng, center, inner);
            if accept(p) && placed.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= cfg.min_dot_distance) {
                placed.push(p);
                return Ok(p);
            }
        }
    };

    let mut shared_pos = Vec::with_capacity(k);
    for _ in 0..k {
        shared_pos.push(place(&mut rng, &mut placed, ca, &|p| inside(p, cb))?);
    }
    let mut a_private = Vec::with_capacity(n - k);
    for _ in k..n {
        a_private.push(place(&mut rng, &mut placed, ca, &|p| outside(p, cb))?);
    }
    let mut b_private = Vec::with_capacity(n - k);
    for _ in k..n {
        b_private.push(place(&mut rng, &mut placed, cb, &|p| outside(p, ca))?);
    }

    let total = 2 * n - k;
    let mut ids: Vec<u32> = (0..total as u32).collect();
    ids.shuffle(&mut rng);
    let attrs = |rng: &mut ChaCha8Rng| (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));

    let mut global: Vec<(DotId, [f64; 2], f64, f64)> = Vec::with_capacity(total);
    for (i, p) in shared_pos.iter().chain(&a_private).chain(&b_private).enumerate() {
        let (size, color) = attrs(&mut rng);
        global.push((DotId(ids[i]), *p, size, color));
    }

    let view = |members: &[usize], center: [f64; 2]| -> Scene {
        let mut dots: Vec<Dot> = members
            .iter()
            .map(|&i| {
                let (id, p, size, color) = global[i];
                Dot { id, x: p[0] - center[0], y: p[1] - center[1], size, color }
            })
            .collect();
        dots.sort_by_key(|d| d.id);
        Scene { dots, center: [0.0, 0.0], radius: r }
    };
    let a_members: Vec<usize> = (0..k).chain(k..n).collect();
    let b_members: Vec<usize> = (0..k).chain(n..total).collect();
    let mut shared: Vec<DotId> = global[..k].iter().map(|g| g.0).collect();
    shared.sort();

    Ok(GameContext { seed, k, agent_scene: view(&a_members, ca), partner_scene: view(&b_members, cb), shared })
}

fn sample_disk(rng: &mut ChaCha8Rng, center: [f64; 2], radius: f64) -> [f64; 2] {
    loop {
        let x: f64 = rng.random_range(-1.0..1.0);
        let y: f64 = rng.random_range(-1.0..1.0);
        if x * x + y * y < 1.0 {
            return [center[0] + x * radius, center[1] + y * radius];
        }
    }
}

/// Serializes a context as a single-line JSON record.
pub fn save_context(ctx: &GameContext) -> String {
    serde_json::to_string(ctx).expect("context serialization is infallible")
}

/// Parses a context record and checks that `shared` matches the views.
pub fn load_context(record: &str) -> Result<GameContext, ContextError> {
    let ctx: GameContext = serde_json::from_str(record).map_err(|e| ContextError::Malformed(e.to_string()))?;
    let a: BTreeSet<DotId> = ctx.agent_scene.ids().collect();
    let b: BTreeSet<DotId> = ctx.partner_scene.ids().collect();
    let inter: Vec<DotId> = a.intersection(&b).copied().collect();
    if inter != ctx.shared {
        return Err(ContextError::Malformed(format!(
            "field `shared`: {:?} is not the intersection of the two views {:?}",
            ctx.shared, inter
        )));
    }
    if ctx.shared.len() != ctx.k {
        return Err(ContextError::Malformed(format!("field `k`: {} but `shared` has {} ids", ctx.k, ctx.shared.len())));
    }
    Ok(ctx)
}

/// Reads a corpus with one record per non-empty line.
pub fn load_corpus(text: &str) -> Result<Vec<GameContext>, ContextError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| load_context(l).map_err(|e| ContextError::Malformed(format!("line {}: {e}", i + 1))))
        .collect()
}
