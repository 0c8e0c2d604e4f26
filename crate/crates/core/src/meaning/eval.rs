use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::program::{Act, Arg, Constraint, MeaningProgram, Var};
use crate::context::{Dot, DotId, Scene};
use crate::perception::{self, circumradius, Config, PerceptionError, MAX_CONFIG_SIZE};

/// Rate of the compactness weight `exp(-beta * circumradius)`.
pub const DEFAULT_BETA: f64 = 5.0;

const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("interpretation distribution is empty")]
    Empty,
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error("weights must be finite and positive")]
    BadWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpretation {
    pub config: Config,
    pub p: f64,
}

/// Categorical distribution over configurations, sorted by configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InterpretationDist {
    entries: Vec<Interpretation>,
}

impl InterpretationDist {
    /// Point mass on the empty configuration: the base a new line of
    /// questioning builds on.
    pub fn unit() -> Self {
        Self::point(Config::empty())
    }

    pub fn point(config: Config) -> Self {
        InterpretationDist { entries: vec![Interpretation { config, p: 1.0 }] }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Normalizes positive weights; repeated configurations are summed.
    pub fn from_weights(weights: impl IntoIterator<Item = (Config, f64)>) -> Result<Self, EvalError> {
        let mut acc: BTreeMap<Config, f64> = BTreeMap::new();
        for (c, w) in weights {
            if !(w.is_finite() && w > 0.0) {
                return Err(EvalError::BadWeight);
            }
            *acc.entry(c).or_default() += w;
        }
        let total: f64 = acc.values().sum();
        Ok(InterpretationDist {
            entries: acc.into_iter().map(|(config, w)| Interpretation { config, p: w / total }).collect(),
        })
    }

    pub fn entries(&self) -> &[Interpretation] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probability(&self, config: &Config) -> f64 {
        self.entries.binary_search_by(|e| e.config.cmp(config)).map_or(0.0, |i| self.entries[i].p)
    }

    pub fn is_normalized(&self) -> bool {
        self.is_empty() || (self.entries.iter().map(|e| e.p).sum::<f64>() - 1.0).abs() <= NORM_TOL
    }
}

pub fn compactness_weight(config: &Config, scene: &Scene, beta: f64) -> Result<f64, PerceptionError> {
    Ok((-beta * circumradius(config, scene)?).exp())
}

/// Evaluates `prog` with the default compactness rate.
pub fn evaluate(
    prog: &MeaningProgram,
    scene: &Scene,
    prev: &InterpretationDist,
) -> Result<InterpretationDist, EvalError> {
    evaluate_with_beta(prog, scene, prev, DEFAULT_BETA)
}

/// Interprets `prog` against `scene`, marginalizing over the previous
/// turn's interpretations `prev`.
///
/// For each previous configuration, every assignment of the program's new
/// dots (drawn from the dots outside that configuration) that satisfies all
/// constraints contributes the configuration `new dots ∪ previous`, weighted
/// by its compactness times the previous probability. `select` programs pick
/// a single dot from inside the previous configuration instead.
/// Acts that mention no dots yield the empty distribution.
pub fn evaluate_with_beta(
    prog: &MeaningProgram,
    scene: &Scene,
    prev: &InterpretationDist,
    beta: f64,
) -> Result<InterpretationDist, EvalError> {
    if matches!(prog.act(), Act::End | Act::ConfirmYes | Act::ConfirmNo) {
        return Ok(InterpretationDist::empty());
    }
    let base_prev = InterpretationDist::unit();
    let prev = if prog.act() == Act::New { &base_prev } else { prev };
    let mut acc: BTreeMap<Config, f64> = BTreeMap::new();
    for Interpretation { config: base, p } in prev.entries() {
        base.check_in(scene)?;
        for c in satisfying_configs(prog, scene, base)? {
            let w = compactness_weight(&c, scene, beta)? * p;
            *acc.entry(c).or_default() += w;
        }
    }
    let acc: Vec<(Config, f64)> = acc.into_iter().filter(|(_, w)| *w > 0.0).collect();
    if acc.is_empty() {
        return Ok(InterpretationDist::empty());
    }
    InterpretationDist::from_weights(acc)
}

/// Distinct configurations produced by satisfying assignments under one base.
fn satisfying_configs(prog: &MeaningProgram, scene: &Scene, base: &Config) -> Result<BTreeSet<Config>, EvalError> {
    let mut out = BTreeSet::new();
    if prog.act() == Act::Select {
        let domain: Vec<&Dot> = if base.is_empty() {
            scene.dots.iter().collect()
        } else {
            scene.dots.iter().filter(|d| base.contains(d.id)).collect()
        };
        for d in domain {
            if satisfies(prog.constraints(), &[d], base, scene)? {
                out.insert(Config::single(d.id));
            }
        }
        return Ok(out);
    }
    let n = prog.new_dots() as usize;
    if base.len() + n > MAX_CONFIG_SIZE {
        return Ok(out);
    }
    let free: Vec<&Dot> = scene.dots.iter().filter(|d| !base.contains(d.id)).collect();
    let mut assign: Vec<&Dot> = Vec::with_capacity(n);
    fn rec<'s>(
        prog: &MeaningProgram,
        scene: &'s Scene,
        base: &Config,
        free: &[&'s Dot],
        assign: &mut Vec<&'s Dot>,
        n: usize,
        out: &mut BTreeSet<Config>,
    ) -> Result<(), EvalError> {
        if assign.len() == n {
            if satisfies(prog.constraints(), assign, base, scene)? {
                let ids: Vec<DotId> = assign.iter().map(|d| d.id).collect();
                out.insert(base.extended(&ids)?);
            }
            return Ok(());
        }
        for d in free {
            if assign.iter().any(|a| a.id == d.id) {
                continue;
            }
            assign.push(d);
            rec(prog, scene, base, free, assign, n, out)?;
            assign.pop();
        }
        Ok(())
    }
    rec(prog, scene, base, &free, &mut assign, n, &mut out)?;
    Ok(out)
}

fn satisfies(constraints: &[Constraint], assign: &[&Dot], base: &Config, scene: &Scene) -> Result<bool, EvalError> {
    let dot = |v: Var| assign[v.0 as usize];
    for c in constraints {
        let d = dot(c.subject);
        let ok = match c.object {
            None => perception::eval_unary(c.pred, d)?,
            Some(Arg::Ref) => perception::eval_spatial(c.pred, d, base, scene)?,
            Some(Arg::Var(v)) => perception::eval_spatial(c.pred, d, &Config::single(dot(v).id), scene)?,
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Highest-probability configuration; ties go to the more compact one, then
/// to the lexicographically smaller id list.
pub fn most_likely(dist: &InterpretationDist, scene: &Scene) -> Result<Config, EvalError> {
    let mut best: Option<(&Interpretation, f64)> = None;
    for e in dist.entries() {
        let r = circumradius(&e.config, scene)?;
        let better = match best {
            None => true,
            Some((b, br)) => {
                if (e.p - b.p).abs() > 1e-12 * b.p.max(e.p) {
                    e.p > b.p
                } else if (r - br).abs() > 1e-12 {
                    r < br
                } else {
                    e.config < b.config
                }
            }
        };
        if better {
            best = Some((e, r));
        }
    }
    best.map(|(e, _)| e.config.clone()).ok_or(EvalError::Empty)
}
