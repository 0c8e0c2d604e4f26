//! Grounded predicates over dots and configurations, plus compactness geometry.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{Dot, DotId, Scene};

/// Attribute cut: `size < -ATTR_CUT` is small, `size > ATTR_CUT` is large.
pub const ATTR_CUT: f64 = 0.3;
/// Dead zone around a reference centroid for directional relations.
pub const SPATIAL_MARGIN: f64 = 0.05;
pub const NEAR_DISTANCE: f64 = 0.35;
pub const MAX_CONFIG_SIZE: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("predicate {0} has the wrong arity for this call")]
    WrongArity(Predicate),
    #[error("unknown dot id {0}")]
    UnknownDot(DotId),
    #[error("dot {0} is part of the reference configuration")]
    DotInReference(DotId),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    IsSmall,
    IsMedium,
    IsLarge,
    IsDark,
    IsGrey,
    IsLight,
    IsLeftOf,
    IsRightOf,
    IsAbove,
    IsBelow,
    IsNear,
}

impl Predicate {
    pub const ALL: [Predicate; 11] = [
        Predicate::IsSmall,
        Predicate::IsMedium,
        Predicate::IsLarge,
        Predicate::IsDark,
        Predicate::IsGrey,
        Predicate::IsLight,
        Predicate::IsLeftOf,
        Predicate::IsRightOf,
        Predicate::IsAbove,
        Predicate::IsBelow,
        Predicate::IsNear,
    ];

    pub fn arity(self) -> usize {
        if self.is_spatial() {
            2
        } else {
            1
        }
    }

    pub fn is_spatial(self) -> bool {
        matches!(
            self,
            Predicate::IsLeftOf | Predicate::IsRightOf | Predicate::IsAbove | Predicate::IsBelow | Predicate::IsNear
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Predicate::IsSmall => "is_small",
            Predicate::IsMedium => "is_medium",
            Predicate::IsLarge => "is_large",
            Predicate::IsDark => "is_dark",
            Predicate::IsGrey => "is_grey",
            Predicate::IsLight => "is_light",
            Predicate::IsLeftOf => "is_left_of",
            Predicate::IsRightOf => "is_right_of",
            Predicate::IsAbove => "is_above",
            Predicate::IsBelow => "is_below",
            Predicate::IsNear => "is_near",
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Predicate {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Predicate::ALL.into_iter().find(|p| p.name() == s).ok_or(())
    }
}

/// Three-way bucket of a normalized attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Low,
    Mid,
    High,
}

pub fn level(v: f64) -> Level {
    if v < -ATTR_CUT {
        Level::Low
    } else if v > ATTR_CUT {
        Level::High
    } else {
        Level::Mid
    }
}

pub fn size_predicate(d: &Dot) -> Predicate {
    match level(d.size) {
        Level::Low => Predicate::IsSmall,
        Level::Mid => Predicate::IsMedium,
        Level::High => Predicate::IsLarge,
    }
}

pub fn color_predicate(d: &Dot) -> Predicate {
    match level(d.color) {
        Level::Low => Predicate::IsDark,
        Level::Mid => Predicate::IsGrey,
        Level::High => Predicate::IsLight,
    }
}

pub fn eval_unary(pred: Predicate, d: &Dot) -> Result<bool, PerceptionError> {
    Ok(match pred {
        Predicate::IsSmall => d.size < -ATTR_CUT,
        Predicate::IsLarge => d.size > ATTR_CUT,
        Predicate::IsMedium => (-ATTR_CUT..=ATTR_CUT).contains(&d.size),
        Predicate::IsDark => d.color < -ATTR_CUT,
        Predicate::IsLight => d.color > ATTR_CUT,
        Predicate::IsGrey => (-ATTR_CUT..=ATTR_CUT).contains(&d.color),
        _ => return Err(PerceptionError::WrongArity(pred)),
    })
}

/// Judges a directional or proximity relation of `d` against the centroid of `reference`.
pub fn eval_spatial(pred: Predicate, d: &Dot, reference: &Config, scene: &Scene) -> Result<bool, PerceptionError> {
    if !pred.is_spatial() {
        return Err(PerceptionError::WrongArity(pred));
    }
    if reference.contains(d.id) {
        return Err(PerceptionError::DotInReference(d.id));
    }
    let c = centroid(reference, scene)?;
    Ok(relation_holds(pred, [d.x, d.y], c))
}

/// Relation of point `p` to the point `c`; `pred` must be spatial.
pub(crate) fn relation_holds(pred: Predicate, p: [f64; 2], c: [f64; 2]) -> bool {
    match pred {
        Predicate::IsLeftOf => c[0] - p[0] - SPATIAL_MARGIN > 0.0,
        Predicate::IsRightOf => p[0] - c[0] - SPATIAL_MARGIN > 0.0,
        Predicate::IsAbove => p[1] - c[1] - SPATIAL_MARGIN > 0.0,
        Predicate::IsBelow => c[1] - p[1] - SPATIAL_MARGIN > 0.0,
        Predicate::IsNear => (p[0] - c[0]).hypot(p[1] - c[1]) < NEAR_DISTANCE,
        _ => unreachable!("relation_holds called with a unary predicate"),
    }
}

/// A set of 1 to 4 dots from one scene, kept sorted by id.
///
/// The empty configuration exists only as the base of a fresh line of
/// questioning (see [`crate::meaning::InterpretationDist::unit`]).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Config(Vec<DotId>);

impl Config {
    pub fn new(ids: impl IntoIterator<Item = DotId>) -> Result<Self, PerceptionError> {
        let mut v: Vec<DotId> = ids.into_iter().collect();
        let n = v.len();
        v.sort();
        v.dedup();
        if v.len() != n {
            return Err(PerceptionError::InvalidConfig("duplicate dot ids".into()));
        }
        if v.is_empty() || v.len() > MAX_CONFIG_SIZE {
            return Err(PerceptionError::InvalidConfig(format!(
                "configurations hold 1..={MAX_CONFIG_SIZE} dots, got {}",
                v.len()
            )));
        }
        Ok(Config(v))
    }

    pub fn single(id: DotId) -> Self {
        Config(vec![id])
    }

    pub fn empty() -> Self {
        Config(Vec::new())
    }

    pub fn ids(&self) -> &[DotId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: DotId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn is_subset_of(&self, other: &Config) -> bool {
        self.0.iter().all(|id| other.contains(*id))
    }

    /// Union with extra dots; fails if the result exceeds the size cap.
    pub fn extended(&self, extra: &[DotId]) -> Result<Config, PerceptionError> {
        Config::new(self.0.iter().chain(extra).copied())
    }

    /// Checks that every id resolves in `scene`.
    pub fn check_in(&self, scene: &Scene) -> Result<(), PerceptionError> {
        match self.0.iter().find(|id| scene.dot(**id).is_none()) {
            Some(id) => Err(PerceptionError::UnknownDot(*id)),
            None => Ok(()),
        }
    }

    pub fn points(&self, scene: &Scene) -> Result<Vec<[f64; 2]>, PerceptionError> {
        self.0.iter().map(|id| scene.dot(*id).map(Dot::position).ok_or(PerceptionError::UnknownDot(*id))).collect()
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, id) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{id}")?;
        }
        f.write_str("}")
    }
}

pub fn centroid(cfg: &Config, scene: &Scene) -> Result<[f64; 2], PerceptionError> {
    let pts = cfg.points(scene)?;
    if pts.is_empty() {
        return Err(PerceptionError::InvalidConfig("centroid of an empty configuration".into()));
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    Ok([sx / n, sy / n])
}

pub fn circumradius(cfg: &Config, scene: &Scene) -> Result<f64, PerceptionError> {
    Ok(min_enclosing_circle(&cfg.points(scene)?).1)
}

/// Smallest circle containing every point, as `(center, radius)`.
///
/// Exhaustive over circles defined by two or three support points, which is
/// exact and cheap for the handful of points a configuration holds.
pub fn min_enclosing_circle(pts: &[[f64; 2]]) -> ([f64; 2], f64) {
    match pts.len() {
        0 => ([0.0, 0.0], 0.0),
        1 => (pts[0], 0.0),
        _ => {
            let covers = |c: [f64; 2], r: f64| pts.iter().all(|p| dist(*p, c) <= r * (1.0 + 1e-12) + 1e-12);
            let mut best: Option<([f64; 2], f64)> = None;
            let mut consider = |c: [f64; 2], r: f64| {
                if best.is_none_or(|(_, br)| r < br) && covers(c, r) {
                    best = Some((c, r));
                }
            };
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let c = [(pts[i][0] + pts[j][0]) / 2.0, (pts[i][1] + pts[j][1]) / 2.0];
                    consider(c, dist(pts[i], pts[j]) / 2.0);
                    for k in j + 1..pts.len() {
                        if let Some(c) = circumcenter(pts[i], pts[j], pts[k]) {
                            consider(c, dist(c, pts[i]));
                        }
                    }
                }
            }
            best.expect("the diameter circle of the farthest pair always covers")
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn circumcenter(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<[f64; 2]> {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if d.abs() < 1e-15 {
        return None;
    }
    let a2 = a[0] * a[0] + a[1] * a[1];
    let b2 = b[0] * b[0] + b[1] * b[1];
    let c2 = c[0] * c[0] + c[1] * c[1];
    Some([
        (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d,
        (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d,
    ])
}
