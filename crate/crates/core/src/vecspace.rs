//! Finite-dimensional real normed spaces: vectors, the three builtin norms,
//! bounded convex domains, and deterministic sampling of those domains.
//!
//! Everything here is an immutable value; the sampling routines are pure
//! functions of `(Domain, SamplePlan)`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the sum of convex weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Relative slack granted to domain membership, absorbing rounding in convex
/// combinations of boundary points.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Default additive slack for sampled inequality checks.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// A point of `R^d` with finite coordinates.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("vector must have dimension >= 1".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coordinate {bad}")));
        }
        Ok(Vector(coords))
    }

    /// Builds a vector from coordinates already known to be finite.
    pub(crate) fn from_finite(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Vector(coords)
    }

    pub fn scalar(x: f64) -> Result<Self> {
        Vector::new(vec![x])
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        kind.apply(&self.0)
    }

    pub fn dist(&self, other: &Vector, kind: NormKind) -> f64 {
        kind.dist(&self.0, &other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Vector::new(coords)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl<'a> Sub for &'a Vector {
    type Output = Vector;

    fn sub(self, rhs: &'a Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl<'a> Add for &'a Vector {
    type Output = Vector;

    fn add(self, rhs: &'a Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Mul<f64> for &Vector {
    type Output = Vector;

    fn mul(self, s: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * s).collect())
    }
}

/// The ambient norm. `L2` is the default and the only uniformly convex choice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    #[default]
    L2,
    Linf,
}

impl NormKind {
    pub fn apply(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => v.iter().map(|c| c.abs()).sum(),
            NormKind::L2 => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            NormKind::Linf => v.iter().fold(0.0, |m, c| m.max(c.abs())),
        }
    }

    /// `‖a − b‖` without allocating the difference.
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let diffs = a.iter().zip(b).map(|(x, y)| x - y);
        match self {
            NormKind::L1 => diffs.map(f64::abs).sum(),
            NormKind::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            NormKind::Linf => diffs.fold(0.0, |m, d| m.max(d.abs())),
        }
    }
}

/// `‖v‖` under `kind`, rejecting non-finite input.
pub fn norm(v: &[f64], kind: NormKind) -> Result<f64> {
    if let Some(bad) = v.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite coordinate {bad}")));
    }
    Ok(kind.apply(v))
}

/// `Σ wᵢ pᵢ` for nonnegative weights summing to one.
///
/// Terms with weight exactly zero are skipped, so padding a combination with
/// zero-weight points leaves the result bit-for-bit unchanged.
pub fn convex_combination(points: &[&Vector], weights: &[f64]) -> Result<Vector> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::Contract(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    let dim = points[0].dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::Contract("points have unequal dimensions".into()));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Contract(format!("weight {w} is negative or non-finite")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Contract(format!("weights sum to {total}, not 1")));
    }

    let mut acc: Option<Vec<f64>> = None;
    for (p, &w) in points.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        match acc.as_mut() {
            None => acc = Some(p.coords().iter().map(|c| w * c).collect()),
            Some(a) => {
                for (ai, c) in a.iter_mut().zip(p.coords()) {
                    *ai += w * c;
                }
            }
        }
    }
    // The weights sum to one, so at least one is positive.
    let coords = acc.ok_or_else(|| Error::Internal("all weights vanished".into()))?;
    Vector::new(coords)
}

/// One Krasnoselskii averaging step `λ·w + (1 − λ)·x`.
///
/// Every engine goes through this helper so their arithmetic paths coincide.
pub fn averaged_step(w: &Vector, x: &Vector, lambda: f64) -> Result<Vector> {
    convex_combination(&[w, x], &[lambda, 1.0 - lambda])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Axis-aligned box `[lower, upper]`.
    Box { lower: Vector, upper: Vector },
    /// Closed ball of the domain's norm.
    Ball { center: Vector, radius: f64 },
}

/// A bounded convex subset of `R^d` together with the norm used on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub shape: Shape,
    #[serde(default)]
    pub norm: NormKind,
}

impl Domain {
    pub fn new(shape: Shape, norm: NormKind) -> Result<Self> {
        let d = Domain { shape, norm };
        d.validate()?;
        Ok(d)
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Domain::new(
            Shape::Box { lower: Vector::scalar(lower)?, upper: Vector::scalar(upper)? },
            NormKind::L2,
        )
    }

    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Domain::new(
            Shape::Box { lower: Vector::new(vec![lower; dim])?, upper: Vector::new(vec![upper; dim])? },
            NormKind::L2,
        )
    }

    pub fn ball(center: Vector, radius: f64, norm: NormKind) -> Result<Self> {
        Domain::new(Shape::Ball { center, radius }, norm)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.shape {
            Shape::Box { lower, upper } => {
                if lower.dim() != upper.dim() {
                    return Err(Error::InvalidInput("box corners have unequal dimensions".into()));
                }
                if lower.coords().iter().zip(upper.coords()).any(|(l, u)| l > u) {
                    return Err(Error::InvalidInput("box lower corner exceeds upper corner".into()));
                }
            }
            Shape::Ball { radius, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidInput(format!("ball radius {radius} must be > 0")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Box { lower, .. } => lower.dim(),
            Shape::Ball { center, .. } => center.dim(),
        }
    }

    pub fn center(&self) -> Vector {
        match &self.shape {
            Shape::Box { lower, upper } => Vector::from_finite(
                lower.coords().iter().zip(upper.coords()).map(|(l, u)| 0.5 * (l + u)).collect(),
            ),
            Shape::Ball { center, .. } => center.clone(),
        }
    }

    /// Largest absolute coordinate scale of the domain, used to size slacks.
    fn scale(&self) -> f64 {
        let m = match &self.shape {
            Shape::Box { lower, upper } => {
                lower.coords().iter().chain(upper.coords()).fold(0.0_f64, |m, c| m.max(c.abs()))
            }
            Shape::Ball { center, radius } => center.norm(NormKind::Linf) + radius,
        };
        1.0 + m
    }

    pub fn contains(&self, p: &Vector) -> bool {
        if p.dim() != self.dim() || !p.is_finite() {
            return false;
        }
        let slack = MEMBERSHIP_TOL * self.scale();
        match &self.shape {
            Shape::Box { lower, upper } => p
                .coords()
                .iter()
                .zip(lower.coords().iter().zip(upper.coords()))
                .all(|(c, (l, u))| *c >= l - slack && *c <= u + slack),
            Shape::Ball { center, radius } => p.dist(center, self.norm) <= radius + slack,
        }
    }

    /// Plan used for the registration self-map check of mappings on this domain.
    pub fn registration_plan(&self) -> SamplePlan {
        let mode = match self.dim() {
            1 => SampleMode::Grid { resolution: Resolution::Uniform(41) },
            2 => SampleMode::Grid { resolution: Resolution::Uniform(21) },
            3 => SampleMode::Grid { resolution: Resolution::Uniform(9) },
            _ => SampleMode::Random { seed: 0, count: 512 },
        };
        SamplePlan { mode, epsilon: DEFAULT_EPSILON }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

impl Resolution {
    fn per_axis(&self, dim: usize) -> Result<Vec<usize>> {
        let axes = match self {
            Resolution::Uniform(r) => vec![*r; dim],
            Resolution::PerAxis(rs) => {
                if rs.len() != dim {
                    return Err(Error::InvalidInput(format!(
                        "grid gives {} resolutions for a {dim}-dimensional domain",
                        rs.len()
                    )));
                }
                rs.clone()
            }
        };
        if let Some(r) = axes.iter().find(|r| **r < 2) {
            return Err(Error::InvalidInput(format!("grid resolution {r} must be >= 2")));
        }
        Ok(axes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleMode {
    Grid { resolution: Resolution },
    Random { seed: u64, count: usize },
}

/// How to discretize "for all x, y in C", plus the additive slack ε used by
/// every sampled inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePlan {
    pub mode: SampleMode,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl SamplePlan {
    pub fn grid(resolution: usize) -> Self {
        SamplePlan {
            mode: SampleMode::Grid { resolution: Resolution::Uniform(resolution) },
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn random(seed: u64, count: usize) -> Self {
        SamplePlan { mode: SampleMode::Random { seed, count }, epsilon: DEFAULT_EPSILON }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon {} must be > 0", self.epsilon)));
        }
        match &self.mode {
            SampleMode::Grid { resolution } => {
                let rs: &[usize] = match resolution {
                    Resolution::Uniform(r) => std::slice::from_ref(r),
                    Resolution::PerAxis(rs) => rs,
                };
                if rs.is_empty() {
                    return Err(Error::InvalidInput("grid needs at least one resolution".into()));
                }
                if let Some(r) = rs.iter().find(|r| **r < 2) {
                    return Err(Error::InvalidInput(format!("grid resolution {r} must be >= 2")));
                }
                Ok(())
            }
            SampleMode::Random { count, .. } => {
                if *count == 0 {
                    return Err(Error::InvalidInput("random sample count must be >= 1".into()));
                }
                Ok(())
            }
        }
    }
}

/// Deterministic sample of `domain` under `plan`.
///
/// Grids are emitted in lexicographic order (first axis slowest) and always
/// contain both corners of a box exactly. Ball grids are the bounding-box grid
/// filtered by membership. Random plans draw from a ChaCha8 stream seeded by
/// the plan, so identical plans give identical samples.
pub fn sample(domain: &Domain, plan: &SamplePlan) -> Result<Vec<Vector>> {
    domain.validate()?;
    plan.validate()?;
    let dim = domain.dim();
    let points = match &plan.mode {
        SampleMode::Grid { resolution } => {
            let res = resolution.per_axis(dim)?;
            let (lo, hi) = bounding_box(domain);
            let axes: Vec<Vec<f64>> = (0..dim).map(|a| axis_grid(lo[a], hi[a], res[a])).collect();
            let mut out = Vec::with_capacity(res.iter().product());
            let mut idx = vec![0usize; dim];
            'odometer: loop {
                let p = Vector::from_finite((0..dim).map(|a| axes[a][idx[a]]).collect());
                if domain.contains(&p) {
                    out.push(p);
                }
                for a in (0..dim).rev() {
                    idx[a] += 1;
                    if idx[a] < res[a] {
                        continue 'odometer;
                    }
                    idx[a] = 0;
                }
                break;
            }
            if out.is_empty() {
                return Err(Error::InvalidInput("grid too coarse: no grid point lies in the domain".into()));
            }
            out
        }
        SampleMode::Random { seed, count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*count).map(|_| random_point(domain, &mut rng)).collect()
        }
    };
    Ok(points)
}

fn bounding_box(domain: &Domain) -> (Vec<f64>, Vec<f64>) {
    match &domain.shape {
        Shape::Box { lower, upper } => (lower.coords().to_vec(), upper.coords().to_vec()),
        Shape::Ball { center, radius } => (
            center.coords().iter().map(|c| c - radius).collect(),
            center.coords().iter().map(|c| c + radius).collect(),
        ),
    }
}

fn axis_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = hi - lo;
    let last = (n - 1) as f64;
    let mut pts: Vec<f64> = (0..n).map(|i| lo + span * (i as f64) / last).collect();
    pts[n - 1] = hi;
    pts
}

fn random_point(domain: &Domain, rng: &mut ChaCha8Rng) -> Vector {
    let dim = domain.dim();
    match &domain.shape {
        Shape::Box { lower, upper } => Vector::from_finite(
            lower
                .coords()
                .iter()
                .zip(upper.coords())
                .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                .collect(),
        ),
        Shape::Ball { center, radius } => {
            let offset: Vec<f64> = match domain.norm {
                NormKind::Linf => (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect(),
                NormKind::L2 => {
                    let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let len = NormKind::L2.apply(&g).max(f64::MIN_POSITIVE);
                    let r = rng.random::<f64>().powf(1.0 / dim as f64);
                    g.iter().map(|c| c / len * r).collect()
                }
                NormKind::L1 => {
                    // Exponential spacings with one slack coordinate are uniform on the simplex.
                    let e: Vec<f64> = (0..=dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                    let total: f64 = e.iter().sum();
                    (0..dim)
                        .map(|i| {
                            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                            sign * e[i] / total
                        })
                        .collect()
                }
            };
            Vector::from_finite(
                center.coords().iter().zip(&offset).map(|(c, o)| c + radius * o).collect(),
            )
        }
    }
}
