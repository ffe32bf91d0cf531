//! Evaluable maps `T: C → X` on a [`Domain`], the builtin gallery, composition,
//! and sampled commutativity checks.
//!
//! A [`Mapping`] built with [`Mapping::new`] is a self-map: registration samples
//! the domain and refuses the rule if any image leaves `C`. [`Mapping::ambient`]
//! skips that check for maps that only need to be defined on `C` (translations,
//! expansive test maps), matching the `T: C → X` setting of the condition checks.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{Verdict, Witness};
use crate::error::{Error, Result};
use crate::vecspace::{sample, Domain, NormKind, SamplePlan, Vector};

/// Tolerance for `‖Tz − z‖` when recording a known fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-10;

pub type Rule = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub struct Mapping {
    label: String,
    domain: Domain,
    rule: Rule,
    known_fixed_points: Vec<Vector>,
    self_map: bool,
}

impl fmt::Debug for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mapping")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("known_fixed_points", &self.known_fixed_points)
            .field("self_map", &self.self_map)
            .finish()
    }
}

impl Mapping {
    /// Registers a self-map of `domain`.
    ///
    /// Fails if any point of the domain's registration plan is sent outside the
    /// domain, or if a listed fixed point is not fixed within [`FIXED_POINT_TOL`].
    pub fn new(
        label: impl Into<String>,
        domain: Domain,
        rule: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        known_fixed_points: Vec<Vector>,
    ) -> Result<Self> {
        Self::register(label.into(), domain, Arc::new(rule), known_fixed_points, true)
    }

    /// Registers a map defined on `domain` whose images may leave it.
    pub fn ambient(
        label: impl Into<String>,
        domain: Domain,
        rule: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        known_fixed_points: Vec<Vector>,
    ) -> Result<Self> {
        Self::register(label.into(), domain, Arc::new(rule), known_fixed_points, false)
    }

    fn register(
        label: String,
        domain: Domain,
        rule: Rule,
        known_fixed_points: Vec<Vector>,
        self_map: bool,
    ) -> Result<Self> {
        domain.validate()?;
        let m = Mapping { label, domain, rule, known_fixed_points, self_map };
        let plan = m.domain.registration_plan();
        for p in sample(&m.domain, &plan)? {
            let image = m.apply(&p)?;
            if self_map && !m.domain.contains(&image) {
                return Err(Error::Contract(format!(
                    "`{}` is not a self-map: {:?} is sent to {:?} outside the domain",
                    m.label, p, image
                )));
            }
        }
        for z in &m.known_fixed_points {
            if !m.domain.contains(z) {
                return Err(Error::Contract(format!(
                    "fixed point {:?} of `{}` lies outside the domain",
                    z, m.label
                )));
            }
            let gap = m.apply(z)?.dist(z, m.domain.norm);
            if gap > FIXED_POINT_TOL {
                return Err(Error::Contract(format!(
                    "{:?} is not a fixed point of `{}` (‖Tz − z‖ = {gap:e})",
                    z, m.label
                )));
            }
        }
        Ok(m)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn norm(&self) -> NormKind {
        self.domain.norm
    }

    pub fn known_fixed_points(&self) -> &[Vector] {
        &self.known_fixed_points
    }

    pub fn is_self_map(&self) -> bool {
        self.self_map
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `Tx` for `x ∈ C`. For self-maps the image is also required to lie in `C`.
    pub fn evaluate(&self, x: &Vector) -> Result<Vector> {
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain { label: self.label.clone(), point: x.coords().to_vec() });
        }
        let image = self.apply(x)?;
        if self.self_map && !self.domain.contains(&image) {
            return Err(Error::OutsideDomain {
                label: format!("{} (image)", self.label),
                point: image.into_coords(),
            });
        }
        Ok(image)
    }

    /// The raw rule, with only dimension and finiteness checked.
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        let out = (self.rule)(x.coords());
        if out.len() != x.dim() {
            return Err(Error::Contract(format!(
                "`{}` maps dimension {} to {}",
                self.label,
                x.dim(),
                out.len()
            )));
        }
        Vector::new(out).map_err(|_| Error::NonFinite { label: self.label.clone(), point: x.coords().to_vec() })
    }

    /// Evaluates at a point given as raw coordinates.
    pub fn eval_at(&self, coords: &[f64]) -> Result<Vector> {
        self.evaluate(&Vector::new(coords.to_vec())?)
    }
}

/// `x ↦ S(T(x))`, labelled `S∘T`.
///
/// The composite keeps every known fixed point of either factor that it fixes.
pub fn compose(s: &Mapping, t: &Mapping) -> Result<Mapping> {
    if s.domain != t.domain {
        return Err(Error::Contract(format!(
            "cannot compose `{}` with `{}`: domains differ",
            s.label, t.label
        )));
    }
    let (sr, tr) = (s.rule.clone(), t.rule.clone());
    let rule: Rule = Arc::new(move |x: &[f64]| sr(&tr(x)));
    let candidates: Vec<Vector> = s.known_fixed_points.iter().chain(&t.known_fixed_points).cloned().collect();
    let fixed = filter_fixed(&rule, &s.domain, candidates);
    Mapping::register(format!("{}∘{}", s.label, t.label), s.domain.clone(), rule, fixed, true)
}

fn filter_fixed(rule: &Rule, domain: &Domain, candidates: Vec<Vector>) -> Vec<Vector> {
    let mut kept: Vec<Vector> = Vec::new();
    for z in candidates {
        if !domain.contains(&z) || kept.contains(&z) {
            continue;
        }
        let image = rule(z.coords());
        if image.len() == z.dim() && domain.norm.dist(&image, z.coords()) <= FIXED_POINT_TOL {
            kept.push(z);
        }
    }
    kept
}

/// Sampled check of `S∘T = T∘S`: passes iff `max ‖S(Tx) − T(Sx)‖ ≤ ε` over the plan.
///
/// Both composites are evaluated with the raw rules, so maps into the ambient
/// space can be compared even when an intermediate image leaves the domain.
pub fn check_commuting(s: &Mapping, t: &Mapping, plan: &SamplePlan) -> Result<Verdict> {
    if s.domain != t.domain {
        return Err(Error::Contract(format!("`{}` and `{}` have different domains", s.label, t.label)));
    }
    let points = sample(&s.domain, plan)?;
    let norm = s.domain.norm;
    let evals: Vec<Result<(Vector, Vector)>> = points
        .par_iter()
        .map(|x| {
            for m in [s, t] {
                if !m.domain.contains(x) {
                    return Err(Error::OutsideDomain { label: m.label.clone(), point: x.coords().to_vec() });
                }
            }
            let st = s.apply(&t.apply(x)?)?;
            let ts = t.apply(&s.apply(x)?)?;
            Ok((st, ts))
        })
        .collect();

    let mut max_gap: Option<f64> = None;
    let mut witness = None;
    for (x, e) in points.iter().zip(evals) {
        let (st, ts) = e?;
        let gap = st.dist(&ts, norm);
        max_gap = Some(max_gap.map_or(gap, |m: f64| m.max(gap)));
        if witness.is_none() && gap > 0.0 + plan.epsilon {
            witness = Some(Witness {
                x: x.clone(),
                y: None,
                lhs: gap,
                rhs: 0.0,
                images: vec![st, ts],
                step: None,
                note: Some(format!("{}∘{} vs {}∘{}", s.label, t.label, t.label, s.label)),
            });
        }
    }
    Ok(Verdict {
        condition_label: "commuting".into(),
        passed: witness.is_none(),
        checked_pairs: points.len(),
        witness,
        plan: Some(plan.clone()),
        tolerance: plan.epsilon,
        parameters: Default::default(),
        max_excess: max_gap,
    })
}

/// Merged commutativity verdict over every pair `i < j` of `maps`.
///
/// Passes iff every pair does; `max_excess` is the largest commutator norm seen
/// and the witness comes from the first failing pair in `(i, j)` order.
pub fn check_pairwise_commuting(maps: &[Mapping], plan: &SamplePlan) -> Result<Verdict> {
    let mut merged = Verdict {
        condition_label: "commuting".into(),
        passed: true,
        checked_pairs: 0,
        witness: None,
        plan: Some(plan.clone()),
        tolerance: plan.epsilon,
        parameters: Default::default(),
        max_excess: None,
    };
    for i in 0..maps.len() {
        for j in i + 1..maps.len() {
            let v = check_commuting(&maps[i], &maps[j], plan)?;
            merged.checked_pairs += v.checked_pairs;
            merged.max_excess = match (merged.max_excess, v.max_excess) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
            if !v.passed && merged.passed {
                merged.passed = false;
                merged.witness = v.witness;
            }
        }
    }
    Ok(merged)
}

/// Ordered list of self-maps on one domain.
#[derive(Clone, Debug)]
pub struct MappingFamily {
    members: Vec<Mapping>,
    commuting_certificate: Option<Verdict>,
}

impl MappingFamily {
    pub fn new(members: Vec<Mapping>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Contract("a mapping family needs at least one member".into()))?;
        for m in &members {
            if m.domain != first.domain {
                return Err(Error::Contract(format!(
                    "family member `{}` does not share the domain of `{}`",
                    m.label, first.label
                )));
            }
            if !m.self_map {
                return Err(Error::Contract(format!("family member `{}` is not a self-map", m.label)));
            }
        }
        Ok(MappingFamily { members, commuting_certificate: None })
    }

    pub fn members(&self) -> &[Mapping] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn domain(&self) -> &Domain {
        &self.members[0].domain
    }

    pub fn commuting_certificate(&self) -> Option<&Verdict> {
        self.commuting_certificate.as_ref()
    }

    /// Checks every pair for commutativity and stores the merged verdict.
    pub fn certify_commuting(&mut self, plan: &SamplePlan) -> Result<&Verdict> {
        let merged = check_pairwise_commuting(&self.members, plan)?;
        Ok(self.commuting_certificate.insert(merged))
    }

    /// Known fixed points of the first member that every member fixes.
    pub fn common_fixed_points(&self) -> Vec<Vector> {
        let norm = self.domain().norm;
        let mut out: Vec<Vector> = Vec::new();
        for z in self.members.iter().flat_map(|m| m.known_fixed_points.iter()) {
            if out.contains(z) {
                continue;
            }
            let fixed_by_all = self
                .members
                .iter()
                .all(|m| m.apply(z).map(|tz| tz.dist(z, norm) <= FIXED_POINT_TOL).unwrap_or(false));
            if fixed_by_all {
                out.push(z.clone());
            }
        }
        out
    }
}

/// One exact-match row of a piecewise map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseCase {
    pub at: Vector,
    pub value: Vector,
}

/// Builtin mapping rules addressable from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Identity,
    /// `0` everywhere on `[0, 4]` except `T(4) = 2`.
    Example1,
    Constant { value: Vector },
    /// Returns `value` of the first case whose `at` equals `x` exactly, else `otherwise`.
    Piecewise { cases: Vec<PiecewiseCase>, otherwise: Vector },
    /// `x ↦ Ax + b` with `matrix` given row by row.
    Affine { matrix: Vec<Vec<f64>>, shift: Vec<f64> },
    Scaling { factor: f64 },
    Translation { shift: Vector },
    /// `x ↦ scale · R(angle) x` in the plane, about the origin.
    Rotation {
        angle: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

impl MapSpec {
    pub fn default_label(&self) -> String {
        match self {
            MapSpec::Identity => "identity".into(),
            MapSpec::Example1 => "example1".into(),
            MapSpec::Constant { value } => format!("constant{:?}", value),
            MapSpec::Piecewise { .. } => "piecewise".into(),
            MapSpec::Affine { .. } => "affine".into(),
            MapSpec::Scaling { factor } => format!("scale({factor})"),
            MapSpec::Translation { shift } => format!("translate{:?}", shift),
            MapSpec::Rotation { angle, scale } => format!("rotate({angle}, {scale})"),
        }
    }

    /// Resolves the rule on `domain`, registering it as a self-map unless
    /// `ambient` is set. Fixed points implied by the rule are recorded when they
    /// lie in the domain; `extra_fixed_points` are verified and appended.
    pub fn build(
        &self,
        domain: &Domain,
        label: Option<String>,
        extra_fixed_points: Vec<Vector>,
        ambient: bool,
    ) -> Result<Mapping> {
        let dim = domain.dim();
        let need_dim = |want: usize, what: &str| -> Result<()> {
            if want != dim {
                Err(Error::InvalidInput(format!(
                    "{what} has dimension {want} but the domain has dimension {dim}"
                )))
            } else {
                Ok(())
            }
        };
        let origin = Vector::zeros(dim);
        let (rule, candidates): (Rule, Vec<Vector>) = match self.clone() {
            MapSpec::Identity => (Arc::new(|x: &[f64]| x.to_vec()), vec![domain.center()]),
            MapSpec::Example1 => {
                need_dim(1, "example1")?;
                (Arc::new(example1_rule), vec![origin])
            }
            MapSpec::Constant { value } => {
                need_dim(value.dim(), "constant value")?;
                let c = value.coords().to_vec();
                (Arc::new(move |_: &[f64]| c.clone()), vec![value])
            }
            MapSpec::Piecewise { cases, otherwise } => {
                need_dim(otherwise.dim(), "piecewise default")?;
                for c in &cases {
                    need_dim(c.at.dim(), "piecewise case point")?;
                    need_dim(c.value.dim(), "piecewise case value")?;
                }
                let mut cand = vec![otherwise.clone()];
                cand.extend(cases.iter().map(|c| c.at.clone()));
                let table: Vec<(Vec<f64>, Vec<f64>)> =
                    cases.into_iter().map(|c| (c.at.into_coords(), c.value.into_coords())).collect();
                let other = otherwise.into_coords();
                let rule = move |x: &[f64]| {
                    table.iter().find(|(at, _)| at.as_slice() == x).map_or_else(|| other.clone(), |(_, v)| v.clone())
                };
                (Arc::new(rule), cand)
            }
            MapSpec::Affine { matrix, shift } => {
                need_dim(matrix.len(), "affine matrix")?;
                need_dim(shift.len(), "affine shift")?;
                for row in &matrix {
                    need_dim(row.len(), "affine matrix row")?;
                }
                let a = DMatrix::from_fn(dim, dim, |i, j| matrix[i][j]);
                let b = DVector::from_column_slice(&shift);
                let fixed = affine_fixed_point(&a, &b);
                let rule = move |x: &[f64]| {
                    let y = &a * DVector::from_column_slice(x) + &b;
                    y.iter().copied().collect()
                };
                (Arc::new(rule), fixed.into_iter().collect())
            }
            MapSpec::Scaling { factor } => {
                let fixed = if factor == 1.0 { domain.center() } else { origin };
                (Arc::new(move |x: &[f64]| x.iter().map(|c| factor * c).collect()), vec![fixed])
            }
            MapSpec::Translation { shift } => {
                need_dim(shift.dim(), "translation shift")?;
                let cand = if shift.norm(NormKind::Linf) == 0.0 { vec![domain.center()] } else { vec![] };
                let s = shift.into_coords();
                (Arc::new(move |x: &[f64]| x.iter().zip(&s).map(|(a, b)| a + b).collect()), cand)
            }
            MapSpec::Rotation { angle, scale } => {
                need_dim(2, "rotation")?;
                let (sin, cos) = angle.sin_cos();
                let rule = move |x: &[f64]| vec![scale * (cos * x[0] - sin * x[1]), scale * (sin * x[0] + cos * x[1])];
                (Arc::new(rule), vec![origin])
            }
        };
        let mut fixed = filter_fixed(&rule, domain, candidates);
        for z in extra_fixed_points {
            if !fixed.contains(&z) {
                fixed.push(z);
            }
        }
        let label = label.unwrap_or_else(|| self.default_label());
        Mapping::register(label, domain.clone(), rule, fixed, !ambient)
    }
}

fn example1_rule(x: &[f64]) -> Vec<f64> {
    if x[0] == 4.0 {
        vec![2.0]
    } else {
        vec![0.0]
    }
}

fn affine_fixed_point(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<Vector> {
    let n = a.nrows();
    let lhs = DMatrix::<f64>::identity(n, n) - a;
    let z = lhs.lu().solve(b)?;
    Vector::new(z.iter().copied().collect()).ok()
}

/// Largest singular value of the row-major `matrix`.
pub fn spectral_norm(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    let m = matrix.first().map_or(0, |r| r.len());
    let a = DMatrix::from_fn(n, m, |i, j| matrix[i][j]);
    a.singular_values().iter().fold(0.0, |acc: f64, s| acc.max(*s))
}

/// `x ↦ Ax + b` with `‖A‖₂ < 1`, registered on `domain` with its unique fixed point.
pub fn affine_contraction(
    label: impl Into<String>,
    domain: &Domain,
    matrix: Vec<Vec<f64>>,
    shift: Vec<f64>,
) -> Result<Mapping> {
    let norm = spectral_norm(&matrix);
    if norm.is_nan() || norm >= 1.0 {
        return Err(Error::Contract(format!("spectral norm {norm} is not below 1")));
    }
    MapSpec::Affine { matrix, shift }.build(domain, Some(label.into()), vec![], false)
}

/// The shipped mappings. Every member passes its registration check.
pub fn builtin_gallery() -> Vec<Mapping> {
    gallery_entries().into_iter().map(|(_, m)| m).collect()
}

/// Gallery member by label.
pub fn gallery_mapping(label: &str) -> Option<Mapping> {
    gallery_entries().into_iter().find(|(l, _)| *l == label).map(|(_, m)| m)
}

pub const AFFINE_CONTRACTION_MATRIX: [[f64; 2]; 2] = [[0.5, 0.2], [-0.1, 0.4]];
pub const AFFINE_CONTRACTION_SHIFT: [f64; 2] = [0.5, -0.3];

fn gallery_entries() -> Vec<(&'static str, Mapping)> {
    let interval = Domain::interval(0.0, 4.0).expect("valid interval");
    let square = Domain::cube(2, -2.0, 2.0).expect("valid box");
    let disc = Domain::ball(Vector::zeros(2), 1.0, NormKind::L2).expect("valid ball");
    let build = |spec: MapSpec, domain: &Domain, label: &'static str| {
        (label, spec.build(domain, Some(label.to_string()), vec![], false).expect("gallery mapping registers"))
    };
    vec![
        build(MapSpec::Example1, &interval, "example1"),
        build(MapSpec::Identity, &square, "identity"),
        build(MapSpec::Constant { value: Vector::scalar(1.0).expect("finite") }, &interval, "constant"),
        (
            "affine_contraction",
            affine_contraction(
                "affine_contraction",
                &square,
                AFFINE_CONTRACTION_MATRIX.iter().map(|r| r.to_vec()).collect(),
                AFFINE_CONTRACTION_SHIFT.to_vec(),
            )
            .expect("gallery contraction registers"),
        ),
        build(MapSpec::Scaling { factor: 0.5 }, &disc, "scale_0.5"),
        build(MapSpec::Scaling { factor: 0.75 }, &disc, "scale_0.75"),
        build(MapSpec::Scaling { factor: 0.9 }, &disc, "scale_0.9"),
        build(MapSpec::Rotation { angle: PI / 3.0, scale: 0.9 }, &disc, "rotation_scaling"),
    ]
}

/// `x ↦ factor·x` on `domain`, for building scaling families directly.
pub fn scaling(domain: &Domain, factor: f64) -> Result<Mapping> {
    MapSpec::Scaling { factor }.build(domain, Some(format!("scale({factor})")), vec![], false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn disc() -> Domain {
        Domain::ball(Vector::zeros(2), 1.0, NormKind::L2).unwrap()
    }

    #[test]
    fn example1_values() {
        let t = gallery_mapping("example1").unwrap();
        assert_eq!(t.eval_at(&[3.0]).unwrap(), v(&[0.0]));
        assert_eq!(t.eval_at(&[4.0]).unwrap(), v(&[2.0]));
        assert_eq!(t.eval_at(&[0.0]).unwrap(), v(&[0.0]));
        assert_eq!(t.known_fixed_points(), &[v(&[0.0])]);
    }

    #[test]
    fn evaluate_rejects_points_outside_domain() {
        let t = gallery_mapping("example1").unwrap();
        assert!(matches!(t.eval_at(&[4.5]), Err(Error::OutsideDomain { .. })));
        assert!(matches!(t.eval_at(&[-0.1]), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn identity_returns_input() {
        let id = gallery_mapping("identity").unwrap();
        let p = v(&[0.25, -1.75]);
        assert_eq!(id.evaluate(&p).unwrap(), p);
    }

    #[test]
    fn registration_rejects_non_self_maps() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        assert!(matches!(
            Mapping::new("double", d.clone(), |x| vec![2.0 * x[0]], vec![]),
            Err(Error::Contract(_))
        ));
        assert!(Mapping::ambient("double", d, |x| vec![2.0 * x[0]], vec![v(&[0.0])]).is_ok());
    }

    #[test]
    fn registration_rejects_false_fixed_points() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let r = Mapping::new("half", d, |x| vec![0.5 * x[0]], vec![v(&[0.5])]);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn non_finite_images_are_reported() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let r = Mapping::ambient("blowup", d, |x| vec![1.0 / x[0]], vec![]);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn compose_identity_is_pointwise_t() {
        let t = gallery_mapping("affine_contraction").unwrap();
        let id = gallery_mapping("identity").unwrap();
        let c = compose(&id, &t).unwrap();
        assert_eq!(c.label(), "identity∘affine_contraction");
        for p in sample(t.domain(), &SamplePlan::grid(9)).unwrap() {
            assert_eq!(c.evaluate(&p).unwrap(), t.evaluate(&p).unwrap());
        }
    }

    #[test]
    fn compose_scalings_multiplies_factors() {
        let c = compose(&scaling(&disc(), 0.5).unwrap(), &scaling(&disc(), 0.25).unwrap()).unwrap();
        let p = v(&[0.6, -0.4]);
        assert_eq!(c.evaluate(&p).unwrap(), &p * 0.125);
    }

    #[test]
    fn compose_example1_twice_sends_four_to_zero() {
        let t = gallery_mapping("example1").unwrap();
        let tt = compose(&t, &t).unwrap();
        assert_eq!(tt.eval_at(&[4.0]).unwrap(), v(&[0.0]));
        assert_eq!(tt.known_fixed_points(), &[v(&[0.0])]);
    }

    #[test]
    fn compose_matches_sequential_evaluation_bitwise() {
        let a = gallery_mapping("rotation_scaling").unwrap();
        let b = gallery_mapping("scale_0.75").unwrap();
        let c = compose(&a, &b).unwrap();
        for p in sample(&disc(), &SamplePlan::random(3, 200)).unwrap() {
            let seq = a.evaluate(&b.evaluate(&p).unwrap()).unwrap();
            let cp = c.evaluate(&p).unwrap();
            let bits = |x: &Vector| x.coords().iter().map(|f| f.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&seq), bits(&cp));
        }
    }

    #[test]
    fn compose_rejects_domain_mismatch() {
        let a = gallery_mapping("example1").unwrap();
        let b = gallery_mapping("scale_0.5").unwrap();
        assert!(matches!(compose(&a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn scalings_commute() {
        let plan = SamplePlan::grid(11);
        let v = check_commuting(&scaling(&disc(), 0.3).unwrap(), &scaling(&disc(), 0.8).unwrap(), &plan).unwrap();
        assert!(v.passed);
        assert!(v.witness.is_none());
    }

    #[test]
    fn translation_and_rotation_do_not_commute() {
        let d = Domain::cube(2, -1.0, 1.0).unwrap();
        let shift = MapSpec::Translation { shift: v(&[1.0, 0.0]) }.build(&d, None, vec![], true).unwrap();
        let rot = MapSpec::Rotation { angle: PI / 2.0, scale: 1.0 }.build(&d, None, vec![], false).unwrap();
        // at (1, 0): R(x + e1) = (0, 2) while R(x) + e1 = (1, 1)
        let at = v(&[1.0, 0.0]);
        let rt = rot.apply(&shift.apply(&at).unwrap()).unwrap();
        let tr = shift.apply(&rot.apply(&at).unwrap()).unwrap();
        assert!(rt.dist(&v(&[0.0, 2.0]), NormKind::L2) < 1e-15);
        assert!(tr.dist(&v(&[1.0, 1.0]), NormKind::L2) < 1e-15);

        let verdict = check_commuting(&rot, &shift, &SamplePlan::grid(5)).unwrap();
        assert!(!verdict.passed);
        let w = verdict.witness.unwrap();
        assert!(w.lhs > w.rhs + verdict.tolerance);
        assert!((w.lhs - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn commuting_is_symmetric_and_reflexive() {
        let plan = SamplePlan::random(9, 100);
        let gal = builtin_gallery();
        let disc_maps: Vec<&Mapping> = gal.iter().filter(|m| *m.domain() == disc()).collect();
        for a in &disc_maps {
            assert!(check_commuting(a, a, &plan).unwrap().passed);
            for b in &disc_maps {
                let ab = check_commuting(a, b, &plan).unwrap();
                let ba = check_commuting(b, a, &plan).unwrap();
                assert_eq!(ab.passed, ba.passed);
                assert_eq!(ab.max_excess, ba.max_excess);
            }
        }
    }

    #[test]
    fn gallery_contents() {
        let gal = builtin_gallery();
        assert!(gal.len() >= 6);
        for m in &gal {
            assert!(m.is_self_map(), "{}", m.label());
            for z in m.known_fixed_points() {
                assert!(m.evaluate(z).unwrap().dist(z, m.norm()) <= FIXED_POINT_TOL);
            }
        }
        let aff = gallery_mapping("affine_contraction").unwrap();
        let z = &aff.known_fixed_points()[0];
        assert!(z.dist(&v(&[0.75, -0.625]), NormKind::L2) < 1e-12);
        let mat: Vec<Vec<f64>> = AFFINE_CONTRACTION_MATRIX.iter().map(|r| r.to_vec()).collect();
        assert!(spectral_norm(&mat) < 1.0);
    }

    #[test]
    fn affine_contraction_requires_small_norm() {
        let d = Domain::cube(2, -2.0, 2.0).unwrap();
        let r = affine_contraction("big", &d, vec![vec![1.0, 0.0], vec![0.0, 0.5]], vec![0.0, 0.0]);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn spec_dimension_mismatch() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        assert!(matches!(
            MapSpec::Rotation { angle: 1.0, scale: 1.0 }.build(&d, None, vec![], false),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            MapSpec::Affine { matrix: vec![vec![0.5, 0.0]], shift: vec![0.0] }.build(&d, None, vec![], false),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn piecewise_table_reproduces_example1() {
        let d = Domain::interval(0.0, 4.0).unwrap();
        let spec = MapSpec::Piecewise {
            cases: vec![PiecewiseCase { at: v(&[4.0]), value: v(&[2.0]) }],
            otherwise: v(&[0.0]),
        };
        let p = spec.build(&d, None, vec![], false).unwrap();
        let e = gallery_mapping("example1").unwrap();
        for x in sample(&d, &SamplePlan::grid(17)).unwrap() {
            assert_eq!(p.evaluate(&x).unwrap(), e.evaluate(&x).unwrap());
        }
        assert_eq!(p.known_fixed_points(), &[v(&[0.0])]);
    }

    #[test]
    fn family_requires_shared_domain_and_self_maps() {
        let a = gallery_mapping("example1").unwrap();
        let b = gallery_mapping("scale_0.5").unwrap();
        assert!(MappingFamily::new(vec![a.clone(), b]).is_err());
        assert!(MappingFamily::new(vec![]).is_err());
        let amb = Mapping::ambient("x2", a.domain().clone(), |x| vec![2.0 * x[0]], vec![]).unwrap();
        assert!(MappingFamily::new(vec![a, amb]).is_err());
    }

    #[test]
    fn family_certificate_and_common_fixed_points() {
        let members = vec![scaling(&disc(), 0.5).unwrap(), scaling(&disc(), 0.7).unwrap(), gallery_mapping("rotation_scaling").unwrap()];
        let mut fam = MappingFamily::new(members).unwrap();
        let cert = fam.certify_commuting(&SamplePlan::grid(9)).unwrap().clone();
        assert!(cert.passed);
        assert!(cert.max_excess.unwrap() <= 1e-12);
        assert_eq!(fam.common_fixed_points(), vec![Vector::zeros(2)]);
        assert!(fam.commuting_certificate().is_some());
    }
}
