//! Sampled verifiers for the mapping conditions: nonexpansive,
//! quasi-nonexpansive, Suzuki's condition (C) and (C_λ), condition B(γ, μ),
//! the three basic properties of B(γ, μ) maps, and the fixed-point distance
//! bound `‖z − Tx‖ ≤ ‖z − x‖`.
//!
//! Premises of conditional inequalities are evaluated exactly; conclusions get
//! the plan's additive slack ε. A pass means no counterexample was found on the
//! plan, nothing more. Pair loops run in parallel, and the reported witness is
//! always the first violating pair in lexicographic sample order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mappings::Mapping;
use crate::vecspace::{sample, NormKind, SamplePlan, Vector};

/// A counterexample (or the first offending step of a trace diagnostic).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vector>,
    pub lhs: f64,
    pub rhs: f64,
    /// Images relevant to the inequality, e.g. `[Tx, Ty]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub condition_label: String,
    pub passed: bool,
    pub checked_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<SamplePlan>,
    pub tolerance: f64,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    /// Largest `lhs − rhs` over the pairs whose premise held.
    #[serde(default)]
    pub max_excess: Option<f64>,
}

/// Parameters of condition B(γ, μ): `0 ≤ γ ≤ 1`, `0 ≤ μ ≤ 1/2`, `2μ ≤ γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGammaMu", into = "RawGammaMu")]
pub struct BGammaMu {
    gamma: f64,
    mu: f64,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGammaMu {
    gamma: f64,
    mu: f64,
}

impl TryFrom<RawGammaMu> for BGammaMu {
    type Error = Error;

    fn try_from(r: RawGammaMu) -> Result<Self> {
        BGammaMu::new(r.gamma, r.mu)
    }
}

impl From<BGammaMu> for RawGammaMu {
    fn from(p: BGammaMu) -> Self {
        RawGammaMu { gamma: p.gamma, mu: p.mu }
    }
}

impl BGammaMu {
    pub fn new(gamma: f64, mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Contract(format!("gamma {gamma} outside [0, 1]")));
        }
        if !(0.0..=0.5).contains(&mu) {
            return Err(Error::Contract(format!("mu {mu} outside [0, 1/2]")));
        }
        if 2.0 * mu > gamma {
            return Err(Error::Contract(format!("2·mu = {} exceeds gamma = {gamma}", 2.0 * mu)));
        }
        Ok(BGammaMu { gamma, mu })
    }

    pub fn zero() -> Self {
        BGammaMu { gamma: 0.0, mu: 0.0 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

struct Violation {
    lhs: f64,
    rhs: f64,
    note: Option<&'static str>,
}

/// Per-item result of an inequality: the `lhs − rhs` statistic (absent when a
/// premise fails) and the violation, if any.
struct Eval {
    excess: Option<f64>,
    violation: Option<Violation>,
}

impl Eval {
    fn vacuous() -> Self {
        Eval { excess: None, violation: None }
    }

    fn compare(lhs: f64, rhs: f64, eps: f64) -> Self {
        Eval {
            excess: Some(lhs - rhs),
            violation: (lhs > rhs + eps).then_some(Violation { lhs, rhs, note: None }),
        }
    }

    fn noted(mut self, note: &'static str) -> Self {
        if let Some(v) = self.violation.as_mut() {
            v.note = Some(note);
        }
        self
    }
}

struct Scan {
    first: Option<(usize, usize, Violation)>,
    max_excess: Option<f64>,
    checked: usize,
}

fn merge_max(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

/// First violation in a row with its column, and the row's largest excess.
type RowScan = (Option<(usize, Violation)>, Option<f64>);

/// Evaluates `f(i, j)` on `rows × cols` in parallel and merges in row-major order.
fn scan<F>(rows: usize, cols: usize, f: F) -> Scan
where
    F: Fn(usize, usize) -> Eval + Sync,
{
    let per_row: Vec<RowScan> = (0..rows)
        .into_par_iter()
        .map(|i| {
            let mut first = None;
            let mut max_excess = None;
            for j in 0..cols {
                let e = f(i, j);
                max_excess = merge_max(max_excess, e.excess);
                if first.is_none() {
                    first = e.violation.map(|v| (j, v));
                }
            }
            (first, max_excess)
        })
        .collect();

    let mut out = Scan { first: None, max_excess: None, checked: rows * cols };
    for (i, (first, m)) in per_row.into_iter().enumerate() {
        out.max_excess = merge_max(out.max_excess, m);
        if out.first.is_none() {
            out.first = first.map(|(j, v)| (i, j, v));
        }
    }
    out
}

/// Samples the plan and evaluates `T` (and optionally `T²`) once per point.
struct Table {
    xs: Vec<Vector>,
    tx: Vec<Vector>,
    ttx: Vec<Vector>,
    norm: NormKind,
}

impl Table {
    fn build(t: &Mapping, plan: &SamplePlan, second: bool) -> Result<Self> {
        let xs = sample(t.domain(), plan)?;
        let tx: Vec<Vector> = xs.par_iter().map(|x| t.evaluate(x)).collect::<Result<_>>()?;
        let ttx = if second { tx.par_iter().map(|y| t.evaluate(y)).collect::<Result<_>>()? } else { Vec::new() };
        Ok(Table { xs, tx, ttx, norm: t.norm() })
    }

    fn d(&self, a: &Vector, b: &Vector) -> f64 {
        a.dist(b, self.norm)
    }
}

fn pair_scan_verdict(
    label: &str,
    table: &Table,
    plan: &SamplePlan,
    parameters: BTreeMap<String, f64>,
    f: impl Fn(usize, usize) -> Eval + Sync,
) -> Verdict {
    let n = table.xs.len();
    let s = scan(n, n, f);
    let witness = s.first.map(|(i, j, v)| Witness {
        x: table.xs[i].clone(),
        y: Some(table.xs[j].clone()),
        lhs: v.lhs,
        rhs: v.rhs,
        images: vec![table.tx[i].clone(), table.tx[j].clone()],
        step: None,
        note: v.note.map(str::to_string),
    });
    Verdict {
        condition_label: label.to_string(),
        passed: witness.is_none(),
        checked_pairs: s.checked,
        witness,
        plan: Some(plan.clone()),
        tolerance: plan.epsilon,
        parameters,
        max_excess: s.max_excess,
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `‖Tx − Ty‖ ≤ ‖x − y‖ + ε` for every ordered sample pair.
pub fn check_nonexpansive(t: &Mapping, plan: &SamplePlan) -> Result<Verdict> {
    let tb = Table::build(t, plan, false)?;
    let eps = plan.epsilon;
    Ok(pair_scan_verdict("nonexpansive", &tb, plan, BTreeMap::new(), |i, j| {
        Eval::compare(tb.d(&tb.tx[i], &tb.tx[j]), tb.d(&tb.xs[i], &tb.xs[j]), eps)
    }))
}

/// Which side is measured from the fixed point; the two checks differ only in
/// how the distance is written.
#[derive(Clone, Copy)]
enum FixedSide {
    ImageMinusZ,
    ZMinusImage,
}

fn fixed_point_scan(
    t: &Mapping,
    plan: &SamplePlan,
    label: &str,
    parameters: BTreeMap<String, f64>,
    side: FixedSide,
) -> Result<Verdict> {
    let zs = t.known_fixed_points();
    if zs.is_empty() {
        return Err(Error::Precondition(format!("`{}` has no known fixed points", t.label())));
    }
    let tb = Table::build(t, plan, false)?;
    let eps = plan.epsilon;
    let s = scan(tb.xs.len(), zs.len(), |i, k| {
        let z = &zs[k];
        let (lhs, rhs) = match side {
            FixedSide::ImageMinusZ => (tb.d(&tb.tx[i], z), tb.d(&tb.xs[i], z)),
            FixedSide::ZMinusImage => (tb.d(z, &tb.tx[i]), tb.d(z, &tb.xs[i])),
        };
        Eval::compare(lhs, rhs, eps)
    });
    let witness = s.first.map(|(i, k, v)| Witness {
        x: tb.xs[i].clone(),
        y: Some(zs[k].clone()),
        lhs: v.lhs,
        rhs: v.rhs,
        images: vec![tb.tx[i].clone()],
        step: None,
        note: Some("y is the fixed point".into()),
    });
    Ok(Verdict {
        condition_label: label.to_string(),
        passed: witness.is_none(),
        checked_pairs: s.checked,
        witness,
        plan: Some(plan.clone()),
        tolerance: eps,
        parameters,
        max_excess: s.max_excess,
    })
}

/// `‖Tx − z‖ ≤ ‖x − z‖ + ε` for every sample `x` and known fixed point `z`.
pub fn check_quasi_nonexpansive(t: &Mapping, plan: &SamplePlan) -> Result<Verdict> {
    fixed_point_scan(t, plan, "quasi_nonexpansive", BTreeMap::new(), FixedSide::ImageMinusZ)
}

/// `‖z − Tx‖ ≤ ‖z − x‖ + ε`, the distance bound every B(γ, μ) map satisfies
/// towards its fixed points.
pub fn check_lemma3(t: &Mapping, p: BGammaMu, plan: &SamplePlan) -> Result<Verdict> {
    fixed_point_scan(
        t,
        plan,
        "fixed_point_distance",
        params(&[("gamma", p.gamma), ("mu", p.mu)]),
        FixedSide::ZMinusImage,
    )
}

fn c_lambda_verdict(t: &Mapping, lambda: f64, plan: &SamplePlan, label: &str) -> Result<Verdict> {
    let tb = Table::build(t, plan, false)?;
    let eps = plan.epsilon;
    let residual: Vec<f64> = tb.xs.iter().zip(&tb.tx).map(|(x, tx)| tb.d(x, tx)).collect();
    Ok(pair_scan_verdict(label, &tb, plan, params(&[("lambda", lambda)]), |i, j| {
        let dxy = tb.d(&tb.xs[i], &tb.xs[j]);
        if lambda * residual[i] <= dxy {
            Eval::compare(tb.d(&tb.tx[i], &tb.tx[j]), dxy, eps)
        } else {
            Eval::vacuous()
        }
    }))
}

/// Suzuki's condition (C): `½‖x − Tx‖ ≤ ‖x − y‖ ⇒ ‖Tx − Ty‖ ≤ ‖x − y‖ + ε`.
pub fn check_condition_c(t: &Mapping, plan: &SamplePlan) -> Result<Verdict> {
    c_lambda_verdict(t, 0.5, plan, "condition_c")
}

/// Condition (C_λ) for `0 < λ < 1`.
pub fn check_condition_c_lambda(t: &Mapping, lambda: f64, plan: &SamplePlan) -> Result<Verdict> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Contract(format!("lambda {lambda} outside (0, 1)")));
    }
    c_lambda_verdict(t, lambda, plan, "condition_c_lambda")
}

fn b_eval(tb: &Table, res: &[f64], p: BGammaMu, eps: f64, i: usize, j: usize) -> Eval {
    let (x, y, tx, ty) = (&tb.xs[i], &tb.xs[j], &tb.tx[i], &tb.tx[j]);
    let dxy = tb.d(x, y);
    if p.gamma * res[i] <= dxy + p.mu * res[j] {
        let lhs = tb.d(tx, ty);
        let rhs = (1.0 - p.gamma) * dxy + p.mu * (tb.d(x, ty) + tb.d(y, tx));
        Eval::compare(lhs, rhs, eps)
    } else {
        Eval::vacuous()
    }
}

fn b_verdict(tb: &Table, p: BGammaMu, plan: &SamplePlan) -> Verdict {
    let res: Vec<f64> = tb.xs.iter().zip(&tb.tx).map(|(x, tx)| tb.d(x, tx)).collect();
    let eps = plan.epsilon;
    pair_scan_verdict("condition_b", tb, plan, params(&[("gamma", p.gamma), ("mu", p.mu)]), |i, j| {
        b_eval(tb, &res, p, eps, i, j)
    })
}

/// Condition B(γ, μ):
/// `γ‖x − Tx‖ ≤ ‖x − y‖ + μ‖y − Ty‖ ⇒
///  ‖Tx − Ty‖ ≤ (1 − γ)‖x − y‖ + μ(‖x − Ty‖ + ‖y − Tx‖) + ε`.
pub fn check_condition_b(t: &Mapping, p: BGammaMu, plan: &SamplePlan) -> Result<Verdict> {
    Ok(b_verdict(&Table::build(t, plan, false)?, p, plan))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CellOutcome {
    Pass,
    Fail { witness: Witness },
    /// `(γ, μ)` lies outside the admissible set; no check was run.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub gamma: f64,
    pub mu: f64,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

impl SweepCell {
    pub fn verdict_str(&self) -> &'static str {
        match self.outcome {
            CellOutcome::Pass => "pass",
            CellOutcome::Fail { .. } => "fail",
            CellOutcome::Skipped => "skipped",
        }
    }
}

/// Every `(γ, μ)` of `gammas × mus`, in row-major order.
pub fn cartesian_cells(gammas: &[f64], mus: &[f64]) -> Vec<(f64, f64)> {
    gammas.iter().flat_map(|g| mus.iter().map(move |m| (*g, *m))).collect()
}

/// Runs condition B on each cell, sharing one evaluation table. Inadmissible
/// cells are marked skipped.
pub fn sweep_condition_b(t: &Mapping, cells: &[(f64, f64)], plan: &SamplePlan) -> Result<Vec<SweepCell>> {
    let tb = Table::build(t, plan, false)?;
    Ok(cells
        .iter()
        .map(|&(gamma, mu)| {
            let outcome = match BGammaMu::new(gamma, mu) {
                Err(_) => CellOutcome::Skipped,
                Ok(p) => {
                    let v = b_verdict(&tb, p, plan);
                    match v.witness {
                        None => CellOutcome::Pass,
                        Some(witness) => CellOutcome::Fail { witness },
                    }
                }
            };
            SweepCell { gamma, mu, outcome }
        })
        .collect())
}

/// The three basic properties of a B(γ, μ) self-map, for a given `θ ∈ [0, 1]`:
///
/// * (i) `‖Tx − T²x‖ ≤ ‖x − Tx‖`;
/// * (ii) `(θ/2)‖x − Tx‖ ≤ ‖x − y‖` or `(θ/2)‖Tx − T²x‖ ≤ ‖Tx − y‖`;
/// * (iii) `‖x − Ty‖ ≤ (3 − θ)‖x − Tx‖ + (1 − θ/2)‖x − y‖
///   + μ(2‖x − Tx‖ + ‖x − Ty‖ + ‖y − Tx‖ + 2‖Tx − T²x‖)`,
///   checked with the `μ‖x − Ty‖` term moved left as `(1 − μ)‖x − Ty‖`.
///
/// (i) is scanned over all points first, then (ii) and (iii) over all pairs.
/// If `T` does not pass condition B on the same plan a warning is logged and
/// the check still runs.
pub fn check_prop1(t: &Mapping, theta: f64, p: BGammaMu, plan: &SamplePlan) -> Result<Verdict> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Contract(format!("theta {theta} outside [0, 1]")));
    }
    let tb = Table::build(t, plan, true)?;
    if !b_verdict(&tb, p, plan).passed {
        log::warn!(
            "`{}` fails condition B({}, {}) on this plan; its basic properties need not hold",
            t.label(),
            p.gamma,
            p.mu
        );
    }
    let eps = plan.epsilon;
    let mu = p.mu;
    let half = theta / 2.0;
    let parameters = params(&[("theta", theta), ("gamma", p.gamma), ("mu", mu)]);
    let res: Vec<f64> = tb.xs.iter().zip(&tb.tx).map(|(x, tx)| tb.d(x, tx)).collect();
    let res2: Vec<f64> = tb.tx.iter().zip(&tb.ttx).map(|(tx, ttx)| tb.d(tx, ttx)).collect();

    let n = tb.xs.len();
    let first = scan(n, 1, |i, _| Eval::compare(res2[i], res[i], eps).noted("(i)"));
    if let Some((i, _, v)) = first.first {
        let witness = Witness {
            x: tb.xs[i].clone(),
            y: None,
            lhs: v.lhs,
            rhs: v.rhs,
            images: vec![tb.tx[i].clone(), tb.ttx[i].clone()],
            step: None,
            note: v.note.map(str::to_string),
        };
        return Ok(Verdict {
            condition_label: "prop1".into(),
            passed: false,
            checked_pairs: n,
            witness: Some(witness),
            plan: Some(plan.clone()),
            tolerance: eps,
            parameters,
            max_excess: first.max_excess,
        });
    }

    let mut v = pair_scan_verdict("prop1", &tb, plan, parameters, |i, j| {
        let (x, y, tx, ty) = (&tb.xs[i], &tb.xs[j], &tb.tx[i], &tb.tx[j]);
        let dxy = tb.d(x, y);
        let a = Eval::compare(half * res[i], dxy, eps);
        let b = Eval::compare(half * res2[i], tb.d(tx, y), eps);
        // (ii) fails only when both alternatives fail; report the narrower miss.
        let second = match (a.violation, b.violation) {
            (Some(va), Some(vb)) => {
                let v = if va.lhs - va.rhs <= vb.lhs - vb.rhs { va } else { vb };
                Some(Violation { note: Some("(ii)"), ..v })
            }
            _ => None,
        };
        let second_excess = match (a.excess, b.excess) {
            (Some(ea), Some(eb)) => Some(ea.min(eb)),
            _ => None,
        };
        let lhs3 = (1.0 - mu) * tb.d(x, ty);
        let rhs3 = (3.0 - theta) * res[i]
            + (1.0 - half) * dxy
            + mu * (2.0 * res[i] + tb.d(y, tx) + 2.0 * res2[i]);
        let third = Eval::compare(lhs3, rhs3, eps).noted("(iii)");
        Eval {
            excess: merge_max(second_excess, third.excess),
            violation: second.or(third.violation),
        }
    });
    v.checked_pairs += n;
    v.max_excess = merge_max(v.max_excess, first.max_excess);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mappings::{builtin_gallery, gallery_mapping, scaling, MapSpec};
    use crate::vecspace::Domain;

    fn example1() -> Mapping {
        gallery_mapping("example1").unwrap()
    }

    fn interval_map(f: impl Fn(f64) -> f64 + Send + Sync + 'static, ambient: bool) -> Mapping {
        let d = Domain::interval(0.0, 4.0).unwrap();
        let rule = move |x: &[f64]| vec![f(x[0])];
        if ambient {
            Mapping::ambient("f", d, rule, vec![]).unwrap()
        } else {
            Mapping::new("f", d, rule, vec![]).unwrap()
        }
    }

    /// Step 0.5 / 0.25 grids on [0, 4].
    fn grid(step: f64) -> SamplePlan {
        SamplePlan::grid((4.0 / step).round() as usize + 1)
    }

    #[test]
    fn gamma_mu_constraints() {
        assert!(BGammaMu::new(0.7, 0.35).is_ok());
        assert!(matches!(BGammaMu::new(0.5, 0.3), Err(Error::Contract(_))));
        assert!(BGammaMu::new(1.1, 0.0).is_err());
        assert!(BGammaMu::new(1.0, 0.6).is_err());
        assert!(BGammaMu::new(-0.1, 0.0).is_err());
        assert!(serde_json::from_str::<BGammaMu>(r#"{"gamma":0.2,"mu":0.2}"#).is_err());
    }

    #[test]
    fn halving_is_nonexpansive() {
        let t = interval_map(|x| x / 2.0, false);
        assert!(check_nonexpansive(&t, &grid(0.25)).unwrap().passed);
        let id = gallery_mapping("identity").unwrap();
        assert!(check_nonexpansive(&id, &SamplePlan::grid(7)).unwrap().passed);
    }

    #[test]
    fn example1_is_not_nonexpansive() {
        let v = check_nonexpansive(&example1(), &grid(0.5)).unwrap();
        assert!(!v.passed);
        assert_eq!(v.checked_pairs, 81);
        let w = v.witness.unwrap();
        assert!(w.lhs > w.rhs + v.tolerance);
        // first in lexicographic order: x = 2.5 against y = 4
        assert_eq!(w.x.coords(), &[2.5]);
        assert_eq!(w.y.unwrap().coords(), &[4.0]);
        // (4, 3.5) violates as well: |2 − 0| = 2 > 0.5
        let t = example1();
        let gap = t.eval_at(&[4.0]).unwrap().dist(&t.eval_at(&[3.5]).unwrap(), NormKind::L2);
        assert_eq!(gap, 2.0);
    }

    #[test]
    fn quasi_nonexpansive_examples() {
        assert!(check_quasi_nonexpansive(&example1(), &grid(0.25)).unwrap().passed);
        let d = Domain::interval(0.0, 1.0).unwrap();
        let double = Mapping::ambient("double", d, |x| vec![2.0 * x[0]], vec![Vector::scalar(0.0).unwrap()]).unwrap();
        let v = check_quasi_nonexpansive(&double, &SamplePlan::grid(5)).unwrap();
        assert!(!v.passed);
        // x = z = 0 gives 0 ≤ 0, so the first violation is the next grid point
        let w = v.witness.unwrap();
        assert_eq!(w.x.coords(), &[0.25]);
        assert_eq!((w.lhs, w.rhs), (0.5, 0.25));
    }

    #[test]
    fn missing_fixed_points_is_a_precondition_error() {
        let t = interval_map(|x| 4.0 - x / 2.0, false);
        assert!(matches!(check_quasi_nonexpansive(&t, &grid(1.0)), Err(Error::Precondition(_))));
        assert!(matches!(check_lemma3(&t, BGammaMu::zero(), &grid(1.0)), Err(Error::Precondition(_))));
    }

    #[test]
    fn lemma3_examples() {
        assert!(check_lemma3(&example1(), BGammaMu::new(0.7, 0.35).unwrap(), &grid(0.01)).unwrap().passed);
        let d = Domain::interval(0.0, 1.0).unwrap();
        let double = Mapping::ambient("double", d, |x| vec![2.0 * x[0]], vec![Vector::scalar(0.0).unwrap()]).unwrap();
        assert!(!check_lemma3(&double, BGammaMu::zero(), &SamplePlan::grid(11)).unwrap().passed);
    }

    #[test]
    fn condition_c_examples() {
        let v = check_condition_c(&example1(), &grid(0.25)).unwrap();
        assert!(!v.passed);
        let w = v.witness.as_ref().unwrap();
        assert!(w.lhs > w.rhs + v.tolerance);
        // (4, 2.5): premise ½·2 = 1 ≤ 1.5 holds, conclusion 2 > 1.5
        let t = example1();
        let premise = 0.5 * 2.0_f64 <= 1.5;
        let concl = t.eval_at(&[4.0]).unwrap().dist(&t.eval_at(&[2.5]).unwrap(), NormKind::L2);
        assert!(premise && concl > 1.5);

        let constant = gallery_mapping("constant").unwrap();
        assert!(check_condition_c(&constant, &grid(0.25)).unwrap().passed);
        for m in builtin_gallery() {
            let plan = SamplePlan::random(5, 40);
            if check_nonexpansive(&m, &plan).unwrap().passed {
                assert!(check_condition_c(&m, &plan).unwrap().passed, "{}", m.label());
            }
        }
    }

    #[test]
    fn c_lambda_half_is_condition_c() {
        for m in builtin_gallery() {
            let plan = SamplePlan::random(8, 30);
            let a = check_condition_c(&m, &plan).unwrap();
            let b = check_condition_c_lambda(&m, 0.5, &plan).unwrap();
            assert_eq!(a.passed, b.passed);
            assert_eq!(a.witness, b.witness);
            assert_eq!(a.max_excess, b.max_excess);
        }
        let plan = grid(0.25);
        assert_eq!(
            check_condition_c(&example1(), &plan).unwrap().witness,
            check_condition_c_lambda(&example1(), 0.5, &plan).unwrap().witness
        );
    }

    #[test]
    fn c_lambda_range_and_nonexpansive_maps() {
        let t = interval_map(|x| x / 2.0, false);
        assert!(matches!(check_condition_c_lambda(&t, 0.0, &grid(1.0)), Err(Error::Contract(_))));
        assert!(matches!(check_condition_c_lambda(&t, 1.0, &grid(1.0)), Err(Error::Contract(_))));
        for lambda in [0.1, 0.5, 0.9] {
            assert!(check_condition_c_lambda(&t, lambda, &grid(0.25)).unwrap().passed);
        }
    }

    /// Independent double loop for C_λ on an `n`-point grid of [0, 4].
    fn c_lambda_oracle(lambda: f64, n: usize) -> Option<(f64, f64)> {
        let xs: Vec<f64> = (0..n).map(|i| 4.0 * i as f64 / (n - 1) as f64).collect();
        let t = |x: f64| if x == 4.0 { 2.0 } else { 0.0 };
        for &x in &xs {
            for &y in &xs {
                let premise = lambda * (x - t(x)).abs() <= (x - y).abs();
                if premise && (t(x) - t(y)).abs() > (x - y).abs() + 1e-9 {
                    return Some((x, y));
                }
            }
        }
        None
    }

    #[test]
    fn c_lambda_example1_oracle() {
        // violations need 2 < x ≤ 4/(1 + λ) with y = 4; the 0.25 grid misses that window
        assert_eq!(c_lambda_oracle(0.9, 17), None);
        assert!(check_condition_c_lambda(&example1(), 0.9, &grid(0.25)).unwrap().passed);

        let (x, y) = c_lambda_oracle(0.9, 81).expect("0.05 grid hits the window");
        let v = check_condition_c_lambda(&example1(), 0.9, &grid(0.05)).unwrap();
        assert!(!v.passed);
        let w = v.witness.unwrap();
        assert_eq!((w.x.coords()[0], w.y.unwrap().coords()[0]), (x, y));
        assert_eq!(y, 4.0);
    }

    #[test]
    fn condition_b_zero_is_nonexpansive() {
        for m in builtin_gallery() {
            let plan = SamplePlan::random(17, 30);
            let ne = check_nonexpansive(&m, &plan).unwrap();
            let b = check_condition_b(&m, BGammaMu::zero(), &plan).unwrap();
            assert_eq!(ne.passed, b.passed, "{}", m.label());
            assert_eq!(ne.witness, b.witness);
            assert_eq!(ne.max_excess, b.max_excess);
        }
    }

    #[test]
    fn condition_b_example1_regression() {
        // oracle: exhaustive double loop over the 0.01 grid
        let xs: Vec<f64> = (0..401).map(|i| if i == 400 { 4.0 } else { 4.0 * i as f64 / 400.0 }).collect();
        let t = |x: f64| if x == 4.0 { 2.0 } else { 0.0 };
        let (g, m) = (0.7, 0.35);
        let mut oracle_pass = true;
        for &x in &xs {
            for &y in &xs {
                if g * (x - t(x)).abs() <= (x - y).abs() + m * (y - t(y)).abs() {
                    let rhs = (1.0 - g) * (x - y).abs() + m * ((x - t(y)).abs() + (y - t(x)).abs());
                    if (t(x) - t(y)).abs() > rhs + 1e-9 {
                        oracle_pass = false;
                    }
                }
            }
        }
        let v = check_condition_b(&example1(), BGammaMu::new(g, m).unwrap(), &grid(0.01)).unwrap();
        assert_eq!(v.passed, oracle_pass);
        // pinned: example1 satisfies B(0.7, 0.35) on the 0.01 grid
        assert!(v.passed);
    }

    #[test]
    fn sweep_skips_inadmissible_and_matches_single_checks() {
        let plan = grid(0.25);
        let cells = cartesian_cells(&[0.0, 0.2, 0.6, 1.0], &[0.0, 0.1, 0.3, 0.5]);
        let constant = gallery_mapping("constant").unwrap();
        let table = sweep_condition_b(&constant, &cells, &plan).unwrap();
        for c in &table {
            match BGammaMu::new(c.gamma, c.mu) {
                Err(_) => assert_eq!(c.outcome, CellOutcome::Skipped),
                Ok(_) => assert_eq!(c.outcome, CellOutcome::Pass, "({}, {})", c.gamma, c.mu),
            }
        }
        assert_eq!(table.iter().filter(|c| c.outcome == CellOutcome::Skipped).count(), 6);

        // x/2 is nonexpansive but B(1, 0) demands Tx = Ty whenever ‖x − Tx‖ ≤ ‖x − y‖
        let half = interval_map(|x| x / 2.0, false);
        let table = sweep_condition_b(&half, &cells, &plan).unwrap();
        for c in &table {
            if let Ok(p) = BGammaMu::new(c.gamma, c.mu) {
                let direct = check_condition_b(&half, p, &plan).unwrap();
                assert_eq!(c.outcome == CellOutcome::Pass, direct.passed);
            }
        }
        assert_eq!(table[0].outcome, CellOutcome::Pass);
        let g1 = table.iter().find(|c| c.gamma == 1.0 && c.mu == 0.0).unwrap();
        assert!(matches!(g1.outcome, CellOutcome::Fail { .. }));

        let e = example1();
        let single = sweep_condition_b(&e, &[(0.5, 0.25)], &plan).unwrap();
        let direct = check_condition_b(&e, BGammaMu::new(0.5, 0.25).unwrap(), &plan).unwrap();
        match &single[0].outcome {
            CellOutcome::Fail { witness } => assert_eq!(Some(witness), direct.witness.as_ref()),
            other => panic!("expected fail, got {other:?}"),
        }
    }

    #[test]
    fn prop1_identity_and_theta_zero() {
        let id = gallery_mapping("identity").unwrap();
        let p = BGammaMu::new(0.7, 0.35).unwrap();
        assert!(check_condition_b(&id, p, &SamplePlan::grid(5)).unwrap().passed);
        assert!(check_prop1(&id, 0.7, p, &SamplePlan::grid(5)).unwrap().passed);
        assert!(check_prop1(&id, 0.0, BGammaMu::zero(), &SamplePlan::grid(5)).unwrap().passed);
        // (iii) for the identity reads ‖x − y‖ ≤ (1 − θ/2 + 2μ)‖x − y‖, false once θ > 4μ
        let v = check_prop1(&id, 0.7, BGammaMu::zero(), &SamplePlan::grid(5)).unwrap();
        assert!(!v.passed);
        assert_eq!(v.witness.unwrap().note.as_deref(), Some("(iii)"));
        // θ = 0 makes both alternatives of (ii) read 0 ≤ something
        let e = example1();
        let v = check_prop1(&e, 0.0, BGammaMu::zero(), &grid(0.25)).unwrap();
        if let Some(w) = &v.witness {
            assert_ne!(w.note.as_deref(), Some("(ii)"));
        }
        assert!(matches!(check_prop1(&id, 1.5, BGammaMu::zero(), &SamplePlan::grid(3)), Err(Error::Contract(_))));
    }

    #[test]
    fn prop1_affine_contraction_oracle() {
        let t = gallery_mapping("affine_contraction").unwrap();
        let plan = SamplePlan::grid(9);
        let p = BGammaMu::new(0.2, 0.1).unwrap();
        let theta = 0.5;
        let v = check_prop1(&t, theta, p, &plan).unwrap();

        // brute force with plain arrays
        let a = crate::mappings::AFFINE_CONTRACTION_MATRIX;
        let b = crate::mappings::AFFINE_CONTRACTION_SHIFT;
        let f = |x: [f64; 2]| [a[0][0] * x[0] + a[0][1] * x[1] + b[0], a[1][0] * x[0] + a[1][1] * x[1] + b[1]];
        let d = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        let axis: Vec<f64> = (0..9).map(|i| if i == 8 { 2.0 } else { -2.0 + 4.0 * i as f64 / 8.0 }).collect();
        let pts: Vec<[f64; 2]> = axis.iter().flat_map(|&u| axis.iter().map(move |&w| [u, w])).collect();
        let mut ok = true;
        for &x in &pts {
            let (tx, ttx) = (f(x), f(f(x)));
            ok &= d(tx, ttx) <= d(x, tx) + 1e-9;
            for &y in &pts {
                let ty = f(y);
                let two = 0.25 * d(x, tx) <= d(x, y) + 1e-9 || 0.25 * d(tx, ttx) <= d(tx, y) + 1e-9;
                let three = 0.9 * d(x, ty)
                    <= 2.5 * d(x, tx) + 0.75 * d(x, y) + 0.1 * (2.0 * d(x, tx) + d(y, tx) + 2.0 * d(tx, ttx)) + 1e-9;
                ok &= two && three;
            }
        }
        assert!(ok);
        assert_eq!(v.passed, ok);
        assert_eq!(v.checked_pairs, 81 + 81 * 81);
    }

    #[test]
    fn prop1_part_one_failure_is_reported() {
        // contracts except around 2, where it jumps: |Tx − T²x| > |x − Tx| at x = 2
        let d = Domain::interval(0.0, 4.0).unwrap();
        let t = MapSpec::Piecewise {
            cases: vec![crate::mappings::PiecewiseCase { at: Vector::scalar(2.0).unwrap(), value: Vector::scalar(2.5).unwrap() }],
            otherwise: Vector::scalar(0.0).unwrap(),
        }
        .build(&d, None, vec![], false);
        // 2 ↦ 2.5 ↦ 0: |2.5 − 0| = 2.5 > |2 − 2.5| = 0.5
        let v = check_prop1(&t.unwrap(), 0.5, BGammaMu::zero(), &SamplePlan::grid(5)).unwrap();
        assert!(!v.passed);
        let w = v.witness.unwrap();
        assert_eq!(w.note.as_deref(), Some("(i)"));
        assert_eq!(w.x.coords(), &[2.0]);
    }

    #[test]
    fn verdicts_are_deterministic_and_monotone_in_epsilon() {
        let e = example1();
        let a = check_condition_c(&e, &grid(0.25)).unwrap();
        let b = check_condition_c(&e, &grid(0.25)).unwrap();
        assert_eq!(a, b);
        let s = scaling(&Domain::ball(Vector::zeros(2), 1.0, NormKind::L2).unwrap(), 0.9).unwrap();
        for eps in [1e-12, 1e-9, 1e-3] {
            let plan = SamplePlan::random(2, 40).with_epsilon(eps);
            assert!(check_nonexpansive(&s, &plan).unwrap().passed);
        }
        let strict = check_nonexpansive(&e, &grid(0.5).with_epsilon(1.0)).unwrap();
        let loose = check_nonexpansive(&e, &grid(0.5).with_epsilon(3.0)).unwrap();
        assert!(!strict.passed && loose.passed);
    }

    #[test]
    fn verdict_json_has_the_report_fields() {
        let v = check_nonexpansive(&example1(), &grid(0.5)).unwrap();
        let j = serde_json::to_value(&v).unwrap();
        for key in ["condition_label", "passed", "checked_pairs", "witness", "plan", "tolerance", "parameters"] {
            assert!(j.get(key).is_some(), "{key}");
        }
        assert_eq!(j["witness"]["x"], serde_json::json!([2.5]));
        let back: Verdict = serde_json::from_value(j).unwrap();
        assert_eq!(back, v);
    }
}
