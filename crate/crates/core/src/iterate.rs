//! Averaged iteration engines and trace diagnostics.
//!
//! Every engine computes a convex combination `w_n = Σ c_k T_k x_n` and steps
//! `x_{n+1} = λ w_n + (1 − λ) x_n`. They differ only in how the weights `c_k`
//! are derived from `α_n`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conditions::{BGammaMu, Verdict, Witness};
use crate::error::{Error, Result};
use crate::mappings::{Mapping, MappingFamily};
use crate::schedules::{alpha, geometric_tail, AlphaSchedule};
use crate::vecspace::{averaged_step, convex_combination, Domain, NormKind, Vector, WEIGHT_SUM_TOL};

/// Step tolerance for the monotone distance and replay checks.
pub const MONOTONE_TOL: f64 = 1e-12;
/// Traces must hold at least this many records before residual decay is judged.
pub const MIN_RESIDUAL_RECORDS: usize = 20;
/// Steps recorded at full `record_every` density before decimation by 10.
pub const DENSE_RECORD_STEPS: usize = 10_000;
/// γ above which the engines warn that "γ small enough" may not hold.
pub const GAMMA_WARN_THRESHOLD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationConfig {
    pub lambda: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop once the composite residual drops to this value. Zero disables
    /// the test, so the run always takes `max_iters` steps.
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_k: Option<usize>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_max_iters() -> usize {
    1000
}

fn default_residual_tol() -> f64 {
    1e-12
}

fn default_record_every() -> usize {
    1
}

impl IterationConfig {
    pub fn new(lambda: f64, max_iters: usize, residual_tol: f64) -> Self {
        IterationConfig { lambda, max_iters, residual_tol, truncation_k: None, record_every: 1 }
    }

    pub fn with_truncation(mut self, k: usize) -> Self {
        self.truncation_k = Some(k);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(None)
    }

    /// Validates against an optional B(γ, μ) context, which additionally
    /// requires `λ ≥ γ`.
    pub fn validate_with(&self, context: Option<&BGammaMu>) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidInput(format!("lambda {} outside (0, 1)", self.lambda)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be >= 1".into()));
        }
        if !(self.residual_tol >= 0.0 && self.residual_tol.is_finite()) {
            return Err(Error::InvalidInput(format!("residual_tol {} must be >= 0", self.residual_tol)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidInput("record_every must be >= 1".into()));
        }
        if let Some(p) = context {
            if p.gamma() > 0.0 && self.lambda < p.gamma() {
                return Err(Error::InvalidInput(format!(
                    "lambda {} below gamma {}",
                    self.lambda,
                    p.gamma()
                )));
            }
            if p.gamma() > GAMMA_WARN_THRESHOLD {
                log::warn!("gamma {} exceeds {GAMMA_WARN_THRESHOLD}; convergence is not assumed", p.gamma());
            }
        }
        Ok(())
    }

    fn records(&self, n: usize) -> bool {
        if n < DENSE_RECORD_STEPS {
            n.is_multiple_of(self.record_every)
        } else {
            n.is_multiple_of(self.record_every * 10)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TolReached,
    MaxIters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub x: Vector,
    /// `x_{n+1}`; absent on the step where the tolerance stop fired.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_next: Option<Vector>,
    pub w: Vector,
    /// `‖w_n − x_n‖`.
    pub residual: f64,
    /// `‖T_k x_n − x_n‖` for each mapping in use.
    pub map_residuals: Vec<f64>,
    pub alpha: f64,
    pub weights: Vec<f64>,
    /// `‖x_n − z‖` for each known common fixed point `z`.
    pub fixed_point_distances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub engine: String,
    pub lambda: Option<f64>,
    pub residual_tol: f64,
    #[serde(default)]
    pub norm: NormKind,
    pub mapping_labels: Vec<String>,
    pub fixed_points: Vec<Vector>,
    pub records: Vec<StepRecord>,
    pub stop_reason: StopReason,
    /// Number of updates performed.
    pub total_steps: usize,
    pub final_x: Vector,
    pub final_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub engine: String,
    pub stop_reason: StopReason,
    pub total_steps: usize,
    pub recorded_steps: usize,
    pub final_x: Vector,
    pub final_residual: f64,
}

impl Trace {
    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            engine: self.engine.clone(),
            stop_reason: self.stop_reason,
            total_steps: self.total_steps,
            recorded_steps: self.records.len(),
            final_x: self.final_x.clone(),
            final_residual: self.final_residual,
        }
    }

    /// Column names of [`Trace::to_csv`].
    pub fn csv_header(&self) -> Vec<String> {
        let mut cols = vec!["step".to_string()];
        cols.extend((1..=self.final_x.dim()).map(|i| format!("x{i}")));
        cols.push("residual".into());
        cols.extend((1..=self.mapping_labels.len()).map(|k| format!("map_residual_{k}")));
        cols.push("alpha".into());
        cols.extend((1..=self.fixed_points.len()).map(|j| format!("fixed_point_distance_{j}")));
        cols
    }

    /// One row per recorded step; reals carry 17 significant digits.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(self.csv_header()).map_err(io)?;
        for r in &self.records {
            let reals = r
                .x
                .coords()
                .iter()
                .chain(std::iter::once(&r.residual))
                .chain(&r.map_residuals)
                .chain(std::iter::once(&r.alpha))
                .chain(&r.fixed_point_distances);
            let row = std::iter::once(r.step.to_string()).chain(reals.map(|v| fmt_real(*v)));
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Weight rule of an engine: `(α_n, c)` at step `n`.
type WeightRule<'a> = dyn Fn(usize) -> Result<(f64, Vec<f64>)> + 'a;

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|c| c.is_nan() || *c < 0.0) || (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Internal(format!("step {n}: weights {weights:?} are not convex")));
    }
    Ok(())
}

fn runtime(step: usize, e: Error) -> Error {
    match e {
        Error::Runtime { .. } => e,
        other => Error::Runtime { step, message: other.to_string() },
    }
}

fn run_engine(
    engine: &str,
    maps: &[&Mapping],
    domain: &Domain,
    fixed_points: Vec<Vector>,
    x0: &Vector,
    cfg: &IterationConfig,
    weights_at: &WeightRule<'_>,
) -> Result<Trace> {
    cfg.validate()?;
    if x0.dim() != domain.dim() {
        return Err(Error::InvalidInput(format!(
            "x0 has dimension {} but the domain has {}",
            x0.dim(),
            domain.dim()
        )));
    }
    if !domain.contains(x0) {
        return Err(Error::OutsideDomain { label: engine.to_string(), point: x0.coords().to_vec() });
    }
    let norm = domain.norm;
    let mut x = x0.clone();
    let mut records = Vec::new();
    let mut stop_reason = StopReason::MaxIters;
    let mut total_steps = cfg.max_iters;
    let mut final_residual = f64::NAN;

    for n in 0..cfg.max_iters {
        let (a, weights) = weights_at(n)?;
        check_weights(&weights, n)?;
        let images = maps
            .iter()
            .map(|t| t.evaluate(&x))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| runtime(n, e))?;
        let refs: Vec<&Vector> = images.iter().collect();
        let w = convex_combination(&refs, &weights).map_err(|e| runtime(n, e))?;
        let residual = w.dist(&x, norm);
        final_residual = residual;
        let make_record = |x_next: Option<Vector>| StepRecord {
            step: n,
            x: x.clone(),
            x_next,
            w: w.clone(),
            residual,
            map_residuals: images.iter().map(|tx| tx.dist(&x, norm)).collect(),
            alpha: a,
            weights: weights.clone(),
            fixed_point_distances: fixed_points.iter().map(|z| x.dist(z, norm)).collect(),
        };

        if cfg.residual_tol > 0.0 && residual <= cfg.residual_tol {
            records.push(make_record(None));
            stop_reason = StopReason::TolReached;
            total_steps = n;
            break;
        }
        let next = averaged_step(&w, &x, cfg.lambda).map_err(|e| runtime(n + 1, e))?;
        if !domain.contains(&next) {
            return Err(Error::Runtime {
                step: n + 1,
                message: format!("iterate {:?} left the domain", next.coords()),
            });
        }
        if cfg.records(n) || n + 1 == cfg.max_iters {
            records.push(make_record(Some(next.clone())));
        }
        x = next;
    }
    if stop_reason == StopReason::MaxIters {
        // residual at the final iterate, for the summary
        let (_, weights) = weights_at(cfg.max_iters)?;
        let images = maps
            .iter()
            .map(|t| t.evaluate(&x))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| runtime(cfg.max_iters, e))?;
        let refs: Vec<&Vector> = images.iter().collect();
        final_residual = convex_combination(&refs, &weights)?.dist(&x, norm);
    }

    Ok(Trace {
        engine: engine.to_string(),
        lambda: Some(cfg.lambda),
        residual_tol: cfg.residual_tol,
        norm,
        mapping_labels: maps.iter().map(|t| t.label().to_string()).collect(),
        fixed_points,
        records,
        stop_reason,
        total_steps,
        final_x: x,
        final_residual,
    })
}

/// `x_{n+1} = λ T x_n + (1 − λ) x_n`.
pub fn krasnoselskii_run(t: &Mapping, x0: &Vector, cfg: &IterationConfig) -> Result<Trace> {
    run_engine(
        "krasnoselskii",
        &[t],
        t.domain(),
        t.known_fixed_points().to_vec(),
        x0,
        cfg,
        &|_| Ok((0.0, vec![1.0])),
    )
}

/// Weights `c_1 = 1 − Σ_{k=1}^{m−1} α^k`, `c_k = α^{k−1}` for `k = 2..m`.
pub fn family_weights(a: f64, m: usize) -> Vec<f64> {
    let mut weights = Vec::with_capacity(m);
    weights.push(1.0 - (1..m as i32).map(|k| a.powi(k)).sum::<f64>());
    weights.extend((2..=m as i32).map(|k| a.powi(k - 1)));
    weights
}

/// Weights over the first `k` members with the geometric tail beyond them
/// folded into `c_1`: `c_1 = 1 − α/(1−α) + α^k/(1−α)`, `c_j = α^{j−1}`.
pub fn truncated_weights(a: f64, k: usize) -> Vec<f64> {
    let mut weights = Vec::with_capacity(k);
    weights.push(1.0 - geometric_tail(a, 1) + geometric_tail(a, k as i32));
    weights.extend((2..=k as i32).map(|j| a.powi(j - 1)));
    weights
}

fn schedule_alpha(s: &AlphaSchedule, n: usize) -> Result<f64> {
    let a = alpha(s, n);
    if !(0.0..=0.5).contains(&a) {
        return Err(Error::Internal(format!("step {n}: alpha {a} outside [0, 1/2]")));
    }
    Ok(a)
}

/// The m-map scheme with weights from [`family_weights`]; needs `m ≥ 2`.
pub fn multi_map_run(
    family: &MappingFamily,
    s: &AlphaSchedule,
    x0: &Vector,
    cfg: &IterationConfig,
) -> Result<Trace> {
    let m = family.len();
    if m < 2 {
        return Err(Error::InvalidInput(format!("multi-map run needs at least 2 mappings, got {m}")));
    }
    s.validate()?;
    let maps: Vec<&Mapping> = family.members().iter().collect();
    run_engine(
        "multi_map",
        &maps,
        family.domain(),
        family.common_fixed_points(),
        x0,
        cfg,
        &|n| {
            let a = schedule_alpha(s, n)?;
            Ok((a, family_weights(a, m)))
        },
    )
}

/// The infinite-family scheme truncated to the first `truncation_k` members.
pub fn truncated_family_run(
    family: &MappingFamily,
    s: &AlphaSchedule,
    x0: &Vector,
    cfg: &IterationConfig,
) -> Result<Trace> {
    let k = cfg
        .truncation_k
        .ok_or_else(|| Error::InvalidInput("truncated run needs truncation_k".into()))?;
    if k == 0 || k > family.len() {
        return Err(Error::Contract(format!(
            "truncation_k {k} must lie in 1..={}",
            family.len()
        )));
    }
    s.validate()?;
    let maps: Vec<&Mapping> = family.members()[..k].iter().collect();
    run_engine(
        "truncated_family",
        &maps,
        family.domain(),
        family.common_fixed_points(),
        x0,
        cfg,
        &|n| {
            let a = schedule_alpha(s, n)?;
            Ok((a, truncated_weights(a, k)))
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSeries {
    pub steps: Vec<usize>,
    pub gaps: Vec<f64>,
    pub head_max: f64,
    /// Maximum over the last quarter of the series.
    pub tail_max: f64,
}

fn quarter_maxima(values: &[f64]) -> (f64, f64) {
    let q = (values.len() / 4).max(1);
    let head = values[..q.min(values.len())].iter().copied().fold(0.0, f64::max);
    let tail = values[values.len().saturating_sub(q)..].iter().copied().fold(0.0, f64::max);
    (head, tail)
}

/// `‖w_n − x_n‖` with `w_n` recovered from consecutive iterates as
/// `(x_{n+1} − (1 − λ) x_n) / λ`.
pub fn goebel_kirk_gap(t: &Trace) -> Result<GapSeries> {
    let lambda = t.lambda.ok_or_else(|| Error::Contract("trace carries no lambda".into()))?;
    let mut steps = Vec::new();
    let mut gaps = Vec::new();
    for r in &t.records {
        let Some(next) = &r.x_next else { continue };
        let w: Vec<f64> = next
            .coords()
            .iter()
            .zip(r.x.coords())
            .map(|(xn1, xn)| (xn1 - (1.0 - lambda) * xn) / lambda)
            .collect();
        let gap = Vector::new(w)?.dist(&r.x, t.norm);
        steps.push(r.step);
        gaps.push(gap);
    }
    if gaps.is_empty() {
        return Err(Error::Precondition("trace has no completed steps".into()));
    }
    let (head_max, tail_max) = quarter_maxima(&gaps);
    Ok(GapSeries { steps, gaps, head_max, tail_max })
}

fn trace_verdict(label: &str, checked: usize, witness: Option<Witness>, tolerance: f64) -> Verdict {
    Verdict {
        condition_label: label.to_string(),
        passed: witness.is_none(),
        checked_pairs: checked,
        witness,
        plan: None,
        tolerance,
        parameters: BTreeMap::new(),
        max_excess: None,
    }
}

/// Passes iff `‖x_{n+1} − z‖ ≤ ‖x_n − z‖ + 1e−12` on every recorded step and
/// between consecutive records.
pub fn monotone_distance_check(t: &Trace, z: &Vector) -> Result<Verdict> {
    let mut pairs: Vec<(usize, &Vector, &Vector)> = Vec::new();
    for (i, r) in t.records.iter().enumerate() {
        if let Some(next) = &r.x_next {
            pairs.push((r.step, &r.x, next));
        }
        if let Some(later) = t.records.get(i + 1) {
            if later.step != r.step + 1 {
                pairs.push((r.step, &r.x, &later.x));
            }
        }
    }
    let mut witness = None;
    let mut max_excess = f64::NEG_INFINITY;
    for &(step, a, b) in &pairs {
        if a.dim() != z.dim() {
            return Err(Error::InvalidInput("fixed point dimension mismatch".into()));
        }
        let (da, db) = (a.dist(z, t.norm), b.dist(z, t.norm));
        max_excess = max_excess.max(db - da);
        if witness.is_none() && db > da + MONOTONE_TOL {
            witness = Some(Witness {
                x: a.clone(),
                y: Some(b.clone()),
                lhs: db,
                rhs: da,
                images: vec![],
                step: Some(step),
                note: None,
            });
        }
    }
    let mut v = trace_verdict("monotone_distance", pairs.len(), witness, MONOTONE_TOL);
    if !pairs.is_empty() {
        v.max_excess = Some(max_excess);
    }
    Ok(v)
}

/// Passes iff the tail-quarter maximum of the composite residual is at most the
/// head-quarter maximum and, after a tolerance stop, the final residual meets
/// the tolerance.
pub fn residual_vanishes_check(t: &Trace) -> Result<Verdict> {
    if t.records.len() < MIN_RESIDUAL_RECORDS {
        return Err(Error::Precondition(format!(
            "{} recorded steps, need at least {MIN_RESIDUAL_RECORDS}",
            t.records.len()
        )));
    }
    let residuals: Vec<f64> = t.records.iter().map(|r| r.residual).collect();
    let (head, tail) = quarter_maxima(&residuals);
    let last = t.records.last().expect("nonempty");
    let mut witness = None;
    if tail > head {
        let q = residuals.len() / 4;
        let worst = t.records[residuals.len() - q..]
            .iter()
            .max_by(|a, b| a.residual.total_cmp(&b.residual))
            .expect("nonempty tail");
        witness = Some(Witness {
            x: worst.x.clone(),
            y: None,
            lhs: tail,
            rhs: head,
            images: vec![worst.w.clone()],
            step: Some(worst.step),
            note: Some("tail maximum exceeds head maximum".into()),
        });
    } else if t.stop_reason == StopReason::TolReached && last.residual > t.residual_tol {
        witness = Some(Witness {
            x: last.x.clone(),
            y: None,
            lhs: last.residual,
            rhs: t.residual_tol,
            images: vec![last.w.clone()],
            step: Some(last.step),
            note: Some("final residual above tolerance".into()),
        });
    }
    let mut v = trace_verdict("residual_vanishes", residuals.len(), witness, t.residual_tol);
    v.parameters.insert("head_max".into(), head);
    v.parameters.insert("tail_max".into(), tail);
    Ok(v)
}

/// `max ‖x_n − x‖` over the last `window` records, a proxy for
/// `limsup ‖x_n − x‖`.
pub fn asymptotic_radius(t: &Trace, x: &Vector, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::Contract("window must be >= 1".into()));
    }
    if window > t.records.len() {
        return Err(Error::Precondition(format!(
            "window {window} exceeds {} recorded steps",
            t.records.len()
        )));
    }
    Ok(t.records[t.records.len() - window..]
        .iter()
        .map(|r| r.x.dist(x, t.norm))
        .fold(0.0, f64::max))
}

/// Recomputes every recorded step from `x_n`, the stored weights and `λ`
/// through `maps`, returning the largest deviation from the stored `x_{n+1}`.
pub fn replay_error(t: &Trace, maps: &[&Mapping]) -> Result<f64> {
    let lambda = t.lambda.ok_or_else(|| Error::Contract("trace carries no lambda".into()))?;
    if maps.len() != t.mapping_labels.len() {
        return Err(Error::Contract(format!(
            "trace used {} mappings, {} supplied",
            t.mapping_labels.len(),
            maps.len()
        )));
    }
    let mut worst: f64 = 0.0;
    for r in &t.records {
        let Some(next) = &r.x_next else { continue };
        let images = maps.iter().map(|m| m.evaluate(&r.x)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Vector> = images.iter().collect();
        let w = convex_combination(&refs, &r.weights)?;
        let again = averaged_step(&w, &r.x, lambda)?;
        let dev = again.coords().iter().zip(next.coords()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    Ok(worst)
}
