//! Coefficient sequences `α_n ∈ [0, 1/2]` for the multi-map schemes.
//!
//! The schemes want `liminf α_n = 0`, `limsup α_n > 0` and
//! `α_{n+1} − α_n → 0`. The tent schedule realizes all three: block `j` has
//! length `L_j = ⌈L_0 · g^j⌉` rounded up to the next power of two, and inside a
//! block `α` climbs linearly from 0 to the peak and back with step
//! `peak / (L_j / 2)`. Power-of-two lengths keep every value and every step
//! exact in binary floating point, so each block touches the peak and no
//! difference exceeds its step through rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest horizon [`verify_schedule`] accepts.
pub const MIN_HORIZON: usize = 10;

/// The tail minimum counts as vanishing when at most this fraction of the
/// overall maximum.
pub const LIMINF_FRACTION: f64 = 0.01;
/// The tail maximum counts as bounded away from zero when at least this
/// fraction of the head maximum.
pub const LIMSUP_FRACTION: f64 = 0.5;
/// Tail differences count as vanishing when at most this fraction of the
/// head differences.
pub const DIFF_FRACTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSchedule {
    Tent { peak: f64, first_block_length: usize, block_growth_factor: f64 },
    Constant { c: f64 },
    /// `α_n = min(1/2, c / (n + 1)^rate)`.
    Decay { c: f64, rate: f64 },
}

impl Default for AlphaSchedule {
    /// The tent with peak 1/4, first block 4 and growth 1.2. Each power-of-two
    /// length repeats a few times, so late quarter-horizon windows hold
    /// complete blocks.
    fn default() -> Self {
        AlphaSchedule::Tent { peak: 0.25, first_block_length: 4, block_growth_factor: 1.2 }
    }
}

impl AlphaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AlphaSchedule::Tent { peak, first_block_length, block_growth_factor } => {
                if !(0.0..=0.5).contains(&peak) {
                    return Err(Error::InvalidInput(format!("tent peak {peak} outside [0, 1/2]")));
                }
                if first_block_length < 2 {
                    return Err(Error::InvalidInput("tent first_block_length must be >= 2".into()));
                }
                if !(block_growth_factor.is_finite() && block_growth_factor >= 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "tent block_growth_factor {block_growth_factor} must be >= 1"
                    )));
                }
            }
            AlphaSchedule::Constant { c } => {
                if !(0.0..=0.5).contains(&c) {
                    return Err(Error::InvalidInput(format!("constant {c} outside [0, 1/2]")));
                }
            }
            AlphaSchedule::Decay { c, rate } => {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::InvalidInput(format!("decay scale {c} must be >= 0")));
                }
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(Error::InvalidInput(format!("decay rate {rate} must be > 0")));
                }
            }
        }
        Ok(())
    }

    /// `(start, length)` of the tent block containing index `n`.
    pub fn tent_block(&self, n: usize) -> Option<(usize, usize)> {
        let AlphaSchedule::Tent { first_block_length, block_growth_factor, .. } = *self else {
            return None;
        };
        if block_growth_factor == 1.0 {
            let len = tent_block_length(first_block_length, 1.0, 0);
            return Some((n / len * len, len));
        }
        let mut start = 0usize;
        let mut j = 0i32;
        loop {
            let len = tent_block_length(first_block_length, block_growth_factor, j);
            if n < start + len {
                return Some((start, len));
            }
            start += len;
            j += 1;
        }
    }

    /// First `count` coefficients, walking tent blocks sequentially.
    pub fn take(&self, count: usize) -> Vec<f64> {
        match *self {
            AlphaSchedule::Tent { peak, first_block_length, block_growth_factor } => {
                let mut out = Vec::with_capacity(count);
                let mut j = 0i32;
                while out.len() < count {
                    let len = tent_block_length(first_block_length, block_growth_factor, j);
                    for t in 0..len {
                        if out.len() == count {
                            break;
                        }
                        out.push(tent_value(peak, len, t));
                    }
                    j += 1;
                }
                out
            }
            _ => (0..count).map(|n| alpha(self, n)).collect(),
        }
    }
}

fn tent_block_length(first: usize, growth: f64, j: i32) -> usize {
    (((first as f64) * growth.powi(j)).ceil() as usize).next_power_of_two()
}

fn tent_value(peak: f64, len: usize, t: usize) -> f64 {
    peak * (t.min(len - t) as f64) / ((len / 2) as f64)
}

/// `α_n`, a pure function of the schedule and the index.
pub fn alpha(s: &AlphaSchedule, n: usize) -> f64 {
    match *s {
        AlphaSchedule::Tent { peak, .. } => {
            let (start, len) = s.tent_block(n).expect("tent schedule");
            tent_value(peak, len, n - start)
        }
        AlphaSchedule::Constant { c } => c,
        AlphaSchedule::Decay { c, rate } => (c / ((n + 1) as f64).powf(rate)).min(0.5),
    }
}

/// `Σ_{k ≥ from} α^k = α^from / (1 − α)` for `0 ≤ α < 1`.
pub fn geometric_tail(alpha: f64, from: i32) -> f64 {
    alpha.powi(from) / (1.0 - alpha)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFlags {
    pub liminf_vanishes: bool,
    pub limsup_positive: bool,
    pub differences_vanish: bool,
}

/// Finite-horizon proxies for the three limit conditions. Proxies, not proofs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub schedule: AlphaSchedule,
    pub horizon: usize,
    /// First index of the tail window (the last quarter of the horizon).
    pub tail_start: usize,
    pub liminf_proxy: f64,
    pub limsup_proxy: f64,
    pub diff_proxy: f64,
    pub head_max: f64,
    pub head_diff_max: f64,
    pub overall_max: f64,
    pub range_ok: bool,
    pub flags: ScheduleFlags,
    pub compliant: bool,
    /// Tent only: length of the block containing `tail_start`, the longest-step
    /// block that meets the tail window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_block_length: Option<usize>,
    /// Tent only: length of the last block completed within the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_block_length: Option<usize>,
    /// Tent only: `peak / (tail_block_length / 2)`, the largest step the tail
    /// window can see.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_step_bound: Option<f64>,
}

fn max_abs_diff(v: &[f64]) -> f64 {
    v.windows(2).fold(0.0, |m, w| m.max((w[1] - w[0]).abs()))
}

/// Evaluates the schedule up to `horizon` and reports tail-window proxies.
pub fn verify_schedule(s: &AlphaSchedule, horizon: usize) -> Result<ScheduleReport> {
    s.validate()?;
    if horizon < MIN_HORIZON {
        return Err(Error::InvalidInput(format!("horizon {horizon} below the minimum {MIN_HORIZON}")));
    }
    let values = s.take(horizon);
    let quarter = horizon / 4;
    let tail_start = horizon - quarter;
    let tail = &values[tail_start..];
    let head = &values[..quarter];

    let liminf_proxy = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let limsup_proxy = tail.iter().copied().fold(0.0, f64::max);
    let diff_proxy = max_abs_diff(tail);
    let head_max = head.iter().copied().fold(0.0, f64::max);
    let head_diff_max = max_abs_diff(head);
    let overall_max = values.iter().copied().fold(0.0, f64::max);
    let range_ok = values.iter().all(|a| (0.0..=0.5).contains(a));

    let flags = ScheduleFlags {
        liminf_vanishes: liminf_proxy <= LIMINF_FRACTION * overall_max,
        limsup_positive: limsup_proxy > 0.0 && limsup_proxy >= LIMSUP_FRACTION * head_max,
        differences_vanish: diff_proxy == 0.0 || diff_proxy <= DIFF_FRACTION * head_diff_max,
    };
    let compliant = range_ok && flags.liminf_vanishes && flags.limsup_positive && flags.differences_vanish;

    let (tail_block_length, last_block_length, tail_step_bound) = match *s {
        AlphaSchedule::Tent { peak, .. } => {
            let (_, lt) = s.tent_block(tail_start).expect("tent");
            let (start, len) = s.tent_block(horizon - 1).expect("tent");
            let last_complete = if start + len == horizon {
                Some(len)
            } else if start > 0 {
                s.tent_block(start - 1).map(|(_, l)| l)
            } else {
                None
            };
            (Some(lt), last_complete, Some(peak / (lt / 2) as f64))
        }
        _ => (None, None, None),
    };

    Ok(ScheduleReport {
        schedule: s.clone(),
        horizon,
        tail_start,
        liminf_proxy,
        limsup_proxy,
        diff_proxy,
        head_max,
        head_diff_max,
        overall_max,
        range_ok,
        flags,
        compliant,
        tail_block_length,
        last_block_length,
        tail_step_bound,
    })
}
