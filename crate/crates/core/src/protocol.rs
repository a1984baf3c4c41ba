//! Five-stroke loops in the `(Δ, γ)` rectangle.
//!
//! A counterclockwise loop starts at `A = (0, γ_min)` and visits
//! `B = (Δ_max, γ_min)`, `C = (Δ_max, γ_max)`, `D = (Δ_min, γ_max)`,
//! `E = (Δ_min, γ_min)` before returning to `A`. Clockwise runs the same
//! rectangle the other way round, heading for `Δ_min` first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ParamSchedule, Segment};
use crate::error::{Error, Result};
use crate::state::{AngularFreq, PrepMode, StartLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Cw,
    Ccw,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Cw, Direction::Ccw];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Cw => "cw",
            Direction::Ccw => "ccw",
        }
    }

    pub fn reverse(self) -> Self {
        match self {
            Direction::Cw => Direction::Ccw,
            Direction::Ccw => Direction::Cw,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cw" => Ok(Direction::Cw),
            "ccw" => Ok(Direction::Ccw),
            other => Err(Error::InvalidParameter(format!(
                "direction must be cw or ccw, got {other:?}"
            ))),
        }
    }
}

/// How the two isochoric strokes change `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum IsochoricMode {
    /// `n_steps` constant stages of `step_duration` each.
    Stepped { n_steps: usize, step_duration: f64 },
    /// A single linear ramp of `γ`.
    LinearRamp { duration: f64 },
}

impl IsochoricMode {
    pub fn total_duration(&self) -> f64 {
        match *self {
            IsochoricMode::Stepped {
                n_steps,
                step_duration,
            } => n_steps as f64 * step_duration,
            IsochoricMode::LinearRamp { duration } => duration,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            IsochoricMode::Stepped {
                n_steps,
                step_duration,
            } => {
                if n_steps == 0 || !(step_duration.is_finite() && step_duration > 0.0) {
                    return Err(Error::Protocol(format!(
                        "stepped isochoric stroke needs n_steps >= 1 and step_duration > 0, got {n_steps} x {step_duration}"
                    )));
                }
            }
            IsochoricMode::LinearRamp { duration } => {
                if !(duration.is_finite() && duration > 0.0) {
                    return Err(Error::Protocol(format!(
                        "isochoric ramp duration must be > 0, got {duration}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrokeKind {
    /// `γ` fixed, `Δ` ramped.
    IsoDecayRamp,
    /// `Δ` fixed.
    IsochoricStage,
}

pub fn stroke_kind(seg: &Segment) -> StrokeKind {
    if seg.delta_start == seg.delta_end {
        StrokeKind::IsochoricStage
    } else {
        StrokeKind::IsoDecayRamp
    }
}

/// Half of the detuning range used by single-sheet loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sheet {
    NegativeDelta,
    PositiveDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    pub omega: AngularFreq,
    pub delta_min: AngularFreq,
    pub delta_max: AngularFreq,
    pub gamma_min: AngularFreq,
    pub gamma_max: AngularFreq,
    /// Iso-decay stroke durations in µs.
    pub t1: f64,
    pub t3: f64,
    pub t5: f64,
    pub isochoric: IsochoricMode,
    pub direction: Direction,
    pub start: StartLabel,
    pub prep: PrepMode,
}

fn khz(f: f64) -> AngularFreq {
    AngularFreq::from_khz(f).expect("finite preset")
}

fn rad(x: f64) -> AngularFreq {
    AngularFreq::new(x).expect("finite preset")
}

impl LoopConfig {
    /// `Ω/2π = 120 kHz`, `Δ/2π ∈ [−400, 400] kHz`, `γ ∈ [0, 1.45]`,
    /// `T1 = T5 = 6 µs`, `T3 = 12 µs`, five 30 µs isochoric stages.
    pub fn paper_default() -> Self {
        LoopConfig {
            omega: khz(120.0),
            delta_min: khz(-400.0),
            delta_max: khz(400.0),
            gamma_min: AngularFreq::ZERO,
            gamma_max: rad(1.45),
            t1: 6.0,
            t3: 12.0,
            t5: 6.0,
            isochoric: IsochoricMode::Stepped {
                n_steps: 5,
                step_duration: 30.0,
            },
            direction: Direction::Cw,
            start: StartLabel::Plus,
            prep: PrepMode::Ideal,
        }
    }

    /// Timing of the `γ_max` sweep: isochoric strokes of 50 µs.
    pub fn fig_s4() -> Self {
        LoopConfig {
            isochoric: IsochoricMode::Stepped {
                n_steps: 5,
                step_duration: 10.0,
            },
            ..Self::paper_default()
        }
    }

    /// Single-sheet loop on `Δ ≤ 0`: `t_d = 6 µs`, `t_y = 150 µs`.
    pub fn fig_s5() -> Self {
        LoopConfig {
            delta_max: AngularFreq::ZERO,
            t3: 6.0,
            ..Self::paper_default()
        }
    }

    /// Single-sheet loop on `Δ ≥ 0`.
    pub fn fig_s6() -> Self {
        LoopConfig {
            delta_min: AngularFreq::ZERO,
            t3: 6.0,
            ..Self::paper_default()
        }
    }

    /// Stroke-5 timing sweeps: `Δ/2π ∈ [−1, 1] MHz`.
    pub fn fig_s8() -> Self {
        LoopConfig {
            delta_min: khz(-1000.0),
            delta_max: khz(1000.0),
            ..Self::paper_default()
        }
    }

    pub fn with_direction(mut self, d: Direction) -> Self {
        self.direction = d;
        self
    }

    pub fn with_start(mut self, s: StartLabel) -> Self {
        self.start = s;
        self
    }

    pub fn total_duration(&self) -> f64 {
        self.t1 + self.t3 + self.t5 + 2.0 * self.isochoric.total_duration()
    }

    fn validate_common(&self) -> Result<()> {
        for (name, v) in [("t1", self.t1), ("t3", self.t3), ("t5", self.t5)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Protocol(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.omega.value() < 0.0 {
            return Err(Error::Protocol("omega must be >= 0".into()));
        }
        if !(self.gamma_min.value() >= 0.0 && self.gamma_min.value() < self.gamma_max.value()) {
            return Err(Error::Protocol(format!(
                "need 0 <= gamma_min < gamma_max, got {} and {}",
                self.gamma_min, self.gamma_max
            )));
        }
        self.isochoric.validate()?;
        self.prep.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        if !(self.delta_min.value() < 0.0 && self.delta_max.value() > 0.0) {
            return Err(Error::Protocol(format!(
                "full loop needs delta_min < 0 < delta_max, got [{}, {}]",
                self.delta_min, self.delta_max
            )));
        }
        Ok(())
    }

    /// Which single sheet this configuration covers, if any.
    pub fn sheet(&self) -> Option<Sheet> {
        let (lo, hi) = (self.delta_min.value(), self.delta_max.value());
        if lo < 0.0 && hi == 0.0 {
            Some(Sheet::NegativeDelta)
        } else if lo == 0.0 && hi > 0.0 {
            Some(Sheet::PositiveDelta)
        } else {
            None
        }
    }

    /// `γ` stage values of the isochoric stroke going up (`γ_min → γ_max`).
    pub fn ascending_stages(&self) -> Vec<f64> {
        stage_values(self, true)
    }

    pub fn descending_stages(&self) -> Vec<f64> {
        stage_values(self, false)
    }
}

fn stage_values(cfg: &LoopConfig, ascending: bool) -> Vec<f64> {
    let (lo, hi) = (cfg.gamma_min.value(), cfg.gamma_max.value());
    match cfg.isochoric {
        IsochoricMode::Stepped { n_steps, .. } => {
            let step = (hi - lo) / n_steps as f64;
            (0..n_steps)
                .map(|k| {
                    if ascending {
                        lo + k as f64 * step
                    } else {
                        hi - k as f64 * step
                    }
                })
                .collect()
        }
        IsochoricMode::LinearRamp { .. } => {
            if ascending {
                vec![lo, hi]
            } else {
                vec![hi, lo]
            }
        }
    }
}

fn push_ramp(
    out: &mut Vec<Segment>,
    stroke: u8,
    t: f64,
    omega: f64,
    from: f64,
    to: f64,
    gamma: f64,
) {
    // A stroke with no duration or no detuning change is dropped.
    if t > 0.0 && from != to {
        out.push(Segment::ramp(t, omega, from, to, gamma).with_stroke(stroke));
    }
}

fn push_isochoric(
    out: &mut Vec<Segment>,
    stroke: u8,
    cfg: &LoopConfig,
    delta: f64,
    ascending: bool,
) {
    let omega = cfg.omega.value();
    match cfg.isochoric {
        IsochoricMode::Stepped { step_duration, .. } => {
            for g in stage_values(cfg, ascending) {
                out.push(Segment::ramp(step_duration, omega, delta, delta, g).with_stroke(stroke));
            }
        }
        IsochoricMode::LinearRamp { duration } => {
            let (lo, hi) = (cfg.gamma_min.value(), cfg.gamma_max.value());
            let (a, b) = if ascending { (lo, hi) } else { (hi, lo) };
            out.push(Segment::gamma_ramp(duration, omega, delta, a, b).with_stroke(stroke));
        }
    }
}

/// Five strokes over `[Δ_lo, Δ_hi] × [γ_min, γ_max]` from `(0, γ_min)`.
/// The first ramp heads for `Δ_hi` (ccw) or `Δ_lo` (cw); the first
/// isochoric stroke raises `γ` and the second lowers it.
fn five_strokes(cfg: &LoopConfig, lo: f64, hi: f64) -> Result<ParamSchedule> {
    let o = cfg.omega.value();
    let (gmin, gmax) = (cfg.gamma_min.value(), cfg.gamma_max.value());
    let (first, second) = match cfg.direction {
        Direction::Ccw => (hi, lo),
        Direction::Cw => (lo, hi),
    };
    let mut segs = Vec::new();
    push_ramp(&mut segs, 1, cfg.t1, o, 0.0, first, gmin);
    push_isochoric(&mut segs, 2, cfg, first, true);
    push_ramp(&mut segs, 3, cfg.t3, o, first, second, gmax);
    push_isochoric(&mut segs, 4, cfg, second, false);
    push_ramp(&mut segs, 5, cfg.t5, o, second, 0.0, gmin);
    ParamSchedule::new(segs)
}

pub fn build_loop(cfg: &LoopConfig) -> Result<ParamSchedule> {
    cfg.validate()?;
    five_strokes(cfg, cfg.delta_min.value(), cfg.delta_max.value())
}

/// Loop confined to one sign of `Δ`. The configuration's range must end at
/// zero on the side named by `sheet`; ramps of zero width are dropped.
pub fn build_half_loop(cfg: &LoopConfig, sheet: Sheet) -> Result<ParamSchedule> {
    cfg.validate_common()?;
    match cfg.sheet() {
        Some(s) if s == sheet => {}
        Some(s) => {
            return Err(Error::Protocol(format!(
                "detuning range [{}, {}] lies on the {s:?} sheet, not {sheet:?}",
                cfg.delta_min, cfg.delta_max
            )))
        }
        None => {
            return Err(Error::Protocol(format!(
                "half loop needs a detuning range ending at 0 on one side, got [{}, {}]",
                cfg.delta_min, cfg.delta_max
            )))
        }
    }
    five_strokes(cfg, cfg.delta_min.value(), cfg.delta_max.value())
}

/// Full loop or half loop, whichever the detuning range describes.
pub fn build_schedule(cfg: &LoopConfig) -> Result<ParamSchedule> {
    match cfg.sheet() {
        Some(s) => build_half_loop(cfg, s),
        None => build_loop(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn paper_default_ccw_durations_and_corners() {
        let cfg = LoopConfig::paper_default().with_direction(Direction::Ccw);
        let s = build_loop(&cfg).unwrap();
        let mut per_stroke = [0.0; 6];
        for seg in s.segments() {
            per_stroke[seg.stroke as usize] += seg.duration;
        }
        assert_eq!(&per_stroke[1..], &[6.0, 150.0, 12.0, 150.0, 6.0]);
        assert_eq!(s.total_duration(), cfg.total_duration());

        let dmax = cfg.delta_max.value();
        let dmin = cfg.delta_min.value();
        let segs = s.segments();
        assert_eq!((segs[0].delta_start, segs[0].delta_end), (0.0, dmax));
        assert!(segs[1..6]
            .iter()
            .all(|g| g.delta_start == dmax && g.delta_end == dmax));
        assert_eq!((segs[6].delta_start, segs[6].delta_end), (dmax, dmin));
        assert_eq!(segs[6].gamma_start, 1.45);
        assert!(segs[7..12].iter().all(|g| g.delta_start == dmin));
        assert_eq!((segs[12].delta_start, segs[12].delta_end), (dmin, 0.0));
        assert_eq!(segs[12].gamma_start, 0.0);
    }

    #[test]
    fn stage_values_follow_grid() {
        let cfg = LoopConfig::paper_default();
        let up = cfg.ascending_stages();
        let want = [0.0, 0.29, 0.58, 0.87, 1.16];
        for (a, b) in up.iter().zip(want) {
            assert!(close(*a, b, 1e-12));
        }
        let down = cfg.descending_stages();
        assert_eq!(down[0], 1.45);
        assert!(close(down[4], 0.29, 1e-12));

        // The listed experimental ascent with gamma_max = 1.43.
        let c143 = LoopConfig {
            gamma_max: AngularFreq::new(1.43).unwrap(),
            ..cfg
        };
        let listed = [0.0, 0.286, 0.572, 0.858, 1.144];
        for (a, b) in c143.ascending_stages().iter().zip(listed) {
            assert!(close(*a, b, 1e-12));
        }
    }

    #[test]
    fn cw_is_reversed_ccw_path_on_ramps() {
        let base = LoopConfig::paper_default();
        let cw = build_loop(&base.with_direction(Direction::Cw)).unwrap();
        let ccw = build_loop(&base.with_direction(Direction::Ccw)).unwrap();
        let rev = ccw.reversed();
        // Iso-decay ramps coincide with the reversed ccw ramps.
        let ramps = |s: &ParamSchedule| -> Vec<(f64, f64, f64, f64)> {
            s.segments()
                .iter()
                .filter(|g| stroke_kind(g) == StrokeKind::IsoDecayRamp)
                .map(|g| (g.duration, g.delta_start, g.delta_end, g.gamma_start))
                .collect()
        };
        assert_eq!(ramps(&cw), ramps(&rev));
        assert_eq!(cw.total_duration(), ccw.total_duration());
    }

    #[test]
    fn loops_are_closed() {
        for d in Direction::BOTH {
            for cfg in [
                LoopConfig::paper_default(),
                LoopConfig::fig_s4(),
                LoopConfig::fig_s8(),
            ] {
                let s = build_loop(&cfg.with_direction(d)).unwrap();
                let first = s.segments().first().unwrap().start_params();
                let last = s.segments().last().unwrap().end_params();
                assert_eq!(first, last);
            }
        }
    }

    #[test]
    fn cw_then_ccw_is_even_about_junction() {
        let base = LoopConfig::paper_default();
        let cw = build_loop(&base.with_direction(Direction::Cw)).unwrap();
        let ccw = build_loop(&base.with_direction(Direction::Ccw)).unwrap();
        let joined = cw.concat(&ccw);
        let tj = cw.total_duration();
        for k in 1..200 {
            let u = k as f64 * tj / 200.0 + 1e-7;
            let a = joined.params_at(tj + u).unwrap().delta();
            let b = joined.params_at(tj - u).unwrap().delta();
            assert!(close(a, -b, 1e-6) || close(a, b, 1e-6), "{u}: {a} {b}");
        }
    }

    #[test]
    fn half_loops() {
        let s5 = LoopConfig::fig_s5();
        assert_eq!(s5.sheet(), Some(Sheet::NegativeDelta));
        let sch =
            build_half_loop(&s5.with_direction(Direction::Ccw), Sheet::NegativeDelta).unwrap();
        // The zero-width first ramp is dropped; the loop opens with isochoric stages at 0.
        assert_eq!(sch.segments()[0].stroke, 2);
        assert_eq!(sch.segments()[0].delta_start, 0.0);
        assert!(build_half_loop(&s5, Sheet::PositiveDelta).is_err());
        assert!(build_loop(&s5).is_err());
        assert!(build_half_loop(&LoopConfig::paper_default(), Sheet::NegativeDelta).is_err());

        let zero = LoopConfig {
            delta_min: AngularFreq::ZERO,
            delta_max: AngularFreq::ZERO,
            ..LoopConfig::paper_default()
        };
        assert!(build_half_loop(&zero, Sheet::NegativeDelta).is_err());
        assert!(build_schedule(&zero).is_err());

        let s6 = build_schedule(&LoopConfig::fig_s6().with_direction(Direction::Cw)).unwrap();
        let first = s6.segments().first().unwrap().start_params();
        let last = s6.segments().last().unwrap().end_params();
        assert_eq!(first, last);
        assert!(s6
            .segments()
            .iter()
            .all(|g| g.delta_start >= 0.0 && g.delta_end >= 0.0));
    }

    #[test]
    fn linear_ramp_mode() {
        let cfg = LoopConfig {
            isochoric: IsochoricMode::LinearRamp { duration: 100.0 },
            ..LoopConfig::paper_default()
        };
        let s = build_loop(&cfg).unwrap();
        assert_eq!(s.segments().len(), 5);
        assert_eq!(s.segments()[1].gamma_start, 0.0);
        assert_eq!(s.segments()[1].gamma_end, 1.45);
        assert_eq!(s.segments()[3].gamma_start, 1.45);
        assert_eq!(s.total_duration(), 224.0);
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = LoopConfig::paper_default();
        let bad_gamma = LoopConfig {
            gamma_min: AngularFreq::new(2.0).unwrap(),
            ..base
        };
        assert!(build_loop(&bad_gamma).is_err());
        let bad_steps = LoopConfig {
            isochoric: IsochoricMode::Stepped {
                n_steps: 0,
                step_duration: 30.0,
            },
            ..base
        };
        assert!(build_loop(&bad_steps).is_err());
        let bad_prep = LoopConfig {
            prep: PrepMode::Experimental { fidelity: 0.4 },
            ..base
        };
        assert!(build_loop(&bad_prep).is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let cfg = LoopConfig::paper_default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: LoopConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["bogus"] = serde_json::json!(1);
        let err = serde_json::from_value::<LoopConfig>(v)
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus"), "{err}");
    }
}
