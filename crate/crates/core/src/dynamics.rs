//! Time evolution of the vectorized density matrix.
//!
//! [`evolve`] is a fixed-step RK4 integrator for piecewise-affine parameter
//! schedules. [`propagate_const`] applies `exp(ℒt)` directly and is kept as
//! an independent check on constant segments.

use nalgebra::Vector4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen;
use crate::error::{Error, Result};
use crate::liouvillian::{build_liouvillian, liouvillian_entries};
use crate::state::{hermiticity_error, QubitDensity, SystemParams};

pub const DEFAULT_DT: f64 = 1e-3;

/// Determinant below which a trajectory is aborted.
pub const POSITIVITY_ABORT: f64 = 1e-6;

/// One piece of a schedule: `Ω` constant, `Δ` and `γ` affine in local time.
/// Loop strokes only ever vary one of the two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub omega: f64,
    pub delta_start: f64,
    pub delta_end: f64,
    pub gamma_start: f64,
    pub gamma_end: f64,
    /// Stroke number within a loop (1..=5), 0 when not part of one.
    pub stroke: u8,
}

impl Segment {
    pub fn constant(duration: f64, p: SystemParams) -> Self {
        Segment {
            duration,
            omega: p.omega(),
            delta_start: p.delta(),
            delta_end: p.delta(),
            gamma_start: p.gamma(),
            gamma_end: p.gamma(),
            stroke: 0,
        }
    }

    pub fn ramp(duration: f64, omega: f64, delta_start: f64, delta_end: f64, gamma: f64) -> Self {
        Segment {
            duration,
            omega,
            delta_start,
            delta_end,
            gamma_start: gamma,
            gamma_end: gamma,
            stroke: 0,
        }
    }

    /// `γ` ramped linearly at fixed `Δ`.
    pub fn gamma_ramp(
        duration: f64,
        omega: f64,
        delta: f64,
        gamma_start: f64,
        gamma_end: f64,
    ) -> Self {
        Segment {
            duration,
            omega,
            delta_start: delta,
            delta_end: delta,
            gamma_start,
            gamma_end,
            stroke: 0,
        }
    }

    pub fn with_stroke(mut self, stroke: u8) -> Self {
        self.stroke = stroke;
        self
    }

    pub fn is_constant(&self) -> bool {
        self.delta_start == self.delta_end && self.gamma_start == self.gamma_end
    }

    /// `Δ` at local time `s ∈ [0, duration]`.
    pub fn delta_at(&self, s: f64) -> f64 {
        if self.is_constant() {
            self.delta_start
        } else {
            self.delta_start + (self.delta_end - self.delta_start) * (s / self.duration)
        }
    }

    pub fn gamma_at(&self, s: f64) -> f64 {
        if self.gamma_start == self.gamma_end {
            self.gamma_start
        } else {
            self.gamma_start + (self.gamma_end - self.gamma_start) * (s / self.duration)
        }
    }

    pub fn params_at(&self, s: f64) -> SystemParams {
        SystemParams::new(self.omega, self.delta_at(s), self.gamma_at(s))
            .expect("validated segment")
    }

    pub fn start_params(&self) -> SystemParams {
        self.params_at(0.0)
    }

    pub fn end_params(&self) -> SystemParams {
        SystemParams::new(self.omega, self.delta_end, self.gamma_end).expect("validated segment")
    }

    /// The same segment traversed backwards in time.
    pub fn reversed(&self) -> Self {
        Segment {
            delta_start: self.delta_end,
            delta_end: self.delta_start,
            gamma_start: self.gamma_end,
            gamma_end: self.gamma_start,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Protocol(format!(
                "segment duration must be > 0, got {}",
                self.duration
            )));
        }
        SystemParams::new(self.omega, self.delta_start, self.gamma_start)?;
        SystemParams::new(self.omega, self.delta_end, self.gamma_end)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSchedule {
    segments: Vec<Segment>,
}

impl ParamSchedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            s.validate()?;
        }
        Ok(ParamSchedule { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Start times of each segment followed by the total duration.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Parameters at global time `t`. At a boundary the later segment wins.
    pub fn params_at(&self, t: f64) -> Option<SystemParams> {
        let mut start = 0.0;
        for (k, s) in self.segments.iter().enumerate() {
            let end = start + s.duration;
            if t < end || k + 1 == self.segments.len() {
                return Some(s.params_at((t - start).clamp(0.0, s.duration)));
            }
            start = end;
        }
        None
    }

    /// Time-reversed parameter path: `Δ(t) ↦ Δ(T−t)`, `γ(t) ↦ γ(T−t)`.
    pub fn reversed(&self) -> Self {
        ParamSchedule {
            segments: self.segments.iter().rev().map(Segment::reversed).collect(),
        }
    }

    pub fn concat(&self, other: &ParamSchedule) -> Self {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        ParamSchedule { segments }
    }

    /// Segments whose stroke tag lies in `strokes`, in order.
    pub fn select_strokes(&self, strokes: &[u8]) -> Self {
        ParamSchedule {
            segments: self
                .segments
                .iter()
                .filter(|s| strokes.contains(&s.stroke))
                .copied()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub dt_max: f64,
    /// Record every `stride`-th step. Segment ends are always recorded.
    pub stride: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt_max: DEFAULT_DT,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<QubitDensity>,
    pub params: Vec<SystemParams>,
    /// Index of the segment that produced each sample (the first segment for
    /// the initial sample).
    pub segment: Vec<usize>,
    /// Stroke tag of that segment.
    pub stroke: Vec<u8>,
    /// Record index at the end of each segment.
    pub segment_ends: Vec<usize>,
    pub max_hermiticity_error: f64,
    pub min_det: f64,
    pub jumps: bool,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &QubitDensity {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }

    pub fn max_trace_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.trace() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// State at the end of segment `k`.
    pub fn state_after_segment(&self, k: usize) -> Option<&QubitDensity> {
        self.segment_ends.get(k).map(|&i| &self.states[i])
    }

    fn push(&mut self, t: f64, v: &Vector4<Complex64>, p: SystemParams, seg: usize, stroke: u8) {
        let state = QubitDensity::from_vector(v);
        self.max_hermiticity_error = self.max_hermiticity_error.max(hermiticity_error(v));
        self.min_det = self.min_det.min(state.det());
        self.times.push(t);
        self.states.push(state);
        self.params.push(p);
        self.segment.push(seg);
        self.stroke.push(stroke);
    }
}

pub fn evolve(
    rho0: QubitDensity,
    sched: &ParamSchedule,
    jumps: bool,
    dt_max: f64,
) -> Result<TrajectoryRecord> {
    evolve_with(
        rho0,
        sched,
        jumps,
        &EvolveOptions {
            dt_max,
            ..EvolveOptions::default()
        },
    )
}

/// Classical RK4 on `dv/dt = ℒ(t)v`, with `ℒ` rebuilt at every substage on
/// ramps. Each segment is split into `⌈duration/dt_max⌉` equal steps so the
/// boundaries are hit exactly. The trace is never renormalized.
pub fn evolve_with(
    rho0: QubitDensity,
    sched: &ParamSchedule,
    jumps: bool,
    opts: &EvolveOptions,
) -> Result<TrajectoryRecord> {
    if !(opts.dt_max.is_finite() && opts.dt_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt_max must be > 0, got {}",
            opts.dt_max
        )));
    }
    let stride = opts.stride.max(1);
    let mut rec = TrajectoryRecord {
        min_det: f64::INFINITY,
        jumps,
        ..TrajectoryRecord::default()
    };
    let mut v = rho0.to_vector();
    let first = sched.segments().first();
    let p0 = match first {
        Some(s) => s.start_params(),
        None => SystemParams::new(0.0, 0.0, 0.0)?,
    };
    rec.push(0.0, &v, p0, 0, first.map_or(0, |s| s.stroke));

    let mut t0 = 0.0;
    for (k, seg) in sched.segments().iter().enumerate() {
        let n = ((seg.duration / opts.dt_max) * (1.0 - 1e-12))
            .ceil()
            .max(1.0) as usize;
        let h = seg.duration / n as f64;
        let hc = Complex64::new(h, 0.0);
        let half = Complex64::new(h / 2.0, 0.0);
        let sixth = Complex64::new(h / 6.0, 0.0);
        let two = Complex64::new(2.0, 0.0);
        let fixed = seg
            .is_constant()
            .then(|| liouvillian_entries(seg.omega, seg.delta_start, seg.gamma_start, jumps));
        for i in 0..n {
            let s = i as f64 * h;
            let (l0, lm, l1) = match &fixed {
                Some(l) => (*l, *l, *l),
                None => {
                    let at = |u: f64| {
                        liouvillian_entries(seg.omega, seg.delta_at(u), seg.gamma_at(u), jumps)
                    };
                    (at(s), at(s + h / 2.0), at(s + h))
                }
            };
            let k1 = l0 * v;
            let k2 = lm * (v + k1 * half);
            let k3 = lm * (v + k2 * half);
            let k4 = l1 * (v + k3 * hc);
            v += (k1 + (k2 + k3) * two + k4) * sixth;

            let last = i + 1 == n;
            let t = if last {
                t0 + seg.duration
            } else {
                t0 + (i + 1) as f64 * h
            };
            let det = (v[0] * v[3] - v[1] * v[2]).re;
            if det < -POSITIVITY_ABORT {
                return Err(Error::Positivity { time: t, det });
            }
            if last || (i + 1) % stride == 0 {
                let p = if last {
                    seg.end_params()
                } else {
                    seg.params_at(s + h)
                };
                rec.push(t, &v, p, k, seg.stroke);
            }
        }
        t0 += seg.duration;
        rec.segment_ends.push(rec.times.len() - 1);
    }
    Ok(rec)
}

/// `exp(ℒt)·vec(ρ0)` at fixed parameters.
pub fn propagate_const(
    rho0: QubitDensity,
    p: SystemParams,
    t: f64,
    jumps: bool,
) -> Result<QubitDensity> {
    Ok(QubitDensity::from_vector(&propagate_vector(
        &rho0.to_vector(),
        p,
        t,
        jumps,
    )?))
}

pub fn propagate_vector(
    v: &Vector4<Complex64>,
    p: SystemParams,
    t: f64,
    jumps: bool,
) -> Result<Vector4<Complex64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time must be >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(*v);
    }
    let l = build_liouvillian(p, jumps).entries * Complex64::new(t, 0.0);
    Ok(l.exp() * v)
}

/// Propagates through a schedule of constant segments with the matrix
/// exponential. Ramps are rejected.
pub fn propagate_piecewise(
    rho0: QubitDensity,
    sched: &ParamSchedule,
    jumps: bool,
) -> Result<QubitDensity> {
    let mut v = rho0.to_vector();
    for seg in sched.segments() {
        if !seg.is_constant() {
            return Err(Error::Protocol(
                "matrix-exponential propagation needs constant segments".into(),
            ));
        }
        v = propagate_vector(&v, seg.start_params(), seg.duration, jumps)?;
    }
    Ok(QubitDensity::from_vector(&v))
}

/// Unit-trace null vector of the with-jumps generator.
pub fn steady_state(p: SystemParams) -> Result<QubitDensity> {
    if !(p.gamma() > 0.0) {
        return Err(Error::InvalidParameter(
            "steady state needs gamma > 0".into(),
        ));
    }
    let l = build_liouvillian(p, true).entries;
    let svd = l.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Eigen("SVD did not return V".into()))?;
    let scale = eigen::frobenius(&l).max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let null: Vec<usize> = (0..4).filter(|&k| svd.singular_values[k] <= tol).collect();
    if null.len() != 1 {
        return Err(Error::NullSpace(null.len()));
    }
    let row = v_t.row(null[0]);
    let v = Vector4::new(row[0].conj(), row[1].conj(), row[2].conj(), row[3].conj());
    let tr = v[0] + v[3];
    Ok(QubitDensity::from_vector(&(v / tr)))
}

/// Closed-form excited population of the steady state,
/// `(Ω²/4) / (Δ² + γ²/4 + Ω²/2)`.
pub fn steady_state_population(p: SystemParams) -> f64 {
    let (o, d, g) = (p.omega(), p.delta(), p.gamma());
    0.25 * o * o / (d * d + 0.25 * g * g + 0.5 * o * o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_psi_minus, make_psi_plus};
    use proptest::prelude::*;

    fn params(o: f64, d: f64, g: f64) -> SystemParams {
        SystemParams::new(o, d, g).unwrap()
    }

    #[test]
    fn rabi_oscillation() {
        let o = 2.0;
        let sched = ParamSchedule::new(vec![Segment::constant(5.0, params(o, 0.0, 0.0))]).unwrap();
        let rec = evolve(QubitDensity::ground(), &sched, true, DEFAULT_DT).unwrap();
        for (t, s) in rec.times.iter().zip(&rec.states).step_by(97) {
            assert!((s.rho_ee - (o * t / 2.0).sin().powi(2)).abs() < 1e-6);
        }
        assert_eq!(*rec.times.last().unwrap(), 5.0);
    }

    #[test]
    fn pure_decay() {
        let g = 0.7;
        let rho0 = QubitDensity::projector(&make_psi_plus());
        let sched = ParamSchedule::new(vec![Segment::constant(4.0, params(0.0, 0.0, g))]).unwrap();
        let rec = evolve(rho0, &sched, true, DEFAULT_DT).unwrap();
        for (t, s) in rec.times.iter().zip(&rec.states) {
            assert!((s.rho_ee - 0.5 * (-g * t).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_schedule_returns_initial_state() {
        let rho0 = QubitDensity::projector(&make_psi_minus());
        let rec = evolve(rho0, &ParamSchedule::default(), true, DEFAULT_DT).unwrap();
        assert_eq!(rec.len(), 1);
        assert_eq!(rec.times, vec![0.0]);
        assert_eq!(*rec.final_state(), rho0);
    }

    #[test]
    fn rejects_bad_step() {
        let sched =
            ParamSchedule::new(vec![Segment::constant(1.0, params(1.0, 0.0, 0.0))]).unwrap();
        assert!(evolve(QubitDensity::ground(), &sched, true, 0.0).is_err());
        assert!(ParamSchedule::new(vec![Segment::constant(0.0, params(1.0, 0.0, 0.0))]).is_err());
    }

    #[test]
    fn segment_ends_are_recorded_with_stride() {
        let sched = ParamSchedule::new(vec![
            Segment::constant(0.0105, params(1.0, 0.0, 0.1)),
            Segment::ramp(0.02, 1.0, 0.0, 2.0, 0.1),
        ])
        .unwrap();
        let rec = evolve_with(
            QubitDensity::ground(),
            &sched,
            true,
            &EvolveOptions {
                dt_max: 1e-3,
                stride: 7,
            },
        )
        .unwrap();
        assert_eq!(rec.segment_ends.len(), 2);
        assert_eq!(rec.times[rec.segment_ends[0]], 0.0105);
        assert_eq!(*rec.times.last().unwrap(), sched.total_duration());
        assert!(rec.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(rec.params.last().unwrap().delta(), 2.0);
    }

    #[test]
    fn propagate_zero_time_is_identity() {
        let rho0 = QubitDensity::projector(&make_psi_plus());
        let out = propagate_const(rho0, params(1.0, 0.3, 0.2), 0.0, true).unwrap();
        assert_eq!(out, rho0);
    }

    #[test]
    fn long_time_reaches_null_space() {
        for &(o, g) in &[(0.754, 0.3), (1.0, 2.0), (0.2, 5.0)] {
            let p = params(o, 0.0, g);
            let late = propagate_const(QubitDensity::ground(), p, 400.0 / g, true).unwrap();
            let ss = steady_state(p).unwrap();
            assert!(late.max_abs_diff(&ss) < 1e-9);
            let expected = o * o / (g * g + 2.0 * o * o);
            assert!((ss.rho_ee - expected).abs() < 1e-12);
            assert!((steady_state_population(p) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn steady_state_limits() {
        let far = steady_state(params(0.754, 2.513, 1.45)).unwrap();
        assert!(far.rho_ee < 0.05);
        let dark = steady_state(params(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(dark.rho_ee, 0.0);
        assert!(dark.max_abs_diff(&QubitDensity::ground()) < 1e-15);
        assert!(steady_state(params(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn no_jump_norm_decreases() {
        let rho0 = QubitDensity::projector(&make_psi_plus());
        let sched = ParamSchedule::new(vec![Segment::ramp(10.0, 0.754, -2.5, 2.5, 0.8)]).unwrap();
        let rec = evolve(rho0, &sched, false, DEFAULT_DT).unwrap();
        assert!(rec
            .states
            .windows(2)
            .all(|w| w[1].trace() <= w[0].trace() + 1e-15));
        assert!(rec.final_state().trace() < 0.99);
    }

    #[test]
    fn reversed_schedule_mirrors_path() {
        let sched = ParamSchedule::new(vec![
            Segment::ramp(2.0, 1.0, 0.0, 3.0, 0.0),
            Segment::constant(1.0, params(1.0, 3.0, 0.5)),
        ])
        .unwrap();
        let rev = sched.reversed();
        let total = sched.total_duration();
        for k in 0..=30 {
            let t = k as f64 * total / 30.0;
            let a = sched.params_at(t).unwrap();
            let b = rev.params_at(total - t).unwrap();
            if (t - 2.0).abs() > 1e-12 {
                assert!((a.delta() - b.delta()).abs() < 1e-12);
                assert_eq!(a.gamma(), b.gamma());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn integrator_matches_exponential(
            o in 0.0f64..3.0, d in -3.0f64..3.0, g in 0.0f64..2.0,
            t in 0.01f64..3.0, jumps in any::<bool>()
        ) {
            let p = params(o, d, g);
            let rho0 = QubitDensity::projector(&make_psi_minus());
            let sched = ParamSchedule::new(vec![Segment::constant(t, p)]).unwrap();
            let rk = evolve(rho0, &sched, jumps, DEFAULT_DT).unwrap();
            let ex = propagate_const(rho0, p, t, jumps).unwrap();
            prop_assert!(rk.final_state().max_abs_diff(&ex) < 1e-7);
        }
    }
}
