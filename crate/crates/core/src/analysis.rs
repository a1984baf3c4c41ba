//! Loop outcomes, chirality verdicts, parameter sweeps and projections onto
//! the eigenbranches of the effective Hamiltonian.

use std::fmt;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_with, EvolveOptions, ParamSchedule, Segment, TrajectoryRecord};
use crate::eigen::eig2;
use crate::error::{Error, Result};
use crate::protocol::{build_schedule, Direction, LoopConfig};
use crate::state::{fidelity, prepare_state, AngularFreq, QubitDensity, StartLabel};

pub const DEFAULT_VERDICT_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Returned,
    Converted,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Returned => "Returned",
            Verdict::Converted => "Converted",
            Verdict::Indeterminate => "Indeterminate",
        })
    }
}

impl std::str::FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Returned" => Ok(Verdict::Returned),
            "Converted" => Ok(Verdict::Converted),
            "Indeterminate" => Ok(Verdict::Indeterminate),
            _ => Err(Error::InvalidParameter(format!("unknown verdict '{s}'"))),
        }
    }
}

pub fn verdict(f_start: f64, f_other: f64, threshold: f64) -> Verdict {
    if f_start >= threshold {
        Verdict::Returned
    } else if f_other >= threshold {
        Verdict::Converted
    } else {
        Verdict::Indeterminate
    }
}

/// State a loop of the given direction ends in when it behaves chirally:
/// `ψ₊` for clockwise, `ψ₋` for counterclockwise.
pub fn chiral_target(direction: Direction) -> StartLabel {
    match direction {
        Direction::Cw => StartLabel::Plus,
        Direction::Ccw => StartLabel::Minus,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopOutcome {
    pub start: StartLabel,
    pub direction: Direction,
    pub f_plus_final: f64,
    pub f_minus_final: f64,
    pub verdict: Verdict,
}

impl LoopOutcome {
    pub fn from_state(
        rho: &QubitDensity,
        start: StartLabel,
        direction: Direction,
        normalize: bool,
        threshold: f64,
    ) -> Self {
        let rho = if normalize { rho.normalized() } else { *rho };
        let f_plus = fidelity(&rho, &StartLabel::Plus.state());
        let f_minus = fidelity(&rho, &StartLabel::Minus.state());
        let (fs, fo) = match start {
            StartLabel::Plus => (f_plus, f_minus),
            StartLabel::Minus => (f_minus, f_plus),
        };
        LoopOutcome {
            start,
            direction,
            f_plus_final: f_plus,
            f_minus_final: f_minus,
            verdict: verdict(fs, fo, threshold),
        }
    }

    pub fn fidelity_to(&self, s: StartLabel) -> f64 {
        match s {
            StartLabel::Plus => self.f_plus_final,
            StartLabel::Minus => self.f_minus_final,
        }
    }

    pub fn start_fidelity(&self) -> f64 {
        self.fidelity_to(self.start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub evolve: EvolveOptions,
    pub threshold: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            evolve: EvolveOptions::default(),
            threshold: DEFAULT_VERDICT_THRESHOLD,
        }
    }
}

impl RunOptions {
    /// Records only segment ends; enough for final-state sweeps.
    pub fn sparse() -> Self {
        RunOptions {
            evolve: EvolveOptions {
                stride: usize::MAX,
                ..EvolveOptions::default()
            },
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoopRun {
    pub schedule: ParamSchedule,
    pub trajectory: TrajectoryRecord,
    pub outcome: LoopOutcome,
}

/// Prepares the start state, runs the loop (full or single-sheet, as the
/// detuning range dictates) and scores the final state. Without jumps the
/// final state is renormalized before the fidelities are taken.
pub fn run_loop(cfg: &LoopConfig, jumps: bool, opts: &RunOptions) -> Result<LoopRun> {
    let schedule = build_schedule(cfg)?;
    let rho0 = prepare_state(&cfg.start.state(), cfg.prep)?;
    let trajectory = evolve_with(rho0, &schedule, jumps, &opts.evolve)?;
    let outcome = LoopOutcome::from_state(
        trajectory.final_state(),
        cfg.start,
        cfg.direction,
        !jumps,
        opts.threshold,
    );
    Ok(LoopRun {
        schedule,
        trajectory,
        outcome,
    })
}

pub fn run_loop_outcome(cfg: &LoopConfig, jumps: bool) -> Result<LoopOutcome> {
    Ok(run_loop(cfg, jumps, &RunOptions::sparse())?.outcome)
}

/// State at the end of each stroke tag `1..=4`, i.e. at the corners after
/// `A`. Strokes that were dropped from the schedule give `None`.
pub fn stroke_end_states(traj: &TrajectoryRecord) -> [Option<QubitDensity>; 4] {
    let mut out = [None; 4];
    for (i, &tag) in traj.stroke.iter().enumerate().skip(1) {
        if (1..=4).contains(&tag) {
            out[tag as usize - 1] = Some(traj.states[i]);
        }
    }
    out
}

/// All four `(start, direction)` combinations for one configuration, in the
/// order `(plus, cw), (plus, ccw), (minus, cw), (minus, ccw)`.
pub fn quadruple(base: &LoopConfig) -> Vec<LoopConfig> {
    [StartLabel::Plus, StartLabel::Minus]
        .iter()
        .flat_map(|&s| {
            Direction::BOTH
                .iter()
                .map(move |&d| base.with_start(s).with_direction(d))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub value: f64,
    pub outcomes: Vec<LoopOutcome>,
}

impl SweepSample {
    pub fn outcome(&self, start: StartLabel, direction: Direction) -> Option<&LoopOutcome> {
        self.outcomes
            .iter()
            .find(|o| o.start == start && o.direction == direction)
    }

    pub fn all_returned(&self) -> bool {
        self.outcomes.iter().all(|o| o.verdict == Verdict::Returned)
    }

    /// Every loop ends in its direction's chiral target.
    pub fn fully_chiral(&self) -> bool {
        self.outcomes.iter().all(|o| {
            let expected = if o.start == chiral_target(o.direction) {
                Verdict::Returned
            } else {
                Verdict::Converted
            };
            o.verdict == expected
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub samples: Vec<SweepSample>,
}

fn sorted_unique(values: &[f64], what: &str) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("{what}: empty value list")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{what}: non-finite value {v}"
        )));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Runs the four `(start, direction)` loops for every `γ_max`.
pub fn sweep_gamma_max(
    base: &LoopConfig,
    gamma_values: &[f64],
    jumps: bool,
) -> Result<SweepResult> {
    sweep_gamma_max_with(base, gamma_values, jumps, &RunOptions::sparse())
}

pub fn sweep_gamma_max_with(
    base: &LoopConfig,
    gamma_values: &[f64],
    jumps: bool,
    opts: &RunOptions,
) -> Result<SweepResult> {
    let values = sorted_unique(gamma_values, "gamma_max sweep")?;
    let jobs: Vec<(usize, LoopConfig)> = values
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let cfg = LoopConfig {
                gamma_max: AngularFreq::new(g)?,
                ..*base
            };
            Ok(quadruple(&cfg).into_iter().map(move |c| (i, c)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let results: Vec<(usize, LoopOutcome)> = jobs
        .par_iter()
        .map(|(i, cfg)| Ok((*i, run_loop(cfg, jumps, opts)?.outcome)))
        .collect::<Result<_>>()?;
    Ok(collect_samples("gamma_max", &values, results))
}

fn collect_samples(axis: &str, values: &[f64], results: Vec<(usize, LoopOutcome)>) -> SweepResult {
    let mut samples: Vec<SweepSample> = values
        .iter()
        .map(|&value| SweepSample {
            value,
            outcomes: Vec::with_capacity(4),
        })
        .collect();
    for (i, o) in results {
        samples[i].outcomes.push(o);
    }
    for s in &mut samples {
        s.outcomes.sort_by_key(|o| (o.start, o.direction));
    }
    SweepResult {
        axis: axis.to_string(),
        samples,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T5Sweep {
    pub gamma_min: f64,
    pub result: SweepResult,
}

/// Stroke-5 duration sweeps. For each `γ_min` the first four strokes are
/// evolved once per `(start, direction)`; stroke 5 is then rerun from that
/// state for every `T5`.
pub fn sweep_t5(
    base: &LoopConfig,
    t5_values: &[f64],
    gamma_min_values: &[f64],
    jumps: bool,
) -> Result<Vec<T5Sweep>> {
    sweep_t5_with(
        base,
        t5_values,
        gamma_min_values,
        jumps,
        &RunOptions::sparse(),
    )
}

pub fn sweep_t5_with(
    base: &LoopConfig,
    t5_values: &[f64],
    gamma_min_values: &[f64],
    jumps: bool,
    opts: &RunOptions,
) -> Result<Vec<T5Sweep>> {
    let t5s = sorted_unique(t5_values, "t5 sweep")?;
    if let Some(t) = t5s.iter().find(|t| **t <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t5 values must be > 0, got {t}"
        )));
    }
    let gammas = sorted_unique(gamma_min_values, "gamma_min list")?;

    let mut jobs = Vec::new();
    for (gi, &g) in gammas.iter().enumerate() {
        let cfg = LoopConfig {
            gamma_min: AngularFreq::new(g)?,
            ..*base
        };
        for c in quadruple(&cfg) {
            jobs.push((gi, c));
        }
    }
    let prefix: Vec<(usize, LoopConfig, QubitDensity, f64)> = jobs
        .par_iter()
        .map(|(gi, cfg)| {
            let sched = build_schedule(cfg)?;
            let head = sched.select_strokes(&[1, 2, 3, 4]);
            let last = sched
                .segments()
                .iter()
                .rev()
                .find(|s| s.stroke == 5)
                .ok_or_else(|| Error::Protocol("loop has no fifth stroke".into()))?;
            let rho0 = prepare_state(&cfg.start.state(), cfg.prep)?;
            let rec = evolve_with(rho0, &head, jumps, &opts.evolve)?;
            Ok((*gi, *cfg, *rec.final_state(), last.delta_start))
        })
        .collect::<Result<_>>()?;

    let tail_jobs: Vec<(usize, usize, &LoopConfig, QubitDensity, f64)> = prefix
        .iter()
        .flat_map(|(gi, cfg, rho, d)| (0..t5s.len()).map(move |ti| (*gi, ti, cfg, *rho, *d)))
        .collect();
    let tails: Vec<(usize, usize, LoopOutcome)> = tail_jobs
        .par_iter()
        .map(|&(gi, ti, cfg, rho, d)| {
            let seg = Segment::ramp(t5s[ti], cfg.omega.value(), d, 0.0, cfg.gamma_min.value())
                .with_stroke(5);
            let rec = evolve_with(rho, &ParamSchedule::new(vec![seg])?, jumps, &opts.evolve)?;
            let o = LoopOutcome::from_state(
                rec.final_state(),
                cfg.start,
                cfg.direction,
                !jumps,
                opts.threshold,
            );
            Ok((gi, ti, o))
        })
        .collect::<Result<_>>()?;

    Ok(gammas
        .iter()
        .enumerate()
        .map(|(gi, &g)| {
            let results = tails
                .iter()
                .filter(|(i, _, _)| *i == gi)
                .map(|&(_, ti, o)| (ti, o))
                .collect();
            T5Sweep {
                gamma_min: g,
                result: collect_samples("t5", &t5s, results),
            }
        })
        .collect())
}

/// `H_eff = (Δ − iγ)|e⟩⟨e| + (Ω/2)(|e⟩⟨g| + |g⟩⟨e|)` in the `{|e⟩, |g⟩}`
/// basis.
pub fn effective_hamiltonian(omega: f64, delta: f64, gamma: f64) -> Matrix2<Complex64> {
    let half = Complex64::new(omega / 2.0, 0.0);
    Matrix2::new(
        Complex64::new(delta, -gamma),
        half,
        half,
        Complex64::new(0.0, 0.0),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSample {
    pub t: f64,
    pub p_upper: f64,
    pub p_lower: f64,
    pub e_upper: Complex64,
    pub e_lower: Complex64,
    /// Eigenvalues closer than `1e-6`; the labels may swap here.
    pub near_degenerate: bool,
}

fn expectation(rho: &QubitDensity, v: &nalgebra::Vector2<Complex64>) -> f64 {
    let (a, b) = (v[0], v[1]);
    let cross = a.conj() * rho.rho_eg * b;
    a.norm_sqr() * rho.rho_ee + b.norm_sqr() * rho.rho_gg + 2.0 * cross.re
}

/// Projections of the recorded states onto the unit right eigenvectors of
/// `H_eff`. The upper branch is the one with larger real part at the first
/// sample; afterwards each branch follows the nearer eigenvalue.
pub fn branch_projection(traj: &TrajectoryRecord) -> Vec<BranchSample> {
    let mut out = Vec::with_capacity(traj.len());
    let mut prev: Option<(Complex64, Complex64)> = None;
    for ((t, rho), p) in traj.times.iter().zip(&traj.states).zip(&traj.params) {
        let h = effective_hamiltonian(p.omega(), p.delta(), p.gamma());
        let (vals, vecs) = eig2(&h);
        let keep = match prev {
            None => vals[0].re >= vals[1].re,
            Some((u, l)) => {
                (vals[0] - u).norm() + (vals[1] - l).norm()
                    <= (vals[1] - u).norm() + (vals[0] - l).norm()
            }
        };
        let (iu, il) = if keep { (0, 1) } else { (1, 0) };
        let sample = BranchSample {
            t: *t,
            p_upper: expectation(rho, &vecs[iu]),
            p_lower: expectation(rho, &vecs[il]),
            e_upper: vals[iu],
            e_lower: vals[il],
            near_degenerate: (vals[0] - vals[1]).norm() < 1e-6,
        };
        prev = Some((sample.e_upper, sample.e_lower));
        out.push(sample);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, DEFAULT_DT};
    use crate::state::{make_psi_minus, make_psi_plus, SystemParams};

    #[test]
    fn verdict_rule() {
        assert_eq!(verdict(0.95, 0.05, 0.9), Verdict::Returned);
        assert_eq!(verdict(0.05, 0.95, 0.9), Verdict::Converted);
        assert_eq!(verdict(0.5, 0.5, 0.9), Verdict::Indeterminate);
        assert_eq!(verdict(0.9, 0.1, 0.9), Verdict::Returned);
    }

    #[test]
    fn hermitian_limit_branches() {
        let p = SystemParams::new(1.0, 0.0, 0.0).unwrap();
        let sched = ParamSchedule::new(vec![Segment::constant(0.5, p)]).unwrap();
        for (psi, upper) in [(make_psi_plus(), 1.0), (make_psi_minus(), 0.0)] {
            let rec = evolve(QubitDensity::projector(&psi), &sched, true, DEFAULT_DT).unwrap();
            let proj = branch_projection(&rec);
            assert!((proj[0].e_upper - Complex64::new(0.5, 0.0)).norm() < 1e-14);
            for s in &proj {
                assert!((s.p_upper - upper).abs() < 1e-9);
                assert!((s.p_upper + s.p_lower - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn completeness_at_zero_decay() {
        let sched = ParamSchedule::new(vec![Segment::ramp(3.0, 0.754, -2.0, 2.0, 0.0)]).unwrap();
        let rec = evolve(QubitDensity::maximally_mixed(), &sched, true, 0.01).unwrap();
        for s in branch_projection(&rec) {
            assert!((s.p_upper + s.p_lower - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quadruple_order() {
        let q = quadruple(&LoopConfig::paper_default());
        let keys: Vec<_> = q.iter().map(|c| (c.start, c.direction)).collect();
        assert_eq!(
            keys,
            vec![
                (StartLabel::Plus, Direction::Cw),
                (StartLabel::Plus, Direction::Ccw),
                (StartLabel::Minus, Direction::Cw),
                (StartLabel::Minus, Direction::Ccw),
            ]
        );
    }

    #[test]
    fn sweeps_reject_empty_axes() {
        let base = LoopConfig::fig_s4();
        assert!(sweep_gamma_max(&base, &[], true).is_err());
        assert!(sweep_t5(&LoopConfig::fig_s8(), &[], &[0.0], true).is_err());
        assert!(sweep_t5(&LoopConfig::fig_s8(), &[5.0], &[], true).is_err());
    }

    #[test]
    fn sweep_sorts_and_dedups() {
        let base = LoopConfig {
            isochoric: crate::protocol::IsochoricMode::Stepped {
                n_steps: 1,
                step_duration: 1.0,
            },
            t1: 0.5,
            t3: 0.5,
            t5: 0.5,
            ..LoopConfig::fig_s4()
        };
        let r = sweep_gamma_max(&base, &[0.3, 0.1, 0.3], true).unwrap();
        let v: Vec<f64> = r.samples.iter().map(|s| s.value).collect();
        assert_eq!(v, vec![0.1, 0.3]);
        assert!(r.samples.iter().all(|s| s.outcomes.len() == 4));
    }

    #[test]
    fn t5_sweep_matches_full_loop() {
        let base = LoopConfig {
            isochoric: crate::protocol::IsochoricMode::Stepped {
                n_steps: 2,
                step_duration: 3.0,
            },
            t1: 1.0,
            t3: 2.0,
            t5: 1.5,
            ..LoopConfig::fig_s8()
        };
        let sweeps = sweep_t5(&base, &[1.5], &[0.05], true).unwrap();
        let sample = &sweeps[0].result.samples[0];
        for cfg in quadruple(&LoopConfig {
            gamma_min: AngularFreq::new(0.05).unwrap(),
            ..base
        }) {
            let full = run_loop_outcome(&cfg, true).unwrap();
            let part = sample.outcome(cfg.start, cfg.direction).unwrap();
            assert!((full.f_plus_final - part.f_plus_final).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_states_follow_strokes() {
        let cfg = LoopConfig::paper_default();
        let run = run_loop(&cfg, true, &RunOptions::sparse()).unwrap();
        let corners = stroke_end_states(&run.trajectory);
        assert!(corners.iter().all(|c| c.is_some()));
        // Corner C sits at large detuning and strong decay: close to |g⟩.
        assert!(corners[1].unwrap().rho_gg > 0.9);
    }
}
