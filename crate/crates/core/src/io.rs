//! CSV and JSON export, with readers for the same schemas.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{SweepResult, Verdict};
use crate::dynamics::TrajectoryRecord;
use crate::error::Result;
use crate::liouvillian::Branch;
use crate::protocol::Direction;
use crate::state::{fidelity, StartLabel};
use crate::surface::RiemannSurface;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t_us: f64,
    pub rho_ee: f64,
    pub re_rho_eg: f64,
    pub im_rho_eg: f64,
    pub rho_gg: f64,
    pub delta: f64,
    pub gamma: f64,
    pub fidelity_plus: f64,
    pub fidelity_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub delta: f64,
    pub gamma: f64,
    pub branch: u8,
    pub re_lambda: f64,
    pub im_lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub start: StartLabel,
    pub direction: Direction,
    pub f_plus_final: f64,
    pub f_minus_final: f64,
    pub verdict: Verdict,
}

/// Rows of a trajectory. Fidelities are `⟨ψ±|ρ|ψ±⟩` of the recorded
/// (unnormalized, when jumps are off) state.
pub fn trajectory_rows(traj: &TrajectoryRecord) -> Vec<TrajectoryRow> {
    let (plus, minus) = (StartLabel::Plus.state(), StartLabel::Minus.state());
    traj.times
        .iter()
        .zip(&traj.states)
        .zip(&traj.params)
        .map(|((&t, s), p)| TrajectoryRow {
            t_us: t,
            rho_ee: s.rho_ee,
            re_rho_eg: s.rho_eg.re,
            im_rho_eg: s.rho_eg.im,
            rho_gg: s.rho_gg,
            delta: p.delta(),
            gamma: p.gamma(),
            fidelity_plus: fidelity(s, &plus),
            fidelity_minus: fidelity(s, &minus),
        })
        .collect()
}

pub fn surface_rows(s: &RiemannSurface) -> Vec<SurfaceRow> {
    let mut rows = Vec::with_capacity(s.values.len() * 4);
    for (ig, &g) in s.gammas.iter().enumerate() {
        for (id, &d) in s.deltas.iter().enumerate() {
            for b in Branch::ALL {
                let z: Complex64 = s.at(ig, id)[b.index()];
                rows.push(SurfaceRow {
                    delta: d,
                    gamma: g,
                    branch: b.number() as u8,
                    re_lambda: z.re,
                    im_lambda: z.im,
                });
            }
        }
    }
    rows
}

pub fn sweep_rows(r: &SweepResult) -> Vec<SweepRow> {
    r.samples
        .iter()
        .flat_map(|s| {
            s.outcomes.iter().map(move |o| SweepRow {
                axis_value: s.value,
                start: o.start,
                direction: o.direction,
                f_plus_final: o.f_plus_final,
                f_minus_final: o.f_minus_final,
                verdict: o.verdict,
            })
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rd.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn to_csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv writer emits utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{LoopOutcome, SweepSample};
    use crate::dynamics::{evolve, ParamSchedule, Segment};
    use crate::state::AngularFreq;
    use crate::state::{make_psi_minus, QubitDensity};
    use crate::surface::{riemann_surface, GridSpec};

    #[test]
    fn trajectory_round_trip() {
        let sched = ParamSchedule::new(vec![Segment::ramp(0.05, 0.754, -1.0, 1.0, 0.3)]).unwrap();
        let rec = evolve(
            QubitDensity::projector(&make_psi_minus()),
            &sched,
            true,
            0.01,
        )
        .unwrap();
        let rows = trajectory_rows(&rec);
        let text = to_csv_string(&rows).unwrap();
        assert!(text.starts_with(
            "t_us,rho_ee,re_rho_eg,im_rho_eg,rho_gg,delta,gamma,fidelity_plus,fidelity_minus\n"
        ));
        let back: Vec<TrajectoryRow> = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn surface_round_trip_and_row_count() {
        let s = riemann_surface(
            AngularFreq::from_khz(120.0).unwrap(),
            &GridSpec::paper_default(5),
            true,
        )
        .unwrap();
        let rows = surface_rows(&s);
        assert_eq!(rows.len(), 5 * 5 * 4);
        let text = to_csv_string(&rows).unwrap();
        assert!(text.starts_with("delta,gamma,branch,re_lambda,im_lambda\n"));
        let back: Vec<SurfaceRow> = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn sweep_round_trip() {
        let r = SweepResult {
            axis: "gamma_max".into(),
            samples: vec![SweepSample {
                value: 0.1,
                outcomes: vec![LoopOutcome {
                    start: StartLabel::Minus,
                    direction: Direction::Ccw,
                    f_plus_final: 0.123456789012345,
                    f_minus_final: 0.876543210987655,
                    verdict: Verdict::Indeterminate,
                }],
            }],
        };
        let rows = sweep_rows(&r);
        let text = to_csv_string(&rows).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "axis_value,start,direction,f_plus_final,f_minus_final,verdict"
        );
        assert!(text.contains("minus,ccw"));
        let back: Vec<SweepRow> = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, rows);
    }
}
