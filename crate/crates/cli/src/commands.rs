//! The five commands. Each returns its console text and finished artifacts;
//! nothing here touches the file system.

use chiral_qhe::analysis::{
    run_loop, stroke_end_states, sweep_gamma_max_with, sweep_t5_with, LoopOutcome, RunOptions,
    SweepResult, T5Sweep,
};
use chiral_qhe::dynamics::EvolveOptions;
use chiral_qhe::io::{surface_rows, sweep_rows, to_csv_string, trajectory_rows, TrajectoryRow};
use chiral_qhe::liouvillian::{
    build_liouvillian, classify_phase, ep_closed_form, spectrum, Branch, Phase,
};
use chiral_qhe::protocol::{Direction, LoopConfig};
use chiral_qhe::state::{AngularFreq, StartLabel, SystemParams};
use chiral_qhe::surface::{riemann_surface, GridSpec};
use chiral_qhe::thermo::{accumulate, LedgerRecord};
use num_complex::Complex64;
use serde::Serialize;

use crate::acceptance;
use crate::config::{Emit, PresetName, Settings, SweepAxis};
use crate::error::{usage, CliResult};
use crate::svg::{heatmaps, line_charts, Heatmap, Panel, Series, PALETTE};

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub kind: Emit,
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Default)]
pub struct Output {
    pub text: String,
    pub artifacts: Vec<Artifact>,
    /// Failed acceptance criteria (`validate` only).
    pub failures: usize,
}

impl Output {
    fn push(&mut self, kind: Emit, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.artifacts.push(Artifact {
            kind,
            name: name.into(),
            bytes: bytes.into(),
        });
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(chiral_qhe::Error::from)?;
        text.push('\n');
        self.push(Emit::Json, name, text);
        Ok(())
    }
}

fn loop_options(s: &Settings) -> RunOptions {
    RunOptions {
        evolve: EvolveOptions {
            dt_max: s.dt,
            stride: 1,
        },
        threshold: s.threshold,
    }
}

fn sweep_options(s: &Settings) -> RunOptions {
    RunOptions {
        evolve: EvolveOptions {
            dt_max: s.dt,
            stride: usize::MAX,
        },
        threshold: s.threshold,
    }
}

// spectrum

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRequest {
    pub omega_khz: f64,
    pub gamma: f64,
    pub delta_khz: f64,
    pub jumps: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledEigenvalue {
    pub branch: String,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub omega: f64,
    pub delta: f64,
    pub gamma: f64,
    pub jumps: bool,
    pub eigenvalues: Vec<LabeledEigenvalue>,
    /// `|λ3 − λ4|`
    pub gap_34: f64,
    pub near_degenerate: bool,
    /// Only on the `Δ = 0` axis.
    pub phase: Option<Phase>,
}

pub fn spectrum_report(req: SpectrumRequest) -> CliResult<SpectrumReport> {
    let omega = AngularFreq::from_khz(req.omega_khz)?;
    let delta = AngularFreq::from_khz(req.delta_khz)?;
    let p = SystemParams::new(omega.value(), delta.value(), req.gamma)?;
    let sp = spectrum(&build_liouvillian(p, req.jumps))?;
    Ok(SpectrumReport {
        omega: p.omega(),
        delta: p.delta(),
        gamma: p.gamma(),
        jumps: req.jumps,
        eigenvalues: sp
            .labeled()
            .map(|(b, z)| LabeledEigenvalue {
                branch: b.to_string(),
                re: z.re,
                im: z.im,
            })
            .collect(),
        gap_34: (sp.value(Branch::L3) - sp.value(Branch::L4)).norm(),
        near_degenerate: sp.near_degenerate,
        phase: (req.delta_khz == 0.0).then(|| {
            classify_phase(
                omega,
                AngularFreq::new(req.gamma).expect("validated"),
                req.jumps,
            )
        }),
    })
}

pub fn cmd_spectrum(req: SpectrumRequest) -> CliResult<(SpectrumReport, Output)> {
    let r = spectrum_report(req)?;
    let mut out = Output {
        text: format!(
            "omega = {:.6} rad/us, delta = {:.6} rad/us, gamma = {:.6} rad/us, jumps = {}\n",
            r.omega, r.delta, r.gamma, r.jumps
        ),
        ..Output::default()
    };
    for e in &r.eigenvalues {
        out.text
            .push_str(&format!("{:<3} {:+.9} {:+.9}i\n", e.branch, e.re, e.im));
    }
    out.text
        .push_str(&format!("|lambda3 - lambda4| = {:.3e}\n", r.gap_34));
    if let Some(ph) = r.phase {
        out.text.push_str(&format!("phase = {ph:?}\n"));
    }
    Ok((r, out))
}

// surface

#[derive(Debug, Clone, Serialize)]
struct Point {
    delta: f64,
    gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ExceptionalPoint {
    kind: &'static str,
    delta: f64,
    gamma: f64,
    inside_loop: bool,
}

#[derive(Debug, Clone, Serialize)]
struct SurfaceMeta {
    preset: PresetName,
    omega: f64,
    jumps: bool,
    grid: GridSpec,
    lep_threshold: f64,
    lep_locus: Vec<Point>,
    inconsistent_edges: usize,
    exceptional_point: ExceptionalPoint,
    loop_rectangle: [f64; 4],
}

fn loop_rect(c: &LoopConfig) -> [f64; 4] {
    [
        c.delta_min.value(),
        c.delta_max.value(),
        c.gamma_min.value(),
        c.gamma_max.value(),
    ]
}

pub fn cmd_surface(s: &Settings) -> CliResult<Output> {
    let c = &s.loop_cfg;
    let surf = riemann_surface(c.omega, &s.grid, s.jumps)?;
    let rect = loop_rect(c);
    let ep_gamma = ep_closed_form(c.omega, s.jumps).value();
    let ep = ExceptionalPoint {
        kind: if s.jumps { "LEP" } else { "HEP" },
        delta: 0.0,
        gamma: ep_gamma,
        inside_loop: rect[0] < 0.0 && 0.0 < rect[1] && rect[2] < ep_gamma && ep_gamma < rect[3],
    };
    let locus: Vec<Point> = surf
        .lep_locus
        .iter()
        .map(|&(ig, id)| Point {
            delta: surf.deltas[id],
            gamma: surf.gammas[ig],
        })
        .collect();

    let mut out = Output {
        text: format!(
        "{}x{} grid, {} locus cells, {} inconsistent edges; {} at gamma = {:.4} ({} the loop)\n",
        s.grid.n_delta,
        s.grid.n_gamma,
        locus.len(),
        surf.inconsistent_edges,
        ep.kind,
        ep.gamma,
        if ep.inside_loop { "inside" } else { "outside" }
    ),
        ..Output::default()
    };
    out.push(
        Emit::Csv,
        "surface.csv",
        to_csv_string(&surface_rows(&surf))?,
    );
    let markers: Vec<(f64, f64)> = locus
        .iter()
        .map(|p| (p.delta, p.gamma))
        .chain(std::iter::once((ep.delta, ep.gamma)))
        .collect();
    let sheet = |f: fn(Complex64) -> f64, title: &str| Heatmap {
        title: title.into(),
        x_label: "Δ (rad/µs)".into(),
        y_label: "γ (rad/µs)".into(),
        x: surf.deltas.clone(),
        y: surf.gammas.clone(),
        z: surf
            .values
            .iter()
            .map(|v| f(v[Branch::L4.index()]))
            .collect(),
        markers: markers.clone(),
        rect: Some(rect),
    };
    let svg = heatmaps(&[sheet(|z| z.re, "Re λ4"), sheet(|z| z.im, "Im λ4")]);
    out.push(Emit::Svg, "surface.svg", svg);
    out.json(
        "surface.json",
        &SurfaceMeta {
            preset: s.preset,
            omega: c.omega.value(),
            jumps: s.jumps,
            grid: s.grid,
            lep_threshold: surf.lep_threshold,
            lep_locus: locus,
            inconsistent_edges: surf.inconsistent_edges,
            exceptional_point: ep,
            loop_rectangle: rect,
        },
    )?;
    Ok(out)
}

// loop

#[derive(Debug, Clone, Serialize)]
pub struct CornerRow {
    pub corner: char,
    pub rho_ee: f64,
    pub re_rho_eg: f64,
    pub im_rho_eg: f64,
    pub rho_gg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Conservation {
    pub max_trace_drift: f64,
    pub max_hermiticity_error: f64,
    pub min_det: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopReport {
    pub preset: PresetName,
    pub jumps: bool,
    pub config: LoopConfig,
    pub outcome: LoopOutcome,
    pub thermo: LedgerRecord,
    pub first_law_residual: f64,
    pub stroke_work: [f64; 6],
    pub stroke_heat: [f64; 6],
    pub corners: Vec<CornerRow>,
    pub conservation: Conservation,
}

/// Every `stride`-th row, plus segment ends and the last row.
fn decimate(rows: Vec<TrajectoryRow>, stride: usize, keep: &[usize]) -> Vec<TrajectoryRow> {
    let last = rows.len().saturating_sub(1);
    rows.into_iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == last || keep.binary_search(i).is_ok())
        .map(|(_, r)| r)
        .collect()
}

pub fn cmd_loop(s: &Settings) -> CliResult<(LoopReport, Output)> {
    let run = run_loop(&s.loop_cfg, s.jumps, &loop_options(s))?;
    let traj = &run.trajectory;
    let ledger = accumulate(traj, s.convention)?;
    let corners = stroke_end_states(traj)
        .iter()
        .zip(['B', 'C', 'D', 'E'])
        .filter_map(|(st, name)| {
            st.map(|r| CornerRow {
                corner: name,
                rho_ee: r.rho_ee,
                re_rho_eg: r.rho_eg.re,
                im_rho_eg: r.rho_eg.im,
                rho_gg: r.rho_gg,
            })
        })
        .collect();
    let report = LoopReport {
        preset: s.preset,
        jumps: s.jumps,
        config: s.loop_cfg,
        outcome: run.outcome,
        thermo: LedgerRecord::new(&ledger, s.neutral_tol),
        first_law_residual: ledger.first_law_residual(),
        stroke_work: ledger.stroke_work,
        stroke_heat: ledger.stroke_heat,
        corners,
        conservation: Conservation {
            max_trace_drift: traj.max_trace_drift(),
            max_hermiticity_error: traj.max_hermiticity_error,
            min_det: traj.min_det,
        },
    };

    let mut ends = traj.segment_ends.clone();
    ends.sort_unstable();
    let rows = decimate(trajectory_rows(traj), s.stride, &ends);
    let mut out = Output::default();
    let o = &report.outcome;
    out.text = format!(
        "{}/{}: f+ = {:.4}, f- = {:.4}, verdict {}; W_net = {:+.4} ({})\n",
        o.direction.as_str(),
        o.start.as_str(),
        o.f_plus_final,
        o.f_minus_final,
        o.verdict,
        report.thermo.w_net,
        report.thermo.classification
    );
    out.push(Emit::Csv, "trajectory.csv", to_csv_string(&rows)?);
    out.json("loop.json", &report)?;
    let series = |name: &str, color, f: fn(&TrajectoryRow) -> f64| Series {
        name: name.into(),
        points: rows.iter().map(|r| (r.t_us, f(r))).collect(),
        color,
        markers: false,
    };
    let panel = Panel {
        title: format!("{} loop from {}", o.direction.as_str(), o.start.as_str()),
        x_label: "t (µs)".into(),
        y_label: "fidelity".into(),
        y_range: Some((0.0, 1.0)),
        series: vec![
            series("⟨ψ+|ρ|ψ+⟩", PALETTE[0], |r| r.fidelity_plus),
            series("⟨ψ-|ρ|ψ-⟩", PALETTE[1], |r| r.fidelity_minus),
        ],
    };
    out.push(Emit::Svg, "fidelity.svg", line_charts(&[panel], 1));
    Ok((report, out))
}

// sweep

/// `γ_max` sweep over sorted, distinct values of `γ_max/4Ω`; the returned
/// axis holds the ratios.
pub fn ratio_sweep(
    base: &LoopConfig,
    ratios: &[f64],
    jumps: bool,
    opts: &RunOptions,
) -> chiral_qhe::Result<SweepResult> {
    let four = 4.0 * base.omega.value();
    let gammas: Vec<f64> = ratios.iter().map(|r| r * four).collect();
    let mut res = sweep_gamma_max_with(base, &gammas, jumps, opts)?;
    if res.samples.len() != ratios.len() {
        return Err(chiral_qhe::Error::InvalidParameter(
            "gamma_max ratios must be sorted and distinct".into(),
        ));
    }
    res.axis = "gamma_max_over_4omega".into();
    for (s, r) in res.samples.iter_mut().zip(ratios) {
        s.value = *r;
    }
    Ok(res)
}

const COMBOS: [(StartLabel, Direction); 4] = [
    (StartLabel::Plus, Direction::Cw),
    (StartLabel::Plus, Direction::Ccw),
    (StartLabel::Minus, Direction::Cw),
    (StartLabel::Minus, Direction::Ccw),
];

fn combo_panels(x_label: &str, curves: &[(&SweepResult, String)], both: bool) -> Vec<Panel> {
    COMBOS
        .iter()
        .map(|&(start, dir)| {
            let mut series = Vec::new();
            for (k, (res, label)) in curves.iter().enumerate() {
                let pick = |f: fn(&LoopOutcome) -> f64| -> Vec<(f64, f64)> {
                    res.samples
                        .iter()
                        .filter_map(|s| s.outcome(start, dir).map(|o| (s.value, f(o))))
                        .collect()
                };
                series.push(Series {
                    name: format!("f+ {label}"),
                    points: pick(|o| o.f_plus_final),
                    color: PALETTE[(2 * k) % PALETTE.len()],
                    markers: true,
                });
                if both {
                    series.push(Series {
                        name: format!("f- {label}"),
                        points: pick(|o| o.f_minus_final),
                        color: PALETTE[(2 * k + 1) % PALETTE.len()],
                        markers: true,
                    });
                }
            }
            Panel {
                title: format!("{} from {}", dir.as_str(), start.as_str()),
                x_label: x_label.into(),
                y_label: "final fidelity".into(),
                y_range: Some((0.0, 1.0)),
                series,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct SweepMeta<'a> {
    preset: PresetName,
    axis: &'a str,
    jumps: bool,
    threshold: f64,
    delta_min_khz: f64,
    delta_max_khz: f64,
    delta_reading: &'static str,
    files: Vec<String>,
    gamma_min_values: Vec<f64>,
}

fn gamma_min_file(g: f64) -> String {
    format!("sweep_t5_gamma_min_{g}.csv")
}

pub enum SweepData {
    GammaMax(SweepResult),
    T5(Vec<T5Sweep>),
}

pub fn cmd_sweep(s: &Settings) -> CliResult<(SweepData, Output)> {
    let c = &s.loop_cfg;
    let opts = sweep_options(s);
    let mut out = Output::default();
    let delta_reading = match s.preset {
        PresetName::FigS8 | PresetName::FigS9 => {
            "the detuning ramps span delta_min_khz..delta_max_khz = -1000..+1000 kHz; a listing of 1.0 MHz for both ends is read as this symmetric range"
        }
        _ => "delta_min_khz..delta_max_khz as configured",
    };
    let mut meta = SweepMeta {
        preset: s.preset,
        axis: "",
        jumps: s.jumps,
        threshold: s.threshold,
        delta_min_khz: c.delta_min.as_khz(),
        delta_max_khz: c.delta_max.as_khz(),
        delta_reading,
        files: Vec::new(),
        gamma_min_values: Vec::new(),
    };
    let data = match &s.sweep {
        SweepAxis::GammaMaxRatio(list) => {
            let (ratios, _) = s.gamma_max_axis(list)?;
            let res = ratio_sweep(c, &ratios, s.jumps, &opts)?;
            meta.axis = "gamma_max_over_4omega";
            meta.files.push("sweep.csv".into());
            meta.gamma_min_values.push(c.gamma_min.value());
            let chiral = res.samples.iter().filter(|x| x.fully_chiral()).count();
            out.text = format!(
                "{} values of gamma_max/4Omega, {} fully chiral, onset {}\n",
                res.samples.len(),
                chiral,
                acceptance::chiral_onset(&res).map_or("none".into(), |r| r.to_string())
            );
            out.push(Emit::Csv, "sweep.csv", to_csv_string(&sweep_rows(&res))?);
            let panels = combo_panels("γ_max/4Ω", &[(&res, String::new())], true);
            out.push(Emit::Svg, "sweep.svg", line_charts(&panels, 2));
            SweepData::GammaMax(res)
        }
        SweepAxis::T5 {
            values,
            gamma_min_values,
        } => {
            if values.is_empty() || gamma_min_values.is_empty() {
                return Err(usage("sweep axis is empty"));
            }
            let sweeps = sweep_t5_with(c, values, gamma_min_values, s.jumps, &opts)?;
            meta.axis = "t5";
            for sw in &sweeps {
                let name = gamma_min_file(sw.gamma_min);
                out.push(
                    Emit::Csv,
                    name.clone(),
                    to_csv_string(&sweep_rows(&sw.result))?,
                );
                meta.files.push(name);
                meta.gamma_min_values.push(sw.gamma_min);
            }
            out.text = format!(
                "{} values of T5 for {} values of gamma_min (jumps = {})\n",
                sweeps[0].result.samples.len(),
                sweeps.len(),
                s.jumps
            );
            let curves: Vec<(&SweepResult, String)> = sweeps
                .iter()
                .map(|sw| (&sw.result, format!("γ_min={}", sw.gamma_min)))
                .collect();
            let panels = combo_panels("T5 (µs)", &curves, false);
            out.push(Emit::Svg, "sweep.svg", line_charts(&panels, 2));
            SweepData::T5(sweeps)
        }
    };
    out.json("sweep.json", &meta)?;
    Ok((data, out))
}

// validate

pub fn cmd_validate() -> CliResult<Output> {
    let results = acceptance::run_all();
    let mut out = Output {
        text: acceptance::table(&results),
        failures: results.iter().filter(|r| !r.passed).count(),
        ..Output::default()
    };
    for (name, bytes) in acceptance::artifacts()? {
        out.push(Emit::Csv, name, bytes);
    }
    out.push(Emit::Csv, "acceptance.csv", to_csv_string(&results)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Settings;

    #[test]
    fn spectrum_at_lep_and_closed_system() {
        let omega = AngularFreq::from_khz(120.0).unwrap().value();
        let (r, out) = cmd_spectrum(SpectrumRequest {
            omega_khz: 120.0,
            gamma: 4.0 * omega,
            delta_khz: 0.0,
            jumps: true,
        })
        .unwrap();
        assert!(r.gap_34 < 1e-3, "{}", r.gap_34);
        assert_eq!(r.phase, Some(Phase::Exceptional));
        assert!(out.text.contains("lambda1"));

        let r = spectrum_report(SpectrumRequest {
            omega_khz: 120.0,
            gamma: 0.0,
            delta_khz: 0.0,
            jumps: true,
        })
        .unwrap();
        let mut im: Vec<f64> = r.eigenvalues.iter().map(|e| e.im).collect();
        im.sort_by(f64::total_cmp);
        assert!(r.eigenvalues.iter().all(|e| e.re.abs() < 1e-12));
        assert!((im[0] + omega).abs() < 1e-12 && (im[3] - omega).abs() < 1e-12);
        assert!(im[1].abs() < 1e-12 && im[2].abs() < 1e-12);
    }

    #[test]
    fn spectrum_slightly_above_lep_has_square_root_gap() {
        // 7e-5 above 4Ω the pair is already about 1e-2 apart.
        let r = spectrum_report(SpectrumRequest {
            omega_khz: 120.0,
            gamma: 3.016,
            delta_khz: 0.0,
            jumps: true,
        })
        .unwrap();
        let omega = AngularFreq::from_khz(120.0).unwrap().value();
        let xi = (3.016f64.powi(2) - 16.0 * omega * omega).sqrt();
        assert!(
            (r.gap_34 - xi / 2.0).abs() < 1e-6,
            "{} vs {}",
            r.gap_34,
            xi / 2.0
        );
    }

    #[test]
    fn surface_outputs() {
        let mut s = Settings::preset(PresetName::PaperDefault);
        s.grid = GridSpec::paper_default(7);
        let out = cmd_surface(&s).unwrap();
        let csv = &out
            .artifacts
            .iter()
            .find(|a| a.name == "surface.csv")
            .unwrap()
            .bytes;
        assert_eq!(csv.iter().filter(|&&b| b == b'\n').count(), 1 + 7 * 7 * 4);
        let json = &out
            .artifacts
            .iter()
            .find(|a| a.name == "surface.json")
            .unwrap()
            .bytes;
        let v: serde_json::Value = serde_json::from_slice(json).unwrap();
        assert_eq!(v["exceptional_point"]["inside_loop"], false);
        assert!(out.text.contains("outside the loop"));

        s.grid.n_gamma = 1;
        assert!(cmd_surface(&s).is_err());
    }

    #[test]
    fn decimation_keeps_ends() {
        let row = |t: f64| TrajectoryRow {
            t_us: t,
            rho_ee: 0.0,
            re_rho_eg: 0.0,
            im_rho_eg: 0.0,
            rho_gg: 1.0,
            delta: 0.0,
            gamma: 0.0,
            fidelity_plus: 0.5,
            fidelity_minus: 0.5,
        };
        let rows: Vec<_> = (0..10).map(|i| row(i as f64)).collect();
        let kept: Vec<f64> = decimate(rows, 4, &[5]).iter().map(|r| r.t_us).collect();
        assert_eq!(kept, vec![0.0, 4.0, 5.0, 8.0, 9.0]);
    }

    #[test]
    fn empty_sweep_axis_is_usage_error() {
        let mut s = Settings::preset(PresetName::FigS4);
        s.sweep = SweepAxis::GammaMaxRatio(vec![]);
        assert_eq!(cmd_sweep(&s).err().unwrap().exit_code(), 2);
        s.sweep = SweepAxis::T5 {
            values: vec![],
            gamma_min_values: vec![0.0],
        };
        assert_eq!(cmd_sweep(&s).err().unwrap().exit_code(), 2);
    }
}
