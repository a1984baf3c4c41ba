use chiral_qhe::analysis::{quadruple, run_loop, RunOptions};
use chiral_qhe::dynamics::EvolveOptions;
use chiral_qhe::protocol::{Direction, LoopConfig};
use chiral_qhe::state::{fidelity, StartLabel};
use chiral_qhe::thermo::{accumulate, HConvention};

fn opts(dt: f64) -> RunOptions {
    RunOptions {
        evolve: EvolveOptions {
            dt_max: dt,
            stride: 1,
        },
        ..RunOptions::default()
    }
}

/// Fidelities to both eigenstates at every segment end, plus `W_net`.
fn observables(cfg: &LoopConfig, dt: f64) -> (Vec<f64>, f64) {
    let run = run_loop(cfg, true, &opts(dt)).unwrap();
    let traj = &run.trajectory;
    let fids = traj
        .segment_ends
        .iter()
        .flat_map(|&i| {
            let rho = &traj.states[i];
            [StartLabel::Plus, StartLabel::Minus].map(|s| fidelity(rho, &s.state()))
        })
        .collect();
    let w = accumulate(traj, HConvention::Supplement).unwrap().w_net;
    (fids, w)
}

#[test]
fn halving_the_step_leaves_default_loops_unchanged() {
    for cfg in quadruple(&LoopConfig::paper_default()) {
        let (f1, w1) = observables(&cfg, 1e-3);
        let (f2, w2) = observables(&cfg, 5e-4);
        assert_eq!(f1.len(), f2.len());
        let df = f1
            .iter()
            .zip(&f2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(
            df < 1e-5,
            "{:?}/{:?}: fidelity moved by {df:e}",
            cfg.direction,
            cfg.start
        );
        let dw = (w1 - w2).abs() / w1.abs();
        assert!(
            dw < 1e-4,
            "{:?}/{:?}: W_net moved by {dw:e} relative",
            cfg.direction,
            cfg.start
        );
    }
}

#[test]
fn final_state_depends_on_direction_only() {
    for dir in [Direction::Cw, Direction::Ccw] {
        let base = LoopConfig::paper_default().with_direction(dir);
        let end = |start| {
            let cfg = LoopConfig { start, ..base };
            *run_loop(&cfg, true, &RunOptions::sparse())
                .unwrap()
                .trajectory
                .final_state()
        };
        let d = end(StartLabel::Plus).max_abs_diff(&end(StartLabel::Minus));
        assert!(d < 0.05, "{dir:?}: final states differ by {d}");
    }
}
