//! Eigenvalue sheets over a rectangular `(Δ, γ)` grid.
//!
//! Eigenvalues are computed independently at every grid point (in parallel)
//! and labelled afterwards in a single pass: each `γ` row is anchored on the
//! closed-form branches at `Δ = 0` and continued outwards column by column
//! with nearest-neighbour matching.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::eigenvalues4;
use crate::error::{Error, Result};
use crate::liouvillian::{
    closed_form_spectrum, continue_branches, degenerate_pairs, liouvillian_entries, match_branches,
    match_is_unambiguous, order_ep_pair,
};
use crate::state::AngularFreq;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub delta_min: f64,
    pub delta_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub n_delta: usize,
    pub n_gamma: usize,
}

impl GridSpec {
    /// `Δ/2π ∈ [−400, 400] kHz`, `γ ∈ [0.1, 1.45]`.
    pub fn paper_default(resolution: usize) -> Self {
        let d = AngularFreq::from_khz(400.0).expect("finite").value();
        GridSpec {
            delta_min: -d,
            delta_max: d,
            gamma_min: 0.1,
            gamma_max: 1.45,
            n_delta: resolution,
            n_gamma: resolution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_delta < 2 || self.n_gamma < 2 {
            return Err(Error::InvalidParameter(format!(
                "surface grid needs at least 2 points per axis, got {} x {}",
                self.n_delta, self.n_gamma
            )));
        }
        let finite = [
            self.delta_min,
            self.delta_max,
            self.gamma_min,
            self.gamma_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || !(self.delta_max > self.delta_min) || !(self.gamma_max > self.gamma_min) {
            return Err(Error::InvalidParameter(format!(
                "surface ranges must have positive extent, got delta [{}, {}], gamma [{}, {}]",
                self.delta_min, self.delta_max, self.gamma_min, self.gamma_max
            )));
        }
        if self.gamma_min < 0.0 {
            return Err(Error::InvalidParameter("gamma range must be >= 0".into()));
        }
        Ok(())
    }

    pub fn deltas(&self) -> Vec<f64> {
        linspace(self.delta_min, self.delta_max, self.n_delta)
    }

    pub fn gammas(&self) -> Vec<f64> {
        linspace(self.gamma_min, self.gamma_max, self.n_gamma)
    }

    fn spacing(&self) -> (f64, f64) {
        (
            (self.delta_max - self.delta_min) / (self.n_delta - 1) as f64,
            (self.gamma_max - self.gamma_min) / (self.n_gamma - 1) as f64,
        )
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| {
            if k + 1 == n {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiemannSurface {
    pub grid: GridSpec,
    pub omega: f64,
    pub jumps: bool,
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Labelled eigenvalues, row-major with `γ` as the row index.
    pub values: Vec<[Complex64; 4]>,
    /// `(i_gamma, i_delta)` cells where `|λ3 − λ4|` is a local minimum below
    /// `lep_threshold`.
    pub lep_locus: Vec<(usize, usize)>,
    pub lep_threshold: f64,
    /// Number of `Δ` edges whose refined continuation still could not
    /// separate the branches.
    pub inconsistent_edges: usize,
}

impl RiemannSurface {
    pub fn at(&self, i_gamma: usize, i_delta: usize) -> &[Complex64; 4] {
        &self.values[i_gamma * self.deltas.len() + i_delta]
    }

    pub fn gap(&self, i_gamma: usize, i_delta: usize) -> f64 {
        let v = self.at(i_gamma, i_delta);
        (v[2] - v[3]).norm()
    }

    /// Within one cell (Chebyshev distance) of a locus point.
    pub fn near_locus(&self, i_gamma: usize, i_delta: usize) -> bool {
        self.lep_locus.iter().any(|&(g, d)| {
            (g as isize - i_gamma as isize).abs() <= 1 && (d as isize - i_delta as isize).abs() <= 1
        })
    }
}

/// Gap threshold for the locus, scaled with the grid spacing: an EP lying
/// between grid points still leaves a gap of order `√(Ω h)` at the nearest
/// point.
pub fn default_lep_threshold(omega: f64, grid: &GridSpec) -> f64 {
    let (hd, hg) = grid.spacing();
    1.5 * (omega.abs().max(1e-12) * hd.max(hg)).sqrt()
}

pub fn riemann_surface(omega: AngularFreq, grid: &GridSpec, jumps: bool) -> Result<RiemannSurface> {
    grid.validate()?;
    let o = omega.value();
    let deltas = grid.deltas();
    let gammas = grid.gammas();
    let nd = deltas.len();

    let raw: Vec<[Complex64; 4]> = (0..gammas.len() * nd)
        .into_par_iter()
        .map(|k| {
            eigenvalues4(&liouvillian_entries(
                o,
                deltas[k % nd],
                gammas[k / nd],
                jumps,
            ))
        })
        .collect::<Result<_>>()?;

    // Anchor column: the grid column nearest Δ = 0.
    let anchor = (0..nd)
        .min_by(|&a, &b| deltas[a].abs().total_cmp(&deltas[b].abs()))
        .expect("nonempty grid");

    let mut values = raw.clone();
    let mut inconsistent = 0usize;
    for (ig, &g) in gammas.iter().enumerate() {
        let row = ig * nd;
        let closed = closed_form_spectrum(omega, AngularFreq::new(g)?, jumps);
        let reference = if deltas[anchor] == 0.0 {
            closed
        } else {
            continue_branches(closed, o, 0.0, deltas[anchor], g, jumps)?.0
        };
        let perm = match_branches(&reference, &raw[row + anchor]);
        values[row + anchor] = perm.map(|k| raw[row + anchor][k]);
        let anchor_split = if deltas[anchor] == 0.0 {
            degenerate_pairs(&closed)
        } else {
            Vec::new()
        };

        let cols_right: Vec<usize> = ((anchor + 1)..nd).collect();
        let cols_left: Vec<usize> = (0..anchor).rev().collect();
        for (step, cols) in [(-1isize, cols_right), (1, cols_left)] {
            for (n, j) in cols.into_iter().enumerate() {
                let pj = (j as isize + step) as usize;
                let prev = values[row + pj];
                let perm = match_branches(&prev, &raw[row + j]);
                let mut next = perm.map(|k| raw[row + j][k]);
                let fresh_split = n == 0 && !anchor_split.is_empty();
                if fresh_split || !match_is_unambiguous(&prev, &next, 0.5, &[]) {
                    // Too coarse to match directly: walk the edge with a
                    // refined continuation and match against its endpoint.
                    let (walked, ambiguous) =
                        continue_branches(prev, o, deltas[pj], deltas[j], g, jumps)?;
                    if ambiguous {
                        inconsistent += 1;
                    }
                    let perm = match_branches(&walked, &raw[row + j]);
                    next = perm.map(|k| raw[row + j][k]);
                }
                values[row + j] = next;
            }
        }
    }

    let lep_threshold = default_lep_threshold(o, grid);
    let scale = o.abs().max(gammas.last().copied().unwrap_or(0.0)).max(1.0);
    for v in values.iter_mut() {
        if (v[2] - v[3]).norm() < 1e-6 * scale {
            order_ep_pair(v, None);
        }
    }

    let gap = |ig: usize, id: usize| {
        let v = &values[ig * nd + id];
        (v[2] - v[3]).norm()
    };
    let mut lep_locus = Vec::new();
    for ig in 0..gammas.len() {
        for id in 0..nd {
            let here = gap(ig, id);
            if here >= lep_threshold {
                continue;
            }
            let neighbours = [
                (ig.wrapping_sub(1), id),
                (ig + 1, id),
                (ig, id.wrapping_sub(1)),
                (ig, id + 1),
            ];
            let is_min = neighbours
                .iter()
                .filter(|&&(a, b)| a < gammas.len() && b < nd)
                .all(|&(a, b)| here <= gap(a, b));
            if is_min {
                lep_locus.push((ig, id));
            }
        }
    }

    Ok(RiemannSurface {
        grid: *grid,
        omega: o,
        jumps,
        deltas,
        gammas,
        values,
        lep_locus,
        lep_threshold,
        inconsistent_edges: inconsistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::{build_liouvillian, spectrum};
    use crate::state::SystemParams;

    fn omega() -> AngularFreq {
        AngularFreq::from_khz(120.0).unwrap()
    }

    #[test]
    fn degenerate_grid_rejected() {
        let mut g = GridSpec::paper_default(11);
        g.n_delta = 1;
        assert!(riemann_surface(omega(), &g, true).is_err());
        let mut g = GridSpec::paper_default(11);
        g.gamma_max = g.gamma_min;
        assert!(riemann_surface(omega(), &g, true).is_err());
    }

    #[test]
    fn default_grid_has_no_lep() {
        let s = riemann_surface(omega(), &GridSpec::paper_default(41), true).unwrap();
        assert!(s.lep_locus.is_empty());
        assert_eq!(s.values.len(), 41 * 41);
        assert_eq!(s.inconsistent_edges, 0);
    }

    #[test]
    fn grid_through_lep_marks_it() {
        let o = omega().value();
        let grid = GridSpec {
            delta_min: -1.0,
            delta_max: 1.0,
            gamma_min: 2.0 * o,
            gamma_max: 6.0 * o,
            n_delta: 21,
            n_gamma: 21,
        };
        let s = riemann_surface(omega(), &grid, true).unwrap();
        // γ = 4Ω is the middle row, Δ = 0 the middle column.
        assert!((s.gammas[10] - 4.0 * o).abs() < 1e-12);
        assert_eq!(s.deltas[10], 0.0);
        assert!(s.lep_locus.contains(&(10, 10)), "{:?}", s.lep_locus);
    }

    fn sorted(v: &[Complex64; 4]) -> Vec<(f64, f64)> {
        let mut out: Vec<_> = v.iter().map(|z| (z.re, z.im)).collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    #[test]
    fn values_match_spectrum_as_multisets() {
        let grid = GridSpec::paper_default(9);
        let s = riemann_surface(omega(), &grid, true).unwrap();
        for (ig, &g) in s.gammas.iter().enumerate() {
            for (id, &d) in s.deltas.iter().enumerate() {
                let l = build_liouvillian(SystemParams::new(omega().value(), d, g).unwrap(), true);
                let sp = spectrum(&l).unwrap();
                let a = sorted(s.at(ig, id));
                let b = sorted(&sp.values);
                for (x, y) in a.iter().zip(&b) {
                    assert!((x.0 - y.0).abs() < 1e-9 && (x.1 - y.1).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn refinement_keeps_labels() {
        let o = omega().value();
        for (grid, jumps) in [
            (GridSpec::paper_default(9), true),
            (
                GridSpec {
                    delta_min: -2.0,
                    delta_max: 2.0,
                    gamma_min: 0.0,
                    gamma_max: 6.0 * o,
                    n_delta: 9,
                    n_gamma: 9,
                },
                false,
            ),
        ] {
            let coarse = riemann_surface(omega(), &grid, jumps).unwrap();
            let fine_grid = GridSpec {
                n_delta: 2 * grid.n_delta - 1,
                n_gamma: 2 * grid.n_gamma - 1,
                ..grid
            };
            let fine = riemann_surface(omega(), &fine_grid, jumps).unwrap();
            for ig in 0..grid.n_gamma {
                for id in 0..grid.n_delta {
                    if coarse.near_locus(ig, id) {
                        continue;
                    }
                    let a = coarse.at(ig, id);
                    let b = fine.at(2 * ig, 2 * id);
                    for k in 0..4 {
                        assert!(
                            (a[k] - b[k]).norm() < 1e-9,
                            "({ig},{id}) branch {k}: {} vs {}",
                            a[k],
                            b[k]
                        );
                    }
                }
            }
        }
    }
}
