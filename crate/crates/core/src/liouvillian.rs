//! Liouvillian superoperator of the driven, decaying qubit.
//!
//! The density matrix is vectorized as `(ρ_ee, ρ_eg, ρ_ge, ρ_gg)` and
//! `dρ/dt = ℒρ` with
//!
//! ```text
//!     ⎡ −γ        iΩ/2          −iΩ/2          0    ⎤
//! ℒ = ⎢ iΩ/2   −(γ/2 + iΔ)       0           −iΩ/2  ⎥
//!     ⎢ −iΩ/2       0          −(γ/2 − iΔ)    iΩ/2  ⎥
//!     ⎣ γ·J     −iΩ/2           iΩ/2          0     ⎦
//! ```
//!
//! where `J = 1` keeps the quantum-jump (recycling) term and `J = 0` gives the
//! no-jump generator `ℒ_H` of the non-Hermitian Hamiltonian.

use std::fmt;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::{self, EigenPairs};
use crate::error::{Error, Result};
use crate::state::{AngularFreq, SystemParams};

/// Branch tag of an eigenvalue, `λ1 … λ4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    L1,
    L2,
    L3,
    L4,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::L1, Branch::L2, Branch::L3, Branch::L4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn number(self) -> usize {
        self.index() + 1
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lambda{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiouvillianMatrix {
    pub entries: Matrix4<Complex64>,
    pub jumps: bool,
    pub params: SystemParams,
}

impl LiouvillianMatrix {
    pub fn apply(&self, v: &Vector4<Complex64>) -> Vector4<Complex64> {
        self.entries * v
    }

    pub fn norm(&self) -> f64 {
        eigen::frobenius(&self.entries)
    }
}

/// Raw 4×4 generator for the given rates; no validation.
pub fn liouvillian_entries(omega: f64, delta: f64, gamma: f64, jumps: bool) -> Matrix4<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let drive = Complex64::new(0.0, omega / 2.0);
    let feed = if jumps { gamma } else { 0.0 };
    Matrix4::new(
        Complex64::new(-gamma, 0.0),
        drive,
        -drive,
        zero,
        drive,
        Complex64::new(-gamma / 2.0, -delta),
        zero,
        -drive,
        -drive,
        zero,
        Complex64::new(-gamma / 2.0, delta),
        drive,
        Complex64::new(feed, 0.0),
        -drive,
        drive,
        zero,
    )
}

pub fn build_liouvillian(p: SystemParams, jumps: bool) -> LiouvillianMatrix {
    LiouvillianMatrix {
        entries: liouvillian_entries(p.omega(), p.delta(), p.gamma(), jumps),
        jumps,
        params: p,
    }
}

/// Eigenpairs of ℒ labelled by branch. `values[k]` and `vectors[k]` belong to
/// `Branch::ALL[k]`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: [Complex64; 4],
    pub vectors: [Vector4<Complex64>; 4],
    /// Set when the labels had to fall back to the degeneracy ordering rule.
    pub near_degenerate: bool,
}

impl Spectrum {
    pub fn value(&self, b: Branch) -> Complex64 {
        self.values[b.index()]
    }

    /// `|λ3 − λ4|`
    pub fn ep_gap(&self) -> f64 {
        (self.values[2] - self.values[3]).norm()
    }

    pub fn labeled(&self) -> impl Iterator<Item = (Branch, Complex64)> + '_ {
        Branch::ALL
            .iter()
            .map(move |&b| (b, self.values[b.index()]))
    }
}

/// Eigenvalues at `Δ = 0`, ordered `λ1 … λ4`.
///
/// With jumps: `{0, −γ/2, (−3γ−ξ)/4, (−3γ+ξ)/4}`, `ξ = √(γ²−16Ω²)`.
/// Without: `{−γ/2, −γ/2, (−γ−ζ)/2, (−γ+ζ)/2}`, `ζ = √(γ²−4Ω²)`.
/// Negative radicands use the principal complex root, so `Im λ3 ≤ 0 ≤ Im λ4`.
pub fn closed_form_spectrum(omega: AngularFreq, gamma: AngularFreq, jumps: bool) -> [Complex64; 4] {
    let (o, g) = (omega.value(), gamma.value());
    if jumps {
        let xi = Complex64::new(g * g - 16.0 * o * o, 0.0).sqrt();
        [
            Complex64::new(0.0, 0.0),
            Complex64::new(-g / 2.0, 0.0),
            (Complex64::new(-3.0 * g, 0.0) - xi) / 4.0,
            (Complex64::new(-3.0 * g, 0.0) + xi) / 4.0,
        ]
    } else {
        let zeta = Complex64::new(g * g - 4.0 * o * o, 0.0).sqrt();
        [
            Complex64::new(-g / 2.0, 0.0),
            Complex64::new(-g / 2.0, 0.0),
            (Complex64::new(-g, 0.0) - zeta) / 2.0,
            (Complex64::new(-g, 0.0) + zeta) / 2.0,
        ]
    }
}

/// Decay rate of the exceptional point at `Δ = 0`: `4Ω` with jumps (LEP),
/// `2Ω` without (HEP).
pub fn ep_closed_form(omega: AngularFreq, jumps: bool) -> AngularFreq {
    let k = if jumps { 4.0 } else { 2.0 };
    AngularFreq::new(k * omega.value()).expect("finite omega")
}

/// Spectral regime at `Δ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// `γ` below the EP: an oscillatory complex-conjugate pair.
    Exact,
    Exceptional,
    /// `γ` above the EP: all eigenvalues real.
    Broken,
}

pub fn classify_phase(omega: AngularFreq, gamma: AngularFreq, jumps: bool) -> Phase {
    let ep = ep_closed_form(omega, jumps).value();
    let g = gamma.value();
    if (g - ep).abs() <= 1e-12 * ep.max(1.0) {
        Phase::Exceptional
    } else if g < ep {
        Phase::Exact
    } else {
        Phase::Broken
    }
}

/// Permutation `p` minimizing `Σ_k |reference[k] − candidates[p[k]]|²`.
/// Ties resolve to the lexicographically first permutation.
pub fn match_branches(reference: &[Complex64; 4], candidates: &[Complex64; 4]) -> [usize; 4] {
    let mut best = [0, 1, 2, 3];
    let mut best_cost = f64::INFINITY;
    for_each_permutation(|p| {
        let cost: f64 = (0..4)
            .map(|k| (reference[k] - candidates[p[k]]).norm_sqr())
            .sum();
        if cost < best_cost {
            best_cost = cost;
            best = *p;
        }
    });
    best
}

fn for_each_permutation(mut f: impl FnMut(&[usize; 4])) {
    for a in 0..4 {
        for b in 0..4 {
            if b == a {
                continue;
            }
            for c in 0..4 {
                if c == a || c == b {
                    continue;
                }
                let d = 6 - a - b - c;
                f(&[a, b, c, d]);
            }
        }
    }
}

/// Smallest pairwise distance between distinct entries.
pub fn min_gap(values: &[Complex64; 4]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..4 {
        for j in (i + 1)..4 {
            g = g.min((values[i] - values[j]).norm());
        }
    }
    g
}

/// Imaginary parts closer than this (relative) count as equal when ordering.
const ORDER_IM_REL: f64 = 1e-9;

/// `a` should come after `b` under imaginary-then-real ordering.
fn out_of_order(a: Complex64, b: Complex64) -> bool {
    let tol = ORDER_IM_REL * a.norm().max(b.norm()).max(1.0);
    if (a.im - b.im).abs() > tol {
        a.im > b.im
    } else {
        a.re > b.re
    }
}

/// Orders the `(λ3, λ4)` pair by imaginary part, then real part.
pub(crate) fn order_ep_pair(
    values: &mut [Complex64; 4],
    vectors: Option<&mut [Vector4<Complex64>; 4]>,
) {
    if out_of_order(values[2], values[3]) {
        values.swap(2, 3);
        if let Some(v) = vectors {
            v.swap(2, 3);
        }
    }
}

/// Relative size below which a pair of eigenvalues counts as degenerate for
/// labelling purposes.
const DEGENERACY_REL: f64 = 1e-6;

fn permute(pairs: &EigenPairs, p: [usize; 4]) -> ([Complex64; 4], [Vector4<Complex64>; 4]) {
    (p.map(|k| pairs.values[k]), p.map(|k| pairs.vectors[k]))
}

/// Numerical eigenpairs with branch labels.
///
/// At `Δ = 0` the labels come from matching against
/// [`closed_form_spectrum`]; otherwise the branches are continued along the
/// straight path from `Δ = 0` to the requested detuning at fixed `Ω, γ`.
pub fn spectrum(l: &LiouvillianMatrix) -> Result<Spectrum> {
    let pairs = eigen::eig4(&l.entries)?;
    let p = l.params;
    let anchor = closed_form_spectrum(p.omega, p.gamma, l.jumps);
    let reference = if p.delta() == 0.0 {
        anchor
    } else {
        continue_branches(anchor, p.omega(), 0.0, p.delta(), p.gamma(), l.jumps)?.0
    };
    let perm = match_branches(&reference, &pairs.values);
    let (mut values, mut vectors) = permute(&pairs, perm);
    let scale = l.norm().max(f64::MIN_POSITIVE);
    let near_degenerate = (values[2] - values[3]).norm() < DEGENERACY_REL * scale;
    if near_degenerate {
        order_ep_pair(&mut values, Some(&mut vectors));
    }
    Ok(Spectrum {
        values,
        vectors,
        near_degenerate,
    })
}

/// True when every matched eigenvalue is closer to its predecessor than
/// `margin` times the distance from that predecessor to any other candidate.
/// Pairs listed in `skip` are not compared with each other.
pub fn match_is_unambiguous(
    prev: &[Complex64; 4],
    matched: &[Complex64; 4],
    margin: f64,
    skip: &[(usize, usize)],
) -> bool {
    (0..4).all(|k| {
        let moved = (matched[k] - prev[k]).norm();
        (0..4)
            .filter(|&j| j != k && !skip.contains(&(k.min(j), k.max(j))))
            .all(|j| moved < margin * (matched[j] - prev[k]).norm())
    })
}

/// Index pairs whose values coincide to roundoff.
pub fn degenerate_pairs(values: &[Complex64; 4]) -> Vec<(usize, usize)> {
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut out = Vec::new();
    for i in 0..4 {
        for j in (i + 1)..4 {
            if (values[i] - values[j]).norm() <= 1e-12 * scale {
                out.push((i, j));
            }
        }
    }
    out
}

/// Orders each listed pair by imaginary part, then real part.
pub(crate) fn order_pairs(values: &mut [Complex64; 4], pairs: &[(usize, usize)]) {
    for &(i, j) in pairs {
        if out_of_order(values[i], values[j]) {
            values.swap(i, j);
        }
    }
}

/// Continues labelled eigenvalues `start` (valid at detuning `delta_from`)
/// to `delta_to` at fixed `Ω, γ`. Steps are bisected until every eigenvalue
/// is matched unambiguously. Branches that start out degenerate are ordered
/// by imaginary part (then real part) after the first step. Returns the
/// labelled values at `delta_to` and whether the refinement limit was hit.
pub fn continue_branches(
    start: [Complex64; 4],
    omega: f64,
    delta_from: f64,
    delta_to: f64,
    gamma: f64,
    jumps: bool,
) -> Result<([Complex64; 4], bool)> {
    const MAX_DEPTH: u32 = 24;
    let mut current = start;
    let mut split = degenerate_pairs(&start);
    let mut stack = vec![(delta_from, delta_to, 0u32)];
    let mut ambiguous = false;
    // Depth-first bisection keeps the walk ordered from delta_from to delta_to.
    while let Some((a, b, depth)) = stack.pop() {
        let next = eigen::eigenvalues4(&liouvillian_entries(omega, b, gamma, jumps))?;
        let perm = match_branches(&current, &next);
        let mut matched = perm.map(|k| next[k]);
        let clean = match_is_unambiguous(&current, &matched, 0.5, &split);
        if clean || depth >= MAX_DEPTH || a == b {
            ambiguous |= !clean && a != b;
            if !split.is_empty() && a != b {
                order_pairs(&mut matched, &split);
                split.clear();
            }
            current = matched;
        } else {
            let mid = 0.5 * (a + b);
            stack.push((mid, b, depth + 1));
            stack.push((a, mid, depth + 1));
        }
    }
    Ok((current, ambiguous))
}

/// Locates the exceptional point on the `Δ = 0` axis by bisection over
/// `γ ∈ [0, 8Ω]`, using the numerical eigensolver to decide whether the
/// `(λ3, λ4)` pair is still complex.
pub fn find_ep(omega: AngularFreq, jumps: bool) -> Result<AngularFreq> {
    let o = omega.value();
    if !(o > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "omega must be > 0 to locate an EP, got {o}"
        )));
    }
    // Imaginary parts below this count as numerical noise around a real pair.
    let threshold = 1e-4 * o;
    let complex_pair = |g: f64| -> Result<bool> {
        let vals = eigen::eigenvalues4(&liouvillian_entries(o, 0.0, g, jumps))?;
        Ok(vals.iter().map(|z| z.im.abs()).fold(0.0, f64::max) > threshold)
    };
    let (mut lo, mut hi) = (0.0, 8.0 * o);
    if !complex_pair(lo)? || complex_pair(hi)? {
        return Err(Error::Eigen("EP not bracketed by [0, 8Ω]".into()));
    }
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if complex_pair(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    AngularFreq::new(0.5 * (lo + hi))
}
