//! Work and heat along a trajectory.
//!
//! With `H(t) = c·Δ(t)|e⟩⟨e|` the internal energy is `U = c·Δ·ρ_ee`. On the
//! recorded grid the work done on the system is `Σ ρ_ee(t_i)·(H_{i+1} − H_i)`
//! and the heat is `Σ H_{i+1}·(ρ_ee(t_{i+1}) − ρ_ee(t_i))`, so the two add up
//! to `ΔU` term by term. The reported work is the work extracted,
//! `W_net = −Σ ρ dH`, split into `W_in` (steps with `dH > 0`) and `W_out`
//! (steps with `dH < 0`). `W_net > 0` is an engine, `W_net < 0` a
//! refrigerator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};

pub const DEFAULT_NEUTRAL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HConvention {
    /// `H = Δ|e⟩⟨e|`
    #[default]
    Supplement,
    /// `H = Δ|e⟩⟨e|/2`
    MainText,
}

impl HConvention {
    pub fn scale(self) -> f64 {
        match self {
            HConvention::Supplement => 1.0,
            HConvention::MainText => 0.5,
        }
    }
}

impl std::str::FromStr for HConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "supplement" => Ok(HConvention::Supplement),
            "main_text" | "maintext" => Ok(HConvention::MainText),
            _ => Err(Error::InvalidParameter(format!(
                "unknown energy convention '{s}' (expected supplement or main_text)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngineClass {
    #[serde(rename = "QHE")]
    Qhe,
    #[serde(rename = "QR")]
    Qr,
    Neutral,
}

impl fmt::Display for EngineClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineClass::Qhe => "QHE",
            EngineClass::Qr => "QR",
            EngineClass::Neutral => "Neutral",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoLedger {
    pub w_in: f64,
    pub w_out: f64,
    pub w_net: f64,
    pub q_total: f64,
    pub u_initial: f64,
    pub u_final: f64,
    /// Extracted work per stroke tag, indices 0..=5.
    pub stroke_work: [f64; 6],
    pub stroke_heat: [f64; 6],
    pub convention: HConvention,
}

impl ThermoLedger {
    pub fn delta_u(&self) -> f64 {
        self.u_final - self.u_initial
    }

    /// `|ΔU − (W_on + Q)|` with `W_on = −W_net`.
    pub fn first_law_residual(&self) -> f64 {
        (self.delta_u() - (-self.w_net + self.q_total)).abs()
    }
}

/// Serialized summary of a ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub w_in: f64,
    pub w_out: f64,
    pub w_net: f64,
    pub q_total: f64,
    pub classification: EngineClass,
    pub convention: HConvention,
}

impl LedgerRecord {
    pub fn new(ledger: &ThermoLedger, tol: f64) -> Self {
        LedgerRecord {
            w_in: ledger.w_in,
            w_out: ledger.w_out,
            w_net: ledger.w_net,
            q_total: ledger.q_total,
            classification: classify_engine(ledger, tol),
            convention: ledger.convention,
        }
    }
}

/// Work and heat from sampled `ρ_ee`, `Δ` and stroke tags.
pub fn accumulate_series(
    rho_ee: &[f64],
    delta: &[f64],
    strokes: &[u8],
    convention: HConvention,
) -> Result<ThermoLedger> {
    let n = rho_ee.len();
    if n == 0 || delta.len() != n || strokes.len() != n {
        return Err(Error::InvalidParameter(format!(
            "thermo series must be nonempty and of equal length ({n}, {}, {})",
            delta.len(),
            strokes.len()
        )));
    }
    let c = convention.scale();
    let h = |i: usize| c * delta[i];
    let mut ledger = ThermoLedger {
        w_in: 0.0,
        w_out: 0.0,
        w_net: 0.0,
        q_total: 0.0,
        u_initial: h(0) * rho_ee[0],
        u_final: h(n - 1) * rho_ee[n - 1],
        stroke_work: [0.0; 6],
        stroke_heat: [0.0; 6],
        convention,
    };
    for i in 0..n - 1 {
        let dh = h(i + 1) - h(i);
        let w = -rho_ee[i] * dh;
        if dh > 0.0 {
            ledger.w_in += w;
        } else if dh < 0.0 {
            ledger.w_out += w;
        }
        let q = h(i + 1) * (rho_ee[i + 1] - rho_ee[i]);
        ledger.q_total += q;
        let k = (strokes[i + 1] as usize).min(5);
        ledger.stroke_work[k] += w;
        ledger.stroke_heat[k] += q;
    }
    ledger.w_net = ledger.w_in + ledger.w_out;
    Ok(ledger)
}

pub fn accumulate(traj: &TrajectoryRecord, convention: HConvention) -> Result<ThermoLedger> {
    let rho: Vec<f64> = traj.states.iter().map(|s| s.rho_ee).collect();
    let delta: Vec<f64> = traj.params.iter().map(|p| p.delta()).collect();
    accumulate_series(&rho, &delta, &traj.stroke, convention)
}

pub fn classify_engine(ledger: &ThermoLedger, tol: f64) -> EngineClass {
    classify_work(ledger.w_net, tol)
}

pub fn classify_work(w_net: f64, tol: f64) -> EngineClass {
    if w_net > tol {
        EngineClass::Qhe
    } else if w_net < -tol {
        EngineClass::Qr
    } else {
        EngineClass::Neutral
    }
}
