//! Units, qubit states and state preparation.
//!
//! All frequencies are angular frequencies in rad/µs and all times are in µs.
//! A detuning quoted as `Δ/2π = 400 kHz` enters as `2π · 0.4 rad/µs`, while
//! decay rates are quoted directly in rad/µs.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use nalgebra::Vector4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the 2×2 determinant before a density matrix counts as
/// non-positive.
pub const POSITIVITY_SLACK: f64 = 1e-9;
pub const TRACE_TOLERANCE: f64 = 1e-9;

/// Angular frequency in rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngularFreq(f64);

impl AngularFreq {
    pub const ZERO: AngularFreq = AngularFreq(0.0);

    pub fn new(rad_per_us: f64) -> Result<Self> {
        if !rad_per_us.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "angular frequency must be finite, got {rad_per_us}"
            )));
        }
        Ok(AngularFreq(rad_per_us))
    }

    /// `f` in kHz, i.e. the value of `Δ/2π` or `Ω/2π`.
    pub fn from_khz(f: f64) -> Result<Self> {
        Self::new(2.0 * PI * f * 1e-3)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn as_khz(self) -> f64 {
        self.0 / (2.0 * PI) * 1e3
    }
}

impl fmt::Display for AngularFreq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rad/us", self.0)
    }
}

/// Instantaneous drive, detuning and effective decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega: AngularFreq,
    pub delta: AngularFreq,
    pub gamma: AngularFreq,
}

impl SystemParams {
    pub fn new(omega: f64, delta: f64, gamma: f64) -> Result<Self> {
        let p = SystemParams {
            omega: AngularFreq::new(omega)?,
            delta: AngularFreq::new(delta)?,
            gamma: AngularFreq::new(gamma)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega", self.omega.0),
            ("delta", self.delta.0),
            ("gamma", self.gamma.0),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        if self.gamma.0 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be >= 0, got {}",
                self.gamma.0
            )));
        }
        if self.omega.0 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "omega must be >= 0, got {}",
                self.omega.0
            )));
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        self.omega.0
    }

    pub fn delta(&self) -> f64 {
        self.delta.0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.0
    }
}

/// 2×2 density matrix in the `{|e⟩, |g⟩}` basis. `ρ_ge` is implied as the
/// conjugate of `rho_eg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitDensity {
    pub rho_ee: f64,
    pub rho_gg: f64,
    pub rho_eg: Complex64,
}

impl QubitDensity {
    pub fn new(rho_ee: f64, rho_gg: f64, rho_eg: Complex64) -> Result<Self> {
        let rho = QubitDensity {
            rho_ee,
            rho_gg,
            rho_eg,
        };
        rho.validate()?;
        Ok(rho)
    }

    pub fn ground() -> Self {
        QubitDensity {
            rho_ee: 0.0,
            rho_gg: 1.0,
            rho_eg: Complex64::new(0.0, 0.0),
        }
    }

    pub fn maximally_mixed() -> Self {
        QubitDensity {
            rho_ee: 0.5,
            rho_gg: 0.5,
            rho_eg: Complex64::new(0.0, 0.0),
        }
    }

    pub fn projector(psi: &PureState) -> Self {
        QubitDensity {
            rho_ee: psi.amp_e.norm_sqr(),
            rho_gg: psi.amp_g.norm_sqr(),
            rho_eg: psi.amp_e * psi.amp_g.conj(),
        }
    }

    pub fn rho_ge(&self) -> Complex64 {
        self.rho_eg.conj()
    }

    pub fn trace(&self) -> f64 {
        self.rho_ee + self.rho_gg
    }

    /// `ρ_ee ρ_gg − |ρ_eg|²`; non-negative for a positive semidefinite state
    /// with non-negative diagonal.
    pub fn det(&self) -> f64 {
        self.rho_ee * self.rho_gg - self.rho_eg.norm_sqr()
    }

    pub fn purity(&self) -> f64 {
        self.rho_ee * self.rho_ee + self.rho_gg * self.rho_gg + 2.0 * self.rho_eg.norm_sqr()
    }

    /// Rescaled to unit trace. Used for no-jump dynamics where the norm leaks.
    pub fn normalized(&self) -> Self {
        let tr = self.trace();
        QubitDensity {
            rho_ee: self.rho_ee / tr,
            rho_gg: self.rho_gg / tr,
            rho_eg: self.rho_eg / tr,
        }
    }

    pub fn is_positive(&self, slack: f64) -> bool {
        self.det() >= -slack && self.rho_ee >= -slack && self.rho_gg >= -slack
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_ee.is_finite() && self.rho_gg.is_finite() && self.rho_eg.is_finite()) {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        if (self.trace() - 1.0).abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "trace {} differs from 1",
                self.trace()
            )));
        }
        if !self.is_positive(POSITIVITY_SLACK) {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (det = {:e})",
                self.det()
            )));
        }
        Ok(())
    }

    /// Vectorized as `(ρ_ee, ρ_eg, ρ_ge, ρ_gg)`.
    pub fn to_vector(&self) -> Vector4<Complex64> {
        Vector4::new(
            Complex64::new(self.rho_ee, 0.0),
            self.rho_eg,
            self.rho_eg.conj(),
            Complex64::new(self.rho_gg, 0.0),
        )
    }

    /// Inverse of [`to_vector`](Self::to_vector). The Hermitian part is kept:
    /// diagonal imaginary parts are dropped and `ρ_eg` is averaged with
    /// `conj(ρ_ge)`. Use [`hermiticity_error`] to measure what was dropped.
    pub fn from_vector(v: &Vector4<Complex64>) -> Self {
        QubitDensity {
            rho_ee: v[0].re,
            rho_gg: v[3].re,
            rho_eg: (v[1] + v[2].conj()) * 0.5,
        }
    }

    pub fn max_abs_diff(&self, other: &QubitDensity) -> f64 {
        (self.rho_ee - other.rho_ee)
            .abs()
            .max((self.rho_gg - other.rho_gg).abs())
            .max((self.rho_eg - other.rho_eg).norm())
    }
}

/// Largest element-wise deviation of a vectorized state from Hermiticity.
pub fn hermiticity_error(v: &Vector4<Complex64>) -> f64 {
    v[0].im
        .abs()
        .max(v[3].im.abs())
        .max((v[1] - v[2].conj()).norm())
}

/// Normalized qubit amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    pub amp_e: Complex64,
    pub amp_g: Complex64,
}

impl PureState {
    pub fn new(amp_e: Complex64, amp_g: Complex64) -> Result<Self> {
        let n = amp_e.norm_sqr() + amp_g.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!(
                "amplitudes not normalized (norm² = {n})"
            )));
        }
        Ok(PureState { amp_e, amp_g })
    }

    /// Normalizes `(amp_e, amp_g)`; fails on the zero vector.
    pub fn normalize(amp_e: Complex64, amp_g: Complex64) -> Result<Self> {
        let n = (amp_e.norm_sqr() + amp_g.norm_sqr()).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidState("cannot normalize zero vector".into()));
        }
        Ok(PureState {
            amp_e: amp_e / n,
            amp_g: amp_g / n,
        })
    }

    pub fn excited() -> Self {
        PureState {
            amp_e: Complex64::new(1.0, 0.0),
            amp_g: Complex64::new(0.0, 0.0),
        }
    }

    pub fn ground() -> Self {
        PureState {
            amp_e: Complex64::new(0.0, 0.0),
            amp_g: Complex64::new(1.0, 0.0),
        }
    }

    /// State orthogonal to `self`, `(−conj(b), conj(a))`.
    pub fn orthogonal(&self) -> Self {
        PureState {
            amp_e: -self.amp_g.conj(),
            amp_g: self.amp_e.conj(),
        }
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amp_e.conj() * other.amp_e + self.amp_g.conj() * other.amp_g
    }
}

/// `(|e⟩ + |g⟩)/√2`
pub fn make_psi_plus() -> PureState {
    PureState {
        amp_e: Complex64::new(FRAC_1_SQRT_2, 0.0),
        amp_g: Complex64::new(FRAC_1_SQRT_2, 0.0),
    }
}

/// `(|e⟩ − |g⟩)/√2`
pub fn make_psi_minus() -> PureState {
    PureState {
        amp_e: Complex64::new(FRAC_1_SQRT_2, 0.0),
        amp_g: Complex64::new(-FRAC_1_SQRT_2, 0.0),
    }
}

/// Which of the two superposition states a loop starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartLabel {
    Plus,
    Minus,
}

impl StartLabel {
    pub fn state(self) -> PureState {
        match self {
            StartLabel::Plus => make_psi_plus(),
            StartLabel::Minus => make_psi_minus(),
        }
    }

    pub fn other(self) -> Self {
        match self {
            StartLabel::Plus => StartLabel::Minus,
            StartLabel::Minus => StartLabel::Plus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StartLabel::Plus => "plus",
            StartLabel::Minus => "minus",
        }
    }
}

impl fmt::Display for StartLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StartLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plus" | "+" | "psi_plus" => Ok(StartLabel::Plus),
            "minus" | "-" | "psi_minus" => Ok(StartLabel::Minus),
            _ => Err(Error::InvalidParameter(format!(
                "unknown start state '{s}' (expected plus or minus)"
            ))),
        }
    }
}

/// How the initial state is prepared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PrepMode {
    Ideal,
    /// Depolarized preparation reaching the given fidelity to the target.
    Experimental {
        fidelity: f64,
    },
}

impl PrepMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PrepMode::Ideal => Ok(()),
            PrepMode::Experimental { fidelity } => {
                if fidelity.is_finite() && fidelity > 0.5 && fidelity <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "preparation fidelity must lie in (0.5, 1], got {fidelity}"
                    )))
                }
            }
        }
    }
}

/// Prepares `target` either exactly or as `(1−ε)|ψ⟩⟨ψ| + ε·I/2` with
/// `ε = 2(1−f)`, which has unit trace and fidelity `f` to the target.
pub fn prepare_state(target: &PureState, mode: PrepMode) -> Result<QubitDensity> {
    mode.validate()?;
    let pure = QubitDensity::projector(target);
    match mode {
        PrepMode::Ideal => Ok(pure),
        PrepMode::Experimental { fidelity } => {
            let eps = 2.0 * (1.0 - fidelity);
            Ok(QubitDensity {
                rho_ee: (1.0 - eps) * pure.rho_ee + 0.5 * eps,
                rho_gg: (1.0 - eps) * pure.rho_gg + 0.5 * eps,
                rho_eg: pure.rho_eg * (1.0 - eps),
            })
        }
    }
}

/// `⟨ψ|ρ|ψ⟩`
pub fn fidelity(rho: &QubitDensity, psi: &PureState) -> f64 {
    let (a, b) = (psi.amp_e, psi.amp_g);
    let cross = a.conj() * rho.rho_eg * b;
    a.norm_sqr() * rho.rho_ee + b.norm_sqr() * rho.rho_gg + 2.0 * cross.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn superposition_states() {
        let p = make_psi_plus();
        let m = make_psi_minus();
        assert_abs_diff_eq!(p.amp_e.re, FRAC_1_SQRT_2);
        assert_abs_diff_eq!(p.amp_g.re, FRAC_1_SQRT_2);
        assert_abs_diff_eq!(m.amp_e.re, FRAC_1_SQRT_2);
        assert_abs_diff_eq!(m.amp_g.re, -FRAC_1_SQRT_2);
        assert_abs_diff_eq!(p.inner(&m).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ideal_projector() {
        let rho = prepare_state(&make_psi_plus(), PrepMode::Ideal).unwrap();
        assert_abs_diff_eq!(rho.rho_ee, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.rho_gg, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.rho_eg.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.rho_eg.im, 0.0);
        assert_abs_diff_eq!(fidelity(&rho, &make_psi_plus()), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn experimental_preparation() {
        let mode = PrepMode::Experimental { fidelity: 0.985 };
        let rho = prepare_state(&make_psi_plus(), mode).unwrap();
        assert_abs_diff_eq!(fidelity(&rho, &make_psi_plus()), 0.985, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity(&rho, &make_psi_minus()), 0.015, epsilon = 1e-12);

        // (1 − ε)/2 · (−1) with ε = 0.03
        let rho = prepare_state(&make_psi_minus(), mode).unwrap();
        assert_abs_diff_eq!(rho.rho_eg.re, -0.485, epsilon = 1e-12);
    }

    #[test]
    fn rejects_low_fidelity() {
        for f in [0.5, 0.2, 0.0, -1.0, 1.5, f64::NAN] {
            let mode = PrepMode::Experimental { fidelity: f };
            assert!(prepare_state(&make_psi_plus(), mode).is_err(), "{f}");
        }
    }

    #[test]
    fn mixed_state_fidelity() {
        let rho = QubitDensity::maximally_mixed();
        assert_abs_diff_eq!(fidelity(&rho, &make_psi_minus()), 0.5);
    }

    #[test]
    fn khz_conversion_matches_ep_arithmetic() {
        let omega = AngularFreq::from_khz(120.0).unwrap().value();
        assert!((4.0 * omega - 3.02).abs() < 0.01);
        assert!((2.0 * omega - 1.51).abs() < 0.01);
    }

    #[test]
    fn params_reject_negative_decay() {
        assert!(SystemParams::new(1.0, -3.0, 0.0).is_ok());
        assert!(SystemParams::new(1.0, 0.0, -0.1).is_err());
        assert!(SystemParams::new(-1.0, 0.0, 0.1).is_err());
        assert!(SystemParams::new(1.0, f64::INFINITY, 0.1).is_err());
    }

    #[test]
    fn vector_roundtrip() {
        let rho = QubitDensity::new(0.3, 0.7, Complex64::new(0.1, -0.2)).unwrap();
        let v = rho.to_vector();
        assert_eq!(hermiticity_error(&v), 0.0);
        assert_eq!(QubitDensity::from_vector(&v), rho);
    }

    fn arb_state() -> impl Strategy<Value = PureState> {
        (0.0..std::f64::consts::PI, 0.0..2.0 * PI).prop_map(|(theta, phi)| {
            PureState::new(
                Complex64::new((theta / 2.0).cos(), 0.0),
                Complex64::from_polar((theta / 2.0).sin(), phi),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn prepared_states_are_physical(psi in arb_state(), f in 0.5000001..=1.0f64) {
            let rho = prepare_state(&psi, PrepMode::Experimental { fidelity: f }).unwrap();
            prop_assert!(rho.validate().is_ok());
            prop_assert!((fidelity(&rho, &psi) - f).abs() < 1e-12);
        }

        #[test]
        fn fidelities_complete(psi in arb_state(), f in 0.5000001..=1.0f64, target in arb_state()) {
            let rho = prepare_state(&psi, PrepMode::Experimental { fidelity: f }).unwrap();
            let sum = fidelity(&rho, &target) + fidelity(&rho, &target.orthogonal());
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
