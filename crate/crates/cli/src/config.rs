//! Run configuration: presets, the JSON config document and flat overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use chiral_qhe::analysis::DEFAULT_VERDICT_THRESHOLD;
use chiral_qhe::dynamics::DEFAULT_DT;
use chiral_qhe::protocol::{build_schedule, Direction, IsochoricMode, LoopConfig};
use chiral_qhe::state::{AngularFreq, PrepMode, StartLabel};
use chiral_qhe::surface::GridSpec;
use chiral_qhe::thermo::{HConvention, DEFAULT_NEUTRAL_TOL};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{usage, CliError, CliResult};

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Default,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
pub enum PresetName {
    #[default]
    #[serde(rename = "paper-default")]
    #[value(name = "paper-default")]
    PaperDefault,
    #[serde(rename = "figS4")]
    #[value(name = "figS4")]
    FigS4,
    #[serde(rename = "figS5")]
    #[value(name = "figS5")]
    FigS5,
    #[serde(rename = "figS6")]
    #[value(name = "figS6")]
    FigS6,
    #[serde(rename = "figS8")]
    #[value(name = "figS8")]
    FigS8,
    #[serde(rename = "figS9")]
    #[value(name = "figS9")]
    FigS9,
}

impl PresetName {
    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::PaperDefault => "paper-default",
            PresetName::FigS4 => "figS4",
            PresetName::FigS5 => "figS5",
            PresetName::FigS6 => "figS6",
            PresetName::FigS8 => "figS8",
            PresetName::FigS9 => "figS9",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Csv,
    Json,
    Svg,
}

impl Emit {
    pub const ALL: [Emit; 3] = [Emit::Csv, Emit::Json, Emit::Svg];
}

/// The config document. Every field is optional; flags given on the command
/// line take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub preset: Option<PresetName>,
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit: Option<BTreeSet<Emit>>,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> CliResult<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| usage(format!("config: {e}")))?;
        for key in cfg.overrides.keys() {
            if !OVERRIDE_KEYS.contains(&key.as_str()) {
                return Err(unknown_key(key));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| match e {
            CliError::Usage(m) => usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn emit_set(&self) -> BTreeSet<Emit> {
        self.emit
            .clone()
            .unwrap_or_else(|| Emit::ALL.into_iter().collect())
    }
}

pub const OVERRIDE_KEYS: &[&str] = &[
    "omega_khz",
    "delta_min_khz",
    "delta_max_khz",
    "gamma_min",
    "gamma_max",
    "t1",
    "t3",
    "t5",
    "isochoric",
    "n_steps",
    "step_duration",
    "ramp_duration",
    "direction",
    "start",
    "prep",
    "prep_fidelity",
    "jumps",
    "convention",
    "threshold",
    "neutral_tol",
    "dt",
    "stride",
    "gamma_max_ratios",
    "t5_values",
    "gamma_min_values",
    "surface_resolution",
    "surface_delta_khz",
    "surface_gamma_min",
    "surface_gamma_max",
];

fn unknown_key(key: &str) -> CliError {
    usage(format!(
        "unknown override key '{key}' (known keys: {})",
        OVERRIDE_KEYS.join(", ")
    ))
}

/// `γ_max/4Ω` values of the transition sweep.
pub const FIG_S4_RATIOS: &[f64] = &[
    0.005, 0.0075, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1, 0.15, 0.2, 0.3, 0.4,
    0.5,
];

pub const FIG_S8_T5: &[f64] = &[
    1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 60.0, 80.0,
    100.0, 150.0, 200.0,
];

pub const FIG_S8_GAMMA_MIN: &[f64] = &[0.0, 0.025, 0.05];

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Values of `γ_max/4Ω`.
    GammaMaxRatio(Vec<f64>),
    T5 {
        values: Vec<f64>,
        gamma_min_values: Vec<f64>,
    },
}

/// Fully resolved parameters of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub preset: PresetName,
    pub loop_cfg: LoopConfig,
    pub jumps: bool,
    pub convention: HConvention,
    pub threshold: f64,
    pub neutral_tol: f64,
    pub dt: f64,
    /// Keep every `stride`-th trajectory sample in the CSV.
    pub stride: usize,
    pub sweep: SweepAxis,
    pub grid: GridSpec,
}

impl Settings {
    pub fn preset(name: PresetName) -> Self {
        let (loop_cfg, jumps, sweep) = match name {
            PresetName::PaperDefault => (LoopConfig::paper_default(), true, ratio_axis()),
            PresetName::FigS4 => (LoopConfig::fig_s4(), true, ratio_axis()),
            PresetName::FigS5 => (LoopConfig::fig_s5(), true, ratio_axis()),
            PresetName::FigS6 => (LoopConfig::fig_s6(), true, ratio_axis()),
            PresetName::FigS8 => (LoopConfig::fig_s8(), true, t5_axis()),
            PresetName::FigS9 => (LoopConfig::fig_s8(), false, t5_axis()),
        };
        Settings {
            preset: name,
            loop_cfg,
            jumps,
            convention: HConvention::Supplement,
            threshold: DEFAULT_VERDICT_THRESHOLD,
            neutral_tol: DEFAULT_NEUTRAL_TOL,
            dt: DEFAULT_DT,
            stride: 100,
            sweep,
            grid: GridSpec::paper_default(41),
        }
    }

    pub fn resolve(cfg: &RunConfig) -> CliResult<Self> {
        let mut s = Settings::preset(cfg.preset.unwrap_or_default());
        for (key, value) in &cfg.overrides {
            s.apply(key, value)?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> CliResult<()> {
        build_schedule(&self.loop_cfg)?;
        self.grid.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(usage(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.stride == 0 {
            return Err(usage("stride must be >= 1"));
        }
        if !(self.threshold > 0.5 && self.threshold <= 1.0) {
            return Err(usage(format!(
                "threshold must lie in (0.5, 1], got {}",
                self.threshold
            )));
        }
        if !(self.neutral_tol.is_finite() && self.neutral_tol >= 0.0) {
            return Err(usage(format!(
                "neutral_tol must be >= 0, got {}",
                self.neutral_tol
            )));
        }
        Ok(())
    }

    /// Applies one override. Keys follow [`OVERRIDE_KEYS`].
    pub fn apply(&mut self, key: &str, value: &Value) -> CliResult<()> {
        let c = &mut self.loop_cfg;
        match key {
            "omega_khz" => c.omega = khz(key, value)?,
            "delta_min_khz" => c.delta_min = khz(key, value)?,
            "delta_max_khz" => c.delta_max = khz(key, value)?,
            "gamma_min" => c.gamma_min = rad(key, value)?,
            "gamma_max" => c.gamma_max = rad(key, value)?,
            "t1" => c.t1 = num(key, value)?,
            "t3" => c.t3 = num(key, value)?,
            "t5" => c.t5 = num(key, value)?,
            "isochoric" => {
                c.isochoric = serde_json::from_value(value.clone())
                    .map_err(|e| usage(format!("override 'isochoric': {e}")))?
            }
            "n_steps" | "step_duration" => {
                let IsochoricMode::Stepped {
                    n_steps,
                    step_duration,
                } = c.isochoric
                else {
                    return Err(usage(format!(
                        "override '{key}' needs stepped isochoric strokes"
                    )));
                };
                c.isochoric = if key == "n_steps" {
                    IsochoricMode::Stepped {
                        n_steps: count(key, value)?,
                        step_duration,
                    }
                } else {
                    IsochoricMode::Stepped {
                        n_steps,
                        step_duration: num(key, value)?,
                    }
                };
            }
            "ramp_duration" => {
                c.isochoric = IsochoricMode::LinearRamp {
                    duration: num(key, value)?,
                }
            }
            "direction" => c.direction = parsed::<Direction>(key, value)?,
            "start" => c.start = parsed::<StartLabel>(key, value)?,
            "prep" => match text(key, value)? {
                "ideal" => c.prep = PrepMode::Ideal,
                other => {
                    return Err(usage(format!(
                        "override 'prep': unknown mode '{other}' (expected ideal)"
                    )))
                }
            },
            "prep_fidelity" => {
                c.prep = PrepMode::Experimental {
                    fidelity: num(key, value)?,
                }
            }
            "jumps" => self.jumps = boolean(key, value)?,
            "convention" => self.convention = parsed::<HConvention>(key, value)?,
            "threshold" => self.threshold = num(key, value)?,
            "neutral_tol" => self.neutral_tol = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "stride" => self.stride = count(key, value)?,
            "gamma_max_ratios" => self.sweep = SweepAxis::GammaMaxRatio(list(key, value)?),
            "t5_values" => {
                let values = list(key, value)?;
                self.sweep = match &self.sweep {
                    SweepAxis::T5 {
                        gamma_min_values, ..
                    } => SweepAxis::T5 {
                        values,
                        gamma_min_values: gamma_min_values.clone(),
                    },
                    SweepAxis::GammaMaxRatio(_) => SweepAxis::T5 {
                        values,
                        gamma_min_values: FIG_S8_GAMMA_MIN.to_vec(),
                    },
                };
            }
            "gamma_min_values" => {
                let gamma_min_values = list(key, value)?;
                self.sweep = match &self.sweep {
                    SweepAxis::T5 { values, .. } => SweepAxis::T5 {
                        values: values.clone(),
                        gamma_min_values,
                    },
                    SweepAxis::GammaMaxRatio(_) => SweepAxis::T5 {
                        values: FIG_S8_T5.to_vec(),
                        gamma_min_values,
                    },
                };
            }
            "surface_resolution" => {
                let n = count(key, value)?;
                self.grid.n_delta = n;
                self.grid.n_gamma = n;
            }
            "surface_delta_khz" => {
                let d = khz(key, value)?.value().abs();
                self.grid.delta_min = -d;
                self.grid.delta_max = d;
            }
            "surface_gamma_min" => self.grid.gamma_min = num(key, value)?,
            "surface_gamma_max" => self.grid.gamma_max = num(key, value)?,
            _ => return Err(unknown_key(key)),
        }
        Ok(())
    }

    /// `γ_max` values of a ratio sweep, in the same (ascending, unique) order
    /// as the returned ratios.
    pub fn gamma_max_axis(&self, ratios: &[f64]) -> CliResult<(Vec<f64>, Vec<f64>)> {
        if ratios.is_empty() {
            return Err(usage("sweep axis is empty"));
        }
        let mut r = ratios.to_vec();
        if let Some(bad) = r.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(usage(format!("gamma_max_ratios: invalid value {bad}")));
        }
        r.sort_by(f64::total_cmp);
        r.dedup();
        let four_omega = 4.0 * self.loop_cfg.omega.value();
        let g = r.iter().map(|x| x * four_omega).collect();
        Ok((r, g))
    }
}

fn ratio_axis() -> SweepAxis {
    SweepAxis::GammaMaxRatio(FIG_S4_RATIOS.to_vec())
}

fn t5_axis() -> SweepAxis {
    SweepAxis::T5 {
        values: FIG_S8_T5.to_vec(),
        gamma_min_values: FIG_S8_GAMMA_MIN.to_vec(),
    }
}

fn num(key: &str, v: &Value) -> CliResult<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .filter(|x: &f64| x.is_finite())
    .ok_or_else(|| {
        usage(format!(
            "override '{key}': expected a finite number, got {v}"
        ))
    })
}

fn count(key: &str, v: &Value) -> CliResult<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|x| x as usize),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .ok_or_else(|| {
        usage(format!(
            "override '{key}': expected a non-negative integer, got {v}"
        ))
    })
}

fn boolean(key: &str, v: &Value) -> CliResult<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .ok_or_else(|| usage(format!("override '{key}': expected true or false, got {v}")))
}

fn text<'a>(key: &str, v: &'a Value) -> CliResult<&'a str> {
    v.as_str()
        .ok_or_else(|| usage(format!("override '{key}': expected a string, got {v}")))
}

fn parsed<T>(key: &str, v: &Value) -> CliResult<T>
where
    T: std::str::FromStr,
    T::Err: fmt::Display,
{
    text(key, v)?
        .parse()
        .map_err(|e| usage(format!("override '{key}': {e}")))
}

/// A JSON array of numbers, or a comma separated string.
fn list(key: &str, v: &Value) -> CliResult<Vec<f64>> {
    let items: Vec<Value> = match v {
        Value::Array(a) => a.clone(),
        Value::String(s) if s.trim().is_empty() => Vec::new(),
        Value::String(s) => s.split(',').map(|x| Value::String(x.to_string())).collect(),
        _ => {
            return Err(usage(format!(
                "override '{key}': expected a list of numbers, got {v}"
            )))
        }
    };
    items.iter().map(|x| num(key, x)).collect()
}

fn khz(key: &str, v: &Value) -> CliResult<AngularFreq> {
    Ok(AngularFreq::from_khz(num(key, v)?)?)
}

fn rad(key: &str, v: &Value) -> CliResult<AngularFreq> {
    Ok(AngularFreq::new(num(key, v)?)?)
}

/// Parses `key=value`. The value is read as JSON when possible, otherwise
/// kept as a string.
pub fn parse_assignment(s: &str) -> CliResult<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("expected key=value, got '{s}'")))?;
    let key = k.trim().to_string();
    if !OVERRIDE_KEYS.contains(&key.as_str()) {
        return Err(unknown_key(&key));
    }
    let value =
        serde_json::from_str(v.trim()).unwrap_or_else(|_| Value::String(v.trim().to_string()));
    Ok((key, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn unknown_top_level_key_is_named() {
        let err = RunConfig::from_json_str(r#"{"preset": "figS4", "outputdir": "x"}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("outputdir"), "{err}");
    }

    #[test]
    fn unknown_override_is_named() {
        let err = RunConfig::from_json_str(r#"{"overrides": {"gama_max": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("'gama_max'"), "{err}");
        assert!(parse_assignment("t6=3")
            .unwrap_err()
            .to_string()
            .contains("'t6'"));
    }

    #[test]
    fn presets_parse_by_name() {
        for name in ["paper-default", "figS4", "figS5", "figS6", "figS8", "figS9"] {
            let cfg = RunConfig::from_json_str(&format!(r#"{{"preset": "{name}"}}"#)).unwrap();
            assert_eq!(cfg.preset.unwrap().as_str(), name);
            Settings::resolve(&cfg).unwrap();
        }
    }

    #[test]
    fn s8_and_s9_differ_only_in_jumps() {
        let mut a = Settings::preset(PresetName::FigS8);
        let b = Settings::preset(PresetName::FigS9);
        assert!(a.jumps && !b.jumps);
        a.jumps = false;
        a.preset = b.preset;
        assert_eq!(a, b);
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_json_str(
            r#"{"preset": "paper-default",
                "overrides": {"direction": "ccw", "start": "minus", "gamma_max": 1.43,
                              "t5_values": [10, 20], "jumps": false, "ramp_duration": 50,
                              "surface_resolution": 9}}"#,
        )
        .unwrap();
        let s = Settings::resolve(&cfg).unwrap();
        assert_eq!(s.loop_cfg.direction, Direction::Ccw);
        assert_eq!(s.loop_cfg.start, StartLabel::Minus);
        assert_eq!(s.loop_cfg.gamma_max.value(), 1.43);
        assert_eq!(
            s.loop_cfg.isochoric,
            IsochoricMode::LinearRamp { duration: 50.0 }
        );
        assert!(!s.jumps);
        assert_eq!(s.grid.n_delta, 9);
        assert_eq!(
            s.sweep,
            SweepAxis::T5 {
                values: vec![10.0, 20.0],
                gamma_min_values: FIG_S8_GAMMA_MIN.to_vec()
            }
        );
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let mut s = Settings::preset(PresetName::PaperDefault);
        assert_eq!(s.apply("t1", &json!("abc")).unwrap_err().exit_code(), 2);
        assert_eq!(
            s.apply("direction", &json!("up")).unwrap_err().exit_code(),
            2
        );
        assert_eq!(s.apply("jumps", &json!(3)).unwrap_err().exit_code(), 2);
        s.apply("t1", &json!(-1.0)).unwrap();
        assert_eq!(s.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn list_accepts_comma_text_and_empty() {
        assert_eq!(list("k", &json!("0.1, 0.2")).unwrap(), vec![0.1, 0.2]);
        assert!(list("k", &json!("")).unwrap().is_empty());
        let s = Settings::preset(PresetName::FigS4);
        assert_eq!(s.gamma_max_axis(&[]).unwrap_err().exit_code(), 2);
        let (r, g) = s.gamma_max_axis(&[0.5, 0.1, 0.1]).unwrap();
        assert_eq!(r, vec![0.1, 0.5]);
        assert!((g[0] - 0.4 * s.loop_cfg.omega.value()).abs() < 1e-15);
    }

    #[test]
    fn assignment_values() {
        assert_eq!(parse_assignment("t5=50").unwrap(), ("t5".into(), json!(50)));
        assert_eq!(
            parse_assignment("direction=ccw").unwrap(),
            ("direction".into(), json!("ccw"))
        );
        assert_eq!(
            parse_assignment("t5_values=[1,2]").unwrap().1,
            json!([1, 2])
        );
    }
}
