//! Proportional voltage controller at the point of common coupling and the
//! reference power profiles it tracks.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Proportional coefficient `k` of the voltage controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlAction {
    pub k: f64,
}

impl ControlAction {
    pub fn new(k: f64) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(invalid(format!("control coefficient {k} must be finite and non-negative")));
        }
        Ok(ControlAction { k })
    }
}

/// Clamp bounds for the commanded bus voltage, p.u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageLimits {
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for VoltageLimits {
    fn default() -> Self {
        VoltageLimits { v_min: 0.9, v_max: 1.1 }
    }
}

impl VoltageLimits {
    pub fn new(v_min: f64, v_max: f64) -> Result<Self> {
        if !(0.0 < v_min && v_min <= 1.0 && 1.0 <= v_max) || !v_max.is_finite() {
            return Err(invalid(format!(
                "voltage limits [{v_min}, {v_max}] must satisfy 0 < v_min <= 1 <= v_max"
            )));
        }
        Ok(VoltageLimits { v_min, v_max })
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.v_min, self.v_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Constant,
    StepDown,
}

/// Reference power level (RPL) as a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProfile {
    pub kind: ProfileKind,
    pub level_before: f64,
    pub level_after: f64,
    pub step_time: f64,
}

impl ReferenceProfile {
    pub fn constant(level: f64) -> Result<Self> {
        if !(level > 0.0) || !level.is_finite() {
            return Err(invalid(format!("reference level {level} must be positive")));
        }
        Ok(ReferenceProfile {
            kind: ProfileKind::Constant,
            level_before: level,
            level_after: level,
            step_time: 0.0,
        })
    }

    pub fn step(before: f64, after: f64, step_time: f64) -> Result<Self> {
        if !(before > 0.0 && after > 0.0) || !before.is_finite() || !after.is_finite() {
            return Err(invalid(format!("reference levels {before}, {after} must be positive")));
        }
        if !(step_time >= 0.0) || !step_time.is_finite() {
            return Err(invalid(format!("step time {step_time} must be non-negative")));
        }
        Ok(ReferenceProfile { kind: ProfileKind::StepDown, level_before: before, level_after: after, step_time })
    }

    /// RPL at time `t`.
    pub fn at(&self, t: f64) -> f64 {
        match self.kind {
            ProfileKind::Constant => self.level_before,
            ProfileKind::StepDown if t < self.step_time => self.level_before,
            ProfileKind::StepDown => self.level_after,
        }
    }

    /// Distinct levels, ascending.
    pub fn levels(&self) -> Vec<f64> {
        let mut levels = vec![self.level_before];
        if self.kind == ProfileKind::StepDown && self.level_after != self.level_before {
            levels.push(self.level_after);
        }
        levels.sort_by(f64::total_cmp);
        levels
    }

    /// Checks that a step happens inside `[start, start + horizon)`.
    pub fn validate_window(&self, start: f64, horizon: f64) -> Result<()> {
        if self.kind == ProfileKind::StepDown
            && !(self.step_time >= start && self.step_time < start + horizon)
        {
            return Err(invalid(format!(
                "step time {} lies outside the simulated window [{start}, {})",
                self.step_time,
                start + horizon
            )));
        }
        Ok(())
    }
}

pub fn rpl_at(profile: &ReferenceProfile, t: f64) -> f64 {
    profile.at(t)
}

/// Proportional law `v = clamp(1 + sign·k·(rpl − apl))`.
///
/// `gain_sign` is `+1` for the usual orientation (raise voltage when demand is
/// below the reference). Flipping it exists for experimenting with the law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionalController {
    pub limits: VoltageLimits,
    pub gain_sign: f64,
}

impl Default for ProportionalController {
    fn default() -> Self {
        ProportionalController { limits: VoltageLimits::default(), gain_sign: 1.0 }
    }
}

impl ProportionalController {
    pub fn new(limits: VoltageLimits) -> Self {
        ProportionalController { limits, gain_sign: 1.0 }
    }

    pub fn voltage(&self, k: f64, apl: f64, rpl: f64) -> f64 {
        self.limits.clamp(1.0 + self.gain_sign * k * (rpl - apl))
    }
}

pub fn command_voltage(action: ControlAction, apl: f64, rpl: f64, limits: VoltageLimits) -> f64 {
    ProportionalController::new(limits).voltage(action.k, apl, rpl)
}

/// Nominal voltage applied when no controller is present.
pub fn baseline_voltage() -> f64 {
    1.0
}
