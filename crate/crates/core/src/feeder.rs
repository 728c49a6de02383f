//! Feeder of thermostatically controlled loads (TCLs) behind a single bus.
//!
//! Each load follows a linear first-order thermal equation between switching
//! events,
//!
//! ```text
//! dθ/dt = (θ − θ_a + R·P_elec) / (R·C_eff),    P_elec = switch · g0 · v²
//! ```
//!
//! and a thermostat with hysteresis band `[θ_min, θ_max]`. The bus voltage `v`
//! is commanded from outside and enters both the electrical draw and the
//! thermal balance, which is what lets a voltage controller shift duty cycles.
//!
//! Integration is fixed-step explicit Euler with a switch check after every
//! sub-step. Between switch events the equation has the closed form
//! `θ(t) = θ* + (θ0 − θ*)·exp(t / (R·C_eff))` with `θ* = θ_a − R·P_elec`; see
//! [`closed_form_theta`] and [`closed_form_crossing_time`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Number of loads on the feeder.
pub const N_LOADS: usize = 20;

/// Thermal capacitance of each load, in load order.
pub const CAPACITANCES: [f64; N_LOADS] = [
    2.0, 2.2286, 2.4571, 2.6857, 2.9143, 3.1429, 3.3714, 3.6, 3.8286, 4.0571, 4.2857, 4.5143,
    4.7429, 4.9714, 5.2, 5.4286, 5.6571, 5.8857, 6.1143, 6.3429,
];

/// Width of the stochastic capacitance interval `[C, C + range]`.
pub const CAPACITANCE_RANGE: f64 = 4.5;

/// Default Euler sub-step, seconds.
pub const DEFAULT_SUBSTEP_S: f64 = 0.01;

/// Initial temperature shared by every load.
pub const INITIAL_THETA: f64 = 20.0;

/// Loads `0..N_INITIALLY_ON` start switched on.
pub const N_INITIALLY_ON: usize = 10;

/// Physical constants of a single load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TclParams {
    /// °C/kW
    pub thermal_resistance: f64,
    /// p.u.
    pub rated_power: f64,
    /// °C
    pub ambient: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub capacitance: f64,
    /// p.u.; electrical draw is `g0 · v²` while on.
    pub conductance: f64,
}

impl TclParams {
    pub fn with_capacitance(capacitance: f64) -> Self {
        TclParams {
            thermal_resistance: 200.0,
            rated_power: 0.14,
            ambient: 32.0,
            theta_min: 19.75,
            theta_max: 20.25,
            capacitance,
            conductance: 0.14,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min < self.theta_max) {
            return Err(invalid(format!(
                "theta_min {} must be below theta_max {}",
                self.theta_min, self.theta_max
            )));
        }
        if !(self.capacitance > 0.0) {
            return Err(invalid(format!("capacitance {} must be positive", self.capacitance)));
        }
        if !(self.thermal_resistance > 0.0) {
            return Err(invalid(format!(
                "thermal resistance {} must be positive",
                self.thermal_resistance
            )));
        }
        if !(self.conductance >= 0.0) {
            return Err(invalid(format!("conductance {} must be non-negative", self.conductance)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Switch {
    Off,
    On,
}

impl Switch {
    pub fn as_f64(self) -> f64 {
        match self {
            Switch::Off => 0.0,
            Switch::On => 1.0,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Switch::Off => 0,
            Switch::On => 1,
        }
    }
}

/// Evolving state of one load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TclState {
    pub theta: f64,
    pub switch: Switch,
    /// `C` in the deterministic case, `C + u·range` in the stochastic case.
    pub effective_capacitance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederConfig {
    tcl_params: Vec<TclParams>,
    pub stochastic: bool,
    pub capacitance_range: f64,
    pub rng_seed: u64,
}

impl FeederConfig {
    pub fn new(
        tcl_params: Vec<TclParams>,
        stochastic: bool,
        capacitance_range: f64,
        rng_seed: u64,
    ) -> Result<Self> {
        if tcl_params.len() != N_LOADS {
            return Err(invalid(format!(
                "feeder needs exactly {N_LOADS} loads, got {}",
                tcl_params.len()
            )));
        }
        for p in &tcl_params {
            p.validate()?;
        }
        if !(capacitance_range >= 0.0) {
            return Err(invalid(format!(
                "capacitance range {capacitance_range} must be non-negative"
            )));
        }
        Ok(FeederConfig { tcl_params, stochastic, capacitance_range, rng_seed })
    }

    pub fn tcl_params(&self) -> &[TclParams] {
        &self.tcl_params
    }

    /// Same feeder, different seed for the stochastic capacitance draw.
    pub fn with_seed(&self, rng_seed: u64) -> Self {
        FeederConfig { rng_seed, ..self.clone() }
    }
}

/// The reference 20-load feeder.
pub fn default_feeder(stochastic: bool, seed: u64) -> FeederConfig {
    FeederConfig {
        tcl_params: CAPACITANCES.iter().map(|&c| TclParams::with_capacitance(c)).collect(),
        stochastic,
        capacitance_range: CAPACITANCE_RANGE,
        rng_seed: seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederState {
    pub tcl_states: Vec<TclState>,
    pub time_s: f64,
    /// Voltage applied over the most recent step (1.0 before the first step).
    pub bus_voltage_v: f64,
}

/// Initial feeder state: first ten loads on, the rest off, all at 20 °C.
///
/// In the stochastic case each load draws `u ~ U[0, 1]` once from the
/// config's seed and keeps `C + u·range` for the whole episode.
pub fn init_states(config: &FeederConfig) -> FeederState {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let tcl_states = config
        .tcl_params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let extra = if config.stochastic {
                rng.gen::<f64>() * config.capacitance_range
            } else {
                0.0
            };
            TclState {
                theta: INITIAL_THETA,
                switch: if i < N_INITIALLY_ON { Switch::On } else { Switch::Off },
                effective_capacitance: p.capacitance + extra,
            }
        })
        .collect();
    FeederState { tcl_states, time_s: 0.0, bus_voltage_v: 1.0 }
}

/// Electrical draw `switch · g0 · v²`.
pub fn tcl_power(state: &TclState, params: &TclParams, voltage: f64) -> f64 {
    state.switch.as_f64() * params.conductance * voltage * voltage
}

/// Temperature rate of change in °C/s.
pub fn thermal_derivative(state: &TclState, params: &TclParams, voltage: f64) -> Result<f64> {
    if !(state.effective_capacitance > 0.0) {
        return Err(invalid(format!(
            "effective capacitance {} must be positive",
            state.effective_capacitance
        )));
    }
    Ok(derivative(state, params, voltage))
}

#[inline]
fn derivative(state: &TclState, params: &TclParams, voltage: f64) -> f64 {
    let r = params.thermal_resistance;
    (state.theta - params.ambient + r * tcl_power(state, params, voltage))
        / (r * state.effective_capacitance)
}

/// Thermostat with hysteresis: on below `θ_min`, off above `θ_max`, unchanged
/// inside the band.
pub fn update_switch(state: &TclState, params: &TclParams) -> TclState {
    let switch = if state.theta < params.theta_min {
        Switch::On
    } else if state.theta > params.theta_max {
        Switch::Off
    } else {
        state.switch
    };
    TclState { switch, ..*state }
}

impl FeederState {
    /// Advances every load by `dt` seconds at a constant `voltage` using
    /// `substeps` Euler steps, checking the thermostat after each one.
    pub fn step(
        &mut self,
        config: &FeederConfig,
        voltage: f64,
        dt: f64,
        substeps: usize,
    ) -> Result<()> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("step length {dt} must be positive")));
        }
        if substeps == 0 {
            return Err(invalid("substeps must be at least 1"));
        }
        if !(voltage >= 0.0) {
            return Err(invalid(format!("voltage {voltage} must be non-negative")));
        }
        if self.tcl_states.len() != config.tcl_params.len() {
            return Err(invalid("feeder state does not match its config"));
        }
        let h = dt / substeps as f64;
        for (state, params) in self.tcl_states.iter_mut().zip(&config.tcl_params) {
            for _ in 0..substeps {
                state.theta += h * derivative(state, params, voltage);
                *state = update_switch(state, params);
            }
        }
        self.time_s += dt;
        self.bus_voltage_v = voltage;
        Ok(())
    }

    /// Aggregate power at the voltage applied over the last step (APL).
    pub fn aggregate_power(&self, config: &FeederConfig) -> f64 {
        self.aggregate_power_at(config, self.bus_voltage_v)
    }

    pub fn aggregate_power_at(&self, config: &FeederConfig, voltage: f64) -> f64 {
        self.tcl_states
            .iter()
            .zip(&config.tcl_params)
            .map(|(s, p)| tcl_power(s, p, voltage))
            .sum()
    }

    pub fn n_on(&self) -> usize {
        self.tcl_states.iter().filter(|s| s.switch == Switch::On).count()
    }
}

/// Free-function form of [`FeederState::step`], returning the new state.
pub fn step_feeder(
    state: &FeederState,
    config: &FeederConfig,
    voltage: f64,
    dt: f64,
    substeps: usize,
) -> Result<FeederState> {
    let mut next = state.clone();
    next.step(config, voltage, dt, substeps)?;
    Ok(next)
}

pub fn aggregate_power(state: &FeederState, config: &FeederConfig) -> f64 {
    state.aggregate_power(config)
}

/// Exact temperature after `t` seconds with the switch held fixed.
pub fn closed_form_theta(state: &TclState, params: &TclParams, voltage: f64, t: f64) -> f64 {
    let r = params.thermal_resistance;
    let fixed_point = params.ambient - r * tcl_power(state, params, voltage);
    fixed_point + (state.theta - fixed_point) * (t / (r * state.effective_capacitance)).exp()
}

/// Time until the exact solution reaches the threshold that flips the current
/// switch, or `None` if it never gets there.
pub fn closed_form_crossing_time(state: &TclState, params: &TclParams, voltage: f64) -> Option<f64> {
    let r = params.thermal_resistance;
    let fixed_point = params.ambient - r * tcl_power(state, params, voltage);
    let target = match state.switch {
        Switch::On => params.theta_max,
        Switch::Off => params.theta_min,
    };
    let ratio = (target - fixed_point) / (state.theta - fixed_point);
    if !(ratio >= 1.0) || !ratio.is_finite() {
        return None;
    }
    Some(r * state.effective_capacitance * ratio.ln())
}
