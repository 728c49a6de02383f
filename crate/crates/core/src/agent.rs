//! Tabular Q-learning with epsilon-greedy exploration.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub learning_rate: f64,
    /// Exploration rate of the first training episode.
    pub exploration_rate: f64,
    /// Per-episode multiplicative decay of the exploration rate.
    pub exploration_decay: f64,
    pub discount: f64,
    /// Candidate values of the proportional coefficient `k`.
    pub actions: Vec<f64>,
    /// Multiplier applied to the squared tracking error; negative.
    pub reward_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        default_agent_config()
    }
}

pub fn default_agent_config() -> AgentConfig {
    AgentConfig {
        learning_rate: 0.5,
        exploration_rate: 0.5,
        exploration_decay: 0.9,
        discount: 0.6,
        actions: vec![0.1, 0.5, 1.0, 2.0, 7.0],
        reward_scale: -1000.0,
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(invalid(format!("{name} {x} must lie in [0, 1]")))
            }
        };
        unit("learning rate", self.learning_rate)?;
        unit("exploration rate", self.exploration_rate)?;
        unit("exploration decay", self.exploration_decay)?;
        unit("discount", self.discount)?;
        if self.actions.is_empty() {
            return Err(invalid("action set is empty"));
        }
        if self.actions.iter().any(|k| !(*k >= 0.0) || !k.is_finite()) {
            return Err(invalid("actions must be finite and non-negative"));
        }
        if !(self.reward_scale < 0.0) {
            return Err(invalid(format!("reward scale {} must be negative", self.reward_scale)));
        }
        Ok(())
    }

    pub fn exploration_at(&self, episode: usize) -> f64 {
        decay_exploration(self.exploration_rate, self.exploration_decay, episode)
    }
}

/// `scale · (apl − rpl)²`
pub fn reward(apl: f64, rpl: f64, scale: f64) -> f64 {
    let err = apl - rpl;
    scale * err * err
}

/// `eps0 · decay^episode`
pub fn decay_exploration(eps0: f64, decay: f64, episode: usize) -> f64 {
    eps0 * decay.powi(episode.min(i32::MAX as usize) as i32)
}

/// Dense state-action value table, zero-initialised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: Vec<f64>,
    n_states: usize,
    n_actions: usize,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(invalid(format!("Q-table dimensions {n_states}x{n_actions} must be positive")));
        }
        Ok(QTable { values: vec![0.0; n_states * n_actions], n_states, n_actions })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn check(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.n_states || action >= self.n_actions {
            return Err(Error::InvalidState {
                state,
                action,
                n_states: self.n_states,
                n_actions: self.n_actions,
            });
        }
        Ok(())
    }

    pub fn get(&self, state: usize, action: usize) -> Result<f64> {
        self.check(state, action)?;
        Ok(self.values[state * self.n_actions + action])
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) -> Result<()> {
        self.check(state, action)?;
        if !value.is_finite() {
            return Err(invalid(format!("Q-value {value} is not finite")));
        }
        self.values[state * self.n_actions + action] = value;
        Ok(())
    }

    pub fn row(&self, state: usize) -> Result<&[f64]> {
        self.check(state, 0)?;
        Ok(&self.values[state * self.n_actions..(state + 1) * self.n_actions])
    }

    /// Index of the largest value in the row; ties go to the lowest index.
    pub fn best_action(&self, state: usize) -> Result<usize> {
        let row = self.row(state)?;
        let mut best = 0;
        for (a, &q) in row.iter().enumerate().skip(1) {
            if q > row[best] {
                best = a;
            }
        }
        Ok(best)
    }

    pub fn max_value(&self, state: usize) -> Result<f64> {
        Ok(self.row(state)?.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Temporal-difference update of a single cell:
    /// `Q(s,a) ← Q(s,a) + α·(r + γ·max_a' Q(s',a') − Q(s,a))`.
    pub fn update(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
        alpha: f64,
        gamma: f64,
    ) -> Result<()> {
        self.check(state, action)?;
        let target = reward + gamma * self.max_value(next_state)?;
        let cell = &mut self.values[state * self.n_actions + action];
        *cell += alpha * (target - *cell);
        Ok(())
    }

    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.n_states).map(|s| self.best_action(s).unwrap()).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// One row per state, space-separated values per action.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.n_actions) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write!(out, "{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut n_actions = None;
        let mut n_states = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("bad Q-value {tok:?}") })
                })
                .collect::<Result<_>>()?;
            match n_actions {
                None => n_actions = Some(row.len()),
                Some(n) if n != row.len() => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("expected {n} columns, found {}", row.len()),
                    })
                }
                _ => {}
            }
            values.extend(row);
            n_states += 1;
        }
        let n_actions = n_actions.ok_or_else(|| Error::InvalidInput("Q-table file has no rows".into()))?;
        Ok(QTable { values, n_states, n_actions })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn q_update(
    q: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    alpha: f64,
    gamma: f64,
) -> Result<()> {
    q.update(s, a, r, s_next, alpha, gamma)
}

pub fn greedy_policy(q: &QTable) -> Vec<usize> {
    q.greedy_policy()
}

/// Epsilon-greedy choice. With `eps == 0` no random numbers are consumed.
pub fn select_action<R: Rng + ?Sized>(q: &QTable, state: usize, eps: f64, rng: &mut R) -> Result<usize> {
    q.check(state, 0)?;
    if eps > 0.0 && rng.gen::<f64>() < eps {
        return Ok(rng.gen_range(0..q.n_actions));
    }
    q.best_action(state)
}
