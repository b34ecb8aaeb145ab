//! Fixed-step integration of the mean dynamics on the product of simplices.
//!
//! The vector field is smooth (the payoff map is floored away from its
//! singularities), so classical fourth-order Runge-Kutta steps with a small
//! fixed step size work throughout the documented operating regime. Each
//! step ends with a simplex repair: negative shares are clamped to zero and
//! every population block is renormalized. The repair magnitude stays far
//! below the integration error; tests assert it.
//!
//! Near-deserted regions are a special case: the floored payoff map gives
//! them enormous payoffs, so switch rates — and with them the stiffness of
//! the ODE — can exceed what a fixed step resolves. A step whose span would
//! violate the stability bound `h · C ≤ 0.5` (with `C` the worst total
//! switch rate at the current state) is split into shorter sub-steps sized
//! by that bound. The split count is a pure function of the state, so runs
//! stay bit-for-bit reproducible, and it is exactly one — plain RK4 — at
//! every state the standard experiments visit.
//!
//! Convergence is declared at the first step where, for every population,
//! the payoff spread over its surviving strategies (share above the
//! extinction threshold) falls within the tolerance `convergence_tau`.

use crate::dynamics::{max_total_switch_rate, protocol_field, RevisionProtocol};
use crate::game::{PayoffTable, Scenario, SocialState, VectorField};
use crate::{Error, Result};

/// Stability bound on `sub_step · max_total_switch_rate`, well inside the
/// RK4 stability interval.
const STEP_RATE_LIMIT: f64 = 0.5;

/// Parameters of a mean-dynamics integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    /// RK4 step size `h` in time units.
    pub step_size: f64,
    /// Time horizon; integration stops at `max_time` if convergence never
    /// fires.
    pub max_time: f64,
    /// Payoff-spread tolerance `τ` for the convergence criterion.
    pub convergence_tau: f64,
    /// Shares at or below this threshold are treated as extinct and excluded
    /// from the convergence spread.
    pub extinction_threshold: f64,
    /// Steps between recorded samples. The first and last step are always
    /// recorded.
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            max_time: 200.0,
            convergence_tau: 0.05,
            extinction_threshold: 1e-3,
            record_stride: 10,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_size <= 0.0 || !self.step_size.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "step_size must be > 0, got {}",
                self.step_size
            )));
        }
        if self.max_time < 0.0 || !self.max_time.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "max_time must be >= 0, got {}",
                self.max_time
            )));
        }
        if self.convergence_tau <= 0.0 || !self.convergence_tau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "convergence_tau must be > 0, got {}",
                self.convergence_tau
            )));
        }
        if !(0.0..1.0).contains(&self.extinction_threshold) {
            return Err(Error::InvalidConfig(format!(
                "extinction_threshold must lie in [0, 1), got {}",
                self.extinction_threshold
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// One recorded point of a trajectory: the state, its payoffs, and (for
/// agent-based runs) the underlying integer strategy counts.
#[derive(Debug, Clone)]
pub struct Sample {
    pub step: usize,
    pub time: f64,
    pub state: SocialState,
    pub payoffs: PayoffTable,
    pub counts: Option<Vec<Vec<u64>>>,
}

/// A time-indexed record of an integration or simulation run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub converged: bool,
    pub convergence_step: Option<usize>,
    pub convergence_time: Option<f64>,
}

impl Trajectory {
    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn final_state(&self) -> &SocialState {
        &self.final_sample().state
    }
}

/// Result of a single repaired RK4 step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SocialState,
    /// L1 distance between the raw RK4 output and the repaired state.
    pub repair_l1: f64,
}

/// One RK4 step of an arbitrary field, followed by simplex repair. `time` is
/// only used to annotate errors.
pub fn step_with<F>(state: &SocialState, h: f64, time: f64, field: F) -> Result<StepOutcome>
where
    F: Fn(&SocialState) -> VectorField,
{
    let eval = |s: &SocialState| -> Result<VectorField> {
        let f = field(s);
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::NonFiniteField {
                time,
                state: Box::new(s.clone()),
            })
        }
    };

    let shifted = |base: &SocialState, k: &VectorField, scale: f64| -> SocialState {
        let blocks = base
            .blocks()
            .iter()
            .zip(k.blocks())
            .map(|(xs, ks)| xs.iter().zip(ks).map(|(x, k)| x + scale * k).collect())
            .collect();
        SocialState::from_blocks_unchecked(blocks)
    };

    let k1 = eval(state)?;
    let k2 = eval(&shifted(state, &k1, h / 2.0))?;
    let k3 = eval(&shifted(state, &k2, h / 2.0))?;
    let k4 = eval(&shifted(state, &k3, h))?;

    let mut repair_l1 = 0.0;
    let mut blocks = Vec::with_capacity(state.blocks().len());
    for (p, xs) in state.blocks().iter().enumerate() {
        let raw: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                x + h / 6.0
                    * (k1.block(p)[i]
                        + 2.0 * k2.block(p)[i]
                        + 2.0 * k3.block(p)[i]
                        + k4.block(p)[i])
            })
            .collect();
        let clamped: Vec<f64> = raw.iter().map(|&x| x.max(0.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::NonFiniteField {
                time,
                state: Box::new(state.clone()),
            });
        }
        let repaired: Vec<f64> = clamped.iter().map(|&x| x / sum).collect();
        repair_l1 += raw
            .iter()
            .zip(&repaired)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
        blocks.push(repaired);
    }
    Ok(StepOutcome {
        state: SocialState::from_blocks_unchecked(blocks),
        repair_l1,
    })
}

/// Advances the mean dynamics of `protocol` by `h`, splitting into RK4
/// sub-steps where the local switch rates demand it (see the module notes).
/// Populations flagged in `frozen` contribute no motion and no stiffness.
pub(crate) fn protocol_step_masked(
    scenario: &Scenario,
    protocol: &RevisionProtocol,
    state: &SocialState,
    h: f64,
    time: f64,
    frozen: Option<&[bool]>,
) -> Result<StepOutcome> {
    let field = |s: &SocialState| {
        let payoffs = scenario.payoff_table(s);
        let mut field = protocol_field(scenario, protocol, s, &payoffs);
        if let Some(frozen) = frozen {
            for (p, hold) in frozen.iter().enumerate() {
                if *hold {
                    for v in &mut field.blocks_mut()[p] {
                        *v = 0.0;
                    }
                }
            }
        }
        field
    };

    let mut current = state.clone();
    let mut remaining = h;
    let mut repair_l1 = 0.0;
    while remaining > 0.0 {
        let payoffs = scenario.payoff_table(&current);
        let rate = match frozen {
            None => max_total_switch_rate(protocol, &payoffs, &current),
            Some(frozen) => {
                // Frozen populations cannot move, so their rates do not
                // constrain the step.
                let mut worst = 0.0f64;
                for (p, hold) in frozen.iter().enumerate() {
                    if *hold {
                        continue;
                    }
                    let pi = payoffs.payoffs(p);
                    let shares = current.block(p);
                    for m in 0..pi.len() {
                        let total: f64 = (0..pi.len())
                            .filter(|&i| i != m)
                            .map(|i| protocol.rate(p, pi, shares, m, i))
                            .sum();
                        worst = worst.max(total);
                    }
                }
                worst
            }
        };
        if !rate.is_finite() {
            return Err(Error::NonFiniteField {
                time,
                state: Box::new(current),
            });
        }
        let span = if rate * remaining <= STEP_RATE_LIMIT {
            remaining
        } else {
            STEP_RATE_LIMIT / rate
        };
        let outcome = step_with(&current, span, time, field)?;
        current = outcome.state;
        repair_l1 += outcome.repair_l1;
        remaining -= span;
    }
    Ok(StepOutcome {
        state: current,
        repair_l1,
    })
}

/// One step of the mean dynamics of `protocol` over a span of `h`, with the
/// accumulated repair magnitude.
pub fn protocol_step(
    scenario: &Scenario,
    protocol: &RevisionProtocol,
    state: &SocialState,
    h: f64,
) -> Result<StepOutcome> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidConfig(format!("step size must be > 0, got {h}")));
    }
    state.check_shape(scenario)?;
    protocol_step_masked(scenario, protocol, state, h, 0.0, None)
}

/// One step of the mean dynamics of `protocol` over a span of `h`.
pub fn step(
    scenario: &Scenario,
    protocol: &RevisionProtocol,
    state: &SocialState,
    h: f64,
) -> Result<SocialState> {
    Ok(protocol_step(scenario, protocol, state, h)?.state)
}

/// True when every population's payoff spread over surviving strategies is
/// within `convergence_tau`.
pub fn state_converged(
    state: &SocialState,
    payoffs: &PayoffTable,
    config: &IntegratorConfig,
) -> bool {
    (0..payoffs.population_count()).all(|p| {
        payoffs.spread_over_active(state, p, config.extinction_threshold)
            <= config.convergence_tau
    })
}

/// Integrates the mean dynamics from `initial` until convergence or
/// `max_time`, recording every `record_stride` steps plus the first and last
/// states. Convergence is checked at every step, before stepping, so a start
/// at an exact equilibrium converges at time zero.
pub fn integrate(
    scenario: &Scenario,
    protocol: &RevisionProtocol,
    initial: &SocialState,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    config.validate()?;
    initial.check_shape(scenario)?;
    let initial = SocialState::new(initial.blocks().to_vec(), scenario)?;

    let h = config.step_size;
    let total_steps = (config.max_time / h).ceil() as usize;

    let mut samples = Vec::new();
    let mut state = initial;
    let mut converged_at_step: Option<(usize, f64)> = None;
    let mut step_idx = 0usize;
    loop {
        let time = step_idx as f64 * h;
        let payoffs = scenario.payoff_table(&state);
        if state_converged(&state, &payoffs, config) {
            converged_at_step = Some((step_idx, time));
        }
        let last = converged_at_step.is_some() || step_idx >= total_steps;
        if step_idx.is_multiple_of(config.record_stride) || last {
            samples.push(Sample {
                step: step_idx,
                time,
                state: state.clone(),
                payoffs,
                counts: None,
            });
        }
        if last {
            break;
        }
        state = protocol_step_masked(scenario, protocol, &state, h, time, None)?.state;
        step_idx += 1;
    }

    Ok(Trajectory {
        samples,
        converged: converged_at_step.is_some(),
        convergence_step: converged_at_step.map(|(s, _)| s),
        convergence_time: converged_at_step.map(|(_, t)| t),
    })
}

/// First recorded time at which every population's payoff spread over
/// surviving strategies is within `convergence_tau`, or `None` if the
/// trajectory never gets there. Granularity is limited by the trajectory's
/// sampling cadence.
pub fn converged_at(trajectory: &Trajectory, config: &IntegratorConfig) -> Option<f64> {
    trajectory
        .samples
        .iter()
        .find(|sample| state_converged(&sample.state, &sample.payoffs, config))
        .map(|sample| sample.time)
}
