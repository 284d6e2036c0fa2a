//! The recurrent training procedure.
//!
//! One network is carried through the whole run (or rebuilt from its
//! initializer at every step when `reinit_each_step` is set). At every outer
//! step it is trained for `n_inner` iterations on the current state `I`, each iteration
//! being forward pass, residual loss, backward pass and an optimizer update.
//! The output of the last forward pass becomes the state at `t + dt` and the
//! next step's input.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::losses::{self, LossForm};
use crate::mesh::{Grid1D, StateField};
use crate::models::ConservationLaw;
use crate::nn::NetworkParams;
use crate::optim::{OptimizerConfig, OptimizerState};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Two ReLU hidden layers of 100 units and a linear output layer.
    #[serde(rename = "wave-3x100")]
    Wave3x100,
    /// One ReLU hidden layer of 330 units over the flattened state.
    #[serde(rename = "euler-single-330")]
    EulerSingle330,
    /// One sub-network per component, each with a 1024-unit hidden layer.
    #[serde(rename = "euler-multi-1024")]
    EulerMulti1024,
    Custom { hidden: Vec<usize>, multi: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    Identity,
    Random,
}

impl Architecture {
    /// Layer widths of one stack and the number of stacks.
    ///
    /// Preset hidden widths are raised to the input width when the grid is
    /// larger than the nominal size, so that identity initialization still
    /// reproduces the input exactly.
    pub fn layout(&self, n_components: usize, n_points: usize) -> (Vec<usize>, usize) {
        let input = n_components * n_points;
        match self {
            Architecture::Wave3x100 => {
                let h = 100.max(input);
                (vec![input, h, h, input], 1)
            }
            Architecture::EulerSingle330 => (vec![input, 330.max(input), input], 1),
            Architecture::EulerMulti1024 => (vec![input, 1024.max(input), n_points], n_components),
            Architecture::Custom { hidden, multi } => {
                let mut dims = vec![input];
                dims.extend(hidden);
                if *multi {
                    dims.push(n_points);
                    (dims, n_components)
                } else {
                    dims.push(input);
                    (dims, 1)
                }
            }
        }
    }

    pub fn build(
        &self,
        n_components: usize,
        n_points: usize,
        init: InitScheme,
        seed: u64,
    ) -> Result<NetworkParams> {
        let (dims, stacks) = self.layout(n_components, n_points);
        let multi = matches!(
            self,
            Architecture::EulerMulti1024 | Architecture::Custom { multi: true, .. }
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match (init, multi) {
            (InitScheme::Identity, false) => NetworkParams::identity(&dims),
            (InitScheme::Identity, true) => NetworkParams::identity_multi(&dims, stacks),
            (InitScheme::Random, false) => NetworkParams::random(&dims, &mut rng),
            (InitScheme::Random, true) => NetworkParams::random_multi(&dims, stacks, &mut rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dt: f64,
    pub t_final: f64,
    pub n_inner: usize,
    pub loss: LossForm,
    pub optimizer: OptimizerConfig,
    pub architecture: Architecture,
    pub init: InitScheme,
    pub seed: u64,
    pub snapshot_stride: usize,
    /// Fresh optimizer moments at every outer step.
    pub reset_optimizer: bool,
    /// Rebuild the network from its initializer before every outer step
    /// instead of warm-starting from the previous step's weights.
    #[serde(default)]
    pub reinit_each_step: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::config(format!(
                "final time must be nonnegative, got {}",
                self.t_final
            )));
        }
        if self.n_inner == 0 {
            return Err(Error::config("n_inner must be at least 1"));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::config("snapshot stride must be at least 1"));
        }
        if let Architecture::Custom { hidden, .. } = &self.architecture {
            if hidden.iter().any(|&h| h == 0) {
                return Err(Error::config("hidden widths must be positive"));
            }
        }
        self.loss.validate()?;
        self.optimizer.validate()
    }

    /// Outer steps needed to reach `t_final`, absorbing round-off in `t_final / dt`.
    pub fn n_steps(&self) -> usize {
        if self.t_final <= 0.0 {
            return 0;
        }
        let ratio = self.t_final / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLoss {
    pub interior: f64,
    pub boundary: f64,
    pub total: f64,
}

/// Inner-loop loss history of one outer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// 1-based outer step index.
    pub step: usize,
    /// Time of the state this step produced.
    pub time: f64,
    pub iterations: Vec<IterationLoss>,
}

impl LossReport {
    pub fn first_loss(&self) -> f64 {
        self.iterations.first().map_or(f64::NAN, |l| l.total)
    }

    pub fn last_loss(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |l| l.total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub component_names: Vec<String>,
    pub snapshots: Vec<StateField>,
    pub reports: Vec<LossReport>,
}

impl Trajectory {
    pub fn new(component_names: Vec<String>, initial: StateField) -> Self {
        Trajectory {
            component_names,
            snapshots: vec![initial],
            reports: Vec::new(),
        }
    }

    pub fn grid(&self) -> &Grid1D {
        self.snapshots[0].grid()
    }

    pub fn last(&self) -> &StateField {
        self.snapshots.last().unwrap()
    }

    /// Keeps the initial snapshot, the final one and those at `times`.
    pub fn retain_times(&mut self, times: &[f64]) {
        let last = self.snapshots.len() - 1;
        let mut i = 0;
        self.snapshots.retain(|s| {
            let keep = i == 0
                || i == last
                || times
                    .iter()
                    .any(|&t| (s.time() - t).abs() <= 1e-9 * t.abs().max(1.0));
            i += 1;
            keep
        });
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(StateField::time).collect()
    }

    /// Snapshot whose time matches `t` to within `1e-9` (relative to max(1, |t|)).
    pub fn at_time(&self, t: f64) -> Option<&StateField> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.snapshots.iter().find(|s| (s.time() - t).abs() <= tol)
    }
}

/// Per-step progress passed to observers of [`solve_with`].
#[derive(Debug, Clone, Copy)]
pub struct StepProgress {
    pub step: usize,
    pub n_steps: usize,
    pub time: f64,
    pub first_loss: f64,
    pub last_loss: f64,
}

/// Runs `n_inner` training iterations on `state` and returns the prediction
/// of the last forward pass as the state at `state.time() + dt`.
pub fn advance_one_step(
    net: &mut NetworkParams,
    optimizer: &mut OptimizerState,
    state: &StateField,
    law: &dyn ConservationLaw,
    config: &TrainConfig,
    step: usize,
) -> Result<(StateField, LossReport)> {
    let m = law.n_components();
    let grid = *state.grid();
    if net.in_dim() != m * grid.n_points() || net.out_dim() != m * grid.n_points() {
        return Err(Error::config(format!(
            "network maps {} -> {} values but the state has {m} x {} entries",
            net.in_dim(),
            net.out_dim(),
            grid.n_points()
        )));
    }
    let wrap = |iteration: usize| {
        move |e: Error| Error::Training {
            step,
            iteration,
            source: Box::new(e),
        }
    };
    let mut grads = net.zeros_like();
    let mut iterations = Vec::with_capacity(config.n_inner);
    let mut prediction = Vec::new();
    for it in 0..config.n_inner {
        let (y, cache) = net.forward(state.values()).map_err(wrap(it))?;
        let loss = losses::evaluate(law, &grid, state, &y, config.dt, &config.loss).map_err(wrap(it))?;
        if !loss.total.is_finite() {
            return Err(wrap(it)(Error::Model(format!("loss is not finite ({})", loss.total))));
        }
        iterations.push(IterationLoss {
            interior: loss.interior,
            boundary: loss.boundary,
            total: loss.total,
        });
        net.backward_into(&cache, &loss.grad, &mut grads).map_err(wrap(it))?;
        optimizer.apply(net, &grads).map_err(wrap(it))?;
        prediction = y;
    }
    let time = state.time() + config.dt;
    let next = state.successor(prediction, time).map_err(wrap(config.n_inner - 1))?;
    Ok((
        next,
        LossReport {
            step,
            time,
            iterations,
        },
    ))
}

/// Builds the network from `config` and runs the whole time loop.
pub fn solve(law: &dyn ConservationLaw, initial: StateField, config: &TrainConfig) -> Result<Trajectory> {
    solve_with(law, initial, config, |_| {})
}

pub fn solve_with<F: FnMut(&StepProgress)>(
    law: &dyn ConservationLaw,
    initial: StateField,
    config: &TrainConfig,
    mut observer: F,
) -> Result<Trajectory> {
    config.validate()?;
    let m = law.n_components();
    if initial.n_components() != m {
        return Err(Error::config("initial state does not match the model"));
    }
    let n = initial.grid().n_points();
    let mut net = config.architecture.build(m, n, config.init, config.seed)?;
    let mut optimizer = OptimizerState::new(config.optimizer, &net)?;
    let n_steps = config.n_steps();
    let mut traj = Trajectory::new(law.component_names(), initial.clone());
    let mut state = initial;
    for step in 1..=n_steps {
        if config.reinit_each_step && step > 1 {
            net = config.architecture.build(m, n, config.init, config.seed)?;
        }
        if config.reset_optimizer {
            optimizer.reset();
        }
        let (next, mut report) = advance_one_step(&mut net, &mut optimizer, &state, law, config, step)?;
        // pin times to multiples of dt instead of accumulating round-off
        let time = step as f64 * config.dt;
        report.time = time;
        state = next.successor(next.values().to_vec(), time)?;
        observer(&StepProgress {
            step,
            n_steps,
            time,
            first_loss: report.first_loss(),
            last_loss: report.last_loss(),
        });
        if step % config.snapshot_stride == 0 {
            traj.snapshots.push(state.clone());
        }
        traj.reports.push(report);
    }
    Ok(traj)
}
