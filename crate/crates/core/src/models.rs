//! PDE models: the one-way wave equation and the 1D Euler system.
//!
//! Both are written as conservation laws `u_t + F(u)_x = 0`. The wave equation
//! `u_t - u_x = 0` uses `F(u) = -u`, so information travels right to left at
//! unit speed.
//!
//! The Euler closure is `p = rho * T` together with `E = rho u^2 / 2 + rho T`,
//! which gives `p = E - rho u^2 / 2`, i.e. an ideal gas with `gamma = 2`
//! (not the 1.4 of air). The sound speed is `c = sqrt(2 p / rho)`.

use serde::{Deserialize, Serialize};

use crate::mesh::{Grid1D, StateField};
use crate::{Error, Result};

/// Ratio of specific heats implied by the Euler closure above.
pub const GAMMA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A hyperbolic system `u_t + F(u)_x = 0` with its boundary data.
///
/// Everything the losses, the trainer and the finite-volume reference need
/// goes through this trait, so test harnesses can plug in degenerate fluxes.
pub trait ConservationLaw: Sync {
    fn n_components(&self) -> usize;

    fn component_names(&self) -> Vec<String>;

    /// Writes `F(u)` into `out`.
    fn flux(&self, u: &[f64], out: &mut [f64]) -> Result<()>;

    /// Writes the row-major Jacobian `dF_r / du_c` into `jac[r * m + c]`.
    fn flux_jacobian(&self, u: &[f64], jac: &mut [f64]) -> Result<()>;

    /// Dirichlet data at the endpoint `x` on `side` at time `t`.
    fn boundary_value(&self, side: Side, x: f64, t: f64) -> Vec<f64>;

    /// Whether the boundary penalty applies on `side`.
    fn is_dirichlet(&self, _side: Side) -> bool {
        true
    }

    /// Largest characteristic speed magnitude at `u`.
    fn max_wave_speed(&self, u: &[f64]) -> Result<f64>;

    /// Variables used for slope-limited reconstruction (identity by default).
    fn to_reconstruction(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(u.to_vec())
    }

    fn from_reconstruction(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(w.to_vec())
    }

    /// Rejects states outside the admissible set.
    fn check_state(&self, _u: &[f64]) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "wave")]
    OneWayWave,
    #[serde(rename = "euler")]
    Euler1D,
}

impl ModelKind {
    pub fn n_components(self) -> usize {
        match self {
            ModelKind::OneWayWave => 1,
            ModelKind::Euler1D => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    DirichletBoth,
    /// Dirichlet data on the right, free outflow on the left.
    DirichletRightOutflowLeft,
}

/// Density, velocity, pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerPrimitive {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

/// Density, momentum, total energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerConserved {
    pub rho: f64,
    pub mom: f64,
    pub energy: f64,
}

impl EulerPrimitive {
    pub fn new(rho: f64, u: f64, p: f64) -> Result<Self> {
        if !(rho > 0.0 && p > 0.0 && u.is_finite() && rho.is_finite() && p.is_finite()) {
            return Err(Error::InvalidState {
                index: None,
                rho,
                internal_energy: p / (GAMMA - 1.0),
            });
        }
        Ok(EulerPrimitive { rho, u, p })
    }

    pub fn to_conserved(self) -> EulerConserved {
        EulerConserved {
            rho: self.rho,
            mom: self.rho * self.u,
            energy: 0.5 * self.rho * self.u * self.u + self.p / (GAMMA - 1.0),
        }
    }

    pub fn sound_speed(&self) -> f64 {
        (GAMMA * self.p / self.rho).sqrt()
    }
}

impl EulerConserved {
    pub fn from_slice(u: &[f64]) -> Self {
        EulerConserved {
            rho: u[0],
            mom: u[1],
            energy: u[2],
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.rho, self.mom, self.energy]
    }

    pub fn internal_energy(&self) -> f64 {
        self.energy - 0.5 * self.mom * self.mom / self.rho
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.mom.is_finite() || !self.energy.is_finite() {
            return Err(Error::InvalidState {
                index: None,
                rho: self.rho,
                internal_energy: f64::NAN,
            });
        }
        let e = self.internal_energy();
        if !(e > 0.0) {
            return Err(Error::InvalidState {
                index: None,
                rho: self.rho,
                internal_energy: e,
            });
        }
        Ok(())
    }

    pub fn to_primitive(self) -> Result<EulerPrimitive> {
        self.validate()?;
        let u = self.mom / self.rho;
        // temperature T = (E - rho u^2 / 2) / rho, pressure p = rho T
        let temperature = (self.energy - 0.5 * self.rho * u * u) / self.rho;
        let p = self.rho * temperature * (GAMMA - 1.0);
        EulerPrimitive::new(self.rho, u, p)
    }
}

/// Initial data shared by both models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Every component identically zero.
    Zero,
    /// Piecewise-constant Euler data; the point at `split` takes the right state.
    Riemann {
        left: EulerPrimitive,
        right: EulerPrimitive,
        split: f64,
    },
}

/// Sod shock tube data: `rho = p = 8` left of 0.5, `rho = p = 1` right, at rest.
pub fn sod_initial_condition() -> InitialCondition {
    InitialCondition::Riemann {
        left: EulerPrimitive {
            rho: 8.0,
            u: 0.0,
            p: 8.0,
        },
        right: EulerPrimitive {
            rho: 1.0,
            u: 0.0,
            p: 1.0,
        },
        split: 0.5,
    }
}

/// Right-boundary inflow of the wave problem: `sin(pi t)^2` up to `t = 1`, then 0.
pub fn wave_inflow(t: f64) -> f64 {
    if t <= 1.0 {
        let s = (std::f64::consts::PI * t).sin();
        s * s
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub initial: InitialCondition,
    pub boundary: BoundaryKind,
}

impl ModelSpec {
    pub fn wave() -> Self {
        ModelSpec {
            kind: ModelKind::OneWayWave,
            initial: InitialCondition::Zero,
            boundary: BoundaryKind::DirichletBoth,
        }
    }

    pub fn sod() -> Self {
        ModelSpec {
            kind: ModelKind::Euler1D,
            initial: sod_initial_condition(),
            boundary: BoundaryKind::DirichletBoth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let InitialCondition::Riemann { left, right, split } = self.initial {
            if self.kind != ModelKind::Euler1D {
                return Err(Error::config("a Riemann initial condition needs the Euler model"));
            }
            EulerPrimitive::new(left.rho, left.u, left.p)?;
            EulerPrimitive::new(right.rho, right.u, right.p)?;
            if !split.is_finite() {
                return Err(Error::config("Riemann split position must be finite"));
            }
        } else if self.kind == ModelKind::Euler1D {
            return Err(Error::config(
                "the Euler model needs a Riemann initial condition (zero density is inadmissible)",
            ));
        }
        Ok(())
    }

    /// Conserved initial state at `x`.
    pub fn initial_value(&self, x: f64) -> Vec<f64> {
        match self.initial {
            InitialCondition::Zero => vec![0.0; self.kind.n_components()],
            InitialCondition::Riemann { left, right, split } => {
                let w = if x < split { left } else { right };
                w.to_conserved().to_array().to_vec()
            }
        }
    }

    pub fn initial_state(&self, grid: &Grid1D) -> Result<StateField> {
        let m = self.kind.n_components();
        let rows = (0..m)
            .map(|c| grid.sample(|x| self.initial_value(x)[c]))
            .collect::<Result<Vec<_>>>()?;
        let state = StateField::from_components(*grid, &rows, 0.0)?;
        let mut buf = vec![0.0; m];
        for i in 0..grid.n_points() {
            let u = state.point(i);
            self.flux(&u, &mut buf).map_err(|e| e.at_index(i))?;
            if buf.iter().any(|v| !v.is_finite()) {
                return Err(Error::Model(format!(
                    "flux of the initial data is not finite at x = {}",
                    grid.x(i)
                )));
            }
        }
        Ok(state)
    }
}

impl ConservationLaw for ModelSpec {
    fn n_components(&self) -> usize {
        self.kind.n_components()
    }

    fn component_names(&self) -> Vec<String> {
        match self.kind {
            ModelKind::OneWayWave => vec!["u".into()],
            ModelKind::Euler1D => vec!["rho".into(), "mom".into(), "E".into()],
        }
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        match self.kind {
            ModelKind::OneWayWave => {
                out[0] = -u[0];
                Ok(())
            }
            ModelKind::Euler1D => {
                let s = EulerConserved::from_slice(u);
                s.validate()?;
                let vel = s.mom / s.rho;
                let p = (GAMMA - 1.0) * s.internal_energy();
                out[0] = s.mom;
                out[1] = s.mom * vel + p;
                out[2] = (s.energy + p) * vel;
                Ok(())
            }
        }
    }

    fn flux_jacobian(&self, u: &[f64], jac: &mut [f64]) -> Result<()> {
        match self.kind {
            ModelKind::OneWayWave => {
                jac[0] = -1.0;
                Ok(())
            }
            ModelKind::Euler1D => {
                let s = EulerConserved::from_slice(u);
                s.validate()?;
                let (rho, m, e) = (s.rho, s.mom, s.energy);
                let v = m / rho;
                let g = GAMMA;
                jac[0] = 0.0;
                jac[1] = 1.0;
                jac[2] = 0.0;
                jac[3] = -0.5 * (3.0 - g) * v * v;
                jac[4] = (3.0 - g) * v;
                jac[5] = g - 1.0;
                jac[6] = -g * e * v / rho + (g - 1.0) * v * v * v;
                jac[7] = g * e / rho - 1.5 * (g - 1.0) * v * v;
                jac[8] = g * v;
                Ok(())
            }
        }
    }

    fn boundary_value(&self, side: Side, x: f64, t: f64) -> Vec<f64> {
        match self.kind {
            ModelKind::OneWayWave => match side {
                Side::Right => vec![wave_inflow(t)],
                // The pulse entering at x = 1 reaches x = 0 only at t = 1.
                Side::Left => vec![0.0],
            },
            ModelKind::Euler1D => self.initial_value(x),
        }
    }

    fn is_dirichlet(&self, side: Side) -> bool {
        match self.boundary {
            BoundaryKind::DirichletBoth => true,
            BoundaryKind::DirichletRightOutflowLeft => side == Side::Right,
        }
    }

    fn max_wave_speed(&self, u: &[f64]) -> Result<f64> {
        match self.kind {
            ModelKind::OneWayWave => Ok(1.0),
            ModelKind::Euler1D => {
                let w = EulerConserved::from_slice(u).to_primitive()?;
                Ok(w.u.abs() + w.sound_speed())
            }
        }
    }

    fn to_reconstruction(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            ModelKind::OneWayWave => Ok(u.to_vec()),
            ModelKind::Euler1D => {
                let w = EulerConserved::from_slice(u).to_primitive()?;
                Ok(vec![w.rho, w.u, w.p])
            }
        }
    }

    fn from_reconstruction(&self, w: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            ModelKind::OneWayWave => Ok(w.to_vec()),
            ModelKind::Euler1D => Ok(EulerPrimitive::new(w[0], w[1], w[2])?
                .to_conserved()
                .to_array()
                .to_vec()),
        }
    }

    fn check_state(&self, u: &[f64]) -> Result<()> {
        match self.kind {
            ModelKind::OneWayWave => Ok(()),
            ModelKind::Euler1D => EulerConserved::from_slice(u).validate(),
        }
    }
}
