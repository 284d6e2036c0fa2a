//! Classical solvers used as oracles for the neural runs.
//!
//! - [`analytic_wave`]: closed-form solution of the one-way wave problem
//! - [`upwind_step`]: first-order upwind scheme for leftward unit-speed transport
//! - [`muscl_step`] / [`muscl_solve`]: second-order finite volumes with minmod
//!   slopes on the reconstruction variables, a Rusanov flux and SSP-RK2
//!
//! The finite-volume solver treats every grid point as the centre of a cell
//! of width `dx` and pads the domain with two ghost cells on each side.

use serde::{Deserialize, Serialize};

use crate::mesh::StateField;
use crate::models::{wave_inflow, ConservationLaw, Side};
use crate::trainer::Trajectory;
use crate::{Error, Result};

/// Solution of `u_t - u_x = 0` on `x <= 1` with inflow `sin(pi t)^2` at `x = 1`
/// and zero initial data. It is constant along `x + t = const`.
///
/// Also valid for `x > 1`, where it gives the inflow data a characteristic
/// will carry into the domain later; the finite-volume harness uses that for
/// exact ghost cells.
pub fn analytic_wave(x: f64, t: f64) -> f64 {
    let entry_time = t - (1.0 - x);
    if entry_time >= 0.0 {
        wave_inflow(entry_time)
    } else {
        0.0
    }
}

/// One explicit upwind step for leftward transport at unit speed:
/// `u_i += (dt/dx)(u_{i+1} - u_i)`, with the last point set to `boundary_right`.
pub fn upwind_step(u: &[f64], dx: f64, dt: f64, boundary_right: f64) -> Result<Vec<f64>> {
    if u.len() < 2 {
        return Err(Error::config("upwind step needs at least two points"));
    }
    if !(dx > 0.0 && dt > 0.0) {
        return Err(Error::config("upwind step needs positive dx and dt"));
    }
    let nu = dt / dx;
    if nu > 1.0 + 1e-12 {
        return Err(Error::config(format!("CFL number {nu} exceeds 1")));
    }
    let n = u.len();
    let mut next: Vec<f64> = u
        .windows(2)
        .map(|w| w[0] + nu * (w[1] - w[0]))
        .collect();
    next.push(boundary_right);
    debug_assert_eq!(next.len(), n);
    Ok(next)
}

/// Runs the upwind scheme for the wave problem with a fixed step, recording
/// every `stride`-th state.
pub fn upwind_solve(initial: &StateField, dt: f64, t_final: f64, stride: usize) -> Result<Trajectory> {
    if initial.n_components() != 1 {
        return Err(Error::config("the upwind scheme is scalar"));
    }
    if stride == 0 {
        return Err(Error::config("snapshot stride must be at least 1"));
    }
    let grid = *initial.grid();
    let n_steps = steps_to(t_final, dt);
    let mut traj = Trajectory::new(vec!["u".into()], initial.clone());
    let mut u = initial.values().to_vec();
    for step in 1..=n_steps {
        let t = step as f64 * dt;
        u = upwind_step(&u, grid.dx(), dt, wave_inflow(t))?;
        if step % stride == 0 {
            traj.snapshots.push(initial.successor(u.clone(), t)?);
        }
    }
    Ok(traj)
}

fn steps_to(t_final: f64, dt: f64) -> usize {
    if t_final <= 0.0 {
        return 0;
    }
    let ratio = t_final / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Limiter {
    Minmod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiemannSolver {
    Rusanov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeIntegrator {
    Ssprk2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MusclConfig {
    pub cfl: f64,
    pub limiter: Limiter,
    pub riemann: RiemannSolver,
    pub time_integrator: TimeIntegrator,
}

impl Default for MusclConfig {
    fn default() -> Self {
        MusclConfig {
            cfl: 0.4,
            limiter: Limiter::Minmod,
            riemann: RiemannSolver::Rusanov,
            time_integrator: TimeIntegrator::Ssprk2,
        }
    }
}

impl MusclConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::config(format!("cfl must lie in (0, 1), got {}", self.cfl)));
        }
        Ok(())
    }
}

/// Smallest-magnitude slope when both agree in sign, zero otherwise.
pub fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Ghost-cell states. `layer` is 1 for the cell adjacent to the domain and 2
/// for the outer one; `x` is the ghost cell centre.
pub trait GhostCells {
    fn ghost(&self, side: Side, layer: usize, x: f64, t: f64) -> Vec<f64>;
}

/// Dirichlet ghosts from the model's boundary data at the domain endpoint, or
/// zero-gradient copies on a non-Dirichlet side.
pub struct ModelGhosts<'a> {
    law: &'a dyn ConservationLaw,
    x_min: f64,
    x_max: f64,
    left_edge: Vec<f64>,
    right_edge: Vec<f64>,
}

impl GhostCells for ModelGhosts<'_> {
    fn ghost(&self, side: Side, _layer: usize, _x: f64, t: f64) -> Vec<f64> {
        match side {
            Side::Left if self.law.is_dirichlet(side) => self.law.boundary_value(side, self.x_min, t),
            Side::Right if self.law.is_dirichlet(side) => self.law.boundary_value(side, self.x_max, t),
            Side::Left => self.left_edge.clone(),
            Side::Right => self.right_edge.clone(),
        }
    }
}

impl<F: Fn(Side, usize, f64, f64) -> Vec<f64>> GhostCells for F {
    fn ghost(&self, side: Side, layer: usize, x: f64, t: f64) -> Vec<f64> {
        self(side, layer, x, t)
    }
}

/// Result of one finite-volume step.
#[derive(Debug, Clone)]
pub struct MusclStep {
    pub state: StateField,
    pub dt_used: f64,
    /// Net amount of each component that entered through the two boundaries
    /// during the step, `dt * (F_left - F_right)` combined over the RK stages.
    pub boundary_inflow: Vec<f64>,
}

struct Operator<'a> {
    law: &'a dyn ConservationLaw,
    cfg: &'a MusclConfig,
    n: usize,
    m: usize,
    dx: f64,
    x_min: f64,
}

impl Operator<'_> {
    /// Time derivative of every cell and the net boundary flux `F_left - F_right`.
    fn rhs(&self, u: &[f64], t: f64, ghosts: &dyn GhostCells) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n, m, dx) = (self.n, self.m, self.dx);
        // extended cells: 2 ghosts | n interior | 2 ghosts
        let mut cells: Vec<Vec<f64>> = Vec::with_capacity(n + 4);
        cells.push(ghosts.ghost(Side::Left, 2, self.x_min - 2.0 * dx, t));
        cells.push(ghosts.ghost(Side::Left, 1, self.x_min - dx, t));
        for i in 0..n {
            cells.push((0..m).map(|c| u[c * n + i]).collect());
        }
        let x_end = self.x_min + (n - 1) as f64 * dx;
        cells.push(ghosts.ghost(Side::Right, 1, x_end + dx, t));
        cells.push(ghosts.ghost(Side::Right, 2, x_end + 2.0 * dx, t));

        let recon = cells
            .iter()
            .enumerate()
            .map(|(k, c)| self.law.to_reconstruction(c).map_err(|e| e.at_index(k.saturating_sub(2))))
            .collect::<Result<Vec<_>>>()?;
        let slopes: Vec<Vec<f64>> = (0..n + 4)
            .map(|k| {
                if k == 0 || k == n + 3 {
                    return vec![0.0; m];
                }
                (0..m)
                    .map(|c| match self.cfg.limiter {
                        Limiter::Minmod => minmod(
                            recon[k][c] - recon[k - 1][c],
                            recon[k + 1][c] - recon[k][c],
                        ),
                    })
                    .collect()
            })
            .collect();

        // interface j sits between extended cells j and j + 1, j = 1..=n + 1
        let mut fluxes: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut fl = vec![0.0; m];
        let mut fr = vec![0.0; m];
        for j in 1..=n + 1 {
            let wl: Vec<f64> = (0..m).map(|c| recon[j][c] + 0.5 * slopes[j][c]).collect();
            let wr: Vec<f64> = (0..m).map(|c| recon[j + 1][c] - 0.5 * slopes[j + 1][c]).collect();
            let cell = j.saturating_sub(2).min(n - 1);
            let ul = self.law.from_reconstruction(&wl).map_err(|e| e.at_index(cell))?;
            let ur = self.law.from_reconstruction(&wr).map_err(|e| e.at_index(cell))?;
            self.law.flux(&ul, &mut fl).map_err(|e| e.at_index(cell))?;
            self.law.flux(&ur, &mut fr).map_err(|e| e.at_index(cell))?;
            let flux = match self.cfg.riemann {
                RiemannSolver::Rusanov => {
                    let lambda = self
                        .law
                        .max_wave_speed(&ul)?
                        .max(self.law.max_wave_speed(&ur)?);
                    (0..m)
                        .map(|c| 0.5 * (fl[c] + fr[c]) - 0.5 * lambda * (ur[c] - ul[c]))
                        .collect()
                }
            };
            fluxes.push(flux);
        }
        let mut dudt = vec![0.0; m * n];
        for i in 0..n {
            for c in 0..m {
                dudt[c * n + i] = -(fluxes[i + 1][c] - fluxes[i][c]) / dx;
            }
        }
        let net: Vec<f64> = (0..m).map(|c| fluxes[0][c] - fluxes[n][c]).collect();
        Ok((dudt, net))
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        for i in 0..self.n {
            let point: Vec<f64> = (0..self.m).map(|c| u[c * self.n + i]).collect();
            self.law.check_state(&point).map_err(|e| e.at_index(i))?;
        }
        Ok(())
    }

    fn stable_dt(&self, u: &[f64]) -> Result<f64> {
        let mut smax: f64 = 0.0;
        for i in 0..self.n {
            let point: Vec<f64> = (0..self.m).map(|c| u[c * self.n + i]).collect();
            smax = smax.max(self.law.max_wave_speed(&point).map_err(|e| e.at_index(i))?);
        }
        if !(smax > 0.0) {
            return Err(Error::Model("maximum wave speed is zero; no stable step".into()));
        }
        Ok(self.cfg.cfl * self.dx / smax)
    }
}

/// One SSP-RK2 step with the CFL-limited time step.
pub fn muscl_step(law: &dyn ConservationLaw, state: &StateField, cfg: &MusclConfig) -> Result<MusclStep> {
    let ghosts = default_ghosts(law, state);
    muscl_step_with(law, state, cfg, None, &ghosts)
}

fn default_ghosts<'a>(law: &'a dyn ConservationLaw, state: &StateField) -> ModelGhosts<'a> {
    let n = state.grid().n_points();
    ModelGhosts {
        law,
        x_min: state.grid().x_min(),
        x_max: state.grid().x_max(),
        left_edge: state.point(0),
        right_edge: state.point(n - 1),
    }
}

/// One step with an optional cap on the time step and caller-supplied ghosts.
pub fn muscl_step_with(
    law: &dyn ConservationLaw,
    state: &StateField,
    cfg: &MusclConfig,
    dt_max: Option<f64>,
    ghosts: &dyn GhostCells,
) -> Result<MusclStep> {
    cfg.validate()?;
    if state.n_components() != law.n_components() {
        return Err(Error::config("state does not match the model"));
    }
    let grid = state.grid();
    let op = Operator {
        law,
        cfg,
        n: grid.n_points(),
        m: law.n_components(),
        dx: grid.dx(),
        x_min: grid.x_min(),
    };
    let u0 = state.values();
    op.check(u0)?;
    let mut dt = op.stable_dt(u0)?;
    if let Some(cap) = dt_max {
        dt = dt.min(cap);
    }
    let t = state.time();
    let (k0, b0) = op.rhs(u0, t, ghosts)?;
    let u1: Vec<f64> = u0.iter().zip(&k0).map(|(u, k)| u + dt * k).collect();
    op.check(&u1)?;
    let (k1, b1) = op.rhs(&u1, t + dt, ghosts)?;
    let u2: Vec<f64> = u0
        .iter()
        .zip(&u1)
        .zip(&k1)
        .map(|((u, v), k)| 0.5 * u + 0.5 * (v + dt * k))
        .collect();
    op.check(&u2)?;
    let boundary_inflow = b0.iter().zip(&b1).map(|(a, b)| 0.5 * dt * (a + b)).collect();
    Ok(MusclStep {
        state: state.successor(u2, t + dt)?,
        dt_used: dt,
        boundary_inflow,
    })
}

/// A finite-volume run with the boundary inflow accumulated over all steps.
#[derive(Debug, Clone)]
pub struct MusclRun {
    pub trajectory: Trajectory,
    pub boundary_inflow: Vec<f64>,
    pub steps: usize,
}

/// Steps from `initial` to every time in `output_times` (and finally to
/// `t_final`), shortening the last step before each output so it lands exactly.
pub fn muscl_solve(
    law: &dyn ConservationLaw,
    initial: &StateField,
    t_final: f64,
    output_times: &[f64],
    cfg: &MusclConfig,
) -> Result<MusclRun> {
    let ghosts = default_ghosts(law, initial);
    muscl_solve_with(law, initial, t_final, output_times, cfg, &ghosts)
}

pub fn muscl_solve_with(
    law: &dyn ConservationLaw,
    initial: &StateField,
    t_final: f64,
    output_times: &[f64],
    cfg: &MusclConfig,
    ghosts: &dyn GhostCells,
) -> Result<MusclRun> {
    cfg.validate()?;
    if !(t_final >= 0.0) {
        return Err(Error::config(format!("final time must be nonnegative, got {t_final}")));
    }
    let mut targets: Vec<f64> = output_times
        .iter()
        .copied()
        .filter(|&t| t > initial.time() && t < t_final)
        .collect();
    if t_final > initial.time() {
        targets.push(t_final);
    }
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut traj = Trajectory::new(law.component_names(), initial.clone());
    let mut inflow = vec![0.0; law.n_components()];
    let mut state = initial.clone();
    let mut steps = 0;
    for target in targets {
        while state.time() < target {
            let remaining = target - state.time();
            let step = muscl_step_with(law, &state, cfg, Some(remaining), ghosts).map_err(|e| {
                Error::Model(format!("MUSCL step {} at t = {}: {e}", steps + 1, state.time()))
            })?;
            for (acc, b) in inflow.iter_mut().zip(&step.boundary_inflow) {
                *acc += b;
            }
            state = if step.dt_used == remaining {
                step.state.successor(step.state.values().to_vec(), target)?
            } else {
                step.state
            };
            steps += 1;
        }
        traj.snapshots.push(state.clone());
    }
    Ok(MusclRun {
        trajectory: traj,
        boundary_inflow: inflow,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Grid1D;
    use crate::models::ModelSpec;

    #[test]
    fn analytic_wave_values() {
        for t in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(analytic_wave(1.0, t), wave_inflow(t));
        }
        assert_eq!(analytic_wave(0.2, 0.5), 0.0);
        assert!((analytic_wave(0.5, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_wave_satisfies_the_pde() {
        // centered differences of u_t - u_x on a fine grid away from t = 1 - x
        let h = 1e-4;
        for &(x, t) in &[(0.8, 0.5), (0.3, 0.9), (0.95, 0.1), (0.6, 0.75)] {
            let ut = (analytic_wave(x, t + h) - analytic_wave(x, t - h)) / (2.0 * h);
            let ux = (analytic_wave(x + h, t) - analytic_wave(x - h, t)) / (2.0 * h);
            assert!((ut - ux).abs() < 1e-6, "({x}, {t}): {ut} vs {ux}");
        }
    }

    #[test]
    fn upwind_constant_and_unit_cfl() {
        let u = vec![0.4; 6];
        let next = upwind_step(&u, 0.1, 0.05, 0.4).unwrap();
        assert_eq!(next, u);
        let u: Vec<f64> = (0..6).map(|i| (i * i) as f64).collect();
        let next = upwind_step(&u, 0.1, 0.1, 99.0).unwrap();
        assert_eq!(&next[..5], &u[1..]);
        assert_eq!(next[5], 99.0);
        assert!(upwind_step(&u, 0.1, 0.2, 0.0).is_err());
    }

    #[test]
    fn minmod_cases() {
        assert_eq!(minmod(1.0, 2.0), 1.0);
        assert_eq!(minmod(-3.0, -2.0), -2.0);
        assert_eq!(minmod(1.0, -1.0), 0.0);
        assert_eq!(minmod(0.0, 5.0), 0.0);
        // linear data: both one-sided slopes agree, so the slope is unlimited
        assert_eq!(minmod(0.5, 0.5), 0.5);
    }

    #[test]
    fn uniform_state_is_steady() {
        let grid = Grid1D::new(0.0, 1.0, 21).unwrap();
        let mut model = ModelSpec::sod();
        let w = crate::models::EulerPrimitive::new(2.0, 0.3, 1.5).unwrap();
        model.initial = crate::models::InitialCondition::Riemann { left: w, right: w, split: 0.5 };
        let s = model.initial_state(&grid).unwrap();
        let step = muscl_step(&model, &s, &MusclConfig::default()).unwrap();
        for (a, b) in step.state.values().iter().zip(s.values()) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_cfl() {
        let cfg = MusclConfig { cfl: 1.2, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn solve_lands_on_output_times() {
        let grid = Grid1D::new(0.0, 1.0, 51).unwrap();
        let model = ModelSpec::sod();
        let s = model.initial_state(&grid).unwrap();
        let run = muscl_solve(&model, &s, 0.1, &[0.05], &MusclConfig::default()).unwrap();
        assert_eq!(run.trajectory.times(), vec![0.0, 0.05, 0.1]);
        let run0 = muscl_solve(&model, &s, 0.0, &[], &MusclConfig::default()).unwrap();
        assert_eq!(run0.trajectory.snapshots.len(), 1);
    }

    fn wave_ghosts(side: Side, _layer: usize, x: f64, t: f64) -> Vec<f64> {
        match side {
            Side::Left => vec![0.0],
            Side::Right => vec![analytic_wave(x, t)],
        }
    }

    fn muscl_wave_error(n: usize, t_final: f64) -> f64 {
        let grid = Grid1D::new(0.0, 1.0, n).unwrap();
        let model = ModelSpec::wave();
        let s = model.initial_state(&grid).unwrap();
        let run = muscl_solve_with(&model, &s, t_final, &[], &MusclConfig::default(), &wave_ghosts).unwrap();
        let last = run.trajectory.last();
        grid.coordinates()
            .iter()
            .zip(last.values())
            .map(|(&x, &u)| (u - analytic_wave(x, t_final)).abs() * grid.dx())
            .sum()
    }

    #[test]
    fn muscl_scalar_convergence_is_second_order() {
        let e: Vec<f64> = [51, 101, 201, 401].iter().map(|&n| muscl_wave_error(n, 0.8)).collect();
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.8, "errors {e:?}");
        }
    }

    #[test]
    fn upwind_error_halves_with_the_grid() {
        let err = |n: usize| {
            let grid = Grid1D::new(0.0, 1.0, n).unwrap();
            let dt = 0.5 * grid.dx();
            let s = StateField::new(grid, 1, vec![0.0; n], 0.0).unwrap();
            let traj = upwind_solve(&s, dt, 0.8, 1).unwrap();
            let last = traj.last();
            assert!((last.time() - 0.8).abs() < 1e-12);
            grid.coordinates()
                .iter()
                .zip(last.values())
                .map(|(&x, &u)| (u - analytic_wave(x, 0.8)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(101), err(201), err(401));
        for r in [e1 / e2, e2 / e3] {
            assert!((1.6..=2.4).contains(&r), "{e1} {e2} {e3}");
        }
    }

    #[test]
    fn upwind_unit_cfl_is_exact() {
        let grid = Grid1D::new(0.0, 1.0, 101).unwrap();
        let s = StateField::new(grid, 1, vec![0.0; 101], 0.0).unwrap();
        let traj = upwind_solve(&s, grid.dx(), 0.5, 10).unwrap();
        for snap in &traj.snapshots {
            for (i, &u) in snap.values().iter().enumerate() {
                let exact = analytic_wave(grid.x(i), snap.time());
                assert!((u - exact).abs() < 1e-14, "t = {}, i = {i}: {u} vs {exact}", snap.time());
            }
        }
    }

    fn sod_run(n: usize) -> MusclRun {
        let grid = Grid1D::new(0.0, 1.0, n).unwrap();
        let model = ModelSpec::sod();
        let s = model.initial_state(&grid).unwrap();
        muscl_solve(&model, &s, 0.15, &[0.075], &MusclConfig::default()).unwrap()
    }

    #[test]
    fn sod_stays_positive_and_bounded() {
        let run = sod_run(101);
        for snap in &run.trajectory.snapshots {
            for i in 0..snap.grid().n_points() {
                let w = crate::models::EulerConserved::from_slice(&snap.point(i)).to_primitive().unwrap();
                assert!(w.rho > 0.0 && w.p > 0.0);
                assert!((1.0..=8.0).contains(&w.rho), "rho = {} at {i}", w.rho);
            }
        }
        // monotone through the shock: from the post-shock plateau down to the right state
        let rho = run.trajectory.last().component(0).to_vec();
        let biggest_drop = |from: usize| {
            (from..rho.len())
                .max_by(|&a, &b| (rho[a - 1] - rho[a]).total_cmp(&(rho[b - 1] - rho[b])))
                .unwrap()
        };
        // the contact carries the largest jump; the shock is the largest one to its right
        let contact = biggest_drop(1);
        let shock = biggest_drop(contact + 5);
        assert!(shock > 70 && shock < 90, "contact at {contact}, shock at {shock}");
        for i in shock - 4..(shock + 6).min(rho.len() - 1) {
            assert!(rho[i + 1] <= rho[i], "density increases at {i}: {} -> {}", rho[i], rho[i + 1]);
        }
        assert!((rho[0] - 8.0).abs() < 1e-12);
        assert!((rho[rho.len() - 1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn every_step_conserves_up_to_boundary_flux() {
        let grid = Grid1D::new(0.0, 1.0, 101).unwrap();
        let model = ModelSpec::sod();
        let mut s = model.initial_state(&grid).unwrap();
        for _ in 0..60 {
            let step = muscl_step(&model, &s, &MusclConfig::default()).unwrap();
            for c in 0..3 {
                let before: f64 = s.component(c).iter().sum::<f64>() * grid.dx();
                let after: f64 = step.state.component(c).iter().sum::<f64>() * grid.dx();
                let scale: f64 = s.component(c).iter().map(|v| v.abs()).sum::<f64>() * grid.dx();
                let drift = (after - before - step.boundary_inflow[c]).abs();
                assert!(drift <= 16.0 * f64::EPSILON * scale.max(1.0), "component {c}: {drift:e}");
            }
            s = step.state;
        }
    }

    #[test]
    fn sod_conserves_mass_up_to_boundary_flux() {
        let run = sod_run(101);
        let dx = run.trajectory.grid().dx();
        for c in 0..3 {
            let total = |s: &StateField| s.component(c).iter().sum::<f64>() * dx;
            let start = total(&run.trajectory.snapshots[0]);
            let end = total(run.trajectory.last());
            let drift = (end - start - run.boundary_inflow[c]).abs();
            assert!(drift <= 1e-12 * start.abs().max(1.0), "component {c}: {drift}");
        }
    }

    #[test]
    fn sod_refinement_is_self_consistent() {
        let fine = sod_run(401);
        let diff = |n: usize| {
            let run = sod_run(n);
            let step = 400 / (n - 1);
            let a = run.trajectory.last().component(0);
            let b = fine.trajectory.last().component(0);
            let dx = run.trajectory.grid().dx();
            a.iter().enumerate().map(|(i, v)| (v - b[i * step]).abs() * dx).sum::<f64>()
        };
        let (d1, d2) = (diff(101), diff(201));
        assert!(d2 < d1, "{d1} {d2}");
    }
}
