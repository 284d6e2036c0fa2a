//! Residual losses for one network step `u_n -> u_pred`.
//!
//! Both forms return the loss split into an interior residual part and a
//! Dirichlet boundary penalty, together with the exact gradient of the total
//! with respect to every entry of the prediction. Flux Jacobians are chained
//! analytically, so no automatic differentiation is involved here.

use serde::{Deserialize, Serialize};

use crate::mesh::{Grid1D, StateField};
use crate::models::{ConservationLaw, Side};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Pointwise finite-difference residual of `u_t + F(u)_x`.
    Differential,
    /// Space-time trapezoidal residual on every cell `[x_k, x_{k+1}]`.
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    /// `(F(u_i) - F(u_{i-1})) / dx`
    Backward,
    /// `(F(u_{i+1}) - F(u_i)) / dx`
    Forward,
}

/// How squared interior residuals are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteriorWeighting {
    /// Plain sum of squares.
    Raw,
    /// Sum of squares times `dx` (a Riemann sum of the squared residual).
    Dx,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossForm {
    pub kind: LossKind,
    /// Only read by the differential form.
    pub stencil: Stencil,
    pub weighting: InteriorWeighting,
    pub boundary_weight: f64,
}

impl LossForm {
    pub fn differential() -> Self {
        LossForm {
            kind: LossKind::Differential,
            stencil: Stencil::Backward,
            weighting: InteriorWeighting::Dx,
            boundary_weight: 1.0,
        }
    }

    pub fn integral() -> Self {
        LossForm {
            kind: LossKind::Integral,
            stencil: Stencil::Backward,
            weighting: InteriorWeighting::Raw,
            boundary_weight: 1.0,
        }
    }

    pub fn of_kind(kind: LossKind) -> Self {
        match kind {
            LossKind::Differential => Self::differential(),
            LossKind::Integral => Self::integral(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.boundary_weight >= 0.0 && self.boundary_weight.is_finite()) {
            return Err(Error::config(format!(
                "boundary weight must be finite and nonnegative, got {}",
                self.boundary_weight
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub interior: f64,
    pub boundary: f64,
    /// d(total)/d(u_pred), component-major like the prediction.
    pub grad: Vec<f64>,
}

/// `(g_k + g_{k+1}) dt / 2`
pub fn trapezoid_time(g_k: f64, g_k1: f64, dt: f64) -> f64 {
    0.5 * (g_k + g_k1) * dt
}

/// Composite trapezoid of `g` over points `i_from..=i_to`.
pub fn trapezoid_space(g: &[f64], i_from: usize, i_to: usize, dx: f64) -> Result<f64> {
    if i_from >= i_to || i_to >= g.len() {
        return Err(Error::usage(format!(
            "trapezoid range must satisfy i_from < i_to < {}, got {i_from}..{i_to}",
            g.len()
        )));
    }
    // compensated summation keeps long sums within a few ulps
    let mut sum = 0.0;
    let mut comp = 0.0;
    for w in g[i_from..=i_to].windows(2) {
        let term = 0.5 * (w[0] + w[1]) * dx;
        let t = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
    }
    Ok(sum + comp)
}

/// Per-point values at the prediction: state, flux and flux Jacobian.
struct PointData {
    u: Vec<Vec<f64>>,
    flux: Vec<Vec<f64>>,
    jac: Vec<Vec<f64>>,
}

fn point_data(law: &dyn ConservationLaw, values: &[f64], n: usize, with_jac: bool) -> Result<PointData> {
    let m = law.n_components();
    let mut data = PointData {
        u: Vec::with_capacity(n),
        flux: Vec::with_capacity(n),
        jac: Vec::with_capacity(if with_jac { n } else { 0 }),
    };
    for i in 0..n {
        let u: Vec<f64> = (0..m).map(|c| values[c * n + i]).collect();
        let wrap = |e: Error| Error::Loss {
            index: i,
            source: Box::new(e.at_index(i)),
        };
        let mut f = vec![0.0; m];
        law.flux(&u, &mut f).map_err(wrap)?;
        if with_jac {
            let mut j = vec![0.0; m * m];
            law.flux_jacobian(&u, &mut j).map_err(wrap)?;
            data.jac.push(j);
        }
        data.u.push(u);
        data.flux.push(f);
    }
    Ok(data)
}

fn check_shapes(law: &dyn ConservationLaw, grid: &Grid1D, u_n: &StateField, u_pred: &[f64], dt: f64) -> Result<()> {
    let m = law.n_components();
    if u_n.n_components() != m || u_n.grid() != grid {
        return Err(Error::usage("state does not match the model or the grid"));
    }
    if u_pred.len() != m * grid.n_points() {
        return Err(Error::usage(format!(
            "prediction has {} values, expected {}",
            u_pred.len(),
            m * grid.n_points()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::usage(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// Adds `scale * J^T r` into `out`.
fn add_jt_r(jac: &[f64], r: &[f64], scale: f64, out: &mut [f64]) {
    let m = r.len();
    for (c, o) in out.iter_mut().enumerate() {
        let s: f64 = (0..m).map(|row| jac[row * m + c] * r[row]).sum();
        *o += scale * s;
    }
}

fn scatter(grad: &mut [f64], n: usize, i: usize, point_grad: &[f64]) {
    for (c, g) in point_grad.iter().enumerate() {
        grad[c * n + i] += g;
    }
}

fn boundary_penalty(
    law: &dyn ConservationLaw,
    grid: &Grid1D,
    pred: &PointData,
    t_next: f64,
    weight: f64,
    grad: &mut [f64],
) -> f64 {
    let n = grid.n_points();
    let mut total = 0.0;
    for (side, i) in [(Side::Left, 0), (Side::Right, n - 1)] {
        if !law.is_dirichlet(side) {
            continue;
        }
        let target = law.boundary_value(side, grid.x(i), t_next);
        let diff: Vec<f64> = pred.u[i].iter().zip(&target).map(|(v, b)| v - b).collect();
        total += weight * diff.iter().map(|d| d * d).sum::<f64>();
        let g: Vec<f64> = diff.iter().map(|d| 2.0 * weight * d).collect();
        scatter(grad, n, i, &g);
    }
    total
}

/// Finite-difference residual `(u_pred - u_n)/dt + D_x F(u_pred)` squared and
/// summed over the interior points `1..n-1`; the endpoints are covered by the
/// boundary penalty, evaluated against the prediction at `t_n + dt`.
pub fn differential_loss(
    law: &dyn ConservationLaw,
    grid: &Grid1D,
    u_n: &StateField,
    u_pred: &[f64],
    dt: f64,
    form: &LossForm,
) -> Result<LossValue> {
    check_shapes(law, grid, u_n, u_pred, dt)?;
    let n = grid.n_points();
    let m = law.n_components();
    let dx = grid.dx();
    let w = match form.weighting {
        InteriorWeighting::Raw => 1.0,
        InteriorWeighting::Dx => dx,
    };
    let pred = point_data(law, u_pred, n, true)?;
    let mut grad = vec![0.0; m * n];
    let mut interior = 0.0;
    let mut r = vec![0.0; m];
    let mut g = vec![0.0; m];
    for i in 1..n - 1 {
        let (a, b) = match form.stencil {
            Stencil::Backward => (i - 1, i),
            Stencil::Forward => (i, i + 1),
        };
        for c in 0..m {
            r[c] = (pred.u[i][c] - u_n.get(c, i)) / dt + (pred.flux[b][c] - pred.flux[a][c]) / dx;
        }
        interior += w * r.iter().map(|v| v * v).sum::<f64>();

        let time_scale: Vec<f64> = r.iter().map(|v| 2.0 * w * v / dt).collect();
        scatter(&mut grad, n, i, &time_scale);
        g.fill(0.0);
        add_jt_r(&pred.jac[b], &r, 2.0 * w / dx, &mut g);
        scatter(&mut grad, n, b, &g);
        g.fill(0.0);
        add_jt_r(&pred.jac[a], &r, -2.0 * w / dx, &mut g);
        scatter(&mut grad, n, a, &g);
    }
    let boundary = boundary_penalty(law, grid, &pred, u_n.time() + dt, form.boundary_weight, &mut grad);
    Ok(LossValue {
        total: interior + boundary,
        interior,
        boundary,
        grad,
    })
}

/// Residual of the integral balance on cell `[x_k, x_{k+1}]` over one step:
/// change of the trapezoidal cell content minus the trapezoidal time
/// integral of the flux through both cell faces.
pub fn integral_cell_residual(
    law: &dyn ConservationLaw,
    u_n: &StateField,
    u_pred: &[f64],
    k: usize,
    dx: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let n = u_n.grid().n_points();
    let m = law.n_components();
    if k + 1 >= n {
        return Err(Error::usage(format!("cell index {k} out of range for {n} points")));
    }
    if u_pred.len() != m * n || u_n.n_components() != m {
        return Err(Error::usage("prediction does not match the state shape"));
    }
    let flux_at = |values: &[f64], i: usize| -> Result<Vec<f64>> {
        let u: Vec<f64> = (0..m).map(|c| values[c * n + i]).collect();
        let mut f = vec![0.0; m];
        law.flux(&u, &mut f).map_err(|e| Error::Loss {
            index: i,
            source: Box::new(e.at_index(i)),
        })?;
        Ok(f)
    };
    let fu_k = flux_at(u_n.values(), k)?;
    let fu_k1 = flux_at(u_n.values(), k + 1)?;
    let fv_k = flux_at(u_pred, k)?;
    let fv_k1 = flux_at(u_pred, k + 1)?;
    Ok((0..m)
        .map(|c| {
            let v = &u_pred[c * n..(c + 1) * n];
            let u = u_n.component(c);
            trapezoid_space(v, k, k + 1, dx).unwrap() - trapezoid_space(u, k, k + 1, dx).unwrap()
                - trapezoid_time(fu_k[c], fv_k[c], dt)
                + trapezoid_time(fu_k1[c], fv_k1[c], dt)
        })
        .collect())
}

/// Sum over cells of the squared cell residuals plus the boundary penalty.
pub fn integral_loss(
    law: &dyn ConservationLaw,
    grid: &Grid1D,
    u_n: &StateField,
    u_pred: &[f64],
    dt: f64,
    form: &LossForm,
) -> Result<LossValue> {
    check_shapes(law, grid, u_n, u_pred, dt)?;
    let n = grid.n_points();
    let m = law.n_components();
    let dx = grid.dx();
    let w = match form.weighting {
        InteriorWeighting::Raw => 1.0,
        InteriorWeighting::Dx => dx,
    };
    let pred = point_data(law, u_pred, n, true)?;
    let prev = point_data(law, u_n.values(), n, false)?;
    let mut grad = vec![0.0; m * n];
    let mut interior = 0.0;
    let mut l = vec![0.0; m];
    let mut g = vec![0.0; m];
    for k in 0..n - 1 {
        for c in 0..m {
            l[c] = 0.5 * (pred.u[k][c] + pred.u[k + 1][c]) * dx
                - 0.5 * (prev.u[k][c] + prev.u[k + 1][c]) * dx
                - 0.5 * (prev.flux[k][c] + pred.flux[k][c]) * dt
                + 0.5 * (prev.flux[k + 1][c] + pred.flux[k + 1][c]) * dt;
        }
        interior += w * l.iter().map(|v| v * v).sum::<f64>();

        for (gc, lc) in g.iter_mut().zip(&l) {
            *gc = w * dx * lc;
        }
        add_jt_r(&pred.jac[k], &l, -w * dt, &mut g);
        scatter(&mut grad, n, k, &g);
        for (gc, lc) in g.iter_mut().zip(&l) {
            *gc = w * dx * lc;
        }
        add_jt_r(&pred.jac[k + 1], &l, w * dt, &mut g);
        scatter(&mut grad, n, k + 1, &g);
    }
    let boundary = boundary_penalty(law, grid, &pred, u_n.time() + dt, form.boundary_weight, &mut grad);
    Ok(LossValue {
        total: interior + boundary,
        interior,
        boundary,
        grad,
    })
}

/// Dispatches on `form.kind`.
pub fn evaluate(
    law: &dyn ConservationLaw,
    grid: &Grid1D,
    u_n: &StateField,
    u_pred: &[f64],
    dt: f64,
    form: &LossForm,
) -> Result<LossValue> {
    match form.kind {
        LossKind::Differential => differential_loss(law, grid, u_n, u_pred, dt, form),
        LossKind::Integral => integral_loss(law, grid, u_n, u_pred, dt, form),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;

    fn grid3() -> Grid1D {
        Grid1D::new(0.0, 1.0, 3).unwrap()
    }

    #[test]
    fn trapezoid_rules() {
        assert_eq!(trapezoid_time(3.0, 3.0, 0.5), 1.5);
        assert_eq!(trapezoid_time(0.0, 2.0, 0.01), 0.01);
        assert_eq!(trapezoid_space(&[0.0, 1.0, 2.0], 0, 2, 0.5).unwrap(), 1.0);
        assert_eq!(trapezoid_space(&[2.0; 5], 1, 4, 0.25).unwrap(), 1.5);
        assert_eq!(
            trapezoid_space(&[0.3, 0.9], 0, 1, 0.1).unwrap(),
            trapezoid_time(0.3, 0.9, 0.1)
        );
        assert!(trapezoid_space(&[1.0, 2.0], 1, 1, 0.1).is_err());
        assert!(trapezoid_space(&[1.0, 2.0], 0, 2, 0.1).is_err());
    }

    #[test]
    fn wave_differential_hand_example() {
        let g = grid3();
        let u_n = StateField::new(g, 1, vec![0.0; 3], 0.0).unwrap();
        let v = [0.0, 0.01, 0.0];
        let loss = differential_loss(&ModelSpec::wave(), &g, &u_n, &v, 0.01, &LossForm::differential()).unwrap();
        // residual 1 + (-0.01 - 0) / 0.5 = 0.98, weighted by dx = 0.5
        assert!((loss.interior - 0.4802).abs() < 1e-14, "{}", loss.interior);
        // u_B(1, 0.01) = sin^2(0.01 pi) is small but nonzero
        let ub = crate::models::wave_inflow(0.01);
        assert!((loss.boundary - ub * ub).abs() < 1e-15);
    }

    #[test]
    fn constant_wave_state_has_no_interior_residual() {
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let u_n = StateField::new(g, 1, vec![0.7; 11], 0.0).unwrap();
        for kind in [LossKind::Differential, LossKind::Integral] {
            let loss = evaluate(&ModelSpec::wave(), &g, &u_n, &[0.7; 11], 0.1, &LossForm::of_kind(kind)).unwrap();
            assert!(loss.interior.abs() < 1e-28, "{kind:?}: {}", loss.interior);
        }
    }

    #[test]
    fn wave_cell_residual_hand_example() {
        let g = Grid1D::new(0.0, 0.3, 2 + 1).unwrap();
        let u_n = StateField::new(g, 1, vec![1.0, 2.0, 2.0], 0.0).unwrap();
        let l = integral_cell_residual(&ModelSpec::wave(), &u_n, &[1.0, 2.0, 2.0], 0, g.dx(), 0.01).unwrap();
        assert!((l[0] + 0.01).abs() < 1e-16, "{}", l[0]);
    }

    #[test]
    fn euler_cell_residual_at_rest_is_zero() {
        let g = grid3();
        let vals = vec![8.0, 8.0, 8.0, 0.0, 0.0, 0.0, 8.0, 8.0, 8.0];
        let u_n = StateField::new(g, 3, vals.clone(), 0.0).unwrap();
        for k in 0..2 {
            let l = integral_cell_residual(&ModelSpec::sod(), &u_n, &vals, k, g.dx(), 0.0025).unwrap();
            assert_eq!(l, vec![0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn euler_errors_carry_index() {
        let g = grid3();
        let u_n = StateField::new(g, 3, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 0.0).unwrap();
        let bad = vec![1.0, -1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let err = integral_loss(&ModelSpec::sod(), &g, &u_n, &bad, 0.01, &LossForm::integral()).unwrap_err();
        assert!(matches!(err, Error::Loss { index: 1, .. }), "{err}");
    }

    #[test]
    fn shape_checks() {
        let g = grid3();
        let u_n = StateField::new(g, 1, vec![0.0; 3], 0.0).unwrap();
        let wave = ModelSpec::wave();
        assert!(integral_loss(&wave, &g, &u_n, &[0.0; 2], 0.01, &LossForm::integral()).is_err());
        assert!(integral_loss(&wave, &g, &u_n, &[0.0; 3], 0.0, &LossForm::integral()).is_err());
        assert!(integral_cell_residual(&wave, &u_n, &[0.0; 3], 2, 0.5, 0.01).is_err());
    }

    use proptest::prelude::*;

    /// Smooth Euler state with positive density and pressure.
    fn smooth_euler(grid: &Grid1D, a: f64, b: f64, phase: f64, t: f64) -> Vec<f64> {
        let xs = grid.coordinates();
        let prim: Vec<(f64, f64, f64)> = xs
            .iter()
            .map(|&x| {
                let rho = 2.0 + a * (3.0 * x + phase + t).sin();
                let u = b * (2.0 * x - t).cos();
                let p = 1.5 + 0.5 * a * (x + phase - 2.0 * t).cos();
                (rho, u, p)
            })
            .collect();
        let mut v = Vec::with_capacity(3 * xs.len());
        v.extend(prim.iter().map(|q| q.0));
        v.extend(prim.iter().map(|q| q.0 * q.1));
        v.extend(prim.iter().map(|q| q.2 + 0.5 * q.0 * q.1 * q.1));
        v
    }

    fn smooth_wave(grid: &Grid1D, a: f64, phase: f64, t: f64) -> Vec<f64> {
        grid.coordinates()
            .iter()
            .map(|&x| a * (4.0 * x + t + phase).sin() + 0.3 * (x - t).cos())
            .collect()
    }

    fn check_gradient(law: &ModelSpec, grid: &Grid1D, u_n: &StateField, v: &[f64], dt: f64, form: &LossForm) {
        let loss = evaluate(law, grid, u_n, v, dt, form).unwrap();
        let h = 1e-6;
        let gmax = loss.grad.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(1e-12);
        let mut w = v.to_vec();
        for j in 0..v.len() {
            w[j] = v[j] + h;
            let lp = evaluate(law, grid, u_n, &w, dt, form).unwrap().total;
            w[j] = v[j] - h;
            let lm = evaluate(law, grid, u_n, &w, dt, form).unwrap().total;
            w[j] = v[j];
            let fd = (lp - lm) / (2.0 * h);
            let err = (fd - loss.grad[j]).abs() / gmax;
            assert!(err <= 1e-5, "{:?} entry {j}: analytic {} vs fd {fd}", form.kind, loss.grad[j]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn wave_gradients_match_finite_differences(
            n in 3usize..12, a in -1.0f64..1.0, phase in 0.0f64..6.0, dt in 0.005f64..0.05,
            bw in 0.1f64..2.0, forward in any::<bool>(),
        ) {
            let grid = Grid1D::new(0.0, 1.0, n).unwrap();
            let law = ModelSpec::wave();
            let u_n = StateField::new(grid, 1, smooth_wave(&grid, a, phase, 0.0), 0.0).unwrap();
            let v = smooth_wave(&grid, a, phase + 0.1, dt);
            for kind in [LossKind::Differential, LossKind::Integral] {
                let mut form = LossForm::of_kind(kind);
                form.boundary_weight = bw;
                if forward {
                    form.stencil = Stencil::Forward;
                }
                check_gradient(&law, &grid, &u_n, &v, dt, &form);
            }
        }

        #[test]
        fn euler_gradients_match_finite_differences(
            n in 3usize..10, a in -0.8f64..0.8, b in -0.5f64..0.5, phase in 0.0f64..6.0,
            dt in 0.001f64..0.01,
        ) {
            let grid = Grid1D::new(0.0, 1.0, n).unwrap();
            let law = ModelSpec::sod();
            let u_n = StateField::new(grid, 3, smooth_euler(&grid, a, b, phase, 0.0), 0.0).unwrap();
            let v = smooth_euler(&grid, a, b, phase + 0.05, dt);
            for kind in [LossKind::Differential, LossKind::Integral] {
                check_gradient(&law, &grid, &u_n, &v, dt, &LossForm::of_kind(kind));
            }
        }

        #[test]
        fn totals_are_sums_of_nonnegative_parts(
            n in 3usize..20, a in -1.0f64..1.0, phase in 0.0f64..6.0, dt in 0.001f64..0.1,
        ) {
            let grid = Grid1D::new(0.0, 1.0, n).unwrap();
            let u_n = StateField::new(grid, 1, smooth_wave(&grid, a, phase, 0.0), 0.0).unwrap();
            let v = smooth_wave(&grid, -a, phase, 0.0);
            for kind in [LossKind::Differential, LossKind::Integral] {
                let l = evaluate(&ModelSpec::wave(), &grid, &u_n, &v, dt, &LossForm::of_kind(kind)).unwrap();
                prop_assert!(l.interior >= 0.0 && l.boundary >= 0.0);
                prop_assert_eq!(l.total, l.interior + l.boundary);
                prop_assert!(l.grad.iter().all(|g| g.is_finite()));
            }
        }

    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn trapezoid_integrates_linear_functions(
            a in -100.0f64..100.0, b in -100.0f64..100.0, n in 3usize..200,
            x0 in -10.0f64..10.0, len in 0.01f64..10.0,
        ) {
            let grid = Grid1D::new(x0, x0 + len, n).unwrap();
            let g = grid.sample(|x| a + b * x).unwrap();
            let (i, j) = (0, n - 1);
            let (xi, xj) = (grid.x(i), grid.x(j));
            let exact = a * (xj - xi) + 0.5 * b * (xj * xj - xi * xi);
            let got = trapezoid_space(&g, i, j, grid.dx()).unwrap();
            // scale: the largest term the exact value is assembled from
            let scale = (a * (xj - xi)).abs().max((0.5 * b * xj * xj).abs()).max((0.5 * b * xi * xi).abs());
            prop_assert!((got - exact).abs() <= 4.0 * f64::EPSILON * scale,
                "{got} vs {exact}");
            let t = trapezoid_time(a, a + b, 0.37);
            prop_assert!((t - 0.37 * (a + 0.5 * b)).abs() <= 4.0 * f64::EPSILON * 0.37 * (a.abs() + b.abs()));
        }
    }

    #[test]
    fn differential_and_integral_agree_to_first_order() {
        // max |l_k / (dx dt) - r_{k+1}| on a smooth state shrinks linearly in (dx, dt)
        let gap = |n: usize, dt: f64, euler: bool| -> f64 {
            let grid = Grid1D::new(0.0, 1.0, n).unwrap();
            let (law, m, u0, v) = if euler {
                (ModelSpec::sod(), 3, smooth_euler(&grid, 0.5, 0.3, 1.0, 0.0), smooth_euler(&grid, 0.5, 0.3, 1.0, dt))
            } else {
                (ModelSpec::wave(), 1, smooth_wave(&grid, 0.7, 0.2, 0.0), smooth_wave(&grid, 0.7, 0.2, dt))
            };
            let u_n = StateField::new(grid, m, u0, 0.0).unwrap();
            let dx = grid.dx();
            let mut worst: f64 = 0.0;
            let mut f_b = vec![0.0; m];
            let mut f_a = vec![0.0; m];
            for k in 0..n - 1 {
                let l = integral_cell_residual(&law, &u_n, &v, k, dx, dt).unwrap();
                let point = |i: usize| (0..m).map(|c| v[c * n + i]).collect::<Vec<_>>();
                law.flux(&point(k + 1), &mut f_b).unwrap();
                law.flux(&point(k), &mut f_a).unwrap();
                for c in 0..m {
                    let r = (v[c * n + k + 1] - u_n.get(c, k + 1)) / dt + (f_b[c] - f_a[c]) / dx;
                    worst = worst.max((l[c] / (dx * dt) - r).abs());
                }
            }
            worst
        };
        for euler in [false, true] {
            let coarse = gap(41, 0.01, euler);
            let fine = gap(81, 0.005, euler);
            let finer = gap(161, 0.0025, euler);
            assert!(coarse / fine >= 1.8, "euler={euler}: {coarse} -> {fine}");
            assert!(fine / finer >= 1.8, "euler={euler}: {fine} -> {finer}");
        }
    }

    #[test]
    fn telescoping_example() {
        let g = Grid1D::new(0.0, 1.0, 5).unwrap();
        let u_n = StateField::new(g, 1, vec![0.1, 0.4, 0.2, 0.9, 0.3], 0.0).unwrap();
        let v = [0.2, 0.3, 0.5, 0.1, 0.8];
        let sum: f64 = (0..4)
            .map(|k| integral_cell_residual(&ModelSpec::wave(), &u_n, &v, k, g.dx(), 0.1).unwrap()[0])
            .sum();
        // F = -u: -dt/2 (F(u_0) + F(v_0)) + dt/2 (F(u_4) + F(v_4))
        let rhs = trapezoid_space(&v, 0, 4, 0.25).unwrap() - trapezoid_space(u_n.values(), 0, 4, 0.25).unwrap()
            + 0.05 * (0.1 + 0.2)
            - 0.05 * (0.3 + 0.8);
        assert!((sum - rhs).abs() < 1e-15, "{sum} vs {rhs}");
    }
}
