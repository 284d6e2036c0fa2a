//! Uniform 1D grids and solution snapshots.

use crate::{Error, Result};

/// Uniform mesh on `[x_min, x_max]` including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::config(format!(
                "grid bounds must be finite, got [{x_min}, {x_max}]"
            )));
        }
        if x_max <= x_min {
            return Err(Error::config(format!(
                "grid bounds must be increasing, got x_min = {x_min}, x_max = {x_max}"
            )));
        }
        if n_points < 3 {
            return Err(Error::config(format!(
                "grid needs at least 3 points, got {n_points}"
            )));
        }
        let dx = (x_max - x_min) / (n_points - 1) as f64;
        Ok(Grid1D {
            x_min,
            x_max,
            n_points,
            dx,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Coordinate of point `i`, computed as `x_min + i * dx` (never accumulated).
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Evaluates `f` at every grid point.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Result<Vec<f64>> {
        (0..self.n_points)
            .map(|i| {
                let x = self.x(i);
                let v = f(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Model(format!(
                        "sampled function is not finite at x = {x} (value {v})"
                    )))
                }
            })
            .collect()
    }
}

/// Values of an `m`-component solution on every grid point at one time.
///
/// Storage is component-major: entry `(c, i)` lives at `c * n_points + i`,
/// which is also the flattened layout fed to the networks.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    grid: Grid1D,
    n_components: usize,
    values: Vec<f64>,
    time: f64,
}

impl StateField {
    pub fn new(grid: Grid1D, n_components: usize, values: Vec<f64>, time: f64) -> Result<Self> {
        if n_components == 0 {
            return Err(Error::config("a state needs at least one component"));
        }
        let expected = n_components * grid.n_points();
        if values.len() != expected {
            return Err(Error::usage(format!(
                "state has {} values, expected {n_components} x {} = {expected}",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Model(format!(
                "non-finite state value {} in component {} at x = {}",
                values[k],
                k / grid.n_points(),
                grid.x(k % grid.n_points())
            )));
        }
        if !time.is_finite() {
            return Err(Error::usage(format!("state time must be finite, got {time}")));
        }
        Ok(StateField {
            grid,
            n_components,
            values,
            time,
        })
    }

    /// Stacks per-component rows into one field.
    pub fn from_components(grid: Grid1D, rows: &[Vec<f64>], time: f64) -> Result<Self> {
        let values = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(grid, rows.len(), values, time)
    }

    /// Builds the successor snapshot, re-checking finiteness.
    pub fn successor(&self, values: Vec<f64>, time: f64) -> Result<Self> {
        Self::new(self.grid, self.n_components, values, time)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.n_points();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, i: usize) -> f64 {
        self.values[c * self.grid.n_points() + i]
    }

    /// The `m`-vector at grid point `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        gather_point(&self.values, self.n_components, self.grid.n_points(), i)
    }
}

/// Reads the `m`-vector at point `i` from a component-major buffer.
pub(crate) fn gather_point(values: &[f64], m: usize, n: usize, i: usize) -> Vec<f64> {
    (0..m).map(|c| values[c * n + i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_grid_with_101_points() {
        let g = Grid1D::new(0.0, 1.0, 101).unwrap();
        assert_eq!(g.dx(), 0.01);
        assert_eq!(g.x(50), 0.5);
        assert!((g.x(100) - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn minimum_grid() {
        assert!(matches!(Grid1D::new(0.0, 1.0, 2), Err(Error::Config(_))));
        let g = Grid1D::new(0.0, 1.0, 3).unwrap();
        assert_eq!(g.dx(), 0.5);
    }

    #[test]
    fn symmetric_grid() {
        let g = Grid1D::new(-1.0, 1.0, 201).unwrap();
        assert_eq!(g.dx(), 0.01);
        assert_eq!(g.x(100), 0.0);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
        assert!(Grid1D::new(1.0, 0.0, 10).is_err());
        assert!(Grid1D::new(0.0, f64::INFINITY, 10).is_err());
    }

    #[test]
    fn sampling() {
        let g = Grid1D::new(0.0, 1.0, 101).unwrap();
        assert!(g.sample(|_| 0.0).unwrap().iter().all(|&v| v == 0.0));
        let g3 = Grid1D::new(0.0, 1.0, 3).unwrap();
        assert_eq!(g3.sample(|x| x).unwrap(), vec![0.0, 0.5, 1.0]);
        let err = g3.sample(|x| 1.0 / (x - 0.5)).unwrap_err();
        assert!(err.to_string().contains("x = 0.5"), "{err}");
    }

    #[test]
    fn state_rejects_non_finite() {
        let g = Grid1D::new(0.0, 1.0, 3).unwrap();
        assert!(StateField::new(g, 1, vec![0.0, f64::NAN, 1.0], 0.0).is_err());
        assert!(StateField::new(g, 1, vec![0.0, 1.0], 0.0).is_err());
        let s = StateField::new(g, 2, vec![1., 2., 3., 4., 5., 6.], 0.0).unwrap();
        assert_eq!(s.point(1), vec![2.0, 5.0]);
        assert_eq!(s.component(1), &[4.0, 5.0, 6.0]);
        assert!(s.successor(vec![f64::INFINITY; 6], 1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn spacing_is_uniform(x_min in -10.0f64..10.0, len in 1e-3f64..20.0, n in 3usize..2000) {
            let g = Grid1D::new(x_min, x_min + len, n).unwrap();
            let tol = 4.0 * f64::EPSILON * g.dx().max(x_min.abs().max((x_min + len).abs()));
            for i in 0..n - 1 {
                let gap = g.x(i + 1) - g.x(i);
                proptest::prop_assert!((gap - g.dx()).abs() <= tol);
            }
            proptest::prop_assert!((g.x(n - 1) - g.x_max()).abs() <= tol);
        }
    }
}
