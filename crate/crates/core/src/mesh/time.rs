use crate::error::{Error, Result};

/// Uniform partition of `[0, T]` into `n` intervals of length `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub n: usize,
    pub tau: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, n: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::Config(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if n == 0 {
            return Err(Error::Config(
                "time interval count must be at least 1".into(),
            ));
        }
        Ok(TimeGrid {
            t_final,
            n,
            tau: t_final / n as f64,
        })
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n {
            self.t_final
        } else {
            k as f64 * self.tau
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.node(k)).collect()
    }

    /// Grid with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> TimeGrid {
        TimeGrid::new(self.t_final, self.n * factor.max(1)).expect("refined grid is valid")
    }
}

/// Accuracy guard: `tau <= h_min / sqrt(eps_max)`.
pub fn time_step_guard_violated(grid: &TimeGrid, h_min: f64, eps_max: f64) -> bool {
    grid.tau > h_min / eps_max.sqrt()
}

/// Builds the grid and logs a warning when the step exceeds the guard.
pub fn make_time_grid(t_final: f64, n: usize, h_min: f64, eps_max: f64) -> Result<TimeGrid> {
    let grid = TimeGrid::new(t_final, n)?;
    if time_step_guard_violated(&grid, h_min, eps_max) {
        log::warn!(
            "time step {} exceeds h_min/sqrt(eps_max) = {}",
            grid.tau,
            h_min / eps_max.sqrt()
        );
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_steps() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn single_interval() {
        let g = TimeGrid::new(2.0, 1).unwrap();
        assert_eq!(g.tau, 2.0);
        assert_eq!(g.nodes(), vec![0.0, 2.0]);
    }

    #[test]
    fn guard_fires_for_coarse_step() {
        let g = make_time_grid(1.0, 100, 0.01, 16.0).unwrap();
        assert!(time_step_guard_violated(&g, 0.01, 16.0));
        assert!(!time_step_guard_violated(&g, 0.05, 16.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(TimeGrid::new(0.0, 3), Err(Error::Config(_))));
        assert!(matches!(TimeGrid::new(-1.0, 3), Err(Error::Config(_))));
        assert!(matches!(TimeGrid::new(1.0, 0), Err(Error::Config(_))));
    }
}
