use crate::error::{Error, Result};

fn e(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth transition from 0 (for `s <= 0`) to 1 (for `s >= 1`).
fn bridge(s: f64) -> f64 {
    let (a, b) = (e(s), e(1.0 - s));
    a / (a + b)
}

/// Data cut-off `z(t)`: one on `[0, T - delta]`, zero on `[T - delta/2, T]`,
/// smooth and nonincreasing in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFunction {
    pub t_final: f64,
    pub delta: f64,
}

impl CutoffFunction {
    pub fn new(t_final: f64, delta: f64) -> Result<Self> {
        if !(t_final > 0.0) {
            return Err(Error::Config(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!(
                "cut-off width must be positive, got {delta}"
            )));
        }
        Ok(CutoffFunction { t_final, delta })
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let tol = 1e-12 * self.t_final;
        if !(t >= -tol && t <= self.t_final + tol) {
            return Err(Error::Usage(format!(
                "cut-off evaluated at t = {t} outside [0, {}]",
                self.t_final
            )));
        }
        Ok(self.value_unchecked(t))
    }

    pub(crate) fn value_unchecked(&self, t: f64) -> f64 {
        let h = 0.5 * self.delta;
        bridge((self.t_final - h - t) / h)
    }
}
