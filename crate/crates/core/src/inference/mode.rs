use argmin::core::{CostFunction, Error, Executor, Gradient, State};
use argmin::solver::linesearch::condition::ArmijoCondition;
use argmin::solver::linesearch::BacktrackingLineSearch;
use argmin::solver::quasinewton::LBFGS;

use super::LogDensity;

/// Point of highest log density found from `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub x: Vec<f64>,
    pub log_density: f64,
    pub iterations: u64,
}

struct Negated<'a, T: ?Sized>(&'a T);

impl<T: LogDensity + ?Sized> CostFunction for Negated<'_, T> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> Result<f64, Error> {
        let v = self.0.log_density(x);
        Ok(if v.is_finite() { -v } else { f64::INFINITY })
    }
}

impl<T: LogDensity + ?Sized> Gradient for Negated<'_, T> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, x: &Vec<f64>) -> Result<Vec<f64>, Error> {
        let mut g = vec![0.0; x.len()];
        if self.0.gradient(x, &mut g).is_err() {
            one_sided(self.0, x, &mut g)?;
        }
        Ok(g.into_iter().map(|v| -v).collect())
    }
}

/// Forward or backward differences, whichever side stays in the support.
fn one_sided<T: LogDensity + ?Sized>(target: &T, x: &[f64], out: &mut [f64]) -> Result<(), Error> {
    let f0 = target.log_density(x);
    let base = f64::EPSILON.sqrt();
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = base * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let up = target.log_density(&probe);
        probe[i] = x[i] - h;
        let down = target.log_density(&probe);
        probe[i] = x[i];
        out[i] = match (up.is_finite(), down.is_finite()) {
            (true, true) => (up - down) / (2.0 * h),
            (true, false) => (up - f0) / h,
            (false, true) => (f0 - down) / h,
            (false, false) => return Err(Error::msg(format!("no finite neighbour along coordinate {i}"))),
        };
    }
    Ok(())
}

/// L-BFGS ascent on the log density with Armijo backtracking, which simply
/// shrinks the step when a trial point is outside the support.
pub fn find_mode<T: LogDensity + ?Sized>(target: &T, start: &[f64], max_iters: u64) -> Result<Mode, String> {
    let start_value = target.log_density(start);
    if !start_value.is_finite() {
        return Err(format!("log density is {start_value} at the start"));
    }
    let condition = ArmijoCondition::new(1e-4).map_err(|e| e.to_string())?;
    let line_search = BacktrackingLineSearch::new(condition);
    let solver = LBFGS::new(line_search, 7)
        .with_tolerance_cost(1e-12)
        .map_err(|e| e.to_string())?;
    let result = Executor::new(Negated(target), solver)
        .configure(|s| s.param(start.to_vec()).max_iters(max_iters))
        .run();
    let (x, iterations) = match result {
        Ok(r) => {
            let state = r.state();
            (state.get_best_param().cloned().unwrap_or_else(|| start.to_vec()), state.get_iter())
        }
        Err(e) => return Err(e.to_string()),
    };
    let log_density = target.log_density(&x);
    if log_density < start_value || !log_density.is_finite() {
        return Ok(Mode {
            x: start.to_vec(),
            log_density: start_value,
            iterations,
        });
    }
    Ok(Mode {
        x,
        log_density,
        iterations,
    })
}
