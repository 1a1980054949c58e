use serde::{Deserialize, Serialize};

use super::{in_plane, CourseLabel, PhaseError, Trajectory};

/// Continuous SIR flow `dS/dt = -λSI/N`, `dI/dt = λSI/N - I/τ`.
///
/// States are proportions, so `N` cancels from the field; it is kept for
/// converting back to counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirField {
    pub lambda: f64,
    pub tau: f64,
    pub population: f64,
}

impl SirField {
    pub fn new(lambda: f64, tau: f64, population: f64) -> Result<Self, PhaseError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(PhaseError::InvalidInput(format!("lambda {lambda}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(PhaseError::InvalidInput(format!("tau {tau}")));
        }
        if !(population > 0.0 && population.is_finite()) {
            return Err(PhaseError::InvalidInput(format!("population {population}")));
        }
        Ok(Self { lambda, tau, population })
    }

    /// Time derivative of `(S, I, R)`.
    pub fn derivative(&self, [s, i, _]: [f64; 3]) -> [f64; 3] {
        let infection = self.lambda * s * i;
        let removal = i / self.tau;
        [-infection, infection - removal, removal]
    }

    /// One classical Runge-Kutta step.
    pub fn rk4_step(&self, y: [f64; 3], dt: f64) -> [f64; 3] {
        let add = |a: [f64; 3], k: [f64; 3], h: f64| [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2]];
        let k1 = self.derivative(y);
        let k2 = self.derivative(add(y, k1, dt / 2.0));
        let k3 = self.derivative(add(y, k2, dt / 2.0));
        let k4 = self.derivative(add(y, k3, dt));
        std::array::from_fn(|c| y[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]))
    }

    /// `Q = S + I - log S / (λτ)`.
    pub fn conserved(&self, s: f64, i: f64) -> f64 {
        s + i - s.ln() / (self.lambda * self.tau)
    }
}

/// Integrates the field from `start` over `[0, horizon]`, recording every step.
///
/// The step is `horizon / ceil(horizon / dt)` so that the last point lands on
/// `horizon` exactly.
pub fn natural_course(
    field: &SirField,
    start: (f64, f64),
    horizon: f64,
    dt: f64,
) -> Result<Trajectory, PhaseError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PhaseError::InvalidInput(format!("dt {dt}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(PhaseError::InvalidInput(format!("horizon {horizon}")));
    }
    let (s0, i0) = start;
    if !in_plane(s0) || !in_plane(i0) {
        return Err(PhaseError::OutOfPlane { time: 0.0, s: s0, i: i0 });
    }
    let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let mut y = [s0, i0, 1.0 - s0 - i0];
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    times.push(0.0);
    points.push([s0, i0]);
    for k in 1..=steps {
        y = field.rk4_step(y, h);
        let time = k as f64 * h;
        if !in_plane(y[0]) || !in_plane(y[1]) {
            return Err(PhaseError::OutOfPlane { time, s: y[0], i: y[1] });
        }
        times.push(time);
        points.push([y[0], y[1]]);
    }
    Ok(Trajectory { times, points, label: CourseLabel::Natural })
}
