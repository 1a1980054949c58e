//! The epidemic on the (S, I) phase plane, in proportions of the population.

mod conserved;
mod field;
mod measures;

pub use conserved::{conserved_q, departure_index, ConservedReport, DepartureRule};
pub use field::{natural_course, SirField};
pub use measures::{displacements, effectiveness_l, effectiveness_m, speed_series, work};

use serde::{Deserialize, Serialize};

use crate::epi::LatentPaths;

/// Slack allowed outside the unit square before a state is rejected.
pub const PLANE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhaseError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("state ({s}, {i}) left the unit square at t = {time}")]
    OutOfPlane { time: f64, s: f64, i: f64 },
    #[error("measure undefined: {0}")]
    Undefined(String),
    #[error("S = {s} at position {index}; log S is undefined")]
    Domain { index: usize, s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CourseLabel {
    Natural,
    Actual,
    Scenario,
}

/// Time-indexed `(S, I)` proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub label: CourseLabel,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, points: Vec<[f64; 2]>, label: CourseLabel) -> Result<Self, PhaseError> {
        if times.len() != points.len() {
            return Err(PhaseError::InvalidInput(format!(
                "{} times for {} points",
                times.len(),
                points.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(PhaseError::InvalidInput("non-finite time".into()));
        }
        for (&time, &[s, i]) in times.iter().zip(&points) {
            if !in_plane(s) || !in_plane(i) {
                return Err(PhaseError::OutOfPlane { time, s, i });
            }
        }
        Ok(Self { times, points, label })
    }

    /// Days `1..=n` of a simulated path, scaled by the population.
    pub fn from_paths(paths: &LatentPaths, population: f64, label: CourseLabel) -> Result<Self, PhaseError> {
        if !(population > 0.0) {
            return Err(PhaseError::InvalidInput(format!("population {population}")));
        }
        let times = (1..=paths.len()).map(|t| t as f64).collect();
        let points = paths
            .susceptible
            .iter()
            .zip(&paths.infectious)
            .map(|(s, i)| [s / population, i / population])
            .collect();
        Self::new(times, points, label)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn susceptible(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[0]).collect()
    }

    pub fn infectious(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[1]).collect()
    }
}

#[inline]
pub(crate) fn in_plane(x: f64) -> bool {
    x.is_finite() && (-PLANE_TOLERANCE..=1.0 + PLANE_TOLERANCE).contains(&x)
}
