use super::{PhaseError, Trajectory};

/// Euclidean length of each step between consecutive points.
pub fn displacements(points: &[[f64; 2]]) -> Vec<f64> {
    points
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .collect()
}

/// `v_t = |σ_{t+1} - σ_t|` for each step; empty for fewer than two points.
pub fn speed_series(traj: &Trajectory) -> Vec<f64> {
    displacements(&traj.points)
}

fn check_interval(len: usize, a: usize, b: usize) -> Result<(), PhaseError> {
    if a > b || b >= len {
        return Err(PhaseError::InvalidInput(format!(
            "interval [{a}, {b}] outside positions 0..{len}"
        )));
    }
    Ok(())
}

/// Sum of squared step lengths between positions `a` and `b`; zero when `a == b`.
pub fn work(traj: &Trajectory, a: usize, b: usize) -> Result<f64, PhaseError> {
    check_interval(traj.len(), a, b)?;
    Ok(traj.points[a..=b]
        .windows(2)
        .map(|w| {
            let ds = w[1][0] - w[0][0];
            let di = w[1][1] - w[0][1];
            ds * ds + di * di
        })
        .sum())
}

fn check_pair(natural: &Trajectory, actual: &Trajectory, a: usize, b: usize) -> Result<(), PhaseError> {
    check_interval(natural.len(), a, b)?;
    check_interval(actual.len(), a, b)?;
    if natural.times[a..=b] != actual.times[a..=b] {
        return Err(PhaseError::InvalidInput("courses are on different time grids".into()));
    }
    Ok(())
}

/// `L = Σ_{t=a}^{b} |σ^n_t - σ^a_t| / |σ^n_t|`, summed without time weighting.
pub fn effectiveness_l(natural: &Trajectory, actual: &Trajectory, a: usize, b: usize) -> Result<f64, PhaseError> {
    check_pair(natural, actual, a, b)?;
    let mut total = 0.0;
    for t in a..=b {
        let [sn, inn] = natural.points[t];
        let [sa, ia] = actual.points[t];
        let norm = sn * sn + inn * inn;
        if norm == 0.0 {
            return Err(PhaseError::Undefined(format!(
                "natural course at the origin at position {t}"
            )));
        }
        let gap = (sn - sa) * (sn - sa) + (inn - ia) * (inn - ia);
        total += (gap / norm).sqrt();
    }
    Ok(total)
}

/// Relative work reduction `(W^n - W^a) / W^n` over `[a, b]`.
pub fn effectiveness_m(natural: &Trajectory, actual: &Trajectory, a: usize, b: usize) -> Result<f64, PhaseError> {
    check_pair(natural, actual, a, b)?;
    let wn = work(natural, a, b)?;
    if wn == 0.0 {
        return Err(PhaseError::Undefined("natural course does no work".into()));
    }
    Ok((wn - work(actual, a, b)?) / wn)
}
