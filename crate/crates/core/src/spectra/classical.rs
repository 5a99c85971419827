//! Classical motion at fixed energy: turning points, periods and paths.

use super::{ModelKind, SpectrumModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub t: f64,
    pub x: f64,
    pub velocity: f64,
}

/// A trajectory sampled on a caller-supplied time grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Path {
    pub points: Vec<PathPoint>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Position at time `t`, linearly interpolated between samples.
    /// `None` outside the sampled range.
    pub fn position_at(&self, t: f64) -> Option<f64> {
        let pts = &self.points;
        let first = pts.first()?;
        let last = pts.last()?;
        let slack = 1e-12 * (last.t - first.t).abs().max(1.0);
        if t < first.t - slack || t > last.t + slack {
            return None;
        }
        let i = pts.partition_point(|p| p.t < t);
        if i == 0 {
            return Some(first.x);
        }
        if i == pts.len() {
            return Some(last.x);
        }
        let (a, b) = (pts[i - 1], pts[i]);
        if b.t == a.t {
            return Some(b.x);
        }
        let w = (t - a.t) / (b.t - a.t);
        Some(a.x + w * (b.x - a.x))
    }
}

/// Turning points of energy `e`: where `V(x) = e` on either side of the
/// potential minimum. The square well returns its walls.
pub fn turning_points(model: &SpectrumModel, e: f64) -> Result<(f64, f64)> {
    if !model.has_potential() {
        return Err(Error::Unsupported { model: model.kind().name(), what: "classical motion".into() });
    }
    let (xl, xr) = turning_points_unchecked(model, e)?;
    let (lo, hi) = model.domain();
    Ok((xl.max(lo), xr.min(hi)))
}

pub(super) fn turning_points_unchecked(model: &SpectrumModel, e: f64) -> Result<(f64, f64)> {
    if let ModelKind::InfiniteWell { width } = model.kind {
        if e <= 0.0 {
            return Err(Error::Domain(format!("energy {e} is not above the well floor")));
        }
        return Ok((0.0, width));
    }
    let center = model.potential_minimum();
    let vmin = model.potential_unchecked(center);
    if !(e > vmin) {
        return Err(Error::Domain(format!("energy {e} is not above the potential minimum {vmin}")));
    }
    let left = find_crossing(model, center, -1.0, e)?;
    let right = find_crossing(model, center, 1.0, e)?;
    Ok((left, right))
}

fn find_crossing(model: &SpectrumModel, center: f64, dir: f64, e: f64) -> Result<f64> {
    // Bracket by expanding outward; walls of Rosen-Morse I bound the search.
    let limit = match model.kind {
        ModelKind::RosenMorseI { alpha, .. } => Some(if dir < 0.0 { 0.0 } else { std::f64::consts::PI / alpha }),
        _ => None,
    };
    let mut inner = center;
    let mut outer;
    let mut reach = 0.05;
    loop {
        outer = center + dir * reach;
        if let Some(w) = limit {
            if dir * (outer - w) >= 0.0 {
                outer = center + 0.999_999_999 * (w - center);
                if model.potential_unchecked(outer) < e {
                    return Err(Error::NumericalFailure("no turning point before the wall".into()));
                }
                break;
            }
        }
        if model.potential_unchecked(outer) >= e {
            break;
        }
        inner = outer;
        reach *= 2.0;
        if reach > 1e6 {
            return Err(Error::Domain(format!("energy {e} is not bound: no turning point found")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (inner + outer);
        if mid == inner || mid == outer {
            break;
        }
        if model.potential_unchecked(mid) < e {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    Ok(0.5 * (inner + outer))
}

/// Round-trip time at energy `e`: `∫ dx / √(E − V)` between the turning
/// points (since `ẋ = 2p`), evaluated with the substitution
/// `x = c + d·sin θ` that removes the endpoint singularities.
pub fn classical_period(model: &SpectrumModel, e: f64) -> Result<f64> {
    if let ModelKind::InfiniteWell { width } = model.kind {
        if e <= 0.0 {
            return Err(Error::Domain(format!("energy {e} is not above the well floor")));
        }
        return Ok(width / e.sqrt());
    }
    let (xl, xr) = turning_points_unchecked(model, e)?;
    let c = 0.5 * (xl + xr);
    let d = 0.5 * (xr - xl);
    let samples = 20_000;
    let h = std::f64::consts::PI / samples as f64;
    let mut total = 0.0;
    for i in 0..samples {
        let theta = -std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * h;
        let x = c + d * theta.sin();
        let gap = e - model.potential_unchecked(x);
        if gap > 0.0 {
            total += d * theta.cos() / gap.sqrt();
        }
    }
    Ok(total * h)
}

/// Classical path of energy `e` from `x0`, initially moving in the
/// direction of `direction`'s sign, sampled at every time in `t_grid`.
///
/// The square well is solved exactly by unfolding the specular reflections.
/// Smooth wells integrate Hamilton's equations `ẋ = 2p`, `ṗ = −V'(x)` with
/// fixed-step RK4 (at most `period / 4096` per step), so turning points are
/// traversed without special handling.
pub fn classical_trajectory(model: &SpectrumModel, e: f64, x0: f64, direction: f64, t_grid: &[f64]) -> Result<Path> {
    let x0 = model.check_position(x0)?;
    if t_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Domain("time grid must be ascending".into()));
    }
    let sign = if direction < 0.0 { -1.0 } else { 1.0 };
    if let ModelKind::InfiniteWell { width } = model.kind {
        if e <= 0.0 {
            return Err(Error::Domain(format!("energy {e} is not above the well floor")));
        }
        let speed = 2.0 * e.sqrt();
        return Ok(unfold_in_well(width, x0, sign * speed, t_grid));
    }

    let v0 = model.potential_unchecked(x0);
    let gap = e - v0;
    if gap < -1e-12 * e.abs().max(1.0) {
        return Err(Error::Domain(format!("energy {e} is below V(x0) = {v0}")));
    }
    let period = classical_period(model, e)?;
    let max_step = period / 4096.0;
    let mut state = (x0, sign * gap.max(0.0).sqrt());
    let mut points = Vec::with_capacity(t_grid.len());
    let mut t = t_grid.first().copied().unwrap_or(0.0);
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / max_step).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                state = rk4_step(model, state, h);
            }
        }
        t = target;
        points.push(PathPoint { t, x: state.0, velocity: 2.0 * state.1 });
    }
    Ok(Path { points })
}

fn rk4_step(model: &SpectrumModel, (x, p): (f64, f64), h: f64) -> (f64, f64) {
    let force = |x: f64| -model.potential_slope(x);
    let (k1x, k1p) = (2.0 * p, force(x));
    let (k2x, k2p) = (2.0 * (p + 0.5 * h * k1p), force(x + 0.5 * h * k1x));
    let (k3x, k3p) = (2.0 * (p + 0.5 * h * k2p), force(x + 0.5 * h * k2x));
    let (k4x, k4p) = (2.0 * (p + h * k3p), force(x + h * k3x));
    (x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x), p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p))
}

/// Free motion at constant speed between two hard walls at `0` and `width`.
pub(crate) fn unfold_in_well(width: f64, x0: f64, velocity: f64, t_grid: &[f64]) -> Path {
    let t0 = t_grid.first().copied().unwrap_or(0.0);
    let period = 2.0 * width;
    let points = t_grid
        .iter()
        .map(|&t| {
            let free = x0 + velocity * (t - t0);
            let folded = free.rem_euclid(period);
            let (x, dir) = if folded <= width { (folded, 1.0) } else { (period - folded, -1.0) };
            PathPoint { t, x, velocity: dir * velocity }
        })
        .collect();
    Path { points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(t_end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
    }

    #[test]
    fn well_sawtooth() {
        let well = SpectrumModel::infinite_well(PI).unwrap();
        let period = classical_period(&well, 25.0).unwrap();
        assert!((period - PI / 5.0).abs() < 1e-15);
        let path = classical_trajectory(&well, 25.0, 0.0, 1.0, &grid(2.0 * period, 400)).unwrap();
        for w in path.points.windows(2) {
            assert!((w[0].velocity.abs() - 10.0).abs() < 1e-12);
        }
        assert!((path.points[100].x - PI).abs() < 1e-12);
        assert!(path.points[200].x.abs() < 1e-12);
        assert!(path.points[400].x.abs() < 1e-12);
    }

    #[test]
    fn morse_period_matches_closed_form() {
        let morse = SpectrumModel::morse(20.0, 5.0, 1.0).unwrap();
        let e = morse.energy(12).unwrap();
        // T = π / (α √(A² − E)) for the Morse oscillator.
        let exact = PI / (400.0f64 - e).sqrt();
        let period = classical_period(&morse, e).unwrap();
        assert!((period - exact).abs() / exact < 1e-6, "{period} vs {exact}");
    }

    #[test]
    fn harmonic_period_is_two_pi_over_omega() {
        let sho = SpectrumModel::harmonic(2.0).unwrap();
        let period = classical_period(&sho, 7.0).unwrap();
        assert!((period - PI).abs() < 1e-6);
    }

    #[test]
    fn smooth_path_returns_after_one_period_and_conserves_energy() {
        let models = [
            SpectrumModel::harmonic(2.0).unwrap(),
            SpectrumModel::morse(20.0, 5.0, 1.0).unwrap(),
            SpectrumModel::rosen_morse_i(20.0, 5.0, 1.0).unwrap(),
        ];
        for model in &models {
            let e = model.energy(6).unwrap();
            let x0 = model.potential_minimum();
            let period = classical_period(model, e).unwrap();
            let path = classical_trajectory(model, e, x0, 1.0, &grid(10.0 * period, 1000)).unwrap();
            for p in &path.points {
                let residual = e - model.potential_unchecked(p.x) - (p.velocity / 2.0).powi(2);
                assert!(residual.abs() <= 1e-8 * e, "{:?}: residual {residual}", model.kind());
            }
            let back = path.points[100].x;
            assert!((back - x0).abs() < 1e-6, "{:?}: {back} vs {x0}", model.kind());
        }
    }

    #[test]
    fn turning_point_start_and_errors() {
        let sho = SpectrumModel::harmonic(2.0).unwrap();
        let (xl, xr) = turning_points(&sho, 9.0).unwrap();
        assert!((xl + 3.0).abs() < 1e-9 && (xr - 3.0).abs() < 1e-9);
        let path = classical_trajectory(&sho, 9.0, xl, 1.0, &grid(PI / 2.0, 10)).unwrap();
        assert!((path.points[10].x - xr).abs() < 1e-6);
        assert!(classical_trajectory(&sho, -1.0, 0.0, 1.0, &[0.0]).is_err());
        assert!(classical_trajectory(&sho, 1.0, 0.0, 1.0, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn interpolated_position() {
        let path = unfold_in_well(1.0, 0.0, 1.0, &[0.0, 0.5, 1.0]);
        assert_eq!(path.position_at(0.25), Some(0.25));
        assert_eq!(path.position_at(2.0), None);
    }
}
