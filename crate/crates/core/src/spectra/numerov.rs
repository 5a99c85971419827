//! Node-counting Numerov shooting for bound states.
//!
//! The energy of level `k` (counting from the lowest level) is the point
//! where the number of sign changes of the outward solution jumps from `k`
//! to `k + 1`; it is bracketed by doubling and refined by bisection. The
//! eigenfunction is then assembled from an outward and an inward pass joined
//! at the right classical turning point, so neither pass integrates into a
//! growing exponential.

use super::SpectrumModel;
use crate::error::{Error, Result};

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumerovConfig {
    /// Uniform grid size, endpoints included.
    pub points: usize,
    /// Absolute bisection tolerance on the energy.
    pub energy_tolerance: f64,
    pub max_iterations: usize,
    /// Required `∫√(V − E_max) dx` beyond the outermost turning points when
    /// the domain of a smooth well is derived.
    pub decay_depth: f64,
}

impl Default for NumerovConfig {
    fn default() -> Self {
        NumerovConfig { points: 4096, energy_tolerance: 1e-10, max_iterations: 200, decay_depth: 25.0 }
    }
}

/// A normalized eigenfunction sampled on the solver grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenState {
    pub n: u32,
    pub energy: f64,
    pub x_min: f64,
    pub step: f64,
    pub values: Vec<f64>,
    /// `|∫ψ²dx − 1|` by the trapezoid rule after normalization.
    pub normalization_residual: f64,
    /// Relative slope mismatch where the outward and inward passes meet.
    pub match_residual: f64,
}

impl EigenState {
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, v)| (self.x_min + i as f64 * self.step, *v))
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + (self.values.len() - 1) as f64 * self.step
    }

    /// Four-point Lagrange interpolation between grid samples.
    pub fn value_at(&self, x: f64) -> f64 {
        let last = self.values.len() - 1;
        let u = ((x - self.x_min) / self.step).clamp(0.0, last as f64);
        let i = u.floor() as usize;
        if i >= last {
            return self.values[last];
        }
        let frac = u - i as f64;
        if frac == 0.0 {
            return self.values[i];
        }
        let base = i.saturating_sub(1).min(last.saturating_sub(3));
        let mut total = 0.0;
        for a in 0..4 {
            let mut weight = 1.0;
            let xa = (base + a) as f64;
            for b in 0..4 {
                if a != b {
                    let xb = (base + b) as f64;
                    weight *= (u - xb) / (xa - xb);
                }
            }
            total += weight * self.values[base + a];
        }
        total
    }

    pub fn node_count(&self) -> usize {
        let peak = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        sign_changes(self.values.iter().copied().filter(|v| v.abs() > 1e-9 * peak))
    }
}

const SEED: f64 = 1e-12;
const RESCALE: f64 = 1e150;

struct Grid {
    x_min: f64,
    step: f64,
    potential: Vec<f64>,
}

impl Grid {
    fn new(model: &SpectrumModel, points: usize) -> Grid {
        let (lo, hi) = model.domain();
        let step = (hi - lo) / (points - 1) as f64;
        let potential = (0..points).map(|i| model.potential_unchecked(lo + i as f64 * step)).collect();
        Grid { x_min: lo, step, potential }
    }

    fn factors(&self, energy: f64) -> Vec<f64> {
        let c = self.step * self.step / 12.0;
        self.potential.iter().map(|v| 1.0 + c * (energy - v)).collect()
    }

    /// Number of sign changes of the outward solution, right edge included.
    fn nodes(&self, energy: f64) -> usize {
        let f = self.factors(energy);
        let (mut prev, mut cur) = (0.0, SEED);
        let mut nodes = 0;
        let mut sign = 1.0f64;
        for i in 1..f.len() - 1 {
            let mut next = ((12.0 - 10.0 * f[i]) * cur - f[i - 1] * prev) / f[i + 1];
            if next != 0.0 && next.signum() != sign {
                nodes += 1;
                sign = next.signum();
            }
            if next.abs() > RESCALE {
                next /= RESCALE;
                cur /= RESCALE;
            }
            prev = cur;
            cur = next;
        }
        nodes
    }

    fn outward(&self, f: &[f64], upto: usize) -> Vec<f64> {
        let mut psi = vec![0.0; upto + 1];
        psi[1] = SEED;
        for i in 1..upto {
            psi[i + 1] = ((12.0 - 10.0 * f[i]) * psi[i] - f[i - 1] * psi[i - 1]) / f[i + 1];
            if psi[i + 1].abs() > RESCALE {
                psi.iter_mut().for_each(|p| *p /= RESCALE);
            }
        }
        psi
    }

    /// Inward pass from the right edge down to `from`; indexed like the grid.
    fn inward(&self, f: &[f64], from: usize) -> Vec<f64> {
        let last = f.len() - 1;
        let mut psi = vec![0.0; f.len()];
        psi[last - 1] = SEED;
        for i in (from + 1..last).rev() {
            psi[i - 1] = ((12.0 - 10.0 * f[i]) * psi[i] - f[i + 1] * psi[i + 1]) / f[i - 1];
            if psi[i - 1].abs() > RESCALE {
                psi.iter_mut().for_each(|p| *p /= RESCALE);
            }
        }
        psi
    }
}

fn sign_changes(values: impl Iterator<Item = f64>) -> usize {
    let mut count = 0;
    let mut sign = 0.0f64;
    for v in values {
        if v == 0.0 {
            continue;
        }
        if sign != 0.0 && v.signum() != sign {
            count += 1;
        }
        sign = v.signum();
    }
    count
}

pub(super) fn solve(model: &SpectrumModel, n: u32) -> Result<EigenState> {
    let config = *model.numerov_config();
    let grid = Grid::new(model, config.points);
    let index = (n - model.min_level()) as usize;

    let c = grid.step * grid.step / 12.0;
    if let Some(vmax) = grid.potential.iter().copied().reduce(f64::max) {
        if c * vmax > 1.0 {
            return Err(Error::NumericalFailure(format!(
                "Numerov grid too coarse: h²V/12 = {:.3} exceeds 1; raise the point count",
                c * vmax
            )));
        }
    }

    let energy = bracket_and_bisect(&grid, index, &config)?;
    let values = eigenfunction(&grid, energy)?;
    let mut state = EigenState {
        n,
        energy,
        x_min: grid.x_min,
        step: grid.step,
        values: values.0,
        normalization_residual: 0.0,
        match_residual: values.1,
    };
    let norm = trapezoid_norm(&state.values, state.step).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::NumericalFailure(format!("level {n}: eigenfunction has norm {norm}")));
    }
    state.values.iter_mut().for_each(|v| *v /= norm);
    // First lobe positive.
    let peak = state.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(first) = state.values.iter().find(|v| v.abs() > 1e-3 * peak) {
        if *first < 0.0 {
            state.values.iter_mut().for_each(|v| *v = -*v);
        }
    }
    state.normalization_residual = (trapezoid_norm(&state.values, state.step) - 1.0).abs();

    let nodes = state.node_count();
    if nodes != index {
        return Err(Error::NumericalFailure(format!(
            "level {n}: converged state has {nodes} nodes, expected {index} (E = {energy}, match residual {:.3e})",
            state.match_residual
        )));
    }
    Ok(state)
}

fn bracket_and_bisect(grid: &Grid, index: usize, config: &NumerovConfig) -> Result<f64> {
    let vmin = grid.potential.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lo = vmin;
    if grid.nodes(lo) > index {
        return Err(Error::NumericalFailure(format!(
            "bracketing failed: {} nodes already at the potential minimum",
            grid.nodes(lo)
        )));
    }
    let mut width = vmin.abs().max(1.0);
    let mut hi = lo + width;
    let mut doublings = 0;
    while grid.nodes(hi) <= index {
        lo = hi;
        width *= 2.0;
        hi = lo + width;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::NumericalFailure(format!(
                "bracketing failed: energy window exhausted below {hi:.3e} for level index {index}"
            )));
        }
    }
    let mut iterations = 0;
    while hi - lo > config.energy_tolerance {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if grid.nodes(mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
        if iterations > config.max_iterations {
            return Err(Error::NumericalFailure(format!(
                "bisection did not converge in {} iterations (window [{lo}, {hi}])",
                config.max_iterations
            )));
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Unnormalized eigenfunction and the slope mismatch at the join.
fn eigenfunction(grid: &Grid, energy: f64) -> Result<(Vec<f64>, f64)> {
    let f = grid.factors(energy);
    let last = f.len() - 1;
    let turning = grid.potential.iter().rposition(|v| *v < energy).unwrap_or(last);
    if turning + 3 >= last {
        let mut psi = grid.outward(&f, last);
        psi[last] = 0.0;
        return Ok((psi, 0.0));
    }
    let left = grid.outward(&f, turning + 1);
    let peak = left.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Avoid joining at a node.
    let mut join = turning;
    while join > 2 && left[join].abs() < 0.05 * peak {
        join -= 1;
    }
    let right = grid.inward(&f, join - 1);
    if right[join] == 0.0 {
        return Err(Error::NumericalFailure(format!("inward solution vanishes at join (E = {energy})")));
    }
    let scale = left[join] / right[join];
    let mut psi = Vec::with_capacity(f.len());
    psi.extend_from_slice(&left[..=join]);
    psi.extend(right[join + 1..].iter().map(|v| v * scale));
    let slope_left = left[join + 1] - left[join - 1];
    let slope_right = scale * (right[join + 1] - right[join - 1]);
    let mismatch = (slope_left - slope_right).abs() / slope_left.abs().max(slope_right.abs()).max(1e-300);
    Ok((psi, mismatch))
}

fn trapezoid_norm(values: &[f64], step: f64) -> f64 {
    let last = values.len() - 1;
    let sum: f64 = values.iter().map(|v| v * v).sum();
    step * (sum - 0.5 * (values[0] * values[0] + values[last] * values[last]))
}
