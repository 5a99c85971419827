//! Time scales of a spectrum, fractional revivals and the velocity
//! structure of the classicized wavefunction.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::packet::{classical_frequency, BasisTable, CoefficientSet};
use crate::spectra::SpectrumModel;

pub const DEFAULT_HIERARCHY_RATIO: f64 = 10.0;

/// Taylor time scales `T_j = 2π j! / |E^(j)(n̄)|` about a center.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScaleReport {
    pub center: f64,
    /// `E^(j)(n̄)` for `j = 1..=J`.
    pub derivatives: Vec<f64>,
    /// `T_j`, absent where `E^(j)` vanishes.
    pub periods: Vec<Option<f64>>,
    /// `T_{j+1} / T_j`; absent when `T_{j+1}` is absent.
    pub ratios: Vec<Option<f64>>,
    pub hierarchy_ok: bool,
}

impl TimeScaleReport {
    /// `T_cl = T_1`.
    pub fn classical(&self) -> f64 {
        self.periods[0].expect("T_1 is always present")
    }

    /// `T_R = T_2`, if the spectrum has curvature at the center.
    pub fn revival(&self) -> Option<f64> {
        self.periods.get(1).copied().flatten()
    }

    pub fn period(&self, order: usize) -> Option<f64> {
        self.periods.get(order.checked_sub(1)?).copied().flatten()
    }

    /// Plain `key = value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = format!("center = {}\n", self.center);
        for (i, d) in self.derivatives.iter().enumerate() {
            out.push_str(&format!("E{} = {}\n", i + 1, d));
        }
        for (i, t) in self.periods.iter().enumerate() {
            let sign = if self.derivatives[i] < 0.0 { "-" } else { "+" };
            match t {
                Some(t) => out.push_str(&format!("T{} = {}\nT{}_sign = {}\n", i + 1, t, i + 1, sign)),
                None => out.push_str(&format!("T{} = absent\n", i + 1)),
            }
        }
        for (i, r) in self.ratios.iter().enumerate() {
            match r {
                Some(r) => out.push_str(&format!("T{}/T{} = {}\n", i + 2, i + 1, r)),
                None => out.push_str(&format!("T{}/T{} = absent\n", i + 2, i + 1)),
            }
        }
        out.push_str(&format!("hierarchy_ok = {}\n", self.hierarchy_ok));
        out
    }
}

/// Derivatives and time scales of the spectrum up to order `max_order`.
pub fn time_scales(model: &SpectrumModel, center: f64, max_order: u32) -> Result<TimeScaleReport> {
    if max_order < 2 {
        return Err(Error::Domain(format!("time-scale order {max_order} must be at least 2")));
    }
    let (lo, hi) = (model.min_level() as f64, model.max_level() as f64);
    if !(center >= lo && center <= hi) {
        return Err(Error::Domain(format!("center {center} outside the level range {lo}..={hi}")));
    }
    let derivatives: Vec<f64> = (1..=max_order).map(|j| model.energy_derivative(center, j)).collect();
    if derivatives[0] == 0.0 {
        return Err(Error::DegenerateSpectrum(format!("E'({center}) = 0: classical period undefined")));
    }
    let mut factorial = 1.0;
    let periods: Vec<Option<f64>> = derivatives
        .iter()
        .enumerate()
        .map(|(i, d)| {
            factorial *= (i + 1) as f64;
            (*d != 0.0).then(|| 2.0 * PI * factorial / d.abs())
        })
        .collect();
    // T_{j+1}/T_j = (j+1)|E^(j)| / |E^(j+1)|, kept free of the 2π round trip.
    let ratios: Vec<Option<f64>> = derivatives
        .windows(2)
        .enumerate()
        .map(|(i, w)| (w[1] != 0.0).then(|| (i + 2) as f64 * w[0].abs() / w[1].abs()))
        .collect();
    let mut report = TimeScaleReport { center, derivatives, periods, ratios, hierarchy_ok: false };
    report.hierarchy_ok = hierarchy_check(&report, None, DEFAULT_HIERARCHY_RATIO).ok;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyCheck {
    pub ok: bool,
    pub diagnostics: Vec<String>,
}

/// Whether `T_1 ≪ T_2 ≪ …` holds with every consecutive ratio at least
/// `min_ratio`. An absent `T_j` counts as infinite. When `degree` is given,
/// the diagnostics also compare `n̄` with it, since `n̄ ≫ degree` is what
/// makes the hierarchy hold for polynomial spectra.
pub fn hierarchy_check(report: &TimeScaleReport, degree: Option<u32>, min_ratio: f64) -> HierarchyCheck {
    let mut ok = true;
    let mut diagnostics = Vec::new();
    for j in 1..report.periods.len() {
        let (earlier, later) = (report.periods[j - 1], report.periods[j]);
        let ratio = match (earlier, later) {
            (_, None) => f64::INFINITY,
            (None, Some(_)) => 0.0,
            (Some(_), Some(_)) => report.ratios[j - 1].unwrap_or(f64::INFINITY),
        };
        if ratio < min_ratio {
            ok = false;
            diagnostics.push(format!("T{}/T{} = {ratio:.4} is below {min_ratio}", j + 1, j));
        }
    }
    if let Some(m) = degree {
        let large = report.center >= min_ratio * m as f64;
        diagnostics.push(format!(
            "center {} {} {min_ratio} x degree {m}",
            report.center,
            if large { "is at least" } else { "is not at least" }
        ));
    }
    HierarchyCheck { ok, diagnostics }
}

/// Coefficients `a_s` splitting `e^(−2πik²p/q)` into `l` shifted copies.
#[derive(Debug, Clone, PartialEq)]
pub struct RevivalPlan {
    pub p: u32,
    pub q: u32,
    pub l: u32,
    pub a: Vec<Complex64>,
}

impl RevivalPlan {
    /// Residual of `Σ_s a_s e^(−2πiks/l) = e^(−2πik²p/q)` over `k ∈ [0, l)`.
    pub fn identity_residual(&self) -> f64 {
        let l = self.l as u64;
        (0..l)
            .map(|k| {
                let sum: Complex64 = self
                    .a
                    .iter()
                    .enumerate()
                    .map(|(s, a)| a * unit_phase(-(((k * s as u64) % l) as f64) / l as f64))
                    .sum();
                (sum - quadratic_phase(k, self.p as u64, self.q as u64)).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn unitarity_residual(&self) -> f64 {
        (self.a.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs()
    }

    /// CSV with columns `s,re,im,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "s,re,im,weight")?;
        for (s, a) in self.a.iter().enumerate() {
            writeln!(out, "{},{},{},{}", s, a.re, a.im, a.norm_sqr())?;
        }
        Ok(())
    }
}

/// `e^(2πi·fraction)`.
fn unit_phase(fraction: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * fraction)
}

/// `e^(−2πik²p/q)` with the exponent reduced exactly modulo `q`.
fn quadratic_phase(k: u64, p: u64, q: u64) -> Complex64 {
    let residue = ((k % q) * (k % q) % q) * p % q;
    unit_phase(-(residue as f64) / q as f64)
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The period of `e^(−2πik²p/q)` in `k`: `q/2` when `4 | q`, else `q`.
pub fn revival_copies(q: u32) -> u32 {
    if q % 4 == 0 {
        q / 2
    } else {
        q
    }
}

/// `a_s = (1/l) Σ_k e^(−2πik²p/q) e^(2πiks/l)`, checked for periodicity,
/// unitarity and the reconstruction identity before returning.
pub fn gauss_coefficients(p: u32, q: u32) -> Result<RevivalPlan> {
    if q == 0 || p >= q {
        return Err(Error::Domain(format!("need 0 <= p < q, got p = {p}, q = {q}")));
    }
    if gcd(p, q) != 1 {
        return Err(Error::Domain(format!("p = {p} and q = {q} are not coprime")));
    }
    let l = revival_copies(q);
    let (pw, qw, lw) = (p as u64, q as u64, l as u64);
    for k in 0..lw {
        if (quadratic_phase(k + lw, pw, qw) - quadratic_phase(k, pw, qw)).norm() > 1e-12 {
            return Err(Error::Consistency(format!("quadratic phase for {p}/{q} is not {l}-periodic")));
        }
    }
    let a: Vec<Complex64> = (0..lw)
        .map(|s| {
            let sum: Complex64 =
                (0..lw).map(|k| quadratic_phase(k, pw, qw) * unit_phase(((k * s) % lw) as f64 / l as f64)).sum();
            sum / l as f64
        })
        .collect();
    let plan = RevivalPlan { p, q, l, a };
    let (unitarity, identity) = (plan.unitarity_residual(), plan.identity_residual());
    if unitarity > 1e-12 || identity > 1e-12 {
        return Err(Error::Consistency(format!(
            "revival coefficients for {p}/{q} fail checks (unitarity {unitarity:e}, identity {identity:e})"
        )));
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub plan: RevivalPlan,
    /// `t = (p/q)·T_R`.
    pub time: f64,
    pub classical_time: f64,
    pub revival_time: f64,
    pub amplitudes: Vec<Complex64>,
    pub exact: Vec<Complex64>,
    /// Global phase applied to `amplitudes` before comparison.
    pub phase: f64,
    /// `‖e^(iφ)·amplitudes − exact‖ / ‖exact‖`, minimized over `φ`.
    pub error: f64,
}

/// Rebuilds `Ψ(x, (p/q)T_R)` as `e^(−iE_n̄t) Σ_s a_s Ψ_cl(x, t + s·T_cl/l)`
/// and compares it with direct evaluation on `x_grid`. The expansion is
/// taken about the rounded center `n̄`, the same origin `Ψ_cl` uses.
pub fn reconstruct_fractional(
    model: &SpectrumModel,
    coeffs: &CoefficientSet,
    p: u32,
    q: u32,
    x_grid: &[f64],
) -> Result<Reconstruction> {
    let plan = gauss_coefficients(p, q)?;
    let origin = coeffs.rounded_center();
    let omega = classical_frequency(model, coeffs)?;
    let curvature = model.energy_derivative(origin as f64, 2);
    if curvature == 0.0 {
        return Err(Error::DegenerateSpectrum(format!("E''({origin}) = 0: no revival time")));
    }
    let classical_time = 2.0 * PI / omega.abs();
    let revival_time = 4.0 * PI / curvature.abs();
    let time = p as f64 / q as f64 * revival_time;
    // A concave spectrum runs the quadratic phase backwards, which is the
    // fraction (q − p)/q of a forward revival.
    let effective = if curvature < 0.0 && p != 0 { gauss_coefficients(q - p, q)? } else { plan.clone() };
    let shift = omega.signum() * classical_time / effective.l as f64;

    let table = BasisTable::new(model, coeffs, x_grid)?;
    let mut amplitudes = vec![Complex64::default(); x_grid.len()];
    for (s, a) in effective.a.iter().enumerate() {
        let row = table.psi_cl_row(coeffs, omega, origin, time + s as f64 * shift);
        for (out, value) in amplitudes.iter_mut().zip(row) {
            *out += a * value;
        }
    }
    let global = Complex64::from_polar(1.0, -model.energy(origin)? * time);
    amplitudes.iter_mut().for_each(|v| *v *= global);
    let exact = table.psi_row(coeffs, time);

    let overlap: Complex64 = amplitudes.iter().zip(&exact).map(|(r, e)| r.conj() * e).sum();
    let phase = overlap.arg();
    let rotate = Complex64::from_polar(1.0, phase);
    let diff: f64 = amplitudes.iter().zip(&exact).map(|(r, e)| (r * rotate - e).norm_sqr()).sum();
    let norm: f64 = exact.iter().map(|e| e.norm_sqr()).sum();
    if norm == 0.0 {
        return Err(Error::Domain("exact wavefunction vanishes on the whole grid".into()));
    }
    Ok(Reconstruction {
        plan,
        time,
        classical_time,
        revival_time,
        amplitudes,
        exact,
        phase,
        error: (diff / norm).sqrt(),
    })
}

/// One sign branch of the classicized velocities
/// `v = (2π/T_cl)(n − m)/(√E_n ± √E_m)` over ordered pairs `n > m`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityBranch {
    /// `+` for the slow branch `(n − m)/(√E_n + √E_m)`, `−` for the fast one.
    pub sign: char,
    pub velocities: Vec<((u32, u32), f64)>,
    /// Sizes of groups of equal velocity, largest first.
    pub multiplicities: Vec<usize>,
}

impl VelocityBranch {
    pub fn distinct(&self) -> usize {
        self.multiplicities.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VclReport {
    pub slow: VelocityBranch,
    pub fast: VelocityBranch,
    pub quadratic: bool,
    /// Slow-branch pairs with `n/m = n'/m'`, listed for quadratic spectra.
    pub ratio_collisions: Vec<((u32, u32), (u32, u32))>,
}

/// Velocity degeneracies of `Ψ_cl`. Velocities are compared with relative
/// tolerance `tolerance` of the largest magnitude in the branch.
pub fn vcl_degeneracy(model: &SpectrumModel, coeffs: &CoefficientSet, tolerance: f64) -> Result<VclReport> {
    let omega = classical_frequency(model, coeffs)?.abs();
    let levels: Vec<u32> = coeffs.levels().collect();
    let mut roots = Vec::with_capacity(levels.len());
    for &n in &levels {
        let e = model.energy(n)?;
        if e < 0.0 {
            return Err(Error::Domain(format!("E_{n} = {e} is negative")));
        }
        roots.push(e.sqrt());
    }
    let branch = |sign: f64| -> VelocityBranch {
        let mut velocities = Vec::new();
        for i in 0..levels.len() {
            for j in 0..i {
                let (n, m) = (levels[i], levels[j]);
                let v = omega * (n - m) as f64 / (roots[i] + sign * roots[j]);
                velocities.push(((n, m), v));
            }
        }
        let mut sorted: Vec<f64> = velocities.iter().map(|(_, v)| v.abs()).collect();
        sorted.sort_by(f64::total_cmp);
        let scale = sorted.last().copied().unwrap_or(0.0);
        let mut multiplicities: Vec<usize> = Vec::new();
        let mut start = f64::NEG_INFINITY;
        for v in sorted {
            if v - start <= tolerance * scale {
                *multiplicities.last_mut().unwrap() += 1;
            } else {
                start = v;
                multiplicities.push(1);
            }
        }
        multiplicities.sort_unstable_by(|a, b| b.cmp(a));
        VelocityBranch { sign: if sign > 0.0 { '+' } else { '-' }, velocities, multiplicities }
    };
    let slow = branch(1.0);
    let fast = branch(-1.0);
    let center = coeffs.rounded_center() as f64;
    let quadratic = model.energy_derivative(center, 2) != 0.0 && model.energy_derivative(center, 3) == 0.0;
    let mut ratio_collisions = Vec::new();
    if quadratic {
        let pairs: Vec<(u32, u32)> = slow.velocities.iter().map(|(pair, _)| *pair).collect();
        for (i, &(n, m)) in pairs.iter().enumerate() {
            for &(a, b) in &pairs[i + 1..] {
                if n as u64 * b as u64 == m as u64 * a as u64 {
                    ratio_collisions.push(((n, m), (a, b)));
                }
            }
        }
    }
    Ok(VclReport { slow, fast, quadratic, ratio_collisions })
}
