//! Space-time grids of the density and its parts, with ridge/channel
//! extraction, overlay scoring, period checks and file export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path as FsPath;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interference::{build_bundles, real_part_checked, VelocityBundle, DEFAULT_SPEED_TOLERANCE};
use crate::packet::{classical_frequency, BasisTable, CoefficientSet};
use crate::spectra::{Path, SpectrumModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSource {
    /// `|Ψ|²`.
    Density,
    /// `|Ψ_cl|²`.
    Classicized,
    /// `β_v` for the bundle at this speed.
    Bundle(f64),
}

impl FieldSource {
    pub fn label(&self) -> String {
        match self {
            FieldSource::Density => "density".into(),
            FieldSource::Classicized => "classicized".into(),
            FieldSource::Bundle(v) => format!("bundle({v})"),
        }
    }
}

/// Values on a `t × x` grid, row-major with one row per time.
#[derive(Debug, Clone, PartialEq)]
pub struct CarpetGrid {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
    pub source: FieldSource,
    pub model: &'static str,
    pub center: f64,
}

impl CarpetGrid {
    /// Builds a grid from raw values (for synthetic data and re-imports).
    pub fn from_values(xs: Vec<f64>, ts: Vec<f64>, values: Vec<f64>, source: FieldSource) -> Result<Self> {
        if values.len() != xs.len() * ts.len() {
            return Err(Error::Domain(format!("{} values do not fill a {}x{} grid", values.len(), ts.len(), xs.len())));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("grid value {bad} is not finite")));
        }
        Ok(CarpetGrid { xs, ts, values, source, model: "synthetic", center: f64::NAN })
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn nt(&self) -> usize {
        self.ts.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.nx()..(i + 1) * self.nx()]
    }

    pub fn get(&self, it: usize, ix: usize) -> f64 {
        self.values[it * self.nx() + ix]
    }

    /// Trapezoid integral of each row over x.
    pub fn row_integrals(&self) -> Vec<f64> {
        (0..self.nt())
            .map(|i| {
                let row = self.row(i);
                self.xs.windows(2).zip(row.windows(2)).map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1])).sum()
            })
            .collect()
    }

    /// Largest elementwise difference from another grid of the same shape.
    pub fn max_difference(&self, other: &CarpetGrid) -> Result<f64> {
        if self.nx() != other.nx() || self.nt() != other.nt() {
            return Err(Error::Domain("grids differ in shape".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub fn scaled(&self, factor: f64) -> CarpetGrid {
        CarpetGrid { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::Domain(format!("{name} grid is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(format!("{name} grid must be finite and strictly ascending")));
    }
    Ok(())
}

fn checked_positions(model: &SpectrumModel, xs: &[f64]) -> Result<Vec<f64>> {
    check_axis("x", xs)?;
    xs.iter().map(|&x| model.check_position(x)).collect()
}

/// Evaluates `|Ψ|²`, `|Ψ_cl|²` or `β_v` on `xs × ts`. Rows are computed in
/// parallel but each with a fixed summation order, so output does not
/// depend on the thread count.
pub fn density_grid(
    source: FieldSource,
    model: &SpectrumModel,
    coeffs: &CoefficientSet,
    xs: &[f64],
    ts: &[f64],
) -> Result<CarpetGrid> {
    if let FieldSource::Bundle(speed) = source {
        let set = build_bundles(model, coeffs, DEFAULT_SPEED_TOLERANCE)?;
        return bundle_grid(model, coeffs, set.find(speed)?, xs, ts);
    }
    check_axis("t", ts)?;
    let xs = checked_positions(model, xs)?;
    let table = BasisTable::new(model, coeffs, &xs)?;
    let rows: Vec<Vec<f64>> = match source {
        FieldSource::Density => {
            ts.par_iter().map(|&t| table.psi_row(coeffs, t).iter().map(|v| v.norm_sqr()).collect()).collect()
        }
        FieldSource::Classicized => {
            let omega = classical_frequency(model, coeffs)?;
            let origin = coeffs.rounded_center();
            ts.par_iter()
                .map(|&t| table.psi_cl_row(coeffs, omega, origin, t).iter().map(|v| v.norm_sqr()).collect())
                .collect()
        }
        FieldSource::Bundle(_) => unreachable!(),
    };
    Ok(CarpetGrid {
        xs,
        ts: ts.to_vec(),
        values: rows.concat(),
        source,
        model: model.kind().name(),
        center: coeffs.center(),
    })
}

/// `β_v` of one bundle on `xs × ts`.
pub fn bundle_grid(
    model: &SpectrumModel,
    coeffs: &CoefficientSet,
    bundle: &VelocityBundle,
    xs: &[f64],
    ts: &[f64],
) -> Result<CarpetGrid> {
    check_axis("t", ts)?;
    let xs = checked_positions(model, xs)?;
    let terms = &bundle.terms;
    // Spatial factor of every term at every x: plane waves in the square
    // well, exact eigenfunction products elsewhere.
    let spatial: Vec<Vec<Complex64>> = if terms.iter().all(|t| t.spatial_wavenumber.is_some()) {
        terms
            .iter()
            .map(|term| {
                let k = term.spatial_wavenumber.unwrap_or_default();
                xs.iter().map(|&x| Complex64::from_polar(1.0, -k * x)).collect()
            })
            .collect()
    } else {
        let table = BasisTable::new(model, coeffs, &xs)?;
        let index = |n: u32| table.levels.binary_search(&n).expect("bundle level in packet support");
        terms
            .iter()
            .map(|term| {
                let (a, b) = (&table.values[index(term.n)], &table.values[index(term.m)]);
                a.iter().zip(b).map(|(u, v)| Complex64::new(u * v, 0.0)).collect()
            })
            .collect()
    };
    let rows: Vec<Result<Vec<f64>>> = ts
        .par_iter()
        .map(|&t| {
            let weights: Vec<Complex64> =
                terms.iter().map(|term| term.amplitude * Complex64::from_polar(1.0, -term.frequency * t)).collect();
            (0..xs.len())
                .map(|j| {
                    let mut total = Complex64::default();
                    let mut scale = 0.0;
                    for (w, s) in weights.iter().zip(&spatial) {
                        let value = w * s[j];
                        scale += value.norm();
                        total += value;
                    }
                    real_part_checked(total, scale)
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(xs.len() * ts.len());
    for row in rows {
        values.extend(row?);
    }
    Ok(CarpetGrid {
        xs,
        ts: ts.to_vec(),
        values,
        source: FieldSource::Bundle(bundle.speed),
        model: model.kind().name(),
        center: coeffs.center(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Ridge,
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub t: f64,
    pub x: f64,
    pub value: f64,
    pub kind: ExtremumKind,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremaSet {
    pub points: Vec<Extremum>,
    pub threshold: f64,
}

impl ExtremaSet {
    pub fn of_kind(&self, kind: ExtremumKind) -> ExtremaSet {
        ExtremaSet {
            points: self.points.iter().filter(|p| p.kind == kind).copied().collect(),
            threshold: self.threshold,
        }
    }

    pub fn ridges(&self) -> ExtremaSet {
        self.of_kind(ExtremumKind::Ridge)
    }

    pub fn channels(&self) -> ExtremaSet {
        self.of_kind(ExtremumKind::Channel)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Topographic prominence of the strict maximum at `i`: its height above
/// the higher of the lowest points reached before meeting higher ground
/// on either side (or the row's end).
fn peak_prominence(row: &[f64], i: usize) -> f64 {
    let peak = row[i];
    let mut left_min = peak;
    for &v in row[..i].iter().rev() {
        if v > peak {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = peak;
    for &v in &row[i + 1..] {
        if v > peak {
            break;
        }
        right_min = right_min.min(v);
    }
    peak - left_min.max(right_min)
}

fn row_extrema(row: &[f64], kind: ExtremumKind) -> Vec<(usize, f64)> {
    let oriented: Vec<f64> = match kind {
        ExtremumKind::Ridge => row.to_vec(),
        ExtremumKind::Channel => row.iter().map(|v| -v).collect(),
    };
    (1..oriented.len().saturating_sub(1))
        .filter(|&i| oriented[i] > oriented[i - 1] && oriented[i] > oriented[i + 1])
        .map(|i| (i, peak_prominence(&oriented, i)))
        .collect()
}

/// Strict per-row local maxima (ridges) and minima (channels) whose
/// prominence is at least `prominence`.
pub fn extract_extrema(grid: &CarpetGrid, prominence: f64) -> Result<ExtremaSet> {
    if !(prominence >= 0.0) {
        return Err(Error::Domain(format!("prominence {prominence} must be non-negative")));
    }
    let mut points = Vec::new();
    for (it, &t) in grid.ts.iter().enumerate() {
        let row = grid.row(it);
        let mut found = Vec::new();
        for kind in [ExtremumKind::Ridge, ExtremumKind::Channel] {
            for (ix, prom) in row_extrema(row, kind) {
                if prom >= prominence {
                    found.push(Extremum { t, x: grid.xs[ix], value: row[ix], kind, prominence: prom });
                }
            }
        }
        found.sort_by(|a, b| a.x.total_cmp(&b.x));
        points.extend(found);
    }
    Ok(ExtremaSet { points, threshold: prominence })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayScore {
    /// Share of extrema within tolerance of some trajectory.
    pub fraction: f64,
    /// Root-mean-square x-distance over matched extrema.
    pub rms: f64,
    pub matched: usize,
    pub total: usize,
}

/// How well extrema follow a set of trajectories.
pub fn trajectory_overlay_score(extrema: &ExtremaSet, trajectories: &[Path], tolerance: f64) -> Result<OverlayScore> {
    if trajectories.is_empty() {
        return Err(Error::Domain("no trajectories to score against".into()));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::Domain(format!("tolerance {tolerance} must be non-negative")));
    }
    let mut matched = 0;
    let mut sum_sq = 0.0;
    for point in &extrema.points {
        let distance = trajectories
            .iter()
            .filter_map(|path| path.position_at(point.t))
            .map(|x| (x - point.x).abs())
            .fold(f64::INFINITY, f64::min);
        if distance <= tolerance {
            matched += 1;
            sum_sq += distance * distance;
        }
    }
    let total = extrema.len();
    Ok(OverlayScore {
        fraction: if total == 0 { 0.0 } else { matched as f64 / total as f64 },
        rms: if matched == 0 { 0.0 } else { (sum_sq / matched as f64).sqrt() },
        matched,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodCheck {
    pub periodic: bool,
    pub max_deviation: f64,
}

/// Compares each row with the row one period later. The period must be a
/// whole number of (uniform) time steps and the grid must span two periods.
pub fn verify_period(grid: &CarpetGrid, period: f64, tolerance: f64) -> Result<PeriodCheck> {
    let nt = grid.nt();
    if nt < 2 || !(period > 0.0) {
        return Err(Error::Domain("period check needs at least two rows and a positive period".into()));
    }
    let span = grid.ts[nt - 1] - grid.ts[0];
    let dt = span / (nt - 1) as f64;
    if grid.ts.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
        return Err(Error::Domain("period check needs uniform time steps".into()));
    }
    let steps = period / dt;
    let shift = steps.round();
    if shift < 1.0 || (steps - shift).abs() > 1e-6 {
        return Err(Error::Domain(format!("period {period} is not a whole number of steps {dt}")));
    }
    if span < 2.0 * period * (1.0 - 1e-9) {
        return Err(Error::Domain(format!("time range {span} is shorter than two periods of {period}")));
    }
    let shift = shift as usize;
    let nx = grid.nx();
    let max_deviation = grid.values[..(nt - shift) * nx]
        .iter()
        .zip(&grid.values[shift * nx..])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(PeriodCheck { periodic: max_deviation <= tolerance, max_deviation })
}

/// Period check by re-evaluating the grid's source at `t + period`.
pub fn verify_period_exact(
    grid: &CarpetGrid,
    model: &SpectrumModel,
    coeffs: &CoefficientSet,
    period: f64,
    tolerance: f64,
) -> Result<PeriodCheck> {
    let shifted: Vec<f64> = grid.ts.iter().map(|t| t + period).collect();
    let later = density_grid(grid.source, model, coeffs, &grid.xs, &shifted)?;
    let max_deviation = grid.max_difference(&later)?;
    Ok(PeriodCheck { periodic: max_deviation <= tolerance, max_deviation })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Pgm,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Pgm => "pgm",
        }
    }
}

/// `x,t,value`, one line per point, time-major.
pub fn write_csv<W: Write>(grid: &CarpetGrid, mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,t,value")?;
    for (it, t) in grid.ts.iter().enumerate() {
        for (x, v) in grid.xs.iter().zip(grid.row(it)) {
            writeln!(out, "{x},{t},{v}")?;
        }
    }
    Ok(())
}

/// Binary 16-bit PGM with time increasing downward and values mapped
/// linearly from `[min, max]` onto `[0, 65535]`.
pub fn write_pgm<W: Write>(grid: &CarpetGrid, mut out: W) -> std::io::Result<()> {
    write!(out, "P5\n{} {}\n65535\n", grid.nx(), grid.nt())?;
    let lo = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let mut bytes = Vec::with_capacity(2 * grid.values.len());
    for v in &grid.values {
        let level = if range > 0.0 { ((v - lo) / range * 65535.0).round() as u16 } else { 0 };
        bytes.extend_from_slice(&level.to_be_bytes());
    }
    out.write_all(&bytes)
}

pub fn export_grid(grid: &CarpetGrid, format: ExportFormat, destination: &FsPath) -> Result<()> {
    let file = File::create(destination).map_err(|e| Error::io(destination, e))?;
    let mut out = BufWriter::new(file);
    match format {
        ExportFormat::Csv => write_csv(grid, &mut out),
        ExportFormat::Pgm => write_pgm(grid, &mut out),
    }
    .and_then(|_| out.flush())
    .map_err(|e| Error::io(destination, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{make_coefficients, CoefficientKind};
    use std::f64::consts::PI;

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    fn well_setup() -> (SpectrumModel, CoefficientSet) {
        let well = SpectrumModel::infinite_well(PI).unwrap();
        let coeffs = make_coefficients(&CoefficientKind::Uniform { lo: 1, hi: 10 }, &well).unwrap();
        (well, coeffs)
    }

    #[test]
    fn density_rows_are_normalized() {
        let (well, coeffs) = well_setup();
        let grid =
            density_grid(FieldSource::Density, &well, &coeffs, &axis(0.0, PI, 1025), &axis(0.0, 1.0, 5)).unwrap();
        assert_eq!(grid.values.len(), 5 * 1025);
        for integral in grid.row_integrals() {
            assert!((integral - 1.0).abs() < 1e-6);
        }
        assert!(grid.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn half_revival_mirrors_the_grid() {
        let (well, coeffs) = well_setup();
        let xs = axis(0.0, PI, 65);
        let ts = axis(0.0, 1.0, 9);
        let shifted: Vec<f64> = ts.iter().map(|t| t + PI).collect();
        let a = density_grid(FieldSource::Density, &well, &coeffs, &xs, &ts).unwrap();
        let b = density_grid(FieldSource::Density, &well, &coeffs, &xs, &shifted).unwrap();
        for it in 0..ts.len() {
            for ix in 0..xs.len() {
                assert!((b.get(it, ix) - a.get(it, xs.len() - 1 - ix)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unimodal_rows_give_one_ridge() {
        let xs = axis(-3.0, 3.0, 101);
        let ts = axis(0.0, 1.0, 6);
        let values: Vec<f64> = ts.iter().flat_map(|t| xs.iter().map(move |x| (-(x - t).powi(2)).exp())).collect();
        let grid = CarpetGrid::from_values(xs, ts, values, FieldSource::Density).unwrap();
        let found = extract_extrema(&grid, 0.0).unwrap();
        assert_eq!(found.ridges().len(), 6);
        assert!(found.channels().is_empty());
        for (i, p) in found.points.iter().enumerate() {
            assert!((p.x - 0.2 * i as f64).abs() < 0.031);
        }
    }

    #[test]
    fn prominence_filters_ripples() {
        let xs = axis(0.0, 1.0, 7);
        let row = vec![0.0, 1.0, 0.9, 0.95, 0.2, 3.0, 0.0];
        let grid = CarpetGrid::from_values(xs, vec![0.0], row, FieldSource::Density).unwrap();
        let all = extract_extrema(&grid, 0.0).unwrap();
        assert_eq!(all.ridges().len(), 3);
        let proms: Vec<f64> = all.ridges().points.iter().map(|p| p.prominence).collect();
        assert!((proms[0] - 0.8).abs() < 1e-12 && (proms[1] - 0.05).abs() < 1e-12 && (proms[2] - 3.0).abs() < 1e-12);
        assert_eq!(extract_extrema(&grid, 0.5).unwrap().ridges().len(), 2);
        assert!(extract_extrema(&grid, -1.0).is_err());
    }

    #[test]
    fn self_match_scores_perfectly() {
        let ts = axis(0.0, 1.0, 11);
        let path = crate::spectra::Path {
            points: ts.iter().map(|&t| crate::spectra::PathPoint { t, x: 0.5 * t, velocity: 0.5 }).collect(),
        };
        let points = ts
            .iter()
            .map(|&t| Extremum { t, x: 0.5 * t, value: 1.0, kind: ExtremumKind::Ridge, prominence: 1.0 })
            .collect();
        let score = trajectory_overlay_score(&ExtremaSet { points, threshold: 0.0 }, &[path], 1e-9).unwrap();
        assert_eq!((score.fraction, score.rms), (1.0, 0.0));
        let empty = ExtremaSet { points: vec![], threshold: 0.0 };
        assert!(trajectory_overlay_score(&empty, &[], 0.1).is_err());
    }

    #[test]
    fn full_revival_and_false_third() {
        let (well, coeffs) = well_setup();
        let grid =
            density_grid(FieldSource::Density, &well, &coeffs, &axis(0.0, PI, 64), &axis(0.0, 4.0 * PI, 385)).unwrap();
        let revival = verify_period(&grid, 2.0 * PI, 1e-10).unwrap();
        assert!(revival.periodic, "{}", revival.max_deviation);
        let third = verify_period(&grid, 2.0 * PI / 3.0, 1e-8).unwrap();
        assert!(!third.periodic && third.max_deviation > 1e-2);
        assert!(verify_period(&grid, 3.0 * PI, 1e-8).is_err());
        assert!(verify_period(&grid, 0.1, 1e-8).is_err());
        let exact = verify_period_exact(&grid, &well, &coeffs, 2.0 * PI, 1e-10).unwrap();
        assert!(exact.periodic);
    }

    #[test]
    fn csv_round_trip_and_pgm_bytes() {
        let grid = CarpetGrid::from_values(
            vec![0.0, 0.1],
            vec![0.0, 1.0 / 3.0],
            vec![0.0, 1.0, 2.0, 3.0],
            FieldSource::Density,
        )
        .unwrap();
        let mut pgm = Vec::new();
        write_pgm(&grid, &mut pgm).unwrap();
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(&pgm[header.len()..], &[0, 0, 0x55, 0x55, 0xAA, 0xAA, 0xFF, 0xFF]);

        let flat = CarpetGrid::from_values(vec![0.0, 1.0], vec![0.0], vec![4.0, 4.0], FieldSource::Density).unwrap();
        let mut pgm = Vec::new();
        write_pgm(&flat, &mut pgm).unwrap();
        assert!(pgm[pgm.len() - 4..].iter().all(|b| *b == 0));

        let mut csv = Vec::new();
        write_csv(&grid, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let parsed: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
        assert_eq!(parsed, grid.values);
        assert_eq!(text.lines().nth(2).unwrap(), "0.1,0,1");
    }

    #[test]
    fn export_reports_the_path_on_failure() {
        let grid = CarpetGrid::from_values(vec![0.0], vec![0.0], vec![1.0], FieldSource::Density).unwrap();
        let err = export_grid(&grid, ExportFormat::Csv, FsPath::new("/nonexistent/dir/out.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
    }
}
