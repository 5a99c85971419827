//! One function per subcommand. Each reads the resolved configuration,
//! writes its files under the output directory and reports on `out`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qcarpet::carpet::bundle_grid;
use qcarpet::interference::{intermode_terms, write_inventory_csv, DEFAULT_SPEED_TOLERANCE};
use qcarpet::packet::classical_time;
use qcarpet::spectra::{classical_trajectory, turning_points};
use qcarpet::*;

use crate::config::{default_window, Axes, Format, RunConfig};
use crate::error::{CliError, CliResult};

/// Flag values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub v: Option<f64>,
    pub p: Option<u32>,
    pub q: Option<u32>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

pub struct Context<'a> {
    pub config: RunConfig,
    pub overrides: Overrides,
    pub out: &'a mut (dyn Write + Send),
}

impl Context<'_> {
    fn directory(&self) -> CliResult<PathBuf> {
        let dir = self.overrides.out.clone().unwrap_or_else(|| self.config.output.directory.clone());
        std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(dir)
    }

    fn formats(&self) -> CliResult<Vec<Format>> {
        match self.overrides.format {
            Some(f) => Ok(vec![f]),
            None => self.config.formats(),
        }
    }

    fn say(&mut self, line: impl AsRef<str>) -> CliResult<()> {
        writeln!(self.out, "{}", line.as_ref()).map_err(|e| io_error(Path::new("<stdout>"), e))
    }
}

fn io_error(path: &Path, err: std::io::Error) -> CliError {
    CliError::Io { path: path.to_path_buf(), message: err.to_string() }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn finish(path: &Path, mut writer: BufWriter<File>) -> CliResult<()> {
    writer.flush().map_err(|e| io_error(path, e))
}

fn export_all(ctx: &mut Context, grid: &CarpetGrid, stem: &str) -> CliResult<()> {
    let dir = ctx.directory()?;
    for format in ctx.formats()? {
        let format: ExportFormat = format.into();
        let path = dir.join(format!("{stem}.{}", format.extension()));
        export_grid(grid, format, &path)?;
        ctx.say(format!("wrote {}", path.display()))?;
    }
    Ok(())
}

/// Default time window: one revival period, or two classical periods when
/// the spectrum has no curvature.
fn revival_window(model: &SpectrumModel, coeffs: &CoefficientSet) -> CliResult<(f64, f64)> {
    let report = time_scales_at(model, coeffs.rounded_center() as f64)?;
    Ok((0.0, report.revival().unwrap_or(2.0 * report.classical())))
}

fn time_scales_at(model: &SpectrumModel, center: f64) -> CliResult<revival::TimeScaleReport> {
    time_scales(model, center, 3).map_err(CliError::at("coefficients"))
}

struct Setup {
    model: SpectrumModel,
    coeffs: CoefficientSet,
}

fn setup(ctx: &Context) -> CliResult<Setup> {
    let model = ctx.config.build_model()?;
    let coeffs = ctx.config.build_coefficients(&model)?;
    if let Some(warning) = coeffs.semiclassical_warning() {
        log::warn!("{warning}");
    }
    Ok(Setup { model, coeffs })
}

fn carpet_axes(ctx: &Context, s: &Setup) -> CliResult<Axes> {
    let x = match (ctx.config.grid.x_min, ctx.config.grid.x_max) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => default_window(&s.model, &s.coeffs)?,
    };
    let t = match (ctx.config.grid.t_min, ctx.config.grid.t_max) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => revival_window(&s.model, &s.coeffs)?,
    };
    ctx.config.grid.resolve(&s.model, x, t)
}

pub fn carpet(ctx: &mut Context) -> CliResult<()> {
    let s = setup(ctx)?;
    let axes = carpet_axes(ctx, &s)?;
    let grid = density_grid(FieldSource::Density, &s.model, &s.coeffs, &axes.xs, &axes.ts)?;
    export_all(ctx, &grid, "density")
}

fn bundle_label(bundle: &VelocityBundle) -> String {
    match bundle.well_multiple {
        Some(k) => format!("v{k}"),
        None => format!("s{}", bundle.speed),
    }
}

pub fn bundles(ctx: &mut Context) -> CliResult<()> {
    let s = setup(ctx)?;
    let tolerance = ctx.config.bundles.tolerance.unwrap_or(DEFAULT_SPEED_TOLERANCE);
    if !(tolerance >= 0.0) {
        return Err(CliError::config("bundles.tolerance", format!("must be non-negative, got {tolerance}")));
    }
    let set = build_bundles(&s.model, &s.coeffs, tolerance)?;
    let unit = s.model.well_speed_unit().unwrap_or(1.0);
    let requested: Vec<f64> = match ctx.overrides.v {
        Some(v) => vec![v],
        None => ctx.config.bundles.speeds.clone(),
    };
    let mut selected: Vec<&VelocityBundle> = Vec::new();
    for v in &requested {
        let bundle = set.find(v * unit).map_err(|_| {
            CliError::config("bundles.speeds", format!("no bundle at speed {v}; available: {}", available(&set, unit)))
        })?;
        selected.push(bundle);
    }
    if requested.is_empty() {
        selected = set.bundles.iter().collect();
    }

    let dir = ctx.directory()?;
    let path = dir.join("inventory.csv");
    let mut writer = create(&path)?;
    write_inventory_csv(&set, &mut writer).map_err(|e| io_error(&path, e))?;
    finish(&path, writer)?;
    ctx.say(format!("wrote {}", path.display()))?;

    let path = dir.join("counts.csv");
    let mut writer = create(&path)?;
    let mut lines = vec!["speed,multiple,full_count,conjugate_pair_count".to_string()];
    for b in &set.bundles {
        let multiple = b.well_multiple.map(|k| k.to_string()).unwrap_or_default();
        lines.push(format!("{},{},{},{}", b.speed, multiple, b.full_count, b.conjugate_pair_count));
    }
    writeln!(writer, "{}", lines.join("\n")).map_err(|e| io_error(&path, e))?;
    finish(&path, writer)?;
    ctx.say(format!("wrote {}", path.display()))?;

    let axes = carpet_axes(ctx, &s)?;
    for bundle in selected {
        let line = match bundle.well_multiple {
            Some(k) => format!(
                "bundle |v|={k}v0 speed={} full_count={} conjugate_pair_count={}",
                bundle.speed, bundle.full_count, bundle.conjugate_pair_count
            ),
            None => format!(
                "bundle speed={} full_count={} conjugate_pair_count={}",
                bundle.speed, bundle.full_count, bundle.conjugate_pair_count
            ),
        };
        ctx.say(line)?;
        let grid = bundle_grid(&s.model, &s.coeffs, bundle, &axes.xs, &axes.ts)?;
        export_all(ctx, &grid, &format!("bundle_{}", bundle_label(bundle)))?;
    }
    ctx.say(format!("bundles={} terms={}", set.len(), set.total_terms()))
}

fn available(set: &BundleSet, unit: f64) -> String {
    let speeds: Vec<String> = set.bundles.iter().map(|b| format!("{}", b.speed / unit)).collect();
    speeds.join(", ")
}

pub fn velocities(ctx: &mut Context) -> CliResult<()> {
    let s = setup(ctx)?;
    let unit = s.model.well_speed_unit().unwrap_or(1.0);
    let terms = intermode_terms(&s.model, &s.coeffs)?;
    ctx.say("n,m,sign1,sign2,velocity,class")?;
    for term in terms {
        if let Some(v) = ctx.overrides.v {
            if (term.degeneracy_speed.abs() - v * unit).abs() > 1e-9 * unit.max(1.0) {
                continue;
            }
        }
        ctx.say(format!(
            "{},{},{},{},{},{}",
            term.n,
            term.m,
            term.sign1,
            term.sign2,
            term.degeneracy_speed + 0.0,
            term.class.name()
        ))?;
    }
    Ok(())
}

pub fn trajectories(ctx: &mut Context) -> CliResult<()> {
    let s = setup(ctx)?;
    let axes = carpet_axes(ctx, &s)?;
    let (lo, hi) = (axes.xs[0], axes.xs[axes.xs.len() - 1]);
    let middle = 0.5 * (lo + hi);
    let mut specs: Vec<(u32, u32, Sign, Sign, f64)> = Vec::new();
    if ctx.config.trajectories.terms.is_empty() {
        let n = s.coeffs.rounded_center();
        let m = s.coeffs.levels().find(|&k| k > n).unwrap_or(n);
        specs.push((m, n, Sign::Plus, Sign::Plus, middle));
        specs.push((m, n, Sign::Plus, Sign::Minus, middle));
    }
    for (i, t) in ctx.config.trajectories.terms.iter().enumerate() {
        let sign = |text: &str, field: &str| {
            Sign::parse(text).ok_or_else(|| {
                CliError::config(
                    format!("trajectories.terms[{i}].{field}"),
                    format!("expected '+' or '-', got {text:?}"),
                )
            })
        };
        specs.push((t.n, t.m, sign(&t.sign1, "sign1")?, sign(&t.sign2, "sign2")?, t.x0.unwrap_or(middle)));
    }
    let dir = ctx.directory()?;
    let path = dir.join("trajectories.csv");
    let mut writer = create(&path)?;
    writeln!(writer, "path,n,m,sign1,sign2,t,x").map_err(|e| io_error(&path, e))?;
    for (i, &(n, m, s1, s2, x0)) in specs.iter().enumerate() {
        s.model.check_level(n).map_err(CliError::at("trajectories.terms"))?;
        s.model.check_level(m).map_err(CliError::at("trajectories.terms"))?;
        let path_points = constant_phase_trajectory(&s.model, n, m, s1, s2, x0, &axes.ts)
            .map_err(CliError::at("trajectories.terms"))?;
        for p in &path_points.points {
            writeln!(writer, "{i},{n},{m},{s1},{s2},{},{}", p.t, p.x).map_err(|e| io_error(&path, e))?;
        }
        ctx.say(format!("path {i}: ({n}, {m}, {s1}, {s2}) from x0={x0}"))?;
    }
    finish(&path, writer)?;
    ctx.say(format!("wrote {}", path.display()))
}

pub fn revival(ctx: &mut Context) -> CliResult<()> {
    let s = setup(ctx)?;
    let fractions: Vec<[u32; 2]> = match (ctx.overrides.p, ctx.overrides.q) {
        (Some(p), Some(q)) => vec![[p, q]],
        (None, None) => ctx.config.revival.fractions.clone(),
        _ => return Err(CliError::config("--p/--q", "both --p and --q must be given")),
    };
    let xs = if s.model.has_potential() {
        let window = default_window(&s.model, &s.coeffs)?;
        let x = (ctx.config.grid.x_min.unwrap_or(window.0), ctx.config.grid.x_max.unwrap_or(window.1));
        ctx.config.grid.resolve(&s.model, x, (0.0, 1.0))?.xs
    } else {
        return Err(CliError::config("model", "revival reconstruction needs eigenfunctions"));
    };
    let dir = ctx.directory()?;
    let summary_path = dir.join("revival.txt");
    let mut summary = create(&summary_path)?;
    for [p, q] in fractions {
        let rec = reconstruct_fractional(&s.model, &s.coeffs, p, q, &xs).map_err(CliError::at("revival.fractions"))?;
        let path = dir.join(format!("revival_{p}_{q}.csv"));
        let mut writer = create(&path)?;
        rec.plan.write_csv(&mut writer).map_err(|e| io_error(&path, e))?;
        finish(&path, writer)?;
        let mut lines = vec![format!("p={p} q={q} l={} t={}", rec.plan.l, rec.time)];
        for (i, a) in rec.plan.a.iter().enumerate() {
            lines.push(format!("|a_{i}|^2={}", a.norm_sqr()));
        }
        lines.push(format!("error={:e}", rec.error));
        for line in &lines {
            writeln!(summary, "{line}").map_err(|e| io_error(&summary_path, e))?;
            ctx.say(line)?;
        }
        ctx.say(format!("wrote {}", path.display()))?;
    }
    finish(&summary_path, summary)?;
    ctx.say(format!("wrote {}", summary_path.display()))
}

pub fn classicized(ctx: &mut Context) -> CliResult<()> {
    let s = setup(ctx)?;
    let c = ctx.config.classicized.clone();
    if !(c.prominence >= 0.0) {
        return Err(CliError::config("classicized.prominence", format!("must be non-negative, got {}", c.prominence)));
    }
    if !(c.tolerance_fraction > 0.0) {
        return Err(CliError::config(
            "classicized.tolerance_fraction",
            format!("must be positive, got {}", c.tolerance_fraction),
        ));
    }
    let period = classical_time(&s.model, &s.coeffs)?;
    let window = if s.model.has_potential() {
        default_window(&s.model, &s.coeffs)?
    } else {
        return Err(CliError::config("model", "the classicized carpet needs eigenfunctions"));
    };
    let x = (ctx.config.grid.x_min.unwrap_or(window.0), ctx.config.grid.x_max.unwrap_or(window.1));
    let t = (ctx.config.grid.t_min.unwrap_or(0.0), ctx.config.grid.t_max.unwrap_or(period));
    let axes = ctx.config.grid.resolve(&s.model, x, t)?;
    let grid = density_grid(FieldSource::Classicized, &s.model, &s.coeffs, &axes.xs, &axes.ts)?;
    export_all(ctx, &grid, "classicized")?;

    let center = s.coeffs.rounded_center();
    let energy = s.model.energy(center)?;
    let x0 = match c.x0 {
        Some(x0) => x0,
        None if s.model.is_infinite_well() => s.model.domain().0,
        None => turning_points(&s.model, energy).map_err(CliError::at("coefficients"))?.0,
    };
    let path =
        classical_trajectory(&s.model, energy, x0, c.direction, &axes.ts).map_err(CliError::at("classicized.x0"))?;
    let dir = ctx.directory()?;
    let path_file = dir.join("classical_path.csv");
    let mut writer = create(&path_file)?;
    writeln!(writer, "t,x,velocity").map_err(|e| io_error(&path_file, e))?;
    for p in &path.points {
        writeln!(writer, "{},{},{}", p.t, p.x, p.velocity).map_err(|e| io_error(&path_file, e))?;
    }
    finish(&path_file, writer)?;
    ctx.say(format!("wrote {}", path_file.display()))?;

    let peak = grid.values.iter().copied().fold(0.0, f64::max);
    let ridges = extract_extrema(&grid, c.prominence * peak)?.ridges();
    let width = axes.xs[axes.xs.len() - 1] - axes.xs[0];
    let tolerance = c.tolerance_fraction * width;
    let score = trajectory_overlay_score(&ridges, &[path], tolerance)?;
    let lines = [
        format!("center={center} energy={energy} classical_period={period}"),
        format!(
            "overlay_fraction={} rms={} matched={} ridges={}",
            score.fraction, score.rms, score.matched, score.total
        ),
        format!("tolerance={tolerance} prominence={}", c.prominence * peak),
    ];
    let report = dir.join("overlay.txt");
    let mut writer = create(&report)?;
    for line in &lines {
        writeln!(writer, "{line}").map_err(|e| io_error(&report, e))?;
        ctx.say(line)?;
    }
    finish(&report, writer)?;
    ctx.say(format!("wrote {}", report.display()))
}

pub fn timescales(ctx: &mut Context) -> CliResult<()> {
    let s = setup(ctx)?;
    let config = ctx.config.timescales.clone();
    let center = config.center.unwrap_or(s.coeffs.rounded_center() as f64);
    let report = time_scales(&s.model, center, config.max_order).map_err(CliError::at("timescales"))?;
    let check = revival::hierarchy_check(&report, config.degree, config.min_ratio);
    let mut text = report.to_key_values();
    text.push_str(&format!("hierarchy_check(min_ratio={}) = {}\n", config.min_ratio, check.ok));
    for d in &check.diagnostics {
        text.push_str(&format!("diagnostic = {d}\n"));
    }
    ctx.say(text.trim_end())
}
