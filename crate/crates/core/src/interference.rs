//! Intermode terms, their characteristic velocities and velocity bundles.
//!
//! Every cross term `c_n c_m* ψ_n ψ_m e^(−i(E_n−E_m)t)` of `|Ψ|²` is split
//! into four sign-resolved pieces `ι^(s1 s2)_nm`. In the square well the split
//! is exact: `ψ_n = Σ_s C_s e^(−i s k_n x)` with `C_± = ±(i/2)√(2/L)`, so
//! `ι^(s1 s2)_nm = c_n c_m* C_s1 C_s2 e^(−i(s1 k_n + s2 k_m)x) e^(−i(E_n−E_m)t)`.
//! Other wells have no exact plane-wave split; each of the four pieces
//! carries a quarter of the exact product instead.

use std::fmt;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::packet::CoefficientSet;
use crate::spectra::{momentum_from, unfold_in_well, ModelKind, Path, PathPoint, SpectrumModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    fn int(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    pub fn parse(text: &str) -> Option<Sign> {
        match text {
            "+" | "plus" => Some(Sign::Plus),
            "-" | "minus" => Some(Sign::Minus),
            _ => None,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermClass {
    Fast,
    Slow,
    Static,
}

impl TermClass {
    pub fn name(self) -> &'static str {
        match self {
            TermClass::Fast => "fast",
            TermClass::Slow => "slow",
            TermClass::Static => "static",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntermodeTerm {
    pub n: u32,
    pub m: u32,
    pub sign1: Sign,
    pub sign2: Sign,
    pub amplitude: Complex64,
    /// `−s1√E_n + s2√E_m`.
    pub degeneracy_speed: f64,
    /// `s1 k_n + s2 k_m`, square well only.
    pub spatial_wavenumber: Option<f64>,
    /// `E_n − E_m`.
    pub frequency: f64,
    pub class: TermClass,
}

impl IntermodeTerm {
    pub fn key(&self) -> (u32, u32, Sign, Sign) {
        (self.n, self.m, self.sign1, self.sign2)
    }

    /// Partner used for pair counting: `(m, n, −s1, −s2)`.
    pub fn partner_key(&self) -> (u32, u32, Sign, Sign) {
        (self.m, self.n, self.sign1.flip(), self.sign2.flip())
    }

    /// The term equal to this one's complex conjugate: `(m, n, −s2, −s1)`.
    pub fn conjugate_key(&self) -> (u32, u32, Sign, Sign) {
        (self.m, self.n, self.sign2.flip(), self.sign1.flip())
    }

    /// `ι(x, t)`.
    pub fn value(&self, model: &SpectrumModel, x: f64, t: f64) -> Result<Complex64> {
        let time = Complex64::from_polar(1.0, -self.frequency * t);
        match self.spatial_wavenumber {
            Some(k) => {
                model.check_position(x)?;
                Ok(self.amplitude * Complex64::from_polar(1.0, -k * x) * time)
            }
            None => {
                let product = model.eigenfunction(self.n, x)? * model.eigenfunction(self.m, x)?;
                Ok(self.amplitude * product * time)
            }
        }
    }
}

fn check_energy_root(e: f64, n: u32) -> Result<f64> {
    if e < 0.0 {
        return Err(Error::Domain(format!("E_{n} = {e} is negative: no real momentum at V = 0")));
    }
    Ok(e.sqrt())
}

/// `dx/dt = −(E_n − E_m) / (s1 p_n(x) + s2 p_m(x))`, the slope of the
/// line of constant phase of one intermode term.
pub fn characteristic_velocity(model: &SpectrumModel, n: u32, m: u32, sign1: Sign, sign2: Sign, x: f64) -> Result<f64> {
    if n == m && sign1 != sign2 {
        return Err(Error::UndefinedVelocity { n, m, sign1: sign1.symbol(), sign2: sign2.symbol() });
    }
    let (en, em) = (model.energy(n)?, model.energy(m)?);
    let x = model.check_position(x)?;
    let v = model.potential_value(x)?;
    let pn = momentum_from(en, v, x)?;
    let pm = momentum_from(em, v, x)?;
    if n == m {
        return Ok(0.0);
    }
    let denominator = sign1.value() * pn + sign2.value() * pm;
    if denominator == 0.0 {
        return Err(Error::UndefinedVelocity { n, m, sign1: sign1.symbol(), sign2: sign2.symbol() });
    }
    Ok(-(en - em) / denominator)
}

/// Integer multiple of `v_0` for the square well: `−s1 n + s2 m`.
pub fn well_speed_key(n: u32, m: u32, sign1: Sign, sign2: Sign) -> i64 {
    -sign1.int() * n as i64 + sign2.int() * m as i64
}

/// `−s1√E_n + s2√E_m`: the characteristic velocity where `V = 0`.
pub fn degeneracy_speed(model: &SpectrumModel, n: u32, m: u32, sign1: Sign, sign2: Sign) -> Result<f64> {
    let en = model.energy(n)?;
    let em = model.energy(m)?;
    if let Some(v0) = model.well_speed_unit() {
        return Ok(v0 * well_speed_key(n, m, sign1, sign2) as f64);
    }
    let (rn, rm) = (check_energy_root(en, n)?, check_energy_root(em, m)?);
    Ok(-sign1.value() * rn + sign2.value() * rm)
}

fn class_of(n: u32, m: u32, sign1: Sign, sign2: Sign) -> TermClass {
    if n == m {
        TermClass::Static
    } else if sign1 == sign2 {
        TermClass::Slow
    } else {
        TermClass::Fast
    }
}

/// Fast (opposite signs, `|v| ≈ 2k_n̄`), slow (equal signs, `n ≠ m`) or
/// static (`n = m`). Logs a warning when the levels sit far from the
/// packet center, where the fast/slow picture no longer applies.
pub fn classify_term(
    coeffs: &CoefficientSet,
    model: &SpectrumModel,
    n: u32,
    m: u32,
    sign1: Sign,
    sign2: Sign,
) -> Result<TermClass> {
    let center = model.energy_at(coeffs.center());
    let (en, em) = (model.energy(n)?, model.energy(m)?);
    let floor = if model.has_potential() { model.potential_value(model.potential_minimum())? } else { 0.0 };
    let depth = (center - floor).abs();
    if (en - center).abs() > 0.5 * depth || (em - center).abs() > 0.5 * depth {
        log::warn!("levels ({n}, {m}) are far from the packet center; classification is only indicative");
    }
    Ok(class_of(n, m, sign1, sign2))
}

/// All four sign-resolved pieces of the `(n, m)` cross term.
fn terms_for_pair(model: &SpectrumModel, n: u32, cn: Complex64, m: u32, cm: Complex64) -> Result<Vec<IntermodeTerm>> {
    let d = cn * cm.conj();
    let en = model.energy(n)?;
    let em = model.energy(m)?;
    let mut out = Vec::with_capacity(4);
    for sign1 in Sign::BOTH {
        for sign2 in Sign::BOTH {
            let (amplitude, spatial_wavenumber) = match model.kind() {
                ModelKind::InfiniteWell { width } => {
                    let unit = std::f64::consts::PI / width;
                    let k = unit * (sign1.value() * n as f64 + sign2.value() * m as f64);
                    (-d * (sign1.value() * sign2.value() / (2.0 * width)), Some(k))
                }
                _ => (d * 0.25, None),
            };
            out.push(IntermodeTerm {
                n,
                m,
                sign1,
                sign2,
                amplitude,
                degeneracy_speed: degeneracy_speed(model, n, m, sign1, sign2)?,
                spatial_wavenumber,
                frequency: en - em,
                class: class_of(n, m, sign1, sign2),
            });
        }
    }
    Ok(out)
}

/// Every intermode term of a packet, ordered by `n`, then `m`, then signs.
pub fn intermode_terms(model: &SpectrumModel, coeffs: &CoefficientSet) -> Result<Vec<IntermodeTerm>> {
    let mut terms = Vec::with_capacity(4 * coeffs.len() * coeffs.len());
    for &(n, cn) in coeffs.entries() {
        for &(m, cm) in coeffs.entries() {
            terms.extend(terms_for_pair(model, n, cn, m, cm)?);
        }
    }
    Ok(terms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityBundle {
    /// Common `|v|` at `V = 0`.
    pub speed: f64,
    /// `speed / v_0` for the square well, where grouping is exact.
    pub well_multiple: Option<u64>,
    pub terms: Vec<IntermodeTerm>,
    pub full_count: usize,
    pub conjugate_pair_count: usize,
}

impl VelocityBundle {
    fn new(speed: f64, well_multiple: Option<u64>, terms: Vec<IntermodeTerm>) -> Self {
        let keys: std::collections::HashSet<_> = terms.iter().map(|t| t.key()).collect();
        let mut seen = std::collections::HashSet::new();
        let mut classes = 0;
        for term in &terms {
            if seen.contains(&term.key()) {
                continue;
            }
            classes += 1;
            seen.insert(term.key());
            if keys.contains(&term.partner_key()) {
                seen.insert(term.partner_key());
            }
        }
        VelocityBundle { speed, well_multiple, full_count: terms.len(), conjugate_pair_count: classes, terms }
    }

    pub fn is_static(&self) -> bool {
        self.speed == 0.0
    }

    /// `β_v(x, t)`. The imaginary part cancels between conjugate terms and
    /// is checked before being dropped.
    pub fn field(&self, model: &SpectrumModel, x: f64, t: f64) -> Result<f64> {
        let mut total = Complex64::default();
        let mut scale = 0.0;
        for term in &self.terms {
            let value = term.value(model, x, t)?;
            scale += value.norm();
            total += value;
        }
        real_part_checked(total, scale)
    }
}

pub(crate) fn real_part_checked(total: Complex64, scale: f64) -> Result<f64> {
    if total.im.abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::Consistency(format!(
            "bundle field has imaginary residue {:e} (scale {:e})",
            total.im, scale
        )));
    }
    Ok(total.re)
}

/// Bundles ordered by ascending speed.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleSet {
    pub bundles: Vec<VelocityBundle>,
    pub tolerance: f64,
}

impl BundleSet {
    pub fn find(&self, speed: f64) -> Result<&VelocityBundle> {
        let slack = self.tolerance.max(1e-9 * speed.abs().max(1.0));
        self.bundles.iter().find(|b| (b.speed - speed).abs() <= slack).ok_or(Error::UnknownBundle(speed))
    }

    /// The bundle at `multiple · v_0` (square well only).
    pub fn find_multiple(&self, multiple: u64) -> Result<&VelocityBundle> {
        self.bundles.iter().find(|b| b.well_multiple == Some(multiple)).ok_or(Error::UnknownBundle(multiple as f64))
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    pub fn total_terms(&self) -> usize {
        self.bundles.iter().map(|b| b.full_count).sum()
    }
}

pub const DEFAULT_SPEED_TOLERANCE: f64 = 1e-9;

/// Groups every intermode term by `|degeneracy_speed|`: exactly (integer
/// multiples of `v_0`) in the square well, otherwise by clustering sorted
/// speeds, each cluster spanning at most `tolerance` from its smallest member.
pub fn build_bundles(model: &SpectrumModel, coeffs: &CoefficientSet, tolerance: f64) -> Result<BundleSet> {
    if !(tolerance >= 0.0) {
        return Err(Error::Domain(format!("speed tolerance {tolerance} must be non-negative")));
    }
    let terms = intermode_terms(model, coeffs)?;
    let mut bundles = Vec::new();
    if let Some(v0) = model.well_speed_unit() {
        let mut groups: std::collections::BTreeMap<u64, Vec<IntermodeTerm>> = Default::default();
        for term in terms {
            let key = well_speed_key(term.n, term.m, term.sign1, term.sign2).unsigned_abs();
            groups.entry(key).or_default().push(term);
        }
        for (key, members) in groups {
            bundles.push(VelocityBundle::new(v0 * key as f64, Some(key), members));
        }
    } else {
        let mut order: Vec<usize> = (0..terms.len()).collect();
        // Stable sort keeps lexicographic term order inside each bundle.
        order.sort_by(|&a, &b| terms[a].degeneracy_speed.abs().total_cmp(&terms[b].degeneracy_speed.abs()));
        let mut clusters: Vec<(f64, Vec<usize>)> = Vec::new();
        for idx in order {
            let speed = terms[idx].degeneracy_speed.abs();
            match clusters.last_mut() {
                Some((start, members)) if speed - *start <= tolerance => members.push(idx),
                _ => clusters.push((speed, vec![idx])),
            }
        }
        for (start, mut members) in clusters {
            members.sort_unstable();
            let speed = if start <= tolerance { 0.0 } else { start };
            let members = members.into_iter().map(|i| terms[i].clone()).collect();
            bundles.push(VelocityBundle::new(speed, None, members));
        }
    }
    Ok(BundleSet { bundles, tolerance })
}

/// `β_v(x, t)` for the bundle at `speed`.
pub fn bundle_field(model: &SpectrumModel, coeffs: &CoefficientSet, speed: f64, x: f64, t: f64) -> Result<f64> {
    let set = build_bundles(model, coeffs, DEFAULT_SPEED_TOLERANCE)?;
    set.find(speed)?.field(model, x, t)
}

/// Closed form of the square-well bundle `β_{v·v_0}(x, 0)`:
///
/// `−(2/L) Σ_n Re(c_n c*_{n+v}) cos((2n+v)πx/L)
///  + (1/L) Σ_{n=1}^{v−1} Re(c_n c*_{v−n}) cos((2n−v)πx/L)`.
///
/// The first sum collects the slow terms with `|n − m| = v`, the second the
/// fast terms with `n + m = v`, which set the threshold the pattern rides on.
pub fn beta_isw_initial(model: &SpectrumModel, coeffs: &CoefficientSet, v: u32, x: f64) -> Result<f64> {
    let ModelKind::InfiniteWell { width } = *model.kind() else {
        return Err(Error::Unsupported { model: model.kind().name(), what: "closed-form bundle profile".into() });
    };
    if v == 0 {
        return Err(Error::Domain("bundle multiple must be at least 1".into()));
    }
    let x = model.check_position(x)?;
    let unit = std::f64::consts::PI * x / width;
    let mut slow = 0.0;
    for &(n, cn) in coeffs.entries() {
        let partner = coeffs.get(n + v);
        slow += (cn * partner.conj()).re * ((2 * n + v) as f64 * unit).cos();
    }
    let mut threshold = 0.0;
    for n in 1..v {
        let d = coeffs.get(n) * coeffs.get(v - n).conj();
        threshold += d.re * ((2.0 * n as f64 - v as f64) * unit).cos();
    }
    Ok(-2.0 / width * slow + threshold / width)
}

/// Line of constant phase of one intermode term, started at `x0` and
/// sampled on `t_grid`. Square-well paths are straight segments reflected
/// at the walls. In smooth wells the velocity field is integrated inside
/// the region where both levels are classically allowed, reversing at its
/// edges.
pub fn constant_phase_trajectory(
    model: &SpectrumModel,
    n: u32,
    m: u32,
    sign1: Sign,
    sign2: Sign,
    x0: f64,
    t_grid: &[f64],
) -> Result<Path> {
    if t_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Domain("time grid must be ascending".into()));
    }
    let v_start = characteristic_velocity(model, n, m, sign1, sign2, x0)?;
    let x0 = model.check_position(x0)?;
    if let ModelKind::InfiniteWell { width } = *model.kind() {
        return Ok(unfold_in_well(width, x0, v_start, t_grid));
    }
    if v_start == 0.0 {
        let points = t_grid.iter().map(|&t| PathPoint { t, x: x0, velocity: 0.0 }).collect();
        return Ok(Path { points });
    }
    let lower = model.energy(n)?.min(model.energy(m)?);
    let (left, right) = crate::spectra::turning_points(model, lower)?;
    let speed_at = |x: f64| -> Result<f64> {
        characteristic_velocity(model, n, m, sign1, sign2, x.clamp(left, right)).map(f64::abs)
    };
    let mut fastest: f64 = 0.0;
    for i in 0..=64 {
        fastest = fastest.max(speed_at(left + (right - left) * i as f64 / 64.0)?);
    }
    let max_step = (right - left) / fastest / 512.0;

    let mut direction = v_start.signum();
    let mut x = x0;
    let mut t = t_grid.first().copied().unwrap_or(0.0);
    let mut points = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / max_step).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                let k1 = speed_at(x)?;
                let k2 = speed_at(x + 0.5 * h * direction * k1)?;
                let k3 = speed_at(x + 0.5 * h * direction * k2)?;
                let k4 = speed_at(x + h * direction * k3)?;
                x += direction * h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if x > right {
                    x = 2.0 * right - x;
                    direction = -direction;
                } else if x < left {
                    x = 2.0 * left - x;
                    direction = -direction;
                }
            }
        }
        t = target;
        points.push(PathPoint { t, x, velocity: direction * speed_at(x)? });
    }
    Ok(Path { points })
}

/// A group of slow `(n ≠ m)` terms sharing one `|v|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyClass {
    pub speed: f64,
    /// Unordered level pairs `(n, m)` with `n > m`.
    pub pairs: Vec<(u32, u32)>,
}

impl DegeneracyClass {
    pub fn multiplicity(&self) -> usize {
        self.pairs.len()
    }
}

/// Degeneracy classes of the slow terms, clustered like [`build_bundles`]
/// (exact keys in the square well). Multiplicity counts distinct level
/// pairs, since each pair contributes four slow terms of equal `|v|`.
pub fn slow_degeneracy_classes(
    model: &SpectrumModel,
    coeffs: &CoefficientSet,
    tolerance: f64,
) -> Result<Vec<DegeneracyClass>> {
    let levels: Vec<u32> = coeffs.levels().collect();
    let mut speeds = Vec::new();
    for (i, &m) in levels.iter().enumerate() {
        for &n in &levels[i + 1..] {
            let speed = degeneracy_speed(model, n, m, Sign::Plus, Sign::Plus)?.abs();
            speeds.push((speed, (n, m)));
        }
    }
    speeds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let exact = model.is_infinite_well();
    let mut classes: Vec<DegeneracyClass> = Vec::new();
    for (speed, pair) in speeds {
        match classes.last_mut() {
            Some(class) if (exact && speed == class.speed) || (!exact && speed - class.speed <= tolerance) => {
                class.pairs.push(pair)
            }
            _ => classes.push(DegeneracyClass { speed, pairs: vec![pair] }),
        }
    }
    Ok(classes)
}

/// Bundle inventory as CSV: `n,m,sign1,sign2,speed,re,im,class`.
pub fn write_inventory_csv<W: Write>(set: &BundleSet, mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,m,sign1,sign2,speed,re,im,class")?;
    for bundle in &set.bundles {
        for term in &bundle.terms {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                term.n,
                term.m,
                term.sign1,
                term.sign2,
                term.degeneracy_speed,
                term.amplitude.re,
                term.amplitude.im,
                term.class.name()
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{make_coefficients, psi, CoefficientKind};
    use std::f64::consts::PI;

    fn well() -> SpectrumModel {
        SpectrumModel::infinite_well(PI).unwrap()
    }

    fn uniform(model: &SpectrumModel) -> CoefficientSet {
        make_coefficients(&CoefficientKind::Uniform { lo: 1, hi: 10 }, model).unwrap()
    }

    #[test]
    fn hand_evaluated_velocities() {
        let w = well();
        let v = characteristic_velocity(&w, 3, 1, Sign::Plus, Sign::Minus, 1.0).unwrap();
        assert!((v + 4.0).abs() < 1e-12);
        let v = characteristic_velocity(&w, 6, 5, Sign::Plus, Sign::Plus, 2.0).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
        assert_eq!(characteristic_velocity(&w, 4, 4, Sign::Plus, Sign::Plus, 0.3).unwrap(), 0.0);
        assert!(matches!(
            characteristic_velocity(&w, 4, 4, Sign::Plus, Sign::Minus, 0.3),
            Err(Error::UndefinedVelocity { .. })
        ));
    }

    #[test]
    fn degeneracy_speed_agrees_with_velocity_where_potential_vanishes() {
        let w = well();
        assert_eq!(degeneracy_speed(&w, 3, 1, Sign::Plus, Sign::Minus).unwrap(), -4.0);
        assert_eq!(degeneracy_speed(&w, 1, 1, Sign::Minus, Sign::Plus).unwrap(), 2.0);
        assert_eq!(degeneracy_speed(&w, 7, 7, Sign::Plus, Sign::Plus).unwrap(), 0.0);
        let sho = SpectrumModel::harmonic(2.0).unwrap();
        for (s1, s2) in [(Sign::Plus, Sign::Plus), (Sign::Minus, Sign::Plus), (Sign::Plus, Sign::Minus)] {
            let at_zero = characteristic_velocity(&sho, 5, 2, s1, s2, 0.0).unwrap();
            let speed = degeneracy_speed(&sho, 5, 2, s1, s2).unwrap();
            assert!((at_zero - speed).abs() < 1e-12);
        }
    }

    #[test]
    fn classification_examples() {
        let w = well();
        let set = make_coefficients(&CoefficientKind::gaussian(50.0, 3.0), &w).unwrap();
        assert_eq!(classify_term(&set, &w, 51, 49, Sign::Plus, Sign::Plus).unwrap(), TermClass::Slow);
        assert_eq!(degeneracy_speed(&w, 51, 49, Sign::Plus, Sign::Plus).unwrap(), -2.0);
        assert_eq!(classify_term(&set, &w, 50, 50, Sign::Plus, Sign::Minus).unwrap(), TermClass::Static);
        assert_eq!(classify_term(&set, &w, 51, 49, Sign::Plus, Sign::Minus).unwrap(), TermClass::Fast);
        assert_eq!(degeneracy_speed(&w, 51, 49, Sign::Plus, Sign::Minus).unwrap(), -100.0);
    }

    #[test]
    fn square_well_bundle_counts() {
        let w = well();
        let set = build_bundles(&w, &uniform(&w), DEFAULT_SPEED_TOLERANCE).unwrap();
        let one = set.find_multiple(1).unwrap();
        let two = set.find_multiple(2).unwrap();
        assert_eq!((one.full_count, one.conjugate_pair_count), (36, 18));
        assert_eq!((two.full_count, two.conjugate_pair_count), (34, 17));
        assert_eq!(set.total_terms(), 400);
        assert!(set.bundles.windows(2).all(|w| w[0].speed < w[1].speed));
        assert_eq!(set.find(2.0).unwrap().well_multiple, Some(2));
        assert!(matches!(set.find(0.5), Err(Error::UnknownBundle(_))));
    }

    #[test]
    fn conjugate_terms_share_a_bundle_and_sum_to_real() {
        let w = well();
        let coeffs = make_coefficients(
            &CoefficientKind::Custom(vec![
                (1, Complex64::new(0.3, 0.4)),
                (2, Complex64::new(-0.2, 0.1)),
                (4, Complex64::new(0.5, -0.7)),
            ]),
            &w,
        )
        .unwrap();
        let set = build_bundles(&w, &coeffs, DEFAULT_SPEED_TOLERANCE).unwrap();
        for bundle in &set.bundles {
            for term in &bundle.terms {
                let partner = bundle.terms.iter().find(|t| t.key() == term.conjugate_key()).unwrap();
                for (x, t) in [(0.3, 0.1), (1.9, 2.5)] {
                    let sum = term.value(&w, x, t).unwrap() + partner.value(&w, x, t).unwrap();
                    assert!(sum.im.abs() < 1e-15);
                }
                assert!(bundle.terms.iter().any(|t| t.key() == term.partner_key()));
            }
        }
    }

    #[test]
    fn bundles_partition_the_density() {
        let w = well();
        let coeffs = uniform(&w);
        let set = build_bundles(&w, &coeffs, DEFAULT_SPEED_TOLERANCE).unwrap();
        for (x, t) in [(0.4, 0.0), (1.3, 0.77), (2.9, 5.1)] {
            let sum: f64 = set.bundles.iter().map(|b| b.field(&w, x, t).unwrap()).sum();
            let density = psi(&w, &coeffs, x, t).unwrap().norm_sqr();
            assert!((sum - density).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_well_partition_uses_exact_products() {
        let sho = SpectrumModel::harmonic(2.0).unwrap();
        let coeffs = make_coefficients(&CoefficientKind::gaussian(6.0, 2.0), &sho).unwrap();
        let set = build_bundles(&sho, &coeffs, DEFAULT_SPEED_TOLERANCE).unwrap();
        for (x, t) in [(-1.0, 0.2), (0.5, 3.3)] {
            let sum: f64 = set.bundles.iter().map(|b| b.field(&sho, x, t).unwrap()).sum();
            let density = psi(&sho, &coeffs, x, t).unwrap().norm_sqr();
            assert!((sum - density).abs() < 1e-12, "{sum} vs {density}");
        }
    }

    #[test]
    fn closed_form_matches_direct_bundle_sum() {
        let w = well();
        let coeffs = uniform(&w);
        // Nine neighbouring pairs of weight 1/10 each, all cosines equal to 1.
        let at_wall = beta_isw_initial(&w, &coeffs, 1, 0.0).unwrap();
        assert!((at_wall + 2.0 / PI * 0.9).abs() < 1e-14);
        // Eight slow pairs plus the c_1 c_1* threshold term.
        let at_wall = beta_isw_initial(&w, &coeffs, 2, 0.0).unwrap();
        assert!((at_wall - (-2.0 / PI * 0.8 + 0.1 / PI)).abs() < 1e-14);
        let set = build_bundles(&w, &coeffs, DEFAULT_SPEED_TOLERANCE).unwrap();
        for v in 1..=6u32 {
            let bundle = set.find_multiple(v as u64).unwrap();
            for i in 0..=50 {
                let x = PI * i as f64 / 50.0;
                let closed = beta_isw_initial(&w, &coeffs, v, x).unwrap();
                assert!((closed - bundle.field(&w, x, 0.0).unwrap()).abs() < 1e-10);
            }
        }
        let sho = SpectrumModel::harmonic(1.0).unwrap();
        let c = make_coefficients(&CoefficientKind::Uniform { lo: 1, hi: 3 }, &sho).unwrap();
        assert!(matches!(beta_isw_initial(&sho, &c, 1, 0.0), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn well_paths_are_reflected_lines() {
        let w = well();
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let path = constant_phase_trajectory(&w, 6, 5, Sign::Plus, Sign::Plus, PI / 2.0, &grid).unwrap();
        assert!((path.points[10].x - (PI / 2.0 - 0.5)).abs() < 1e-12);
        for p in &path.points {
            assert!((p.velocity.abs() - 1.0).abs() < 1e-12);
            assert!(p.x >= 0.0 && p.x <= PI);
        }
        // A fast term near the center crosses the well and back in about T_cl.
        let period = 2.0 * PI / (2.0 * 10.0);
        let grid = [0.0, period];
        let path = constant_phase_trajectory(&w, 11, 9, Sign::Minus, Sign::Plus, 0.0, &grid).unwrap();
        assert!(path.points[1].x.abs() < 1e-9);
        assert!(constant_phase_trajectory(&w, 2, 2, Sign::Plus, Sign::Minus, 1.0, &grid).is_err());
    }

    #[test]
    fn smooth_path_stays_in_allowed_region() {
        let sho = SpectrumModel::harmonic(2.0).unwrap();
        let grid: Vec<f64> = (0..=400).map(|i| i as f64 * 0.02).collect();
        let path = constant_phase_trajectory(&sho, 8, 6, Sign::Plus, Sign::Plus, 0.0, &grid).unwrap();
        let (l, r) = crate::spectra::turning_points(&sho, sho.energy(6).unwrap()).unwrap();
        assert!(path.points.iter().all(|p| p.x >= l - 1e-9 && p.x <= r + 1e-9));
        assert!(path.points.iter().any(|p| p.velocity > 0.0));
        assert!(path.points.iter().any(|p| p.velocity < 0.0));
    }

    #[test]
    fn slow_classes_in_the_square_well() {
        let w = well();
        let classes = slow_degeneracy_classes(&w, &uniform(&w), 0.0).unwrap();
        assert_eq!(classes.len(), 9);
        assert_eq!(classes[0].multiplicity(), 9);
        assert_eq!(classes[8].pairs, vec![(10, 1)]);
    }

    #[test]
    fn inventory_csv_lists_every_term() {
        let w = well();
        let coeffs = make_coefficients(&CoefficientKind::Uniform { lo: 1, hi: 2 }, &w).unwrap();
        let set = build_bundles(&w, &coeffs, DEFAULT_SPEED_TOLERANCE).unwrap();
        let mut buf = Vec::new();
        write_inventory_csv(&set, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.starts_with("n,m,sign1,sign2,speed,re,im,class\n1,1,+,+,0,"));
    }
}
