//! Membrane–electrode capacitor and the electrostatic frequency shift.
//!
//! The fixed electrode is a set of annular sectors, each wired to one of two
//! terminals (`+` or `−`). The metalized membrane is the common floating
//! plate, so the circuit sees the two sector capacitances in series. In the
//! locally flat approximation a patch at `(r, θ)` contributes
//! `ε₀ r dr dθ / (h₀ + δz)`, with `δz > 0` opening the gap.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::device::{DeviceConfig, ElectrodeRef, MembraneStack};
use crate::error::{Error, Result};
use crate::modes::{default_threads, ModeSpec};
use crate::scalar::{count, lit, to_f64, Real};

/// Name of the built-in layout.
pub const EIGHT_SEGMENT: &str = "eight-segment";

/// Relative tolerance of the 2D capacitance quadrature.
pub const CAPACITANCE_REL_TOL: f64 = 1e-8;

const ANGLE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Plus,
    Minus,
}

impl Polarity {
    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Polarity::Plus),
            -1 => Ok(Polarity::Minus),
            other => Err(Error::validation("polarity", format!("must be +1 or -1, got {other}"))),
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            Polarity::Plus => 1,
            Polarity::Minus => -1,
        }
    }
}

/// One electrode segment: `r_in ≤ r ≤ r_out`, `θ_start ≤ θ ≤ θ_end`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sector<T> {
    pub r_in: T,
    pub r_out: T,
    pub theta_start: T,
    pub theta_end: T,
    pub polarity: Polarity,
}

/// Metalized part of the membrane: the annulus `inner ≤ r ≤ outer` minus an
/// optional angular notch.
#[derive(Clone, Debug, PartialEq)]
pub struct MetalMask<T> {
    pub inner: T,
    pub outer: T,
    pub notch: Option<(T, T)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElectrodeLayout<T> {
    pub segments: Vec<Sector<T>>,
    /// Rest gap `h₀` between membrane and electrode.
    pub gap: T,
    pub mask: MetalMask<T>,
    /// Membrane radius `R`.
    pub radius: T,
}

/// Polar rectangle of electrode–metal overlap.
#[derive(Clone, Copy, Debug)]
struct Patch<T> {
    r0: T,
    r1: T,
    t0: T,
    t1: T,
    polarity: Polarity,
}

impl<T: Real> Patch<T> {
    fn area(&self) -> T {
        (self.r1 * self.r1 - self.r0 * self.r0) * (self.t1 - self.t0) / lit(2.0)
    }
}

/// Start in `[0, 2π)` and width of an angular interval.
fn normalized_arc(start: f64, end: f64) -> (f64, f64) {
    (start.rem_euclid(TAU), end - start)
}

fn arc_overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (-1..=1)
        .map(|k| {
            let b0 = b.0 + k as f64 * TAU;
            ((a.0 + a.1).min(b0 + b.1) - a.0.max(b0)).max(0.0)
        })
        .sum()
}

/// `arc` minus every `2π` copy of `cut`, as a list of `(start, end)`.
fn subtract_arc(arc: (f64, f64), cut: (f64, f64)) -> Vec<(f64, f64)> {
    let mut pieces = vec![(arc.0, arc.0 + arc.1)];
    for k in -1..=2 {
        let c0 = cut.0 + k as f64 * TAU;
        let c1 = c0 + cut.1;
        pieces = pieces
            .into_iter()
            .flat_map(|(a, b)| {
                let mut keep = Vec::with_capacity(2);
                if c1 <= a || c0 >= b {
                    keep.push((a, b));
                } else {
                    if c0 > a {
                        keep.push((a, c0));
                    }
                    if c1 < b {
                        keep.push((c1, b));
                    }
                }
                keep
            })
            .filter(|(a, b)| b - a > ANGLE_SLACK)
            .collect();
    }
    pieces
}

impl<T: Real> ElectrodeLayout<T> {
    pub fn validate(&self) -> Result<()> {
        let r = self.radius;
        if !(r > T::zero()) || !r.is_finite() {
            return Err(Error::validation("electrode.radius", format!("must be > 0, got {r}")));
        }
        if !(self.gap > T::zero()) || !self.gap.is_finite() {
            return Err(Error::validation(
                "electrode.gap_m",
                format!("must be > 0, got {}", self.gap),
            ));
        }
        let m = &self.mask;
        if !(m.inner >= T::zero() && m.inner < m.outer && m.outer <= r) {
            return Err(Error::validation(
                "electrode.mask",
                format!(
                    "need 0 <= inner < outer <= R, got {} .. {} with R = {r}",
                    m.inner, m.outer
                ),
            ));
        }
        if let Some((a, b)) = m.notch {
            if !(b > a) || to_f64(b - a) > TAU {
                return Err(Error::validation(
                    "electrode.mask.notch",
                    "need start < end within one turn",
                ));
            }
        }
        if self.segments.is_empty() {
            return Err(Error::validation(
                "electrode.segments",
                "at least one segment is required",
            ));
        }
        for (i, s) in self.segments.iter().enumerate() {
            let field = format!("electrode.segments[{i}]");
            if !(s.r_in >= T::zero() && s.r_in < s.r_out && s.r_out <= r) {
                return Err(Error::validation(
                    field,
                    format!(
                        "radii must satisfy 0 <= r_in < r_out <= R, got {} .. {}",
                        s.r_in, s.r_out
                    ),
                ));
            }
            let width = to_f64(s.theta_end - s.theta_start);
            if !(width > 0.0) || width > TAU * (1.0 + 1e-12) {
                return Err(Error::validation(field, "need theta_start < theta_end within one turn"));
            }
        }
        for i in 0..self.segments.len() {
            for j in i + 1..self.segments.len() {
                let (a, b) = (&self.segments[i], &self.segments[j]);
                let radial = to_f64(a.r_out.min(b.r_out) - a.r_in.max(b.r_in));
                if radial <= 0.0 {
                    continue;
                }
                let arc_a = normalized_arc(to_f64(a.theta_start), to_f64(a.theta_end));
                let arc_b = normalized_arc(to_f64(b.theta_start), to_f64(b.theta_end));
                if arc_overlap(arc_a, arc_b) > ANGLE_SLACK {
                    return Err(Error::validation(
                        "electrode.segments",
                        format!("segments {i} and {j} overlap"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Eight equal 45° sectors over the metalized annulus, alternating
    /// `+`/`−` starting with `+` at `θ = 0`.
    pub fn eight_segment(stack: &MembraneStack<T>, gap: T) -> Result<Self> {
        let step = T::PI() / lit(4.0);
        let segments = (0..8)
            .map(|k| Sector {
                r_in: stack.coating_inner,
                r_out: stack.coating_outer,
                theta_start: step * count(k),
                theta_end: step * count(k + 1),
                polarity: if k % 2 == 0 { Polarity::Plus } else { Polarity::Minus },
            })
            .collect();
        let layout = ElectrodeLayout {
            segments,
            gap,
            mask: MetalMask {
                inner: stack.coating_inner,
                outer: stack.coating_outer,
                notch: None,
            },
            radius: stack.radius,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Overlap of electrode segments and metal mask as polar rectangles.
    fn patches(&self) -> Vec<Patch<T>> {
        let mut out = Vec::new();
        for s in &self.segments {
            let r0 = s.r_in.max(self.mask.inner);
            let r1 = s.r_out.min(self.mask.outer);
            if r1 <= r0 {
                continue;
            }
            let arc = (to_f64(s.theta_start), to_f64(s.theta_end - s.theta_start));
            let arcs = match self.mask.notch {
                Some((a, b)) => subtract_arc(arc, normalized_arc(to_f64(a), to_f64(b))),
                None => vec![(arc.0, arc.0 + arc.1)],
            };
            for (t0, t1) in arcs {
                out.push(Patch {
                    r0,
                    r1,
                    t0: lit(t0),
                    t1: lit(t1),
                    polarity: s.polarity,
                });
            }
        }
        out
    }

    /// Metal–electrode overlap area for each terminal, `(A₊, A₋)`.
    pub fn overlap_areas(&self) -> (T, T) {
        let mut plus = T::zero();
        let mut minus = T::zero();
        for p in self.patches() {
            match p.polarity {
                Polarity::Plus => plus = plus + p.area(),
                Polarity::Minus => minus = minus + p.area(),
            }
        }
        (plus, minus)
    }
}

// ---- layout file ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SectorFile {
    r_in_m: f64,
    r_out_m: f64,
    theta_start_rad: f64,
    theta_end_rad: f64,
    polarity: i32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskFile {
    inner_m: f64,
    outer_m: f64,
    notch_rad: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    gap_m: f64,
    mask: Option<MaskFile>,
    segment: Vec<SectorFile>,
}

/// Parses a layout file. The metal mask defaults to the coated annulus of
/// `stack`.
pub fn parse_layout<T: Real>(text: &str, origin: &str, stack: &MembraneStack<T>) -> Result<ElectrodeLayout<T>> {
    let file: LayoutFile = toml::from_str(text).map_err(|e| Error::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    let segments = file
        .segment
        .iter()
        .map(|s| {
            Ok(Sector {
                r_in: lit(s.r_in_m),
                r_out: lit(s.r_out_m),
                theta_start: lit(s.theta_start_rad),
                theta_end: lit(s.theta_end_rad),
                polarity: Polarity::from_sign(s.polarity)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mask = match file.mask {
        Some(m) => MetalMask {
            inner: lit(m.inner_m),
            outer: lit(m.outer_m),
            notch: m.notch_rad.map(|[a, b]| (lit(a), lit(b))),
        },
        None => MetalMask {
            inner: stack.coating_inner,
            outer: stack.coating_outer,
            notch: None,
        },
    };
    let layout = ElectrodeLayout {
        segments,
        gap: lit(file.gap_m),
        mask,
        radius: stack.radius,
    };
    layout.validate()?;
    Ok(layout)
}

pub fn load_layout<T: Real>(path: impl AsRef<Path>, stack: &MembraneStack<T>) -> Result<ElectrodeLayout<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_layout(&text, &path.display().to_string(), stack)
}

/// The layout a device refers to, if any.
pub fn device_layout<T: Real>(cfg: &DeviceConfig<T>) -> Result<Option<ElectrodeLayout<T>>> {
    match &cfg.electrode {
        None => Ok(None),
        Some(ElectrodeRef::Preset { name, gap }) if name == EIGHT_SEGMENT => {
            ElectrodeLayout::eight_segment(&cfg.stack, *gap).map(Some)
        }
        Some(ElectrodeRef::Preset { name, .. }) => Err(Error::validation(
            "electrode.preset",
            format!("unknown preset {name:?}; available: {EIGHT_SEGMENT}"),
        )),
        Some(ElectrodeRef::File(path)) => load_layout(path, &cfg.stack).map(Some),
    }
}

// ---- capacitance ----

/// Displacement field `δz(r, θ)` in metres.
pub type Displacement<'a, T> = &'a (dyn Fn(T, T) -> T + Sync);

/// `(C₊, C₋)` for the membrane displaced by `dz` (flat when `None`).
pub fn capacitance_pm<T: Real>(layout: &ElectrodeLayout<T>, dz: Option<Displacement<'_, T>>) -> Result<(T, T)> {
    capacitance_pm_with_tol(layout, dz, lit(CAPACITANCE_REL_TOL))
}

/// [`capacitance_pm`] with an explicit relative tolerance for the 2D quadrature.
pub fn capacitance_pm_with_tol<T: Real>(
    layout: &ElectrodeLayout<T>,
    dz: Option<Displacement<'_, T>>,
    rel_tol: T,
) -> Result<(T, T)> {
    layout.validate()?;
    let eps0 = T::epsilon0();
    let Some(dz) = dz else {
        let (ap, am) = layout.overlap_areas();
        return Ok((eps0 * ap / layout.gap, eps0 * am / layout.gap));
    };
    let patches = layout.patches();
    let threads = default_threads().max(1).min(patches.len().max(1));
    let integrate_all = |list: &[Patch<T>]| -> Result<Vec<(Polarity, T)>> {
        list.iter()
            .map(|p| Ok((p.polarity, patch_integral(p, layout.gap, dz, rel_tol)?)))
            .collect()
    };
    let results: Vec<(Polarity, T)> = if threads <= 1 {
        integrate_all(&patches)?
    } else {
        let chunk = patches.len().div_ceil(threads);
        let parts: Vec<Result<Vec<(Polarity, T)>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = patches
                .chunks(chunk)
                .map(|c| scope.spawn(move || integrate_all(c)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("capacitance worker panicked"))
                .collect()
        });
        let mut all = Vec::new();
        for p in parts {
            all.extend(p?);
        }
        all
    };
    let mut plus = T::zero();
    let mut minus = T::zero();
    for (pol, v) in results {
        match pol {
            Polarity::Plus => plus = plus + v,
            Polarity::Minus => minus = minus + v,
        }
    }
    Ok((eps0 * plus, eps0 * minus))
}

const MAX_LEVEL: u32 = 10;

/// `∬ r / (h₀ + δz) dr dθ` over one patch: midpoint rule on a doubling
/// tensor grid, Richardson-extrapolated between levels.
fn patch_integral<T: Real>(p: &Patch<T>, gap: T, dz: Displacement<'_, T>, rel_tol: T) -> Result<T> {
    let midpoint = |cells: usize| -> Result<T> {
        let dr = (p.r1 - p.r0) / count(cells);
        let dt = (p.t1 - p.t0) / count(cells);
        let half = lit::<T>(0.5);
        let mut sum = T::zero();
        for j in 0..cells {
            let theta = p.t0 + (count::<T>(j) + half) * dt;
            let mut row = T::zero();
            for i in 0..cells {
                let r = p.r0 + (count::<T>(i) + half) * dr;
                let h = gap + dz(r, theta);
                if !(h > T::zero()) {
                    return Err(Error::Contact {
                        r: to_f64(r),
                        theta: to_f64(theta),
                    });
                }
                row = row + r / h;
            }
            sum = sum + row;
        }
        Ok(sum * dr * dt)
    };
    let mut cells = 4;
    let mut coarse = midpoint(cells)?;
    let mut previous: Option<T> = None;
    let mut change = T::infinity();
    for _ in 0..MAX_LEVEL {
        cells *= 2;
        let fine = midpoint(cells)?;
        let extrapolated = (lit::<T>(4.0) * fine - coarse) / lit(3.0);
        if let Some(prev) = previous {
            change = (extrapolated - prev).abs() / extrapolated.abs();
            if change <= rel_tol {
                return Ok(extrapolated);
            }
        }
        previous = Some(extrapolated);
        coarse = fine;
    }
    Err(Error::InsufficientResolution {
        estimate: to_f64(change),
        tolerance: to_f64(rel_tol),
    })
}

/// Series combination `(1/C₊ + 1/C₋)⁻¹`.
pub fn capacitance_series<T: Real>(c_plus: T, c_minus: T) -> Result<T> {
    for c in [c_plus, c_minus] {
        if !(c > T::zero()) {
            return Err(Error::NonPositiveCapacitance(to_f64(c)));
        }
    }
    Ok(c_plus * c_minus / (c_plus + c_minus))
}

// ---- mode-weighted integrals ----

const GAUSS3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// `∫_{r0}^{r1} v(r)^power r dr` for `power` 1 or 2.
fn radial_moment<T: Real>(mode: &ModeSpec<T>, r0: T, r1: T, power: i32) -> T {
    let f = |r: T| mode.shape_at(r).powi(power) * r;
    if mode.alpha.is_some() {
        return crate::quadrature::integrate(f, r0, r1, lit(1e-13), T::zero(), 400).value;
    }
    // Piecewise-linear shape: 3-point Gauss on each grid cell is exact.
    let h = mode.grid_step();
    let last = mode.radial_shape.len() - 1;
    let first_cell = (r0 / h).floor().to_usize().unwrap_or(0).min(last.saturating_sub(1));
    let mut total = T::zero();
    let mut k = first_cell;
    while k < last {
        let a = (count::<T>(k) * h).max(r0);
        let b = (count::<T>(k + 1) * h).min(r1);
        if b > a {
            let c = (a + b) / lit(2.0);
            let w = (b - a) / lit(2.0);
            for q in 0..3 {
                total = total + lit::<T>(GAUSS3_W[q]) * w * f(c + w * lit(GAUSS3_X[q]));
            }
        }
        if count::<T>(k + 1) * h >= r1 {
            break;
        }
        k += 1;
    }
    total
}

/// `∫ cos(nθ)^power dθ` over `[t0, t1]`.
fn angular_moment<T: Real>(n: u32, t0: T, t1: T, power: i32) -> T {
    if n == 0 {
        return t1 - t0;
    }
    let nf = count::<T>(n as usize);
    match power {
        1 => ((nf * t1).sin() - (nf * t0).sin()) / nf,
        _ => {
            let two_n = nf + nf;
            (t1 - t0) / lit(2.0) + ((two_n * t1).sin() - (two_n * t0).sin()) / (lit::<T>(2.0) * two_n)
        }
    }
}

/// `(∬ζ₊ u r, ∬ζ₋ u r)` or the same with `u²`, with `u = v(r) cos(nθ)`.
fn mode_overlap<T: Real>(layout: &ElectrodeLayout<T>, mode: &ModeSpec<T>, power: i32) -> (T, T) {
    let mut plus = T::zero();
    let mut minus = T::zero();
    for p in layout.patches() {
        let v = radial_moment(mode, p.r0, p.r1, power) * angular_moment(mode.azimuthal_n, p.t0, p.t1, power);
        match p.polarity {
            Polarity::Plus => plus = plus + v,
            Polarity::Minus => minus = minus + v,
        }
    }
    (plus, minus)
}

/// Out-of-plane displacement `β·u(r, θ)` of a mode with peak amplitude `beta`.
pub fn mode_displacement<T: Real>(mode: &ModeSpec<T>, beta: T) -> impl Fn(T, T) -> T + Sync + '_ {
    let n = count::<T>(mode.azimuthal_n as usize);
    move |r, theta| beta * mode.shape_at(r) * (n * theta).cos()
}

/// `(∂C₊/∂β, ∂C₋/∂β)` at rest, `−ε₀/h₀² ∬ ζ± u r dr dθ`, for a mode shape
/// with unit peak.
pub fn dc_dbeta<T: Real>(layout: &ElectrodeLayout<T>, mode: &ModeSpec<T>) -> (T, T) {
    let (ip, im) = mode_overlap(layout, mode, 1);
    let k = -T::epsilon0() / (layout.gap * layout.gap);
    (k * ip, k * im)
}

/// `(∂²C₊/∂β², ∂²C₋/∂β²)` at rest, `2ε₀/h₀³ ∬ ζ± u² r dr dθ`.
pub fn d2c_dbeta2<T: Real>(layout: &ElectrodeLayout<T>, mode: &ModeSpec<T>) -> (T, T) {
    let (ip, im) = mode_overlap(layout, mode, 2);
    let k = lit::<T>(2.0) * T::epsilon0() / layout.gap.powi(3);
    (k * ip, k * im)
}

/// `|∬ (ζ₊ + ζ₋) u r dr dθ|` for a mode shape with unit peak.
pub fn effective_area<T: Real>(layout: &ElectrodeLayout<T>, mode: &ModeSpec<T>) -> T {
    let (ip, im) = mode_overlap(layout, mode, 1);
    (ip + im).abs()
}

/// Capacitive coupling of one mode at rest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingPoint<T> {
    pub c_plus: T,
    pub c_minus: T,
    pub c_series: T,
    /// `∂C_m/∂β` of the series capacitance, F/m.
    pub dc_dbeta: T,
    pub effective_area: T,
    /// `∂²C_m/∂β²` of the series capacitance, F/m².
    pub d2c_dx2: T,
}

/// Series capacitance and its first two derivatives along `mode`.
pub fn coupling_point<T: Real>(layout: &ElectrodeLayout<T>, mode: &ModeSpec<T>) -> Result<CouplingPoint<T>> {
    let (a, b) = capacitance_pm(layout, None)?;
    for (c, sign) in [(a, '+'), (b, '-')] {
        if c <= T::zero() {
            return Err(Error::validation(
                "electrode.segments",
                format!("series coupling needs metalized overlap on a '{sign}' segment"),
            ));
        }
    }
    let c_series = capacitance_series(a, b)?;
    let (a1, b1) = dc_dbeta(layout, mode);
    let (a2, b2) = d2c_dbeta2(layout, mode);
    let two = lit::<T>(2.0);
    let s = a + b;
    let s1 = a1 + b1;
    let s2 = a2 + b2;
    let p = a * b;
    let p1 = a1 * b + a * b1;
    let p2 = a2 * b + two * a1 * b1 + a * b2;
    let num1 = p1 * s - p * s1;
    let dc = num1 / (s * s);
    let d2c = (p2 * s - p * s2) / (s * s) - two * s1 * num1 / s.powi(3);
    Ok(CouplingPoint {
        c_plus: a,
        c_minus: b,
        c_series,
        dc_dbeta: dc,
        effective_area: effective_area(layout, mode),
        d2c_dx2: d2c,
    })
}

// ---- frequency shift ----

fn positive<T: Real>(field: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be > 0, got {v}")))
    }
}

/// Angular frequency shift `−(d²C/dx²) V² / (2 m Ω)` in rad/s.
pub fn frequency_shift_general<T: Real>(d2c_dx2: T, v_dc: T, mass: T, omega: T) -> Result<T> {
    positive("mass", mass)?;
    positive("omega", omega)?;
    Ok(T::zero() - d2c_dx2 * v_dc * v_dc / (lit::<T>(2.0) * mass * omega))
}

/// Parallel-plate shift in Hz, `−ε₀ A_eff V² / (8π² m_eff d³ f₀)`.
pub fn frequency_shift_plate<T: Real>(area: T, mass: T, gap: T, f0: T, v_dc: T) -> Result<T> {
    positive("aeff", area)?;
    positive("meff", mass)?;
    positive("d", gap)?;
    positive("f0", f0)?;
    if !v_dc.is_finite() {
        return Err(Error::NonFinite(to_f64(v_dc)));
    }
    let eight_pi2 = lit::<T>(8.0) * T::PI() * T::PI();
    Ok(T::zero() - T::epsilon0() * area * v_dc * v_dc / (eight_pi2 * mass * gap.powi(3) * f0))
}
