//! Eigenmodes of the clamped circular membrane.
//!
//! Two routes are provided: the analytic Bessel solution of the bare
//! membrane ([`uniform_modes`]) and a finite-volume discretization of the
//! radial equation
//!
//! ```text
//! N (v'' + v'/r - n² v / r²) + μ(r) ω² v = 0,   v(R) = 0
//! ```
//!
//! with tension `N = σ₀ h_base` and a step in areal density `μ(r)` where the
//! coating sits ([`loaded_modes`]). The second route reduces to a symmetric
//! tridiagonal generalized eigenproblem.

use std::io::Write;

use crate::device::{MembraneStack, SolverSettings, MIN_GRID};
use crate::eigen::GeneralizedTridiagonal;
use crate::error::{Error, Result};
use crate::output::sci;
use crate::scalar::{count, lit, Real};
use crate::special::{bessel_zero, bisect, jn_all, jn_prime};

/// Samples stored for analytic shapes when the caller does not choose.
pub const DEFAULT_SHAPE_SAMPLES: usize = 1024;

/// One eigenmode.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSpec<T> {
    /// Nodal diameters.
    pub azimuthal_n: u32,
    /// Nodal circles counted with the clamped rim, starting at 1.
    pub radial_m: u32,
    /// Bessel zero `α_{n,m}` for analytic modes.
    pub alpha: Option<T>,
    pub frequency_hz: T,
    /// Angular frequency, rad/s.
    pub omega: T,
    pub radius: T,
    /// `v(r)` on the uniform grid `r_k = k R / (len - 1)`, unit peak.
    pub radial_shape: Vec<T>,
    /// Factor taking the canonical shape (`J_n(α r/R)` for analytic modes,
    /// the mass-normalized eigenvector for discretized ones) to `radial_shape`.
    pub normalization_c: T,
}

impl<T: Real> ModeSpec<T> {
    pub fn index(&self) -> (u32, u32) {
        (self.azimuthal_n, self.radial_m)
    }

    pub fn grid_step(&self) -> T {
        self.radius / count(self.radial_shape.len() - 1)
    }

    /// Radial shape at `r`: exact for analytic modes, linearly interpolated
    /// otherwise. Zero outside `[0, R]`.
    pub fn shape_at(&self, r: T) -> T {
        if r < T::zero() || r > self.radius {
            return T::zero();
        }
        if let Some(alpha) = self.alpha {
            let x = alpha * r / self.radius;
            return self.normalization_c * jn_all(self.azimuthal_n, x)[self.azimuthal_n as usize];
        }
        let h = self.grid_step();
        let pos = r / h;
        let last = self.radial_shape.len() - 1;
        let i = pos.floor().to_usize().unwrap_or(0).min(last.saturating_sub(1));
        let t = pos - count(i);
        self.radial_shape[i] * (T::one() - t) + self.radial_shape[i + 1] * t
    }

    /// `(v, v', v'')` at `r` for analytic modes.
    pub fn analytic_derivatives(&self, r: T) -> Option<(T, T, T)> {
        let alpha = self.alpha?;
        let k = alpha / self.radius;
        let x = k * r;
        let n = self.azimuthal_n as usize;
        let j = jn_all(self.azimuthal_n + 2, x);
        let at = |i: isize| -> T {
            if i >= 0 {
                j[i as usize]
            } else if i % 2 == 0 {
                j[(-i) as usize]
            } else {
                -j[(-i) as usize]
            }
        };
        let ni = n as isize;
        let d1 = (at(ni - 1) - at(ni + 1)) / lit(2.0);
        let d2 = (at(ni - 2) - lit::<T>(2.0) * at(ni) + at(ni + 2)) / lit(4.0);
        let c = self.normalization_c;
        Some((c * j[n], c * k * d1, c * k * k * d2))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    FdLoaded,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::FdLoaded => "fd-loaded",
        }
    }
}

/// Modes sorted by frequency, ties broken by `(n, m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTable<T> {
    pub modes: Vec<ModeSpec<T>>,
    pub provenance: Provenance,
}

impl<T: Real> ModeTable<T> {
    fn new(mut modes: Vec<ModeSpec<T>>, provenance: Provenance) -> Self {
        modes.sort_by(|a, b| {
            a.frequency_hz
                .partial_cmp(&b.frequency_hz)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.index().cmp(&b.index()))
        });
        ModeTable { modes, provenance }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn get(&self, n: u32, m: u32) -> Result<&ModeSpec<T>> {
        self.modes
            .iter()
            .find(|s| s.index() == (n, m))
            .ok_or(Error::ModeNotFound { n, m })
    }

    pub fn frequency(&self, n: u32, m: u32) -> Result<T> {
        self.get(n, m).map(|s| s.frequency_hz)
    }

    /// CSV with columns `n,m,frequency_hz,provenance`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Parse {
            origin: "mode table".into(),
            message: e.to_string(),
        };
        w.write_record(["n", "m", "frequency_hz", "provenance"]).map_err(io)?;
        for s in &self.modes {
            w.write_record([
                s.azimuthal_n.to_string(),
                s.radial_m.to_string(),
                sci(s.frequency_hz),
                self.provenance.as_str().to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| io(e.into()))?;
        Ok(())
    }
}

/// Location of the first maximum of `J_n` on `(0, j_{n,1})`, i.e. its peak.
fn bessel_peak<T: Real>(n: u32, first_zero: T) -> T {
    if n == 0 {
        return T::one();
    }
    let lo = first_zero * lit(1e-3);
    let x = bisect(|x| jn_prime(n, x), lo, first_zero, jn_prime(n, lo));
    jn_all(n, x)[n as usize]
}

/// Analytic modes of the bare membrane (coating mass and stiffness ignored),
/// `n = 0..=n_max`, `m = 1..=m_max`.
pub fn uniform_modes<T: Real>(stack: &MembraneStack<T>, n_max: u32, m_max: u32) -> Result<ModeTable<T>> {
    uniform_modes_sampled(stack, n_max, m_max, DEFAULT_SHAPE_SAMPLES)
}

pub fn uniform_modes_sampled<T: Real>(
    stack: &MembraneStack<T>,
    n_max: u32,
    m_max: u32,
    samples: usize,
) -> Result<ModeTable<T>> {
    stack.validate()?;
    if samples < 2 {
        return Err(Error::validation("samples", "need at least 2 samples"));
    }
    let speed = stack.wave_speed();
    let two_pi = T::PI() + T::PI();
    let mut modes = Vec::new();
    for n in 0..=n_max {
        let c = T::one() / bessel_peak(n, bessel_zero(n, 1)?);
        for m in 1..=m_max {
            let alpha: T = bessel_zero(n, m)?;
            let radial_shape = (0..samples)
                .map(|k| {
                    let x = alpha * count(k) / count(samples - 1);
                    c * jn_all(n, x)[n as usize]
                })
                .collect();
            let frequency_hz = alpha * speed / (two_pi * stack.radius);
            modes.push(ModeSpec {
                azimuthal_n: n,
                radial_m: m,
                alpha: Some(alpha),
                frequency_hz,
                omega: two_pi * frequency_hz,
                radius: stack.radius,
                radial_shape,
                normalization_c: c,
            });
        }
    }
    Ok(ModeTable::new(modes, Provenance::Analytic))
}

/// ∫ μ(r) r dr over `[a, b]`, exact for the piecewise-constant density.
fn mass_moment<T: Real>(stack: &MembraneStack<T>, a: T, b: T) -> T {
    let half = lit::<T>(0.5);
    let a = a.max(T::zero());
    let b = b.min(stack.radius);
    if b <= a {
        return T::zero();
    }
    let mut m = stack.base.areal_density() * half * (b * b - a * a);
    let lo = a.max(stack.coating_inner);
    let hi = b.min(stack.coating_outer);
    if hi > lo {
        m = m + stack.coating.areal_density() * half * (hi * hi - lo * lo);
    }
    m
}

/// Finite-volume system for azimuthal order `n` on `grid_n` cells.
/// Unknowns are `v_0..v_{N-1}` for `n = 0` and `v_1..v_{N-1}` otherwise.
fn assemble<T: Real>(stack: &MembraneStack<T>, n: u32, grid_n: usize) -> (GeneralizedTridiagonal<T>, usize) {
    let h = stack.radius / count(grid_n);
    let half = lit::<T>(0.5);
    let tension = stack.tension();
    let n2 = count::<T>((n * n) as usize);
    let first = if n == 0 { 0 } else { 1 };
    let mut diag = Vec::with_capacity(grid_n);
    let mut off = Vec::with_capacity(grid_n);
    let mut mass = Vec::with_capacity(grid_n);
    for i in first..grid_n {
        let r = count::<T>(i) * h;
        let r_out = r + half * h;
        let r_in = (r - half * h).max(T::zero());
        let mut d = tension * (r_out + r_in) / h;
        if i > 0 {
            d = d + tension * n2 * h / r;
        }
        diag.push(d);
        if i + 1 < grid_n {
            off.push(-tension * r_out / h);
        }
        mass.push(mass_moment(stack, r_in, r_out));
    }
    (GeneralizedTridiagonal::new(diag, off, mass), first)
}

fn check_grid(grid_n: usize) -> Result<()> {
    if grid_n < MIN_GRID {
        return Err(Error::validation(
            "grid_n",
            format!("must be >= {MIN_GRID}, got {grid_n}"),
        ));
    }
    Ok(())
}

/// The lowest `count` discretized frequencies (Hz) of azimuthal order `n`.
pub fn loaded_frequencies<T: Real>(stack: &MembraneStack<T>, n: u32, count_m: usize, grid_n: usize) -> Result<Vec<T>> {
    check_grid(grid_n)?;
    let (problem, _) = assemble(stack, n, grid_n);
    let two_pi = T::PI() + T::PI();
    Ok(problem
        .lowest_eigenvalues(count_m)
        .into_iter()
        .map(|l| l.max(T::zero()).sqrt() / two_pi)
        .collect())
}

fn loaded_branch<T: Real>(stack: &MembraneStack<T>, n: u32, m_max: u32, grid_n: usize) -> Result<Vec<ModeSpec<T>>> {
    let (problem, first) = assemble(stack, n, grid_n);
    let pairs = problem
        .lowest_eigenpairs(m_max as usize)
        .map_err(|i| Error::NonConvergence {
            n,
            m: i as u32 + 1,
            grid_n,
        })?;
    let two_pi = T::PI() + T::PI();
    let mut out = Vec::with_capacity(pairs.len());
    for (k, (lambda, v)) in pairs.into_iter().enumerate() {
        let mut shape = vec![T::zero(); grid_n + 1];
        for (j, val) in v.into_iter().enumerate() {
            shape[first + j] = val;
        }
        let peak = shape
            .iter()
            .copied()
            .fold(T::zero(), |p, x| if x.abs() > p.abs() { x } else { p });
        if peak == T::zero() || !peak.is_finite() {
            return Err(Error::NonConvergence {
                n,
                m: k as u32 + 1,
                grid_n,
            });
        }
        let c = peak.recip();
        for s in shape.iter_mut() {
            *s = *s * c;
        }
        let omega = lambda.max(T::zero()).sqrt();
        out.push(ModeSpec {
            azimuthal_n: n,
            radial_m: k as u32 + 1,
            alpha: None,
            frequency_hz: omega / two_pi,
            omega,
            radius: stack.radius,
            radial_shape: shape,
            normalization_c: c,
        });
    }
    Ok(out)
}

/// Worker count for internal fan-out: `MEMTRANS_THREADS` if set, otherwise
/// the available parallelism.
pub fn default_threads() -> usize {
    std::env::var("MEMTRANS_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Discretized modes of the coated membrane.
pub fn loaded_modes<T: Real>(stack: &MembraneStack<T>, n_max: u32, m_max: u32, grid_n: usize) -> Result<ModeTable<T>> {
    loaded_modes_threaded(stack, n_max, m_max, grid_n, default_threads())
}

/// [`loaded_modes`] with at most `threads` workers solving azimuthal orders
/// concurrently.
pub fn loaded_modes_threaded<T: Real>(
    stack: &MembraneStack<T>,
    n_max: u32,
    m_max: u32,
    grid_n: usize,
    threads: usize,
) -> Result<ModeTable<T>> {
    stack.validate()?;
    check_grid(grid_n)?;
    if (m_max as usize) >= grid_n {
        return Err(Error::validation("m_max", "must be below the number of grid cells"));
    }
    let orders: Vec<u32> = (0..=n_max).collect();
    let threads = threads.max(1).min(orders.len());
    let branches: Vec<Result<Vec<ModeSpec<T>>>> = if threads == 1 {
        orders.iter().map(|&n| loaded_branch(stack, n, m_max, grid_n)).collect()
    } else {
        let chunk = orders.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = orders
                .chunks(chunk)
                .map(|ns| {
                    scope.spawn(move || {
                        ns.iter()
                            .map(|&n| loaded_branch(stack, n, m_max, grid_n))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("mode solver thread panicked"))
                .collect()
        })
    };
    let mut modes = Vec::new();
    for b in branches {
        modes.extend(b?);
    }
    Ok(ModeTable::new(modes, Provenance::FdLoaded))
}

/// Coating density that places mode `target_mode` of the loaded membrane at
/// `target_hz`. Frequency falls monotonically with added mass, so the root
/// is unique.
pub fn calibrate_coating_density<T: Real>(
    stack: &MembraneStack<T>,
    target_mode: (u32, u32),
    target_hz: T,
    settings: &SolverSettings<T>,
) -> Result<T> {
    stack.validate()?;
    settings.validate()?;
    let (n, m) = target_mode;
    if m == 0 {
        return Err(Error::validation("target_mode", "radial index starts at 1"));
    }
    let idx = m as usize - 1;
    let freq = |rho: T| -> Result<T> {
        let f = loaded_frequencies(&stack.with_coating_density(rho), n, m as usize, settings.grid_n)?;
        Ok(f[idx])
    };
    let tol = settings.rel_tol;
    let unloaded = freq(T::zero())?;
    let analytic = uniform_modes_sampled(stack, n, m, 2)?.frequency(n, m)?;
    let ceiling = unloaded.max(analytic) * (T::one() + tol);
    if target_hz > ceiling {
        return Err(Error::TargetAboveUnloaded {
            target_hz: crate::scalar::to_f64(target_hz),
            unloaded_hz: crate::scalar::to_f64(unloaded.max(analytic)),
        });
    }
    if target_hz >= unloaded * (T::one() - tol) || stack.coating_outer <= stack.coating_inner {
        return Ok(T::zero());
    }
    let mut lo = T::zero();
    let mut hi = lit::<T>(12000.0);
    let cap = lit::<T>(1e9);
    while freq(hi)? > target_hz {
        lo = hi;
        hi = hi * lit(2.0);
        if hi > cap {
            return Err(Error::CalibrationBracket {
                target_hz: crate::scalar::to_f64(target_hz),
                max_density: crate::scalar::to_f64(cap),
            });
        }
    }
    let two = lit::<T>(2.0);
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        let f = freq(mid)?;
        if ((f - target_hz) / target_hz).abs() <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if f > target_hz {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / two)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::default_device;

    fn stack() -> MembraneStack<f64> {
        default_device::<f64>().stack
    }

    fn bare(s: &MembraneStack<f64>) -> MembraneStack<f64> {
        s.with_coating_inner(s.radius)
    }

    #[test]
    fn fundamental_of_bare_membrane() {
        let t = uniform_modes(&stack(), 2, 3).unwrap();
        let f = t.frequency(0, 1).unwrap();
        // α₀₁ sqrt(σ₀/ρ) / 2πR with 1 GPa, 2700 kg/m³, 740 µm
        let expect = 2.404825557695773 * (1e9_f64 / 2700.0).sqrt() / (2.0 * std::f64::consts::PI * 740e-6);
        assert!((f - expect).abs() < 1e-9 * expect);
        assert!((f - 314.8e3).abs() < 0.05e3);
    }

    #[test]
    fn frequency_ratio_is_ratio_of_zeros() {
        let t = uniform_modes(&stack(), 0, 2).unwrap();
        let r = t.frequency(0, 2).unwrap() / t.frequency(0, 1).unwrap();
        assert!((r - 5.5200781102863106 / 2.4048255576957728).abs() < 1e-12);
        assert!((r - 2.2954).abs() < 1e-4);
    }

    #[test]
    fn frequencies_scale_with_root_of_stress() {
        let s = stack();
        let a = uniform_modes(&s, 2, 3).unwrap();
        let b = uniform_modes(&s.with_prestress(2e9), 2, 3).unwrap();
        for (x, y) in a.modes.iter().zip(&b.modes) {
            assert!((y.frequency_hz / x.frequency_hz - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_shapes_are_clamped_with_unit_peak() {
        let t = uniform_modes(&stack(), 3, 3).unwrap();
        for s in &t.modes {
            assert!(s.radial_shape.last().unwrap().abs() < 1e-12);
            if s.azimuthal_n >= 1 {
                assert_eq!(s.radial_shape[0], 0.0);
            }
            let peak = s.radial_shape.iter().fold(0.0_f64, |p, v| p.max(v.abs()));
            assert!(
                (peak - 1.0).abs() < 1e-4,
                "({},{}) peak {peak}",
                s.azimuthal_n,
                s.radial_m
            );
        }
    }

    #[test]
    fn table_is_sorted_without_duplicates() {
        let t = loaded_modes(&stack(), 3, 4, 200).unwrap();
        for w in t.modes.windows(2) {
            assert!(w[0].frequency_hz <= w[1].frequency_hz);
            assert_ne!(w[0].index(), w[1].index());
        }
        for n in 0..=3 {
            for m in 1..4 {
                assert!(t.frequency(n, m).unwrap() < t.frequency(n, m + 1).unwrap());
            }
        }
    }

    #[test]
    fn bare_membrane_matches_analytic() {
        let s = bare(&stack());
        let fd = loaded_modes(&s, 3, 4, 2000).unwrap();
        let an = uniform_modes(&s, 3, 4).unwrap();
        for a in &an.modes {
            let f = fd.frequency(a.azimuthal_n, a.radial_m).unwrap();
            assert!((f / a.frequency_hz - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn discretized_shapes_respect_boundary_conditions() {
        let t = loaded_modes(&stack(), 2, 3, 400).unwrap();
        for s in &t.modes {
            assert_eq!(*s.radial_shape.last().unwrap(), 0.0);
            if s.azimuthal_n >= 1 {
                assert_eq!(s.radial_shape[0], 0.0);
            }
            assert!(s.radial_shape.iter().fold(0.0_f64, |p, v| p.max(v.abs())) == 1.0);
        }
    }

    #[test]
    fn mass_loading_lowers_every_frequency() {
        let s = stack();
        let bare_t = loaded_modes(&bare(&s), 2, 3, 400).unwrap();
        let coated = loaded_modes(&s, 2, 3, 400).unwrap();
        for a in &bare_t.modes {
            assert!(coated.frequency(a.azimuthal_n, a.radial_m).unwrap() < a.frequency_hz);
        }
    }

    #[test]
    fn small_grid_rejected() {
        assert!(matches!(loaded_modes(&stack(), 1, 1, 8), Err(Error::Validation { .. })));
    }

    #[test]
    fn calibration_edge_cases() {
        let s = stack();
        let settings = SolverSettings {
            grid_n: 400,
            rel_tol: 1e-10,
        };
        let f_uniform = uniform_modes(&s, 0, 1).unwrap().frequency(0, 1).unwrap();
        assert_eq!(
            calibrate_coating_density(&s, (0, 1), f_uniform, &settings).unwrap(),
            0.0
        );
        assert!(matches!(
            calibrate_coating_density(&s, (0, 1), 1.1 * f_uniform, &settings),
            Err(Error::TargetAboveUnloaded { .. })
        ));
    }

    #[test]
    fn threaded_and_serial_agree() {
        let s = stack();
        let a = loaded_modes_threaded(&s, 3, 3, 300, 1).unwrap();
        let b = loaded_modes_threaded(&s, 3, 3, 300, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_precision_uniform_modes() {
        let s = default_device::<f32>().stack;
        let t = uniform_modes(&s, 1, 2).unwrap();
        let f = t.frequency(0, 1).unwrap();
        assert!((f - 314_767.6).abs() < 5.0);
    }

    #[test]
    fn csv_layout() {
        let t = uniform_modes(&stack(), 0, 1).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(
            text.starts_with("n,m,frequency_hz,provenance\n0,1,3.14767662e5,analytic\n"),
            "{text}"
        );
    }
}
