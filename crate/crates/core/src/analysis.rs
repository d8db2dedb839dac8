//! Fits of characterization data: ring-down decay time, electrode gap from
//! the DC-bias frequency pull, spectral peaks and their mode labels.

use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::modes::ModeTable;
use crate::output::sci;
use crate::scalar::{count, lit, to_f64, Real};

// ---- ring-down ----

/// Decay record of one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct RingdownRecord<T> {
    /// `(t [s], amplitude)` pairs.
    pub samples: Vec<(T, T)>,
    pub mode_freq_hz: T,
}

pub const MIN_RINGDOWN_SAMPLES: usize = 10;

impl<T: Real> RingdownRecord<T> {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < MIN_RINGDOWN_SAMPLES {
            return Err(Error::validation(
                "ringdown.samples",
                format!("need at least {MIN_RINGDOWN_SAMPLES}, got {}", self.samples.len()),
            ));
        }
        for (i, w) in self.samples.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::validation(
                    "ringdown.t_s",
                    format!("time must increase strictly (row {})", i + 1),
                ));
            }
        }
        for (i, &(t, a)) in self.samples.iter().enumerate() {
            if !t.is_finite() || !a.is_finite() {
                return Err(Error::validation("ringdown", format!("non-finite value in row {i}")));
            }
            if !(a > T::zero()) {
                return Err(Error::validation(
                    "ringdown.amplitude",
                    format!("must be > 0, got {a} in row {i}"),
                ));
            }
        }
        if !(self.mode_freq_hz >= T::zero()) {
            return Err(Error::validation("ringdown.mode_freq_hz", "must be >= 0"));
        }
        Ok(())
    }
}

/// What the recorded quantity is proportional to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AmplitudeUnits {
    /// Oscillation amplitude.
    #[default]
    Linear,
    /// Squared amplitude; it decays twice as fast.
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingdownFit<T> {
    /// Amplitude decay time, s.
    pub tau: T,
    /// Standard error of `tau`.
    pub tau_err: T,
    /// Fitted value at `t = 0`, in the record's units.
    pub initial: T,
}

/// Weighted straight-line fit `y = a + b x` with weights `w`.
/// Returns `(a, b, se_b)`.
fn weighted_line<T: Real>(x: &[T], y: &[T], w: &[T]) -> (T, T, T) {
    let sw = w.iter().fold(T::zero(), |s, v| s + *v);
    let xm = x.iter().zip(w).fold(T::zero(), |s, (a, b)| s + *a * *b) / sw;
    let ym = y.iter().zip(w).fold(T::zero(), |s, (a, b)| s + *a * *b) / sw;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for i in 0..x.len() {
        let dx = x[i] - xm;
        sxx = sxx + w[i] * dx * dx;
        sxy = sxy + w[i] * dx * (y[i] - ym);
    }
    let b = sxy / sxx;
    let a = ym - b * xm;
    let n = x.len();
    let rss = (0..n).fold(T::zero(), |s, i| {
        let r = y[i] - a - b * x[i];
        s + w[i] * r * r
    });
    let se = (rss / count::<T>(n - 2) / sxx).sqrt();
    (a, b, se)
}

/// Fits `A(t) = A₀ exp(−t/τ)` by weighted linear regression of `ln A` on
/// `t`, weights `∝ A²`.
pub fn fit_ringdown<T: Real>(record: &RingdownRecord<T>, units: AmplitudeUnits) -> Result<RingdownFit<T>> {
    record.validate()?;
    let peak = record.samples.iter().fold(T::zero(), |m, s| m.max(s.1));
    let t: Vec<T> = record.samples.iter().map(|s| s.0).collect();
    let y: Vec<T> = record.samples.iter().map(|s| s.1.ln()).collect();
    let w: Vec<T> = record.samples.iter().map(|s| (s.1 / peak).powi(2)).collect();
    let (a, b, se_b) = weighted_line(&t, &y, &w);
    if !(b < T::zero()) || !b.is_finite() {
        return Err(Error::Fit(format!(
            "record does not decay (log slope {b}); decay time is unbounded"
        )));
    }
    let scale = match units {
        AmplitudeUnits::Linear => T::one(),
        AmplitudeUnits::Power => lit(2.0),
    };
    let tau = -scale / b;
    Ok(RingdownFit {
        tau,
        tau_err: scale * se_b / (b * b),
        initial: a.exp(),
    })
}

/// Quality factor of an amplitude ring-down, `Q = π f τ`.
pub fn q_from_tau<T: Real>(tau: T, freq_hz: T) -> Result<T> {
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(Error::validation("tau", format!("must be > 0, got {tau}")));
    }
    if !(freq_hz > T::zero()) || !freq_hz.is_finite() {
        return Err(Error::validation("frequency", format!("must be > 0, got {freq_hz}")));
    }
    Ok(T::PI() * freq_hz * tau)
}

// ---- gap from frequency shift ----

/// Frequency pull of one mode versus DC bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftDataset<T> {
    /// `(V_dc [V], Δf [Hz])` pairs.
    pub points: Vec<(T, T)>,
    /// Effective area, m².
    pub area: T,
    /// Effective mass, kg.
    pub mass: T,
    /// Unbiased frequency, Hz.
    pub f0: T,
}

impl<T: Real> ShiftDataset<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("aeff", self.area), ("meff", self.mass), ("f0", self.f0)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::validation(name, format!("must be > 0, got {v}")));
            }
        }
        if self.points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::validation("shift", "non-finite value"));
        }
        let mut volts: Vec<f64> = self.points.iter().map(|p| to_f64(p.0)).collect();
        volts.sort_by(f64::total_cmp);
        volts.dedup();
        if volts.len() < 3 {
            return Err(Error::validation(
                "shift.v_dc",
                format!("need at least 3 distinct voltages, got {}", volts.len()),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapFit<T> {
    /// Electrode–membrane distance, m.
    pub gap: T,
    pub gap_err: T,
    /// `Δf / V²`, Hz/V².
    pub slope: T,
    pub slope_err: T,
}

/// Least-squares slope of `Δf` against `V²` through the origin, inverted
/// through the parallel-plate law for the gap.
pub fn fit_gap<T: Real>(data: &ShiftDataset<T>) -> Result<GapFit<T>> {
    data.validate()?;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for &(v, df) in &data.points {
        let x = v * v;
        sxx = sxx + x * x;
        sxy = sxy + x * df;
    }
    let slope = sxy / sxx;
    if !(slope < T::zero()) {
        return Err(Error::Fit(format!(
            "frequency does not fall with bias (slope {slope} Hz/V^2)"
        )));
    }
    let n = data.points.len();
    let rss = data.points.iter().fold(T::zero(), |s, &(v, df)| {
        let r = df - slope * v * v;
        s + r * r
    });
    let slope_err = (rss / count::<T>(n - 1) / sxx).sqrt();
    let eight_pi2 = lit::<T>(8.0) * T::PI() * T::PI();
    let gap = (-T::epsilon0() * data.area / (eight_pi2 * data.mass * data.f0 * slope)).cbrt();
    Ok(GapFit {
        gap,
        gap_err: gap / lit(3.0) * slope_err / slope.abs(),
        slope,
        slope_err,
    })
}

// ---- peaks ----

/// Default detection threshold above the noise floor.
pub const DEFAULT_THRESHOLD_DB: f64 = 6.0;
/// Minimum dip between two neighbouring peaks for both to be kept.
pub const MIN_DIP_DB: f64 = 3.0;

fn db_ratio<T: Real>(db: T) -> T {
    lit::<T>(10.0).powf(db / lit(10.0))
}

/// Median of the spectrum values, a robust noise-floor estimate.
pub fn median_floor<T: Real>(spectrum: &[(T, T)]) -> Result<T> {
    if spectrum.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let mut v: Vec<T> = spectrum.iter().map(|s| s.1).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let k = v.len() / 2;
    Ok(if v.len() % 2 == 1 {
        v[k]
    } else {
        (v[k - 1] + v[k]) / lit(2.0)
    })
}

/// Vertex abscissa of the parabola through three points.
fn parabola_vertex<T: Real>(x: [T; 3], y: [T; 3]) -> T {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curvature = (d2 - d1) / (x[2] - x[0]);
    if !(curvature < T::zero()) {
        return x[1];
    }
    let v = (x[0] + x[1]) / lit(2.0) - d1 / (lit::<T>(2.0) * curvature);
    v.max(x[0]).min(x[2])
}

/// Local maxima of a power spectrum standing `threshold_db` above
/// `noise_floor` (the median when `None`), refined by a parabola through
/// the log-power of the maximum and its neighbours. Maxima not separated by
/// a dip of at least [`MIN_DIP_DB`] are merged into the higher one.
pub fn detect_peaks<T: Real>(spectrum: &[(T, T)], noise_floor: Option<T>, threshold_db: T) -> Result<Vec<T>> {
    if spectrum.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    for (i, w) in spectrum.windows(2).enumerate() {
        if !(w[1].0 > w[0].0) {
            return Err(Error::validation(
                "spectrum.f_hz",
                format!("frequencies must increase strictly (row {})", i + 1),
            ));
        }
    }
    if spectrum.iter().any(|s| !(s.1 > T::zero()) || !s.1.is_finite()) {
        return Err(Error::validation("spectrum.vsn", "values must be positive and finite"));
    }
    let floor = match noise_floor {
        Some(f) if f > T::zero() => f,
        Some(f) => return Err(Error::validation("noise_floor", format!("must be > 0, got {f}"))),
        None => median_floor(spectrum)?,
    };
    let level = floor * db_ratio(threshold_db);
    let p = |i: usize| spectrum[i].1;
    let mut candidates: Vec<usize> = (1..spectrum.len().saturating_sub(1))
        .filter(|&i| p(i) > p(i - 1) && p(i) >= p(i + 1) && p(i) > level)
        .collect();
    let dip = db_ratio::<T>(lit(MIN_DIP_DB)).recip();
    let mut merged = true;
    while merged {
        merged = false;
        for k in 1..candidates.len() {
            let (a, b) = (candidates[k - 1], candidates[k]);
            let valley = (a..=b).map(p).fold(T::infinity(), T::min);
            if valley > p(a).min(p(b)) * dip {
                let drop = if p(a) >= p(b) { k } else { k - 1 };
                candidates.remove(drop);
                merged = true;
                break;
            }
        }
    }
    Ok(candidates
        .into_iter()
        .map(|i| {
            parabola_vertex(
                [spectrum[i - 1].0, spectrum[i].0, spectrum[i + 1].0],
                [p(i - 1).ln(), p(i).ln(), p(i + 1).ln()],
            )
        })
        .collect())
}

// ---- mode identification ----

/// One row of a measured-versus-predicted table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakAssignment<T> {
    pub measured_hz: T,
    pub predicted_hz: T,
    pub mode: (u32, u32),
    /// `100 |predicted − measured| / measured`.
    pub rel_error_percent: T,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MatchStrategy {
    /// Most peaks matched, then least total squared relative error.
    #[default]
    Optimal,
    /// Peaks in ascending frequency each take the nearest free mode.
    Greedy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Identification<T> {
    /// Sorted by measured frequency.
    pub assignments: Vec<PeakAssignment<T>>,
    /// Peaks with no mode within the tolerance.
    pub unassigned: Vec<T>,
}

pub fn relative_error_percent<T: Real>(predicted: T, measured: T) -> T {
    lit::<T>(100.0) * (predicted - measured).abs() / measured
}

/// Labels measured peaks with predicted modes, one-to-one, rejecting pairs
/// whose relative error exceeds `max_rel_err_percent`.
pub fn identify_modes<T: Real>(
    peaks: &[T],
    predicted: &ModeTable<T>,
    max_rel_err_percent: T,
    strategy: MatchStrategy,
) -> Result<Identification<T>> {
    if predicted.is_empty() {
        return Err(Error::validation("predicted", "mode table is empty"));
    }
    if peaks.iter().any(|p| !(*p > T::zero()) || !p.is_finite()) {
        return Err(Error::validation("peaks", "frequencies must be positive and finite"));
    }
    if !(max_rel_err_percent >= T::zero()) {
        return Err(Error::validation("max_rel_err", "must be >= 0"));
    }
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| peaks[a].partial_cmp(&peaks[b]).unwrap_or(std::cmp::Ordering::Equal));
    let err = |i: usize, j: usize| relative_error_percent(predicted.modes[j].frequency_hz, peaks[i]);
    let choice: Vec<Option<usize>> = match strategy {
        MatchStrategy::Greedy => {
            let mut taken = vec![false; predicted.len()];
            let mut out = vec![None; peaks.len()];
            for &i in &order {
                let best = (0..predicted.len())
                    .filter(|&j| !taken[j] && err(i, j) <= max_rel_err_percent)
                    .min_by(|&a, &b| err(i, a).partial_cmp(&err(i, b)).unwrap_or(std::cmp::Ordering::Equal));
                if let Some(j) = best {
                    taken[j] = true;
                    out[i] = Some(j);
                }
            }
            out
        }
        MatchStrategy::Optimal => {
            let limit = to_f64(max_rel_err_percent) / 100.0;
            let k = peaks.len();
            let allowed_max = limit * limit;
            let skip = 2.0 * (k as f64 + 1.0) * allowed_max + 1.0;
            let forbidden = 4.0 * skip;
            let cols = predicted.len() + k;
            let cost: Vec<Vec<f64>> = (0..k)
                .map(|i| {
                    (0..cols)
                        .map(|j| {
                            if j >= predicted.len() {
                                return skip;
                            }
                            let e = to_f64(err(i, j));
                            if e <= to_f64(max_rel_err_percent) {
                                (e / 100.0).powi(2)
                            } else {
                                forbidden
                            }
                        })
                        .collect()
                })
                .collect();
            hungarian(&cost)
                .into_iter()
                .map(|j| if j < predicted.len() { Some(j) } else { None })
                .collect()
        }
    };
    let mut assignments = Vec::new();
    let mut unassigned = Vec::new();
    for &i in &order {
        match choice[i] {
            Some(j) => {
                let mode = &predicted.modes[j];
                assignments.push(PeakAssignment {
                    measured_hz: peaks[i],
                    predicted_hz: mode.frequency_hz,
                    mode: mode.index(),
                    rel_error_percent: err(i, j),
                });
            }
            None => unassigned.push(peaks[i]),
        }
    }
    Ok(Identification {
        assignments,
        unassigned,
    })
}

/// Minimum-cost assignment of every row to a distinct column
/// (`rows ≤ cols`), by the shortest augmenting path method with potentials.
/// Returns the column of each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "more rows than columns");
    let inf = f64::INFINITY;
    // 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if row_of[j] > 0 {
            out[row_of[j] - 1] = j - 1;
        }
    }
    out
}

// ---- CSV ----

fn csv_error(origin: &str, e: csv::Error) -> Error {
    Error::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    }
}

fn read_pairs<R: Read, Row, T: Real>(reader: R, origin: &str, split: fn(Row) -> (f64, f64)) -> Result<Vec<(T, T)>>
where
    Row: for<'de> Deserialize<'de>,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let (a, b) = split(row.map_err(|e| csv_error(origin, e))?);
        out.push((lit(a), lit(b)));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct RingdownRow {
    t_s: f64,
    amplitude: f64,
}

#[derive(Deserialize)]
struct ShiftRow {
    v_dc: f64,
    delta_f_hz: f64,
}

#[derive(Deserialize)]
struct PeakRow {
    f_hz: f64,
}

#[derive(Deserialize)]
struct SpectrumRow {
    f_hz: f64,
    vsn: f64,
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `t_s,amplitude` rows.
pub fn read_ringdown_csv<T: Real, R: Read>(reader: R, origin: &str) -> Result<Vec<(T, T)>> {
    read_pairs(reader, origin, |r: RingdownRow| (r.t_s, r.amplitude))
}

/// Reads `v_dc,delta_f_hz` rows.
pub fn read_shift_csv<T: Real, R: Read>(reader: R, origin: &str) -> Result<Vec<(T, T)>> {
    read_pairs(reader, origin, |r: ShiftRow| (r.v_dc, r.delta_f_hz))
}

/// Reads `f_hz,vsn` rows.
pub fn read_spectrum_csv<T: Real, R: Read>(reader: R, origin: &str) -> Result<Vec<(T, T)>> {
    read_pairs(reader, origin, |r: SpectrumRow| (r.f_hz, r.vsn))
}

/// Reads a single `f_hz` column of peak frequencies.
pub fn read_peaks_csv<T: Real, R: Read>(reader: R, origin: &str) -> Result<Vec<T>> {
    let rows: Vec<(T, T)> = read_pairs(reader, origin, |r: PeakRow| (r.f_hz, 0.0))?;
    Ok(rows.into_iter().map(|r| r.0).collect())
}

pub fn load_peaks_csv<T: Real>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    read_peaks_csv(open(path)?, &path.display().to_string())
}

pub fn load_ringdown_csv<T: Real>(path: impl AsRef<Path>) -> Result<Vec<(T, T)>> {
    let path = path.as_ref();
    read_ringdown_csv(open(path)?, &path.display().to_string())
}

pub fn load_shift_csv<T: Real>(path: impl AsRef<Path>) -> Result<Vec<(T, T)>> {
    let path = path.as_ref();
    read_shift_csv(open(path)?, &path.display().to_string())
}

pub fn load_spectrum_csv<T: Real>(path: impl AsRef<Path>) -> Result<Vec<(T, T)>> {
    let path = path.as_ref();
    read_spectrum_csv(open(path)?, &path.display().to_string())
}

/// Assignment table with columns `n,m,predicted_hz,measured_hz,rel_error_percent`;
/// unassigned peaks follow with empty mode and prediction fields.
pub fn write_assignments_csv<T: Real, W: Write>(id: &Identification<T>, out: W) -> Result<()> {
    let origin = "assignment table";
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "m", "predicted_hz", "measured_hz", "rel_error_percent"])
        .map_err(|e| csv_error(origin, e))?;
    for a in &id.assignments {
        w.write_record([
            a.mode.0.to_string(),
            a.mode.1.to_string(),
            sci(a.predicted_hz),
            sci(a.measured_hz),
            sci(a.rel_error_percent),
        ])
        .map_err(|e| csv_error(origin, e))?;
    }
    for &p in &id.unassigned {
        w.write_record(["", "", "", &sci(p), ""])
            .map_err(|e| csv_error(origin, e))?;
    }
    w.flush().map_err(|e| csv_error(origin, e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::default_device;
    use crate::electromech::frequency_shift_plate;
    use crate::modes::uniform_modes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const TAU0: f64 = 4.668;
    const F01: f64 = 258786.0;

    fn decay(tau: f64, n: usize, span: f64, noise: f64, rng: &mut ChaCha8Rng) -> RingdownRecord<f64> {
        let normal = Normal::new(0.0, noise).unwrap();
        let samples = (0..n)
            .map(|i| {
                let t = span * i as f64 / (n - 1) as f64;
                let e = if noise > 0.0 { normal.sample(rng) } else { 0.0 };
                (t, 2.5 * (-t / tau).exp() * (1.0 + e))
            })
            .collect();
        RingdownRecord {
            samples,
            mode_freq_hz: F01,
        }
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rec = decay(TAU0, 200, 15.0, 0.0, &mut rng);
        let fit = fit_ringdown(&rec, AmplitudeUnits::Linear).unwrap();
        assert!((fit.tau - TAU0).abs() < 1e-10 * TAU0);
        assert!((fit.initial - 2.5).abs() < 1e-10);
        assert!(fit.tau_err < 1e-9);
    }

    #[test]
    fn power_units_double_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut rec = decay(TAU0, 200, 15.0, 0.0, &mut rng);
        for s in rec.samples.iter_mut() {
            s.1 = s.1 * s.1;
        }
        let fit = fit_ringdown(&rec, AmplitudeUnits::Power).unwrap();
        assert!((fit.tau - TAU0).abs() < 1e-10 * TAU0);
        let raw = fit_ringdown(&rec, AmplitudeUnits::Linear).unwrap();
        assert!((fit.tau / raw.tau - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_decays_stay_within_one_percent() {
        let mut hits = 0;
        let mut mean = 0.0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rec = decay(TAU0, 500, 15.0, 0.01, &mut rng);
            let tau = fit_ringdown(&rec, AmplitudeUnits::Linear).unwrap().tau;
            mean += tau / 100.0;
            if (tau - TAU0).abs() < 0.01 * TAU0 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "{hits}/100");
        assert!((mean - TAU0).abs() < 0.003 * TAU0, "mean {mean}");
    }

    #[test]
    fn standard_error_tracks_scatter() {
        let fits: Vec<RingdownFit<f64>> = (0..200)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                fit_ringdown(&decay(TAU0, 500, 15.0, 0.01, &mut rng), AmplitudeUnits::Linear).unwrap()
            })
            .collect();
        let mean = fits.iter().map(|f| f.tau).sum::<f64>() / fits.len() as f64;
        let sd = (fits.iter().map(|f| (f.tau - mean).powi(2)).sum::<f64>() / (fits.len() - 1) as f64).sqrt();
        let se = fits.iter().map(|f| f.tau_err).sum::<f64>() / fits.len() as f64;
        assert!((se / sd - 1.0).abs() < 0.25, "se {se} vs scatter {sd}");
    }

    #[test]
    fn ringdown_rejects_bad_records() {
        let flat = RingdownRecord {
            samples: (0..20).map(|i| (i as f64, 1.0)).collect(),
            mode_freq_hz: F01,
        };
        assert!(matches!(
            fit_ringdown(&flat, AmplitudeUnits::Linear),
            Err(Error::Fit(_))
        ));
        let short = RingdownRecord {
            samples: (0..5).map(|i| (i as f64, 1.0)).collect(),
            mode_freq_hz: F01,
        };
        assert!(fit_ringdown(&short, AmplitudeUnits::Linear).is_err());
        let mut neg = flat.clone();
        neg.samples[3].1 = 0.0;
        assert!(fit_ringdown(&neg, AmplitudeUnits::Linear).is_err());
        let mut unsorted = flat.clone();
        unsorted.samples[3].0 = 1.0;
        assert!(fit_ringdown(&unsorted, AmplitudeUnits::Linear).is_err());
    }

    #[test]
    fn q_from_tau_values() {
        let q: f64 = q_from_tau(4.668, 258786.0).unwrap();
        assert!((q - 3.795084917e6).abs() < 1.0);
        let q30: f64 = q_from_tau(2.476, 258786.0).unwrap();
        assert!((q30 - 2.012988486e6).abs() < 1.0);
        let half: f64 = q_from_tau(4.668 / 2.0, 2.0 * 258786.0).unwrap();
        assert!((half - q).abs() < 1e-9 * q);
        assert!(q_from_tau(0.0, 1.0).is_err());
        assert!(q_from_tau(1.0, -1.0).is_err());
    }

    fn shift_data(d: f64, noise: f64, rng: &mut ChaCha8Rng) -> ShiftDataset<f64> {
        let (a, m, f0) = (0.075e-6, 420e-12, 399587.0);
        let normal = Normal::new(0.0, noise).unwrap();
        let points = (0..=8)
            .map(|k| {
                let v = 5.0 * k as f64;
                let df = frequency_shift_plate(a, m, d, f0, v).unwrap();
                let e = if noise > 0.0 { normal.sample(rng) } else { 0.0 };
                (v, df * (1.0 + e))
            })
            .collect();
        ShiftDataset {
            points,
            area: a,
            mass: m,
            f0,
        }
    }

    #[test]
    fn gap_noiseless_inversion() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = fit_gap(&shift_data(5.12e-6, 0.0, &mut rng)).unwrap();
        assert!((fit.gap / 5.12e-6 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gap_noisy_round_trip() {
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fit = fit_gap(&shift_data(5.12e-6, 0.02, &mut rng)).unwrap();
            if (fit.gap / 5.12e-6 - 1.0).abs() < 0.03 {
                hits += 1;
            }
            assert!(fit.gap_err > 0.0);
        }
        assert!(hits >= 95, "{hits}/100");
    }

    #[test]
    fn gap_rejects_flat_or_rising_data() {
        let flat = ShiftDataset {
            points: vec![(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)],
            area: 1e-7,
            mass: 1e-10,
            f0: 1e5,
        };
        assert!(matches!(fit_gap(&flat), Err(Error::Fit(_))));
        let two = ShiftDataset {
            points: vec![(10.0, -1.0), (10.0, -1.1), (20.0, -4.0)],
            ..flat.clone()
        };
        assert!(fit_gap(&two).is_err());
    }

    fn lorentzian_spectrum(centres: &[f64], snr_db: f64, bin: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
        let height = 10f64.powf(snr_db / 10.0);
        (0..2000)
            .map(|k| {
                let f = 250_000.0 + bin * k as f64;
                let mut p = 1.0 + 0.05 * (rng.random::<f64>() - 0.5);
                for &c in centres {
                    let x = (f - c) / (1.5 * bin);
                    p += height / (1.0 + x * x);
                }
                (f, p)
            })
            .collect()
    }

    #[test]
    fn single_lorentzian_is_located_within_half_a_bin() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bin = 10.0;
        let s = lorentzian_spectrum(&[258786.0], 20.0, bin, &mut rng);
        let peaks = detect_peaks(&s, None, DEFAULT_THRESHOLD_DB).unwrap();
        assert_eq!(peaks.len(), 1, "{peaks:?}");
        assert!((peaks[0] - 258786.0).abs() < bin / 2.0);
    }

    #[test]
    fn close_peaks_are_both_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bin = 10.0;
        let s = lorentzian_spectrum(&[258786.0, 258886.0], 20.0, bin, &mut rng);
        let peaks = detect_peaks(&s, None, DEFAULT_THRESHOLD_DB).unwrap();
        assert_eq!(peaks.len(), 2, "{peaks:?}");
    }

    #[test]
    fn flat_and_empty_spectra() {
        let flat: Vec<(f64, f64)> = (0..100).map(|k| (k as f64, 1.0)).collect();
        assert!(detect_peaks(&flat, None, DEFAULT_THRESHOLD_DB).unwrap().is_empty());
        assert!(matches!(detect_peaks::<f64>(&[], None, 6.0), Err(Error::EmptySpectrum)));
    }

    #[test]
    fn parabola_vertex_is_exact_for_parabolas() {
        let f = |x: f64| -3.0 * (x - 1.37).powi(2) + 2.0;
        let v = parabola_vertex([1.0, 1.5, 2.5], [f(1.0), f(1.5), f(2.5)]);
        assert!((v - 1.37).abs() < 1e-12);
    }

    fn table() -> ModeTable<f64> {
        uniform_modes(&default_device::<f64>().stack, 2, 4).unwrap()
    }

    #[test]
    fn exact_peaks_have_zero_error() {
        let t = table();
        let peaks: Vec<f64> = t.modes.iter().map(|m| m.frequency_hz).collect();
        for strategy in [MatchStrategy::Optimal, MatchStrategy::Greedy] {
            let id = identify_modes(&peaks, &t, 3.0, strategy).unwrap();
            assert_eq!(id.assignments.len(), peaks.len());
            assert!(id.assignments.iter().all(|a| a.rel_error_percent == 0.0));
        }
    }

    #[test]
    fn relative_error_uses_measured_denominator() {
        let e: f64 = relative_error_percent(260.645, 258.786);
        assert!((e - 0.718).abs() < 5e-4);
        let e: f64 = relative_error_percent(1258.374, 1296.55);
        assert!((e - 2.944).abs() < 5e-4);
    }

    #[test]
    fn optimal_matching_prefers_more_pairs() {
        // Ascending greedy steals the close mode for the first peak and
        // strands the second; the optimal matching keeps both.
        let mut t = table();
        t.modes.truncate(2);
        t.modes[0].frequency_hz = 100.0;
        t.modes[1].frequency_hz = 103.5;
        let peaks = [102.0, 105.0];
        let greedy = identify_modes(&peaks, &t, 2.0, MatchStrategy::Greedy).unwrap();
        assert_eq!(greedy.assignments.len(), 1);
        assert_eq!(greedy.unassigned, vec![105.0]);
        let optimal = identify_modes(&peaks, &t, 2.0, MatchStrategy::Optimal).unwrap();
        assert_eq!(optimal.assignments.len(), 2);
        assert!(optimal.unassigned.is_empty());
    }

    #[test]
    fn far_peaks_are_unassigned() {
        let t = table();
        let id = identify_modes(&[1.0, 1e9], &t, 3.0, MatchStrategy::Optimal).unwrap();
        assert!(id.assignments.is_empty());
        assert_eq!(id.unassigned.len(), 2);
    }

    #[test]
    fn hungarian_small_case() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn csv_readers_and_writer() {
        let text = "t_s, amplitude\n0.0, 1.0\n1.0, 0.5\n";
        let rows: Vec<(f64, f64)> = read_ringdown_csv(text.as_bytes(), "mem").unwrap();
        assert_eq!(rows, vec![(0.0, 1.0), (1.0, 0.5)]);
        assert!(read_shift_csv::<f64, _>(text.as_bytes(), "mem").is_err());
        let spectrum: Vec<(f64, f64)> = read_spectrum_csv("f_hz,vsn\n1,2\n".as_bytes(), "mem").unwrap();
        assert_eq!(spectrum, vec![(1.0, 2.0)]);
        let peaks: Vec<f64> = read_peaks_csv("f_hz\n258786\n399587\n".as_bytes(), "mem").unwrap();
        assert_eq!(peaks, vec![258786.0, 399587.0]);
        let id = Identification {
            assignments: vec![PeakAssignment {
                measured_hz: 258786.0,
                predicted_hz: 260645.0,
                mode: (0, 1),
                rel_error_percent: relative_error_percent(260645.0, 258786.0),
            }],
            unassigned: vec![1.0e6],
        };
        let mut buf = Vec::new();
        write_assignments_csv(&id, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "n,m,predicted_hz,measured_hz,rel_error_percent\n\
             0,1,2.60645000e5,2.58786000e5,7.18354161e-1\n\
             ,,,1.00000000e6,\n"
        );
    }
}
