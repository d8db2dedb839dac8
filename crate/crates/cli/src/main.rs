//! `memtrans` command-line front end.

mod report;
mod svg;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use memtrans::analysis::{self, DEFAULT_THRESHOLD_DB};
use memtrans::device::DeviceConfig;
use memtrans::dissipation::write_budget_csv;
use memtrans::electromech::load_layout;
use memtrans::output::sci;
use memtrans::{
    calibrate_coating_density, coupling_point, default_device, device_layout, fit_gap, fit_ringdown,
    frequency_shift_plate, identify_modes, load_device, loaded_modes, q_from_tau, q_total, save_device, uniform_modes,
    AmplitudeUnits, MatchStrategy, ModeTable64, RingdownRecord, ShiftDataset,
};

use report::RunContext;
use svg::{Chart, Series};

#[derive(Parser)]
#[command(
    name = "memtrans",
    version,
    about = "Metalized-membrane transducer design and analysis toolkit"
)]
struct Cli {
    /// Write a JSON run report (inputs digest, artifacts, wall time) to this path.
    #[arg(long, global = true, value_name = "PATH")]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenfrequency table of the membrane.
    Modes(ModesArgs),
    /// Dissipation budget of the axisymmetric modes.
    Qbudget(QbudgetArgs),
    /// Electrode capacitances and their mode derivatives.
    Capacitance(CapacitanceArgs),
    /// Frequency shift versus DC bias, parallel-plate model.
    Shift(ShiftArgs),
    /// Fit measured data.
    Fit {
        #[command(subcommand)]
        kind: FitCommand,
    },
    /// Find the coating density that places a mode at a measured frequency.
    Calibrate(CalibrateArgs),
}

#[derive(Subcommand)]
enum FitCommand {
    /// Decay time and Q from a ring-down record (CSV `t_s,amplitude`).
    Ringdown(RingdownArgs),
    /// Electrode gap from frequency shift versus bias (CSV `v_dc,delta_f_hz`).
    Gap(GapArgs),
    /// Label measured peaks with predicted modes.
    Identify(IdentifyArgs),
}

#[derive(Args)]
struct DeviceArgs {
    /// Device description (TOML). The built-in reference device when omitted.
    #[arg(long, value_name = "PATH")]
    device: Option<PathBuf>,
    /// Radial grid cells for the loaded solver (overrides the device file).
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
}

#[derive(Args)]
struct SolverChoice {
    /// Discretized solver with the coating mass (default).
    #[arg(long, conflicts_with = "uniform")]
    loaded: bool,
    /// Analytic Bessel modes of the bare membrane.
    #[arg(long)]
    uniform: bool,
    /// Calibrate the coating density first: `n,m:frequency_hz`.
    #[arg(long, value_name = "N,M:HZ", value_parser = parse_cal_target, conflicts_with = "uniform")]
    calibrate: Option<((u32, u32), f64)>,
}

#[derive(Args)]
struct ModesArgs {
    #[command(flatten)]
    device: DeviceArgs,
    #[command(flatten)]
    solver: SolverChoice,
    /// Highest azimuthal order (defaults to the device mode list).
    #[arg(long)]
    n_max: Option<u32>,
    /// Highest radial order (defaults to the device mode list).
    #[arg(long)]
    m_max: Option<u32>,
    /// Output CSV path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QbudgetArgs {
    #[command(flatten)]
    device: DeviceArgs,
    /// Axisymmetric modes, e.g. `0,1..0,10` or `0,1;0,3`.
    #[arg(long, default_value = "0,1..0,10", value_parser = parse_mode_list)]
    modes: ModeList,
    /// Sweep the coating inner radius: `start_m:stop_m:points`.
    #[arg(long = "ri-sweep", value_name = "START:STOP:POINTS", value_parser = parse_sweep, requires = "sweep_out")]
    ri_sweep: Option<(f64, f64, usize)>,
    /// CSV for the inner-radius sweep.
    #[arg(long, value_name = "PATH")]
    sweep_out: Option<PathBuf>,
    /// Budget CSV path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// SVG chart of Q versus radial order.
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct CapacitanceArgs {
    #[command(flatten)]
    device: DeviceArgs,
    #[command(flatten)]
    solver: SolverChoice,
    /// Electrode layout file (overrides the device's electrode).
    #[arg(long, value_name = "PATH")]
    layout: Option<PathBuf>,
    /// Modes, e.g. `0,1;1,1` (defaults to the device mode list).
    #[arg(long, value_parser = parse_mode_list)]
    modes: Option<ModeList>,
    /// Output CSV path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ShiftArgs {
    /// Effective area, m².
    #[arg(long, value_parser = positive, allow_hyphen_values = true)]
    aeff: f64,
    /// Effective mass, kg.
    #[arg(long, value_parser = positive, allow_hyphen_values = true)]
    meff: f64,
    /// Electrode gap, m.
    #[arg(long, value_parser = positive, allow_hyphen_values = true)]
    d: f64,
    /// Unbiased frequency, Hz.
    #[arg(long, value_parser = positive, allow_hyphen_values = true)]
    f0: f64,
    /// Highest bias voltage, V.
    #[arg(long, value_parser = positive, allow_hyphen_values = true)]
    vmax: f64,
    /// Voltage step, V.
    #[arg(long, default_value_t = 1.0, value_parser = positive, allow_hyphen_values = true)]
    vstep: f64,
    /// Output CSV path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// SVG chart of the curve.
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Units {
    Linear,
    Power,
}

#[derive(Args)]
struct RingdownArgs {
    /// Ring-down CSV.
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// Mode frequency in Hz; enables the Q estimate.
    #[arg(long, value_parser = positive)]
    freq: Option<f64>,
    /// Whether the recorded value is an amplitude or a power.
    #[arg(long, value_enum, default_value = "linear")]
    units: Units,
    /// JSON output path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GapArgs {
    /// Shift CSV.
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// Effective area, m².
    #[arg(long, value_parser = positive, allow_hyphen_values = true)]
    aeff: f64,
    /// Effective mass, kg.
    #[arg(long, value_parser = positive, allow_hyphen_values = true)]
    meff: f64,
    /// Unbiased frequency, Hz.
    #[arg(long, value_parser = positive, allow_hyphen_values = true)]
    f0: f64,
    /// JSON output path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Optimal,
    Greedy,
}

#[derive(Args)]
struct IdentifyArgs {
    #[command(flatten)]
    device: DeviceArgs,
    #[command(flatten)]
    solver: SolverChoice,
    /// Measured peak frequencies (CSV column `f_hz`).
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "spectrum",
        required_unless_present = "spectrum"
    )]
    peaks: Option<PathBuf>,
    /// Spectrum (CSV `f_hz,vsn`) to detect peaks in.
    #[arg(long, value_name = "PATH")]
    spectrum: Option<PathBuf>,
    /// Detection threshold above the noise floor, dB.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_DB)]
    threshold_db: f64,
    /// Noise floor in spectrum units (median of the spectrum when omitted).
    #[arg(long, value_parser = positive)]
    noise_floor: Option<f64>,
    /// Largest accepted relative error, percent.
    #[arg(long, default_value_t = 3.0)]
    max_rel_err: f64,
    /// Matching rule: fewest unmatched peaks then least squared error, or nearest free mode in ascending peak order.
    #[arg(long, value_enum, default_value = "optimal")]
    strategy: Strategy,
    /// Assignment table CSV.
    #[arg(long, value_name = "PATH")]
    table: Option<PathBuf>,
    /// JSON output path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    device: DeviceArgs,
    /// Mode to match.
    #[arg(long, default_value = "0,1", value_parser = parse_mode)]
    mode: (u32, u32),
    /// Measured frequency of that mode, Hz.
    #[arg(long, value_parser = positive)]
    target_hz: f64,
    /// Save the calibrated device; without a value the input device file is overwritten.
    #[arg(long, value_name = "PATH", num_args = 0..=1)]
    write: Option<Option<PathBuf>>,
    /// JSON output path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {s}"))
    }
}

fn parse_mode(s: &str) -> Result<(u32, u32), String> {
    let (n, m) = s
        .trim()
        .split_once(',')
        .ok_or_else(|| format!("expected n,m, got {s:?}"))?;
    let n = n.trim().parse().map_err(|e| format!("bad n in {s:?}: {e}"))?;
    let m: u32 = m.trim().parse().map_err(|e| format!("bad m in {s:?}: {e}"))?;
    if m == 0 {
        return Err("radial index m starts at 1".into());
    }
    Ok((n, m))
}

/// Parsed `--modes` value.
#[derive(Clone, Debug, PartialEq)]
struct ModeList(Vec<(u32, u32)>);

fn parse_mode_list(s: &str) -> Result<ModeList, String> {
    let mut out = Vec::new();
    for item in s.split(';').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let (n0, m0) = parse_mode(a)?;
            let (n1, m1) = parse_mode(b)?;
            if n0 != n1 || m1 < m0 {
                return Err(format!("range {item:?} must keep n fixed and increase m"));
            }
            out.extend((m0..=m1).map(|m| (n0, m)));
        } else {
            out.push(parse_mode(item)?);
        }
    }
    if out.is_empty() {
        return Err("empty mode list".into());
    }
    Ok(ModeList(out))
}

fn parse_cal_target(s: &str) -> Result<((u32, u32), f64), String> {
    let (mode, hz) = s.split_once(':').ok_or_else(|| format!("expected n,m:Hz, got {s:?}"))?;
    Ok((parse_mode(mode)?, positive(hz)?))
}

fn parse_sweep(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:points, got {s:?}"));
    }
    let a: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    let k: usize = parts[2].trim().parse().map_err(|e| format!("{e}"))?;
    if k < 2 || !a.is_finite() || !b.is_finite() || b <= a || a < 0.0 {
        return Err("need 0 <= start < stop and at least 2 points".into());
    }
    Ok((a, b, k))
}

fn load(ctx: &mut RunContext, args: &DeviceArgs) -> Result<DeviceConfig<f64>> {
    let mut cfg = match &args.device {
        Some(path) => {
            ctx.input_file(path)?;
            load_device(path).with_context(|| format!("loading device {}", path.display()))?
        }
        None => default_device(),
    };
    if let Some(g) = args.grid {
        cfg.solver.grid_n = g;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn mode_bounds(list: &[(u32, u32)]) -> (u32, u32) {
    list.iter().fold((0, 1), |(n, m), &(a, b)| (n.max(a), m.max(b)))
}

/// Applies `--calibrate` and solves for the requested modes.
fn solve_modes(cfg: &mut DeviceConfig<f64>, choice: &SolverChoice, n_max: u32, m_max: u32) -> Result<ModeTable64> {
    if choice.uniform {
        return Ok(uniform_modes(&cfg.stack, n_max, m_max)?);
    }
    if let Some((mode, hz)) = choice.calibrate {
        let rho = calibrate_coating_density(&cfg.stack, mode, hz, &cfg.solver)?;
        eprintln!("calibrated coating density: {} kg/m^3", sci(rho));
        cfg.stack = cfg.stack.with_coating_density(rho);
    }
    Ok(loaded_modes(&cfg.stack, n_max, m_max, cfg.solver.grid_n)?)
}

fn restrict(table: ModeTable64, list: &[(u32, u32)]) -> ModeTable64 {
    ModeTable64 {
        modes: table.modes.into_iter().filter(|s| list.contains(&s.index())).collect(),
        provenance: table.provenance,
    }
}

fn cmd_modes(ctx: &mut RunContext, a: &ModesArgs) -> Result<()> {
    let mut cfg = load(ctx, &a.device)?;
    let (dn, dm) = mode_bounds(&cfg.modes);
    let table = solve_modes(&mut cfg, &a.solver, a.n_max.unwrap_or(dn), a.m_max.unwrap_or(dm))?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    ctx.emit(a.out.as_deref(), &buf)
}

fn cmd_qbudget(ctx: &mut RunContext, a: &QbudgetArgs) -> Result<()> {
    let cfg = load(ctx, &a.device)?;
    let rows = a
        .modes
        .0
        .iter()
        .map(|&mode| q_total(&cfg.stack, mode))
        .collect::<memtrans::Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    write_budget_csv(&rows, &mut buf)?;
    ctx.emit(a.out.as_deref(), &buf)?;

    if let (Some((start, stop, points)), Some(path)) = (a.ri_sweep, &a.sweep_out) {
        let mut text = String::from("ri_m,n,m,q_bilayer,q_total\n");
        for k in 0..points {
            let ri = start + (stop - start) * k as f64 / (points - 1) as f64;
            let stack = cfg.stack.with_coating_inner(ri);
            for &mode in &a.modes.0 {
                let b = q_total(&stack, mode)?;
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    sci(ri),
                    mode.0,
                    mode.1,
                    b.q_bilayer.display(),
                    b.q_total.display()
                ));
            }
        }
        ctx.write_artifact(path, text.as_bytes())?;
    }

    if let Some(path) = &a.svg {
        let pick = |f: fn(&memtrans::DissipationBudget64) -> Option<f64>| -> Vec<(f64, f64)> {
            rows.iter().filter_map(|b| f(b).map(|q| (b.mode.1 as f64, q))).collect()
        };
        let chart = Chart {
            title: "Quality factor of the axisymmetric modes",
            x_label: "radial order m",
            y_label: "Q",
            log_y: true,
            series: vec![
                Series {
                    label: "bilayer",
                    points: pick(|b| b.q_bilayer.value()),
                },
                Series {
                    label: "with edge loss",
                    points: pick(|b| b.q_total.value()),
                },
            ],
        };
        ctx.write_artifact(path, chart.render().as_bytes())?;
    }
    Ok(())
}

fn cmd_capacitance(ctx: &mut RunContext, a: &CapacitanceArgs) -> Result<()> {
    let mut cfg = load(ctx, &a.device)?;
    let layout = match &a.layout {
        Some(path) => {
            ctx.input_file(path)?;
            load_layout(path, &cfg.stack)?
        }
        None => {
            if let Some(memtrans::ElectrodeRef::File(path)) = &cfg.electrode {
                ctx.input_file(path)?;
            }
            device_layout(&cfg)?.ok_or_else(|| anyhow!("device has no electrode; pass --layout"))?
        }
    };
    let list = a.modes.clone().map(|l| l.0).unwrap_or_else(|| cfg.modes.clone());
    let (n_max, m_max) = mode_bounds(&list);
    let table = solve_modes(&mut cfg, &a.solver, n_max, m_max)?;
    let mut text =
        String::from("n,m,c_plus_f,c_minus_f,c_series_f,dc_dbeta_f_per_m,effective_area_m2,d2c_dx2_f_per_m2\n");
    for &(n, m) in &list {
        let cp = coupling_point(&layout, table.get(n, m)?)?;
        text.push_str(&format!(
            "{n},{m},{},{},{},{},{},{}\n",
            sci(cp.c_plus),
            sci(cp.c_minus),
            sci(cp.c_series),
            sci(cp.dc_dbeta),
            sci(cp.effective_area),
            sci(cp.d2c_dx2)
        ));
    }
    ctx.emit(a.out.as_deref(), text.as_bytes())
}

fn cmd_shift(ctx: &mut RunContext, a: &ShiftArgs) -> Result<()> {
    let steps = (a.vmax / a.vstep + 1e-9).floor() as usize;
    let mut points = Vec::with_capacity(steps + 1);
    let mut text = String::from("v_dc,delta_f_hz\n");
    for k in 0..=steps {
        let v = a.vstep * k as f64;
        let df = frequency_shift_plate(a.aeff, a.meff, a.d, a.f0, v)?;
        text.push_str(&format!("{},{}\n", sci(v), sci(df)));
        points.push((v, df));
    }
    ctx.emit(a.out.as_deref(), text.as_bytes())?;
    if let Some(path) = &a.svg {
        let chart = Chart {
            title: "Frequency shift versus DC bias",
            x_label: "V_dc [V]",
            y_label: "delta f [Hz]",
            log_y: false,
            series: vec![Series {
                label: "parallel plate",
                points,
            }],
        };
        ctx.write_artifact(path, chart.render().as_bytes())?;
    }
    Ok(())
}

fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s.into_bytes()
}

fn cmd_fit_ringdown(ctx: &mut RunContext, a: &RingdownArgs) -> Result<()> {
    ctx.input_file(&a.data)?;
    let samples = analysis::load_ringdown_csv(&a.data)?;
    let record = RingdownRecord {
        samples,
        mode_freq_hz: a.freq.unwrap_or(0.0),
    };
    let units = match a.units {
        Units::Linear => AmplitudeUnits::Linear,
        Units::Power => AmplitudeUnits::Power,
    };
    let fit = fit_ringdown(&record, units)?;
    let mut out = json!({
        "tau_s": fit.tau,
        "tau_err_s": fit.tau_err,
        "initial": fit.initial,
        "units": match a.units { Units::Linear => "linear", Units::Power => "power" },
        "samples": record.samples.len(),
    });
    if let Some(f) = a.freq {
        let q = q_from_tau(fit.tau, f)?;
        out["freq_hz"] = json!(f);
        out["q"] = json!(q);
        out["q_err"] = json!(q * fit.tau_err / fit.tau);
    }
    ctx.emit(a.out.as_deref(), &json_bytes(&out))
}

fn cmd_fit_gap(ctx: &mut RunContext, a: &GapArgs) -> Result<()> {
    ctx.input_file(&a.data)?;
    let data = ShiftDataset {
        points: analysis::load_shift_csv(&a.data)?,
        area: a.aeff,
        mass: a.meff,
        f0: a.f0,
    };
    let fit = fit_gap(&data)?;
    let out = json!({
        "d_m": fit.gap,
        "d_err_m": fit.gap_err,
        "slope_hz_per_v2": fit.slope,
        "slope_err_hz_per_v2": fit.slope_err,
        "points": data.points.len(),
    });
    ctx.emit(a.out.as_deref(), &json_bytes(&out))
}

fn cmd_fit_identify(ctx: &mut RunContext, a: &IdentifyArgs) -> Result<()> {
    let mut cfg = load(ctx, &a.device)?;
    let peaks: Vec<f64> = match (&a.peaks, &a.spectrum) {
        (Some(path), _) => {
            ctx.input_file(path)?;
            analysis::load_peaks_csv(path)?
        }
        (None, Some(path)) => {
            ctx.input_file(path)?;
            let spectrum = analysis::load_spectrum_csv(path)?;
            analysis::detect_peaks(&spectrum, a.noise_floor, a.threshold_db)?
        }
        (None, None) => bail!("pass --peaks or --spectrum"),
    };
    let (n_max, m_max) = mode_bounds(&cfg.modes);
    let list = cfg.modes.clone();
    let table = restrict(solve_modes(&mut cfg, &a.solver, n_max, m_max)?, &list);
    let strategy = match a.strategy {
        Strategy::Optimal => MatchStrategy::Optimal,
        Strategy::Greedy => MatchStrategy::Greedy,
    };
    let id = identify_modes(&peaks, &table, a.max_rel_err, strategy)?;
    if let Some(path) = &a.table {
        let mut buf = Vec::new();
        analysis::write_assignments_csv(&id, &mut buf)?;
        ctx.write_artifact(path, &buf)?;
    }
    let rows: Vec<serde_json::Value> = id
        .assignments
        .iter()
        .map(|r| {
            json!({
                "n": r.mode.0,
                "m": r.mode.1,
                "predicted_hz": r.predicted_hz,
                "measured_hz": r.measured_hz,
                "rel_error_percent": r.rel_error_percent,
            })
        })
        .collect();
    let worst = id.assignments.iter().map(|r| r.rel_error_percent).fold(0.0, f64::max);
    let out = json!({
        "assignments": rows,
        "unassigned_hz": id.unassigned,
        "max_rel_error_percent": worst,
        "predicted_provenance": table.provenance.as_str(),
    });
    ctx.emit(a.out.as_deref(), &json_bytes(&out))
}

fn cmd_calibrate(ctx: &mut RunContext, a: &CalibrateArgs) -> Result<()> {
    let mut cfg = load(ctx, &a.device)?;
    let rho = calibrate_coating_density(&cfg.stack, a.mode, a.target_hz, &cfg.solver)?;
    cfg.stack = cfg.stack.with_coating_density(rho);
    let (n, m) = a.mode;
    let achieved = memtrans::modes::loaded_frequencies(&cfg.stack, n, m as usize, cfg.solver.grid_n)?[m as usize - 1];
    if let Some(dest) = &a.write {
        let path = match (dest, &a.device.device) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => p.clone(),
            (None, None) => bail!("--write without a path needs --device"),
        };
        save_device(&cfg, &path).with_context(|| format!("writing {}", path.display()))?;
        ctx.record_artifact(&path);
    }
    let out = json!({
        "mode": [n, m],
        "target_hz": a.target_hz,
        "coating_density_kg_m3": rho,
        "achieved_hz": achieved,
        "grid_n": cfg.solver.grid_n,
    });
    ctx.emit(a.out.as_deref(), &json_bytes(&out))
}

fn check_threads_env() -> Result<()> {
    if let Ok(v) = std::env::var("MEMTRANS_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {}
            _ => bail!("MEMTRANS_THREADS must be a positive integer, got {v:?}"),
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    check_threads_env()?;
    let name = match &cli.command {
        Command::Modes(_) => "modes",
        Command::Qbudget(_) => "qbudget",
        Command::Capacitance(_) => "capacitance",
        Command::Shift(_) => "shift",
        Command::Fit {
            kind: FitCommand::Ringdown(_),
        } => "fit ringdown",
        Command::Fit {
            kind: FitCommand::Gap(_),
        } => "fit gap",
        Command::Fit {
            kind: FitCommand::Identify(_),
        } => "fit identify",
        Command::Calibrate(_) => "calibrate",
    };
    let started = Instant::now();
    let mut ctx = RunContext::new(name);
    match &cli.command {
        Command::Modes(a) => cmd_modes(&mut ctx, a)?,
        Command::Qbudget(a) => cmd_qbudget(&mut ctx, a)?,
        Command::Capacitance(a) => cmd_capacitance(&mut ctx, a)?,
        Command::Shift(a) => cmd_shift(&mut ctx, a)?,
        Command::Fit { kind } => match kind {
            FitCommand::Ringdown(a) => cmd_fit_ringdown(&mut ctx, a)?,
            FitCommand::Gap(a) => cmd_fit_gap(&mut ctx, a)?,
            FitCommand::Identify(a) => cmd_fit_identify(&mut ctx, a)?,
        },
        Command::Calibrate(a) => cmd_calibrate(&mut ctx, a)?,
    }
    if let Some(path) = &cli.report {
        ctx.finish(path, started.elapsed())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
