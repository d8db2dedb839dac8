//! Device model: film materials, membrane geometry and the on-disk device
//! description.
//!
//! A device file is TOML:
//!
//! ```toml
//! [base]                 # stressed SiN membrane
//! Y_pa = 270e9
//! nu = 0.27
//! rho_kg_m3 = 2700.0
//! h_m = 100e-9
//! q_inv = 2.0e-4
//! sigma0_pa = 1e9
//!
//! [coating]              # annular TiN film
//! Y_pa = 600e9
//! nu = 0.27
//! rho_kg_m3 = 5220.0
//! h_m = 50e-9
//! q_inv = 1.0e-3
//!
//! [geometry]
//! R_m = 740e-6
//! Ri_m = 250e-6
//! Re_m = 740e-6          # optional, defaults to R_m
//!
//! [solver]               # optional
//! grid_n = 2000
//! rel_tol = 1e-10
//!
//! [electrode]            # optional
//! preset = "eight-segment"
//! gap_m = 5.12e-6
//!
//! [modes]                # optional
//! list = [[0, 1], [1, 1], [0, 2]]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// One material film.
#[derive(Clone, Debug, PartialEq)]
pub struct FilmLayer<T> {
    /// Young's modulus, Pa.
    pub young_modulus: T,
    pub poisson_ratio: T,
    /// kg/m³.
    pub density: T,
    /// m.
    pub thickness: T,
    /// Loss angle Q⁻¹ of the unstressed film.
    pub intrinsic_loss: T,
    /// Biaxial prestress, Pa. Zero for unstressed films.
    pub prestress: T,
}

impl<T: Real> FilmLayer<T> {
    pub fn new(
        young_modulus: T,
        poisson_ratio: T,
        density: T,
        thickness: T,
        intrinsic_loss: T,
        prestress: T,
    ) -> Result<Self> {
        let layer = FilmLayer {
            young_modulus,
            poisson_ratio,
            density,
            thickness,
            intrinsic_loss,
            prestress,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: T| v.is_finite();
        if !(finite(self.young_modulus) && self.young_modulus > T::zero()) {
            return Err(Error::validation(
                "young_modulus",
                format!("must be > 0, got {}", self.young_modulus),
            ));
        }
        if !(finite(self.poisson_ratio) && self.poisson_ratio >= T::zero() && self.poisson_ratio < lit(0.5)) {
            return Err(Error::validation(
                "poisson_ratio",
                format!("must lie in [0, 0.5), got {}", self.poisson_ratio),
            ));
        }
        if !(finite(self.thickness) && self.thickness > T::zero()) {
            return Err(Error::validation(
                "thickness",
                format!("must be > 0, got {}", self.thickness),
            ));
        }
        if !(finite(self.intrinsic_loss) && self.intrinsic_loss >= T::zero()) {
            return Err(Error::validation(
                "intrinsic_loss",
                format!("must be >= 0, got {}", self.intrinsic_loss),
            ));
        }
        if !(finite(self.density) && self.density >= T::zero()) {
            return Err(Error::validation(
                "density",
                format!("must be >= 0, got {}", self.density),
            ));
        }
        if !finite(self.prestress) {
            return Err(Error::validation("prestress", "must be finite"));
        }
        Ok(())
    }

    /// Plane-stress modulus Y/(1-ν²).
    pub fn biaxial_modulus(&self) -> T {
        self.young_modulus / (T::one() - self.poisson_ratio * self.poisson_ratio)
    }

    /// Flexural rigidity of the film when it occupies `z_lo..z_hi` measured
    /// from the bending reference plane.
    pub fn rigidity_between(&self, z_lo: T, z_hi: T) -> T {
        let three = lit::<T>(3.0);
        self.biaxial_modulus() * (z_hi.powi(3) - z_lo.powi(3)) / three
    }

    /// Flexural rigidity for a film centred on the reference plane, Y h³ / 12(1-ν²).
    pub fn flexural_rigidity(&self) -> T {
        let half = self.thickness / lit(2.0);
        self.rigidity_between(-half, half)
    }

    /// Mass per unit area, kg/m².
    pub fn areal_density(&self) -> T {
        self.density * self.thickness
    }
}

/// Stressed base membrane carrying an annular coating between
/// `coating_inner` and `coating_outer`.
#[derive(Clone, Debug, PartialEq)]
pub struct MembraneStack<T> {
    pub base: FilmLayer<T>,
    pub coating: FilmLayer<T>,
    /// Membrane radius R, m.
    pub radius: T,
    /// Inner coating radius R_i, m.
    pub coating_inner: T,
    /// Outer coating radius R_e, m.
    pub coating_outer: T,
}

impl<T: Real> MembraneStack<T> {
    pub fn new(
        base: FilmLayer<T>,
        coating: FilmLayer<T>,
        radius: T,
        coating_inner: T,
        coating_outer: T,
    ) -> Result<Self> {
        let stack = MembraneStack {
            base,
            coating,
            radius,
            coating_inner,
            coating_outer,
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate().map_err(|e| prefix_field(e, "base"))?;
        self.coating.validate().map_err(|e| prefix_field(e, "coating"))?;
        if !(self.base.prestress > T::zero()) {
            return Err(Error::validation(
                "base.prestress",
                format!("must be > 0, got {}", self.base.prestress),
            ));
        }
        if !(self.radius.is_finite() && self.radius > T::zero()) {
            return Err(Error::validation(
                "radius_R",
                format!("must be > 0, got {}", self.radius),
            ));
        }
        if !(self.coating_inner.is_finite() && self.coating_inner >= T::zero() && self.coating_inner <= self.radius) {
            return Err(Error::validation(
                "coating_inner_Ri",
                format!("must lie in [0, R = {}], got {}", self.radius, self.coating_inner),
            ));
        }
        if !(self.coating_outer.is_finite()
            && self.coating_outer >= self.coating_inner
            && self.coating_outer <= self.radius)
        {
            return Err(Error::validation(
                "coating_outer_Re",
                format!(
                    "must lie in [Ri = {}, R = {}], got {}",
                    self.coating_inner, self.radius, self.coating_outer
                ),
            ));
        }
        Ok(())
    }

    /// In-plane tension carried by the base film, N/m.
    pub fn tension(&self) -> T {
        self.base.prestress * self.base.thickness
    }

    /// Transverse wave speed of the bare membrane, sqrt(σ₀/ρ).
    pub fn wave_speed(&self) -> T {
        (self.base.prestress / self.base.density).sqrt()
    }

    pub fn is_coated_at(&self, r: T) -> bool {
        r >= self.coating_inner && r <= self.coating_outer && self.coating_outer > self.coating_inner
    }

    /// Mass per unit area at radius `r`.
    pub fn areal_density_at(&self, r: T) -> T {
        let base = self.base.areal_density();
        if self.is_coated_at(r) {
            base + self.coating.areal_density()
        } else {
            base
        }
    }

    pub fn with_coating_density(&self, density: T) -> Self {
        let mut s = self.clone();
        s.coating.density = density;
        s
    }

    pub fn with_coating_inner(&self, inner: T) -> Self {
        let mut s = self.clone();
        s.coating_inner = inner;
        s
    }

    pub fn with_prestress(&self, prestress: T) -> Self {
        let mut s = self.clone();
        s.base.prestress = prestress;
        s
    }
}

fn prefix_field(err: Error, layer: &str) -> Error {
    match err {
        Error::Validation { field, reason } => Error::Validation {
            field: format!("{layer}.{field}"),
            reason,
        },
        other => other,
    }
}

/// Numerical settings for the mode solver.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings<T> {
    /// Number of radial cells.
    pub grid_n: usize,
    pub rel_tol: T,
}

pub const MIN_GRID: usize = 16;

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        SolverSettings {
            grid_n: 2000,
            rel_tol: lit(1e-10),
        }
    }
}

impl<T: Real> SolverSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if self.grid_n < MIN_GRID {
            return Err(Error::validation(
                "grid_n",
                format!("must be >= {MIN_GRID}, got {}", self.grid_n),
            ));
        }
        if !(self.rel_tol > T::zero() && self.rel_tol.is_finite()) {
            return Err(Error::validation(
                "rel_tol",
                format!("must be > 0, got {}", self.rel_tol),
            ));
        }
        Ok(())
    }
}

/// Where the fixed-electrode layout comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ElectrodeRef<T> {
    Preset { name: String, gap: T },
    File(PathBuf),
}

/// A validated device description.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceConfig<T> {
    pub stack: MembraneStack<T>,
    pub electrode: Option<ElectrodeRef<T>>,
    pub solver: SolverSettings<T>,
    /// Modes `(n, m)` to evaluate.
    pub modes: Vec<(u32, u32)>,
}

/// The eleven modes identified in the measured spectrum of the reference device.
pub const REFERENCE_MODES: [(u32, u32); 11] = [
    (0, 1),
    (1, 1),
    (0, 2),
    (1, 2),
    (0, 3),
    (1, 3),
    (0, 4),
    (2, 3),
    (1, 4),
    (0, 5),
    (2, 4),
];

/// Bulk TiN density used when the device file does not provide one.
pub const TIN_BULK_DENSITY: f64 = 5220.0;

impl<T: Real> DeviceConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.stack.validate()?;
        self.solver.validate()?;
        if let Some(ElectrodeRef::Preset { gap, .. }) = &self.electrode {
            if !(*gap > T::zero()) {
                return Err(Error::validation("electrode.gap_m", format!("must be > 0, got {gap}")));
            }
        }
        for &(_, m) in &self.modes {
            if m == 0 {
                return Err(Error::validation("modes.list", "radial index m starts at 1"));
            }
        }
        Ok(())
    }
}

/// The reference SiN/TiN device: 100/50 nm films, R = 740 µm,
/// R_i = 250 µm, 1 GPa prestress, bulk TiN density.
pub fn default_device<T: Real>() -> DeviceConfig<T> {
    let base = FilmLayer {
        young_modulus: lit(270e9),
        poisson_ratio: lit(0.27),
        density: lit(2700.0),
        thickness: lit(100e-9),
        intrinsic_loss: lit(2.0e-4),
        prestress: lit(1e9),
    };
    let coating = FilmLayer {
        young_modulus: lit(600e9),
        poisson_ratio: lit(0.27),
        density: lit(TIN_BULK_DENSITY),
        thickness: lit(50e-9),
        intrinsic_loss: lit(1.0e-3),
        prestress: T::zero(),
    };
    DeviceConfig {
        stack: MembraneStack {
            base,
            coating,
            radius: lit(740e-6),
            coating_inner: lit(250e-6),
            coating_outer: lit(740e-6),
        },
        electrode: Some(ElectrodeRef::Preset {
            name: "eight-segment".into(),
            gap: lit(5.12e-6),
        }),
        solver: SolverSettings::default(),
        modes: REFERENCE_MODES.to_vec(),
    }
}

// ---- on-disk schema ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    #[serde(rename = "Y_pa")]
    y_pa: f64,
    nu: f64,
    rho_kg_m3: Option<f64>,
    h_m: f64,
    q_inv: f64,
    #[serde(default)]
    sigma0_pa: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct GeometryFile {
    R_m: f64,
    Ri_m: f64,
    Re_m: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverFile {
    grid_n: Option<usize>,
    rel_tol: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElectrodeFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_m: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModesFile {
    list: Vec<[u32; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceFile {
    base: LayerFile,
    coating: LayerFile,
    geometry: GeometryFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolverFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    electrode: Option<ElectrodeFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    modes: Option<ModesFile>,
}

fn layer_from_file<T: Real>(f: &LayerFile, default_density: Option<f64>, field: &str) -> Result<FilmLayer<T>> {
    let density = f
        .rho_kg_m3
        .or(default_density)
        .ok_or_else(|| Error::validation(field, "rho_kg_m3 is required"))?;
    Ok(FilmLayer {
        young_modulus: lit(f.y_pa),
        poisson_ratio: lit(f.nu),
        density: lit(density),
        thickness: lit(f.h_m),
        intrinsic_loss: lit(f.q_inv),
        prestress: lit(f.sigma0_pa),
    })
}

fn layer_to_file<T: Real>(l: &FilmLayer<T>) -> LayerFile {
    LayerFile {
        y_pa: to_f64(l.young_modulus),
        nu: to_f64(l.poisson_ratio),
        rho_kg_m3: Some(to_f64(l.density)),
        h_m: to_f64(l.thickness),
        q_inv: to_f64(l.intrinsic_loss),
        sigma0_pa: to_f64(l.prestress),
    }
}

/// Parses a device description. Relative electrode file paths are resolved
/// against `base_dir`.
pub fn parse_device<T: Real>(text: &str, origin: &str, base_dir: Option<&Path>) -> Result<DeviceConfig<T>> {
    let file: DeviceFile = toml::from_str(text).map_err(|e| Error::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    let base = layer_from_file(&file.base, None, "base.rho_kg_m3")?;
    let coating = layer_from_file(&file.coating, Some(TIN_BULK_DENSITY), "coating.rho_kg_m3")?;
    let radius = file.geometry.R_m;
    let stack = MembraneStack {
        base,
        coating,
        radius: lit(radius),
        coating_inner: lit(file.geometry.Ri_m),
        coating_outer: lit(file.geometry.Re_m.unwrap_or(radius)),
    };
    let defaults = SolverSettings::<T>::default();
    let solver = match file.solver {
        Some(s) => SolverSettings {
            grid_n: s.grid_n.unwrap_or(defaults.grid_n),
            rel_tol: s.rel_tol.map(lit).unwrap_or(defaults.rel_tol),
        },
        None => defaults,
    };
    let electrode = match file.electrode {
        None => None,
        Some(ElectrodeFile {
            preset: Some(_),
            file: Some(_),
            ..
        }) => return Err(Error::validation("electrode", "give either preset or file, not both")),
        Some(ElectrodeFile {
            preset: Some(name),
            gap_m,
            ..
        }) => Some(ElectrodeRef::Preset {
            name,
            gap: lit(gap_m.ok_or_else(|| Error::validation("electrode.gap_m", "required with a preset"))?),
        }),
        Some(ElectrodeFile { file: Some(path), .. }) => {
            let path = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            };
            Some(ElectrodeRef::File(path))
        }
        Some(_) => return Err(Error::validation("electrode", "needs preset or file")),
    };
    let modes = match file.modes {
        Some(m) => m.list.iter().map(|p| (p[0], p[1])).collect(),
        None => REFERENCE_MODES.to_vec(),
    };
    let cfg = DeviceConfig {
        stack,
        electrode,
        solver,
        modes,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_device<T: Real>(path: impl AsRef<Path>) -> Result<DeviceConfig<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_device(&text, &path.display().to_string(), path.parent())
}

/// Serializes a device into the TOML schema read by [`load_device`].
pub fn device_to_toml<T: Real>(cfg: &DeviceConfig<T>) -> String {
    let s = &cfg.stack;
    let file = DeviceFile {
        base: layer_to_file(&s.base),
        coating: layer_to_file(&s.coating),
        geometry: GeometryFile {
            R_m: to_f64(s.radius),
            Ri_m: to_f64(s.coating_inner),
            Re_m: Some(to_f64(s.coating_outer)),
        },
        solver: Some(SolverFile {
            grid_n: Some(cfg.solver.grid_n),
            rel_tol: Some(to_f64(cfg.solver.rel_tol)),
        }),
        electrode: cfg.electrode.as_ref().map(|e| match e {
            ElectrodeRef::Preset { name, gap } => ElectrodeFile {
                preset: Some(name.clone()),
                file: None,
                gap_m: Some(to_f64(*gap)),
            },
            ElectrodeRef::File(p) => ElectrodeFile {
                preset: None,
                file: Some(p.clone()),
                gap_m: None,
            },
        }),
        modes: Some(ModesFile {
            list: cfg.modes.iter().map(|&(n, m)| [n, m]).collect(),
        }),
    };
    toml::to_string(&file).expect("device schema serializes")
}

pub fn save_device<T: Real>(cfg: &DeviceConfig<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, device_to_toml(cfg)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1: &str = r#"
[base]
Y_pa = 270e9
nu = 0.27
rho_kg_m3 = 2700.0
h_m = 100e-9
q_inv = 2.0e-4
sigma0_pa = 1e9

[coating]
Y_pa = 600e9
nu = 0.27
h_m = 50e-9
q_inv = 1.0e-3

[geometry]
R_m = 740e-6
Ri_m = 250e-6
"#;

    #[test]
    fn parses_reference_values() {
        let cfg: DeviceConfig<f64> = parse_device(TABLE1, "inline", None).unwrap();
        assert_eq!(cfg.stack.base.young_modulus, 270e9);
        assert_eq!(cfg.stack.radius, 740e-6);
        assert_eq!(cfg.stack.coating_inner, 250e-6);
        // Re defaults to R, coating density to bulk TiN
        assert_eq!(cfg.stack.coating_outer, 740e-6);
        assert_eq!(cfg.stack.coating.density, TIN_BULK_DENSITY);
        assert_eq!(cfg.modes.len(), 11);
    }

    #[test]
    fn inner_radius_beyond_membrane_is_rejected() {
        let text = TABLE1.replace("Ri_m = 250e-6", "Ri_m = 800e-6");
        match parse_device::<f64>(&text, "inline", None) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "coating_inner_Ri"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_file_is_a_parse_error() {
        let err = parse_device::<f64>("[base\nY_pa = ", "inline", None).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err =
            parse_device::<f64>(&TABLE1.replace("nu = 0.27\nrho", "nnu = 0.27\nrho"), "inline", None).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn bad_poisson_ratio_names_the_layer() {
        let text = TABLE1.replacen("nu = 0.27", "nu = 0.5", 1);
        match parse_device::<f64>(&text, "inline", None) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "base.poisson_ratio"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn default_device_matches_reference_table() {
        let cfg = default_device::<f64>();
        cfg.validate().unwrap();
        assert_eq!(cfg.stack.base.intrinsic_loss, 2.0e-4);
        assert_eq!(cfg.stack.coating.intrinsic_loss, 1.0e-3);
        assert_eq!(cfg.stack.coating.density, 5220.0);
        assert_eq!(cfg.stack.base.prestress, 1e9);
        assert_eq!(cfg.stack.base.thickness, 100e-9);
        assert_eq!(cfg.stack.coating.thickness, 50e-9);
        default_device::<f32>().validate().unwrap();
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_device::<f64>("/nonexistent/device.toml").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/device.toml"));
    }

    #[test]
    fn rigidity_of_centred_film() {
        let l = default_device::<f64>().stack.base;
        let d = l.young_modulus * l.thickness.powi(3) / (12.0 * (1.0 - l.poisson_ratio.powi(2)));
        assert!((l.flexural_rigidity() - d).abs() <= 1e-14 * d);
    }
}
