//! Dissipation dilution of the stressed SiN/TiN bilayer.
//!
//! The loss budget of an axisymmetric mode `(0, m)` is
//!
//! ```text
//! 1/Q_tot = 2 λ_b Q_b⁻¹  +  α² λ_b² Q_b⁻¹  +  α² λ_c² [1 - f(R_i)] Q_c⁻¹
//!           (edge)          (distributed, base)   (distributed, coating)
//! ```
//!
//! Two routes are provided for the distributed part: the closed forms
//! ([`energies_closed`], [`q_bilayer`]) and direct quadrature of the strain
//! energy integrals over an actual mode shape ([`energies_numeric`]).
//! Bending energies carry the factor ½ of the plate strain-energy density,
//! which is what makes the energy-ratio definition of Q agree with the
//! closed form.

use std::io::Write;

use crate::device::{FilmLayer, MembraneStack};
use crate::error::{Error, Result};
use crate::modes::ModeSpec;
use crate::output::sci;
use crate::quadrature::integrate;
use crate::scalar::{count, lit, to_f64, Real};
use crate::special::{bessel_zero, jn_all};

/// A quality factor, or the statement that no loss channel is active.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QFactor<T> {
    Finite(T),
    Unbounded,
}

impl<T: Real> QFactor<T> {
    pub fn from_loss(loss: T) -> Self {
        if loss > T::zero() {
            QFactor::Finite(loss.recip())
        } else {
            QFactor::Unbounded
        }
    }

    pub fn value(self) -> Option<T> {
        match self {
            QFactor::Finite(q) => Some(q),
            QFactor::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, QFactor::Unbounded)
    }

    /// CSV cell text: scientific notation or `unbounded`.
    pub fn display(self) -> String {
        match self {
            QFactor::Finite(q) => sci(q),
            QFactor::Unbounded => "unbounded".into(),
        }
    }
}

/// Loss decomposition of one axisymmetric mode.
#[derive(Clone, Debug, PartialEq)]
pub struct DissipationBudget<T> {
    pub mode: (u32, u32),
    pub lambda_base: T,
    pub lambda_coat: T,
    /// `f(R_i)`.
    pub coverage_f: T,
    /// `2 λ_b Q_b⁻¹`.
    pub edge_term: T,
    /// `α² λ_b² Q_b⁻¹`.
    pub dist_base_term: T,
    /// `α² λ_c² [f(R_e) - f(R_i)] Q_c⁻¹`; the bracket is `1 - f(R_i)` for `R_e = R`.
    pub dist_coat_term: T,
    pub q_bilayer: QFactor<T>,
    pub q_total: QFactor<T>,
}

/// Stored strain energies for a mode of amplitude `amplitude`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown<T> {
    /// Bending energy in the base film, J.
    pub w_bend_base: T,
    /// Bending energy in the coating, J.
    pub w_bend_coat: T,
    /// Tensile energy in the base film, J.
    pub w_tensile: T,
    pub amplitude: T,
}

/// `λ = (h/R) sqrt(Y / (12 (1-ν²) σ₀))`.
pub fn dilution_parameter<T: Real>(layer: &FilmLayer<T>, radius: T, sigma0: T) -> Result<T> {
    if !(sigma0 > T::zero()) {
        return Err(Error::ZeroStress(to_f64(sigma0)));
    }
    let twelve = lit::<T>(12.0);
    Ok(layer.thickness / radius * (layer.biaxial_modulus() / (twelve * sigma0)).sqrt())
}

/// Flexural rigidity of the coating sitting on top of the base film,
/// integrated from `h_b/2` to `h_b/2 + h_c`.
pub fn coating_rigidity<T: Real>(stack: &MembraneStack<T>) -> T {
    let z0 = stack.base.thickness / lit(2.0);
    stack.coating.rigidity_between(z0, z0 + stack.coating.thickness)
}

/// `λ_c = sqrt(D_c / (σ₀ h_b R²))`, the coating's dilution parameter
/// relative to the tension carried by the base film.
pub fn coating_dilution<T: Real>(stack: &MembraneStack<T>) -> T {
    let denom = stack.tension() * stack.radius * stack.radius;
    (coating_rigidity(stack) / denom).sqrt()
}

/// `ρ² [J₀(αρ)² + J₁(αρ)²] / J₁(α)²` with `ρ = r/R`; equals the fraction of
/// `∫ J₀(αr/R)² r dr` lying inside radius `r`.
fn coverage_at<T: Real>(alpha: T, rho: T) -> T {
    let j_edge = jn_all(1, alpha)[1];
    let j = jn_all(1, alpha * rho);
    rho * rho * (j[0] * j[0] + j[1] * j[1]) / (j_edge * j_edge)
}

/// `f(R_i)` for mode `(0, m)`.
pub fn coverage_modulation<T: Real>(stack: &MembraneStack<T>, m: u32) -> Result<T> {
    let alpha: T = bessel_zero(0, m)?;
    Ok(coverage_at(alpha, stack.coating_inner / stack.radius))
}

fn axisymmetric(mode: (u32, u32)) -> Result<u32> {
    match mode {
        (0, m) if m >= 1 => Ok(m),
        (n, m) => Err(Error::NonAxisymmetric { n, m }),
    }
}

/// Closed-form energies for `u(r) = C J₀(α r/R)`.
pub fn energies_closed<T: Real>(
    stack: &MembraneStack<T>,
    mode: (u32, u32),
    amplitude: T,
) -> Result<EnergyBreakdown<T>> {
    let m = axisymmetric(mode)?;
    let alpha: T = bessel_zero(0, m)?;
    let r = stack.radius;
    let wavenumber = alpha / r;
    let j1 = jn_all(1, alpha)[1];
    let c2 = amplitude * amplitude;
    let half = lit::<T>(0.5);
    let pi = T::PI();
    let shape_term = pi * r * r * wavenumber.powi(4) * c2 * j1 * j1;
    let bracket = coverage_at(alpha, stack.coating_outer / r) - coverage_at(alpha, stack.coating_inner / r);
    Ok(EnergyBreakdown {
        w_bend_base: half * shape_term * stack.base.flexural_rigidity(),
        w_bend_coat: half * shape_term * coating_rigidity(stack) * bracket.max(T::zero()),
        w_tensile: pi * stack.tension() * alpha * alpha * c2 * j1 * j1 * half,
        amplitude,
    })
}

/// Energies by quadrature of the curvature `(u'' + u'/r)²` and slope `(u')²`
/// integrands for `u = amplitude · mode.radial_shape`.
///
/// Analytic modes are integrated adaptively with exact derivatives. Sampled
/// modes use finite differences on their grid; if the estimated relative
/// error exceeds `rel_tol` an [`Error::InsufficientResolution`] is returned.
pub fn energies_numeric<T: Real>(
    stack: &MembraneStack<T>,
    mode: &ModeSpec<T>,
    amplitude: T,
    rel_tol: T,
) -> Result<EnergyBreakdown<T>> {
    axisymmetric(mode.index())?;
    let (curv_full, curv_coat, slope) = if mode.alpha.is_some() {
        analytic_integrals(stack, mode, rel_tol)?
    } else {
        sampled_integrals(stack, mode, rel_tol)?
    };
    let two_pi = T::PI() + T::PI();
    let half = lit::<T>(0.5);
    let c2 = amplitude * amplitude;
    Ok(EnergyBreakdown {
        w_bend_base: half * stack.base.flexural_rigidity() * two_pi * c2 * curv_full,
        w_bend_coat: half * coating_rigidity(stack) * two_pi * c2 * curv_coat,
        w_tensile: two_pi * half * stack.tension() * c2 * slope,
        amplitude,
    })
}

fn analytic_integrals<T: Real>(stack: &MembraneStack<T>, mode: &ModeSpec<T>, rel_tol: T) -> Result<(T, T, T)> {
    let curvature = |r: T| {
        let (_, d1, d2) = mode.analytic_derivatives(r).expect("analytic mode");
        let lap = if r > T::zero() { d2 + d1 / r } else { d2 + d2 };
        lap * lap * r
    };
    let slope = |r: T| {
        let (_, d1, _) = mode.analytic_derivatives(r).expect("analytic mode");
        d1 * d1 * r
    };
    let tol = rel_tol * lit(1e-2);
    let zero = T::zero();
    let max_iv = 4000;
    let full = integrate(curvature, zero, stack.radius, tol, zero, max_iv);
    let coat = if stack.coating_outer > stack.coating_inner {
        integrate(curvature, stack.coating_inner, stack.coating_outer, tol, zero, max_iv)
    } else {
        crate::quadrature::Integral {
            value: zero,
            error: zero,
        }
    };
    let grad = integrate(slope, zero, stack.radius, tol, zero, max_iv);
    for i in [&full, &coat, &grad] {
        let scale = full.value.abs().max(grad.value.abs()).max(T::min_positive_value());
        let rel = i.error / i.value.abs().max(scale * T::epsilon());
        if rel > rel_tol && i.error > T::epsilon() * scale {
            return Err(Error::InsufficientResolution {
                estimate: to_f64(rel),
                tolerance: to_f64(rel_tol),
            });
        }
    }
    Ok((full.value, coat.value, grad.value))
}

/// Trapezoid rule on the sample grid for the piecewise-linear interpolant of
/// `g`, restricted to `[a, b]`.
fn trapezoid_clipped<T: Real>(g: &[T], h: T, a: T, b: T) -> T {
    let half = lit::<T>(0.5);
    let mut sum = T::zero();
    for i in 0..g.len() - 1 {
        let x0 = count::<T>(i) * h;
        let x1 = x0 + h;
        let lo = x0.max(a);
        let hi = x1.min(b);
        if hi <= lo {
            continue;
        }
        let at = |x: T| g[i] + (g[i + 1] - g[i]) * (x - x0) / h;
        sum = sum + half * (at(lo) + at(hi)) * (hi - lo);
    }
    sum
}

fn sampled_integrands<T: Real>(v: &[T], h: T) -> (Vec<T>, Vec<T>) {
    let n = v.len();
    let two = lit::<T>(2.0);
    let mut curv = vec![T::zero(); n];
    let mut slope = vec![T::zero(); n];
    for i in 0..n {
        let r = count::<T>(i) * h;
        let (d1, d2) = if i == 0 {
            // symmetric extension v(-h) = v(h)
            (T::zero(), two * (v[1] - v[0]) / (h * h))
        } else if i == n - 1 {
            let d1 = (v[i] - v[i - 1]) / h;
            let d2 = (v[i] - two * v[i - 1] + v[i - 2]) / (h * h);
            (d1 + d2 * h / two, d2)
        } else {
            (
                (v[i + 1] - v[i - 1]) / (two * h),
                (v[i + 1] - two * v[i] + v[i - 1]) / (h * h),
            )
        };
        let lap = if i == 0 { two * d2 } else { d2 + d1 / r };
        curv[i] = lap * lap * r;
        slope[i] = d1 * d1 * r;
    }
    (curv, slope)
}

fn sampled_integrals<T: Real>(stack: &MembraneStack<T>, mode: &ModeSpec<T>, rel_tol: T) -> Result<(T, T, T)> {
    let v = &mode.radial_shape;
    if v.len() < 9 {
        return Err(Error::InsufficientResolution {
            estimate: f64::INFINITY,
            tolerance: to_f64(rel_tol),
        });
    }
    let h = mode.grid_step();
    let eval = |samples: &[T], step: T| {
        let (curv, slope) = sampled_integrands(samples, step);
        (
            trapezoid_clipped(&curv, step, T::zero(), stack.radius),
            trapezoid_clipped(&curv, step, stack.coating_inner, stack.coating_outer),
            trapezoid_clipped(&slope, step, T::zero(), stack.radius),
        )
    };
    let fine = eval(v, h);
    // Same rule on every other sample; the difference estimates the error.
    let coarse_samples: Vec<T> = v.iter().step_by(2).copied().collect();
    let coarse_step = if (v.len() - 1).is_multiple_of(2) {
        h + h
    } else {
        stack.radius / count(coarse_samples.len() - 1)
    };
    let coarse = eval(&coarse_samples, coarse_step);
    let rel = |f: T, c: T| ((f - c) / f).abs();
    let estimate = rel(fine.0, coarse.0).max(rel(fine.2, coarse.2));
    if !(estimate <= rel_tol) {
        return Err(Error::InsufficientResolution {
            estimate: to_f64(estimate),
            tolerance: to_f64(rel_tol),
        });
    }
    Ok(fine)
}

/// Q from the energy ratio: `Q⁻¹ = (W_b/W_t) Q_b⁻¹ + (W_c/W_t) Q_c⁻¹`.
pub fn q_from_energies<T: Real>(stack: &MembraneStack<T>, e: &EnergyBreakdown<T>) -> QFactor<T> {
    let loss = (e.w_bend_base * stack.base.intrinsic_loss + e.w_bend_coat * stack.coating.intrinsic_loss) / e.w_tensile;
    QFactor::from_loss(loss)
}

/// Distributed-loss Q of the bilayer for mode `(0, m)` (closed form).
pub fn q_bilayer<T: Real>(stack: &MembraneStack<T>, mode: (u32, u32)) -> Result<QFactor<T>> {
    Ok(q_total(stack, mode)?.q_bilayer)
}

/// Full budget including the clamping (edge) loss of the base film.
pub fn q_total<T: Real>(stack: &MembraneStack<T>, mode: (u32, u32)) -> Result<DissipationBudget<T>> {
    let m = axisymmetric(mode)?;
    let alpha: T = bessel_zero(0, m)?;
    let lambda_base = dilution_parameter(&stack.base, stack.radius, stack.base.prestress)?;
    let lambda_coat = coating_dilution(stack);
    let rho_i = stack.coating_inner / stack.radius;
    let rho_e = stack.coating_outer / stack.radius;
    let coverage_f = coverage_at(alpha, rho_i);
    let bracket = (coverage_at(alpha, rho_e) - coverage_f).max(T::zero());
    let a2 = alpha * alpha;
    let qb = stack.base.intrinsic_loss;
    let qc = stack.coating.intrinsic_loss;
    let edge_term = lit::<T>(2.0) * lambda_base * qb;
    let dist_base_term = a2 * lambda_base * lambda_base * qb;
    let dist_coat_term = a2 * lambda_coat * lambda_coat * bracket * qc;
    let distributed = dist_base_term + dist_coat_term;
    Ok(DissipationBudget {
        mode,
        lambda_base,
        lambda_coat,
        coverage_f,
        edge_term,
        dist_base_term,
        dist_coat_term,
        q_bilayer: QFactor::from_loss(distributed),
        q_total: QFactor::from_loss(distributed + edge_term),
    })
}

/// Budget table with columns
/// `mode,lambda_base,lambda_coat,f_Ri,edge,dist_base,dist_coat,Q_bilayer,Q_total`.
pub fn write_budget_csv<T: Real, W: Write>(rows: &[DissipationBudget<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Parse {
        origin: "budget table".into(),
        message: e.to_string(),
    };
    w.write_record([
        "mode",
        "lambda_base",
        "lambda_coat",
        "f_Ri",
        "edge",
        "dist_base",
        "dist_coat",
        "Q_bilayer",
        "Q_total",
    ])
    .map_err(err)?;
    for b in rows {
        w.write_record([
            format!("({},{})", b.mode.0, b.mode.1),
            sci(b.lambda_base),
            sci(b.lambda_coat),
            sci(b.coverage_f),
            sci(b.edge_term),
            sci(b.dist_base_term),
            sci(b.dist_coat_term),
            b.q_bilayer.display(),
            b.q_total.display(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| err(e.into()))?;
    Ok(())
}
