use memtrans::electromech::{mode_displacement, Displacement};
use memtrans::{
    capacitance_pm, capacitance_series, dc_dbeta, default_device, frequency_shift_plate, uniform_modes,
    ElectrodeLayout64, Polarity, Real, Sector,
};
use proptest::prelude::*;

const GAP: f64 = 5.12e-6;

fn layout() -> ElectrodeLayout64 {
    ElectrodeLayout64::eight_segment(&default_device::<f64>().stack, GAP).unwrap()
}

#[test]
fn flat_quadrature_matches_sector_areas() {
    let lay = layout();
    let (ap, am) = lay.overlap_areas();
    let eps = f64::epsilon0();
    let zero = |_: f64, _: f64| 0.0;
    let (cp, cm) = capacitance_pm(&lay, Some(&zero as Displacement<f64>)).unwrap();
    assert!((cp / (eps * ap / GAP) - 1.0).abs() < 1e-10, "{cp}");
    assert!((cm / (eps * am / GAP) - 1.0).abs() < 1e-10, "{cm}");
    let (fp, fm) = capacitance_pm(&lay, None).unwrap();
    assert!((fp / cp - 1.0).abs() < 1e-10 && (fm / cm - 1.0).abs() < 1e-10);
}

fn finite_difference(lay: &ElectrodeLayout64, mode: &memtrans::ModeSpec64, beta: f64) -> (f64, f64) {
    let (c0p, c0m) = capacitance_pm(lay, None).unwrap();
    let u = mode_displacement(mode, beta);
    let (cp, cm) = capacitance_pm(lay, Some(&u as Displacement<f64>)).unwrap();
    ((cp - c0p) / beta, (cm - c0m) / beta)
}

#[test]
fn difference_quotient_converges_to_first_derivative() {
    let lay = layout();
    let table = uniform_modes(&default_device::<f64>().stack, 0, 3).unwrap();
    for m in 1..=3 {
        let mode = table.get(0, m).unwrap();
        let (dp, dm) = dc_dbeta(&lay, mode);
        let beta = GAP * 1e-3;
        let (qp, qm) = finite_difference(&lay, mode, beta);
        let (hp, hm) = finite_difference(&lay, mode, beta / 2.0);
        for (exact, coarse, fine) in [(dp, qp, hp), (dm, qm, hm)] {
            let e1 = (coarse - exact).abs();
            let e2 = (fine - exact).abs();
            assert!(e1 <= 0.01 * exact.abs(), "(0,{m}) slope {coarse} vs {exact}");
            let order = (e1 / e2).log2();
            assert!(order >= 0.95, "(0,{m}) observed order {order}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn series_is_symmetric(a in 1e-16f64..1e-9, b in 1e-16f64..1e-9) {
        let ab = capacitance_series(a, b).unwrap();
        let ba = capacitance_series(b, a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab < a.min(b));
    }

    #[test]
    fn bias_always_pulls_frequency_down(
        area in 1e-9f64..1e-6,
        mass in 1e-13f64..1e-9,
        gap in 1e-6f64..2e-5,
        f0 in 1e4f64..1e7,
        v in 0.01f64..100.0,
        dv in 0.01f64..10.0,
    ) {
        let lo = frequency_shift_plate(area, mass, gap, f0, v).unwrap();
        let neg = frequency_shift_plate(area, mass, gap, f0, -v).unwrap();
        let hi = frequency_shift_plate(area, mass, gap, f0, v + dv).unwrap();
        prop_assert!(lo < 0.0);
        prop_assert_eq!(lo, neg);
        prop_assert!(hi.abs() > lo.abs());
    }

    #[test]
    fn sector_capacitance_is_exact(
        r_in in 260e-6f64..500e-6,
        width in 10e-6f64..200e-6,
        t0 in 0.0f64..3.0,
        span in 0.05f64..3.0,
    ) {
        let mut lay = layout();
        lay.segments = vec![
            Sector { r_in, r_out: (r_in + width).min(730e-6), theta_start: t0, theta_end: t0 + span, polarity: Polarity::Plus },
            Sector { r_in, r_out: (r_in + width).min(730e-6), theta_start: t0 + span + 0.01, theta_end: t0 + 2.0 * span + 0.01, polarity: Polarity::Minus },
        ];
        let s = &lay.segments[0];
        let area = 0.5 * span * (s.r_out * s.r_out - s.r_in * s.r_in);
        let zero = |_: f64, _: f64| 0.0;
        let (cp, _) = capacitance_pm(&lay, Some(&zero as Displacement<f64>)).unwrap();
        prop_assert!((cp / (f64::epsilon0() * area / GAP) - 1.0).abs() < 1e-10);
    }
}
