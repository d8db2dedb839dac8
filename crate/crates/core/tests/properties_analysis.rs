use std::collections::HashSet;
use std::sync::OnceLock;

use memtrans::analysis::relative_error_percent;
use memtrans::{
    default_device, fit_gap, frequency_shift_plate, identify_modes, uniform_modes, MatchStrategy, ModeTable64,
    ShiftDataset,
};
use proptest::prelude::*;

/// (mode, FEM kHz, measured kHz, printed R_E %) for the reference device.
const TABLE: [((u32, u32), f64, f64, f64); 11] = [
    ((0, 1), 260.645, 258.786, 0.718),
    ((1, 1), 398.802, 399.587, 0.196),
    ((0, 2), 609.854, 611.659, 0.295),
    ((1, 2), 755.813, 764.629, 1.153),
    ((0, 3), 943.985, 943.094, 0.094),
    ((1, 3), 1118.259, 1129.09, 0.959),
    ((0, 4), 1258.374, 1296.55, 2.944),
    ((2, 3), 1288.075, 1275.69, 0.971),
    ((1, 4), 1457.844, 1471.24, 0.910),
    ((0, 5), 1626.986, 1640.15, 0.802),
    ((2, 4), 1651.324, 1658.11, 0.409),
];

#[test]
fn relative_error_recomputes_every_row() {
    for (mode, fem, meas, printed) in TABLE {
        let re = relative_error_percent(fem, meas);
        assert!((re - printed).abs() <= 0.01, "{mode:?}: {re} vs {printed}");
    }
}

fn gap_fit_of(points: Vec<(f64, f64)>) -> f64 {
    fit_gap(&ShiftDataset {
        points,
        area: 0.075e-6,
        mass: 420e-12,
        f0: 399587.0,
    })
    .unwrap()
    .gap
}

/// Bare-membrane modes up to (3,5); frequencies scale as the root of the prestress.
fn table_at(sigma: f64) -> ModeTable64 {
    static BASE: OnceLock<ModeTable64> = OnceLock::new();
    let base = BASE.get_or_init(|| uniform_modes(&default_device::<f64>().stack.with_prestress(1e9), 3, 5).unwrap());
    let mut t = base.clone();
    let k = (sigma / 1e9).sqrt();
    for s in t.modes.iter_mut() {
        s.frequency_hz *= k;
        s.omega *= k;
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gap_scales_as_inverse_cube_root(
        d in 1e-6f64..2e-5,
        k in 0.01f64..100.0,
        wiggle in prop::collection::vec(-0.05f64..0.05, 7),
    ) {
        let points: Vec<(f64, f64)> = wiggle
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let v = 5.0 * (i + 1) as f64;
                (v, frequency_shift_plate(0.075e-6, 420e-12, d, 399587.0, v).unwrap() * (1.0 + w))
            })
            .collect();
        let scaled: Vec<(f64, f64)> = points.iter().map(|&(v, df)| (v, k * df)).collect();
        let ratio = gap_fit_of(scaled) / gap_fit_of(points);
        prop_assert!((ratio / k.powf(-1.0 / 3.0) - 1.0).abs() < 1e-12, "ratio {ratio}");
    }

    #[test]
    fn assignments_are_one_to_one(
        sigma in 3e8f64..2e9,
        offsets in prop::collection::vec((0usize..20, -0.04f64..0.04), 1..30),
        limit in 0.1f64..5.0,
        greedy in any::<bool>(),
    ) {
        let table = table_at(sigma);
        let peaks: Vec<f64> = offsets
            .iter()
            .map(|&(i, e)| table.modes[i % table.len()].frequency_hz * (1.0 + e))
            .collect();
        let strategy = if greedy { MatchStrategy::Greedy } else { MatchStrategy::Optimal };
        let id = identify_modes(&peaks, &table, limit, strategy).unwrap();
        let mut seen = HashSet::new();
        for a in &id.assignments {
            prop_assert!(seen.insert(a.mode), "{:?} assigned twice", a.mode);
            prop_assert!(a.rel_error_percent <= limit);
            let f = table.frequency(a.mode.0, a.mode.1).unwrap();
            prop_assert!((relative_error_percent(f, a.measured_hz) - a.rel_error_percent).abs() < 1e-12);
        }
        prop_assert_eq!(id.assignments.len() + id.unassigned.len(), peaks.len());
        prop_assert!(id.assignments.windows(2).all(|w| w[0].measured_hz <= w[1].measured_hz));
    }

    #[test]
    fn exact_peaks_match_with_zero_error(sigma in 3e8f64..2e9, keep in prop::collection::vec(any::<bool>(), 20)) {
        let table = table_at(sigma);
        let peaks: Vec<f64> = table.modes.iter().zip(&keep).filter(|(_, k)| **k).map(|(s, _)| s.frequency_hz).collect();
        let id = identify_modes(&peaks, &table, 0.5, MatchStrategy::Optimal).unwrap();
        prop_assert_eq!(id.assignments.len(), peaks.len());
        for a in &id.assignments {
            prop_assert_eq!(a.rel_error_percent, 0.0);
        }
    }
}
