use memtrans::{
    coverage_modulation, default_device, dilution_parameter, energies_closed, energies_numeric, q_from_energies,
    q_total, uniform_modes, MembraneStack64,
};
use proptest::prelude::*;

fn stack_with(inner_frac: f64, qb: f64, qc: f64, sigma: f64) -> MembraneStack64 {
    let mut s = default_device::<f64>().stack.with_prestress(sigma);
    s.coating_inner = inner_frac * s.radius;
    s.base.intrinsic_loss = qb;
    s.coating.intrinsic_loss = qc;
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn budget_terms_add_up(
        inner_frac in 0.0f64..1.0,
        qb in 1e-6f64..1e-2,
        qc in 0.0f64..1e-1,
        sigma in 1e8f64..2e9,
        m in 1u32..=10,
    ) {
        let stack = stack_with(inner_frac, qb, qc, sigma);
        let b = q_total(&stack, (0, m)).unwrap();
        let inv = 1.0 / b.q_total.value().unwrap();
        let sum = b.edge_term + b.dist_base_term + b.dist_coat_term;
        prop_assert!((inv - sum).abs() <= 1e-15 * sum, "{inv} vs {sum}");
        let inv_bil = 1.0 / b.q_bilayer.value().unwrap();
        prop_assert!((inv_bil - b.dist_base_term - b.dist_coat_term).abs() <= 1e-15 * inv_bil);
        prop_assert!(b.q_total.value().unwrap() < b.q_bilayer.value().unwrap());
    }

    #[test]
    fn q_ignores_mode_amplitude(
        amp_a in 1e-15f64..1e-6,
        amp_b in 1e-15f64..1e-6,
        inner_frac in 0.0f64..0.95,
        m in 1u32..=10,
    ) {
        let stack = stack_with(inner_frac, 2e-4, 1e-3, 1e9);
        let qa = q_from_energies(&stack, &energies_closed(&stack, (0, m), amp_a).unwrap()).value().unwrap();
        let qb = q_from_energies(&stack, &energies_closed(&stack, (0, m), amp_b).unwrap()).value().unwrap();
        prop_assert!((qa / qb - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_stays_in_unit_interval(inner_frac in 0.0f64..=1.0, m in 1u32..=10) {
        let stack = stack_with(inner_frac, 2e-4, 1e-3, 1e9);
        let f = coverage_modulation(&stack, m).unwrap();
        prop_assert!((-1e-15..=1.0 + 1e-15).contains(&f), "f = {f}");
    }

    #[test]
    fn dilution_matches_rigidity_over_tension(
        young in 50e9f64..800e9,
        nu in 0.0f64..0.45,
        h in 10e-9f64..500e-9,
        sigma in 1e7f64..3e9,
        radius in 50e-6f64..5e-3,
    ) {
        let mut layer = default_device::<f64>().stack.base;
        layer.young_modulus = young;
        layer.poisson_ratio = nu;
        layer.thickness = h;
        let lambda = dilution_parameter(&layer, radius, sigma).unwrap();
        let lhs = lambda * lambda * sigma * h * radius * radius;
        let rhs = young * h.powi(3) / (12.0 * (1.0 - nu * nu));
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-12);
    }
}

#[test]
fn numeric_energies_are_amplitude_invariant() {
    let stack = default_device::<f64>().stack;
    let table = uniform_modes(&stack, 0, 10).unwrap();
    for s in &table.modes {
        let q1 = q_from_energies(&stack, &energies_numeric(&stack, s, 1e-9, 1e-10).unwrap());
        let q2 = q_from_energies(&stack, &energies_numeric(&stack, s, 3.7e-7, 1e-10).unwrap());
        let (q1, q2) = (q1.value().unwrap(), q2.value().unwrap());
        assert!((q1 / q2 - 1.0).abs() < 1e-10, "{:?}: {q1} vs {q2}", s.index());
    }
}
