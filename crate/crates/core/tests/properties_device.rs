use memtrans::{default_device, device_to_toml, load_device, parse_device, save_device, DeviceConfig64};
use proptest::prelude::*;

#[test]
fn default_device_validates_and_survives_a_file_round_trip() {
    let cfg = default_device::<f64>();
    cfg.validate().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("device.toml");
    save_device(&cfg, &path).unwrap();
    let back: DeviceConfig64 = load_device(&path).unwrap();
    assert_eq!(back, cfg);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn toml_round_trip_is_lossless(
        young in 50e9f64..900e9,
        nu in 0.0f64..0.49,
        h in 5e-9f64..1e-6,
        sigma in 1e6f64..3e9,
        coat_density in 0.0f64..20000.0,
        coat_h in 5e-9f64..1e-6,
        loss in 0.0f64..1e-1,
        radius in 10e-6f64..1e-2,
        inner in 0.0f64..0.99,
        grid in 16usize..10000,
    ) {
        let mut cfg = default_device::<f64>();
        cfg.stack.base.young_modulus = young;
        cfg.stack.base.poisson_ratio = nu;
        cfg.stack.base.thickness = h;
        cfg.stack.base.prestress = sigma;
        cfg.stack.coating.density = coat_density;
        cfg.stack.coating.thickness = coat_h;
        cfg.stack.coating.intrinsic_loss = loss;
        cfg.stack.radius = radius;
        cfg.stack.coating_inner = inner * radius;
        cfg.stack.coating_outer = radius;
        cfg.solver.grid_n = grid;
        prop_assume!(cfg.validate().is_ok());
        let text = device_to_toml(&cfg);
        let back: DeviceConfig64 = parse_device(&text, "round-trip", None).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
