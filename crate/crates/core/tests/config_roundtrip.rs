use std::path::PathBuf;

use esc_lab::config::{IntegrationConfig, LineGrid, RunConfig};
use esc_lab::dynamics::{CoordSystem, EscParams};
use proptest::prelude::*;

const COORDS: [CoordSystem; 7] = [
    CoordSystem::Full,
    CoordSystem::Avg,
    CoordSystem::ErrLog,
    CoordSystem::ErrGamma,
    CoordSystem::GescModel,
    CoordSystem::GescFull,
    CoordSystem::GescAvg,
];

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, 1e-300..1e-3f64, Just(0.1), Just(1.0 / 3.0)]
}

prop_compose! {
    fn run_config()(
        description in proptest::option::of("[a-z ]{0,20}"),
        map in prop::sample::select(vec!["paper-example", "quadratic", "quartic", "abs-smooth"]),
        coords in prop::sample::select(COORDS.to_vec()),
        (a, omega, k, omega_l) in (finite(), finite(), finite(), finite()),
        dt in proptest::option::of(finite()),
        t_final in finite(),
        record_every in 1usize..1000,
        initial_states in prop::collection::vec(prop::collection::vec(finite(), 1..3), 0..4),
        out in "[a-z]{1,8}(/[a-z]{1,8})?",
        thresholds in prop::collection::vec(finite(), 0..3),
        table in (finite(), finite(), 1usize..200),
        equilibrium_tol in finite(),
        svg in any::<bool>(),
    ) -> RunConfig {
        let mut cfg = RunConfig {
            description,
            map: map.to_string(),
            coords,
            params: EscParams { k, omega_l, ..EscParams::new(1.0, 1.0, 1.0, 1.0).unwrap() },
            integration: IntegrationConfig { dt, t_final, record_every },
            initial_states,
            out: PathBuf::from(out),
            ..RunConfig::default()
        };
        cfg.params.dither.amplitude = a;
        cfg.params.dither.omega = omega;
        cfg.options.thresholds = thresholds;
        cfg.options.table = LineGrid { lo: table.0, hi: table.1, n: table.2 };
        cfg.options.equilibrium_tol = equilibrium_tol;
        cfg.options.svg = svg;
        cfg
    }
}

proptest! {
    #[test]
    fn serialized_config_reparses_identically(cfg in run_config()) {
        let text = cfg.to_json().unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_json().unwrap(), text);
    }
}

#[test]
fn shipped_presets_parse_and_validate() {
    let registry = esc_lab::scalar_maps::MapRegistry::default();
    for name in ["fig2.json", "fig3.json"] {
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets").join(name);
        let cfg = RunConfig::load(&path).unwrap();
        cfg.validate(&registry).unwrap();
        assert_eq!(cfg.map, "paper-example");
        assert_eq!((cfg.params.a(), cfg.params.omega(), cfg.params.k, cfg.params.omega_l), (0.5, 10.0, 0.001, 0.001));
        assert_eq!(cfg.integration.t_final, 1e4);
    }
}

#[test]
fn unknown_field_reports_its_path() {
    let text = r#"{
  "map": "quadratic",
  "params": { "a": 0.5, "omega": 10.0, "k": 1.0, "omega_l": 1.0 },
  "integration": { "t_final": 1.0, "stepsize": 0.1 }
}"#;
    let msg = RunConfig::from_json(text).unwrap_err().to_string();
    assert!(msg.contains("integration"), "{msg}");
    assert!(msg.contains("stepsize"), "{msg}");
    assert!(msg.contains("line 4"), "{msg}");
}
