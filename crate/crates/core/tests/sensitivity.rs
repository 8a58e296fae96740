use proptest::prelude::*;
use rydberg_core::experiments::{run_sensitivity_figure, ExperimentConfig};
use rydberg_core::sensitivity::*;
use rydberg_core::{PhysicalConstants, StateRegistry};

fn sensor() -> AtomSensorParams {
    let reg = StateRegistry::with_defaults();
    AtomSensorParams::new(5e5, 225e-6, reg.lookup("60D5/2", "61P3/2").unwrap()).unwrap()
}

#[test]
fn headline_values() {
    let c = PhysicalConstants::default();
    let sql = sql_sensitivity(&sensor(), &c);
    assert!((sql / 4.874e-10 - 1.0).abs() <= 1e-3, "{sql:e}");
    let hw = thermal_sensitivity(&ClassicAntennaParams::half_wave(3.213e9), &c).unwrap();
    assert!((hw / 3.63e-8 - 1.0).abs() <= 5e-3, "{hw:e}");
    let adv = advantage_db(sql, hw).unwrap();
    assert!((adv - 37.4).abs() < 0.05, "{adv}");
}

#[test]
fn figure_sweep_keeps_thirty_db_margin() {
    let cfg = ExperimentConfig::default();
    let rows = run_sensitivity_figure(&cfg, &cfg.registry().unwrap()).unwrap();
    assert_eq!(rows.len(), cfg.sensitivity.points);
    for r in &rows {
        for v in [r.sql_vpm_rthz, r.halfwave_vpm_rthz, r.fixed_vpm_rthz] {
            assert!(v.is_finite() && v > 0.0);
        }
        let adv = advantage_db(r.sql_vpm_rthz, r.halfwave_vpm_rthz).unwrap();
        assert!(adv >= 30.0, "{} Hz: {adv} dB", r.freq_hz);
        if r.freq_hz < 15e9 {
            assert!(r.fixed_vpm_rthz > r.halfwave_vpm_rthz, "{} Hz", r.freq_hz);
        }
    }
}

proptest! {
    #[test]
    fn sql_scales_with_root_atom_count(k in 1.0f64..20.0) {
        let c = PhysicalConstants::default();
        let s = sensor();
        let scaled = AtomSensorParams { atom_count: s.atom_count * k * k, ..s };
        let ratio = sql_sensitivity(&s, &c) / sql_sensitivity(&scaled, &c);
        prop_assert!((ratio / k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_wave_limit_is_linear_in_frequency(f in 0.5e9f64..100e9, k in 1.0f64..8.0) {
        let c = PhysicalConstants::default();
        let a = thermal_sensitivity(&ClassicAntennaParams::half_wave(f), &c).unwrap();
        let b = thermal_sensitivity(&ClassicAntennaParams::half_wave(k * f), &c).unwrap();
        prop_assert!((b / a / k - 1.0).abs() < 1e-12);
    }
}
