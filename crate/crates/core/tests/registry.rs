use std::path::PathBuf;

use rydberg_core::registry::{mean_radius, Orbital};
use rydberg_core::{Error, PhysicalConstants, RydbergState, StateRegistry, Transition};

#[test]
fn default_entries() {
    let reg = StateRegistry::with_defaults();
    let comm = reg.lookup("60D5/2", "61P3/2").unwrap();
    assert_eq!((comm.dipole_moment, comm.frequency), (2.04e-26, 3.213e9));
    let sense = reg.lookup("60D5/2", "62P3/2").unwrap();
    assert_eq!((sense.dipole_moment, sense.frequency), (6.24e-27, 30.618e9));
    assert_eq!(reg.lookup("56D5/2", "57P3/2").unwrap().frequency, 12.01e9);
    assert!(matches!(
        StateRegistry::new(PhysicalConstants::default()).lookup("1S1/2", "2P1/2"),
        Err(Error::NotFound(_))
    ));
}

#[test]
fn duplicates_and_bad_labels_are_rejected() {
    let reg = StateRegistry::with_defaults();
    let again = *reg.lookup("60D5/2", "61P3/2").unwrap();
    assert!(reg.clone().register_transition(again).is_err());
    assert!("47S5/2".parse::<RydbergState>().is_err());
    assert!("52F3/2".parse::<RydbergState>().is_err());
}

#[test]
fn csv_file_round_trip() {
    let reg = StateRegistry::with_defaults();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let mut buf = Vec::new();
    reg.write_csv(&mut buf).unwrap();
    std::fs::write(&path, buf).unwrap();
    let back = StateRegistry::from_csv_path(&path, *reg.constants()).unwrap();
    assert_eq!(back.transitions(), reg.transitions());
}

#[test]
fn shipped_five_band_table_loads() {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/five_band_registry.csv");
    let reg = StateRegistry::from_csv_path(path, PhysicalConstants::default()).unwrap();
    let lower: RydbergState = "60D5/2".parse().unwrap();
    let freqs: Vec<f64> = reg
        .transitions()
        .iter()
        .map(|t: &Transition| t.frequency)
        .collect();
    assert_eq!(freqs, vec![1.72e9, 12.11e9, 27.42e9, 65.11e9, 115.75e9]);
    assert!(reg.transitions().iter().all(|t| t.lower == lower));
}

#[test]
fn radius_grows_as_n_squared() {
    let c = PhysicalConstants::default();
    let s = |n| RydbergState::new(n, Orbital::S, 1).unwrap();
    assert!((mean_radius(&s(10), &c) / c.bohr_radius - 150.0).abs() < 1e-9);
    let mut last = 0.0;
    for n in 1..200 {
        let r = mean_radius(&s(n), &c);
        assert!(r > last);
        last = r;
    }
    let ratio = mean_radius(&s(2000), &c) / mean_radius(&s(1000), &c);
    assert!((ratio - 4.0).abs() < 1e-3);
}
