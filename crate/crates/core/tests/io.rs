use fnls::evolution::{evolve, EvolveConfig, RunObserver};
use fnls::experiment::io::{format_value, read_diagnostics, read_snapshot, write_snapshot, CsvRecorder, CSV_HEADER};
use fnls::sampling::random_bumps;
use fnls::{GridSpec, ModelParams, Spectral};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn snapshot_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::new(2, 5.0, 16).unwrap();
    let p = ModelParams::new(2, 0.8, 2.0, 1.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_bumps(g, &mut rng, 1.0, 3);
    let header = write_snapshot(dir.path(), "state", &u, &p, 0.25).unwrap();
    let (h, v) = read_snapshot(&header).unwrap();
    assert_eq!(h.t, 0.25);
    assert_eq!(h.omega, 1.5);
    assert_eq!(h.grid().unwrap(), g);
    assert!(u.values.iter().zip(&v.values).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
    let bin = std::fs::read(dir.path().join("state.bin")).unwrap();
    assert_eq!(bin.len(), 16 * g.len());
    assert_eq!(&bin[..8], &u.values[0].re.to_le_bytes());
    assert_eq!(&bin[8..16], &u.values[0].im.to_le_bytes());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&header).unwrap()).unwrap();
    for key in ["schema_version", "d", "s", "alpha", "omega", "L", "N", "t"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn values_keep_seventeen_significant_digits() {
    for v in [std::f64::consts::PI, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.1 + 0.2] {
        let text = format_value(v);
        assert_eq!(text.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{text}");
        let mantissa = text.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{text}");
    }
}

#[test]
fn diagnostics_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("diag.csv");
    let g = GridSpec::new(1, 10.0, 64).unwrap();
    let sp = Spectral::new(g);
    let p = ModelParams::new(1, 0.7, 2.0, 1.0).unwrap();
    let u0 = fnls::sampling::gaussian_packet(g, [0.0; 3], [0.5, 0.0, 0.0], 1.0, 1.0);
    let cfg = EvolveConfig { t_max: 0.1, diag_stride: 5, snapshot_stride: 50, ..EvolveConfig::default() };
    let mut rec = CsvRecorder::create(&path, &p, Some(dir.path().join("snaps"))).unwrap();
    evolve(&sp, &u0, &p, &cfg, None, &mut rec).unwrap();
    let rows = rec.finish().unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert_eq!(CSV_HEADER, "t,dt,mass,energy,hs_seminorm_sq,linf,I,K_omega,S_omega,M_phiR,M_full");
    let back = read_diagnostics(&path).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!(a.t.to_bits(), b.t.to_bits());
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        assert!(b.m_phi_r.is_nan());
    }
    assert!(back.windows(2).all(|w| w[1].t > w[0].t));
    assert!(dir.path().join("snaps/step_000000050.json").exists());
    assert!(dir.path().join("snaps/step_000000100.bin").exists());
}

#[test]
fn recorder_rejects_non_increasing_time() {
    let dir = tempfile::tempdir().unwrap();
    let p = ModelParams::new(1, 0.7, 2.0, 1.0).unwrap();
    let mut rec = CsvRecorder::create(&dir.path().join("d.csv"), &p, None).unwrap();
    let row = fnls::evolution::DiagnosticsRow::from_values(&[0.5; 11]).unwrap();
    rec.on_row(&row).unwrap();
    assert!(rec.on_row(&row).is_err());
}
